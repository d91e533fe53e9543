"""Moment-parameterized sampling distributions and reproducible random streams.

Every family is described by its mean and variance only; native parameters are
solved from those two moments so experiment configurations stay family-agnostic.

Streams are Philox (counter-based) generators keyed by ``(seed, *key)`` through
:class:`numpy.random.SeedSequence`, so any replication or alternative can be
reconstructed independently of the order in which others were run.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

SQRT3 = math.sqrt(3.0)


class InvalidMoments(ValueError):
    """Raised when a (mean, variance) pair has no valid parameterization."""


class Family(enum.IntEnum):
    # integer values are shared with the compiled kernel
    NORMAL = 0
    UNIFORM = 1
    SHIFTED_EXPONENTIAL = 2
    SCALED_BERNOULLI = 3

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {
            "normal": cls.NORMAL,
            "gaussian": cls.NORMAL,
            "uniform": cls.UNIFORM,
            "shifted_exponential": cls.SHIFTED_EXPONENTIAL,
            "exponential": cls.SHIFTED_EXPONENTIAL,
            "scaled_bernoulli": cls.SCALED_BERNOULLI,
            "bernoulli": cls.SCALED_BERNOULLI,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown distribution family {name!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class DistributionSpec:
    """An i.i.d. observation law fixed by its first two moments.

    ``p`` is only used by ``SCALED_BERNOULLI``: the probability of the upper
    support point. With ``p = 1/2`` the support is ``mean +/- sd``.
    """

    family: Family
    mean: float
    variance: float
    p: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "family", Family.parse(self.family))
        validate(self)

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def support(self) -> tuple[float, float]:
        """Two-point support ``(low, high)`` of the scaled Bernoulli family."""
        sd = self.sd
        low = self.mean - sd * math.sqrt(self.p / (1.0 - self.p))
        high = self.mean + sd * math.sqrt((1.0 - self.p) / self.p)
        return low, high

    def kernel_params(self) -> tuple[int, float, float, float, float, float]:
        """``(family, loc, scale, p, low, high)`` such that an observation is
        ``loc + scale * raw`` for the family's raw standard draw."""
        sd = self.sd
        low, high = (0.0, 0.0)
        if self.family is Family.NORMAL:
            loc, scale = self.mean, sd
        elif self.family is Family.UNIFORM:
            loc, scale = self.mean, sd * SQRT3
        elif self.family is Family.SHIFTED_EXPONENTIAL:
            loc, scale = self.mean - sd, sd
        else:
            loc, scale = self.mean, sd
            low, high = self.support()
        return int(self.family), loc, scale, self.p, low, high


def validate(spec: DistributionSpec) -> None:
    """Raise :class:`InvalidMoments` unless ``spec`` is a usable sampling law."""
    if not math.isfinite(spec.mean):
        raise InvalidMoments(f"mean must be finite, got {spec.mean!r}")
    if not (math.isfinite(spec.variance) and spec.variance > 0.0):
        raise InvalidMoments(f"variance must be finite and > 0, got {spec.variance!r}")
    if spec.family is Family.SCALED_BERNOULLI and not (0.0 < spec.p < 1.0):
        raise InvalidMoments(f"scaled Bernoulli needs p in (0, 1), got {spec.p!r}")


@dataclass
class RandomStream:
    """A single-owner stream of random numbers with a stable identity."""

    seed: int
    key: tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.key = tuple(int(k) for k in self.key)
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key)
        self.generator = np.random.Generator(np.random.Philox(ss))

    @property
    def stream_id(self) -> tuple[int, ...]:
        return (int(self.seed),) + self.key

    @property
    def bit_generator(self) -> np.random.BitGenerator:
        return self.generator.bit_generator

    def raw(self, family: Family, n: int) -> np.ndarray:
        """``n`` standard draws for ``family`` (normal, U(0,1), or Exp(1))."""
        gen = self.generator
        if family is Family.NORMAL:
            return gen.standard_normal(n)
        if family is Family.SHIFTED_EXPONENTIAL:
            return gen.standard_exponential(n)
        return gen.random(n)


def transform(spec: DistributionSpec, raw: np.ndarray) -> np.ndarray:
    """Map raw standard draws onto observations with ``spec``'s moments."""
    fam, loc, scale, p, low, high = spec.kernel_params()
    if fam == Family.SCALED_BERNOULLI:
        return np.where(raw < p, high, low)
    if fam == Family.UNIFORM:
        return loc + scale * (2.0 * raw - 1.0)
    return loc + scale * raw


def sample_many(spec: DistributionSpec, rng: RandomStream, n: int) -> np.ndarray:
    return transform(spec, rng.raw(spec.family, n))


def sample(spec: DistributionSpec, rng: RandomStream) -> float:
    """Draw one observation from ``spec`` using ``rng``."""
    return float(sample_many(spec, rng, 1)[0])


def alternative_streams(seed: int, k: int, *key: int) -> list[RandomStream]:
    """One independent stream per alternative, keyed ``(seed, *key, x)``."""
    return [RandomStream(seed, (*key, x)) for x in range(k)]
