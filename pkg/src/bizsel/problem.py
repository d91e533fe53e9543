"""Problem configurations: the k sampling laws and the slippage families."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bizsel.distributions import DistributionSpec, Family


@dataclass(frozen=True)
class ProblemConfig:
    """k alternatives; ``best`` is the (0-based) index of the largest mean."""

    specs: tuple[DistributionSpec, ...]
    best: int | None = None
    label: str = ""

    def __post_init__(self) -> None:
        specs = tuple(self.specs)
        if not specs:
            raise ValueError("a problem needs at least one alternative")
        object.__setattr__(self, "specs", specs)
        means = [s.mean for s in specs]
        if self.best is None:
            object.__setattr__(self, "best", int(np.argmax(means)))
        if not 0 <= self.best < len(specs):
            raise ValueError(f"best index {self.best} out of range for k={len(specs)}")
        if means[self.best] < max(means):
            raise ValueError(f"alternative {self.best} does not have the largest mean")

    @property
    def k(self) -> int:
        return len(self.specs)

    @property
    def means(self) -> np.ndarray:
        return np.array([s.mean for s in self.specs])

    @property
    def variances(self) -> np.ndarray:
        return np.array([s.variance for s in self.specs])

    @classmethod
    def from_moments(
        cls,
        means: Sequence[float],
        variances: Sequence[float] | float,
        family: Family | str = Family.NORMAL,
        *,
        label: str = "",
        p: float = 0.5,
    ) -> "ProblemConfig":
        k = len(means)
        if np.isscalar(variances):
            variances = [float(variances)] * k
        if len(variances) != k:
            raise ValueError(f"{len(variances)} variances for {k} means")
        fam = Family.parse(family)
        specs = tuple(DistributionSpec(fam, float(m), float(v), p) for m, v in zip(means, variances))
        return cls(specs, label=label)


def slippage_drift(k: int) -> tuple[float, ...]:
    """``a = (0, ..., 0, 1)``: the best alternative leads the rest by one unit."""
    return tuple([0.0] * (k - 1) + [1.0])


@dataclass(frozen=True)
class ProblemFamily:
    """Configurations indexed by ``delta`` with means ``delta * drift``.

    Variances do not depend on ``delta``.
    """

    drift: tuple[float, ...]
    variances: tuple[float, ...]
    family: Family = Family.NORMAL
    p: float = 0.5
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "drift", tuple(float(a) for a in self.drift))
        object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
        object.__setattr__(self, "family", Family.parse(self.family))
        if len(self.drift) != len(self.variances):
            raise ValueError("drift and variances must have the same length")

    @property
    def k(self) -> int:
        return len(self.drift)

    @classmethod
    def slippage(
        cls, variances: Sequence[float], family: Family | str = Family.NORMAL, label: str = ""
    ) -> "ProblemFamily":
        return cls(slippage_drift(len(variances)), tuple(variances), Family.parse(family), label=label)

    def at(self, delta: float) -> ProblemConfig:
        if not delta > 0:
            raise ValueError(f"delta must be positive, got {delta!r}")
        means = [delta * a for a in self.drift]
        return ProblemConfig.from_moments(means, self.variances, self.family, label=self.label, p=self.p)
