"""Discrete-time BIZ sequential elimination, known- and unknown-variance modes.

Alternatives are 0-based throughout. The pure-Python path in this module is the
reference implementation; :func:`run_biz` dispatches to the compiled kernel in
``bizsel._kernels`` when it is available (see :mod:`bizsel._backend`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from bizsel import _backend
from bizsel.distributions import RandomStream, alternative_streams, sample_many
from bizsel.problem import ProblemConfig
from bizsel.selection import Elimination, SelectionMap, max_elimination_c, stable_softmax

Sampler = Callable[[int, int], np.ndarray]

DEFAULT_MAX_TOTAL_SAMPLES = 10**8

# First-stage sizes. Known variances need no first stage. For unknown variances
# the prose recommends 100 while the algorithm block recommends 10 to 30.
N0_KNOWN = 0
N0_UNKNOWN_RECOMMENDED = 100
N0_UNKNOWN_RANGE = (10, 30)


class InvalidParams(ValueError):
    pass


class ZeroVarianceEstimate(ArithmeticError):
    """An active alternative has sample variance 0 and no floor was requested."""


class StageCapExceeded(RuntimeError):
    """The run exceeded its sample (or step) budget."""


class ZRule(enum.Enum):
    MAX_VARIANCE = "max_variance"
    MIN_COUNT_OVER_VARIANCE = "min_count_over_variance"


@dataclass(frozen=True)
class BizParams:
    """Procedure parameters.

    ``variances`` given means known-variance mode; ``None`` means the
    variances are estimated from the samples. ``c`` and ``batch`` default to
    the recommended maximum elimination level and unit batches.
    """

    k: int
    p_star: float
    delta: float
    c: float | None = None
    n0: int = 0
    batch: tuple[int, ...] | None = None
    variances: tuple[float, ...] | None = None
    z_rule: ZRule = ZRule.MAX_VARIANCE
    variance_floor: float | None = None
    max_total_samples: int = DEFAULT_MAX_TOTAL_SAMPLES

    def __post_init__(self) -> None:
        k = self.k
        if k < 1:
            raise InvalidParams(f"k must be >= 1, got {k}")
        if self.c is None:
            object.__setattr__(self, "c", max_elimination_c(self.p_star, k))
        if self.batch is None:
            object.__setattr__(self, "batch", (1,) * k)
        else:
            object.__setattr__(self, "batch", tuple(int(b) for b in self.batch))
        if self.variances is not None:
            object.__setattr__(self, "variances", tuple(float(v) for v in self.variances))
        object.__setattr__(self, "z_rule", ZRule(self.z_rule))
        self._validate()

    def _validate(self) -> None:
        k, p_star, c = self.k, self.p_star, self.c
        lo = 1.0 / k if k > 1 else 0.0
        if not (lo < p_star < 1.0):
            raise InvalidParams(f"p_star must lie in ({lo:g}, 1), got {p_star!r}")
        c_max = max_elimination_c(p_star, k)
        if k > 1 and not (0.0 <= c <= c_max * (1.0 + 1e-12)):
            raise InvalidParams(f"c must lie in [0, {c_max:.6g}] for p_star={p_star:g}, k={k}; got {c!r}")
        if not (math.isfinite(self.delta) and self.delta > 0):
            raise InvalidParams(f"delta must be positive, got {self.delta!r}")
        if self.n0 < 0:
            raise InvalidParams(f"n0 must be >= 0, got {self.n0}")
        if len(self.batch) != k or min(self.batch) < 1:
            raise InvalidParams(f"batch must hold {k} integers >= 1, got {self.batch}")
        if self.variances is None:
            if self.n0 < 2:
                raise InvalidParams("unknown-variance mode needs n0 >= 2")
        else:
            if len(self.variances) != k:
                raise InvalidParams(f"expected {k} known variances, got {len(self.variances)}")
            if not all(math.isfinite(v) and v > 0 for v in self.variances):
                raise InvalidParams("known variances must be finite and > 0")
        if self.variance_floor is not None and not self.variance_floor > 0:
            raise InvalidParams("variance_floor must be > 0 when given")
        if self.max_total_samples < 1:
            raise InvalidParams("max_total_samples must be >= 1")

    @property
    def known(self) -> bool:
        return self.variances is not None

    def with_delta(self, delta: float) -> "BizParams":
        return replace(self, delta=delta)


@dataclass(frozen=True)
class RunOutcome:
    selected: int
    correct: bool
    total_samples: int
    stages: int
    eliminations: tuple[Elimination, ...] = ()
    counts: tuple[int, ...] = ()
    threshold: float = float("nan")


@dataclass
class ProcedureState:
    """Mutable bookkeeping for one run.

    ``sums`` and ``m2`` together with ``counts`` are the per-alternative
    streaming statistics; the running mean is ``sums / counts``.
    """

    selection: SelectionMap
    counts: np.ndarray
    sums: np.ndarray
    m2: np.ndarray
    stage: int = 0
    z_index: int | None = None

    @classmethod
    def initial(cls, params: BizParams) -> "ProcedureState":
        k = params.k
        return cls(
            selection=SelectionMap.start(k, params.p_star, params.c),
            counts=np.zeros(k, dtype=np.int64),
            sums=np.zeros(k),
            m2=np.zeros(k),
        )

    @property
    def active(self) -> list[int]:
        return self.selection.active

    @property
    def threshold(self) -> float:
        return self.selection.threshold

    @property
    def eliminations(self) -> list[Elimination]:
        return self.selection.eliminations

    @property
    def total_samples(self) -> int:
        return int(self.counts.sum())

    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.sums / self.counts

    def sample_variances(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.counts >= 2, self.m2 / (self.counts - 1), np.nan)

    def add_observations(self, x: int, values: np.ndarray) -> None:
        """Fold a batch into alternative ``x``'s running sum and M2.

        Sums accumulate strictly left to right (``cumsum``) so the result does
        not depend on how the draws were batched; M2 uses the pairwise merge.
        """
        m = len(values)
        if m == 0:
            return
        n_a = int(self.counts[x])
        batch_mean = np.cumsum(values)[-1] / m
        batch_m2 = np.cumsum((values - batch_mean) ** 2)[-1]
        if n_a == 0:
            self.m2[x] = batch_m2
        else:
            d = batch_mean - self.sums[x] / n_a
            self.m2[x] = self.m2[x] + batch_m2 + d * d * n_a * m / (n_a + m)
        self.sums[x] = np.cumsum(np.concatenate(([self.sums[x]], values)))[-1]
        self.counts[x] += m


def _variances(state: ProcedureState, params: BizParams, xs: Sequence[int]) -> np.ndarray:
    idx = np.asarray(xs, dtype=np.intp)
    if params.known:
        return np.asarray(params.variances)[idx]
    n = state.counts[idx]
    if np.any(n < 2):
        raise ValueError("sample variance needs at least two observations")
    v = state.m2[idx] / (n - 1)
    zero = v <= 0.0
    if zero.any():
        if params.variance_floor is None:
            bad = [int(x) for x in idx[zero]]
            raise ZeroVarianceEstimate(f"zero sample variance for alternatives {bad} at stage {state.stage}")
        v = np.where(zero, params.variance_floor, v)
    return v


def _beta(state: ProcedureState, params: BizParams, xs: Sequence[int]) -> float:
    idx = np.asarray(xs, dtype=np.intp)
    return float(state.counts[idx].sum() / _variances(state, params, idx).sum())


def compute_beta(state: ProcedureState, params: BizParams) -> float:
    """Total active sample count over total active variance."""
    if np.any(state.counts[state.active] < 1):
        raise ValueError("beta needs at least one observation per active alternative")
    return _beta(state, params, state.active)


def compute_q(zn_ratios: Sequence[float], beta: float, delta: float) -> np.ndarray:
    """Softmax of ``delta * beta * Z/n`` over the active alternatives."""
    ratios = np.asarray(zn_ratios, dtype=float)
    return stable_softmax(delta * beta * ratios)


def _q_function(state: ProcedureState, params: BizParams):
    def q_of(active: Sequence[int]) -> np.ndarray:
        idx = np.asarray(active, dtype=np.intp)
        ratios = state.sums[idx] / state.counts[idx]
        return compute_q(ratios, _beta(state, params, idx), params.delta)

    return q_of


def elimination_sweep(state: ProcedureState, params: BizParams) -> ProcedureState:
    q_of = _q_function(state, params)
    state.selection.sweep(q_of(state.active), q_of, state.stage)
    return state


def select_z(state: ProcedureState, params: BizParams) -> int:
    """Reference alternative for the sampling rule (ties go to the lowest index)."""
    active = state.active
    v = _variances(state, params, active)
    if params.z_rule is ZRule.MAX_VARIANCE:
        return active[int(np.argmax(v))]
    return active[int(np.argmin(state.counts[active] / v))]


def sampling_rule(state: ProcedureState, params: BizParams) -> np.ndarray:
    """Next-stage counts for every alternative (inactive ones unchanged).

    Active targets are ``ceil(var_x * (n_z + B_z) / var_z)``; counts never
    decrease, and ``z`` itself always receives exactly ``B_z`` more.
    """
    z = state.z_index
    if z is None or z not in state.active:
        raise ValueError("z must be an active alternative")
    active = state.active
    v = _variances(state, params, active)
    vz = float(v[active.index(z)])
    nz = int(state.counts[z]) + params.batch[z]
    nxt = state.counts.copy()
    for x, vx in zip(active, v):
        target = nz if x == z else math.ceil(vx * nz / vz)
        nxt[x] = max(target, int(state.counts[x]))
    return nxt


def _advance(state: ProcedureState, params: BizParams, draw: Sampler) -> None:
    nxt = sampling_rule(state, params)
    for x in state.active:
        extra = int(nxt[x] - state.counts[x])
        if extra > 0:
            state.add_observations(x, np.asarray(draw(x, extra), dtype=float))
    state.stage += 1
    if state.total_samples > params.max_total_samples:
        raise StageCapExceeded(
            f"{state.total_samples} samples after {state.stage} stages exceeds cap {params.max_total_samples}"
        )


def _outcome(config: ProblemConfig, state: ProcedureState) -> RunOutcome:
    active = state.active
    ratios = state.sums[active] / np.maximum(state.counts[active], 1)
    selected = active[int(np.argmax(ratios))]
    return RunOutcome(
        selected=selected,
        correct=selected == config.best,
        total_samples=state.total_samples,
        stages=state.stage,
        eliminations=tuple(state.eliminations),
        counts=tuple(int(n) for n in state.counts),
        threshold=state.threshold,
    )


def run_biz_python(
    config: ProblemConfig,
    params: BizParams,
    draw: Sampler,
    observer: Callable[[ProcedureState], None] | None = None,
) -> RunOutcome:
    """Reference run loop; ``draw(x, m)`` returns ``m`` fresh observations of ``x``.

    ``observer`` sees the state after the first stage and after every
    sampling stage.
    """
    state = ProcedureState.initial(params)
    if config.k == 1:
        return _outcome(config, state)
    if params.n0 > 0:
        for x in range(config.k):
            state.add_observations(x, np.asarray(draw(x, params.n0), dtype=float))
    state.z_index = select_z(state, params)
    q_of = _q_function(state, params)
    if state.counts.min() == 0:
        _advance(state, params, draw)
    if observer is not None:
        observer(state)
    while not state.selection.step(q_of, state.stage):
        if state.z_index not in state.active or params.z_rule is ZRule.MIN_COUNT_OVER_VARIANCE:
            state.z_index = select_z(state, params)
        _advance(state, params, draw)
        if observer is not None:
            observer(state)
    return _outcome(config, state)


def _run_compiled(config: ProblemConfig, params: BizParams, streams: Sequence[RandomStream]) -> RunOutcome:
    k = config.k
    kp = np.array([s.kernel_params() for s in config.specs], dtype=float)
    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros(k)
    m2 = np.zeros(k)
    elim_stage = np.zeros(k, dtype=np.int64)
    elim_alt = np.zeros(k, dtype=np.int64)
    elim_q = np.zeros(k)
    known_var = np.asarray(params.variances if params.known else [1.0] * k, dtype=float)
    status, selected, stages, n_elim, threshold = _backend.kernels().run_discrete(
        [s.bit_generator for s in streams],
        kp[:, 0].astype(np.int64),
        np.ascontiguousarray(kp[:, 1]),
        np.ascontiguousarray(kp[:, 2]),
        np.ascontiguousarray(kp[:, 3]),
        np.ascontiguousarray(kp[:, 4]),
        np.ascontiguousarray(kp[:, 5]),
        known_var,
        params.known,
        params.p_star,
        params.c,
        params.delta,
        params.n0,
        np.asarray(params.batch, dtype=np.int64),
        params.z_rule is ZRule.MIN_COUNT_OVER_VARIANCE,
        params.variance_floor if params.variance_floor is not None else -1.0,
        params.max_total_samples,
        counts,
        sums,
        m2,
        elim_stage,
        elim_alt,
        elim_q,
    )
    if status == _backend.STATUS_CAP:
        raise StageCapExceeded(f"{int(counts.sum())} samples after {stages} stages exceeds cap {params.max_total_samples}")
    if status == _backend.STATUS_ZERO_VARIANCE:
        raise ZeroVarianceEstimate(f"zero sample variance at stage {stages}")
    elims = tuple(Elimination(int(elim_stage[i]), int(elim_alt[i]), float(elim_q[i])) for i in range(n_elim))
    return RunOutcome(
        selected=int(selected),
        correct=int(selected) == config.best,
        total_samples=int(counts.sum()),
        stages=int(stages),
        eliminations=elims,
        counts=tuple(int(n) for n in counts),
        threshold=float(threshold),
    )


def run_biz(
    config: ProblemConfig,
    params: BizParams,
    rng: Sequence[RandomStream] | int | None = None,
    *,
    backend: str = "auto",
    sampler: Sampler | None = None,
    observer: Callable[[ProcedureState], None] | None = None,
) -> RunOutcome:
    """Run the procedure once.

    ``rng`` is either one stream per alternative or an integer seed from which
    those streams are derived. A custom ``sampler`` (which bypasses the
    configured distributions) or an ``observer`` forces the Python path.
    """
    if params.k != config.k:
        raise InvalidParams(f"params are for k={params.k}, problem has k={config.k}")
    if sampler is not None:
        return run_biz_python(config, params, sampler, observer)
    if rng is None or isinstance(rng, (int, np.integer)):
        streams = alternative_streams(0 if rng is None else int(rng), config.k)
    else:
        streams = list(rng)
        if len(streams) != config.k:
            raise ValueError(f"need {config.k} streams, got {len(streams)}")
    if config.k > 1 and observer is None and _backend.use_compiled(backend):
        return _run_compiled(config, params, streams)
    specs = config.specs

    def draw(x: int, m: int) -> np.ndarray:
        return sample_many(specs[x], streams[x], m)

    return run_biz_python(config, params, draw, observer)
