"""Monte Carlo estimation of the probability of correct selection.

Replication ``i`` of an estimate keyed ``key`` draws alternative ``x`` from
the stream ``(seed, *key, i, x)``. Results therefore do not depend on the
number of workers or on the order in which replications finish.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np

from bizsel.biz_core import BizParams, RunOutcome, run_biz
from bizsel.continuous import BrownianOracleConfig, run_continuous_biz
from bizsel.distributions import RandomStream, alternative_streams
from bizsel.problem import ProblemConfig, ProblemFamily

Procedure = Callable[[ProblemConfig, BizParams, Sequence[RandomStream]], RunOutcome]

CI_METHODS = ("normal", "wilson")


class ReplicationError(RuntimeError):
    """A replication failed; ``index`` identifies it and ``__cause__`` holds the error."""

    def __init__(self, index: int, error: BaseException):
        super().__init__(f"replication {index} failed: {type(error).__name__}: {error}")
        self.index = index
        self.error = error


@dataclass(frozen=True)
class McResult:
    reps: int
    correct: int
    pcs: float
    ci_low: float
    ci_high: float
    mean_total_samples: float
    mean_stages: float
    seed: int = 0

    @property
    def half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0

    @property
    def ci_length(self) -> float:
        return self.ci_high - self.ci_low


def binomial_ci(correct: int, reps: int, level: float = 0.95, method: str = "normal") -> tuple[float, float]:
    """Two-sided confidence interval for a binomial proportion.

    ``normal`` is the Wald interval clipped to [0, 1]; ``wilson`` is the
    score interval, better behaved for counts near 0 or ``reps``.
    """
    if reps <= 0:
        raise ValueError("reps must be positive")
    if not 0 <= correct <= reps:
        raise ValueError(f"correct={correct} outside [0, {reps}]")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level!r}")
    z = NormalDist().inv_cdf(0.5 + level / 2.0)
    p = correct / reps
    if method == "normal":
        half = z * math.sqrt(p * (1.0 - p) / reps)
        low, high = p - half, p + half
    elif method == "wilson":
        z2 = z * z
        denom = 1.0 + z2 / reps
        center = (p + z2 / (2.0 * reps)) / denom
        half = z / denom * math.sqrt(p * (1.0 - p) / reps + z2 / (4.0 * reps * reps))
        low, high = center - half, center + half
    else:
        raise ValueError(f"method must be one of {CI_METHODS}, got {method!r}")
    if correct == 0:
        low = 0.0
    if correct == reps:
        high = 1.0
    return max(0.0, low), min(1.0, high)


def replicate(
    run_one: Callable[[int], RunOutcome],
    reps: int,
    best: int,
    *,
    seed: int = 0,
    workers: int = 1,
    level: float = 0.95,
    ci_method: str = "normal",
) -> McResult:
    """Run ``run_one(i)`` for ``i < reps`` and summarize correct selections."""
    if reps < 1:
        raise ValueError("reps must be >= 1")

    def guarded(i: int) -> RunOutcome:
        try:
            return run_one(i)
        except Exception as exc:
            raise ReplicationError(i, exc) from exc

    if workers <= 1:
        outcomes = [guarded(i) for i in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(guarded, range(reps)))
    correct = sum(1 for o in outcomes if o.selected == best)
    samples = sum(int(o.total_samples) for o in outcomes)
    stages = sum(int(o.stages) for o in outcomes)
    low, high = binomial_ci(correct, reps, level, ci_method)
    return McResult(
        reps=reps,
        correct=correct,
        pcs=correct / reps,
        ci_low=low,
        ci_high=high,
        mean_total_samples=samples / reps,
        mean_stages=stages / reps,
        seed=seed,
    )


def estimate_pcs(
    config: ProblemConfig,
    params: BizParams,
    reps: int,
    seed: int,
    *,
    workers: int = 1,
    procedure: Procedure | None = None,
    key: Sequence[int] = (),
    backend: str = "auto",
    level: float = 0.95,
    ci_method: str = "normal",
) -> McResult:
    """PCS of the discrete procedure (or ``procedure``) on ``config``."""
    key = tuple(key)
    if procedure is None:

        def procedure(cfg, prm, streams):
            return run_biz(cfg, prm, streams, backend=backend)

    def run_one(i: int) -> RunOutcome:
        return procedure(config, params, alternative_streams(seed, config.k, *key, i))

    return replicate(run_one, reps, config.best, seed=seed, workers=workers, level=level, ci_method=ci_method)


def estimate_oracle_pcs(
    cfg: BrownianOracleConfig,
    reps: int,
    seed: int,
    *,
    workers: int = 1,
    key: Sequence[int] = (),
    backend: str = "auto",
    level: float = 0.95,
    ci_method: str = "normal",
) -> McResult:
    """PCS of the Brownian oracle; the best alternative has the largest drift."""
    key = tuple(key)

    def run_one(i: int) -> RunOutcome:
        return run_continuous_biz(cfg, alternative_streams(seed, cfg.k, *key, i), backend=backend)

    return replicate(run_one, reps, cfg.best, seed=seed, workers=workers, level=level, ci_method=ci_method)


def log_grid(low: float = 0.1, high: float = 10.0, n: int = 20) -> list[float]:
    """``n`` log-spaced values from ``high`` down to ``low``."""
    if n == 1:
        return [float(high)]
    return [float(d) for d in np.geomspace(high, low, n)]


def _check_grid(grid: Sequence[float]) -> list[float]:
    grid = [float(d) for d in grid]
    if not grid:
        raise ValueError("delta grid is empty")
    if any(not (d > 0 and math.isfinite(d)) for d in grid):
        raise ValueError("delta grid entries must be positive and finite")
    steps = np.diff(grid)
    if len(grid) > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ValueError("delta grid must be strictly monotone")
    return grid


def sweep_delta(
    family: ProblemFamily,
    grid: Sequence[float],
    params: BizParams,
    reps: int,
    seed: int,
    *,
    progress: Callable[[float, McResult], None] | None = None,
    **kwargs,
) -> list[tuple[float, McResult]]:
    """PCS at each ``delta`` with means ``delta * drift``.

    Point ``j`` of the grid uses stream key ``(j,)``.
    """
    out = []
    for j, delta in enumerate(_check_grid(grid)):
        res = estimate_pcs(family.at(delta), params.with_delta(delta), reps, seed, key=(j,), **kwargs)
        out.append((delta, res))
        if progress is not None:
            progress(delta, res)
    return out
