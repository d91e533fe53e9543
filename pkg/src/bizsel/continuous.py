"""Continuous-time BIZ driven by discretized Brownian motion.

Paths ``F_x`` are standard Brownian motions sampled on a uniform grid of step
``dt`` (exact Gaussian increments). At every grid time the shared selection
map is fed

    q_x = softmax over active of  F_x(t) / vol + t * a_x / vol**2

and the run ends when the leading ``q`` reaches the running threshold. The
leader at that time is selected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from bizsel import _backend
from bizsel.biz_core import RunOutcome, StageCapExceeded
from bizsel.distributions import RandomStream, alternative_streams
from bizsel.selection import Elimination, SelectionMap, max_elimination_c, stable_softmax

DEFAULT_MAX_STEPS = 10**8
_CHUNK = 1024
_SLACK = 1e-9


@dataclass(frozen=True)
class BrownianOracleConfig:
    drift: tuple[float, ...]
    volatility: float = 1.0
    dt: float = 1e-3
    p_star: float = 0.9
    c: float | None = None
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "drift", tuple(float(a) for a in self.drift))
        k = len(self.drift)
        if k < 1:
            raise ValueError("need at least one alternative")
        if self.c is None:
            object.__setattr__(self, "c", max_elimination_c(self.p_star, k))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        if not (self.volatility > 0 and math.isfinite(self.volatility)):
            raise ValueError(f"volatility must be positive, got {self.volatility!r}")
        lo = 1.0 / k if k > 1 else 0.0
        if not (lo < self.p_star < 1.0):
            raise ValueError(f"p_star must lie in ({lo:g}, 1), got {self.p_star!r}")
        c_max = max_elimination_c(self.p_star, k)
        if k > 1 and not (0.0 <= self.c <= c_max * (1.0 + 1e-12)):
            raise ValueError(f"c must lie in [0, {c_max:.6g}], got {self.c!r}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def k(self) -> int:
        return len(self.drift)

    @property
    def best(self) -> int:
        return int(np.argmax(self.drift))


def _exponents(paths: np.ndarray, t, drift: np.ndarray, vol: float) -> np.ndarray:
    return paths / vol + t * drift / (vol * vol)


def q_continuous(
    paths: Sequence[float], t: float, cfg: BrownianOracleConfig, active: Sequence[int] | None = None
) -> np.ndarray:
    """``q`` for the ``active`` alternatives given path values ``F_x(t)``.

    ``paths`` holds one value per active alternative, in ``active`` order.
    """
    if active is None:
        active = range(cfg.k)
    drift = np.asarray(cfg.drift)[np.asarray(list(active), dtype=np.intp)]
    f = np.asarray(paths, dtype=float)
    if f.shape != drift.shape:
        raise ValueError("one path value per active alternative is required")
    return stable_softmax(_exponents(f, t, drift, cfg.volatility))


def run_continuous_python(cfg: BrownianOracleConfig, streams: Sequence[RandomStream]) -> RunOutcome:
    """Reference loop.

    Increments are drawn a chunk at a time per alternative. Grid points where
    no ``q`` reaches the threshold or drops to ``c`` are skipped in bulk,
    since the selection map does nothing there.
    """
    k = cfg.k
    drift = np.asarray(cfg.drift)
    vol = cfg.volatility
    sqdt = math.sqrt(cfg.dt)
    h = SelectionMap.start(k, cfg.p_star, cfg.c)
    F = np.zeros(k)
    step = 0
    j = 0  # grid point `step` itself is evaluated only in the first chunk
    final_q = np.full(k, 1.0 / k)
    while True:
        # column j holds the paths at grid point `step + j`
        L = min(_CHUNK, cfg.max_steps - step)
        cols = np.empty((k, L + 1))
        cols[:, 0] = F
        for x in h.active:
            z = streams[x].generator.standard_normal(L)
            cols[x] = np.cumsum(np.concatenate(([F[x]], sqdt * z)))
        times = np.arange(step, step + L + 1) * cfg.dt
        done = False
        while j <= L:
            idx = np.asarray(h.active, dtype=np.intp)
            e = _exponents(cols[idx, j:], times[j:], drift[idx, None], vol)
            w = np.exp(e - e.max(axis=0))
            q = w / w.sum(axis=0)
            # slack only admits candidates; h.step makes the exact decision
            hits = np.flatnonzero((q.max(axis=0) >= h.threshold - _SLACK) | (q.min(axis=0) <= h.c + _SLACK))
            if hits.size == 0:
                break
            j += int(hits[0])
            col = cols[:, j]
            t = times[j]

            def q_of(active, col=col, t=t):
                ia = np.asarray(active, dtype=np.intp)
                return stable_softmax(_exponents(col[ia], t, drift[ia], vol))

            if h.step(q_of, step + j):
                done = True
                final_q = q_of(h.active)
                break
            j += 1
        if done:
            step += j
            break
        step += L
        if step >= cfg.max_steps:
            raise StageCapExceeded(f"no decision within {cfg.max_steps} steps of dt={cfg.dt}")
        F = cols[:, L].copy()
        j = 1
    selected = h.leader(final_q)
    return RunOutcome(
        selected=selected,
        correct=selected == cfg.best,
        total_samples=step,
        stages=step,
        eliminations=tuple(h.eliminations),
        threshold=h.threshold,
    )


def _run_compiled(cfg: BrownianOracleConfig, streams: Sequence[RandomStream]) -> RunOutcome:
    k = cfg.k
    F = np.zeros(k)
    el_stage = np.zeros(k, dtype=np.int64)
    el_alt = np.zeros(k, dtype=np.int64)
    el_q = np.zeros(k)
    status, selected, steps, n_elim, threshold = _backend.kernels().run_continuous(
        [s.bit_generator for s in streams],
        np.asarray(cfg.drift, dtype=float),
        cfg.volatility,
        cfg.dt,
        cfg.p_star,
        cfg.c,
        cfg.max_steps,
        F,
        el_stage,
        el_alt,
        el_q,
    )
    if status == _backend.STATUS_CAP:
        raise StageCapExceeded(f"no decision within {cfg.max_steps} steps of dt={cfg.dt}")
    elims = tuple(Elimination(int(el_stage[i]), int(el_alt[i]), float(el_q[i])) for i in range(n_elim))
    return RunOutcome(
        selected=int(selected),
        correct=int(selected) == cfg.best,
        total_samples=int(steps),
        stages=int(steps),
        eliminations=elims,
        threshold=float(threshold),
    )


def run_continuous_biz(
    cfg: BrownianOracleConfig,
    rng: Sequence[RandomStream] | int | None = None,
    *,
    backend: str = "auto",
) -> RunOutcome:
    """One oracle run. ``stages`` and ``total_samples`` report grid steps taken."""
    if rng is None or isinstance(rng, (int, np.integer)):
        streams = alternative_streams(0 if rng is None else int(rng), cfg.k)
    else:
        streams = list(rng)
    if len(streams) != cfg.k:
        raise ValueError(f"need {cfg.k} streams, got {len(streams)}")
    if _backend.use_compiled(backend):
        return _run_compiled(cfg, streams)
    return run_continuous_python(cfg, streams)
