"""The threshold / elimination state machine shared by every BIZ variant.

The discrete procedure and the Brownian oracle differ only in how they produce
the softmax vector ``q`` for an active set; both hand a ``q_of(active)``
callable to :meth:`SelectionMap.step` once per grid point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

QFunction = Callable[[Sequence[int]], np.ndarray]


class Elimination(NamedTuple):
    stage: int
    alternative: int
    q: float


def stable_softmax(exponents: np.ndarray) -> np.ndarray:
    """``exp(e) / sum(exp(e))`` evaluated after subtracting ``max(e)``."""
    e = np.asarray(exponents, dtype=float)
    assert np.all(np.isfinite(e)), "non-finite exponent"
    w = np.exp(e - e.max())
    return w / w.sum()


def max_elimination_c(p_star: float, k: int) -> float:
    """Largest admissible elimination level, ``1 - p_star**(1/(k-1))``."""
    if k < 2:
        return 0.0
    return 1.0 - p_star ** (1.0 / (k - 1))


@dataclass
class SelectionMap:
    active: list[int]
    threshold: float
    c: float
    eliminations: list[Elimination] = field(default_factory=list)

    @classmethod
    def start(cls, k: int, p_star: float, c: float) -> "SelectionMap":
        return cls(active=list(range(k)), threshold=p_star, c=c)

    def sweep(self, q: np.ndarray, q_of: QFunction, stage: int) -> np.ndarray:
        """Eliminate while the smallest ``q`` is at most ``c``.

        ``q`` must be the vector for the current active set; it is recomputed
        through ``q_of`` after every removal. Returns ``q`` for the survivors.
        """
        while len(self.active) > 1:
            i = int(np.argmin(q))  # first minimum -> lowest alternative index
            qi = float(q[i])
            if qi > self.c:
                break
            x = self.active.pop(i)
            self.threshold = self.threshold / (1.0 - qi)
            self.eliminations.append(Elimination(stage, x, qi))
            q = q_of(self.active)
        return q

    def step(self, q_of: QFunction, stage: int) -> bool:
        """Process one grid point; True once some ``q`` reaches the threshold."""
        q = q_of(self.active)
        if q.max() >= self.threshold:
            return True
        self.sweep(q, q_of, stage)
        return False

    def leader(self, q: np.ndarray) -> int:
        return self.active[int(np.argmax(q))]
