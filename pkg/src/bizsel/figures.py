"""The three slippage experiments of the PCS-versus-delta study, and CSV output.

a. known variances, sd falling linearly from 1.0 (alternative 0) to 0.5 (best)
b. unknown variances, best has variance 100, the rest 1, n0 = 15
c. the variances of (b), known, n0 = 0
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from bizsel.biz_core import BizParams
from bizsel.harness import McResult, log_grid, sweep_delta
from bizsel.problem import ProblemFamily

P_STAR = 0.9
DESK_K, DESK_REPS = 10, 2000
PAPER_K, PAPER_REPS = 100, 10_000
DEFAULT_SEED = 20_171_203
DEFAULT_GRID_POINTS = 20

CSV_HEADER = ("delta", "pcs", "ci_low", "ci_high", "mean_total_samples", "mean_stages", "reps", "seed")


@dataclass(frozen=True)
class CsvRow:
    delta: float
    result: McResult

    def fields(self) -> list[str]:
        r = self.result
        return [
            f"{self.delta:.6f}",
            f"{r.pcs:.6f}",
            f"{r.ci_low:.6f}",
            f"{r.ci_high:.6f}",
            f"{r.mean_total_samples:.3f}",
            f"{r.mean_stages:.3f}",
            str(r.reps),
            str(r.seed),
        ]


def figure_setup(which: str, k: int) -> tuple[ProblemFamily, BizParams]:
    """Problem family and parameters (delta is a placeholder) for figure ``which``."""
    which = which.lower().removeprefix("figure_")
    if k < 2:
        raise ValueError("figures need k >= 2")
    if which == "a":
        sd = np.linspace(1.0, 0.5, k)
        variances = tuple(float(s * s) for s in sd)
        n0, known = 0, True
    elif which in ("b", "c"):
        variances = (1.0,) * (k - 1) + (100.0,)
        n0, known = (15, False) if which == "b" else (0, True)
    else:
        raise ValueError(f"unknown figure {which!r}; expected a, b or c")
    family = ProblemFamily.slippage(variances, label=f"figure_{which}")
    params = BizParams(k=k, p_star=P_STAR, delta=1.0, n0=n0, variances=variances if known else None)
    return family, params


def run_figure(
    which: str,
    *,
    k: int | None = None,
    reps: int | None = None,
    seed: int = DEFAULT_SEED,
    grid: Sequence[float] | None = None,
    paper_scale: bool = False,
    workers: int = 1,
    backend: str = "auto",
    progress: Callable[[float, McResult], None] | None = None,
) -> list[CsvRow]:
    """Sweep ``delta`` for one figure; rows come back in descending ``delta``."""
    if k is None:
        k = PAPER_K if paper_scale else DESK_K
    if reps is None:
        reps = PAPER_REPS if paper_scale else DESK_REPS
    if grid is None:
        grid = log_grid(0.1, 10.0, DEFAULT_GRID_POINTS)
    family, params = figure_setup(which, k)
    points = sweep_delta(family, grid, params, reps, seed, workers=workers, backend=backend, progress=progress)
    return sort_rows(CsvRow(d, r) for d, r in points)


def sort_rows(rows: Iterable[CsvRow]) -> list[CsvRow]:
    return sorted(rows, key=lambda r: -r.delta)


def format_csv(rows: Sequence[CsvRow]) -> str:
    if not rows:
        raise ValueError("no rows to write")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in sort_rows(rows):
        w.writerow(row.fields())
    return buf.getvalue()


def emit_csv(rows: Sequence[CsvRow], path: str | os.PathLike) -> None:
    text = format_csv(rows)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write CSV: {exc.strerror}", str(path)) from exc
