"""Command-line driver.

Exit status: 0 on success, 2 for parse or validation errors, 3 when a run
fails. Failures print one ``bizsel-error`` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from bizsel import _backend
from bizsel.biz_core import StageCapExceeded, ZeroVarianceEstimate
from bizsel.experiment import (
    FIGURE_KINDS,
    ExperimentFile,
    ParseError,
    ValidationError,
    biz_params,
    oracle_configs,
    parse_experiment,
    problem_family,
)
from bizsel.figures import DEFAULT_SEED, CsvRow, format_csv, run_figure
from bizsel.harness import ReplicationError, estimate_oracle_pcs, estimate_pcs, log_grid, sweep_delta

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 2, 3

ORACLE_HEADER = ("dt", "pcs", "ci_low", "ci_high", "mean_steps", "reps", "seed")


class _InputError(Exception):
    def __init__(self, kind: str, message: str, path: str = "", line: int | None = None):
        super().__init__(message)
        self.kind, self.path, self.line = kind, path, line


def _fail(kind: str, message: str, path: str = "", line: int | None = None) -> None:
    parts = [f"kind={kind}"]
    if path:
        parts.append(f"path={path}")
    if line is not None:
        parts.append(f"line={line}")
    msg = " ".join(str(message).split())
    parts.append(f'msg="{msg}"')
    print("bizsel-error " + " ".join(parts), file=sys.stderr)


def _read(path: str) -> ExperimentFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _InputError("io", f"cannot read experiment file: {exc}", path) from None
    return parse_experiment(text)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _progress(quiet: bool):
    if quiet:
        return None

    def report(delta, res):
        print(f"delta={delta:.6g} pcs={res.pcs:.4f} +/- {res.half_width:.4f}", file=sys.stderr)

    return report


def _run_rows(exp: ExperimentFile, args) -> list[CsvRow]:
    fam = problem_family(exp)
    if exp.experiment == "single":
        delta = exp.params.delta
        res = estimate_pcs(fam.at(delta), biz_params(exp, delta), exp.reps, exp.seed,
                           workers=exp.workers, backend=args.backend)
        return [CsvRow(delta, res)]
    grid = exp.grid if exp.grid is not None else log_grid()
    pts = sweep_delta(fam, grid, biz_params(exp), exp.reps, exp.seed, workers=exp.workers,
                      backend=args.backend, progress=_progress(args.quiet))
    return [CsvRow(d, r) for d, r in pts]


def _oracle_text(exp: ExperimentFile, args) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ORACLE_HEADER)
    for cfg in oracle_configs(exp):
        r = estimate_oracle_pcs(cfg, exp.reps, exp.seed, workers=exp.workers, backend=args.backend)
        w.writerow([f"{cfg.dt:.6g}", f"{r.pcs:.6f}", f"{r.ci_low:.6f}", f"{r.ci_high:.6f}",
                    f"{r.mean_stages:.3f}", r.reps, r.seed])
    return buf.getvalue()


def _dispatch(exp: ExperimentFile, args) -> str:
    if exp.experiment == "continuous":
        return _oracle_text(exp, args)
    if exp.experiment in FIGURE_KINDS:
        rows = run_figure(exp.experiment, k=exp.k, reps=exp.reps, seed=exp.seed, grid=exp.grid,
                          workers=exp.workers, backend=args.backend, progress=_progress(args.quiet))
        return format_csv(rows)
    return format_csv(_run_rows(exp, args))


def cmd_run(args) -> str:
    return _dispatch(_read(args.file), args)


def cmd_sweep(args) -> str:
    exp = _read(args.file)
    if exp.experiment not in ("sweep",) + FIGURE_KINDS:
        raise ValidationError("experiment", f"'sweep' needs a sweep or figure experiment, got {exp.experiment}")
    return _dispatch(exp, args)


def cmd_oracle(args) -> str:
    exp = _read(args.file)
    if exp.experiment != "continuous":
        raise ValidationError("experiment", f"'oracle' needs a continuous experiment, got {exp.experiment}")
    return _dispatch(exp, args)


def cmd_validate(args) -> str:
    exp = _read(args.file)
    return f"ok {exp.experiment}\n"


def cmd_figure(args) -> str:
    rows = run_figure(args.which, k=args.k, reps=args.reps, seed=args.seed, paper_scale=args.paper_scale,
                      workers=args.workers, backend=args.backend, progress=_progress(args.quiet))
    return format_csv(rows)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--backend", choices=_backend.BACKENDS, default="auto")
    common.add_argument("-q", "--quiet", action="store_true", help="no progress lines on stderr")
    parser = argparse.ArgumentParser(prog="bizsel", description="BIZ ranking-and-selection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, help_ in (
        ("run", cmd_run, "run any experiment file"),
        ("sweep", cmd_sweep, "run a delta sweep experiment file"),
        ("oracle", cmd_oracle, "run a continuous-time oracle experiment file"),
        ("validate", cmd_validate, "parse and validate an experiment file"),
    ):
        p = sub.add_parser(name, help=help_, parents=[common])
        p.add_argument("file")
        if name != "validate":
            p.add_argument("--out", help="output path (default: file's 'output' field, else stdout)")
        p.set_defaults(func=fn)

    p = sub.add_parser("figure", help="reproduce one of the slippage figures", parents=[common])
    p.add_argument("which", choices=["a", "b", "c"])
    p.add_argument("--paper-scale", action="store_true", help="k=100, 10000 replications")
    p.add_argument("--reps", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
        out = getattr(args, "out", None)
        if out is None and args.command in ("run", "sweep", "oracle"):
            out = _read(args.file).output
        _write(text, out)
    except _InputError as exc:
        _fail(exc.kind, str(exc), exc.path, exc.line)
        return EXIT_INPUT
    except ParseError as exc:
        _fail("parse", str(exc), getattr(args, "file", ""), exc.line)
        return EXIT_INPUT
    except ValidationError as exc:
        _fail("validation", exc.reason, exc.path, exc.line)
        return EXIT_INPUT
    except (ReplicationError, StageCapExceeded, ZeroVarianceEstimate) as exc:
        _fail("runtime", str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _fail("io", exc.strerror or str(exc), exc.filename or "")
        return EXIT_RUNTIME
    except ValueError as exc:
        _fail("usage", str(exc))
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
