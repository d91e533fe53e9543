"""Experiment files: YAML documents describing one run configuration.

Example::

    schema_version: 1
    experiment: sweep
    problem:
      k: 10
      drift: slippage
      variances: 1.0
      family: normal
    params:
      p_star: 0.9
      variance_mode: known
    grid: [2.0, 1.0, 0.5]
    reps: 2000
    seed: 1
    output: sweep.csv

Figure experiments (``figure_a`` .. ``figure_c``) take no ``problem`` or
``params`` section; an optional top-level ``k`` sets the problem size.
``continuous`` experiments take an ``oracle`` section instead.
"""

from __future__ import annotations

import math
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from bizsel.biz_core import BizParams, ZRule
from bizsel.continuous import BrownianOracleConfig
from bizsel.distributions import Family
from bizsel.problem import ProblemFamily, slippage_drift

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = ("single", "sweep", "figure_a", "figure_b", "figure_c", "continuous")
FIGURE_KINDS = ("figure_a", "figure_b", "figure_c")


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class ValidationError(ValueError):
    def __init__(self, path: str, message: str, line: int | None = None):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
        self.reason = message
        self.line = line


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemSection(_Strict):
    k: int = Field(ge=1)
    drift: Union[Literal["slippage"], list[float]] = "slippage"
    variances: Union[float, list[float]] = 1.0
    family: Literal["normal", "uniform", "shifted_exponential", "scaled_bernoulli"] = "normal"
    bernoulli_p: float = 0.5
    label: str = ""


class ParamsSection(_Strict):
    p_star: float
    delta: Optional[float] = None
    c: Optional[float] = None
    n0: int = 0
    batch: Optional[list[int]] = None
    variance_mode: Literal["known", "unknown"] = "known"
    z_rule: Literal["max_variance", "min_count_over_variance"] = "max_variance"
    variance_floor: Optional[float] = None
    max_total_samples: int = 10**8


class OracleSection(_Strict):
    drift: Union[Literal["slippage"], list[float]] = "slippage"
    k: Optional[int] = Field(default=None, ge=1)
    volatility: float = 1.0
    dt: Union[float, list[float]] = 1e-3
    p_star: float = 0.9
    c: Optional[float] = None
    max_steps: int = 10**8


class ExperimentFile(_Strict):
    schema_version: int
    experiment: Literal["single", "sweep", "figure_a", "figure_b", "figure_c", "continuous"]
    problem: Optional[ProblemSection] = None
    params: Optional[ParamsSection] = None
    oracle: Optional[OracleSection] = None
    k: Optional[int] = Field(default=None, ge=2)
    grid: Optional[list[float]] = None
    reps: int = Field(default=2000, ge=1)
    seed: int = Field(default=1, ge=0)
    workers: int = Field(default=1, ge=1)
    output: Optional[str] = None

    @model_validator(mode="after")
    def _sections(self) -> "ExperimentFile":
        kind = self.experiment
        if kind in ("single", "sweep"):
            for name in ("problem", "params"):
                if getattr(self, name) is None:
                    raise ValueError(f"'{name}' section is required for a {kind} experiment")
            if self.oracle is not None:
                raise ValueError(f"'oracle' section is not allowed for a {kind} experiment")
            if kind == "single" and self.params.delta is None:
                raise ValueError("params.delta is required for a single experiment")
        elif kind == "continuous":
            if self.oracle is None:
                raise ValueError("'oracle' section is required for a continuous experiment")
            if self.problem is not None or self.params is not None:
                raise ValueError("continuous experiments take only an 'oracle' section")
        else:
            if self.problem is not None or self.params is not None or self.oracle is not None:
                raise ValueError(f"{kind} builds its own configuration; drop problem/params/oracle")
        if kind != "sweep" and kind not in FIGURE_KINDS and self.grid is not None:
            raise ValueError(f"'grid' is only used by sweep and figure experiments, not {kind}")
        if self.k is not None and kind not in FIGURE_KINDS:
            raise ValueError("top-level 'k' is only used by figure experiments")
        return self


# --- parsing ---------------------------------------------------------------


def _node_line(root: yaml.Node | None, path: tuple) -> int | None:
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for part in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for key, value in node.value:
                if key.value == str(part):
                    nxt = key if part == path[-1] else value
                    break
            if nxt is None:
                return line
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int) and part < len(node.value):
            node = node.value[part]
        else:
            return line
        line = node.start_mark.line + 1
    return line


def _load(text: str) -> tuple[Any, yaml.Node | None]:
    try:
        data = yaml.safe_load(text)
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else None
        raise ParseError(f"malformed YAML: {exc.problem}", line) from None
    except yaml.YAMLError as exc:
        raise ParseError(f"malformed YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError("experiment file must be a mapping at top level", 1)
    return data, root


def parse_experiment(text: str) -> ExperimentFile:
    """Strictly parse and validate an experiment file.

    Raises :class:`ParseError` for malformed documents and
    :class:`ValidationError` (with a dotted field path) for content errors.
    """
    data, root = _load(text)
    version = data.get("schema_version")
    if version is None:
        raise ValidationError("schema_version", "field required", _node_line(root, ()))
    if version != SCHEMA_VERSION:
        raise ValidationError(
            "schema_version", f"unsupported version {version!r} (expected {SCHEMA_VERSION})",
            _node_line(root, ("schema_version",)),
        )
    try:
        exp = ExperimentFile.model_validate(data)
    except PydanticValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and ("[" in p or p in _UNION_TAGS)))
        path = ".".join(str(p) for p in loc)
        raise ValidationError(path, err["msg"], _node_line(root, loc)) from None
    try:
        check_experiment(exp)
    except ValidationError as exc:
        exc.line = _node_line(root, tuple(exc.path.split(".")))
        raise
    return exp


_UNION_TAGS = {"float", "int", "str", "list[float]", "list[int]"}


def serialize_experiment(exp: ExperimentFile) -> str:
    return yaml.safe_dump(exp.model_dump(mode="json", exclude_none=True), sort_keys=False)


# --- conversion to library types -------------------------------------------


def _drift(drift, k: int) -> tuple[float, ...]:
    if drift == "slippage":
        return slippage_drift(k)
    return tuple(float(a) for a in drift)


def problem_family(exp: ExperimentFile) -> ProblemFamily:
    pb = exp.problem
    drift = _drift(pb.drift, pb.k)
    if len(drift) != pb.k:
        raise ValidationError("problem.drift", f"expected {pb.k} entries, got {len(drift)}")
    if isinstance(pb.variances, list):
        variances = tuple(pb.variances)
        if len(variances) != pb.k:
            raise ValidationError("problem.variances", f"expected {pb.k} entries, got {len(variances)}")
    else:
        variances = (float(pb.variances),) * pb.k
    if not all(math.isfinite(v) and v > 0 for v in variances):
        raise ValidationError("problem.variances", "variances must be finite and > 0")
    if pb.family == "scaled_bernoulli" and not 0 < pb.bernoulli_p < 1:
        raise ValidationError("problem.bernoulli_p", "must lie in (0, 1)")
    return ProblemFamily(drift, variances, Family.parse(pb.family), pb.bernoulli_p, pb.label)


def biz_params(exp: ExperimentFile, delta: float | None = None) -> BizParams:
    pr = exp.params
    if delta is None:
        delta = pr.delta if pr.delta is not None else 1.0
    variances = None
    if pr.variance_mode == "known":
        variances = problem_family(exp).variances
    try:
        return BizParams(
            k=exp.problem.k,
            p_star=pr.p_star,
            delta=delta,
            c=pr.c,
            n0=pr.n0,
            batch=tuple(pr.batch) if pr.batch is not None else None,
            variances=variances,
            z_rule=ZRule(pr.z_rule),
            variance_floor=pr.variance_floor,
            max_total_samples=pr.max_total_samples,
        )
    except ValueError as exc:
        raise ValidationError(_param_path(str(exc)), str(exc)) from None


def _param_path(message: str) -> str:
    for name in ("p_star", "delta", "n0", "batch", "variance_floor", "max_total_samples"):
        if message.startswith(name):
            return f"params.{name}"
    if message.startswith("c "):
        return "params.c"
    if "unknown-variance" in message:
        return "params.n0"
    return "params"


def oracle_configs(exp: ExperimentFile) -> list[BrownianOracleConfig]:
    o = exp.oracle
    if o.drift == "slippage":
        if o.k is None:
            raise ValidationError("oracle.k", "k is required with slippage drift")
        drift = slippage_drift(o.k)
    else:
        drift = tuple(o.drift)
        if o.k is not None and o.k != len(drift):
            raise ValidationError("oracle.k", f"k={o.k} but drift has {len(drift)} entries")
    dts = o.dt if isinstance(o.dt, list) else [o.dt]
    out = []
    for dt in dts:
        try:
            out.append(BrownianOracleConfig(drift, o.volatility, dt, o.p_star, o.c, o.max_steps))
        except ValueError as exc:
            msg = str(exc)
            field = msg.split(" ", 1)[0]
            path = f"oracle.{field}" if field in OracleSection.model_fields else "oracle"
            raise ValidationError(path, msg) from None
    return out


def check_experiment(exp: ExperimentFile) -> None:
    """Build every library object the experiment implies, raising on the first error."""
    if exp.experiment in ("single", "sweep"):
        problem_family(exp)
        if exp.params.delta is not None:
            if not exp.params.delta > 0:
                raise ValidationError("params.delta", "delta must be positive")
        biz_params(exp)
    elif exp.experiment == "continuous":
        oracle_configs(exp)
    if exp.grid is not None:
        if not exp.grid:
            raise ValidationError("grid", "grid must not be empty")
        if any(not (math.isfinite(d) and d > 0) for d in exp.grid):
            raise ValidationError("grid", "grid entries must be positive")
        diffs = [b - a for a, b in zip(exp.grid, exp.grid[1:])]
        if diffs and not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
            raise ValidationError("grid", "grid must be strictly monotone")
