"""Strict JSON configuration for the batch front end."""
from __future__ import annotations

import json
from typing import Annotated, Literal, Optional, Union

from pydantic import (AfterValidator, BaseModel, ConfigDict, Field, ValidationError,
                      field_validator, model_validator)

from .expr import ExprSyntaxError, parse_expr
from ..mesh import ExteriorPartition, RATIO_TOL

U64_MAX = 2 ** 64 - 1


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


def _check_expr(text, allow_t=False):
    try:
        e = parse_expr(text)
    except ExprSyntaxError as exc:
        raise ValueError(str(exc)) from None
    if not allow_t and e.uses("t"):
        raise ValueError(f"expression {text!r} may only depend on x")
    return text


def _check_time_expr(text):
    return _check_expr(text, allow_t=True)


def _check_order(s):
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie in (0,1)")
    return s


XExpr = Annotated[str, AfterValidator(_check_expr)]
TExpr = Annotated[str, AfterValidator(_check_time_expr)]
Order = Annotated[float, AfterValidator(_check_order)]
Bound = Union[float, Literal["inf", "-inf"]]


def _positive(v, name):
    if not v > 0:
        raise ValueError(f"{name} must be positive")
    return v


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class Domain(_Strict):
    a: float
    b: float

    @model_validator(mode="after")
    def _order(self):
        if not self.a < self.b:
            raise ValueError(f"domain needs a < b, got a = {self.a}, b = {self.b}")
        return self


class Grid(_Strict):
    h: float
    R: float
    q: int = 8

    @field_validator("h", "R")
    @classmethod
    def _pos(cls, v, info):
        return _positive(v, info.field_name)

    @field_validator("q")
    @classmethod
    def _q(cls, v):
        if v < 2:
            raise ValueError("quadrature order q must be at least 2")
        return v


def _bounds(intervals):
    out = []
    for pair in intervals:
        if len(pair) != 2:
            raise ValueError("each Dirichlet interval is a pair [lo, hi]")
        lo, hi = (float(v) for v in pair)
        if not lo < hi:
            raise ValueError(f"empty Dirichlet interval [{pair[0]}, {pair[1]}]")
        out.append((lo, hi))
    return out


class Problem(_Strict):
    kind: Literal["neumann", "mixed", "robin"] = "neumann"
    f: XExpr = "0"
    g: XExpr = "0"
    phi: XExpr = "0"
    dirichlet: list[list[Bound]] = Field(default_factory=list)
    alpha: XExpr = "1"
    beta: XExpr = "0"
    gamma: XExpr = "0"

    @field_validator("dirichlet")
    @classmethod
    def _dir(cls, v):
        _bounds(v)
        return v

    @model_validator(mode="after")
    def _kind(self):
        if self.kind == "mixed" and not self.dirichlet:
            raise ValueError("mixed problem needs a nonempty 'dirichlet' list; "
                             "use kind 'neumann' otherwise")
        return self

    def partition(self, domain):
        return ExteriorPartition((domain.a, domain.b), _bounds(self.dirichlet))


class EigSection(_Strict):
    k: int = 6

    @field_validator("k")
    @classmethod
    def _k(cls, v):
        return _positive(v, "k")


class HeatSection(_Strict):
    u0: XExpr
    dt: float
    T: float
    scheme: Literal["implicit-euler", "crank-nicolson"] = "implicit-euler"
    f: Optional[TExpr] = None
    g: Optional[TExpr] = None
    sample_every: int = 1

    @field_validator("dt", "T")
    @classmethod
    def _pos(cls, v, info):
        return _positive(v, info.field_name)

    @field_validator("sample_every")
    @classmethod
    def _every(cls, v):
        return _positive(v, "sample_every")

    @model_validator(mode="after")
    def _span(self):
        if self.T < self.dt * (1 - 1e-12):
            raise ValueError(f"T = {self.T} must be at least dt = {self.dt}")
        return self


class McSection(_Strict):
    mode: Literal["payoff", "occupation"] = "payoff"
    eps: Optional[float] = None
    walkers: int = 100000
    max_jumps: int = 1000000
    probes: list[float] = Field(default_factory=lambda: [0.5])
    phi: XExpr = "1"
    psi: XExpr = "0"
    dirichlet: list[list[Bound]] = Field(default_factory=list)
    total_jumps: int = 1000000
    bins: int = 20
    chains: int = 20000
    burn_in: float = 20.0
    x0: Optional[float] = None

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        return v if v is None else _positive(v, "eps")

    @field_validator("walkers", "max_jumps", "total_jumps", "bins", "chains")
    @classmethod
    def _cnt(cls, v, info):
        return _positive(v, info.field_name)

    @field_validator("dirichlet")
    @classmethod
    def _dir(cls, v):
        _bounds(v)
        return v

    @model_validator(mode="after")
    def _mode(self):
        if self.mode == "payoff" and not self.dirichlet:
            raise ValueError("payoff mode needs a nonempty Dirichlet set (walk never terminates)")
        if self.mode == "occupation" and self.dirichlet:
            raise ValueError("occupation mode needs pure reflection (empty 'dirichlet')")
        return self


class LimitsSection(_Strict):
    u: XExpr
    v: XExpr
    s_list: list[Order] = Field(default_factory=lambda: [0.6, 0.7, 0.8, 0.9, 0.95])
    kappa_u: Optional[XExpr] = None
    kappa_s: list[Order] = Field(default_factory=list)
    side: Literal["a", "b"] = "b"
    eps: list[float] = Field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3, 1.25e-3])

    @field_validator("kappa_s")
    @classmethod
    def _ks(cls, v):
        for s in v:
            if s <= 0.5:
                raise ValueError(f"kappa needs s > 1/2, got {s}")
        return v

    @field_validator("eps")
    @classmethod
    def _eps(cls, v):
        if len(v) < 2 or any(e <= 0 for e in v) or any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps must hold at least two decreasing positive values")
        return v


class PerimeterSection(_Strict):
    s_list: list[Order] = Field(default_factory=list)

    @field_validator("s_list")
    @classmethod
    def _half(cls, v):
        for s in v:
            if s >= 0.5:
                raise ValueError(f"the perimeter of an interval is finite only for s < 1/2, got {s}")
        return v


class ProblemConfig(_Strict):
    domain: Domain
    s: Order
    grid: Grid
    seed: int = 0
    problem: Optional[Problem] = None
    eig: Optional[EigSection] = None
    heat: Optional[HeatSection] = None
    mc: Optional[McSection] = None
    limits: Optional[LimitsSection] = None
    perimeter: Optional[PerimeterSection] = None

    @field_validator("seed")
    @classmethod
    def _seed(cls, v):
        if not 0 <= v <= U64_MAX:
            raise ValueError("seed must be an unsigned 64-bit integer")
        return v

    @model_validator(mode="after")
    def _mesh(self):
        errs = []
        L = self.domain.b - self.domain.a
        h, R = self.grid.h, self.grid.R
        for name, ratio in (("(b-a)/h", L / h), ("R/h", R / h)):
            k = round(ratio)
            if k < 1 or abs(ratio - k) > RATIO_TOL * max(1.0, ratio):
                errs.append(f"{name} = {ratio:.12g} is not a positive integer")
        if R < 2 * L * (1 - RATIO_TOL):
            errs.append(f"truncation radius R = {R} is smaller than 2(b-a) = {2 * L}")
        if self.mc is not None and self.mc.mode == "payoff":
            for p in self.mc.probes:
                if not self.domain.a < p < self.domain.b:
                    errs.append(f"probe {p} lies outside the open interval")
        if self.mc is not None and self.mc.x0 is not None:
            if not self.domain.a < self.mc.x0 < self.domain.b:
                errs.append(f"x0 = {self.mc.x0} lies outside the open interval")
        if self.perimeter is not None and not self.perimeter.s_list and self.s >= 0.5:
            errs.append("perimeter needs s < 1/2 (set perimeter.s_list or s)")
        if errs:
            raise ValueError("; ".join(errs))
        return self

    def with_seed(self, seed):
        return self.model_copy(update={"seed": int(seed)})


def _format_errors(exc):
    out = []
    for e in exc.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        if e["type"] == "extra_forbidden":
            msg = f"unknown key '{e['loc'][-1]}'"
        out.append(f"{loc}: {msg}")
    return out


def config_from_dict(data):
    try:
        return ProblemConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def config_from_text(text):
    try:
        return ProblemConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def parse_config(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ConfigError([f"config is not valid UTF-8: {exc}"]) from None
    return config_from_text(text)


def emit(config):
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def bound_value(v):
    return float(v) if isinstance(v, str) else v

