"""Run configuration: a flat ``key = value`` text file with ``#`` comments.

Every key may be overridden by an environment variable ``HSFEM_<KEY>``
(case-insensitive), e.g. ``HSFEM_TAU=1e-4``.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional

from .errors import ConfigError, InvalidArgumentError
from .model import ARCTAN_SCALE, ARCTAN_SLOPE, GrowthLaw, ModelParams

ENV_PREFIX = "HSFEM_"
REQUIRED = ("k", "nu", "P_max", "alpha", "tau", "nx", "ny")


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int(s):
    f = float(s)
    if not f.is_integer():
        raise ValueError(f"not an integer: {s!r}")
    return int(f)


def _floats(s):
    s = s.strip()
    return tuple(float(v) for v in s.split(",") if v.strip()) if s else ()


# key -> (parser, default); REQUIRED keys have no default
KEYS = {
    "k": (_int, None),
    "nu": (float, None),
    "P_max": (float, None),
    "alpha": (float, None),
    "tau": (float, None),
    "nx": (_int, None),
    "ny": (_int, None),
    "t_final": (float, 0.4),
    "x0": (float, -10.0),
    "x1": (float, 10.0),
    "y0": (float, -10.0),
    "y1": (float, 10.0),
    "scheme": (str, "fem2"),
    "initial": (str, "gaussian"),
    "initial_value": (float, 0.0),
    "growth_scale": (float, ARCTAN_SCALE),
    "growth_slope": (float, ARCTAN_SLOPE),
    "quadrature": (str, "exact"),
    "output_every": (_int, 0),
    "output_times": (_floats, (0.1, 0.2, 0.3, 0.4)),
    "field_format": (str, "vtk"),
    "out_dir": (str, "out"),
    "solver_tol": (float, 1e-12),
    "solver_max_iter": (_int, 0),
    "energy_check": (_bool, True),
    "complementarity_every": (_int, 1),
}
_LOWER = {k.lower(): k for k in KEYS}


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    nx: int
    ny: int
    x0: float = -10.0
    x1: float = 10.0
    y0: float = -10.0
    y1: float = 10.0
    scheme: str = "fem2"
    initial: str = "gaussian"
    initial_value: float = 0.0
    quadrature: str = "exact"
    output_every: int = 0
    output_times: tuple = (0.1, 0.2, 0.3, 0.4)
    field_format: str = "vtk"
    out_dir: str = "out"
    solver_tol: float = 1e-12
    solver_max_iter: int = 0
    energy_check: bool = True
    complementarity_every: int = 1

    @property
    def n_steps(self) -> int:
        return int(round(self.params.t_final / self.params.tau))

    def with_params(self, **changes) -> "RunConfig":
        return replace(self, params=replace(self.params, **changes))

    def as_dict(self) -> dict:
        p = self.params
        out = {
            "k": p.k, "nu": p.nu, "P_max": p.P_max, "alpha": p.alpha, "tau": p.tau,
            "t_final": p.t_final, "growth_scale": p.growth.scale, "growth_slope": p.growth.slope,
        }
        for name in KEYS:
            if name not in out:
                out[name] = getattr(self, name)
        return out


def _read_pairs(text, source):
    pairs, problems = {}, []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"{source}:{lineno}: expected 'key = value'")
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        canon = _LOWER.get(key.lower())
        if canon is None:
            problems.append(f"{key}: unknown key")
            continue
        if canon in pairs:
            problems.append(f"{key}: given more than once")
        pairs[canon] = value
    return pairs, problems


def _env_pairs(environ):
    pairs, problems = {}, []
    for name, value in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        canon = _LOWER.get(key)
        if canon is None:
            problems.append(f"{name}: unknown key")
        else:
            pairs[canon] = value
    return pairs, problems


def build_config(raw: dict) -> RunConfig:
    """Validate string values keyed by config name and build a RunConfig."""
    problems = []
    vals = {}
    for key in REQUIRED:
        if key not in raw:
            problems.append(f"{key}: missing required key")
    for key, (parse, default) in KEYS.items():
        if key not in raw:
            vals[key] = default
            continue
        try:
            v = raw[key]
            if isinstance(v, str) or parse in (_int, float):
                vals[key] = parse(v)
            else:
                vals[key] = tuple(v) if parse is _floats else v
        except (TypeError, ValueError) as exc:
            problems.append(f"{key}: {exc}")
            vals[key] = None

    def check(key, pred, msg):
        v = vals[key]
        if v is not None and not pred(v):
            problems.append(f"{key}: {msg} (got {v!r})")

    def finite_check(key, pred, msg):
        check(key, lambda v: math.isfinite(v) and pred(v), msg)

    check("k", lambda v: v >= 2, "must be an integer >= 2")
    finite_check("nu", lambda v: v >= 0, "must be finite and >= 0")
    finite_check("P_max", lambda v: v > 0, "must be finite and > 0")
    finite_check("alpha", lambda v: v > 0, "must be finite and > 0")
    finite_check("tau", lambda v: v > 0, "must be finite and > 0")
    finite_check("t_final", lambda v: v >= 0, "must be finite and >= 0")
    check("nx", lambda v: v >= 1, "must be >= 1")
    check("ny", lambda v: v >= 1, "must be >= 1")
    if vals["x0"] is not None:
        check("x1", lambda v: v > vals["x0"], "must exceed x0")
    if vals["y0"] is not None:
        check("y1", lambda v: v > vals["y0"], "must exceed y0")
    check("scheme", lambda v: v in ("fem", "fem2"), "must be fem or fem2")
    check("initial", lambda v: v in ("gaussian", "constant"), "must be gaussian or constant")
    check("initial_value", lambda v: v >= 0, "must be >= 0")
    check("quadrature", lambda v: v in ("exact", "vertex", "centroid"), "must be exact, vertex or centroid")
    check("output_every", lambda v: v >= 0, "must be >= 0")
    check("output_times", lambda v: all(t >= 0 for t in v), "times must be >= 0")
    check("field_format", lambda v: v in ("vtk", "csv"), "must be vtk or csv")
    finite_check("solver_tol", lambda v: v > 0, "must be finite and > 0")
    check("solver_max_iter", lambda v: v >= 0, "must be >= 0")
    check("complementarity_every", lambda v: v >= 0, "must be >= 0")
    finite_check("growth_scale", lambda v: v >= 0, "must be finite and >= 0")
    if problems:
        raise ConfigError(problems)

    try:
        params = ModelParams(
            k=vals["k"], nu=vals["nu"], P_max=vals["P_max"], alpha=vals["alpha"],
            tau=vals["tau"], t_final=vals["t_final"],
            growth=GrowthLaw(scale=vals["growth_scale"], slope=vals["growth_slope"]),
        )
    except InvalidArgumentError as exc:
        raise ConfigError(str(exc)) from exc
    rest = {k: v for k, v in vals.items() if k not in
            ("k", "nu", "P_max", "alpha", "tau", "t_final", "growth_scale", "growth_slope")}
    return RunConfig(params=params, **rest)


def parse_config(path, environ: Optional[dict] = None) -> RunConfig:
    """Read, merge environment overrides, validate."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    pairs, problems = _read_pairs(text, path)
    env, env_problems = _env_pairs(os.environ if environ is None else environ)
    problems += env_problems
    if problems:
        raise ConfigError(problems)
    pairs.update(env)
    return build_config(pairs)


def reference_config(**overrides) -> RunConfig:
    """Defaults of the reference experiments, with keyword overrides."""
    raw = {"k": 100, "nu": 0.5, "P_max": 1.0, "alpha": 1.0, "tau": 1e-5, "nx": 100, "ny": 100}
    unknown = set(overrides) - set(KEYS)
    if unknown:
        raise ConfigError([f"{k}: unknown key" for k in sorted(unknown)])
    raw.update(overrides)
    return build_config(raw)


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    base: RunConfig
    # optional k -> (nx, ny) schedule keeping k h small
    mesh_of_k: Optional[dict] = field(default=None)

    def __post_init__(self):
        if self.param not in ("alpha", "nu", "k", "P_max"):
            raise ConfigError(f"param: cannot sweep {self.param!r}")
        if not self.values:
            raise ConfigError("values: empty value list")
        if self.param == "k" and any(int(v) != v or v < 2 for v in self.values):
            raise ConfigError("values: k values must be integers >= 2")

    def member(self, value) -> RunConfig:
        if self.param == "k":
            cfg = self.base.with_params(k=int(value))
            if self.mesh_of_k and int(value) in self.mesh_of_k:
                nx, ny = self.mesh_of_k[int(value)]
                cfg = replace(cfg, nx=nx, ny=ny)
            return cfg
        return self.base.with_params(**{self.param: float(value)})
