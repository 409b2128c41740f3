"""Run configuration: a flat ``section.key = value`` document.

Example::

    # benchmark
    grid.kind = cartesian2d
    grid.cells = 128, 128
    model.p = 1.4
    model.n_reg = inf

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Unknown or repeated keys are errors; every key except ``grid.kind`` and
``model.p`` has a default.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .elliptic import EllipticOptions
from .experiments import InitialData
from .flux import LimiterParams
from .grid import GridSpec
from .integrator import DtPolicy, ModelParams


class ConfigError(ValueError):
    def __init__(self, message, key=None, line=None):
        where = []
        if key:
            where.append(key)
        if line:
            where.append(f"line {line}")
        super().__init__(f"{' '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class StudyOptions:
    n_list: tuple = (1.0, 4.0, 16.0, 64.0, math.inf)
    p_list: tuple = (1.2, 1.4, 1.45)
    h_list: tuple = (1 / 64, 1 / 128, 1 / 256)
    t_eval: float = 1.0
    window_split: float = 0.5
    jobs: int = 1

    def __post_init__(self):
        if not self.t_eval > 0:
            raise ValueError("t_eval must be positive")
        if not 0 < self.window_split < 1:
            raise ValueError("window_split must lie in (0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        if any(not n > 0 for n in self.n_list):
            raise ValueError("n_list entries must be positive")
        if any(not 1 < p < 2 for p in self.p_list):
            raise ValueError("p_list entries must lie in (1, 2)")
        if any(not h > 0 for h in self.h_list):
            raise ValueError("h_list entries must be positive")


@dataclass(frozen=True)
class RunConfig:
    grid: GridSpec
    model: ModelParams
    dt: DtPolicy = field(default_factory=DtPolicy)
    initial: InitialData = field(default_factory=InitialData)
    t_end: float = 20.0
    monitor_every: float = 0.1
    qlist: tuple = (1.0, 2.0, 4.0)
    output: str = "out"
    study: StudyOptions = field(default_factory=StudyOptions)

    def __post_init__(self):
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be positive and finite")
        if not self.monitor_every >= 0:
            raise ValueError("monitor_every must be >= 0")
        if not self.qlist or any(not q >= 1 for q in self.qlist):
            raise ValueError("qlist entries must be >= 1")


# key -> (type, default).  Types: float, int, str, floats, ints, opt_int, opt_floats
SCHEMA = {
    "grid.kind": ("str", None),
    "grid.cells": ("ints", (128,)),
    "grid.extents": ("floats", (1.0,)),
    "grid.dim": ("opt_int", None),
    "model.chi": ("float", 10.0),
    "model.mu": ("float", 1.0),
    "model.p": ("float", None),
    "model.n_reg": ("float", math.inf),
    "model.grad_floor": ("float", 1e-14),
    "elliptic.rel_tol": ("float", 1e-10),
    "elliptic.max_iter": ("opt_int", None),
    "elliptic.preconditioner": ("str", "fast"),
    "dt.dt_max": ("float", 1e-2),
    "dt.safety": ("float", 0.9),
    "dt.dt_min": ("float", 1e-12),
    "dt.blowup_threshold": ("float", 1e6),
    "initial.kind": ("str", "gaussian_bump"),
    "initial.amplitude": ("float", 4.0),
    "initial.center": ("opt_floats", None),
    "initial.width": ("float", 0.05),
    "initial.base": ("float", 0.0),
    "initial.modes": ("ints", (1,)),
    "run.t_end": ("float", 20.0),
    "run.monitor_every": ("float", 0.1),
    "run.qlist": ("floats", (1.0, 2.0, 4.0)),
    "run.output": ("str", "out"),
    "study.n_list": ("floats", (1.0, 4.0, 16.0, 64.0, math.inf)),
    "study.p_list": ("floats", (1.2, 1.4, 1.45)),
    "study.h_list": ("floats", (1 / 64, 1 / 128, 1 / 256)),
    "study.t_eval": ("float", 1.0),
    "study.window_split": ("float", 0.5),
    "study.jobs": ("int", 1),
}
REQUIRED = ("grid.kind", "model.p")


def _convert(kind, text):
    text = text.strip()
    if kind == "str":
        if not text:
            raise ValueError("empty value")
        return text
    if kind in ("opt_int", "opt_floats") and text.lower() in ("", "none"):
        return None
    if kind in ("int", "opt_int"):
        return int(text)
    if kind == "float":
        return float(text)
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    if kind == "ints":
        return tuple(int(p) for p in parts)
    return tuple(float(p) for p in parts)


def _format(kind, value):
    if value is None:
        return "none"
    if kind in ("float",):
        return repr(float(value))
    if kind in ("floats", "opt_floats"):
        return ", ".join(repr(float(v)) for v in value)
    if kind == "ints":
        return ", ".join(str(v) for v in value)
    return str(value)


def parse_pairs(text):
    """Split a document into ``{key: (raw_value, line_number)}``."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key in pairs:
            raise ConfigError("duplicate key", key, lineno)
        pairs[key] = (value, lineno)
    return pairs


def parse_config(text: str, overrides=()) -> RunConfig:
    """Parse and validate a configuration document.

    ``overrides`` is a sequence of ``key=value`` strings applied on top of the
    document.

    Raises
    ------
    ConfigError
        On unknown keys, malformed values or violated invariants; the message
        names the key and, where known, the line.
    """
    pairs = parse_pairs(text)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        pairs[key] = (value, None)
    values = {}
    for key, (raw, lineno) in pairs.items():
        if key not in SCHEMA:
            raise ConfigError("unknown key", key, lineno)
        kind = SCHEMA[key][0]
        try:
            values[key] = _convert(kind, raw)
        except ValueError as exc:
            raise ConfigError(f"cannot read {raw!r} as {kind}: {exc}", key, lineno) from None
    for key in REQUIRED:
        if key not in values:
            raise ConfigError("required key missing", key)
    lines = {k: ln for k, (_, ln) in pairs.items()}
    return _build({k: values.get(k, d) for k, (_, d) in SCHEMA.items()}, lines)


def _build(v, lines):
    def guard(keys, fn):
        try:
            return fn()
        except (ValueError, TypeError) as exc:
            msg = str(exc)
            named = [k for k in keys if k.split(".", 1)[1] in msg]
            key = next((k for k in named + keys if k in lines), (named + keys)[0])
            raise ConfigError(str(exc), key, lines.get(key)) from None

    p = v["model.p"]
    if not 1.0 < p < 2.0:
        raise ConfigError("p in (1,2) required", "model.p", lines.get("model.p"))
    kind = v["grid.kind"]
    naxes = 2 if kind == "cartesian2d" else 1
    cells = v["grid.cells"]
    extents = v["grid.extents"]
    grid = guard(["grid.kind", "grid.cells", "grid.extents", "grid.dim"], lambda: GridSpec(
        kind,
        cells * naxes if len(cells) == 1 else cells,
        extents * naxes if len(extents) == 1 else extents,
        v["grid.dim"]))
    limiter = guard(["model.p", "model.n_reg", "model.grad_floor"],
                    lambda: LimiterParams(p, v["model.n_reg"], v["model.grad_floor"]))
    ell = guard(["elliptic.rel_tol", "elliptic.max_iter", "elliptic.preconditioner"],
                lambda: EllipticOptions(v["elliptic.rel_tol"], v["elliptic.max_iter"],
                                        v["elliptic.preconditioner"]))
    model = guard(["model.chi", "model.mu"],
                  lambda: ModelParams(v["model.chi"], v["model.mu"], limiter, ell))
    dt = guard(["dt.dt_max", "dt.safety", "dt.dt_min", "dt.blowup_threshold"],
               lambda: DtPolicy(v["dt.dt_max"], v["dt.safety"], v["dt.dt_min"],
                                v["dt.blowup_threshold"]))
    init_keys = [k for k in SCHEMA if k.startswith("initial.")]
    initial = guard(init_keys, lambda: InitialData(
        v["initial.kind"], v["initial.amplitude"], v["initial.center"], v["initial.width"],
        v["initial.base"], v["initial.modes"]))
    study_keys = [k for k in SCHEMA if k.startswith("study.")]
    study = guard(study_keys, lambda: StudyOptions(
        v["study.n_list"], v["study.p_list"], v["study.h_list"], v["study.t_eval"],
        v["study.window_split"], v["study.jobs"]))
    run_keys = [k for k in SCHEMA if k.startswith("run.")]
    return guard(run_keys, lambda: RunConfig(
        grid, model, dt, initial, v["run.t_end"], v["run.monitor_every"], v["run.qlist"],
        v["run.output"], study))


def to_values(cfg: RunConfig) -> dict:
    lim, ell = cfg.model.limiter, cfg.model.elliptic
    ini, st = cfg.initial, cfg.study
    return {
        "grid.kind": cfg.grid.kind,
        "grid.cells": cfg.grid.cells,
        "grid.extents": cfg.grid.extents,
        "grid.dim": cfg.grid.dim,
        "model.chi": cfg.model.chi,
        "model.mu": cfg.model.mu,
        "model.p": lim.p,
        "model.n_reg": lim.n_reg,
        "model.grad_floor": lim.grad_floor,
        "elliptic.rel_tol": ell.rel_tol,
        "elliptic.max_iter": ell.max_iter,
        "elliptic.preconditioner": ell.preconditioner,
        "dt.dt_max": cfg.dt.dt_max,
        "dt.safety": cfg.dt.safety,
        "dt.dt_min": cfg.dt.dt_min,
        "dt.blowup_threshold": cfg.dt.blowup_threshold,
        "initial.kind": ini.kind,
        "initial.amplitude": ini.amplitude,
        "initial.center": ini.center,
        "initial.width": ini.width,
        "initial.base": ini.base,
        "initial.modes": ini.modes,
        "run.t_end": cfg.t_end,
        "run.monitor_every": cfg.monitor_every,
        "run.qlist": cfg.qlist,
        "run.output": cfg.output,
        "study.n_list": st.n_list,
        "study.p_list": st.p_list,
        "study.h_list": st.h_list,
        "study.t_eval": st.t_eval,
        "study.window_split": st.window_split,
        "study.jobs": st.jobs,
    }


def render(cfg: RunConfig) -> str:
    """Full document for ``cfg``; ``parse_config(render(cfg)) == cfg``."""
    lines = []
    section = None
    for key, value in to_values(cfg).items():
        head = key.split(".", 1)[0]
        if head != section:
            if section is not None:
                lines.append("")
            section = head
        lines.append(f"{key} = {_format(SCHEMA[key][0], value)}")
    return "\n".join(lines) + "\n"


def default_config(kind="cartesian2d", p=1.4, **changes) -> RunConfig:
    cfg = parse_config(f"grid.kind = {kind}\nmodel.p = {p!r}\n")
    return replace(cfg, **changes) if changes else cfg


BENCHMARK = """\
# two-dimensional benchmark: unit square, Gaussian bump, bounded regime
grid.kind = cartesian2d
grid.cells = 128, 128
model.p = 1.4
model.chi = 10
model.mu = 1
initial.kind = gaussian_bump
initial.amplitude = 4
initial.width = 0.05
run.t_end = 20
run.monitor_every = 0.1
"""

PROBE = """\
# radial probe of the concentration regime: 3-ball, strong drift, no growth
grid.kind = radial
grid.dim = 3
grid.cells = 400
model.p = 1.8
model.chi = 50
model.mu = 0
initial.kind = gaussian_bump
initial.amplitude = 20
initial.width = 0.1
run.t_end = 0.5
run.monitor_every = 0.01
"""


def benchmark_config(overrides=()) -> RunConfig:
    return parse_config(BENCHMARK, overrides)


def probe_config(overrides=()) -> RunConfig:
    return parse_config(PROBE, overrides)
