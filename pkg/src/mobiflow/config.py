"""Line-oriented run configuration.

Format::

    # comment
    grid.sizes = 256, 256
    model.epsilon = 1/256
    phases.names = inner, outer
    shape.inner = circle, 0.5, 0.5, 0.3
    shape.outer = rest

Overlapping shapes need ``geometry.priority`` (phase names, strongest first).

Numbers may be written as fractions (``1/256``).  Lists are comma
separated.  Unknown keys are rejected.  ``serialize`` writes every resolved
value back, so ``parse_config(serialize(c)) == c``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction

import numpy as np

from .grid import Grid
from .phases import MobilitySet, TensionSet, TriangleViolation, pair_index
from .scenarios import (
    Circle,
    Difference,
    HalfSpace,
    Intersection,
    Rest,
    Shape,
    Slab,
    Substrate,
    Union,
    init_from_shapes,
)
from .solver import PhaseState, SolverParams, VolumeSchedule

__all__ = [
    "ParseError",
    "ValidationError",
    "RunConfig",
    "parse_config",
    "serialize",
    "load_config",
    "build_shapes",
    "build_state",
    "build_model",
]

PROTOCOLS = ("plain", "wetting", "vls")
VOLUME_MODES = ("free", "constant")
SHAPE_KINDS = ("circle", "clipped_circle", "cap", "substrate", "polyline_substrate", "slab", "rest")


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ValidationError(ValueError):
    """A configuration value violates a precondition."""


@dataclass(frozen=True)
class RunConfig:
    sizes: tuple[int, ...]
    epsilon: float
    dt: float
    t_end: float
    names: tuple[str, ...]
    tensions: tuple[float, ...]
    mobilities: tuple[float, ...]
    shapes: tuple[tuple, ...]
    lengths: tuple[float, ...] = ()
    alpha: float = 2.5
    sum_floor: float = 1e-12
    linear_tol: float = 1e-10
    tension_split: tuple[float, ...] = ()
    mobility_kind: str = "additive"
    mobility_split: tuple[float, ...] = ()
    volume_modes: tuple[str, ...] = ()
    protocol: str = "plain"
    solid: str = ""
    liquid: str = ""
    vapor: str = ""
    t_growth: float = 0.2
    growth_rate: float = 0.25
    delta: float = 0.0
    hold_liquid: bool = True
    output_dir: str = "out"
    frame_times: tuple[float, ...] = ()
    every: int = 10
    contours: bool = True
    deterministic: bool = True
    priority: tuple[str, ...] = ()

    @property
    def n_phases(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


# key -> (attribute, kind); kinds: int, float, ints, floats, str, strs, bool, shape
_KEYS = {
    "grid.sizes": ("sizes", "ints"),
    "grid.lengths": ("lengths", "floats"),
    "model.epsilon": ("epsilon", "float"),
    "model.dt": ("dt", "float"),
    "model.t_end": ("t_end", "float"),
    "model.alpha": ("alpha", "float"),
    "model.sum_floor": ("sum_floor", "float"),
    "model.linear_tol": ("linear_tol", "float"),
    "phases.names": ("names", "strs"),
    "phases.tensions": ("tensions", "floats"),
    "phases.tension_split": ("tension_split", "floats"),
    "phases.mobilities": ("mobilities", "floats"),
    "phases.mobility_kind": ("mobility_kind", "str"),
    "phases.mobility_split": ("mobility_split", "floats"),
    "volume.modes": ("volume_modes", "strs"),
    "protocol.kind": ("protocol", "str"),
    "protocol.solid": ("solid", "str"),
    "protocol.liquid": ("liquid", "str"),
    "protocol.vapor": ("vapor", "str"),
    "protocol.t_growth": ("t_growth", "float"),
    "protocol.growth_rate": ("growth_rate", "float"),
    "protocol.delta": ("delta", "float"),
    "protocol.hold_liquid": ("hold_liquid", "bool"),
    "output.dir": ("output_dir", "str"),
    "output.frame_times": ("frame_times", "floats"),
    "output.every": ("every", "int"),
    "output.contours": ("contours", "bool"),
    "run.deterministic": ("deterministic", "bool"),
    "geometry.priority": ("priority", "strs"),
}
_REQUIRED = (
    "grid.sizes",
    "model.epsilon",
    "model.dt",
    "model.t_end",
    "phases.names",
    "phases.tensions",
    "phases.mobilities",
)


def _number(token: str) -> float:
    token = token.strip()
    try:
        if "/" in token:
            return float(Fraction(token))
        return float(token)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed number {token!r}") from None


def _int(token: str) -> int:
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        raise ValueError(f"malformed integer {token!r}") from None


def _bool(token: str) -> bool:
    t = token.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"malformed boolean {token!r}")


def _split(value: str) -> list[str]:
    parts = [p.strip() for p in value.split(",")]
    if any(not p for p in parts):
        raise ValueError("empty list item")
    return parts


def _convert(kind: str, value: str):
    if kind == "int":
        return _int(value)
    if kind == "float":
        return _number(value)
    if kind == "ints":
        return tuple(_int(p) for p in _split(value))
    if kind == "floats":
        return tuple(_number(p) for p in _split(value))
    if kind == "str":
        return value.strip()
    if kind == "strs":
        return tuple(_split(value))
    if kind == "bool":
        return _bool(value)
    raise AssertionError(kind)


def _shape_spec(value: str) -> tuple:
    parts = _split(value)
    kind = parts[0].lower()
    if kind not in SHAPE_KINDS:
        raise ValueError(f"unknown shape kind {kind!r}")
    args = []
    for p in parts[1:]:
        try:
            args.append(_number(p))
        except ValueError:
            if p.lower() in ("x", "y", "z", "below", "above"):
                args.append(p.lower())
            else:
                raise
    return (kind, *args)


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    shapes: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(lineno, "expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not value:
            raise ParseError(lineno, f"missing value for {key!r}")
        try:
            if key.startswith("shape."):
                name = key[len("shape."):]
                if not name or name in shapes:
                    raise ValueError(f"bad or duplicate shape key {key!r}")
                shapes[name] = _shape_spec(value)
                continue
            if key not in _KEYS:
                raise ParseError(lineno, f"unknown key {key!r}")
            if key in values:
                raise ValueError(f"duplicate key {key!r}")
            attr, kind = _KEYS[key]
            values[key] = (attr, _convert(kind, value))
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    for key in _REQUIRED:
        if key not in values:
            raise ValidationError(f"{key} is required")
    kwargs = {attr: v for attr, v in values.values()}
    names = kwargs["names"]
    if len(set(names)) != len(names):
        raise ValidationError("phase names must be unique")
    missing = [n for n in names if n not in shapes]
    extra = [n for n in shapes if n not in names]
    if missing or extra:
        raise ValidationError(f"shapes must match phases: missing {missing}, unknown {extra}")
    kwargs["shapes"] = tuple(shapes[n] for n in names)
    cfg = RunConfig(**kwargs)
    validate(cfg)
    return cfg


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return v
    return ", ".join(_fmt(x) for x in v)


def serialize(cfg: RunConfig) -> str:
    """Canonical text form with every value resolved (defaults included)."""
    lines = []
    for key, (attr, kind) in _KEYS.items():
        v = getattr(cfg, attr)
        if kind in ("ints", "floats", "strs") and len(v) == 0:
            continue
        if kind == "str" and v == "":
            continue
        lines.append(f"{key} = {_fmt(v)}")
    for name, spec in zip(cfg.names, cfg.shapes):
        lines.append(f"shape.{name} = {_fmt(spec)}")
    return "\n".join(lines) + "\n"


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- validation --------------------------------------------------------------


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ValidationError(message)


def validate(cfg: RunConfig) -> None:
    n = cfg.n_phases
    _check(1 <= len(cfg.sizes) <= 3, "grid.sizes needs 1 to 3 entries")
    _check(all(k >= 4 for k in cfg.sizes), "grid.sizes entries must be >= 4")
    _check(not cfg.lengths or len(cfg.lengths) == len(cfg.sizes), "grid.lengths must match grid.sizes")
    _check(all(x > 0 for x in cfg.lengths), "grid.lengths must be positive")
    _check(math.isfinite(cfg.epsilon) and cfg.epsilon > 0, "model.epsilon must be positive")
    _check(math.isfinite(cfg.dt) and cfg.dt > 0, "model.dt must be positive")
    _check(math.isfinite(cfg.t_end) and cfg.t_end >= 0, "model.t_end must be non-negative")
    _check(cfg.alpha >= 0, "model.alpha must be non-negative")
    _check(cfg.sum_floor > 0 and cfg.linear_tol > 0, "model tolerances must be positive")
    _check(n >= 2, "phases.names needs at least two phases")
    _check(len(set(cfg.names)) == n, "phase names must be unique")
    n_pairs = n * (n - 1) // 2
    _check(len(cfg.tensions) == n_pairs, f"phases.tensions needs {n_pairs} values")
    _check(len(cfg.mobilities) == n_pairs, f"phases.mobilities needs {n_pairs} values")
    _check(not cfg.tension_split or len(cfg.tension_split) == n, "phases.tension_split needs one value per phase")
    _check(not cfg.mobility_split or len(cfg.mobility_split) == n, "phases.mobility_split needs one value per phase")
    _check(cfg.mobility_kind in ("additive", "general"), "phases.mobility_kind is additive or general")
    _check(
        not cfg.volume_modes or len(cfg.volume_modes) == n, "volume.modes needs one entry per phase"
    )
    _check(all(m in VOLUME_MODES for m in cfg.volume_modes), f"volume.modes entries are {VOLUME_MODES}")
    _check(cfg.protocol in PROTOCOLS, f"protocol.kind must be one of {PROTOCOLS}")
    if cfg.protocol in ("wetting", "vls"):
        _check(n == 3, f"{cfg.protocol} protocol needs three phases")
        roles = (cfg.solid, cfg.liquid, cfg.vapor)
        _check(sorted(roles) == sorted(cfg.names), "protocol.solid/liquid/vapor must name the three phases")
        _check(not cfg.volume_modes, "volume.modes is set by the protocol")
    _check(cfg.t_growth >= 0 and cfg.growth_rate >= 0 and cfg.delta >= 0, "protocol values must be non-negative")
    _check(cfg.every >= 1, "output.every must be >= 1")
    _check(all(0 <= t <= cfg.t_end for t in cfg.frame_times), "output.frame_times must lie in [0, t_end]")
    _check(list(cfg.frame_times) == sorted(cfg.frame_times), "output.frame_times must be increasing")
    if cfg.frame_times:
        _check(len(cfg.sizes) == 2, "frames are written for 2D grids only")
    _check(all(p in cfg.names for p in cfg.priority), "geometry.priority must name phases")
    _check(len(set(cfg.priority)) == len(cfg.priority), "geometry.priority has duplicates")
    _check(
        all(cfg.shapes[cfg.index(p)][0] != "rest" for p in cfg.priority), "geometry.priority cannot include the rest shape"
    )
    for spec in cfg.shapes:
        _validate_shape(spec, len(cfg.sizes))
    _check(sum(1 for s in cfg.shapes if s[0] == "rest") <= 1, "at most one 'rest' shape")
    try:
        build_model(cfg)
    except (ValueError, TriangleViolation) as exc:
        raise ValidationError(str(exc)) from None


_SHAPE_ARITY = {
    "circle": lambda d: d + 1,
    "clipped_circle": lambda d: d + 4,
    "cap": lambda d: 3,
    "substrate": lambda d: 2,
    "slab": lambda d: 3,
    "rest": lambda d: 0,
}


def _validate_shape(spec: tuple, dim: int) -> None:
    kind, args = spec[0], spec[1:]
    if kind == "polyline_substrate":
        _check(dim == 2, "polyline_substrate is 2D only")
        _check(len(args) >= 5 and len(args) % 2 == 1, "polyline_substrate needs bottom then (x, h) pairs")
        _check(all(isinstance(a, float) for a in args), "polyline_substrate takes numbers")
        return
    _check(len(args) == _SHAPE_ARITY[kind](dim), f"shape {kind} has the wrong number of values")
    if kind in ("cap", "substrate"):
        _check(dim == 2, f"{kind} is 2D only")
    if kind == "clipped_circle":
        _check(args[-3] in ("x", "y", "z"), "clipped_circle axis is x, y or z")
        _check(args[-1] in ("below", "above"), "clipped_circle side is below or above")
    if kind == "slab":
        _check(args[0] in ("x", "y", "z"), "slab axis is x, y or z")
    radius = {"circle": -1, "clipped_circle": -4, "cap": 2}.get(kind)
    if radius is not None:
        _check(isinstance(args[radius], float) and args[radius] > 0, "radius must be positive")


# -- building ----------------------------------------------------------------

_AXES = {"x": 0, "y": 1, "z": 2}


def _shape(spec: tuple, others: list) -> Shape:
    kind, a = spec[0], spec[1:]
    if kind == "circle":
        return Circle(tuple(a[:-1]), a[-1])
    if kind == "clipped_circle":
        centre, r, axis, value, side = a[:-4], a[-4], a[-3], a[-2], a[-1]
        return Intersection((Circle(tuple(centre), r), HalfSpace(_AXES[axis], value, side == "below")))
    if kind == "cap":
        cx, ys, r = a
        return Intersection((Circle((cx, ys), r), HalfSpace(1, ys, below=False)))
    if kind == "substrate":
        return Substrate(a[0], a[1])
    if kind == "polyline_substrate":
        pts = tuple(zip(a[1::2], a[2::2]))
        return Substrate(pts, a[0])
    if kind == "slab":
        return Slab(_AXES[a[0]], a[1], a[2])
    if kind == "rest":
        return Rest(tuple(others))
    raise AssertionError(kind)


def build_shapes(cfg: RunConfig) -> list[Shape]:
    """Shapes in phase order.

    Phases named in ``geometry.priority`` are clipped by every phase listed
    before them, so their shapes may overlap.
    """
    concrete = [_shape(s, []) if s[0] != "rest" else None for s in cfg.shapes]
    seen = []
    for name in cfg.priority:
        k = cfg.index(name)
        s = concrete[k]
        if seen:
            concrete[k] = Difference(s, Union(tuple(seen)))
        seen.append(s)
    others = [s for s in concrete if s is not None]
    return [s if s is not None else _shape(spec, others) for s, spec in zip(concrete, cfg.shapes)]


def build_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.sizes, cfg.lengths or None)


def build_state(cfg: RunConfig) -> PhaseState:
    return init_from_shapes(build_grid(cfg), cfg.epsilon, build_shapes(cfg))


def build_model(cfg: RunConfig):
    """``(TensionSet, MobilitySet, SolverParams)`` for a configuration."""
    tensions = TensionSet.from_pairs(
        np.array(cfg.tensions), per_phase_values=np.array(cfg.tension_split) if cfg.tension_split else None
    )
    if cfg.mobility_kind == "general":
        mobility = MobilitySet.from_pairs(np.array(cfg.mobilities), kind="general")
    else:
        mobility = MobilitySet.from_pairs(
            np.array(cfg.mobilities),
            per_phase_values=np.array(cfg.mobility_split) if cfg.mobility_split else None,
        )
    params = SolverParams(cfg.dt, cfg.alpha, cfg.sum_floor, cfg.linear_tol)
    return tensions, mobility, params


def build_schedule(cfg: RunConfig, state: PhaseState) -> VolumeSchedule | None:
    if not cfg.volume_modes or all(m == "free" for m in cfg.volume_modes):
        return None
    keep = [k for k, m in enumerate(cfg.volume_modes) if m == "constant"]
    return VolumeSchedule.constant(state, keep)


def pair_labels(cfg: RunConfig) -> list[str]:
    return [f"{cfg.names[i]}-{cfg.names[j]}" for i, j in pair_index(cfg.n_phases)]
