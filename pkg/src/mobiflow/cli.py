"""Command line: ``mobiflow run|validate|profile|oracle``.

Exit codes: 0 success, 1 usage, 2 invalid input, 3 runtime failure.  Errors
print one line ``error: <kind>: <reason>`` on stderr.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ParseError,
    RunConfig,
    ValidationError,
    build_model,
    build_schedule,
    build_state,
    load_config,
    parse_config,
    serialize,
)
from .grid import Grid, fft_workers
from .nanowire import WireParams, diameter_reduction, integrate_profile
from .output import ensure_dir, write_contours, write_diagnostics, write_frame, write_profile, write_table
from .phases import MobilitySet, TensionSet, profile_constant
from .scenarios import (
    BadPartition,
    Circle,
    HalfSpace,
    Intersection,
    Rest,
    Slab,
    extract_contour,
    init_from_shapes,
    locate_junction,
    measure_angles,
    vls_protocol,
    wetting_scenario,
)
from .solver import Diagnostics, SolverParams, energy, run

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: usage: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def preset_names() -> list[str]:
    root = resources.files("mobiflow") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def read_preset(name: str) -> str:
    return (resources.files("mobiflow") / "presets" / f"{name}.cfg").read_text(encoding="utf-8")


def resolve_config(arg: str) -> RunConfig:
    """A config file path, or the name of a bundled preset."""
    path = Path(arg)
    if path.exists():
        return load_config(path)
    if arg in preset_names():
        return parse_config(read_preset(arg))
    raise FileNotFoundError(f"no config file or preset named {arg!r}")


@dataclass
class RunOutput:
    state: object
    diagnostics: Diagnostics
    frames: list = field(default_factory=list)
    stages: list = field(default_factory=list)


def _echo(cfg: RunConfig) -> list[str]:
    return [f"mobiflow {__version__}", f"threads = {fft_workers()}"] + serialize(cfg).splitlines()


def run_config(cfg: RunConfig, out_dir=None, callbacks=(), t_end=None) -> RunOutput:
    """Simulate a configuration; writes frames, diagnostics and contours when ``out_dir`` is set."""
    t_end = cfg.t_end if t_end is None else t_end
    state = build_state(cfg)
    tensions, mobility, params = build_model(cfg)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        ensure_dir(out)
    frames: list = []
    pending = [t for t in cfg.frame_times if t <= t_end + 0.5 * cfg.dt]

    def snapshot(s, t):
        if out is not None:
            write_frame(s, out / f"frame_{len(frames):03d}", cfg.names)
        frames.append((t, s.u.copy()))

    while pending and pending[0] <= 0.5 * cfg.dt:
        snapshot(state, pending.pop(0))

    def frame_cb(step, s, info):
        while pending and abs(s.time - pending[0]) <= 0.5 * cfg.dt:
            snapshot(s, pending.pop(0))

    cbs = list(callbacks) + ([frame_cb] if pending else [])
    stages = []
    if cfg.protocol == "vls":
        idx = cfg.index
        res = vls_protocol(
            state, tensions, params, t_end,
            solid=idx(cfg.solid), liquid=idx(cfg.liquid), vapor=idx(cfg.vapor),
            t_growth=cfg.t_growth, growth_rate=cfg.growth_rate,
            delta=cfg.delta or None, callbacks=cbs, every=cfg.every,
        )
        stages = [r for r in (res.stage_a, res.stage_b) if r is not None]
        diags = Diagnostics(cfg.n_phases)
        for k, r in enumerate(stages):
            for row in r.diagnostics.rows[(1 if k else 0):]:
                diags.append(row)
        final = res.state
    elif cfg.protocol == "wetting":
        idx = cfg.index
        r = wetting_scenario(
            state, tensions, params, t_end,
            liquid=idx(cfg.liquid), vapor=idx(cfg.vapor), solid=idx(cfg.solid),
            hold_liquid=cfg.hold_liquid, mobility=mobility, callbacks=cbs, every=cfg.every,
        )
        stages, diags, final = [r], r.diagnostics, r.state
    else:
        r = run(state, tensions, mobility, params, t_end, build_schedule(cfg, state), cbs, cfg.every)
        stages, diags, final = [r], r.diagnostics, r.state
    if out is not None:
        write_diagnostics(diags, out / "diagnostics.csv", _echo(cfg))
        if cfg.contours and final.grid.dim == 2:
            cs = [(k, extract_contour(final, k)) for k in range(final.n_phases)]
            write_contours(out / "contours.csv", cs, _echo(cfg))
    return RunOutput(final, diags, frames, stages)


# -- oracle fixtures -----------------------------------------------------------


def oracle_circle(size=128, mobility=1.0, alpha=2.5, t_end=0.03, dt_factor=1.0, radius=0.3):
    """Two-phase shrinking circle; returns ``(times, R^2, fitted slope)``."""
    eps = 1.0 / size
    grid = Grid((size, size))
    disk = Circle((0.5, 0.5), radius)
    state = init_from_shapes(grid, eps, [disk, Rest((disk,))])
    tensions = TensionSet.from_pairs([1.0])
    mob = MobilitySet.from_pairs([mobility])
    params = SolverParams(dt=dt_factor * eps**2, alpha=alpha)
    times, r2 = [0.0], [extract_contour(state, 0)[0].radius ** 2]
    n_steps = round(t_end / params.dt)
    stride = max(1, n_steps // 30)

    def record(step, s, info):
        if (step + 1) % stride == 0:
            times.append(s.time)
            r2.append(extract_contour(s, 0)[0].radius ** 2)

    run(state, tensions, mob, params, t_end, callbacks=[record], every=n_steps + 1)
    times, r2 = np.array(times), np.array(r2)
    slope = float(np.polyfit(times, r2, 1)[0])
    return times, r2, slope


def oracle_flat(size=1024, epsilon=1.0 / 64, sigma=1.0):
    """Energy of a periodic 1D slab (two interfaces) against ``2 * sigma * c_W / 2``."""
    grid = Grid((size,))
    slab = Slab(0, 0.25, 0.75)
    state = init_from_shapes(grid, epsilon, [slab, Rest((slab,))])
    e = energy(state, TensionSet.from_pairs([sigma]))
    expected = 2 * 0.5 * sigma * profile_constant()
    return e, expected


def oracle_junction(size=128, t_end=0.01, tensions=(1.0, 1.0, 1.0)):
    """Double bubble relaxed for ``t_end``; returns sector angles (degrees) at each junction."""
    eps = 1.0 / size
    grid = Grid((size, size))
    disk = Circle((0.5, 0.5), 0.3)
    shapes = [
        Intersection((disk, HalfSpace(0, 0.5))),
        Intersection((disk, HalfSpace(0, 0.5, below=False))),
        Rest((disk,)),
    ]
    state = init_from_shapes(grid, eps, shapes)
    res = run(state, TensionSet.from_pairs(tensions), MobilitySet.from_pairs([1, 1, 1]),
              SolverParams(dt=eps**2), t_end, every=10**9)
    return [np.degrees(measure_angles(res.state, j)) for j in locate_junction(res.state)]


# -- commands --------------------------------------------------------------


def _cmd_run(args) -> int:
    cfg = resolve_config(args.config)
    out = args.out or cfg.output_dir
    res = run_config(cfg, out, t_end=args.t_end)
    if not args.quiet:
        last = res.diagnostics.rows[-1]
        print(f"t={last[0]:.6g} energy={last[1]:.10g} frames={len(res.frames)} out={out}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = resolve_config(args.config)
    state = build_state(cfg)
    tensions, mobility, _ = build_model(cfg)
    print(
        f"ok phases={cfg.n_phases} grid={'x'.join(map(str, cfg.sizes))} "
        f"steps={math.ceil(cfg.t_end / cfg.dt - 1e-9)} energy={energy(state, tensions):.10g}"
    )
    return EXIT_OK


def _cmd_profile(args) -> int:
    w = WireParams(args.a, args.b, args.R0, args.cap_model)
    prof = integrate_profile(w, args.samples)
    red, reached = diameter_reduction(w)
    echo = [
        f"a = {w.a!r}", f"b = {w.b!r}", f"R0 = {w.R0!r}", f"cap_model = {w.cap_model}",
        f"alpha_max = {prof.alpha_max!r}", f"alpha_stop = {prof.alpha_stop!r}",
        f"reached_stationary = {str(reached).lower()}", f"diameter_reduction = {red!r}",
        "columns: alpha (rad), r, h",
    ]
    write_profile(prof, args.out or sys.stdout, echo)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    if args.fixture == "circle":
        _, _, slope = oracle_circle(args.size or 128, t_end=args.t_end or 0.03)
        print(f"slope={slope!r} expected=-2")
    elif args.fixture == "flat":
        e, expected = oracle_flat(args.size or 1024)
        print(f"energy={e!r} expected={expected!r} relative_error={abs(e / expected - 1)!r}")
    else:
        for k, angles in enumerate(oracle_junction(args.size or 128, t_end=args.t_end or 0.01)):
            print(f"junction={k} angles_deg=" + ",".join(f"{a:.4f}" for a in angles))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mobiflow", description="Mobility-weighted multiphase Allen-Cahn simulations.")
    p.add_argument("--version", action="version", version=f"mobiflow {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate a config file or bundled preset")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: output.dir)")
    r.add_argument("--t-end", type=float, help="override model.t_end")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("validate", help="parse a config and build its initial state")
    v.add_argument("config")
    v.set_defaults(func=_cmd_validate)

    pr = sub.add_parser("profile", help="export the quasi-static nanowire profile as CSV")
    pr.add_argument("--a", type=float, required=True, help="sigma_VL / sigma_SV")
    pr.add_argument("--b", type=float, required=True, help="sigma_LS / sigma_SV")
    pr.add_argument("--R0", type=float, default=1.0)
    pr.add_argument("--cap-model", choices=["standard", "geometric"], default="standard")
    pr.add_argument("--samples", type=int, default=200)
    pr.add_argument("--out")
    pr.set_defaults(func=_cmd_profile)

    o = sub.add_parser("oracle", help="run an acceptance fixture and print the measurement")
    o.add_argument("fixture", choices=["circle", "flat", "junction"])
    o.add_argument("--size", type=int)
    o.add_argument("--t-end", type=float)
    o.set_defaults(func=_cmd_oracle)

    sub.add_parser("presets", help="list bundled presets").set_defaults(
        func=lambda a: print("\n".join(preset_names())) or EXIT_OK
    )
    return p


_INVALID = (ParseError, ValidationError, BadPartition, FileNotFoundError)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _INVALID as exc:
        print(f"error: invalid: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # domain errors from the nanowire theory and model constructors
        print(f"error: invalid: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, OSError, ArithmeticError) as exc:
        print(f"error: runtime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    try:
        code = main()
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_USAGE
    sys.exit(code)
