import io

import numpy as np
import pytest
from PIL import Image

from mobiflow.cli import preset_names, read_preset
from mobiflow.config import (
    ParseError,
    ValidationError,
    build_model,
    build_state,
    parse_config,
    serialize,
)
from mobiflow.grid import Grid
from mobiflow.output import (
    read_diagnostics,
    read_pnm,
    to_bytes,
    write_diagnostics,
    write_frame,
    write_pgm,
    write_ppm,
    write_table,
)
from mobiflow.solver import Diagnostics, PhaseState

MINIMAL = """\
grid.sizes = 32, 32
model.epsilon = 1/32
model.dt = 1/1024
model.t_end = 0.01
phases.names = inner, outer
phases.tensions = 1
phases.mobilities = 1
shape.inner = circle, 0.5, 0.5, 0.3
shape.outer = rest
"""


# -- config ------------------------------------------------------------------


def test_empty_config_needs_grid():
    with pytest.raises(ValidationError, match="grid"):
        parse_config("")


def test_malformed_number_reports_line():
    text = MINIMAL.replace("model.dt = 1/1024", "model.dt = 1/x24")
    with pytest.raises(ParseError) as exc:
        parse_config(text)
    assert exc.value.line == 3


@pytest.mark.parametrize(
    "line, lineno",
    [("grid.size = 32", 10), ("just words", 10), ("model.alpha =", 10), ("model.epsilon = 0.1", 10)],
)
def test_parse_errors(line, lineno):
    with pytest.raises(ParseError) as exc:
        parse_config(MINIMAL + line + "\n")
    assert exc.value.line == lineno


def test_fractions_and_comments():
    cfg = parse_config("# header\n" + MINIMAL.replace("1/32", "1/32   # eps"))
    assert cfg.epsilon == 1 / 32
    assert cfg.dt == 1 / 1024


def test_junction_preset_round_trip():
    text = read_preset("isotropic_junction")
    cfg = parse_config(text)
    assert cfg.sizes == (256, 256)
    assert cfg.epsilon == 1 / 256 and cfg.dt == 1 / 256**2
    assert cfg.tensions == (1, 1, 1) and cfg.mobilities == (1, 1, 1)
    once = serialize(cfg)
    again = parse_config(once)
    assert again == cfg
    assert serialize(again) == once


@pytest.mark.parametrize("name", preset_names())
def test_every_preset_round_trips(name):
    cfg = parse_config(read_preset(name))
    assert parse_config(serialize(cfg)) == cfg


@pytest.mark.parametrize(
    "edit, message",
    [
        (("model.epsilon = 1/32", "model.epsilon = -1"), "epsilon"),
        (("phases.tensions = 1", "phases.tensions = 1, 1"), "tensions"),
        (("phases.names = inner, outer", "phases.names = inner, inner"), "unique"),
        (("model.t_end = 0.01", "model.t_end = 0.01\noutput.frame_times = 0.02"), "frame_times"),
        (("model.t_end = 0.01", "model.t_end = 0.01\ngeometry.priority = inner, inner"), "duplicates"),
        (("model.t_end = 0.01", "model.t_end = 0.01\ngeometry.priority = nope"), "priority"),
        (("model.t_end = 0.01", "model.t_end = 0.01\ngeometry.priority = outer"), "rest"),
    ],
)
def test_validation_errors(edit, message):
    with pytest.raises(ValidationError, match=message):
        parse_config(MINIMAL.replace(*edit))


def test_triangle_violation_is_a_validation_error():
    text = """\
grid.sizes = 32, 32
model.epsilon = 1/32
model.dt = 1/1024
model.t_end = 0.01
phases.names = a, b, c
phases.tensions = 1, 1, 3
phases.mobilities = 1, 1, 1
shape.a = slab, y, 0, 0.3
shape.b = slab, y, 0.3, 0.6
shape.c = rest
"""
    with pytest.raises(ValidationError):
        parse_config(text)


def test_priority_resolves_overlap():
    base = MINIMAL.replace("shape.outer = rest", "shape.outer = rest\n").replace(
        "phases.names = inner, outer", "phases.names = inner, band, outer"
    ).replace("phases.tensions = 1", "phases.tensions = 1, 1, 1").replace(
        "phases.mobilities = 1", "phases.mobilities = 1, 1, 1"
    ) + "shape.band = slab, y, 0.3, 0.7\n"
    cfg = parse_config(base)
    from mobiflow.scenarios import BadPartition

    with pytest.raises(BadPartition):
        build_state(cfg)
    st = build_state(parse_config(base + "geometry.priority = inner, band\n"))
    assert st.u[0][16, 16] > 0.99
    assert st.u[1][0, 16] > 0.99  # farthest band point from the disk


@pytest.mark.parametrize("name", preset_names())
def test_presets_build(name):
    cfg = parse_config(read_preset(name))
    if np.prod(cfg.sizes) > 256**2:
        pytest.skip("large grid")
    st = build_state(cfg)
    build_model(cfg)
    assert st.partition_residual() <= 1e-10


# -- rasters -----------------------------------------------------------------


def test_pgm_bytes(tmp_path):
    g = Grid((8, 6))
    write_pgm(tmp_path / "one.pgm", np.ones(g.shape))
    write_pgm(tmp_path / "half.pgm", np.full(g.shape, 0.5))
    one = (tmp_path / "one.pgm").read_bytes()
    # width is the x extent
    assert one.startswith(b"P5\n8 6\n255\n")
    assert set(one[len(b"P5\n8 6\n255\n"):]) == {255}
    half = read_pnm(tmp_path / "half.pgm")
    assert half.shape == (6, 8) and np.all(half == 128)
    assert to_bytes(np.array([-1.0, 0.0, 0.5, 1 / 255 * 0.5, 2.0])).tolist() == [0, 0, 128, 0, 255]


def test_pgm_read_by_pillow(tmp_path, rng):
    f = rng.uniform(-0.1, 1.1, (20, 13))
    write_pgm(tmp_path / "f.pgm", f)
    with Image.open(tmp_path / "f.pgm") as im:
        assert im.mode == "L" and im.size == (20, 13)
        pix = np.asarray(im)
    assert np.array_equal(pix, to_bytes(f.T[::-1]))
    assert np.array_equal(pix, read_pnm(tmp_path / "f.pgm"))


def test_ppm_colours(tmp_path):
    g = Grid((4, 4))
    u = np.zeros((3,) + g.shape)
    u[0, :2] = 1
    u[1, 2:] = 1
    write_ppm(tmp_path / "c.ppm", u)
    with Image.open(tmp_path / "c.ppm") as im:
        assert im.mode == "RGB"
        pix = np.asarray(im)
    # x runs along image columns
    assert pix[0, 0].tolist() == [0, 0, 255]
    assert pix[0, 3].tolist() == [255, 0, 0]


def test_write_frame_files(tmp_path):
    g = Grid((8, 8))
    st = PhaseState(g, np.stack([np.ones(g.shape), np.zeros(g.shape)]), 0.1)
    paths = write_frame(st, tmp_path / "f000", ["a", "b"])
    assert [p.name for p in paths] == ["f000_a.pgm", "f000_b.pgm", "f000.ppm"]
    with pytest.raises(ValueError):
        write_frame(PhaseState(Grid((8,)), np.ones((2, 8)) / 2, 0.1), tmp_path / "x")


def test_io_error_names_path(tmp_path):
    bad = tmp_path / "missing" / "f.pgm"
    with pytest.raises(OSError, match="missing"):
        write_pgm(bad, np.zeros((4, 4)))


# -- CSV ---------------------------------------------------------------------


def test_zero_rows_is_header_only(tmp_path):
    d = Diagnostics(2)
    write_diagnostics(d, tmp_path / "d.csv")
    text = (tmp_path / "d.csv").read_text()
    assert text == ",".join(d.columns) + "\n"
    assert d.columns[:4] == ["t", "energy", "vol_1", "vol_2"]


def test_diagnostics_round_trip_bit_exact(tmp_path, rng):
    d = Diagnostics(3)
    for t in range(7):
        row = rng.normal(size=len(d.columns)) * 10.0 ** rng.integers(-20, 20, len(d.columns))
        row[0] = t * np.pi
        d.append(row)
    write_diagnostics(d, tmp_path / "d.csv", ["echo line"])
    raw = (tmp_path / "d.csv").read_bytes()
    assert b"\r" not in raw and raw.startswith(b"# echo line\n")
    cols, rows = read_diagnostics(tmp_path / "d.csv")
    assert cols == d.columns
    assert np.array_equal(rows, d.as_array())


def test_table_rejects_non_finite():
    with pytest.raises(ValueError):
        write_table(io.StringIO(), ["a"], [[np.nan]])
