"""File output: raster frames (PGM/PPM), diagnostics and profile CSV."""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .solver import Diagnostics, PhaseState

__all__ = [
    "PHASE_COLORS",
    "to_bytes",
    "write_pgm",
    "write_ppm",
    "read_pnm",
    "write_frame",
    "write_diagnostics",
    "read_diagnostics",
    "write_table",
    "write_profile",
    "write_contours",
]

# phase 1 blue, phase 2 red, phase 3 green, then a few extra
PHASE_COLORS = np.array(
    [
        [0, 0, 255],
        [255, 0, 0],
        [0, 255, 0],
        [255, 255, 0],
        [255, 0, 255],
        [0, 255, 255],
        [128, 128, 128],
    ],
    dtype=float,
)


def to_bytes(values: np.ndarray) -> np.ndarray:
    """``rint(255 clip(u, 0, 1))`` as ``uint8``; ties round to even (0.5 -> 128)."""
    return np.rint(255.0 * np.clip(values, 0.0, 1.0)).astype(np.uint8)


def _image(field: np.ndarray) -> np.ndarray:
    # axis 0 is x, axis 1 is y; images have y pointing up
    if field.ndim != 2:
        raise ValueError("frames need 2D fields")
    return field.T[::-1]


def _write(path, header: bytes, data: np.ndarray) -> None:
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(data).tobytes())
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def write_pgm(path, field: np.ndarray) -> None:
    img = to_bytes(_image(field))
    h, w = img.shape
    _write(path, b"P5\n%d %d\n255\n" % (w, h), img)


def write_ppm(path, fields: np.ndarray) -> None:
    """Composite colour frame: each pixel is ``sum_k u_k color_k``."""
    n = fields.shape[0]
    colors = PHASE_COLORS[np.arange(n) % len(PHASE_COLORS)]
    rgb = np.tensordot(np.clip(fields, 0.0, 1.0), colors, axes=(0, 0)) / 255.0
    img = to_bytes(np.stack([_image(rgb[..., c]) for c in range(3)], axis=-1))
    h, w, _ = img.shape
    _write(path, b"P6\n%d %d\n255\n" % (w, h), img)


def read_pnm(path) -> np.ndarray:
    """Minimal reader for the binary P5/P6 files written here."""
    with open(path, "rb") as fh:
        data = fh.read()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255 or magic not in (b"P5", b"P6"):
        raise ValueError(f"{path}: unsupported PNM header")
    shape = (h, w) if magic == b"P5" else (h, w, 3)
    return np.frombuffer(data[pos:], dtype=np.uint8).reshape(shape)


def write_frame(state: PhaseState, prefix, names: Sequence[str] | None = None) -> list[Path]:
    """One ``<prefix>_<name>.pgm`` per phase plus the composite ``<prefix>.ppm``."""
    if state.grid.dim != 2:
        raise ValueError("frames are written for 2D states only")
    names = names or [str(k + 1) for k in range(state.n_phases)]
    prefix = Path(prefix)
    paths = []
    for name, u in zip(names, state.u):
        p = prefix.with_name(f"{prefix.name}_{name}.pgm")
        write_pgm(p, u)
        paths.append(p)
    p = prefix.with_name(prefix.name + ".ppm")
    write_ppm(p, state.u)
    paths.append(p)
    return paths


def _fmt_row(row: Iterable[float]) -> str:
    return ",".join("%.17g" % x for x in row)


def write_table(path, columns: Sequence[str], rows, echo: Iterable[str] = ()) -> None:
    """CSV with optional ``#`` comment lines, a header and ``%.17g`` values (LF endings)."""
    rows = np.asarray(rows, dtype=float).reshape(-1, len(columns))
    if not np.all(np.isfinite(rows)):
        raise ValueError("rows must be finite")
    lines = [f"# {line}" for line in echo]
    lines.append(",".join(columns))
    lines.extend(_fmt_row(r) for r in rows)
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def write_diagnostics(diagnostics: Diagnostics, path, echo: Iterable[str] = ()) -> None:
    write_table(path, diagnostics.columns, diagnostics.as_array(), echo)


def read_diagnostics(path) -> tuple[list[str], np.ndarray]:
    """``(columns, rows)`` from a CSV written by ``write_table``."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if not ln.startswith("#")]
    columns = lines[0].split(",")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:] if ln]
    return columns, np.array(rows, dtype=float).reshape(-1, len(columns))


def write_profile(profile, path, echo: Iterable[str] = ()) -> None:
    """Nanowire profile as ``alpha,r,h`` rows."""
    rows = np.column_stack([profile.alpha, profile.r, profile.h])
    write_table(path, ["alpha", "r", "h"], rows, echo)


def write_contours(path, contours_by_phase, echo: Iterable[str] = ()) -> None:
    """Half-level polylines as ``phase,contour,x,y`` rows."""
    rows = []
    for phase, contours in contours_by_phase:
        for c_id, c in enumerate(contours):
            for x, y in c.points:
                rows.append((phase, c_id, x, y))
    write_table(path, ["phase", "contour", "x", "y"], rows, echo)


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
