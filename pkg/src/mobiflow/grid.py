"""Periodic uniform grids and Fourier-space operators.

Fields are plain ``numpy`` arrays of shape ``grid.shape`` (row-major, last
axis contiguous).  Spectral coefficients follow the synthesis convention

    u(x) = sum_k c_k exp(2 i pi xi_k . x),   xi_k = (k_1/L_1, ..., k_d/L_d),

so the forward transform carries the ``1/prod(K)`` factor.  Coefficient
arrays use the standard DFT layout (negative frequencies in the upper half).
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "ImaginaryResidueTooLarge",
    "forward_transform",
    "inverse_transform",
    "laplacian_symbol",
    "solve_semi_implicit",
    "fft_workers",
]

# relative size of a discarded imaginary part that is tolerated silently / at all
_IMAG_WARN = 1e-10
_IMAG_FAIL = 1e-6


class ImaginaryResidueTooLarge(ValueError):
    """Inverse transform of coefficients that are not the transform of a real field."""


def fft_workers() -> int:
    """Thread count for FFTs, from ``MOBIFLOW_THREADS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("MOBIFLOW_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Periodic lattice on the box ``[0, L_1) x ... x [0, L_d)``.

    Sample ``k`` sits at ``x_k = (k_1 h_1, ..., k_d h_d)`` with ``h = L / K``.
    Sizes with large prime factors are accepted but transform slowly.
    """

    sizes: tuple[int, ...]
    lengths: tuple[float, ...] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        sizes = tuple(int(k) for k in np.atleast_1d(self.sizes))
        lengths = self.lengths
        if lengths is None:
            lengths = (1.0,) * len(sizes)
        lengths = tuple(float(x) for x in np.atleast_1d(lengths))
        if not 1 <= len(sizes) <= 3:
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {len(sizes)}")
        if len(lengths) != len(sizes):
            raise ValueError("sizes and lengths must have the same length")
        if any(k < 4 for k in sizes):
            raise ValueError(f"every axis needs at least 4 samples, got {sizes}")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        total = 1
        for k in sizes:
            total *= k
        if total > np.iinfo(np.intp).max // 16:
            raise ValueError("grid too large for this platform")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "lengths", lengths)

    @property
    def dim(self) -> int:
        return len(self.sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(L / K for L, K in zip(self.lengths, self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def size(self) -> int:
        return int(np.prod(self.sizes))

    def axes(self) -> list[np.ndarray]:
        """1D coordinate arrays, one per axis."""
        return [np.arange(K) * h for K, h in zip(self.sizes, self.spacings)]

    def coordinates(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays (``indexing='ij'``)."""
        return list(np.meshgrid(*self.axes(), indexing="ij", sparse=True))

    def frequencies(self) -> list[np.ndarray]:
        """Per-axis ``xi = k / L`` in DFT order, ``k`` in ``[-K/2, K/2 - 1]``."""
        return [sfft.fftfreq(K, d=1.0 / K) / L for K, L in zip(self.sizes, self.lengths)]

    @cached_property
    def _xi2(self) -> np.ndarray:
        xi = np.meshgrid(*self.frequencies(), indexing="ij", sparse=True)
        return sum(x**2 for x in xi)

    @cached_property
    def _xi2_half(self) -> np.ndarray:
        # |xi|^2 on the half spectrum used by real transforms
        freqs = self.frequencies()
        K, L = self.sizes[-1], self.lengths[-1]
        freqs[-1] = sfft.rfftfreq(K, d=1.0 / K) / L
        xi = np.meshgrid(*freqs, indexing="ij", sparse=True)
        return sum(x**2 for x in xi)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Rectangle-rule integral over the trailing ``dim`` axes."""
        axes = tuple(range(-self.dim, 0))
        return np.sum(values, axis=axes) * self.cell_volume

    def minimum_image(self, delta: np.ndarray, axis: int) -> np.ndarray:
        L = self.lengths[axis]
        return delta - L * np.round(delta / L)

    # -- spectral helpers used by the solver (real transforms, batched) --

    def _rfft(self, values: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return sfft.rfftn(values, axes=axes, workers=fft_workers())

    def _irfft(self, coeffs: np.ndarray) -> np.ndarray:
        axes = tuple(range(-self.dim, 0))
        return sfft.irfftn(coeffs, s=self.sizes, axes=axes, workers=fft_workers())

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        """Spectral Laplacian of one field or a stack of fields."""
        return self._irfft(self._rfft(values) * (-4.0 * np.pi**2 * self._xi2_half))

    def gradient_energy(self, values: np.ndarray) -> np.ndarray:
        """``int |grad u|^2`` per field, via ``-int u Lap u`` (Parseval)."""
        c = self._rfft(values)
        w = np.full(c.shape[-1], 2.0)
        w[0] = 1.0
        if self.sizes[-1] % 2 == 0:
            w[-1] = 1.0
        axes = tuple(range(-self.dim, 0))
        s = np.sum(np.abs(c) ** 2 * (4.0 * np.pi**2 * self._xi2_half) * w, axis=axes)
        return s * self.cell_volume / self.size


def _check_shape(grid: Grid, values: np.ndarray) -> None:
    if values.shape[-grid.dim:] != grid.shape:
        raise ValueError(f"array of shape {values.shape} does not live on grid {grid.shape}")


def forward_transform(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Fourier coefficients ``c_k`` of a real field (``1/prod(K)`` normalisation)."""
    values = np.asarray(values, dtype=float)
    _check_shape(grid, values)
    axes = tuple(range(-grid.dim, 0))
    return sfft.fftn(values, axes=axes, norm="forward", workers=fft_workers())


def inverse_transform(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Real field synthesised from ``coeffs``.

    The imaginary part produced by rounding is dropped; one larger than
    ``1e-6`` relative to the real part raises ``ImaginaryResidueTooLarge``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    _check_shape(grid, coeffs)
    axes = tuple(range(-grid.dim, 0))
    z = sfft.ifftn(coeffs, axes=axes, norm="forward", workers=fft_workers())
    imag = float(np.max(np.abs(z.imag), initial=0.0))
    if imag > 0.0:
        residue = imag / max(float(np.max(np.abs(z.real), initial=0.0)), np.finfo(float).tiny)
        if residue > _IMAG_FAIL:
            raise ImaginaryResidueTooLarge(
                f"imaginary residue {residue:.3e} (relative) exceeds {_IMAG_FAIL:g}"
            )
        if residue > _IMAG_WARN:
            warnings.warn(f"discarding imaginary residue {residue:.3e} (relative)", stacklevel=2)
    return np.ascontiguousarray(z.real)


def laplacian_symbol(grid: Grid) -> np.ndarray:
    """Multiplier ``-4 pi^2 |xi_k|^2`` of the Laplacian, full DFT layout."""
    return -4.0 * np.pi**2 * np.broadcast_to(grid._xi2, grid.shape).copy()


def solve_semi_implicit(
    grid: Grid, rhs: np.ndarray, c: float, alpha: float, epsilon: float
) -> np.ndarray:
    """Solve ``(Id - c (Lap - alpha/eps^2 Id)) v = rhs`` on the periodic grid.

    ``rhs`` may be a single field or a stack ``(..., *grid.shape)``; ``c`` may
    then be an array broadcasting against the leading axes.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    rhs = np.asarray(rhs, dtype=float)
    _check_shape(grid, rhs)
    c = np.asarray(c, dtype=float)
    if np.any(c < 0) or alpha < 0:
        raise ValueError("c and alpha must be non-negative")
    lead = rhs.ndim - grid.dim
    c = c.reshape(c.shape + (1,) * grid.dim)
    if lead == 0 and c.ndim > grid.dim:
        raise ValueError("array-valued c needs a stack of fields")
    denom = 1.0 + c * (4.0 * np.pi**2 * grid._xi2_half + alpha / epsilon**2)
    return grid._irfft(grid._rfft(rhs) / denom)
