"""Quasi-static sharp-interface shape of a VLS nanowire.

A liquid droplet of fixed volume sits on a wire of half-width ``R``.  While the
solid-vapour tangent rotates by ``alpha`` the triple-point angles become
``theta_V - alpha`` and ``theta_S + alpha`` and the droplet volume, the sum of
two spherical caps ``(pi R^3 / 3) (f(theta_V) + f(theta_S))``, is conserved.
That fixes ``R(alpha)``; the wire side wall then follows
``dh/dalpha = -tan(alpha) dR/dalpha``.

Two cap factors are available: ``"standard"``, ``(1 + cos)(2 - cos) / sin^3``,
and ``"geometric"``, ``(1 - cos)^2 (2 + cos) / sin^3``, which is the true
volume of a cap of unit base radius.  They coincide at ``theta = pi/2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "Unrealizable",
    "CapSingularity",
    "DomainExceeded",
    "OutOfRange",
    "NonMonotone",
    "WireParams",
    "WireProfile",
    "CAP_MODELS",
    "contact_angles",
    "cap_factor",
    "cap_factor_derivative",
    "alpha_max",
    "droplet_radius",
    "droplet_radius_derivative",
    "invert_radius",
    "integrate_profile",
    "diameter_reduction",
]

CAP_MODELS = ("standard", "geometric")
_SINGULAR = 1e-9


class Unrealizable(ValueError):
    """The tension ratios admit no equilibrium triple point."""


class CapSingularity(ValueError):
    """Cap factor evaluated too close to ``theta = 0`` or ``pi``."""


class DomainExceeded(ValueError):
    """Rotation angle outside ``[0, alpha_max)``."""


class OutOfRange(ValueError):
    """Radius outside the range attained by ``droplet_radius``."""


class NonMonotone(RuntimeError):
    """Bracketing failed while inverting the radius."""


def contact_angles(a: float, b: float) -> tuple[float, float]:
    """``(theta_V, theta_S)`` for ``a = s_VL / s_SV`` and ``b = s_LS / s_SV``."""
    if not (a > 0 and b > 0):
        raise Unrealizable("tension ratios must be positive")
    cv = (b * b - a * a - 1.0) / (2.0 * a)
    cs = (a * a - b * b - 1.0) / (2.0 * b)
    if abs(cv) > 1.0 or abs(cs) > 1.0:
        raise Unrealizable(f"cos(theta_V) = {cv:.6g}, cos(theta_S) = {cs:.6g}")
    return math.acos(cv), math.acos(cs)


def _check_model(model: str) -> None:
    if model not in CAP_MODELS:
        raise ValueError(f"cap model must be one of {CAP_MODELS}, got {model!r}")


def _check_theta(theta: float) -> tuple[float, float]:
    if not 0.0 < theta < 2.0 * math.pi:
        raise CapSingularity(f"theta = {theta!r} outside (0, 2 pi)")
    if abs(theta - math.pi) < _SINGULAR or theta < _SINGULAR or 2 * math.pi - theta < _SINGULAR:
        raise CapSingularity(f"cap factor singular at theta = {theta!r}")
    return math.cos(theta), math.sin(theta)


def cap_factor(theta: float, model: str = "standard") -> float:
    _check_model(model)
    c, _ = _check_theta(theta)
    # half-angle forms avoid the cancellation in 1 +- cos(theta) near 0 and pi
    sh, ch = math.sin(theta / 2), math.cos(theta / 2)
    if model == "standard":
        return (2.0 - c) / (4.0 * sh**3 * ch)
    return sh * (2.0 + c) / (2.0 * ch**3)


def cap_factor_derivative(theta: float, model: str = "standard") -> float:
    _check_model(model)
    c, s = _check_theta(theta)
    sh, ch = math.sin(theta / 2), math.cos(theta / 2)
    if model == "standard":
        g = 2.0 * ch**2 * (2.0 - c)
        return (2.0 * c - 1.0) / s**2 - 3.0 * g * c / s**4
    g = 4.0 * sh**4 * (2.0 + c)
    return 3.0 - 3.0 * g * c / s**4


@dataclass(frozen=True)
class WireParams:
    a: float
    b: float
    R0: float = 1.0
    cap_model: str = "standard"

    def __post_init__(self):
        if not self.R0 > 0:
            raise ValueError("R0 must be positive")
        _check_model(self.cap_model)
        contact_angles(self.a, self.b)

    @classmethod
    def from_tensions(cls, sigma_vl, sigma_sv, sigma_ls, R0=1.0, cap_model="standard"):
        return cls(sigma_vl / sigma_sv, sigma_ls / sigma_sv, R0, cap_model)

    @property
    def angles(self) -> tuple[float, float]:
        return contact_angles(self.a, self.b)


def alpha_max(w: WireParams) -> float:
    tv, ts = w.angles
    return min(tv, math.pi - ts, math.pi / 2)


def _fsum(alpha: float, w: WireParams) -> float:
    tv, ts = w.angles
    return cap_factor(tv - alpha, w.cap_model) + cap_factor(ts + alpha, w.cap_model)


def _fsum_derivative(alpha: float, w: WireParams) -> float:
    tv, ts = w.angles
    m = w.cap_model
    return -cap_factor_derivative(tv - alpha, m) + cap_factor_derivative(ts + alpha, m)


def _check_alpha(alpha: float, w: WireParams) -> None:
    amax = alpha_max(w)
    if not 0.0 <= alpha < amax:
        raise DomainExceeded(f"alpha = {alpha!r} outside [0, {amax!r})")


def droplet_radius(alpha: float, w: WireParams, reciprocal: bool = False) -> float:
    """Droplet radius after a rotation ``alpha``.

    By default ``R^3 (f(theta_V - alpha) + f(theta_S + alpha))`` is held at its
    ``alpha = 0`` value.  ``reciprocal=True`` returns the reciprocal ratio instead
    (the form that does not conserve volume) and skips the check.
    """
    _check_alpha(alpha, w)
    s0, s = _fsum(0.0, w), _fsum(alpha, w)
    if not (s0 > 0 and s > 0):
        raise CapSingularity(f"non-positive cap volume at alpha = {alpha!r}")
    if reciprocal:
        return w.R0 * (s / s0) ** (1.0 / 3.0)
    r = w.R0 * (s0 / s) ** (1.0 / 3.0)
    lhs, rhs = r**3 * s, w.R0**3 * s0
    if abs(lhs - rhs) > 1e-10 * abs(rhs):
        raise AssertionError(f"volume drift {abs(lhs - rhs) / rhs:.3e} at alpha = {alpha!r}")
    return r


def droplet_radius_derivative(alpha: float, w: WireParams, reciprocal: bool = False) -> float:
    r = droplet_radius(alpha, w, reciprocal)
    ratio = _fsum_derivative(alpha, w) / _fsum(alpha, w)
    return (r / 3.0) * ratio if reciprocal else -(r / 3.0) * ratio


def invert_radius(r: float, w: WireParams, tol: float = 1e-10) -> float:
    """``alpha`` with ``droplet_radius(alpha) = r``, by safeguarded Newton iteration."""
    amax = alpha_max(w)
    lo, hi = 0.0, amax - 1e-8
    f_lo = droplet_radius(lo, w) - r
    f_hi = droplet_radius(hi, w) - r
    if abs(f_lo) <= tol * w.R0:
        return 0.0
    if r > w.R0 or f_hi >= 0.0:
        raise OutOfRange(f"r = {r!r} outside ({f_hi + r!r}, {w.R0!r}]")
    if f_lo < 0.0:
        raise NonMonotone("radius at alpha = 0 is below the target")
    x = 0.5 * (lo + hi)
    for _ in range(200):
        fx = droplet_radius(x, w) - r
        if abs(fx) <= tol * w.R0:
            return x
        if fx > 0:
            lo = x
        else:
            hi = x
        d = droplet_radius_derivative(x, w)
        step = x - fx / d if d != 0 else None
        x = step if step is not None and lo < step < hi else 0.5 * (lo + hi)
        if hi - lo < 1e-15 * max(1.0, hi):
            break
    fx = droplet_radius(x, w) - r
    if abs(fx) > tol * w.R0:
        raise NonMonotone(f"no convergence, residual {fx:.3e}")
    return x


@dataclass(frozen=True)
class WireProfile:
    """Side-wall samples ``(r, h, alpha)``, one row each, ordered by increasing ``alpha``."""

    samples: np.ndarray
    alpha_max: float
    alpha_stop: float
    reached_stationary: bool

    @property
    def r(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def h(self) -> np.ndarray:
        return self.samples[:, 1]

    @property
    def alpha(self) -> np.ndarray:
        return self.samples[:, 2]


def _alpha_stop(w: WireParams) -> tuple[float, bool]:
    amax = alpha_max(w)
    stop = min(amax - 1e-3, math.pi / 2 - 1e-3)
    return max(stop, 0.0), amax >= math.pi / 2


def integrate_profile(w: WireParams, n_samples: int = 200, rtol: float = 1e-10) -> WireProfile:
    """Integrate ``dh/dalpha = -tan(alpha) dR/dalpha`` from ``alpha = 0``.

    The parameterisation by ``alpha`` stays regular where the wall turns
    vertical.  Integration stops ``1e-3`` short of ``alpha_max`` or ``pi/2``.
    """
    if n_samples < 2:
        raise ValueError("need at least two samples")
    stop, reached = _alpha_stop(w)
    alphas = np.linspace(0.0, stop, n_samples)
    if stop > 0.0:
        sol = solve_ivp(
            lambda a, y: [-math.tan(a) * droplet_radius_derivative(a, w)],
            (0.0, stop),
            [0.0],
            method="RK45",
            t_eval=alphas,
            rtol=rtol,
            atol=1e-14 * w.R0,
        )
        if not sol.success:
            raise DomainExceeded(f"profile integration failed near alpha = {sol.t[-1]!r}: {sol.message}")
        h = sol.y[0]
    else:
        h = np.zeros_like(alphas)
    r = np.array([droplet_radius(a, w) for a in alphas])
    return WireProfile(np.column_stack([r, h, alphas]), alpha_max(w), stop, reached)


def diameter_reduction(w: WireParams) -> tuple[float, bool]:
    """``1 - R(alpha_stop) / R0`` and whether the stationary angle ``pi/2`` was reached."""
    stop, reached = _alpha_stop(w)
    if stop <= 0.0:
        return 0.0, False
    return 1.0 - droplet_radius(stop, w) / w.R0, reached
