"""Double-well potential, optimal profile and surface-tension / mobility algebra.

The well is ``W(s) = s^2 (1 - s)^2 / 2``.  Its optimal profile solves
``q' = -sqrt(2 W(q))`` with ``q(0) = 1/2``, which gives the logistic curve
``q(s) = (1 - tanh(s/2)) / 2 = 1 / (1 + e^s)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

__all__ = [
    "well_value",
    "well_derivative",
    "well_second_derivative",
    "sqrt_two_well",
    "optimal_profile",
    "optimal_profile_derivative",
    "profile_constant",
    "TriangleViolation",
    "InconsistentMobilities",
    "NoWettingEquilibrium",
    "TensionSet",
    "MobilitySet",
    "additive_decompose",
    "harmonic_decompose",
    "young_angle",
    "herring_angles",
    "pair_index",
]


def well_value(s):
    s = np.asarray(s, dtype=float)
    return 0.5 * s**2 * (1.0 - s) ** 2


def well_derivative(s):
    s = np.asarray(s, dtype=float)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def well_second_derivative(s):
    s = np.asarray(s, dtype=float)
    return 1.0 - 6.0 * s + 6.0 * s**2


def sqrt_two_well(s):
    """``sqrt(2 W(s)) = |s (1 - s)|``; the absolute value keeps it defined off [0, 1]."""
    s = np.asarray(s, dtype=float)
    return np.abs(s * (1.0 - s))


def optimal_profile(s):
    """Transition profile ``q(s) = 1 / (1 + e^s)``: 1 at -inf, 1/2 at 0, 0 at +inf."""
    return expit(-np.asarray(s, dtype=float))


def optimal_profile_derivative(s):
    q = optimal_profile(s)
    return -q * (1.0 - q)


def profile_constant() -> float:
    """``c_W = int_0^1 sqrt(2 W(s)) ds = int_0^1 s (1 - s) ds``."""
    return 1.0 / 6.0


class TriangleViolation(ValueError):
    """Surface tensions break the triangle inequality (no Herring equilibrium)."""


class InconsistentMobilities(ValueError):
    """A pattern of zero pairwise mobilities no per-phase set can produce."""


class NoWettingEquilibrium(ValueError):
    """``|sigma_SV - sigma_LS| > sigma_VL``: total wetting or dewetting."""


def pair_index(n: int) -> list[tuple[int, int]]:
    """Upper-triangle pair order ``(0,1), (0,2), ..., (1,2), ...`` used by flat lists."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _pairwise_matrix(values, n_phases: int | None = None) -> np.ndarray:
    a = np.asarray(values, dtype=float)
    if a.ndim == 2:
        return a.copy()
    if a.ndim != 1:
        raise ValueError("pairwise values must be a matrix or a flat upper-triangle list")
    if n_phases is None:
        # len = n (n - 1) / 2
        n_phases = int(round((1 + np.sqrt(1 + 8 * a.size)) / 2))
    pairs = pair_index(n_phases)
    if len(pairs) != a.size:
        raise ValueError(f"{a.size} pairwise values do not match {n_phases} phases")
    m = np.zeros((n_phases, n_phases))
    for (i, j), v in zip(pairs, a):
        m[i, j] = m[j, i] = v
    return m


def additive_decompose(pairwise) -> np.ndarray:
    """Per-phase tensions of a three-phase set: ``sigma_i = (s_ij + s_ik - s_jk) / 2``.

    Accepts a 3x3 matrix or the flat list ``(s_12, s_13, s_23)``.
    """
    s = _pairwise_matrix(pairwise, 3)
    if s.shape != (3, 3):
        raise ValueError("additive_decompose needs exactly three phases")
    out = np.empty(3)
    for i in range(3):
        j, k = [x for x in range(3) if x != i]
        out[i] = 0.5 * (s[i, j] + s[i, k] - s[j, k])
    scale = max(float(np.max(np.abs(s))), 1.0)
    if np.any(out < -1e-12 * scale):
        raise TriangleViolation(f"negative per-phase tension {out}")
    return np.maximum(out, 0.0)


def harmonic_decompose(pairwise) -> np.ndarray | None:
    """Per-phase mobilities with ``1/m_ij = 1/m_i + 1/m_j`` for three phases.

    Returns ``None`` when the pairwise set is not harmonically additive.  Zero
    pairwise mobilities follow ``1/0 = inf``: if ``m_ij = m_ik = 0 < m_jk`` then
    ``m_i = 0`` and ``m_j = m_k = 2 m_jk`` (the split of ``m_jk`` is a convention).
    """
    m = _pairwise_matrix(pairwise, 3)
    if m.shape != (3, 3):
        raise ValueError("harmonic_decompose needs exactly three phases")
    if np.any(m < 0) or not np.allclose(m, m.T):
        raise ValueError("pairwise mobilities must be symmetric and non-negative")
    pairs = pair_index(3)
    zero = {p for p in pairs if m[p] == 0.0}
    if not zero:
        off = ~np.eye(3, dtype=bool)
        r = np.zeros_like(m)
        r[off] = 1.0 / m[off]
        inv = np.empty(3)
        for i in range(3):
            j, k = [x for x in range(3) if x != i]
            inv[i] = 0.5 * (r[i, j] + r[i, k] - r[j, k])
        scale = float(np.max(r[np.triu_indices(3, 1)]))
        if np.any(inv < -1e-12 * scale):
            return None
        inv = np.maximum(inv, 0.0)
        with np.errstate(divide="ignore"):
            return np.where(inv > 0, 1.0 / np.where(inv > 0, inv, 1.0), np.inf)
    if len(zero) == 3:
        return np.zeros(3)
    if len(zero) == 2:
        # the phase shared by both zero pairs is frozen
        (a, b), (c, d) = sorted(zero)
        frozen = ({a, b} & {c, d}).pop()
        j, k = [x for x in range(3) if x != frozen]
        out = np.empty(3)
        out[frozen] = 0.0
        out[j] = out[k] = 2.0 * m[j, k]
        return out
    (i, j), = zero
    raise InconsistentMobilities(
        f"m[{i},{j}] = 0 needs m_{i} = 0 or m_{j} = 0, which would zero another pair"
    )


@dataclass(frozen=True, eq=False)
class TensionSet:
    """Pairwise surface tensions with optional per-phase (additive) split.

    ``strict=False`` turns a triangle-inequality violation into a warning.
    """

    pairwise: np.ndarray
    per_phase_values: np.ndarray | None = None
    strict: bool = True

    def __post_init__(self):
        s = _pairwise_matrix(self.pairwise)
        n = s.shape[0]
        if s.shape != (n, n) or n < 2:
            raise ValueError("need a square matrix of at least two phases")
        if not np.array_equal(s, s.T) or np.any(np.diag(s) != 0):
            raise ValueError("tension matrix must be symmetric with zero diagonal")
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise ValueError("tensions must be finite and non-negative")
        bad = [
            (i, j, k)
            for i in range(n)
            for j in range(n)
            for k in range(n)
            if len({i, j, k}) == 3 and s[i, k] > s[i, j] + s[j, k] + 1e-12 * s.max()
        ]
        if bad:
            msg = f"triangle inequality fails for phases {bad[0]}"
            if self.strict:
                raise TriangleViolation(msg)
            warnings.warn(msg, stacklevel=2)
        object.__setattr__(self, "pairwise", s)
        if self.per_phase_values is not None:
            p = np.asarray(self.per_phase_values, dtype=float)
            if p.shape != (n,) or np.any(p < 0):
                raise ValueError("per-phase tensions must be n non-negative numbers")
            recon = p[:, None] + p[None, :]
            off = ~np.eye(n, dtype=bool)
            if not np.allclose(recon[off], s[off], rtol=1e-12, atol=1e-14):
                raise ValueError("per-phase tensions are not additive for this pairwise set")
            object.__setattr__(self, "per_phase_values", p)

    @classmethod
    def from_pairs(cls, values, **kw) -> TensionSet:
        return cls(_pairwise_matrix(values), **kw)

    @property
    def n_phases(self) -> int:
        return self.pairwise.shape[0]

    @property
    def per_phase(self) -> np.ndarray:
        """Per-phase ``sigma_i``; derived for two or three phases, required above."""
        if self.per_phase_values is not None:
            return self.per_phase_values
        if self.n_phases == 2:
            return np.full(2, 0.5 * self.pairwise[0, 1])
        if self.n_phases == 3:
            return additive_decompose(self.pairwise)
        raise ValueError("per-phase tensions must be given explicitly for more than 3 phases")


@dataclass(frozen=True, eq=False)
class MobilitySet:
    """Pairwise interface mobilities.

    ``kind`` is ``"additive"`` (harmonically additive, per-phase ``m_i`` known,
    zeros allowed) or ``"general"`` (all ``m_ij > 0``; the flow uses the metric
    ``A_ij = -1/m_ij`` restricted to the plane ``sum_k v_k = 0``).
    """

    pairwise: np.ndarray
    per_phase_values: np.ndarray | None = None
    kind: str = "additive"

    def __post_init__(self):
        m = _pairwise_matrix(self.pairwise)
        n = m.shape[0]
        if not np.array_equal(m, m.T) or np.any(np.diag(m) != 0):
            raise ValueError("mobility matrix must be symmetric with zero diagonal")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise ValueError("mobilities must be finite and non-negative")
        object.__setattr__(self, "pairwise", m)
        if self.kind not in ("additive", "general"):
            raise ValueError(f"unknown mobility kind {self.kind!r}")
        if self.kind == "general":
            off = ~np.eye(n, dtype=bool)
            if np.any(m[off] <= 0):
                raise ValueError("general mobilities must all be positive")
            w = np.linalg.eigvalsh(self._projected_metric())
            if w.min() < -1e-10 * max(1.0, abs(w).max()):
                raise ValueError("metric is not positive semi-definite on sum-zero vectors")
            return
        p = self.per_phase_values
        if p is None:
            if n == 2:
                p = np.full(2, 2.0 * m[0, 1])
            elif n == 3:
                p = harmonic_decompose(m)
                if p is None:
                    raise ValueError("mobilities are not harmonically additive; use kind='general'")
            else:
                raise ValueError("per-phase mobilities must be given for more than 3 phases")
        p = np.asarray(p, dtype=float)
        if p.shape != (n,) or np.any(p < 0):
            raise ValueError("per-phase mobilities must be n non-negative numbers")
        if not np.all(np.isfinite(p)):
            raise ValueError("per-phase mobilities must be finite")
        for i, j in pair_index(n):
            if p[i] == 0 or p[j] == 0:
                expect = 0.0
            else:
                expect = p[i] * p[j] / (p[i] + p[j])
            if not np.isclose(m[i, j], expect, rtol=1e-10, atol=0.0):
                raise ValueError(f"pair ({i},{j}) is not harmonically additive")
        object.__setattr__(self, "per_phase_values", p)

    @classmethod
    def from_pairs(cls, values, **kw) -> MobilitySet:
        return cls(_pairwise_matrix(values), **kw)

    @classmethod
    def from_per_phase(cls, per_phase) -> MobilitySet:
        p = np.asarray(per_phase, dtype=float)
        n = p.size
        m = np.zeros((n, n))
        for i, j in pair_index(n):
            if p[i] > 0 and p[j] > 0:
                m[i, j] = m[j, i] = p[i] * p[j] / (p[i] + p[j])
        return cls(m, per_phase_values=p)

    @property
    def n_phases(self) -> int:
        return self.pairwise.shape[0]

    @property
    def per_phase(self) -> np.ndarray:
        if self.kind != "additive":
            raise ValueError("general mobilities have no per-phase decomposition")
        return self.per_phase_values

    def metric(self) -> np.ndarray:
        """``A`` with ``A_ij = -1/m_ij`` off the diagonal and ``0`` on it."""
        m = self.pairwise
        off = ~np.eye(self.n_phases, dtype=bool)
        a = np.zeros_like(m)
        with np.errstate(divide="ignore"):
            a[off] = -1.0 / m[off]
        return a

    def _projected_metric(self) -> np.ndarray:
        n = self.n_phases
        proj = np.eye(n) - 1.0 / n
        return proj @ self.metric() @ proj

    def operator(self) -> np.ndarray:
        """Mobility operator: pseudo-inverse of the metric on sum-zero vectors."""
        return np.linalg.pinv(self._projected_metric(), rcond=1e-12, hermitian=True)

    def as_general(self) -> MobilitySet:
        return MobilitySet(self.pairwise, kind="general")


def young_angle(sigma_sv: float, sigma_ls: float, sigma_vl: float) -> float:
    """Equilibrium contact angle (radians, through the liquid) from Young's law."""
    c = (sigma_sv - sigma_ls) / sigma_vl
    if abs(c) > 1.0 + 1e-12:
        raise NoWettingEquilibrium(f"cos(theta) = {c:.6g} lies outside [-1, 1]")
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def herring_angles(s12: float, s13: float, s23: float) -> np.ndarray:
    """Sector angles ``(theta_1, theta_2, theta_3)`` at a triple junction in equilibrium.

    ``theta_k`` is the opening of phase ``k``; it is bounded by the two
    interfaces of ``k`` and faces the remaining one.
    """
    s = {(0, 1): s12, (0, 2): s13, (1, 2): s23}
    out = np.empty(3)
    for k in range(3):
        i, j = [x for x in range(3) if x != k]
        a, b = s[tuple(sorted((i, k)))], s[tuple(sorted((j, k)))]
        c = (s[(i, j)] ** 2 - a**2 - b**2) / (2.0 * a * b)
        if abs(c) > 1.0 + 1e-12:
            raise TriangleViolation("tensions admit no triple-junction equilibrium")
        out[k] = np.arccos(np.clip(c, -1.0, 1.0))
    return out
