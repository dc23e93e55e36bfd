"""Time stepping for the mobility-weighted multiphase Allen-Cahn system.

One step is a stabilised semi-implicit Fourier solve of the unconstrained
gradient flow of each phase (``step_diffusion``), followed by a pointwise
projection onto ``sum_k u_k = 1`` (``project_partition``), optionally
coupled with per-phase volume targets (``project_partition_volume``).
Corrections are weighted by ``m_k sqrt(2 W(u_k))`` so they live inside the
diffuse interfaces and vanish for frozen phases (``m_k = 0``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid, solve_semi_implicit
from .phases import MobilitySet, TensionSet, sqrt_two_well, well_derivative, well_value

__all__ = [
    "PhaseState",
    "SolverParams",
    "VolumeSchedule",
    "StepInfo",
    "Diagnostics",
    "RunResult",
    "AllPhasesFrozen",
    "SingularConstraintSystem",
    "InconsistentTargets",
    "TargetUnderflow",
    "NonFiniteState",
    "energy",
    "step_diffusion",
    "project_partition",
    "project_partition_volume",
    "advance_targets",
    "run",
]


class AllPhasesFrozen(RuntimeError):
    """Every mobility is zero but the partition constraint is violated."""


class SingularConstraintSystem(RuntimeError):
    """The volume-constraint multipliers cannot be determined."""


class InconsistentTargets(ValueError):
    """Volume targets do not add up to the box volume."""


class TargetUnderflow(RuntimeError):
    """The consumed (vapour) phase would reach negative volume."""


class NonFiniteState(RuntimeError):
    def __init__(self, step: int, message: str = "non-finite values in phase fields"):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class PhaseState:
    """Phase fields ``u`` of shape ``(N, *grid.shape)`` at time ``time``."""

    grid: Grid
    u: np.ndarray
    epsilon: float
    time: float = 0.0

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        if self.u.ndim != self.grid.dim + 1 or self.u.shape[1:] != self.grid.shape:
            raise ValueError(f"fields of shape {self.u.shape} do not match grid {self.grid.shape}")
        if self.u.shape[0] < 2:
            raise ValueError("need at least two phases")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.time < 0:
            raise ValueError("time must be non-negative")

    @property
    def n_phases(self) -> int:
        return self.u.shape[0]

    def volumes(self) -> np.ndarray:
        return self.grid.integrate(self.u)

    def partition_residual(self) -> float:
        return float(np.max(np.abs(self.u.sum(axis=0) - 1.0)))

    def copy(self) -> PhaseState:
        return replace(self, u=self.u.copy())


@dataclass(frozen=True)
class SolverParams:
    """``dt``: time step; ``alpha``: stabilisation (> 2 for unconditional energy
    decrease); ``sum_floor``: guard on the projection denominator;
    ``linear_tol``: tolerance of the volume-constraint solve (relative to |Q|).
    """

    dt: float
    alpha: float = 2.5
    sum_floor: float = 1e-12
    linear_tol: float = 1e-10

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.alpha >= 0:
            raise ValueError("alpha must be non-negative")
        if not self.sum_floor > 0:
            raise ValueError("sum_floor must be positive")
        if not self.linear_tol > 0:
            raise ValueError("linear_tol must be positive")


@dataclass(frozen=True, eq=False)
class VolumeSchedule:
    """Per-phase volume handling.

    ``modes[k]`` is ``"free"``, ``"constant"`` or ``"vls"`` (the solid grows
    and the vapour shrinks at ``growth_rate / eps * int u_L u_S``).
    ``potentials[k]`` selects the correction shape ``G_k``: ``"well"`` for
    ``sqrt(2 W(u_k))`` or a phase index ``j`` for ``u_k u_j``.
    """

    modes: tuple[str, ...]
    targets: np.ndarray
    potentials: tuple = ()
    growth_rate: float = 0.0
    solid: int | None = None
    liquid: int | None = None
    vapor: int | None = None

    def __post_init__(self):
        n = len(self.modes)
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "targets", np.asarray(self.targets, dtype=float).copy())
        if self.targets.shape != (n,):
            raise ValueError("one target per phase")
        if any(m not in ("free", "constant", "vls") for m in self.modes):
            raise ValueError(f"unknown volume mode in {self.modes}")
        pots = tuple(self.potentials) or tuple("well" for _ in range(n))
        if len(pots) != n:
            raise ValueError("one potential selector per phase")
        object.__setattr__(self, "potentials", pots)
        vls = [k for k, m in enumerate(self.modes) if m == "vls"]
        if vls:
            if sorted(vls) != sorted([self.solid, self.vapor]) or self.liquid is None:
                raise ValueError("'vls' mode needs exactly the solid and vapour phases")
        if self.growth_rate < 0:
            raise ValueError("growth rate must be non-negative")

    @classmethod
    def free(cls, n_phases: int) -> VolumeSchedule:
        return cls(("free",) * n_phases, np.zeros(n_phases))

    @classmethod
    def constant(cls, state: PhaseState, phases) -> VolumeSchedule:
        """Hold the current volumes of ``phases`` fixed."""
        phases = set(phases)
        modes = tuple("constant" if k in phases else "free" for k in range(state.n_phases))
        return cls(modes, state.volumes())

    @classmethod
    def vls(
        cls, state: PhaseState, solid: int, liquid: int, vapor: int, growth_rate: float = 0.0
    ) -> VolumeSchedule:
        """Liquid volume fixed; solid fed from vapour through the liquid-solid contact."""
        n = state.n_phases
        modes = ["free"] * n
        pots: list = ["well"] * n
        modes[liquid] = "constant"
        modes[solid] = modes[vapor] = "vls"
        pots[solid] = liquid
        pots[vapor] = liquid
        return cls(
            tuple(modes), state.volumes(), tuple(pots), growth_rate, solid, liquid, vapor
        )

    @property
    def constrained(self) -> list[int]:
        return [k for k, m in enumerate(self.modes) if m != "free"]

    def with_rate(self, growth_rate: float) -> VolumeSchedule:
        return replace(self, growth_rate=growth_rate)


@dataclass
class StepInfo:
    step: int
    time: float
    lambda_norm: float = 0.0
    partition_residual: float = 0.0
    fallback_cells: int = 0
    volume_error: float = 0.0
    multipliers: np.ndarray | None = None
    previous: PhaseState | None = None
    half: PhaseState | None = None
    schedule: VolumeSchedule | None = None


class Diagnostics:
    """Time series rows ``t, energy, vol_1..N, lambda_norm, partition_residual, fallback_cells``."""

    def __init__(self, n_phases: int, extra: tuple[str, ...] = ()):
        self.columns = (
            ["t", "energy"]
            + [f"vol_{k + 1}" for k in range(n_phases)]
            + ["lambda_norm", "partition_residual", "fallback_cells"]
            + list(extra)
        )
        self.rows: list[list[float]] = []

    def append(self, row) -> None:
        row = [float(x) for x in row]
        if len(row) != len(self.columns):
            raise ValueError("row length does not match columns")
        if self.rows and row[0] < self.rows[-1][0]:
            raise ValueError("diagnostic times must be non-decreasing")
        if not all(math.isfinite(x) for x in row):
            raise ValueError("non-finite diagnostic entry")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def as_array(self) -> np.ndarray:
        return np.array(self.rows, dtype=float).reshape(-1, len(self.columns))

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class RunResult:
    state: PhaseState
    diagnostics: Diagnostics
    schedule: VolumeSchedule | None = None
    steps: int = 0
    infos: list[StepInfo] = field(default_factory=list)


# -- helpers ---------------------------------------------------------------


def _per_phase_sigma(tensions, n: int) -> np.ndarray:
    sigma = tensions.per_phase if isinstance(tensions, TensionSet) else np.asarray(tensions, float)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (n,) or np.any(sigma < 0):
        raise ValueError("need one non-negative tension per phase")
    return sigma


@dataclass(frozen=True)
class _Mobility:
    weights: np.ndarray  # projection weights (m_k, or the operator diagonal)
    operator: np.ndarray | None = None  # full mobility operator for general sets


def _resolve_mobility(mobility, n: int) -> _Mobility:
    if isinstance(mobility, _Mobility):
        return mobility
    if isinstance(mobility, MobilitySet):
        if mobility.n_phases != n:
            raise ValueError("mobility set has the wrong number of phases")
        if mobility.kind == "general":
            op = mobility.operator()
            return _Mobility(np.clip(np.diag(op).copy(), 0.0, None), op)
        mobility = mobility.per_phase
    m = np.asarray(mobility, dtype=float)
    if m.shape != (n,) or np.any(m < 0) or not np.all(np.isfinite(m)):
        raise ValueError("need one finite non-negative mobility per phase")
    return _Mobility(m)


def _bcast(v: np.ndarray, dim: int) -> np.ndarray:
    return v.reshape(v.shape + (1,) * dim)


# -- energy ----------------------------------------------------------------


def energy(state: PhaseState, tensions) -> float:
    """``1/2 sum_i sigma_i int (eps |grad u_i|^2 / 2 + W(u_i) / eps)``."""
    sigma = _per_phase_sigma(tensions, state.n_phases)
    g = state.grid
    eps = state.epsilon
    grad = g.gradient_energy(state.u)
    bulk = g.integrate(well_value(state.u))
    return float(0.5 * np.sum(sigma * (0.5 * eps * grad + bulk / eps)))


# -- step 1 ----------------------------------------------------------------


def step_diffusion(state: PhaseState, tensions, mobility, params: SolverParams) -> PhaseState:
    """Advance every phase by one stabilised semi-implicit step, without constraints.

    Solves ``(Id - dt m_k s_k (Lap - alpha/eps^2)) v = u - dt m_k s_k/eps^2 (W'(u) - alpha u)``.
    Phases with ``m_k s_k = 0`` are returned unchanged.
    """
    n = state.n_phases
    sigma = _per_phase_sigma(tensions, n)
    mob = _resolve_mobility(mobility, n)
    eps2 = state.epsilon**2
    dt, alpha = params.dt, params.alpha
    u = state.u
    out = u.copy()
    if mob.operator is not None:
        out = _step_general(state, sigma, mob.operator, params)
        return replace(state, u=out)
    c = dt * mob.weights * sigma
    active = np.flatnonzero(c > 0)
    if active.size:
        ua = u[active]
        ca = _bcast(c[active], state.grid.dim)
        rhs = ua - ca / eps2 * (well_derivative(ua) - alpha * ua)
        out[active] = solve_semi_implicit(state.grid, rhs, c[active], alpha, state.epsilon)
    return replace(state, u=out)


def _step_general(state: PhaseState, sigma, op, params: SolverParams) -> np.ndarray:
    # coupled solve (I + s B S) v = r per Fourier mode, diagonalised through
    # the symmetric C = S^1/2 B S^1/2 = Q diag(lam) Q^T
    if np.any(sigma <= 0):
        raise ValueError("general mobilities need strictly positive per-phase tensions")
    dt, alpha, eps2 = params.dt, params.alpha, state.epsilon**2
    u = state.u
    bs = op * sigma[None, :]
    explicit = well_derivative(u) - alpha * u
    rhs = u - dt / eps2 * np.tensordot(bs, explicit, axes=(1, 0))
    root = np.sqrt(sigma)
    lam, q = np.linalg.eigh(root[:, None] * op * root[None, :])
    lam = np.clip(lam, 0.0, None)
    mix = q.T * root[None, :]  # Q^T S^1/2
    unmix = q / root[:, None]  # S^-1/2 Q
    w = np.tensordot(mix, rhs, axes=(1, 0))
    w = solve_semi_implicit(state.grid, w, dt * lam, alpha, state.epsilon)
    return np.tensordot(unmix, w, axes=(1, 0))


# -- step 2 ----------------------------------------------------------------


def _fallback(u_new, residual, bad, unfrozen) -> None:
    if not np.any(bad) or unfrozen.size == 0:
        return
    share = np.where(bad, residual, 0.0) / unfrozen.size
    for k in unfrozen:
        u_new[k] += share


def project_partition(
    state: PhaseState, mobility, params: SolverParams, *, return_info: bool = False
):
    """Restore ``sum_k u_k = 1`` through ``u_k += m_k lambda sqrt(2 W(u_k))``.

    ``lambda = (1 - sum u) / sum_k m_k sqrt(2 W(u_k))``.  Where the denominator
    falls below ``params.sum_floor`` the residual is split evenly over the
    phases with ``m_k > 0``.
    """
    n = state.n_phases
    mob = _resolve_mobility(mobility, n)
    g = state.grid
    u = state.u
    w = mob.weights
    unfrozen = np.flatnonzero(w > 0)
    residual = 1.0 - u.sum(axis=0)
    info = StepInfo(step=-1, time=state.time)
    if unfrozen.size == 0:
        r = float(np.max(np.abs(residual)))
        if r > params.linear_tol:
            raise AllPhasesFrozen(f"partition residual {r:.3e} with every mobility zero")
        info.partition_residual = r
        return (replace(state, u=u.copy()), info) if return_info else replace(state, u=u.copy())
    weight = _bcast(w[unfrozen], g.dim) * sqrt_two_well(u[unfrozen])
    denom = weight.sum(axis=0)
    ok = denom >= params.sum_floor
    lam = np.divide(residual, denom, out=np.zeros_like(residual), where=ok)
    u_new = u.copy()
    u_new[unfrozen] += lam * weight
    bad = ~ok
    _fallback(u_new, residual, bad, unfrozen)
    info.lambda_norm = float(np.sqrt(g.integrate(lam**2)))
    info.partition_residual = float(np.max(np.abs(u_new.sum(axis=0) - 1.0)))
    info.fallback_cells = int(np.count_nonzero(bad & (np.abs(residual) > params.sum_floor)))
    out = replace(state, u=u_new)
    return (out, info) if return_info else out


def _potential(u: np.ndarray, k: int, selector) -> np.ndarray:
    if selector == "well":
        return sqrt_two_well(u[k])
    return u[k] * u[int(selector)]


def project_partition_volume(
    state: PhaseState,
    mobility,
    schedule: VolumeSchedule,
    params: SolverParams,
    *,
    return_info: bool = False,
):
    """Project onto the partition constraint and the volume targets of ``schedule``.

    ``u_k += m_k lambda sqrt(2 W(u_k)) + mu_k m_k G_k(u)`` with a multiplier
    field ``lambda`` and scalars ``mu_k``.  The weighted integrals
    ``lbar_i = int m_i sqrt(2 W(u_i)) lambda`` solve ``(I - A) lbar = b``; when
    that system is singular (every mobile phase constrained) the gauge
    ``sum_i lbar_i = 0`` is appended and the least-squares solution taken.
    Frozen phases cannot be corrected and are left out of the constraint set.
    """
    n = state.n_phases
    mob = _resolve_mobility(mobility, n)
    w = mob.weights
    unfrozen = np.flatnonzero(w > 0)
    cons = [k for k in schedule.constrained if w[k] > 0]
    if not cons:
        return project_partition(state, mob, params, return_info=return_info)
    g = state.grid
    qvol = g.volume
    u = state.u
    vols = g.integrate(u)
    closed = set(unfrozen.tolist()) <= set(cons)
    if closed:
        frozen_vol = float(sum(vols[k] for k in range(n) if w[k] == 0))
        total = float(np.sum(schedule.targets[cons])) + frozen_vol
        if abs(total - qvol) > 1e-8 * qvol:
            raise InconsistentTargets(f"targets add up to {total!r}, box volume is {qvol!r}")

    weight = _bcast(w, g.dim) * sqrt_two_well(u)
    denom = weight[unfrozen].sum(axis=0)
    ok = denom >= params.sum_floor
    inv = np.divide(1.0, denom, out=np.zeros_like(denom), where=ok)
    residual = 1.0 - u.sum(axis=0)
    pot = np.stack([w[k] * _potential(u, k, schedule.potentials[k]) for k in cons])
    pint = g.integrate(pot)
    tiny = 1e-14 * qvol
    if np.any(np.abs(pint) <= tiny):
        k = cons[int(np.argmin(np.abs(pint)))]
        raise SingularConstraintSystem(f"volume correction for phase {k} has vanishing support")
    dv = schedule.targets[cons] - vols[cons]
    base = residual - np.tensordot(dv / pint, pot, axes=(0, 0))
    wc = weight[cons] * inv
    b = g.integrate(wc * base)
    amat = g.integrate(wc[:, None] * (pot / _bcast(pint, g.dim))[None, :])
    lhs = np.eye(len(cons)) - amat
    if closed:
        lhs = np.vstack([lhs, np.ones(len(cons))])
        rhs = np.append(b, 0.0)
    else:
        rhs = b
    lbar, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    res = float(np.max(np.abs(lhs @ lbar - rhs)))
    if not np.all(np.isfinite(lbar)) or res > params.linear_tol * qvol:
        raise SingularConstraintSystem(f"constraint system residual {res:.3e}")
    mu = (dv - lbar) / pint
    corr = np.tensordot(mu, pot, axes=(0, 0))
    rest = residual - corr
    lam = rest * inv
    u_new = u.copy()
    u_new[unfrozen] += lam * weight[unfrozen]
    for idx, k in enumerate(cons):
        u_new[k] += mu[idx] * pot[idx]
    bad = ~ok
    _fallback(u_new, rest, bad, unfrozen)
    info = StepInfo(step=-1, time=state.time)
    info.lambda_norm = float(np.sqrt(g.integrate(lam**2)))
    info.partition_residual = float(np.max(np.abs(u_new.sum(axis=0) - 1.0)))
    info.fallback_cells = int(np.count_nonzero(bad & (np.abs(rest) > params.sum_floor)))
    new_vols = g.integrate(u_new)
    info.volume_error = float(np.max(np.abs(new_vols[cons] - schedule.targets[cons])))
    full = np.zeros(n)
    full[cons] = mu
    info.multipliers = full
    out = replace(state, u=u_new)
    return (out, info) if return_info else out


def advance_targets(schedule: VolumeSchedule, state: PhaseState, dt: float) -> VolumeSchedule:
    """Move ``dt (c_S / eps) int u_L u_S`` of volume from the vapour to the solid target."""
    if schedule.solid is None or schedule.growth_rate == 0.0:
        return schedule
    s, l, v = schedule.solid, schedule.liquid, schedule.vapor
    contact = float(state.grid.integrate(state.u[l] * state.u[s]))
    inc = dt * schedule.growth_rate / state.epsilon * contact
    targets = schedule.targets.copy()
    targets[s] += inc
    targets[v] -= inc
    if targets[v] < 0:
        raise TargetUnderflow(f"vapour target {targets[v]:.6g} < 0")
    return replace(schedule, targets=targets)


# -- driver ----------------------------------------------------------------


def _row(state: PhaseState, sigma, info: StepInfo) -> list[float]:
    return (
        [state.time, energy(state, sigma)]
        + list(state.volumes())
        + [info.lambda_norm, info.partition_residual, info.fallback_cells]
    )


def run(
    state: PhaseState,
    tensions,
    mobility,
    params: SolverParams,
    t_end: float,
    schedule: VolumeSchedule | None = None,
    callbacks=(),
    every: int = 10,
    keep_infos: bool = False,
) -> RunResult:
    """Alternate ``step_diffusion`` and the projection until ``t_end``.

    ``callbacks`` are called after every step as ``cb(step, state, info)``;
    ``info.previous`` and ``info.half`` hold the states before and after the
    diffusion step.  Diagnostics rows are recorded every ``every`` steps and at
    the end.
    """
    n = state.n_phases
    sigma = _per_phase_sigma(tensions, n)
    mob = _resolve_mobility(mobility, n)
    diags = Diagnostics(n)
    t0 = state.time
    n_steps = max(0, math.ceil((t_end - t0) / params.dt - 1e-9))
    result = RunResult(state, diags, schedule)
    diags.append(_row(state, sigma, StepInfo(0, t0, partition_residual=state.partition_residual())))
    warned = False
    for step in range(n_steps):
        if schedule is not None:
            schedule = advance_targets(schedule, state, params.dt)
        half = step_diffusion(state, sigma, mob, params)
        if schedule is not None and schedule.constrained:
            new, info = project_partition_volume(half, mob, schedule, params, return_info=True)
        else:
            new, info = project_partition(half, mob, params, return_info=True)
        new.time = t0 + (step + 1) * params.dt
        if not np.all(np.isfinite(new.u)):
            raise NonFiniteState(step)
        if not warned and (new.u.min() < -0.1 or new.u.max() > 1.1):
            warnings.warn(f"phase values left [-0.1, 1.1] at step {step}", stacklevel=2)
            warned = True
        info.step, info.time = step, new.time
        info.previous, info.half, info.schedule = state, half, schedule
        for cb in callbacks:
            cb(step, new, info)
        if (step + 1) % every == 0 or step == n_steps - 1:
            diags.append(_row(new, sigma, info))
        info.previous = info.half = None
        if keep_infos:
            result.infos.append(info)
        state = new
    result.state, result.schedule, result.steps = state, schedule, n_steps
    return result
