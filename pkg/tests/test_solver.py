import numpy as np
import pytest

from mobiflow.grid import Grid
from mobiflow.phases import MobilitySet, TensionSet, optimal_profile, profile_constant, sqrt_two_well
from mobiflow.scenarios import Circle, Rest, Slab, extract_contour, init_from_shapes
from mobiflow.solver import (
    AllPhasesFrozen,
    Diagnostics,
    InconsistentTargets,
    NonFiniteState,
    PhaseState,
    SingularConstraintSystem,
    SolverParams,
    TargetUnderflow,
    VolumeSchedule,
    advance_targets,
    energy,
    project_partition,
    project_partition_volume,
    run,
    step_diffusion,
)


def point_state(values):
    g = Grid((4,))
    u = np.repeat(np.asarray(values, float)[:, None], 4, axis=1)
    return PhaseState(g, u, 0.1)


def slab_state(size=1024, eps=1 / 64):
    g = Grid((size,))
    s = Slab(0, 0.25, 0.75)
    return init_from_shapes(g, eps, [s, Rest((s,))])


def perturbed_three_phase(rng, size=8, eps=0.25):
    g = Grid((size, size))
    x, y = g.coordinates()
    base = np.stack(
        [
            optimal_profile((np.abs(x - 0.5) - 0.25) / eps) + 0 * y,
            optimal_profile((np.abs(y - 0.5) - 0.2) / eps) + 0 * x,
            np.full(g.shape, 0.3),
        ]
    )
    base /= base.sum(0)
    return PhaseState(g, base + 0.02 * rng.standard_normal(base.shape), eps)


# -- energy --------------------------------------------------------------


def test_energy_of_bulk_is_zero():
    g = Grid((16, 16))
    u = np.zeros((3, *g.shape))
    u[0] = 1
    assert energy(PhaseState(g, u, 0.1), [1, 1, 1]) == 0


def test_flat_energy_and_linearity():
    s = slab_state()
    e = energy(s, TensionSet.from_pairs([1.0]))
    assert e == pytest.approx(2 * 0.5 * profile_constant(), rel=1e-2)
    assert energy(s, [1.0, 1.0]) == pytest.approx(2 * energy(s, [0.5, 0.5]), rel=1e-15)


# -- step 1 --------------------------------------------------------------


def test_all_frozen_step_is_identity(rng):
    s = perturbed_three_phase(rng)
    out = step_diffusion(s, [0.5, 0.5, 0.5], [0, 0, 0], SolverParams(0.01))
    assert np.array_equal(out.u, s.u)


def test_frozen_phase_bitwise_unchanged(rng):
    s = perturbed_three_phase(rng)
    out = step_diffusion(s, [0.5, 0.5, 0.5], [1, 0, 1], SolverParams(0.01))
    assert np.array_equal(out.u[1], s.u[1])
    assert not np.array_equal(out.u[0], s.u[0])


def test_constant_bulk_is_fixed():
    g = Grid((8, 8))
    u = np.stack([np.ones(g.shape), np.zeros(g.shape)])
    s = PhaseState(g, u, 0.05)
    out = step_diffusion(s, [0.5, 0.5], [2, 2], SolverParams(0.003))
    assert np.max(np.abs(out.u - u)) <= 1e-12


def test_constant_field_scalar_recurrence():
    # spatially constant data follows v = (u - c/eps^2 (W'(u) - alpha u)) / (1 + c alpha/eps^2)
    g = Grid((8,))
    u0 = 0.3
    s = PhaseState(g, np.full((2, 8), [[u0], [1 - u0]]), 0.1)
    p = SolverParams(0.001)
    c = p.dt * 2 * 0.5
    w1 = u0 * (1 - u0) * (1 - 2 * u0)
    expected = (u0 - c / 0.01 * (w1 - p.alpha * u0)) / (1 + c * p.alpha / 0.01)
    out = step_diffusion(s, [0.5, 0.5], [2, 2], p)
    assert np.allclose(out.u[0], expected, atol=1e-14)


def test_flat_front_is_stationary():
    eps = 1 / 64
    s = slab_state(256, eps)
    res = run(s, [0.5, 0.5], MobilitySet.from_pairs([1.0]), SolverParams(1 / 4096), 100 / 4096, every=1000)
    u = res.state.u[0]
    x = res.state.grid.coordinates()[0]
    # re-centre on the measured half-level crossing near x = 0.25
    i = np.flatnonzero((u[:-1] < 0.5) & (u[1:] >= 0.5))[0]
    x0 = x[i] + (0.5 - u[i]) / (u[i + 1] - u[i]) * (x[1] - x[0])
    near = np.abs(x - 0.25) < 0.2
    ref = optimal_profile(-(x - x0) / eps)
    assert np.max(np.abs(u[near] - ref[near])) <= 1e-3
    assert res.steps == 100


# -- step 2 --------------------------------------------------------------


def test_projection_keeps_partitioned_state(rng):
    s = perturbed_three_phase(rng)
    s.u /= s.u.sum(0)
    out, info = project_partition(s, [1, 1, 1], SolverParams(1.0), return_info=True)
    assert np.allclose(out.u, s.u, atol=1e-15)
    assert info.lambda_norm < 1e-13


def test_projection_hand_example():
    s = point_state([0.5, 0.3, 0.1])
    out = project_partition(s, [1, 1, 1], SolverParams(1.0))
    assert np.allclose(out.u[:, 0], [0.545455, 0.338182, 0.116364], atol=1e-6)
    assert out.u[:, 0].sum() == pytest.approx(1.0, abs=1e-15)


def test_projection_frozen_phase_drops_out():
    s = point_state([0.5, 0.3, 0.1])
    out = project_partition(s, [1, 0, 1], SolverParams(1.0))
    lam = 0.1 / (0.25 + 0.09)
    assert out.u[1, 0] == 0.3
    assert out.u[0, 0] == pytest.approx(0.5 + lam * 0.25)
    assert out.u[:, 0].sum() == pytest.approx(1.0, abs=1e-15)


def test_projection_fallback_in_bulk():
    # a pure-bulk point has zero weight; the residual is split evenly
    s = point_state([1.0, 0.0, -0.03])
    out, info = project_partition(s, [1, 1, 0], SolverParams(1.0), return_info=True)
    assert out.u[:, 0].sum() == pytest.approx(1.0, abs=1e-15)
    assert out.u[2, 0] == -0.03
    assert info.fallback_cells == 4


def test_projection_all_frozen():
    s = point_state([0.5, 0.3, 0.1])
    with pytest.raises(AllPhasesFrozen):
        project_partition(s, [0, 0, 0], SolverParams(1.0))
    ok = point_state([0.5, 0.3, 0.2])
    assert np.array_equal(project_partition(ok, [0, 0, 0], SolverParams(1.0)).u, ok.u)


def dense_volume_oracle(state, m, schedule):
    """Solve the pointwise ansatz directly: unknowns lambda(x) and mu_k, with the gauge row."""
    g = state.grid
    u = state.u.reshape(state.n_phases, -1)
    n_cells = u.shape[1]
    w = np.asarray(m, float)[:, None] * sqrt_two_well(u)
    cons = schedule.constrained
    pots = []
    for k in cons:
        sel = schedule.potentials[k]
        pots.append(m[k] * (sqrt_two_well(u[k]) if sel == "well" else u[k] * u[int(sel)]))
    pots = np.array(pots)
    hv = g.cell_volume
    n_unk = n_cells + len(cons)
    rows, rhs = [], []
    for x in range(n_cells):
        r = np.zeros(n_unk)
        r[x] = w[:, x].sum()
        for a, k in enumerate(cons):
            r[n_cells + a] = pots[a, x]
        rows.append(r)
        rhs.append(1 - u[:, x].sum())
    for a, k in enumerate(cons):
        r = np.zeros(n_unk)
        r[:n_cells] = w[k] * hv
        r[n_cells + a] = pots[a].sum() * hv
        rows.append(r)
        rhs.append(schedule.targets[k] - u[k].sum() * hv)
    gauge = np.zeros(n_unk)
    gauge[:n_cells] = sum(w[k] for k in cons) * hv
    rows.append(gauge)
    rhs.append(0.0)
    sol, *_ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    lam, mu = sol[:n_cells], sol[n_cells:]
    new = u + lam * w
    for a, k in enumerate(cons):
        new[k] += mu[a] * pots[a]
    return new.reshape(state.u.shape)


def test_volume_projection_matches_dense_oracle(rng):
    s = perturbed_three_phase(rng)
    m = np.array([1.0, 0.7, 2.0])
    clean = s.copy()
    clean.u /= clean.u.sum(0)
    sched = VolumeSchedule.constant(clean, [0, 1, 2])
    out, info = project_partition_volume(s, m, sched, SolverParams(1.0), return_info=True)
    assert np.max(np.abs(out.u - dense_volume_oracle(s, m, sched))) <= 1e-8
    assert np.max(np.abs(out.u.sum(0) - 1)) <= 1e-10
    assert np.max(np.abs(out.volumes() - sched.targets)) <= 1e-10 * s.grid.volume
    assert info.volume_error <= 1e-10


def test_volume_projection_partial_constraint(rng):
    s = perturbed_three_phase(rng)
    clean = s.copy()
    clean.u /= clean.u.sum(0)
    sched = VolumeSchedule.constant(clean, [1])
    out = project_partition_volume(s, [1, 1, 1], sched, SolverParams(1.0))
    assert out.volumes()[1] == pytest.approx(sched.targets[1], abs=1e-12)
    assert np.max(np.abs(out.u.sum(0) - 1)) <= 1e-10


def test_volume_projection_fixed_point(rng):
    s = perturbed_three_phase(rng)
    s.u /= s.u.sum(0)
    sched = VolumeSchedule.constant(s, [0, 1, 2])
    out, info = project_partition_volume(s, [1, 1, 1], sched, SolverParams(1.0), return_info=True)
    assert np.max(np.abs(out.u - s.u)) <= 1e-12
    assert np.max(np.abs(info.multipliers)) <= 1e-10


def test_volume_projection_errors(rng):
    s = perturbed_three_phase(rng)
    bad = VolumeSchedule(("constant",) * 3, s.volumes() + 0.1)
    with pytest.raises(InconsistentTargets):
        project_partition_volume(s, [1, 1, 1], bad, SolverParams(1.0))
    g = Grid((8, 8))
    u = np.zeros((3, *g.shape))
    u[0] = 1.0
    pure = PhaseState(g, u, 0.1)
    with pytest.raises(SingularConstraintSystem):
        project_partition_volume(pure, [1, 1, 1], VolumeSchedule.constant(pure, [1]), SolverParams(1.0))


def test_volume_projection_skips_frozen(rng):
    s = perturbed_three_phase(rng)
    clean = s.copy()
    clean.u /= clean.u.sum(0)
    sched = VolumeSchedule.constant(clean, [0, 2])
    out = project_partition_volume(s, [1, 1, 0], sched, SolverParams(1.0))
    assert np.array_equal(out.u[2], s.u[2])
    assert out.volumes()[0] == pytest.approx(sched.targets[0], abs=1e-12)


def test_vls_step_without_growth_conserves_all(rng):
    g = Grid((64, 64))
    eps = 1 / 64
    from mobiflow.scenarios import Intersection, HalfSpace, Substrate

    sub = Substrate(0.3, 0.05)
    drop = Intersection((Circle((0.5, 0.3), 0.15), HalfSpace(1, 0.3, below=False)))
    s = init_from_shapes(g, eps, [drop, sub, Rest((drop, sub))])
    sched = VolumeSchedule.vls(s, solid=1, liquid=0, vapor=2, growth_rate=0.0)
    res = run(s, [0.5, 0.5, 0.5], MobilitySet.from_per_phase([1, 1 / 128, 1]), SolverParams(eps**2), 20 * eps**2, sched)
    assert np.max(np.abs(res.state.volumes() - s.volumes())) <= 20 * 1e-10 * g.volume


# -- targets -------------------------------------------------------------


def test_advance_targets():
    g = Grid((2048,))
    eps = 1 / 64
    x = g.coordinates()[0]
    ul = optimal_profile((x - 0.5) / eps)
    us = 1 - ul
    u = np.stack([ul, us, np.zeros_like(x)])
    s = PhaseState(g, u, eps)
    sched = VolumeSchedule(("constant", "vls", "vls"), [0.5, 0.4, 0.1], ("well", 0, 0), 0.25, 1, 0, 2)
    out = advance_targets(sched, s, 1e-3)
    # int q(1 - q) over one layer is eps (the profile is a logistic)
    inc = 1e-3 * 0.25 / eps * eps
    assert out.targets[1] - 0.4 == pytest.approx(inc, rel=1e-8)
    assert 0.1 - out.targets[2] == pytest.approx(inc, rel=1e-8)
    assert out.targets[0] == 0.5
    assert out.targets.sum() == pytest.approx(1.0, abs=1e-15)
    assert advance_targets(sched.with_rate(0.0), s, 1e-3).targets.tolist() == [0.5, 0.4, 0.1]
    apart = PhaseState(g, np.stack([np.where(x < 0.3, 1.0, 0.0), np.where(x > 0.7, 1.0, 0.0), np.zeros_like(x)]), eps)
    assert advance_targets(sched, apart, 1e-3).targets.tolist() == [0.5, 0.4, 0.1]
    with pytest.raises(TargetUnderflow):
        advance_targets(sched, s, 100.0)


# -- driver --------------------------------------------------------------


def test_run_zero_time(rng):
    s = perturbed_three_phase(rng)
    res = run(s, [0.5] * 3, [1, 1, 1], SolverParams(0.01), 0.0)
    assert res.steps == 0 and np.array_equal(res.state.u, s.u)
    assert len(res.diagnostics) == 1


def test_run_diagnostics_and_energy_decrease():
    g = Grid((64, 64))
    c = Circle((0.5, 0.5), 0.3)
    s = init_from_shapes(g, 1 / 64, [c, Rest((c,))])
    seen = []
    res = run(s, TensionSet.from_pairs([1.0]), MobilitySet.from_pairs([1.0]), SolverParams(1 / 4096), 30 / 4096,
              callbacks=[lambda k, st, info: seen.append((k, info.partition_residual))], every=10)
    assert [k for k, _ in seen] == list(range(30))
    assert max(r for _, r in seen) <= 1e-10
    e = res.diagnostics.column("energy")
    assert np.all(np.diff(e) <= 1e-12)
    assert res.diagnostics.columns[:3] == ["t", "energy", "vol_1"]
    assert len(res.diagnostics) == 4


def test_nonfinite_state_is_reported(monkeypatch):
    import mobiflow.solver as solver

    real = solver.step_diffusion
    calls = []

    def poisoned(state, *a):
        out = real(state, *a)
        calls.append(1)
        if len(calls) == 3:
            out.u[0, 3] = np.nan
        return out

    monkeypatch.setattr(solver, "step_diffusion", poisoned)
    g = Grid((8,))
    u = np.stack([np.full(8, 0.5), np.full(8, 0.5)])
    with pytest.raises(NonFiniteState) as exc:
        run(PhaseState(g, u, 0.1), [0.5, 0.5], [1, 1], SolverParams(0.001), 0.01)
    assert exc.value.step == 2


def test_general_mobility_runs_and_conserves_partition():
    g = Grid((32, 32))
    c = Circle((0.5, 0.5), 0.25)
    s = init_from_shapes(g, 1 / 32, [c, Rest((c,)), ])
    mob = MobilitySet.from_pairs([1.0], kind="general")
    res = run(s, [0.5, 0.5], mob, SolverParams(1 / 1024), 10 / 1024)
    assert res.state.partition_residual() <= 1e-10


def test_general_matches_additive_speed_two_phases():
    # for two phases both paths describe the same flow
    g = Grid((64, 64))
    c = Circle((0.5, 0.5), 0.3)
    s = init_from_shapes(g, 1 / 64, [c, Rest((c,))])
    p = SolverParams(1 / 4096)
    a = run(s, [0.5, 0.5], MobilitySet.from_pairs([1.0]), p, 40 / 4096).state
    b = run(s, [0.5, 0.5], MobilitySet.from_pairs([1.0], kind="general"), p, 40 / 4096).state
    ra = extract_contour(a, 0)[0].radius
    rb = extract_contour(b, 0)[0].radius
    r0 = extract_contour(s, 0)[0].radius
    assert (r0 - rb) > 0 and (r0 - ra) > 0


def test_diagnostics_validation():
    d = Diagnostics(2)
    d.append([0, 1, 0.5, 0.5, 0, 0, 0])
    with pytest.raises(ValueError):
        d.append([0, 1, 0.5])
    with pytest.raises(ValueError):
        d.append([-1, 1, 0.5, 0.5, 0, 0, 0])
    with pytest.raises(ValueError):
        d.append([1, np.inf, 0.5, 0.5, 0, 0, 0])


def test_params_validation():
    with pytest.raises(ValueError):
        SolverParams(0.0)
    with pytest.raises(ValueError):
        SolverParams(0.1, alpha=-1)
    with pytest.raises(ValueError):
        VolumeSchedule(("constant", "weird"), [0.5, 0.5])
