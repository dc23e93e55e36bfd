import math

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from mobiflow.phases import (
    InconsistentMobilities,
    MobilitySet,
    NoWettingEquilibrium,
    TensionSet,
    TriangleViolation,
    additive_decompose,
    harmonic_decompose,
    herring_angles,
    optimal_profile,
    optimal_profile_derivative,
    profile_constant,
    sqrt_two_well,
    well_derivative,
    well_value,
    young_angle,
)


def test_well_values():
    assert well_value(0.0) == 0 and well_value(1.0) == 0
    assert well_derivative(0.5) == 0
    assert well_derivative(0.0) == 0 and well_derivative(1.0) == 0
    assert well_value(0.5) == pytest.approx(1 / 32, abs=0)
    assert sqrt_two_well(0.5) == 0.25
    assert sqrt_two_well(-0.1) == pytest.approx(0.11, abs=1e-15)


def test_well_against_symbolic():
    with mpmath.workdps(30):
        s = mpmath.mpf(1) / 2
        assert float(s**2 * (1 - s) ** 2 / 2) == well_value(0.5)


def test_well_symmetry():
    s = np.linspace(-1, 2, 301)
    assert np.allclose(well_value(s), well_value(1 - s), atol=1e-15)
    assert np.all(well_value(s) >= 0)


def test_profile_basics():
    assert optimal_profile(0.0) == 0.5
    s = np.linspace(-20, 20, 401)
    assert np.allclose(optimal_profile(s) + optimal_profile(-s), 1.0, atol=1e-15)
    assert np.all(np.diff(optimal_profile(s)) < 0)
    assert np.all(optimal_profile_derivative(s) < 0)
    assert np.allclose(optimal_profile(s), 0.5 * (1 - np.tanh(s / 2)), atol=1e-15)


def test_profile_solves_ode_rk4():
    def f(q):
        return -sqrt_two_well(q)

    h = 1e-4
    for target in (1.0, 3.0):
        for sign in (1, -1):
            q, s = 0.5, 0.0
            n = round(target / h)
            for _ in range(n):
                hh = sign * h
                k1 = f(q)
                k2 = f(q + hh * k1 / 2)
                k3 = f(q + hh * k2 / 2)
                k4 = f(q + hh * k3)
                q += hh * (k1 + 2 * k2 + 2 * k3 + k4) / 6
                s += hh
            assert q == pytest.approx(optimal_profile(s), abs=1e-8)


def test_profile_constant():
    c = profile_constant()
    assert c == 1 / 6
    assert 0 < c < 0.5
    val, _ = quad(lambda s: optimal_profile_derivative(s) ** 2, -60, 60, limit=200)
    assert val == pytest.approx(c, abs=1e-8)
    val, _ = quad(sqrt_two_well, 0, 1)
    assert val == pytest.approx(c, abs=1e-14)


@pytest.mark.parametrize(
    "pairs, expected",
    [
        ((1, 1, 1), (0.5, 0.5, 0.5)),
        ((0.1, 1, 1), (0.05, 0.05, 0.95)),
        # (LS, LV, SV) -> (L, S, V) with phases ordered L, S, V
        ((0.62, 0.85, 1.24), (0.115, 0.505, 0.735)),
    ],
)
def test_additive_decompose(pairs, expected):
    p = additive_decompose(pairs)
    assert np.allclose(p, expected, atol=1e-12)
    s = TensionSet.from_pairs(pairs).pairwise
    for i in range(3):
        for j in range(3):
            if i != j:
                assert p[i] + p[j] == pytest.approx(s[i, j], abs=1e-15)


def test_triangle_violation():
    with pytest.raises(TriangleViolation):
        TensionSet.from_pairs([1.0, 1.0, 3.0])
    with pytest.warns(UserWarning):
        t = TensionSet.from_pairs([1.0, 1.0, 3.0], strict=False)
    with pytest.raises(TriangleViolation):
        t.per_phase


def test_tension_set_validation():
    with pytest.raises(ValueError):
        TensionSet(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError):
        TensionSet.from_pairs([-1.0])
    with pytest.raises(ValueError):
        TensionSet.from_pairs([1, 1, 1], per_phase_values=[0.5, 0.5, 0.6])
    t = TensionSet.from_pairs([1, 1, 1], per_phase_values=[0.5, 0.5, 0.5])
    assert np.all(t.per_phase == 0.5)
    four = TensionSet.from_pairs(np.ones(6))
    with pytest.raises(ValueError):
        four.per_phase


def test_harmonic_decompose_examples():
    assert np.allclose(harmonic_decompose([1, 1, 1]), 2.0)
    assert np.allclose(harmonic_decompose([0.1, 0.1, 1]), (2 / 19, 2, 2), rtol=1e-12)
    d = 1 / 512
    # pairs (LS, LV, SV) with phases ordered L, S, V
    m = harmonic_decompose([d / (1 + d), 0.5, d / (1 + d)])
    assert np.allclose(m, (1, d, 1), rtol=1e-10)


def test_harmonic_decompose_zeros_and_failures():
    assert np.allclose(harmonic_decompose([1, 0, 0]), (2, 2, 0))
    assert np.all(harmonic_decompose([0, 0, 0]) == 0)
    with pytest.raises(InconsistentMobilities):
        harmonic_decompose([0, 1, 1])
    # 1/m_1 < 0 required: not harmonically additive
    assert harmonic_decompose([1, 1, 0.1]) is None


def test_harmonic_recombination(rng):
    for _ in range(50):
        p = rng.uniform(0.05, 5.0, 3)
        pairs = [p[0] * p[1] / (p[0] + p[1]), p[0] * p[2] / (p[0] + p[2]), p[1] * p[2] / (p[1] + p[2])]
        assert np.allclose(harmonic_decompose(pairs), p, rtol=1e-10)


def test_mobility_set_kinds():
    m = MobilitySet.from_pairs([0.1, 0.1, 1])
    assert m.kind == "additive"
    assert np.allclose(m.per_phase, (2 / 19, 2, 2))
    with pytest.raises(ValueError):
        MobilitySet.from_pairs([1, 1, 1 / 3])
    # reciprocals (1, 1, 3): not additive, but sqrt(1/m) is still a triangle
    g = MobilitySet.from_pairs([1, 1, 1 / 3], kind="general")
    with pytest.raises(ValueError):
        g.per_phase
    with pytest.raises(ValueError):
        MobilitySet.from_pairs([1, 0, 1], kind="general")
    with pytest.raises(ValueError, match="semi-definite"):
        MobilitySet.from_pairs([1, 1, 0.1], kind="general")
    with pytest.raises(ValueError):
        MobilitySet.from_pairs([1, 1, 1], per_phase_values=[2, 2, 1])


def test_general_metric_psd_on_sum_zero(rng):
    proj = np.eye(3) - 1 / 3
    for _ in range(30):
        p = rng.uniform(0.1, 3.0, 3)
        add = MobilitySet.from_per_phase(p)
        gen = add.as_general()
        w = np.linalg.eigvalsh(proj @ gen.metric() @ proj)
        assert w.min() >= -1e-10
        # the operator inverts the metric on the sum-zero plane
        op = gen.operator()
        assert np.allclose(op @ (proj @ gen.metric() @ proj), proj, atol=1e-8)


def test_from_per_phase_zero():
    m = MobilitySet.from_per_phase([2.0, 2.0, 0.0])
    assert np.allclose(m.pairwise, [[0, 1, 0], [1, 0, 0], [0, 0, 0]])


def test_young_angle():
    assert young_angle(1.0, 1.0, 1.0) == pytest.approx(math.pi / 2)
    assert young_angle(2.0, 1.0, 1.0) == 0.0
    theta = young_angle(1.24, 0.62, 0.85)
    assert theta == pytest.approx(math.acos(0.62 / 0.85), abs=1e-15)
    assert math.degrees(theta) == pytest.approx(43.1, abs=0.1)
    with pytest.raises(NoWettingEquilibrium):
        young_angle(3.0, 1.0, 1.0)


def test_herring_angles():
    assert np.allclose(herring_angles(1, 1, 1), 2 * np.pi / 3)
    a = herring_angles(0.1, 1, 1)
    assert a.sum() == pytest.approx(2 * np.pi)
    # phase 3 faces the weak 1-2 interface and opens widest
    assert np.degrees(a) == pytest.approx([92.866, 92.866, 174.268], abs=1e-3)
    with pytest.raises(TriangleViolation):
        herring_angles(1, 1, 3)
