import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from magorbit.dynamics import (IntegratorConfig, PhasePoint, SphereBundlePoint, convergence_probe,
                               flat_torus_system, hamiltonian, hamiltonian_gradient,
                               hamiltonian_vector_field, integrate, limit_field, limit_flow,
                               limit_period, normalize_direction, rescaled_field, sphere_system,
                               twisted_form_eval, unit_level_residual, _slope)
from magorbit.errors import IntegrationQualityError
from magorbit.geometry import ChartPoint, TrigMetric, TrigTwoForm, cosine_field_t2

from conftest import catalog_systems


def random_phase_point(sys, rng):
    n = sys.dim
    if sys.manifold.kind == "torus":
        base = ChartPoint(0, rng.random(n))
    else:
        base = ChartPoint(int(rng.integers(2)), rng.uniform(-1.5, 1.5, 2))
    return PhasePoint(base, rng.normal(size=n) * 0.5)


def fd6_gradient(sys, x, h=1e-4):
    """Sixth-order central differences of H in all state directions."""
    z = x.state
    out = np.zeros_like(z)
    c = [(1, 45), (2, -9), (3, 1)]
    for k in range(z.size):
        acc = 0.0
        for m, w in c:
            e = np.zeros_like(z)
            e[k] = m * h
            acc += w * (hamiltonian(sys, PhasePoint.from_state(z + e, x.base.chart_id))
                        - hamiltonian(sys, PhasePoint.from_state(z - e, x.base.chart_id)))
        out[k] = acc / (60 * h)
    return out


def test_hamiltonian_examples():
    sys = flat_torus_system(2, TrigTwoForm.block([1.0]))
    q = ChartPoint(0, [0.1, 0.2])
    assert hamiltonian(sys, PhasePoint(q, [0, 0])) == 0.0
    assert hamiltonian(sys, PhasePoint(q, [0.3, 0.4])) == pytest.approx(0.125, abs=1e-15)
    from magorbit.dynamics import MagneticSystem
    from magorbit.geometry import flat_torus
    aniso = MagneticSystem(flat_torus(2), TrigMetric.diagonal([4.0, 1.0]), TrigTwoForm.block([1.0]))
    assert hamiltonian(aniso, PhasePoint(q, [2.0, 0.0])) == pytest.approx(0.5, abs=1e-15)


def test_hamiltonian_chart_independent_on_sphere(round_s2):
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = random_phase_point(round_s2, rng)
        y = round_s2.to_chart(x, 1 - x.base.chart_id)
        assert hamiltonian(round_s2, x) == pytest.approx(hamiltonian(round_s2, y), rel=1e-10, abs=1e-14)
        back = round_s2.to_chart(y, x.base.chart_id)
        assert np.allclose(back.state, x.state, atol=1e-10)


def test_twisted_form_examples():
    sys = flat_torus_system(2, TrigTwoForm.block([0.8]))
    x = PhasePoint(ChartPoint(0, [0.2, 0.3]), [0.1, 0.0])
    e1q, e1p, e2q = np.array([1, 0, 0, 0.]), np.array([0, 0, 1, 0.]), np.array([0, 1, 0, 0.])
    assert twisted_form_eval(sys, x, e1q, e1q) == 0.0
    assert twisted_form_eval(sys, x, e1q, e2q) == pytest.approx(0.8)
    free = flat_torus_system(2, TrigTwoForm(2, {}))
    assert abs(twisted_form_eval(free, x, e1q, e1p)) == 1.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=8, max_size=8))
def test_twisted_form_antisymmetric(v):
    sys = flat_torus_system(2, cosine_field_t2())
    x = PhasePoint(ChartPoint(0, [0.3, 0.1]), [0.2, 0.1])
    u, w = np.array(v[:4]), np.array(v[4:])
    assert twisted_form_eval(sys, x, u, w) == pytest.approx(-twisted_form_eval(sys, x, w, u), abs=1e-12)


def test_vector_field_examples():
    sys = flat_torus_system(2, TrigTwoForm.block([1.0]))
    q = ChartPoint(0, [0.5, 0.5])
    assert np.array_equal(hamiltonian_vector_field(sys, PhasePoint(q, [0, 0])), np.zeros(4))
    eps = 0.02
    p = math.sqrt(2 * eps)
    X = hamiltonian_vector_field(sys, PhasePoint(q, [p, 0]))
    assert np.allclose(X[:2], [p, 0]) and np.allclose(X[2:], [0, -p])   # pdot = sigma qdot
    free = flat_torus_system(2, TrigTwoForm(2, {}))
    assert np.allclose(hamiltonian_vector_field(free, PhasePoint(q, [0.3, 0.2]))[2:], 0)


@pytest.mark.parametrize("sys", catalog_systems(), ids=lambda s: s.name)
def test_defining_identity_with_fd_gradient(sys):
    """omega(X_H, v) = -dH(v), with X_H from the compiled kernel and dH by 6th-order FD."""
    rng = np.random.default_rng(7)
    kern = sys.kernel()
    for _ in range(10):
        x = random_phase_point(sys, rng)
        X = np.asarray(kern.rhs(x.state, x.base.chart_id))
        dH = fd6_gradient(sys, x)
        for _ in range(3):
            v = rng.normal(size=2 * sys.dim)
            assert abs(twisted_form_eval(sys, x, X, v) + dH @ v) <= 1e-7 * (1 + np.linalg.norm(v))


@pytest.mark.parametrize("sys", catalog_systems(), ids=lambda s: s.name)
def test_kernel_field_matches_linear_solve(sys):
    rng = np.random.default_rng(3)
    kern = sys.kernel()
    for _ in range(20):
        x = random_phase_point(sys, rng)
        assert np.allclose(kern.rhs(x.state, x.base.chart_id), hamiltonian_vector_field(sys, x), atol=1e-12)
        assert kern.energy(x.state, x.base.chart_id) == pytest.approx(hamiltonian(sys, x), rel=1e-13)


def test_cyclotron_closed_form():
    sys = flat_torus_system(2, TrigTwoForm.block([1.0]))
    eps = 0.02
    p = math.sqrt(2 * eps)
    x0 = PhasePoint(ChartPoint(0, [0.5, 0.5]), [p, 0])
    tr = integrate(sys, x0, 2 * math.pi)
    center = np.array([0.5, 0.5]) - np.linalg.solve(sys.sigma.eval(x0.base), x0.momentum)
    radii = np.linalg.norm(tr.states[:, :2] - center, axis=1)
    assert np.max(np.abs(radii - p)) <= 1e-12
    # after exactly 2 pi the discrete phase lag is (h B)^2 / 12 per unit angle
    assert np.linalg.norm(tr.final.state - x0.state) <= 1e-6
    assert tr.max_drift <= 1e-12


def test_doubling_field_halves_period():
    eps = 0.02
    p = math.sqrt(2 * eps)
    x0 = PhasePoint(ChartPoint(0, [0.5, 0.5]), [p, 0])
    sys2 = flat_torus_system(2, TrigTwoForm.block([2.0]))
    tr = integrate(sys2, x0, math.pi)
    assert np.linalg.norm(tr.final.state - x0.state) <= 1e-6
    half = integrate(sys2, x0, math.pi / 2)
    assert np.linalg.norm(half.final.state - x0.state) > 0.1


def test_free_particle_straight_line():
    sys = flat_torus_system(2, TrigTwoForm(2, {}))
    x0 = PhasePoint(ChartPoint(0, [0.1, 0.2]), [1.0, 0.0])
    tr = integrate(sys, x0, 2.5)
    assert np.allclose(tr.states[:, 1], 0.2) and np.allclose(tr.states[:, 2:], [1.0, 0.0])
    assert tr.max_drift == 0.0
    assert [e[0] // 2 for e in tr.chart_switches] == [450, 950]
    wrapped = tr.wrapped(sys.manifold)
    assert all(0 <= c < 1 for w in wrapped for c in w.base.coords)


@pytest.mark.parametrize("sys", catalog_systems(), ids=lambda s: s.name)
def test_energy_budget_on_catalog(sys):
    rng = np.random.default_rng(11)
    x = random_phase_point(sys, rng)
    x = PhasePoint(x.base, 0.2 * x.momentum)
    tr = integrate(sys, x, 1.0, IntegratorConfig(step=1e-3))
    assert len(tr.times) == 1001 and np.all(np.diff(tr.times) > 0)
    assert tr.max_drift <= 1e-6


def test_drift_budget_violation_reports_step():
    sys = catalog_systems()[1]
    x = PhasePoint(ChartPoint(0, [0.1, 0.2]), [0.5, 0.3])
    with pytest.raises(IntegrationQualityError, match="worst at step"):
        integrate(sys, x, 2.0, IntegratorConfig(step=0.02, drift_budget=1e-14))


@pytest.mark.parametrize("sys", catalog_systems(), ids=lambda s: s.name)
def test_reversibility(sys):
    rng = np.random.default_rng(5)
    x = random_phase_point(sys, rng)
    x = PhasePoint(x.base, 0.3 * x.momentum)
    cfg = IntegratorConfig()
    fwd = integrate(sys, x, 1.0, cfg)
    back = integrate(sys, fwd.final, -1.0, cfg)
    end = sys.to_chart(back.final, x.base.chart_id) if back.final.base.chart_id != x.base.chart_id else back.final
    assert np.max(np.abs(end.state - x.state)) <= 10 * cfg.drift_budget


def test_torus_shifted_domain_agrees(variable_t2):
    x = PhasePoint(ChartPoint(0, [0.95, 0.4]), [0.3, 0.05])
    a = integrate(variable_t2, x, 2.0)
    shifted = PhasePoint(ChartPoint(0, [-0.05, 0.4]), [0.3, 0.05])
    b = integrate(variable_t2, shifted, 2.0)
    diff = a.states - b.states
    diff[:, :2] -= np.round(diff[:, :2])
    assert np.max(np.abs(diff)) <= 1e-8
    assert a.chart_switches and b.chart_switches


def test_sphere_chart_switch_agrees_with_embedding(round_s2):
    x = PhasePoint(ChartPoint(0, [1.8, 0.0]), [0.0, 0.6])
    tr = integrate(round_s2, x, 3.0)
    assert tr.chart_switches
    other = integrate(round_s2, round_s2.to_chart(x, 1), 3.0)
    P = np.array([round_s2.manifold.embed(ChartPoint(int(c), z[:2])) for z, c in zip(tr.states, tr.charts)])
    R = np.array([round_s2.manifold.embed(ChartPoint(int(c), z[:2])) for z, c in zip(other.states, other.charts)])
    assert np.max(np.abs(P - R)) <= 1e-6
    assert tr.max_drift <= 1e-6


# -- rescaling ------------------------------------------------------------------------

def test_rescaled_field_flat_examples():
    sys = flat_torus_system(2, TrigTwoForm.block([1.0]))
    y = normalize_direction(sys, ChartPoint(0, [0.3, 0.3]), [0.6, 0.8])
    for eps in (0.1, 0.01, 0.001):
        X = rescaled_field(sys, eps, y)
        assert np.allclose(X[:2], eps * y.direction, atol=1e-15)
        assert np.linalg.norm(X[2:]) == pytest.approx(1.0, abs=1e-14)      # unit angular speed
        Xm = rescaled_field(sys, eps, SphereBundlePoint(y.base, -y.direction))
        assert np.allclose(Xm, -X, atol=1e-15)


@pytest.mark.parametrize("sys", catalog_systems(), ids=lambda s: s.name)
def test_rescaled_field_tangent_to_unit_level(sys):
    rng = np.random.default_rng(2)
    for _ in range(5):
        x = random_phase_point(sys, rng)
        y = normalize_direction(sys, x.base, x.momentum)
        assert abs(unit_level_residual(sys, y)) <= 1e-12
        from magorbit.dynamics import _inverse_metric_and_grad
        G, dG = _inverse_metric_and_grad(sys, y.base)
        u = y.direction
        for eps in (0.3, 0.01):
            X = rescaled_field(sys, eps, y)
            n = sys.dim
            rate = 2 * u @ G @ X[n:] + u @ np.tensordot(X[:n], dG, axes=1) @ u
            assert abs(rate) <= 1e-10


def test_rescaled_field_rejects_nonpositive_eps(variable_t2):
    y = normalize_direction(variable_t2, ChartPoint(0, [0.1, 0.1]), [1, 0])
    with pytest.raises(ValueError):
        rescaled_field(variable_t2, 0.0, y)


def test_limit_field_examples(variable_t2):
    q = ChartPoint(0, [0.2, 0.7])
    y = normalize_direction(variable_t2, q, [1.0, 0.0])
    X0 = limit_field(variable_t2, y)
    assert np.array_equal(X0[:2], [0, 0])
    B = variable_t2.sigma.eval(q)[0, 1]
    assert limit_period(variable_t2, q) == pytest.approx(2 * math.pi / B)
    back = limit_flow(variable_t2, y, 2 * math.pi / B)
    assert np.allclose(back.direction, y.direction, atol=1e-12)
    mid = limit_flow(variable_t2, y, 1.234)
    assert abs(unit_level_residual(variable_t2, mid)) <= 1e-12
    doubled = variable_t2.scaled(2.0)
    assert np.allclose(limit_field(doubled, y), 2 * X0)


def test_limit_flow_compatible_four_dim_closes():
    sys = flat_torus_system(4, TrigTwoForm.block([1.7, 1.7]))
    rng = np.random.default_rng(4)
    for _ in range(5):
        y = normalize_direction(sys, ChartPoint(0, rng.random(4)), rng.normal(size=4))
        assert np.allclose(limit_flow(sys, y, 2 * math.pi / 1.7).direction, y.direction, atol=1e-12)


def test_convergence_probe_flat_constant():
    sys = flat_torus_system(2, TrigTwoForm.block([1.0]))
    sample = [normalize_direction(sys, q, [1.0, 0.5]) for q in sys.manifold.sample(4)]
    fit = convergence_probe(sys, [1e-1, 1e-2, 1e-3], sample)
    assert fit.c0_slope == pytest.approx(1.0, abs=1e-9)
    u = sample[0].direction
    assert np.allclose(fit.c0, fit.eps * np.max(np.abs(u)), rtol=1e-12)


def test_convergence_probe_quartic_and_sphere():
    sample_eps = [1e-1, 3e-2, 1e-2, 3e-3]
    for sys in (catalog_systems()[1], sphere_system()):
        sample = [normalize_direction(sys, q, [0.3, 1.0]) for q in sys.manifold.sample(6)]
        fit = convergence_probe(sys, sample_eps, sample)
        assert 0.9 <= fit.c0_slope <= 1.1 and 0.9 <= fit.c1_slope <= 1.1


def test_convergence_probe_validation(variable_t2):
    y = normalize_direction(variable_t2, ChartPoint(0, [0.1, 0.1]), [1, 0])
    with pytest.raises(ValueError):
        convergence_probe(variable_t2, [1e-2, 1e-1, 1e-3], [y])
    with pytest.raises(ValueError):
        convergence_probe(variable_t2, [1e-1, 1e-2], [y])
    with pytest.raises(ValueError):
        convergence_probe(variable_t2, [1e-1, 1e-2, 1e-3], [])


def test_exact_agreement_reported():
    slope, status = _slope(np.array([0.1, 0.01, 0.001]), np.array([0.0, 0.0, 0.0]))
    assert slope is None and status == "exact agreement"
