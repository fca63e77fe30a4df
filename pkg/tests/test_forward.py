import numpy as np
import pytest

from impscat.forward import (
    ForwardSolution,
    IllConditionedError,
    ImpedanceSolver,
    Medium,
    SensorGeometry,
    TransmissionSolver,
    forward_map,
    nodes_for_wavenumber,
    solve_stats,
    _factor,
)
from impscat.geometry import FourierCurve, sample_curve
from impscat.models import ConstantImpedance, PhysicalImpedance, beta_from_physical

from _sov import (
    circle_impedance_boundary,
    circle_impedance_far,
    circle_transmission_far,
)

TWO_PI = 2.0 * np.pi


def circle(radius=1.0):
    return FourierCurve(
        length=TWO_PI,
        a1=np.array([0.0, radius]),
        b1=np.array([0.0, 0.0]),
        a2=np.array([0.0, 0.0]),
        b2=np.array([0.0, radius]),
    )


def sensors(n_d=3, n_r=5, r=10.0):
    ang_d = TWO_PI * np.arange(n_d) / n_d + 0.1
    ang_r = TWO_PI * np.arange(n_r) / n_r + 0.37
    return SensorGeometry(
        directions=np.column_stack([np.cos(ang_d), np.sin(ang_d)]),
        receptors=r * np.column_stack([np.cos(ang_r), np.sin(ang_r)]),
    )


MEDIUM = Medium(omega=3.0, c1=0.6, c2=1.0, delta=2.0, rho_r=1.5)


def test_medium_derived_quantities():
    m = MEDIUM
    assert m.k2 == pytest.approx(3.0)
    zeta = 1.0 + 2j / 3.0
    assert m.k1 == pytest.approx(3.0 * np.sqrt(complex(zeta)) / 0.6)
    assert m.k1.imag > 0
    assert m.alpha == pytest.approx(1.0 / (1.5 * zeta))
    assert m.q == pytest.approx(0.5 * (1.0 / m.alpha + 1.0))
    assert m.k1 == pytest.approx(m.k2 * m.refractive_index)
    with pytest.raises(ValueError):
        Medium(omega=-1.0, c1=1.0, c2=1.0, delta=0.0, rho_r=1.0)


def test_sensor_geometry_validation():
    with pytest.raises(ValueError):
        SensorGeometry(np.array([[2.0, 0.0]]), np.array([[5.0, 0.0]]))


def test_nodes_for_wavenumber():
    n = nodes_for_wavenumber(TWO_PI, 6.0, ppw=10.0, floor=64)
    assert n == max(64, 60)
    assert nodes_for_wavenumber(TWO_PI, 50.0, ppw=10.0) == 500


@pytest.mark.parametrize("lam", [0.7 - 0.3j, 0.0])
def test_impedance_circle_against_mie_series(lam):
    radius = 1.2
    sg = sensors()
    kind = "neumann" if lam == 0.0 else "impedance"
    sol = forward_map(
        circle(radius), MEDIUM, sg, model=ConstantImpedance(lam), kind=kind,
        node_count=192,
    )
    ref = circle_impedance_far(MEDIUM.k2, lam, radius, sg.directions, sg.receptors)
    assert np.max(np.abs(sol.far - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_impedance_boundary_traces_against_mie_series():
    radius, lam = 1.2, 0.5 - 0.4j
    sg = sensors(n_d=1)
    samples = sample_curve(circle(radius), 192)
    solver = ImpedanceSolver(samples, MEDIUM)
    sol = solver.solve(sg, lam=np.full(samples.n, lam))
    u_ref, dnu_ref = circle_impedance_boundary(
        MEDIUM.k2, lam, radius, sg.directions[0], samples.s
    )
    assert np.max(np.abs(sol.boundary_u[0] - u_ref)) <= 1e-9 * np.max(np.abs(u_ref))
    assert np.max(np.abs(sol.boundary_dnu[0] - dnu_ref)) <= 1e-8 * np.max(np.abs(dnu_ref))
    # and the absorbing condition itself holds on the nodes
    bc = sol.boundary_dnu + 1j * MEDIUM.k2 * lam * sol.boundary_u
    assert np.max(np.abs(bc)) <= 1e-10


def test_physical_impedance_circle_against_mie_series():
    # on a circle the curvature is constant, so the curvature-dependent model
    # reduces to a constant impedance the series oracle can use
    radius = 1.2
    m = MEDIUM
    beta = beta_from_physical(m.omega, m.delta, m.rho_r, m.c_r)
    model = PhysicalImpedance(beta)
    sg = sensors()
    sol = forward_map(circle(radius), m, sg, model=model, node_count=192)
    from impscat.models import eval_impedance

    lam = eval_impedance(model, np.array([0.0]), np.array([1.0 / radius]), m.k2, TWO_PI)[0]
    ref = circle_impedance_far(m.k2, lam, radius, sg.directions, sg.receptors)
    assert np.max(np.abs(sol.far - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_transmission_circle_against_mie_series():
    radius = 1.2
    m = MEDIUM
    sg = sensors()
    sol = forward_map(circle(radius), m, sg, kind="transmission", node_count=192)
    ref = circle_transmission_far(
        m.k1, m.k2, m.alpha, radius, sg.directions, sg.receptors
    )
    assert np.max(np.abs(sol.far - ref)) <= 1e-9 * np.max(np.abs(ref))


def test_transmission_interior_field_continuity():
    # total exterior and interior fields agree across the interface when
    # evaluated a little away from it on both sides (circle, via the series)
    radius = 1.2
    m = MEDIUM
    sg = sensors(n_d=1)
    samples = sample_curve(circle(radius), 256)
    solver = TransmissionSolver(samples, m)
    sol = solver.solve(sg)
    inner = solver.interior_field(sol.densities, np.array([[0.2, 0.1], [-0.3, 0.4]]))
    assert np.all(np.isfinite(inner))
    assert np.max(np.abs(inner)) < 10.0  # dissipative interior stays bounded


def test_forward_convergence_with_refinement():
    radius, lam = 1.0, 0.8 - 0.2j
    sg = sensors(n_d=1, n_r=3)
    ref = circle_impedance_far(MEDIUM.k2, lam, radius, sg.directions, sg.receptors)
    errs = []
    for n in (24, 96):
        sol = forward_map(
            circle(radius), MEDIUM, sg, model=ConstantImpedance(lam), node_count=n
        )
        errs.append(np.max(np.abs(sol.far - ref)))
    assert errs[1] < errs[0]
    assert errs[1] <= 1e-9 * np.max(np.abs(ref))


def test_solver_reuse_and_stats():
    samples = sample_curve(circle(), 64)
    solver = ImpedanceSolver(samples, MEDIUM)
    sg = sensors(n_d=2, n_r=2)
    solve_stats.reset()
    solver.factor(np.full(samples.n, 0.5 - 0.1j))
    sol1 = solver.solve(sg)
    assert solve_stats.factorizations == 1
    assert solve_stats.solves == 1
    # impedance change: one refactorization, no operator rebuild needed
    sol2 = solver.solve(sg, lam=np.full(samples.n, 1.5 - 0.1j))
    assert solve_stats.factorizations == 2
    assert not np.allclose(sol1.far, sol2.far)


def test_extra_rhs_reuses_factorization():
    samples = sample_curve(circle(), 64)
    solver = ImpedanceSolver(samples, MEDIUM).factor(np.full(64, 0.3 - 0.2j))
    rhs = np.random.default_rng(0).normal(size=(64, 3)) + 0.0j
    solve_stats.reset()
    x = solver.solve_densities(rhs)
    assert solve_stats.factorizations == 0
    assert solve_stats.solves == 1
    assert x.shape == (64, 3)


def test_ill_conditioned_system_raises():
    a = np.eye(8, dtype=complex)
    a[0, 0] = 1e-15
    with pytest.raises(IllConditionedError):
        _factor(a)


def test_forward_map_argument_errors():
    sg = sensors(n_d=1, n_r=1)
    with pytest.raises(ValueError):
        forward_map(circle(), MEDIUM, sg, kind="robin")
    with pytest.raises(ValueError):
        forward_map(circle(), MEDIUM, sg, kind="impedance")
