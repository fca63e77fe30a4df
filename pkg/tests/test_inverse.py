import numpy as np
import pytest

from impscat.forward import SensorGeometry, forward_map, Medium
from impscat.inverse import (
    FrequencyData,
    InversionState,
    OptimizerConfig,
    _Evaluator,
    continuation_solve,
    descent_direction,
    domain_step,
    filter_step,
    gaussian_damping,
    impedance_step,
    relative_residual,
    solve_single_frequency,
    unit_circle,
)
from impscat.models import (
    ConstantImpedance,
    CurvatureAffineImpedance,
    PhysicalImpedance,
    pack_params,
    project_params,
    unpack_params,
)

CFG = OptimizerConfig(node_floor=64)


def make_sensors(omega, c2=1.0, radius=10.0):
    n = int(np.floor(10 * omega / c2))
    ang = 2.0 * np.pi * np.arange(n) / n
    return SensorGeometry(
        directions=np.column_stack([np.cos(ang), np.sin(ang)]),
        receptors=radius * np.column_stack([np.cos(ang), np.sin(ang)]),
    )


def make_data(curve, model, omega, c2=1.0):
    sensors = make_sensors(omega, c2)
    medium = Medium(omega=omega, c1=1.0, c2=c2, delta=0.0, rho_r=1.0)
    sol = forward_map(curve, medium, sensors, model=model, ppw=20.0)
    return FrequencyData(omega=omega, c2=c2, sensors=sensors, measurements=sol.far)


# ------------------------------------------------------------ residual


def test_residual_self_consistency():
    curve = unit_circle(radius=1.1)
    model = ConstantImpedance(0.8 - 0.3j)
    data = make_data(curve, model, omega=2.0)
    assert relative_residual(data, curve, model, CFG) <= 1e-8


def test_residual_formula_and_scaling():
    curve = unit_circle(radius=1.1)
    model = ConstantImpedance(0.8 - 0.3j)
    data = make_data(unit_circle(radius=1.4), model, omega=2.0)
    ev = _Evaluator(data, CFG)
    _, _, f, r = ev.solve(curve, model)
    direct = np.linalg.norm(f - ev.z) / np.linalg.norm(ev.z)
    assert r == pytest.approx(direct, rel=1e-14)
    doubled = FrequencyData(
        omega=data.omega, c2=data.c2, sensors=data.sensors,
        measurements=2.0 * data.measurements,
    )
    r2 = relative_residual(doubled, curve, model, CFG)
    expected = np.linalg.norm(f - 2 * ev.z) / np.linalg.norm(2 * ev.z)
    assert r2 == pytest.approx(expected, rel=1e-12)


def test_residual_rejects_zero_measurements():
    data = FrequencyData(
        omega=1.0, c2=1.0, sensors=make_sensors(1.0),
        measurements=np.zeros((10, 10), dtype=complex),
    )
    with pytest.raises(ValueError):
        data.measured_vector()


# ------------------------------------------------------- descent directions


def test_gn_identity_jacobian():
    r = np.array([1.0, -2.0, 0.5], dtype=complex)
    w, scale, kind = descent_direction("gauss_newton", np.eye(3, dtype=complex), r)
    assert kind == "gauss_newton" and scale == 1.0
    assert np.allclose(w, -r.real)
    w, scale, kind = descent_direction("steepest_descent", np.eye(3, dtype=complex), r)
    assert scale == pytest.approx(1.0)
    assert np.allclose(w, -r.real)


def test_gn_solves_linear_problem_in_one_step():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(12, 5)) + 1j * rng.normal(size=(12, 5))
    z = rng.normal(size=12) + 1j * rng.normal(size=12)
    p0 = rng.normal(size=5)
    w, scale, _ = descent_direction("gauss_newton", a, a @ p0 - z)
    p1 = p0 + scale * w
    stacked = np.vstack([a.real, a.imag])
    rhs = np.concatenate([z.real, z.imag])
    best = np.linalg.lstsq(stacked, rhs, rcond=None)[0]
    assert np.allclose(p1, best, atol=1e-10)


def test_sd_matches_fd_gradient():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
    z = rng.normal(size=8) + 1j * rng.normal(size=8)
    p0 = rng.normal(size=3)

    def objective(p):
        return 0.5 * np.linalg.norm(a @ p - z) ** 2

    w, _, _ = descent_direction("steepest_descent", a, a @ p0 - z)
    eps = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        fd = (objective(p0 + e) - objective(p0 - e)) / (2 * eps)
        assert -w[i] == pytest.approx(fd, abs=1e-6)


def test_gn_rank_deficient_falls_back():
    a = np.zeros((4, 2), dtype=complex)
    a[:, 0] = 1.0  # second column identically zero
    r = np.ones(4, dtype=complex)
    _, _, kind = descent_direction("gauss_newton", a, r)
    assert kind == "steepest_descent"


# ----------------------------------------------------------------- filters


def test_gaussian_damping_properties():
    band = 6
    for sigma in (1.0, 0.1, 0.01):
        g = gaussian_damping(band, sigma)
        assert g.shape == (2 * band + 1,)
        assert g[0] == 1.0  # constant mode untouched
        assert g[band + 1] == 1.0  # sine block restarts its index
        assert np.all(g <= 1.0) and np.all(g >= 0.0)
    rng = np.random.default_rng(0)
    w = rng.normal(size=2 * band + 1)
    assert np.all(np.abs(gaussian_damping(band, 0.3) * w) <= np.abs(w) + 1e-15)


def test_filter_step_pass_and_reject():
    w = np.array([8.0, 4.0, 2.0])
    out, n, payload = filter_step("step_length", w, lambda c: (True, "ok"), CFG)
    assert n == 0 and payload == "ok" and np.all(out == w)
    out, n, payload = filter_step("step_length", w, lambda c: (False, None), CFG)
    assert n is None and np.all(out == 0.0)
    # norms shrink by exactly eta each backoff
    seen = []
    def pred(c):
        seen.append(np.linalg.norm(c))
        return False, None
    filter_step("step_length", w, pred, CFG)
    base = np.linalg.norm(w)
    assert seen == pytest.approx([base / 8.0**n for n in range(CFG.filter_count + 1)])


def test_projection_idempotent_and_nonexpansive():
    rng = np.random.default_rng(11)
    x = rng.normal(scale=3.0, size=(10_000, 3))
    y = rng.normal(scale=3.0, size=(10_000, 3))
    px = np.maximum(x, 0.0)
    assert np.all(np.maximum(px, 0.0) == px)
    assert np.all(
        np.linalg.norm(px - np.maximum(y, 0.0), axis=1)
        <= np.linalg.norm(x - y, axis=1) + 1e-12
    )
    m = project_params(CurvatureAffineImpedance(1.0 + 2.0j, -0.5 - 1.0j))
    assert project_params(m) == m


# ------------------------------------------------------------ single steps


def test_domain_step_reduces_residual():
    model = ConstantImpedance(0.7 - 0.2j)
    data = make_data(unit_circle(radius=1.3), model, omega=2.0)
    state = InversionState(curve=unit_circle(radius=1.0), model=model)
    r0 = relative_residual(data, state.curve, state.model, CFG)
    domain_step(state, data, CFG)
    assert state.residual < r0
    assert state.diagnostics[-1]["accepted"]


def test_impedance_step_reduces_residual_and_respects_constraints():
    curve = unit_circle(radius=1.2)
    truth = PhysicalImpedance(np.array([0.8, 1.3, 0.5]))
    data = make_data(curve, truth, omega=2.0)
    state = InversionState(curve=curve, model=PhysicalImpedance(np.array([1.0, 1.0, 1.0])))
    r0 = relative_residual(data, state.curve, state.model, CFG)
    impedance_step(state, data, CFG)
    assert state.residual < r0
    assert np.all(state.model.beta >= 0.0)


def test_projected_gradient_toy_problem():
    # nonnegative least squares by projected Cauchy steps with backoff,
    # compared against the dedicated scipy solver
    from scipy.optimize import nnls

    rng = np.random.default_rng(7)
    a = rng.normal(size=(20, 6))
    b = rng.normal(size=20)
    ref = nnls(a, b)[0]
    p = np.ones(6)
    for _ in range(200):
        grad = a.T @ (a @ p - b)
        jg = a @ grad
        scale = (grad @ grad) / (jg @ jg)
        base = 0.5 * np.linalg.norm(a @ p - b) ** 2
        for n in range(8):
            cand = np.maximum(p - scale * grad / 8.0**n, 0.0)
            if 0.5 * np.linalg.norm(a @ cand - b) ** 2 <= base:
                p = cand
                break
    assert np.linalg.norm(p - ref) <= 1e-6


# -------------------------------------------------- full frequency solves


def test_single_frequency_noop_on_exact_data():
    curve = unit_circle(radius=1.1)
    model = ConstantImpedance(0.6 - 0.1j)
    data = make_data(curve, model, omega=2.0)
    state = InversionState(curve=curve, model=model)
    solve_single_frequency(state, data, CFG)
    assert state.residual <= 1e-8
    assert len(state.history) == 1  # terminated before any iteration


def test_single_frequency_monotone_and_capped():
    truth_curve = unit_circle(radius=1.35)
    truth_model = ConstantImpedance(0.9 - 0.3j)
    data = make_data(truth_curve, truth_model, omega=2.0)
    state = InversionState(
        curve=unit_circle(radius=1.0), model=ConstantImpedance(0.5 - 0.1j)
    )
    cfg = OptimizerConfig(node_floor=64, max_iterations=8)
    solve_single_frequency(state, data, cfg)
    hist = np.array(state.history)
    assert len(hist) <= cfg.max_iterations + 1
    assert np.all(np.diff(hist) <= 1e-12)
    assert hist[-1] < hist[0]


def test_continuation_circle_to_circle():
    truth_curve = unit_circle(radius=1.25)
    truth_model = PhysicalImpedance(np.array([0.9, 1.2, 0.7]))
    dataset = []
    for omega in (1.0, 1.5, 2.0):
        dataset.append(make_data(truth_curve, truth_model, omega))
        # keep the implied dissipation constant across the data too
        truth_model = PhysicalImpedance(
            truth_model.beta * np.array([omega / (omega + 0.5), 1.0, 1.0])
        )
    logs = []
    traj = continuation_solve(
        dataset,
        init_curve=unit_circle(radius=1.0),
        init_model=PhysicalImpedance(np.array([1.0, 1.0, 1.0])),
        config=OptimizerConfig(node_floor=64),
        log=logs.append,
    )
    assert len(traj) == 3
    for state in traj:
        assert state.residual <= 2e-3
        hist = np.array(state.history)
        assert np.all(np.diff(hist) <= 1e-12)
    assert traj[-1].residual <= 1e-3
    assert logs and all("omega" in entry for entry in logs)


def test_continuation_requires_increasing_frequencies():
    data = make_data(unit_circle(), ConstantImpedance(0.5), 2.0)
    with pytest.raises(ValueError):
        continuation_solve([data, data])


def test_impedance_gn_reverts_to_constant_part_on_circle():
    # on a circle the curvature is constant, so the parameter directions of
    # curvature-dependent models collapse onto constant impedance shifts and
    # the full Gauss-Newton system is ill-conditioned; the guard must then
    # restrict the update to the constant-part parameters
    cfg = OptimizerConfig(node_floor=64, impedance_gauss_newton=True)
    curve = unit_circle(radius=1.2)
    truth = PhysicalImpedance(np.array([0.8, 1.3, 0.5]))
    data = make_data(curve, truth, omega=2.0)
    state = InversionState(
        curve=curve, model=PhysicalImpedance(np.array([1.0, 1.0, 1.0]))
    )
    r0 = relative_residual(data, state.curve, state.model, cfg)
    impedance_step(state, data, cfg)
    diag = state.diagnostics[-1]
    assert diag["accepted"]
    assert diag.get("gn_reverted_to_constant") is True
    assert state.residual < r0
    # the curvature coefficient is outside the restricted update
    assert state.model.beta[2] == 1.0
    assert np.all(state.model.beta >= 0.0)


def test_impedance_gn_full_step_when_identifiable():
    # an eccentric ellipse has strongly varying curvature, so the full
    # Gauss-Newton step applies and fits the generating parameters closely
    from impscat.geometry import FourierCurve

    curve = FourierCurve(
        length=2.0 * np.pi,
        a1=np.array([0.0, 1.8]),
        b1=np.array([0.0, 0.0]),
        a2=np.array([0.0, 0.0]),
        b2=np.array([0.0, 0.9]),
    )
    cfg = OptimizerConfig(node_floor=64, impedance_gauss_newton=True)
    truth = CurvatureAffineImpedance(0.6 - 0.2j, 0.3 - 0.1j)
    data = make_data(curve, truth, omega=2.0)
    state = InversionState(
        curve=curve, model=CurvatureAffineImpedance(1.0 + 0.0j, 0.0 + 0.0j)
    )
    for _ in range(6):
        impedance_step(state, data, cfg)
    assert state.residual < 1e-3
