"""Single-frequency alternating minimization and continuation in frequency.

Each frequency solves

    min over (shape, impedance) of ||F(shape, impedance) - measurements||

by alternating a shape update (Gauss-Newton and steepest-descent candidates,
each passed through step-length and Gaussian mode filters, best residual
wins) with a projected steepest-descent impedance update.  Accepted steps
never increase the residual and never leave the admissible set (simple
curve, bounded high-mode bending energy, impedance constraints).

The continuation driver sweeps the frequencies in ascending order, warm
starting each solve from the previous answer.  Discretization sizes (nodes,
shape band, impedance band) are re-derived from the current curve length at
every frequency.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .forward import (
    IllConditionedError,
    ImpedanceSolver,
    Medium,
    SensorGeometry,
    nodes_for_wavenumber,
)
from .frechet import domain_jacobian, impedance_jacobian
from .geometry import (
    FourierCurve,
    NormalPerturbation,
    apply_normal_update,
    constraint_check,
    sample_curve,
)
from .models import (
    CurvatureAffineImpedance,
    FourierImpedance,
    PhysicalImpedance,
    eval_impedance,
    pack_params,
    project_params,
    unpack_params,
)

__all__ = [
    "OptimizerConfig",
    "FrequencyData",
    "InversionState",
    "relative_residual",
    "descent_direction",
    "gaussian_damping",
    "filter_step",
    "domain_step",
    "impedance_step",
    "solve_single_frequency",
    "continuation_solve",
    "unit_circle",
]


@dataclass(frozen=True)
class OptimizerConfig:
    tol_residual: float = 1e-4
    tol_step_shape: float = 1e-4
    tol_step_impedance: float = 1e-4
    tol_step_residual: float = 1e-4
    max_iterations: int = 40
    filter_eta: float = 8.0
    filter_sigma: float = 0.1
    filter_count: int = 3
    curvature_energy_fraction: float = 0.9
    node_floor: int = 300
    impedance_gauss_newton: bool = False
    gn_condition_limit: float = 1e8
    freeze_impedance: bool = False  # shape-only inversion (sound-hard runs)

    def node_count(self, omega: float, length: float, c2: float) -> int:
        return nodes_for_wavenumber(length, omega / c2, ppw=10.0, floor=self.node_floor)

    def shape_band(self, omega: float, length: float, c2: float) -> int:
        return max(1, int(np.floor(omega * length / (c2 * np.pi))))

    def impedance_band(self, omega: float, length: float, c2: float) -> int:
        return max(1, self.shape_band(omega, length, c2) // 2)


@dataclass(frozen=True)
class FrequencyData:
    """Measurements at one frequency: receptor readings per incident direction."""

    omega: float
    c2: float
    sensors: SensorGeometry
    measurements: np.ndarray  # (n_d, n_r) complex
    mask: np.ndarray | None = None  # bool, same shape; True = usable entry

    def measured_vector(self) -> np.ndarray:
        vec = np.asarray(self.measurements).ravel()
        if self.mask is not None:
            vec = vec[np.asarray(self.mask).ravel()]
        if not np.any(vec):
            raise ValueError("all-zero measurements")
        return vec


@dataclass
class InversionState:
    curve: FourierCurve
    model: object
    residual: float = np.inf
    history: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    frequency_index: int = 0


def unit_circle(center=(0.0, 0.0), radius: float = 1.0) -> FourierCurve:
    return FourierCurve(
        length=2.0 * np.pi,
        a1=np.array([2.0 * center[0], radius]),
        b1=np.array([0.0, 0.0]),
        a2=np.array([2.0 * center[1], 0.0]),
        b2=np.array([0.0, radius]),
    )


class _Evaluator:
    """Forward evaluations against one frequency slice of the data."""

    def __init__(self, data: FrequencyData, config: OptimizerConfig):
        self.data = data
        self.config = config
        self.medium = Medium(omega=data.omega, c1=1.0, c2=data.c2, delta=0.0, rho_r=1.0)
        self.z = data.measured_vector()
        self.z_norm = np.linalg.norm(self.z)
        self._flat_mask = (
            None if data.mask is None else np.asarray(data.mask).ravel()
        )
        # operator assembly dominates the runtime, so solvers are cached per
        # curve instance (impedance changes only refactor the dense system)
        self._solver_cache: dict[int, tuple] = {}
        self._cache_limit = 8

    def restrict(self, flat_rows: np.ndarray) -> np.ndarray:
        if self._flat_mask is None:
            return flat_rows
        return flat_rows[self._flat_mask]

    def _solver_for(self, curve: FourierCurve):
        key = id(curve)
        hit = self._solver_cache.get(key)
        if hit is not None and hit[0] is curve:
            return hit[1], hit[2]
        n = self.config.node_count(self.data.omega, curve.length, self.data.c2)
        samples = sample_curve(curve, n)
        solver = ImpedanceSolver(samples, self.medium)
        if len(self._solver_cache) >= self._cache_limit:
            self._solver_cache.pop(next(iter(self._solver_cache)))
        self._solver_cache[key] = (curve, samples, solver)
        return samples, solver

    def solve(self, curve: FourierCurve, model):
        samples, solver = self._solver_for(curve)
        lam = eval_impedance(
            model, samples.s, samples.curvature, self.medium.k2, curve.length
        )
        sol = solver.solve(self.data.sensors, lam=lam)
        f = self.restrict(sol.far.ravel())
        residual = np.linalg.norm(f - self.z) / self.z_norm
        return solver, sol, f, residual

    def residual_of(self, curve: FourierCurve, model) -> float:
        return self.solve(curve, model)[3]


def relative_residual(data: FrequencyData, curve: FourierCurve, model, config=None) -> float:
    """sqrt(sum |prediction - measured|^2 / sum |measured|^2) over usable entries."""
    return _Evaluator(data, config or OptimizerConfig()).residual_of(curve, model)


def descent_direction(kind: str, jacobian: np.ndarray, misfit: np.ndarray):
    """Direction and step scale from the complex Jacobian and misfit f - z.

    Gauss-Newton solves the real-stacked least squares for the full step
    (scale 1); steepest descent returns the negative gradient with the
    Cauchy point scale.  A rank-deficient Gauss-Newton system falls back to
    steepest descent, reported through the returned kind.
    """
    grad = np.real(jacobian.conj().T @ misfit)
    if kind == "gauss_newton":
        a = np.vstack([jacobian.real, jacobian.imag])
        b = np.concatenate([(-misfit).real, (-misfit).imag])
        w, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        if rank == jacobian.shape[1]:
            return w, 1.0, "gauss_newton"
        kind = "steepest_descent"
    if kind != "steepest_descent":
        raise ValueError(f"unknown direction kind {kind!r}")
    gnorm2 = float(grad @ grad)
    if gnorm2 == 0.0:
        return np.zeros_like(grad), 0.0, "steepest_descent"
    jg = jacobian @ grad
    scale = gnorm2 / float(np.real(np.vdot(jg, jg)))
    return -grad, scale, "steepest_descent"


def gaussian_damping(band: int, sigma: float) -> np.ndarray:
    """Mode-damping diagonal for a (1, cos.., sin..) coefficient vector.

    Within each block the entry at 1-based position m is
    exp(-(m-1)^2 / (sigma^2 band^2)); the sine block restarts the count.
    """
    denom = sigma * sigma * band * band
    cos_part = np.exp(-np.arange(0, band + 1) ** 2 / denom)
    sin_part = np.exp(-np.arange(0, band) ** 2 / denom)
    return np.concatenate([cos_part, sin_part])


def filter_step(kind: str, w: np.ndarray, predicate, config: OptimizerConfig, band=None):
    """Backoff loop: weaken the step until the acceptance predicate passes.

    Returns (filtered step, n_filt, payload from the predicate); a step of
    zero with n_filt = None means every attempt was rejected.
    """
    for n in range(config.filter_count + 1):
        if kind == "step_length":
            cand = w / config.filter_eta**n
        elif kind == "gaussian":
            cand = gaussian_damping(band, config.filter_sigma**n) * w
        else:
            raise ValueError(f"unknown filter kind {kind!r}")
        ok, payload = predicate(cand)
        if ok:
            return cand, n, payload
    return np.zeros_like(w), None, None


def _shape_predicate(evaluator, state, band, base_residual):
    """Candidate acceptance: admissible curve and non-increasing residual."""

    def predicate(w):
        if not np.any(w):
            return False, None
        curve = apply_normal_update(state.curve, NormalPerturbation(w, band))
        ok, diag = constraint_check(
            curve, band, evaluator.config.curvature_energy_fraction
        )
        if not ok:
            return False, None
        try:
            residual = evaluator.residual_of(curve, state.model)
        except IllConditionedError:
            return False, None
        if residual > base_residual:
            return False, None
        return True, (curve, residual)

    return predicate


def domain_step(
    state: InversionState,
    data: FrequencyData,
    config: OptimizerConfig,
    evaluator: _Evaluator | None = None,
):
    """One accepted shape update (or recorded stagnation)."""
    evaluator = evaluator or _Evaluator(data, config)
    solver, sol, f, base_residual = evaluator.solve(state.curve, state.model)
    band = config.shape_band(data.omega, state.curve.length, data.c2)
    jac = domain_jacobian(solver, sol, state.model, data.sensors, band).matrix
    jac = evaluator.restrict(jac)
    misfit = f - evaluator.z
    predicate = _shape_predicate(evaluator, state, band, base_residual)

    candidates = []
    for dir_kind in ("gauss_newton", "steepest_descent"):
        w, scale, used = descent_direction(dir_kind, jac, misfit)
        step = scale * w
        for filt in ("step_length", "gaussian"):
            cand, n_filt, payload = filter_step(filt, step, predicate, config, band=band)
            if payload is not None:
                candidates.append((payload[1], used, filt, n_filt, cand, payload[0]))
    diag = {"step": "domain", "band": band, "base_residual": base_residual}
    if not candidates:
        state.residual = base_residual
        diag.update(accepted=False)
        state.diagnostics.append(diag)
        return state
    # min residual; python sort is stable, so listing GN before SD and
    # step-length before gaussian implements the tie-break preference
    residual, used, filt, n_filt, w_acc, curve = min(candidates, key=lambda c: c[0])
    state.curve = curve
    state.residual = residual
    diag.update(
        accepted=True,
        direction=used,
        filter=filt,
        n_filt=n_filt,
        residual=residual,
        step_norm=float(np.linalg.norm(w_acc)),
    )
    state.diagnostics.append(diag)
    return state


def _project_vector(model, p: np.ndarray) -> np.ndarray:
    return pack_params(project_params(unpack_params(model, p)))


def _constant_part_columns(model):
    """Flat-parameter indices steering the constant part of the impedance.

    Used when the full Gauss-Newton system is ill-conditioned; returns None
    for models whose parameters are already all-constant.
    """
    if isinstance(model, FourierImpedance):
        band = model.band
        return np.array([band, 2 * band + 1 + band])
    if isinstance(model, CurvatureAffineImpedance):
        return np.array([0, 1])
    if isinstance(model, PhysicalImpedance):
        return np.array([0, 1])
    return None


def impedance_step(
    state: InversionState,
    data: FrequencyData,
    config: OptimizerConfig,
    evaluator: _Evaluator | None = None,
):
    """One accepted impedance update (or recorded stagnation)."""
    if config.freeze_impedance:
        state.diagnostics.append({"step": "impedance", "accepted": False, "frozen": True})
        return state
    evaluator = evaluator or _Evaluator(data, config)
    solver, sol, f, base_residual = evaluator.solve(state.curve, state.model)
    jac = evaluator.restrict(
        impedance_jacobian(solver, sol, state.model, data.sensors).matrix
    )
    misfit = f - evaluator.z
    p0 = pack_params(state.model)
    diag = {"step": "impedance", "base_residual": base_residual}

    if config.impedance_gauss_newton:
        a = np.vstack([jac.real, jac.imag])
        sv = np.linalg.svd(a, compute_uv=False)
        keep = None
        if sv[-1] == 0 or sv[0] / sv[-1] > config.gn_condition_limit:
            # ill-conditioned full system (e.g. curvature-dependent models
            # on a nearly circular curve, where the parameter directions
            # collapse onto constant impedance shifts): restrict the update
            # to the parameters of the constant part of the impedance
            keep = _constant_part_columns(state.model)
        if keep is not None:
            sub = jac[:, keep]
            w_sub, scale, _ = descent_direction("gauss_newton", sub, misfit)
            w = np.zeros_like(p0)
            w[keep] = w_sub
            diag["gn_reverted_to_constant"] = True
        else:
            w, scale, _ = descent_direction("gauss_newton", jac, misfit)
    else:
        w, scale, _ = descent_direction("steepest_descent", jac, misfit)

    accepted = False
    for n in range(config.filter_count + 1):
        p = _project_vector(state.model, p0 + scale * w / config.filter_eta**n)
        model = unpack_params(state.model, p)
        try:
            residual = evaluator.residual_of(state.curve, model)
        except IllConditionedError:
            continue
        if residual <= base_residual and np.any(p != p0):
            state.model = model
            state.residual = residual
            diag.update(accepted=True, n_filt=n, residual=residual)
            accepted = True
            break
    if not accepted:
        state.residual = base_residual
        diag.update(accepted=False)
    state.diagnostics.append(diag)
    return state


def solve_single_frequency(
    state: InversionState,
    data: FrequencyData,
    config: OptimizerConfig | None = None,
    log=None,
) -> InversionState:
    """Alternate shape and impedance updates at one frequency until done."""
    config = config or OptimizerConfig()
    evaluator = _Evaluator(data, config)
    state.residual = evaluator.residual_of(state.curve, state.model)
    state.history.append(state.residual)
    for it in range(config.max_iterations):
        if state.residual <= config.tol_residual:
            break
        prev_residual = state.residual
        prev_p = pack_params(state.model)
        n_diag = len(state.diagnostics)
        domain_step(state, data, config, evaluator)
        impedance_step(state, data, config, evaluator)
        state.history.append(state.residual)
        if log is not None:
            for d in state.diagnostics[n_diag:]:
                log(dict(d, omega=data.omega, iteration=it))
        shape_diag = state.diagnostics[n_diag]
        shape_change = (
            shape_diag.get("step_norm", 0.0) / max(state.curve.length / (2 * np.pi), 1e-14)
        )
        p_new = pack_params(state.model)
        if p_new.size == prev_p.size:
            imp_change = np.linalg.norm(p_new - prev_p) / max(
                np.linalg.norm(prev_p), 1e-14
            )
        else:
            imp_change = np.inf
        res_change = abs(state.residual - prev_residual) / max(prev_residual, 1e-14)
        if (
            shape_change < config.tol_step_shape
            and imp_change < config.tol_step_impedance
            and res_change < config.tol_step_residual
        ):
            break
    return state


def _warm_start_model(model, omega_prev: float, omega_new: float, fs_band: int):
    """Carry the impedance across frequencies.

    The first parameter of the physical model represents delta/omega, so it
    is rescaled to keep the implied dissipation fixed; trigonometric
    impedances are zero-padded to the new band.
    """
    if isinstance(model, PhysicalImpedance):
        beta = model.beta.copy()
        beta[0] *= omega_prev / omega_new
        return PhysicalImpedance(beta)
    if isinstance(model, FourierImpedance) and fs_band > model.band:
        return model.padded(fs_band)
    return model


def continuation_solve(
    dataset: list[FrequencyData],
    init_curve: FourierCurve | None = None,
    init_model=None,
    config: OptimizerConfig | None = None,
    log=None,
) -> list[InversionState]:
    """Sweep the frequencies in ascending order with warm starts."""
    config = config or OptimizerConfig()
    omegas = [d.omega for d in dataset]
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise ValueError("frequencies must be strictly increasing")
    if init_curve is None:
        centroid = dataset[0].sensors.receptors.mean(axis=0)
        init_curve = unit_circle(center=tuple(centroid))
    if init_model is None:
        init_model = PhysicalImpedance(np.array([1.0, 1.0, 1.0]))
    trajectory: list[InversionState] = []
    curve, model = init_curve, init_model
    prev_omega = None
    for j, data in enumerate(dataset):
        if prev_omega is not None:
            fs_band = config.impedance_band(data.omega, curve.length, data.c2)
            model = _warm_start_model(model, prev_omega, data.omega, fs_band)
        state = InversionState(curve=curve, model=model, frequency_index=j)
        try:
            solve_single_frequency(state, data, config, log=log)
        except Exception as exc:  # noqa: BLE001 - continuation must survive
            state.diagnostics.append({"step": "frequency", "error": repr(exc)})
            trajectory.append(state)
            prev_omega = data.omega
            continue
        trajectory.append(state)
        curve, model = state.curve, state.model
        prev_omega = data.omega
    return trajectory
