"""Frechet derivatives of the impedance forward map.

Both derivative directions reduce to solving the original boundary system
with a new right-hand side, so each column of a Jacobian costs only one
back-substitution on the already-factored operator:

* impedance direction g: the derivative field v satisfies the radiating
  exterior Helmholtz problem with dn(v) + i*k2*lambda*v = -i*k2*g*u on the
  curve, u being the total field of the base solve;
* shape direction h (normal speed): the same boundary operator with
  dn(v) + i*k2*lambda*v = k2^2 h u + d/ds(h du/ds)
                          + (H - i*k2*lambda) h dn(u)
  (H the signed curvature; for lambda = 0 this is the classical
  sound-hard shape derivative), plus, when lambda depends on the
  curvature, the induced impedance
  perturbation -i*k2*(dlambda/dH)*H'[h]*u with H'[h] the linearized
  curvature.

Jacobians stack receptor readings for all incident directions row-wise
(direction-major) and parameter directions column-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import ForwardSolution, ImpedanceSolver, SensorGeometry
from .geometry import curvature_frechet
from .models import impedance_curvature_gradient, impedance_param_gradient

__all__ = [
    "JacobianBlock",
    "impedance_direction_far",
    "shape_direction_far",
    "impedance_jacobian",
    "domain_jacobian",
    "shape_basis",
]


@dataclass(frozen=True)
class JacobianBlock:
    """Complex Jacobian, shape (n_directions * n_receptors, n_params)."""

    matrix: np.ndarray

    @property
    def n_params(self) -> int:
        return self.matrix.shape[1]


def _row_spectral_derivative(rows: np.ndarray, period: float) -> np.ndarray:
    n = rows.shape[-1]
    freqs = np.fft.fftfreq(n, d=period / n) * 2.0 * np.pi
    spec = np.fft.fft(rows, axis=-1) * (1j * freqs)
    if n % 2 == 0:
        spec[..., n // 2] = 0.0
    return np.fft.ifft(spec, axis=-1)


def _solve_far(solver: ImpedanceSolver, rhs: np.ndarray, receptors: np.ndarray):
    """Far readings of the derivative fields for stacked right-hand sides.

    ``rhs`` has shape (..., n); the leading axes are preserved.
    """
    shape = rhs.shape
    psi = solver.solve_densities(rhs.reshape(-1, shape[-1]).T).T
    far = solver.far_field(psi, receptors)
    return far.reshape(shape[:-1] + (far.shape[-1],))


def impedance_direction_far(
    solver: ImpedanceSolver,
    solution: ForwardSolution,
    g: np.ndarray,
    sensors: SensorGeometry,
) -> np.ndarray:
    """Derivative of the receptor data in the impedance direction g(s)."""
    k2 = solver.medium.k2
    rhs = -1j * k2 * np.asarray(g)[None, :] * solution.boundary_u
    return _solve_far(solver, rhs, sensors.receptors)


def _shape_rhs(solver, solution, model, h_rows: np.ndarray) -> np.ndarray:
    """Boundary data of the shape-derivative problem, (n_h, n_d, n)."""
    samples = solver.samples
    med = solver.medium
    k2 = med.k2
    length = samples.curve.length
    speed = samples.speed
    lam = solver.lam
    curvature = samples.curvature
    u = solution.boundary_u  # (n_d, n)
    dnu = solution.boundary_dnu
    du_ds = _row_spectral_derivative(u, length) / speed[None, :]

    h_rows = np.atleast_2d(h_rows)
    rhs = np.empty((len(h_rows), *u.shape), dtype=complex)
    dl_dh = impedance_curvature_gradient(model, k2)
    for j, h in enumerate(h_rows):
        transport = (
            _row_spectral_derivative(h[None, :] * du_ds, length) / speed[None, :]
        )
        term = (
            k2 * k2 * h[None, :] * u
            + transport
            + ((curvature - 1j * k2 * lam) * h)[None, :] * dnu
        )
        if dl_dh != 0:
            dlam = dl_dh * curvature_frechet(samples.curve, h)
            term = term - 1j * k2 * dlam[None, :] * u
        rhs[j] = term
    return rhs


def shape_direction_far(
    solver: ImpedanceSolver,
    solution: ForwardSolution,
    model,
    h: np.ndarray,
    sensors: SensorGeometry,
) -> np.ndarray:
    """Derivative of the receptor data for a normal perturbation h(s)."""
    rhs = _shape_rhs(solver, solution, model, h)[0]
    return _solve_far(solver, rhs, sensors.receptors)


def impedance_jacobian(
    solver: ImpedanceSolver,
    solution: ForwardSolution,
    model,
    sensors: SensorGeometry,
) -> JacobianBlock:
    """Columns d(data)/d(p_i) for the model's flat real parameter vector."""
    samples = solver.samples
    k2 = solver.medium.k2
    grads = impedance_param_gradient(
        model, samples.s, samples.curvature, k2, samples.curve.length
    )  # (n_p, n)
    rhs = -1j * k2 * grads[:, None, :] * solution.boundary_u[None, :, :]
    far = _solve_far(solver, rhs, sensors.receptors)  # (n_p, n_d, n_r)
    return JacobianBlock(far.reshape(len(grads), -1).T)


def shape_basis(samples, band: int) -> np.ndarray:
    """Normal-perturbation basis rows (1, cos, .., sin, ..) at the nodes."""
    s = samples.s
    length = samples.curve.length
    m = np.arange(1, band + 1)
    phase = 2.0 * np.pi * np.outer(m, s) / length
    return np.vstack([np.ones_like(s), np.cos(phase), np.sin(phase)])


def domain_jacobian(
    solver: ImpedanceSolver,
    solution: ForwardSolution,
    model,
    sensors: SensorGeometry,
    band: int,
) -> JacobianBlock:
    """Columns d(data)/d(w_j) for the trigonometric normal-update basis.

    The solver must still be factored at the impedance values that produced
    ``solution``; solving with a different impedance in between refactors
    the system and skews the columns.
    """
    basis = shape_basis(solver.samples, band)
    rhs = _shape_rhs(solver, solution, model, basis)
    far = _solve_far(solver, rhs, sensors.receptors)  # (n_w, n_d, n_r)
    return JacobianBlock(far.reshape(len(basis), -1).T)
