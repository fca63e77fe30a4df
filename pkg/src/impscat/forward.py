"""Forward scattering solvers for a penetrable dissipative obstacle.

Two solvers share the layer-operator toolkit:

* ``TransmissionSolver``: the exact two-domain transmission problem, used to
  manufacture measurement data.  A pair of densities (mu, sigma) represents
  the field on both sides of the interface; the 2n x 2n system couples the
  Dirichlet and weighted-flux matching conditions.
* ``ImpedanceSolver``: the one-domain surrogate in which the interior is
  replaced by the absorbing boundary condition dn(u) + i*k2*lambda*u = 0.
  The scattered field is a combined single/double layer with a smoothing
  single layer at wavenumber i*k2 inside the double layer, which keeps the
  system second kind and free of interior resonances.

Operator assembly is the expensive part, so each solver caches the operator
set for a fixed (curve, frequency) and exposes cheap re-solves when only the
impedance changes.  LU factors are kept for reuse by derivative solves.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .geometry import CurveSamples, FourierCurve, sample_curve
from .layerpot import QuadratureRule, build_operator_set, potential_matrix
from .models import ConstantImpedance, eval_impedance

__all__ = [
    "Medium",
    "SensorGeometry",
    "ForwardSolution",
    "ImpedanceSolver",
    "TransmissionSolver",
    "forward_map",
    "nodes_for_wavenumber",
    "IllConditionedError",
    "SolveStats",
    "solve_stats",
]

CONDITION_LIMIT = 1e13


class IllConditionedError(RuntimeError):
    """Raised when the estimated condition number exceeds CONDITION_LIMIT."""


@dataclass
class SolveStats:
    """Running count of dense factorizations and triangular solves."""

    factorizations: int = 0
    solves: int = 0

    def reset(self):
        self.factorizations = 0
        self.solves = 0


solve_stats = SolveStats()


@dataclass(frozen=True)
class Medium:
    """Physical constants of the exterior (2) and interior (1) media.

    ``rho_r`` is the interior/exterior density ratio; ``delta`` the interior
    dissipation.  Derived quantities follow the dissipative-medium model:
    the interior wavenumber picks up a positive imaginary part.
    """

    omega: float
    c1: float
    c2: float
    delta: float
    rho_r: float

    def __post_init__(self):
        if min(self.omega, self.c1, self.c2, self.rho_r) <= 0:
            raise ValueError("omega, c1, c2, rho_r must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")

    @property
    def k2(self) -> float:
        return self.omega / self.c2

    @property
    def zeta(self) -> complex:
        return 1.0 + 1j * self.delta / self.omega

    @property
    def k1(self) -> complex:
        return self.omega * cmath.sqrt(self.zeta) / self.c1

    @property
    def c_r(self) -> float:
        return self.c1 / self.c2

    @property
    def refractive_index(self) -> complex:
        return cmath.sqrt(self.zeta) / self.c_r

    @property
    def alpha(self) -> complex:
        return 1.0 / (self.rho_r * self.zeta)

    @property
    def b1(self) -> complex:
        return self.alpha

    @property
    def b2(self) -> float:
        return 1.0

    @property
    def q(self) -> complex:
        return 0.5 * (1.0 / self.b1 + 1.0 / self.b2)


@dataclass(frozen=True)
class SensorGeometry:
    """Unit incident plane-wave directions and receptor positions."""

    directions: np.ndarray  # (n_d, 2)
    receptors: np.ndarray  # (n_r, 2)

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        r = np.atleast_2d(np.asarray(self.receptors, dtype=float))
        norms = np.linalg.norm(d, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError("incident directions must be unit vectors")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "receptors", r)

    @property
    def n_directions(self) -> int:
        return len(self.directions)

    @property
    def n_receptors(self) -> int:
        return len(self.receptors)


@dataclass
class ForwardSolution:
    """Scattered field at the receptors plus boundary traces of the total field."""

    far: np.ndarray  # (n_d, n_r)
    boundary_u: np.ndarray | None = None  # (n_d, n) total field on the curve
    boundary_dnu: np.ndarray | None = None  # (n_d, n)
    densities: np.ndarray | None = None


def nodes_for_wavenumber(length: float, k2: float, ppw: float = 10.0, floor: int = 64) -> int:
    """Node count giving at least ``ppw`` points per exterior wavelength."""
    n = int(np.ceil(ppw * k2 * length / (2.0 * np.pi)))
    return max(n, floor, 2 * QuadratureRule.alpert16().exclude + 1)


def _incident(k2: float, directions: np.ndarray, samples: CurveSamples):
    """Plane-wave traces on the curve: u_inc and dn(u_inc), shape (n_d, n)."""
    phase = samples.positions @ directions.T  # (n, n_d)
    u = np.exp(1j * k2 * phase).T
    dn = 1j * k2 * (samples.normals @ directions.T).T * u
    return u, dn


def _factor(a: np.ndarray):
    lu, piv = lu_factor(a)
    solve_stats.factorizations += 1
    gecon = get_lapack_funcs("gecon", (a,))
    anorm = np.linalg.norm(a, 1)
    rcond, _ = gecon(lu, anorm, norm="1")
    if rcond == 0 or 1.0 / rcond > CONDITION_LIMIT:
        raise IllConditionedError(
            f"boundary system condition estimate {1.0 / max(rcond, 1e-300):.2e} "
            f"exceeds {CONDITION_LIMIT:.0e}"
        )
    return lu, piv


class ImpedanceSolver:
    """Absorbing-boundary solver with cached operators for one (curve, omega).

    The system matrix splits into an impedance-independent part and a part
    premultiplied by diag(lambda), so changing the impedance costs one dense
    matrix add and refactorization, not a re-assembly.
    """

    def __init__(self, samples: CurveSamples, medium: Medium):
        self.samples = samples
        self.medium = medium
        k2 = medium.k2
        ks = 1j * abs(k2)  # smoothing wavenumber for the combined field
        n = samples.n
        s2, d2, k_2, si, ki, td = (
            op.matrix
            for op in build_operator_set(
                [
                    ("S", k2),
                    ("D", k2),
                    ("K", k2),
                    ("S", ks),
                    ("K", ks),
                    ("Tdiff", k2, ks),
                ],
                samples,
            )
        )
        eye = np.eye(n)
        # dn-trace of the representation (S + i k2 D S_i) phi, using the
        # Calderon identity T_i S_i = -I/4 + K_i^2 to remove the lone T
        self._dn_trace = (
            -0.5 * eye + k_2 + 1j * k2 * (td @ si - 0.25 * eye + ki @ ki)
        )
        # Dirichlet trace of the same representation
        self._u_trace = s2 + 1j * k2 * (d2 @ si + 0.5 * si)
        self._si = si
        self._k2 = k2
        self._lu = None
        self._lam = None
        self._receptor_cache: dict = {}

    @property
    def lam(self) -> np.ndarray | None:
        """Impedance node values of the currently factored system."""
        return self._lam

    def factor(self, lam: np.ndarray):
        """Assemble and factor the system for impedance node values lam."""
        lam = np.asarray(lam, dtype=complex)
        a = self._dn_trace + 1j * self._k2 * lam[:, None] * self._u_trace
        self._lu = _factor(a)
        self._lam = lam
        return self

    def solve(self, sensors: SensorGeometry, lam: np.ndarray | None = None) -> ForwardSolution:
        if lam is not None:
            self.factor(lam)
        if self._lu is None:
            raise RuntimeError("call factor() before solve()")
        k2 = self._k2
        u_inc, dn_inc = _incident(k2, sensors.directions, self.samples)
        rhs = -(dn_inc + 1j * k2 * self._lam[None, :] * u_inc)
        phi = self.solve_densities(rhs.T).T  # (n_d, n)
        return self._solution(phi, sensors, u_inc, dn_inc)

    def solve_densities(self, rhs_columns: np.ndarray) -> np.ndarray:
        """Back-substitute extra right-hand sides (columns) on the stored LU."""
        solve_stats.solves += 1
        return lu_solve(self._lu, rhs_columns)

    def _solution(self, phi, sensors, u_inc, dn_inc) -> ForwardSolution:
        far = self.far_field(phi, sensors.receptors)
        u = u_inc + phi @ self._u_trace.T
        dnu = dn_inc + phi @ self._dn_trace.T
        return ForwardSolution(far=far, boundary_u=u, boundary_dnu=dnu, densities=phi)

    def far_field(self, phi: np.ndarray, receptors: np.ndarray) -> np.ndarray:
        """Scattered field at receptors for densities phi of shape (n_d, n)."""
        k2 = self._k2
        key = receptors.tobytes()
        if key not in self._receptor_cache:
            self._receptor_cache[key] = (
                potential_matrix("S", k2, self.samples, receptors),
                potential_matrix("D", k2, self.samples, receptors),
            )
        ps, pd = self._receptor_cache[key]
        return phi @ ps.T + 1j * k2 * (phi @ self._si.T) @ pd.T

    def boundary_traces(self, phi: np.ndarray):
        """Scattered-field traces (u, dnu) on the curve for given densities."""
        return phi @ self._u_trace.T, phi @ self._dn_trace.T


class TransmissionSolver:
    """Two-domain transmission solver for one (curve, medium)."""

    def __init__(self, samples: CurveSamples, medium: Medium):
        self.samples = samples
        self.medium = medium
        k1, k2 = medium.k1, medium.k2
        b1, b2, q = medium.b1, medium.b2, medium.q
        n = samples.n
        s1, s2, d1, d2, ka, kb, td = (
            op.matrix
            for op in build_operator_set(
                [
                    ("S", k1),
                    ("S", k2),
                    ("D", k1),
                    ("D", k2),
                    ("K", k1),
                    ("K", k2),
                    ("Tdiff", k2, k1),
                ],
                samples,
            )
        )
        eye = np.eye(n)
        a11 = eye + d2 / (q * b2) - d1 / (q * b1)
        a12 = -(s2 / (q * b2) - s1 / (q * b1))
        a21 = td
        a22 = eye - (kb - ka)
        self._a = np.block([[a11, a12], [a21, a22]])
        self._lu = _factor(self._a)
        self._k2 = k2

    def solve(self, sensors: SensorGeometry) -> ForwardSolution:
        med = self.medium
        u_inc, dn_inc = _incident(self._k2, sensors.directions, self.samples)
        rhs = np.vstack([-u_inc.T / med.q, -med.b2 * dn_inc.T])
        solve_stats.solves += 1
        sol = lu_solve(self._lu, rhs)
        n = self.samples.n
        mu, sigma = sol[:n].T, sol[n:].T  # (n_d, n) each
        ps = potential_matrix("S", self._k2, self.samples, sensors.receptors)
        pd = potential_matrix("D", self._k2, self.samples, sensors.receptors)
        far = (mu @ pd.T - sigma @ ps.T) / med.b2
        return ForwardSolution(far=far, densities=np.hstack([mu, sigma]))

    def interior_field(self, densities: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """Total field inside the obstacle, (n_d, n_targets)."""
        med = self.medium
        n = self.samples.n
        mu, sigma = densities[:, :n], densities[:, n:]
        ps = potential_matrix("S", med.k1, self.samples, targets)
        pd = potential_matrix("D", med.k1, self.samples, targets)
        return (mu @ pd.T - sigma @ ps.T) / med.b1


def forward_map(
    curve: FourierCurve,
    medium: Medium,
    sensors: SensorGeometry,
    model=None,
    kind: str = "impedance",
    node_count: int | None = None,
    ppw: float = 10.0,
) -> ForwardSolution:
    """One-call forward solve from a curve description.

    ``kind`` selects the transmission solver, the impedance solver with the
    given model, or the sound-hard (Neumann) limit lambda = 0.
    """
    if node_count is None:
        node_count = nodes_for_wavenumber(curve.length, medium.k2, ppw=ppw)
    samples = sample_curve(curve, node_count)
    if kind == "transmission":
        return TransmissionSolver(samples, medium).solve(sensors)
    if kind == "neumann":
        model = ConstantImpedance(0.0)
    elif kind != "impedance":
        raise ValueError(f"unknown forward problem kind {kind!r}")
    if model is None:
        raise ValueError("impedance forward solve needs an impedance model")
    lam = eval_impedance(model, samples.s, samples.curvature, medium.k2, curve.length)
    return ImpedanceSolver(samples, medium).solve(sensors, lam=lam)
