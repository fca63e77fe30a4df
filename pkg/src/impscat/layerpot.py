"""Nystrom discretization of Helmholtz layer operators on closed curves.

Weakly singular kernels are integrated with the 16th-order hybrid
Gauss-trapezoidal rule: the plain trapezoid sum with a band of nodes around
the singularity removed, plus correction nodes straddling the singularity at
irrational offsets where the kernel is finite.  Densities are carried to the
correction nodes by trigonometric interpolation; curve data there is
evaluated spectrally from the Fourier coefficients, so no geometric
interpolation error enters.

The hypersingular operator never appears alone: only differences of two
wavenumbers are assembled (:data:`Tdiff`), whose 1/r^2 singularities cancel
analytically (see :func:`impscat.special.hankel1_diff_scaled`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1 as _h

from .geometry import CurveSamples
from .special import WaveNumber, hankel1_diff_scaled

__all__ = [
    "QuadratureRule",
    "KernelMatrix",
    "build_operator",
    "build_operator_set",
    "eval_potential",
    "potential_matrix",
    "integrate_periodic_log_singular",
]

# Hybrid Gauss-trapezoidal correction nodes/weights of order 16 for
# integrands with a logarithmic endpoint singularity (Alpert 1999, as
# tabulated in pybie2d).  Offsets are in units of the grid spacing; the
# trapezoid sum skips the EXCLUDE nearest nodes on each side.
ALPERT16_NODES = np.array([
    8.371529832014113e-04, 1.239382725542637e-02, 6.009290785739468e-02,
    1.805991249601928e-01, 4.142832599028031e-01, 7.964747731112430e-01,
    1.348993882467059e+00, 2.073471660264395e+00, 2.947904939031494e+00,
    3.928129252248612e+00, 4.957203086563112e+00, 5.986360113977494e+00,
    6.997957704791519e+00, 7.999888757524622e+00, 8.999998754306120e+00,
])
ALPERT16_WEIGHTS = np.array([
    3.190919086626234e-03, 2.423621380426338e-02, 7.740135521653088e-02,
    1.704889420286369e-01, 3.029123478511309e-01, 4.652220834914617e-01,
    6.401489637096768e-01, 8.051212946181061e-01, 9.362411945698647e-01,
    1.014359775369075e+00, 1.035167721053657e+00, 1.020308624984610e+00,
    1.004798397441514e+00, 1.000395017352309e+00, 1.000007149422537e+00,
])
ALPERT16_EXCLUDE = 10


@dataclass(frozen=True)
class QuadratureRule:
    """Correction nodes/weights (grid-spacing units) for the hybrid rule."""

    nodes: np.ndarray
    weights: np.ndarray
    exclude: int
    order: int

    @classmethod
    def alpert16(cls) -> "QuadratureRule":
        return cls(ALPERT16_NODES, ALPERT16_WEIGHTS, ALPERT16_EXCLUDE, 16)

    def min_nodes(self) -> int:
        return 2 * self.exclude + 1


@dataclass(frozen=True)
class KernelMatrix:
    """Dense Nystrom matrix acting on density node values."""

    matrix: np.ndarray
    kind: str
    k: complex
    k_b: complex | None = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _as_k(k) -> complex:
    return k.value if isinstance(k, WaveNumber) else complex(k)


def _kernel(kind, k, kb, dx, dy, r, nx=None, ny=None, cache=None):
    # dx, dy point from source y to target x; r = |x - y| > 0; a cache dict
    # keyed by (order, wavenumber) shares Hankel evaluations on one grid
    def h(order, kk):
        if cache is None:
            return _h(order, kk * r)
        key = (order, kk)
        if key not in cache:
            cache[key] = _h(order, kk * r)
        return cache[key]

    if kind == "S":
        return 0.25j * h(0, k)
    if kind == "D":
        return 0.25j * k * h(1, k) * (dx * ny[..., 0] + dy * ny[..., 1]) / r
    if kind == "K":
        return -0.25j * k * h(1, k) * (dx * nx[..., 0] + dy * nx[..., 1]) / r
    if kind == "Tdiff":
        ax = (dx * nx[..., 0] + dy * nx[..., 1]) / r
        ay = (dx * ny[..., 0] + dy * ny[..., 1]) / r
        nn = nx[..., 0] * ny[..., 0] + nx[..., 1] * ny[..., 1]
        h0_part = k * k * h(0, k) - kb * kb * h(0, kb)
        h1_part = hankel1_diff_scaled(k, kb, r)
        return 0.25j * (h0_part * ax * ay + h1_part * (nn - 2.0 * ax * ay))
    raise ValueError(f"unsupported kernel kind {kind!r}")


def _periodic_interp_weights(n: int, theta: np.ndarray) -> np.ndarray:
    """Trigonometric cardinal weights d(theta) on the n-point periodic grid."""
    theta = np.asarray(theta, dtype=float)
    if n % 2 == 0:
        k = np.arange(1, n // 2)
        w = 1.0 + 2.0 * np.cos(np.outer(theta, k)).sum(axis=1) + np.cos(theta * (n // 2))
    else:
        k = np.arange(1, (n + 1) // 2)
        w = 1.0 + 2.0 * np.cos(np.outer(theta, k)).sum(axis=1)
    return w / n


_EVEC_CACHE: dict[tuple, np.ndarray] = {}


def _correction_evecs(n: int, rule: QuadratureRule) -> np.ndarray:
    """Interpolation weight rows for all correction offsets, shape (2m, n).

    The weights depend only on the node count (offsets are fixed multiples
    of the grid spacing), so they are cached across assemblies.
    """
    key = (n, rule.order, rule.exclude)
    out = _EVEC_CACHE.get(key)
    if out is None:
        offsets = np.concatenate([rule.nodes, -rule.nodes])
        jrel = np.arange(n)
        out = np.vstack(
            [
                _periodic_interp_weights(n, (xi - jrel) * (2.0 * np.pi / n))
                for xi in offsets
            ]
        )
        if len(_EVEC_CACHE) > 16:
            _EVEC_CACHE.clear()
        _EVEC_CACHE[key] = out
    return out


def build_operator_set(
    specs,
    samples: CurveSamples,
    rule: QuadratureRule | None = None,
) -> list[KernelMatrix]:
    """Assemble several boundary operators on one curve in a single pass.

    ``specs`` is a sequence of ``(kind, k)`` or ``(kind, k, k_b)`` tuples
    with ``kind`` one of S (single layer), D (double layer), K (normal
    derivative of S), or Tdiff (difference of hypersingular operators at
    wavenumbers ``k`` and ``k_b``).  The pairwise geometry and the Hankel
    function evaluations are shared across all requested operators.
    """
    rule = rule or QuadratureRule.alpert16()
    parsed = []
    for spec in specs:
        kind = spec[0]
        k = _as_k(spec[1])
        k_b = spec[2] if len(spec) > 2 else None
        if kind == "Tdiff":
            if k_b is None:
                raise ValueError("Tdiff requires a second wavenumber k_b")
            k_b = _as_k(k_b)
            if k == k_b:
                raise ValueError("Tdiff with coincident wavenumbers is hypersingular")
        elif kind not in ("S", "D", "K"):
            raise ValueError(f"unsupported kernel kind {kind!r}")
        else:
            k_b = None
        parsed.append((kind, k, k_b))
    n = samples.n
    if n < rule.min_nodes():
        raise ValueError(f"need at least {rule.min_nodes()} nodes, got {n}")
    curve = samples.curve
    h = samples.spacing
    pos, nrm = samples.positions, samples.normals

    # smooth (trapezoid) part with the near-diagonal band removed
    dx = pos[:, None, 0] - pos[None, :, 0]
    dy = pos[:, None, 1] - pos[None, :, 1]
    r = np.hypot(dx, dy)
    np.fill_diagonal(r, 1.0)  # placeholder, band zeroed below
    nx = np.broadcast_to(nrm[:, None, :], (n, n, 2))
    ny = np.broadcast_to(nrm[None, :, :], (n, n, 2))
    idx = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
    band_mask = np.minimum(idx, n - idx) < rule.exclude
    full_cache: dict = {}
    mats = []
    for kind, k, k_b in parsed:
        mat = _kernel(kind, k, k_b, dx, dy, r, nx, ny, cache=full_cache)
        mat *= samples.weights[None, :]  # speed * h
        mat[band_mask] = 0.0
        mats.append(mat)
    del full_cache

    # correction nodes straddling the diagonal
    offsets = np.concatenate([rule.nodes, -rule.nodes]) * h
    cweights = np.concatenate([rule.weights, rule.weights]) * h
    s_corr = np.mod(samples.s[:, None] + offsets[None, :], curve.length)
    y_pos = curve.evaluate(s_corr.ravel()).reshape(n, -1, 2)
    y_d1 = curve.evaluate(s_corr.ravel(), deriv=1).reshape(n, -1, 2)
    y_speed = np.linalg.norm(y_d1, axis=-1)
    y_nrm = np.stack([y_d1[..., 1], -y_d1[..., 0]], axis=-1) / y_speed[..., None]
    cdx = pos[:, None, 0] - y_pos[..., 0]
    cdy = pos[:, None, 1] - y_pos[..., 1]
    cr = np.hypot(cdx, cdy)
    cnx = np.broadcast_to(nrm[:, None, :], y_nrm.shape)
    corr_cache: dict = {}
    coefs = [
        _kernel(kind, k, k_b, cdx, cdy, cr, cnx, y_nrm, cache=corr_cache)
        * y_speed
        * cweights[None, :]
        for kind, k, k_b in parsed
    ]
    del corr_cache

    evecs = _correction_evecs(n, rule)
    for p in range(len(offsets)):
        gathered = evecs[p][idx]
        for mat, coef in zip(mats, coefs):
            mat += coef[:, p][:, None] * gathered
    return [
        KernelMatrix(mat, kind, k, k_b)
        for mat, (kind, k, k_b) in zip(mats, parsed)
    ]


def build_operator(
    kind: str,
    k,
    samples: CurveSamples,
    rule: QuadratureRule | None = None,
    k_b=None,
) -> KernelMatrix:
    """Assemble the Nystrom matrix of one boundary operator.

    See :func:`build_operator_set` for the supported kinds; this is the
    single-operator convenience wrapper.
    """
    return build_operator_set([(kind, k, k_b)], samples, rule)[0]


def potential_matrix(kind: str, k, samples: CurveSamples, targets: np.ndarray) -> np.ndarray:
    """Smooth-quadrature matrix mapping density node values to off-surface values."""
    if kind not in ("S", "D"):
        raise ValueError("off-surface evaluation supports kinds S and D")
    k = _as_k(k)
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    dx = targets[:, None, 0] - samples.positions[None, :, 0]
    dy = targets[:, None, 1] - samples.positions[None, :, 1]
    r = np.hypot(dx, dy)
    if np.min(r) < 2.0 * samples.spacing:
        raise ValueError("target too close to the boundary for smooth quadrature")
    ny = np.broadcast_to(samples.normals[None, :, :], (len(targets), samples.n, 2))
    ker = _kernel(kind, k, None, dx, dy, r, None, ny)
    return ker * samples.weights[None, :]


def eval_potential(
    kind: str, k, samples: CurveSamples, density: np.ndarray, targets
) -> np.ndarray:
    """Evaluate the S or D potential of a node density at off-surface targets."""
    return potential_matrix(kind, k, samples, targets) @ np.asarray(density)


def integrate_periodic_log_singular(
    f, n: int, rule: QuadratureRule | None = None, period: float = 2.0 * np.pi
) -> float:
    """Integrate a periodic integrand with a log singularity at 0 over one period."""
    rule = rule or QuadratureRule.alpert16()
    h = period / n
    j = np.arange(rule.exclude, n - rule.exclude + 1)
    total = np.sum(f(j * h))
    # endpoints j = a and j = n - a carry full trapezoid weight by design
    corr = np.sum(rule.weights * (f(rule.nodes * h) + f(period - rule.nodes * h)))
    return h * (total + corr)
