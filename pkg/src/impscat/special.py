"""Hankel functions for complex argument and the 2D Helmholtz kernel.

The free-space kernel is G(x, y) = (i/4) H_0^(1)(k |x - y|).  Directional
derivatives with respect to the source and target normals are available in
closed form; the hypersingular second derivative is only ever used through
the weakly singular difference of two wavenumbers (see
:func:`hankel1_diff_scaled`), where the 1/r^2 parts cancel analytically.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hankel1 as _scipy_hankel1

__all__ = [
    "WaveNumber",
    "interior_wavenumber",
    "hankel1",
    "hankel1_smoothed",
    "hankel1_diff_scaled",
    "greens_kernel",
]

_EULER_GAMMA = 0.5772156649015328606


@dataclass(frozen=True)
class WaveNumber:
    """A Helmholtz wavenumber, possibly complex with nonnegative imaginary part."""

    value: complex

    def __post_init__(self):
        if self.value == 0:
            raise ValueError("wavenumber must be nonzero")
        if self.value.imag < 0:
            raise ValueError("wavenumber must have nonnegative imaginary part")


def interior_wavenumber(omega: float, c1: float, delta: float) -> complex:
    """Interior wavenumber omega*sqrt(1 + i*delta/omega)/c1, principal branch."""
    if omega <= 0 or c1 <= 0:
        raise ValueError("omega and c1 must be positive")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return omega * cmath.sqrt(1.0 + 1j * delta / omega) / c1


def hankel1(order: int, z):
    """Hankel function of the first kind, order 0 or 1, for imag(z) >= 0.

    Accepts scalars or arrays.  Raises for z = 0 (logarithmic singularity)
    and for arguments in the lower half plane, where the function grows
    exponentially and is unused here.
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ValueError("hankel1 is singular at z = 0")
    if np.any(z.imag < 0):
        raise ValueError("hankel1 restricted to imag(z) >= 0")
    out = _scipy_hankel1(order, z)
    if out.ndim == 0:
        return complex(out)
    return out


def _h1_smoothed_series(z: np.ndarray) -> np.ndarray:
    # H_1(z) + 2i/(pi z) via the ascending series; stable for small |z|.
    # J_1 and the regular part of Y_1 share the factor (z/2) (z^2/4)^k / (k!(k+1)!).
    half = z / 2.0
    zz = -(half * half)  # (-z^2/4)
    term = half  # k = 0 factor (z/2) * 1 / (0! 1!)
    j1 = term.copy()
    # psi(k+1) + psi(k+2) with psi(1) = -gamma
    psi_sum = -2.0 * _EULER_GAMMA + 1.0
    ysum = psi_sum * term
    log_half = np.log(half)
    for k in range(1, 18):
        term = term * zz / (k * (k + 1))
        j1 += term
        psi_sum += 1.0 / k + 1.0 / (k + 1)
        ysum += psi_sum * term
    y1_smooth = (2.0 / math.pi) * log_half * j1 - ysum / math.pi
    return j1 + 1j * y1_smooth


def hankel1_smoothed(z):
    """H_1^(1)(z) + 2i/(pi z): the Hankel function with its 1/z pole removed.

    Evaluated by series for small |z| to avoid catastrophic cancellation.
    """
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty(z.shape, dtype=complex)
    small = np.abs(z) < 0.5
    if np.any(small):
        out[small] = _h1_smoothed_series(z[small])
    if np.any(~small):
        zl = z[~small]
        out[~small] = _scipy_hankel1(1, zl) + 2j / (math.pi * zl)
    return complex(out[0]) if scalar else out


def hankel1_diff_scaled(ka: complex, kb: complex, r):
    """(ka H_1(ka r) - kb H_1(kb r)) / r with the 1/r^2 poles cancelled exactly.

    This is the weakly singular part of the difference of two hypersingular
    kernels; direct subtraction would lose ~1/r^2 * eps absolute accuracy.
    """
    r = np.asarray(r, dtype=float)
    return (ka * hankel1_smoothed(ka * r) - kb * hankel1_smoothed(kb * r)) / r


def greens_kernel(k, x, y, which: str = "value", n_x=None, n_y=None) -> complex:
    """Helmholtz Green's function (i/4) H_0^(1)(k|x-y|) and normal derivatives.

    `which` selects among {"value", "dn_y", "dn_x", "dn_x_dn_y"}; the normal
    arguments must be unit vectors when the corresponding derivative is
    requested.  Raises for coincident points.
    """
    k = k.value if isinstance(k, WaveNumber) else complex(k)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = math.hypot(d[0], d[1])
    if r == 0.0:
        raise ValueError("greens_kernel is singular at x = y")
    if which == "value":
        return 0.25j * hankel1(0, k * r)
    rhat = d / r
    h1 = hankel1(1, k * r)
    if which == "dn_y":
        if n_y is None:
            raise ValueError("dn_y requires n_y")
        return 0.25j * k * h1 * float(np.dot(rhat, n_y))
    if which == "dn_x":
        if n_x is None:
            raise ValueError("dn_x requires n_x")
        return -0.25j * k * h1 * float(np.dot(rhat, n_x))
    if which == "dn_x_dn_y":
        if n_x is None or n_y is None:
            raise ValueError("dn_x_dn_y requires n_x and n_y")
        ax = float(np.dot(rhat, n_x))
        ay = float(np.dot(rhat, n_y))
        nn = float(np.dot(n_x, n_y))
        h0 = hankel1(0, k * r)
        return 0.25j * (k * k * h0 * ax * ay + (k * h1 / r) * (nn - 2.0 * ax * ay))
    raise ValueError(f"unknown kernel kind {which!r}")
