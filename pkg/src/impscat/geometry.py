"""Bandlimited closed curves: sampling, curvature, constraints, refitting.

Curves are trigonometric polynomials in a parameter s in [0, L).  After
arc-length refitting (see :func:`reparameterize_arclength`) the parameter is
arc length up to a uniform 1e-6 tolerance and L is the perimeter.  The
outward normal follows the (y', -x') convention, which points outward for a
counterclockwise curve.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString, Polygon

__all__ = [
    "FourierCurve",
    "CurveSamples",
    "NormalPerturbation",
    "sample_curve",
    "signed_curvature",
    "elastic_energy",
    "constraint_check",
    "is_simple",
    "apply_normal_update",
    "reparameterize_arclength",
    "symmetric_difference_area",
    "curvature_frechet",
    "spectral_derivative",
]

ARCLENGTH_TOL = 1e-6


@dataclass(frozen=True)
class FourierCurve:
    """Closed curve (x(s), y(s)) with real Fourier coefficients of equal order.

    ``a1/b1`` hold the cosine/sine coefficients of x, ``a2/b2`` those of y;
    index m is the mode number, with b[0] unused (kept zero).  ``length`` is
    the parameter period; it equals the perimeter only for arc-length curves.
    """

    length: float
    a1: np.ndarray
    b1: np.ndarray
    a2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in ("a1", "b1", "a2", "b2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.a1)
        if any(len(getattr(self, name)) != n for name in ("b1", "a2", "b2")):
            raise ValueError("coefficient arrays must have equal length")
        if self.length <= 0:
            raise ValueError("length must be positive")

    @property
    def order(self) -> int:
        return len(self.a1) - 1

    def evaluate(self, s, deriv: int = 0) -> np.ndarray:
        """Evaluate the curve (or its s-derivatives) at parameters s, shape (..., 2)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        m = np.arange(self.order + 1)
        w = 2.0 * np.pi * m / self.length
        phase = np.outer(s, w)
        c, sn = np.cos(phase), np.sin(phase)
        if deriv == 0:
            bc, bs = c, sn
        elif deriv == 1:
            bc, bs = -w * sn, w * c
        elif deriv == 2:
            bc, bs = -(w**2) * c, -(w**2) * sn
        else:
            raise ValueError("deriv must be 0, 1, or 2")
        x = bc @ self.a1 + bs @ self.b1
        y = bc @ self.a2 + bs @ self.b2
        return np.stack([x, y], axis=-1)

    def perimeter(self, n: int | None = None) -> float:
        n = n or max(256, 4 * (self.order + 1))
        s = np.arange(n) * (self.length / n)
        speed = np.linalg.norm(self.evaluate(s, deriv=1), axis=-1)
        return float(np.sum(speed) * self.length / n)

    def to_json(self) -> str:
        return json.dumps(
            {
                "length": self.length,
                "a1": self.a1.tolist(),
                "b1": self.b1.tolist(),
                "a2": self.a2.tolist(),
                "b2": self.b2.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FourierCurve":
        d = json.loads(text)
        return cls(d["length"], d["a1"], d["b1"], d["a2"], d["b2"])

    @classmethod
    def from_samples(cls, points: np.ndarray, length: float) -> "FourierCurve":
        """Interpolate equispaced-parameter samples of a closed curve.

        Modes with negligible amplitude are dropped so refitted curves keep
        a compact band.
        """
        points = np.asarray(points, dtype=float)
        n = len(points)
        fx = np.fft.rfft(points[:, 0]) / n
        fy = np.fft.rfft(points[:, 1]) / n
        order = (n - 1) // 2  # Nyquist mode excluded for even n
        a1 = np.zeros(order + 1)
        b1 = np.zeros(order + 1)
        a2 = np.zeros(order + 1)
        b2 = np.zeros(order + 1)
        a1[0], a2[0] = fx[0].real, fy[0].real
        a1[1:] = 2.0 * fx[1 : order + 1].real
        b1[1:] = -2.0 * fx[1 : order + 1].imag
        a2[1:] = 2.0 * fy[1 : order + 1].real
        b2[1:] = -2.0 * fy[1 : order + 1].imag
        scale = max(np.max(np.abs(c)) for c in (a1, b1, a2, b2))
        keep = np.nonzero(
            np.max(np.abs([a1, b1, a2, b2]), axis=0) > 1e-13 * scale
        )[0]
        hi = int(keep[-1]) if len(keep) else 0
        return cls(length, a1[: hi + 1], b1[: hi + 1], a2[: hi + 1], b2[: hi + 1])


@dataclass(frozen=True)
class CurveSamples:
    """Equispaced-parameter samples of a curve with geometric data at the nodes."""

    curve: FourierCurve
    s: np.ndarray
    positions: np.ndarray
    tangents: np.ndarray  # unit tangents
    normals: np.ndarray  # outward unit normals, (y', -x')/|gamma'|
    speed: np.ndarray  # |gamma'(s)|
    curvature: np.ndarray
    weights: np.ndarray  # arc-length quadrature weights (trapezoid)

    @property
    def n(self) -> int:
        return len(self.s)

    @property
    def spacing(self) -> float:
        return self.curve.length / self.n


def sample_curve(curve: FourierCurve, node_count: int) -> CurveSamples:
    """Spectrally evaluate positions, frames, curvature, and weights at nodes."""
    if node_count < 2 * curve.order + 1:
        raise ValueError(
            f"node_count {node_count} too small for curve order {curve.order}"
        )
    s = np.arange(node_count) * (curve.length / node_count)
    pos = curve.evaluate(s)
    d1 = curve.evaluate(s, deriv=1)
    d2 = curve.evaluate(s, deriv=2)
    speed = np.linalg.norm(d1, axis=-1)
    if np.min(speed) < 1e-12:
        raise ValueError("degenerate parameterization: |gamma'| ~ 0")
    tangents = d1 / speed[:, None]
    normals = np.stack([d1[:, 1], -d1[:, 0]], axis=-1) / speed[:, None]
    curvature = (d1[:, 0] * d2[:, 1] - d2[:, 0] * d1[:, 1]) / speed**3
    weights = speed * (curve.length / node_count)
    return CurveSamples(curve, s, pos, tangents, normals, speed, curvature, weights)


def signed_curvature(curve: FourierCurve, node_count: int | None = None) -> np.ndarray:
    """Signed curvature (x'y'' - x''y')/|gamma'|^3 at equispaced nodes."""
    node_count = node_count or max(256, 4 * (curve.order + 1))
    return sample_curve(curve, node_count).curvature


def _curvature_fourier(curve: FourierCurve) -> tuple[np.ndarray, np.ndarray]:
    # real Fourier coefficients of H up to mode 2*order
    two_n = 2 * curve.order
    n = max(4 * curve.order + 8, 64)
    h = sample_curve(curve, n).curvature
    fh = np.fft.rfft(h) / n
    a = np.zeros(two_n + 1)
    b = np.zeros(two_n + 1)
    a[0] = fh[0].real
    a[1:] = 2.0 * fh[1 : two_n + 1].real
    b[1:] = -2.0 * fh[1 : two_n + 1].imag
    return a, b


def elastic_energy(curve: FourierCurve, M: int) -> tuple[float, float]:
    """Total elastic energy of the curvature and the part in modes <= M.

    The energy is a0^2/2 + sum over modes of (a_m^2 + b_m^2) of the
    curvature's real Fourier expansion.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    a, b = _curvature_fourier(curve)
    e_total = a[0] ** 2 / 2.0 + float(np.sum(a[1:] ** 2 + b[1:] ** 2))
    m_hi = min(M, len(a) - 1)
    e_band = a[0] ** 2 / 2.0 + float(np.sum(a[1 : m_hi + 1] ** 2 + b[1 : m_hi + 1] ** 2))
    return e_total, e_band


def is_simple(curve: FourierCurve, node_count: int | None = None) -> bool:
    """True iff the sampled closed polyline has no self-crossings."""
    node_count = node_count or max(600, 10 * (curve.order + 1))
    pts = curve.evaluate(np.arange(node_count) * (curve.length / node_count))
    ring = LineString(np.vstack([pts, pts[:1]]))
    return bool(ring.is_simple)


def constraint_check(
    curve: FourierCurve, M: int, C_H: float
) -> tuple[bool, dict]:
    """Membership test for the admissible-curve set.

    Passes iff the banded elastic energy carries at least the fraction C_H of
    the total and the curve is simple.  The diagnostics dict reports each
    clause.
    """
    e_total, e_band = elastic_energy(curve, M)
    energy_ok = e_band >= C_H * e_total
    simple_ok = is_simple(curve)
    diag = {
        "energy_ok": bool(energy_ok),
        "simple_ok": bool(simple_ok),
        "energy_total": e_total,
        "energy_band": e_band,
        "energy_fraction": e_band / e_total if e_total > 0 else 1.0,
    }
    return bool(energy_ok and simple_ok), diag


@dataclass(frozen=True)
class NormalPerturbation:
    """Real trigonometric update h(s) = w[0] + sum w[m] cos + sum w[N+m] sin."""

    w: np.ndarray
    band: int

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float))
        if len(self.w) != 2 * self.band + 1:
            raise ValueError("w must have length 2*band + 1")

    def evaluate(self, s: np.ndarray, length: float) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        m = np.arange(1, self.band + 1)
        phase = np.outer(s, 2.0 * np.pi * m / length)
        return (
            self.w[0]
            + np.cos(phase) @ self.w[1 : self.band + 1]
            + np.sin(phase) @ self.w[self.band + 1 :]
        )


def reparameterize_arclength(
    curve_or_points,
    length: float | None = None,
    node_count: int | None = None,
    tol: float = ARCLENGTH_TOL,
    max_passes: int = 100,
) -> FourierCurve:
    """Refit a closed curve so its parameterization is arc length within tol.

    Accepts a FourierCurve or an (n, 2) array of closed-curve samples
    equispaced in the current parameter (then ``length`` is the parameter
    period).  Each pass resamples at equispaced arc length, found by Newton
    inversion of the spectrally integrated arc-length function, and refits
    the Fourier coefficients.
    """
    if isinstance(curve_or_points, FourierCurve):
        curve = curve_or_points
    else:
        pts = np.asarray(curve_or_points, dtype=float)
        if length is None:
            raise ValueError("length (parameter period) required with raw samples")
        curve = FourierCurve.from_samples(pts, length)

    n = node_count or max(256, 4 * (curve.order + 1))
    for _ in range(max_passes):
        samples = sample_curve(curve, n)
        dev = float(np.max(np.abs(samples.speed - 1.0)))
        if dev <= tol:
            return curve
        total = float(np.sum(samples.weights))
        # cumulative arc length by spectral integration of the speed
        fs = np.fft.rfft(samples.speed) / n
        sigma_mean = fs[0].real
        targets = np.arange(n) * (total / n)
        t = targets / sigma_mean  # initial guess: uniform speed
        m = np.arange(1, len(fs))
        omega = 2.0 * np.pi * m / curve.length

        def sigma(tv):
            phase = np.outer(tv, omega)
            osc = (
                np.sin(phase) @ (2.0 * fs[1:].real / omega)
                - (np.cos(phase) - 1.0) @ (-2.0 * fs[1:].imag / omega)
            )
            return sigma_mean * tv + osc

        for _newton in range(50):
            resid = sigma(t) - targets
            if np.max(np.abs(resid)) < 1e-13 * total:
                break
            spd = np.linalg.norm(curve.evaluate(t, deriv=1), axis=-1)
            t = t - resid / spd
        new_pts = curve.evaluate(np.mod(t, curve.length))
        curve = FourierCurve.from_samples(new_pts, total)
        if curve.order < 1 or 2 * curve.order + 1 > n:
            raise ValueError("arc-length refit produced a degenerate curve")
    raise ValueError(f"arc-length refit did not converge in {max_passes} passes")


def apply_normal_update(
    curve: FourierCurve,
    w: NormalPerturbation,
    node_count: int | None = None,
) -> FourierCurve:
    """Move the curve by h_w along its outward normal and refit in arc length."""
    n = node_count or max(256, 4 * (curve.order + 1), 4 * (w.band + 1))
    samples = sample_curve(curve, n)
    h = w.evaluate(samples.s, curve.length)
    new_pts = samples.positions + h[:, None] * samples.normals
    return reparameterize_arclength(new_pts, length=curve.length, node_count=n)


def _polygon(curve: FourierCurve, node_count: int) -> Polygon:
    pts = curve.evaluate(np.arange(node_count) * (curve.length / node_count))
    poly = Polygon(pts)
    if not poly.is_valid or poly.area <= 0:
        raise ValueError("degenerate boundary polygon")
    return poly


def symmetric_difference_area(
    curve_a: FourierCurve, curve_b: FourierCurve, node_count: int = 512
) -> float:
    """Area of the symmetric difference of the enclosed regions over area(A).

    Polygonal (boundary-node) approximation; good to about 2 digits, in line
    with the accuracy of the area metric it implements.
    """
    pa = _polygon(curve_a, node_count)
    pb = _polygon(curve_b, node_count)
    return (pa.difference(pb).area + pb.difference(pa).area) / pa.area


def spectral_derivative(values: np.ndarray, period: float, order: int = 1) -> np.ndarray:
    """Derivative of a periodic function from equispaced samples via FFT."""
    n = len(values)
    freqs = np.fft.fftfreq(n, d=period / n) * 2.0 * np.pi
    spec = np.fft.fft(values) * (1j * freqs) ** order
    if n % 2 == 0 and order % 2 == 1:
        spec[n // 2] = 0.0  # Nyquist mode has no well-defined odd derivative
    out = np.fft.ifft(spec)
    return out.real if np.isrealobj(values) else out


def curvature_frechet(curve: FourierCurve, h: np.ndarray) -> np.ndarray:
    """First-order change of the signed curvature under a normal update h.

    ``h`` holds node samples on the equispaced grid of len(h) nodes; its
    derivatives are computed spectrally.  Returns
    -H^2 h + (x'x'' + y'y'')/|gamma'|^4 h' - h''/|gamma'|^2 at the nodes.
    """
    h = np.asarray(h, dtype=float)
    samples = sample_curve(curve, len(h))
    d1 = curve.evaluate(samples.s, deriv=1)
    d2 = curve.evaluate(samples.s, deriv=2)
    sp2 = samples.speed**2
    hp = spectral_derivative(h, curve.length)
    hpp = spectral_derivative(h, curve.length, order=2)
    mid = (d1[:, 0] * d2[:, 0] + d1[:, 1] * d2[:, 1]) / sp2**2
    return -samples.curvature**2 * h + mid * hp - hpp / sp2
