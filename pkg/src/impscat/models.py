"""Surface impedance models for generalized absorbing boundary conditions.

The boundary condition on the obstacle is dn(u) + i*k2*lambda(s)*u = 0, with
lambda a complex surface impedance that may depend on the signed curvature
H(s).  Four parameterizations are provided:

* ``ConstantImpedance``: a single complex value.
* ``FourierImpedance``: a complex trigonometric polynomial in arc length,
  unconstrained.  Flexible, but with no physical admissibility built in.
* ``CurvatureAffineImpedance``: lambda = alpha1 + alpha2 * H with complex
  coefficients constrained to nonpositive imaginary parts (passivity).
* ``PhysicalImpedance``: a three-parameter family derived from a dissipative
  interior medium; its nonnegative parameters map bijectively onto the
  physical triple (dissipation, density ratio, sound-speed ratio), so a
  recovered parameter vector can be read back as material constants.

All models share a flat real parameter vector interface (``pack`` /
``unpack``) used by the optimizer, closed-form derivatives of lambda with
respect to those parameters, and a curvature derivative for shape
sensitivities.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "ConstantImpedance",
    "FourierImpedance",
    "CurvatureAffineImpedance",
    "PhysicalImpedance",
    "eval_impedance",
    "impedance_param_gradient",
    "impedance_curvature_gradient",
    "pack_params",
    "unpack_params",
    "project_params",
    "beta_from_physical",
    "physical_from_beta",
    "model_to_json",
    "model_from_json",
]


@dataclass(frozen=True)
class ConstantImpedance:
    value: complex

    tag = "constant"


@dataclass(frozen=True)
class FourierImpedance:
    """lambda(s) = sum_m c_m exp(2*pi*i*m*s/L) for m = -M..M."""

    coeffs: np.ndarray  # complex, length 2*M + 1, mode order -M..M

    tag = "fourier"

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 == 0:
            raise ValueError("coeffs must be a 1d array of odd length")
        object.__setattr__(self, "coeffs", c)

    @property
    def band(self) -> int:
        return (self.coeffs.size - 1) // 2

    def padded(self, band: int) -> "FourierImpedance":
        """Zero-pad to a wider symmetric band (used by continuation)."""
        if band < self.band:
            raise ValueError("cannot shrink the band")
        c = np.zeros(2 * band + 1, dtype=complex)
        c[band - self.band : band + self.band + 1] = self.coeffs
        return FourierImpedance(c)


@dataclass(frozen=True)
class CurvatureAffineImpedance:
    """lambda(s) = alpha1 + alpha2 * H(s), imag parts nonpositive."""

    alpha1: complex
    alpha2: complex

    tag = "curvature_affine"


@dataclass(frozen=True)
class PhysicalImpedance:
    """lambda(s) = b2*sqrt(1 - i*b1) - i*b3*(1 - i*b1)*H(s)/k2, b >= 0."""

    beta: np.ndarray  # (3,) nonnegative

    tag = "physical"

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        if b.shape != (3,):
            raise ValueError("beta must have shape (3,)")
        object.__setattr__(self, "beta", b)


def eval_impedance(model, s, curvature, k2: complex, length: float) -> np.ndarray:
    """Impedance values lambda(s_j) at the given arc parameters."""
    s = np.asarray(s, dtype=float)
    if isinstance(model, ConstantImpedance):
        return np.full(s.shape, complex(model.value))
    if isinstance(model, FourierImpedance):
        m = np.arange(-model.band, model.band + 1)
        phases = np.exp(2j * np.pi * np.outer(s, m) / length)
        return phases @ model.coeffs
    curvature = np.asarray(curvature, dtype=float)
    if isinstance(model, CurvatureAffineImpedance):
        return model.alpha1 + model.alpha2 * curvature
    if isinstance(model, PhysicalImpedance):
        b1, b2, b3 = model.beta
        return b2 * cmath.sqrt(1.0 - 1j * b1) - 1j * b3 * (1.0 - 1j * b1) * curvature / k2
    raise TypeError(f"unknown impedance model {type(model).__name__}")


def impedance_param_gradient(model, s, curvature, k2: complex, length: float) -> np.ndarray:
    """Rows d lambda(s_j) / d p_i for the flat real parameter vector p."""
    s = np.asarray(s, dtype=float)
    n = s.size
    if isinstance(model, ConstantImpedance):
        ones = np.ones(n, dtype=complex)
        return np.vstack([ones, 1j * ones])
    if isinstance(model, FourierImpedance):
        m = np.arange(-model.band, model.band + 1)
        phases = np.exp(2j * np.pi * np.outer(m, s) / length)
        return np.vstack([phases, 1j * phases])
    curvature = np.asarray(curvature, dtype=float)
    if isinstance(model, CurvatureAffineImpedance):
        ones = np.ones(n, dtype=complex)
        h = curvature.astype(complex)
        return np.vstack([ones, 1j * ones, h, 1j * h])
    if isinstance(model, PhysicalImpedance):
        b1, b2, b3 = model.beta
        root = cmath.sqrt(1.0 - 1j * b1)
        d1 = np.full(n, -0.5j * b2 / root) - b3 * curvature / k2
        d2 = np.full(n, root)
        d3 = -1j * (1.0 - 1j * b1) * curvature / k2
        return np.vstack([d1, d2, d3])
    raise TypeError(f"unknown impedance model {type(model).__name__}")


def impedance_curvature_gradient(model, k2: complex) -> complex:
    """d lambda / d H, constant across the curve for every model."""
    if isinstance(model, (ConstantImpedance, FourierImpedance)):
        return 0.0
    if isinstance(model, CurvatureAffineImpedance):
        return model.alpha2
    if isinstance(model, PhysicalImpedance):
        b1, _, b3 = model.beta
        return -1j * b3 * (1.0 - 1j * b1) / k2
    raise TypeError(f"unknown impedance model {type(model).__name__}")


def pack_params(model) -> np.ndarray:
    if isinstance(model, ConstantImpedance):
        return np.array([model.value.real, model.value.imag])
    if isinstance(model, FourierImpedance):
        return np.concatenate([model.coeffs.real, model.coeffs.imag])
    if isinstance(model, CurvatureAffineImpedance):
        return np.array(
            [model.alpha1.real, model.alpha1.imag, model.alpha2.real, model.alpha2.imag]
        )
    if isinstance(model, PhysicalImpedance):
        return model.beta.copy()
    raise TypeError(f"unknown impedance model {type(model).__name__}")


def unpack_params(model, p: np.ndarray):
    """A model of the same family with parameters taken from the flat vector."""
    p = np.asarray(p, dtype=float)
    if isinstance(model, ConstantImpedance):
        return ConstantImpedance(complex(p[0], p[1]))
    if isinstance(model, FourierImpedance):
        half = p.size // 2
        return FourierImpedance(p[:half] + 1j * p[half:])
    if isinstance(model, CurvatureAffineImpedance):
        return CurvatureAffineImpedance(complex(p[0], p[1]), complex(p[2], p[3]))
    if isinstance(model, PhysicalImpedance):
        return PhysicalImpedance(p)
    raise TypeError(f"unknown impedance model {type(model).__name__}")


def project_params(model):
    """Project onto the model's admissible set (identity when unconstrained)."""
    if isinstance(model, PhysicalImpedance):
        return PhysicalImpedance(np.maximum(model.beta, 0.0))
    if isinstance(model, CurvatureAffineImpedance):
        return CurvatureAffineImpedance(
            complex(model.alpha1.real, min(model.alpha1.imag, 0.0)),
            complex(model.alpha2.real, min(model.alpha2.imag, 0.0)),
        )
    return model


def beta_from_physical(omega: float, delta: float, rho_r: float, c_r: float) -> np.ndarray:
    """Parameters of :class:`PhysicalImpedance` from material constants."""
    if omega <= 0 or rho_r <= 0 or c_r <= 0 or delta < 0:
        raise ValueError("need omega, rho_r, c_r > 0 and delta >= 0")
    b1 = delta / omega
    scale = 1.0 + b1 * b1
    return np.array([b1, 1.0 / (rho_r * c_r * np.sqrt(scale)), 1.0 / (rho_r * scale)])


def physical_from_beta(omega: float, beta: np.ndarray) -> dict:
    """Material constants recovered from the parameter vector.

    Returns delta, rho_r, c_r, and the product rho_r*c_r (which stays
    identifiable even when rho_r and c_r are not separately resolved).
    """
    b1, b2, b3 = np.asarray(beta, dtype=float)
    if b2 <= 0 or b3 <= 0:
        raise ValueError("beta[1] and beta[2] must be positive to invert")
    scale = 1.0 + b1 * b1
    return {
        "delta": omega * b1,
        "rho_r": 1.0 / (b3 * scale),
        "c_r": b3 * np.sqrt(scale) / b2,
        "rho_c": 1.0 / (b2 * np.sqrt(scale)),
    }


_TAGS = {
    cls.tag: cls
    for cls in (ConstantImpedance, FourierImpedance, CurvatureAffineImpedance, PhysicalImpedance)
}


def model_to_json(model) -> dict:
    if isinstance(model, ConstantImpedance):
        return {"model": model.tag, "value": [model.value.real, model.value.imag]}
    if isinstance(model, FourierImpedance):
        return {
            "model": model.tag,
            "coeffs_re": model.coeffs.real.tolist(),
            "coeffs_im": model.coeffs.imag.tolist(),
        }
    if isinstance(model, CurvatureAffineImpedance):
        return {
            "model": model.tag,
            "alpha1": [model.alpha1.real, model.alpha1.imag],
            "alpha2": [model.alpha2.real, model.alpha2.imag],
        }
    if isinstance(model, PhysicalImpedance):
        return {"model": model.tag, "beta": model.beta.tolist()}
    raise TypeError(f"unknown impedance model {type(model).__name__}")


def model_from_json(obj: dict):
    tag = obj["model"]
    if tag == ConstantImpedance.tag:
        return ConstantImpedance(complex(*obj["value"]))
    if tag == FourierImpedance.tag:
        return FourierImpedance(
            np.asarray(obj["coeffs_re"]) + 1j * np.asarray(obj["coeffs_im"])
        )
    if tag == CurvatureAffineImpedance.tag:
        return CurvatureAffineImpedance(complex(*obj["alpha1"]), complex(*obj["alpha2"]))
    if tag == PhysicalImpedance.tag:
        return PhysicalImpedance(np.asarray(obj["beta"], dtype=float))
    raise ValueError(f"unknown impedance model tag {tag!r}")
