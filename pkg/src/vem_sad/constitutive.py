"""Material parameters and nonlinear coefficient laws.

All evaluators are vectorised: stresses are arrays of shape (..., 2, 2) and
concentrations arrays of any shape.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConstitutiveError

_I2 = np.eye(2)


@dataclass(frozen=True)
class PhysicalParams:
    """Lame constants, reaction coefficient and the uniform coefficient bound.

    Args:
        lam: First Lame parameter. Values below 1 trigger a warning.
        mu: Shear modulus, strictly positive.
        theta: Reaction coefficient, non-negative.
        M_bound: Uniform bound of the diffusion tensor and its inverse.
    """

    lam: float
    mu: float
    theta: float
    M_bound: float = 1.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ConstitutiveError(f"mu must be positive, got {self.mu}")
        if not self.lam > 0:
            raise ConstitutiveError(f"lambda must be positive, got {self.lam}")
        if self.theta < 0:
            raise ConstitutiveError(f"theta must be non-negative, got {self.theta}")
        if not self.M_bound > 0:
            raise ConstitutiveError(f"M_bound must be positive, got {self.M_bound}")
        if self.lam < 1:
            warnings.warn(f"lambda = {self.lam} < 1 lies outside the robust parameter range", RuntimeWarning)
        if self.theta > 1.0 / self.M_bound:
            warnings.warn(f"theta = {self.theta} exceeds 1/M = {1.0 / self.M_bound}", RuntimeWarning)


def lame_from_young(E: float, nu: float) -> tuple[float, float]:
    """(lambda, mu) from Young's modulus and Poisson ratio."""
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


def reconstruct_stress(strain, p_tilde, mu: float) -> np.ndarray:
    """sigma = 2 mu strain - p_tilde I."""
    strain = np.asarray(strain, dtype=float)
    p = np.asarray(p_tilde, dtype=float)[..., None, None]
    return 2.0 * mu * strain - p * _I2


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def _inv2(A: np.ndarray) -> np.ndarray:
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    out = np.empty_like(A)
    out[..., 0, 0] = A[..., 1, 1]
    out[..., 1, 1] = A[..., 0, 0]
    out[..., 0, 1] = -A[..., 0, 1]
    out[..., 1, 0] = -A[..., 1, 0]
    return out / det[..., None, None]


def _check_spd(M: np.ndarray, sigma: np.ndarray) -> None:
    tr = M[..., 0, 0] + M[..., 1, 1]
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    bad = ~((det > 0) & (tr > 0))
    if np.any(bad):
        i = np.unravel_index(np.argmax(bad), bad.shape)
        eig = np.linalg.eigvalsh(M[i])
        raise ConstitutiveError(
            f"diffusion tensor is not positive definite at sample {tuple(int(j) for j in i)}: "
            f"sigma = {sigma[i].tolist()}, eigenvalues = {eig.tolist()}; reduce the law parameters"
        )


class DiffusionLaw:
    """Stress-dependent diffusion tensor M(sigma)."""

    name = "abstract"

    def M(self, sigma) -> np.ndarray:
        raise NotImplementedError

    def dM(self, sigma, dsigma) -> np.ndarray:
        """Directional derivative of M at sigma along dsigma."""
        raise NotImplementedError

    def M_inv(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        M = self.M(sigma)
        _check_spd(M, sigma)
        return _sym(_inv2(M))


# exp(+-300) keeps M and its inverse finite with room for products
_EXP_LIMIT = 300.0


@dataclass(frozen=True)
class ExponentialLaw(DiffusionLaw):
    """M(sigma) = m0 exp(-m1 tr sigma) I."""

    m0: float
    m1: float
    name = "exponential"

    def __post_init__(self):
        if not self.m0 > 0:
            raise ConstitutiveError("m0 must be positive")

    def _exponent(self, sigma):
        t = self.m1 * np.trace(sigma, axis1=-2, axis2=-1)
        if np.any(np.abs(t) > _EXP_LIMIT):
            raise ConstitutiveError(
                f"exponential law out of range: |m1 tr sigma| reaches {np.max(np.abs(t)):.3e} "
                f"(limit {_EXP_LIMIT}); reduce m1 or the stress level"
            )
        return t

    def _scale(self, sigma):
        return self.m0 * np.exp(-self._exponent(sigma))

    def M(self, sigma):
        return self._scale(np.asarray(sigma, float))[..., None, None] * _I2

    def dM(self, sigma, dsigma):
        sigma = np.asarray(sigma, float)
        dtr = np.trace(np.asarray(dsigma, float), axis1=-2, axis2=-1)
        return (-self.m1 * dtr * self._scale(sigma))[..., None, None] * _I2

    def M_inv(self, sigma):
        s = np.exp(self._exponent(np.asarray(sigma, float))) / self.m0
        return s[..., None, None] * _I2


@dataclass(frozen=True)
class QuadraticLaw(DiffusionLaw):
    """M(sigma) = m0 (I + m0 m1 sigma sigma)."""

    m0: float
    m1: float
    name = "quadratic"

    def __post_init__(self):
        if not self.m0 > 0:
            raise ConstitutiveError("m0 must be positive")

    def M(self, sigma):
        sigma = np.asarray(sigma, float)
        return self.m0 * (_I2 + self.m0 * self.m1 * sigma @ sigma)

    def dM(self, sigma, dsigma):
        sigma, dsigma = np.asarray(sigma, float), np.asarray(dsigma, float)
        return self.m0**2 * self.m1 * (sigma @ dsigma + dsigma @ sigma)


@dataclass(frozen=True)
class PolynomialLaw(DiffusionLaw):
    """M(sigma) = m0 I + m1 sigma + m2 sigma sigma."""

    m0: float
    m1: float
    m2: float
    name = "polynomial"

    def __post_init__(self):
        if not self.m0 > 0:
            raise ConstitutiveError("m0 must be positive")

    def M(self, sigma):
        sigma = np.asarray(sigma, float)
        return self.m0 * _I2 + self.m1 * sigma + self.m2 * sigma @ sigma

    def dM(self, sigma, dsigma):
        sigma, dsigma = np.asarray(sigma, float), np.asarray(dsigma, float)
        return self.m1 * dsigma + self.m2 * (sigma @ dsigma + dsigma @ sigma)


class ActiveStressLaw:
    name = "abstract"

    def __call__(self, phi):
        raise NotImplementedError

    def derivative(self, phi):
        raise NotImplementedError


@dataclass(frozen=True)
class HillLaw(ActiveStressLaw):
    """l(phi) = K0 + phi^n / (K1 + phi^n)."""

    K0: float
    K1: float
    n: int = 2
    name = "hill"

    def __post_init__(self):
        if not self.K1 > 0:
            raise ConstitutiveError("K1 must be positive")

    def __call__(self, phi):
        t = np.asarray(phi, float) ** self.n
        return self.K0 + t / (self.K1 + t)

    def derivative(self, phi):
        phi = np.asarray(phi, float)
        t = phi**self.n
        return self.K1 * self.n * phi ** (self.n - 1) / (self.K1 + t) ** 2


@dataclass(frozen=True)
class LinearLaw(ActiveStressLaw):
    """l(phi) = K0 phi."""

    K0: float
    name = "linear"

    def __call__(self, phi):
        return self.K0 * np.asarray(phi, float)

    def derivative(self, phi):
        return np.full_like(np.asarray(phi, float), self.K0)


@dataclass(frozen=True)
class ConstantLaw(ActiveStressLaw):
    """l(phi) = K0, which decouples mechanics from the concentration."""

    K0: float
    name = "constant"

    def __call__(self, phi):
        return np.full_like(np.asarray(phi, float), self.K0)

    def derivative(self, phi):
        return np.zeros_like(np.asarray(phi, float))


def eval_M_inverse(law: DiffusionLaw, sigma) -> np.ndarray:
    return law.M_inv(sigma)


def eval_ell(law: ActiveStressLaw, phi):
    return law(phi)


def estimate_M_bound(law: DiffusionLaw, stress_samples, norm: str = "spectral") -> float:
    """Uniform bound of the diffusion tensor over a set of stress samples.

    Args:
        law: Diffusion law.
        stress_samples: Array of shape (n, 2, 2), n >= 1.
        norm: ``"spectral"`` returns max over samples of max(|M|_2, |M^-1|_2),
            the constant that bounds both the tensor and its inverse.
            ``"frobenius"`` does the same with Frobenius norms.

    Returns:
        The bound as a float.
    """
    S = np.asarray(stress_samples, dtype=float).reshape(-1, 2, 2)
    if len(S) == 0:
        raise ValueError("need at least one stress sample")
    M = law.M(S)
    Minv = law.M_inv(S)
    if norm == "spectral":
        f = lambda A: np.abs(np.linalg.eigvalsh(_sym(A))).max(axis=-1)
    elif norm == "frobenius":
        f = lambda A: np.sqrt((A**2).sum(axis=(-2, -1)))
    else:
        raise ValueError(f"unknown norm {norm!r}")
    return float(max(f(M).max(), f(Minv).max()))
