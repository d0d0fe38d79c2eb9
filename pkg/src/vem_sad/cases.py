"""Manufactured solutions and the derived loads, sources and boundary data."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .constitutive import (
    ActiveStressLaw,
    ConstantLaw,
    DiffusionLaw,
    ExponentialLaw,
    HillLaw,
    PhysicalParams,
    reconstruct_stress,
)
from .solver import ProblemData

EXAMPLE1_M_BOUND = 11.57701


def _sym(a):
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass
class ManufacturedCase:
    """Exact fields with analytic derivatives.

    Args:
        u, grad_u, hess_u: Displacement (n, 2), gradient (n, 2, 2) with
            ``grad_u[:, c, i] = d u_c / d x_i`` and Hessian (n, 2, 2, 2) with
            ``hess_u[:, c, i, j] = d^2 u_c / d x_i d x_j``.
        phi, grad_phi, hess_phi: Concentration (n,), gradient (n, 2), Hessian (n, 2, 2).
        params: Physical parameters.
        diff_law: Diffusion law.
        ell_law: Active stress law.
        dirichlet: Boundary tags carrying Dirichlet data in both sub-problems.
    """

    u: Callable
    grad_u: Callable
    hess_u: Callable
    phi: Callable
    grad_phi: Callable
    hess_phi: Callable
    params: PhysicalParams
    diff_law: DiffusionLaw
    ell_law: ActiveStressLaw
    dirichlet: frozenset = frozenset({"D"})

    def strain(self, x):
        return _sym(self.grad_u(x))

    def div_u(self, x):
        G = self.grad_u(x)
        return G[:, 0, 0] + G[:, 1, 1]

    def p_tilde(self, x):
        return -self.params.lam * self.div_u(x) + self.ell_law(self.phi(x))

    def grad_p_tilde(self, x):
        Hu = self.hess_u(x)
        grad_div = Hu[:, 0, 0, :] + Hu[:, 1, 1, :]
        return -self.params.lam * grad_div + self.ell_law.derivative(self.phi(x))[:, None] * self.grad_phi(x)

    def sigma(self, x):
        return reconstruct_stress(self.strain(x), self.p_tilde(x), self.params.mu)

    def dsigma(self, x):
        """Partial derivatives of the stress, shape (n, 2, 2, 2) indexed [k, i, j] = d_k sigma_ij."""
        Hu = self.hess_u(x)  # [c, i, k]
        gp = self.grad_p_tilde(x)
        out = np.empty((len(x), 2, 2, 2))
        for k in range(2):
            dG = Hu[:, :, :, k]
            out[:, k] = 2 * self.params.mu * _sym(dG) - gp[:, k, None, None] * np.eye(2)
        return out

    def f(self, x):
        dS = self.dsigma(x)
        return -(dS[:, 0, :, 0] + dS[:, 1, :, 1])

    def zeta(self, x):
        return np.einsum("nij,nj->ni", self.diff_law.M(self.sigma(x)), self.grad_phi(x))

    def div_zeta(self, x):
        S = self.sigma(x)
        dS = self.dsigma(x)
        gphi = self.grad_phi(x)
        M = self.diff_law.M(S)
        out = np.einsum("nij,nij->n", M, self.hess_phi(x))
        for i in range(2):
            dM = self.diff_law.dM(S, dS[:, i])
            out += np.einsum("nj,nj->n", dM[:, i, :], gphi)
        return out

    def g(self, x):
        return self.params.theta * self.phi(x) - self.div_zeta(x)

    def traction(self, x, n):
        return np.einsum("nij,nj->ni", self.sigma(x), n)

    def flux_n(self, x, n):
        return (self.zeta(x) * n).sum(1)

    def problem_data(self) -> ProblemData:
        return ProblemData(
            f=self.f,
            g=self.g,
            u_D=self.u,
            traction=self.traction,
            phi_D=self.phi,
            flux_n=self.flux_n,
            elasticity_dirichlet=self.dirichlet,
            diffusion_dirichlet=self.dirichlet,
        )

    def with_params(self, params: PhysicalParams) -> "ManufacturedCase":
        return ManufacturedCase(self.u, self.grad_u, self.hess_u, self.phi, self.grad_phi, self.hess_phi,
                                params, self.diff_law, self.ell_law, self.dirichlet)


# --------------------------------------------------------------------------- smooth example

def _ex1_u(x):
    X, Y = x[:, 0], x[:, 1]
    return np.column_stack([X * np.cos(X) * np.sin(Y) + X**2, X * np.sin(X) * np.cos(Y) + Y**2]) / 5


def _ex1_grad_u(x):
    X, Y = x[:, 0], x[:, 1]
    c, s, cy, sy = np.cos(X), np.sin(X), np.cos(Y), np.sin(Y)
    G = np.empty((len(x), 2, 2))
    G[:, 0, 0] = c * sy - X * s * sy + 2 * X
    G[:, 0, 1] = X * c * cy
    G[:, 1, 0] = s * cy + X * c * cy
    G[:, 1, 1] = -X * s * sy + 2 * Y
    return G / 5


def _ex1_hess_u(x):
    X, Y = x[:, 0], x[:, 1]
    c, s, cy, sy = np.cos(X), np.sin(X), np.cos(Y), np.sin(Y)
    H = np.empty((len(x), 2, 2, 2))
    H[:, 0, 0, 0] = -2 * s * sy - X * c * sy + 2
    H[:, 0, 0, 1] = H[:, 0, 1, 0] = c * cy - X * s * cy
    H[:, 0, 1, 1] = -X * c * sy
    H[:, 1, 0, 0] = 2 * c * cy - X * s * cy
    H[:, 1, 0, 1] = H[:, 1, 1, 0] = -s * sy - X * c * sy
    H[:, 1, 1, 1] = -X * s * cy + 2
    return H / 5


def _ex1_phi(x):
    X, Y = x[:, 0], x[:, 1]
    return X**2 + Y**2 + np.sin(np.pi * X) + np.cos(np.pi * Y)


def _ex1_grad_phi(x):
    X, Y = x[:, 0], x[:, 1]
    return np.column_stack([2 * X + np.pi * np.cos(np.pi * X), 2 * Y - np.pi * np.sin(np.pi * Y)])


def _ex1_hess_phi(x):
    X, Y = x[:, 0], x[:, 1]
    H = np.zeros((len(x), 2, 2))
    H[:, 0, 0] = 2 - np.pi**2 * np.sin(np.pi * X)
    H[:, 1, 1] = 2 - np.pi**2 * np.cos(np.pi * Y)
    return H


def example1_params(lam=1e3, mu=1e2, theta=1e-3, M_bound=EXAMPLE1_M_BOUND) -> PhysicalParams:
    return PhysicalParams(lam=lam, mu=mu, theta=theta, M_bound=M_bound)


def smooth_case(params: PhysicalParams | None = None, m0: float = 0.1, m1: float = 1e-4,
                K0: float = 1.0, K1: float = 1.0, n: int = 2) -> ManufacturedCase:
    """Trigonometric displacement and concentration on the unit square.

    Defaults are the reference parameters of the convergence study:
    exponential diffusion law and Hill active stress.
    """
    return ManufacturedCase(
        _ex1_u, _ex1_grad_u, _ex1_hess_u, _ex1_phi, _ex1_grad_phi, _ex1_hess_phi,
        params or example1_params(), ExponentialLaw(m0, m1), HillLaw(K0, K1, n),
    )


# --------------------------------------------------------------------------- polynomial patch

def polynomial_case(k2: int, params: PhysicalParams | None = None, m0: float = 0.5,
                    K0: float = 0.3, seed: int = 0) -> ManufacturedCase:
    """Quadratic displacement and degree-k2 concentration with constant coefficients.

    The diffusion law is constant (m1 = 0) and the active stress constant,
    so the exact pressure lies in P_1 and the exact flux in (P_{k2-1})^2:
    both belong to the discrete spaces.
    """
    rng = np.random.default_rng(seed)
    cu = rng.uniform(-1, 1, (2, 6))
    cphi = rng.uniform(-1, 1, 3) * (np.array([1, 1, 1]) if k2 >= 1 else np.array([1, 0, 0]))

    def mono(x):
        X, Y = x[:, 0], x[:, 1]
        return np.column_stack([np.ones_like(X), X, Y, X * X, X * Y, Y * Y])

    def u(x):
        return mono(x) @ cu.T

    def grad_u(x):
        X, Y = x[:, 0], x[:, 1]
        dx = np.column_stack([0 * X, 1 + 0 * X, 0 * X, 2 * X, Y, 0 * X])
        dy = np.column_stack([0 * X, 0 * X, 1 + 0 * X, 0 * X, X, 2 * Y])
        return np.stack([dx @ cu.T, dy @ cu.T], axis=-1)

    def hess_u(x):
        H = np.zeros((len(x), 2, 2, 2))
        for c in range(2):
            H[:, c, 0, 0] = 2 * cu[c, 3]
            H[:, c, 0, 1] = H[:, c, 1, 0] = cu[c, 4]
            H[:, c, 1, 1] = 2 * cu[c, 5]
        return H

    def phi(x):
        return cphi[0] + cphi[1] * x[:, 0] + cphi[2] * x[:, 1]

    def grad_phi(x):
        return np.tile(cphi[1:], (len(x), 1))

    def hess_phi(x):
        return np.zeros((len(x), 2, 2))

    return ManufacturedCase(u, grad_u, hess_u, phi, grad_phi, hess_phi,
                            params or PhysicalParams(lam=10.0, mu=2.0, theta=0.5, M_bound=1.0 / m0 if m0 < 1 else m0),
                            ExponentialLaw(m0, 0.0), ConstantLaw(K0))
