"""Local virtual element space for diffusive flux and concentration.

Local flux DoFs of an element with N edges, for degree k in {0, 1, ...}:

* ``[0, N(k+1))``: values of xi . n (outward normal) at the k+1
  Gauss-Lobatto points of each edge, edge by edge in loop order;
* the integrals of ``xi . grad m`` for m in M_k without the constant;
* the integrals of ``xi . m_perp`` for m_perp in M_k^perp.

For k = 0 the single edge point is the midpoint; for k = 1 the two points
are the edge endpoints, kept separate per edge since normals differ.
Concentrations are discontinuous P_k polynomials stored as monomial
coefficients.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConstitutiveError
from .polybasis import (
    Element,
    ScaledMonomialBasis,
    edge_gauss,
    gauss_lobatto_params,
    lagrange_basis,
    monomial_mass_matrix,
    n_monomials,
    vector_basis_split,
)


def diffusion_ndof(n_edges: int, k: int) -> int:
    return n_edges * (k + 1) + n_monomials(k) - 1 + n_monomials(k - 1)


class DiffusionLocalSpace:
    """Divergence recovery, L2 projection and local blocks on one element.

    Args:
        element: Element geometry with quadrature.
        k: Flux and concentration degree.
    """

    def __init__(self, element: Element, k: int):
        if k < 0:
            raise ValueError("degree must be >= 0")
        self.element = element
        self.k = k
        N = element.n_vertices
        self.nk = n_monomials(k)
        self.n_grad = self.nk - 1
        self.n_perp = n_monomials(k - 1)
        self.off_grad = N * (k + 1)
        self.off_perp = self.off_grad + self.n_grad
        self.ndof = self.off_perp + self.n_perp
        self.nconc = self.nk
        self.edge_params = gauss_lobatto_params(k + 1)
        self._build()

    def _edge_functional(self, g: Callable[[np.ndarray], np.ndarray], deg: int) -> np.ndarray:
        """Rows r with r @ dofs = boundary integral of (xi . n) g for each column of g.

        ``g(pts)`` returns shape (npts, m); result has shape (m, ndof).
        """
        E, k = self.element, self.k
        rows = None
        for e, (a, b, L, n) in enumerate(E.edges()):
            pts, w, s = edge_gauss(a, b, deg + k)
            Lg = lagrange_basis(self.edge_params, s)
            gv = np.asarray(g(pts))
            block = (gv * w[:, None]).T @ Lg
            if rows is None:
                rows = np.zeros((gv.shape[1], self.ndof))
            rows[:, e * (k + 1):(e + 1) * (k + 1)] = block
        return rows

    def _build(self):
        E, k, nk = self.element, self.k, self.nk
        basis = ScaledMonomialBasis(E, k)
        basis1 = ScaledMonomialBasis(E, k + 1)
        H1 = monomial_mass_matrix(E, k + 1)
        H = H1[:nk, :nk]
        self.H = H

        # divergence recovery
        R = self._edge_functional(basis.eval, k)
        for j in range(self.n_grad):
            R[j + 1, self.off_grad + j] -= 1.0
        self.R = R
        self.DIV = np.linalg.solve(H, R)

        # moments against the monomial basis of (P_k)^2
        split = vector_basis_split(E, k)
        n_g = split.grad.shape[1]
        mu = np.zeros((2 * nk, self.ndof))
        Hc = H1[1:, :nk]  # integrals of m_j (j >= 1, degree k+1) times m_a (degree k)
        mu[:n_g] = self._edge_functional(lambda p: basis1.eval(p)[:, 1:], k + 1) - Hc @ self.DIV
        for j in range(self.n_perp):
            mu[n_g + j, self.off_perp + j] = 1.0
        self.moments = np.linalg.solve(split.full.T, mu)
        Hv = np.zeros((2 * nk, 2 * nk))
        Hv[:nk, :nk] = H
        Hv[nk:, nk:] = H
        self.Hv = Hv
        self.Pi0 = np.linalg.solve(Hv, self.moments)

        # polynomial basis -> DoFs
        D = np.zeros((self.ndof, 2 * nk))
        for e, (a, b, L, n) in enumerate(E.edges()):
            pts = a + self.edge_params[:, None] * (b - a)
            V = basis.eval(pts)
            D[e * (k + 1):(e + 1) * (k + 1)] = np.hstack([n[0] * V, n[1] * V])
        q = E.quadrature()
        Vq = basis.eval(q.points)
        Wq = Vq * q.weights[:, None]
        if self.n_grad:
            G = basis.grad(q.points)[:, 1:, :]
            D[self.off_grad:self.off_perp] = np.hstack([(G[:, :, 0] * q.weights[:, None]).T @ Vq,
                                                          (G[:, :, 1] * q.weights[:, None]).T @ Vq])
        if self.n_perp:
            perp = split.perp
            px, py = Vq @ perp[:nk], Vq @ perp[nk:]
            D[self.off_perp:] = np.hstack([(px * q.weights[:, None]).T @ Vq, (py * q.weights[:, None]).T @ Vq])
        self.D = D
        self._Vq = Vq
        self._Wq = Wq
        self.stab_base = (np.eye(self.ndof) - D @ self.Pi0).T @ (np.eye(self.ndof) - D @ self.Pi0)
        self.b2 = R.T.copy()
        self.c2 = H.copy()

    # ------------------------------------------------------------------ local blocks
    def a2(self, Minv_q: np.ndarray) -> np.ndarray:
        """Weighted flux form with M^-1 given at the default quadrature points.

        Args:
            Minv_q: Array (nq, 2, 2) of symmetric positive definite tensors.
        """
        q = self.element.quadrature()
        Minv_q = np.asarray(Minv_q, float).reshape(-1, 2, 2)
        if Minv_q.shape[0] != len(q.weights):
            raise ValueError("coefficient must be sampled at the element quadrature points")
        tr = Minv_q[:, 0, 0] + Minv_q[:, 1, 1]
        det = Minv_q[:, 0, 0] * Minv_q[:, 1, 1] - Minv_q[:, 0, 1] * Minv_q[:, 1, 0]
        if np.any(det <= 0) or np.any(tr <= 0):
            i = int(np.argmax((det <= 0) | (tr <= 0)))
            raise ConstitutiveError(
                f"inverse diffusion tensor is not positive definite at {q.points[i].tolist()}: {Minv_q[i].tolist()}"
            )
        Vq, Wq = self._Vq, self._Wq
        Kp = np.block([
            [Wq.T @ (Minv_q[:, 0, 0, None] * Vq), Wq.T @ (Minv_q[:, 0, 1, None] * Vq)],
            [Wq.T @ (Minv_q[:, 1, 0, None] * Vq), Wq.T @ (Minv_q[:, 1, 1, None] * Vq)],
        ])
        Kp = 0.5 * (Kp + Kp.T)
        s = float(np.linalg.norm(np.tensordot(q.weights, Minv_q, axes=1)))
        A = self.Pi0.T @ Kp @ self.Pi0 + s * self.stab_base
        return 0.5 * (A + A.T)

    def G2(self, g_values: np.ndarray) -> np.ndarray:
        """Minus the integrals of g m_a, with g at the default quadrature points."""
        return -(self._Wq.T @ g_values)

    # ------------------------------------------------------------------ evaluation
    def interpolate(self, xi: Callable[[np.ndarray], np.ndarray], degree: int | None = None) -> np.ndarray:
        """DoFs of a smooth vector field."""
        E, k = self.element, self.k
        d = degree or E.quad_degree + 4
        dofs = np.zeros(self.ndof)
        for e, (a, b, L, n) in enumerate(E.edges()):
            pts = a + self.edge_params[:, None] * (b - a)
            dofs[e * (k + 1):(e + 1) * (k + 1)] = np.asarray(xi(pts), float).reshape(-1, 2) @ n
        q = E.quadrature(d)
        xq = np.asarray(xi(q.points), float).reshape(-1, 2)
        basis = ScaledMonomialBasis(E, k)
        if self.n_grad:
            G = basis.grad(q.points)[:, 1:, :]
            dofs[self.off_grad:self.off_perp] = np.einsum("q,qc,qjc->j", q.weights, xq, G)
        if self.n_perp:
            perp = vector_basis_split(E, k).perp
            V = basis.eval(q.points)
            px, py = V @ perp[:self.nk], V @ perp[self.nk:]
            dofs[self.off_perp:] = (q.weights * xq[:, 0]) @ px + (q.weights * xq[:, 1]) @ py
        return dofs

    def eval_poly(self, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
        V = ScaledMonomialBasis(self.element, self.k).eval(pts)
        return np.column_stack([V @ coeffs[:self.nk], V @ coeffs[self.nk:]])

    def eval_scalar(self, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
        return ScaledMonomialBasis(self.element, self.k).eval(pts) @ coeffs


def divergence_from_dofs(space: DiffusionLocalSpace, dofs: np.ndarray) -> np.ndarray:
    return space.DIV @ dofs


def l2_projection_flux(space: DiffusionLocalSpace, dofs: np.ndarray) -> np.ndarray:
    return space.Pi0 @ dofs


def local_a2h(space: DiffusionLocalSpace, Minv_q: np.ndarray) -> np.ndarray:
    return space.a2(Minv_q)


def local_b2(space: DiffusionLocalSpace) -> np.ndarray:
    return space.b2


def local_c2(space: DiffusionLocalSpace) -> np.ndarray:
    return space.c2


def local_G2(space: DiffusionLocalSpace, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    return space.G2(np.asarray(g(space.element.quadrature().points), float))


def local_F2(a: np.ndarray, b: np.ndarray, phi_D: Callable[[np.ndarray], np.ndarray], k: int,
             degree: int = 10) -> np.ndarray:
    """Integrals of phi_D l_j over the segment a->b, one per Gauss-Lobatto node from ``a``.

    Multiply by the orientation sign of the edge normal to obtain the load
    on the corresponding normal-flux DoFs.
    """
    pts, w, s = edge_gauss(a, b, degree)
    L = lagrange_basis(gauss_lobatto_params(k + 1), s)
    return (L * w[:, None]).T @ np.asarray(phi_D(pts), float)
