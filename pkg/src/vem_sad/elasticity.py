"""Local virtual element space for displacement and Herrmann pressure.

Local displacement DoFs of an element with N vertices, for degree k:

* ``[0, 2N)``: vertex values, interleaved (x, y) per vertex;
* ``[2N, 2N + 2N(k-1))``: values at the k-1 internal Gauss-Lobatto points of
  each edge, edge by edge in loop order, interleaved;
* the integrals of ``div v * m`` for m in M_{k-1} without the constant;
* the integrals of ``v . m_perp`` for m_perp in M_{k-2}^perp (none for k = 2).

Pressures are discontinuous P_{k-1} polynomials. They are stored as monomial
coefficients rather than moments; the two choices are related by the local
mass matrix and give the same discrete solution.

Vector polynomials in (P_k)^2 use the basis (m_0, 0), ..., (m_n, 0),
(0, m_0), ..., (0, m_n).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import SolverError
from .polybasis import (
    Element,
    ScaledMonomialBasis,
    derivative_matrices,
    edge_gauss,
    gauss_lobatto,
    lagrange_basis,
    monomial_mass_matrix,
    n_monomials,
    vector_basis_split,
)


def elasticity_ndof(n_edges: int, k: int = 2) -> int:
    return 2 * n_edges * k + n_monomials(k - 1) - 1 + n_monomials(k - 3)


def _strain_operators(k: int, h: float):
    """Coefficient maps (P_k)^2 -> P_k for exx, eyy, exy."""
    nk = n_monomials(k)
    Dx, Dy = derivative_matrices(k, h)
    Z = np.zeros((nk, nk))
    return np.hstack([Dx, Z]), np.hstack([Z, Dy]), 0.5 * np.hstack([Dy, Dx]), Dx, Dy


class ElasticityLocalSpace:
    """Projections and local blocks of the displacement/pressure pair on one element.

    Args:
        element: Element geometry with quadrature.
        k: Displacement degree (at least 2).
    """

    def __init__(self, element: Element, k: int = 2):
        if k < 2:
            raise ValueError("displacement degree must be >= 2")
        self.element = element
        self.k = k
        N = element.n_vertices
        self.nk = n_monomials(k)
        self.n_low = n_monomials(k - 2)
        self.n_div = n_monomials(k - 1) - 1
        self.n_perp = n_monomials(k - 3)
        self.n_edge_nodes = k - 1
        self.off_edge = 2 * N
        self.off_div = 2 * N + 2 * N * (k - 1)
        self.off_perp = self.off_div + self.n_div
        self.ndof = self.off_perp + self.n_perp
        self.npress = n_monomials(k - 1)
        self._build_boundary_nodes()
        self._build()

    # ------------------------------------------------------------------ layout
    def node_dofs(self, edge: int, j: int) -> tuple[int, int]:
        """DoF pair of node j (0..k) on local edge ``edge`` in traversal order."""
        N = self.element.n_vertices
        if j == 0:
            v = edge
        elif j == self.k:
            v = (edge + 1) % N
        else:
            base = self.off_edge + 2 * (self.n_edge_nodes * edge + j - 1)
            return base, base + 1
        return 2 * v, 2 * v + 1

    def _build_boundary_nodes(self):
        x, w = gauss_lobatto(self.k + 1)
        s = 0.5 * (x + 1.0)
        pts, wts, nrm, dx, dy = [], [], [], [], []
        for e, (a, b, L, n) in enumerate(self.element.edges()):
            for j in range(self.k + 1):
                pts.append(a + s[j] * (b - a))
                wts.append(0.5 * w[j] * L)
                nrm.append(n)
                ix, iy = self.node_dofs(e, j)
                dx.append(ix)
                dy.append(iy)
        self.bnd_points = np.array(pts)
        self.bnd_weights = np.array(wts)
        self.bnd_normals = np.array(nrm)
        self.bnd_dx = np.array(dx)
        self.bnd_dy = np.array(dy)

    def _boundary_row(self, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
        """Row r with r @ dofs = boundary integral of v . (gx, gy) (gx, gy at the nodes).

        Exact when v . g has degree <= 2k - 1 on each edge.
        """
        r = np.zeros(self.ndof)
        np.add.at(r, self.bnd_dx, self.bnd_weights * gx)
        np.add.at(r, self.bnd_dy, self.bnd_weights * gy)
        return r

    # ------------------------------------------------------------------ projections
    def _build(self):
        E, k, nk = self.element, self.k, self.nk
        basis = ScaledMonomialBasis(E, k)
        H = monomial_mass_matrix(E, k)
        exx, eyy, exy, Dx, Dy = _strain_operators(k, E.h)
        self.strain_ops = (exx, eyy, exy)
        self.K = exx.T @ H @ exx + eyy.T @ H @ eyy + 2.0 * exy.T @ H @ exy

        # polynomial basis -> DoFs
        D = np.zeros((self.ndof, 2 * nk))
        Vb = basis.eval(self.bnd_points)
        D[self.bnd_dx, :nk] = Vb
        D[self.bnd_dy, nk:] = Vb
        div = np.hstack([Dx, Dy])
        D[self.off_div:self.off_perp] = H[1:self.n_div + 1] @ div
        q = E.quadrature()
        Vq = basis.eval(q.points)
        if self.n_perp:
            perp = vector_basis_split(E, k - 2).perp
            nl = self.n_low
            Vl = Vq[:, :nl]
            px, py = Vl @ perp[:nl], Vl @ perp[nl:]
            D[self.off_perp:] = np.hstack([(px * q.weights[:, None]).T @ Vq, (py * q.weights[:, None]).T @ Vq])
        self.D = D

        # moments of v against the monomial basis of (P_{k-2})^2
        split = vector_basis_split(E, k - 2)
        n_grad = split.grad.shape[1]
        mu = np.zeros((2 * self.n_low, self.ndof))
        Vm = ScaledMonomialBasis(E, k - 1).eval(self.bnd_points)
        nx, ny = self.bnd_normals[:, 0], self.bnd_normals[:, 1]
        for j in range(n_grad):
            mu[j] = self._boundary_row(nx * Vm[:, j + 1], ny * Vm[:, j + 1])
            mu[j, self.off_div + j] -= 1.0
        for j in range(self.n_perp):
            mu[n_grad + j, self.off_perp + j] = 1.0
        self.low_moments = np.linalg.solve(split.full.T, mu)

        # energy projection
        nl = self.n_low
        div_eps_x = (Dx @ exx + Dy @ exy)[:nl]
        div_eps_y = (Dx @ exy + Dy @ eyy)[:nl]
        B = -np.vstack([div_eps_x, div_eps_y]).T @ self.low_moments
        Exx, Eyy, Exy = Vb @ exx, Vb @ eyy, Vb @ exy
        for a in range(2 * nk):
            tx = Exx[:, a] * nx + Exy[:, a] * ny
            ty = Exy[:, a] * nx + Eyy[:, a] * ny
            B[a] += self._boundary_row(tx, ty)
        Vv = basis.eval(E.xy)
        X = E.scaled(E.xy)
        N = E.n_vertices
        Pp = np.zeros((3, 2 * nk))
        Pd = np.zeros((3, self.ndof))
        Pp[0, :nk] = Vv.sum(0)
        Pp[1, nk:] = Vv.sum(0)
        Pp[2, :nk] = -(X[:, 1:2] * Vv).sum(0)
        Pp[2, nk:] = (X[:, 0:1] * Vv).sum(0)
        Pd[0, 0:2 * N:2] = 1.0
        Pd[1, 1:2 * N:2] = 1.0
        Pd[2, 0:2 * N:2] = -X[:, 1]
        Pd[2, 1:2 * N:2] = X[:, 0]
        G = self.K + Pp.T @ Pp
        try:
            self.Pi = np.linalg.solve(G, B + Pp.T @ Pd)
        except np.linalg.LinAlgError as exc:
            raise SolverError("energy projection is singular; the element is degenerate") from exc

        Hl = H[:nl, :nl]
        self.H_low = Hl
        Hv = np.zeros((2 * nl, 2 * nl))
        Hv[:nl, :nl] = Hl
        Hv[nl:, nl:] = Hl
        self.Pi0 = np.linalg.solve(Hv, self.low_moments)

        self.H = H
        self.c1 = H[:self.npress, :self.npress].copy()
        b1 = np.zeros((self.ndof, self.npress))
        b1[:, 0] = -self._boundary_row(nx, ny)
        for j in range(self.n_div):
            b1[self.off_div + j, j + 1] = -1.0
        self.b1 = b1
        self._quad_vals = Vq

    # ------------------------------------------------------------------ local blocks
    def a1(self, mu: float) -> np.ndarray:
        """2 mu [a(Pi u, Pi v) + dofs(I - Pi) u . dofs(I - Pi) v]."""
        R = np.eye(self.ndof) - self.D @ self.Pi
        A = self.Pi.T @ self.K @ self.Pi + R.T @ R
        return 2.0 * mu * 0.5 * (A + A.T)

    def F1(self, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Load vector of the integral of f . Pi0 v."""
        q = self.element.quadrature()
        fv = np.asarray(f(q.points), dtype=float).reshape(-1, 2)
        Vl = self._quad_vals[:, :self.n_low] * q.weights[:, None]
        return self.Pi0.T @ np.concatenate([Vl.T @ fv[:, 0], Vl.T @ fv[:, 1]])

    def G1(self, ell_values: np.ndarray, lam: float) -> np.ndarray:
        """-(1/lam) times the integrals of l(phi) m_a, with l(phi) at quadrature points."""
        q = self.element.quadrature()
        return -(self._quad_vals[:, :self.npress].T @ (q.weights * ell_values)) / lam

    # ------------------------------------------------------------------ evaluation
    def interpolate(self, u: Callable[[np.ndarray], np.ndarray], degree: int | None = None) -> np.ndarray:
        """DoFs of a smooth vector field (the interpolant used in tests)."""
        E, k = self.element, self.k
        d = degree or E.quad_degree + 4
        dofs = np.zeros(self.ndof)
        vals = np.asarray(u(self.bnd_points), float).reshape(-1, 2)
        dofs[self.bnd_dx] = vals[:, 0]
        dofs[self.bnd_dy] = vals[:, 1]
        q = E.quadrature(d)
        bm = ScaledMonomialBasis(E, k - 1)
        uq = np.asarray(u(q.points), float).reshape(-1, 2)
        grads = bm.grad(q.points)
        for j in range(self.n_div):
            vol = -np.dot(q.weights, (uq * grads[:, j + 1]).sum(1))
            bnd = 0.0
            for a, b, L, n in E.edges():
                pts, w, _ = edge_gauss(a, b, d)
                bnd += np.dot(w, (np.asarray(u(pts), float).reshape(-1, 2) @ n) * bm.eval(pts)[:, j + 1])
            dofs[self.off_div + j] = vol + bnd
        if self.n_perp:
            perp = vector_basis_split(E, k - 2).perp
            Vl = ScaledMonomialBasis(E, k - 2).eval(q.points)
            nl = self.n_low
            for j in range(self.n_perp):
                pv = np.column_stack([Vl @ perp[:nl, j], Vl @ perp[nl:, j]])
                dofs[self.off_perp + j] = np.dot(q.weights, (uq * pv).sum(1))
        return dofs

    def eval_poly(self, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Evaluate a (P_k)^2 coefficient vector at points, shape (npts, 2)."""
        V = ScaledMonomialBasis(self.element, self.k).eval(pts)
        return np.column_stack([V @ coeffs[:self.nk], V @ coeffs[self.nk:]])

    def strain_poly(self, coeffs: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Strain of a (P_k)^2 coefficient vector at points, shape (npts, 2, 2)."""
        V = ScaledMonomialBasis(self.element, self.k).eval(pts)
        exx, eyy, exy = (V @ (op @ coeffs) for op in self.strain_ops)
        return np.stack([np.stack([exx, exy], -1), np.stack([exy, eyy], -1)], -2)


def energy_projection(space: ElasticityLocalSpace, dofs: np.ndarray) -> np.ndarray:
    return space.Pi @ dofs


def l2_projection_lowdeg(space: ElasticityLocalSpace, dofs: np.ndarray) -> np.ndarray:
    return space.Pi0 @ dofs


def local_a1h(space: ElasticityLocalSpace, mu: float) -> np.ndarray:
    return space.a1(mu)


def local_b1(space: ElasticityLocalSpace) -> np.ndarray:
    return space.b1


def local_c1(space: ElasticityLocalSpace) -> np.ndarray:
    return space.c1


def local_F1h(space: ElasticityLocalSpace, f) -> np.ndarray:
    return space.F1(f)


def local_traction(a: np.ndarray, b: np.ndarray, t: Callable[[np.ndarray], np.ndarray], k: int = 2,
                   degree: int = 10) -> np.ndarray:
    """Integrals of t . (l_j e_c) over the segment a->b.

    Returns shape (k+1, 2): row j belongs to the j-th Gauss-Lobatto node
    counted from ``a``, column c to the displacement component.
    """
    pts, w, s = edge_gauss(a, b, degree)
    L = lagrange_basis(0.5 * (gauss_lobatto(k + 1)[0] + 1.0), s)
    tv = np.asarray(t(pts), float).reshape(-1, 2)
    return (L * w[:, None]).T @ tv
