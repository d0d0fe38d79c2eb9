"""Scaled monomials, vector basis splits and quadrature on polygons and edges.

Monomials on an element E are m_a(x) = ((x - x_E) / h_E)^a, ordered by total
degree and then by decreasing power of the first coordinate:

    1, X, Y, X^2, XY, Y^2, ...

so the monomial with exponents (a1, a2) sits at index d(d+1)/2 + a2 where
d = a1 + a2. Polynomials are stored as coefficient vectors in this basis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre

from .errors import MeshError
from .mesh import centroid_sees_all_edges, polygon_centroid, polygon_diameter, signed_area


def n_monomials(k: int) -> int:
    return 0 if k < 0 else (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def exponents(k: int) -> tuple[tuple[int, int], ...]:
    return tuple((d - j, j) for d in range(k + 1) for j in range(d + 1))


def monomial_index(a1: int, a2: int) -> int:
    d = a1 + a2
    return d * (d + 1) // 2 + a2


# --------------------------------------------------------------------------- quadrature

@lru_cache(maxsize=None)
def _gauss_01(n: int):
    x, w = legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on the reference triangle (0,0),(1,0),(0,1).

    Exact for polynomials of total degree ``d``. Weights sum to 1/2.
    """
    n = max(1, math.ceil((d + 2) / 2))
    u, wu = _gauss_01(n)
    v, wv = _gauss_01(n)
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - U)
    pts = np.column_stack([U.ravel(), ((1.0 - U) * V).ravel()])
    return pts, W.ravel()


def _ear_clip(xy: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple counter-clockwise polygon by ear clipping."""
    idx = list(range(len(xy)))
    tris = []

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 10 * len(xy) ** 2:
            raise MeshError("ear clipping failed: polygon is degenerate")
        for i in range(len(idx)):
            p, c, n = idx[i - 1], idx[i], idx[(i + 1) % len(idx)]
            if cross(xy[p], xy[c], xy[n]) <= 0:
                continue
            inside = False
            for q in idx:
                if q in (p, c, n):
                    continue
                if (cross(xy[p], xy[c], xy[q]) >= 0 and cross(xy[c], xy[n], xy[q]) >= 0
                        and cross(xy[n], xy[p], xy[q]) >= 0):
                    inside = True
                    break
            if not inside:
                tris.append((p, c, n))
                idx.pop(i)
                break
        else:
            raise MeshError("ear clipping failed: no ear found")
    tris.append(tuple(idx))
    return tris


@dataclass(frozen=True)
class PolygonQuadrature:
    points: np.ndarray
    weights: np.ndarray
    degree: int


def polygon_quadrature(xy: np.ndarray, d: int, centroid: np.ndarray | None = None) -> PolygonQuadrature:
    """Quadrature of exactness ``d`` on a simple counter-clockwise polygon.

    Uses a fan from the centroid when the centroid sees every edge and an
    ear-clipping triangulation otherwise.
    """
    if d < 0:
        raise ValueError("degree must be >= 0")
    xy = np.asarray(xy, dtype=float)
    c = polygon_centroid(xy) if centroid is None else centroid
    if centroid_sees_all_edges(xy, c):
        nxt = np.roll(xy, -1, axis=0)
        tris = [(c, xy[i], nxt[i]) for i in range(len(xy))]
    else:
        tris = [(xy[a], xy[b], xy[e]) for a, b, e in _ear_clip(xy)]
    ref, w = triangle_rule(d)
    pts, wts = [], []
    for a, b, e in tris:
        J = np.column_stack([b - a, e - a])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        pts.append(a + ref @ J.T)
        wts.append(w * det)
    return PolygonQuadrature(np.vstack(pts), np.concatenate(wts), d)


@lru_cache(maxsize=None)
def gauss_lobatto(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto nodes and weights on [-1, 1]; ``p = 1`` is the midpoint rule."""
    if p < 1:
        raise ValueError("need at least one point")
    if p == 1:
        return np.zeros(1), np.array([2.0])
    if p == 2:
        return np.array([-1.0, 1.0]), np.array([1.0, 1.0])
    c = np.zeros(p)
    c[-1] = 1.0  # P_{p-1}
    interior = np.sort(legendre.legroots(legendre.legder(c)))
    x = np.concatenate([[-1.0], interior, [1.0]])
    w = 2.0 / (p * (p - 1) * legendre.legval(x, c) ** 2)
    return x, w


def edge_gauss_lobatto(a: np.ndarray, b: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Lobatto points of the segment a->b and weights summing to its length."""
    x, w = gauss_lobatto(p)
    a, b = np.asarray(a, float), np.asarray(b, float)
    s = 0.5 * (x + 1.0)
    return a + s[:, None] * (b - a), 0.5 * w * np.linalg.norm(b - a)


def edge_gauss(a: np.ndarray, b: np.ndarray, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gauss-Legendre rule of exactness ``d`` on a->b.

    Returns points, weights (summing to the length) and the parameter
    s in [0, 1] of each point.
    """
    s, w = _gauss_01(max(1, math.ceil((d + 1) / 2)))
    a, b = np.asarray(a, float), np.asarray(b, float)
    return a + s[:, None] * (b - a), w * np.linalg.norm(b - a), s


# --------------------------------------------------------------------------- elements

class Element:
    """Geometry of one polygon plus cached quadrature.

    Args:
        xy: Counter-clockwise vertex coordinates, shape (N, 2).
        quad_degree: Exactness of the default volume quadrature.
    """

    def __init__(self, xy: np.ndarray, quad_degree: int = 8):
        self.xy = np.asarray(xy, dtype=float)
        self.area = signed_area(self.xy)
        if self.area <= 0:
            raise MeshError("element must be counter-clockwise with positive area")
        self.centroid = polygon_centroid(self.xy)
        self.h = polygon_diameter(self.xy)
        self.quad_degree = quad_degree
        self._quad: dict[int, PolygonQuadrature] = {}

    @property
    def n_vertices(self) -> int:
        return len(self.xy)

    def quadrature(self, d: int | None = None) -> PolygonQuadrature:
        d = self.quad_degree if d is None else d
        if d not in self._quad:
            self._quad[d] = polygon_quadrature(self.xy, d, self.centroid)
        return self._quad[d]

    def edges(self):
        """Yield (a, b, length, outward unit normal) for each edge in loop order."""
        nxt = np.roll(self.xy, -1, axis=0)
        for a, b in zip(self.xy, nxt):
            t = b - a
            L = float(np.hypot(*t))
            yield a, b, L, np.array([t[1], -t[0]]) / L

    def scaled(self, pts: np.ndarray) -> np.ndarray:
        return (np.asarray(pts, dtype=float) - self.centroid) / self.h


# --------------------------------------------------------------------------- bases

class ScaledMonomialBasis:
    """Scaled monomials of degree <= k on an element."""

    def __init__(self, element: Element, k: int):
        if k < 0:
            raise ValueError("k must be >= 0")
        self.element = element
        self.k = k
        self.exponents = exponents(k)

    def __len__(self) -> int:
        return n_monomials(self.k)

    def eval(self, pts: np.ndarray) -> np.ndarray:
        """Values, shape (npts, nm)."""
        X = self.element.scaled(np.atleast_2d(pts))
        return monomials_at(X, self.k)

    def grad(self, pts: np.ndarray) -> np.ndarray:
        """Physical gradients, shape (npts, nm, 2)."""
        X = self.element.scaled(np.atleast_2d(pts))
        V = monomials_at(X, self.k)
        G = np.zeros(V.shape + (2,))
        for i, (a1, a2) in enumerate(self.exponents):
            if a1:
                G[:, i, 0] = a1 * V[:, monomial_index(a1 - 1, a2)]
            if a2:
                G[:, i, 1] = a2 * V[:, monomial_index(a1, a2 - 1)]
        return G / self.element.h

    def derivative_matrices(self) -> tuple[np.ndarray, np.ndarray]:
        """Dx, Dy with coeffs(dp/dx) = Dx @ coeffs(p), both in the degree-k basis."""
        return derivative_matrices(self.k, self.element.h)


def monomials_at(X: np.ndarray, k: int) -> np.ndarray:
    """Monomials of degree <= k at already-scaled coordinates ``X``."""
    x, y = X[:, 0], X[:, 1]
    cols = [np.ones_like(x)]
    for d in range(1, k + 1):
        prev = cols[-d:]
        cols.extend([c * x for c in prev])
        cols.append(prev[-1] * y)
    return np.column_stack(cols)


def derivative_matrices(k: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    nm = n_monomials(k)
    Dx = np.zeros((nm, nm))
    Dy = np.zeros((nm, nm))
    for i, (a1, a2) in enumerate(exponents(k)):
        if a1:
            Dx[monomial_index(a1 - 1, a2), i] = a1 / h
        if a2:
            Dy[monomial_index(a1, a2 - 1), i] = a2 / h
    return Dx, Dy


def monomial_basis(element: Element, k: int) -> ScaledMonomialBasis:
    return ScaledMonomialBasis(element, k)


@dataclass(frozen=True)
class VectorBasisSplit:
    """Coefficients of M_k^grad and M_k^perp in the (P_k)^2 monomial basis.

    Columns of ``grad`` and ``perp`` are vector polynomials stored as
    [x-component coefficients; y-component coefficients], each block of
    length (k+1)(k+2)/2.
    """

    k: int
    grad: np.ndarray
    perp: np.ndarray

    @property
    def full(self) -> np.ndarray:
        return np.hstack([self.grad, self.perp])


def vector_basis_split(element: Element, k: int) -> VectorBasisSplit:
    """M_k^grad = grad M_{k+1} minus the zero field, M_k^perp = m_perp M_{k-1}.

    m_perp = ((y - y_E)/h_E, (x_E - x)/h_E).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    nk = n_monomials(k)
    Dx, Dy = derivative_matrices(k + 1, element.h)
    grad = np.vstack([Dx[:nk, 1:], Dy[:nk, 1:]])
    perp = np.zeros((2 * nk, n_monomials(k - 1)))
    for j, (a1, a2) in enumerate(exponents(k - 1)):
        perp[monomial_index(a1, a2 + 1), j] = 1.0
        perp[nk + monomial_index(a1 + 1, a2), j] = -1.0
    return VectorBasisSplit(k, grad, perp)


def monomial_mass_matrix(element: Element, k: int, degree: int | None = None) -> np.ndarray:
    """Matrix of integrals of m_i m_j over the element (k >= 0)."""
    q = element.quadrature(max(2 * k, element.quad_degree if degree is None else degree))
    V = ScaledMonomialBasis(element, k).eval(q.points)
    H = (V * q.weights[:, None]).T @ V
    H = 0.5 * (H + H.T)
    if k > 0:
        cond = np.linalg.cond(H)
        if cond > 1e12:
            warnings.warn(f"monomial mass matrix is ill-conditioned (cond = {cond:.2e})", RuntimeWarning)
    return H


def polygon_moment(xy: np.ndarray, a1: int, a2: int) -> float:
    """Integral of x^a1 y^a2 over a polygon by the divergence theorem.

    Exact up to rounding: the edge integral of x^(a1+1) y^a2 / (a1+1) n_x
    is a polynomial of degree a1+a2+1 in the edge parameter, integrated by
    Gauss-Legendre with enough points.
    """
    xy = np.asarray(xy, dtype=float)
    total = 0.0
    s, w = _gauss_01(max(1, math.ceil((a1 + a2 + 2) / 2)))
    for a, b in zip(xy, np.roll(xy, -1, axis=0)):
        p = a + s[:, None] * (b - a)
        total += (b[1] - a[1]) * float(np.dot(w, p[:, 0] ** (a1 + 1) * p[:, 1] ** a2)) / (a1 + 1)
    return total


def lagrange_basis(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Lagrange polynomials on ``nodes`` evaluated at ``s``, shape (len(s), len(nodes))."""
    nodes = np.asarray(nodes, float)
    s = np.atleast_1d(np.asarray(s, float))
    L = np.ones((len(s), len(nodes)))
    for j, xj in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != j:
                L[:, j] *= (s - xm) / (xj - xm)
    return L


def gauss_lobatto_params(p: int) -> np.ndarray:
    """Gauss-Lobatto nodes mapped to the edge parameter interval [0, 1]."""
    return 0.5 * (gauss_lobatto(p)[0] + 1.0)
