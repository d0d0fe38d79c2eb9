"""Global assembly, boundary conditions, saddle-point solves and the Picard loop."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .constitutive import ActiveStressLaw, DiffusionLaw, PhysicalParams, reconstruct_stress
from .diffusion import DiffusionLocalSpace, local_F2
from .elasticity import ElasticityLocalSpace, local_traction
from .errors import ConvergenceError, MeshError, SolverError
from .mesh import PolygonalMesh
from .polybasis import Element, gauss_lobatto_params, n_monomials

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------- problem data

@dataclass
class ProblemData:
    """Loads and boundary data. Missing callables mean zero data.

    Point arrays have shape (n, 2). ``traction`` and ``flux_n`` also receive
    the outward unit normals, shape (n, 2).

    Attributes:
        f: Body force, returns (n, 2).
        g: Source of the concentration equation, returns (n,).
        u_D: Displacement on the elasticity Dirichlet part, returns (n, 2).
        traction: Traction on the rest of the boundary, returns (n, 2).
        phi_D: Concentration on the diffusion Dirichlet part, returns (n,).
        flux_n: Normal flux on the rest of the boundary, returns (n,).
        elasticity_dirichlet: Boundary tags where u is prescribed.
        diffusion_dirichlet: Boundary tags where phi is prescribed.
    """

    f: Callable | None = None
    g: Callable | None = None
    u_D: Callable | None = None
    traction: Callable | None = None
    phi_D: Callable | None = None
    flux_n: Callable | None = None
    elasticity_dirichlet: frozenset = frozenset({"D"})
    diffusion_dirichlet: frozenset = frozenset({"D"})

    def __post_init__(self):
        self.elasticity_dirichlet = frozenset(self.elasticity_dirichlet)
        self.diffusion_dirichlet = frozenset(self.diffusion_dirichlet)


# --------------------------------------------------------------------------- discretisation

class Discretization:
    """Local spaces and global DoF numbering on a mesh.

    Global unknowns are ordered [u | p] for elasticity and [zeta | phi] for
    diffusion. Displacement: 2 per vertex, 2(k1-1) per edge, interior
    moments per element. Flux: k2+1 normal values per edge measured against
    the edge normal pointing right of a->b (a < b), then interior moments.

    Args:
        mesh: Polygonal mesh.
        k1: Displacement degree.
        k2: Flux and concentration degree.
        quad_degree: Exactness of the element quadrature, default 2 max(k1, k2) + 4.
    """

    def __init__(self, mesh: PolygonalMesh, k1: int = 2, k2: int = 1, quad_degree: int | None = None):
        self.mesh = mesh
        self.k1, self.k2 = k1, k2
        self.quad_degree = quad_degree or 2 * max(k1, k2) + 4
        self.elements = [Element(mesh.element_coords(K), self.quad_degree) for K in range(mesh.n_elements)]
        try:
            self.V1 = [ElasticityLocalSpace(E, k1) for E in self.elements]
            self.V2 = [DiffusionLocalSpace(E, k2) for E in self.elements]
        except np.linalg.LinAlgError as exc:
            raise MeshError(f"local projection failed on a degenerate element: {exc}") from exc
        self._number()

    def _number(self):
        m, k1, k2 = self.mesh, self.k1, self.k2
        Nv, Ne, NE = m.n_vertices, m.n_edges, m.n_elements
        n_int1 = n_monomials(k1 - 1) - 1 + n_monomials(k1 - 3)
        self.n_u = 2 * Nv + 2 * (k1 - 1) * Ne + n_int1 * NE
        self.n_p = n_monomials(k1 - 1) * NE
        n_int2 = n_monomials(k2) - 1 + n_monomials(k2 - 1)
        self.n_z = (k2 + 1) * Ne + n_int2 * NE
        self.n_phi = n_monomials(k2) * NE
        self.u_map, self.p_map, self.z_map, self.z_sign, self.phi_map = [], [], [], [], []
        off_e1 = 2 * Nv
        off_i1 = off_e1 + 2 * (k1 - 1) * Ne
        off_i2 = (k2 + 1) * Ne
        np1, nq2 = n_monomials(k1 - 1), n_monomials(k2)
        for K, loop in enumerate(m.elements):
            N = len(loop)
            S1 = self.V1[K]
            g = np.empty(S1.ndof, dtype=np.int64)
            g[0:2 * N:2] = 2 * loop
            g[1:2 * N:2] = 2 * loop + 1
            zmap = np.empty(self.V2[K].ndof, dtype=np.int64)
            zsgn = np.ones(self.V2[K].ndof)
            for i, (e, s) in enumerate(zip(m.element_edges[K], m.element_edge_signs[K])):
                for t in range(k1 - 1):
                    tg = t if s > 0 else k1 - 2 - t
                    base = off_e1 + 2 * ((k1 - 1) * e + tg)
                    li = S1.off_edge + 2 * ((k1 - 1) * i + t)
                    g[li], g[li + 1] = base, base + 1
                for t in range(k2 + 1):
                    tg = t if s > 0 else k2 - t
                    zmap[i * (k2 + 1) + t] = (k2 + 1) * e + tg
                    zsgn[i * (k2 + 1) + t] = s
            g[S1.off_div:] = off_i1 + n_int1 * K + np.arange(n_int1)
            zmap[(k2 + 1) * N:] = off_i2 + n_int2 * K + np.arange(n_int2)
            self.u_map.append(g)
            self.z_map.append(zmap)
            self.z_sign.append(zsgn)
            self.p_map.append(np1 * K + np.arange(np1))
            self.phi_map.append(nq2 * K + np.arange(nq2))

    @property
    def n_dofs_elasticity(self) -> int:
        return self.n_u + self.n_p

    @property
    def n_dofs_diffusion(self) -> int:
        return self.n_z + self.n_phi

    @property
    def n_dofs(self) -> int:
        return self.n_dofs_elasticity + self.n_dofs_diffusion

    # ------------------------------------------------------------------ boundary helpers
    def boundary_edges(self, tags: Iterable[str], complement: bool = False):
        """Yield (edge, element, sign, a, b, outward normal) for boundary edges.

        ``a`` and ``b`` are the global edge endpoints with a < b.
        """
        tags = set(tags)
        m = self.mesh
        for e, tag in sorted(m.boundary_tags.items()):
            if (tag in tags) == complement:
                continue
            K = int(m.edge_elements[e, 0])
            i = int(np.flatnonzero(m.element_edges[K] == e)[0])
            s = int(m.element_edge_signs[K][i])
            ia, ib = m.edges[e]
            a, b = m.vertices[ia], m.vertices[ib]
            t = b - a
            n = s * np.array([t[1], -t[0]]) / np.hypot(*t)
            yield e, K, s, a, b, n

    def elasticity_edge_dofs(self, e: int) -> np.ndarray:
        """Global displacement DoFs of edge e ordered by node from a, shape (k1+1, 2)."""
        ia, ib = self.mesh.edges[e]
        off = 2 * self.mesh.n_vertices + 2 * (self.k1 - 1) * e
        rows = [[2 * ia, 2 * ia + 1]]
        rows += [[off + 2 * t, off + 2 * t + 1] for t in range(self.k1 - 1)]
        rows.append([2 * ib, 2 * ib + 1])
        return np.array(rows, dtype=np.int64)

    def elasticity_node_points(self, e: int) -> np.ndarray:
        ia, ib = self.mesh.edges[e]
        a, b = self.mesh.vertices[ia], self.mesh.vertices[ib]
        s = gauss_lobatto_params(self.k1 + 1)
        return a + s[:, None] * (b - a)


# --------------------------------------------------------------------------- saddle systems

@dataclass
class SaddleSystem:
    """Block system [[A, B], [B^T, -c C]] [x; y] = [F; G] with x partly prescribed."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    c: float
    F: np.ndarray
    G: np.ndarray
    fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    fixed_values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def matrix(self) -> sp.csr_matrix:
        return sp.bmat([[self.A, self.B], [self.B.T, -self.c * self.C]], format="csr")

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.F, self.G])

    @property
    def n_first(self) -> int:
        return self.A.shape[0]


class SaddleFactorization:
    """Sparse LU of a saddle system after symmetric elimination of fixed DoFs.

    The factorisation is reused across right-hand sides.
    """

    def __init__(self, system: SaddleSystem):
        S = system.matrix().tocsc()
        n = S.shape[0]
        self.n = n
        self.fixed = np.asarray(system.fixed, dtype=np.int64)
        mask = np.ones(n, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        self.S = S
        self.S_ff = S[self.free][:, self.free].tocsc()
        self.S_fc = S[self.free][:, self.fixed].tocsc()
        # symmetric equilibration; the blocks differ by orders of magnitude in mu and lambda
        rmax = abs(self.S_ff).max(axis=1).toarray().ravel()
        if np.any(rmax == 0):
            raise SolverError("the system has an empty row; check boundary tags and parameters")
        self.scale = 1.0 / np.sqrt(rmax)
        Dg = sp.diags(self.scale)
        try:
            self.lu = splu((Dg @ self.S_ff @ Dg).tocsc())
        except RuntimeError as exc:
            raise SolverError(
                f"factorisation failed ({exc}); the system is singular, check that the Dirichlet part "
                "is non-empty and the mesh is valid"
            ) from exc

    def _solve(self, b: np.ndarray) -> np.ndarray:
        return self.scale * self.lu.solve(self.scale * b)

    def reduced_matrix(self) -> sp.csc_matrix:
        return self.S_ff

    def solve(self, rhs: np.ndarray, fixed_values: np.ndarray, check: float = 1e-10) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.fixed] = fixed_values
        b = rhs[self.free] - self.S_fc @ x[self.fixed]
        xf = self._solve(b)
        if not np.all(np.isfinite(xf)):
            raise SolverError("direct solve produced non-finite values; the system is singular")
        r = self.S_ff @ xf - b
        scale = max(np.abs(b).max(initial=0.0), 1e-300)
        res = np.abs(r).max(initial=0.0) / scale
        if res > check:
            xf = xf - self._solve(r)
            res = np.abs(self.S_ff @ xf - b).max(initial=0.0) / scale
            if res > check:
                raise SolverError(f"saddle solve residual {res:.2e} exceeds {check:.0e}; the system is ill-conditioned")
        x[self.free] = xf
        self.last_residual = res
        return x


def solve_saddle(system: SaddleSystem) -> tuple[np.ndarray, np.ndarray]:
    """Solve a saddle system; returns the two blocks (x, y)."""
    z = SaddleFactorization(system).solve(system.rhs(), system.fixed_values)
    return z[:system.n_first], z[system.n_first:]


# --------------------------------------------------------------------------- assembly

def _coo(n_rows, n_cols, rows, cols, vals):
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_rows, n_cols)).tocsr()


def _element_ell(disc: Discretization, K: int, ell_law: ActiveStressLaw, phi: np.ndarray | None) -> np.ndarray:
    q = disc.elements[K].quadrature()
    if phi is None:
        vals = np.zeros(len(q.weights))
    else:
        vals = disc.V2[K].eval_scalar(phi[disc.phi_map[K]], q.points)
    return ell_law(vals)


def assemble_elasticity(disc: Discretization, params: PhysicalParams, ell_law: ActiveStressLaw,
                        phi_h: np.ndarray | None, data: ProblemData) -> SaddleSystem:
    """Global displacement/pressure system for a given concentration."""
    A, B, C, F = assemble_elasticity_operator(disc, params, data)
    return SaddleSystem(A, B, C, 1.0 / params.lam, F, elasticity_G1(disc, params, ell_law, phi_h),
                        *elasticity_dirichlet(disc, data))


def assemble_elasticity_operator(disc: Discretization, params: PhysicalParams, data: ProblemData):
    """Blocks A, B, C and the load F (body force plus traction)."""
    ra, ca, va, rb, cb, vb, rc, cc, vc = ([] for _ in range(9))
    F = np.zeros(disc.n_u)
    for K, S in enumerate(disc.V1):
        gu, gp = disc.u_map[K], disc.p_map[K]
        a = S.a1(params.mu)
        ra.append(np.repeat(gu, len(gu)))
        ca.append(np.tile(gu, len(gu)))
        va.append(a.ravel())
        rb.append(np.repeat(gu, len(gp)))
        cb.append(np.tile(gp, len(gu)))
        vb.append(S.b1.ravel())
        rc.append(np.repeat(gp, len(gp)))
        cc.append(np.tile(gp, len(gp)))
        vc.append(S.c1.ravel())
        if data.f is not None:
            np.add.at(F, gu, S.F1(data.f))
    if data.traction is not None:
        for e, K, s, a, b, n in disc.boundary_edges(data.elasticity_dirichlet, complement=True):
            t = lambda p, n=n: data.traction(p, np.tile(n, (len(p), 1)))
            loads = local_traction(a, b, t, disc.k1, degree=disc.quad_degree + 2)
            np.add.at(F, disc.elasticity_edge_dofs(e).ravel(), loads.ravel())
    A = _coo(disc.n_u, disc.n_u, ra, ca, va)
    B = _coo(disc.n_u, disc.n_p, rb, cb, vb)
    C = _coo(disc.n_p, disc.n_p, rc, cc, vc)
    return A, B, C, F


def elasticity_G1(disc: Discretization, params: PhysicalParams, ell_law: ActiveStressLaw,
                  phi_h: np.ndarray | None) -> np.ndarray:
    G = np.zeros(disc.n_p)
    for K, S in enumerate(disc.V1):
        G[disc.p_map[K]] = S.G1(_element_ell(disc, K, ell_law, phi_h), params.lam)
    return G


def elasticity_dirichlet(disc: Discretization, data: ProblemData):
    fixed, vals = {}, {}
    found = False
    for e, K, s, a, b, n in disc.boundary_edges(data.elasticity_dirichlet):
        found = True
        dofs = disc.elasticity_edge_dofs(e)
        pts = disc.elasticity_node_points(e)
        uv = np.zeros((len(pts), 2)) if data.u_D is None else np.asarray(data.u_D(pts), float).reshape(-1, 2)
        for d, v in zip(dofs.ravel(), uv.ravel()):
            fixed[int(d)] = v
    if not found:
        raise MeshError(f"elasticity Dirichlet part {sorted(data.elasticity_dirichlet)} is empty")
    idx = np.array(sorted(fixed), dtype=np.int64)
    return idx, np.array([fixed[i] for i in idx])


def coefficient_at_quadrature(disc: Discretization, K: int, params: PhysicalParams, law: DiffusionLaw,
                              u_h: np.ndarray, p_h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Stress and M^-1 at the quadrature points of element K from the discrete fields."""
    q = disc.elements[K].quadrature()
    S1 = disc.V1[K]
    eps = S1.strain_poly(S1.Pi @ u_h[disc.u_map[K]], q.points)
    pt = S1._quad_vals[:, :S1.npress] @ p_h[disc.p_map[K]]
    sigma = reconstruct_stress(eps, pt, params.mu)
    return sigma, law.M_inv(sigma)


def assemble_diffusion(disc: Discretization, params: PhysicalParams, diff_law: DiffusionLaw,
                       u_h: np.ndarray | None, p_tilde_h: np.ndarray | None, data: ProblemData,
                       Minv: list | None = None) -> SaddleSystem:
    """Global flux/concentration system for given displacement and pressure.

    Args:
        Minv: Optional list of per-element arrays (nq, 2, 2) overriding the
            coefficient computed from ``u_h`` and ``p_tilde_h``.
    """
    ra, ca, va, rb, cb, vb, rc, cc, vc = ([] for _ in range(9))
    G = np.zeros(disc.n_phi)
    if u_h is None:
        u_h = np.zeros(disc.n_u)
    if p_tilde_h is None:
        p_tilde_h = np.zeros(disc.n_p)
    for K, S in enumerate(disc.V2):
        gz, sg, gphi = disc.z_map[K], disc.z_sign[K], disc.phi_map[K]
        Mi = Minv[K] if Minv is not None else coefficient_at_quadrature(disc, K, params, diff_law, u_h, p_tilde_h)[1]
        a = S.a2(Mi) * np.outer(sg, sg)
        ra.append(np.repeat(gz, len(gz)))
        ca.append(np.tile(gz, len(gz)))
        va.append(a.ravel())
        rb.append(np.repeat(gz, len(gphi)))
        cb.append(np.tile(gphi, len(gz)))
        vb.append((S.b2 * sg[:, None]).ravel())
        rc.append(np.repeat(gphi, len(gphi)))
        cc.append(np.tile(gphi, len(gphi)))
        vc.append(S.c2.ravel())
        if data.g is not None:
            G[gphi] = S.G2(np.asarray(data.g(disc.elements[K].quadrature().points), float))
    F = np.zeros(disc.n_z)
    k2 = disc.k2
    found = False
    for e, K, s, a, b, n in disc.boundary_edges(data.diffusion_dirichlet):
        found = True
        if data.phi_D is not None:
            F[(k2 + 1) * e + np.arange(k2 + 1)] += s * local_F2(a, b, data.phi_D, k2, degree=disc.quad_degree + 2)
    if not found and params.theta == 0:
        raise MeshError("diffusion Dirichlet part is empty and theta = 0: the concentration is undetermined")
    fixed, vals = [], []
    nodes = gauss_lobatto_params(k2 + 1)
    for e, K, s, a, b, n in disc.boundary_edges(data.diffusion_dirichlet, complement=True):
        pts = a + nodes[:, None] * (b - a)
        fixed.extend((k2 + 1) * e + np.arange(k2 + 1))
        if data.flux_n is None:
            vals.extend(np.zeros(k2 + 1))
        else:
            # stored values are measured against the global edge normal s * n
            vals.extend(s * np.asarray(data.flux_n(pts, np.tile(n, (len(pts), 1))), float))
    A = _coo(disc.n_z, disc.n_z, ra, ca, va)
    B = _coo(disc.n_z, disc.n_phi, rb, cb, vb)
    C = _coo(disc.n_phi, disc.n_phi, rc, cc, vc)
    return SaddleSystem(A, B, C, params.theta, F, G, np.array(fixed, dtype=np.int64), np.array(vals, float))


# --------------------------------------------------------------------------- norms

@dataclass
class NormRecord:
    """Squared weighted norms of each field."""

    V1: float
    Q1: float
    V2_M: float
    V2_div: float
    Q2: float

    @property
    def V2(self) -> float:
        return self.V2_M + self.V2_div

    @property
    def total(self) -> float:
        return float(np.sqrt(self.V1 + self.Q1 + self.V2 + self.Q2))


def discrete_difference_norms(disc: Discretization, params: PhysicalParams, du, dp, dz, dphi,
                              Minv: list | None = None) -> NormRecord:
    """Weighted norms of differences of discrete iterates via their projections.

    Args:
        Minv: Per-element M^-1 at quadrature points for the flux part; the
            identity when omitted.
    """
    v1 = q1 = vm = vd = q2 = 0.0
    for K in range(disc.mesh.n_elements):
        S1, S2 = disc.V1[K], disc.V2[K]
        c = S1.Pi @ du[disc.u_map[K]]
        v1 += c @ S1.K @ c
        pk = dp[disc.p_map[K]]
        q1 += pk @ S1.c1 @ pk
        zl = dz[disc.z_map[K]] * disc.z_sign[K]
        pz = S2.Pi0 @ zl
        q = disc.elements[K].quadrature()
        val = S2.eval_poly(pz, q.points)
        if Minv is None:
            vm += np.dot(q.weights, (val**2).sum(1))
        else:
            vm += np.dot(q.weights, np.einsum("qi,qij,qj->q", val, Minv[K], val))
        dv = S2.DIV @ zl
        vd += dv @ S2.H @ dv
        fk = dphi[disc.phi_map[K]]
        q2 += fk @ S2.c2 @ fk
    return NormRecord(
        2 * params.mu * v1,
        (1 / (2 * params.mu) + 1 / params.lam) * q1,
        vm,
        params.M_bound * vd,
        (1 / params.M_bound + params.theta) * q2,
    )


def weighted_norms(disc: Discretization, params: PhysicalParams, u, p, zeta, phi, Minv=None) -> NormRecord:
    """Weighted norms of discrete fields (projections, recovered divergence)."""
    return discrete_difference_norms(disc, params, u, p, zeta, phi, Minv)


# --------------------------------------------------------------------------- coupled solve

@dataclass
class CoupledSolution:
    """Discrete fields and their element-wise polynomial representations."""

    disc: Discretization
    params: PhysicalParams
    u: np.ndarray
    p: np.ndarray
    zeta: np.ndarray
    phi: np.ndarray
    iterations: int = 0
    history: list = field(default_factory=list)
    Minv: list | None = None

    def u_proj(self, K: int) -> np.ndarray:
        return self.disc.V1[K].Pi @ self.u[self.disc.u_map[K]]

    def p_coeffs(self, K: int) -> np.ndarray:
        return self.p[self.disc.p_map[K]]

    def zeta_local(self, K: int) -> np.ndarray:
        return self.zeta[self.disc.z_map[K]] * self.disc.z_sign[K]

    def zeta_proj(self, K: int) -> np.ndarray:
        return self.disc.V2[K].Pi0 @ self.zeta_local(K)

    def div_zeta(self, K: int) -> np.ndarray:
        return self.disc.V2[K].DIV @ self.zeta_local(K)

    def phi_coeffs(self, K: int) -> np.ndarray:
        return self.phi[self.disc.phi_map[K]]

    def element_means(self) -> dict[str, np.ndarray]:
        """Element averages of |u|, p, |zeta| and phi from the projections."""
        out = {"u_mag": [], "p": [], "zeta_mag": [], "phi": []}
        for K, E in enumerate(self.disc.elements):
            q = E.quadrature()
            S1, S2 = self.disc.V1[K], self.disc.V2[K]
            w = q.weights / E.area
            out["u_mag"].append(w @ np.linalg.norm(S1.eval_poly(self.u_proj(K), q.points), axis=1))
            out["p"].append(w @ (S1._quad_vals[:, :S1.npress] @ self.p_coeffs(K)))
            out["zeta_mag"].append(w @ np.linalg.norm(S2.eval_poly(self.zeta_proj(K), q.points), axis=1))
            out["phi"].append(w @ S2.eval_scalar(self.phi_coeffs(K), q.points))
        return {k: np.array(v) for k, v in out.items()}


def initial_concentration(disc: Discretization, c=0.0) -> np.ndarray:
    """phi_0 = c . (1, X, Y, ...) on every element; c is a scalar or a vector."""
    nq = n_monomials(disc.k2)
    c = np.broadcast_to(np.asarray(c, float), (nq,))
    return np.tile(c, disc.mesh.n_elements)


def picard_iterate(disc: Discretization, params: PhysicalParams, diff_law: DiffusionLaw,
                   ell_law: ActiveStressLaw, data: ProblemData, phi0=None, tol: float = 1e-8,
                   max_iter: int = 50) -> CoupledSolution:
    """Fixed-point iteration alternating the elasticity and diffusion solves.

    The update norm is evaluated from the second sweep on. ``iterations``
    is the loop counter at the break, which starts at 0 and is not advanced
    on the converged sweep: the number of sweeps minus one.

    Raises:
        ConvergenceError: when ``max_iter`` sweeps do not reach ``tol``.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    phi = initial_concentration(disc) if phi0 is None else np.asarray(phi0, float)
    A, B, C, F = assemble_elasticity_operator(disc, params, data)
    fixed, fvals = elasticity_dirichlet(disc, data)
    elast = SaddleSystem(A, B, C, 1.0 / params.lam, F, np.zeros(disc.n_p), fixed, fvals)
    fact = SaddleFactorization(elast)
    prev = None
    history = []
    for i in range(max_iter):
        G1 = elasticity_G1(disc, params, ell_law, phi)
        x = fact.solve(np.concatenate([F, G1]), fvals)
        u, p = x[:disc.n_u], x[disc.n_u:]
        Minv = [coefficient_at_quadrature(disc, K, params, diff_law, u, p)[1] for K in range(disc.mesh.n_elements)]
        dsys = assemble_diffusion(disc, params, diff_law, u, p, data, Minv=Minv)
        z, phi = solve_saddle(dsys)
        if prev is not None:
            err = discrete_difference_norms(disc, params, u - prev[0], p - prev[1], z - prev[2], phi - prev[3],
                                            Minv).total
            history.append(err)
            log.info("picard sweep %d: update norm %.3e", i + 1, err)
            if err < tol:
                return CoupledSolution(disc, params, u, p, z, phi, i, history, Minv)
        prev = (u, p, z, phi)
    raise ConvergenceError(f"Picard iteration did not reach tol={tol:g} in {max_iter} sweeps", history)
