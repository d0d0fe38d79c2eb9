"""Error measurement, convergence tables, parameter sweeps and the lithiation demo."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .cases import ManufacturedCase, example1_params, smooth_case
from .constitutive import LinearLaw, PhysicalParams, QuadraticLaw, lame_from_young
from .mesh import (
    PolygonalMesh,
    generate_annulus_mesh,
    generate_crossed_mesh,
    generate_nonconvex_mesh,
    generate_square_mesh,
    generate_voronoi_mesh,
)
from .polybasis import ScaledMonomialBasis
from .solver import CoupledSolution, Discretization, ProblemData, initial_concentration, picard_iterate

log = logging.getLogger(__name__)

LEVELS = (8, 12, 16, 20)


@dataclass
class ErrorComponents:
    """Squared weighted error components; ``total`` is e*."""

    u: float
    p: float
    zeta_M: float
    zeta_div: float
    phi: float

    @property
    def total(self) -> float:
        return float(np.sqrt(self.u + self.p + self.zeta_M + self.zeta_div + self.phi))


def compute_total_error(sol: CoupledSolution, case: ManufacturedCase, params: PhysicalParams | None = None,
                        degree: int | None = None) -> ErrorComponents:
    """Weighted errors between exact fields and the projected discrete fields.

    The flux is measured in the M^-1 norm with the exact stress and its
    divergence against the recovered discrete divergence.
    """
    params = params or sol.params
    disc = sol.disc
    d = degree or disc.quad_degree
    eu = ep = ez = ed = ef = 0.0
    for K, E in enumerate(disc.elements):
        q = E.quadrature(d)
        x, w = q.points, q.weights
        S1, S2 = disc.V1[K], disc.V2[K]
        de = case.strain(x) - S1.strain_poly(sol.u_proj(K), x)
        eu += w @ (de**2).sum(axis=(1, 2))
        Vp = ScaledMonomialBasis(E, S1.k - 1).eval(x)
        ep += w @ (case.p_tilde(x) - Vp @ sol.p_coeffs(K)) ** 2
        dz = case.zeta(x) - S2.eval_poly(sol.zeta_proj(K), x)
        Minv = case.diff_law.M_inv(case.sigma(x))
        ez += w @ np.einsum("qi,qij,qj->q", dz, Minv, dz)
        ed += w @ (case.div_zeta(x) - S2.eval_scalar(sol.div_zeta(K), x)) ** 2
        ef += w @ (case.phi(x) - S2.eval_scalar(sol.phi_coeffs(K), x)) ** 2
    return ErrorComponents(
        2 * params.mu * eu,
        (1 / (2 * params.mu) + 1 / params.lam) * ep,
        ez,
        params.M_bound * ed,
        (1 / params.M_bound + params.theta) * ef,
    )


def convergence_rates(errors, hs) -> list[float | None]:
    """Observed orders log(e_{j+1}/e_j) / log(h_{j+1}/h_j); the first entry is None."""
    out: list[float | None] = [None]
    for j in range(1, len(errors)):
        out.append(float(np.log(errors[j] / errors[j - 1]) / np.log(hs[j] / hs[j - 1])))
    return out


MESH_FAMILIES = {
    "square": lambda n, seed=0: generate_square_mesh(n),
    "crossed": lambda n, seed=0: generate_crossed_mesh(n),
    "nonconvex": lambda n, seed=0: generate_nonconvex_mesh(n),
    "voronoi": lambda n, seed=0: generate_voronoi_mesh(n * n, rng_seed=seed, lloyd_iterations=30),
    "perturbed_voronoi": lambda n, seed=0: generate_voronoi_mesh(n * n, rng_seed=seed, lloyd_iterations=30,
                                                                 perturbation=0.2),
}


def make_mesh(family: str, n: int, seed: int = 0) -> PolygonalMesh:
    try:
        return MESH_FAMILIES[family](n, seed)
    except KeyError:
        raise ValueError(f"unknown mesh family {family!r}; choose from {sorted(MESH_FAMILIES)}") from None


@dataclass
class ConvergenceRow:
    mesh: str
    level: int
    h: float
    dof: int
    e_star: float
    rate: float | None
    iters: int
    components: ErrorComponents | None = field(default=None, repr=False)

    def csv_fields(self) -> list[str]:
        rate = "" if self.rate is None else f"{self.rate:.4f}"
        return [self.mesh, str(self.level), f"{self.h:.6e}", str(self.dof), f"{self.e_star:.6e}", rate,
                str(self.iters)]


def solve_case(mesh: PolygonalMesh, case: ManufacturedCase, k2: int, k1: int = 2, tol: float = 1e-8,
               max_iter: int = 50, phi0_constant: float = 0.0) -> tuple[Discretization, CoupledSolution]:
    disc = Discretization(mesh, k1=k1, k2=k2)
    sol = picard_iterate(disc, case.params, case.diff_law, case.ell_law, case.problem_data(),
                         phi0=initial_concentration(disc, phi0_constant), tol=tol, max_iter=max_iter)
    return disc, sol


def run_convergence(family: str = "square", k2: int = 1, levels=LEVELS, case: ManufacturedCase | None = None,
                    k1: int = 2, tol: float = 1e-8, max_iter: int = 50, seed: int = 0,
                    phi0_constant: float = 0.0) -> list[ConvergenceRow]:
    """Convergence table for the smooth manufactured case on a mesh family."""
    case = case or smooth_case()
    rows: list[ConvergenceRow] = []
    for n in levels:
        mesh = make_mesh(family, n, seed)
        disc, sol = solve_case(mesh, case, k2, k1, tol, max_iter, phi0_constant)
        err = compute_total_error(sol, case)
        rows.append(ConvergenceRow(family, n, mesh.h, disc.n_dofs, err.total, None, sol.iterations, err))
        log.info("%s n=%d dof=%d e*=%.3e it=%d", family, n, disc.n_dofs, err.total, sol.iterations)
    rates = convergence_rates([r.e_star for r in rows], [r.h for r in rows])
    for r, rate in zip(rows, rates):
        r.rate = rate
    return rows


def run_robustness(sweeps: dict | None = None, family: str = "square", k2: int = 1, levels=LEVELS,
                   tol: float = 1e-8, max_iter: int = 50) -> dict[tuple[str, float], list[ConvergenceRow]]:
    """Convergence tables with one physical parameter varied at a time.

    The coefficient bound M stays at its reference value. The stress scales
    with lam + mu, so the exponential law's m1 is scaled by the inverse ratio
    above the reference values; otherwise exp(m1 tr sigma) leaves double
    range at lam = 1e8.
    """
    sweeps = sweeps or {"lam": (1.0, 1e4, 1e8), "mu": (1.0, 1e2, 1e4), "theta": (1e-6, 1e-3, 1.0)}
    base = example1_params()
    ref = smooth_case()
    out = {}
    for name, values in sweeps.items():
        for v in values:
            kw = dict(lam=base.lam, mu=base.mu, theta=base.theta, M_bound=base.M_bound)
            kw[name] = v
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                params = PhysicalParams(**kw)
            ratio = max(1.0, (params.lam + params.mu) / (base.lam + base.mu))
            case = smooth_case(params, m0=ref.diff_law.m0, m1=ref.diff_law.m1 / ratio)
            out[(name, v)] = run_convergence(family, k2, levels, case, tol=tol, max_iter=max_iter)
    return out


# --------------------------------------------------------------------------- lithiation

@dataclass
class LithiationResult:
    m1: float
    traction: float
    solution: CoupledSolution
    radii: np.ndarray
    concentration: np.ndarray
    pressure: np.ndarray


def lithiation_setup(m1: float, traction: float, E: float = 1e-2, nu: float = 0.3, m0: float = 1e2,
                     omega: float = 3.497e12, phi_max: float = 2.29e-14):
    """Parameters, laws and boundary data of the anode particle problem."""
    lam, mu = lame_from_young(E, nu)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        params = PhysicalParams(lam=lam, mu=mu, theta=1.0, M_bound=1.0)
    K0 = omega * (2 * mu + 3 * lam) / 3
    data = ProblemData(
        traction=(lambda x, n: traction * n) if traction else None,
        phi_D=lambda x: np.full(len(x), phi_max),
        elasticity_dirichlet={"inner"},
        diffusion_dirichlet={"outer"},
    )
    return params, QuadraticLaw(m0, m1), LinearLaw(K0), data


def run_lithiation(n_seeds: int = 400, rng_seed: int = 0, m1_values=(0.0, 1e3), tractions=(0.0, -2e-4),
                   n_samples: int = 41, angle: float = 0.0, tol: float = 1e-8,
                   max_iter: int = 50) -> list[LithiationResult]:
    """Solve the annulus problem for each (m1, traction) pair and sample a radial ray."""
    mesh = generate_annulus_mesh(1.0, 5.0, n_seeds=n_seeds, rng_seed=rng_seed)
    disc = Discretization(mesh, k1=2, k2=1)
    radii = np.linspace(1.0, 5.0, n_samples)
    pts = np.column_stack([radii * np.cos(angle), radii * np.sin(angle)])
    owner = locate_points(mesh, pts)
    out = []
    for m1 in m1_values:
        for t in tractions:
            params, dlaw, elaw, data = lithiation_setup(m1, t)
            sol = picard_iterate(disc, params, dlaw, elaw, data, tol=tol, max_iter=max_iter)
            phi = np.array([disc.V2[K].eval_scalar(sol.phi_coeffs(K), p[None])[0] for K, p in zip(owner, pts)])
            pr = np.array([_eval_pressure(disc, K, sol.p_coeffs(K), p[None])[0] for K, p in zip(owner, pts)])
            out.append(LithiationResult(m1, t, sol, radii, phi, pr))
    return out


def _eval_pressure(disc, K, coeffs, pts):
    return ScaledMonomialBasis(disc.elements[K], disc.k1 - 1).eval(pts) @ coeffs


def _inside(xy: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Even-odd test of points against one polygon; boundary points may go either way."""
    x, y = pts[:, 0:1], pts[:, 1:2]
    a, b = xy, np.roll(xy, -1, axis=0)
    crosses = (a[:, 1] > y) != (b[:, 1] > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[:, 0] + (y - a[:, 1]) * (b[:, 0] - a[:, 0]) / (b[:, 1] - a[:, 1])
    return (crosses & (x < xint)).sum(axis=1) % 2 == 1


def locate_points(mesh: PolygonalMesh, pts: np.ndarray) -> np.ndarray:
    """Index of an element containing each point; nearest centroid for points outside the mesh."""
    pts = np.atleast_2d(np.asarray(pts, float))
    owner = np.full(len(pts), -1, dtype=np.int64)
    for K in range(mesh.n_elements):
        owner[(owner < 0) & _inside(mesh.element_coords(K), pts)] = K
    miss = owner < 0
    if np.any(miss):
        d = np.linalg.norm(mesh.centroids[None, :, :] - pts[miss][:, None, :], axis=2)
        owner[miss] = d.argmin(axis=1)
    return owner
