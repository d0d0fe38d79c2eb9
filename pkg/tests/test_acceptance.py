"""Acceptance criteria at the published tolerances.

Each test records one PASS/FAIL line, repeated in the terminal summary.
"""

import numpy as np
import pytest

from vem_sad.bench import (
    LEVELS,
    compute_total_error,
    make_mesh,
    run_convergence,
    run_lithiation,
    run_robustness,
    solve_case,
)
from vem_sad.cases import EXAMPLE1_M_BOUND, polynomial_case, smooth_case
from vem_sad.constitutive import estimate_M_bound
from vem_sad.diffusion import DiffusionLocalSpace
from vem_sad.elasticity import ElasticityLocalSpace
from vem_sad.mesh import generate_nonconvex_mesh, generate_square_mesh, generate_voronoi_mesh
from vem_sad.polybasis import Element, ScaledMonomialBasis
from vem_sad.solver import Discretization, assemble_diffusion, assemble_elasticity, solve_saddle

PAPER_DOFS = {
    ("square", 0): (978, 2138, 3746, 5802),
    ("square", 1): (1442, 3170, 5570, 8642),
    ("crossed", 0): (3026, 6746, 11938, 18602),
}
PAPER_ERRORS = {
    1: (8.14e-2, 3.62e-2, 2.03e-2, 1.30e-2),
    0: (3.70e-1, 2.44e-1, 1.82e-1, 1.45e-1),
}
RATE_WINDOWS = {0: (0.9, 1.1), 1: (1.9, 2.1)}
SWEEPS = {"lam": (1.0, 1e4, 1e8), "mu": (1.0, 1e2, 1e4), "theta": (1e-6, 1e-3, 1.0)}


@pytest.fixture(scope="module")
def tables():
    return {(fam, k2): run_convergence(fam, k2, LEVELS) for fam in ("square", "crossed") for k2 in (0, 1)}


def test_c1_dof_counts(acceptance):
    got = {key: tuple(Discretization(make_mesh(key[0], n), k2=key[1]).n_dofs for n in LEVELS) for key in PAPER_DOFS}
    ok = got == PAPER_DOFS
    assert acceptance("C1 DoF counts", ok, "; ".join(f"{f} k2={k}: {got[(f, k)]}" for f, k in PAPER_DOFS))


@pytest.mark.parametrize("k2", [1, 0])
def test_c2_error_magnitudes(acceptance, tables, k2):
    e = np.array([r.e_star for r in tables[("square", k2)]])
    dev = np.abs(e / np.array(PAPER_ERRORS[k2]) - 1.0)
    ok = bool(np.all(dev <= 0.10))
    detail = ", ".join(f"{v:.3e}" for v in e) + f" (max deviation {dev.max():.1%})"
    assert acceptance(f"C2 error magnitudes square k2={k2}", ok, detail)


def test_c3_rates(acceptance, tables):
    parts, ok = [], True
    for (fam, k2), rows in sorted(tables.items()):
        lo, hi = RATE_WINDOWS[k2]
        r = rows[-1].rate
        ok &= lo <= r <= hi
        parts.append(f"{fam} k2={k2}: {r:.3f}")
    assert acceptance("C3 last-step rates", ok, "; ".join(parts))


def test_c4_picard_iterations(acceptance, tables):
    its = {key: [r.iters for r in rows] for key, rows in sorted(tables.items())}
    ok = all(i in (3, 4) for v in its.values() for i in v)
    assert acceptance("C4 Picard iterations", ok, "; ".join(f"{f} k2={k}: {v}" for (f, k), v in its.items()))


def test_c5_m_bound(acceptance):
    case = smooth_case()
    g = np.linspace(0.0, 1.0, 400)
    X, Y = np.meshgrid(g, g)
    value = estimate_M_bound(case.diff_law, case.sigma(np.column_stack([X.ravel(), Y.ravel()])))
    rel = abs(value / EXAMPLE1_M_BOUND - 1.0)
    assert acceptance("C5 M-bound", rel <= 1e-3, f"{value:.6f} (relative deviation {rel:.1e})")


@pytest.mark.parametrize("k2", [1, 0])
def test_c6_robustness(acceptance, k2):
    res = run_robustness(SWEEPS, "square", k2, LEVELS)
    nominal = k2 + 1.0
    rates = {key: rows[-1].rate for key, rows in res.items()}
    bad = {key: r for key, r in rates.items() if abs(r - nominal) > 0.15}
    detail = "; ".join(f"{n}={v:g}: {r:.3f}" for (n, v), r in rates.items())
    assert acceptance(f"C6 robustness k2={k2} (nominal {nominal:.0f})", not bad, detail)


def test_c7_patch(acceptance):
    meshes = {"square": generate_square_mesh(3), "nonconvex": generate_nonconvex_mesh(2),
              "voronoi": generate_voronoi_mesh(12, rng_seed=7, lloyd_iterations=10)}
    worst = 0.0
    for k2 in (0, 1):
        case = polynomial_case(k2)
        for mesh in meshes.values():
            _, sol = solve_case(mesh, case, k2)
            worst = max(worst, compute_total_error(sol, case).total)
    assert acceptance("C7 patch tests", worst < 1e-9, f"max e* {worst:.1e} over 3 families, k2 = 0, 1")


def _idempotence_and_reproduction(rng):
    mesh = generate_voronoi_mesh(9, rng_seed=3, lloyd_iterations=5)
    worst = 0.0
    for K in range(mesh.n_elements):
        E = Element(mesh.element_coords(K))
        spaces = [(ElasticityLocalSpace(E), "Pi"), (DiffusionLocalSpace(E, 0), "Pi0"), (DiffusionLocalSpace(E, 1), "Pi0")]
        for S, name in spaces:
            P = S.D @ getattr(S, name)
            w = P @ rng.standard_normal(S.ndof)
            worst = max(worst, np.linalg.norm(P @ w - w) / max(1.0, np.linalg.norm(w)))
        S = spaces[0][0]
        c = rng.standard_normal(2 * S.nk)
        worst = max(worst, np.abs(S.Pi @ S.D @ c - c).max())
    return worst


def _commuting(rng):
    mesh = generate_voronoi_mesh(9, rng_seed=3, lloyd_iterations=5)
    worst = 0.0
    for K in range(mesh.n_elements):
        E = Element(mesh.element_coords(K))
        for k in (0, 1):
            S = DiffusionLocalSpace(E, k)
            basis = ScaledMonomialBasis(E, k)
            p, r0, r1 = rng.standard_normal((3, S.nk))
            c = E.centroid

            def xi(x):
                V = basis.eval(x)
                v = V @ p
                return np.column_stack([(x[:, 0] - c[0]) * v + V @ r0, (x[:, 1] - c[1]) * v + V @ r1])

            q = E.quadrature()
            G = basis.grad(q.points)
            div = (2 * basis.eval(q.points) @ p + ((q.points - c) * np.einsum("qjc,j->qc", G, p)).sum(1)
                   + G[:, :, 0] @ r0 + G[:, :, 1] @ r1)
            got = S.eval_scalar(S.DIV @ S.interpolate(xi), q.points)
            worst = max(worst, np.abs(got - div).max() / max(1.0, np.abs(div).max()))
    return worst


def _symmetry_and_oracle():
    disc = Discretization(generate_square_mesh(2), k2=1)
    case = smooth_case()
    data = case.problem_data()
    systems = [assemble_elasticity(disc, case.params, case.ell_law, None, data),
               assemble_diffusion(disc, case.params, case.diff_law, None, None, data)]
    sym = oracle = 0.0
    for system in systems:
        S = system.matrix()
        sym = max(sym, abs(S - S.T).max() / abs(S).max())
        dense, b = S.toarray(), system.rhs().copy()
        for i, v in zip(system.fixed, system.fixed_values):
            dense[i], dense[i, i], b[i] = 0.0, 1.0, v
        ref = np.linalg.solve(dense, b)
        got = np.concatenate(solve_saddle(system))
        assert len(ref) <= 200
        oracle = max(oracle, np.abs(got - ref).max() / np.abs(ref).max())
    return sym, oracle


def test_c8_structure(acceptance, rng):
    idem = _idempotence_and_reproduction(rng)
    comm = _commuting(rng)
    sym, oracle = _symmetry_and_oracle()
    ok = idem <= 1e-12 and comm <= 1e-10 and sym <= 1e-14 and oracle <= 1e-10
    detail = f"idempotence {idem:.1e}, commuting {comm:.1e}, symmetry {sym:.1e}, dense oracle {oracle:.1e}"
    assert acceptance("C8 structure invariants", ok, detail)


def test_c9_lithiation(acceptance):
    kw = dict(n_seeds=200, m1_values=(0.0, 1e3), tractions=(0.0, -2e-4))
    first = {(r.m1, r.traction): r for r in run_lithiation(**kw)}
    second = {(r.m1, r.traction): r for r in run_lithiation(**kw)}
    dphi = np.abs(first[(1e3, 0.0)].concentration - first[(0.0, 0.0)].concentration).max()
    dp = np.abs(first[(0.0, -2e-4)].pressure - first[(0.0, 0.0)].pressure).max()
    same = all(np.array_equal(first[k].concentration, second[k].concentration)
               and np.array_equal(first[k].pressure, second[k].pressure) for k in first)
    phi_ref = np.abs(first[(0.0, 0.0)].concentration).max()
    p_ref = np.abs(first[(0.0, 0.0)].pressure).max()
    ok = dphi > 1e-8 * phi_ref and dp > 1e-8 * p_ref and same
    detail = f"max |dphi|/phi_max {dphi / phi_ref:.2e}, max |dp|/|p| {dp / p_ref:.2e}, reproducible {same}"
    assert acceptance("C9 lithiation differences", ok, detail)
