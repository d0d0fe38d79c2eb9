import numpy as np
import pytest
import scipy.sparse as sp

from vem_sad.bench import compute_total_error, solve_case
from vem_sad.cases import polynomial_case, smooth_case
from vem_sad.constitutive import ConstantLaw, ExponentialLaw, PhysicalParams
from vem_sad.errors import ConvergenceError, MeshError
from vem_sad.mesh import generate_nonconvex_mesh, generate_square_mesh, generate_voronoi_mesh
from vem_sad.solver import (
    Discretization,
    ProblemData,
    SaddleFactorization,
    SaddleSystem,
    assemble_diffusion,
    assemble_elasticity,
    picard_iterate,
    solve_saddle,
    weighted_norms,
)

PATCH_MESHES = {
    "square": lambda: generate_square_mesh(3),
    "nonconvex": lambda: generate_nonconvex_mesh(2),
    "voronoi": lambda: generate_voronoi_mesh(12, rng_seed=7, lloyd_iterations=10),
}


def dense_reference(system):
    """Dense solve of the saddle system with fixed DoFs replaced by identity rows."""
    S = system.matrix().toarray()
    b = system.rhs().copy()
    for i, v in zip(system.fixed, system.fixed_values):
        S[i] = 0.0
        S[i, i] = 1.0
        b[i] = v
    return np.linalg.solve(S, b)


@pytest.fixture(scope="module")
def small_disc():
    return Discretization(generate_square_mesh(2), k2=1)


def test_dof_totals_square_n8():
    m = generate_square_mesh(8)
    assert Discretization(m, k2=0).n_dofs == 978
    assert Discretization(m, k2=1).n_dofs == 1442


def test_zero_data_gives_zero_solution(small_disc):
    params = PhysicalParams(lam=5.0, mu=1.0, theta=1.0, M_bound=1.0)
    sol = picard_iterate(small_disc, params, ExponentialLaw(1.0, 0.0), ConstantLaw(0.0), ProblemData())
    for v in (sol.u, sol.p, sol.zeta, sol.phi):
        assert np.abs(v).max() == 0.0


@pytest.mark.parametrize("k2", [0, 1])
@pytest.mark.parametrize("name", sorted(PATCH_MESHES))
def test_patch_reproduces_polynomial_solution(name, k2):
    case = polynomial_case(k2)
    disc, sol = solve_case(PATCH_MESHES[name](), case, k2)
    assert compute_total_error(sol, case).total < 1e-9


def test_interior_flux_dofs_shared_with_opposite_signs(small_disc):
    m = small_disc.mesh
    seen = {}
    for K in range(m.n_elements):
        N = len(m.elements[K])
        for j in range(N * 2):
            seen.setdefault(int(small_disc.z_map[K][j]), []).append(small_disc.z_sign[K][j])
    for e in range(m.n_edges):
        if (m.edge_elements[e] >= 0).sum() == 2:
            for t in range(2):
                assert sorted(seen[2 * e + t]) == [-1.0, 1.0]


def test_normal_trace_conformity_of_interpolant(small_disc, rng):
    A, b = rng.standard_normal((2, 2)), rng.standard_normal(2)
    xi = lambda x: x @ A.T + b
    m = small_disc.mesh
    glob = {}
    for K, S in enumerate(small_disc.V2):
        loc = S.interpolate(xi) * small_disc.z_sign[K]
        for j in range(S.off_grad):
            g = int(small_disc.z_map[K][j])
            if g in glob:
                assert loc[j] == pytest.approx(glob[g], abs=1e-13)
            glob[g] = loc[j]
    assert len(glob) == 2 * m.n_edges


def test_assembled_matrices_symmetric(small_disc):
    case = smooth_case()
    data = case.problem_data()
    sys1 = assemble_elasticity(small_disc, case.params, case.ell_law, None, data)
    sys2 = assemble_diffusion(small_disc, case.params, case.diff_law, None, None, data)
    for S in (sys1.matrix(), sys2.matrix()):
        d = abs(S - S.T).max()
        assert d <= 1e-14 * abs(S).max()


def test_identity_saddle_system():
    n, m = 4, 3
    F, G = np.arange(1.0, 5.0), np.array([2.0, -1.0, 0.5])
    system = SaddleSystem(sp.identity(n, format="csr"), sp.csr_matrix((n, m)), sp.identity(m, format="csr"),
                          1.0, F, G)
    x, y = solve_saddle(system)
    np.testing.assert_allclose(x, F)
    np.testing.assert_allclose(y, -G)


@pytest.mark.parametrize("which", ["elasticity", "diffusion"])
def test_sparse_solve_matches_dense_oracle(which):
    disc = Discretization(generate_square_mesh(2), k2=1)
    case = smooth_case()
    data = case.problem_data()
    if which == "elasticity":
        system = assemble_elasticity(disc, case.params, case.ell_law, None, data)
    else:
        system = assemble_diffusion(disc, case.params, case.diff_law, None, None, data)
    assert system.matrix().shape[0] <= 200
    x, y = solve_saddle(system)
    ref = dense_reference(system)
    got = np.concatenate([x, y])
    assert np.abs(got - ref).max() <= 1e-10 * np.abs(ref).max()


def test_factorization_reports_residual(small_disc):
    case = smooth_case()
    system = assemble_elasticity(small_disc, case.params, case.ell_law, None, case.problem_data())
    fact = SaddleFactorization(system)
    fact.solve(system.rhs(), system.fixed_values)
    assert fact.last_residual < 1e-10


def test_theta_zero_with_dirichlet_part_is_solvable():
    params = PhysicalParams(lam=10.0, mu=2.0, theta=0.0, M_bound=2.0)
    case = polynomial_case(1, params=params)
    disc, sol = solve_case(generate_square_mesh(3), case, 1)
    assert compute_total_error(sol, case).total < 1e-9


def test_weighted_norms_zero(small_disc):
    params = PhysicalParams(lam=5.0, mu=1.0, theta=1.0, M_bound=1.0)
    z = [np.zeros(n) for n in (small_disc.n_u, small_disc.n_p, small_disc.n_z, small_disc.n_phi)]
    assert weighted_norms(small_disc, params, *z).total == 0.0


def test_weighted_norm_of_unit_concentration():
    disc = Discretization(generate_square_mesh(2), k2=1)
    params = PhysicalParams(lam=5.0, mu=1.0, theta=0.25, M_bound=4.0)
    phi = np.zeros(disc.n_phi)
    for K in range(disc.mesh.n_elements):
        phi[disc.phi_map[K][0]] = 1.0
    rec = weighted_norms(disc, params, np.zeros(disc.n_u), np.zeros(disc.n_p), np.zeros(disc.n_z), phi)
    assert rec.Q2 == pytest.approx(0.5, rel=1e-13)


def test_weighted_norm_scales_with_mu(small_disc, rng):
    u = rng.standard_normal(small_disc.n_u)
    zeros = [np.zeros(n) for n in (small_disc.n_p, small_disc.n_z, small_disc.n_phi)]
    a = weighted_norms(small_disc, PhysicalParams(lam=5.0, mu=1.0, theta=1.0, M_bound=1.0), u, *zeros)
    b = weighted_norms(small_disc, PhysicalParams(lam=5.0, mu=2.0, theta=1.0, M_bound=1.0), u, *zeros)
    assert b.V1 == pytest.approx(2.0 * a.V1, rel=1e-14)


def test_decoupled_linear_problem_converges_immediately():
    case = polynomial_case(1)
    disc, sol = solve_case(generate_square_mesh(3), case, 1)
    assert sol.iterations <= 2


@pytest.fixture(scope="module")
def example_square8():
    case = smooth_case()
    disc, sol = solve_case(generate_square_mesh(8), case, 1)
    return case, disc, sol


def test_example_iteration_count(example_square8):
    assert example_square8[2].iterations == 3


def test_picard_contraction(example_square8):
    h = example_square8[2].history
    assert h[0] / h[1] >= 5.0


def test_diffusion_equations_satisfied(example_square8):
    case, disc, sol = example_square8
    system = assemble_diffusion(disc, case.params, case.diff_law, sol.u, sol.p, case.problem_data(), Minv=sol.Minv)
    r = system.B.T @ sol.zeta - case.params.theta * (system.C @ sol.phi) - system.G
    assert np.abs(r).max() <= 1e-10 * max(1.0, np.abs(system.G).max())


def test_tighter_tolerance_never_fewer_iterations():
    case = smooth_case()
    disc = Discretization(generate_square_mesh(4), k2=1)
    counts = [picard_iterate(disc, case.params, case.diff_law, case.ell_law, case.problem_data(), tol=t).iterations
              for t in (1e-4, 5e-5, 1e-8, 5e-9)]
    assert counts == sorted(counts)


def test_max_iter_exhausted_raises():
    case = smooth_case()
    disc = Discretization(generate_square_mesh(2), k2=0)
    with pytest.raises(ConvergenceError) as info:
        picard_iterate(disc, case.params, case.diff_law, case.ell_law, case.problem_data(), max_iter=2)
    assert len(info.value.history) == 1


def test_empty_dirichlet_part_raises(small_disc):
    params = PhysicalParams(lam=5.0, mu=1.0, theta=1.0, M_bound=1.0)
    data = ProblemData(elasticity_dirichlet={"nowhere"})
    with pytest.raises(MeshError, match="empty"):
        picard_iterate(small_disc, params, ExponentialLaw(1.0, 0.0), ConstantLaw(0.0), data)


def test_theta_zero_without_concentration_dirichlet_raises(small_disc):
    params = PhysicalParams(lam=5.0, mu=1.0, theta=0.0, M_bound=1.0)
    data = ProblemData(diffusion_dirichlet={"nowhere"})
    with pytest.raises(MeshError, match="undetermined"):
        assemble_diffusion(small_disc, params, ExponentialLaw(1.0, 0.0), None, None, data)
