import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vem_sad.cases import EXAMPLE1_M_BOUND, smooth_case
from vem_sad.constitutive import (
    ConstantLaw,
    ExponentialLaw,
    HillLaw,
    LinearLaw,
    PhysicalParams,
    PolynomialLaw,
    QuadraticLaw,
    estimate_M_bound,
    eval_ell,
    eval_M_inverse,
    lame_from_young,
    reconstruct_stress,
)
from vem_sad.errors import ConstitutiveError


def sym(rng, n, scale=1.0):
    A = scale * rng.standard_normal((n, 2, 2))
    return 0.5 * (A + np.swapaxes(A, 1, 2))


def test_reconstruct_stress_examples():
    np.testing.assert_array_equal(reconstruct_stress(np.eye(2), 1.0, 1.0), np.eye(2))
    np.testing.assert_array_equal(reconstruct_stress(np.zeros((2, 2)), 0.0, 3.0), np.zeros((2, 2)))
    got = reconstruct_stress([[1, 2], [2, 3]], 4.0, 10.0)
    np.testing.assert_array_equal(got, [[16, 40], [40, 56]])


def test_reconstruct_stress_vectorised(rng):
    eps = sym(rng, 7)
    p = rng.standard_normal(7)
    out = reconstruct_stress(eps, p, 2.5)
    for i in range(7):
        np.testing.assert_allclose(out[i], 5.0 * eps[i] - p[i] * np.eye(2))


def test_exponential_inverse_examples():
    law = ExponentialLaw(0.5, 0.0)
    np.testing.assert_allclose(eval_M_inverse(law, np.diag([3.0, 1.0])), 2.0 * np.eye(2))
    law = ExponentialLaw(0.1, 1e-4)
    np.testing.assert_allclose(eval_M_inverse(law, np.diag([2.0, -2.0])), 10.0 * np.eye(2), rtol=1e-15)


def test_exponential_inverse_closed_form(rng):
    law = ExponentialLaw(0.3, 0.2)
    S = sym(rng, 20)
    expected = np.exp(0.2 * np.trace(S, axis1=1, axis2=2)) / 0.3
    np.testing.assert_allclose(law.M_inv(S), expected[:, None, None] * np.eye(2), rtol=1e-14)
    np.testing.assert_allclose(law.M(S) @ law.M_inv(S), np.broadcast_to(np.eye(2), S.shape), atol=1e-13)


def test_exponential_out_of_range_raises():
    with pytest.raises(ConstitutiveError, match="out of range"):
        ExponentialLaw(0.1, 1.0).M_inv(np.diag([400.0, 400.0]))


def test_quadratic_example():
    law = QuadraticLaw(1.0, 1.0)
    S = np.diag([1.0, 0.0])
    np.testing.assert_allclose(law.M(S), np.diag([2.0, 1.0]))
    np.testing.assert_allclose(eval_M_inverse(law, S), np.diag([0.5, 1.0]), rtol=1e-15)


@pytest.mark.parametrize("law", [QuadraticLaw(2.0, 0.3), PolynomialLaw(1.0, 0.1, 0.2), ExponentialLaw(1.0, 0.4)])
def test_inverse_is_inverse(law, rng):
    S = sym(rng, 15, 0.5)
    prod = law.M(S) @ law.M_inv(S)
    np.testing.assert_allclose(prod, np.broadcast_to(np.eye(2), prod.shape), atol=1e-12)


@pytest.mark.parametrize("law", [QuadraticLaw(2.0, 0.3), PolynomialLaw(1.0, 0.1, 0.2), ExponentialLaw(1.0, 0.4)])
def test_dM_matches_finite_differences(law, rng):
    S = sym(rng, 4, 0.5)
    dS = sym(rng, 4)
    eps = 1e-6
    fd = (law.M(S + eps * dS) - law.M(S - eps * dS)) / (2 * eps)
    np.testing.assert_allclose(law.dM(S, dS), fd, atol=1e-8)


def test_non_spd_tensor_raises():
    law = PolynomialLaw(1.0, 1.0, 0.0)
    with pytest.raises(ConstitutiveError, match="positive definite"):
        law.M_inv(np.diag([-2.0, 0.0]))


def test_law_parameter_validation():
    with pytest.raises(ConstitutiveError):
        ExponentialLaw(0.0, 1.0)
    with pytest.raises(ConstitutiveError):
        QuadraticLaw(-1.0, 1.0)
    with pytest.raises(ConstitutiveError):
        HillLaw(1.0, 0.0)


def test_active_stress_examples():
    hill = HillLaw(1.0, 1.0, 2)
    assert eval_ell(hill, 0.0) == pytest.approx(1.0)
    assert eval_ell(hill, 1.0) == pytest.approx(1.5)
    assert eval_ell(LinearLaw(2.0), 3.0) == pytest.approx(6.0)
    np.testing.assert_array_equal(eval_ell(ConstantLaw(0.7), np.zeros(3)), 0.7)


@pytest.mark.parametrize("law", [HillLaw(1.0, 1.0, 2), HillLaw(0.0, 2.0, 3), LinearLaw(-1.5), ConstantLaw(2.0)])
def test_active_stress_derivative(law):
    phi = np.linspace(0.1, 2.0, 9)
    eps = 1e-6
    fd = (law(phi + eps) - law(phi - eps)) / (2 * eps)
    np.testing.assert_allclose(law.derivative(phi), fd, atol=1e-8)


def test_hill_lipschitz_on_bounded_interval():
    law = HillLaw(1.0, 1.0, 2)
    phi = np.linspace(-3, 3, 2001)
    L = np.abs(law.derivative(phi)).max()
    a, b = np.meshgrid(phi[::40], phi[::40])
    gap = np.abs(law(a) - law(b))
    assert np.all(gap <= L * np.abs(a - b) + 1e-12)


def test_params_validation():
    with pytest.raises(ConstitutiveError):
        PhysicalParams(lam=1.0, mu=0.0, theta=0.0)
    with pytest.raises(ConstitutiveError):
        PhysicalParams(lam=-1.0, mu=1.0, theta=0.0)
    with pytest.raises(ConstitutiveError):
        PhysicalParams(lam=1.0, mu=1.0, theta=-1.0)
    with pytest.warns(RuntimeWarning, match="exceeds"):
        PhysicalParams(lam=10.0, mu=1.0, theta=2.0, M_bound=1.0)


def test_lame_from_young():
    lam, mu = lame_from_young(1e-2, 0.3)
    assert lam == pytest.approx(1e-2 * 0.3 / (1.3 * 0.4))
    assert mu == pytest.approx(1e-2 / 2.6)


def test_m_bound_identity_frobenius():
    law = ExponentialLaw(1.0, 0.0)
    assert estimate_M_bound(law, np.zeros((3, 2, 2)), norm="frobenius") == pytest.approx(np.sqrt(2))
    assert estimate_M_bound(law, np.zeros((3, 2, 2))) == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 1000), n=st.integers(1, 30))
def test_m_bound_monotone_in_samples(seed, n):
    rng = np.random.default_rng(seed)
    law = QuadraticLaw(1.5, 0.4)
    S = sym(rng, n + 10)
    assert estimate_M_bound(law, S[:n]) <= estimate_M_bound(law, S)
    assert estimate_M_bound(law, S[:n], "frobenius") <= estimate_M_bound(law, S, "frobenius")


def test_m_bound_example_grid():
    case = smooth_case()
    g = np.linspace(0.0, 1.0, 400)
    X, Y = np.meshgrid(g, g)
    S = case.sigma(np.column_stack([X.ravel(), Y.ravel()]))
    assert estimate_M_bound(case.diff_law, S) == pytest.approx(EXAMPLE1_M_BOUND, rel=1e-3)
