import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, special

from kacgap.collision_models import AngularDensity, InvariantError
from kacgap.exact_verifier import (
    SUITES,
    apply_q,
    boltzmann_eigen_residual,
    boltzmann_marginal_exact,
    build_restricted_p,
    build_restricted_q,
    fourier_q2_spectrum,
    inner_product,
    kac_k_quadrature,
    power_sum,
    quartic_polynomial,
    quartic_residual,
    reduce_on_sphere,
    run_suite,
    shuffle_q_bruteforce,
    shuffle_q_matrix,
    sphere_moment,
    sphere_moment_exact,
)
from kacgap.k_spectra import kac_alpha

UNIFORM = AngularDensity.uniform()


def sphere_mc(N, exps, n=400_000, seed=0):
    x = np.random.default_rng(seed).normal(size=(n, N))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return np.prod(x ** np.asarray(exps), axis=1).mean()


# -- sphere moments ----------------------------------------------------------


def test_sphere_moment_examples():
    for N in range(2, 9):
        assert sphere_moment_exact(N, [2]) == Fraction(1, N)
    assert sphere_moment_exact(3, [4]) == Fraction(1, 5)
    assert sphere_moment(5, [4]) == pytest.approx(3 / 35)
    assert sphere_moment(4, [2, 3]) == 0.0
    assert sphere_moment(4, [0, 0, 0, 0]) == 1.0


def test_sphere_moment_against_monte_carlo():
    for exps in ([2, 2], [4, 2, 0], [2, 2, 2]):
        N = max(len(exps), 3)
        assert sphere_mc(N, exps + [0] * (N - len(exps))) == pytest.approx(sphere_moment(N, exps), abs=2e-3)


def test_sphere_moment_against_beta_marginal():
    # v_1 on S^{N-1} has density prop (1 - t^2)^{(N-3)/2}
    for N in (3, 4, 7):
        for k in (2, 4, 6, 8):
            a = (N - 3) / 2
            num, _ = integrate.quad(lambda t: t**k * (1 - t * t) ** a, -1, 1)
            den, _ = integrate.quad(lambda t: (1 - t * t) ** a, -1, 1)
            assert sphere_moment(N, [k]) == pytest.approx(num / den, abs=1e-12)


def test_reduce_on_sphere_preserves_inner_products():
    N = 4
    f = reduce_on_sphere(power_sum(N, 4), N)
    assert all(e[-1] <= 1 for e in f)
    g = power_sum(N, 4)
    assert inner_product(N, f, f) == pytest.approx(inner_product(N, g, g), abs=1e-14)


# -- restricted operators -------------------------------------------------------


def test_restricted_q_examples():
    op = build_restricted_q(3, UNIFORM, 4, "symmetric")
    assert op.second_eigenvalue() == pytest.approx(7 / 12, abs=1e-12)
    assert build_restricted_q(2, UNIFORM, 4).second_eigenvalue() == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("N", [3, 4, 5, 6])
def test_restricted_q_gap_uniform(N):
    op = build_restricted_q(N, UNIFORM, 4)
    assert N * (1 - op.second_eigenvalue()) == pytest.approx(0.5 * (N + 2) / (N - 1), abs=1e-9)
    assert op.symmetry_defect() <= 1e-10
    assert op.constant_defect() <= 1e-12
    assert np.all(np.linalg.eigvalsh(op.gram) > 0)


def test_restricted_q_sectors_agree_for_uniform():
    for N in (3, 4):
        full = build_restricted_q(N, UNIFORM, 4).second_eigenvalue()
        sym = build_restricted_q(N, UNIFORM, 4, "symmetric").second_eigenvalue()
        assert sym == pytest.approx(full, abs=1e-12)


@pytest.mark.parametrize("text", ["uniform", "a2=0.5", "a4=0.5"])
@pytest.mark.parametrize("N", [3, 4, 5])
def test_quartic_residual(N, text):
    assert quartic_residual(N, AngularDensity.parse(text)) <= 1e-10


def test_apply_q_is_self_adjoint_on_random_polys():
    rho = AngularDensity.parse("a2=0.3,a4=0.2")
    N = 3
    f = {(2, 1, 0): 1.0, (0, 0, 1): -0.5, (1, 1, 1): 0.3}
    g = {(0, 2, 1): 0.7, (3, 0, 0): 1.1}
    lhs = inner_product(N, f, apply_q(g, N, rho))
    rhs = inner_product(N, apply_q(f, N, rho), g)
    assert lhs == pytest.approx(rhs, abs=1e-14)


@pytest.mark.parametrize("N", [3, 4, 5])
def test_restricted_p_matches_mu(N):
    mu = build_restricted_p(N, 4).second_eigenvalue()
    kappa = 3 / (N * N - 1)
    assert mu == pytest.approx((1 + (N - 1) * kappa) / N, abs=1e-10)


def test_restricted_p_eigenvector_is_symmetrized_k_eigenfunction():
    # second eigenvector spans sum_j h(v_j), h = Gegenbauer degree 4 (kappa = alpha_4)
    N = 3
    op = build_restricted_p(N, 4)
    vals, vecs = op.eigh()
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    f = quartic_polynomial(N)
    c = np.array([inner_product(N, b, f) for b in op.basis])
    coef = np.linalg.solve(op.gram, c)
    v = vecs[:, 1]
    cos = abs(coef @ op.gram @ v) / math.sqrt((coef @ op.gram @ coef) * (v @ op.gram @ v))
    assert cos == pytest.approx(1.0, abs=1e-10)


def test_induction_equality_uniform():
    lam = {N: build_restricted_q(N, UNIFORM, 4).second_eigenvalue() for N in range(2, 6)}
    for N in (3, 4, 5):
        mu = build_restricted_p(N, 4).second_eigenvalue()
        assert lam[N] == pytest.approx(lam[N - 1] + (1 - lam[N - 1]) * mu, abs=1e-10)


# -- shuffle ------------------------------------------------------------------


def test_shuffle_bruteforce_examples():
    vals = np.linalg.eigvalsh(shuffle_q_matrix(2, 0.3))
    assert np.allclose(sorted(vals), [1 - 0.6, 1.0])
    t = shuffle_q_bruteforce(3, 0.5)
    assert t.scan_bounds["gap"] == pytest.approx(1.5, abs=1e-10)
    assert t.scan_bounds["second_multiplicity"] == 4
    t = shuffle_q_bruteforce(4, 1.0)
    assert t.scan_bounds["gap"] == pytest.approx(8 / 3, abs=1e-10)
    assert t.scan_bounds["second_multiplicity"] == 9


def test_shuffle_matrix_is_symmetric_stochastic():
    Q = shuffle_q_matrix(4, 0.4)
    assert np.allclose(Q, Q.T)
    assert np.allclose(Q.sum(axis=1), 1.0)


def test_shuffle_bruteforce_rejects_large_n():
    with pytest.raises(ValueError):
        shuffle_q_bruteforce(8, 0.5)


# -- K quadrature, Boltzmann residuals, circle -----------------------------------


def test_kac_k_quadrature_n4():
    t = kac_k_quadrature(4)
    vals = {e.n: e.value for e in t.entries}
    assert vals[0] == pytest.approx(1.0, abs=1e-12)
    assert vals[2] == pytest.approx(-1 / 3, abs=1e-8)
    assert vals[4] == pytest.approx(0.2, abs=1e-8)
    assert vals[6] == pytest.approx(-1 / 7, abs=1e-8)
    for n in (1, 3, 5, 7):
        assert abs(vals[n]) <= 1e-12


@pytest.mark.parametrize("N", range(4, 13))
def test_kac_k_quadrature_matches_alphas(N):
    vals = {e.n: e.value for e in kac_k_quadrature(N).entries}
    for n in range(0, 9):
        assert vals[n] == pytest.approx(kac_alpha(N, n), abs=1e-8)


def test_kac_k_quadrature_grid_guard():
    with pytest.raises(ValueError):
        kac_k_quadrature(5, grid=10, max_degree=12)


def test_boltzmann_residuals():
    assert boltzmann_eigen_residual(5, 0, 0) <= 1e-14
    assert boltzmann_eigen_residual(5, 0, 1) <= 1e-8
    for n, l in ((1, 0), (2, 0), (1, 1), (0, 2)):  # noqa: E741
        assert boltzmann_eigen_residual(5, n, l) <= 1e-6
    with pytest.raises(ValueError):
        boltzmann_eigen_residual(5, 0, 3)
    with pytest.raises(ValueError):
        boltzmann_eigen_residual(5, 6, 0, n_rad=4)


def test_fourier_q2_spectrum():
    vals = [e.value for e in fourier_q2_spectrum(UNIFORM, 8).entries]
    assert vals[0] == pytest.approx(1.0) and max(abs(v) for v in vals[1:]) <= 1e-12
    rho = AngularDensity.parse("a4=0.5")
    t = fourier_q2_spectrum(rho, 8)
    by_k = {e.n: e.value for e in t.entries}
    assert by_k[4] == pytest.approx(0.5, abs=1e-12)
    assert all(abs(v) <= 1e-12 for k, v in by_k.items() if k not in (0, 4))


def test_boltzmann_marginal_exact_against_quadrature():
    # |pi_1|^2 density on [0, 1] prop s^{1/2} (1 - s)^{(3N-8)/2}
    for N in (4, 5, 9):
        b = (3 * N - 8) / 2
        for k in (1, 2, 3):
            ref = special.beta(1.5 + k, b + 1) / special.beta(1.5, b + 1)
            assert boltzmann_marginal_exact(N, k) == pytest.approx(ref, rel=1e-12)


# -- suites --------------------------------------------------------------------


@pytest.mark.parametrize("name", sorted(SUITES))
def test_suites_pass(name):
    checks, _ = run_suite(name)
    failed = [c.check_id for c in checks if not c.passed]
    assert not failed
    d = checks[0].as_dict()
    assert set(d) == {"check_id", "paper_ref", "computed", "expected", "tolerance", "pass"}


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_invalid_density_rejected_before_assembly():
    with pytest.raises(InvariantError):
        build_restricted_q(3, AngularDensity.parse("a1=0.9"), 4)
