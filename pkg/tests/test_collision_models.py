import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from kacgap.collision_models import (
    AngleSampler,
    AngularDensity,
    InvariantError,
    ModelSpec,
    ScatteringWeight,
    boltzmann_collide,
    check_orthogonal,
    density_cosine_moment,
    parity,
    rotate_pair,
    rotation_matrix,
    sample_angle,
    shuffle_step,
    son_left_rotate,
)

finite = st.floats(-1.0, 1.0, allow_nan=False)
angles = st.floats(-math.pi, math.pi, allow_nan=False)


def unit(x):
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x)
    return x / n if n > 1e-3 else None


# -- densities ---------------------------------------------------------------


def test_uniform_density_is_normalized():
    rho = AngularDensity.uniform()
    th = rho.grid()
    assert abs(2 * np.pi * np.mean(rho(th)) - 1.0) < 1e-12


def test_moment_string_sets_cosine_moment():
    rho = AngularDensity.parse("a2=0.5")
    assert density_cosine_moment(rho, 2) == pytest.approx(0.5, abs=1e-15)
    # independent check: rho = (1 + cos 2 theta)/(2 pi)
    th = np.linspace(-np.pi, np.pi, 2001)
    assert np.allclose(rho(th), (1 + np.cos(2 * th)) / (2 * np.pi))


@pytest.mark.parametrize("k,expected", [(0, 1.0), (3, 0.0), (2, 0.0)])
def test_uniform_moments(k, expected):
    assert density_cosine_moment(AngularDensity.uniform(), k) == expected


def test_trig_moment_matches_quadrature():
    from scipy.integrate import quad

    rho = AngularDensity.parse("a2=0.3,a4=0.2")
    for p, q in [(2, 2), (4, 0), (3, 1), (0, 6), (5, 3)]:
        ref, _ = quad(lambda t: math.cos(t) ** p * math.sin(t) ** q * float(rho(t)), -math.pi, math.pi,
                      epsabs=1e-14)
        assert rho.trig_moment(p, q) == pytest.approx(ref, abs=1e-13)


def test_negative_density_rejected():
    with pytest.raises(InvariantError):
        AngularDensity.parse("a1=0.9")
    with pytest.raises(ValueError):
        AngularDensity.parse("b2=0.1")


def test_density_record_round_trip():
    rho = AngularDensity.parse("a2=0.3,a4=-0.1", 512)
    back = AngularDensity.from_record(rho.to_record())
    assert back.cosine_coefficients == rho.cosine_coefficients
    assert back.grid_resolution == 512
    assert rho.to_record().startswith("rho: {a_k: [")


def test_grid_density_riemann_lebesgue():
    th = AngularDensity.uniform(1024).grid()
    values = np.exp(np.cos(th))
    values /= 2 * np.pi * values.mean()
    rho = AngularDensity.from_grid(values).validate()
    assert abs(density_cosine_moment(rho, 10 * 8)) < 1e-3
    assert density_cosine_moment(rho, 0) == 1.0


def test_sample_angle_uniform_endpoints():
    rho = AngularDensity.uniform()
    assert sample_angle(rho, 0.5) == pytest.approx(0.0, abs=1e-12)
    assert sample_angle(rho, 1.0) == pytest.approx(math.pi)


def test_sample_angle_cos2_moment_and_ks():
    rho = AngularDensity.parse("a2=0.5")
    u = np.random.default_rng(0).random(1_000_000)
    th = AngleSampler(rho)(u)
    assert np.mean(np.cos(2 * th)) == pytest.approx(0.5, abs=0.002)

    def cdf(t):
        return (t + np.pi) / (2 * np.pi) + 0.5 * np.sin(2 * t) / (2 * np.pi)

    assert stats.kstest(th[:200_000], cdf).statistic < 0.01


def test_scattering_weight_uniform_and_grid():
    ScatteringWeight.uniform().validate()
    x = np.linspace(-1, 1, 101)
    vals = (1 + x**2) / (2 * np.pi * (2 + 2 / 3))
    w = ScatteringWeight(vals).validate(1e-4)
    rec = ScatteringWeight.from_record(w.to_record())
    assert np.allclose(rec.values, vals)
    with pytest.raises(InvariantError):
        ScatteringWeight(-vals).validate()


def test_model_spec_validation():
    assert ModelSpec("kac", 3).rho.degree == 0
    with pytest.raises(ValueError):
        ModelSpec("shuffle", 4, p=1.0)
    ModelSpec("shuffle", 4, p=1.0, allow_boundary_p=True)
    with pytest.raises(ValueError):
        ModelSpec("boltzmann", 2)
    with pytest.raises(ValueError):
        ModelSpec("lattice", 4)


# -- collision maps ----------------------------------------------------------


def test_rotate_pair_examples():
    out = rotate_pair([1.0, 0.0, 0.0], 0, 1, math.pi / 2)
    assert np.allclose(out, [0.0, -1.0, 0.0], atol=1e-15)
    v = np.array([0.6, 0.0, 0.8])
    assert np.array_equal(rotate_pair(v, 0, 2, 0.0), v)
    with pytest.raises(ValueError):
        rotate_pair(v, 1, 1, 0.3)
    with pytest.raises(IndexError):
        rotate_pair(v, 0, 3, 0.3)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=3, max_size=8), angles, st.data())
def test_rotate_pair_conserves_energy(xs, theta, data):
    v = np.array(xs)
    i = data.draw(st.integers(0, len(xs) - 2))
    j = data.draw(st.integers(i + 1, len(xs) - 1))
    out = rotate_pair(v, i, j, theta)
    assert abs(out @ out - v @ v) <= 1e-14
    mask = np.ones(len(xs), bool)
    mask[[i, j]] = False
    assert np.array_equal(out[mask], v[mask])


def test_boltzmann_collide_examples():
    vi, vj = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    a, b = boltzmann_collide(vi, vj, [1.0, 0, 0])
    assert np.allclose(a, 0) and np.allclose(b, [1, 1, 0])
    w = unit(vj - vi)
    a, b = boltzmann_collide(vi, vj, w)
    assert np.allclose(a, vj) and np.allclose(b, vi)
    a, b = boltzmann_collide(vi, vj, [0, 0, 1.0])
    assert np.array_equal(a, vi) and np.array_equal(b, vj)
    with pytest.raises(InvariantError):
        boltzmann_collide(vi, vj, [1.0, 1.0, 0])


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=3, max_size=3), st.lists(finite, min_size=3, max_size=3),
       st.lists(finite, min_size=3, max_size=3))
def test_boltzmann_collide_conserves(vi, vj, w):
    w = unit(w)
    if w is None:
        return
    vi, vj = np.array(vi), np.array(vj)
    a, b = boltzmann_collide(vi, vj, w)
    assert np.max(np.abs(a + b - vi - vj)) <= 1e-13
    assert abs(a @ a + b @ b - vi @ vi - vj @ vj) <= 1e-13


def test_boltzmann_radius_bound_along_collisions():
    rng = np.random.default_rng(3)
    N = 5
    v = rng.normal(size=(N, 3))
    v -= v.mean(axis=0)
    v /= np.sqrt(np.sum(v * v))
    for _ in range(2000):
        i, j = rng.choice(N, 2, replace=False)
        w = unit(rng.normal(size=3))
        v[i], v[j] = boltzmann_collide(v[i], v[j], w)
        assert np.max(np.sum(v * v, axis=1)) <= (N - 1) / N + 1e-12


def test_shuffle_step():
    ident = np.arange(4)
    s = shuffle_step(ident, 0, 1, True)
    assert s.tolist() == [1, 0, 2, 3]
    assert np.array_equal(shuffle_step(s, 0, 1, False), s)
    sigma = np.array([2, 0, 3, 1])
    twice = shuffle_step(shuffle_step(sigma, 1, 3, True), 1, 3, True)
    assert np.array_equal(twice, sigma)
    assert parity(shuffle_step(sigma, 1, 3, True)) != parity(sigma)


def test_shuffle_step_is_left_composition():
    sigma = np.array([2, 0, 3, 1])
    t = np.array([0, 3, 2, 1])  # transposition (1 3)
    assert np.array_equal(shuffle_step(sigma, 1, 3, True), t[sigma])


def test_son_left_rotate():
    g = son_left_rotate(np.eye(4), 1, 2, 0.7)
    assert np.allclose(g, rotation_matrix(4, 1, 2, 0.7))
    assert np.array_equal(son_left_rotate(np.eye(3), 0, 1, 0.0), np.eye(3))
    with pytest.raises(InvariantError):
        son_left_rotate(2 * np.eye(3), 0, 1, 0.1)


def test_son_columns_follow_rotate_pair_and_keep_determinant():
    rng = np.random.default_rng(4)
    for _ in range(100):
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        i, j = sorted(rng.choice(5, 2, replace=False))
        th = rng.uniform(-np.pi, np.pi)
        g = son_left_rotate(q, i, j, th)
        check_orthogonal(g)
        assert np.linalg.det(g) == pytest.approx(np.linalg.det(q), abs=1e-10)
        for k in range(5):
            assert np.max(np.abs(g[:, k] - rotate_pair(q[:, k], i, j, th))) <= 1e-14
