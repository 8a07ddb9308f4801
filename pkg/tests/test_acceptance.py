"""Acceptance checks, one per criterion, each printing a PASS/FAIL line.

Run standalone with ``python3 tests/test_acceptance.py`` or through pytest,
where the lines are repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest

from kacgap.collision_models import AngularDensity, ModelSpec
from kacgap.exact_verifier import (
    build_restricted_p,
    build_restricted_q,
    kac_k_quadrature,
    quartic_residual,
    shuffle_q_bruteforce,
    suite_boltzmann,
)
from kacgap.gap_engine import alpha8_product, alpha8_product_closed_form, boltzmann_positivity, theorem71_check
from kacgap.k_spectra import k_extremes, kac_alpha, son_zonal_ratio
from kacgap.walk_simulator import estimate_gap, run_walk, stationary_moment_check

UNIFORM = AngularDensity.uniform()


def c1_exact_kac_gap():
    worst = max(
        abs(N * (1 - build_restricted_q(N, UNIFORM, 4).second_eigenvalue()) - 0.5 * (N + 2) / (N - 1))
        for N in (3, 4, 5, 6)
    )
    return worst <= 1e-9, f"max |N(1-lambda_N) - (N+2)/(2(N-1))| = {worst:.2e} (tol 1e-9)", 10.0


def c2_kappa_closed_form():
    worst = 0.0
    for N in range(4, 13):
        vals = {e.n: e.value for e in kac_k_quadrature(N).entries}
        kappa = max(v for n, v in vals.items() if n > 0)
        worst = max(worst, abs(kappa - 3 / (N * N - 1)))
        for n in (2, 6, 8):
            worst = max(worst, abs(vals[n] - kac_alpha(N, n)))
    return worst <= 1e-8, f"max deviation kappa, alpha_2/6/8 over N=4..12 = {worst:.2e} (tol 1e-8)", 5.0


def c3_transfer():
    lam = {N: build_restricted_q(N, UNIFORM, 4).second_eigenvalue() for N in range(2, 6)}
    w_mu, w_ind = 0.0, 0.0
    for N in (3, 4, 5):
        mu = build_restricted_p(N, 4).second_eigenvalue()
        kappa, _ = k_extremes(("kac", N))
        w_mu = max(w_mu, abs(mu - (1 + (N - 1) * kappa) / N))
        w_ind = max(w_ind, abs(lam[N] - (lam[N - 1] + (1 - lam[N - 1]) * mu)))
    ok = w_mu <= 1e-10 and w_ind <= 1e-10
    return ok, f"mu deviation {w_mu:.2e}, induction equality deviation {w_ind:.2e} (tol 1e-10)", None


def c4_quartic_eigenfunction():
    worst = max(quartic_residual(N, AngularDensity.parse(t)) for N in (3, 4, 5)
                for t in ("uniform", "a2=0.5", "a4=0.5"))
    return worst <= 1e-10, f"max quartic residual = {worst:.2e} (tol 1e-10)", None


def c5_shuffle():
    w_gap, mult_ok = 0.0, True
    for N in range(2, 7):
        for p in (0.25, 0.5, 1.0):
            tab = shuffle_q_bruteforce(N, p)
            w_gap = max(w_gap, abs(tab.scan_bounds["gap"] - 2 * p * N / (N - 1)))
            mult_ok &= tab.scan_bounds["second_multiplicity"] == (N - 1) ** 2
    return w_gap <= 1e-10 and mult_ok, f"max gap deviation {w_gap:.2e}, multiplicities ok={mult_ok}", 30.0


def c6_boltzmann():
    checks = suite_boltzmann()
    bad = [c.check_id for c in checks if not c.passed]
    worst = {c.check_id: c.computed for c in checks if c.check_id.startswith(("jacobi", "closed", "residual"))}
    detail = ", ".join(f"{k}={v:.1e}" for k, v in worst.items())
    return not bad, f"{len(checks) - len(bad)}/{len(checks)} checks; {detail}" + (f"; failed {bad}" if bad else ""), None


def c7_son():
    worst = max(abs(son_zonal_ratio(N, d) - kac_alpha(N, d)) for N in range(3, 13) for d in range(13))
    return worst <= 1e-12, f"max |zonal ratio - alpha| over N=3..12, d<=12 = {worst:.2e} (tol 1e-12)", None


def c8_alpha8_machinery():
    lit, closed = alpha8_product(50), alpha8_product_closed_form(50)
    res = theorem71_check(UNIFORM)
    ok = abs(lit - closed) <= 1e-10 and abs(res.L - 0.5564) <= 5e-4 and res.holds
    return ok, f"product@50 diff {abs(lit - closed):.1e}, L = {res.L:.6f}, holds(uniform) = {res.holds}", None


def c9_simulation():
    spec = ModelSpec("kac", 10)
    times = np.linspace(0.0, 4.5, 19)
    ens = run_walk(spec, times, 20_000, seed=7)
    fit = estimate_gap(ens, "quartic")
    again = run_walk(spec, times, 20_000, seed=7)
    same = np.array_equal(ens.samples["quartic"], again.samples["quartic"])
    rel = abs(fit["rate"] - 2 / 3) / (2 / 3)
    ok = rel <= 0.15 and ens.audit["energy"] <= 1e-9 and same
    detail = (f"rate {fit['rate']:.4f} +- {fit['stderr']:.4f} vs 2/3 (rel {rel:.3f}, tol 0.15), "
              f"audit {ens.audit['energy']:.1e}, bitwise rerun {same}")
    return ok, detail, 300.0


def c10_marginals():
    rows = []
    ok = True
    for spec, seed in ((ModelSpec("kac", 5), 13), (ModelSpec("boltzmann", 4), 14)):
        rep = stationary_moment_check(spec, 20_000, seed)
        ok &= rep["passed"]
        z = max(abs(m.mean - m.exact) / m.stderr for m in rep["moments"])
        rows.append(f"{spec.variant} N={spec.n} max |z| = {z:.2f}")
    return ok, "; ".join(rows) + " (tol 3)", None


def note_boltzmann_positivity():
    N, d = boltzmann_positivity(200)
    tail = all(k_extremes(("boltzmann", n))[0] <= 2 / n**2 for n in range(20, 201, 20))
    ok = bool(d.min() > 0) and tail
    return ok, f"min lower bound over N<=200 = {d.min():.4f}, kappa_N <= 2/N^2 sampled for N>=20: {tail}", None


CRITERIA = [
    ("1 exact Kac gap", c1_exact_kac_gap),
    ("2 kappa closed form", c2_kappa_closed_form),
    ("3 K-to-P transfer", c3_transfer),
    ("4 quartic eigenfunction", c4_quartic_eigenfunction),
    ("5 shuffle exactness", c5_shuffle),
    ("6 Boltzmann spectra", c6_boltzmann),
    ("7 SO(N) coincidence", c7_son),
    ("8 alpha_8 product and criterion", c8_alpha8_machinery),
    ("9 simulation", c9_simulation),
    ("10 stationary marginals", c10_marginals),
    ("note Boltzmann positivity", note_boltzmann_positivity),
]


def evaluate(label, fn):
    t0 = time.perf_counter()
    ok, detail, budget = fn()
    secs = time.perf_counter() - t0
    if budget is not None and secs > budget:
        ok = False
        detail += f"; over time budget {budget:g} s"
    line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail} [{secs:.2f} s]"
    return ok, line


@pytest.mark.parametrize("label,fn", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(label, fn, acceptance_lines):
    ok, line = evaluate(label, fn)
    print(line)
    acceptance_lines.append(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(label, fn) for label, fn in CRITERIA]
    for _, line in results:
        print(line)
    raise SystemExit(0 if all(ok for ok, _ in results) else 1)
