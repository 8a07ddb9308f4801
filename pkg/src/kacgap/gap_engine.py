"""Spectral-gap bounds and exact values for the Kac-type walks.

The gap is ``Delta_N = N (1 - lambda_N)`` with ``lambda_N`` the second
eigenvalue of the one-step operator Q.  Lower bounds come from the induction
``Delta_N >= (1 - max(kappa_N, beta_N)) Delta_{N-1}``; upper bounds from the
quartic trial function; exact values when the two meet.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

from .collision_models import AngularDensity, ModelSpec, density_cosine_moment
from .k_spectra import DEFAULT_N_MAX_SCAN, k_extremes, kac_alpha_exact

SECTORS = ("full", "symmetric")
CSV_FIELDS = ("N", "kappa", "beta", "mu", "delta_lower", "delta_upper", "delta_exact", "sharp")
THEOREM71_RATIO = 0.45
MOMENT_TOL = 1e-13  # ties between cosine moments below this count as equal


@dataclass
class GapReport:
    """Gap bookkeeping at one N; fields not determined by the computation stay None."""

    N: int
    delta_lower: float
    lambda2: float | None = None
    delta2: float | None = None
    kappa: float | None = None
    beta: float | None = None
    mu: float | None = None
    delta_upper: float | None = None
    delta_exact: float | None = None
    sharp: bool = False
    sector: str = "full"
    model: str = "kac"
    multiplicity: int | None = None
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if self.sector not in SECTORS:
            raise ValueError(f"sector must be one of {SECTORS}")
        if self.delta_upper is not None and self.delta_lower > self.delta_upper + 1e-12:
            raise ArithmeticError(
                f"lower bound {self.delta_lower!r} exceeds upper bound {self.delta_upper!r}"
            )
        if self.delta_exact is not None:
            hi = math.inf if self.delta_upper is None else self.delta_upper
            if not (self.delta_lower - 1e-12 <= self.delta_exact <= hi + 1e-12):
                raise ArithmeticError("exact gap lies outside its bracket")

    @property
    def lambda_n(self):
        """Second eigenvalue of Q when the gap is known exactly."""
        return None if self.delta_exact is None else 1.0 - self.delta_exact / self.N

    def as_dict(self):
        return asdict(self)

    def to_json(self, extra=None):
        doc = self.as_dict()
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=2)

    def csv_row(self):
        d = self.as_dict()
        return ["" if d[k] is None else d[k] for k in CSV_FIELDS]


def reports_to_csv(reports, header_comment=None):
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r.csv_row()])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Induction step
# ---------------------------------------------------------------------------


def mu_from_K(N, kappa, beta):
    """Second eigenvalue of the projection average P from K's extremes."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if kappa == 0 and beta == 0:
        return 1.0 / N
    return max((1.0 + (N - 1) * kappa) / N, (1.0 + (N - 1) * beta) / N)


def gap_recursion_lower(model, N_max, delta2, base_n=None, n_max=DEFAULT_N_MAX_SCAN):
    """Iterate ``Delta_N >= (1 - max(kappa_N, beta_N)) Delta_{N-1}`` up to N_max.

    ``delta2`` is the gap at ``base_n`` (default 2; 3 for the Boltzmann
    model, whose K formulas start at N = 4).  ``model`` is a ModelSpec or a
    variant name.
    """
    variant = model.variant if isinstance(model, ModelSpec) else str(model)
    if base_n is None:
        base_n = 3 if variant == "boltzmann" else 2
    if delta2 <= 0:
        raise ValueError("the base gap must be positive")
    reports = []
    lower = float(delta2)
    for N in range(base_n + 1, N_max + 1):
        kappa, beta = k_extremes((variant, N), n_max=n_max)
        factor = 1.0 - max(kappa, beta)
        if factor <= 0:
            raise ArithmeticError(f"recursion factor {factor!r} at N={N} is not positive")
        lower *= factor
        reports.append(
            GapReport(
                N,
                lower,
                delta2=float(delta2),
                kappa=kappa,
                beta=beta,
                mu=mu_from_K(N, kappa, beta),
                model=variant,
                notes=[f"induction from base N={base_n}"],
            )
        )
    return reports


def kac_product_closed_form(N):
    """``prod_{j=3}^N (1 - 3/(j^2-1)) = (N+2) / (4 (N-1))``."""
    if N < 3:
        raise ValueError("need N >= 3")
    return 0.25 * (N + 2) / (N - 1)


# ---------------------------------------------------------------------------
# Kac model
# ---------------------------------------------------------------------------


def _grid_k_max(rho, k_max):
    if k_max is not None:
        return int(k_max)
    if rho.is_series:
        return max(rho.degree, 1)
    return rho.grid_resolution // 8


def cosine_moments(rho, k_max=None):
    """Moments ``c_k = int rho cos(k theta)`` for k = 1..k_max."""
    k_max = _grid_k_max(rho, k_max)
    return np.array([density_cosine_moment(rho, k) for k in range(1, k_max + 1)])


def lambda2_kac(rho, k_max=None):
    """``sup_{k >= 1} c_k``: second eigenvalue of Q at N = 2.

    For series densities the supremum is exact (moments past the degree are
    0).  Grid densities use ``k_max`` (default ``grid_resolution/8``).
    """
    c = cosine_moments(rho, k_max)
    value = float(c.max()) if c.size else 0.0
    if rho.is_series and (k_max is None or k_max > rho.degree or rho.degree == 0):
        value = max(value, 0.0)
    if value >= 1.0:
        raise ArithmeticError("lambda_2 must be below 1 for an ergodic density")
    return value


def gamma_coefficient(rho):
    """``(1 - c_4) / 4``."""
    return 0.25 * (1.0 - density_cosine_moment(rho, 4))


def quartic_condition(rho, k_max=None):
    """True when ``c_k <= c_4`` for every k != 0 (scanned range; exact for series)."""
    k_max = _grid_k_max(rho, k_max)
    c4 = density_cosine_moment(rho, 4)
    c = cosine_moments(rho, max(k_max, 4))
    ok = bool(np.all(c <= c4 + MOMENT_TOL))
    if rho.is_series and c4 < -MOMENT_TOL:
        ok = False  # c_k = 0 for k past the degree
    return ok


def big_gamma(rho, N):
    """``Gamma_N = 2 gamma (N+2)/(N-1)``: N times one minus the quartic eigenvalue."""
    return 2.0 * gamma_coefficient(rho) * (N + 2) / (N - 1)


def kac_gap_exact(rho, N, k_max=None):
    """Two-sided gap bracket for the Kac walk, exact when the quartic condition holds."""
    if N < 2:
        raise ValueError("N must be at least 2")
    lam2 = lambda2_kac(rho, k_max)
    lower = 0.5 * (1.0 - lam2) * (N + 2) / (N - 1)
    upper = big_gamma(rho, N)
    sharp = quartic_condition(rho, k_max)
    notes = ["lower: product of (1 - kappa_j) from N=2", "upper: quartic trial function"]
    exact = None
    multiplicity = None
    if sharp:
        if abs(upper - lower) > 1e-12:
            raise ArithmeticError("quartic condition holds but the bracket does not close")
        exact = lower
        multiplicity = 1 if N >= 3 else None
        notes.append("sharp: c_4 is the largest cosine moment")
    kappa = 3.0 / (N * N - 1) if N >= 3 else None
    beta = 1.0 / (N - 1) ** 2 if N >= 3 else None
    return GapReport(
        N,
        lower,
        lambda2=lam2,
        delta2=2.0 * (1.0 - lam2),
        kappa=kappa,
        beta=beta,
        mu=mu_from_K(N, kappa, beta) if N >= 3 else None,
        delta_upper=upper,
        delta_exact=exact,
        sharp=sharp,
        model="kac",
        multiplicity=multiplicity,
        notes=notes,
    )


def linearized_kac_eigenvalue(rho, n):
    """``2 int (sin^n + cos^n - 1) rho``: eigenvalue of the linearized Kac operator on H_n."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if rho.is_series and rho.degree == 0:
        # uniform: int sin^n = int cos^n = (n-1)!!/n!! for even n, 0 for odd n
        m = 0.0
        if n % 2 == 0:
            m = float(math.prod(range(n - 1, 0, -2)) / math.prod(range(n, 0, -2)))
        return 2.0 * (2.0 * m - 1.0)
    return 2.0 * (rho.trig_moment(0, n) + rho.trig_moment(n, 0) - 1.0)


# ---------------------------------------------------------------------------
# Symmetric sector
# ---------------------------------------------------------------------------


def symmetric_delta2(rho, k_max=None):
    """``2 min_{k >= 1} int (1 - cos k theta) rho``."""
    c = cosine_moments(rho, k_max)
    best = float(c.max()) if c.size else 0.0
    if rho.is_series and (k_max is None or k_max > rho.degree or rho.degree == 0):
        best = max(best, 0.0)
    return 2.0 * (1.0 - best)


def alpha8_product(N):
    """Literal ``prod_{j=3}^N (1 - alpha_8(j))``."""
    out = 1.0
    for j in range(3, N + 1):
        out *= 1.0 - float(kac_alpha_exact(j, 8))
    return out


def alpha8_product_closed_form(N, dps=30):
    """Gamma-function closed form of :func:`alpha8_product`.

    Uses ``(j+5)(j+3)(j+1)(j-1) - 105 = (j-2)(j+6)(j^2+4j+10)``.
    """
    with mpmath.workdps(dps):
        r6 = mpmath.sqrt(6) * 1j
        g = mpmath.gamma
        num = 90 * g(N - 1) * g(N + 7) * g(N + 3 + r6) * g(N + 3 - r6)
        den = g(N) * g(5 + r6) * g(5 - r6) * g(N + 6) * g(N + 4) * g(N + 2)
        val = num / den
        if abs(mpmath.im(val)) > mpmath.mpf(10) ** (-dps + 5):
            raise ArithmeticError("closed form should be real")
        return float(mpmath.re(val))


def limit_constant(dps=30):
    """``L = (3/770) sinh(sqrt6 pi)/(sqrt6 pi)``, the N -> infinity product."""
    with mpmath.workdps(dps):
        x = mpmath.sqrt(6) * mpmath.pi
        return float(mpmath.mpf(3) / 770 * mpmath.sinh(x) / x)


@dataclass
class Theorem71Result:
    gamma_2_cap: float
    delta2_sym: float
    holds: bool
    L: float
    limit_criterion: bool
    product_literal: float
    product_closed_form: float
    product_n: int
    crossing_n: int | None
    search_max: int

    def as_dict(self):
        return asdict(self)


def theorem71_check(rho, k_max=None, product_n=50, search_max=200):
    """Large-N quartic optimality test in the symmetric sector.

    ``holds`` is ``Delta2_sym > 0.45 Gamma_2``.  ``crossing_n`` is the
    smallest N from which ``prod (1 - alpha_8) * Delta2_sym`` stays above
    ``Gamma_N`` up to ``search_max``; past it the improved lower bound would
    contradict ``Delta_N <= Gamma_N``, so the quartic function is the
    symmetric-sector optimizer there.
    """
    gamma = gamma_coefficient(rho)
    g2 = 8.0 * gamma
    d2 = symmetric_delta2(rho, k_max)
    lit = alpha8_product(product_n)
    closed = alpha8_product_closed_form(product_n)
    L = limit_constant()
    crossing = None
    prod = 1.0
    for N in range(3, search_max + 1):
        prod *= 1.0 - float(kac_alpha_exact(N, 8))
        if prod * d2 > big_gamma(rho, N):
            crossing = N if crossing is None else crossing
        else:
            crossing = None
    return Theorem71Result(
        gamma_2_cap=g2,
        delta2_sym=d2,
        holds=bool(d2 > THEOREM71_RATIO * g2),
        L=L,
        limit_criterion=bool(2.0 * gamma < L * d2),
        product_literal=lit,
        product_closed_form=closed,
        product_n=product_n,
        crossing_n=crossing,
        search_max=search_max,
    )


# ---------------------------------------------------------------------------
# Shuffle
# ---------------------------------------------------------------------------


def rescale_eigenvalue(lam, p, p_new):
    """Eigenvalue of ``Q_{p_new}`` given eigenvalue ``lam`` of ``Q_p``.

    ``Q_q = (q/p) Q_p + (1 - q/p) I`` for any success probabilities p, q.
    """
    if not (0 < p <= 1 and 0 < p_new <= 1):
        raise ValueError("success probabilities must lie in (0, 1]")
    r = p_new / p
    return r * lam + (1.0 - r)


def shuffle_gap_closed_form(N, p):
    """Exact gap ``2 p N/(N-1)`` of the transposition shuffle, multiplicity ``(N-1)^2``."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if not (0 < p <= 1):
        raise ValueError("p must lie in (0, 1]")
    delta = 2.0 * p * N / (N - 1)
    kappa, beta = (-1.0 / (N - 1), 1.0 / (N - 1) ** 2) if N >= 3 else (None, None)
    return GapReport(
        N,
        delta,
        lambda2=1.0 - 2.0 * p,
        delta2=4.0 * p,
        kappa=kappa,
        beta=beta,
        mu=mu_from_K(N, kappa, beta) if N >= 3 else None,
        delta_upper=delta,
        delta_exact=delta,
        sharp=True,
        model="shuffle",
        multiplicity=(N - 1) ** 2,
        notes=["eigenfunctions h(sigma^-1(i)) - h(sigma^-1(j)) type, sum h = 0"],
    )


def shuffle_gap_schedule(N_values, p_of_n):
    """Exact gaps for an N-dependent success probability ``p(N)``."""
    return [shuffle_gap_closed_form(N, p_of_n(N)) for N in N_values]


def model_gap_reports(model, N_max=None, k_max=None, delta_base=None, n_max=DEFAULT_N_MAX_SCAN):
    """Per-N reports for a model spec: exact where known, recursion otherwise."""
    N_max = model.n if N_max is None else N_max
    if model.variant in ("kac", "son"):
        reps = [kac_gap_exact(model.rho, N, k_max) for N in range(2, N_max + 1)]
        for r in reps:
            r.model = model.variant
        return reps
    if model.variant == "shuffle":
        return [shuffle_gap_closed_form(N, model.p) for N in range(2, N_max + 1)]
    base = 1.0 if delta_base is None else delta_base
    reps = gap_recursion_lower("boltzmann", N_max, base, base_n=3, n_max=n_max)
    for r in reps:
        r.notes.append("delta at N=3 taken as the base value; bounds scale linearly with it")
    return reps


def boltzmann_positivity(N_hi=200, n_max=DEFAULT_N_MAX_SCAN):
    """Lower-bound product ``prod_{j=4}^{N} (1 - max(kappa_j, beta_j))`` for N up to N_hi."""
    reps = gap_recursion_lower("boltzmann", N_hi, 1.0, base_n=3, n_max=n_max)
    return np.array([r.N for r in reps]), np.array([r.delta_lower for r in reps])


__all__ = [
    "AngularDensity",
    "GapReport",
    "Theorem71Result",
    "alpha8_product",
    "alpha8_product_closed_form",
    "big_gamma",
    "boltzmann_positivity",
    "cosine_moments",
    "gamma_coefficient",
    "gap_recursion_lower",
    "kac_gap_exact",
    "kac_product_closed_form",
    "lambda2_kac",
    "limit_constant",
    "linearized_kac_eigenvalue",
    "model_gap_reports",
    "mu_from_K",
    "quartic_condition",
    "reports_to_csv",
    "rescale_eigenvalue",
    "shuffle_gap_closed_form",
    "shuffle_gap_schedule",
    "symmetric_delta2",
    "theorem71_check",
]
