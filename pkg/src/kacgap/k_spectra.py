"""Spectra of the one-particle conditional-expectation operator K.

K maps a single-particle function g to ``E[g(second particle) | first particle]``.
Its largest nontrivial eigenvalue (kappa) and its scaled most negative
eigenvalue (beta) drive the gap recursion in :mod:`kacgap.gap_engine`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

from .collision_models import ModelSpec

DEFAULT_N_MAX_SCAN = 8
DEFAULT_KOORNWINDER_NODES = 64


# ---------------------------------------------------------------------------
# Spectrum tables
# ---------------------------------------------------------------------------


@dataclass
class SpectrumEntry:
    value: float
    multiplicity: int | str = 1
    n: int | None = None
    l: int | None = None  # noqa: E741
    label: str | None = None

    def as_dict(self):
        out = {"n": self.n, "l": self.l, "value": float(self.value), "multiplicity": self.multiplicity}
        if self.label is not None:
            out["label"] = self.label
        return out


@dataclass
class SpectrumTable:
    model: str
    n: int
    entries: list = field(default_factory=list)
    scan_bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries.sort(key=lambda e: -e.value)

    @property
    def values(self):
        return np.array([e.value for e in self.entries])

    def second(self):
        """Largest value after one copy of the top eigenvalue 1 is set aside."""
        vals = []
        for e in self.entries:
            m = e.multiplicity if isinstance(e.multiplicity, int) else 1
            vals.extend([e.value] * m)
        vals.sort(reverse=True)
        return vals[1]

    def to_json(self, extra=None):
        doc = {
            "model": self.model,
            "N": self.n,
            "entries": [e.as_dict() for e in self.entries],
            "scan_bounds": self.scan_bounds,
        }
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        entries = [
            SpectrumEntry(e["value"], e["multiplicity"], e.get("n"), e.get("l"), e.get("label"))
            for e in doc["entries"]
        ]
        return cls(doc["model"], doc["N"], entries, doc.get("scan_bounds", {}))


@dataclass(frozen=True)
class JacobiIndex:
    """Degree and weight parameters of ``J_n^{(alpha, beta)}`` on [-1, 1]."""

    n: int
    alpha: float
    beta: float

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("degree must be non-negative")
        if self.alpha <= -1 or self.beta <= -1:
            raise ValueError("Jacobi parameters must exceed -1")

    @classmethod
    def boltzmann(cls, N, n, l):  # noqa: E741
        return cls(n, (3 * N - 8) / 2.0, l + 0.5)


# ---------------------------------------------------------------------------
# Kac model: eigenvalues from the sine recurrence
# ---------------------------------------------------------------------------


def _sine_ratio(m, j):
    """``int_0^pi sin^{m+2j} / int_0^pi sin^m`` by the sine recurrence, exactly."""
    r = Fraction(1)
    for i in range(1, j + 1):
        r *= Fraction(m + 2 * i - 1, m + 2 * i)
    return r


@lru_cache(maxsize=None)
def kac_alpha_exact(N, n):
    """Exact rational eigenvalue of the Kac K operator on degree-n polynomials."""
    if N < 3:
        raise ValueError("the Kac K operator is defined for N >= 3")
    if n < 0:
        raise ValueError("degree must be non-negative")
    if n % 2:
        return Fraction(0)
    k = n // 2
    m = N - 3
    # (1 - sin^2)^k expanded binomially against sin^m on [0, pi]
    total = sum(
        Fraction(math.comb(k, j) * (-1) ** j) * _sine_ratio(m, j) for j in range(k + 1)
    )
    return (-1) ** k * total


def kac_alpha(N, n):
    return float(kac_alpha_exact(N, n))


# ---------------------------------------------------------------------------
# Jacobi polynomials
# ---------------------------------------------------------------------------


def jacobi_polynomial(n, a, b, x):
    """``P_n^{(a,b)}(x)`` in the standard normalization, by three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p = 0.5 * (a - b + (a + b + 2.0) * x)
    ab = a + b
    for k in range(2, n + 1):
        c = 2.0 * k + ab
        a1 = 2.0 * k * (k + ab) * (c - 2.0)
        a2 = (c - 1.0) * (a * a - b * b)
        a3 = (c - 2.0) * (c - 1.0) * c
        a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c
        p, p_prev = ((a2 + a3 * x) * p - a4 * p_prev) / a1, p
    return p


def jacobi_ratio(idx, x):
    """``J_n(x) / J_n(1)``; independent of the polynomial normalization."""
    if abs(x) > 1.0 + 1e-15:
        raise ValueError("x must lie in [-1, 1]")
    num = jacobi_polynomial(idx.n, idx.alpha, idx.beta, x)
    den = jacobi_polynomial(idx.n, idx.alpha, idx.beta, 1.0)
    return float(num / den)


@lru_cache(maxsize=64)
def _koornwinder_nodes(alpha, beta, nodes):
    # s = r^2 on [0, 1] with weight (1-s)^(alpha-beta-1) s^beta;
    # u = cos(theta) on [-1, 1] with weight (1-u^2)^(beta-1/2).
    xs, ws = roots_jacobi(nodes, alpha - beta - 1.0, beta)
    s = 0.5 * (1.0 + xs)
    us, wu = roots_jacobi(nodes, beta - 0.5, beta - 0.5)
    S, U = np.meshgrid(s, us, indexing="ij")
    W = np.outer(ws, wu)
    return S, U, W / W.sum()


def _koornwinder_base(idx, x, nodes):
    if idx.alpha <= idx.beta:
        raise ValueError("the integral representation needs alpha > beta")
    if abs(x) > 1.0:
        raise ValueError("x must lie in [-1, 1]")
    S, U, W = _koornwinder_nodes(idx.alpha, idx.beta, nodes)
    re = 0.5 * (1.0 + x - (1.0 - x) * S)
    im = math.sqrt(max(0.0, 1.0 - x * x)) * np.sqrt(S) * U
    return re, im, W


def koornwinder_ratio(idx, x, nodes=DEFAULT_KOORNWINDER_NODES, imag_tol=1e-10):
    """``J_n(x)/J_n(1)`` from its double-integral representation (alpha > beta).

    The complex integrand is carried as a (real, imaginary) pair; the
    imaginary part must vanish by the symmetry of the angular nodes.
    """
    re, im, W = _koornwinder_base(idx, x, nodes)
    z = (re + 1j * im) ** idx.n
    val = complex(np.sum(W * z))
    if abs(val.imag) > imag_tol:
        raise ArithmeticError(f"imaginary part {val.imag:.3e} exceeds {imag_tol:.1e}")
    return val.real


# ---------------------------------------------------------------------------
# Boltzmann model
# ---------------------------------------------------------------------------


def boltzmann_l0(N):
    """Angular cutoff ``(3N - 9)/2``; the Jacobi route needs ``l < l0``."""
    return (3 * N - 9) / 2.0


def boltzmann_x(N):
    """Evaluation point ``2 eps - 1`` with ``eps = 1/(N-1)^2``."""
    return -1.0 + 2.0 / (N - 1) ** 2


def boltzmann_closed_form(N, n, l):  # noqa: E741
    """Closed forms for n = 0, 1, 2 (exact rationals)."""
    eps = Fraction(1, (N - 1) ** 2)
    sign = Fraction(-1, N - 1) ** l
    if n == 0:
        core = Fraction(1)
    elif n == 1:
        core = eps - (1 - eps) * Fraction(2 * l + 3, 3 * N - 6)
    elif n == 2:
        core = (
            eps**2
            - Fraction(4 * l + 10, 3 * N - 6) * eps * (1 - eps)
            + (1 - eps) ** 2 * Fraction((2 * l + 5) * (2 * l + 3), (3 * N - 6) * (3 * N - 4))
        )
    else:
        raise ValueError("closed forms exist for n <= 2 only")
    return core * sign


def boltzmann_lambda(N, n, l, bound_flag=False, check=True):  # noqa: E741
    """Eigenvalue ``lambda_{n,l}`` of K for momentum-conserving collisions.

    Computed as ``J_n(2 eps - 1)/J_n(1) * (-1/(N-1))^l`` with
    ``alpha = (3N-8)/2``, ``beta = l + 1/2``.  For ``l >= l0`` the value is
    reported as 0 when ``bound_flag`` is set (the high-l regime is tiny and
    outside the Jacobi route), and rejected otherwise.
    """
    if N < 4:
        raise ValueError("the Boltzmann K formulas need N >= 4")
    if l >= boltzmann_l0(N):
        if bound_flag:
            return 0.0
        raise ValueError(f"l={l} is not below l0={boltzmann_l0(N)}")
    idx = JacobiIndex.boltzmann(N, n, l)
    value = jacobi_ratio(idx, boltzmann_x(N)) * (-1.0 / (N - 1)) ** l
    if check and n <= 2:
        exact = float(boltzmann_closed_form(N, n, l))
        if abs(value - exact) > 1e-12:
            raise ArithmeticError(
                f"Jacobi route {value!r} disagrees with closed form {exact!r} at (N,n,l)=({N},{n},{l})"
            )
    return value


def boltzmann_mu_bound(N, n, l, nodes=DEFAULT_KOORNWINDER_NODES):  # noqa: E741
    """Upper bound ``mu_{n,l} >= |lambda_{n,l}|``, decreasing in n.

    ``int |z|^n dm_{alpha,beta} * (1/(N-1))^l`` where z is the Koornwinder
    integrand at the Boltzmann evaluation point.
    """
    if N < 4:
        raise ValueError("the Boltzmann K formulas need N >= 4")
    if l >= boltzmann_l0(N):
        raise ValueError(f"l={l} is not below l0={boltzmann_l0(N)}")
    idx = JacobiIndex.boltzmann(N, n, l)
    re, im, W = _koornwinder_base(idx, boltzmann_x(N), nodes)
    mod = np.sqrt(re * re + im * im)
    return float(np.sum(W * mod**n)) * (1.0 / (N - 1)) ** l


def boltzmann_scan(N, n_max=DEFAULT_N_MAX_SCAN, with_tail=True):
    """All ``lambda_{n,l}`` with ``n + l <= n_max`` and ``l < l0``.

    Returns ``(entries, bounds)``.  ``bounds["tail_bound"]`` caps every
    unscanned eigenvalue with ``l < l0`` using the monotone mu-bounds.
    """
    if N < 4:
        raise ValueError("the Boltzmann K formulas need N >= 4")
    l0 = boltzmann_l0(N)
    entries = []
    for l in range(0, n_max + 1):  # noqa: E741
        if l >= l0:
            break
        for n in range(0, n_max - l + 1):
            entries.append(
                SpectrumEntry(boltzmann_lambda(N, n, l), 2 * l + 1, n, l)
            )
    bounds = {
        "n_max": n_max,
        "l0": l0,
        "l_scanned_max": max(e.l for e in entries),
        "high_l_unscanned": True,
    }
    if with_tail:
        tail = []
        for l in range(0, n_max + 1):  # noqa: E741
            if l >= l0:
                break
            tail.append(boltzmann_mu_bound(N, n_max - l + 1, l))
        if n_max + 1 < l0:
            tail.append((1.0 / (N - 1)) ** (n_max + 1))
        bounds["tail_bound"] = max(tail)
    return entries, bounds


# ---------------------------------------------------------------------------
# Shuffle and SO(N)
# ---------------------------------------------------------------------------


def shuffle_k_matrix(N):
    return (np.ones((N, N)) - np.eye(N)) / (N - 1)


def shuffle_k_spectrum(N):
    if N < 2:
        raise ValueError("N must be at least 2")
    return SpectrumTable(
        "shuffle",
        N,
        [SpectrumEntry(1.0, 1, label="constant"), SpectrumEntry(-1.0 / (N - 1), N - 1, label="sum-zero")],
    )


def gegenbauer(d, lam, x):
    """``C_d^{(lam)}(x)`` by three-term recurrence (lam > 0)."""
    c_prev, c = 1.0, 2.0 * lam * x
    if d == 0:
        return c_prev
    for k in range(2, d + 1):
        c, c_prev = (2.0 * x * (k + lam - 1.0) * c - (k + 2.0 * lam - 2.0) * c_prev) / k, c
    return c


def son_zonal_ratio(N, d):
    """``p_d(0)/p_d(1)`` for the degree-d zonal harmonic on ``S^{N-1}``."""
    if N < 3:
        raise ValueError("need N >= 3")
    if d % 2:
        return 0.0
    lam = (N - 2) / 2.0
    return gegenbauer(d, lam, 0.0) / gegenbauer(d, lam, 1.0)


def harmonic_dimension(N, d):
    """Dimension of degree-d spherical harmonics on ``S^{N-1}``."""
    if d == 0:
        return 1
    if d == 1:
        return N
    return math.comb(N + d - 1, d) - math.comb(N + d - 3, d - 2)


def kac_k_spectrum(N, max_degree):
    entries = [SpectrumEntry(kac_alpha(N, n), 1, n=n) for n in range(max_degree + 1)]
    return SpectrumTable("kac", N, entries, {"max_degree": max_degree})


def son_k_spectrum(N, max_degree):
    entries = [
        SpectrumEntry(son_zonal_ratio(N, d), harmonic_dimension(N, d), n=d)
        for d in range(max_degree + 1)
    ]
    return SpectrumTable("son", N, entries, {"max_degree": max_degree})


def boltzmann_k_spectrum(N, n_max=DEFAULT_N_MAX_SCAN):
    entries, bounds = boltzmann_scan(N, n_max)
    return SpectrumTable("boltzmann", N, entries, bounds)


def k_spectrum(model, max_degree=8):
    if model.variant == "kac":
        return kac_k_spectrum(model.n, max_degree)
    if model.variant == "son":
        return son_k_spectrum(model.n, max_degree)
    if model.variant == "shuffle":
        return shuffle_k_spectrum(model.n)
    return boltzmann_k_spectrum(model.n, max_degree)


# ---------------------------------------------------------------------------
# Extreme eigenvalues
# ---------------------------------------------------------------------------


def k_extremes(model, n_max=DEFAULT_N_MAX_SCAN, details=False):
    """``(kappa_N, beta_N)``: top nontrivial eigenvalue of K and ``|min|/(N-1)``."""
    N = model.n if isinstance(model, ModelSpec) else model[1]
    variant = model.variant if isinstance(model, ModelSpec) else model[0]
    if variant in ("kac", "son"):
        if N < 3:
            raise ValueError("need N >= 3")
        kappa, beta = 3.0 / (N * N - 1), 1.0 / (N - 1) ** 2
        info = {"kappa_label": "n=4", "beta_label": "n=2"}
    elif variant == "shuffle":
        if N < 2:
            raise ValueError("need N >= 2")
        kappa, beta = -1.0 / (N - 1), 1.0 / (N - 1) ** 2
        info = {}
    else:
        entries, bounds = boltzmann_scan(N, n_max, with_tail=details)
        nontrivial = [e for e in entries if (e.n, e.l) != (0, 0)]
        top = max(nontrivial, key=lambda e: e.value)
        bottom = min(entries, key=lambda e: e.value)
        kappa = top.value
        beta = abs(bottom.value) / (N - 1)
        info = dict(bounds, kappa_label=(top.n, top.l), beta_label=(bottom.n, bottom.l))
        info["lambda20_dominates"] = (top.n, top.l) == (2, 0)
    if details:
        return kappa, beta, info
    return kappa, beta


def boltzmann_top_label(N, n_max=DEFAULT_N_MAX_SCAN):
    """Index (n, l) of the largest nontrivial scanned eigenvalue."""
    entries, _ = boltzmann_scan(N, n_max, with_tail=False)
    top = max((e for e in entries if (e.n, e.l) != (0, 0)), key=lambda e: e.value)
    return (top.n, top.l)


def boltzmann_dominance_onset(label=(2, 0), n_lo=4, n_hi=200, n_max=DEFAULT_N_MAX_SCAN):
    """Smallest N such that ``label`` tops the scanned set for every N in [N, n_hi].

    Returns None when ``label`` is not on top at ``n_hi``.  Odd l flips the
    sign of ``(-1/(N-1))^l``, which puts ``lambda_{1,1}`` above
    ``lambda_{2,0}`` at every N tried; both behave like ``5/(3N^2)``.
    """
    onset = None
    for N in range(n_lo, n_hi + 1):
        if boltzmann_top_label(N, n_max) == tuple(label):
            onset = N if onset is None else onset
        else:
            onset = None
    return onset
