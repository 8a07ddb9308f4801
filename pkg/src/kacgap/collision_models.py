"""Collision mechanisms for the four Kac-type walks.

State spaces, single-collision update maps, and the angular / scattering
densities that parameterize them.  Everything here is a pure function of its
inputs; randomness comes in only through explicitly passed uniforms.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
import yaml

# Default tolerances; callers override per call through ``tol=``.
TOLERANCES = {
    "state": 1e-10,  # WalkState invariants
    "conservation": 1e-13,  # per-collision energy / momentum drift
    "audit": 1e-9,  # simulator audits over long runs
    "unit": 1e-12,  # |omega| = 1 check
    "density_floor": -1e-12,  # rho >= this on the grid
    "normalization": 1e-10,  # scattering weight normalization
}

MODEL_VARIANTS = ("kac", "boltzmann", "shuffle", "son")


class InvariantError(ValueError):
    """A state or density violates one of its structural invariants."""


# ---------------------------------------------------------------------------
# Angular density on the circle
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AngularDensity:
    """Even probability density on (-pi, pi].

    Series form: ``rho(theta) = 1/(2 pi) + sum_k a_k cos(k theta)`` with
    ``cosine_coefficients = (a_1, ..., a_M)``.  Grid form: ``grid_values``
    holds rho at ``theta_m = -pi + 2 pi m / R`` (``R = grid_resolution``) and
    moments are taken with the trapezoid rule.
    """

    cosine_coefficients: tuple = ()
    grid_resolution: int = 4096
    grid_values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "cosine_coefficients", tuple(float(a) for a in self.cosine_coefficients)
        )
        if self.grid_resolution < 8:
            raise ValueError("grid_resolution must be at least 8")
        if self.grid_values is not None:
            values = np.asarray(self.grid_values, dtype=float)
            if values.ndim != 1 or values.size < 8:
                raise ValueError("grid_values must be a 1-d array with at least 8 points")
            object.__setattr__(self, "grid_values", values)
            object.__setattr__(self, "grid_resolution", values.size)

    # -- constructors ------------------------------------------------------

    @classmethod
    def uniform(cls, grid_resolution=4096):
        return cls((), grid_resolution)

    @classmethod
    def from_moments(cls, moments, grid_resolution=4096):
        """Build from cosine moments ``{k: int rho cos(k theta)}``, k >= 1."""
        if not moments:
            return cls.uniform(grid_resolution)
        top = max(moments)
        coeffs = [0.0] * top
        for k, c in moments.items():
            if k < 1:
                raise ValueError("moments are indexed by k >= 1")
            coeffs[k - 1] = c / math.pi
        return cls(tuple(coeffs), grid_resolution)

    @classmethod
    def from_grid(cls, values):
        values = np.asarray(values, dtype=float)
        return cls((), values.size, values)

    @classmethod
    def parse(cls, text, grid_resolution=4096):
        """Parse ``uniform`` or a compact moment string such as ``a2=0.5,a4=-0.1``.

        ``ak=c`` sets the cosine moment: ``int rho(theta) cos(k theta) dtheta = c``.
        """
        text = text.strip()
        if text.lower() in ("", "uniform"):
            return cls.uniform(grid_resolution)
        if text.startswith("rho:") or text.startswith("{"):
            return cls.from_record(text)
        moments = {}
        for part in text.split(","):
            m = re.fullmatch(r"\s*a(\d+)\s*=\s*([-+0-9.eE]+)\s*", part)
            if not m:
                raise ValueError(f"cannot parse density term {part!r}")
            moments[int(m.group(1))] = float(m.group(2))
        rho = cls.from_moments(moments, grid_resolution)
        rho.validate()
        return rho

    # -- serialization -----------------------------------------------------

    def to_record(self):
        if self.grid_values is not None:
            body = {"values": [float(v) for v in self.grid_values], "grid": self.grid_resolution}
        else:
            body = {"a_k": list(self.cosine_coefficients), "grid": self.grid_resolution}
        return "rho: " + yaml.safe_dump(body, default_flow_style=True, width=10**9).strip()

    @classmethod
    def from_record(cls, text):
        data = yaml.safe_load(text)
        if isinstance(data, dict) and "rho" in data:
            data = data["rho"]
        if "values" in data:
            return cls.from_grid(data["values"])
        return cls(tuple(data.get("a_k", ())), int(data.get("grid", 4096)))

    # -- evaluation --------------------------------------------------------

    @property
    def is_series(self):
        return self.grid_values is None

    @property
    def degree(self):
        """Highest cosine index M for series form; None for grid form."""
        return len(self.cosine_coefficients) if self.is_series else None

    def grid(self):
        r = self.grid_resolution
        return -np.pi + 2.0 * np.pi * np.arange(r) / r

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.grid_values is not None:
            period = np.append(self.grid_values, self.grid_values[0])
            nodes = np.append(self.grid(), np.pi)
            wrapped = np.mod(theta + np.pi, 2.0 * np.pi) - np.pi
            return np.interp(wrapped, nodes, period)
        out = np.full(theta.shape, 1.0 / (2.0 * np.pi))
        for k, a in enumerate(self.cosine_coefficients, start=1):
            out = out + a * np.cos(k * theta)
        return out

    def validate(self, tol=None):
        floor = TOLERANCES["density_floor"] if tol is None else -tol
        values = self(self.grid()) if self.grid_values is None else self.grid_values
        if np.min(values) < floor:
            raise InvariantError(f"density is negative on the grid (min {np.min(values):.3e})")
        if float(self(0.0)) <= 0.0:
            raise InvariantError("density must be strictly positive at theta = 0")
        if self.grid_values is not None:
            mass = 2.0 * np.pi * np.mean(self.grid_values)
            if abs(mass - 1.0) > 1e-10:
                raise InvariantError(f"grid density integrates to {mass}, not 1")
        return self

    def moment(self, k):
        return density_cosine_moment(self, k)

    def trig_moment(self, p, q):
        """``int cos^p(theta) sin^q(theta) rho(theta) dtheta``.

        Exact for series form: the trapezoid rule integrates trigonometric
        polynomials of degree below the node count exactly.
        """
        if self.grid_values is not None:
            th = self.grid()
            return 2.0 * np.pi * float(np.mean(np.cos(th) ** p * np.sin(th) ** q * self.grid_values))
        m = 2 * (p + q + len(self.cosine_coefficients)) + 8
        th = -np.pi + 2.0 * np.pi * np.arange(m) / m
        return 2.0 * np.pi * float(np.mean(np.cos(th) ** p * np.sin(th) ** q * self(th)))

    def cdf_table(self):
        """Nodes theta_m on [-pi, pi] and the CDF there (used by sample_angle)."""
        r = self.grid_resolution
        nodes = -np.pi + 2.0 * np.pi * np.arange(r + 1) / r
        if self.grid_values is None:
            cdf = (nodes + np.pi) / (2.0 * np.pi)
            for k, a in enumerate(self.cosine_coefficients, start=1):
                cdf = cdf + a * np.sin(k * nodes) / k
        else:
            vals = np.append(self.grid_values, self.grid_values[0])
            h = 2.0 * np.pi / r
            cdf = np.concatenate(([0.0], np.cumsum(0.5 * h * (vals[1:] + vals[:-1]))))
            cdf = cdf / cdf[-1]
        cdf[0], cdf[-1] = 0.0, 1.0
        return nodes, np.maximum.accumulate(cdf)


def density_cosine_moment(rho, k):
    """Return ``int_{-pi}^{pi} rho(theta) cos(k theta) dtheta``.

    Exact for series-form densities: 1 at k=0, ``pi a_k`` for 1 <= k <= M and
    0 beyond.  Grid densities use the trapezoid rule.
    """
    k = abs(int(k))
    if k == 0:
        return 1.0
    if rho.grid_values is not None:
        th = rho.grid()
        return 2.0 * np.pi * float(np.mean(rho.grid_values * np.cos(k * th)))
    if k <= len(rho.cosine_coefficients):
        return math.pi * rho.cosine_coefficients[k - 1]
    return 0.0


def sample_angle(rho, u, _table=None):
    """Inverse-CDF sample of rho; ``u`` may be a scalar or an array in [0, 1]."""
    if np.min(rho.grid_values if rho.grid_values is not None else rho(rho.grid())) < TOLERANCES[
        "density_floor"
    ]:
        raise InvariantError("cannot sample from a density with negative grid values")
    nodes, cdf = _table if _table is not None else rho.cdf_table()
    return np.interp(u, cdf, nodes)


class AngleSampler:
    """Precomputed inverse-CDF table for repeated sampling from one density."""

    def __init__(self, rho):
        rho.validate()
        self.rho = rho
        self.table = rho.cdf_table()

    def __call__(self, u):
        return sample_angle(self.rho, u, self.table)


# ---------------------------------------------------------------------------
# Scattering weight b on [-1, 1]
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScatteringWeight:
    """Weight ``b(cos chi)`` on equally spaced nodes of [-1, 1], or uniform ``1/(4 pi)``."""

    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.values is not None:
            v = np.asarray(self.values, dtype=float)
            if v.ndim != 1 or v.size < 2:
                raise ValueError("scattering weight needs at least two grid values")
            object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls):
        return cls(None)

    @property
    def is_uniform(self):
        return self.values is None

    def nodes(self):
        return np.linspace(-1.0, 1.0, self.values.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.values is None:
            return np.full(x.shape, 1.0 / (4.0 * np.pi))
        return np.interp(x, self.nodes(), self.values)

    def normalization(self):
        """``2 pi int_0^pi b(cos chi) sin chi dchi = 2 pi int_{-1}^{1} b(x) dx``."""
        if self.values is None:
            return 1.0
        return 2.0 * np.pi * float(np.trapezoid(self.values, self.nodes()))

    def validate(self, tol=None):
        tol = TOLERANCES["normalization"] if tol is None else tol
        if self.values is not None and np.min(self.values) < 0:
            raise InvariantError("scattering weight must be non-negative")
        if abs(self.normalization() - 1.0) > tol:
            raise InvariantError(f"scattering weight normalization is {self.normalization()}")
        return self

    def cosine_sampler(self, resolution=4096):
        """Inverse CDF of the law of ``cos chi`` induced by b (density 2 pi b(x) on [-1, 1])."""
        if self.values is None:
            return lambda u: 2.0 * np.asarray(u) - 1.0
        x = np.linspace(-1.0, 1.0, resolution + 1)
        dens = self(x)
        cdf = np.concatenate(([0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(x))))
        cdf /= cdf[-1]
        return lambda u: np.interp(u, cdf, x)

    def to_record(self):
        if self.values is None:
            return "b: uniform"
        body = {"grid": [float(v) for v in self.values]}
        return "b: " + yaml.safe_dump(body, default_flow_style=True, width=10**9).strip()

    @classmethod
    def from_record(cls, text):
        data = yaml.safe_load(text)
        if isinstance(data, dict) and "b" in data:
            data = data["b"]
        if data in (None, "uniform"):
            return cls.uniform()
        return cls(np.asarray(data["grid"], dtype=float))


# ---------------------------------------------------------------------------
# Model specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """One of the four walks: ``kac``, ``boltzmann``, ``shuffle`` or ``son``."""

    variant: str
    n: int
    rho: AngularDensity | None = None
    b: ScatteringWeight | None = None
    p: float | None = None
    allow_boundary_p: bool = False

    def __post_init__(self):
        if self.variant not in MODEL_VARIANTS:
            raise ValueError(f"unknown model {self.variant!r}; expected one of {MODEL_VARIANTS}")
        if self.n < 2:
            raise ValueError("N must be at least 2")
        if self.variant == "boltzmann" and self.n < 3:
            raise ValueError("the Boltzmann model needs N >= 3")
        if self.variant in ("kac", "son") and self.rho is None:
            object.__setattr__(self, "rho", AngularDensity.uniform())
        if self.variant == "boltzmann" and self.b is None:
            object.__setattr__(self, "b", ScatteringWeight.uniform())
        if self.variant == "shuffle":
            if self.p is None:
                raise ValueError("the shuffle model needs a success probability p")
            lo_ok = self.p > 0
            hi_ok = self.p < 1 or (self.allow_boundary_p and self.p <= 1)
            if not (lo_ok and hi_ok):
                raise ValueError("p must lie strictly inside (0, 1)")

    def describe(self):
        out = {"model": self.variant, "N": self.n}
        if self.rho is not None:
            out["rho"] = self.rho.to_record()
        if self.b is not None:
            out["b"] = self.b.to_record()
        if self.p is not None:
            out["p"] = self.p
        return out


# ---------------------------------------------------------------------------
# State invariants
# ---------------------------------------------------------------------------


def check_sphere(v, tol=None):
    tol = TOLERANCES["state"] if tol is None else tol
    drift = abs(float(np.dot(v, v)) - 1.0)
    if drift > tol:
        raise InvariantError(f"energy drift {drift:.3e} exceeds {tol:.1e}")


def check_momentum(v, tol=None):
    """``v`` has shape (N, 3); total energy 1 and total momentum 0."""
    tol = TOLERANCES["state"] if tol is None else tol
    energy = abs(float(np.sum(v * v)) - 1.0)
    momentum = float(np.max(np.abs(np.sum(v, axis=0))))
    if energy > tol or momentum > tol:
        raise InvariantError(f"energy drift {energy:.3e}, momentum {momentum:.3e} exceed {tol:.1e}")


def check_permutation(sigma):
    sigma = np.asarray(sigma)
    if sorted(sigma.tolist()) != list(range(sigma.size)):
        raise InvariantError("state is not a permutation")


def check_orthogonal(g, tol=None):
    tol = TOLERANCES["state"] if tol is None else tol
    err = float(np.max(np.abs(g.T @ g - np.eye(g.shape[0]))))
    if err > tol:
        raise InvariantError(f"matrix is not orthogonal (max |G^T G - I| = {err:.3e})")


def parity(sigma):
    """0 for even permutations, 1 for odd ones."""
    sigma = list(sigma)
    seen = [False] * len(sigma)
    swaps = 0
    for start in range(len(sigma)):
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = sigma[k]
            length += 1
        if length:
            swaps += length - 1
    return swaps % 2


# ---------------------------------------------------------------------------
# Single-collision maps
# ---------------------------------------------------------------------------


def _check_pair(n, i, j):
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"pair ({i}, {j}) out of range for N={n}")
    if i == j:
        raise ValueError("a collision needs two distinct indices")


def rotate_pair(v, i, j, theta):
    """Rotate coordinates ``(v_i, v_j)`` by angle theta (0-based indices).

    ``(v_i, v_j) -> (v_i cos + v_j sin, -v_i sin + v_j cos)``; other entries
    are copied unchanged.
    """
    v = np.asarray(v, dtype=float)
    _check_pair(v.shape[0], i, j)
    c, s = math.cos(theta), math.sin(theta)
    out = v.copy()
    out[i] = v[i] * c + v[j] * s
    out[j] = -v[i] * s + v[j] * c
    return out


def boltzmann_collide(vi, vj, omega, tol=None):
    """Momentum- and energy-conserving collision of two 3-velocities.

    ``vi* = vi + (omega.(vj - vi)) omega`` and ``vj* = vj - (omega.(vj - vi)) omega``.
    """
    tol = TOLERANCES["unit"] if tol is None else tol
    vi = np.asarray(vi, dtype=float)
    vj = np.asarray(vj, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if abs(float(np.linalg.norm(omega)) - 1.0) > tol:
        raise InvariantError("omega must be a unit vector")
    t = float(np.dot(omega, vj - vi))
    return vi + t * omega, vj - t * omega


def shuffle_step(sigma, i, j, success):
    """Return ``sigma_{ij} o sigma`` on success, else ``sigma``.

    ``sigma[k]`` is the image of k (0-based), so composing with the pair
    transposition on the left swaps the values i and j.
    """
    sigma = np.asarray(sigma)
    _check_pair(sigma.size, i, j)
    if not success:
        return sigma.copy()
    out = sigma.copy()
    out[sigma == i] = j
    out[sigma == j] = i
    return out


def rotation_matrix(n, i, j, theta):
    r = np.eye(n)
    c, s = math.cos(theta), math.sin(theta)
    r[i, i] = c
    r[i, j] = s
    r[j, i] = -s
    r[j, j] = c
    return r


def son_left_rotate(g, i, j, theta, tol=None):
    """Return ``R_ij(theta) G``: rows i and j mix, every column moves like ``rotate_pair``."""
    g = np.asarray(g, dtype=float)
    check_orthogonal(g, tol)
    _check_pair(g.shape[0], i, j)
    c, s = math.cos(theta), math.sin(theta)
    out = g.copy()
    out[i] = g[i] * c + g[j] * s
    out[j] = -g[i] * s + g[j] * c
    return out
