"""Monte Carlo simulation of the four walks in continuous time.

Collisions arrive by a Poisson clock of rate N, so the state at time t is
distributed as ``exp(t N (Q - I))`` applied to the initial law.  Each
trajectory owns a generator derived from ``(seed, trajectory index)`` and
draws everything it needs up front; the updates then run in lockstep over
all trajectories with masks.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .collision_models import TOLERANCES, AngleSampler, InvariantError, ModelSpec, parity
from .exact_verifier import boltzmann_marginal_exact, sphere_moment

WORKERS_ENV = "KACGAP_WORKERS"
FIT_CUTOFF = 0.05
DEFAULT_AUDIT_EVERY = 1000


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def trajectory_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


# ---------------------------------------------------------------------------
# States
# ---------------------------------------------------------------------------


def stationary_state(spec, rng):
    """One draw from the invariant law of the walk."""
    N = spec.n
    if spec.variant == "kac":
        x = rng.normal(size=N)
        return x / np.linalg.norm(x)
    if spec.variant == "boltzmann":
        x = rng.normal(size=(N, 3))
        x -= x.mean(axis=0)
        return x / math.sqrt(np.sum(x * x))
    if spec.variant == "shuffle":
        return rng.permutation(N)
    x = rng.normal(size=(N, N))
    q, r = np.linalg.qr(x)
    q = q * np.sign(np.diag(r))  # Haar on O(N)
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def deterministic_state(spec):
    """A fixed, far-from-equilibrium valid state."""
    N = spec.n
    if spec.variant == "kac":
        v = np.zeros(N)
        v[0] = 1.0
        return v
    if spec.variant == "boltzmann":
        v = np.zeros((N, 3))
        v[0, 0], v[1, 0] = math.sqrt(0.5), -math.sqrt(0.5)
        return v
    if spec.variant == "shuffle":
        return np.arange(N)
    return np.eye(N)


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


def _sphere_vectors(spec, X):
    return X[:, :, 0] if spec.variant == "son" else X


def observable(spec, name):
    """Built-in observables evaluated on a batch of states.

    ``quartic``: ``sum_j v_j^4 - 3/(N+2)`` (sphere walk; first column for SO(N)).
    ``coord1_pow{k}``: ``v_1^k`` (sphere), ``|pi_1|^k`` (Boltzmann, k even),
    ``sigma(1)^k`` (shuffle), ``G_11^k`` (SO(N)).
    ``h1`` / ``h_diff``: ``h(sigma(1))`` and ``h(sigma(1)) - h(sigma(2))`` with
    ``h(k) = k - (N-1)/2``.  ``fixed_points``: number of fixed points.
    """
    N = spec.n
    if name == "quartic":
        if spec.variant not in ("kac", "son"):
            raise ValueError("the quartic observable needs a sphere-valued walk")
        return lambda X: np.sum(_sphere_vectors(spec, X) ** 4, axis=1) - 3.0 / (N + 2)
    if name.startswith("coord1_pow"):
        k = int(name[len("coord1_pow"):])
        if spec.variant in ("kac", "son"):
            return lambda X: _sphere_vectors(spec, X)[:, 0] ** k
        if spec.variant == "boltzmann":
            if k % 2:
                raise ValueError("Boltzmann radial powers must be even")
            scale = N / (N - 1.0)
            return lambda X: (scale * np.sum(X[:, 0, :] ** 2, axis=1)) ** (k // 2)
        return lambda X: X[:, 0].astype(float) ** k
    if spec.variant == "shuffle":
        shift = (N - 1) / 2.0
        if name == "h1":
            return lambda X: X[:, 0] - shift
        if name == "h_diff":
            return lambda X: (X[:, 0] - X[:, 1]).astype(float)
        if name == "fixed_points":
            return lambda X: np.sum(X == np.arange(N), axis=1).astype(float)
    raise ValueError(f"unknown observable {name!r} for model {spec.variant!r}")


def exact_mean(spec, name):
    """Stationary mean of a built-in observable."""
    N = spec.n
    if name in ("quartic", "h1", "h_diff"):
        return 0.0
    if name == "fixed_points":
        return 1.0
    k = int(name[len("coord1_pow"):])
    if spec.variant in ("kac", "son"):
        return sphere_moment(N, [k])
    if spec.variant == "boltzmann":
        return boltzmann_marginal_exact(N, k // 2)
    return float(np.mean(np.arange(N, dtype=float) ** k))


DEFAULT_OBSERVABLES = {"kac": ("quartic",), "son": ("quartic",), "boltzmann": ("coord1_pow2",),
                       "shuffle": ("h_diff",)}


# ---------------------------------------------------------------------------
# Ensemble
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryEnsemble:
    spec: ModelSpec
    seed: int
    times: np.ndarray
    samples: dict
    n_events: np.ndarray
    audit: dict = field(default_factory=dict)

    @property
    def trajectories(self):
        return int(self.n_events.size)

    def to_csv(self, header_comment=None):
        buf = io.StringIO()
        if header_comment:
            buf.write(f"# {header_comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["trajectory", "t", "observable_name", "value"])
        for name, arr in self.samples.items():
            for k in range(arr.shape[0]):
                for m, t in enumerate(self.times):
                    w.writerow([k, repr(float(t)), name, repr(float(arr[k, m]))])
        return buf.getvalue()


@dataclass
class _Draws:
    state: np.ndarray
    counts: np.ndarray
    i: np.ndarray
    j: np.ndarray
    u: np.ndarray


def _draw_trajectory(spec, rng, dts, initial):
    state = stationary_state(spec, rng) if initial is None else np.array(initial, copy=True)
    counts = rng.poisson(spec.n * dts)
    E = int(counts.sum())
    i = rng.integers(spec.n, size=E)
    j = rng.integers(spec.n - 1, size=E)
    j = j + (j >= i)
    width = 2 if spec.variant == "boltzmann" else 1
    u = rng.random((E, width))
    return _Draws(state, counts, np.minimum(i, j), np.maximum(i, j), u)


def _pad(arrs, width, fill=0):
    shape = (len(arrs), width) + arrs[0].shape[1:]
    out = np.full(shape, fill, dtype=arrs[0].dtype)
    for k, a in enumerate(arrs):
        out[k, : a.shape[0]] = a
    return out


def _apply_events(spec, X, rows, i, j, u, samplers, successes):
    if spec.variant in ("kac", "son"):
        theta = samplers["theta"](u[:, 0])
        c, s = np.cos(theta), np.sin(theta)
        if spec.variant == "kac":
            vi, vj = X[rows, i], X[rows, j]
            X[rows, i] = vi * c + vj * s
            X[rows, j] = -vi * s + vj * c
        else:
            gi, gj = X[rows, i, :], X[rows, j, :]
            X[rows, i, :] = gi * c[:, None] + gj * s[:, None]
            X[rows, j, :] = -gi * s[:, None] + gj * c[:, None]
    elif spec.variant == "boltzmann":
        vi, vj = X[rows, i, :], X[rows, j, :]
        rel = vi - vj
        norm = np.linalg.norm(rel, axis=1)
        safe = norm > 0
        n = np.where(safe[:, None], rel / np.where(safe, norm, 1.0)[:, None], np.array([0.0, 0.0, 1.0]))
        # orthonormal frame around n
        helper = np.where((np.abs(n[:, 0]) < 0.9)[:, None], np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))
        e1 = np.cross(n, helper)
        e1 /= np.linalg.norm(e1, axis=1)[:, None]
        e2 = np.cross(n, e1)
        cchi = np.clip(samplers["cos"](u[:, 0]), -1.0, 1.0)
        schi = np.sqrt(1.0 - cchi * cchi)
        phi = 2.0 * np.pi * u[:, 1]
        omega = cchi[:, None] * n + (schi * np.cos(phi))[:, None] * e1 + (schi * np.sin(phi))[:, None] * e2
        t = np.sum(omega * (vj - vi), axis=1)[:, None]
        X[rows, i, :] = vi + t * omega
        X[rows, j, :] = vj - t * omega
    else:
        ok = u[:, 0] < spec.p
        rows, i, j = rows[ok], i[ok], j[ok]
        successes[rows] += 1
        sub = X[rows]
        at_i = sub == i[:, None]
        at_j = sub == j[:, None]
        sub[at_i] = np.broadcast_to(j[:, None], sub.shape)[at_i]
        sub[at_j] = np.broadcast_to(i[:, None], sub.shape)[at_j]
        X[rows] = sub


def _audit(spec, X, tol):
    if spec.variant == "kac":
        dev = float(np.max(np.abs(np.sum(X * X, axis=1) - 1.0)))
        return {"energy": dev}
    if spec.variant == "boltzmann":
        e = float(np.max(np.abs(np.sum(X * X, axis=(1, 2)) - 1.0)))
        m = float(np.max(np.abs(np.sum(X, axis=1))))
        return {"energy": e, "momentum": m}
    if spec.variant == "son":
        gtg = np.einsum("tki,tkj->tij", X, X)
        return {"orthogonality": float(np.max(np.abs(gtg - np.eye(spec.n))))}
    ok = np.all(np.sort(X, axis=1) == np.arange(spec.n), axis=1)
    return {"bijection": float(np.sum(~ok))}


def _merge_audit(acc, new):
    for k, v in new.items():
        acc[k] = max(acc.get(k, 0.0), v)


def _simulate_chunk(spec, times, indices, seed, observables, initial, audit_every, tol):
    times = np.asarray(times, dtype=float)
    dts = np.diff(np.concatenate(([0.0], times)))
    draws = [_draw_trajectory(spec, trajectory_rng(seed, k), dts, initial) for k in indices]
    T = len(draws)
    X = np.stack([d.state for d in draws])
    counts = np.stack([d.counts for d in draws])
    width = max(1, max(d.i.size for d in draws))
    I = _pad([d.i for d in draws], width)
    J = _pad([d.j for d in draws], width)
    U = _pad([d.u for d in draws], width)
    samplers = {}
    if spec.variant in ("kac", "son"):
        samplers["theta"] = AngleSampler(spec.rho)
    if spec.variant == "boltzmann":
        spec.b.validate()
        samplers["cos"] = spec.b.cosine_sampler()
    funcs = {name: observable(spec, name) for name in observables}
    out = {name: np.empty((T, times.size)) for name in observables}
    successes = np.zeros(T, dtype=np.int64)
    parity0 = np.array([parity(x) for x in X]) if spec.variant == "shuffle" else None
    audit = {}
    _merge_audit(audit, _audit(spec, X, tol))
    start = np.zeros(T, dtype=np.int64)
    steps = 0
    for m in range(times.size):
        kmax = int(counts[:, m].max())
        for k in range(kmax):
            rows = np.nonzero(k < counts[:, m])[0]
            e = start[rows] + k
            _apply_events(spec, X, rows, I[rows, e], J[rows, e], U[rows, e], samplers, successes)
            steps += 1
            if steps % audit_every == 0:
                _merge_audit(audit, _audit(spec, X, tol))
        start += counts[:, m]
        _merge_audit(audit, _audit(spec, X, tol))
        for name, f in funcs.items():
            out[name][:, m] = f(X)
    if parity0 is not None:
        parity1 = np.array([parity(x) for x in X])
        audit["parity_mismatches"] = float(np.sum(parity1 != (parity0 ^ (successes % 2))))
    return out, counts.sum(axis=1), audit, X


def _check_audit(audit, tol):
    for k, v in audit.items():
        limit = 0.0 if k in ("bijection", "parity_mismatches") else tol
        if v > limit:
            raise InvariantError(f"audit {k} = {v:.3e} exceeds {limit:.1e}")


def run_walk(spec, times, trajectories, seed, observables=None, initial=None,
             audit_every=DEFAULT_AUDIT_EVERY, workers=None, tol=None, return_states=False):
    """Simulate ``trajectories`` independent copies and sample observables at ``times``.

    ``initial=None`` starts each trajectory from the stationary law;
    otherwise every trajectory starts from the given state.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be non-negative and strictly increasing")
    if trajectories < 1:
        raise ValueError("need at least one trajectory")
    tol = TOLERANCES["audit"] if tol is None else tol
    observables = tuple(observables or DEFAULT_OBSERVABLES[spec.variant])
    workers = default_workers() if workers is None else max(1, int(workers))
    chunks = np.array_split(np.arange(trajectories), min(workers, trajectories))
    args = [(spec, times, c, seed, observables, initial, audit_every, tol) for c in chunks]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_simulate_chunk, *zip(*args)))
    else:
        parts = [_simulate_chunk(*a) for a in args]
    samples = {name: np.concatenate([p[0][name] for p in parts]) for name in observables}
    n_events = np.concatenate([p[1] for p in parts])
    audit = {}
    for p in parts:
        _merge_audit(audit, p[2])
    _check_audit(audit, tol)
    ens = TrajectoryEnsemble(spec, int(seed), times, samples, n_events, audit)
    if return_states:
        return ens, np.concatenate([p[3] for p in parts])
    return ens


# ---------------------------------------------------------------------------
# Gap estimation
# ---------------------------------------------------------------------------


def autocovariance(ensemble, name):
    """``C(t_m) = mean_k g_k(t_m) g_k(t_0)`` with exactly rounded sums (order independent)."""
    g = ensemble.samples[name]
    prod = g * g[:, :1]
    n = g.shape[0]
    mean = np.array([math.fsum(prod[:, m]) / n for m in range(g.shape[1])])
    var = np.array([math.fsum((prod[:, m] - mean[m]) ** 2) / (n - 1) for m in range(g.shape[1])])
    return mean, var / n


def _wls_rate(t, C, varC):
    keep = C > 0
    t, C, varC = t[keep], C[keep], varC[keep]
    if t.size < 2:
        raise ValueError("fewer than two positive covariance points in the window")
    w = C * C / np.maximum(varC, 1e-300)
    A = np.stack([np.ones_like(t), t], axis=1)
    coef = np.linalg.solve(A.T @ (A * w[:, None]), A.T @ (w * np.log(C)))
    return -float(coef[1])


def _window(C):
    if C[0] <= 0:
        raise ValueError("non-positive variance at lag zero; fit refused")
    below = np.nonzero(C / C[0] < FIT_CUTOFF)[0]
    end = int(below[0]) if below.size else C.size
    if end < 2:
        raise ValueError("covariance drops below the cutoff before the second sample")
    return end


def estimate_gap(ensemble, name=None, batches=20):
    """Exponential decay rate of the stationary autocovariance of an observable.

    Weighted least squares on ``log C(t)`` from ``t_0`` up to the first time
    ``C/C(0) < 0.05``.  The standard error comes from refitting on
    ``batches`` disjoint groups of trajectories.
    """
    name = name or next(iter(ensemble.samples))
    g = ensemble.samples[name]
    scale = math.fsum(np.abs(g[:, 0])) / g.shape[0]
    C, varC = autocovariance(ensemble, name)
    if C[0] <= 1e-24 * max(scale * scale, 1e-300) or C[0] <= 0:
        raise ValueError("observable has (numerically) zero variance; fit refused")
    end = _window(C)
    t = ensemble.times - ensemble.times[0]
    rate = _wls_rate(t[:end], C[:end], varC[:end])
    rates = []
    for idx in np.array_split(np.arange(g.shape[0]), batches):
        sub = g[idx]
        prod = sub * sub[:, :1]
        Cb = prod[:, :end].mean(axis=0)
        vb = prod[:, :end].var(axis=0, ddof=1) / max(len(idx), 2)
        try:
            rates.append(_wls_rate(t[:end], Cb, vb))
        except ValueError:
            continue
    stderr = float(np.std(rates, ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else math.nan
    return {
        "rate": rate,
        "stderr": stderr,
        "window": [float(ensemble.times[0]), float(ensemble.times[end - 1])],
        "n_events": int(ensemble.n_events.sum()),
        "observable": name,
    }


# ---------------------------------------------------------------------------
# Stationary moments
# ---------------------------------------------------------------------------


def nominal_gap(spec):
    """Gap used to size burn-in: exact where known, 1/2 for Boltzmann."""
    N = spec.n
    if spec.variant in ("kac", "son"):
        from .gap_engine import kac_gap_exact

        r = kac_gap_exact(spec.rho, N)
        return r.delta_exact if r.delta_exact is not None else r.delta_lower
    if spec.variant == "shuffle":
        return 2.0 * spec.p * N / (N - 1)
    return 0.5


@dataclass
class MomentCheck:
    order: int
    mean: float
    stderr: float
    exact: float

    @property
    def passed(self):
        return abs(self.mean - self.exact) <= 3.0 * self.stderr


def stationary_moment_check(spec, trajectories, seed, orders=(2, 4, 6), burn_in=None, workers=None):
    """Run from a deterministic state past burn-in and compare moments of ``pi_1``."""
    horizon = 10.0 / nominal_gap(spec)
    if burn_in is None:
        burn_in = horizon
    if burn_in < horizon:
        raise ValueError(f"burn-in {burn_in} is shorter than the horizon {horizon}")
    names = [f"coord1_pow{k}" for k in orders]
    ens = run_walk(spec, [burn_in], trajectories, seed, names, initial=deterministic_state(spec),
                   workers=workers)
    rows = []
    for k, name in zip(orders, names):
        x = ens.samples[name][:, 0]
        rows.append(MomentCheck(k, float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)),
                                exact_mean(spec, name)))
    return {
        "burn_in": burn_in,
        "trajectories": trajectories,
        "moments": rows,
        "passed": all(r.passed for r in rows),
        "audit": ens.audit,
    }


def summary_json(fit, extra=None):
    doc = dict(fit)
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2)
