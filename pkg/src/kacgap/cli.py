"""Command-line front end: ``kacgap {spectrum,gap,verify,simulate,table}``.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime invariant
breach, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, exact_verifier, gap_engine, k_spectra, walk_simulator
from .collision_models import AngularDensity, InvariantError, ModelSpec, ScatteringWeight

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_VERIFY = 0, 2, 3, 4

# Every numeric option has a default here; config files override these and flags override both.
DEFAULTS = {
    "model": "kac",
    "n": "3",
    "n_max": 8,
    "rho": "uniform",
    "b": "uniform",
    "p": 0.5,
    "max_degree": 8,
    "k_max": None,
    "grid": 4096,
    "tol": 1e-9,
    "seed": None,
    "traj": 20000,
    "times": "0:4.5:31",
    "out": None,
    "workers": None,
    "suite": None,
    "observable": None,
    "delta_base": None,
}
INT_KEYS = {"n_max", "max_degree", "k_max", "grid", "seed", "traj", "workers"}
FLOAT_KEYS = {"p", "tol", "delta_base"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    parser = _Parser(prog="kacgap", description="Spectral gaps of Kac-type collision walks.")
    parser.add_argument("--version", action="version", version=f"kacgap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="file of `key = value` lines, or a JSON artifact to replay")
        p.add_argument("--model", choices=["kac", "boltzmann", "shuffle", "son"])
        p.add_argument("--n", help="N, or a range lo:hi")
        p.add_argument("--n-max", dest="n_max", help="Boltzmann scan bound on n + l (default 8)")
        p.add_argument("--rho", help="`uniform` or moments such as `a2=0.5,a4=-0.1`")
        p.add_argument("--b", help="`uniform` or comma-separated values on [-1, 1]")
        p.add_argument("--p", help="shuffle success probability (default 0.5)")
        p.add_argument("--max-degree", dest="max_degree", help="degree cutoff for spectra (default 8)")
        p.add_argument("--k-max", dest="k_max", help="cosine-moment cutoff (default: exact for series)")
        p.add_argument("--grid", help="density grid resolution (default 4096)")
        p.add_argument("--tol", help="audit tolerance (default 1e-9)")
        p.add_argument("--seed")
        p.add_argument("--traj", help="trajectory count (default 20000)")
        p.add_argument("--times", help="start:stop:count or comma list (default 0:4.5:31)")
        p.add_argument("--out", help="output path; JSON unless it ends in .csv")
        p.add_argument("--workers", help=f"worker processes (default ${walk_simulator.WORKERS_ENV} or 1)")
        return p

    common(sub.add_parser("spectrum", help="K-operator spectrum table"))
    g = common(sub.add_parser("gap", help="gap bounds and exact values"))
    g.add_argument("--delta-base", dest="delta_base", help="Boltzmann gap at N=3 (default 1)")
    v = common(sub.add_parser("verify", help="run a verification suite"))
    v.add_argument("--suite", required=True)
    s = common(sub.add_parser("simulate", help="Monte Carlo walk and gap fit"))
    s.add_argument("--observable")
    t = sub.add_parser("table", help="pretty-print a JSON artifact")
    t.add_argument("path")
    return parser


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def read_config_file(path):
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        cfg = dict(doc.get("config", doc))
        cfg.pop("out", None)
        return {k: v for k, v in cfg.items() if k in DEFAULTS}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected `key = value`")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key, value):
    if value is None or value == "None":
        return None
    try:
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid value for {key}: {value!r}") from exc
    return str(value)


def effective_config(args):
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config_file(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    cfg["command"] = args.command
    if cfg["workers"] is None:
        cfg["workers"] = walk_simulator.default_workers()
    return cfg


def parse_n(text):
    if ":" in text:
        lo, hi = text.split(":", 1)
        lo, hi = int(lo), int(hi)
        if lo > hi:
            raise UsageError("empty N range")
        return list(range(lo, hi + 1))
    return [int(text)]


def parse_times(text):
    if text.count(":") == 2:
        a, b, c = text.split(":")
        return np.linspace(float(a), float(b), int(c))
    return np.array([float(x) for x in text.split(",")])


def model_from_config(cfg, n=None):
    n = parse_n(cfg["n"])[-1] if n is None else n
    try:
        rho = AngularDensity.parse(cfg["rho"], cfg["grid"]) if cfg["model"] in ("kac", "son") else None
        b = None
        if cfg["model"] == "boltzmann" and cfg["b"] != "uniform":
            b = ScatteringWeight(np.array([float(x) for x in cfg["b"].split(",")])).validate()
        p = cfg["p"] if cfg["model"] == "shuffle" else None
        return ModelSpec(cfg["model"], n, rho=rho, b=b, p=p, allow_boundary_p=True)
    except (InvariantError, ValueError) as exc:
        # a bad density or parameter is a configuration problem, not a runtime breach
        raise UsageError(f"invalid model: {exc}") from exc


def _envelope(cfg):
    # the output path is not echoed: replaying an artifact must not overwrite it
    return {"version": __version__, "config": {k: v for k, v in cfg.items() if k != "out"}}


def _emit(cfg, text):
    if cfg["out"]:
        Path(cfg["out"]).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _config_comment(cfg):
    return "config: " + json.dumps(_envelope(cfg), sort_keys=True)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_spectrum(cfg):
    model = model_from_config(cfg)
    degree = cfg["n_max"] if model.variant == "boltzmann" else cfg["max_degree"]
    table = k_spectra.k_spectrum(model, degree)
    extra = _envelope(cfg)
    if model.variant != "shuffle" and model.n >= 3:
        kappa, beta = k_spectra.k_extremes(model, n_max=cfg["n_max"])
        extra.update({"kappa": kappa, "beta": beta})
    _emit(cfg, table.to_json(extra))
    return EXIT_OK


def cmd_gap(cfg):
    ns = parse_n(cfg["n"])
    model = model_from_config(cfg, ns[-1])
    reps = gap_engine.model_gap_reports(model, ns[-1], cfg["k_max"], cfg["delta_base"], cfg["n_max"])
    reps = [r for r in reps if r.N in ns]
    if not reps:
        raise UsageError(f"no reports for N in {cfg['n']} (model {model.variant})")
    if cfg["out"] and cfg["out"].endswith(".csv"):
        _emit(cfg, gap_engine.reports_to_csv(reps, _config_comment(cfg)))
        return EXIT_OK
    doc = _envelope(cfg)
    if model.variant in ("kac", "son"):
        doc["theorem71"] = gap_engine.theorem71_check(model.rho, cfg["k_max"]).as_dict()
        doc["sector_note"] = "full-sector bracket; theorem71 refers to the symmetric sector"
    doc["reports"] = [r.as_dict() for r in reps]
    _emit(cfg, json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_verify(cfg):
    name = cfg["suite"]
    if name not in exact_verifier.SUITES:
        raise UsageError(f"unknown suite {name!r}; choose from {sorted(exact_verifier.SUITES)}")
    checks, seconds = exact_verifier.run_suite(name)
    ok = all(c.passed for c in checks)
    doc = _envelope(cfg)
    doc.update({"suite": name, "seconds": seconds, "passed": ok, "checks": [c.as_dict() for c in checks]})
    _emit(cfg, json.dumps(doc, indent=2))
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_simulate(cfg):
    if cfg["seed"] is None:
        raise UsageError("simulate requires --seed")
    model = model_from_config(cfg)
    times = parse_times(cfg["times"])
    obs = cfg["observable"] or walk_simulator.DEFAULT_OBSERVABLES[model.variant][0]
    ens = walk_simulator.run_walk(model, times, cfg["traj"], cfg["seed"], (obs,),
                                  workers=cfg["workers"], tol=cfg["tol"])
    fit = walk_simulator.estimate_gap(ens, obs)
    summary = dict(_envelope(cfg), **fit, audit=ens.audit)
    if model.variant in ("kac", "son"):
        summary["target_rate"] = gap_engine.kac_gap_exact(model.rho, model.n).delta_upper
    elif model.variant == "shuffle":
        summary["target_rate"] = 2.0 * model.p * model.n / (model.n - 1)
    text = json.dumps(summary, indent=2)
    if cfg["out"]:
        out = Path(cfg["out"])
        csv_path = out if out.suffix == ".csv" else out.with_suffix(".csv")
        csv_path.write_text(ens.to_csv(_config_comment(cfg)), encoding="utf-8")
        csv_path.with_suffix(".json").write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")
    return EXIT_OK


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return "" if x is None else str(x)


def render_table(doc):
    lines = []
    if "version" in doc:
        lines.append(f"kacgap {doc['version']}  command={doc.get('config', {}).get('command')}")
    if "entries" in doc:
        lines.append(f"model={doc['model']} N={doc['N']}")
        lines.append(f"{'n':>4} {'l':>4} {'value':>22} {'mult':>8}")
        for e in doc["entries"]:
            lines.append(f"{_fmt(e['n']):>4} {_fmt(e['l']):>4} {_fmt(e['value']):>22} {_fmt(e['multiplicity']):>8}")
    elif "reports" in doc:
        cols = gap_engine.CSV_FIELDS
        lines.append(" ".join(f"{c:>14}" for c in cols))
        for r in doc["reports"]:
            lines.append(" ".join(f"{_fmt(r[c]):>14}" for c in cols))
    elif "checks" in doc:
        for c in doc["checks"]:
            mark = "PASS" if c["pass"] else "FAIL"
            lines.append(f"{mark} {c['check_id']:<36} {_fmt(c['computed']):>18} vs {_fmt(c['expected']):<18}"
                         f" tol {_fmt(c['tolerance'])}")
    else:
        for k, v in doc.items():
            if k not in ("config", "version"):
                lines.append(f"{k}: {_fmt(v) if not isinstance(v, (dict, list)) else json.dumps(v)}")
    return "\n".join(lines) + "\n"


def cmd_table(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    sys.stdout.write(render_table(doc))
    return EXIT_OK


COMMANDS = {"spectrum": cmd_spectrum, "gap": cmd_gap, "verify": cmd_verify, "simulate": cmd_simulate}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "table":
            return cmd_table(args.path)
        cfg = effective_config(args)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"kacgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantError as exc:
        print(f"kacgap: invariant breach: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"kacgap: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
