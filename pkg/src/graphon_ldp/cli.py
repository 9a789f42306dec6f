"""Command-line entry point: ``graphon-ldp <command> [options]``.

Configuration is layered: built-in defaults, then an optional JSON file given
with ``--config``, then explicit flags.  Every output (file or stdout) starts
with one JSON line of metadata holding the tool version, the resolved config,
the RNG identity and wall-clock information; the payload follows as CSV or as
one line of JSON.

Graphon specs are strings of the form

    constant:P
    rank1:0.3+0.4x          (polynomial in x, or comma-separated coefficients)
    two_block:P11,P12,P22,SPLIT
    file:PATH

or the equivalent JSON objects {"family": ..., ...} inside a config file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import re
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .entropy import reference_constants
from .errors import GraphonError, NoConvergence, NotConverged, NumericalError, ValidationError
from .expansion import ExpansionConfig, finiterank_norm_fixedpoint, rank1_norm_fixedpoint
from .graphon import (GridGraphon, ReferenceGraphon, block_average, cut_norm_distance,
                      l1_distance, l2_distance, load_grid, midpoints, validate_reference)
from .montecarlo import rng_identity, spectral_sample_stats
from .optimizer import OptimizerOptions, psi_curve
from .scaling import REGIMES, scaling_probe
from .spectral import operator_norm

log = logging.getLogger("graphon_ldp")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

COMMON_DEFAULTS = {
    "reference": "constant:0.5",
    "resolution": 64,
    "eta": None,
    "seed": 0,
    "out": None,
    "threads": 1,
    "constraint_tol": 1e-7,
    "kkt_tol": 1e-7,
    "no_clock": False,
}

COMMAND_DEFAULTS = {
    "constants": {},
    "norm": {"tol": 1e-12},
    "psi": {"betas": None, "beta_grid": "0.05:0.95:19", "cold": False},
    "scaling": {"resolution": 128, "regime": "center", "eps": [0.02, 0.01, 0.005],
                "resolutions": None, "warm": False},
    "expand": {"target": None, "rank": None, "order": 0},
    "sample": {"n": 400, "replicates": 50, "format": "csv"},
    "cutnorm": {"other": None},
}

PSI_COLUMNS = ["beta", "psi", "converged", "kkt_residual", "warmstart",
               "beta_achieved", "lagrange_multiplier", "step_l2"]
SCALING_COLUMNS = ["epsilon", "empirical", "theory", "ratio", "minimizer_direction_err",
                   "side", "beta", "psi", "converged", "resolution"]
SAMPLE_COLUMNS = ["index", "derived_seed", "lambda_over_n"]


# ---------------------------------------------------------------- graphon specs

_NUM = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TERM = re.compile(rf"^([+-])?({_NUM})?\*?(x(?:(?:\^|\*\*)(\d+))?)?$")


def parse_polynomial(text) -> list:
    """Coefficients c_0, c_1, ... from "0.3+0.4x-0.1x^2", "0.3,0.4" or a list."""
    if isinstance(text, (list, tuple)):
        return [float(c) for c in text]
    s = str(text).replace(" ", "")
    if "," in s or "x" not in s:
        try:
            return [float(c) for c in s.split(",")]
        except ValueError:
            raise ValidationError(f"cannot parse polynomial {text!r}") from None
    coeffs = {}
    for term in re.split(r"(?<![eE])(?=[+-])", s):
        if not term:
            continue
        m = _TERM.match(term)
        if not m or not (m.group(2) or m.group(3)):
            raise ValidationError(f"cannot parse polynomial term {term!r} in {text!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        c = float(m.group(2)) if m.group(2) else 1.0
        power = 0 if not m.group(3) else int(m.group(4) or 1)
        coeffs[power] = coeffs.get(power, 0.0) + sign * c
    return [coeffs.get(k, 0.0) for k in range(max(coeffs) + 1)]


def parse_spec(spec) -> dict:
    """Normalise a graphon spec string or dict to {"family": ..., params}."""
    if isinstance(spec, dict):
        out = dict(spec)
        if "family" not in out:
            raise ValidationError(f"graphon spec {spec!r} lacks a 'family'")
    else:
        family, _, arg = str(spec).partition(":")
        if family == "constant":
            out = {"family": family, "p": arg}
        elif family == "rank1":
            out = {"family": family, "nu": arg}
        elif family == "two_block":
            parts = arg.split(",")
            if len(parts) != 4:
                raise ValidationError("two_block needs p11,p12,p22,split")
            out = dict(zip(("family", "p11", "p12", "p22", "split"), [family] + parts))
        elif family == "file":
            out = {"family": family, "path": arg}
        else:
            raise ValidationError(f"unknown graphon family {family!r}")
    fam = out["family"]
    try:
        if fam == "constant":
            out["p"] = float(out["p"])
        elif fam == "rank1":
            out["nu"] = parse_polynomial(out["nu"])
        elif fam == "two_block":
            for k in ("p11", "p12", "p22", "split"):
                out[k] = float(out[k])
            if not 0.0 < out["split"] < 1.0:
                raise ValidationError("two_block split must lie in (0, 1)")
        elif fam == "file":
            out["path"] = str(out["path"])
        else:
            raise ValidationError(f"unknown graphon family {fam!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"bad parameters for {fam!r} graphon: {exc}") from None
    return out


def build_values(spec: dict, n: int) -> np.ndarray:
    fam = spec["family"]
    x = midpoints(n)
    if fam == "constant":
        return np.full((n, n), spec["p"])
    if fam == "rank1":
        nu = np.polynomial.polynomial.polyval(x, spec["nu"])
        return np.outer(nu, nu)
    if fam == "two_block":
        low = x < spec["split"]
        return np.where(np.outer(low, low), spec["p11"],
                        np.where(np.outer(~low, ~low), spec["p22"], spec["p12"]))
    grid = load_grid(spec["path"])
    if grid.resolution == n:
        return grid.values
    return block_average(grid, n).values


def build_reference(spec: dict, n: int, eta=None) -> ReferenceGraphon:
    if spec["family"] == "rank1":
        nu = np.polynomial.polynomial.polyval(midpoints(n), spec["nu"])
        return ReferenceGraphon.from_nu(nu, eta)
    return validate_reference(GridGraphon(build_values(spec, n)), eta)


def file_resolution(spec: dict, default: int) -> int:
    return load_grid(spec["path"]).resolution if spec["family"] == "file" else default


# ---------------------------------------------------------------- config

def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(t) for t in text]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _ints(text) -> list:
    return [int(t) for t in _floats(text)]


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(COMMON_DEFAULTS)
    cfg.update(COMMAND_DEFAULTS[args.command])
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ValidationError("config file must hold a JSON object")
        known = set(COMMON_DEFAULTS).union(*COMMAND_DEFAULTS.values())
        unknown = set(file_cfg) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        # one config file may serve several commands; keep only this command's keys
        cfg.update({k: v for k, v in file_cfg.items() if k in cfg})
    cfg.update(flags)
    cfg["command"] = args.command
    cfg["reference"] = parse_spec(cfg["reference"])
    if "resolution" not in flags and "resolution" not in file_cfg:
        cfg["resolution"] = file_resolution(cfg["reference"], cfg["resolution"])
    cfg["resolution"] = int(cfg["resolution"])
    if cfg["resolution"] < 1:
        raise ValidationError("resolution must be positive")
    for key in ("target", "other"):
        if cfg.get(key) is not None:
            cfg[key] = parse_spec(cfg[key])
    if args.command == "psi":
        cfg["betas"] = _floats(cfg["betas"]) if cfg["betas"] is not None else None
    if args.command == "scaling":
        cfg["eps"] = _floats(cfg["eps"])
        if cfg["resolutions"] is not None:
            cfg["resolutions"] = _ints(cfg["resolutions"])
        if cfg["regime"] not in REGIMES:
            raise ValidationError(f"regime must be one of {REGIMES}")
    return cfg


def optimizer_options(cfg) -> OptimizerOptions:
    return OptimizerOptions(constraint_tol=float(cfg["constraint_tol"]),
                            kkt_tol=float(cfg["kkt_tol"]), seed=int(cfg["seed"]))


def beta_grid(cfg) -> list:
    if cfg["betas"] is not None:
        return cfg["betas"]
    try:
        lo, hi, num = str(cfg["beta_grid"]).split(":")
        return [float(b) for b in np.linspace(float(lo), float(hi), int(num))]
    except ValueError:
        raise ValidationError(f"beta_grid must be 'start:stop:count', got {cfg['beta_grid']!r}") from None


# ---------------------------------------------------------------- output

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def metadata(cfg, started: float, elapsed: float, summary=None) -> dict:
    meta = {"tool": "graphon_ldp", "version": __version__, "command": cfg["command"],
            "config": {k: v for k, v in cfg.items() if k != "command"}, "rng": rng_identity()}
    if not cfg["no_clock"]:
        meta["wall_clock"] = {
            "started": datetime.fromtimestamp(started, timezone.utc).isoformat(timespec="seconds"),
            "elapsed_s": round(elapsed, 3)}
    if summary:
        meta["summary"] = summary
    return meta


def write_output(cfg, meta: dict, payload=None, columns=None, rows=None) -> None:
    buf = io.StringIO()
    buf.write(json.dumps(jsonable(meta), sort_keys=True) + "\n")
    if rows is not None:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])
    else:
        buf.write(json.dumps(jsonable(payload), sort_keys=True) + "\n")
    if cfg["out"]:
        with open(cfg["out"], "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())


# ---------------------------------------------------------------- commands

def cmd_constants(cfg):
    r = build_reference(cfg["reference"], cfg["resolution"], cfg["eta"])
    consts = reference_constants(r)
    payload = {"structure": r.structure, "resolution": r.resolution, "eta": r.eta,
               "constants": consts.to_dict()}
    return EXIT_OK, {"payload": payload}


def cmd_norm(cfg):
    r = build_reference(cfg["reference"], cfg["resolution"], cfg["eta"])
    res = operator_norm(r.grid, tol=float(cfg["tol"]))
    payload = {"norm": res.norm, "iterations": res.iterations, "residual": res.residual,
               "resolution": r.resolution}
    return EXIT_OK, {"payload": payload}


def cmd_psi(cfg):
    r = build_reference(cfg["reference"], cfg["resolution"], cfg["eta"])
    betas = beta_grid(cfg)
    for b in betas:
        if not 0.0 <= b <= 1.0:
            raise ValidationError(f"beta = {b} lies outside [0, 1]")
    rows = psi_curve(r, betas, optimizer_options(cfg), warm_start=not cfg["cold"],
                     workers=int(cfg["threads"]))
    out = []
    for row in rows:
        res = row.result
        out.append({"beta": row.beta, "psi": row.psi, "converged": row.converged,
                    "kkt_residual": row.kkt_residual, "warmstart": row.warmstart,
                    "beta_achieved": res.beta_achieved if res else math.nan,
                    "lagrange_multiplier": res.lagrange_multiplier if res else math.nan,
                    "step_l2": row.step_l2})
    code = EXIT_NUMERICAL if out and not any(r["converged"] for r in out) else EXIT_OK
    return code, {"columns": PSI_COLUMNS, "rows": out,
                  "summary": {"C_r": operator_norm(r.grid).norm}}


def cmd_scaling(cfg):
    r = build_reference(cfg["reference"], cfg["resolution"], cfg["eta"])
    report = scaling_probe(r, cfg["regime"], cfg["eps"], optimizer_options(cfg),
                           resolutions=cfg["resolutions"], warm=bool(cfg["warm"]))
    rows = [vars(row) for row in report.rows]
    code = EXIT_NUMERICAL if rows and not any(r["converged"] for r in rows) else EXIT_OK
    return code, {"columns": SCALING_COLUMNS, "rows": rows,
                  "summary": {"regime": report.regime, "extrapolated": report.extrapolated}}


def _expansion_base(r: ReferenceGraphon, rank):
    """Rank-k truncation of the reference: (thetas, nus) from its top eigenpairs."""
    n = r.resolution
    w, vecs = np.linalg.eigh(r.values / n)
    order = np.argsort(w)[::-1][:rank]
    thetas = w[order]
    nus = vecs[:, order].T * math.sqrt(n)
    nus *= np.where(nus.sum(axis=1) < 0, -1.0, 1.0)[:, None]
    return thetas, nus


def cmd_expand(cfg):
    r = build_reference(cfg["reference"], cfg["resolution"], cfg["eta"])
    if cfg["target"] is None:
        raise ValidationError("expand needs a target graphon (--target)")
    h = build_values(cfg["target"], r.resolution)
    GridGraphon(h)
    excfg = ExpansionConfig(truncation_order=int(cfg["order"]))
    rank = cfg["rank"]
    if rank is None:
        rank = 1 if r.structure == "rank1" else 2
    rank = int(rank)
    if rank == 1 and r.structure == "rank1":
        res = rank1_norm_fixedpoint(h, r.nu, excfg)
    else:
        thetas, nus = _expansion_base(r, rank)
        if rank > 1 and not thetas[0] > thetas[1]:
            raise ValidationError("leading eigenvalue of the reference is not simple")
        res = finiterank_norm_fixedpoint(h, thetas, nus, excfg)
    direct = operator_norm(h).norm
    payload = {"mu": res.mu, "n_terms": res.n_terms, "sweeps": res.sweeps,
               "residual": res.residual, "tail_ratio": res.tail_ratio,
               "diagnostics": res.diagnostics, "rank": rank, "power_iteration_norm": direct,
               "abs_difference": abs(res.mu - direct)}
    return EXIT_OK, {"payload": payload}


def cmd_sample(cfg):
    r = build_reference(cfg["reference"], cfg["resolution"], cfg["eta"])
    stats = spectral_sample_stats(r, int(cfg["n"]), int(cfg["replicates"]), int(cfg["seed"]),
                                  workers=int(cfg["threads"]))
    summary = {"mean": stats.mean, "stddev": stats.stddev, "quantiles": stats.quantiles}
    if cfg["format"] == "json":
        return EXIT_OK, {"payload": stats.to_dict()}
    rows = [{"index": i, "derived_seed": s, "lambda_over_n": v}
            for i, (s, v) in enumerate(zip(stats.seeds, stats.values))]
    return EXIT_OK, {"columns": SAMPLE_COLUMNS, "rows": rows, "summary": summary}


def cmd_cutnorm(cfg):
    if cfg["other"] is None:
        raise ValidationError("cutnorm needs a second graphon (--other)")
    n = cfg["resolution"]
    a = GridGraphon(build_values(cfg["reference"], n))
    b = GridGraphon(build_values(cfg["other"], n))
    payload = {"cut": cut_norm_distance(a, b), "l1": l1_distance(a, b), "l2": l2_distance(a, b),
               "resolution": n}
    return EXIT_OK, {"payload": payload}


COMMANDS = {"constants": cmd_constants, "norm": cmd_norm, "psi": cmd_psi, "scaling": cmd_scaling,
            "expand": cmd_expand, "sample": cmd_sample, "cutnorm": cmd_cutnorm}


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON config file; flags override its entries")
    common.add_argument("--reference", help="graphon spec, e.g. constant:0.5 or rank1:0.3+0.4x")
    common.add_argument("--resolution", type=int, help="grid resolution N")
    common.add_argument("--eta", type=float, help="required bound eta <= r <= 1 - eta")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--threads", type=int, help="worker cap")
    common.add_argument("--constraint-tol", dest="constraint_tol", type=float)
    common.add_argument("--kkt-tol", dest="kkt_tol", type=float)
    common.add_argument("--no-clock", dest="no_clock", action="store_const", const=True,
                        help="omit wall-clock metadata so reruns are byte-identical")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="graphon-ldp",
                                description="Rate function of the maximal eigenvalue of "
                                            "inhomogeneous random graphs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    opt = {"argument_default": argparse.SUPPRESS}
    sub.add_parser("constants", parents=[common], **opt, help="reference constants as JSON")
    s = sub.add_parser("norm", parents=[common], **opt, help="operator norm of the reference")
    s.add_argument("--tol", type=float)
    s = sub.add_parser("psi", parents=[common], **opt, help="psi_r on a beta grid (CSV)")
    s.add_argument("--betas", help="comma-separated betas")
    s.add_argument("--beta-grid", dest="beta_grid", help="start:stop:count")
    s.add_argument("--cold", action="store_const", const=True,
                   help="independent cold starts (parallel with --threads)")
    s = sub.add_parser("scaling", parents=[common], **opt, help="scaling-law probe (CSV)")
    s.add_argument("--regime", choices=REGIMES)
    s.add_argument("--eps", help="comma-separated epsilons")
    s.add_argument("--resolutions", help="comma-separated resolutions dividing N")
    s.add_argument("--warm", action="store_const", const=True)
    s = sub.add_parser("expand", parents=[common], **opt, help="series-expansion norm of a target")
    s.add_argument("--target", help="graphon spec of h")
    s.add_argument("--rank", type=int, help="rank of the expansion base")
    s.add_argument("--order", type=int, help="truncation order (0 = automatic)")
    s = sub.add_parser("sample", parents=[common], **opt, help="Monte Carlo lambda_N / N")
    s.add_argument("--n", type=int, help="vertices")
    s.add_argument("--replicates", type=int)
    s.add_argument("--format", choices=("csv", "json"))
    s = sub.add_parser("cutnorm", parents=[common], **opt, help="cut, l1 and l2 distances")
    s.add_argument("--other", help="graphon spec of the second graphon")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2),
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.time()
    try:
        cfg = resolve_config(args)
        code, out = COMMANDS[args.command](cfg)
    except (ValidationError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, NoConvergence, NotConverged) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GraphonError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    meta = metadata(cfg, started, time.time() - started, out.get("summary"))
    write_output(cfg, meta, out.get("payload"), out.get("columns"), out.get("rows"))
    return code


if __name__ == "__main__":
    sys.exit(main())
