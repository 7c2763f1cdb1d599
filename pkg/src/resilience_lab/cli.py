"""``resilience-lab``: batch runs over the attrition, resilience, targeting,
attacker and intervention models.

Every subcommand reads an optional JSON scenario file (``--config``) and
applies command-line overrides on top (flags win). Results go to ``--out``
or stdout as CSV (default) or JSON, with numbers printed at a fixed
precision so that repeated runs are byte-identical.

Scenario file layout (all sections optional)::

    {
      "distribution": {"kind": "uniform", "lower": 0, "upper": 1},
      "dynamics":  {"H": 0.2, "H_grid": {"start": 0, "stop": 0.5, "step": 0.01},
                    "alpha": 1, "lambda": 0, "tol": 1e-10, "max_iter": 1000000,
                    "alpha_grid": [...], "lambda_grid": [...], "auc_range": [0, 0.25]},
      "targeting": {"H": 0.05, "epsilon": 1e-6, "max_steps": 1000000},
      "attacker":  {"c": 1.1, "delta": 0.9, "H_max": 1, "p_grid": 1001, "h_grid": 501,
                    "tol": 1e-8, "max_iter": 100000, "monotone": false,
                    "eps_grid": [0, 0.05, 0.1], "metric": "sup"},
      "transport": {"n": 100, "p_norm": 1, "budget": 0.1},
      "sample":    {"n": 1000},
      "output":    {"path": "out.csv", "format": "csv", "precision": 12},
      "seed": 0, "threads": 4
    }

A distribution may also be given in shorthand: ``uniform:0,1``,
``exponential:1``, ``empirical:1,2,3``, ``piecewise:0/0,1/0.5,2/1``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical
non-convergence.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import attacker, attrition, resilience, targeting, transport
from .distributions import (
    EmpiricalAtoms,
    ThresholdDistribution,
    UniformInterval,
    UnsupportedKindError,
    cdf_sup_distance,
    from_spec,
)

log = logging.getLogger("resilience_lab")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NONCONVERGENCE = 4

THREADS_ENV = "RESILIENCE_LAB_THREADS"

DEFAULT_H_GRID = {"start": 0.0, "stop": 0.5, "step": 0.01}
DEFAULT_ALPHA_GRID = {"start": 0.0, "stop": 1.0, "step": 0.1}
DEFAULT_LAMBDA_GRID = {"start": 0.0, "stop": 3.0, "step": 0.25}
DEFAULT_EPS_GRID = [0.0, 0.01, 0.02, 0.05, 0.1]


class ConfigError(Exception):
    """Invalid or inconsistent scenario configuration."""


class NonConvergence(Exception):
    """Raised after output is written when a solver hit its iteration cap."""


# ---------------------------------------------------------------------------
# config handling

def parse_distribution(spec) -> ThresholdDistribution:
    """Distribution from a JSON object or a ``kind:params`` shorthand string."""
    if isinstance(spec, str):
        kind, _, rest = spec.partition(":")
        kind = kind.strip().lower()
        try:
            if kind == "piecewise":
                pairs = [item.split("/") for item in rest.split(",") if item]
                spec = {"kind": kind, "x": [float(a) for a, _ in pairs],
                        "F": [float(b) for _, b in pairs]}
            else:
                nums = [float(v) for v in rest.split(",") if v.strip()]
                if kind == "uniform":
                    if len(nums) != 2:
                        raise ConfigError("uniform shorthand is uniform:lower,upper")
                    spec = {"kind": kind, "lower": nums[0], "upper": nums[1]}
                elif kind == "exponential":
                    if len(nums) != 1:
                        raise ConfigError("exponential shorthand is exponential:rate")
                    spec = {"kind": kind, "rate": nums[0]}
                elif kind == "empirical":
                    spec = {"kind": kind, "values": nums}
                else:
                    raise ConfigError(f"unknown distribution kind {kind!r}")
        except ValueError as exc:
            raise ConfigError(f"bad distribution shorthand {spec!r}: {exc}") from exc
    try:
        return from_spec(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_grid(spec, name: str) -> np.ndarray:
    """A grid given as a list of values or as ``{start, stop, step|num}``."""
    if isinstance(spec, dict):
        try:
            start, stop = float(spec["start"]), float(spec["stop"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: range needs numeric start and stop") from exc
        if "num" in spec:
            num = int(spec["num"])
        elif "step" in spec:
            step = float(spec["step"])
            if not step > 0.0 or stop < start:
                raise ConfigError(f"{name}: need step > 0 and stop >= start")
            num = int(round((stop - start) / step)) + 1
        else:
            raise ConfigError(f"{name}: range needs step or num")
        if num < 1:
            raise ConfigError(f"{name}: empty grid")
        return np.linspace(start, stop, num)
    if isinstance(spec, (list, tuple)):
        try:
            arr = np.asarray(spec, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: grid values must be numbers") from exc
        if arr.ndim != 1 or arr.size == 0:
            raise ConfigError(f"{name}: empty grid")
        return arr
    raise ConfigError(f"{name}: expected a list or a {{start, stop, step}} object")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError:
        raise  # exit code 3
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _section(cfg: dict, key: str) -> dict:
    sec = cfg.setdefault(key, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"'{key}' must be an object")
    return sec


def merge_flags(cfg: dict, args: argparse.Namespace) -> dict:
    """Apply command-line overrides on top of the file config."""
    cfg = copy.deepcopy(cfg)
    out = _section(cfg, "output")
    if args.out is not None:
        out["path"] = args.out
    if args.format is not None:
        out["format"] = args.format
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.dist is not None:
        cfg["distribution"] = args.dist

    dyn = _section(cfg, "dynamics")
    for flag, key in (("H", "H"), ("alpha", "alpha"), ("lam", "lambda"), ("tol", "tol")):
        val = getattr(args, flag, None)
        if val is not None:
            dyn[key] = val
    if getattr(args, "H_grid", None) is not None:
        dyn["H_grid"] = args.H_grid

    att = _section(cfg, "attacker")
    for flag in ("c", "delta", "H_max", "p_grid", "h_grid"):
        val = getattr(args, flag, None)
        if val is not None:
            att[flag] = val
    if getattr(args, "monotone", False):
        att["monotone"] = True
    if getattr(args, "eps_grid", None) is not None:
        att["eps_grid"] = args.eps_grid

    tr = _section(cfg, "transport")
    for flag, key in (("n", "n"), ("p_norm", "p_norm"), ("budget", "budget"),
                      ("target", "R_target")):
        val = getattr(args, flag, None)
        if val is not None:
            tr[key] = val
    if getattr(args, "sample", None) is not None:
        _section(cfg, "sample")["n"] = args.sample
    return cfg


def resolve_threads(cfg: dict) -> int:
    raw = cfg.get("threads")
    if raw is None:
        raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"threads must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("threads must be at least 1")
    return n


def _float(sec: dict, key: str, default: float) -> float:
    val = sec.get(key, default)
    try:
        return float(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be a number, got {val!r}") from exc


def _distribution(cfg) -> ThresholdDistribution:
    spec = cfg.get("distribution")
    return UniformInterval(0.0, 1.0) if spec is None else parse_distribution(spec)


def _attacker_config(cfg) -> attacker.AttackerConfig:
    sec = dict(cfg.get("attacker", {}))
    for extra in ("eps_grid", "metric"):
        sec.pop(extra, None)
    try:
        return attacker.AttackerConfig(**sec)
    except TypeError as exc:
        raise ConfigError(f"attacker: {exc}") from exc


# ---------------------------------------------------------------------------
# output

def fmt(x, precision: int = 12) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    s = f"{x:.{precision}g}"
    return "0" if s == "-0" else s


def _json_value(x, precision):
    if isinstance(x, dict):
        return {k: _json_value(v, precision) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_json_value(v, precision) for v in x]
    if isinstance(x, (bool, np.bool_)) or x is None or isinstance(x, str):
        return bool(x) if isinstance(x, np.bool_) else x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return float(f"{x:.{precision}g}")


def render_csv(header, rows, precision=12) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        if len(row) != len(header):
            raise AssertionError("row width does not match header")
        buf.write(",".join(fmt(v, precision) for v in row) + "\n")
    return buf.getvalue()


def render_json(obj, precision=12) -> str:
    return json.dumps(_json_value(obj, precision), indent=2, sort_keys=False) + "\n"


def table(header, rows, fmt_name, precision):
    """Render a table as CSV, or as a JSON list of records."""
    rows = list(rows)
    if fmt_name == "json":
        return render_json([dict(zip(header, r)) for r in rows], precision)
    return render_csv(header, rows, precision)


def emit(text: str, cfg: dict) -> None:
    path = cfg.get("output", {}).get("path")
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# subcommands; each returns the rendered text and raises NonConvergence
# through ``status`` when appropriate

def _fmt_opts(cfg):
    out = cfg.get("output", {})
    name = out.get("format", "csv")
    if name not in ("csv", "json"):
        raise ConfigError(f"output format must be csv or json, got {name!r}")
    prec = out.get("precision", 12)
    if not isinstance(prec, int) or not 1 <= prec <= 17:
        raise ConfigError("output precision must be an integer in [1, 17]")
    return name, prec


def _dyn_params(dyn):
    alpha = _float(dyn, "alpha", 1.0)
    lam = _float(dyn, "lambda", 0.0)
    tol = _float(dyn, "tol", 1e-10)
    return alpha, lam, tol


def cmd_sweep(cfg):
    F = _distribution(cfg)
    dyn = cfg.get("dynamics", {})
    Hs = parse_grid(dyn.get("H_grid", DEFAULT_H_GRID), "H_grid")
    alpha, lam, tol = _dyn_params(dyn)
    try:
        curve = attrition.sweep_pinf(F, Hs, alpha, lam, tol, workers=resolve_threads(cfg))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fmt_name, prec = _fmt_opts(cfg)
    return table(["H", "p_inf"], curve, fmt_name, prec), False


def cmd_surface(cfg):
    F = _distribution(cfg)
    dyn = cfg.get("dynamics", {})
    alphas = parse_grid(dyn.get("alpha_grid", DEFAULT_ALPHA_GRID), "alpha_grid")
    lams = parse_grid(dyn.get("lambda_grid", DEFAULT_LAMBDA_GRID), "lambda_grid")
    if np.any((alphas < 0) | (alphas > 1)) or np.any(lams < 0):
        raise ConfigError("alpha values must lie in [0, 1] and lambda values be >= 0")
    cells = [(float(a), float(l)) for a in alphas for l in lams]

    def one(cell):
        return resilience.resilience_combined(F, *cell).value

    workers = resolve_threads(cfg)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(one, cells))
    else:
        vals = [one(c) for c in cells]
    fmt_name, prec = _fmt_opts(cfg)
    rows = [(a, l, v) for (a, l), v in zip(cells, vals)]
    return table(["alpha", "lambda", "resilience"], rows, fmt_name, prec), False


def cmd_resilience(cfg):
    F = _distribution(cfg)
    dyn = cfg.get("dynamics", {})
    alpha, lam, tol = _dyn_params(dyn)
    try:
        report = resilience.resilience_combined(F, alpha, lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "auc_range" in dyn:
        rng = dyn["auc_range"]
        if not (isinstance(rng, (list, tuple)) and len(rng) == 2):
            raise ConfigError("auc_range must be [H_min, H_max]")
        try:
            report = resilience.with_auc(report, F, float(rng[0]), float(rng[1]),
                                         int(dyn.get("auc_grid", 1001)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    out = report.to_dict()
    if not report.infinite and report.value > 10 * tol:
        cf = resilience.critical_fraction(F, alpha, lam, tol)
        out["critical_fraction"] = cf.departed
        out["remaining_fraction"] = cf.remaining
    try:
        out["closed_form"] = resilience.closed_form_resilience(F, alpha, lam)
    except (UnsupportedKindError, ValueError):
        pass
    fmt_name, prec = _fmt_opts(cfg)
    if fmt_name == "json":
        return render_json(out, prec), False
    if "auc_range" in out:
        lo, hi = out.pop("auc_range")
        out["auc_min"], out["auc_max"] = lo, hi
    keys = list(out)
    return render_csv(keys, [[out[k] for k in keys]], prec), False


def cmd_simulate(cfg):
    F = _distribution(cfg)
    dyn = cfg.get("dynamics", {})
    alpha, lam, tol = _dyn_params(dyn)
    H = dyn.get("H", 0.2)
    try:
        params = attrition.DynamicsParams(H=H if isinstance(H, list) else float(H), alpha=alpha,
                                          lam=lam, tol=tol,
                                          max_iter=int(dyn.get("max_iter", 1_000_000)))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    traj = attrition.simulate(F, params)
    fmt_name, prec = _fmt_opts(cfg)
    text = table(["t", "p"], enumerate(traj.points.tolist()), fmt_name, prec)
    return text, not traj.converged


def cmd_target(cfg):
    F = _distribution(cfg)
    sec = cfg.get("targeting", {})
    H = _float(sec, "H", _float(cfg.get("dynamics", {}), "H", 0.05))
    try:
        trace = targeting.targeted_unravel(F, H, _float(sec, "epsilon", 1e-6),
                                           int(sec.get("max_steps", 1_000_000)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fmt_name, prec = _fmt_opts(cfg)
    text = table(["t", "theta", "removed_mass", "cumulative"], trace.rows(), fmt_name, prec)
    return text, not trace.reached


def cmd_attack(cfg):
    F = _distribution(cfg)
    try:
        conf = _attacker_config(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sol = attacker.value_iteration(F, conf)
    fmt_name, prec = _fmt_opts(cfg)
    return table(["p", "V", "pi_star"], sol.rows(), fmt_name, prec), not sol.converged


def _metric(name):
    if name in (None, "sup"):
        return cdf_sup_distance
    if name == "wasserstein1":
        return lambda a, b: transport.wasserstein_continuous(a, b, 1.0)
    raise ConfigError(f"unknown VOI metric {name!r} (use 'sup' or 'wasserstein1')")


def cmd_voi(cfg):
    F = _distribution(cfg)
    sec = cfg.get("attacker", {})
    eps = parse_grid(sec.get("eps_grid", DEFAULT_EPS_GRID), "eps_grid")
    if np.any(eps < 0):
        raise ConfigError("eps_grid values must be nonnegative")
    metric = _metric(sec.get("metric"))
    try:
        conf = _attacker_config(cfg)
        curve = attacker.voi_curve(
            F, eps, conf,
            perturbation=lambda d, e: attacker.scale_perturbation(d, e, metric))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fmt_name, prec = _fmt_opts(cfg)
    return table(["eps", "regret"], curve, fmt_name, prec), False


def cmd_intervene(cfg):
    F = _distribution(cfg)
    sec = cfg.get("transport", {})
    p_norm = _float(sec, "p_norm", 1.0)
    try:
        if isinstance(F, EmpiricalAtoms):
            qv = transport.QuantileVector(F.values)
        else:
            qv = transport.discretize(F, int(sec.get("n", 100)))
        if "R_target" in sec and "budget" in sec:
            raise ConfigError("transport: give either budget or R_target, not both")
        if "R_target" in sec:
            plan = transport.min_cost_to_reach(qv, _float(sec, "R_target", 0.0), p_norm)
        else:
            plan = transport.max_resilience_under_budget(qv, _float(sec, "budget", 0.0), p_norm)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    fmt_name, prec = _fmt_opts(cfg)
    if fmt_name == "json":
        return render_json(plan.to_dict(), prec), False
    rows = zip(range(1, qv.n + 1), plan.original.atoms, plan.modified.atoms)
    return render_csv(["rank", "original", "modified"], rows, prec), False


def cmd_dist(cfg):
    F = _distribution(cfg)
    fmt_name, prec = _fmt_opts(cfg)
    sample = cfg.get("sample", {})
    if sample.get("n") is not None:
        n = int(sample["n"])
        if n < 1:
            raise ConfigError("sample size must be at least 1")
        vals = F.sample(n, int(cfg.get("seed", 0)))
        return table(["i", "value"], enumerate(vals.tolist()), fmt_name, prec), False
    us = np.linspace(0.0, 1.0, 21)[1:-1]
    qs = np.asarray(F.quantile(us))
    try:
        dens = np.asarray(F.density(qs))
    except UnsupportedKindError:
        dens = np.full(qs.shape, np.nan)
    rows = zip(us, qs, np.asarray(F.cdf(qs)), dens)
    return table(["u", "quantile", "cdf", "density"], rows, fmt_name, prec), False


COMMANDS = {
    "sweep": (cmd_sweep, "p_inf(H) curve over a harassment grid"),
    "surface": (cmd_surface, "resilience over an (alpha, lambda) grid"),
    "resilience": (cmd_resilience, "resilience report for one scenario"),
    "simulate": (cmd_simulate, "departed-fraction trajectory"),
    "target": (cmd_target, "targeted-harassment recursion"),
    "attack": (cmd_attack, "attacker value function and policy"),
    "voi": (cmd_voi, "attacker regret against inaccurate threshold estimates"),
    "intervene": (cmd_intervene, "threshold intervention plan"),
    "dist": (cmd_dist, "distribution table or seeded sample"),
}


def _grid_arg(text):
    """``a:b:step`` or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("range is start:stop:step")
        a, b, s = (float(v) for v in parts)
        return {"start": a, "stop": b, "step": s}
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON scenario file")
    common.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int,
                        help=f"worker count (fallback: ${THREADS_ENV}, then CPU count)")
    common.add_argument("--dist", help="distribution shorthand, e.g. uniform:0,1")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="resilience-lab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name in ("sweep", "surface", "resilience", "simulate", "target"):
            p.add_argument("--alpha", type=float)
            p.add_argument("--lambda", dest="lam", type=float)
            p.add_argument("--tol", type=float)
        if name in ("simulate", "target"):
            p.add_argument("--H", type=float)
        if name == "sweep":
            p.add_argument("--H-grid", dest="H_grid", type=_grid_arg)
        if name in ("attack", "voi"):
            p.add_argument("--c", type=float)
            p.add_argument("--delta", type=float)
            p.add_argument("--H-max", dest="H_max", type=float)
            p.add_argument("--p-grid", dest="p_grid", type=int)
            p.add_argument("--h-grid", dest="h_grid", type=int)
            p.add_argument("--monotone", action="store_true")
        if name == "voi":
            p.add_argument("--eps-grid", dest="eps_grid", type=_grid_arg)
        if name == "intervene":
            p.add_argument("--n", type=int)
            p.add_argument("--p-norm", dest="p_norm", type=float)
            p.add_argument("--budget", type=float)
            p.add_argument("--target", type=float)
        if name == "dist":
            p.add_argument("--sample", type=int, metavar="N")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    func = COMMANDS[args.command][0]
    try:
        cfg = merge_flags(load_config(args.config), args)
        text, stalled = func(cfg)
        emit(text, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if stalled:
        print("warning: solver did not converge", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
