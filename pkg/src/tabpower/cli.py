"""Command-line front end.

Every artifact starts with its fully resolved configuration (as JSON), and
``tabpower rerun FILE`` regenerates the artifact from that record. Worker
count is left out of the record because results do not depend on it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, reproduce
from .delta import (
    grad_dcov,
    grad_pearson,
    marginal_eigenvalues,
    null_weights_dcov,
    numeric_hessian,
    second_order_weights,
    sigma_star,
)
from .dist import AccuracyError
from .power import TestKind, reports_to_csv, reports_to_json
from .rng import resolve_seed
from .sim import Scenario
from .tables import AlternativeSpec, DomainError, JointTable, lemma1_constant, read_table

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ACCURACY = 3

DEFAULT_NS = reproduce.TABLE_NS
DEFAULT_TESTS = tuple(t.value for t in TestKind)
DEFAULT_REPLICATIONS = 10_000
TARGETS = ("table1", "table2", "figure2", "figure3", "figure4", "figure5")
CONFIG_PREFIX = "# config: "
SCALE_NOTE = (
    "scale: critical_value is on the n*T scale; theoretical power integrates the law of "
    "sqrt(n)*(T - theta); empirical = share of replicates with n*T > critical_value"
)


class UsageError(Exception):
    """Invalid option values; reported with exit code 2."""


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _fraction(text: str) -> str:
    try:
        Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number or fraction: {text!r}") from None
    return text.strip()


def _int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    return v


def _add_common(p: argparse.ArgumentParser, *, scenario=True, simulation=False):
    if scenario:
        p.add_argument("--setting", type=int, choices=(1, 2), help="built-in simulation setting")
        p.add_argument("--table", help="CSV or JSON file with a joint probability table")
        p.add_argument("--epsilon", type=_fraction, action="append", help="perturbation, e.g. 1/100 (repeatable)")
    p.add_argument("--n", type=_int, action="append", help="sample size (repeatable)")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level (default 0.05)")
    p.add_argument("--test", action="append", help="pearson, dcov-mle or dcov-unbiased (repeatable)")
    p.add_argument("--method", choices=("cf", "mc"), default="cf", help="law evaluation method")
    p.add_argument("--null-method", choices=("asymptotic", "mc"), default="asymptotic")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--dump-internals", action="store_true", help="write Sigma*, gradients and weights as JSON")
    p.add_argument("--seed", type=int, help="master seed (fallback: $TABPOWER_SEED)")
    p.add_argument("--workers", type=_int, default=os.cpu_count() or 1)
    p.add_argument("--replications", type=_int, default=None,
                   help=f"Monte Carlo replicates (default {DEFAULT_REPLICATIONS})" if simulation else argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tabpower", description="Power of independence tests for contingency tables")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    _add_common(sub.add_parser("power", help="theoretical power from the second-order laws"))
    _add_common(sub.add_parser("simulate", help="theoretical and simulated power"), simulation=True)
    _add_common(sub.add_parser("null-law", help="asymptotic null laws at an independence table"))
    rp = sub.add_parser("reproduce", help="regenerate a table or figure data set")
    rp.add_argument("target", choices=TARGETS)
    _add_common(rp, scenario=False, simulation=True)
    rr = sub.add_parser("rerun", help="regenerate an artifact from its embedded config")
    rr.add_argument("artifact")
    rr.add_argument("--out", help="output directory (default: stdout)")
    rr.add_argument("--workers", type=_int, default=os.cpu_count() or 1)
    return parser


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _table_cells(path: str) -> list:
    table = read_table(path)
    return table.probs.tolist()


def _default_ns(cmd: str, target: str | None) -> list[int] | None:
    if cmd != "reproduce" or target in reproduce.TABLES:
        return list(DEFAULT_NS)
    return None  # figures use their own per-setting grids


def resolve_config(args: argparse.Namespace) -> dict:
    """Turn parsed arguments into the complete, explicit run record."""
    cmd = args.command
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    if not 0.0 < args.alpha < 1.0:
        raise UsageError(f"--alpha must lie in (0, 1), got {args.alpha}")
    cfg: dict = {"command": cmd}
    if cmd == "reproduce":
        cfg["target"] = args.target
    else:
        if args.table and args.setting:
            raise UsageError("give either --setting or --table, not both")
        if args.table:
            try:
                cfg["table"] = _table_cells(args.table)
            except (OSError, ValueError) as exc:
                raise UsageError(f"--table: {exc}") from None
        elif args.setting:
            cfg["setting"] = args.setting
            eps = args.epsilon or (["0"] if cmd == "null-law" else None)
            if not eps:
                raise UsageError("--epsilon is required with --setting")
            cfg["epsilon"] = eps
        else:
            raise UsageError("one of --setting or --table is required")
    if cmd != "null-law":
        ns = args.n or _default_ns(cmd, getattr(args, "target", None))
        if ns is not None:
            bad = [n for n in ns if n < 4]
            if bad:
                raise UsageError(f"--n must be at least 4 (the unbiased statistic needs n >= 4), got {bad[0]}")
        cfg["n"] = ns
        cfg["alpha"] = args.alpha
        tests = args.test or list(DEFAULT_TESTS)
        try:
            cfg["tests"] = [TestKind.parse(t).value for t in tests]
        except ValueError:
            raise UsageError(f"--test must be one of pearson, dcov-mle, dcov-unbiased; got {tests}") from None
        cfg["method"] = args.method
        cfg["null_method"] = args.null_method
    if args.replications is not None and args.replications < 1:
        raise UsageError(f"--replications must be at least 1, got {args.replications}")
    needs_seed = cmd in ("simulate", "reproduce") or args.method == "mc" or args.null_method == "mc"
    if cmd in ("simulate", "reproduce") or args.null_method == "mc":
        default_reps = reproduce.FIGURE2_REPLICATIONS if cfg.get("target") == "figure2" else DEFAULT_REPLICATIONS
        cfg["replications"] = args.replications or default_reps
    if needs_seed:
        cfg["seed"] = resolve_seed(args.seed)
    cfg["format"] = "json" if cmd == "null-law" else args.format
    cfg["dump_internals"] = bool(args.dump_internals)
    return cfg


def _scenario_list(cfg: dict) -> list[Scenario]:
    if "table" in cfg:
        return [Scenario.custom(JointTable(np.array(cfg["table"], dtype=np.float64)))]
    return [Scenario.setting(cfg["setting"], float(Fraction(e))) for e in cfg["epsilon"]]


def _header_lines(cfg: dict) -> list[str]:
    return [f"config: {json.dumps(cfg, sort_keys=True)}"]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _internals(scenarios) -> dict:
    out = []
    for sc in scenarios:
        entry = {"kind": sc.kind, "epsilon": sc.epsilon, "table": sc.table.probs.tolist()}
        S = sigma_star(sc.table)
        entry["sigma_star"] = S.tolist()
        alt = AlternativeSpec.from_table(sc.table)
        if alt.is_null:
            entry["null_weights_dcov"] = null_weights_dcov(sc.table).tolist()
        else:
            for name, grad in (("pearson", grad_pearson), ("dcov", grad_dcov)):
                H = numeric_hessian(name, sc.table)
                entry[f"gradient_{name}"] = grad(alt).tolist()
                entry[f"hessian_{name}"] = H.tolist()
                entry[f"weights_{name}"] = second_order_weights(S, H).tolist()
        out.append(entry)
    return {"scenarios": out}


def _power_reports(cfg: dict, workers: int, empirical: bool):
    if "table" in cfg:
        return reproduce.power_rows(
            None, None, cfg["n"], cfg["tests"], cfg["alpha"],
            table=JointTable(np.array(cfg["table"], dtype=np.float64)),
            method=cfg["method"], null_method=cfg["null_method"], empirical=empirical,
            replications=cfg.get("replications") or DEFAULT_REPLICATIONS, seed=cfg.get("seed", 0), workers=workers,
        )
    return reproduce.power_rows(
        cfg["setting"], [Fraction(e) for e in cfg["epsilon"]], cfg["n"], cfg["tests"], cfg["alpha"],
        method=cfg["method"], null_method=cfg["null_method"], empirical=empirical,
        replications=cfg.get("replications") or DEFAULT_REPLICATIONS, seed=cfg.get("seed", 0), workers=workers,
    )


def _format_reports(cfg, reports) -> str:
    if cfg["format"] == "json":
        return reports_to_json(reports, config=cfg) + "\n"
    return reports_to_csv(reports, _header_lines(cfg) + [SCALE_NOTE])


def cmd_power(cfg: dict, workers: int) -> dict[str, str]:
    for sc in _scenario_list(cfg):
        if AlternativeSpec.from_table(sc.table).is_null:
            raise UsageError("epsilon must be nonzero: the independence table has no fixed-alternative power")
    return {f"power.{cfg['format']}": _format_reports(cfg, _power_reports(cfg, workers, empirical=False))}


def cmd_simulate(cfg: dict, workers: int) -> dict[str, str]:
    return {f"simulate.{cfg['format']}": _format_reports(cfg, _power_reports(cfg, workers, empirical=True))}


def cmd_null_law(cfg: dict, workers: int) -> dict[str, str]:
    laws = []
    for sc in _scenario_list(cfg):
        if not sc.table.is_independent():
            raise UsageError("null-law needs an independence table (epsilon = 0 or an outer-product --table)")
        I, J = sc.table.shape
        df = (I - 1) * (J - 1)
        weights = null_weights_dcov(sc.table)
        entry = {
            "shape": [I, J],
            "epsilon": sc.epsilon,
            "pearson_df": df,
            "dcov_weights": weights[:df].tolist(),
            "dcov_residual_weights": weights[df:].tolist(),
            "lemma1_constant": lemma1_constant(sc.table),
            "dcov_unbiased_law": "sum_k w_k (Z_k^2 - 1), n*T scale",
            "dcov_mle_law": "lemma1_constant + sum_k w_k (Z_k^2 - 1), n*T scale",
        }
        lam = marginal_eigenvalues(sc.table.row_marginals)
        gam = marginal_eigenvalues(sc.table.col_marginals)
        if lam is not None and gam is not None:
            entry["closed_form_row"] = lam.tolist()
            entry["closed_form_col"] = gam.tolist()
            entry["closed_form_weights"] = sorted(np.outer(lam, gam).ravel().tolist(), reverse=True)
        laws.append(entry)
    body = json.dumps({"config": cfg, "laws": laws}, indent=2) + "\n"
    return {"null_law.json": body}


def _wide_table(reports, tests) -> str:
    """One line per (epsilon, n) with ``theoretical/empirical`` per test."""
    lines = ["epsilon,n," + ",".join(tests)]
    key = {}
    for r in reports:
        key.setdefault((r.epsilon, r.n), {})[r.test.value] = r
    for (eps, n), row in key.items():
        cells = [f"{row[t].theoretical_power:.3f}/{row[t].empirical_power:.3f}" for t in tests]
        lines.append(f"{eps!r},{n}," + ",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_reproduce(cfg: dict, workers: int) -> dict[str, str]:
    target = cfg["target"]
    seed = cfg["seed"]
    files: dict[str, str] = {}
    if target in reproduce.TABLES:
        setting, eps = reproduce.TABLES[target]
        ns = cfg["n"]
        reps = cfg["replications"]
        reports = reproduce.power_rows(
            setting, [Fraction(e) for e in eps], ns, cfg["tests"], cfg["alpha"],
            method=cfg["method"], null_method=cfg["null_method"], empirical=True,
            replications=reps, seed=seed, workers=workers,
        )
        files[f"{target}.csv"] = reports_to_csv(reports, _header_lines(cfg) + [SCALE_NOTE])
        files[f"{target}_wide.csv"] = "# " + _header_lines(cfg)[0] + "\n" + _wide_table(reports, cfg["tests"])
        return files
    panels = reproduce.figure_panels(target, cfg["replications"], seed, workers, ns=cfg["n"])
    summary = ["# " + _header_lines(cfg)[0]]
    if target == "figure2":
        summary.append("setting,n,epsilon,ncp,ks_noncentral,zero_marginal_replicates")
    else:
        summary.append("setting,n,epsilon,statistic,ks_normal,ks_second_order")
    for p in panels:
        name = f"{target}_setting{p['setting']}_n{p['n']}.json"
        files[name] = json.dumps({"config": cfg, **p}, indent=1) + "\n"
        if target == "figure2":
            summary.append(
                f"{p['setting']},{p['n']},{p['epsilon']!r},{p['ncp']:.10g},{p['ks_noncentral']:.6f},"
                f"{p['zero_marginal_replicates']}"
            )
        else:
            summary.append(
                f"{p['setting']},{p['n']},{p['epsilon']!r},{p['statistic']},{p['ks_normal']:.6f},"
                f"{p['ks_second_order']:.6f}"
            )
    files[f"{target}_ks.csv"] = "\n".join(summary) + "\n"
    return files


COMMANDS = {
    "power": cmd_power,
    "simulate": cmd_simulate,
    "null-law": cmd_null_law,
    "reproduce": cmd_reproduce,
}


def run_config(cfg: dict, workers: int) -> dict[str, str]:
    """Execute a resolved config; returns ``{file name: contents}``."""
    return COMMANDS[cfg["command"]](cfg, workers)


def config_from_artifact(path: str) -> dict:
    """Read the run record embedded in a CSV comment line or a JSON body."""
    text = Path(path).read_text()
    first = text.splitlines()[0] if text else ""
    if first.startswith(CONFIG_PREFIX):
        return json.loads(first[len(CONFIG_PREFIX):])
    try:
        return json.loads(text)["config"]
    except (ValueError, KeyError, TypeError):
        raise UsageError(f"{path} carries no embedded config") from None


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _emit(files: dict[str, str], out: str | None, cfg: dict, runtime: float):
    if out is None:
        for body in files.values():
            sys.stdout.write(body)
        return
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    for name, body in files.items():
        (root / name).write_text(body)
    if cfg["command"] == "reproduce":
        manifest = {
            "target": cfg["target"],
            "seed": cfg["seed"],
            "replications": cfg["replications"],
            "runtime_seconds": round(runtime, 3),
            "files": sorted(files),
            "config": cfg,
        }
        (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _emit_internals(cfg: dict, out: str | None):
    if "table" not in cfg and "setting" not in cfg:
        return
    body = json.dumps({"config": cfg, **_internals(_scenario_list(cfg))}, indent=1) + "\n"
    if out is None:
        sys.stderr.write(body)
    else:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "internals.json").write_text(body)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        if args.command == "rerun":
            cfg = config_from_artifact(args.artifact)
        else:
            cfg = resolve_config(args)
        if cfg.get("dump_internals"):
            _emit_internals(cfg, args.out)
        files = run_config(cfg, args.workers)
    except UsageError as exc:
        print(f"tabpower: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"tabpower: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AccuracyError as exc:
        print(f"tabpower: numerical accuracy failure: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    _emit(files, args.out, cfg, time.perf_counter() - start)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
