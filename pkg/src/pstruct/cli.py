"""Config-driven experiment runner.

Usage: pstruct <command> [--config FILE] [--set section.key=value]... [--strict]

Commands: solve, audit, constants, reconstruct, sweep.  Configuration is an
INI file; every key has a documented default, and --set overrides win over
the file.  Each run writes report.json (deterministic: stable key order, no
timestamps), tables/*.csv, optional fields/*.bin, and manifest.json (config
echo, versions, wall time) under the output directory.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import csv
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import audit as audit_mod
from . import grid as g
from . import reconstruct as reconstruct_mod
from . import solver
from .audit import ESTIMATE_NAMES
from .constitutive import ConstitutiveParams
from .errors import ConfigError, PStructError
from .grid import build_domain, save_field
from .problems import ProblemSpec, RhsSpec, rhs_sample

COMMANDS = ("solve", "audit", "constants", "reconstruct", "sweep")

_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


# section -> key -> (parser, default); this is the complete documented key set
SCHEMA = {
    "domain": {
        "kind": (str, "cubic_periodic"),
        "n": (int, 16),
    },
    "params": {
        "p": (float, 2.0),
        "mu": (float, 0.1),
        "structure": (str, "full"),
    },
    "solver": {
        "eta": (float, 0.0),
        "outer_tol": (float, 1e-9),
        "max_outer": (int, 200),
        "inner_tol": (float, 0.0),
        "inner_maxiter": (int, 20000),
        "line_search": (_parse_bool, True),
        "continuation": (_parse_bool, False),
        "cont_eta0": (float, 1e-1),
        "cont_mu0": (float, 1e-1),
        "cont_ratio": (float, 0.5),
        "cont_eta_floor": (float, 1e-8),
        "cont_mu_floor": (float, 1e-8),
        "cont_max_steps": (int, 60),
    },
    "rhs": {
        "id": (str, "smooth-trig"),
        "amplitude": (float, 1.0),
        "seed": (int, 0),
    },
    "output": {
        "directory": (str, "out"),
        "formats": (str, "json,csv"),
    },
    "audit": {
        "n": (int, 16),
        "constants_n": (int, 32),
        "samples": (int, 12),
        "seed": (int, 0),
        "checks": (str, ",".join(ESTIMATE_NAMES)),
        "q_list": (str, "2,4,6,8,10,12,16"),
    },
    "reconstruct": {
        "residual_tol": (float, 1e-6),
        "delta": (float, 1e-14),
    },
    "sweep": {
        "p_values": (str, "1.2,1.5,1.8"),
        "mu_values": (str, "0,0.1"),
        "amplitudes": (str, "0.25,1,4,16"),
        "seeds": (str, "101,102,103"),
        "workers": (int, 1),
    },
}


def default_config() -> dict:
    return {sec: {k: v for k, (_, v) in keys.items()} for sec, keys in SCHEMA.items()}


def _set_value(config: dict, section: str, key: str, raw: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"unknown config section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown config key [{section}] {key}")
    parser, _ = SCHEMA[section][key]
    try:
        config[section][key] = parser(raw)
    except ValueError as exc:
        raise ConfigError(f"invalid value for [{section}] {key}: {raw!r} ({exc})") from exc


def load_config(path=None, overrides=()) -> dict:
    """Materialize the full config: defaults, then file, then --set flags."""
    config = default_config()
    if path is not None:
        cp = configparser.ConfigParser()
        read = cp.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for section in cp.sections():
            for key, raw in cp.items(section):
                _set_value(config, section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        _set_value(config, section, key, raw)
    return config


def _float_list(raw: str, where: str) -> list:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"invalid value for {where}: {raw!r}") from exc


def _int_list(raw: str, where: str) -> list:
    try:
        return [int(tok) for tok in raw.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"invalid value for {where}: {raw!r}") from exc


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="ascii")


def _write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _manifest(outdir: Path, command: str, config: dict, wall: float) -> None:
    payload = {
        "command": command,
        "config": config,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "pstruct": _package_version(),
        },
        "wall_time_s": wall,
    }
    _write_json(outdir / "manifest.json", payload)


def _package_version() -> str:
    from . import __version__

    return __version__


def _build_domain_checked(config: dict):
    try:
        return build_domain(config["domain"]["kind"], config["domain"]["n"])
    except ValueError as exc:
        raise ConfigError(f"invalid value in [domain]: {exc}") from exc


def _build_problem(config: dict):
    domain = _build_domain_checked(config)
    pc = config["params"]
    try:
        params = ConstitutiveParams(p=pc["p"], mu=pc["mu"], structure=pc["structure"])
    except ValueError as exc:
        raise ConfigError(f"invalid value in [params]: {exc}") from exc
    rc = config["rhs"]
    try:
        rhs = RhsSpec(id=rc["id"], amplitude=rc["amplitude"], seed=rc["seed"])
    except ValueError as exc:
        raise ConfigError(f"invalid value in [rhs]: {exc}") from exc
    return ProblemSpec(domain, params, rhs=rhs)


def _build_solve_config(config: dict) -> solver.SolveConfig:
    sc = config["solver"]
    cont = None
    if sc["continuation"]:
        cont = solver.ContinuationPath.geometric(
            eta0=sc["cont_eta0"],
            mu0=sc["cont_mu0"],
            ratio=sc["cont_ratio"],
            eta_floor=sc["cont_eta_floor"],
            mu_floor=sc["cont_mu_floor"],
            max_steps=sc["cont_max_steps"],
        )
    return solver.SolveConfig(
        eta=sc["eta"],
        outer_tol=sc["outer_tol"],
        max_outer=sc["max_outer"],
        inner_tol=sc["inner_tol"],
        inner_maxiter=sc["inner_maxiter"],
        line_search=sc["line_search"],
        continuation=cont,
    )


def _cmd_solve(config: dict, outdir: Path, formats: set) -> dict:
    problem = _build_problem(config)
    cfg = _build_solve_config(config)
    if cfg.continuation is not None:
        v, rep = solver.continuation_solve(problem, cfg)
    else:
        v, rep = solver.solve(problem, cfg)
    domain = problem.domain
    report = {
        "command": "solve",
        "config": config,
        "result": rep.to_dict(),
        "norms": {
            "grad_p": g.norm(domain, g.gradient(domain, v, "full"), q=problem.params.p),
            "w22": g.norm(domain, v, q=2.0, sobolev_level=2),
            "max": g.norm(domain, v, q=np.inf),
        },
    }
    if "csv" in formats:
        hist = [
            [i, e, gp, w22]
            for i, (e, gp, w22) in enumerate(
                zip(rep.energy_history, rep.norm_history["grad_p"], rep.norm_history["w22"])
            )
        ]
        _write_csv(outdir / "tables" / "solve_history.csv",
                   ["iteration", "energy", "grad_p", "w22"], hist)
        if rep.continuation_trace:
            _write_csv(
                outdir / "tables" / "continuation_trace.csv",
                ["step", "eta", "mu", "d2_norm", "step_change"],
                [[j, e, m, d, c] for j, (e, m, d, c) in enumerate(rep.continuation_trace)],
            )
    if "fields" in formats:
        (outdir / "fields").mkdir(parents=True, exist_ok=True)
        save_field(outdir / "fields" / "solution.bin", domain, v, fmt="bin")
    return report


def _cmd_constants(config: dict, outdir: Path, formats: set) -> dict:
    domain = _build_domain_checked(config)
    ac = config["audit"]
    q_list = _float_list(ac["q_list"], "[audit] q_list")
    table = audit_mod.c5_table(domain, q_list=q_list, samples=ac["samples"], seed=ac["seed"])
    c4 = table[2.0] if 2.0 in table else audit_mod.estimate_c4(domain, ac["samples"], ac["seed"])
    fit = audit_mod.growth_fit(table)
    c6 = max([c4] + list(table.values()))
    adm = audit_mod.admissible_p(q_list, c4, table)
    report = {
        "command": "constants",
        "config": config,
        "c4_hat": c4,
        "c5_hat": {f"{q:g}": v for q, v in sorted(table.items())},
        "c6_hat": c6,
        "growth_fit": fit,
        "admissible_p": adm,
    }
    if "csv" in formats:
        _write_csv(outdir / "tables" / "constants.csv", ["q", "c5_hat"],
                   [[q, v] for q, v in sorted(table.items())])
    return report


def _cmd_audit(config: dict, outdir: Path, formats: set) -> dict:
    ac = config["audit"]
    names = tuple(tok.strip() for tok in ac["checks"].split(",") if tok.strip())
    for name in names:
        if name not in ESTIMATE_NAMES:
            raise ConfigError(f"invalid value for [audit] checks: unknown check {name!r}")
    rep = audit_mod.run_audit(
        n=ac["n"],
        constants_n=ac["constants_n"],
        samples=ac["samples"],
        seed=ac["seed"],
        check_names=names,
        q_list=tuple(_float_list(ac["q_list"], "[audit] q_list")),
    )
    report = {"command": "audit", "config": config}
    report.update(rep.to_dict())
    if "csv" in formats:
        rows = []
        for check in rep.estimate_checks:
            for r in check["rows"]:
                rows.append([r["name"], r["kind"], r["n"], r["p"], r["mu"], r["structure"],
                             r["q"], r["rhs_id"], r["seed"], r["amplitude"], r["eta"],
                             r["lhs"], r["rhs"], r["ratio"], r["iterations"], r["residual"]])
        _write_csv(
            outdir / "tables" / "estimates.csv",
            ["name", "kind", "n", "p", "mu", "structure", "q", "rhs_id", "seed",
             "amplitude", "eta", "lhs", "rhs", "ratio", "iterations", "residual"],
            rows,
        )
        _write_csv(outdir / "tables" / "constants.csv", ["q", "c5_hat"],
                   [[q, v] for q, v in sorted(rep.c5_hat.items())])
    return report


def _cmd_reconstruct(config: dict, outdir: Path, formats: set) -> dict:
    problem = _build_problem(config)
    cfg = _build_solve_config(config)
    if cfg.continuation is not None:
        v, rep = solver.continuation_solve(problem, cfg)
    else:
        v, rep = solver.solve(problem, cfg)
    rc = config["reconstruct"]
    check = reconstruct_mod.pointwise_bound_check(
        problem.domain,
        v,
        problem.forcing(),
        problem.params.p,
        problem.params.mu,
        structure=problem.params.structure,
        eta=cfg.eta,
        residual_tol=rc["residual_tol"],
        delta=rc["delta"],
    )
    report = {
        "command": "reconstruct",
        "config": config,
        "solve": {"iterations": rep.iterations, "final_residual": rep.final_residual},
        "ratio_max": check["ratio_max"],
        "ratio_mean": check["ratio_mean"],
        "residual_rel": check["residual_rel"],
        "reconstruction_rel_l2": check["reconstruction_rel_l2"],
        "reconstruction_rel_median": check["reconstruction_rel_median"],
    }
    if "fields" in formats:
        (outdir / "fields").mkdir(parents=True, exist_ok=True)
        save_field(outdir / "fields" / "ratio.bin", problem.domain, check["ratio"], fmt="bin")
        save_field(outdir / "fields" / "solution.bin", problem.domain, v, fmt="bin")
    return report


def _sweep_point(args) -> dict:
    (idx, kind, n, structure, p, mu, amplitude, seed, rhs_id, eta, outer_tol) = args
    try:
        return _sweep_point_inner(args)
    except PStructError as exc:
        # keep the failing point identifiable when many points run, possibly
        # out of order in a worker pool
        raise PStructError(
            f"sweep point index={idx} p={p:g} mu={mu:g} amplitude={amplitude:g} "
            f"seed={seed}: {exc}"
        ) from exc


def _sweep_point_inner(args) -> dict:
    (idx, kind, n, structure, p, mu, amplitude, seed, rhs_id, eta, outer_tol) = args
    domain = build_domain(kind, n)
    params = ConstitutiveParams(p=p, mu=mu, structure=structure)
    f = rhs_sample(domain, rhs_id, amplitude, seed)
    cfg = solver.SolveConfig(eta=eta, outer_tol=outer_tol, max_outer=300)
    u, rep = solver.solve(ProblemSpec(domain, params, f=f), cfg)
    if p < 2.0:
        lhs = g.norm(domain, u, q=2.0, sobolev_level=2)
        rhs_val = g.norm(domain, f, q=2.0) + g.norm(
            domain, f, q=audit_mod.r_of_q(2.0, p)
        ) ** (1.0 / (p - 1.0))
    else:
        lhs = g.norm(domain, g.second_derivatives(domain, u), q=2.0)
        rhs_val = g.norm(domain, f, q=2.0)
    return {
        "index": idx, "kind": kind, "n": n, "structure": structure,
        "p": p, "mu": mu, "amplitude": amplitude, "seed": seed,
        "rhs_id": rhs_id, "eta": eta, "outer_tol": outer_tol,
        "lhs": lhs, "rhs": rhs_val, "implied_constant": lhs / rhs_val,
        "iterations": rep.iterations, "residual": rep.final_residual,
    }


SWEEP_COLUMNS = ("index", "kind", "n", "structure", "p", "mu", "amplitude", "seed",
                 "rhs_id", "eta", "outer_tol", "lhs", "rhs", "implied_constant",
                 "iterations", "residual")


def aggregate_sweep(rows: list) -> dict:
    """Per-(p, mu) spread statistics of the implied constant.

    Works identically on freshly computed rows and on rows re-read from the
    CSV (floats are written with full round-trip precision).
    """
    rows = sorted(rows, key=lambda r: r["index"])
    groups = {}
    for r in rows:
        groups.setdefault((r["p"], r["mu"]), []).append(r["implied_constant"])
    summary = {}
    for (p, mu), vals in sorted(groups.items()):
        arr = np.array(vals)
        spread = float(np.max(arr) / np.min(arr))
        summary[f"p={p:g},mu={mu:g}"] = {
            "count": len(vals),
            "min": float(np.min(arr)),
            "max": float(np.max(arr)),
            "mean": float(np.mean(arr)),
            "spread": spread,
            "verdict": "PASS" if spread < 10.0 else "FAIL",
        }
    return summary


def read_sweep_csv(path) -> list:
    rows = []
    with open(path, newline="", encoding="ascii") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for key, val in rec.items():
                if key in ("index", "n", "seed", "iterations"):
                    row[key] = int(val)
                elif key in ("kind", "structure", "rhs_id"):
                    row[key] = val
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def _cmd_sweep(config: dict, outdir: Path, formats: set) -> dict:
    sc = config["sweep"]
    p_values = _float_list(sc["p_values"], "[sweep] p_values")
    mu_values = _float_list(sc["mu_values"], "[sweep] mu_values")
    amplitudes = _float_list(sc["amplitudes"], "[sweep] amplitudes")
    seeds = _int_list(sc["seeds"], "[sweep] seeds")
    _build_domain_checked(config)
    kind = config["domain"]["kind"]
    n = config["domain"]["n"]
    structure = config["params"]["structure"]
    rhs_id = config["rhs"]["id"]
    outer_tol = config["solver"]["outer_tol"]
    base_eta = config["solver"]["eta"]
    for p in p_values:
        for mu in mu_values:
            try:
                ConstitutiveParams(p=p, mu=mu, structure=structure)
            except ValueError as exc:
                raise ConfigError(f"invalid value in [sweep]: {exc}") from exc

    points = []
    idx = 0
    for p in p_values:
        for mu in mu_values:
            eta = base_eta if mu > 0.0 else max(base_eta, 1e-8)
            for amplitude in amplitudes:
                for seed in seeds:
                    points.append((idx, kind, n, structure, p, mu, amplitude, seed,
                                   rhs_id, eta, outer_tol))
                    idx += 1
    workers = sc["workers"]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, points))
    else:
        rows = [_sweep_point(pt) for pt in points]
    rows.sort(key=lambda r: r["index"])
    summary = aggregate_sweep(rows)
    report = {"command": "sweep", "config": config, "points": len(rows), "summary": summary}
    if "csv" in formats:
        _write_csv(outdir / "tables" / "sweep.csv", list(SWEEP_COLUMNS),
                   [[r[c] for c in SWEEP_COLUMNS] for r in rows])
    return report


def _collect_verdicts(report: dict) -> list:
    out = []
    def walk(node):
        if isinstance(node, dict):
            for key, val in node.items():
                if key == "verdict" and isinstance(val, str):
                    out.append(val)
                else:
                    walk(val)
        elif isinstance(node, list):
            for item in node:
                walk(item)
    walk(report)
    return out


def run(command: str, config: dict, strict: bool = False) -> int:
    """Execute a command; returns the process exit status."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}, expected one of {COMMANDS}")
    outdir = Path(config["output"]["directory"])
    outdir.mkdir(parents=True, exist_ok=True)
    formats = {tok.strip() for tok in config["output"]["formats"].split(",") if tok.strip()}
    unknown = formats - {"json", "csv", "fields"}
    if unknown:
        raise ConfigError(f"invalid value for [output] formats: {sorted(unknown)}")
    start = time.perf_counter()
    handler = {
        "solve": _cmd_solve,
        "audit": _cmd_audit,
        "constants": _cmd_constants,
        "reconstruct": _cmd_reconstruct,
        "sweep": _cmd_sweep,
    }[command]
    report = handler(config, outdir, formats)
    if "json" in formats:
        _write_json(outdir / "report.json", report)
    _manifest(outdir, command, config, time.perf_counter() - start)
    if strict and any(v == "FAIL" for v in _collect_verdicts(report)):
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pstruct",
        description="structured-grid p-structure solver and regularity auditor",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="SECTION.KEY=VALUE", help="override a config key")
    parser.add_argument("--strict", action="store_true",
                        help="exit nonzero when any verdict is FAIL")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, args.overrides)
        return run(args.command, config, strict=args.strict)
    except PStructError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
