"""Command-line front end: ``mecrelay solve|sweep|compare|validate``.

Exit codes: 0 ok, 1 usage or config error, 2 solver failure, 3 validation failure.
Errors are written to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import dataclasses
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import af, baselines, fdma, tdma, validation
from .errors import DomainError, MecRelayError
from .scenario import ConfigError, d_domain, local_energy, offload_time_budget, scenario_from_config

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_VALIDATION = 0, 1, 2, 3
MODES = ("tdma", "fdma", "af", "equal")
SWEEP_KEYS = {"D": "D_nats", "T": "T_s", "fB": "fB_hz"}
CSV_HEADER = "mode,param,value,d_opt_nats,energy_j,iters,gap,runtime_s"
SUITES = ("kkt", "sca-descent", "monotone-xbar", "oracle-n1", "oracle-n2", "equivalence")


class UsageError(Exception):
    pass


def jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def fmt(x) -> str:
    """Shortest round-trip decimal."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ------------------------------------------------------------------ solving

def load_config(path, seed=None) -> dict:
    cfg = {}
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise ConfigError("config", "top level must be an object")
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def solve_mode(sc, mode: str):
    """Return ``(solution, d, energy, iters, gap)`` for one policy."""
    task, ch, params = sc.task, sc.channels, sc.params
    if mode == "tdma":
        sol = tdma.solve_tdma(task, ch, params)
        return sol, sol.d, sol.total_energy, sol.evaluations, 0.0
    if mode == "fdma":
        t_sol = tdma.solve_tdma(task, ch, params)
        sol = fdma.map_tdma_to_fdma(t_sol, task, params, ch)
        return sol, sol.d, sol.total_energy, t_sol.evaluations, 0.0
    if mode == "af":
        sol = af.solve_af_polyblock(task, ch, params)
        return sol, sol.d, sol.total_energy, sol.iterations, sol.poly_gap
    if mode == "equal":
        sol = baselines.solve_equal_alloc(task, ch, params)
        return sol, sol.d, sol.total_energy, 0, 0.0
    raise UsageError(f"unknown mode {mode!r}")


def _sweep_point(job):
    cfg, mode, param, value = job
    cfg = dict(cfg)
    cfg[SWEEP_KEYS[param]] = value
    t0 = time.perf_counter()
    try:
        sc = scenario_from_config(cfg)
        _, d, energy, iters, gap = solve_mode(sc, mode)
    except MecRelayError as exc:
        return {"mode": mode, "value": value, "error": type(exc).__name__, "message": str(exc)}
    return {"mode": mode, "value": value, "d": d, "energy": energy, "iters": iters, "gap": gap,
            "runtime": time.perf_counter() - t0}


# ------------------------------------------------------------------ commands

def _write(out, text):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_solve(args) -> int:
    sc = scenario_from_config(load_config(args.config, args.seed))
    sol, *_ = solve_mode(sc, args.mode)
    doc = {"mode": args.mode, "config": sc.config, "solution": jsonable(sol),
           "total_energy": float(sol.total_energy)}
    _write(args.out, json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.param is None or args.from_ is None or args.to is None:
        raise UsageError("sweep needs --param, --from and --to")
    if not args.from_ < args.to:
        raise UsageError("--from must be smaller than --to")
    if args.steps < 2:
        raise UsageError("--steps must be >= 2")
    cfg = load_config(args.config, args.seed)
    # validate the base scenario and the sweep end points up front
    scenario_from_config(cfg)
    for v in (args.from_, args.to):
        scenario_from_config({**cfg, SWEEP_KEYS[args.param]: v})
    modes = args.modes or ["tdma", "fdma"]
    values = [float(v) for v in np.linspace(args.from_, args.to, args.steps)]
    jobs = [(cfg, m, args.param, v) for m in modes for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    results.sort(key=lambda r: (MODES.index(r["mode"]), r["value"]))
    ok = [r for r in results if "error" not in r]
    failed = [r for r in results if "error" in r]
    effective = scenario_from_config(cfg).config

    if args.format == "json":
        doc = {"config": effective, "param": args.param, "rows": ok, "failures": failed}
        if not args.timing:
            for r in ok:
                r.pop("runtime")
        text = json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(jsonable(effective), sort_keys=True) + "\n")
        buf.write(CSV_HEADER + "\n")
        for r in ok:
            runtime = fmt(r["runtime"]) if args.timing else ""
            buf.write(",".join([r["mode"], args.param, fmt(r["value"]), fmt(r["d"]), fmt(r["energy"]),
                                fmt(r["iters"]), fmt(r["gap"]), runtime]) + "\n")
        for r in failed:
            buf.write("# failed: " + json.dumps(jsonable(r), sort_keys=True) + "\n")
        text = buf.getvalue()
    _write(args.out, text)
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_compare(args) -> int:
    sc = scenario_from_config(load_config(args.config, args.seed))
    rows, errors = {}, {}
    for mode in MODES:
        try:
            _, d, energy, _, _ = solve_mode(sc, mode)
            rows[mode] = {"d_opt_nats": d, "energy_j": energy}
        except MecRelayError as exc:
            errors[mode] = {"error": type(exc).__name__, "message": str(exc)}
    ranking = sorted(rows, key=lambda m: rows[m]["energy_j"])
    flags = []
    e = {m: r["energy_j"] for m, r in rows.items()}
    if "af" in e and "tdma" in e and e["af"] > e["tdma"]:
        flags.append("af-above-df")
    if "equal" in e and "tdma" in e and e["equal"] < e["tdma"] * (1 - 1e-12):
        flags.append("equal-below-df")
    if "fdma" in e and "tdma" in e and abs(e["fdma"] - e["tdma"]) > 1e-9 * e["tdma"]:
        flags.append("tdma-fdma-mismatch")
    if args.format == "json":
        doc = {"config": sc.config, "modes": rows, "ranking": ranking, "flags": flags, "errors": errors}
        text = json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n"
    else:
        lines = ["# config: " + json.dumps(jsonable(sc.config), sort_keys=True),
                 f"{'rank':>4}  {'mode':<6} {'energy_j':>24} {'d_opt_nats':>24}"]
        for i, m in enumerate(ranking, 1):
            lines.append(f"{i:>4}  {m:<6} {fmt(rows[m]['energy_j']):>24} {fmt(rows[m]['d_opt_nats']):>24}")
        for m, err in errors.items():
            lines.append(f"   -  {m:<6} failed: {err['error']}: {err['message']}")
        for f in flags:
            lines.append(f"# flag: {f}")
        text = "\n".join(lines) + "\n"
    _write(args.out, text)
    return EXIT_SOLVER if errors else EXIT_OK


# ------------------------------------------------------------------ validation suites

def _seeds_cfg(cfg, seed, **kw):
    out = dict(cfg)
    out.pop("h", None)
    out.pop("g", None)
    out["seed"] = seed
    out.update(kw)
    return out


def suite_kkt(cfg, n):
    bad = []
    for s in range(n):
        sc = scenario_from_config(_seeds_cfg(cfg, s))
        sol = tdma.solve_tdma(sc.task, sc.channels, sc.params)
        r = tdma.kkt_residuals_tdma(sol, sc.task, sc.params, sc.channels).max_residual
        if not r <= 1e-6:
            bad.append({"seed": s, "max_residual": r})
    return validation.ProbeReport(not bad, bad, n)


def suite_equivalence(cfg, n):
    bad = []
    for s in range(n):
        sc = scenario_from_config(_seeds_cfg(cfg, s))
        a = tdma.solve_tdma(sc.task, sc.channels, sc.params)
        b = fdma.map_tdma_to_fdma(a, sc.task, sc.params, sc.channels)
        rel = abs(a.total_energy - b.total_energy) / max(a.total_energy, 1e-300)
        if not rel <= 1e-9:
            bad.append({"seed": s, "rel_diff": rel})
    return validation.ProbeReport(not bad, bad, n)


def suite_sca_descent(cfg, n):
    sc = scenario_from_config(cfg)
    rng = np.random.default_rng(sc.config["seed"])
    _, d_max = d_domain(sc.task, sc.params)
    bad = []
    for d in rng.uniform(0.05, 0.95, 20) * d_max:
        try:
            _, _, trace = af.sca_solve(float(d), sc.channels, sc.task, sc.params, max_iter=200)
        except MecRelayError as exc:
            bad.append({"d": float(d), "error": str(exc)})
            continue
        diffs = np.diff(trace)
        if np.any(diffs > 0) or not abs(diffs[-1] if diffs.size else 0.0) < 1e-8:
            bad.append({"d": float(d), "trace": trace})
    return validation.ProbeReport(not bad, bad, 20)


def suite_monotone_xbar(cfg, n):
    bad = []
    for s in range(n):
        sc = scenario_from_config(_seeds_cfg(cfg, s))
        xb = af.XBar(sc.channels, sc.task, sc.params)
        rep = validation.probe_monotone(xb, d_domain(sc.task, sc.params), points=25)
        if not rep.passed:
            bad.append({"seed": s, "violations": rep.violations})
    return validation.ProbeReport(not bad, bad, n)


def suite_oracle_n1(cfg, n):
    bad = []
    for s in range(n):
        sc = scenario_from_config(_seeds_cfg(cfg, s, N=1))
        _, d_max = d_domain(sc.task, sc.params)
        d = 0.75 * d_max
        y, _, _ = af.sca_solve(d, sc.channels, sc.task, sc.params)
        t = 0.5 * offload_time_budget(sc.task, sc.params, d)
        ora = validation.brute_force_af(sc.task, sc.channels, sc.params,
                                        validation.default_af_grid(sc.task, sc.params, d=d))
        ref = (ora.energy - local_energy(sc.task, sc.params, d)) / t
        rel = abs(math.exp(y) - ref) / ref
        if not rel <= 1e-2:
            bad.append({"seed": s, "d": d, "sca": math.exp(y), "oracle": ref})
    return validation.ProbeReport(not bad, bad, n)


def suite_oracle_n2(cfg, n):
    bad = []
    for s in range(n):
        sc = scenario_from_config(_seeds_cfg(cfg, s, N=2))
        sol = tdma.solve_tdma(sc.task, sc.channels, sc.params)
        ora = validation.brute_force_tdma(sc.task, sc.channels, sc.params)
        rel = abs(sol.total_energy - ora.energy) / ora.energy
        if not rel <= 1e-3:
            bad.append({"seed": s, "solver": sol.total_energy, "oracle": ora.energy})
    return validation.ProbeReport(not bad, bad, n)


SUITE_FUNCS = {
    "kkt": (suite_kkt, 100), "sca-descent": (suite_sca_descent, 1), "monotone-xbar": (suite_monotone_xbar, 10),
    "oracle-n1": (suite_oracle_n1, 3), "oracle-n2": (suite_oracle_n2, 3), "equivalence": (suite_equivalence, 100),
}


def cmd_validate(args) -> int:
    names = list(SUITES) if args.suite == "all" else args.suite.split(",")
    for name in names:
        if name not in SUITE_FUNCS:
            raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    cfg = load_config(args.config, args.seed)
    scenario_from_config(cfg)
    reports = {}
    for name in names:
        func, default_n = SUITE_FUNCS[name]
        reports[name] = func(cfg, args.seeds or default_n).to_dict()
    passed = all(r["passed"] for r in reports.values())
    doc = {"passed": passed, "suites": reports}
    _write(args.out, json.dumps(jsonable(doc), indent=2, sort_keys=True) + "\n")
    return EXIT_OK if passed else EXIT_VALIDATION


# ------------------------------------------------------------------ entry point

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mecrelay", description="Minimum-energy relay-assisted offloading solvers.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="scenario JSON file (defaults apply for missing keys)")
        sp.add_argument("--seed", type=int, help="override the channel seed")
        sp.add_argument("--out", help="output path (stdout if omitted)")

    s = sub.add_parser("solve", help="solve one scenario")
    common(s)
    s.add_argument("--mode", choices=MODES, default="tdma")
    s.add_argument("--format", choices=["json"], default="json")

    s = sub.add_parser("sweep", help="sweep D, T or fB with a fixed channel realization")
    common(s)
    s.add_argument("--param", choices=sorted(SWEEP_KEYS))
    s.add_argument("--from", dest="from_", type=float)
    s.add_argument("--to", type=float)
    s.add_argument("--steps", type=int, default=11)
    s.add_argument("--mode", dest="modes", action="append", choices=MODES,
                   help="repeat to run several modes (default: tdma and fdma)")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--timing", action="store_true", help="fill the runtime_s column")

    s = sub.add_parser("compare", help="rank all four policies on one scenario")
    common(s)
    s.add_argument("--format", choices=["table", "json"], default="table")

    s = sub.add_parser("validate", help="run probe suites")
    common(s)
    s.add_argument("--suite", default="all", help=f"comma-separated: {', '.join(SUITES)} or all")
    s.add_argument("--seeds", type=int, help="number of scenarios per suite")
    s.add_argument("--format", choices=["json"], default="json")
    return p


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "compare": cmd_compare, "validate": cmd_validate}


def _fail(code, kind, message, **extra):
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except ConfigError as exc:
        return _fail(EXIT_USAGE, "config", str(exc), field=exc.field)
    except DomainError as exc:
        return _fail(EXIT_USAGE, "domain", str(exc))
    except MecRelayError as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, str(exc))
    except (ArithmeticError, FloatingPointError) as exc:
        return _fail(EXIT_SOLVER, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
