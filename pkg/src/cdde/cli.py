"""Command line interface: ``cdde <subcommand> --config cfg.json --out dir/``.

Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from datetime import datetime, timezone

import numpy as np

from . import __version__, kernels
from . import config as cfgmod
from .bounds import InvalidModulusError, bound, family_report, moduli_from_m_bounds
from .dde import InitialHistory, PicardError, SolverParams, UnsupportedExponentError, c1p_modulus_tau, solve
from .dp import InfeasibleProblemError
from .expr import EvaluationError, ExpressionSyntaxError
from .lab import SCENARIOS, ExperimentSpec, ScenarioError, hull_sample, run_scenario, theta_for
from .model import ModulusSet, RationalInterval, SampledPath, VectorField, modulus_from_json
from .topologies import (NEEDS_THETA, NEEDS_THETA_HAT, MetricConfig, Resolution, SeminormError,
                         SeminormIndex, metric, seminorm_alternative, seminorm_detail)

SUBCOMMANDS = ("bounds", "seminorm", "distance", "solve", "hull", "experiment", "selftest")
VALIDATION = (cfgmod.ConfigError, ExpressionSyntaxError, SeminormError, ScenarioError, KeyError,
              TypeError, UnsupportedExponentError)
NUMERICAL = (EvaluationError, PicardError, InfeasibleProblemError, InvalidModulusError, FloatingPointError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cdde", description="Caratheodory delay equations: bounds, seminorms, solver, experiments.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--workers", type=int, default=1, help="worker threads")
        sp.add_argument("--seed", type=int, default=0, help="random seed (u64)")
        sp.add_argument("--resolution", type=float, default=None,
                        help="time step h: solver step and seminorm time step")
        if name == "experiment":
            sp.add_argument("--scenario", required=True, choices=SCENARIOS)
    return ap


# ---------------------------------------------------------------------------
# output helpers


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_csv(path: str, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, SampledPath):
        return {"grid": obj.grid.tolist(), "values": obj.values.tolist()}
    return obj


def write_json(path: str, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# config -> objects


def _field(obj, dim=None) -> VectorField:
    if isinstance(obj, str):
        return VectorField.parse(obj, dim)
    return VectorField.from_json(obj)


def _modulus(obj, family, I: RationalInterval, j: float, shifted: bool, c) -> ModulusSet | None:
    if obj is None:
        return None
    if obj == "m_bounds":
        Is = [I, I.shift(-1)] if shifted else [I]
        return moduli_from_m_bounds(family, [j], Is, s_max=I.length,
                                    spatial_res=c["spatial_res"], time_res=c["time_res"])
    if obj.get("type") == "holder":
        return ModulusSet.single(c1p_modulus_tau(float(obj["j"]), float(obj["p"])))
    return ModulusSet.single(modulus_from_json(obj))


def _resolution(c, override) -> Resolution:
    r = c.get("resolution", {})
    return Resolution(override if override is not None else r["dt"], r["dx"])


def _metric_config(m, family, c) -> MetricConfig:
    theta = theta_hat = None
    kind = m["kind"]
    if kind in NEEDS_THETA:
        theta = _set_for_metric(m["theta"], family, m, False, c)
    if kind in NEEDS_THETA_HAT:
        src = m["theta_hat"] if m["theta_hat"] is not None else m["theta"]
        theta_hat = _set_for_metric(src, family, m, True, c)
    return MetricConfig(kind, m["R"], m["J"], tuple(tuple(d) for d in m["D"]), theta, theta_hat,
                        m["p"], m["K_max"], m["directions"])


def _set_for_metric(obj, family, m, shifted, c):
    if obj is None:
        raise cfgmod.ConfigError(f"metric kind {m['kind']} needs a modulus (theta / theta_hat)")
    if obj == "m_bounds":
        return theta_for(family, "m_bounds", m["R"], m["J"], shifted, c["spatial_res"], c["time_res"])
    if obj.get("type") == "holder":
        return ModulusSet.single(c1p_modulus_tau(float(obj["j"]), float(obj["p"])))
    return ModulusSet.single(modulus_from_json(obj))


def _history(obj, deriv, dim: int, h: float) -> InitialHistory:
    if isinstance(obj, (int, float)):
        return InitialHistory.constant(np.full(dim, float(obj)))
    if isinstance(obj, dict):
        path = SampledPath(np.asarray(obj["grid"], float), np.asarray(obj["values"], float))
        d = None
        if "derivative" in obj:
            d = SampledPath(path.grid, np.asarray(obj["derivative"], float))
        return InitialHistory(path, d)
    from .lab import _history as sampled
    return sampled(obj, deriv, dim, {}, max(int(round(1.0 / h)), 1))


# ---------------------------------------------------------------------------
# subcommands


def cmd_bounds(c, args, out, tag):
    fam = [_field(f) for f in c["family"]]
    I = RationalInterval.from_json(c["interval"])
    rows = []
    for k, f in enumerate(fam):
        for kind in c["kinds"]:
            for j in c["j"]:
                b = bound(f, kind, j, I, c["spatial_res"], c["time_res"])
                rows += [(kind, j, t, v, k, tag) for t, v in zip(b.t, b.values)]
    write_csv(os.path.join(out, "bounds.csv"), ["kind", "j", "t", "value", "field", "config_hash"], rows)
    rep = family_report(fam, c["j"], c["r"], c["p"], c["eps"], c["spatial_res"], c["time_res"])
    write_json(os.path.join(out, "family_report.json"), {**rep.to_json(), "config_hash": tag})
    return {"rows": len(rows)}


def cmd_seminorm(c, args, out, tag):
    f = _field(c["field"])
    res = _resolution(c, args.resolution)
    os.makedirs(os.path.join(out, "paths"), exist_ok=True)
    rows = []
    for k, s in enumerate(c["seminorms"]):
        I = RationalInterval.from_json(s["I"])
        theta = _modulus(s["theta"], [f], I, s["j"], False, c)
        theta_hat = _modulus(s["theta_hat"], [f], I, s["j"], True, c)
        idx = SeminormIndex(s["kind"], I, float(s["j"]), s["p"], s["x_point"], theta, theta_hat, s["directions"])
        if s["alternative"]:
            value, ref = seminorm_alternative(f, idx, res), ""
        else:
            r = seminorm_detail(f, idx, res)
            value, ref = r.value, ""
            if r.x_path is not None:
                ref = os.path.join("paths", f"seminorm_{k}.csv")
                _write_path(os.path.join(out, ref), r.x_path, r.u_path, tag)
        rows.append((s["kind"], str(I), s["j"], s["p"], s["x_point"] or "", value, ref, tag))
    write_csv(os.path.join(out, "seminorms.csv"),
              ["kind", "I", "j", "p", "x_point", "value", "path_file", "config_hash"], rows)
    return {"count": len(rows)}


def _write_path(path, x: SampledPath, u: SampledPath | None, tag: str):
    N = x.dim
    header = ["t"] + [f"x{i + 1}" for i in range(N)]
    cols = [x.grid, *x.values.T]
    if u is not None:
        header += ["t_u"] + [f"u{i + 1}" for i in range(N)]
        cols += [u.grid, *u.values.T]
    write_csv(path, header + ["config_hash"], [(*r, tag) for r in zip(*cols)])


def cmd_distance(c, args, out, tag):
    f, g = _field(c["f"]), _field(c["g"])
    cfg = _metric_config(c["metric"], [f, g], c)
    d = metric(f, g, cfg, _resolution(c, args.resolution))
    write_json(os.path.join(out, "distance.json"),
               {"distance": d, "kind": cfg.kind, "terms": len(cfg.indices()), "config_hash": tag})
    return {"distance": d}


def _solver(c, override) -> SolverParams:
    s = dict(c["solver"])
    if override is not None:
        s["h"] = override
    return SolverParams(**s)


def cmd_solve(c, args, out, tag):
    f = _field(c["field"])
    params = _solver(c, args.resolution)
    phi = _history(c["history"], c["history_derivative"], f.dim, params.h)
    tr = solve(f, phi, c["T"], params)
    N = f.dim
    rows = [(t, *x, *d, tag) for t, x, d in zip(tr.grid, tr.values, tr.derivative)]
    write_csv(os.path.join(out, "trajectory.csv"),
              ["t"] + [f"x{i + 1}" for i in range(N)] + [f"dx{i + 1}" for i in range(N)] + ["config_hash"], rows)
    write_json(os.path.join(out, "solve_report.json"), {**tr.report(), "config_hash": tag})
    return {"blow_up": tr.blow_up}


def cmd_hull(c, args, out, tag):
    f = _field(c["field"])
    cfg = _metric_config(c["metric"], [f], c)
    hs = hull_sample(f, c["times"], cfg, _resolution(c, args.resolution), args.workers)
    write_json(os.path.join(out, "hull.json"), {**hs.to_json(), "config_hash": tag})
    return {"size": len(hs.times)}


def cmd_experiment(c, args, out, tag):
    kw = dict(c)
    kw["scenario"] = args.scenario
    kw["resolution"] = _resolution(c, args.resolution)
    kw["solver"] = _solver(c, args.resolution)
    kw["ns"] = tuple(kw["ns"])
    kw["D"] = tuple(tuple(d) for d in kw["D"])
    spec = ExperimentSpec(**kw, seed=args.seed, workers=args.workers)
    rep = run_scenario(spec)
    write_json(os.path.join(out, "report.json"), {**rep.to_json(), "config_hash": tag})
    write_csv(os.path.join(out, "decay.csv"),
              ["n", "field_distance", "data_distance", "solution_error", "norm_kind", "config_hash"],
              [(r["n"], r["field_distance"], r["data_distance"], r["solution_error"], r["norm_kind"], tag)
               for r in rep.decay_rows()])
    return {"ok": rep.ok}


def cmd_selftest(c, args, out, tag):
    from .selftest import run_selftest
    results = run_selftest(seed=args.seed)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}{'' if ok else ': ' + detail}")
    write_json(os.path.join(out, "selftest.json"),
               {"results": [{"name": n, "ok": ok, "detail": d} for n, ok, d in results], "config_hash": tag})
    if not all(ok for _, ok, _ in results):
        raise FloatingPointError("selftest failures")
    return {"passed": len(results)}


COMMANDS = {"bounds": cmd_bounds, "seminorm": cmd_seminorm, "distance": cmd_distance, "solve": cmd_solve,
            "hull": cmd_hull, "experiment": cmd_experiment, "selftest": cmd_selftest}


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError:
        return 2
    start = time.perf_counter()
    try:
        raw = cfgmod.load(args.config)
        c = cfgmod.resolve(args.subcommand, raw)
        if args.workers < 1:
            raise cfgmod.ConfigError("--workers must be >= 1")
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise cfgmod.ConfigError("--seed must be an unsigned 64-bit integer")
        if args.resolution is not None and not args.resolution > 0:
            raise cfgmod.ConfigError("--resolution must be positive")
        effective = {"config": c, "resolution_override": args.resolution}
        if args.subcommand == "experiment":
            effective["scenario"] = args.scenario
        tag = cfgmod.config_hash(args.subcommand, effective, args.seed)
        os.makedirs(args.out, exist_ok=True)
        summary = COMMANDS[args.subcommand](c, args, args.out, tag)
    except VALIDATION as err:
        print(f"cdde: invalid input: {err}", file=sys.stderr)
        return 2
    except (ValueError, *NUMERICAL) as err:
        kind = "invalid input" if isinstance(err, ValueError) and not isinstance(err, NUMERICAL) else \
            "numerical failure"
        print(f"cdde: {kind}: {err}", file=sys.stderr)
        return 2 if kind == "invalid input" else 3
    write_json(os.path.join(args.out, "provenance.json"), {
        "subcommand": args.subcommand, "config": c, "config_hash": tag, "seed": args.seed,
        "workers": args.workers, "resolution_override": args.resolution,
        "scenario": getattr(args, "scenario", None), "summary": summary,
        "versions": {"cdde": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "kernels": kernels.BACKEND},
        "wall_time_s": time.perf_counter() - start,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    })
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
