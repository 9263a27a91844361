"""``reachlab`` command line.

Every subcommand reads one config document (a file path or a built-in demo
name) and writes its artifacts into the output directory only after the whole
computation succeeded. Exit codes: 0 success, 2 invalid config or arguments,
3 runtime failure (blow-up, budget, precondition).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEFAULTS_HELP, DEMOS, ExperimentConfig, load_config
from .errors import ConfigError, ExprError, PreconditionError, ReachLabError
from .expr import parse_expression, state_names
from .integrate import flow_endpoint
from .lab import extremize_functional, integration_slack, joint_sweep, slack_terms, sweep_omega, sweep_state, sweep_time
from .metric import PointCloud, directed_hausdorff, dyadic_dictionary, weak_star_discrepancy
from .reach import convergence_study, reach_with_stats
from .system import PiecewiseConstantControl, square_wave

COMMANDS = ("reach", "hausdorff", "sweep-omega", "sweep-time", "sweep-state", "sweep-joint", "optimize", "converge", "weakstar")


def _jobs_default() -> int:
    env = os.environ.get("REACHLAB_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"REACHLAB_JOBS must be an integer, got {env!r}", field="REACHLAB_JOBS") from None
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachlab",
        description="Reachable-set clouds of control-affine systems and continuity experiments.",
        epilog=DEFAULTS_HELP + ". Built-in configs: " + ", ".join(DEMOS) + ".",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, epilog=DEFAULTS_HELP)
        p.add_argument("--config", required=name != "hausdorff", help="config file or built-in demo name")
        p.add_argument("--out", help="output directory (default: the config's 'output')")
        p.add_argument("--seed", type=int, help="override spec.seed (also seeds sweep-joint)")
        p.add_argument("--t", type=float, help="override the horizon t")
        p.add_argument("--delta", type=float, nargs="+", help="override the experiment deltas")
        p.add_argument("--jobs", type=int, help="worker threads (default: $REACHLAB_JOBS or CPU count)")
        p.add_argument("--dump-clouds", action="store_true", help="also write every compared cloud")
        if name == "hausdorff":
            p.add_argument("--a", help="first cloud CSV (default: cloud of --config)")
            p.add_argument("--b", required=True, help="second cloud CSV")
    return parser


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _omega_dict(omega) -> dict:
    out = {"kind": type(omega).__name__.lower()}
    for key, value in vars(omega).items():
        out[key] = np.asarray(value).tolist()
    return out


def _summary(cfg: ExperimentConfig | None, command: str, results: dict) -> str:
    body = {"command": command, "results": results}
    if cfg is not None:
        body.update(
            config=cfg.source,
            system=cfg.system.to_strings(),
            omega=_omega_dict(cfg.omega),
            x0=list(cfg.x0),
            t=cfg.t,
            spec=cfg.spec.to_dict(),
        )
    # the timestamp is the only nondeterministic field and lives under meta
    body["meta"] = {"timestamp": datetime.now(timezone.utc).isoformat(), "version": __version__}
    return _dumps(body)


def _table(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _cloud_files(clouds: dict) -> dict:
    return {f"clouds/{name}.csv": c.to_csv() for name, c in sorted(clouds.items())}


# -- subcommands; each returns {relative path: text} ---------------------------


def _cmd_reach(cfg, args, jobs):
    cloud, stats = reach_with_stats(cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.spec, jobs=jobs)
    integ = integration_slack(cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.spec)
    terms = slack_terms(cfg.system, cfg.t, [cfg.omega], cfg.spec, [cloud], integ)
    results = {"points": len(cloud), "segments": stats.segments, "net_size": stats.net_size, "slack": terms}
    return {"cloud.csv": cloud.to_csv(), "summary.json": _summary(cfg, "reach", results)}


def _read_cloud(path, flag):
    try:
        return PointCloud.read_csv(path)
    except (OSError, ValueError, IndexError) as exc:
        raise ConfigError(f"cannot read cloud {path}: {exc}", field=flag) from None


def _cmd_hausdorff(cfg, args, jobs):
    files = {}
    if args.a:
        A = _read_cloud(args.a, "--a")
    elif cfg is not None:
        A = reach_with_stats(cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.spec, jobs=jobs)[0]
        files["cloud.csv"] = A.to_csv()
    else:
        raise ConfigError("either --a or --config is required", field="--a")
    B = _read_cloud(args.b, "--b")
    if A.dim != B.dim:
        raise ConfigError(f"clouds have dimensions {A.dim} and {B.dim}", field="--b")
    ab, ba = directed_hausdorff(A, B), directed_hausdorff(B, A)
    results = {"hausdorff": max(ab, ba), "dir_ab": ab, "dir_ba": ba, "points_a": len(A), "points_b": len(B)}
    files["summary.json"] = _summary(cfg, "hausdorff", results)
    return files


def _sweep_files(cfg, command, report, dump):
    files = {"rows.csv": report.rows_csv(), "verdict.json": report.verdict_json()}
    results = {"kind": report.kind, "rows": len(report.rows), "passed": report.verdict["passed"], "info": report.info}
    files["summary.json"] = _summary(cfg, command, results)
    if dump:
        files.update(_cloud_files(report.clouds))
    return files


def _cmd_sweep_omega(cfg, args, jobs):
    rep = sweep_omega(cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.experiment.deltas_for("omega"), cfg.spec, jobs, args.dump)
    return _sweep_files(cfg, "sweep-omega", rep, args.dump)


def _cmd_sweep_time(cfg, args, jobs):
    rep = sweep_time(cfg.system, cfg.x0, cfg.t, cfg.experiment.deltas_for("time"), cfg.omega, cfg.spec, jobs, args.dump)
    return _sweep_files(cfg, "sweep-time", rep, args.dump)


def _cmd_sweep_state(cfg, args, jobs):
    rep = sweep_state(
        cfg.system, cfg.t, cfg.omega, cfg.x0, cfg.experiment.deltas_for("state"), cfg.spec,
        probes=cfg.experiment.probes, jobs=jobs, keep_clouds=args.dump,
    )
    return _sweep_files(cfg, "sweep-state", rep, args.dump)


def _cmd_sweep_joint(cfg, args, jobs):
    rep = joint_sweep(
        cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.experiment.deltas_for("joint"), cfg.spec,
        seed=cfg.spec.seed, jobs=jobs, keep_clouds=args.dump,
    )
    return _sweep_files(cfg, "sweep-joint", rep, args.dump)


def _cmd_optimize(cfg, args, jobs):
    try:
        J = parse_expression(cfg.experiment.J, state_names(cfg.system.n))
    except ExprError as exc:
        raise ConfigError(f"bad functional: {exc}", field="experiment.J") from None
    cloud = reach_with_stats(cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.spec, jobs=jobs)[0]
    ext = extremize_functional(J, cloud)
    results = {
        "J": cfg.experiment.J,
        "points": len(cloud),
        "min": ext.min_value,
        "argmin": ext.argmin.tolist(),
        "max": ext.max_value,
        "argmax": ext.argmax.tolist(),
    }
    return {"cloud.csv": cloud.to_csv(), "summary.json": _summary(cfg, "optimize", results)}


def _cmd_converge(cfg, args, jobs):
    study = convergence_study(cfg.system, cfg.x0, cfg.t, cfg.omega, cfg.spec, cfg.experiment.levels, jobs=jobs)
    rows = []
    for (level, gap), s in zip(study.gaps, study.specs[1:]):
        rows.append([level, s.switches, s.k, float(s.h), float(s.r), float(gap)])
    within = study.final_gap <= 2 * study.final_resolution
    verdict = {
        "strictly_decreasing": study.strictly_decreasing,
        "final_gap": study.final_gap,
        "final_resolution": study.final_resolution,
        "final_within_two_resolutions": within,
        "passed": bool(study.strictly_decreasing is not False and within),
    }
    results = {"levels": len(study.gaps), "passed": verdict["passed"]}
    return {
        "rows.csv": _table(["level", "N", "k", "h", "r", "gap"], rows),
        "verdict.json": _dumps({"kind": "converge", "verdict": verdict}),
        "summary.json": _summary(cfg, "converge", results),
    }


def _cmd_weakstar(cfg, args, jobs):
    m, t = cfg.system.m, cfg.t
    zero = PiecewiseConstantControl.constant(np.zeros(m), t, np.zeros(m))
    if not zero.contained_in(cfg.omega, 1e-12):
        raise PreconditionError("weakstar needs 0 in the control range")
    dictionary = dyadic_dictionary(m, t, cfg.experiment.dictionary_depth)
    base = flow_endpoint(cfg.system, cfg.x0, zero, t, cfg.spec.h)
    rows, prev = [], None
    for k in cfg.experiment.switches:
        u = square_wave(k, horizon=t, m=m)
        if not u.contained_in(cfg.omega, 1e-12):
            raise PreconditionError(f"square wave with amplitude 1 leaves the control range (k={k})")
        disc = weak_star_discrepancy(u, zero, dictionary)
        dist = float(np.linalg.norm(flow_endpoint(cfg.system, cfg.x0, u, t, cfg.spec.h) - base))
        shrink = prev / dist if prev is not None and dist > 0 else (math.inf if prev is not None else math.nan)
        rows.append([k, float(disc), dist, float(shrink)])
        prev = dist
    discs = [r[1] for r in rows]
    shrinks = [r[3] for r in rows[1:]]
    verdict = {
        "discrepancy_nonincreasing": all(discs[i + 1] <= discs[i] for i in range(len(discs) - 1)),
        "min_shrink": min(shrinks) if shrinks else None,
        "shrink_at_least_1_5": all(s >= 1.5 for s in shrinks),
    }
    verdict["passed"] = verdict["discrepancy_nonincreasing"] and verdict["shrink_at_least_1_5"]
    return {
        "rows.csv": _table(["switches", "discrepancy", "endpoint_distance", "shrink"], rows),
        "verdict.json": _dumps({"kind": "weakstar", "verdict": verdict}),
        "summary.json": _summary(cfg, "weakstar", {"passed": verdict["passed"]}),
    }


HANDLERS = {
    "reach": _cmd_reach,
    "hausdorff": _cmd_hausdorff,
    "sweep-omega": _cmd_sweep_omega,
    "sweep-time": _cmd_sweep_time,
    "sweep-state": _cmd_sweep_state,
    "sweep-joint": _cmd_sweep_joint,
    "optimize": _cmd_optimize,
    "converge": _cmd_converge,
    "weakstar": _cmd_weakstar,
}


def _write_all(out: Path, files: dict) -> None:
    for rel, text in files.items():
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        tmp.replace(path)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.dump = args.dump_clouds
    try:
        cfg = None
        if args.config is not None:
            cfg = load_config(args.config).with_overrides(seed=args.seed, t=args.t, deltas=args.delta)
            args.dump = args.dump or cfg.experiment.dump_clouds
        jobs = args.jobs if args.jobs is not None else _jobs_default()
        if jobs < 1:
            raise ConfigError("--jobs must be >= 1", field="--jobs")
        out = Path(args.out or (cfg.output if cfg else "out"))
        files = HANDLERS[args.command](cfg, args, jobs)
    except ConfigError as exc:
        print(f"reachlab: config error: {exc}", file=sys.stderr)
        return 2
    except (ReachLabError, ArithmeticError, ValueError, OSError) as exc:
        print(f"reachlab: {args.command} failed: {exc}", file=sys.stderr)
        return 3
    try:
        _write_all(out, files)
    except OSError as exc:
        print(f"reachlab: cannot write artifacts to {out}: {exc}", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
