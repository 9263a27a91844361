"""Continuity experiments on reachable clouds and functional extremization.

Each sweep perturbs one input of ``(t, x, omega) -> R_{<=t, omega}(x)`` by a
list of sizes delta and tabulates Hausdorff distances between the clouds.
Verdicts are trends checked against an explicit slack budget; they are pure
functions of the emitted rows so they can be recomputed from ``rows.csv``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .expr import ExprAst, eval_expression
from .integrate import richardson_error
from .metric import PointCloud, directed_hausdorff, hausdorff, within_neighborhood
from .omega import (
    Ball,
    Box,
    OmegaSet,
    direction_net,
    omega_contains,
    omega_hausdorff,
    omega_homothety,
    omega_inflate,
    omega_net,
    omega_net_mesh,
    omega_radius,
)
from .reach import ReachSpec, reachable_cloud
from .system import ControlAffineSystem, PiecewiseConstantControl

BASE_COLUMNS = ("delta", "rho_h", "dir_ab", "dir_ba", "slack")
EXTRA_COLUMNS = {
    "omega": (),
    "time": ("speed_bound", "nest"),
    "state": (),
    "joint": ("rho_x", "rho_omega", "rho_t"),
}
FP_TOL = 1e-12


@dataclass
class SweepRow:
    delta: float
    rho_h: float
    dir_ab: float
    dir_ba: float
    slack: float
    extra: dict = field(default_factory=dict)
    slack_terms: dict = field(default_factory=dict)


@dataclass
class SweepReport:
    kind: str
    rows: list
    verdict: dict
    info: dict = field(default_factory=dict)
    clouds: dict = field(default_factory=dict, repr=False)

    @property
    def columns(self) -> tuple:
        return BASE_COLUMNS + EXTRA_COLUMNS[self.kind]

    def rows_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            values = [row.delta, row.rho_h, row.dir_ab, row.dir_ba, row.slack]
            values += [row.extra[c] for c in EXTRA_COLUMNS[self.kind]]
            writer.writerow([repr(float(v)) for v in values])
        return buf.getvalue()

    def verdict_json(self) -> str:
        payload = {
            "kind": self.kind,
            "verdict": self.verdict,
            "info": self.info,
            "slack_terms": [{"delta": r.delta, **r.slack_terms} for r in self.rows],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def parse_rows_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: float(v) for k, v in row.items()} for row in reader]


# -- slack budget -------------------------------------------------------------


def _max_field_norm(system: ControlAffineSystem, clouds: Sequence[PointCloud]) -> float:
    worst = 0.0
    for c in clouds:
        F = system.fields_batch(c.points)
        worst = max(worst, float(np.max(np.sqrt(np.sum(F * F, axis=(1, 2))))))
    return worst


def _probe_controls(net: np.ndarray, switches: int, horizon: float) -> list:
    picks = np.unique(np.linspace(0, net.shape[0] - 1, min(5, net.shape[0])).astype(int))
    controls = [PiecewiseConstantControl.constant(net[i], horizon) for i in picks]
    if net.shape[0] > 1 and switches > 1:
        seq = np.array([net[0] if j % 2 == 0 else net[-1] for j in range(switches)])
        controls.append(PiecewiseConstantControl.uniform(seq, horizon))
    return controls


def integration_slack(system, x0, t: float, omega: OmegaSet, spec: ReachSpec) -> float:
    """Richardson estimate of the RK4 global error at step ``spec.h`` on a few controls."""
    net = omega_net(omega, spec.k)
    return richardson_error(system, x0, _probe_controls(net, spec.switches, t), t, min(spec.h, t))


def slack_terms(
    system: ControlAffineSystem,
    horizon: float,
    omegas: Sequence[OmegaSet],
    spec: ReachSpec,
    clouds: Sequence[PointCloud],
    integration: float,
) -> dict:
    """Itemized slack: snapping of both clouds, RK4 error, and control-net mesh drift."""
    n = clouds[0].dim
    mesh = max(omega_net_mesh(o, omega_net(o, spec.k)) for o in omegas)
    terms = {
        "dedup": spec.r * math.sqrt(n),
        "integration": integration,
        "net": mesh * horizon * _max_field_norm(system, clouds),
    }
    terms["total"] = terms["dedup"] + terms["integration"] + terms["net"]
    return terms


# -- perturbations ------------------------------------------------------------


def outward(omega: OmegaSet, delta: float) -> OmegaSet:
    """Superset at Hausdorff distance delta (box bounds grow by delta/sqrt(m))."""
    if delta == 0:
        return omega
    if isinstance(omega, Box):
        return omega_inflate(omega, delta / math.sqrt(omega.dim))
    if isinstance(omega, Ball):
        return omega_inflate(omega, delta)
    R = omega_radius(omega)
    return omega if R == 0 else omega_homothety(omega, 1.0 + delta / R)


def inward(omega: OmegaSet, delta: float) -> OmegaSet:
    """Homothetic shrink toward the centroid, at Hausdorff distance at most delta."""
    R = omega_radius(omega)
    if delta == 0 or R == 0:
        return omega
    return omega_homothety(omega, max(0.0, 1.0 - delta / R))


def _checked_perturbation(omega: OmegaSet, other: OmegaSet, delta: float) -> OmegaSet:
    d = omega_hausdorff(omega, other)
    if d > delta * (1 + 1e-9) + FP_TOL:
        raise PreconditionError(f"perturbed range is {d!r} away, more than delta={delta!r}")
    return other


def _map_rows(fn, deltas, jobs: int):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(fn, deltas))
    else:
        rows = [fn(d) for d in deltas]
    return sorted(rows, key=lambda r: r.delta)


def _check_deltas(deltas) -> list:
    deltas = [float(d) for d in deltas]
    if not deltas or any(d < 0 or not math.isfinite(d) for d in deltas):
        raise ValueError("deltas must be a nonempty list of finite values >= 0")
    return deltas


# -- verdicts (pure functions of rows) -----------------------------------------


def _nonincreasing_in_delta(rows, slack_key="slack") -> bool:
    # rows sorted by delta ascending: rho must not drop as delta grows, beyond slack
    return all(rows[i]["rho_h"] <= rows[i + 1]["rho_h"] + rows[i][slack_key] + FP_TOL for i in range(len(rows) - 1))


def _strict(rows) -> bool:
    return all(rows[i]["rho_h"] < rows[i + 1]["rho_h"] for i in range(len(rows) - 1))


def omega_verdict(rows: list[dict]) -> dict:
    """Trend plus empirical modulus C = rho(delta_max)/delta_max checked at delta_min."""
    positive = [r for r in rows if r["delta"] > 0]
    C = positive[-1]["rho_h"] / positive[-1]["delta"] if positive else 0.0
    first = positive[0] if positive else rows[0]
    within = first["rho_h"] <= C * first["delta"] + first["slack"] + FP_TOL
    trend = _nonincreasing_in_delta(rows)
    return {
        "nonincreasing_up_to_slack": trend,
        "strictly_decreasing": _strict(rows),
        "empirical_modulus": C,
        "final_within_modulus": within,
        "passed": trend and within,
    }


def time_verdict(rows: list[dict], resolution: float) -> dict:
    trend = _nonincreasing_in_delta(rows)
    bounded = all(r["rho_h"] <= r["speed_bound"] + FP_TOL for r in rows)
    nested = all(r["nest"] <= resolution + FP_TOL for r in rows)
    return {
        "nonincreasing_up_to_slack": trend,
        "nonincreasing": all(rows[i]["rho_h"] <= rows[i + 1]["rho_h"] + FP_TOL for i in range(len(rows) - 1)),
        "bounded_by_speed": bounded,
        "nested_within_resolution": nested,
        "passed": trend and bounded and nested,
    }


def state_verdict(rows: list[dict]) -> dict:
    trend = _nonincreasing_in_delta(rows)
    return {"nonincreasing_up_to_slack": trend, "strictly_decreasing": _strict(rows), "passed": trend}


def joint_verdict(rows: list[dict]) -> dict:
    violations = sum(
        1 for r in rows if r["rho_h"] > r["rho_x"] + r["rho_omega"] + r["rho_t"] + r["slack"] + FP_TOL
    )
    return {"triangle_violations": violations, "passed": violations == 0}


def _row_dicts(report_rows, kind) -> list[dict]:
    out = []
    for r in report_rows:
        d = {"delta": r.delta, "rho_h": r.rho_h, "dir_ab": r.dir_ab, "dir_ba": r.dir_ba, "slack": r.slack}
        d.update({c: r.extra[c] for c in EXTRA_COLUMNS[kind]})
        out.append(d)
    return out


def verdict_from_csv(kind: str, text: str, resolution: float | None = None) -> dict:
    """Recompute a verdict from an emitted ``rows.csv``."""
    rows = parse_rows_csv(text)
    if kind == "omega":
        return omega_verdict(rows)
    if kind == "time":
        return time_verdict(rows, resolution)
    if kind == "state":
        return state_verdict(rows)
    if kind == "joint":
        return joint_verdict(rows)
    raise ValueError(f"unknown sweep kind {kind!r}")


# -- sweeps -------------------------------------------------------------------


def _distances(a: PointCloud, b: PointCloud) -> tuple[float, float, float]:
    ab, ba = directed_hausdorff(a, b), directed_hausdorff(b, a)
    return max(ab, ba), ab, ba


def sweep_omega(
    system: ControlAffineSystem,
    x0,
    t: float,
    omega: OmegaSet,
    deltas: Sequence[float],
    spec: ReachSpec,
    jobs: int = 1,
    keep_clouds: bool = False,
) -> SweepReport:
    """Perturb the control range outward and inward by each delta.

    ``rho_h`` is the larger Hausdorff distance of the two perturbations;
    ``dir_ab`` measures base-in-perturbed and ``dir_ba`` perturbed-in-base.
    """
    deltas = _check_deltas(deltas)
    base = reachable_cloud(system, x0, t, omega, spec)
    integ = integration_slack(system, x0, t, omega, spec)
    clouds = {"base": base}

    def row(delta):
        dists, members = [], []
        for label, pert in (("out", outward(omega, delta)), ("in", inward(omega, delta))):
            pert = _checked_perturbation(omega, pert, delta)
            cloud = base if pert is omega else reachable_cloud(system, x0, t, pert, spec)
            if keep_clouds:
                clouds[f"delta{delta!r}_{label}"] = cloud
            dists.append(_distances(base, cloud))
            members.append((pert, cloud))
        terms = slack_terms(system, t, [omega] + [p for p, _ in members], spec, [base] + [c for _, c in members], integ)
        return SweepRow(
            delta,
            max(d[0] for d in dists),
            max(d[1] for d in dists),
            max(d[2] for d in dists),
            terms["total"],
            slack_terms=terms,
        )

    rows = _map_rows(row, deltas, jobs)
    verdict = omega_verdict(_row_dicts(rows, "omega"))
    return SweepReport("omega", rows, verdict, {"t": t, "spec": spec.to_dict()}, clouds)


def sweep_time(
    system: ControlAffineSystem,
    x0,
    t: float,
    deltas: Sequence[float],
    omega: OmegaSet,
    spec: ReachSpec,
    jobs: int = 1,
    keep_clouds: bool = False,
) -> SweepReport:
    """Compare R_{<=t} with R_{<=t+delta} and R_{<=t-delta} on one shared switching grid.

    ``speed_bound`` is max|rhs| * delta + slack, with the speed taken over the
    largest cloud and all net values. ``nest`` is the directed distance from
    the shorter-horizon cloud into the base cloud.
    """
    deltas = _check_deltas(deltas)
    T = t + max(deltas)
    base = reachable_cloud(system, x0, t, omega, spec, partition_horizon=T)
    longest = reachable_cloud(system, x0, T, omega, spec, partition_horizon=T)
    net = omega_net(omega, spec.k)
    P = longest.points
    speed = 0.0
    for w in net:
        v = system.rhs_batch(P, w)
        speed = max(speed, float(np.max(np.sqrt(np.sum(v * v, axis=1)))))
    integ = integration_slack(system, x0, T, omega, spec)
    clouds = {"base": base}

    def row(delta):
        if delta == 0:
            terms = slack_terms(system, t, [omega], spec, [base], integ)
            return SweepRow(0.0, 0.0, 0.0, 0.0, terms["total"], {"speed_bound": terms["total"], "nest": 0.0}, terms)
        dists, nest = [], 0.0
        compared = [base]
        for s in (t + delta, t - delta):
            if s <= 0:
                continue
            cloud = longest if s == T else reachable_cloud(system, x0, s, omega, spec, partition_horizon=T)
            if keep_clouds:
                clouds[f"s{s!r}"] = cloud
            compared.append(cloud)
            dists.append(_distances(base, cloud))
            if s < t:
                nest = directed_hausdorff(cloud, base)
        terms = slack_terms(system, t + delta, [omega], spec, compared, integ)
        extra = {"speed_bound": speed * delta + terms["total"], "nest": nest}
        return SweepRow(
            delta, max(d[0] for d in dists), max(d[1] for d in dists), max(d[2] for d in dists), terms["total"], extra, terms
        )

    rows = _map_rows(row, deltas, jobs)
    verdict = time_verdict(_row_dicts(rows, "time"), spec.r)
    info = {"t": t, "partition_horizon": T, "max_speed": speed, "spec": spec.to_dict()}
    return SweepReport("time", rows, verdict, info, clouds)


def probe_points(x0, delta: float, probes: int, seed: int = 0) -> np.ndarray:
    """Points at distance exactly delta from x0 along the shared direction net."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    dirs = direction_net(x0.shape[0], probes, seed)
    if dirs.shape[0] > probes:
        dirs = dirs[:probes]
    return x0 + delta * dirs


def sweep_state(
    system: ControlAffineSystem,
    t: float,
    omega: OmegaSet,
    x0,
    deltas: Sequence[float],
    spec: ReachSpec,
    probes: int = 8,
    jobs: int = 1,
    keep_clouds: bool = False,
) -> SweepReport:
    """Worst Hausdorff distance over probe initial states at distance delta from x0."""
    deltas = _check_deltas(deltas)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    base = reachable_cloud(system, x0, t, omega, spec)
    integ = integration_slack(system, x0, t, omega, spec)
    clouds = {"base": base}

    def row(delta):
        if delta == 0:
            terms = slack_terms(system, t, [omega], spec, [base], integ)
            return SweepRow(0.0, 0.0, 0.0, 0.0, terms["total"], slack_terms=terms)
        dists, compared = [], [base]
        for i, y in enumerate(probe_points(x0, delta, probes, spec.seed)):
            cloud = reachable_cloud(system, y, t, omega, spec)
            if keep_clouds:
                clouds[f"delta{delta!r}_probe{i}"] = cloud
            compared.append(cloud)
            dists.append(_distances(base, cloud))
        terms = slack_terms(system, t, [omega], spec, compared, integ)
        return SweepRow(
            delta, max(d[0] for d in dists), max(d[1] for d in dists), max(d[2] for d in dists), terms["total"], slack_terms=terms
        )

    rows = _map_rows(row, deltas, jobs)
    return SweepReport("state", rows, state_verdict(_row_dicts(rows, "state")), {"t": t, "probes": probes, "spec": spec.to_dict()}, clouds)


def joint_sweep(
    system: ControlAffineSystem,
    x0,
    t: float,
    omega: OmegaSet,
    deltas: Sequence[float],
    spec: ReachSpec,
    seed: int = 0,
    jobs: int = 1,
    keep_clouds: bool = False,
) -> SweepReport:
    """Perturb t, x and omega together and split the distance along the three axes.

    For perturbed ``(t', x', omega')`` the row holds
    ``rho(R_{t',omega'}(x'), R_{t,omega}(x))`` together with
    ``rho_x = rho(R_{t',omega'}(x'), R_{t',omega'}(x))``,
    ``rho_omega = rho(R_{t',omega'}(x), R_{t',omega}(x))`` and
    ``rho_t = rho(R_{t',omega}(x), R_{t,omega}(x))``. The direction of each
    perturbation is drawn from a generator seeded with ``seed``.
    """
    deltas = _check_deltas(deltas)
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    T = t + max(deltas)
    rng = np.random.default_rng(seed)
    dirs = direction_net(x0.shape[0], 16, seed)
    plan = []
    for delta in deltas:
        sign = 1.0 if (rng.random() < 0.5 or t - delta <= 0) else -1.0
        plan.append((delta, t + sign * delta, dirs[rng.integers(dirs.shape[0])], bool(rng.random() < 0.5)))
    base = reachable_cloud(system, x0, t, omega, spec, partition_horizon=T)
    integ = integration_slack(system, x0, T, omega, spec)
    clouds = {"base": base}

    def row(item):
        delta, tp, d, grow = item
        if delta == 0:
            terms = slack_terms(system, t, [omega], spec, [base], integ)
            extra = {"rho_x": 0.0, "rho_omega": 0.0, "rho_t": 0.0}
            return SweepRow(0.0, 0.0, 0.0, 0.0, terms["total"], extra, terms)
        op = _checked_perturbation(omega, outward(omega, delta) if grow else inward(omega, delta), delta)
        xp = x0 + delta * d
        A = reachable_cloud(system, xp, tp, op, spec, partition_horizon=T)
        B = reachable_cloud(system, x0, tp, op, spec, partition_horizon=T)
        C = reachable_cloud(system, x0, tp, omega, spec, partition_horizon=T)
        if keep_clouds:
            clouds.update({f"delta{delta!r}_joint": A, f"delta{delta!r}_x": B, f"delta{delta!r}_omega": C})
        rho, ab, ba = _distances(A, base)
        extra = {"rho_x": hausdorff(A, B), "rho_omega": hausdorff(B, C), "rho_t": hausdorff(C, base)}
        terms = slack_terms(system, max(t, tp), [omega, op], spec, [base, A, B, C], integ)
        info = {"t_perturbed": tp, "x_perturbed": xp.tolist(), "omega_outward": grow}
        return SweepRow(delta, rho, ab, ba, terms["total"], extra, {**terms, **info})

    rows = _map_rows(row, plan, jobs)
    info = {"t": t, "partition_horizon": T, "seed": seed, "spec": spec.to_dict()}
    return SweepReport("joint", rows, joint_verdict(_row_dicts(rows, "joint")), info, clouds)


# -- extremes of functionals -------------------------------------------------


@dataclass(frozen=True)
class Extremes:
    min_value: float
    argmin: np.ndarray
    max_value: float
    argmax: np.ndarray


def extremize_functional(J: ExprAst, cloud: PointCloud) -> Extremes:
    """Exact min and max of ``J`` over the cloud; ties go to the lexicographically smallest point."""
    pts = cloud.points
    order = np.lexsort(pts.T[::-1])
    names = [f"x{j}" for j in range(pts.shape[1])]
    lo = hi = None
    for i in order:
        value = eval_expression(J, dict(zip(names, pts[i].tolist())))
        if lo is None or value < lo[0]:
            lo = (value, i)
        if hi is None or value > hi[0]:
            hi = (value, i)
    return Extremes(lo[0], pts[lo[1]].copy(), hi[0], pts[hi[1]].copy())


def monotonicity_check(
    system: ControlAffineSystem,
    x0,
    t: float,
    omega_small: OmegaSet,
    omega_large: OmegaSet,
    spec: ReachSpec,
) -> bool:
    """Whether the cloud for the smaller range sits inside the larger one's, up to slack.

    Raises:
        PreconditionError: some net point of ``omega_small`` lies outside
            ``omega_large``.
    """
    for p in omega_net(omega_small, spec.k):
        if not omega_contains(omega_large, p, 1e-12):
            raise PreconditionError(f"control value {p.tolist()} of the first range is outside the second")
    small = reachable_cloud(system, x0, t, omega_small, spec)
    large = reachable_cloud(system, x0, t, omega_large, spec)
    integ = integration_slack(system, x0, t, omega_large, spec)
    terms = slack_terms(system, t, [omega_large], spec, [small, large], integ)
    return within_neighborhood(small, large, terms["total"])
