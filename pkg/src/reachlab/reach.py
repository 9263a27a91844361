"""Point-cloud approximations of reachable sets R_{<=t}(x) from step-function controls.

Controls switch on a uniform partition of ``[0, T]`` into ``N`` pieces and
take values in ``omega_net(omega, k)``. Every state on the RK4 grid enters the
cloud, so the cloud samples the union over all times ``s <= t``.

Exhaustive enumeration walks the partition piece by piece. At each switching
time the frontier of distinct states is deduplicated (coincident states have
identical futures), which keeps exhaustive mode tractable for systems whose
reachable states coincide, such as integrators.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .errors import BlowUpError, BudgetExceededError, DimensionError
from .integrate import integrate_constant, time_grid
from .metric import PointCloud, hausdorff
from .omega import OmegaSet, omega_net
from .system import ControlAffineSystem

MODES = ("exhaustive", "random")


@dataclass(frozen=True)
class ReachSpec:
    """Finite parameterization of step-function controls.

    Attributes:
        switches: number N of equal control pieces on [0, T].
        k: value resolution handed to ``omega_net``.
        h: RK4 step.
        r: snapping resolution of the output cloud; 0 keeps exact states.
        mode: "exhaustive" or "random".
        seed: generator seed for random mode.
        samples: number of random control sequences.
        budget: cap on integrated trajectory segments.
        merge: grid on which frontier states are identified at switching
            times; 0 merges only bit-identical states.
    """

    switches: int = 2
    k: int = 4
    h: float = 0.01
    r: float = 0.005
    mode: str = "exhaustive"
    seed: int = 0
    samples: int = 10_000
    budget: int = 2_000_000
    merge: float = 1e-9

    def __post_init__(self):
        if self.switches < 1:
            raise ValueError("switch count N must be >= 1")
        if self.k < 1:
            raise ValueError("value resolution k must be >= 1")
        if not self.h > 0:
            raise ValueError("integration step h must be positive")
        if self.r < 0 or self.merge < 0:
            raise ValueError("resolutions must be >= 0")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.samples < 1 or self.budget < 1:
            raise ValueError("samples and budget must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def refine(spec: ReachSpec) -> ReachSpec:
    """Next level: twice the pieces, one more value level, half the step and resolution."""
    return replace(spec, switches=2 * spec.switches, k=spec.k + 1, h=spec.h / 2, r=spec.r / 2)


@dataclass
class ReachStats:
    segments: int = 0
    frontier_sizes: list = None
    net_size: int = 0
    pieces_used: int = 0


def _cell_keys(X: np.ndarray, r: float) -> np.ndarray:
    # + 0.0 folds -0.0 into 0.0 so byte-level dedup agrees with numeric equality
    return (np.round(X / r) if r > 0 else X) + 0.0


def _unique_rows(A: np.ndarray, return_index: bool = False):
    A = np.ascontiguousarray(A)
    view = A.view(np.dtype((np.void, A.dtype.itemsize * A.shape[1]))).reshape(-1)
    _, idx = np.unique(view, return_index=True)
    idx.sort()
    return (A[idx], idx) if return_index else A[idx]


def _lexsorted(A: np.ndarray) -> np.ndarray:
    return A[np.lexsort(A.T[::-1])]


def _run_piece(system, X, U, times, r):
    """Integrate one piece; returns (unique cell keys of all grid states, end states)."""
    keys = []
    for Y in integrate_constant(system, X, U, times):
        keys.append(_unique_rows(_cell_keys(Y, r)))
        X = Y
    return _unique_rows(np.vstack(keys)), X


def _piece_bounds(grid: np.ndarray, a: float, b: float) -> np.ndarray:
    ia = int(np.argmin(np.abs(grid - a)))
    ib = int(np.argmin(np.abs(grid - b)))
    return grid[ia : ib + 1]


def reach_with_stats(
    system: ControlAffineSystem,
    x0,
    t: float,
    omega: OmegaSet,
    spec: ReachSpec,
    partition_horizon: float | None = None,
    jobs: int = 1,
) -> tuple[PointCloud, ReachStats]:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape[0] != system.n:
        raise DimensionError(f"initial state has dimension {x0.shape[0]}, system expects {system.n}")
    if omega.dim != system.m:
        raise DimensionError(f"control range has dimension {omega.dim}, system expects m={system.m}")
    if not t > 0:
        raise ValueError("horizon t must be positive")
    T = t if partition_horizon is None else float(partition_horizon)
    if t > T * (1 + 1e-12):
        raise ValueError(f"horizon {t!r} exceeds the partition horizon {T!r}")

    net = omega_net(omega, spec.k)
    V = net.shape[0]
    breaks = np.linspace(0.0, T, spec.switches + 1)
    step = min(spec.h, t)
    grid = time_grid(t, step, breaks[1:-1])
    tol = 1e-9 * step
    pieces = [(float(breaks[j]), min(float(breaks[j + 1]), t)) for j in range(spec.switches) if breaks[j] < t - tol]
    stats = ReachStats(frontier_sizes=[], net_size=V, pieces_used=len(pieces))

    if spec.mode == "random":
        if spec.samples > spec.budget:
            raise BudgetExceededError(f"{spec.samples} sampled trajectories exceed the budget {spec.budget}")
        rng = np.random.default_rng(spec.seed)
        choice = rng.integers(0, V, size=(spec.samples, len(pieces)))
        frontier = np.repeat(x0[None, :], spec.samples, axis=0)
        history = np.zeros((spec.samples, 0), dtype=np.int64)
    else:
        frontier = x0[None, :]
        history = np.zeros((1, 0), dtype=np.int64)

    collected = []
    for j, (a, b) in enumerate(pieces):
        times = _piece_bounds(grid, a, b)
        if spec.mode == "random":
            X, U = frontier, net[choice[:, j]]
            hist = np.column_stack([history, choice[:, j]])
        else:
            F = frontier.shape[0]
            stats.segments += F * V
            if stats.segments > spec.budget:
                raise BudgetExceededError(
                    f"exhaustive enumeration needs more than {spec.budget} trajectory segments "
                    f"(piece {j + 1} of {len(pieces)}, {F} frontier states x {V} control values)"
                )
            X = np.repeat(frontier, V, axis=0)
            U = np.tile(net, (F, 1))
            hist = np.column_stack([np.repeat(history, V, axis=0), np.tile(np.arange(V), F)])
        stats.frontier_sizes.append(X.shape[0])
        try:
            keys, ends = _integrate_chunks(system, X, U, times, spec.r, jobs)
        except BlowUpError as exc:
            seq = net[hist[exc.row]] if exc.row is not None else None
            raise BlowUpError(exc.time, f"control sequence {seq.tolist() if seq is not None else '?'}", control=seq) from exc
        collected.append(keys)
        if spec.mode == "random":
            frontier, history = ends, hist
        elif spec.merge > 0:
            _, idx = _unique_rows(np.round(ends / spec.merge) + 0.0, return_index=True)
            frontier, history = ends[idx], hist[idx]
        else:
            frontier, idx = _unique_rows(ends, return_index=True)
            history = hist[idx]
    if spec.mode == "random":
        stats.segments = spec.samples * len(pieces)

    keys = _unique_rows(np.vstack(collected)) if collected else np.zeros((0, system.n))
    pts = keys * spec.r if spec.r > 0 else keys
    pts = _lexsorted(_unique_rows(np.vstack([pts, x0[None, :]]) + 0.0))
    return PointCloud(pts, spec.r), stats


def _integrate_chunks(system, X, U, times, r, jobs):
    if jobs <= 1 or X.shape[0] < 2 * jobs:
        return _run_piece(system, X, U, times, r)
    bounds = np.linspace(0, X.shape[0], jobs + 1).astype(int)
    chunks = [(X[lo:hi], U[lo:hi], lo) for lo, hi in zip(bounds[:-1], bounds[1:])]

    def work(chunk):
        Xc, Uc, offset = chunk
        try:
            return _run_piece(system, Xc, Uc, times, r)
        except BlowUpError as exc:
            raise BlowUpError(exc.time, row=None if exc.row is None else exc.row + offset) from exc

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(work, chunks))
    keys = _unique_rows(np.vstack([k for k, _ in results]))
    ends = np.vstack([e for _, e in results])
    return keys, ends


def reachable_cloud(
    system: ControlAffineSystem,
    x0,
    t: float,
    omega: OmegaSet,
    spec: ReachSpec,
    partition_horizon: float | None = None,
    jobs: int = 1,
) -> PointCloud:
    """Cloud approximating the set of states reachable from ``x0`` within time ``t``.

    ``partition_horizon`` fixes the switching grid on a longer window so that
    clouds for different horizons share controls and integration grid; the
    cloud for a shorter horizon is then a prefix of the longer one.

    Raises:
        BlowUpError: some control sequence drives the state to infinity; the
            error names the time and the sequence.
        BudgetExceededError: enumeration would exceed ``spec.budget``.
    """
    return reach_with_stats(system, x0, t, omega, spec, partition_horizon, jobs)[0]


@dataclass
class ConvergenceStudy:
    specs: list
    gaps: list  # (level, hausdorff(cloud_j, cloud_{j+1}))
    strictly_decreasing: bool | None
    final_resolution: float

    @property
    def final_gap(self) -> float:
        return self.gaps[-1][1]


def convergence_study(
    system: ControlAffineSystem,
    x0,
    t: float,
    omega: OmegaSet,
    spec: ReachSpec,
    levels: int,
    jobs: int = 1,
) -> ConvergenceStudy:
    """Hausdorff gaps between successive refinement levels.

    ``levels`` gaps need ``levels + 1`` clouds. The trend flag is ``None``
    when there is a single gap.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    specs = [spec]
    for _ in range(levels):
        specs.append(refine(specs[-1]))
    clouds = [reachable_cloud(system, x0, t, omega, s, jobs=jobs) for s in specs]
    gaps = [(j, hausdorff(clouds[j], clouds[j + 1])) for j in range(levels)]
    trend = None
    if levels > 1:
        trend = all(gaps[j + 1][1] < gaps[j][1] for j in range(levels - 1))
    return ConvergenceStudy(specs, gaps, trend, specs[-1].r)


def short_time_bound(system: ControlAffineSystem, x0, t: float, omega: OmegaSet, k: int = 4) -> float:
    """sup |rhs(x0, w)| * t over net values w: radius of the cloud for tiny t (to first order)."""
    net = omega_net(omega, k)
    X = np.repeat(np.asarray(x0, dtype=float).reshape(1, -1), net.shape[0], axis=0)
    speeds = np.sqrt(np.sum(system.rhs_batch(X, net) ** 2, axis=1))
    return float(speeds.max()) * t if math.isfinite(t) else math.inf
