"""Hausdorff distances between point clouds and the weak* discrepancy of controls."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionError
from .system import PiecewiseConstantControl


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite nonempty set of states. ``resolution`` is the snapping grid, if any."""

    points: np.ndarray
    resolution: float | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("a point cloud needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{j}" for j in range(self.dim)])
        for row in self.points:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def read_csv(cls, path) -> "PointCloud":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        if header != [f"x{j}" for j in range(len(header))]:
            raise ValueError(f"{path}: header must be x0,...,x(n-1), got {header}")
        return cls(np.array([[float(v) for v in r] for r in body if r], dtype=float).reshape(-1, len(header)))


def _as_points(A) -> np.ndarray:
    if isinstance(A, PointCloud):
        return A.points
    pts = np.asarray(A, dtype=float)
    return pts[:, None] if pts.ndim == 1 else pts


def _check_pair(A: np.ndarray, B: np.ndarray) -> None:
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise ValueError("Hausdorff distance is undefined for an empty cloud")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"cloud dimensions differ: {A.shape[1]} vs {B.shape[1]}")


def _distances_to(a: np.ndarray, B: np.ndarray) -> np.ndarray:
    # canonical per-pair formula shared with the brute-force kernel
    diff = B[:, 0] - a[0]
    acc = diff * diff
    for j in range(1, B.shape[1]):
        diff = B[:, j] - a[j]
        acc = acc + diff * diff
    return np.sqrt(acc)


def directed_hausdorff_brute(A, B) -> float:
    """O(|A||B|) reference: max over a of min over b of |a - b|."""
    A, B = _as_points(A), _as_points(B)
    _check_pair(A, B)
    diff = B[None, :, 0] - A[:, None, 0]
    acc = diff * diff
    for j in range(1, A.shape[1]):
        diff = B[None, :, j] - A[:, None, j]
        acc = acc + diff * diff
    return float(np.max(np.min(np.sqrt(acc), axis=1)))


def directed_hausdorff_arrays(A: np.ndarray, B: np.ndarray) -> float:
    _check_pair(A, B)
    tree = cKDTree(B)
    d, _ = tree.query(A, k=1)
    dmax = float(d.max())
    if dmax == 0.0:
        return 0.0
    # only points whose tree distance is within round-off of the max can be the argmax;
    # their minima are recomputed with the canonical formula so results match brute force bit for bit
    cand = np.flatnonzero(d >= dmax * (1.0 - 1e-9))
    radii = d[cand] * (1.0 + 1e-9) + 1e-300
    best = 0.0
    for i, idx in zip(cand, tree.query_ball_point(A[cand], radii)):
        best = max(best, float(np.min(_distances_to(A[i], B[np.asarray(idx, dtype=int)]))))
    return best


def directed_hausdorff(A, B) -> float:
    """max over a in A of the distance from a to B (k-d tree accelerated, exact)."""
    return directed_hausdorff_arrays(_as_points(A), _as_points(B))


def hausdorff(A, B) -> float:
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))


def within_neighborhood(A, B, eps: float) -> bool:
    """True when A lies in the closed eps-neighborhood of B."""
    if math.isinf(eps) and eps > 0:
        return True
    return directed_hausdorff(A, B) <= eps


def quantize_cloud(A, resolution: float) -> PointCloud:
    """Snap to the grid ``resolution * Z^n`` and drop duplicates.

    Each point moves by at most ``resolution * sqrt(n) / 2``. The result is
    sorted lexicographically.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    keys = np.unique(np.round(_as_points(A) / resolution), axis=0)
    return PointCloud(keys * resolution, resolution)


def dedup_cloud(A) -> PointCloud:
    """Exact-duplicate removal with lexicographic ordering (the zero-resolution limit)."""
    return PointCloud(np.unique(_as_points(A), axis=0), 0.0)


# -- weak* discrepancy --------------------------------------------------------


@dataclass(frozen=True)
class TestFunctionDictionary:
    """Step test functions on a window [0, T], zero outside it."""

    __test__ = False  # not a pytest class

    functions: tuple[PiecewiseConstantControl, ...]

    def __post_init__(self):
        if len(self.functions) == 0:
            raise ValueError("a test-function dictionary needs at least one element")
        dims = {f.m for f in self.functions}
        if len(dims) != 1:
            raise DimensionError("dictionary elements have different dimensions")

    @property
    def m(self) -> int:
        return self.functions[0].m

    def __len__(self) -> int:
        return len(self.functions)


def dyadic_dictionary(m: int, horizon: float, depth: int = 4) -> TestFunctionDictionary:
    """Indicators of ``[j T/2^d, (j+1) T/2^d)`` times each basis vector, for d = 0..depth."""
    funcs = []
    for d in range(depth + 1):
        cells = 2**d
        for j in range(cells):
            a, b = horizon * j / cells, horizon * (j + 1) / cells
            for i in range(m):
                e = np.zeros(m)
                e[i] = 1.0
                bp = [0.0, a, b, horizon] if a > 0 else [0.0, b, horizon]
                vals = [np.zeros(m), e, np.zeros(m)] if a > 0 else [e, np.zeros(m)]
                if b >= horizon:
                    bp, vals = bp[:-1], vals[:-1]
                funcs.append(PiecewiseConstantControl(np.array(bp), np.array(vals), np.zeros(m)))
    return TestFunctionDictionary(tuple(funcs))


def _values_at(u: PiecewiseConstantControl, s: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(u.breakpoints, s, side="right") - 1
    inside = (s >= 0) & (s < u.breakpoints[-1])
    out = np.tile(u.extension, (s.size, 1))
    out[inside] = u.values[idx[inside]]
    return out


def pairing_integral(u: PiecewiseConstantControl, v: PiecewiseConstantControl, x: PiecewiseConstantControl) -> float:
    """Closed-form integral of <u(s) - v(s), x(s)> over x's window [0, T]."""
    T = x.horizon
    cuts = np.concatenate([u.breakpoints, v.breakpoints, x.breakpoints])
    cuts = np.unique(cuts[(cuts >= 0) & (cuts <= T)])
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    lengths = np.diff(cuts)
    integrand = np.sum((_values_at(u, mids) - _values_at(v, mids)) * _values_at(x, mids), axis=1)
    return math.fsum((lengths * integrand).tolist())


def weak_star_discrepancy(
    u: PiecewiseConstantControl, v: PiecewiseConstantControl, dictionary: TestFunctionDictionary
) -> float:
    """max over dictionary elements x of |integral <u - v, x> ds|."""
    if u.m != v.m or u.m != dictionary.m:
        raise DimensionError(f"control dimensions differ: {u.m}, {v.m}, dictionary {dictionary.m}")
    return max(abs(pairing_integral(u, v, x)) for x in dictionary.functions)


def weak_star_ball(
    u: PiecewiseConstantControl,
    candidates: Sequence[PiecewiseConstantControl],
    dictionary: TestFunctionDictionary,
    gamma: float,
) -> list[int]:
    """Indices of candidates inside the subbasic neighborhood W_{u,gamma}(dictionary)."""
    return [i for i, c in enumerate(candidates) if weak_star_discrepancy(u, c, dictionary) < gamma]
