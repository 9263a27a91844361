"""Compact convex control ranges: boxes, balls and vertex hulls.

Every operation is a pure function of immutable set objects. Hausdorff
distances between ranges are computed from support functions, which is exact
for compact convex sets up to the resolution of the direction net.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DimensionError, ProjectionError
from .system import PiecewiseConstantControl

HULL_MAX_ITER = 10_000
HULL_TOL = 1e-10
DEFAULT_DIRECTIONS = 4096


def _frozen(arr) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo, hi = _frozen(np.atleast_1d(self.lower)), _frozen(np.atleast_1d(self.upper))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionError("box bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = _frozen(np.atleast_1d(self.center))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("ball center must be a finite vector")
        if not (self.radius >= 0 and math.isfinite(self.radius)):
            raise ValueError(f"ball radius must be finite and >= 0, got {self.radius!r}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self) -> int:
        return self.center.shape[0]


@dataclass(frozen=True, eq=False)
class Hull:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("hull needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise ValueError("hull vertices must be finite")
        object.__setattr__(self, "vertices", _frozen(v))

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]


OmegaSet = Union[Box, Ball, Hull]


def _point(omega: OmegaSet, p) -> np.ndarray:
    p = np.asarray(p, dtype=float).reshape(-1)
    if p.shape[0] != omega.dim:
        raise DimensionError(f"point has dimension {p.shape[0]}, set has dimension {omega.dim}")
    return p


def _same_dim(a: OmegaSet, b: OmegaSet) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


# -- projection and membership ----------------------------------------------


def _affine_minimizer(P: np.ndarray) -> np.ndarray:
    """Weights (summing to 1) of the min-norm point of the affine hull of the rows of P."""
    k = P.shape[0]
    if k == 1:
        return np.ones(1)
    # x = P0 + D^T beta; least squares on D avoids squaring its condition number
    D = P[1:] - P[0]
    beta = np.linalg.lstsq(D.T, -P[0], rcond=None)[0]
    return np.concatenate([[1.0 - beta.sum()], beta])


def _min_norm_point(P: np.ndarray, max_iter: int = HULL_MAX_ITER) -> np.ndarray:
    """Wolfe's minimum-norm-point iteration over convex combinations of the rows of P."""
    scale = max(1.0, float(np.max(np.einsum("ij,ij->i", P, P))))
    j0 = int(np.argmin(np.einsum("ij,ij->i", P, P)))
    S = [j0]
    w = np.array([1.0])
    x = P[j0].copy()
    for _ in range(max_iter):
        dots = P @ x
        j = int(np.argmin(dots))
        xx = float(x @ x)
        # duality gap in distance units: how far P[j] reaches past the plane through x
        if xx == 0.0 or xx - dots[j] <= 1e-13 * math.sqrt(scale * xx) or j in S:
            return x
        S.append(j)
        w = np.append(w, 0.0)
        while True:
            alpha = _affine_minimizer(P[S])
            if np.all(alpha > 1e-14):
                w = alpha
                break
            move = (alpha <= 1e-14) & (w - alpha > 0)
            theta = min(1.0, float(np.min(w[move] / (w[move] - alpha[move])))) if np.any(move) else 1.0
            w = theta * alpha + (1.0 - theta) * w
            keep = w > 1e-14
            S = [s for s, kp in zip(S, keep) if kp]
            w = w[keep]
            w = w / w.sum()
            if len(S) == 1:
                break
        x_new = w @ P[S]
        if x_new @ x_new >= x @ x:
            # no progress: x is optimal to working precision
            return x
        x = x_new
    raise ProjectionError(f"hull projection did not converge within {max_iter} iterations")


def omega_project(omega: OmegaSet, p) -> np.ndarray:
    """Euclidean nearest point of ``omega`` to ``p``."""
    p = _point(omega, p)
    if isinstance(omega, Box):
        return np.clip(p, omega.lower, omega.upper)
    if isinstance(omega, Ball):
        d = p - omega.center
        norm = float(np.linalg.norm(d))
        if norm <= omega.radius:
            return p.copy()
        return omega.center + d * (omega.radius / norm)
    return _min_norm_point(omega.vertices - p) + p


def omega_distance(omega: OmegaSet, p) -> float:
    p = _point(omega, p)
    return float(np.linalg.norm(p - omega_project(omega, p)))


def omega_contains(omega: OmegaSet, p, tol: float = 0.0) -> bool:
    """``dist(p, omega) <= tol``; hulls get an extra 1e-12 relative floor for round-off."""
    if tol < 0:
        raise ValueError("tol must be >= 0")
    p = _point(omega, p)
    if isinstance(omega, Box):
        gap = np.maximum(omega.lower - p, 0.0) + np.maximum(p - omega.upper, 0.0)
        return float(np.linalg.norm(gap)) <= tol
    if isinstance(omega, Ball):
        return float(np.linalg.norm(p - omega.center)) - omega.radius <= tol
    floor = 1e-12 * (1.0 + float(np.max(np.abs(omega.vertices))) + float(np.max(np.abs(p))))
    return omega_distance(omega, p) <= tol + floor


# -- support functions and the Hausdorff metric -----------------------------


def direction_net(dim: int, count: int = DEFAULT_DIRECTIONS, seed: int = 0) -> np.ndarray:
    """Deterministic unit directions in R^dim.

    dim 1: the two signs. dim 2: ``count`` equally spaced angles starting at 0.
    dim 3: +-e_i followed by a Fibonacci sphere. dim > 3: +-e_i followed by
    seeded Gaussian directions.
    """
    if dim < 1 or count < 1:
        raise ValueError("dim and count must be positive")
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        theta = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(theta), np.sin(theta)])
    axes = np.vstack([np.eye(dim), -np.eye(dim)])
    rest = max(count - 2 * dim, 0)
    if dim == 3:
        i = np.arange(rest) + 0.5
        z = 1.0 - 2.0 * i / max(rest, 1)
        rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
        phi = np.pi * (3.0 - math.sqrt(5.0)) * i
        extra = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    else:
        extra = np.random.default_rng(seed).standard_normal((rest, dim))
        extra /= np.linalg.norm(extra, axis=1, keepdims=True)
    return np.vstack([axes, extra])


def support_batch(omega: OmegaSet, D: np.ndarray) -> np.ndarray:
    """Support values for each row of ``D`` (rows need not be unit length)."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    if D.shape[1] != omega.dim:
        raise DimensionError("direction dimension mismatch")
    if isinstance(omega, Box):
        return np.sum(np.maximum(D * omega.lower, D * omega.upper), axis=1)
    if isinstance(omega, Ball):
        return D @ omega.center + omega.radius * np.linalg.norm(D, axis=1)
    return np.max(D @ omega.vertices.T, axis=1)


def omega_support(omega: OmegaSet, d) -> float:
    """h(d) = max over omega of <w, d> for a unit vector ``d``."""
    d = _point(omega, d)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ValueError("support function needs a nonzero direction")
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"direction must be a unit vector, got norm {norm!r}")
    return float(support_batch(omega, d[None, :])[0])


def omega_hausdorff(a: OmegaSet, b: OmegaSet, directions: int = DEFAULT_DIRECTIONS) -> float:
    """Hausdorff distance as the largest support-function gap over a direction net.

    Exact for m = 1. For m >= 2 it can only underestimate; the shortfall shrinks
    with ``directions``.
    """
    _same_dim(a, b)
    D = direction_net(a.dim, directions)
    return float(np.max(np.abs(support_batch(a, D) - support_batch(b, D))))


# -- constructions ----------------------------------------------------------


def omega_inflate(omega: OmegaSet, gamma: float) -> OmegaSet:
    """Convex superset within the gamma-neighborhood scale of ``omega``.

    A ball grows its radius (exact N_gamma). A box grows every bound by gamma,
    which contains N_gamma and exceeds it by at most gamma*(sqrt(m) - 1).
    Hulls are not supported; use a box or ball for inflation experiments.
    """
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    if isinstance(omega, Box):
        return Box(omega.lower - gamma, omega.upper + gamma)
    if isinstance(omega, Ball):
        return Ball(omega.center, omega.radius + gamma)
    raise TypeError("omega_inflate does not support Hull; use a Box or Ball")


def omega_centroid(omega: OmegaSet) -> np.ndarray:
    """Center point used for homotheties (vertex mean for hulls)."""
    if isinstance(omega, Box):
        return 0.5 * (omega.lower + omega.upper)
    if isinstance(omega, Ball):
        return omega.center.copy()
    return omega.vertices.mean(axis=0)


def omega_radius(omega: OmegaSet, center=None) -> float:
    """Largest distance from ``center`` (default: the centroid) to a point of omega."""
    c = omega_centroid(omega) if center is None else _point(omega, center)
    if isinstance(omega, Box):
        far = np.maximum(np.abs(omega.lower - c), np.abs(omega.upper - c))
        return float(np.linalg.norm(far))
    if isinstance(omega, Ball):
        return float(np.linalg.norm(omega.center - c)) + omega.radius
    return float(np.max(np.linalg.norm(omega.vertices - c, axis=1)))


def omega_homothety(omega: OmegaSet, factor: float, center=None) -> OmegaSet:
    """Image of omega under ``w -> c + factor * (w - c)``; convexity is preserved."""
    if factor < 0:
        raise ValueError("homothety factor must be >= 0")
    c = omega_centroid(omega) if center is None else _point(omega, center)
    if isinstance(omega, Box):
        return Box(c + factor * (omega.lower - c), c + factor * (omega.upper - c))
    if isinstance(omega, Ball):
        return Ball(c + factor * (omega.center - c), factor * omega.radius)
    return Hull(c + factor * (omega.vertices - c))


def omega_net(omega: OmegaSet, k: int, include_extreme: bool = True) -> np.ndarray:
    """Finite deterministic subset of omega, sorted lexicographically.

    Box: a (k+1)-point grid per coordinate (corners included), or the k cell
    midpoints when ``include_extreme`` is False. Ball: center plus k rings.
    Hull: all combinations with weights in multiples of 1/k (vertices
    included); without extremes only strictly interior combinations.
    """
    if k < 1:
        raise ValueError("net resolution k must be >= 1")
    if isinstance(omega, Box):
        axes = []
        for lo, hi in zip(omega.lower, omega.upper):
            if lo == hi:
                axes.append(np.array([lo]))
            elif include_extreme:
                axes.append(np.linspace(lo, hi, k + 1))
            else:
                axes.append(lo + (np.arange(k) + 0.5) * ((hi - lo) / k))
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.column_stack([g.reshape(-1) for g in grid])
    elif isinstance(omega, Ball):
        pts = _ball_net(omega, k)
    else:
        pts = _hull_net(omega, k, include_extreme)
    return np.unique(pts, axis=0)


def _ball_net(omega: Ball, k: int) -> np.ndarray:
    c, r, m = omega.center, omega.radius, omega.dim
    if r == 0.0:
        return c[None, :]
    if m == 1:
        return (c[0] + r * np.linspace(-1.0, 1.0, 2 * k + 1))[:, None]
    rows = [c[None, :]]
    if m == 2:
        for j in range(1, k + 1):
            n_ang = 8 * j
            theta = 2.0 * np.pi * np.arange(n_ang) / n_ang
            ring = np.column_stack([np.cos(theta), np.sin(theta)]) * (r * j / k)
            rows.append(c + ring)
    else:
        dirs = direction_net(m, 4 * m, seed=0)
        for j in range(1, k + 1):
            rows.append(c + dirs * (r * j / k))
    return np.vstack(rows)


def _compositions(total: int, parts: int):
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 2 - prev)
        yield out


def _hull_net(omega: Hull, k: int, include_extreme: bool) -> np.ndarray:
    V = np.unique(omega.vertices, axis=0)
    if V.shape[0] == 1:
        return V
    weights = np.array(list(_compositions(k, V.shape[0])), dtype=float)
    if not include_extreme:
        interior = np.all(weights >= 1, axis=1)
        if not np.any(interior):
            return V.mean(axis=0, keepdims=True)
        weights = weights[interior]
    return (weights @ V) / k


def omega_net_mesh(omega: OmegaSet, net: np.ndarray) -> float:
    """Covering radius of ``net`` inside omega: exact for boxes, sampled otherwise."""
    if isinstance(omega, Box):
        half = []
        for j in range(omega.dim):
            vals = np.unique(np.concatenate([net[:, j], [omega.lower[j], omega.upper[j]]]))
            gaps = np.diff(vals)
            edge = max(vals[0] - omega.lower[j], omega.upper[j] - vals[-1], 0.0)
            half.append(max(float(gaps.max()) / 2.0 if gaps.size else 0.0, edge))
        return float(np.linalg.norm(half))
    from .metric import directed_hausdorff_arrays

    dense = omega_net(omega, 24)
    return directed_hausdorff_arrays(dense, np.asarray(net, dtype=float))


def transport_control(u: PiecewiseConstantControl, target: OmegaSet) -> PiecewiseConstantControl:
    """Move every value (and the extension) of ``u`` to its nearest point in ``target``.

    Breakpoints are kept. Each value moves by dist(value, target), which is at
    most the Hausdorff distance between ranges when ``u`` was admissible for
    the source range.
    """
    values = np.array([omega_project(target, c) for c in u.values])
    return PiecewiseConstantControl(u.breakpoints, values, omega_project(target, u.extension))
