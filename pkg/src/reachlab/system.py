"""Control-affine systems x' = f0(x) + sum_i u_i f_i(x) and step-function controls."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionError
from .expr import ExprAst, eval_expression, lambdify, parse_expression, state_names, to_text


@dataclass(frozen=True, eq=False)
class ControlAffineSystem:
    """Drift ``drift[j]`` and controlled fields ``controlled[i][j]`` over R^n.

    ``controlled[i]`` is the field f_{i+1}; each entry is one component.
    """

    n: int
    m: int
    drift: tuple[ExprAst, ...]
    controlled: tuple[tuple[ExprAst, ...], ...]
    name: str = ""
    _compiled: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise DimensionError(f"state and control dimensions must be positive, got n={self.n}, m={self.m}")
        if len(self.drift) != self.n:
            raise DimensionError(f"drift has {len(self.drift)} components, expected n={self.n}")
        if len(self.controlled) != self.m:
            raise DimensionError(f"{len(self.controlled)} controlled fields given, expected m={self.m}")
        for i, f in enumerate(self.controlled, start=1):
            if len(f) != self.n:
                raise DimensionError(f"field f{i} has {len(f)} components, expected n={self.n}")
        compiled = (
            tuple(lambdify(e) for e in self.drift),
            tuple(tuple(lambdify(e) for e in f) for f in self.controlled),
        )
        object.__setattr__(self, "_compiled", compiled)

    @classmethod
    def from_strings(cls, drift: Sequence[str], controlled: Sequence[Sequence[str]], name: str = ""):
        """Build a system from expression text, e.g. ``from_strings(["x1", "0"], [["0", "1"]])``."""
        n = len(drift)
        names = state_names(n)
        return cls(
            n=n,
            m=len(controlled),
            drift=tuple(parse_expression(s, names) for s in drift),
            controlled=tuple(tuple(parse_expression(s, names) for s in f) for f in controlled),
            name=name,
        )

    def to_strings(self) -> dict:
        return {
            "drift": [to_text(e) for e in self.drift],
            **{f"f{i}": [to_text(e) for e in f] for i, f in enumerate(self.controlled, start=1)},
        }

    def _env(self, X: np.ndarray) -> dict:
        return {f"x{j}": X[:, j] for j in range(self.n)}

    def drift_batch(self, X: np.ndarray) -> np.ndarray:
        env = self._env(X)
        out = np.empty_like(X)
        for j, fn in enumerate(self._compiled[0]):
            out[:, j] = fn(env)
        return out

    def fields_batch(self, X: np.ndarray) -> np.ndarray:
        """Controlled fields at each row of ``X``, shape (B, m, n)."""
        env = self._env(X)
        out = np.empty((X.shape[0], self.m, self.n))
        for i, f in enumerate(self._compiled[1]):
            for j, fn in enumerate(f):
                out[:, i, j] = fn(env)
        return out

    def rhs_batch(self, X: np.ndarray, U: np.ndarray) -> np.ndarray:
        """Right-hand side for a batch: ``X`` is (B, n), ``U`` is (B, m) or (m,)."""
        env = self._env(X)
        U = np.broadcast_to(U, (X.shape[0], self.m))
        out = np.empty_like(X)
        drift, fields = self._compiled
        for j in range(self.n):
            acc = drift[j](env) + U[:, 0] * fields[0][j](env)
            for i in range(1, self.m):
                acc = acc + U[:, i] * fields[i][j](env)
            out[:, j] = acc
        return out


def rhs(system: ControlAffineSystem, x, u) -> np.ndarray:
    """f0(x) + sum_i u_i f_i(x) for a single state, evaluated with scalar arithmetic."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.shape[0] != system.n:
        raise DimensionError(f"state has dimension {x.shape[0]}, system expects {system.n}")
    if u.shape[0] != system.m:
        raise DimensionError(f"control has dimension {u.shape[0]}, system expects {system.m}")
    env = {f"x{j}": float(x[j]) for j in range(system.n)}
    out = np.empty(system.n)
    for j in range(system.n):
        acc = eval_expression(system.drift[j], env)
        for i in range(system.m):
            acc += float(u[i]) * eval_expression(system.controlled[i][j], env)
        out[j] = acc
    return out


@dataclass(frozen=True, eq=False)
class PiecewiseConstantControl:
    """Right-continuous step function: ``values[k]`` holds on ``[breakpoints[k], breakpoints[k+1])``.

    Outside ``[0, breakpoints[-1])`` the control equals ``extension``.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    extension: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        ext = np.asarray(self.extension, dtype=float).reshape(-1)
        if bp.size < 2:
            raise ValueError("a control needs at least one piece")
        if bp[0] != 0.0:
            raise ValueError(f"first breakpoint must be 0, got {bp[0]!r}")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if vals.shape[0] != bp.size - 1:
            raise ValueError(f"{vals.shape[0]} values for {bp.size - 1} pieces")
        if ext.shape[0] != vals.shape[1]:
            raise DimensionError("extension value has the wrong dimension")
        if not (np.all(np.isfinite(vals)) and np.all(np.isfinite(ext))):
            raise ValueError("control values must be finite")
        for name, arr in (("breakpoints", bp), ("values", vals), ("extension", ext)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def horizon(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def pieces(self) -> int:
        return self.values.shape[0]

    @classmethod
    def constant(cls, value, horizon: float, extension=None):
        value = np.atleast_1d(np.asarray(value, dtype=float))
        ext = value if extension is None else extension
        return cls(np.array([0.0, horizon]), value[None, :], ext)

    @classmethod
    def uniform(cls, values, horizon: float, extension=None):
        """Equal-length pieces over ``[0, horizon]``; the extension defaults to the last value."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        bp = np.linspace(0.0, horizon, values.shape[0] + 1)
        ext = values[-1] if extension is None else extension
        return cls(bp, values, ext)

    def contained_in(self, omega, tol: float = 1e-9) -> bool:
        from .omega import omega_contains

        return all(omega_contains(omega, v, tol) for v in self.values) and omega_contains(
            omega, self.extension, tol
        )


def control_value(u: PiecewiseConstantControl, s: float) -> np.ndarray:
    if s < 0.0 or s >= u.breakpoints[-1]:
        return u.extension
    k = int(np.searchsorted(u.breakpoints, s, side="right")) - 1
    return u.values[k]


def square_wave(pieces: int, horizon: float = 1.0, amplitude: float = 1.0, m: int = 1, coord: int = 0):
    """Alternating +amplitude / -amplitude on ``pieces`` equal pieces, zero extension.

    Only coordinate ``coord`` chatters; the others stay at 0.
    """
    vals = np.zeros((pieces, m))
    vals[:, coord] = amplitude * np.where(np.arange(pieces) % 2 == 0, 1.0, -1.0)
    return PiecewiseConstantControl.uniform(vals, horizon, extension=np.zeros(m))
