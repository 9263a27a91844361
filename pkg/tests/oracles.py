"""Independent reference implementations used only by the tests.

Nothing here imports reachlab internals; each oracle is the slow, obvious
version of a library routine.
"""

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize


# expression trees: ("const", v) | ("var", name) | ("neg", t) | (fname, t) | (op, l, r)
FUNCS = {"sin": math.sin, "cos": math.cos, "exp": math.exp, "tanh": math.tanh, "abs": abs, "sqrt": math.sqrt}


class OracleDomain(Exception):
    pass


def tree_text(tree) -> str:
    """Fully parenthesized rendering."""
    tag = tree[0]
    if tag == "const":
        return repr(tree[1])
    if tag == "var":
        return tree[1]
    if tag == "neg":
        return f"(-{tree_text(tree[1])})"
    if tag in FUNCS:
        return f"{tag}({tree_text(tree[1])})"
    return f"({tree_text(tree[1])} {tag} {tree_text(tree[2])})"


def tree_eval(tree, env) -> float:
    tag = tree[0]
    if tag == "const":
        return tree[1]
    if tag == "var":
        return env[tree[1]]
    if tag == "neg":
        return -tree_eval(tree[1], env)
    if tag in FUNCS:
        a = tree_eval(tree[1], env)
        if tag == "sqrt" and a < 0:
            raise OracleDomain
        try:
            v = FUNCS[tag](a)
        except OverflowError:
            raise OracleDomain from None
        return _finite(v)
    a, b = tree_eval(tree[1], env), tree_eval(tree[2], env)
    if tag == "+":
        return _finite(a + b)
    if tag == "-":
        return _finite(a - b)
    if tag == "*":
        return _finite(a * b)
    if tag == "/":
        if b == 0:
            raise OracleDomain
        return _finite(a / b)
    # "^"
    if a < 0 and b != int(b):
        raise OracleDomain
    if a == 0 and b < 0:
        raise OracleDomain
    try:
        return _finite(a**b)
    except (OverflowError, ZeroDivisionError):
        raise OracleDomain from None


def _finite(v):
    if isinstance(v, complex) or not math.isfinite(v):
        raise OracleDomain
    return v


def directed_hausdorff_naive(A, B) -> float:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    best = 0.0
    for a in A:
        best = max(best, min(math.dist(a, b) for b in B))
    return best


def box_hausdorff(l1, u1, l2, u2) -> float:
    """Closed form via support functions of axis-aligned boxes."""
    l1, u1, l2, u2 = map(np.asarray, (l1, u1, l2, u2))
    one = np.maximum(np.maximum(u1 - u2, l2 - l1), 0.0)
    two = np.maximum(np.maximum(u2 - u1, l1 - l2), 0.0)
    return max(math.hypot(*one), math.hypot(*two))


def ball_hausdorff(c1, r1, c2, r2) -> float:
    return float(np.linalg.norm(np.asarray(c1) - np.asarray(c2)) + abs(r1 - r2))


def hull_projection(V, p) -> np.ndarray:
    """Projection onto conv(V) by SLSQP over simplex weights."""
    V = np.asarray(V, dtype=float)
    p = np.asarray(p, dtype=float)
    k = V.shape[0]
    res = minimize(
        lambda w: float(np.sum((w @ V - p) ** 2)),
        np.full(k, 1.0 / k),
        jac=lambda w: 2.0 * V @ (w @ V - p),
        bounds=[(0.0, 1.0)] * k,
        constraints=[{"type": "eq", "fun": lambda w: np.sum(w) - 1.0}],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    return res.x @ V


def ode_endpoint(f, x0, horizon, rtol=1e-11, atol=1e-12) -> np.ndarray:
    sol = solve_ivp(lambda t, x: f(x), (0.0, horizon), np.asarray(x0, float), rtol=rtol, atol=atol, method="DOP853")
    return sol.y[:, -1]


def grid_cloud(lo, hi, step) -> np.ndarray:
    n = int(round((hi - lo) / step))
    return (lo + step * np.arange(n + 1))[:, None]
