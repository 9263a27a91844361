"""Experiment configuration documents (TOML).

Example::

    x0 = [0.0]
    t = 1.0

    [system]
    n = 1
    m = 1
    drift = ["0"]
    f1 = ["1"]

    [omega]
    kind = "box"
    lower = [-1.0]
    upper = [1.0]

    [spec]
    N = 2
    k = 4

    [experiment]
    deltas = [0.4, 0.2, 0.1, 0.05]
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError, ExprError
from .omega import Ball, Box, Hull, OmegaSet
from .reach import MODES, ReachSpec
from .system import ControlAffineSystem

DEMOS = {
    "demo_integrator": "integrator.toml",
    "demo_double_integrator": "double_integrator.toml",
    "demo_double_integrator_converge": "double_integrator_converge.toml",
    "demo_linear": "linear.toml",
    "demo_vanderpol": "vanderpol.toml",
    "demo_bilinear": "bilinear.toml",
}

SPEC_DEFAULTS = {
    "N": 2,
    "k": 4,
    "h": 0.01,
    "r": 0.005,
    "mode": "exhaustive",
    "seed": 0,
    "samples": 10_000,
    "budget": 2_000_000,
    "merge": 1e-9,
}

EXPERIMENT_DEFAULTS = {
    "kind": "",
    "deltas": [0.4, 0.2, 0.1, 0.05],
    "omega_deltas": None,
    "time_deltas": None,
    "state_deltas": None,
    "joint_deltas": None,
    "probes": 8,
    "J": "x0",
    "dictionary_depth": 4,
    "levels": 4,
    "switches": [4, 8, 16, 32],
    "dump_clouds": False,
}

TOP_KEYS = {"x0", "t", "output", "system", "omega", "spec", "experiment"}
OMEGA_KEYS = {"box": {"kind", "lower", "upper"}, "ball": {"kind", "center", "radius"}, "hull": {"kind", "vertices"}}

DEFAULTS_HELP = (
    "config defaults: output='out'; "
    + "spec: "
    + ", ".join(f"{k}={v!r}" for k, v in SPEC_DEFAULTS.items())
    + "; experiment: "
    + ", ".join(f"{k}={v!r}" for k, v in EXPERIMENT_DEFAULTS.items())
)


@dataclass(frozen=True)
class ExperimentBlock:
    kind: str = ""
    deltas: tuple = (0.4, 0.2, 0.1, 0.05)
    omega_deltas: tuple | None = None
    time_deltas: tuple | None = None
    state_deltas: tuple | None = None
    joint_deltas: tuple | None = None
    probes: int = 8
    J: str = "x0"
    dictionary_depth: int = 4
    levels: int = 4
    switches: tuple = (4, 8, 16, 32)
    dump_clouds: bool = False

    def deltas_for(self, kind: str) -> tuple:
        specific = getattr(self, f"{kind}_deltas")
        return self.deltas if specific is None else specific


@dataclass(frozen=True)
class ExperimentConfig:
    system: ControlAffineSystem
    omega: OmegaSet
    x0: tuple
    t: float
    spec: ReachSpec
    experiment: ExperimentBlock
    output: str = "out"
    source: str = ""
    document: dict = field(default_factory=dict, repr=False)

    def with_overrides(self, seed=None, t=None, deltas=None, output=None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, spec=replace(cfg.spec, seed=seed))
        if t is not None:
            if not t > 0:
                raise ConfigError("horizon must be positive", field="t")
            cfg = replace(cfg, t=float(t))
        if deltas is not None:
            exp = replace(cfg.experiment, deltas=tuple(deltas), omega_deltas=None, time_deltas=None,
                          state_deltas=None, joint_deltas=None)
            cfg = replace(cfg, experiment=exp)
        if output is not None:
            cfg = replace(cfg, output=output)
        return cfg


def _line_of(text: str, table: str | None, key: str) -> int | None:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"^\[([^\]]+)\]", stripped)
        if m:
            current = m.group(1).strip()
            continue
        if current == table and re.match(rf"^{re.escape(key)}\s*=", stripped):
            return lineno
    return None


def _decode(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        msg = str(exc)
        m = re.search(r"line (\d+)", msg)
        line = int(m.group(1)) if m else None
        if "Cannot overwrite a value" in msg and line is not None:
            key = text.splitlines()[line - 1].split("=")[0].strip()
            raise ConfigError(f"duplicate key '{key}'", field=key, line=line) from None
        m2 = re.search(r"Cannot declare \('([^']+)',?\) twice", msg)
        if m2:
            raise ConfigError(f"duplicate table '{m2.group(1)}'", field=m2.group(1), line=line) from None
        raise ConfigError(f"malformed document: {msg}", line=line) from None


class _Validator:
    def __init__(self, text: str):
        self.text = text

    def fail(self, message: str, table: str | None, key: str):
        path = f"{table}.{key}" if table else key
        raise ConfigError(message, field=path, line=_line_of(self.text, table, key))

    def unknown(self, block: dict, allowed: set, table: str | None) -> None:
        for key in block:
            if key not in allowed:
                self.fail(f"unknown key '{key}'", table, key)

    def number(self, block, table, key, default=None, positive=False, nonneg=False) -> float:
        if key not in block:
            if default is None:
                self.fail(f"'{key}' is required", table, key)
            return default
        v = block[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"'{key}' must be a number", table, key)
        if positive and not v > 0:
            self.fail(f"'{key}' must be positive", table, key)
        if nonneg and v < 0:
            self.fail(f"'{key}' must be >= 0", table, key)
        return float(v)

    def integer(self, block, table, key, default=None, minimum=None) -> int:
        if key not in block:
            if default is None:
                self.fail(f"'{key}' is required", table, key)
            return default
        v = block[key]
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(f"'{key}' must be an integer", table, key)
        if minimum is not None and v < minimum:
            self.fail(f"'{key}' must be >= {minimum}", table, key)
        return v

    def vector(self, block, table, key, length=None) -> list:
        if key not in block:
            self.fail(f"'{key}' is required", table, key)
        v = block[key]
        if not isinstance(v, list) or not all(isinstance(e, (int, float)) and not isinstance(e, bool) for e in v):
            self.fail(f"'{key}' must be a list of numbers", table, key)
        if length is not None and len(v) != length:
            self.fail(f"'{key}' has {len(v)} entries, expected {length}", table, key)
        return [float(e) for e in v]


def _parse_system(val: _Validator, block: dict) -> ControlAffineSystem:
    if not isinstance(block, dict):
        raise ConfigError("system block required", field="system")
    n = val.integer(block, "system", "n", minimum=1)
    m = val.integer(block, "system", "m", minimum=1)
    allowed = {"n", "m", "drift", "name"} | {f"f{i}" for i in range(1, m + 1)}
    for key in block:
        if key not in allowed:
            hint = f" (m={m} declares f1..f{m})" if re.fullmatch(r"f\d+", key) else ""
            val.fail(f"unknown key '{key}'{hint}", "system", key)
    exprs = {}
    for key in ["drift"] + [f"f{i}" for i in range(1, m + 1)]:
        if key not in block:
            val.fail(f"controlled field '{key}' is missing (m={m})" if key != "drift" else "'drift' is required",
                     "system", key)
        v = block[key]
        if not isinstance(v, list) or not all(isinstance(e, str) for e in v):
            val.fail(f"'{key}' must be a list of expression strings", "system", key)
        if len(v) != n:
            val.fail(f"'{key}' has {len(v)} components, expected n={n}", "system", key)
        exprs[key] = v
    try:
        return ControlAffineSystem.from_strings(
            exprs["drift"], [exprs[f"f{i}"] for i in range(1, m + 1)], name=str(block.get("name", ""))
        )
    except ExprError as exc:
        bad = next((k for k, v in exprs.items() if _fails(v, n)), "drift")
        val.fail(f"bad expression: {exc}", "system", bad)


def _fails(exprs, n) -> bool:
    from .expr import parse_expression, state_names

    try:
        for e in exprs:
            parse_expression(e, state_names(n))
    except ExprError:
        return True
    return False


def _parse_omega(val: _Validator, block, m: int) -> OmegaSet:
    if not isinstance(block, dict):
        raise ConfigError("omega block required", field="omega")
    kind = block.get("kind")
    if kind not in OMEGA_KEYS:
        val.fail(f"kind must be one of {sorted(OMEGA_KEYS)}, got {kind!r}", "omega", "kind")
    val.unknown(block, OMEGA_KEYS[kind], "omega")
    try:
        if kind == "box":
            lower = val.vector(block, "omega", "lower", m)
            upper = val.vector(block, "omega", "upper", m)
            return Box(lower, upper)
        if kind == "ball":
            center = val.vector(block, "omega", "center", m)
            return Ball(center, val.number(block, "omega", "radius", nonneg=True))
        verts = block.get("vertices")
        if not isinstance(verts, list) or not verts:
            val.fail("'vertices' must be a nonempty list of points", "omega", "vertices")
        for v in verts:
            if not isinstance(v, list) or len(v) != m:
                val.fail(f"every vertex must have {m} coordinates", "omega", "vertices")
        return Hull(verts)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        val.fail(str(exc), "omega", "kind")


def _parse_spec(val: _Validator, block) -> ReachSpec:
    block = block or {}
    val.unknown(block, set(SPEC_DEFAULTS), "spec")
    d = SPEC_DEFAULTS
    mode = block.get("mode", d["mode"])
    if mode not in MODES:
        val.fail(f"mode must be one of {MODES}", "spec", "mode")
    return ReachSpec(
        switches=val.integer(block, "spec", "N", d["N"], minimum=1),
        k=val.integer(block, "spec", "k", d["k"], minimum=1),
        h=val.number(block, "spec", "h", d["h"], positive=True),
        r=val.number(block, "spec", "r", d["r"], nonneg=True),
        mode=mode,
        seed=val.integer(block, "spec", "seed", d["seed"], minimum=0),
        samples=val.integer(block, "spec", "samples", d["samples"], minimum=1),
        budget=val.integer(block, "spec", "budget", d["budget"], minimum=1),
        merge=val.number(block, "spec", "merge", d["merge"], nonneg=True),
    )


def _parse_experiment(val: _Validator, block) -> ExperimentBlock:
    block = block or {}
    val.unknown(block, set(EXPERIMENT_DEFAULTS), "experiment")
    out = {}
    for key in ("deltas", "omega_deltas", "time_deltas", "state_deltas", "joint_deltas"):
        if key in block:
            vals = val.vector(block, "experiment", key)
            if not vals or any(v < 0 for v in vals):
                val.fail(f"'{key}' must be a nonempty list of values >= 0", "experiment", key)
            out[key] = tuple(vals)
    if "switches" in block:
        sw = block["switches"]
        if not isinstance(sw, list) or not sw or not all(isinstance(s, int) and s >= 1 for s in sw):
            val.fail("'switches' must be a list of positive integers", "experiment", "switches")
        out["switches"] = tuple(sw)
    if "J" in block and not isinstance(block["J"], str):
        val.fail("'J' must be an expression string", "experiment", "J")
    if "kind" in block and not isinstance(block["kind"], str):
        val.fail("'kind' must be a string", "experiment", "kind")
    if "dump_clouds" in block and not isinstance(block["dump_clouds"], bool):
        val.fail("'dump_clouds' must be true or false", "experiment", "dump_clouds")
    for key in ("J", "kind", "dump_clouds"):
        if key in block:
            out[key] = block[key]
    out["probes"] = val.integer(block, "experiment", "probes", EXPERIMENT_DEFAULTS["probes"], minimum=1)
    out["dictionary_depth"] = val.integer(block, "experiment", "dictionary_depth", 4, minimum=0)
    out["levels"] = val.integer(block, "experiment", "levels", 4, minimum=1)
    return ExperimentBlock(**out)


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    doc = _decode(text)
    val = _Validator(text)
    val.unknown(doc, TOP_KEYS, None)
    if "system" not in doc:
        raise ConfigError("system block required", field="system")
    if "omega" not in doc:
        raise ConfigError("omega block required", field="omega")
    system = _parse_system(val, doc["system"])
    omega = _parse_omega(val, doc["omega"], system.m)
    x0 = val.vector(doc, None, "x0", system.n)
    t = val.number(doc, None, "t", positive=True)
    output = doc.get("output", "out")
    if not isinstance(output, str):
        val.fail("'output' must be a path string", None, "output")
    return ExperimentConfig(
        system=system,
        omega=omega,
        x0=tuple(x0),
        t=t,
        spec=_parse_spec(val, doc.get("spec")),
        experiment=_parse_experiment(val, doc.get("experiment")),
        output=output,
        source=source,
        document=doc,
    )


def load_config(path) -> ExperimentConfig:
    """Read a config file, or a built-in demo by name (``demo_integrator``, ...)."""
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text(encoding="utf-8"), str(p))
    name = str(path)
    if name in DEMOS:
        text = resources.files("reachlab").joinpath("configs").joinpath(DEMOS[name]).read_text(encoding="utf-8")
        return parse_config(text, name)
    raise ConfigError(f"no such config file or built-in demo: {name!r} (demos: {', '.join(DEMOS)})", field="--config")
