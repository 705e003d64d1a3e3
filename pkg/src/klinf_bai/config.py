"""Experiment configuration files (TOML) with line-aware diagnostics."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib as _toml
except ModuleNotFoundError:  # Python < 3.11
    import tomli as _toml

from .distributions import ArmSpec, arm_from_config
from .errors import ConfigError
from .moment_class import MomentClass

MODES = ("run", "sweep-delta", "sweep-batch", "lower-bound", "concentration", "cost-fit")

_TOP_KEYS = {"mode", "arms", "f", "B", "delta", "m", "alpha", "C", "replications", "seed",
             "max_samples", "n_grid", "btilde", "out", "batches", "cost", "concentration",
             "quad_nodes", "timing"}


@dataclass
class CostSection:
    c1: list = field(default_factory=lambda: [1e-4])
    c21: float = 0.0
    c22: float = 0.0


@dataclass
class ConcentrationSection:
    arm: Optional[ArmSpec] = None
    n: list = field(default_factory=lambda: [10, 50, 100])
    u: list = field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3, 0.5])
    reps: int = 10000


@dataclass
class TimingSection:
    n: list = field(default_factory=lambda: [1000, 4000, 16000])
    repeats: int = 3


@dataclass
class ExperimentConfig:
    mode: str = "run"
    arms: list = field(default_factory=list)
    mc: MomentClass = field(default_factory=MomentClass)
    deltas: list = field(default_factory=lambda: [0.1])
    m: Any = 1000
    alpha: Optional[float] = None
    C: Any = "auto"
    replications: int = 20
    seed: int = 0
    max_samples: int = 10 ** 8
    n_grid: int = 64
    btilde: Any = "arms"
    out: str = "results"
    batches: list = field(default_factory=list)
    cost: CostSection = field(default_factory=CostSection)
    concentration: ConcentrationSection = field(default_factory=ConcentrationSection)
    timing: TimingSection = field(default_factory=TimingSection)
    quad_nodes: int = 256
    source: str = ""


def _line_of(text: str, key: str, index: int = 0) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(key)}\s*=", re.M)
    hits = list(pat.finditer(text))
    if not hits:
        pat = re.compile(rf"^\s*\[+\s*{re.escape(key)}\s*\]+", re.M)
        hits = list(pat.finditer(text))
    if not hits:
        return None
    mt = hits[min(index, len(hits) - 1)]
    return text.count("\n", 0, mt.start()) + 1


class _Ctx:
    def __init__(self, text: str, path: str):
        self.text, self.path = text, path

    def fail(self, key: str, msg: str):
        name = key.split(".")[-1]
        idx = re.search(r"\[(\d+)\]$", name)
        line = _line_of(self.text, name.split("[")[0], int(idx.group(1)) if idx else 0)
        where = f"{self.path}:{line}" if line else self.path
        raise ConfigError(f"{where}: field '{key}': {msg}")


def _num(ctx, raw, key, kind=float, lo=None, lo_open=False):
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        ctx.fail(key, f"expected a number, got {raw!r}")
    if kind is int and not float(raw).is_integer():
        ctx.fail(key, f"expected an integer, got {raw!r}")
    val = kind(raw)
    if lo is not None and (val < lo or (lo_open and val == lo)):
        ctx.fail(key, f"must be {'>' if lo_open else '>='} {lo}, got {val}")
    return val


def _list(ctx, raw, key, kind=float, lo=None, lo_open=False):
    items = raw if isinstance(raw, list) else [raw]
    return [_num(ctx, v, key, kind, lo, lo_open) for v in items]


def parse_config(text: str, path: str = "<config>", mode: str | None = None) -> ExperimentConfig:
    """Parse and validate; ``mode`` (from the command line) overrides the file."""
    ctx = _Ctx(text, path)
    try:
        raw = _toml.loads(text)
    except _toml.TOMLDecodeError as err:
        raise ConfigError(f"{path}: {err}") from None
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        ctx.fail(unknown[0], "unknown field")
    cfg = ExperimentConfig(source=path)

    mode = mode or raw.get("mode", "run")
    if mode not in MODES:
        ctx.fail("mode", f"expected one of {MODES}, got {mode!r}")
    cfg.mode = mode

    f = raw.get("f", {"kind": "power", "p": 2.0})
    if not isinstance(f, dict) or "kind" not in f:
        ctx.fail("f", "expected a table like {kind = \"power\", p = 2.0}")
    try:
        B = _num(ctx, raw.get("B", 9.0), "B", lo=0.0, lo_open=True)
        cfg.mc = MomentClass(f["kind"], B, float(f.get("p", 2.0)))
    except ValueError as err:
        if isinstance(err, ConfigError):
            raise
        ctx.fail("f", str(err))

    arms = raw.get("arms", [])
    if not isinstance(arms, list):
        ctx.fail("arms", "expected an array of tables")
    for i, entry in enumerate(arms):
        try:
            cfg.arms.append(arm_from_config(entry))
        except (ValueError, TypeError) as err:
            ctx.fail(f"arms[{i}]", str(err))
    if mode in ("run", "sweep-delta", "sweep-batch", "lower-bound", "cost-fit") and len(cfg.arms) < 2:
        ctx.fail("arms", f"mode {mode!r} needs at least two arms")

    cfg.deltas = _list(ctx, raw.get("delta", 0.1), "delta", lo=0.0, lo_open=True)
    if any(d >= 1 for d in cfg.deltas):
        ctx.fail("delta", "every delta must lie in (0, 1)")

    m = raw.get("m", 1000)
    K = max(len(cfg.arms), 1)
    if m != "auto":
        m = _num(ctx, m, "m", int, lo=1)
        if cfg.arms and m < (K + 1) ** 2:
            ctx.fail("m", f"batch size must be at least (K+1)^2 = {(K + 1) ** 2}")
    cfg.m = m

    if "alpha" in raw:
        cfg.alpha = _num(ctx, raw["alpha"], "alpha")
        if cfg.arms and cfg.alpha < 2 * K + 2:
            ctx.fail("alpha", f"must be >= 2K + 2 = {2 * K + 2}")
    C = raw.get("C", "auto")
    if C != "auto":
        C = _num(ctx, C, "C", lo=0.0, lo_open=True)
    cfg.C = C

    cfg.replications = _num(ctx, raw.get("replications", 20), "replications", int, lo=0)
    cfg.seed = _num(ctx, raw.get("seed", 0), "seed", int, lo=0)
    cfg.max_samples = _num(ctx, raw.get("max_samples", 10 ** 8), "max_samples", int, lo=1)
    cfg.n_grid = _num(ctx, raw.get("n_grid", 64), "n_grid", int, lo=2)
    cfg.quad_nodes = _num(ctx, raw.get("quad_nodes", 256), "quad_nodes", int, lo=8)

    bt = raw.get("btilde", "arms")
    if isinstance(bt, list):
        bt = _list(ctx, bt, "btilde")
        if len(bt) != len(cfg.arms):
            ctx.fail("btilde", "needs one entry per arm")
    elif bt not in ("arms", "conservative"):
        ctx.fail("btilde", "expected 'arms', 'conservative' or a list of numbers")
    cfg.btilde = bt

    out = raw.get("out", "results")
    if not isinstance(out, str):
        ctx.fail("out", "expected a path string")
    cfg.out = out

    if "batches" in raw:
        cfg.batches = _list(ctx, raw["batches"], "batches", int, lo=(K + 1) ** 2)
    if mode == "sweep-batch" and not cfg.batches:
        ctx.fail("batches", "sweep-batch needs a batch grid")

    cost = raw.get("cost", {})
    if not isinstance(cost, dict):
        ctx.fail("cost", "expected a table")
    extra = set(cost) - {"c1", "c21", "c22"}
    if extra:
        ctx.fail(f"cost.{sorted(extra)[0]}", "unknown field")
    cfg.cost = CostSection(_list(ctx, cost.get("c1", [1e-4]), "c1", lo=0.0),
                           _num(ctx, cost.get("c21", 0.0), "c21", lo=0.0),
                           _num(ctx, cost.get("c22", 0.0), "c22", lo=0.0))
    if m == "auto" and cfg.cost.c1[0] + 0.5 * cfg.cost.c22 <= 0:
        ctx.fail("cost", "m = 'auto' needs c1 + 0.5 c22 > 0")

    conc = raw.get("concentration", {})
    if not isinstance(conc, dict):
        ctx.fail("concentration", "expected a table")
    sec = ConcentrationSection()
    if "arm" in conc:
        try:
            sec.arm = arm_from_config(conc["arm"])
        except (ValueError, TypeError) as err:
            ctx.fail("concentration.arm", str(err))
    if "n" in conc:
        sec.n = _list(ctx, conc["n"], "n", int, lo=1)
    if "u" in conc:
        sec.u = _list(ctx, conc["u"], "u", lo=0.0)
    if "reps" in conc:
        sec.reps = _num(ctx, conc["reps"], "reps", int, lo=1)
    if mode == "concentration" and sec.arm is None:
        if len(cfg.arms) != 1:
            ctx.fail("concentration", "needs concentration.arm or exactly one entry in arms")
        sec.arm = cfg.arms[0]
    cfg.concentration = sec

    tim = raw.get("timing", {})
    if not isinstance(tim, dict):
        ctx.fail("timing", "expected a table")
    ts = TimingSection()
    if "n" in tim:
        ts.n = _list(ctx, tim["n"], "n", int, lo=K)
    if "repeats" in tim:
        ts.repeats = _num(ctx, tim["repeats"], "repeats", int, lo=1)
    cfg.timing = ts
    return cfg


def load_config(path: str | Path, mode: str | None = None) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as err:
        raise ConfigError(f"{p}: cannot read config ({err.strerror})") from None
    return parse_config(text, str(p), mode)
