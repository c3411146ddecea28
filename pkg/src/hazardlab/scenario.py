"""Scenario configuration: INI files describing one simulation study.

A scenario pins the model, the grid, the run size and seed, which test
families to run, and an optional pricing block.  Unknown sections or keys
are rejected by name so typos fail loudly instead of silently running with
defaults.
"""

import configparser
import os
from dataclasses import dataclass, field
from importlib import resources

from .grid import TimeGrid, uniform_grid

MODEL_KINDS = ("cox", "honest_expmart", "last_zero", "poisson_jump")

_MODEL_KEYS = {
    "cox": {"kind", "rate"},
    "honest_expmart": {"kind", "sup_mode", "tail_eps"},
    "last_zero": {"kind", "detection", "cutoff"},
    "poisson_jump": {"kind", "rate"},
}
_GRID_KEYS = {"horizon", "n_steps"}
_RUN_KEYS = {"seed", "n_paths", "chunk_size"}
_TEST_KEYS = {"expected", "battery", "stopping_likeness", "compensator",
              "compensator_control", "avoidance", "avoidance_deltas",
              "avoidance_final"}
_PRICING_KEYS = {"maturity", "payment", "recovery"}
_SECTIONS = {"model", "grid", "run", "tests", "pricing"}


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    params: dict
    grid: TimeGrid
    seed: int
    n_paths: int
    chunk_size: int = 1024
    tests: dict = field(default_factory=dict)
    pricing: dict = None


def _check_keys(cfg, section, allowed):
    extra = set(cfg[section]) - allowed
    if extra:
        raise ValueError(f"unknown key(s) in [{section}]: {sorted(extra)} "
                         f"(allowed: {sorted(allowed)})")


def parse_scenario(path, name=None):
    """Parse one INI scenario file; raises ValueError with the bad key."""
    cfg = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cfg.read(path)
    if not read:
        raise ValueError(f"cannot read scenario file {path}")
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]

    unknown = set(cfg.sections()) - _SECTIONS
    if unknown:
        raise ValueError(f"unknown section(s): {sorted(unknown)}")
    for needed in ("model", "grid", "run"):
        if not cfg.has_section(needed):
            raise ValueError(f"missing required section [{needed}]")

    kind = cfg.get("model", "kind", fallback=None)
    if kind not in MODEL_KINDS:
        raise ValueError(f"model kind must be one of {MODEL_KINDS}, got {kind!r}")
    _check_keys(cfg, "model", _MODEL_KEYS[kind])

    params = {}
    if kind in ("cox", "poisson_jump"):
        params["rate"] = cfg.getfloat("model", "rate", fallback=1.0)
        if params["rate"] <= 0:
            raise ValueError("rate must be positive")
    if kind == "honest_expmart":
        params["sup_mode"] = cfg.get("model", "sup_mode", fallback="bridge")
        if params["sup_mode"] not in ("bridge", "grid"):
            raise ValueError("sup_mode must be bridge or grid")
        params["tail_eps"] = cfg.getfloat("model", "tail_eps", fallback=1e-3)
        if not 0.0 < params["tail_eps"] < 1.0:
            raise ValueError("tail_eps must be in (0, 1)")
    if kind == "last_zero":
        params["detection"] = cfg.get("model", "detection", fallback="bridge")
        if params["detection"] not in ("bridge", "sign"):
            raise ValueError("detection must be bridge or sign")
        params["cutoff"] = cfg.getfloat("model", "cutoff", fallback=1.0)

    _check_keys(cfg, "grid", _GRID_KEYS)
    grid = uniform_grid(cfg.getfloat("grid", "horizon"),
                        cfg.getint("grid", "n_steps"))
    if kind == "last_zero" and params["cutoff"] > grid.horizon:
        raise ValueError("cutoff beyond the grid horizon")

    _check_keys(cfg, "run", _RUN_KEYS)
    if not cfg.has_option("run", "seed") or not cfg.has_option("run", "n_paths"):
        raise ValueError("[run] must set both seed and n_paths")
    seed = cfg.getint("run", "seed")
    n_paths = cfg.getint("run", "n_paths")
    if seed < 0 or n_paths < 1:
        raise ValueError("seed must be >= 0 and n_paths >= 1")
    chunk_size = cfg.getint("run", "chunk_size", fallback=1024)
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")

    tests = {"expected": "pass", "battery": kind != "poisson_jump",
             "stopping_likeness": kind != "last_zero",
             "compensator": kind in ("cox", "poisson_jump"),
             "compensator_control": False,
             "avoidance": True,
             "avoidance_deltas": (0.1, 0.01),
             "avoidance_final": 0.03}
    if cfg.has_section("tests"):
        _check_keys(cfg, "tests", _TEST_KEYS)
        sec = cfg["tests"]
        if "expected" in sec:
            tests["expected"] = sec["expected"].strip()
            if tests["expected"] not in ("pass", "reject"):
                raise ValueError("expected must be pass or reject")
        for flag in ("battery", "stopping_likeness", "compensator",
                     "compensator_control", "avoidance"):
            if flag in sec:
                tests[flag] = cfg.getboolean("tests", flag)
        if "avoidance_deltas" in sec:
            tests["avoidance_deltas"] = tuple(
                float(x) for x in sec["avoidance_deltas"].split(","))
        if "avoidance_final" in sec:
            tests["avoidance_final"] = cfg.getfloat("tests", "avoidance_final")

    pricing = None
    if cfg.has_section("pricing"):
        _check_keys(cfg, "pricing", _PRICING_KEYS)
        if not cfg.has_option("pricing", "maturity"):
            raise ValueError("[pricing] must set maturity")
        pricing = {"maturity": cfg.getfloat("pricing", "maturity"),
                   "payment": cfg.getfloat("pricing", "payment", fallback=1.0),
                   "recovery": cfg.getfloat("pricing", "recovery", fallback=0.0)}
        if not 0.0 < pricing["maturity"] <= grid.horizon:
            raise ValueError("maturity must lie inside the grid horizon")

    return Scenario(name=name, kind=kind, params=params, grid=grid,
                    seed=seed, n_paths=n_paths, chunk_size=chunk_size,
                    tests=tests, pricing=pricing)


def bundled_scenarios():
    """Names of scenarios shipped inside the package."""
    root = resources.files("hazardlab.data.scenarios")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_scenario(name_or_path):
    """Load a scenario from a file path or a bundled scenario name."""
    if os.path.exists(name_or_path):
        return parse_scenario(name_or_path)
    root = resources.files("hazardlab.data.scenarios")
    candidate = root / f"{name_or_path}.ini"
    if candidate.is_file():
        with resources.as_file(candidate) as real:
            return parse_scenario(real, name=str(name_or_path))
    raise ValueError(f"no such scenario file or bundled name: {name_or_path!r} "
                     f"(bundled: {', '.join(bundled_scenarios())})")
