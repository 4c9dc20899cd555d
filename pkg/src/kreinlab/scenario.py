"""Scenario files: INI sections with a fixed key set, validated up front."""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from .errors import ScenarioError
from .scattering import required_extent

BUNDLED_DIR = Path(__file__).parent / "scenarios"

COEFFICIENT_KINDS = ("zero", "constant", "box", "gaussian", "bump", "csv")
INF = float("inf")

# key -> (type, default); type is "float", "int", "str", "floats" or "checks"
_SCHEMA: Dict[str, Dict[str, tuple]] = {
    "scenario": {"name": ("str", None), "seed": ("int", 0), "description": ("str", "")},
    "coefficient": {"kind": ("str", None), "value": ("float", None), "length": ("float", None),
                    "amplitude": ("float", None), "center": ("float", None),
                    "width": ("float", None), "half_width": ("float", None),
                    "path": ("str", None)},
    "grid": {"r_step": ("float", 0.01), "r_max": ("float", 20.0),
             "k_half_width": ("float", 50.0), "k_step": ("float", 0.05),
             "osc_factor": ("float", 0.1), "zero_threshold": ("float", 1e-3)},
    "closed-form": {"r_max": ("float", 20.0), "k_max": ("float", 10.0), "tol": ("float", 1e-10)},
    "identities": {"step": ("float", 1e-3), "r_max": ("float", 10.0),
                   "k_half_width": ("float", 10.0), "k_step": ("float", 0.5),
                   "tol": ("float", 1e-7), "ratio_min": ("float", 12.0),
                   "ratio_max": ("float", 20.0)},
    "plancherel": {"tol": ("float", 1e-3), "support": ("float", 6.0), "x_max": ("float", 12.0)},
    "normalization": {"ceiling": ("float", 10.0)},
    "mr-check": {"count": ("int", 100), "depth": ("int", 4), "n_max": ("int", 16),
                 "k_step": ("float", 0.1), "ceiling": ("float", 25.0),
                 "rho": ("floats", (0.0, 1.0, 2.0, 4.0, 6.0, 8.0, 10.0))},
    "scatter": {"times": ("floats", (5.0, 10.0, 20.0, 40.0, 80.0)), "center": ("float", 80.0),
                "width": ("float", 1.0), "frequency": ("float", 5.0),
                "xi_min": ("float", 0.5), "xi_max": ("float", 9.5), "ramp": ("float", 0.5),
                "r_step": ("float", 0.1), "r_max": ("float", 10.0),
                "k_half_width": ("float", 16.0), "k_step": ("float", 0.0008),
                "x_max": ("float", None), "window": ("floats", (1.0, 9.0)),
                "window_tol": ("float", 5e-2), "norm_tol": ("float", 1e-3),
                "gap_tol": ("float", 1e-6), "oracle": ("str", "spectral")},
    "crosscheck": {"times": ("floats", (2.0, 5.0, 10.0)), "dx": ("float", 0.005),
                   "dt": ("float", 2e-3), "x_max": ("float", 100.0), "r_max": ("float", 10.0),
                   "k_half_width": ("float", 10.0), "k_step": ("float", 0.01),
                   "center": ("float", 12.0), "width": ("float", 2.0),
                   "frequency": ("float", 1.5), "tol": ("float", 1e-3)},
    "asympt": {"checks": ("checks", ("fresnel", "phase", "free", "uniform")),
               "x0": ("float", 3.0), "h0_tol": ("float", 1e-10), "branch_tol": ("float", 1e-8),
               "phase_eps": ("floats", (1e-1, 1e-2, 1e-3, 1e-4)),
               "phase_ceiling": ("float", 10.0), "free_step": ("float", 0.1),
               "free_half_count": ("int", 16000), "free_times": ("floats", (1.0, 10.0, 100.0)),
               "free_factor": ("float", 10.0), "band_center": ("float", 5.0),
               "band_width": ("float", 2.0), "uniform_times": ("floats", (1.0, 4.0, 16.0, 64.0)),
               "alphas": ("floats", (-INF, 0.0, 5.0, 10.0)),
               "betas": ("floats", (5.0, 10.0, 15.0, INF)), "k_max": ("float", 12.0),
               "k_count": ("int", 481), "uniform_ceiling": ("float", 10.0),
               "flat_tol": ("float", 0.25)},
}

EXPERIMENTS = ("closed-form", "identities", "plancherel", "normalization", "mr-check",
               "scatter", "crosscheck", "asympt")
ASYMPT_CHECKS = ("fresnel", "phase", "free", "uniform")
# keys allowed to be zero or negative
_SIGNED = {"value", "amplitude", "center", "seed", "rho", "alphas", "betas", "window",
           "description", "xi_min"}
_ALLOW_ZERO = {"rho", "xi_min", "count"}


@dataclass
class Scenario:
    name: str
    seed: int
    coefficient: dict
    grid: dict
    experiments: Dict[str, dict]
    source: Optional[Path] = None
    description: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "seed": self.seed, "coefficient": self.coefficient,
                "grid": self.grid, "experiments": self.experiments}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def coefficient_params(self) -> dict:
        return {k: v for k, v in self.coefficient.items()
                if k not in ("kind", "path") and v is not None}


def resolve_scenario_path(name_or_path) -> Path:
    p = Path(name_or_path)
    if p.exists():
        return p
    cand = BUNDLED_DIR / (p.name if p.suffix == ".scn" else p.name + ".scn")
    if cand.exists():
        return cand
    raise ScenarioError([f"scenario {name_or_path!r} not found (no file, no bundled name)"])


def bundled_scenarios() -> List[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.scn"))


def _parse(kind: str, raw: str):
    if kind == "float":
        return float(raw)
    if kind == "int":
        return int(raw)
    if kind == "floats":
        return tuple(float(s) for s in raw.replace(" ", "").split(",") if s)
    if kind == "checks":
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    return raw.strip()


def _section_values(cp, sec: str, errors: List[str]) -> dict:
    schema = _SCHEMA[sec]
    out = {k: d for k, (_, d) in schema.items()}
    for key, raw in cp.items(sec):
        if key not in schema:
            errors.append(f"{sec}.{key}: unknown key")
            continue
        kind = schema[key][0]
        try:
            val = _parse(kind, raw)
        except ValueError:
            errors.append(f"{sec}.{key}: cannot parse {raw!r} as {kind}")
            continue
        out[key] = val
        for v in (val if isinstance(val, tuple) else (val,)):
            if isinstance(v, str) or key in _SIGNED:
                continue
            if not math.isfinite(v) or v < 0 or (v == 0 and key not in _ALLOW_ZERO):
                errors.append(f"{sec}.{key}: must be positive, got {raw!r}")
                break
    return out


def _check_grid(sec: str, step: float, extent: float, errors: List[str], step_key="step",
                extent_key="half_width"):
    if step and extent and step > 0 and extent > 0:
        ratio = extent / step
        if abs(ratio - round(ratio)) > 1e-6 * max(1.0, ratio):
            errors.append(f"{sec}.{extent_key}: {extent} is not a multiple of {sec}.{step_key} "
                          f"{step}")


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file; every problem is collected before raising."""
    path = resolve_scenario_path(path)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    errors: List[str] = []
    try:
        cp.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise ScenarioError([f"{path}: {exc}"]) from exc
    for sec in cp.sections():
        if sec not in _SCHEMA:
            errors.append(f"[{sec}]: unknown section")
    vals = {sec: _section_values(cp, sec, errors) for sec in cp.sections() if sec in _SCHEMA}
    for need in ("scenario", "coefficient"):
        if need not in vals:
            errors.append(f"[{need}]: missing section")
    meta = vals.get("scenario", {})
    if "scenario" in vals and not meta.get("name"):
        errors.append("scenario.name: missing")
    coef = vals.get("coefficient", {})
    kind = coef.get("kind")
    if "coefficient" in vals:
        if kind not in COEFFICIENT_KINDS:
            errors.append(f"coefficient.kind: {kind!r} not one of {', '.join(COEFFICIENT_KINDS)}")
        if kind == "csv":
            if not coef.get("path"):
                errors.append("coefficient.path: required for kind = csv")
            else:
                p = Path(coef["path"])
                if not p.is_absolute():
                    p = path.parent / p
                if not p.exists():
                    errors.append(f"coefficient.path: file {p} does not exist")
                coef["path"] = str(p)
        elif coef.get("path"):
            errors.append("coefficient.path: only valid for kind = csv")
    grid = vals.get("grid", _section_values_default("grid"))
    _check_grid("grid", grid["k_step"], grid["k_half_width"], errors, "k_step", "k_half_width")
    _check_grid("grid", grid["r_step"], grid["r_max"], errors, "r_step", "r_max")
    experiments = {sec: vals[sec] for sec in cp.sections() if sec in EXPERIMENTS}
    _validate_experiments(experiments, grid, errors)
    if errors:
        raise ScenarioError(errors)
    return Scenario(meta["name"], meta["seed"], coef, grid, experiments, path,
                    meta.get("description", ""))


def _section_values_default(sec: str) -> dict:
    return {k: d for k, (_, d) in _SCHEMA[sec].items()}


def experiment_defaults(name: str) -> dict:
    return _section_values_default(name)


def validate_experiments(ex: Dict[str, dict], grid: dict):
    """Cross-key checks for already parsed experiment parameters (e.g. after CLI overrides)."""
    errors: List[str] = []
    _validate_experiments(ex, grid, errors)
    if errors:
        raise ScenarioError(errors)


def _validate_experiments(ex: Dict[str, dict], grid: dict, errors: List[str]):
    if "identities" in ex:
        e = ex["identities"]
        _check_grid("identities", e["step"], e["r_max"], errors, "step", "r_max")
        _check_grid("identities", e["k_step"], e["k_half_width"], errors, "k_step",
                    "k_half_width")
        if e["ratio_min"] >= e["ratio_max"]:
            errors.append("identities.ratio_min: must be below identities.ratio_max")
    if "plancherel" in ex and ex["plancherel"]["support"] > grid["r_max"]:
        errors.append("plancherel.support: beyond grid.r_max")
    if "mr-check" in ex:
        e = ex["mr-check"]
        _check_grid("mr-check", e["k_step"], grid["k_half_width"], errors, "k_step",
                    "grid.k_half_width")
        if 2.0 ** e["depth"] > grid["r_max"] + 1e-9:
            errors.append(f"mr-check.depth: 2^{e['depth']} beyond grid.r_max {grid['r_max']}")
        if e["n_max"] > grid["r_max"] + 1e-9:
            errors.append("mr-check.n_max: beyond grid.r_max")
        if any(r > grid["r_max"] for r in e["rho"]):
            errors.append("mr-check.rho: values beyond grid.r_max")
    if "scatter" in ex:
        e = ex["scatter"]
        _check_grid("scatter", e["r_step"], e["r_max"], errors, "r_step", "r_max")
        _check_grid("scatter", e["k_step"], e["k_half_width"], errors, "k_step", "k_half_width")
        t = e["times"]
        if not t or any(b <= a for a, b in zip(t, t[1:])):
            errors.append("scatter.times: must be a nonempty strictly increasing list")
        elif e["x_max"] is not None:
            need = required_extent(e["center"], e["width"], e["xi_max"] + e["ramp"], t[-1])
            if e["x_max"] < need:
                errors.append(f"scatter.x_max: {e['x_max']} below the sizing rule "
                              f"center + 2*b*t_max + 6*width = {need:g}")
        if len(e["window"]) != 2 or e["window"][1] <= e["window"][0]:
            errors.append("scatter.window: must be two increasing numbers")
        if e["xi_max"] <= e["xi_min"]:
            errors.append("scatter.xi_max: must exceed scatter.xi_min")
        if e["oracle"] not in ("spectral", "fd", "both"):
            errors.append("scatter.oracle: must be spectral, fd or both")
    if "crosscheck" in ex:
        e = ex["crosscheck"]
        _check_grid("crosscheck", 2 * e["dx"], e["r_max"], errors, "dx", "r_max")
        _check_grid("crosscheck", e["k_step"], e["k_half_width"], errors, "k_step",
                    "k_half_width")
    if "asympt" in ex:
        e = ex["asympt"]
        bad = [c for c in e["checks"] if c not in ASYMPT_CHECKS]
        if bad:
            errors.append(f"asympt.checks: unknown {', '.join(bad)}")
        if any(not 0 < v < 1 for v in e["phase_eps"]):
            errors.append("asympt.phase_eps: values must lie in (0, 1)")
        if any(t < 1 for t in e["uniform_times"]):
            errors.append("asympt.uniform_times: values must be at least 1")
