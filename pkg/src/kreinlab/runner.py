"""Pipeline orchestration: solve, measure, run experiments, assemble the report."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.special import fresnel

from . import asymptotics as asy
from .errors import KreinlabError, PreconditionError
from .grids import (RadialGrid, SampledProfile, SpectralGrid,
                    read_profile_csv, write_measure_csv, write_profile_csv, write_spectral_csv)
from .krein import (Coefficient, KreinSolution, coefficient_from_profile, integrate_krein,
                    make_coefficient, normalization_constant, residual_conjugation_identity,
                    residual_integral_identity, spectral_density, stummel_norm, szego)
from .maximal import (decompose_dyadic, maximal_continuous, maximal_integer, random_profiles,
                      tail_oscillation)
from .scattering import (build_potential, exhaustion_diagnostic, l2_norm,
                         perturbed_propagate_fd, perturbed_propagate_spectral,
                         project_test_class, required_extent, wave_operator_run,
                         free_propagate)
from .scenario import Scenario
from .transforms import (DiracKernel, E_plancherel_defect, parseval_ratio, plancherel_defect,
                         psi_plancherel_ratio, split_odd_extension)

log = logging.getLogger(__name__)

CACHE_ENV = "KREINLAB_CACHE"
CACHE_VERSION = 1


def default_cache_dir() -> Optional[Path]:
    """Cache directory from the environment; ``off`` or an empty value disables caching."""
    raw = os.environ.get(CACHE_ENV)
    if raw is None:
        return Path.home() / ".cache" / "kreinlab"
    if raw.strip().lower() in ("", "off", "none", "0"):
        return None
    return Path(raw)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _hash(obj) -> str:
    blob = json.dumps(_jsonable(obj), sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ExperimentRecord:
    name: str
    inputs_hash: str
    observed: dict
    passed: bool
    runtime_s: float
    error: Optional[str] = None

    def to_dict(self, with_runtime: bool = True) -> dict:
        d = {"name": self.name, "inputs_hash": self.inputs_hash,
             "observed": _jsonable(self.observed), "pass": bool(self.passed),
             "error": self.error}
        if with_runtime:
            d["runtime_s"] = round(self.runtime_s, 3)
        return d


@dataclass
class RunReport:
    scenario: str
    scenario_digest: str
    seed: int
    records: List[ExperimentRecord]
    artifacts: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    def record(self, name: str) -> ExperimentRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self, with_runtime: bool = True) -> dict:
        return {"scenario": self.scenario, "scenario_digest": self.scenario_digest,
                "seed": self.seed, "pass": self.passed,
                "experiments": [r.to_dict(with_runtime) for r in self.records],
                "artifacts": list(self.artifacts)}

    def canonical(self) -> str:
        """Report JSON without wall-clock fields or artifact paths, for determinism checks."""
        d = self.to_dict(with_runtime=False)
        del d["artifacts"]
        return json.dumps(d, sort_keys=True)


class SolutionCache:
    """Krein solutions stored as ``.npz`` keyed by coefficient, grids and solver settings."""

    def __init__(self, directory: Optional[Path]):
        self.dir = Path(directory) if directory is not None else None
        self.hits = 0
        self.misses = 0

    def key(self, A: Coefficient, rg: RadialGrid, kg: SpectralGrid, osc: float) -> str:
        return _hash({"v": CACHE_VERSION, "A": A.digest(), "r": rg.to_dict(),
                      "k": kg.to_dict(), "osc": osc})

    def solve(self, A: Coefficient, rg: RadialGrid, kg: SpectralGrid,
              osc: float) -> KreinSolution:
        if self.dir is None:
            self.misses += 1
            return integrate_krein(A, rg, kg, osc)
        path = self.dir / f"sol-{self.key(A, rg, kg, osc)}.npz"
        if path.exists():
            try:
                with np.load(path) as z:
                    ci = int(z["closure_index"])
                    sol = KreinSolution(rg, kg, z["P"], z["P_star"], A, float(z["osc_factor"]),
                                        int(z["substeps"]), None if ci < 0 else ci)
                self.hits += 1
                return sol
            except (OSError, KeyError, ValueError) as exc:
                log.warning("ignoring unreadable cache entry %s: %s", path, exc)
        self.misses += 1
        sol = integrate_krein(A, rg, kg, osc)
        self.dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, P=sol.P, P_star=sol.P_star, osc_factor=sol.osc_factor,
                 substeps=sol.substeps,
                 closure_index=-1 if sol.closure_index is None else sol.closure_index)
        os.replace(tmp, path)
        return sol


class Context:
    """Lazily built shared objects for one scenario run."""

    def __init__(self, scn: Scenario, cache: SolutionCache, out_dir: Optional[Path]):
        self.scn = scn
        self.cache = cache
        self.out = out_dir
        self.artifacts: List[str] = []
        self._main = None

    def coefficient(self, rg: RadialGrid) -> Coefficient:
        c = self.scn.coefficient
        if c["kind"] == "csv":
            prof = read_profile_csv(c["path"])
            return coefficient_from_profile(prof, prof.declared_support).resampled(rg)
        return make_coefficient(c["kind"], self.scn.coefficient_params(), rg)

    def solve(self, r_step: float, r_max: float, k_half: float, k_step: float,
              osc: Optional[float] = None) -> KreinSolution:
        rg = RadialGrid.from_extent(r_step, r_max)
        kg = SpectralGrid(k_half, k_step)
        osc = self.scn.grid["osc_factor"] if osc is None else osc
        return self.cache.solve(self.coefficient(rg), rg, kg, osc)

    def measure(self, sol: KreinSolution):
        Pi = szego(sol)
        return Pi, spectral_density(Pi, self.scn.grid["zero_threshold"])

    def main(self):
        """Solution and measure on the scenario grid."""
        if self._main is None:
            g = self.scn.grid
            sol = self.solve(g["r_step"], g["r_max"], g["k_half_width"], g["k_step"])
            Pi, m = self.measure(sol)
            self._main = (sol, Pi, m)
            if self.out is not None:
                self.artifacts.append(str(write_measure_csv(m, self.out / "sigma.csv")))
        return self._main

    def artifact(self, name: str) -> Optional[Path]:
        if self.out is None:
            return None
        p = self.out / name
        self.artifacts.append(str(p))
        return p


# experiments -----------------------------------------------------------------

def exp_closed_form(ctx: Context, e: dict):
    if ctx.scn.coefficient["kind"] != "zero":
        raise PreconditionError("closed forms hold for the zero coefficient only")
    sol, Pi, m = ctx.main()
    k = sol.k
    kin = np.abs(k) <= e["k_max"] + 1e-12
    n = int(round(e["r_max"] / sol.r_grid.step)) + 1
    idx = np.arange(n)
    P, Ps = sol.rows(idx)
    r = idx * sol.r_grid.step
    err_P = float(np.abs(P[:, kin] - np.exp(1j * np.outer(r, k[kin]))).max())
    err_Ps = float(np.abs(Ps[:, kin] - 1).max())
    err_Pi = float(np.abs(Pi.values - 1).max())
    err_d = float(np.abs(m.density - 1 / (2 * np.pi)).max())
    obs = {"P_error": err_P, "Pstar_error": err_Ps, "Pi_error": err_Pi, "density_error": err_d,
           "r_max": e["r_max"], "k_max": e["k_max"]}
    return obs, max(err_P, err_Ps, err_Pi, err_d) < e["tol"]


def exp_identities(ctx: Context, e: dict):
    res, ratios = {}, {}
    runs = []
    for step, osc in ((e["step"], ctx.scn.grid["osc_factor"]),
                      (e["step"] / 2, ctx.scn.grid["osc_factor"] / 2)):
        sol = ctx.solve(step, e["r_max"], e["k_half_width"], e["k_step"], osc)
        runs.append((residual_conjugation_identity(sol), residual_integral_identity(sol)))
    ok = True
    for i, name in enumerate(("conjugation", "integral")):
        coarse, fine = runs[0][i], runs[1][i]
        res[name] = [coarse, fine]
        ok &= coarse < e["tol"]
        if coarse == 0.0 and fine == 0.0:
            ratios[name] = None  # exact for this coefficient, decay not applicable
        else:
            ratios[name] = coarse / fine if fine > 0 else math.inf
            ok &= e["ratio_min"] <= ratios[name] <= e["ratio_max"]
    return {"steps": [e["step"], e["step"] / 2], "residuals": res, "decay_ratio": ratios}, ok


def _test_packet(grid: RadialGrid, center: float, sigma: float, freq: float, kind: str):
    osc = np.sin if kind == "sin" else np.cos
    return SampledProfile.from_function(
        grid, lambda x: osc(freq * x) * np.exp(-(x - center) ** 2 / (2 * sigma ** 2)))


def exp_plancherel(ctx: Context, e: dict):
    sol, _, m = ctx.main()
    rg = sol.r_grid
    a = e["support"]
    f = SampledProfile.from_function(rg, lambda r: np.exp(-(r - 3) ** 2) * (r <= a))
    dP = plancherel_defect(f, sol, m, a)
    xc = int(round(e["x_max"] / (rg.step / 2)))
    ker = DiracKernel(sol, xc)
    g = SampledProfile.from_function(ker.x_grid, lambda x: np.exp(-(x - 3) ** 2) * np.cos(2 * x))
    m2 = m.scaled(2)
    dpsi = abs(psi_plancherel_ratio(g, ker, m2) - 1)
    dE = E_plancherel_defect(g, ker, m)
    dodd = abs(parseval_ratio(split_odd_extension(g)) - 1)
    obs = {"plancherel_defect": dP, "psi_defect": dpsi, "E_defect": dE, "odd_fft_defect": dodd,
           "k_max": sol.k_grid.half_width}
    return obs, max(dP, dpsi, dE, dodd) < e["tol"]


def exp_normalization(ctx: Context, e: dict):
    sol, _, m = ctx.main()
    K = normalization_constant(sol, m)
    st = stummel_norm(sol.coefficient)
    ratio = K / (1 + st ** 2)
    return {"normalization_constant": K, "stummel_norm": st, "ratio": ratio,
            "ceiling": e["ceiling"]}, ratio <= e["ceiling"]


def exp_mr_check(ctx: Context, e: dict):
    g = ctx.scn.grid
    sol = ctx.solve(g["r_step"], g["r_max"], g["k_half_width"], e["k_step"])
    _, m = ctx.measure(sol)
    profiles = random_profiles(sol.r_grid, e["count"], e["depth"], ctx.scn.seed)
    ri, rc, dominated = [], [], True
    first = None
    for f in profiles:
        a = maximal_integer(f, sol, m, e["n_max"], e["ceiling"])
        c = maximal_continuous(f, sol, m, True, e["ceiling"])
        dominated &= bool(np.all(c.M.values >= a.M.values - 1e-12 * (1 + a.M.values)))
        ri.append(a.ratio)
        rc.append(c.ratio)
        if first is None:
            first = a
    obs = {"count": len(profiles), "seed": ctx.scn.seed, "ceiling": e["ceiling"]}
    ok = True
    if profiles:
        scaled = maximal_integer(profiles[0].scaled(3 - 2j), sol, m, e["n_max"])
        obs["homogeneity_defect"] = abs(scaled.ratio - ri[0]) / ri[0]
        obs["telescoping_error"] = decompose_dyadic(profiles[0], sol, e["depth"]).telescoping_error
        obs.update({"integer_ratio_max": max(ri), "integer_ratio_mean": float(np.mean(ri)),
                    "continuous_ratio_max": max(rc),
                    "continuous_ratio_mean": float(np.mean(rc)),
                    "continuous_dominates_integer": dominated})
        ok = max(ri) <= e["ceiling"] and max(rc) <= e["ceiling"] and dominated
        path = ctx.artifact("M_integer.csv")
        if path is not None:
            write_spectral_csv(first.M, path)
    tails = [tail_oscillation(sol, m, rho, e["ceiling"]) for rho in e["rho"]]
    norms = [t.norm_M_sq for t in tails]
    monotone = all(b <= a for a, b in zip(norms, norms[1:])) if sorted(e["rho"]) == list(
        e["rho"]) else None
    support = sol.coefficient.support_bound
    beyond = [t.norm_M_sq for t, rho in zip(tails, e["rho"])
              if support is not None and rho >= support]
    zero_beyond = all(v == 0.0 for v in beyond)
    obs["tail"] = {"rho": list(e["rho"]), "norm_M_sq": norms,
                   "ratio": [t.ratio for t in tails], "nonincreasing": monotone,
                   "zero_beyond_support": zero_beyond, "support": support}
    ok = ok and monotone is not False and zero_beyond and all(t.passed for t in tails)
    return obs, ok


def exp_scatter(ctx: Context, e: dict):
    sol = ctx.solve(e["r_step"], e["r_max"], e["k_half_width"], e["k_step"])
    Pi, m = ctx.measure(sol)
    m2 = m.scaled(2)
    times = e["times"]
    top = e["xi_max"] + e["ramp"]
    X = e["x_max"] or required_extent(e["center"], e["width"], top, times[-1])
    xstep = e["r_step"] / 2
    ker = DiracKernel(sol, int(math.ceil(X / xstep)))
    f = _test_packet(ker.x_grid, e["center"], e["width"], e["frequency"], "sin")
    f = project_test_class(f, e["xi_min"], e["xi_max"], e["ramp"])
    f = f.scaled(1 / f.norm())
    run = wave_operator_run(f, ker, m2, times, Pi)
    ex = exhaustion_diagnostic(run, m2, tuple(e["window"]), e["window_tol"], e["norm_tol"])
    gaps = run.cauchy_gaps
    decreasing = bool(np.all(np.diff(gaps) < 0)) if gaps.size > 1 else True
    small = bool(gaps.size == 0 or gaps.max() < e["gap_tol"])
    p_ratio = run.limit_norm / run.f_norm
    obs = {"times": list(times), "x_extent": ker.x_grid.last, "norms": run.norms,
           "cauchy_gaps": gaps, "gaps_decreasing": decreasing, "gaps_below_tol": small,
           "window": list(e["window"]), "window_distances": ex.window_distances,
           "norm_drift": ex.norm_defects, "limit_norm_ratio": p_ratio,
           "oracle": e["oracle"]}
    if ctx.scn.coefficient["kind"] == "zero":
        obs["identity_distance"] = max(l2_norm(u.values - f.values, f.grid.step)
                                       for u in run.iterates)
    ok = (decreasing or small) and ex.passed and abs(p_ratio - 1) <= e["norm_tol"]
    if e["oracle"] in ("fd", "both"):
        pot = build_potential(sol.coefficient, ker.x_grid)
        fd_dt = min(1e-3, xstep ** 2)
        diffs = []
        for t, u in zip(times, run.iterates):
            uf = perturbed_propagate_fd(free_propagate(f, t), t, pot.v, fd_dt)
            diffs.append(l2_norm(uf.values - u.values, xstep))
        obs["fd_distance"] = diffs
    path = ctx.artifact("p.csv")
    if path is not None:
        write_spectral_csv(run.predicted_limit, path)
        for t, u in zip(times, run.iterates):
            write_profile_csv(u, ctx.artifact(f"u_t{t:g}.csv"))
    return obs, ok


def exp_crosscheck(ctx: Context, e: dict):
    dx = e["dx"]
    sol = ctx.solve(2 * dx, e["r_max"], e["k_half_width"], e["k_step"])
    _, m = ctx.measure(sol)
    m2 = m.scaled(2)
    ker = DiracKernel(sol, int(round(e["x_max"] / dx)))
    pot = build_potential(sol.coefficient, ker.x_grid)
    f = _test_packet(ker.x_grid, e["center"], e["width"], e["frequency"], "cos")
    f = f.scaled(1 / f.norm())
    diffs = []
    for t in e["times"]:
        us = perturbed_propagate_spectral(f, t, ker, m2)
        uf = perturbed_propagate_fd(f, t, pot.v, e["dt"])
        diffs.append(l2_norm(us.values - uf.values, dx))
    return {"times": list(e["times"]), "l2_difference": diffs, "tol": e["tol"]}, \
        max(diffs) < e["tol"]


def _fresnel_oracle(x: float) -> complex:
    s, c = fresnel(x * math.sqrt(2 / math.pi))
    return asy.H0 - math.sqrt(math.pi / 2) * complex(c, s)


def exp_asympt(ctx: Context, e: dict):
    obs, ok = {}, True
    checks = e["checks"]
    if "fresnel" in checks:
        target = math.sqrt(math.pi) / 2 * complex(math.cos(math.pi / 4), math.sin(math.pi / 4))
        h0 = abs(asy.fresnel_H(0.0) - target)
        x0 = e["x0"]
        branch = abs(asy.fresnel_quadrature(x0) - asy.fresnel_series(x0).value)
        c0 = asy.fresnel_coeffs_exact(1)[0] == (Fraction(1, 2), 1)
        xs = (0.5, 2.0, x0, 5.0, 10.0, 20.0)
        oracle = max(abs(asy.fresnel_H(x, x0) - _fresnel_oracle(x)) for x in xs)
        obs["fresnel"] = {"H0_error": h0, "branch_gap": branch, "c0_exact": c0,
                          "oracle_max_error": oracle,
                          "coefficients": [[c.real, c.imag] for c in asy.fresnel_coeffs(4)]}
        ok &= h0 < e["h0_tol"] and branch < e["branch_tol"] and c0 and oracle < e["branch_tol"]
    if "phase" in checks:
        rep = asy.stationary_phase_check(lambda u: math.sin(u) + u * u, e["phase_eps"],
                                         ceiling=e["phase_ceiling"])
        obs["phase"] = {"eps": list(rep.eps), "ratios": list(rep.ratios),
                        "ceiling": rep.ceiling, "pass": rep.passed}
        ok &= rep.passed
    if "free" in checks:
        h = asy.LineProfile.from_function(e["free_step"], e["free_half_count"],
                                          lambda x: np.exp(-x ** 2 / 2))
        d = [asy.free_asymptotic_defect(h, t) for t in e["free_times"]]
        factor = d[0] / d[-1] if d[-1] > 0 else math.inf
        obs["free"] = {"times": list(e["free_times"]), "defects": d, "factor": factor}
        ok &= factor >= e["free_factor"]
    if "uniform" in checks:
        hh, sup = asy.gaussian_band(e["band_center"], e["band_width"])
        k = np.linspace(-e["k_max"], e["k_max"], e["k_count"])
        rep = asy.uniform_bound_check(hh, sup, e["uniform_times"], e["alphas"], e["betas"], k,
                                      e["uniform_ceiling"], e["flat_tol"])
        obs["uniform"] = {"times": list(rep.times), "sups": list(rep.sup_by_time),
                          "flatness": rep.flatness, "pass": rep.passed}
        ok &= rep.passed
    return obs, bool(ok)


EXPERIMENT_FUNCS: Dict[str, Callable] = {
    "closed-form": exp_closed_form,
    "identities": exp_identities,
    "plancherel": exp_plancherel,
    "normalization": exp_normalization,
    "mr-check": exp_mr_check,
    "scatter": exp_scatter,
    "crosscheck": exp_crosscheck,
    "asympt": exp_asympt,
}


def run(scn: Scenario, out_dir=None, cache_dir="env", only: Optional[List[str]] = None
        ) -> RunReport:
    """Run the scenario's experiments in declaration order.

    Module errors are captured per experiment and mark it failed; the other
    experiments still run.
    """
    cache = SolutionCache(default_cache_dir() if cache_dir == "env" else cache_dir)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    ctx = Context(scn, cache, out)
    records = []
    for name, params in scn.experiments.items():
        if only is not None and name not in only:
            continue
        inputs = _hash({"coefficient": scn.coefficient, "grid": scn.grid, "seed": scn.seed,
                        "name": name, "params": params})
        t0 = time.perf_counter()
        try:
            obs, ok = EXPERIMENT_FUNCS[name](ctx, params)
            err = None
        except KreinlabError as exc:
            obs, ok, err = {}, False, f"{type(exc).__name__}: {exc}"
        dt = time.perf_counter() - t0
        log.info("%s/%s: %s in %.1fs", scn.name, name, "pass" if ok else "FAIL", dt)
        records.append(ExperimentRecord(name, inputs, obs, bool(ok), dt, err))
    report = RunReport(scn.name, scn.digest(), scn.seed, records, ctx.artifacts)
    if out is not None:
        path = out / "report.json"
        report.artifacts.append(str(path))
        path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return report
