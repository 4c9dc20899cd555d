"""Krein system integration, Szego function and spectral measure.

The system integrated for real ``k`` is

    P'  = i k P - conj(A) P*,      P(0, k)  = 1
    P*' = -A P,                    P*(0, k) = 1

with classical RK4 on a common substep for all ``k``.  Beyond the support of
``A`` the solution is continued exactly: ``P*`` is frozen and ``P`` only picks
up the phase ``exp(i (r - R) k)``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, NamedTuple, Optional

import numpy as np

from .errors import (DivergenceError, GridRangeError, NonConvergenceError, ShapeError,
                     SingularPartError)
from .grids import (RadialGrid, SampledProfile, SpectralGrid, SpectralMeasure,
                    cumulative_simpson, read_profile_csv, write_profile_csv)

log = logging.getLogger(__name__)

DEFAULT_OSC_FACTOR = 0.1
DEFAULT_ZERO_THRESHOLD = 1e-3
# amplitude below which smooth tails are replaced by exact zeros
TAIL_CUTOFF = 1e-16


@dataclass(frozen=True, eq=False)
class Coefficient:
    """The coefficient ``A(r)`` of the Krein system.

    ``func`` is an optional exact evaluator used at Runge-Kutta stage points;
    without it the sampled profile is interpolated linearly.
    """

    profile: SampledProfile
    is_real: bool = True
    support_bound: Optional[float] = None
    func: Optional[Callable] = None
    kind: str = "custom"
    params: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.is_real and not self.profile.is_real:
            raise ShapeError("is_real coefficient has nonzero imaginary samples")
        if self.support_bound is not None and self.support_bound < 0:
            raise ShapeError("support_bound must be nonnegative")

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.func is not None:
            out = np.asarray(self.func(r), dtype=complex) * np.ones(r.shape)
        else:
            last = self.profile.grid.last
            if np.any(r > last * (1 + 1e-12)) and (self.support_bound is None
                                                   or self.support_bound > last):
                raise GridRangeError("coefficient evaluated beyond its sampled range")
            out = self.profile(np.minimum(r, last))
        if self.support_bound is not None:
            out = np.where(r > self.support_bound, 0.0, out)
        if self.is_real:
            out = out.real + 0j
        return out

    def resampled(self, grid: RadialGrid) -> "Coefficient":
        """Same coefficient with its profile sampled on ``grid``."""
        sb = self.support_bound
        declared = sb if sb is not None and sb <= grid.last else None
        prof = SampledProfile(grid, self(grid.nodes), declared)
        return Coefficient(prof, self.is_real, sb, self.func, self.kind, dict(self.params))

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps({"kind": self.kind, "params": self.params,
                             "support": self.support_bound, "real": self.is_real},
                            sort_keys=True).encode())
        h.update(json.dumps(self.profile.grid.to_dict(), sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.profile.values).tobytes())
        return h.hexdigest()[:16]


def make_coefficient(kind: str, params: Optional[dict], grid: RadialGrid) -> Coefficient:
    """Build one of the bundled coefficient families sampled on ``grid``.

    kinds: ``zero``, ``constant`` (value), ``box`` (value, length),
    ``gaussian`` (amplitude, center, width: ``amp*exp(-((r-c)/w)^2)``),
    ``bump`` (amplitude, center, half_width: smooth compactly supported bump).
    """
    p = dict(params or {})
    if kind == "zero":
        func, support = (lambda r: np.zeros_like(r)), 0.0
    elif kind == "constant":
        c = float(p.get("value", 1.0))
        func, support = (lambda r: c * np.ones_like(r)), None
    elif kind == "box":
        c, length = float(p.get("value", 0.3)), float(p.get("length", 1.0))
        func, support = (lambda r: np.where(r <= length, c, 0.0)), length
    elif kind == "gaussian":
        amp = float(p.get("amplitude", 0.3))
        c = float(p.get("center", 2.0))
        w = float(p.get("width", 1.0))
        cut = c + w * math.sqrt(max(math.log(abs(amp) / TAIL_CUTOFF), 0.0))

        def func(r):
            return np.where(r <= cut, amp * np.exp(-((r - c) / w) ** 2), 0.0)

        support = cut
    elif kind == "bump":
        amp = float(p.get("amplitude", 0.3))
        c = float(p.get("center", 1.5))
        hw = float(p.get("half_width", 1.5))

        def func(r):
            s = (np.asarray(r, dtype=float) - c) / hw
            inside = np.abs(s) < 1
            out = np.zeros_like(s)
            out[inside] = amp * np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
            return out

        support = c + hw
    else:
        raise ShapeError(f"unknown coefficient kind {kind!r}")
    nodes = grid.nodes
    vals = func(nodes).astype(complex)
    declared = support if support is not None and support <= grid.last else None
    prof = SampledProfile(grid, vals, declared)
    return Coefficient(prof, True, support, func, kind, p)


def coefficient_from_profile(profile: SampledProfile, support_bound=None) -> Coefficient:
    """Coefficient defined by samples only (linear interpolation between nodes)."""
    if support_bound is None:
        nz = np.nonzero(profile.values)[0]
        if nz.size == 0:
            support_bound = 0.0
        elif nz[-1] < len(profile.grid) - 1:
            support_bound = float(profile.grid.nodes[nz[-1] + 1])
    return Coefficient(profile, profile.is_real, support_bound, None, "custom", {})


@dataclass(frozen=True, eq=False)
class KreinSolution:
    """Rows of ``P`` and ``P*`` at the nodes of ``r_grid`` for every k node.

    ``closure_index`` is the first node at or beyond the support of ``A``;
    rows past it (including rows past the stored grid) follow exactly from
    the free continuation.
    """

    r_grid: RadialGrid
    k_grid: SpectralGrid
    P: np.ndarray
    P_star: np.ndarray
    coefficient: Coefficient
    osc_factor: float = DEFAULT_OSC_FACTOR
    substeps: int = 1
    closure_index: Optional[int] = None

    def __post_init__(self):
        shape = (len(self.r_grid), len(self.k_grid))
        if self.P.shape != shape or self.P_star.shape != shape:
            raise ShapeError(f"solution matrices must have shape {shape}")
        for name in ("P", "P_star"):
            getattr(self, name).flags.writeable = False

    @property
    def k(self) -> np.ndarray:
        return self.k_grid.nodes

    @property
    def r(self) -> np.ndarray:
        return self.r_grid.nodes

    def rows(self, idx) -> tuple:
        """``(P, P*)`` rows at node indices ``idx`` (may exceed the stored grid)."""
        idx = np.asarray(idx, dtype=int)
        n = len(self.r_grid)
        if idx.size and idx.max() >= n:
            if self.closure_index is None:
                raise GridRangeError(
                    f"node {idx.max()} beyond stored grid and A has no support bound inside it")
        j0 = self.closure_index
        inner = idx if j0 is None else np.minimum(idx, j0)
        P = np.array(self.P[inner])
        Ps = np.array(self.P_star[inner])
        if j0 is not None:
            far = idx > j0
            if np.any(far):
                dr = (idx[far] - j0)[:, None] * self.r_grid.step
                P[far] = self.P[j0][None, :] * np.exp(1j * dr * self.k[None, :])
        return P, Ps

    @property
    def has_closure(self) -> bool:
        return self.closure_index is not None


def _substeps(step: float, kmax: float, osc_factor: float) -> int:
    return max(1, int(math.ceil(step * (1 + kmax) / osc_factor - 1e-12)))


def integrate_krein(A: Coefficient, r_grid: RadialGrid, k_grid: SpectralGrid,
                    osc_factor: float = DEFAULT_OSC_FACTOR) -> KreinSolution:
    """Integrate the Krein system with RK4 and record rows at ``r_grid`` nodes.

    The substep is ``h = step/n`` with the smallest ``n`` giving
    ``h <= osc_factor/(1+K_max)``, so ``h <= osc_factor/(1+|k|)`` for every k.
    """
    if len(k_grid) < 1 or len(r_grid) < 2:
        raise ShapeError("empty grid")
    if not osc_factor > 0:
        raise ShapeError("osc_factor must be positive")
    if A.func is None and A.profile.grid.step > r_grid.step * (1 + 1e-9):
        raise ShapeError("coefficient must be sampled at least as finely as r_grid")
    k = k_grid.nodes
    nk = k.size
    step = r_grid.step
    nsub = _substeps(step, k_grid.half_width, osc_factor)
    h = step / nsub
    n_nodes = len(r_grid)

    j0 = None
    if A.support_bound is not None:
        j = int(math.ceil(A.support_bound / step - 1e-9))
        if j < n_nodes:
            j0 = max(j, 0)
    n_rk = (n_nodes - 1) if j0 is None else j0

    P = np.empty((n_nodes, nk), dtype=complex)
    Ps = np.empty((n_nodes, nk), dtype=complex)
    P[0] = 1.0
    Ps[0] = 1.0

    if n_rk > 0:
        # overflow is reported below as a DivergenceError, not as warnings
        with np.errstate(over="ignore", invalid="ignore"):
            stage_r = (np.arange(2 * n_rk * nsub + 1) * (h / 2))
            a_stage = A(stage_r)
            ca_stage = np.conj(a_stage)
            ik = 1j * k
            p = np.ones(nk, dtype=complex)
            s = np.ones(nk, dtype=complex)
            h2, h6 = h / 2, h / 6
            for j in range(n_rk):
                for sub in range(nsub):
                    i2 = 2 * (j * nsub + sub)
                    a1, a2, a3 = a_stage[i2], a_stage[i2 + 1], a_stage[i2 + 2]
                    c1, c2, c3 = ca_stage[i2], ca_stage[i2 + 1], ca_stage[i2 + 2]
                    k1p = ik * p - c1 * s
                    k1s = -a1 * p
                    pt = p + h2 * k1p
                    st = s + h2 * k1s
                    k2p = ik * pt - c2 * st
                    k2s = -a2 * pt
                    pt = p + h2 * k2p
                    st = s + h2 * k2s
                    k3p = ik * pt - c2 * st
                    k3s = -a2 * pt
                    pt = p + h * k3p
                    st = s + h * k3s
                    k4p = ik * pt - c3 * st
                    k4s = -a3 * pt
                    p = p + h6 * (k1p + 2 * (k2p + k3p) + k4p)
                    s = s + h6 * (k1s + 2 * (k2s + k3s) + k4s)
                if not (np.all(np.isfinite(p)) and np.all(np.isfinite(s))):
                    bad = k[~(np.isfinite(p) & np.isfinite(s))]
                    raise DivergenceError(
                        f"non-finite values at r={(j + 1) * step} for k={bad[0]}")
                P[j + 1] = p
                Ps[j + 1] = s
    if j0 is not None:
        dr = (np.arange(n_nodes - j0) * step)[:, None]
        P[j0:] = P[j0][None, :] * np.exp(1j * dr * k[None, :])
        Ps[j0:] = Ps[j0][None, :]
        if j0 == 0:
            P[:] = np.exp(1j * r_grid.nodes[:, None] * k[None, :])
    log.debug("integrated Krein system: %d nodes, %d k values, %d substeps",
              n_nodes, nk, nsub)
    return KreinSolution(r_grid, k_grid, P, Ps, A, osc_factor, nsub, j0)


def residual_conjugation_identity(sol: KreinSolution) -> float:
    """Max of ``|P - exp(irk) conj(P*)|`` over the stored grid."""
    phase = np.exp(1j * sol.r[:, None] * sol.k[None, :])
    return float(np.max(np.abs(sol.P - phase * np.conj(sol.P_star))))


def residual_integral_identity(sol: KreinSolution) -> float:
    """Max of ``|P*(r) - 1 + int_0^r A P|`` over the stored grid."""
    a = sol.coefficient(sol.r)
    integral = cumulative_simpson(a[:, None] * sol.P, sol.r_grid.step)
    return float(np.max(np.abs(sol.P_star - 1 + integral)))


@dataclass(frozen=True, eq=False)
class SzegoFunction:
    """Boundary values of the Szego function on the spectral grid."""

    k_grid: SpectralGrid
    values: np.ndarray
    exact: bool = True
    tail_difference: Optional[np.ndarray] = None

    @property
    def min_modulus(self) -> float:
        return float(np.min(np.abs(self.values)))


def szego(sol: KreinSolution, tol: Optional[float] = None) -> SzegoFunction:
    """Pi(k) as ``P*`` beyond the support, or the last row when no support is known."""
    if sol.closure_index is not None:
        return SzegoFunction(sol.k_grid, np.array(sol.P_star[sol.closure_index]), True)
    tail = np.abs(sol.P_star[-1] - sol.P_star[-2])
    if tol is None:
        raise NonConvergenceError(
            "coefficient has no support bound inside the grid; supply a tail tolerance")
    worst = float(tail.max())
    if worst > tol:
        i = int(np.argmax(tail))
        raise NonConvergenceError(
            f"tail difference {worst:.3g} > {tol:.3g} at k={sol.k[i]}")
    return SzegoFunction(sol.k_grid, np.array(sol.P_star[-1]), False, tail)


def spectral_density(Pi: SzegoFunction,
                     zero_threshold: float = DEFAULT_ZERO_THRESHOLD) -> SpectralMeasure:
    """Absolutely continuous measure ``dk / (2 pi |Pi|^2)``."""
    if Pi.min_modulus < zero_threshold:
        raise SingularPartError(
            f"min |Pi| = {Pi.min_modulus:.3g} below threshold {zero_threshold:.3g}; "
            "a singular part may be present")
    return SpectralMeasure(Pi.k_grid, 1.0 / (2 * np.pi * np.abs(Pi.values) ** 2))


def stummel_norm(A: Coefficient) -> float:
    """``sup_r (int_r^{r+1} |A|^2)^(1/2)`` over window starts at profile nodes."""
    g = A.profile.grid
    if g.last < 1.0 - 1e-12:
        raise GridRangeError("profile grid shorter than one window")
    dens = np.abs(A.profile.values) ** 2
    cum = cumulative_simpson(dens, g.step)
    w = int(round(1.0 / g.step))
    if abs(w * g.step - 1.0) < 1e-9:
        windows = cum[w:] - cum[:-w] if w < len(cum) else cum[-1:]
    else:
        starts = g.nodes[g.nodes <= g.last - 1.0 + 1e-12]
        windows = np.interp(starts + 1.0, g.nodes, cum) - cum[:starts.size]
    return float(np.sqrt(max(float(np.max(windows)), 0.0)))


def normalization_curve(sol: KreinSolution, m: SpectralMeasure) -> np.ndarray:
    """``int |P(r,k)|^2/(1+k^2) dsigma`` for every stored r node."""
    if len(m.grid) != len(sol.k_grid):
        raise ShapeError("measure and solution use different spectral grids")
    w = m.quad_weights() / (1 + sol.k ** 2)
    return np.abs(sol.P) ** 2 @ w


def normalization_constant(sol: KreinSolution, m: SpectralMeasure) -> float:
    return float(np.max(normalization_curve(sol, m)))


class DiracEigenfunctions(NamedTuple):
    x_grid: RadialGrid
    phi: np.ndarray
    psi: np.ndarray
    E: np.ndarray


def dirac_x_grid(sol: KreinSolution, x_count: Optional[int] = None) -> RadialGrid:
    n = len(sol.r_grid) - 1
    if x_count is None:
        x_count = n
    if x_count > n and not sol.has_closure:
        raise GridRangeError(f"r grid too short for {x_count} x nodes")
    return RadialGrid(sol.r_grid.step / 2, x_count)


def dirac_eigenfunctions(sol: KreinSolution, x_count: Optional[int] = None
                         ) -> DiracEigenfunctions:
    """Dense ``E(x,k) = P(2x,k) exp(-ixk)`` with ``phi = Re E``, ``psi = Im E``.

    x nodes are the r nodes halved, so ``2 x_j = r_j``.
    """
    xg = dirac_x_grid(sol, x_count)
    x = xg.nodes
    P, _ = sol.rows(np.arange(len(xg)))
    E = P * np.exp(-1j * x[:, None] * sol.k[None, :])
    return DiracEigenfunctions(xg, E.real.copy(), E.imag.copy(), E)


# persistence ---------------------------------------------------------------

def _write_matrix(path: Path, r: np.ndarray, M: np.ndarray, k: np.ndarray):
    cols = [r]
    names = ["r"]
    for i, kv in enumerate(k):
        cols += [M[:, i].real, M[:, i].imag]
        names += [f"re_{i}", f"im_{i}"]
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=",".join(names),
               comments="", fmt="%.17g")


def _read_matrix(path: Path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1::2] + 1j * data[:, 2::2]


def save_solution(sol: KreinSolution, directory) -> Path:
    """Write ``meta.json``, ``P.csv``, ``Pstar.csv`` and the coefficient samples."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    A = sol.coefficient
    meta = {
        "r_grid": sol.r_grid.to_dict(),
        "k_grid": sol.k_grid.to_dict(),
        "coefficient": {"kind": A.kind, "params": A.params, "digest": A.digest(),
                        "support_bound": A.support_bound, "is_real": A.is_real},
        "solver": {"osc_factor": sol.osc_factor, "substeps": sol.substeps,
                   "closure_index": sol.closure_index, "method": "rk4"},
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True))
    _write_matrix(d / "P.csv", sol.r, sol.P, sol.k)
    _write_matrix(d / "Pstar.csv", sol.r, sol.P_star, sol.k)
    write_profile_csv(A.profile, d / "A.csv")
    return d


def load_solution(directory) -> KreinSolution:
    d = Path(directory)
    meta = json.loads((d / "meta.json").read_text())
    rg = RadialGrid(**meta["r_grid"])
    kg = SpectralGrid(**meta["k_grid"])
    cm = meta["coefficient"]
    prof = read_profile_csv(d / "A.csv")
    if cm["kind"] != "custom":
        A = make_coefficient(cm["kind"], cm["params"], prof.grid)
    else:
        A = coefficient_from_profile(prof, cm["support_bound"])
    sv = meta["solver"]
    return KreinSolution(rg, kg, _read_matrix(d / "P.csv"), _read_matrix(d / "Pstar.csv"), A,
                         sv["osc_factor"], sv["substeps"], sv["closure_index"])
