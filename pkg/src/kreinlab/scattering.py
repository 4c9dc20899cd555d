"""Free and perturbed Schrodinger propagation on the half line and the
wave-operator iterates ``u_t = exp(itH) exp(-itH0) f``.

``H = -d^2/dx^2 + a' + a^2`` with ``a(x) = 2 A(2x)`` and a Dirichlet condition
at ``x = 0``.  The spectral propagator works in the psi representation with
measure ``2 sigma``; the finite-difference propagator is an independent check.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import fresnel

from .errors import DomainError, DomainTooSmallError, GridRangeError, PreconditionError
from .grids import (RadialGrid, SampledProfile, SpectralFunction, SpectralMeasure,
                    norm_L2_sigma, simpson_weights)
from .krein import Coefficient, SzegoFunction, spectral_density
from .transforms import (SQRT2PI, DiracKernel, _odd_fft, _odd_ifft, forward_psi, inverse_psi,
                         odd_fourier, psi_plancherel_ratio, split_odd_extension, unsplit)

log = logging.getLogger(__name__)

WALL_NODES = 5
WALL_FRACTION = 1e-6


@dataclass(frozen=True, eq=False)
class Potential:
    a: SampledProfile
    v: SampledProfile
    q: Optional[SampledProfile] = None


def build_potential(A: Coefficient, x_grid: RadialGrid,
                    q: Optional[SampledProfile] = None) -> Potential:
    """``a(x) = 2 A(2x)`` on ``x_grid`` and ``v = a' + a^2`` (centered differences)."""
    if not A.is_real:
        raise DomainError("the Schrodinger correspondence needs a real coefficient")
    x = x_grid.nodes
    a = 2 * A(2 * x).real
    da = np.gradient(a, x_grid.step, edge_order=2)
    return Potential(SampledProfile(x_grid, a), SampledProfile(x_grid, da + a * a), q)


def _check_wall(values: np.ndarray, what: str):
    mass = np.abs(values) ** 2
    total = mass.sum()
    if total > 0 and mass[-WALL_NODES:].sum() > WALL_FRACTION * total:
        raise DomainTooSmallError(f"{what}: packet reached the far wall of the grid")


def l2_norm(values: np.ndarray, step: float) -> float:
    w = simpson_weights(values.size - 1, step)
    return float(np.sqrt(np.dot(w, np.abs(values) ** 2)))


def free_propagate(f: SampledProfile, t: float) -> SampledProfile:
    """``exp(-itH0) f``: restriction of ``exp(it d^2) f_o`` to the half line."""
    F, dxi = _odd_fft(f.values, f.grid)
    n = len(f.grid) - 1
    xi = dxi * np.arange(-n, n)
    F = F * np.exp(-1j * t * xi ** 2)
    out = _odd_ifft(F, f.grid)
    _check_wall(out, f"free propagation to t={t}")
    return SampledProfile(f.grid, out)


def perturbed_propagate_spectral(f: SampledProfile, t: float, psi: DiracKernel,
                                 m2: SpectralMeasure, tol: float = 1e-3) -> SampledProfile:
    """``exp(itH) f`` as ``inverse_psi(exp(itk^2) forward_psi(f))``.

    Refuses to run when the psi system fails its Plancherel check on a probe
    packet, since the propagator would then not be unitary.
    """
    _validate_kernel(psi, m2, tol)
    F = forward_psi(f, psi, m2)
    k = psi.k
    return inverse_psi(SpectralFunction(F.k_grid, F.values * np.exp(1j * t * k ** 2)), psi, m2)


def _validate_kernel(psi: DiracKernel, m2: SpectralMeasure, tol: float):
    key = (id(m2), tol)
    cache = getattr(psi, "_validated", {})
    if key not in cache:
        xg = psi.x_grid
        c = min(5.0, xg.last / 2)
        w = min(1.0, c / 6)
        probe = SampledProfile.from_function(xg, lambda x: np.exp(-((x - c) / w) ** 2))
        defect = abs(psi_plancherel_ratio(probe, psi, m2) - 1)
        cache[key] = defect
        psi._validated = cache
    if cache[key] > tol:
        raise PreconditionError(
            f"psi system Plancherel defect {cache[key]:.3g} exceeds {tol:.3g}")


def perturbed_propagate_fd(f: SampledProfile, t: float, v: Optional[SampledProfile],
                           dt: float) -> SampledProfile:
    """``exp(itH) f`` by Cayley (implicit midpoint) steps with Dirichlet walls.

    ``t/dt`` is rounded up to an integer number of equal steps.
    """
    g = f.grid
    n = len(g) - 1
    h = g.step
    steps = max(1, int(np.ceil(abs(t) / dt - 1e-9)))
    tau = t / steps
    pot = np.zeros(n + 1) if v is None else v.values.real
    main = 2.0 / h ** 2 + pot[1:n]
    off = -np.ones(n - 2) / h ** 2
    H = sp.diags([off, main, off], [-1, 0, 1], format="csc")
    eye = sp.identity(n - 1, format="csc")
    lhs = splu((eye - 0.5j * tau * H).tocsc())
    rhs = (eye + 0.5j * tau * H).tocsr()
    u = np.array(f.values[1:n], dtype=complex)
    for _ in range(steps):
        u = lhs.solve(rhs @ u)
    out = np.zeros(n + 1, dtype=complex)
    out[1:n] = u
    _check_wall(out, f"finite-difference propagation to t={t}")
    return SampledProfile(g, out)


# test class and scattering limit ------------------------------------------

def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def band_window(xi, xi_min: float, xi_max: float, ramp: float):
    """Smooth even window: 0 for ``|xi| <= xi_min`` and ``|xi| >= xi_max + ramp``."""
    ax = np.abs(xi)
    return smooth_step((ax - xi_min) / ramp) * (1 - smooth_step((ax - xi_max) / ramp))


def project_test_class(f: SampledProfile, xi_min: float = 0.5, xi_max: float = 12.0,
                       ramp: float = 0.5) -> SampledProfile:
    """Band-pass the odd extension so that ``fhat_o`` vanishes near 0 and at high |xi|."""
    split = split_odd_extension(f)
    out = unsplit(split, lambda xi: band_window(xi, xi_min, xi_max, ramp))
    return SampledProfile(f.grid, out.values.real)


def fhat_plus(f: SampledProfile) -> Callable:
    """``k -> fhat_o(k) chi(k > 0)`` by direct sine quadrature."""

    def ev(k):
        k = np.asarray(k, dtype=float)
        out = np.zeros(k.shape, dtype=complex)
        pos = k > 0
        if np.any(pos):
            out[pos] = odd_fourier(f, k[pos])
        return out

    return ev


@dataclass(frozen=True, eq=False)
class ScatteringLimit:
    p: SpectralFunction
    norm: float


def scattering_limit(f: SampledProfile, Pi: SzegoFunction,
                     zero_threshold: float = 1e-3) -> ScatteringLimit:
    """``p(k) = sqrt(2 pi) (conj(Pi) fhat+(-k) - Pi fhat+(k)) / (2i)`` and its 2 sigma norm."""
    m = spectral_density(Pi, zero_threshold)
    k = Pi.k_grid.nodes
    fp = fhat_plus(f)
    vals = SQRT2PI * (np.conj(Pi.values) * fp(-k) - Pi.values * fp(k)) / 2j
    p = SpectralFunction(Pi.k_grid, vals)
    return ScatteringLimit(p, norm_L2_sigma(p, m.scaled(2.0)))


@dataclass(frozen=True, eq=False)
class ScatteringRun:
    times: Tuple[float, ...]
    f: SampledProfile
    iterates: List[SampledProfile]
    norms: np.ndarray
    cauchy_gaps: np.ndarray
    transform_trajectory: List[SpectralFunction]
    predicted_limit: Optional[SpectralFunction] = None
    limit_norm: Optional[float] = None
    f_norm: float = 0.0


def wave_operator_run(f: SampledProfile, psi: DiracKernel, m2: SpectralMeasure,
                      times: Sequence[float], Pi: Optional[SzegoFunction] = None,
                      keep_iterates: bool = True, tol: float = 1e-3) -> ScatteringRun:
    """Iterates ``u_t = exp(itH) exp(-itH0) f`` for increasing ``times``.

    ``f`` must already be in the test class (see ``project_test_class``).  The
    recorded transform of ``u_t`` is ``exp(itk^2)`` times the psi transform of
    the freely evolved data, which is what the inverse transform consumes.
    """
    times = tuple(float(t) for t in times)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DomainError("times must be strictly increasing")
    _validate_kernel(psi, m2, tol)
    k = psi.k
    step = f.grid.step
    iterates, traj, norms = [], [], []
    prev = None
    gaps = []
    for t in times:
        g = free_propagate(f, t)
        F = forward_psi(g, psi, m2)
        Ft = SpectralFunction(F.k_grid, F.values * np.exp(1j * t * k ** 2))
        u = inverse_psi(Ft, psi, m2)
        traj.append(Ft)
        norms.append(l2_norm(u.values, step))
        if prev is not None:
            gaps.append(l2_norm(u.values - prev.values, step))
        prev = u
        if keep_iterates:
            iterates.append(u)
        log.info("wave operator iterate t=%g norm=%.12g", t, norms[-1])
    p = norm = None
    if Pi is not None:
        lim = scattering_limit(f, Pi)
        p, norm = lim.p, lim.norm
    return ScatteringRun(times, f, iterates, np.array(norms), np.array(gaps), traj, p, norm,
                         l2_norm(f.values, step))


def window_weights(m2: SpectralMeasure, window: Tuple[float, float]) -> np.ndarray:
    """Trapezoid weights of ``2 sigma`` restricted to the nodes inside ``window``.

    The trapezoid rule keeps window integrals of nonnegative data monotone
    under enlarging the window.
    """
    lo, hi = window
    if not hi > lo:
        raise DomainError(f"empty window {window}")
    k = m2.grid.nodes
    inside = np.nonzero((k >= lo - 1e-12) & (k <= hi + 1e-12))[0]
    w = np.zeros(k.size)
    if inside.size >= 2:
        w[inside] = m2.grid.step
        w[inside[0]] = w[inside[-1]] = m2.grid.step / 2
    return w * m2.density


def window_distance(F: SpectralFunction, p: SpectralFunction, m2: SpectralMeasure,
                    window: Tuple[float, float]) -> float:
    w = window_weights(m2, window)
    return float(np.sqrt(np.dot(w, np.abs(F.values - p.values) ** 2)))


@dataclass(frozen=True)
class ExhaustionReport:
    times: Tuple[float, ...]
    window: Tuple[float, float]
    window_distances: Tuple[float, ...]
    norm_defects: Tuple[float, ...]
    window_tol: float
    norm_tol: float
    passed: bool


def exhaustion_diagnostic(run: ScatteringRun, m2: SpectralMeasure,
                          window: Tuple[float, float] = (1.0, 9.0),
                          window_tol: float = 5e-2, norm_tol: float = 1e-3) -> ExhaustionReport:
    """Windowed distance of the psi transforms of ``u_t`` to ``p`` plus norm drift."""
    if run.predicted_limit is None:
        raise PreconditionError("run has no predicted limit attached")
    dists = tuple(window_distance(F, run.predicted_limit, m2, window)
                  for F in run.transform_trajectory)
    drift = tuple(float(abs(n - run.f_norm)) for n in run.norms)
    ok = bool(dists[-1] < window_tol and drift[-1] < norm_tol) if dists else False
    return ExhaustionReport(run.times, tuple(window), dists, drift, window_tol, norm_tol, ok)


def spectral_I(fp: Callable, t: float, psi: DiracKernel, band: Tuple[float, float]
               ) -> SpectralFunction:
    """``exp(itk^2)/(1+i) int exp(ix^2/4t)/sqrt(t) fhat+(x/2t) psi(x,k) dx``.

    ``fp`` evaluates ``fhat+``; ``band = (a, b)`` bounds its support so the
    integrand lives on ``[2at, 2bt]``.
    """
    a, b = band
    if t < 1:
        raise PreconditionError("t must be at least 1")
    xg = psi.x_grid
    if 2 * b * t > xg.last:
        raise GridRangeError(f"x grid ends at {xg.last} < 2bt = {2 * b * t}")
    x = xg.nodes
    inside = (x >= 2 * a * t) & (x <= 2 * b * t)
    g = np.zeros(x.size, dtype=complex)
    xs = x[inside]
    g[inside] = np.exp(1j * xs ** 2 / (4 * t)) / np.sqrt(t) * fp(xs / (2 * t))
    F = forward_psi(SampledProfile(xg, g), psi)
    k = psi.k
    return SpectralFunction(F.k_grid, F.values * np.exp(1j * t * k ** 2) / (1 + 1j))


def fresnel_integral(lo, hi):
    """``int_lo^hi exp(iu^2) du`` from the classical Fresnel integrals."""
    c = np.sqrt(2 / np.pi)

    def F(z):
        s, cc = fresnel(np.asarray(z) * c)
        return np.sqrt(np.pi / 2) * (cc + 1j * s)

    return F(hi) - F(lo)


def free_I_box(k, t: float, a: float, b: float, height: complex = 1.0):
    """Closed form of ``spectral_I`` for ``A = 0`` and ``fhat+ = height * chi_[a,b]``."""
    k = np.asarray(k, dtype=float)
    st = np.sqrt(t)
    plus = fresnel_integral(st * (a + k), st * (b + k))
    minus = fresnel_integral(st * (a - k), st * (b - k))
    return height * (plus - minus) / (1j * (1 + 1j))


def required_extent(center: float, width: float, top_frequency: float, t_max: float) -> float:
    """Domain sizing rule: packet center plus ``2 b t_max + 6 width``."""
    return center + 2 * top_frequency * t_max + 6 * width
