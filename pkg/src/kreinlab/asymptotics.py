"""Fresnel function, stationary-phase bound and free-evolution asymptotics."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from ._fourier import PhaseBlocks
from .errors import DomainError, DomainTooSmallError, GridRangeError, PreconditionError

H0 = complex(math.sqrt(math.pi) / 2 * np.exp(1j * math.pi / 4))
_POW_I = (1, 1j, -1, -1j)


def _quad(*args, **kwargs) -> float:
    # results are checked against closed forms; QUADPACK roundoff notes are noise here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(*args, **kwargs)[0]


# Fresnel function ------------------------------------------------------------

def fresnel_coeffs_exact(n: int) -> List[Tuple[Fraction, int]]:
    """Coefficients ``c_j = q_j * i**p_j`` as exact ``(q_j, p_j mod 4)`` pairs.

    Repeated integration by parts of ``1/2 int_X^inf e^{iu} u^{-1/2} du``
    gives ``c_0 = i/2`` and ``c_{j+1} = c_j * (-i) * (j + 1/2)``.
    """
    if n < 1:
        raise DomainError("order must be at least 1")
    out = [(Fraction(1, 2), 1)]
    for j in range(n - 1):
        q, p = out[-1]
        out.append((q * (Fraction(2 * j + 1, 2)), (p + 3) % 4))
    return out


def fresnel_coeffs(n: int) -> np.ndarray:
    return np.array([float(q) * _POW_I[p] for q, p in fresnel_coeffs_exact(n)], dtype=complex)


def remainder_coeff(n: int) -> complex:
    """Constant in front of ``int_{x^2}^inf e^{iu} u^{-(n+1/2)} du`` after n steps."""
    q = Fraction(1, 2)
    for j in range(n):
        q *= Fraction(2 * j + 1, 2)
    return float(q) * _POW_I[(3 * n) % 4]


def _osc_tail(X: float, s: float) -> complex:
    """``int_X^inf e^{iu} u^{-s} du`` via the Fourier-weight quadrature."""
    f = lambda u: u ** (-s)
    c = _quad(f, X, np.inf, weight="cos", wvar=1.0, limlst=200)
    si = _quad(f, X, np.inf, weight="sin", wvar=1.0, limlst=200)
    return complex(c, si)


def fresnel_quadrature(x: float) -> complex:
    """``H(0) - int_0^x e^{it^2} dt`` by adaptive quadrature."""
    if x == 0:
        return H0
    lim = max(200, int(10 * x * x))
    re = _quad(lambda t: math.cos(t * t), 0, x, limit=lim, epsabs=1e-15, epsrel=1e-13)
    im = _quad(lambda t: math.sin(t * t), 0, x, limit=lim, epsabs=1e-15, epsrel=1e-13)
    return H0 - complex(re, im)


@dataclass(frozen=True)
class FresnelSeries:
    value: complex
    partial_sum: complex
    last_term: float
    remainder: complex


def fresnel_series(x: float, n: int = 3, exact_remainder: bool = True) -> FresnelSeries:
    """Order-n expansion ``e^{ix^2} sum c_j x^{-1-2j}`` plus the integral remainder."""
    c = fresnel_coeffs(n)
    phase = np.exp(1j * x * x)
    terms = [c[j] * phase / x ** (1 + 2 * j) for j in range(n)]
    partial = complex(sum(terms))
    rem = remainder_coeff(n) * _osc_tail(x * x, n + 0.5) if exact_remainder else 0j
    return FresnelSeries(partial + rem, partial, float(abs(terms[-1])), rem)


@dataclass(frozen=True)
class FresnelExpansion:
    order: int = 3
    crossover: float = 3.0

    @property
    def coefficients(self) -> np.ndarray:
        return fresnel_coeffs(self.order)

    def __call__(self, x: float) -> complex:
        return fresnel_H(x, self.crossover, self.order)


def fresnel_H(x: float, x0: float = 3.0, n: int = 3, tol: Optional[float] = None) -> complex:
    """``H(x) = int_x^inf e^{it^2} dt`` for ``x >= 0``.

    Below ``x0`` the value comes from quadrature on ``[0, x]``; above it from
    the order-``n`` expansion with its remainder integral evaluated by
    Fourier-weight quadrature.  If ``tol`` is given and the last series term
    exceeds it, a PreconditionError flags the truncated series as too coarse.
    """
    if x < 0:
        raise DomainError("H is evaluated for x >= 0 only")
    if x < x0:
        return fresnel_quadrature(x)
    s = fresnel_series(x, n)
    if tol is not None and s.last_term > tol:
        raise PreconditionError(f"last series term {s.last_term:.3g} exceeds tol {tol:.3g}")
    return s.value


# stationary phase ------------------------------------------------------------

@dataclass(frozen=True)
class PhaseReport:
    eps: Tuple[float, ...]
    a: Tuple[float, ...]
    integrals: Tuple[complex, ...]
    ratios: Tuple[float, ...]
    ceiling: float
    passed: bool


def oscillatory_integral(g: Callable, eps: float, a: float) -> complex:
    """``int_0^a e^{iu^2} g(u eps) du``.

    Substituting ``s = u^2`` gives a Fourier-type integral with the slowly
    varying amplitude ``g(eps sqrt(s)) / (2 sqrt(s))``; the head ``s < 1`` is
    done with plain adaptive quadrature in ``u``, the rest with the
    Fourier-weight rule.
    """
    head = min(a, 1.0)
    re = _quad(lambda u: math.cos(u * u) * g(u * eps), 0, head, epsabs=1e-15)
    im = _quad(lambda u: math.sin(u * u) * g(u * eps), 0, head, epsabs=1e-15)
    out = complex(re, im)
    if a > 1.0:
        amp = lambda s: g(eps * math.sqrt(s)) / (2 * math.sqrt(s))
        lim = 2000
        cr = _quad(amp, 1.0, a * a, weight="cos", wvar=1.0, limit=lim, epsabs=1e-15)
        ci = _quad(amp, 1.0, a * a, weight="sin", wvar=1.0, limit=lim, epsabs=1e-15)
        out += complex(cr, ci)
    return out


def stationary_phase_check(g: Callable, eps_values: Sequence[float], nu: float = 1.0,
                           a: Optional[float] = None, ceiling: float = 10.0) -> PhaseReport:
    """Ratios ``|int_0^a e^{iu^2} g(u eps) du| / eps`` over ``eps_values``.

    With ``a`` omitted each eps uses the largest admissible ``a = nu/eps``.
    """
    if abs(g(0.0)) > 1e-14:
        raise PreconditionError("g(0) must vanish")
    avals, ints, ratios = [], [], []
    for e in eps_values:
        if not 0 < e < 1:
            raise PreconditionError("eps must lie in (0, 1)")
        ae = nu / e if a is None else a
        if abs(ae * e) > nu * (1 + 1e-12):
            raise PreconditionError(f"|a*eps| = {ae * e} exceeds nu = {nu}")
        val = oscillatory_integral(g, e, ae)
        avals.append(ae)
        ints.append(val)
        ratios.append(abs(val) / e)
    return PhaseReport(tuple(eps_values), tuple(avals), tuple(ints), tuple(ratios), ceiling,
                       bool(max(ratios) < ceiling))


# free evolution on the line --------------------------------------------------

@dataclass(frozen=True, eq=False)
class LineProfile:
    """Samples at ``x_j = (j - N) * step``, ``j = 0..2N``."""

    step: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size % 2 == 0 or v.size < 3:
            raise DomainError("line profiles need an odd number (>= 3) of samples")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, step: float, half_count: int, func: Callable) -> "LineProfile":
        x = step * np.arange(-half_count, half_count + 1)
        return cls(step, np.asarray(func(x), dtype=complex) * np.ones(x.size))

    @property
    def nodes(self) -> np.ndarray:
        n = self.values.size // 2
        return self.step * np.arange(-n, n + 1)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.step))


def line_propagate(h: LineProfile, t: float) -> LineProfile:
    """``exp(it d^2) h`` with the multiplier ``exp(-it xi^2)`` on the periodic grid."""
    v = np.fft.ifftshift(h.values)
    xi = 2 * np.pi * np.fft.fftfreq(v.size, h.step)
    out = np.fft.fftshift(np.fft.ifft(np.fft.fft(v) * np.exp(-1j * t * xi ** 2)))
    mass = np.abs(out) ** 2
    if mass[:5].sum() + mass[-5:].sum() > 1e-6 * mass.sum():
        raise DomainTooSmallError(f"line propagation to t={t} reached the grid edge")
    return LineProfile(h.step, out)


def line_fourier(h: LineProfile, xi: np.ndarray, cutoff: float = 1e-17) -> np.ndarray:
    """``hhat(xi) = (2 pi)^(-1/2) int h(x) e^{-i xi x} dx`` at arbitrary ``xi``."""
    v = h.values
    big = np.nonzero(np.abs(v) > cutoff * max(np.abs(v).max(), 1e-300))[0]
    if big.size == 0:
        return np.zeros(np.shape(xi), dtype=complex)
    lo, hi = big[0], big[-1] + 1
    x = h.nodes
    xi = np.asarray(xi, dtype=float)
    blocks = PhaseBlocks(x[lo], h.step, hi - lo, -xi)
    out = blocks.sum_x(v[lo:hi] * h.step) / math.sqrt(2 * math.pi)
    # the sampled transform is periodic; keep only the principal band
    return np.where(np.abs(xi) <= np.pi / h.step, out, 0.0)


def comparison_profile(h: LineProfile, t: float) -> LineProfile:
    """``(1/(1+i)) e^{ix^2/4t} t^{-1/2} hhat(x/2t)`` on the nodes of ``h``."""
    x = h.nodes
    vals = np.exp(1j * x * x / (4 * t)) / math.sqrt(t) * line_fourier(h, x / (2 * t)) / (1 + 1j)
    return LineProfile(h.step, vals)


def free_asymptotic_defect(h: LineProfile, t: float) -> float:
    """L2 distance between ``exp(it d^2) h`` and its explicit large-t profile."""
    if t < 1:
        raise PreconditionError("t must be at least 1")
    u = line_propagate(h, t)
    c = comparison_profile(h, t)
    return float(np.sqrt(np.sum(np.abs(u.values - c.values) ** 2) * h.step))


# uniform bound -----------------------------------------------------------------

@dataclass(frozen=True)
class UniformReport:
    times: Tuple[float, ...]
    sup_by_time: Tuple[float, ...]
    global_sup: float
    flatness: float
    ceiling: float
    flat_tol: float
    passed: bool


def gaussian_band(center: float, width: float = 1.0, cutoff: float = 1e-14,
                  amplitude: float = 1.0):
    """``amplitude * exp(-((xi - center)/width)^2)`` truncated where it drops below cutoff.

    Returns the evaluator and its support interval.
    """
    half = width * math.sqrt(math.log(abs(amplitude) / cutoff)) if amplitude else 0.0
    lo, hi = center - half, center + half

    def hh(xi):
        xi = np.asarray(xi, dtype=float)
        return np.where((xi >= lo) & (xi <= hi),
                        amplitude * np.exp(-((xi - center) / width) ** 2), 0.0)

    return hh, (lo, hi)


def uniform_integral(hhat: Callable, support: Tuple[float, float], t: float, alpha: float,
                     beta: float, k: np.ndarray, x_extent: Optional[float] = None,
                     points_per_radian: float = 10.0) -> np.ndarray:
    """``int_{alpha t}^{beta t} e^{ix^2/4t} t^{-1/2} hhat(x/2t) e^{ixk} dx`` for each k."""
    lo = max(alpha * t, 2 * t * support[0])
    hi = min(beta * t, 2 * t * support[1])
    if x_extent is not None and max(abs(alpha), abs(beta)) * t > x_extent:
        raise GridRangeError(
            f"x grid extent {x_extent} shorter than {max(abs(alpha), abs(beta)) * t}")
    k = np.asarray(k, dtype=float)
    if hi <= lo:
        return np.zeros(k.size, dtype=complex)
    speed = max(abs(lo), abs(hi)) / (2 * t) + np.abs(k).max() + 1.0
    n = max(64, int(math.ceil((hi - lo) * speed * points_per_radian)))
    n += n % 2
    x = np.linspace(lo, hi, n + 1)
    dx = x[1] - x[0]
    w = np.full(n + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= dx / 3
    g = w * np.exp(1j * x * x / (4 * t)) / math.sqrt(t) * hhat(x / (2 * t))
    return PhaseBlocks(lo, dx, n + 1, k).sum_x(g)


def uniform_bound_check(hhat: Callable, support: Tuple[float, float], t_grid: Sequence[float],
                        alphas: Sequence[float], betas: Sequence[float], k: np.ndarray,
                        ceiling: float = 10.0, flat_tol: float = 0.25,
                        x_extent: Optional[float] = None) -> UniformReport:
    """Sup over k and the (alpha, beta) lattice of ``uniform_integral`` for each t.

    Flatness is ``(max - min) / max`` of the per-time sups.
    """
    sups = []
    for t in t_grid:
        if t < 1:
            raise PreconditionError("t must be at least 1")
        s = 0.0
        for al in alphas:
            for be in betas:
                if be <= al:
                    continue
                vals = uniform_integral(hhat, support, t, al, be, k, x_extent)
                s = max(s, float(np.abs(vals).max()))
        sups.append(s)
    top = max(sups) if sups else 0.0
    flat = (top - min(sups)) / top if top > 0 else 0.0
    return UniformReport(tuple(t_grid), tuple(sups), top, flat, ceiling, flat_tol,
                         bool(top < ceiling and flat < flat_tol))
