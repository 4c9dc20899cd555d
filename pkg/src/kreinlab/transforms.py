"""Generalized Fourier transforms for the (P, sigma), (E, sigma) and (psi, 2 sigma)
systems, and the odd-extension frequency split of half-line data.

Fourier convention: ``fhat(xi) = (2 pi)^(-1/2) int f(x) exp(-i xi x) dx``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ._fourier import PhaseBlocks
from .errors import DegenerateInputError, DomainError, ShapeError
from .grids import (RadialGrid, SampledProfile, SpectralFunction, SpectralGrid, SpectralMeasure,
                    norm_L2_sigma, quad_radial, quad_weights_to, simpson_weights)
from .krein import KreinSolution, dirac_x_grid

SQRT2PI = np.sqrt(2 * np.pi)


def forward_P(f: SampledProfile, sol: KreinSolution, a: float) -> SpectralFunction:
    """``F(k) = int_0^a f(r) P(r, k) dr`` by composite Simpson per k."""
    _check_step(f.grid, sol.r_grid.step)
    w = quad_weights_to(f.grid, a)
    n = int(np.max(np.nonzero(w)[0])) + 1 if np.any(w) else 1
    P, _ = sol.rows(np.arange(n))
    return SpectralFunction(sol.k_grid, (w[:n] * f.values[:n]) @ P)


def _check_step(grid: RadialGrid, step: float):
    if abs(grid.step - step) > 1e-12 * step:
        raise ShapeError(f"profile step {grid.step} differs from solution step {step}")


def plancherel_defect(f: SampledProfile, sol: KreinSolution, m: SpectralMeasure,
                      a: float) -> float:
    """Relative defect of ``||forward_P f||^2_sigma`` against ``int_0^a |f|^2``."""
    mass = quad_radial(SampledProfile(f.grid, np.abs(f.values) ** 2), 0.0, a).real
    if not mass > 0:
        raise DegenerateInputError("f has zero norm on [0, a]")
    F = forward_P(f, sol, a)
    return abs(norm_L2_sigma(F, m) ** 2 - mass) / mass


class DiracKernel:
    """Lazy ``E(x, k) = P(2x, k) exp(-ixk)`` on ``x_j = j * r_step / 2``.

    Rows with ``2x`` past the support of ``A`` equal ``exp(ixk) conj(Pi(k))``
    and are summed with blocked exponentials; the rows inside the support are
    kept as a dense matrix.
    """

    def __init__(self, sol: KreinSolution, x_count: Optional[int] = None):
        self.sol = sol
        self.x_grid = dirac_x_grid(sol, x_count)
        self.k = sol.k
        self.k_grid = sol.k_grid
        nx = len(self.x_grid)
        x = self.x_grid.nodes
        if sol.has_closure:
            jf = min(sol.closure_index, nx)
        else:
            jf = nx
        self.n_near = jf
        P, _ = sol.rows(np.arange(jf))
        self.E_near = P * np.exp(-1j * x[:jf, None] * self.k[None, :])
        if jf < nx:
            self.conj_pi = np.conj(sol.P_star[sol.closure_index])
            self._blocks = None
        else:
            self.conj_pi = None
            self._blocks = None

    @property
    def blocks(self) -> PhaseBlocks:
        if self._blocks is None:
            dx = self.x_grid.step
            nx = len(self.x_grid)
            self._blocks = PhaseBlocks(self.n_near * dx, dx, nx - self.n_near, self.k)
        return self._blocks

    @property
    def has_far(self) -> bool:
        return self.n_near < len(self.x_grid)

    def _check(self, v):
        v = np.asarray(v)
        if v.shape[0] != len(self.x_grid):
            raise ShapeError(f"expected {len(self.x_grid)} x samples, got {v.shape[0]}")
        return v

    def apply_E(self, v) -> np.ndarray:
        """``sum_j v_j E(x_j, k)``."""
        v = self._check(v)
        jf = self.n_near
        out = v[:jf] @ self.E_near
        if self.has_far:
            out = out + self.conj_pi * self.blocks.sum_x(v[jf:])
        return out

    def apply_Ebar(self, v) -> np.ndarray:
        """``sum_j v_j conj(E(x_j, k))``."""
        return np.conj(self.apply_E(np.conj(self._check(v))))

    def synth_E(self, a) -> np.ndarray:
        """``sum_m a_m E(x_j, k_m)`` for every x node."""
        a = np.asarray(a)
        jf = self.n_near
        out = np.empty(len(self.x_grid), dtype=complex)
        out[:jf] = self.E_near @ a
        if self.has_far:
            out[jf:] = self.blocks.sum_k(a * self.conj_pi)
        return out

    def synth_Ebar(self, a) -> np.ndarray:
        return np.conj(self.synth_E(np.conj(a)))

    def dense(self) -> np.ndarray:
        nx = len(self.x_grid)
        E = np.empty((nx, len(self.k)), dtype=complex)
        E[:self.n_near] = self.E_near
        if self.has_far:
            x = self.x_grid.nodes[self.n_near:]
            E[self.n_near:] = np.exp(1j * x[:, None] * self.k[None, :]) * self.conj_pi
        return E


Kernel = Union[DiracKernel, np.ndarray]


def _x_weights(f: SampledProfile) -> np.ndarray:
    return simpson_weights(len(f.grid) - 1, f.grid.step)


def _match(f: SampledProfile, kernel):
    if isinstance(kernel, DiracKernel):
        _check_step(f.grid, kernel.x_grid.step)
        if len(f.grid) != len(kernel.x_grid):
            raise ShapeError("profile and kernel x grids differ")
    elif np.asarray(kernel).shape[0] != len(f.grid):
        raise ShapeError("profile and eigenfunction matrix sizes differ")


def forward_E(f: SampledProfile, E: Kernel, m: Optional[SpectralMeasure] = None
              ) -> SpectralFunction:
    """``int f(x) E(x, k) dx``."""
    _match(f, E)
    v = _x_weights(f) * f.values
    if isinstance(E, DiracKernel):
        return SpectralFunction(E.k_grid, E.apply_E(v))
    vals = v @ np.asarray(E)
    return SpectralFunction(m.grid if m is not None else _grid_for(vals), vals)


def forward_psi(f: SampledProfile, psi: Kernel, m2: Optional[SpectralMeasure] = None
                ) -> SpectralFunction:
    """``F(k) = int f(x) psi(x, k) dx`` with ``psi = Im E``."""
    _match(f, psi)
    v = _x_weights(f) * f.values
    if isinstance(psi, DiracKernel):
        vals = (psi.apply_E(v) - psi.apply_Ebar(v)) / 2j
        grid = psi.k_grid
    else:
        vals = v @ np.asarray(psi)
        grid = m2.grid if m2 is not None else _grid_for(vals)
    if m2 is not None and len(m2.grid) != vals.size:
        raise ShapeError("measure grid does not match the kernel")
    return SpectralFunction(grid, vals)


def inverse_psi(F: SpectralFunction, psi: Kernel, m2: SpectralMeasure,
                x_grid: Optional[RadialGrid] = None) -> SampledProfile:
    """``f(x) = int F(k) psi(x, k) d(2 sigma)``."""
    if len(F.k_grid) != len(m2.grid):
        raise ShapeError("function and measure grids differ")
    a = F.values * m2.quad_weights()
    if m2.point_masses:
        raise ShapeError("point masses are not supported by the psi inversion")
    if isinstance(psi, DiracKernel):
        vals = (psi.synth_E(a) - psi.synth_Ebar(a)) / 2j
        return SampledProfile(psi.x_grid, vals)
    if x_grid is None:
        raise ShapeError("x_grid required with a dense psi matrix")
    return SampledProfile(x_grid, np.asarray(psi) @ a)


def _grid_for(vals) -> SpectralGrid:
    raise ShapeError("a measure is required to attach a grid to a dense transform")


def psi_plancherel_ratio(f: SampledProfile, psi: Kernel, m2: SpectralMeasure) -> float:
    F = forward_psi(f, psi, m2)
    nf = f.norm()
    if nf == 0:
        raise DegenerateInputError("f has zero norm")
    return norm_L2_sigma(F, m2) ** 2 / nf ** 2


def E_plancherel_defect(f: SampledProfile, E: Kernel, m: SpectralMeasure) -> float:
    nf = f.norm()
    if nf == 0:
        raise DegenerateInputError("f has zero norm")
    F = forward_E(f, E, m)
    return abs(norm_L2_sigma(F, m) ** 2 - nf ** 2) / nf ** 2


# odd extension and frequency split -----------------------------------------

@dataclass(frozen=True, eq=False)
class SplitData:
    """Transforms of the odd extension on the discrete Fourier grid.

    The grid holds bins ``-(N-1)..N-1``; the unpaired Nyquist bin is kept in
    ``nyquist`` so that the transform stays exactly invertible.
    """

    f_hat_odd: SpectralFunction
    f_hat_plus: SpectralFunction
    f_hat_minus: SpectralFunction
    nyquist: complex
    x_grid: RadialGrid

    @property
    def xi(self) -> np.ndarray:
        return self.f_hat_odd.nodes


def _odd_fft(values: np.ndarray, grid: RadialGrid):
    n = len(grid) - 1
    dx = grid.step
    g = np.zeros(2 * n, dtype=complex)
    g[1:n] = values[1:n]
    g[n + 1:] = -values[1:n][::-1]
    F = np.fft.fftshift(np.fft.fft(g)) * dx / SQRT2PI
    dxi = np.pi / (n * dx)
    return F, dxi


def _odd_ifft(F_shifted: np.ndarray, grid: RadialGrid) -> np.ndarray:
    n = len(grid) - 1
    g = np.fft.ifft(np.fft.ifftshift(F_shifted)) * SQRT2PI / grid.step
    return g[:n + 1]


def split_odd_extension(f: SampledProfile) -> SplitData:
    """DFT of the odd extension, split by the sign of the frequency.

    The value at the last node is treated as the (vanishing) periodic seam.
    """
    if not f.is_real:
        raise DomainError("split_odd_extension needs real-valued data")
    F, dxi = _odd_fft(f.values, f.grid)
    n = len(f.grid) - 1
    kg = SpectralGrid((n - 1) * dxi, dxi)
    odd = F[1:]
    xi = kg.nodes
    plus = np.where(xi > 0, odd, 0)
    minus = np.where(xi < 0, odd, 0)
    odd = np.where(xi == 0, 0, odd)
    return SplitData(SpectralFunction(kg, odd), SpectralFunction(kg, plus),
                     SpectralFunction(kg, minus), complex(F[0]), f.grid)


def unsplit(split: SplitData, multiplier=None) -> SampledProfile:
    """Invert a (possibly multiplied) odd-extension transform back to the half line."""
    F = np.empty(split.f_hat_odd.values.size + 1, dtype=complex)
    F[0] = split.nyquist
    F[1:] = split.f_hat_odd.values
    if multiplier is not None:
        xi = np.concatenate([[-(split.f_hat_odd.k_grid.m + 1) * split.f_hat_odd.k_grid.step],
                             split.xi])
        F = F * multiplier(xi)
    return SampledProfile(split.x_grid, _odd_ifft(F, split.x_grid))


def odd_fourier(f: SampledProfile, k: np.ndarray) -> np.ndarray:
    """``fhat_o(k)`` at arbitrary frequencies via sine quadrature on the half line."""
    w = simpson_weights(len(f.grid) - 1, f.grid.step) * f.values
    x = f.grid.nodes
    k = np.asarray(k, dtype=float)
    out = np.empty(k.shape, dtype=complex)
    flat = k.reshape(-1)
    res = out.reshape(-1)
    chunk = max(1, int(2e7 // max(x.size, 1)))
    for i in range(0, flat.size, chunk):
        kk = flat[i:i + chunk]
        res[i:i + chunk] = np.sin(np.outer(kk, x)) @ w
    return out * (-2j / SQRT2PI)


def parseval_ratio(split: SplitData) -> float:
    """``(||f+||^2 + ||f-||^2 + |nyquist|^2 dxi) / ||f_o||^2`` with discrete sums."""
    dxi = split.f_hat_odd.k_grid.step
    spectral = (np.sum(np.abs(split.f_hat_plus.values) ** 2)
                + np.sum(np.abs(split.f_hat_minus.values) ** 2) + abs(split.nyquist) ** 2) * dxi
    g = split.x_grid
    vals = unsplit(split).values
    n = len(g) - 1
    phys = 2 * np.sum(np.abs(vals[1:n]) ** 2) * g.step
    if phys == 0:
        return 1.0 if spectral == 0 else np.inf
    return float(spectral / phys)
