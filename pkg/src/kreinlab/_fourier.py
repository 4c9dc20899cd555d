"""Blocked evaluation of dense exponential sums on uniform x grids.

For ``x_j = x0 + j*dx`` and arbitrary ``k_m`` the sums

    S(k_m) = sum_j v_j exp(i x_j k_m)      and      T(x_j) = sum_m a_m exp(i x_j k_m)

are computed by writing ``j = c*B + b`` so that the exponential factors into a
``B x Nk`` base table and a ``C x Nk`` phase table.  Work stays O(Nx*Nk) but
runs as one matrix product and only ``(B + C)*Nk`` exponentials are needed.
"""

import math

import numpy as np


class PhaseBlocks:
    def __init__(self, x0: float, dx: float, n: int, k: np.ndarray, block: int = 0):
        self.n = int(n)
        self.k = np.asarray(k, dtype=float)
        b = block or max(16, int(math.sqrt(max(self.n, 1))))
        self.B = b
        self.C = max(1, -(-self.n // b))
        self.base = np.exp(1j * np.outer(np.arange(b) * dx, self.k))
        starts = x0 + np.arange(self.C) * (b * dx)
        self.phase = np.exp(1j * np.outer(starts, self.k))

    def _blocks(self, v):
        g = np.zeros(self.C * self.B, dtype=complex)
        g[:self.n] = v
        return g.reshape(self.C, self.B)

    def sum_x(self, v) -> np.ndarray:
        """``sum_j v_j exp(i x_j k)`` for every k."""
        t = self._blocks(v) @ self.base
        return np.einsum("cm,cm->m", t, self.phase)

    def sum_x_conj(self, v) -> np.ndarray:
        """``sum_j v_j exp(-i x_j k)`` for every k."""
        return np.conj(self.sum_x(np.conj(v)))

    def sum_k(self, a) -> np.ndarray:
        """``sum_m a_m exp(i x_j k_m)`` for every x node."""
        y = (self.phase * np.asarray(a)[None, :]) @ self.base.T
        return y.reshape(-1)[:self.n]

    def sum_k_conj(self, a) -> np.ndarray:
        """``sum_m a_m exp(-i x_j k_m)`` for every x node."""
        return np.conj(self.sum_k(np.conj(a)))
