"""Uniform grids, sampled functions, spectral measures and quadrature."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import GridRangeError, ShapeError

_SNAP = 1e-9


def _frozen(a, dtype=None) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class RadialGrid:
    """Nodes ``r_j = j*step`` for ``j = 0..count``."""

    step: float
    count: int

    def __post_init__(self):
        if not (np.isfinite(self.step) and self.step > 0):
            raise ShapeError(f"grid step must be positive, got {self.step}")
        if int(self.count) != self.count or self.count < 2:
            raise ShapeError(f"grid count must be an integer >= 2, got {self.count}")
        object.__setattr__(self, "count", int(self.count))

    @classmethod
    def from_extent(cls, step: float, extent: float) -> "RadialGrid":
        n = int(round(extent / step))
        if abs(n * step - extent) > _SNAP * max(1.0, extent):
            n = int(np.ceil(extent / step))
        return cls(step, n)

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(self.count + 1)

    @property
    def last(self) -> float:
        return self.step * self.count

    def __len__(self):
        return self.count + 1

    def index(self, r: float) -> int:
        """Index of the node at ``r``; raises if ``r`` is not a node."""
        j = int(round(r / self.step))
        if abs(j * self.step - r) > _SNAP * max(1.0, abs(r)) or j < 0:
            raise GridRangeError(f"r={r} is not a node of the grid with step {self.step}")
        return j

    def to_dict(self):
        return {"step": self.step, "count": self.count}


@dataclass(frozen=True)
class SpectralGrid:
    """Symmetric grid ``k_i = i*step``, ``i = -M..M``, with ``M*step = half_width``."""

    half_width: float
    step: float

    def __post_init__(self):
        if not (self.half_width > 0 and self.step > 0):
            raise ShapeError("spectral grid needs positive half_width and step")
        m = int(round(self.half_width / self.step))
        if m < 1 or abs(m * self.step - self.half_width) > _SNAP * self.half_width:
            raise ShapeError(
                f"half_width {self.half_width} is not a multiple of step {self.step}")
        object.__setattr__(self, "_m", m)

    @property
    def m(self) -> int:
        return self._m

    @property
    def nodes(self) -> np.ndarray:
        return self.step * np.arange(-self._m, self._m + 1)

    def __len__(self):
        return 2 * self._m + 1

    @property
    def zero_index(self) -> int:
        return self._m

    def to_dict(self):
        return {"half_width": self.half_width, "step": self.step}


def simpson_weights(n_intervals: int, h: float) -> np.ndarray:
    """Composite quadrature weights on ``n_intervals + 1`` equispaced nodes.

    Simpson for an even number of intervals; for an odd number the last three
    intervals use the 3/8 rule; a single interval uses the trapezoid rule.
    """
    n = int(n_intervals)
    if n < 0:
        raise GridRangeError("negative interval count")
    w = np.zeros(n + 1)
    if n == 0:
        return w
    if n == 1:
        w[:] = h / 2
        return w
    ns = n if n % 2 == 0 else n - 3
    if ns > 0:
        w[0:ns + 1:2] += 2 * h / 3
        w[1:ns:2] += 4 * h / 3
        w[0] -= h / 3
        w[ns] -= h / 3
    if ns != n:
        w[ns:ns + 4] += 3 * h / 8 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


def cumulative_simpson(values: np.ndarray, h: float) -> np.ndarray:
    """Running integrals from the first node to every node along axis 0.

    Even nodes are exact composite Simpson sums; odd nodes add a half panel
    with the three-point formula, so every entry is fourth-order accurate.
    """
    f = np.asarray(values)
    n = f.shape[0] - 1
    out = np.zeros_like(f, dtype=np.result_type(f, float))
    if n < 1:
        return out
    if n == 1:
        out[1] = h * (f[0] + f[1]) / 2
        return out
    panels = h / 3 * (f[0:n - 1:2] + 4 * f[1:n:2] + f[2:n + 1:2])
    out[2:n + 1:2] = np.cumsum(panels, axis=0)
    # odd nodes 2p+1 with a node 2p+2 available
    lo = f[0:n - 1:2]
    mid = f[1:n:2]
    hi = f[2:n + 1:2]
    out[1:n:2] = out[0:n - 1:2] + h * (5 * lo + 8 * mid - hi) / 12
    if n % 2 == 1:
        out[n] = out[n - 1] + h * (-f[n - 2] + 8 * f[n - 1] + 5 * f[n]) / 12
    return out


@dataclass(frozen=True, eq=False)
class SampledProfile:
    """Complex function sampled on a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray
    declared_support: Optional[float] = None

    def __post_init__(self):
        v = _frozen(self.values, complex)
        if v.ndim != 1 or v.size != len(self.grid):
            raise ShapeError(f"expected {len(self.grid)} values, got shape {v.shape}")
        if self.declared_support is not None:
            beyond = self.grid.nodes > self.declared_support * (1 + _SNAP)
            if np.any(v[beyond] != 0):
                raise ShapeError("values must vanish beyond declared_support")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: RadialGrid, func: Callable, declared_support=None):
        return cls(grid, np.asarray(func(grid.nodes), dtype=complex) * np.ones(len(grid)),
                   declared_support)

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values.imag == 0))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        x = self.grid.nodes
        return np.interp(r, x, self.values.real) + 1j * np.interp(r, x, self.values.imag)

    def scaled(self, c) -> "SampledProfile":
        return SampledProfile(self.grid, c * self.values, self.declared_support)

    def with_values(self, values) -> "SampledProfile":
        return SampledProfile(self.grid, values)

    def norm(self) -> float:
        return float(np.sqrt(quad_radial(abs2(self), 0.0, self.grid.last).real))


def abs2(p: SampledProfile) -> SampledProfile:
    return SampledProfile(p.grid, np.abs(p.values) ** 2)


def quad_radial(p: SampledProfile, a: float, b: float) -> complex:
    """Composite Simpson integral of ``p`` over ``[a, b]``.

    Endpoints off the grid are handled with trapezoid pieces that use linear
    interpolation between neighbouring nodes.
    """
    g = p.grid
    last = g.last
    tol = _SNAP * max(1.0, last)
    if not (-tol <= a <= b <= last + tol):
        raise GridRangeError(f"interval [{a}, {b}] outside grid [0, {last}]")
    a = min(max(a, 0.0), last)
    b = min(max(b, 0.0), last)
    h = g.step
    v = p.values
    ia = int(np.ceil(a / h - _SNAP))
    ib = int(np.floor(b / h + _SNAP))
    if ia > ib:
        return complex((b - a) * (p(a) + p(b)) / 2)
    total = complex(np.dot(simpson_weights(ib - ia, h), v[ia:ib + 1]))
    ra, rb = ia * h, ib * h
    if ra - a > tol:
        total += (ra - a) * (complex(p(a)) + v[ia]) / 2
    if b - rb > tol:
        total += (b - rb) * (v[ib] + complex(p(b))) / 2
    return total


def quad_weights_to(grid: RadialGrid, a: float) -> np.ndarray:
    """Weight vector ``w`` with ``w @ values == quad_radial(p, 0, a)``."""
    n = len(grid)
    w = np.zeros(n)
    h = grid.step
    ib = int(np.floor(a / h + _SNAP))
    if a < -_SNAP or a > grid.last * (1 + _SNAP):
        raise GridRangeError(f"endpoint {a} outside grid [0, {grid.last}]")
    w[:ib + 1] = simpson_weights(ib, h)
    rest = a - ib * h
    if rest > _SNAP * max(1.0, a) and ib + 1 < n:
        t = rest / h
        # trapezoid on [r_ib, a] with p(a) interpolated
        w[ib] += rest * (1 + (1 - t)) / 2
        w[ib + 1] += rest * t / 2
    return w


@dataclass(frozen=True, eq=False)
class SpectralFunction:
    """Complex values on a SpectralGrid."""

    k_grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values, complex)
        if v.shape != (len(self.k_grid),):
            raise ShapeError(f"expected {len(self.k_grid)} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def nodes(self):
        return self.k_grid.nodes

    def __add__(self, other):
        _same_grid(self.k_grid, other.k_grid)
        return SpectralFunction(self.k_grid, self.values + other.values)

    def __sub__(self, other):
        _same_grid(self.k_grid, other.k_grid)
        return SpectralFunction(self.k_grid, self.values - other.values)

    def scaled(self, c):
        return SpectralFunction(self.k_grid, c * self.values)


def _same_grid(a: SpectralGrid, b: SpectralGrid):
    if len(a) != len(b) or abs(a.step - b.step) > _SNAP * a.step:
        raise ShapeError("spectral grids differ")


@dataclass(frozen=True, eq=False)
class SpectralMeasure:
    """Absolutely continuous density on a SpectralGrid plus point masses."""

    grid: SpectralGrid
    density: np.ndarray
    point_masses: Tuple[Tuple[float, float], ...] = ()
    ceiling: float = 1e8

    def __post_init__(self):
        d = _frozen(self.density, float)
        if d.shape != (len(self.grid),):
            raise ShapeError("density length does not match grid")
        if np.any(~np.isfinite(d)) or np.any(d < 0):
            raise ShapeError("density must be finite and nonnegative")
        masses = tuple((float(k), float(w)) for k, w in self.point_masses)
        if any(w <= 0 for _, w in masses):
            raise ShapeError("point-mass weights must be positive")
        object.__setattr__(self, "density", d)
        object.__setattr__(self, "point_masses", masses)
        k = self.grid.nodes
        sanity = float(np.dot(self.quad_weights(), 1 / (1 + k ** 2)))
        sanity += sum(w / (1 + x ** 2) for x, w in masses)
        if not sanity <= self.ceiling:
            raise ShapeError(f"integral of dsigma/(1+k^2) = {sanity} exceeds ceiling")

    def quad_weights(self) -> np.ndarray:
        """Simpson weights times density: ``sum(F * w)`` approximates ``int F dsigma``."""
        return simpson_weights(len(self.grid) - 1, self.grid.step) * self.density

    def scaled(self, c: float) -> "SpectralMeasure":
        return SpectralMeasure(self.grid, c * self.density,
                               tuple((k, c * w) for k, w in self.point_masses), self.ceiling)

    def integrate(self, values) -> complex:
        vals = np.asarray(values)
        out = np.dot(self.quad_weights(), vals)
        k = self.grid.nodes
        for x, w in self.point_masses:
            out = out + w * (np.interp(x, k, vals.real) + 1j * np.interp(x, k, vals.imag))
        return out


def _spectral_values(F, m: SpectralMeasure) -> np.ndarray:
    if isinstance(F, SpectralFunction):
        _same_grid(F.k_grid, m.grid)
        F = F.values
    F = np.asarray(F)
    if F.shape[0] != len(m.grid):
        raise ShapeError(f"function has {F.shape[0]} values, grid has {len(m.grid)}")
    return F


def norm_L2_sigma(F: Union[SpectralFunction, np.ndarray], m: SpectralMeasure,
                  weight: Optional[Union[Callable, np.ndarray]] = None) -> float:
    """Weighted ``L^2(sigma)`` norm; ``weight`` is the factor multiplying the measure."""
    F = _spectral_values(F, m)
    k = m.grid.nodes
    if weight is None:
        wv = np.ones(len(k))
    else:
        wv = np.asarray(weight(k) if callable(weight) else weight, dtype=float)
    total = float(np.dot(m.quad_weights(), np.abs(F) ** 2 * wv))
    for x, w in m.point_masses:
        fx = np.interp(x, k, F.real) + 1j * np.interp(x, k, F.imag)
        kx = weight(x) if callable(weight) else np.interp(x, k, wv)
        total += w * abs(fx) ** 2 * kx
    return float(np.sqrt(max(total, 0.0)))


def log_weight_functional(f: SampledProfile) -> float:
    """Discrete ``int |f|^2 log^2(2+r) dr`` over the whole grid."""
    r = f.grid.nodes
    dens = SampledProfile(f.grid, np.abs(f.values) ** 2 * np.log(2 + r) ** 2)
    return float(quad_radial(dens, 0.0, f.grid.last).real)


# serialization -------------------------------------------------------------

def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def write_profile_csv(p: SampledProfile, path) -> Path:
    path = Path(path)
    data = np.column_stack([p.grid.nodes, p.values.real, p.values.imag])
    np.savetxt(path, data, delimiter=",", header="r,value_re,value_im", comments="", fmt="%.17g")
    meta = {"grid": p.grid.to_dict(), "declared_support": p.declared_support}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_profile_csv(path) -> SampledProfile:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    side = _sidecar(path)
    if side.exists():
        meta = json.loads(side.read_text())
        grid = RadialGrid(**meta["grid"])
        support = meta.get("declared_support")
    else:
        r = data[:, 0]
        grid = RadialGrid(float(r[1] - r[0]), len(r) - 1)
        support = None
    return SampledProfile(grid, data[:, 1] + 1j * data[:, 2], support)


def write_measure_csv(m: SpectralMeasure, path) -> Path:
    path = Path(path)
    data = np.column_stack([m.grid.nodes, m.density])
    np.savetxt(path, data, delimiter=",", header="k,density", comments="", fmt="%.17g")
    meta = {"grid": m.grid.to_dict(),
            "masses": [{"k": k, "w": w} for k, w in m.point_masses]}
    _sidecar(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_measure_csv(path) -> SpectralMeasure:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(_sidecar(path).read_text())
    grid = SpectralGrid(**meta["grid"])
    masses = tuple((d["k"], d["w"]) for d in meta.get("masses", []))
    return SpectralMeasure(grid, data[:, 1], masses)


def write_spectral_csv(F: SpectralFunction, path) -> Path:
    path = Path(path)
    data = np.column_stack([F.nodes, F.values.real, F.values.imag])
    np.savetxt(path, data, delimiter=",", header="k,re,im", comments="", fmt="%.17g")
    return path


def as_values(x: Union[SampledProfile, Sequence, np.ndarray]) -> np.ndarray:
    return x.values if isinstance(x, SampledProfile) else np.asarray(x)
