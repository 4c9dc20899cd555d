import numpy as np
import pytest

from kreinlab.errors import (DivergenceError, GridRangeError, NonConvergenceError, ShapeError,
                             SingularPartError)
from kreinlab.grids import RadialGrid, SampledProfile, SpectralGrid
from kreinlab.krein import (SzegoFunction, coefficient_from_profile, dirac_eigenfunctions,
                            integrate_krein, load_solution, make_coefficient,
                            normalization_constant, residual_conjugation_identity,
                            residual_integral_identity, save_solution, spectral_density,
                            stummel_norm, szego)


def _solve(kind, params=None, step=1e-3, r_max=10.0, K=10.0, dk=0.5, osc=0.1):
    rg = RadialGrid.from_extent(step, r_max)
    A = make_coefficient(kind, params, rg)
    return integrate_krein(A, rg, SpectralGrid(K, dk), osc)


def test_free_closed_form():
    sol = _solve("zero", r_max=20.0)
    r = sol.r_grid.nodes[:, None]
    k = sol.k_grid.nodes[None, :]
    assert np.max(np.abs(sol.P - np.exp(1j * r * k))) < 1e-10
    assert np.max(np.abs(sol.P_star - 1)) == 0
    assert np.all(sol.P[0] == 1) and np.all(sol.P_star[0] == 1)


def test_constant_coefficient_k0():
    sol = _solve("constant", {"value": 1.0}, r_max=2.0)
    i0 = sol.k_grid.zero_index
    j = sol.r_grid.index(1.0)
    assert sol.P[j, i0] == pytest.approx(np.exp(-1), abs=1e-10)
    assert sol.P_star[j, i0] == pytest.approx(0.3678794, abs=1e-7)


def test_identities_constant_coefficient():
    sol = _solve("constant", {"value": 1.0})
    assert residual_conjugation_identity(sol) < 1e-8
    assert residual_integral_identity(sol) < 1e-8


def test_identities_free_vanish():
    sol = _solve("zero")
    assert residual_conjugation_identity(sol) < 1e-13
    assert residual_integral_identity(sol) == 0


def test_identities_fourth_order_gaussian():
    coarse = _solve("gaussian", step=2e-3, osc=0.1)
    fine = _solve("gaussian", step=1e-3, osc=0.05)
    rc, rf = residual_integral_identity(coarse), residual_integral_identity(fine)
    assert rf < 1e-7
    assert 12 < rc / rf < 20
    cc, cf = residual_conjugation_identity(coarse), residual_conjugation_identity(fine)
    assert cf < 1e-7
    assert 12 < cc / cf < 20


def test_box_szego_exact_beyond_support(free_sol):
    sol = _solve("box", {"value": 0.3, "length": 1.0}, step=0.01, r_max=4.0, K=50, dk=0.05)
    j = sol.r_grid.index(1.0)
    assert sol.closure_index == j
    assert np.max(np.abs(sol.P_star[j:] - sol.P_star[j])) == 0
    Pi = szego(sol)
    assert Pi.exact
    assert np.array_equal(Pi.values, sol.P_star[j])
    # decays towards 1 at the edge of the band
    assert abs(Pi.values[0] - 1) < 5e-3 and abs(Pi.values[-1] - 1) < 5e-3


def test_szego_requires_convergence():
    rg = RadialGrid.from_extent(0.01, 3.0)
    A = make_coefficient("constant", {"value": 1.0}, rg)
    sol = integrate_krein(A, rg, SpectralGrid(5.0, 0.5))
    with pytest.raises(NonConvergenceError):
        szego(sol, tol=1e-12)


def test_free_measure(free_sol):
    sol, Pi, m = free_sol
    assert np.all(Pi.values == 1)
    assert np.allclose(m.density, 1 / (2 * np.pi))
    assert m.density[0] == pytest.approx(0.1591549, abs=1e-7)
    assert m.point_masses == ()
    # the closed form is arctan(K)/pi
    assert normalization_constant(sol, m) == pytest.approx(np.arctan(50) / np.pi, rel=1e-9)


def test_singular_part_guard():
    kg = SpectralGrid(1.0, 0.5)
    Pi = SzegoFunction(kg, np.full(len(kg), 0.5e-3 + 0j))
    with pytest.raises(SingularPartError):
        spectral_density(Pi, 1e-3)


def test_stummel_norm():
    rg = RadialGrid.from_extent(1e-3, 5.0)
    assert stummel_norm(make_coefficient("zero", None, rg)) == 0
    assert stummel_norm(make_coefficient("constant", {"value": 0.7}, rg)) == pytest.approx(0.7)
    half = make_coefficient("box", {"value": 1.0, "length": 0.5}, rg)
    assert stummel_norm(half) == pytest.approx(np.sqrt(0.5), abs=2e-3)
    short = RadialGrid.from_extent(0.1, 0.5)
    with pytest.raises(GridRangeError):
        stummel_norm(make_coefficient("zero", None, short))


def test_free_dirac_eigenfunctions(free_sol):
    sol, _, _ = free_sol
    ef = dirac_eigenfunctions(sol)
    x = ef.x_grid.nodes[:, None]
    k = sol.k_grid.nodes[None, :]
    assert np.max(np.abs(ef.E - np.exp(1j * x * k))) < 1e-10
    assert np.max(np.abs(ef.phi - np.cos(k * x))) < 1e-10
    assert np.max(np.abs(ef.psi - np.sin(k * x))) < 1e-10


def test_modulus_identity(gauss_sol):
    sol, _, _ = gauss_sol
    ef = dirac_eigenfunctions(sol)
    # x_j = r_j / 2, so row j holds P(2 x_j) = P(r_j)
    P2x = sol.P[:len(ef.x_grid)]
    assert np.allclose(ef.phi ** 2 + ef.psi ** 2, np.abs(P2x) ** 2, atol=1e-12)


def test_shape_and_divergence_errors():
    rg = RadialGrid.from_extent(0.01, 1.0)
    A = make_coefficient("zero", None, rg)
    with pytest.raises(ShapeError):
        integrate_krein(A, rg, SpectralGrid(1.0, 0.5), osc_factor=0.0)
    with pytest.raises(ShapeError):
        make_coefficient("triangle", None, rg)
    huge = coefficient_from_profile(SampledProfile(rg, np.full(len(rg), 1e300)))
    with pytest.raises(DivergenceError):
        integrate_krein(huge, rg, SpectralGrid(1.0, 0.5))


def test_save_load_roundtrip(tmp_path):
    sol = _solve("bump", step=0.01, r_max=4.0, K=5.0)
    back = load_solution(save_solution(sol, tmp_path / "sol"))
    assert np.array_equal(back.P, sol.P)
    assert np.array_equal(back.P_star, sol.P_star)
    assert back.closure_index == sol.closure_index
