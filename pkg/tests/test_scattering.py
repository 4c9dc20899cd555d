import numpy as np
import pytest

from kreinlab.errors import (DomainError, DomainTooSmallError, GridRangeError,
                             PreconditionError)
from kreinlab.grids import RadialGrid, SampledProfile, SpectralFunction
from kreinlab.krein import Coefficient, make_coefficient
from kreinlab.scattering import (build_potential, exhaustion_diagnostic, free_I_box,
                                 free_propagate, l2_norm, perturbed_propagate_fd,
                                 perturbed_propagate_spectral, project_test_class,
                                 required_extent, scattering_limit, spectral_I,
                                 wave_operator_run, window_distance)
from kreinlab.transforms import DiracKernel

from conftest import solve


def _gauss(grid, c=30.0):
    return SampledProfile.from_function(grid, lambda x: np.exp(-(x - c) ** 2 / 2))


def _l2(a, b):
    return l2_norm(a.values - b.values, a.grid.step)


@pytest.fixture(scope="module")
def line():
    return RadialGrid.from_extent(0.01, 60.0)


@pytest.fixture(scope="module")
def free_psi():
    sol, Pi, m = solve("zero", r_step=0.02, r_max=2.0, k_max=10.0, k_step=0.02)
    return DiracKernel(sol, 6000), Pi, m.scaled(2)


def test_potential_zero_and_symbolic():
    xg = RadialGrid.from_extent(0.005, 6.0)
    rg = RadialGrid.from_extent(0.01, 12.0)
    assert not np.any(build_potential(make_coefficient("zero", None, rg), xg).v.values)
    pot = build_potential(make_coefficient("gaussian", {"amplitude": 0.3}, rg), xg)
    x = xg.nodes
    a = 0.6 * np.exp(-(2 * x - 2) ** 2)
    da = -8 * (2 * x - 2) * 0.3 * np.exp(-(2 * x - 2) ** 2)
    assert np.max(np.abs(pot.a.values - a)) < 1e-14
    assert np.max(np.abs(pot.v.values - (da + a * a))) < 1e-4


def test_potential_rejects_complex():
    rg = RadialGrid.from_extent(0.1, 2.0)
    A = Coefficient(SampledProfile(rg, np.full(len(rg), 1j)), is_real=False)
    with pytest.raises(DomainError):
        build_potential(A, RadialGrid.from_extent(0.05, 1.0))


def test_free_propagate_identity_and_norm(line):
    f = _gauss(line)
    assert _l2(free_propagate(f, 0.0), f) < 1e-10
    g = free_propagate(f, 3.0)
    assert abs(l2_norm(g.values, line.step) - l2_norm(f.values, line.step)) < 1e-10


def test_free_propagate_gaussian_closed_form(line):
    t = 1.0
    z = 1 + 2j * t
    exact = SampledProfile.from_function(
        line, lambda x: z ** -0.5 * np.exp(-(x - 30) ** 2 / (2 * z)))
    assert _l2(free_propagate(_gauss(line), t), exact) < 1e-6


def test_free_propagate_wall():
    g = RadialGrid.from_extent(0.01, 20.0)
    with pytest.raises(DomainTooSmallError):
        free_propagate(_gauss(g, 19.0), 1.0)


def test_fd_matches_free(line):
    f = _gauss(line)
    fd = perturbed_propagate_fd(f, 1.0, None, 1e-3)
    # fd evolves with exp(itH); free_propagate applies exp(-itH0)
    assert _l2(fd, free_propagate(f, -1.0)) < 1e-4
    assert abs(l2_norm(fd.values, line.step) - l2_norm(f.values, line.step)) < 1e-10


def test_fd_second_order_in_dt():
    g = RadialGrid.from_extent(0.02, 60.0)
    f = _gauss(g)
    v = SampledProfile.from_function(g, lambda x: 0.5 * np.exp(-(x - 28) ** 2))
    ref = perturbed_propagate_fd(f, 0.5, v, 1.25e-4)
    e1 = _l2(perturbed_propagate_fd(f, 0.5, v, 2e-3), ref)
    e2 = _l2(perturbed_propagate_fd(f, 0.5, v, 1e-3), ref)
    assert 3.5 < e1 / e2 < 4.5


def test_spectral_free_reduces(free_psi):
    psi, _, m2 = free_psi
    f = _gauss(psi.x_grid)
    assert _l2(perturbed_propagate_spectral(f, 0.0, psi, m2), f) < 1e-4
    u = perturbed_propagate_spectral(f, 1.0, psi, m2)
    assert _l2(u, free_propagate(f, -1.0)) < 1e-6


def test_spectral_refuses_bad_measure(free_psi):
    psi, _, m2 = free_psi
    with pytest.raises(PreconditionError):
        perturbed_propagate_spectral(_gauss(psi.x_grid), 1.0, psi, m2.scaled(0.5))


def _band_packet(grid, center=25.0):
    f = SampledProfile.from_function(
        grid, lambda x: np.sin(2 * x) * np.exp(-(x - center) ** 2 / 2))
    return project_test_class(f, 0.5, 3.5, 0.5)


def test_free_wave_operator_is_identity():
    # band-passed data decays slowly in x, so the wall must sit far from the packet
    sol, Pi, m = solve("zero", r_step=0.04, r_max=2.0, k_max=10.0, k_step=0.005)
    psi, m2 = DiracKernel(sol, 10000), m.scaled(2)
    f = _band_packet(psi.x_grid)
    run = wave_operator_run(f, psi, m2, (1.0, 2.0, 4.0), Pi)
    for u in run.iterates:
        assert _l2(u, f) < 1e-6
    assert np.all(run.cauchy_gaps < 1e-6)
    assert abs(run.limit_norm / run.f_norm - 1) < 1e-3
    with pytest.raises(DomainError):
        wave_operator_run(f, psi, m2, (2.0, 1.0))


def test_scattering_limit_zero(free_psi):
    psi, Pi, _ = free_psi
    zero = SampledProfile(psi.x_grid, np.zeros(len(psi.x_grid)))
    lim = scattering_limit(zero, Pi)
    assert not np.any(lim.p.values) and lim.norm == 0


def test_windows(free_psi):
    psi, Pi, m2 = free_psi
    zero = SampledProfile(psi.x_grid, np.zeros(len(psi.x_grid)))
    run = wave_operator_run(zero, psi, m2, (1.0, 2.0), Pi)
    ex = exhaustion_diagnostic(run, m2, (1.0, 3.0))
    assert ex.window_distances == (0.0, 0.0)
    F = SpectralFunction(psi.k_grid, np.zeros(len(psi.k_grid)))
    with pytest.raises(DomainError):
        window_distance(F, F, m2, (2.0, 2.0))


def test_spectral_I_free_box():
    t, a, b = 8.0, 1.0, 3.0
    sol, _, _ = solve("zero", r_step=0.1, r_max=2.0, k_max=6.0, k_step=0.0025)
    psi = DiracKernel(sol, int(round(2 * 2 * b * t / 0.1)) + 20)
    I = spectral_I(lambda xi: ((xi >= a) & (xi <= b)).astype(complex), t, psi, (a, b))
    i = int(np.argmin(np.abs(psi.k - 2.0)))
    assert abs(I.values[i] - free_I_box(psi.k[i], t, a, b)) < 1e-2
    with pytest.raises(GridRangeError):
        spectral_I(lambda xi: xi, 40.0, psi, (a, b))


def test_required_extent():
    assert required_extent(80, 1, 10, 80) == 80 + 1600 + 6
