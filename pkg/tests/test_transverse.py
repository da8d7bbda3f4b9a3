import math

import numpy as np
import pytest

from dimred import potentials, transverse
from dimred.errors import DegeneracyError, DomainError, ResolutionError

QUARTIC_1D = 1.0 / math.sqrt(2.0 * math.pi)
QUARTIC_2D = 1.0 / (2.0 * math.pi)


@pytest.fixture(scope="module")
def harmonic_1d():
    conf = potentials.harmonic_confinement(dimension=1)
    return transverse.solve_modes(conf, transverse.TransverseGrid(9.0, 4001), 3)


def test_harmonic_1d_analytics(harmonic_1d):
    m = harmonic_1d
    assert m.energy0 == pytest.approx(1.0, abs=2e-5)
    assert m.gap == pytest.approx(2.0, abs=1e-4)
    assert m.quartic == pytest.approx(QUARTIC_1D, abs=1e-5)


def test_harmonic_1d_chi_properties(harmonic_1d):
    chi = harmonic_1d.chi
    h = harmonic_1d.spacing
    assert np.sum(chi**2) * h == pytest.approx(1.0, abs=1e-10)
    assert np.all(chi > -1e-12)  # single-signed after the sign fix


def test_rayleigh_quotient_matches_eigenvalue(harmonic_1d):
    conf = potentials.harmonic_confinement(dimension=1)
    r = transverse.rayleigh_quotient(harmonic_1d, conf)
    assert r == pytest.approx(harmonic_1d.energy0, abs=1e-9)


def test_harmonic_2d_analytics():
    conf = potentials.harmonic_confinement(dimension=2)
    m = transverse.solve_modes(conf, transverse.TransverseGrid(6.5, 301), 2)
    assert m.energy0 == pytest.approx(2.0, abs=5e-4)
    assert m.gap == pytest.approx(2.0, abs=5e-3)
    assert m.quartic == pytest.approx(QUARTIC_2D, abs=2e-4)


def test_constant_shift_moves_energy_not_state(harmonic_1d):
    shifted = potentials.ConfinementPotential(
        "shifted", lambda r: np.asarray(r) ** 2 + 3.0, 1, 0.0)
    m = transverse.solve_modes(shifted, transverse.TransverseGrid(9.0, 4001), 2)
    assert m.energy0 == pytest.approx(harmonic_1d.energy0 + 3.0, abs=1e-10)
    assert np.max(np.abs(m.chi - harmonic_1d.chi)) < 1e-9


def test_second_order_eigenvalue_convergence():
    conf = potentials.harmonic_confinement(dimension=1)
    errs = []
    for n in (501, 1001, 2001):
        m = transverse.solve_modes(conf, transverse.TransverseGrid(9.0, n), 2)
        errs.append(abs(m.energy0 - 1.0))
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.4)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.4)


def test_boundary_decay_check():
    conf = potentials.harmonic_confinement(dimension=1)
    with pytest.raises(ResolutionError):
        transverse.solve_modes(conf, transverse.TransverseGrid(3.0, 501), 2)


def test_degeneracy_detected():
    # two far-separated identical wells: lowest pair splits below 1e-10
    def double_well(r):
        r = np.asarray(r, dtype=float)
        return np.minimum((r - 12.0) ** 2, (r + 12.0) ** 2)

    conf = potentials.ConfinementPotential("double", double_well, 1, 0.0)
    with pytest.raises(DegeneracyError):
        transverse.solve_modes(conf, transverse.TransverseGrid(25.0, 2001), 2)


def test_rescale_normalization_and_quartic(harmonic_1d):
    for eps in (0.25, 0.1):
        m = transverse.rescale(harmonic_1d, eps)
        assert m.norm(0) == pytest.approx(1.0, abs=1e-10)
        assert m.quartic == pytest.approx(harmonic_1d.quartic / eps, rel=1e-10)
        assert m.energies[0] == pytest.approx(harmonic_1d.energies[0] / eps**2, rel=1e-12)


def test_rescale_2d_power_law():
    conf = potentials.harmonic_confinement(dimension=2)
    m = transverse.solve_modes(conf, transverse.TransverseGrid(6.5, 201), 2)
    m_eps = transverse.rescale(m, 0.1)
    assert m_eps.quartic == pytest.approx(100.0 * m.quartic, rel=1e-10)
    assert m_eps.norm(0) == pytest.approx(1.0, abs=1e-10)


def test_rescale_identity(harmonic_1d):
    m = transverse.rescale(harmonic_1d, 1.0)
    assert np.array_equal(m.chi, harmonic_1d.chi)


def test_excited_fraction_bound():
    assert transverse.excited_fraction_bound(0.1, 2.0) == pytest.approx(0.2)
    assert transverse.excited_fraction_bound(1e-6, 1.0) == pytest.approx(1e-6)
    with pytest.raises(DomainError):
        transverse.excited_fraction_bound(-0.1, 2.0)
    with pytest.raises(DomainError):
        transverse.excited_fraction_bound(0.1, 0.5)
