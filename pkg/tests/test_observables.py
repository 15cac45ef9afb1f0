import numpy as np
import pytest

from pairwell.dirac_core import C_LIGHT, Branch, GridSpec, WellParams
from pairwell.evolution import BogoliubovMatrix, Occupations, PropagatorConfig, iter_bogoliubov
from pairwell.observables import (
    NumberSeries,
    Species,
    SpectrumSeries,
    electron_density,
    energy_spectrum,
    find_peaks,
    growth_rate,
    momentum_distribution,
    number_series,
    partition_spectrum,
    partition_threshold,
    particle_numbers,
    read_csv,
    write_numbers_csv,
    write_spectrum_csv,
)

from .oracles import lorentzian

C = C_LIGHT
WELL = WellParams(3.54, 0.95, 0.3 / C, 3 / C)


def _toy_occupations(n, electron=None, positron=None):
    return Occupations(0.0, n, electron, positron)


def test_single_pair_density_is_uniform():
    g = GridSpec(64, 3.0)
    u = np.zeros((64, 64), dtype=complex)
    u[40, 7] = 1.0
    snap = BogoliubovMatrix(0.0, 64, u_pn=u, u_nn=np.zeros_like(u))
    rho = electron_density(snap, g)
    assert np.allclose(rho, 1.0 / g.box_length, rtol=1e-12)


def test_density_integrates_to_electron_number():
    g = GridSpec(64, 2.0)
    params = WellParams(2.5, 0.25, 0.3 / C, 0.2)
    (snap,) = iter_bogoliubov(g, params, PropagatorConfig(1e-6, 300), (Branch.NEGATIVE,))
    n_e, n_pos = particle_numbers(snap)
    assert np.isnan(n_pos) and n_e > 0
    # the lattice is periodic, so the exact integral is the plain sum
    assert np.sum(electron_density(snap, g)) * g.dz == pytest.approx(n_e, rel=1e-10)


def test_missing_branch_is_reported():
    occ = _toy_occupations(8, positron=np.ones(8))
    with pytest.raises(ValueError, match="negative branch"):
        momentum_distribution(occ, Species.ELECTRON)
    snap = BogoliubovMatrix(0.0, 8)
    with pytest.raises(ValueError, match="u_pn"):
        electron_density(snap, GridSpec(8, 1.0))


def test_spectrum_folds_both_momentum_signs():
    g = GridSpec(8, 2.0)
    n_p = np.arange(1.0, 9.0)  # momenta -4 .. 3 dp
    spec = energy_spectrum(_toy_occupations(8, positron=n_p), Species.POSITRON, g)
    # |p| = 0, 1, 2, 3, 4 dp
    assert np.allclose(spec.counts, [5, 4 + 6, 3 + 7, 2 + 8, 1])
    assert spec.total == pytest.approx(n_p.sum())
    assert spec.energies[0] == pytest.approx(1.0)
    assert np.all(np.diff(spec.energies) > 0)


def test_spectrum_density_of_states():
    g = GridSpec(16, 2.0)
    spec = energy_spectrum(_toy_occupations(16, positron=np.ones(16)), Species.POSITRON, g)
    p = g.dp * np.arange(1, 9)
    e = np.sqrt(C**2 + p**2) * C
    dedp = C * C * p / e
    expected = C * C * g.box_length / (2 * np.pi * dedp) * spec.counts[1:]
    assert np.allclose(spec.values[1:], expected)


def test_partition_threshold_cases():
    assert partition_threshold(WELL) == pytest.approx(1.59)
    assert partition_threshold(WELL.with_heights(2.59, 0.0)) == np.inf
    energies = np.linspace(1.0, 3.0, 21)
    spec = SpectrumSeries(Species.POSITRON, energies, np.ones(21), np.ones(21), 0.0)
    part = partition_spectrum(spec, WELL)
    assert part.cc_count == 6 and part.bc_count == 15 and not part.cc_empty
    assert part.cc.energies.max() <= 1.59 < part.bc.energies.min()
    empty = partition_spectrum(spec, WellParams(2.5, 0.5, 0.1, 0.2))
    assert empty.cc_empty and empty.cc is None and empty.bc_count == 21
    step = partition_spectrum(spec, WellParams(2.59, 0.0, 0.1, 0.2))
    assert step.cc_count == 21 and step.bc_count == 0


def test_growth_rate_recovers_linear_slope():
    t = np.linspace(0.0, 1.0, 101)
    series = NumberSeries(t, np.zeros(101), 3.0 * t + 2.0)
    assert growth_rate(series, (0.5, 1.0)) == pytest.approx(3.0)
    with pytest.raises(ValueError, match="samples"):
        growth_rate(series, (0.5, 0.55))
    with pytest.raises(ValueError, match="outside"):
        growth_rate(series, (0.5, 1.5))
    with pytest.raises(ValueError, match="no 'bc'"):
        growth_rate(series, (0.5, 1.0), "bc")


def test_find_peaks_locates_lorentzian():
    x = np.linspace(1.0, 3.0, 401)
    y = lorentzian(x, 1.6543, 0.05, 2.0) + lorentzian(x, 2.2, 0.05, 1.0)
    spec = SpectrumSeries(Species.POSITRON, x, y, y, 0.0)
    peaks = find_peaks(spec)
    assert [round(p.energy, 3) for p in peaks] == [1.654, 2.2]
    # the second line adds its tail under the first
    true_height = 2.0 + lorentzian(1.6543, 2.2, 0.05, 1.0)
    assert peaks[0].height == pytest.approx(true_height, rel=1e-3)
    assert [p.energy for p in find_peaks(spec, window=(2.0, 3.0))] == [peaks[1].energy]


def test_number_series_columns():
    g = GridSpec(8, 2.0)
    snaps = [_toy_occupations(8, positron=np.full(8, k)) for k in (0.0, 1.0)]
    series = number_series(snaps, WELL, g)
    assert np.allclose(series.positron, [0, 8])
    assert np.all(np.isnan(series.electron))
    assert np.allclose(series.cc + series.bc, series.positron)


def test_csv_outputs(tmp_path):
    g = GridSpec(8, 2.0)
    occ = _toy_occupations(8, positron=np.arange(8.0))
    spec = energy_spectrum(occ, Species.POSITRON, g)
    path = write_spectrum_csv(tmp_path / "s.csv", spec, g, WELL)
    text = path.read_text().splitlines()
    assert text[0].startswith("# well.v1 = 3.54")
    assert "E_over_c2,N_E" in text
    back = read_csv(path)
    assert np.array_equal(back["N_E"], spec.values)

    series = number_series([occ, occ], WELL, g)
    path = write_numbers_csv(tmp_path / "n.csv", series, g, WELL)
    back = read_csv(path)
    assert list(back) == ["t", "N_e", "N_pos", "N_cc", "N_bc"]
    assert "hard threshold" in path.read_text()
