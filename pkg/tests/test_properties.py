import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from pairwell.analytic import matching_factors, matching_residual, symmetric_residual
from pairwell.dirac_core import (
    C_LIGHT,
    GridSpec,
    SpinorField,
    WellParams,
    free_spinors,
    from_momentum,
    kinetic_step_factor,
    to_momentum,
)
from pairwell.evolution import Occupations, PropagatorConfig, propagate
from pairwell.observables import (
    NumberSeries,
    Species,
    SpectrumSeries,
    energy_spectrum,
    growth_rate,
    partition_spectrum,
)
from pairwell.runner import parse_quantity

momenta = st.floats(-1e5, 1e5, allow_nan=False)
steps = st.floats(1e-8, 1e-4)
finite = st.floats(-10, 10, allow_nan=False)


@given(momenta, steps)
def test_kinetic_factor_is_unitary(p, dt):
    m = kinetic_step_factor(p, dt)
    assert np.allclose(m @ m.conj().T, np.eye(2), atol=1e-12)


@given(momenta)
def test_free_spinors_are_orthonormal(p):
    chi_pos, chi_neg = free_spinors(p)
    assert abs(chi_pos @ chi_pos - 1) < 1e-14
    assert abs(chi_neg @ chi_neg - 1) < 1e-14
    assert abs(chi_pos @ chi_neg) < 1e-14


@given(st.floats(-1.99, -1.01), st.floats(1e-4, 0.2), st.floats(2.1, 4.0), st.floats(0.01, 0.2))
def test_symmetric_residual_identity(re, im, v, d):
    params = WellParams(v, v, 0.0, d)
    e = complex(re + v - 2.0 + 0.5, im)
    g, _ = matching_factors(e, params)
    lhs = symmetric_residual(e, params)
    rhs = -g / 2 * matching_residual(e, params)
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


@given(st.lists(st.floats(0, 1e3), min_size=16, max_size=16))
def test_spectrum_keeps_every_particle(values):
    n_p = np.array(values)
    spec = energy_spectrum(Occupations(0.0, 16, None, n_p), Species.POSITRON, GridSpec(16, 3.0))
    assert np.isclose(spec.total, n_p.sum(), rtol=1e-12, atol=1e-12)


@given(st.floats(0.0, 3.0), st.floats(0.0, 1.99), st.lists(st.floats(0, 1), min_size=10, max_size=10))
def test_partition_is_complete(v1_extra, v2, counts):
    params = WellParams(v2 + v1_extra, v2, 0.1, 0.2)
    energies = np.linspace(1.0, 4.0, 10)
    c = np.array(counts)
    part = partition_spectrum(SpectrumSeries(Species.POSITRON, energies, c, c, 0.0), params)
    assert np.isclose(part.cc_count + part.bc_count, c.sum())


@given(finite, finite)
def test_growth_rate_of_a_line(slope, offset):
    t = np.linspace(0.0, 2.0, 41)
    series = NumberSeries(t, t, slope * t + offset)
    assert np.isclose(growth_rate(series, (1.0, 2.0)), slope, atol=1e-9)


@given(st.floats(1e-3, 1e3), st.booleans())
def test_quantity_round_trip(x, over_c):
    text = f"{x!r}/c au" if over_c else f"{x!r} au"
    expected = x / C_LIGHT if over_c else x
    assert parse_quantity(text, "au") == expected


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_momentum_round_trip(seed):
    g = GridSpec(32, 2.0)
    rng = np.random.default_rng(seed)
    f = SpinorField(g, rng.normal(size=(32, 2)) + 1j * rng.normal(size=(32, 2)))
    assert np.allclose(from_momentum(to_momentum(f), g).values, f.values, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0), st.floats(0.0, 1.5))
def test_propagation_preserves_norm(seed, v1, v2):
    g = GridSpec(64, 2.0)
    params = WellParams(v1, v2, 0.3 / C_LIGHT, 0.2)
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(64, 2)) + 1j * rng.normal(size=(64, 2))
    f = SpinorField(g, v)
    f = SpinorField(g, v / f.norm())
    out = propagate(f, params, PropagatorConfig(1e-6, 50))
    assert abs(out.norm() - 1.0) < 1e-12
