import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tweezer import constants as C
from tweezer.sampling import (PhaseSpaceState, RngSeed, ThermalSpec, TruncatedSpec,
                              harmonic_energy, sample, sample_thermal, sample_truncated,
                              simplex_split)

import oracles


def test_rng_seed_reproducible():
    a = RngSeed(7, 3).generator().random(5)
    b = RngSeed(7, 3).generator().random(5)
    c = RngSeed(7, 4).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    with pytest.raises(ValueError):
        RngSeed(-1)
    with pytest.raises(ValueError):
        RngSeed(2**64)


def test_spec_validation():
    with pytest.raises(ValueError):
        ThermalSpec(0.0)
    with pytest.raises(ValueError):
        TruncatedSpec(1e-6, 0.0)
    with pytest.raises(ValueError):
        TruncatedSpec(1e-6, 1e-30, n_bins=0)


def test_bin_centres():
    spec = TruncatedSpec(30e-6, 1e-28, n_bins=10)
    e = spec.bin_energies()
    assert e[0] == pytest.approx(0.05e-28)
    assert np.all((e > 0) & (e < spec.truncation_energy))
    assert spec.bin_weights().sum() == pytest.approx(1.0)


def test_thermal_widths(pot):
    t = 168e-6
    kt = C.k_B * t
    sigma_x = math.sqrt(kt / (pot.cfg.atom_mass * pot.omega_perp**2))
    # 0.126 um, i.e. roughly 0.12 um
    assert 0.12e-6 <= sigma_x < 0.13e-6
    s = sample_thermal(ThermalSpec(t), pot, RngSeed(1), 100_000)
    assert np.std(s.x) == pytest.approx(sigma_x, rel=0.01)
    assert np.std(s.vz) == pytest.approx(math.sqrt(kt / pot.cfg.atom_mass), rel=0.01)
    assert np.mean(s.y) == pytest.approx(pot.min_position, abs=3 * sigma_x / math.sqrt(1e5))


def test_thermal_cold_limit(pot):
    s = sample_thermal(ThermalSpec(1e-15), pot, RngSeed(2), 100)
    assert np.max(np.abs(s.x)) < 1e-11
    assert np.max(np.abs(s.vx)) < 1e-6


def test_thermal_mean_energy(pot):
    t = 33e-6
    s = sample_thermal(ThermalSpec(t), pot, RngSeed(3), 100_000)
    e = harmonic_energy(s, pot)
    assert np.mean(e) / (3 * C.k_B * t) == pytest.approx(1.0, rel=0.02)


def test_scalar_sample(pot):
    s = sample_thermal(ThermalSpec(33e-6), pot, RngSeed(4))
    assert isinstance(s.x, float)
    t = sample_truncated(TruncatedSpec(33e-6, 3 * C.k_B * 33e-6), pot, RngSeed(4))
    assert isinstance(t.vz, float)
    with pytest.raises(TypeError):
        sample(object(), pot, RngSeed(0))


def test_simplex_trivial(rng):
    assert simplex_split(0.0, rng) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        simplex_split(-1.0, rng)


def test_simplex_mean_and_marginal():
    e1, e2, e3 = simplex_split(1.0, RngSeed(5), 100_000)
    for e in (e1, e2, e3):
        assert np.mean(e) == pytest.approx(1 / 3, abs=0.005)
    # marginal of a flat Dirichlet(1,1,1): density 2(1-u), cdf 1-(1-u)^2
    res = stats.kstest(e1, lambda u: 1 - (1 - u) ** 2)
    assert res.pvalue > 0.01


@settings(max_examples=100, deadline=None)
@given(total=st.floats(0.0, 1e-20), seed=st.integers(0, 2**32))
def test_simplex_sums_exactly(total, seed):
    e = simplex_split(total, RngSeed(seed), 16)
    s = e[0] + e[1] + e[2]
    assert np.all(np.stack(e) >= 0)
    assert np.allclose(s, total, rtol=1e-15, atol=0)


def test_truncated_single_bin(pot):
    u = 1e-28
    s = sample_truncated(TruncatedSpec(30e-6, u, n_bins=1), pot, RngSeed(6), 1000)
    assert np.allclose(harmonic_energy(s, pot), u / 2, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(eta=st.floats(0.01, 100), n_bins=st.integers(1, 200), seed=st.integers(0, 2**32))
def test_truncated_never_exceeds_cutoff(pot, eta, n_bins, seed):
    t = 33e-6
    u = eta * C.k_B * t
    s = sample_truncated(TruncatedSpec(t, u, n_bins), pot, RngSeed(seed), 2000)
    assert np.all(harmonic_energy(s, pot) <= u + 1e-12)


def test_truncated_axis_energies_reconstructed(pot):
    spec = TruncatedSpec(33e-6, 5 * C.k_B * 33e-6, n_bins=1)
    gen = RngSeed(8).generator()
    s = sample_truncated(spec, pot, RngSeed(8), 500)
    # replay the draws in the same order to recover the per-axis shares
    gen.random(500)
    shares = np.stack(simplex_split(spec.bin_energies(), gen, 500))
    parts = np.stack(harmonic_energy(s, pot, per_axis=True))
    assert np.allclose(parts, shares, rtol=1e-12, atol=0)


def test_truncated_means(pot):
    t = 33e-6
    kt = C.k_B * t
    for eta, tol in ((30.0, 0.01), (3.0, 0.03)):
        spec = TruncatedSpec(t, eta * kt, n_bins=10)
        e = harmonic_energy(sample_truncated(spec, pot, RngSeed(9), 100_000), pot)
        assert np.mean(e) == pytest.approx(spec.bin_mean_energy(), rel=tol)


def test_bin_expectation_converges_to_closed_form():
    for eta in (0.5, 3.0, 10.0):
        spec = TruncatedSpec(1.0, eta * C.k_B, n_bins=1000)
        ratio = spec.bin_mean_energy() / C.k_B
        assert ratio == pytest.approx(oracles.mean_ratio_quad(eta), rel=1e-3)


def test_truncated_histogram_matches_thermal(pot):
    t = 33e-6
    kt = C.k_B * t
    spec = TruncatedSpec(t, 40 * kt, n_bins=2000)
    e = harmonic_energy(sample_truncated(spec, pot, RngSeed(10), 100_000), pot) / kt
    # edges on sampler bin boundaries (width 0.02 kT)
    edges = np.concatenate([np.linspace(0, 9.5, 20), [40.0]])
    obs, _ = np.histogram(e, edges)
    cdf = np.array([oracles.p_surv_quad(x) for x in edges])
    expected = np.diff(cdf) / (cdf[-1] - cdf[0]) * e.size
    chi2 = np.sum((obs - expected) ** 2 / expected)
    assert stats.chi2.sf(chi2, len(obs) - 1) > 0.01


def test_determinism(pot):
    a = sample_thermal(ThermalSpec(30e-6), pot, RngSeed(11, 2), 64).as_array()
    b = sample_thermal(ThermalSpec(30e-6), pot, RngSeed(11, 2), 64).as_array()
    assert a.tobytes() == b.tobytes()


def test_state_helpers():
    s = PhaseSpaceState(0.0, 0.0, 0.0, 1.0, 2.0, 2.0)
    assert s.kinetic_energy(2.0) == 9.0
    assert s.as_array().shape == (6,)
