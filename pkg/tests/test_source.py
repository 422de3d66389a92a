# test_source.py - Filters, heralded spectrum, pair emission and channel loss

import logging

import numpy as np
import pytest

from errors import DomainError
from source import (FilterElement, SourceConfig, cascade_span, check_cascade, coherence_time_from_fwhm,
                    heralded_spectrum, keep_probability, sample_pair_times, sample_pairs, single_mode_check,
                    thin_channels)

MHZ = 1e6
GHZ = 1e9


def cavity(fwhm_mhz, fsr_ghz=None):
    return FilterElement("lorentzian_cavity", fwhm_mhz * MHZ, fsr_ghz * GHZ if fsr_ghz else None)


def grating(fwhm_ghz):
    return FilterElement("gaussian_grating", fwhm_ghz * GHZ)


class TestFilterElement:
    def test_half_maximum_at_half_width(self):
        assert float(cavity(600).transmission(300 * MHZ)) == pytest.approx(0.5)
        assert float(grating(54).transmission(27 * GHZ)) == pytest.approx(0.5)
        assert float(cavity(600).transmission(0.0)) == pytest.approx(1.0)

    def test_center_detuning(self):
        f = FilterElement("lorentzian_cavity", 100 * MHZ, center_detuning=50 * MHZ)
        assert float(f.transmission(50 * MHZ)) == pytest.approx(1.0)

    def test_invalid(self):
        with pytest.raises(DomainError):
            FilterElement("fabry_perot", 1.0)
        with pytest.raises(DomainError):
            FilterElement("lorentzian_cavity", 0.0)
        with pytest.raises(DomainError):
            FilterElement("lorentzian_cavity", 600 * MHZ, fsr=500 * MHZ)


class TestHeraldedSpectrum:
    grid = np.linspace(-12 * GHZ, 12 * GHZ, 24001)

    def test_single_cavity(self):
        spectrum = heralded_spectrum([cavity(600)], [], self.grid)
        assert spectrum.fwhm == pytest.approx(600 * MHZ, rel=1e-3)
        assert spectrum.density.max() == pytest.approx(1.0)

    def test_cascade_linewidth(self):
        """600 MHz signal and 240 MHz idler cavities herald a ~171 MHz photon."""
        spectrum = heralded_spectrum([grating(54), cavity(600, 50)], [grating(27), cavity(240, 60)], self.grid)
        assert 160 * MHZ <= spectrum.linewidth <= 180 * MHZ
        assert spectrum.linewidth == pytest.approx(600 * 240 / 840 * MHZ, rel=5e-3)
        # the product line is not Lorentzian; its half-maximum width is wider
        assert spectrum.fwhm == pytest.approx(211.8 * MHZ, rel=5e-3)

    def test_idler_filter_is_mirrored(self):
        """An idler filter detuned by +d narrows the signal around -d."""
        shifted = FilterElement("lorentzian_cavity", 240 * MHZ, center_detuning=500 * MHZ)
        spectrum = heralded_spectrum([], [shifted], self.grid)
        assert spectrum.frequencies[np.argmax(spectrum.density)] == pytest.approx(-500 * MHZ, abs=2 * MHZ)

    def test_coherence_time(self):
        assert coherence_time_from_fwhm(170 * MHZ) == pytest.approx(1.872e-9, rel=1e-3)
        with pytest.raises(DomainError):
            coherence_time_from_fwhm(0.0)

    def test_cascade_span(self):
        """Twenty widths of the widest cavity; gratings count only without cavities."""
        assert cascade_span([grating(54), cavity(600, 50)], [grating(27), cavity(240, 60)]) == pytest.approx(12 * GHZ)
        assert cascade_span([], [grating(27)]) == pytest.approx(540 * GHZ)
        with pytest.raises(DomainError):
            cascade_span([], [])

    def test_grid_checks(self):
        with pytest.raises(DomainError):
            heralded_spectrum([], [], self.grid)
        with pytest.raises(DomainError):
            heralded_spectrum([cavity(600)], [], np.linspace(-1 * GHZ, 1 * GHZ, 5000))
        with pytest.raises(DomainError):
            heralded_spectrum([cavity(600)], [], np.linspace(-12 * GHZ, 12 * GHZ, 1000))
        with pytest.raises(DomainError):
            heralded_spectrum([cavity(600)], [], self.grid[::-1])


class TestSingleMode:
    def test_etalon_behind_grating(self):
        assert single_mode_check(cavity(600, 50), grating(54))
        assert check_cascade([grating(27), cavity(240, 60)])

    def test_wide_grating_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert not single_mode_check(cavity(600, 50), grating(200))
        assert "[SOURCE]" in caplog.text

    def test_needs_fsr(self):
        with pytest.raises(DomainError):
            single_mode_check(cavity(600), grating(54))


class TestSourceConfig:
    def test_pair_rate(self):
        config = SourceConfig(0.015, 1.9e-9, 1.0)
        assert config.pair_rate == pytest.approx(0.015 / 1.9e-9)

    def test_invalid(self):
        with pytest.raises(DomainError):
            SourceConfig(0.6, 1.9e-9, 1.0)
        with pytest.raises(DomainError):
            SourceConfig(0.01, 0.0, 1.0)
        with pytest.raises(DomainError):
            SourceConfig(0.01, 1e-9, 1.0, visibility_tau=1.1)
        with pytest.raises(DomainError):
            SourceConfig(0.01, 1e-9, 1.0, bell_phase_theta=float("nan"))

    def test_state_carries_visibilities(self):
        state = SourceConfig(0.01, 1e-9, 1.0, 0.0, 0.5, 0.8).state()
        assert state.polarization.element("HH", "VV").real == pytest.approx(0.25)
        assert state.timebin.element("SS", "LL").real == pytest.approx(0.4)


class TestPairEmission:
    def test_poisson_count(self):
        times = sample_pair_times(1e5, 0.0, 1.0, np.random.default_rng(1))
        assert abs(times.size - 1e5) < 5 * np.sqrt(1e5)
        assert np.all(np.diff(times) >= 0)
        assert times.min() >= 0.0 and times.max() < 1.0

    def test_empty_window(self):
        assert sample_pair_times(1e5, 1.0, 1.0, np.random.default_rng(1)).size == 0
        assert sample_pair_times(0.0, 0.0, 1.0, np.random.default_rng(1)).size == 0

    def test_gaps_are_exponential(self):
        from scipy import stats
        rate = 2e4
        times = sample_pair_times(rate, 0.0, 1.0, np.random.default_rng(5))
        result = stats.kstest(np.diff(times), "expon", args=(0, 1.0 / rate))
        assert result.pvalue > 1e-4

    def test_sample_pairs_share_state(self):
        config = SourceConfig(0.015, 1.9e-9, 1e-4)
        pairs = sample_pairs(config, 11)
        assert len(pairs) > 500
        assert all(p.state is pairs[0].state for p in pairs)
        assert [p.pair_index for p in pairs[:3]] == [0, 1, 2]
        assert all(a.creation_time <= b.creation_time for a, b in zip(pairs, pairs[1:]))

    def test_same_seed_same_pairs(self):
        config = SourceConfig(0.015, 1.9e-9, 1e-5)
        first = [p.creation_time for p in sample_pairs(config, 4)]
        assert first == [p.creation_time for p in sample_pairs(config, 4)]


class TestChannelThinning:
    def test_keep_probability(self):
        assert keep_probability(0.2, 0.5) == pytest.approx(0.6)
        assert keep_probability(0.0, 0.0) == 0.0

    def test_split_fractions(self):
        n = 60000
        signal, idler = thin_channels(n, 0.2, 0.5, np.random.default_rng(9))
        assert not np.any(~signal & ~idler)
        both = np.mean(signal & idler)
        signal_only = np.mean(signal & ~idler)
        sigma = np.sqrt((1 / 6) * (5 / 6) / n)
        assert both == pytest.approx(1 / 6, abs=5 * sigma)
        assert signal_only == pytest.approx(1 / 6, abs=5 * sigma)

    def test_lossless_and_dark(self):
        signal, idler = thin_channels(100, 1.0, 1.0, np.random.default_rng(0))
        assert signal.all() and idler.all()
        signal, idler = thin_channels(100, 0.0, 0.0, np.random.default_rng(0))
        assert not signal.any() and not idler.any()
