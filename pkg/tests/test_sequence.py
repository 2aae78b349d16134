"""Tests for pulse-sequence synthesis and the temporal mode basis."""

import dataclasses

import numpy as np
import pytest
from scipy.stats import ks_2samp

import rasesim as rs
from rasesim.errors import ConfigurationError
from rasesim.sequence import designed_measured_cov, mode_physics

from conftest import collect_samples, make_config


class TestConfigValidation:
    def test_standard_windows_are_ordered_and_on_grid(self, small_config):
        fs = small_config.sample_rate
        spans = [w.sample_span(fs) for w in small_config.windows]
        assert all(lo < hi for lo, hi in spans)
        assert all(a[1] <= b[0] for a, b in zip(spans, spans[1:]))

    def test_rejects_missing_or_reordered_labels(self, small_config):
        windows = list(small_config.windows)
        windows[0], windows[1] = windows[1], windows[0]
        with pytest.raises(ConfigurationError, match="labels"):
            make_config(windows=tuple(windows))

    def test_rejects_overlapping_windows(self, small_config):
        windows = list(small_config.windows)
        windows[1] = dataclasses.replace(windows[1], end_s=windows[2].start_s + 1e-6)
        with pytest.raises(ConfigurationError, match="overlap"):
            make_config(windows=tuple(windows))

    def test_rejects_off_grid_boundary(self, small_config):
        windows = list(small_config.windows)
        windows[1] = dataclasses.replace(windows[1], end_s=windows[1].end_s - 0.03e-6)
        with pytest.raises(ConfigurationError, match="grid"):
            make_config(windows=tuple(windows))

    def test_rejects_non_mirrored_recall_window(self, small_config):
        windows = list(small_config.windows)
        idx = [w.label for w in windows].index("rase")
        windows[idx] = dataclasses.replace(
            windows[idx],
            start_s=windows[idx].start_s + 1e-7,
            end_s=windows[idx].end_s + 1e-7,
        )
        with pytest.raises(ConfigurationError, match="mirror"):
            make_config(windows=tuple(windows))

    def test_rejects_indivisible_mode_count(self):
        windows = rs.standard_windows(10e6, n_modes=3, tile_duration=3.5e-6)
        with pytest.raises(ConfigurationError, match="divisible"):
            make_config(n_modes=4, windows=windows)  # 105 samples, 4 tiles

    def test_rejects_inconsistent_bandwidth(self):
        with pytest.raises(ConfigurationError, match="bandwidth"):
            make_config(signal_bandwidth=150e3)  # 3.5 us tiles realize 253 kHz

    def test_rejects_zero_shots(self):
        with pytest.raises(ConfigurationError, match="n_shots"):
            make_config(n_shots=0)

    def test_rejects_negative_seed(self):
        with pytest.raises(ConfigurationError, match="seed"):
            make_config(seed=-1)

    def test_sentinel_flags_follow_pulse_enablement(self):
        cfg = make_config()
        assert cfg.window("pi1").sentinel and cfg.window("pi2").sentinel
        cfg_off = make_config(pi2_enabled=False)
        assert cfg_off.window("pi1").sentinel
        assert not cfg_off.window("pi2").sentinel


class TestModeBasis:
    def test_single_mode_spans_window(self):
        cfg = make_config(n_modes=1, tile_duration=10.5e-6, signal_bandwidth=84.4e3)
        basis = rs.build_mode_basis(cfg)
        f = basis.ase_matrix()[0]
        sl = cfg.window("ase").sample_slice(cfg.sample_rate)
        assert np.all(f[sl] > 0)
        assert np.count_nonzero(f) == sl.stop - sl.start
        # unit norm under the discrete inner product sum f^2 dt
        assert np.sum(f**2) / cfg.sample_rate == pytest.approx(1.0, abs=1e-12)

    def test_gram_matrices_are_identity(self, small_config):
        basis = rs.build_mode_basis(small_config)
        dt = 1.0 / small_config.sample_rate
        for matrix in (basis.ase_matrix(), basis.rase_matrix()):
            gram = matrix @ matrix.T * dt
            assert np.allclose(gram, np.eye(basis.n_modes), atol=1e-12)

    def test_reflection_pairs_first_with_last(self, small_config):
        basis = rs.build_mode_basis(small_config)
        # partner of the first emission tile is the last recall tile
        g0 = basis.rase_slices[0]
        assert g0.start == max(sl.start for sl in basis.rase_slices)
        # exact grid reflection about the rephasing time
        fs = small_config.sample_rate
        p0, p1 = small_config.window("pi2").sample_span(fs)
        reflect = p0 + p1 - 1
        for fsl, gsl in zip(basis.ase_slices, basis.rase_slices):
            assert (reflect - (fsl.stop - 1), reflect - fsl.start + 1) == (
                gsl.start,
                gsl.stop,
            )


class TestModePhysics:
    def test_gain_decay_and_dephasing(self):
        cfg = make_config()
        params = mode_physics(cfg)
        gain = np.exp(cfg.physics.alpha_l)
        fs = cfg.sample_rate
        basis = rs.build_mode_basis(cfg)
        a0 = cfg.window("ase").sample_span(fs)[0]
        for k, par in enumerate(params):
            center = (basis.ase_slices[k].start + basis.tile_samples / 2) / fs
            t_k = center - a0 / fs
            delta_k = cfg.rephasing_time_s - center
            expected_gain = 1 + (gain - 1) * np.exp(-t_k / cfg.ase_decay_tau)
            expected_eta = cfg.physics.eta * np.exp(-4 * delta_k / cfg.t2)
            assert np.exp(par.alpha_l) == pytest.approx(expected_gain, rel=1e-12)
            assert par.eta == pytest.approx(expected_eta, rel=1e-12)
        # later emission tiles sit closer to the rephasing pulse: less dephasing
        etas = [p.eta for p in params]
        assert etas == sorted(etas)

    def test_pi2_disabled_kills_recall(self):
        cfg = make_config(pi2_enabled=False)
        assert all(p.eta == 0 for p in mode_physics(cfg))


class TestSynthesis:
    def test_deterministic_per_shot(self, small_config):
        a = rs.synthesize_shot(small_config, 3)
        b = rs.synthesize_shot(small_config, 3)
        assert np.array_equal(a.samples, b.samples)
        c = rs.synthesize_shot(small_config, 4)
        assert not np.array_equal(a.samples, c.samples)

    def test_run_independent_of_thread_count(self, monkeypatch):
        cfg = make_config(n_shots=40)
        monkeypatch.setenv("RASE_THREADS", "1")
        run1 = rs.synthesize_run(cfg)
        monkeypatch.setenv("RASE_THREADS", "3")
        run3 = rs.synthesize_run(cfg)
        for a, b in zip(run1, run3):
            assert np.array_equal(a.samples, b.samples)

    def test_iter_matches_run(self, small_config):
        streamed = list(rs.iter_shots(small_config))
        materialized = rs.synthesize_run(small_config)
        assert len(streamed) == small_config.n_shots
        for a, b in zip(streamed, materialized):
            assert np.array_equal(a.samples, b.samples)

    def test_sentinel_windows_hold_deterministic_ramps(self, small_config):
        rec = rs.synthesize_shot(small_config, 0)
        sl = rec.sample_slice("pi1")
        ramp = rec.samples[sl]
        assert small_config.saturation_level >= np.abs(ramp).max() > (
            0.8 * small_config.saturation_level
        )
        other = rs.synthesize_shot(small_config, 17)
        assert np.array_equal(other.samples[sl], ramp)
        assert rec.sentinel_mask()[sl].all()

    def test_warm_records_are_vacuum_in_signal_windows(self):
        cfg = make_config(warm=True, n_shots=400, seed=5)
        shots = rs.synthesize_run(cfg)
        for label in ("vacuum", "ase", "rase", "tail"):
            z = np.concatenate([rec.samples[rec.sample_slice(label)] for rec in shots])
            n = z.size
            tol = 4 * np.sqrt(2.0 / n)
            assert z.real.var() == pytest.approx(1.0, abs=tol)
            assert z.imag.var() == pytest.approx(1.0, abs=tol)

    def test_zero_depth_statistically_matches_warm(self):
        cold = make_config(alpha_l=0.0, n_shots=250, seed=31)
        warm = make_config(warm=True, n_shots=250, seed=32)
        z_cold = np.concatenate(
            [r.samples[r.sample_slice("ase")] for r in rs.synthesize_run(cold)]
        )
        z_warm = np.concatenate(
            [r.samples[r.sample_slice("ase")] for r in rs.synthesize_run(warm)]
        )
        for cold_part, warm_part in ((z_cold.real, z_warm.real), (z_cold.imag, z_warm.imag)):
            assert ks_2samp(cold_part, warm_part).pvalue > 0.01

    def test_echo_transient_is_deterministic_and_large(self, small_config):
        rec = rs.synthesize_shot(small_config, 2)
        echo = rec.samples[rec.sample_slice("echo")]
        assert np.abs(echo).max() > 10  # coherent transient above the noise
        cfg_off = make_config(pi2_enabled=False)
        rec_off = rs.synthesize_shot(cfg_off, 2)
        echo_off = rec_off.samples[rec_off.sample_slice("echo")]
        assert np.abs(echo_off).max() < 10

    def test_reference_tone_amplitude_and_drift(self):
        cfg = make_config(n_shots=300, seed=8, lo_phase_drift=0.2)
        phases = []
        for rec in rs.iter_shots(cfg):
            tone = rec.samples[rec.sample_slice("reference")].mean()
            assert abs(tone) == pytest.approx(cfg.reference_amplitude, rel=0.15)
            phases.append(np.angle(tone))
        assert np.std(phases) == pytest.approx(0.2, rel=0.25)

    def test_shot_index_bounds(self, small_config):
        with pytest.raises(ConfigurationError):
            rs.synthesize_shot(small_config, small_config.n_shots)


class TestClosedLoopStatistics:
    def test_projected_covariance_matches_design(self):
        cfg = make_config(n_shots=4000, seed=21)
        basis = rs.build_mode_basis(cfg)
        shots, scale = rs.normalize_to_vacuum(rs.synthesize_run(cfg))
        shots = [rs.apply_phase_reference(r) for r in shots]
        samples = collect_samples(shots, basis)
        n = cfg.n_shots
        for k in range(cfg.n_modes):
            est = samples.for_mode(k).covariance()
            designed = designed_measured_cov(cfg, k)
            se = np.sqrt(
                (np.outer(np.diag(designed), np.diag(designed)) + designed**2) / n
            )
            assert np.all(np.abs(est - designed) <= 5 * se)

    def test_modes_orthogonal_to_basis_stay_at_vacuum_floor(self):
        cfg = make_config(n_shots=3000, seed=12)
        basis = rs.build_mode_basis(cfg)
        # alternating-sign boxcar on the first tile: orthogonal to every
        # (constant) basis mode, discrete unit norm
        sl = basis.ase_slices[0]
        m = basis.tile_samples
        weights = np.where(np.arange(m) % 2 == 0, 1.0, -1.0)
        weights -= weights.mean()  # exactly orthogonal to the boxcar
        weights /= np.linalg.norm(weights)
        projections = np.array(
            [weights @ rec.samples[sl] for rec in rs.iter_shots(cfg)]
        )
        tol = 4 * np.sqrt(2.0 / cfg.n_shots)
        assert projections.real.var(ddof=1) == pytest.approx(1.0, abs=tol)
        assert projections.imag.var(ddof=1) == pytest.approx(1.0, abs=tol)

    def test_variance_trace_decays_across_tiles(self):
        # heavy gain, long window: per-tile signal variance follows the decay
        cfg = make_config(
            alpha_l=3.2,
            eta=0.1,
            n_modes=8,
            tile_duration=5.9e-6,
            signal_bandwidth=150.2e3,
            n_shots=1500,
            seed=3,
            ase_decay_tau=60e-6,  # fast decay so 8 tiles show a clear trend
        )
        basis = rs.build_mode_basis(cfg)
        sums = np.zeros(cfg.n_modes)
        for rec in rs.iter_shots(cfg):
            for k, sl in enumerate(basis.ase_slices):
                z = rec.samples[sl]
                sums[k] += np.sum(z.real**2 + z.imag**2)
        per_sample = sums / (cfg.n_shots * basis.tile_samples)
        assert np.all(np.diff(per_sample) < 0)
        # log-linear fit of the excess over the vacuum floor recovers tau
        t = (np.arange(cfg.n_modes) + 0.5) * basis.tile_samples / cfg.sample_rate
        excess = per_sample - 2.0
        slope = np.polyfit(t, np.log(excess), 1)[0]
        assert -1.0 / slope == pytest.approx(cfg.ase_decay_tau, rel=0.1)
