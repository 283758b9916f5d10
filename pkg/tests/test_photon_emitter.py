import numpy as np
import pytest

from pmtrap import analysis, photon_emitter as pe

import oracles


EXC = pe.ExcitationConfig()
CHAIN = pe.DetectionChain()


class TestExcitonsPerPulse:
    def test_mean(self):
        rng = np.random.default_rng(0)
        k = pe.excitons_per_pulse(2e-6, 2.63e-6, rng, size=1_000_000)
        assert np.mean(k) == pytest.approx(2.0 / 2.63, rel=0.01)

    def test_emission_probability(self):
        # Pr(k >= 1) = 1 - exp(-P/P_sat)
        rng = np.random.default_rng(1)
        k = pe.excitons_per_pulse(2e-6, 2.63e-6, rng, size=1_000_000)
        expected = 1.0 - np.exp(-2.0 / 2.63)
        assert np.mean(k >= 1) == pytest.approx(expected, abs=0.005)

    def test_zero_power(self):
        rng = np.random.default_rng(2)
        assert pe.excitons_per_pulse(0.0, 2.63e-6, rng) == 0
        assert np.all(pe.excitons_per_pulse(0.0, 2.63e-6, rng, size=100) == 0)

    def test_invalid(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            pe.excitons_per_pulse(1e-6, 0.0, rng)


class TestAugerReduce:
    def test_full_annihilation(self):
        rng = np.random.default_rng(0)
        for k in range(10):
            assert pe.auger_reduce(k, 1.0, rng) == min(k, 1)

    def test_no_annihilation(self):
        rng = np.random.default_rng(0)
        for k in range(10):
            assert pe.auger_reduce(k, 0.0, rng) == k

    def test_photon_number_conserved(self):
        rng = np.random.default_rng(4)
        for _ in range(2000):
            k = int(rng.integers(0, 12))
            p = float(rng.random())
            out = pe.auger_reduce(k, p, rng)
            assert 0 <= out <= k
            if k >= 1:
                assert out >= 1  # chain always leaves at least one radiator

    @pytest.mark.parametrize("k,p", [(2, 0.9), (3, 0.5), (5, 0.7), (8, 0.3)])
    def test_matches_enumeration_oracle(self, k, p):
        rng = np.random.default_rng(10 + k)
        n = 40000
        draws = np.array([pe.auger_reduce(k, p, rng) for _ in range(n)])
        pmf = oracles.auger_photon_pmf(k, p)
        for value, prob in enumerate(pmf):
            if prob < 1e-4:
                continue
            observed = np.mean(draws == value)
            sigma = np.sqrt(prob * (1 - prob) / n)
            assert abs(observed - prob) < 4 * sigma

    def test_vectorized_matches_scalar_stats(self):
        rng = np.random.default_rng(7)
        k = rng.poisson(0.76, 200_000)
        out = pe._auger_reduce_array(k, 0.9, rng)
        assert np.all(out <= k)
        pmf1 = oracles.auger_photon_pmf(3, 0.9)
        sel = out[k == 3]
        assert np.mean(sel == 1) == pytest.approx(pmf1[1], abs=0.02)

    def test_oracle_normalized(self):
        for k in range(11):
            assert oracles.auger_photon_pmf(k, 0.63).sum() == pytest.approx(1.0)


class TestBlinkTrajectory:
    def test_steady(self):
        rng = np.random.default_rng(0)
        traj = pe.blink_trajectory(1.0, pe.EmitterModel(), rng)
        assert np.all(traj.attenuation_at(np.linspace(0, 1, 100)) == 1.0)

    def test_vanishing_grey_dwell_mostly_bright(self):
        rng = np.random.default_rng(1)
        model = pe.EmitterModel(blink_mode="two_state", grey_dwell=1e-7,
                                bright_dwell=1e-2)
        traj = pe.blink_trajectory(2.0, model, rng)
        att = traj.attenuation_at(np.linspace(0, 2, 100_000))
        assert np.mean(att) > 0.999

    def test_occupancy_one_to_four(self):
        # bright:grey dwell 1:4, attenuation 3 -> mean attenuation
        # 0.2 * 1 + 0.8 / 3
        rng = np.random.default_rng(2)
        model = pe.EmitterModel(blink_mode="two_state", grey_attenuation=3.0,
                                bright_dwell=1e-3, grey_dwell=4e-3)
        traj = pe.blink_trajectory(100.0, model, rng)
        att = traj.attenuation_at(np.linspace(0, 100, 1_000_000))
        expected = 0.2 + 0.8 / 3.0
        assert np.mean(att) == pytest.approx(expected, rel=0.05)


class TestGenerateTimeTags:
    def test_reference_rate(self):
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 1.0, seed=11)
        rate = len(stream) / 1.0
        assert 125e3 - 14e3 < rate < 125e3 + 14e3

    def test_zero_yield_empty(self):
        emitter = pe.EmitterModel(quantum_yield=0.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 0.1, seed=1)
        assert len(stream) == 0

    def test_zero_excitation_empty(self):
        exc = pe.ExcitationConfig(average_power=0.0)
        stream = pe.generate_time_tags(exc, pe.EmitterModel(), CHAIN, 0.1, seed=1)
        assert len(stream) == 0

    def test_deterministic(self):
        emitter = pe.EmitterModel(auger_pair_prob=0.8)
        a = pe.generate_time_tags(EXC, emitter, CHAIN, 0.3, seed=5)
        b = pe.generate_time_tags(EXC, emitter, CHAIN, 0.3, seed=5)
        assert np.array_equal(a.timestamps, b.timestamps)
        assert np.array_equal(a.channels, b.channels)

    def test_sorted_within_window(self):
        emitter = pe.EmitterModel(auger_pair_prob=0.5)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 0.2, seed=6)
        assert np.all(np.diff(stream.timestamps) >= 0)
        assert stream.timestamps[-1] <= 0.2

    def test_jitter_keeps_order_and_window(self):
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 0.2, seed=6,
                                       jitter_scale=30e-9)
        assert np.all(np.diff(stream.timestamps) >= 0)
        assert stream.timestamps[-1] < 0.2

    def test_channels_balanced(self):
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 1.0, seed=8)
        n0, n1 = stream.counts_per_channel()
        assert abs(n0 - n1) < 5 * np.sqrt(len(stream))


class TestDownstreamG2:
    def test_single_photon_zero(self):
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 1.0, seed=20)
        assert len(stream) > 1e5
        result = analysis.g2_zero(stream, 1e-6)
        assert result.g2 == 0.0

    def test_poissonian_unity(self):
        emitter = pe.EmitterModel(auger_pair_prob=0.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 2.0, seed=21)
        result = analysis.g2_zero(stream, 1e-6)
        assert abs(result.g2 - 1.0) < 3 * result.error

    @pytest.mark.parametrize("n", [2, 4])
    def test_independent_emitters(self, n):
        emitter = pe.EmitterModel(n_rods=n, auger_pair_prob=1.0,
                                  independent_emitters=True)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 1.0, seed=22 + n)
        result = analysis.g2_zero(stream, 1e-6)
        expected = oracles.independent_emitters_g2(n)
        assert abs(result.g2 - expected) < 3 * result.error

    def test_band_setting(self):
        # the documented (p_A = 0.9, shared pool) point sits in the
        # observed antibunching band
        emitter = pe.EmitterModel(auger_pair_prob=0.9)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 2.0, seed=25)
        result = analysis.g2_zero(stream, 1e-6)
        assert 0.15 <= result.g2 <= 0.44
        expected = oracles.pulsed_g2_expected(EXC.mean_excitons, 0.9)
        assert abs(result.g2 - expected) < 3 * result.error

    def test_monotone_in_pair_prob(self):
        values = []
        for p in (0.2, 0.5, 0.8, 1.0):
            emitter = pe.EmitterModel(auger_pair_prob=p)
            stream = pe.generate_time_tags(EXC, emitter, CHAIN, 1.0, seed=30)
            values.append(analysis.g2_zero(stream, 1e-6).g2)
        oracle = [oracles.pulsed_g2_expected(EXC.mean_excitons, p)
                  for p in (0.2, 0.5, 0.8, 1.0)]
        assert np.all(np.diff(oracle) < 0)
        assert np.all(np.diff(values) < 0.05)  # allows MC noise


class TestExpectedCountRate:
    def test_reference_budget(self):
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        est = pe.expected_count_rate(EXC, emitter, CHAIN)
        assert est.rate == pytest.approx(125.4e3, rel=0.01)
        assert est.uncertainty == pytest.approx(13.7e3, rel=0.05)

    def test_ideal_chain_limit(self):
        # a_pi = 1, all other factors unity, far above saturation
        exc = pe.ExcitationConfig(average_power=1.0, saturation_power=2.63e-6)
        chain = pe.DetectionChain(apd_quantum_efficiency=1.0,
                                  mirror_reflectivity=1.0,
                                  setup_transmission=1.0, a_pi=1.0)
        emitter = pe.EmitterModel(quantum_yield=1.0)
        est = pe.expected_count_rate(exc, emitter, chain)
        assert est.rate == pytest.approx(1e6 * 0.94, rel=1e-6)

    def test_monotone_in_factors(self):
        emitter = pe.EmitterModel()
        base = pe.expected_count_rate(EXC, emitter, CHAIN).rate
        better = pe.DetectionChain(apd_quantum_efficiency=0.8)
        assert pe.expected_count_rate(EXC, emitter, better).rate > base
        stronger = pe.ExcitationConfig(average_power=4e-6)
        assert pe.expected_count_rate(stronger, emitter, CHAIN).rate > base

    def test_monte_carlo_agreement(self):
        emitter = pe.EmitterModel(auger_pair_prob=1.0)
        stream = pe.generate_time_tags(EXC, emitter, CHAIN, 2.0, seed=31)
        est = pe.expected_count_rate(EXC, emitter, CHAIN)
        assert len(stream) / 2.0 == pytest.approx(est.rate, rel=0.02)


class TestClusterAugerLaw:
    def test_bounds_and_decay(self):
        p1 = pe.auger_prob_for_cluster(1)
        p16 = pe.auger_prob_for_cluster(16)
        p64 = pe.auger_prob_for_cluster(64)
        assert 0 < p64 < p16 < p1 <= 1.0

    def test_g2_rises_with_cluster_size(self):
        g2s = [oracles.pulsed_g2_expected(EXC.mean_excitons,
                                          pe.auger_prob_for_cluster(n))
               for n in (1, 16, 64)]
        assert np.all(np.diff(g2s) > 0)


class TestValidation:
    def test_stream_invariants(self):
        with pytest.raises(ValueError):
            pe.TimeTagStream(channels=np.array([0, 1], dtype=np.uint8),
                             timestamps=np.array([2.0, 1.0]), duration=3.0)
        with pytest.raises(ValueError):
            pe.TimeTagStream(channels=np.array([0], dtype=np.uint8),
                             timestamps=np.array([5.0]), duration=3.0)

    def test_model_bounds(self):
        with pytest.raises(ValueError):
            pe.EmitterModel(auger_pair_prob=1.5)
        with pytest.raises(ValueError):
            pe.EmitterModel(grey_attenuation=0.5)
        with pytest.raises(ValueError):
            pe.DetectionChain(apd_quantum_efficiency=0.0)
        with pytest.raises(ValueError):
            pe.ExcitationConfig(saturation_power=0.0)
