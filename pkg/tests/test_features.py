import csv
import math

import numpy as np
import pytest

from bdlm.errors import EmptyInput
from bdlm.features import (FEATURE_NAMES, FeatureVector, extract_features,
                           frequency_features, time_features, write_feature_csv)
from bdlm.experiments.fixtures import synthetic_segments
from bdlm.signals import FaultLabel, Segment
from bdlm.spectral import Spectrum, magnitude_spectrum

from oracles import oracle_frequency_features, oracle_time_features


def rel_close(a, b, rtol):
    if math.isnan(a) and math.isnan(b):
        return True
    return abs(a - b) <= rtol * max(abs(a), abs(b), 1e-300)


def make_segment(samples, rate=12000.0):
    samples = np.asarray(samples, dtype=np.float64)
    return Segment(samples=samples, signal_id="s", start=0, label=FaultLabel.Normal,
                   condition_id="0", dataset_id="T", sample_rate_hz=rate)


class TestTimeFeatures:
    def test_constant_signal(self):
        values, flags = time_features(np.full(2048, 2.0))
        assert values[0] == 2.0          # p1
        assert values[1] == 0.0          # p2
        assert flags == {10, 11}
        assert values[3] == 2.0 and values[4] == 2.0     # p4, p5
        assert values[6] == 16.0 and values[7] == 4.0    # p7, p8
        assert math.isnan(values[9]) and math.isnan(values[10])

    def test_alternating_signal(self):
        x = np.tile([1.0, -1.0], 1024)
        values, flags = time_features(x)
        assert values[0] == 0.0 and values[3] == 1.0 and values[4] == 1.0
        assert values[5] == 0.0          # p6 vanishes
        assert flags == {9}
        assert math.isnan(values[8])
        assert values[6] == 1.0 and values[7] == 1.0 and values[11] == 1.0

    def test_matches_oracle_on_gaussian(self, rng):
        for _ in range(20):
            x = rng.standard_normal(2048) * rng.uniform(0.1, 5.0)
            values, _ = time_features(x)
            expected = oracle_time_features(x)
            for i in range(12):
                assert rel_close(values[i], expected[i], 1e-9), (i + 1, values[i], expected[i])

    def test_literal_kurtosis_index(self, rng):
        x = rng.standard_normal(512) + 0.5
        values, _ = time_features(x, literal_kurtosis_index=True)
        p6 = np.mean(x ** 3)
        p7 = np.mean(x ** 4)
        assert values[8] == pytest.approx(p7 / p6, rel=1e-12)

    def test_ratio_identities(self, rng):
        x = rng.standard_normal(1024)
        fv = extract_features(make_segment(x))
        assert fv.p(10) == fv.p(5) / fv.p(2)
        assert fv.p(12) == fv.p(5) / fv.p(4)

    def test_too_short(self):
        with pytest.raises(EmptyInput):
            time_features(np.array([1.0]))

    def test_scale_covariance(self, rng):
        x = rng.standard_normal(768) + 0.3
        base, _ = time_features(x)
        for a in (0.25, 3.0, 17.5):
            scaled, _ = time_features(a * x)
            for i, power in ((0, 1), (1, 1), (2, 1), (3, 1), (4, 1), (7, 2), (5, 3), (6, 4)):
                assert rel_close(scaled[i], a ** power * base[i], 1e-9), (i + 1, power)
            for i in (8, 9, 10, 11):
                assert rel_close(scaled[i], base[i], 1e-9), i + 1


class TestFrequencyFeatures:
    def test_single_atom_spectrum(self):
        k = 33
        f0_index = 8
        s = np.zeros(k)
        s[f0_index] = 1.0
        freqs = np.arange(k) * 10.0
        f0 = freqs[f0_index]
        values, flags = frequency_features(Spectrum(s, freqs, 640.0))
        assert values[4] == f0                     # p17
        assert values[5] == 0.0                    # p18
        assert values[9] == 0.0                    # p22
        assert values[8] == pytest.approx(1.0)     # p21 single-bin closed form
        assert values[7] == pytest.approx(f0)      # p20
        assert flags == {23, 24}

    def test_flat_spectrum(self):
        c = 0.7
        k = 64
        values, flags = frequency_features(Spectrum(np.full(k, c), np.arange(k) * 2.0, 256.0))
        assert values[0] == pytest.approx(c)       # p13
        assert values[1] == pytest.approx(0.0, abs=1e-30)   # p14 underflows
        assert flags == {15, 16}
        assert math.isnan(values[2]) and math.isnan(values[3])

    def test_matches_oracle_on_random(self, rng):
        for _ in range(20):
            s = rng.uniform(0.0, 4.0, size=1025)
            freqs = np.arange(1025) * (6000.0 / 1024)
            values, _ = frequency_features(Spectrum(s, freqs, 12000.0))
            expected = oracle_frequency_features(s, freqs)
            for i in range(12):
                assert rel_close(values[i], expected[i], 1e-7), (i + 13, values[i], expected[i])

    def test_regularity_degree_bounded(self, rng):
        # Cauchy-Schwarz puts p21 in [0, 1]
        for _ in range(50):
            s = rng.uniform(0.0, 2.0, size=129)
            freqs = np.arange(129) * 1.5
            values, flags = frequency_features(Spectrum(s, freqs, 387.0))
            if 21 not in flags:
                assert -1e-12 <= values[8] <= 1.0 + 1e-12

    def test_uniform_scaling(self, rng):
        s = rng.uniform(0.1, 3.0, size=257)
        freqs = np.arange(257) * 4.0
        base, _ = frequency_features(Spectrum(s, freqs, 2048.0))
        a = 7.5
        scaled, _ = frequency_features(Spectrum(a * s, freqs, 2048.0))
        assert rel_close(scaled[0], a * base[0], 1e-9)          # p13
        assert rel_close(scaled[1], a * a * base[1], 1e-9)      # p14
        for i in (2, 3, 4, 5, 6, 7, 8, 9):                       # p15..p22 ratios
            assert rel_close(scaled[i], base[i], 1e-9), i + 13
        for i in (10, 11):                                       # p23, p24 scale with mass
            assert rel_close(scaled[i], a * base[i], 1e-9), i + 13

    def test_zero_spectrum_flags_everything_weighted(self):
        values, flags = frequency_features(Spectrum(np.zeros(16), np.arange(16.0), 32.0))
        assert flags.issuperset(set(range(17, 25)))
        assert flags.issuperset({15, 16})


class TestExtractFeatures:
    def test_arity_and_order(self, rng):
        fv = extract_features(make_segment(rng.standard_normal(2048)))
        assert fv.values.shape == (24,)
        assert len(FEATURE_NAMES) == 24
        tvals, _ = time_features(make_segment(rng.standard_normal(16)).samples)
        assert tvals.shape == (12,)

    def test_deterministic(self, rng):
        seg = make_segment(rng.standard_normal(2048))
        a = extract_features(seg)
        b = extract_features(seg)
        assert np.array_equal(a.values, b.values, equal_nan=True)
        assert a.flags == b.flags

    def test_composition_matches_parts(self, rng):
        seg = make_segment(rng.standard_normal(1024), rate=8000.0)
        fv = extract_features(seg)
        tvals, _ = time_features(seg.samples)
        fvals, _ = frequency_features(magnitude_spectrum(seg.samples, 8000.0))
        assert np.array_equal(fv.values[:12], tvals, equal_nan=True)
        assert np.array_equal(fv.values[12:], fvals, equal_nan=True)

    def test_impulsive_fault_raises_fourth_moment(self):
        normal = synthetic_segments(n_per_class=1, window_len=2048, seed=3,
                                    labels=(FaultLabel.Normal,))[0]
        inner = synthetic_segments(n_per_class=1, window_len=2048, seed=3,
                                   labels=(FaultLabel.InnerRace,))[0]
        # normalize scale so the raw fourth moment compares impulsiveness
        from bdlm.signals import instance_normalize
        p7_normal = extract_features(make_segment(instance_normalize(normal.samples))).p(7)
        p7_inner = extract_features(make_segment(instance_normalize(inner.samples))).p(7)
        assert p7_inner > p7_normal

    def test_feature_vector_indexing(self):
        fv = FeatureVector(values=np.arange(24.0), flags=frozenset({9}))
        assert fv.p(1) == 0.0 and fv.p(24) == 23.0
        assert fv.is_flagged(9) and not fv.is_flagged(10)
        with pytest.raises(IndexError):
            fv.p(25)


class TestFeatureCsv:
    def test_export(self, rng, tmp_path):
        segments = [make_segment(rng.standard_normal(256)) for _ in range(3)]
        rows = [(seg, extract_features(seg)) for seg in segments]
        path = tmp_path / "features.csv"
        assert write_feature_csv(rows, str(path)) == 3
        with open(path, newline="") as fh:
            parsed = list(csv.reader(fh))
        assert parsed[0][:3] == ["p1", "p2", "p3"]
        assert parsed[0][24:] == ["label", "dataset_id", "condition_id"]
        assert len(parsed) == 4
        assert float(parsed[1][0]) == rows[0][1].p(1)
        assert parsed[1][24] == "normal"
