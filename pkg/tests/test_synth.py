from __future__ import annotations

import numpy as np
import pytest

from blastgp.interpreter import BASE_CODES, precompute_features
from blastgp.seqdata import LabelArrays
from blastgp.synth import (MATCH_THRESHOLD, OracleSpec, e_value_score,
                           generate_synthetic, length_score, match_score,
                           oracle_scores, repeat_score)

from conftest import make_record


def pack(bases_str, qual):
    bases = np.array([[BASE_CODES[b] for b in bases_str]], dtype=np.uint8)
    q = np.full((1, 36), float(qual)) if np.isscalar(qual) else np.array([qual])
    return bases, q


class TestOracleFormulas:
    def test_match_oracle_hand_value(self):
        # all-qual-4.0, G-free read: 35 terms of (4.0 - (-1))/4.0 = 43.75
        bases, qual = pack("ACT" * 12, 4.0)
        assert match_score(bases, qual)[0] == pytest.approx(43.75, abs=1e-12)
        assert 43.75 < MATCH_THRESHOLD  # classified negative

    def test_match_oracle_g_flips_sign_of_numerator_term(self):
        bases, qual = pack("G" * 36, 4.0)
        # every term (4.0 - 1)/4.0 = 0.75
        assert match_score(bases, qual)[0] == pytest.approx(35 * 0.75, abs=1e-12)

    def test_match_oracle_protected_division(self):
        qual = [0.0] * 36
        bases, q = pack("ACT" * 12, qual)
        assert match_score(bases, q)[0] == pytest.approx(35.0)  # every term -> 1

    def test_length_oracle_all_high_quality(self):
        _, qual = pack("A" * 36, 4.0)
        assert length_score(qual)[0] == 666.0  # sum of 1..36

    def test_length_oracle_threshold_is_strict(self):
        _, qual = pack("A" * 36, 1.0)
        assert length_score(qual)[0] == -666.0  # qual must exceed 1

    def test_e_value_oracle_uniform_quality_is_minimal(self):
        _, q4 = pack("A" * 36, 4.0)
        _, q1 = pack("A" * 36, 0.1)
        assert e_value_score(q4)[0] == pytest.approx(666.0 ** 2)
        assert e_value_score(q1)[0] == pytest.approx(666.0 ** 2)
        mixed = np.array([[4.0, 0.1] * 18])
        assert e_value_score(mixed)[0] > 666.0 ** 2

    def test_repeat_oracle_matches_feature_runs(self):
        for bases_str in ("A" * 36, "ACGT" * 9, "GGGT" + "A" * 32, "AANNA" + "C" * 31):
            bases = np.array([[BASE_CODES[b] for b in bases_str]], dtype=np.uint8)
            expect = precompute_features(make_record(bases_str)).run_len.sum()
            assert repeat_score(bases)[0] == expect

    def test_unknown_oracle_rejected(self):
        with pytest.raises(ValueError, match="unknown oracle"):
            OracleSpec("bogus")
        with pytest.raises(ValueError, match="unknown oracle"):
            oracle_scores("bogus", *pack("A" * 36, 1.0))

    def test_negative_noise_rejected(self):
        with pytest.raises(ValueError, match="noise"):
            OracleSpec("match", noise_sd=-0.1)


class TestGenerator:
    def test_fixed_seed_is_bit_reproducible(self):
        spec = OracleSpec("e_value")
        a = generate_synthetic(300, spec, np.random.default_rng(42))
        b = generate_synthetic(300, spec, np.random.default_rng(42))
        assert a[0] == b[0]
        assert a[1] == b[1]
        assert a[2] == b[2]

    def test_labels_satisfy_invariants(self):
        for name in ("e_value", "length", "match", "repeat"):
            records, labels, _ = generate_synthetic(400, OracleSpec(name),
                                                    np.random.default_rng(7))
            for rec, lab in zip(records, labels):
                rec.check()
                lab.check()
                assert lab.has_hq_match == (lab.log10_e < -5.0)

    def test_e_value_mapping_monotone_in_score(self):
        records, labels, _ = generate_synthetic(500, OracleSpec("e_value"),
                                                np.random.default_rng(3))
        qual = np.array([r.qual for r in records])
        score = e_value_score(qual)
        arr = LabelArrays.from_labels(labels)
        mapped = arr.best_len > 0
        order = np.argsort(score[mapped])
        assert np.all(np.diff(arr.log10_e[mapped][order]) >= 0)
        # worst scores become the no-match sentinel
        assert score[~mapped].min() >= score[mapped].max()

    def test_length_mapping_extremes(self):
        records, labels, _ = generate_synthetic(800, OracleSpec("length"),
                                                np.random.default_rng(5))
        qual = np.array([r.qual for r in records])
        score = length_score(qual)
        arr = LabelArrays.from_labels(labels)
        mapped = arr.best_len > 0
        assert arr.best_len[np.argmax(score)] == 36  # best score -> longest bin
        assert not mapped[np.argmin(score)]          # worst scores -> no match
        order = np.argsort(score[mapped])
        assert np.all(np.diff(arr.best_len[mapped][order]) >= 0)

    def test_match_classification_threshold(self):
        records, labels, man = generate_synthetic(600, OracleSpec("match"),
                                                  np.random.default_rng(11))
        bases = np.array([[BASE_CODES[b] for b in r.bases] for r in records], dtype=np.uint8)
        qual = np.array([r.qual for r in records])
        score = match_score(bases, qual)
        arr = LabelArrays.from_labels(labels)
        assert np.array_equal(arr.hq, score > MATCH_THRESHOLD)
        assert man["threshold"] == repr(MATCH_THRESHOLD)
        # the mixture keeps both classes usable for 300/300 sampling at scale
        assert 0.25 < arr.hq.mean() < 0.75

    def test_repeat_positive_fraction(self):
        records, labels, _ = generate_synthetic(2357, OracleSpec("repeat"),
                                                np.random.default_rng(13))
        arr = LabelArrays.from_labels(labels)
        assert arr.multi.sum() == 324  # round(2357 * 324/2357)
        bases = np.array([[BASE_CODES[b] for b in r.bases] for r in records], dtype=np.uint8)
        score = repeat_score(bases)
        assert score[arr.multi].min() >= score[~arr.multi].max()

    def test_noise_changes_labels_but_keeps_structure(self):
        noisy = OracleSpec("length", noise_sd=0.5)
        records, labels, man = generate_synthetic(400, noisy, np.random.default_rng(9))
        assert man["noise_sd"] == repr(0.5)
        for lab in labels:
            lab.check()

    def test_manifest_records_mapping(self):
        _, _, man = generate_synthetic(300, OracleSpec("e_value"), np.random.default_rng(1))
        for key in ("oracle", "n", "noise_sd", "qual_dist", "mapping", "no_match"):
            assert key in man
        assert man["oracle"] == "e_value"
        assert man["qual_dist"] == "uniform"
