import math

import numpy as np
import pytest

from pnsim.analytics import DecoyScheme, DeletionPolicy, detected_fraction, solve_deletion_policy
from pnsim.engine import (
    CHUNK_SIZE,
    AttackStrategy,
    AttackVariant,
    DetectorModel,
    PulseOutcome,
    PulseOutcomes,
    apply_bayes_delete,
    apply_intercept_resend,
    apply_none,
    apply_original_pns,
    apply_spns,
    iter_trial_batches,
    run_trials,
)
from pnsim.errors import InvalidParameterError
from pnsim.photon_stats import RandomStream, point_mass, poisson_pmf, summarize


def _policy(delete, fwd=1.0):
    table = np.concatenate([[0.0], np.asarray(delete, dtype=float)])
    return DeletionPolicy(
        delete_prob=table,
        forward_eta=fwd,
        target_yields=np.zeros(1),
        achieved_yields=np.zeros(1),
        residual=0.0,
    )


class TestAttackStrategy:
    def test_spns_requires_detector_assumption(self):
        with pytest.raises(InvalidParameterError):
            AttackStrategy(variant="spns")

    def test_bayes_delete_requires_policy(self):
        with pytest.raises(InvalidParameterError):
            AttackStrategy(variant="bayes_delete")

    def test_policy_rejected_elsewhere(self):
        with pytest.raises(InvalidParameterError):
            AttackStrategy(variant="none", deletion_policy=_policy([0.5]))

    @pytest.mark.parametrize("fraction", [-0.1, 1.2])
    def test_fraction_range(self, fraction):
        with pytest.raises(InvalidParameterError):
            AttackStrategy(variant="none", intercept_fraction=fraction)

    def test_string_coercion(self):
        attack = AttackStrategy.spns("pnr")
        assert attack.variant is AttackVariant.SPNS
        assert attack.detector_assumption is DetectorModel.PNR


class TestScalarChannels:
    def test_original_pns_rule(self):
        assert apply_original_pns(0) == (0, False)
        assert apply_original_pns(1) == (0, False)
        assert apply_original_pns(2) == (1, True)
        assert apply_original_pns(5) == (4, True)

    def test_none_is_thinning(self):
        stream = RandomStream(seed=31)
        draws = [apply_none(4, 0.5, stream) for _ in range(4000)]
        assert np.mean(draws) == pytest.approx(2.0, abs=0.08)
        assert max(draws) <= 4

    def test_spns_threshold_forwards_at_most_one(self):
        stream = RandomStream(seed=5)
        for n in (0, 1, 2, 4):
            for _ in range(200):
                forwarded, eve = apply_spns(n, 0.4, "threshold", stream)
                assert forwarded in (0, 1)
                assert eve == (n >= 2)

    def test_spns_threshold_detection_rate(self):
        stream = RandomStream(seed=6)
        hits = sum(
            apply_spns(3, 0.4, "threshold", stream)[0] for _ in range(20000)
        )
        want = 1.0 - 0.6**3
        assert hits / 20000 == pytest.approx(want, abs=0.01)

    def test_spns_pnr_forwards_survivors(self):
        stream = RandomStream(seed=7)
        seen = [apply_spns(3, 0.4, "pnr", stream) for _ in range(20000)]
        counts = np.bincount([f for f, _ in seen], minlength=4)
        from pnsim.photon_stats import binomial_thin_pmf

        expected = binomial_thin_pmf(3, 0.4) * 20000
        assert np.all(np.abs(counts - expected) < 5 * np.sqrt(expected + 1))
        for forwarded, eve in seen:
            assert eve == (forwarded <= 2)

    def test_bayes_delete_always_drop(self):
        stream = RandomStream(seed=8)
        assert apply_bayes_delete(2, _policy([1.0, 1.0]), stream) == (0, False, True)

    def test_bayes_delete_keep_forwards_losslessly(self):
        stream = RandomStream(seed=9)
        forwarded, eve, deleted = apply_bayes_delete(3, _policy([0.0, 0.0, 0.0]), stream)
        assert (forwarded, eve, deleted) == (1, True, False)

    def test_bayes_delete_beyond_table_never_drops(self):
        stream = RandomStream(seed=10)
        outcomes = [apply_bayes_delete(6, _policy([1.0]), stream) for _ in range(50)]
        assert all(not deleted for _, _, deleted in outcomes)


class TestInterceptResend:
    def _outcome(self, **overrides):
        base = dict(
            intensity_index=0,
            emitted_n=1,
            forwarded_l=1,
            bob_registered=1,
            alice_basis=0,
            alice_bit=1,
            bob_basis=0,
            bob_bit=1,
            sifted=True,
            bit_error=False,
            eve_holds_photon=False,
            eve_intercepted=False,
            eve_knows_bit=False,
        )
        base.update(overrides)
        return PulseOutcome(**base)

    def test_zero_fraction_is_identity(self):
        outcome = self._outcome()
        assert apply_intercept_resend(outcome, 0.0, RandomStream(1)) is outcome

    def test_held_photon_blocks_interception(self):
        outcome = self._outcome(eve_holds_photon=True)
        assert apply_intercept_resend(outcome, 1.0, RandomStream(2)) is outcome

    def test_undetected_pulse_not_intercepted(self):
        outcome = self._outcome(bob_registered=0, sifted=False, bob_bit=-1)
        assert apply_intercept_resend(outcome, 1.0, RandomStream(3)) is outcome

    def test_full_interception_statistics(self):
        stream = RandomStream(seed=44)
        errors = knows = 0
        reps = 8000
        for _ in range(reps):
            got = apply_intercept_resend(self._outcome(), 1.0, stream)
            assert got.eve_intercepted
            errors += got.bit_error
            knows += got.eve_knows_bit
        # Sifted singles: error rate 1/4, Eve learns the bit half the time.
        assert errors / reps == pytest.approx(0.25, abs=0.02)
        assert knows / reps == pytest.approx(0.5, abs=0.02)


class TestRunTrialsBasics:
    def test_trial_count_and_chunk_boundary(self):
        pmf = poisson_pmf(0.5)
        out = run_trials(pmf, 0.2, "threshold", AttackStrategy.none(), CHUNK_SIZE + 17, seed=1)
        assert len(out) == CHUNK_SIZE + 17

    def test_invalid_trials_rejected(self):
        with pytest.raises(InvalidParameterError):
            run_trials(poisson_pmf(0.5), 0.2, "threshold", AttackStrategy.none(), 0, seed=1)

    def test_invalid_workers_rejected(self):
        with pytest.raises(InvalidParameterError):
            run_trials(poisson_pmf(0.5), 0.2, "threshold", AttackStrategy.none(), 10, seed=1, workers=0)

    def test_bad_source_rejected(self):
        with pytest.raises(InvalidParameterError):
            run_trials([0.5, 0.5], 0.2, "threshold", AttackStrategy.none(), 10, seed=1)

    def test_outcome_indexing_and_iteration(self):
        out = run_trials(point_mass(1), 1.0, "threshold", AttackStrategy.none(), 50, seed=3)
        first = out[0]
        assert isinstance(first, PulseOutcome)
        assert isinstance(first.sifted, bool)
        assert sum(1 for _ in out) == 50

    def test_undetected_pulses_have_no_bob_bit(self):
        out = run_trials(poisson_pmf(0.1), 0.05, "threshold", AttackStrategy.none(), 5000, seed=4)
        undetected = out.bob_registered == 0
        assert undetected.any()
        assert np.all(out.bob_bit[undetected] == -1)
        assert np.all(out.bob_bit[~undetected] >= 0)

    def test_concatenate_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            PulseOutcomes.concatenate([])


class TestDeterminism:
    def test_same_seed_identical(self):
        pmf = poisson_pmf(0.5)
        attack = AttackStrategy.spns("threshold")
        a = run_trials(pmf, 0.1, "threshold", attack, 70000, seed=12)
        b = run_trials(pmf, 0.1, "threshold", attack, 70000, seed=12)
        for name in ("emitted_n", "forwarded_l", "bob_bit", "sifted", "eve_knows_bit"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_different_seed_differs(self):
        pmf = poisson_pmf(0.5)
        a = run_trials(pmf, 0.1, "threshold", AttackStrategy.none(), 70000, seed=12)
        b = run_trials(pmf, 0.1, "threshold", AttackStrategy.none(), 70000, seed=13)
        assert not np.array_equal(a.emitted_n, b.emitted_n)

    @pytest.mark.parametrize("workers", [2, 4])
    def test_worker_count_does_not_change_results(self, workers, scheme3):
        attack = AttackStrategy.spns("threshold")
        a = run_trials(scheme3, 0.1, "threshold", attack, 3 * CHUNK_SIZE + 5, seed=21)
        b = run_trials(
            scheme3, 0.1, "threshold", attack, 3 * CHUNK_SIZE + 5, seed=21, workers=workers
        )
        for name in ("intensity_index", "emitted_n", "bob_bit", "eve_knows_bit"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_streaming_matches_bulk(self, scheme3):
        attack = AttackStrategy.none()
        batches = list(
            iter_trial_batches(scheme3, 0.1, "threshold", attack, 2 * CHUNK_SIZE + 9, seed=2)
        )
        bulk = run_trials(scheme3, 0.1, "threshold", attack, 2 * CHUNK_SIZE + 9, seed=2)
        assert sum(len(b) for b in batches) == len(bulk)
        assert np.array_equal(
            np.concatenate([b.emitted_n for b in batches]), bulk.emitted_n
        )


class TestBatchInvariants:
    @pytest.mark.parametrize(
        "attack",
        [
            AttackStrategy.none(),
            AttackStrategy.original_pns(),
            AttackStrategy.spns("threshold"),
            AttackStrategy.spns("pnr"),
            AttackStrategy(variant="none", intercept_fraction=0.3),
        ],
        ids=["none", "original", "spns-thr", "spns-pnr", "intercept"],
    )
    def test_flag_consistency(self, attack, scheme3):
        out = run_trials(scheme3, 0.1, "threshold", attack, 40000, seed=33)
        detected = out.bob_registered >= 1
        assert np.array_equal(out.sifted, detected & (out.alice_basis == out.bob_basis))
        assert not np.any(out.bit_error & ~out.sifted)
        assert not np.any(out.eve_intercepted & out.eve_holds_photon)
        assert not np.any(out.eve_intercepted & ~detected)
        assert np.array_equal(
            out.eve_knows_bit & ~out.eve_holds_photon & ~out.eve_intercepted,
            np.zeros(len(out), dtype=bool),
        )

    def test_intensity_composition_follows_weights(self, scheme3):
        out = run_trials(scheme3, 0.1, "threshold", AttackStrategy.none(), 200000, seed=40)
        counts = np.bincount(out.intensity_index, minlength=3)
        for i, (_, w) in enumerate(scheme3.intensities):
            sigma = math.sqrt(200000 * w * (1 - w))
            assert abs(counts[i] - 200000 * w) < 5 * sigma

    def test_emitted_numbers_follow_pmf(self):
        pmf = poisson_pmf(0.5)
        out = run_trials(pmf, 0.5, "threshold", AttackStrategy.none(), 200000, seed=41)
        counts = np.bincount(out.emitted_n, minlength=pmf.n_max + 1)
        for n in range(4):
            expected = 200000 * pmf.probs[n]
            assert abs(counts[n] - expected) < 5 * math.sqrt(expected + 1)


class TestAttackSemantics:
    def test_spns_is_invisible_in_detection_pattern(self, scheme3):
        """Same seed, honest channel vs spns: Bob sees the identical
        click pattern and bit string; only Eve's ledger differs."""
        honest = run_trials(scheme3, 0.1, "threshold", AttackStrategy.none(), 100000, seed=50)
        attacked = run_trials(
            scheme3, 0.1, "threshold", AttackStrategy.spns("threshold"), 100000, seed=50
        )
        assert np.array_equal(honest.bob_registered, attacked.bob_registered)
        assert np.array_equal(honest.bob_bit, attacked.bob_bit)
        assert np.array_equal(honest.sifted, attacked.sifted)
        assert not np.array_equal(honest.eve_knows_bit, attacked.eve_knows_bit)

    def test_spns_introduces_no_errors(self, scheme3):
        out = run_trials(
            scheme3, 0.1, "threshold", AttackStrategy.spns("threshold"), 200000, seed=51
        )
        assert int(out.bit_error.sum()) == 0

    def test_spns_eve_holds_iff_multi(self):
        pmf = poisson_pmf(0.5)
        out = run_trials(pmf, 0.1, "threshold", AttackStrategy.spns("threshold"), 50000, seed=52)
        assert np.array_equal(out.eve_holds_photon, out.emitted_n >= 2)

    def test_spns_pnr_eve_holds_only_on_loss(self):
        pmf = poisson_pmf(0.5)
        out = run_trials(pmf, 0.4, "pnr", AttackStrategy.spns("pnr"), 50000, seed=53)
        multi = out.emitted_n >= 2
        assert np.array_equal(
            out.eve_holds_photon, multi & (out.forwarded_l <= out.emitted_n - 1)
        )

    def test_original_pns_yield_is_multi_mass(self, pmf_p06):
        out = run_trials(pmf_p06, 0.1, "threshold", AttackStrategy.original_pns(), 300000, seed=54)
        detected = out.bob_registered >= 1
        pm = summarize(pmf_p06).pm
        sigma = math.sqrt(pm * (1 - pm) / 300000)
        assert detected.mean() == pytest.approx(pm, abs=5 * sigma)
        assert int(out.bit_error.sum()) == 0
        assert np.all(out.eve_knows_bit[out.sifted])

    def test_original_pns_forwards_all_but_one(self):
        out = run_trials(poisson_pmf(1.0), 0.3, "pnr", AttackStrategy.original_pns(), 20000, seed=55)
        multi = out.emitted_n >= 2
        assert np.array_equal(out.forwarded_l[multi], out.emitted_n[multi] - 1)
        assert np.all(out.forwarded_l[~multi] == 0)

    def test_threshold_bob_registers_at_most_one(self, scheme3):
        out = run_trials(scheme3, 0.3, "threshold", AttackStrategy.none(), 30000, seed=56)
        assert out.bob_registered.max() <= 1

    def test_pnr_bob_sees_full_counts_from_honest_channel(self):
        out = run_trials(poisson_pmf(1.0), 0.9, "pnr", AttackStrategy.none(), 30000, seed=57)
        assert out.bob_registered.max() >= 2

    def test_spns_threshold_attack_starves_pnr_bob(self):
        """Against a counting receiver the threshold-tuned attack is
        visible: no multi-photon registrations ever arrive."""
        out = run_trials(poisson_pmf(1.0), 0.9, "pnr", AttackStrategy.spns("threshold"), 30000, seed=58)
        assert out.bob_registered.max() <= 1

    def test_intercept_resend_error_rate_on_sifted_singles(self):
        out = run_trials(
            point_mass(1), 1.0, "threshold",
            AttackStrategy(variant="none", intercept_fraction=1.0), 100000, seed=59,
        )
        sifted = out.sifted
        qber = out.bit_error[sifted].mean()
        sigma = math.sqrt(0.25 * 0.75 / sifted.sum())
        assert qber == pytest.approx(0.25, abs=5 * sigma)
        knows = out.eve_knows_bit[sifted].mean()
        assert knows == pytest.approx(0.5, abs=5 * math.sqrt(0.25 / sifted.sum()))

    def test_partial_interception_scales_error_rate(self, pmf_p06):
        out = run_trials(
            pmf_p06, 0.1, "threshold",
            AttackStrategy.spns("threshold", intercept_fraction=0.2), 10**6, seed=60,
        )
        sifted = out.sifted
        qber = out.bit_error[sifted].mean()
        # Eve holds multi-photon bits already, so interception touches the
        # single-photon share: expected error rate is
        # fraction * (1 - leak) / 4.
        from pnsim.analytics import spns_leak

        leak = spns_leak(pmf_p06, 0.1, "threshold")
        expected = 0.2 * (1.0 - leak) * 0.25
        sigma = math.sqrt(expected * (1 - expected) / sifted.sum())
        assert qber == pytest.approx(expected, abs=5 * sigma)

    def test_bayes_delete_reproduces_target_yields(self, scheme3):
        policy = solve_deletion_policy(scheme3, 0.1)
        out = run_trials(scheme3, 0.1, "threshold", AttackStrategy.bayes_delete(policy), 10**6, seed=61)
        detected = out.bob_registered >= 1
        for i, pmf in enumerate(scheme3.pmfs):
            mask = out.intensity_index == i
            target = policy.target_yields[i]
            sigma = math.sqrt(target * (1 - target) / mask.sum())
            assert detected[mask].mean() == pytest.approx(target, abs=5 * sigma)

    def test_bayes_delete_full_deletion_silences_channel(self, pmf_p06):
        policy = _policy([1.0] * 20)
        out = run_trials(pmf_p06, 0.1, "threshold", AttackStrategy.bayes_delete(policy), 20000, seed=62)
        assert out.bob_registered.max() == 0
