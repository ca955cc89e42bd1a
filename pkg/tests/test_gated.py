import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossgate import (
    ClassifierParams,
    ConfigError,
    DomainError,
    GatedTrainerState,
    IterationRecord,
    aam_backward,
    aam_loss,
    check_selection_growth,
    finite_diff_grad,
    gated_loss,
    generate_corpus,
    init_classifier,
    init_encoder,
    make_trials,
    max_rel_error,
    run_stage2,
    train_epoch,
)
from lossgate.config import RunConfig
from lossgate.mathops import log_sum_exp


def random_classifier(num_classes, dim, seed):
    return init_classifier(num_classes, dim, seed)


class TestAamLoss:
    def test_margin_zero_reduces_to_scaled_softmax(self):
        rng = np.random.default_rng(0)
        for trial in range(10):
            d, c = 6, int(rng.integers(3, 9))
            cls = random_classifier(c, d, trial)
            emb = rng.normal(size=d)
            label = int(rng.integers(c))
            cosines = (emb / np.linalg.norm(emb)) @ cls.anchors.T
            logits = 30.0 * np.clip(cosines, -1.0, 1.0)
            direct = -logits[label] + log_sum_exp(logits)
            assert aam_loss(emb, label, cls, margin=0.0, scale=30.0) == pytest.approx(direct, abs=1e-12)

    def test_aligned_anchor_closed_form(self):
        # embedding sits exactly on its anchor; the rest are orthogonal
        for c in (10, 5, 3):
            anchors = np.eye(c, 12)
            cls = ClassifierParams(anchors=anchors)
            expected = math.log1p((c - 1) * math.exp(-30.0 * math.cos(0.2)))
            got = aam_loss(anchors[2], 2, cls, margin=0.2, scale=30.0)
            assert got == pytest.approx(expected, abs=1e-9)

    def test_loss_increases_with_margin(self):
        cls = ClassifierParams(anchors=np.eye(4, 4))
        theta = 0.7  # within (0, pi/2 - m) for every margin below
        emb = np.array([math.cos(theta), math.sin(theta), 0.0, 0.0])
        losses = [aam_loss(emb, 0, cls, margin=m, scale=30.0) for m in (0.0, 0.1, 0.2, 0.4)]
        assert all(b > a for a, b in zip(losses, losses[1:]))

    def test_label_out_of_range(self):
        cls = random_classifier(4, 6, 0)
        with pytest.raises(DomainError):
            aam_loss(np.ones(6), 4, cls)
        with pytest.raises(DomainError):
            aam_loss(np.ones(6), -1, cls)

    def test_invalid_margin_and_scale(self):
        cls = random_classifier(4, 6, 0)
        with pytest.raises(DomainError):
            aam_loss(np.ones(6), 0, cls, margin=math.pi / 2)
        with pytest.raises(DomainError):
            aam_loss(np.ones(6), 0, cls, scale=0.0)

    def test_backward_matches_finite_differences(self):
        # saturated samples (loss ~ 1e-14) fall below the resolution of the
        # central-difference oracle, so draw instances with a live gradient
        rng = np.random.default_rng(1)
        checked = 0
        trial = 0
        while checked < 10:
            trial += 1
            d, c = 5, int(rng.integers(3, 8))
            cls = random_classifier(c, d, 100 + trial)
            emb = rng.normal(size=d)
            label = int(rng.integers(c))
            if not (1e-6 < aam_loss(emb, label, cls, 0.2, 30.0) < 50.0):
                continue
            checked += 1
            _, grad_e, grad_w = aam_backward(emb, label, cls, margin=0.2, scale=30.0)
            fd_e = finite_diff_grad(lambda x: aam_loss(x, label, cls, 0.2, 30.0), emb.copy(), h=1e-5)
            fd_w = finite_diff_grad(
                lambda w: aam_loss(emb, label, ClassifierParams(anchors=w), 0.2, 30.0),
                cls.anchors.copy(),
                h=1e-5,
            )
            assert max_rel_error(grad_e, fd_e) < 1e-4
            assert max_rel_error(grad_w, fd_w) < 1e-4

    def test_classifier_init_unit_rows_and_deterministic(self):
        a = init_classifier(7, 5, seed=3)
        b = init_classifier(7, 5, seed=3)
        assert np.array_equal(a.anchors, b.anchors)
        assert np.allclose(np.linalg.norm(a.anchors, axis=1), 1.0, atol=1e-9)


class TestGatedLoss:
    def test_worked_example(self):
        total, mask = gated_loss([0.5, 2.0, 4.1], tau=3.0)
        assert total == pytest.approx(2.5)
        assert mask.tolist() == [True, True, False]

    def test_infinite_tau_keeps_everything(self):
        losses = [0.5, 2.0, 4.1]
        total, mask = gated_loss(losses, tau=math.inf)
        assert total == pytest.approx(sum(losses))
        assert mask.all()

    def test_zero_tau_selects_nothing_and_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="lossgate.gated"):
            total, mask = gated_loss([0.5, 2.0], tau=0.0)
        assert total == 0.0
        assert not mask.any()
        assert any("selected no samples" in r.message for r in caplog.records)

    def test_strict_inequality_at_boundary(self):
        _, mask = gated_loss([1.0, 0.999999], tau=1.0)
        assert mask.tolist() == [False, True]

    def test_negative_tau_rejected(self):
        with pytest.raises(DomainError):
            gated_loss([1.0], tau=-0.5)

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 5.0), st.floats(0.0, 5.0))
    @settings(max_examples=40, deadline=None)
    def test_monotone_in_tau(self, seed, tau, extra):
        rng = np.random.default_rng(seed)
        losses = rng.exponential(2.0, size=12)
        _, lo = gated_loss(losses, tau)
        _, hi = gated_loss(losses, tau + extra)
        assert np.all(hi[lo])  # raising tau never drops a selected sample


def tiny_setup(seed=0, num_speakers=5, utts=6, frames=10, feature_dim=4):
    corpus = generate_corpus(num_speakers, utts, frames, feature_dim, 0.4, 1.2, seed=seed)
    encoder = init_encoder([feature_dim, 12, 12, 8], seed=seed)
    classifier = init_classifier(num_speakers, 8, seed=seed + 1)
    labels = corpus.truth_labels()
    return corpus, encoder, classifier, labels


def run_one_epoch(corpus, encoder, classifier, labels, tau, seed=7, **kw):
    state = GatedTrainerState.fresh(encoder, classifier)
    args = dict(crop_len=4, batch_size=8, lr=1e-3, margin=0.2, scale=30.0,
                rng=np.random.default_rng(seed), noise_scale=0.05, gain_range=(0.9, 1.1))
    args.update(kw)
    return train_epoch(corpus, labels, state, tau, **args)


class TestTrainEpoch:
    def test_gate_report_consistency(self):
        corpus, encoder, classifier, labels = tiny_setup()
        _, report = run_one_epoch(corpus, encoder, classifier, labels, tau=2.0)
        assert np.array_equal(report.selected, report.losses < 2.0)
        assert report.selection_fraction == pytest.approx(float(report.selected.mean()))
        assert 0.0 <= report.selection_fraction <= 1.0
        assert report.phase == "gated"

    def test_infinite_tau_bit_identical_to_huge_finite_tau(self):
        corpus, encoder, classifier, labels = tiny_setup()
        s_inf, r_inf = run_one_epoch(corpus, encoder, classifier, labels, tau=math.inf)
        s_fin, r_fin = run_one_epoch(corpus, encoder, classifier, labels, tau=1e300)
        assert np.array_equal(r_inf.losses, r_fin.losses)
        assert r_inf.selected.all() and r_fin.selected.all()
        for a, b in zip(s_inf.encoder.arrays(), s_fin.encoder.arrays()):
            assert np.array_equal(a, b)
        assert np.array_equal(s_inf.classifier.anchors, s_fin.classifier.anchors)
        assert r_inf.phase == "plain"

    def test_rerun_determinism(self):
        corpus, encoder, classifier, labels = tiny_setup()
        s1, r1 = run_one_epoch(corpus, encoder, classifier, labels, tau=3.0)
        s2, r2 = run_one_epoch(corpus, encoder, classifier, labels, tau=3.0)
        assert np.array_equal(r1.losses, r2.losses)
        for a, b in zip(s1.encoder.arrays(), s2.encoder.arrays()):
            assert np.array_equal(a, b)

    def test_anchor_rows_stay_unit_norm(self):
        corpus, encoder, classifier, labels = tiny_setup()
        state, _ = run_one_epoch(corpus, encoder, classifier, labels, tau=math.inf)
        assert np.allclose(np.linalg.norm(state.classifier.anchors, axis=1), 1.0, atol=1e-9)

    def test_class_count_mismatch_rejected(self):
        corpus, encoder, classifier, labels = tiny_setup()
        bad = labels.copy()
        bad[0] = classifier.num_classes  # one past the last class
        with pytest.raises(DomainError):
            run_one_epoch(corpus, encoder, classifier, bad, tau=math.inf)

    def test_label_coverage_checked(self):
        corpus, encoder, classifier, labels = tiny_setup()
        with pytest.raises(DomainError):
            run_one_epoch(corpus, encoder, classifier, labels[:-1], tau=math.inf)

    def test_crop_longer_than_utterance_rejected(self):
        corpus, encoder, classifier, labels = tiny_setup(frames=4)
        with pytest.raises(ConfigError):
            run_one_epoch(corpus, encoder, classifier, labels, tau=math.inf, crop_len=5)

    def test_training_blind_to_truth_labels(self):
        import dataclasses

        corpus, encoder, classifier, labels = tiny_setup()
        scrambled = dataclasses.replace(
            corpus,
            utterances=tuple(
                dataclasses.replace(u, truth_speaker=(u.truth_speaker + 2) % 5)
                for u in corpus.utterances
            ),
        )
        s1, r1 = run_one_epoch(corpus, encoder, classifier, labels, tau=2.0)
        s2, r2 = run_one_epoch(scrambled, encoder, classifier, labels, tau=2.0)
        assert np.array_equal(r1.losses, r2.losses)
        for a, b in zip(s1.encoder.arrays(), s2.encoder.arrays()):
            assert np.array_equal(a, b)


class TestSelectionGrowth:
    def _report(self, count, n=200):
        losses = np.zeros(n)
        selected = np.zeros(n, dtype=bool)
        selected[:count] = True
        return type("R", (), {"selected": selected})()

    def test_exact_ten_percent_boundary(self):
        assert check_selection_growth([self._report(100), self._report(110)]) == [True]

    def test_just_below_boundary(self):
        assert check_selection_growth([self._report(100), self._report(109)]) == [False]

    def test_zero_base_satisfied_by_convention(self):
        assert check_selection_growth([self._report(0), self._report(5)]) == [True]

    def test_needs_two_reports(self):
        with pytest.raises(DomainError):
            check_selection_growth([self._report(10)])


class TestRunStage2:
    def _run(self, schedule, seed=0):
        corpus = generate_corpus(5, 8, 10, 4, 0.3, 1.5, seed=seed)
        encoder = init_encoder([4, 12, 12, 8], seed=seed)
        trials = make_trials(corpus, 40, seed=seed)
        return run_stage2(
            corpus, encoder, schedule,
            crop_len=4, batch_size=16, lr=1e-3, margin=0.2, scale=30.0,
            cluster_restarts=3, cluster_max_iters=50, trials=trials, seed=seed,
            noise_scale=0.05, gain_range=(0.9, 1.1),
        )

    def test_single_ungated_iteration_is_plain_baseline(self):
        rec = IterationRecord(tau=5.0, epochs_plain=2, epochs_gated=0, cluster_k=5)
        _, results = self._run((rec,))
        assert len(results) == 1
        report = results[0].report
        assert report.selection_fraction == 1.0
        assert report.selected_nmi == report.nmi
        assert all(r.phase == "plain" for r in results[0].gate_reports)

    def test_encoder_carries_over_and_classifier_resets(self):
        recs = (
            IterationRecord(tau=5.0, epochs_plain=1, epochs_gated=1, cluster_k=5),
            IterationRecord(tau=6.0, epochs_plain=1, epochs_gated=1, cluster_k=5),
        )
        final, results = self._run(recs)
        assert len(results) == 2
        assert results[0].report.iteration == 1 and results[1].report.iteration == 2
        # the final encoder reflects both iterations of training
        assert isinstance(final.arrays()[0], np.ndarray)
        for r in results:
            assert r.labels.shape == (40,)
            assert 0.0 <= r.report.eer <= 1.0
            assert 0.0 <= r.report.nmi <= 1.0

    def test_empty_schedule_rejected(self):
        with pytest.raises(ConfigError):
            self._run(())

    def test_default_schedule_taus(self):
        cfg = RunConfig()
        assert tuple(r.tau for r in cfg.schedule()) == (1.0, 3.0, 3.0, 5.0, 6.0)
        assert all(r.cluster_k == cfg.corpus.num_speakers for r in cfg.schedule())
