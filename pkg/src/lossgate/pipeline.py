"""End-to-end orchestration: data generation, pretraining, clustering, the
iteration loop, the toy label-noise experiment, ablations, and scoring.

Each function writes its artifacts under the configured output directory and
returns the in-memory results so callers (CLI, tests, demos) can chain them
without re-reading files.
"""

from __future__ import annotations

import logging
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .cluster import elbow_scan, kmeans, save_labels
from .config import RunConfig, child_rng, child_seed, validate_config
from .contrastive import train_contrastive
from .corpus import (
    Corpus,
    generate_corpus,
    inject_label_noise,
    load_corpus,
    load_trials,
    make_trials,
    save_corpus,
    save_trials,
)
from .encoder import EncoderParams, encode_batch, init_encoder, load_encoder, save_encoder
from .errors import ConfigError
from .gated import (
    GatedTrainerState,
    IterationResult,
    init_classifier,
    run_stage2,
    train_epoch,
)
from .metrics import RunReport, eer, nmi, reliable_mask, toy_loss_split
from .reporting import (
    format_summary_table,
    write_csv,
    write_iteration_artifacts,
    write_json,
    write_loss_history,
    write_loss_traces,
    write_run_reports,
    write_scores,
    write_toy_curves,
    write_wcss_scan,
)

logger = logging.getLogger(__name__)


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _embed_all(params: EncoderParams, corpus: Corpus) -> np.ndarray:
    emb, _ = encode_batch(params, corpus.stacked_frames(), want_cache=False)
    return emb


def _layer_sizes(cfg: RunConfig) -> list[int]:
    return [cfg.corpus.feature_dim, *cfg.encoder.hidden, cfg.encoder.embedding_dim]


def gen_data(cfg: RunConfig):
    """Generate the corpus and trial list, write both files."""
    validate_config(cfg)
    corpus = generate_corpus(
        cfg.corpus.num_speakers,
        cfg.corpus.utts_per_speaker,
        cfg.corpus.frames_per_utt,
        cfg.corpus.feature_dim,
        cfg.corpus.intra_spread,
        cfg.corpus.inter_spread,
        seed=child_seed(cfg.seed, "corpus"),
    )
    trials = make_trials(corpus, cfg.eval.num_trials, seed=child_seed(cfg.seed, "trials"))
    out = _out(cfg)
    save_corpus(out / "corpus.bin", corpus)
    save_trials(out / "trials.txt", trials)
    return corpus, trials


def _load_or_gen_data(cfg: RunConfig):
    out = Path(cfg.out_dir)
    if (out / "corpus.bin").exists() and (out / "trials.txt").exists():
        return load_corpus(out / "corpus.bin"), load_trials(out / "trials.txt")
    return gen_data(cfg)


def stage1(cfg: RunConfig, corpus: Corpus | None = None):
    """Contrastive pretraining; writes the loss history and a checkpoint."""
    validate_config(cfg)
    if corpus is None:
        corpus, _ = _load_or_gen_data(cfg)
    params = init_encoder(_layer_sizes(cfg), seed=child_seed(cfg.seed, "encoder_init"))
    params, history = train_contrastive(
        corpus,
        params,
        batch_size=cfg.stage1.batch_size,
        epochs=cfg.stage1.epochs,
        lr=cfg.stage1.lr,
        segment_len=cfg.stage1.segment_len,
        noise_scale=cfg.stage1.noise_scale,
        gain_range=(cfg.stage1.gain_lo, cfg.stage1.gain_hi),
        rng=child_rng(cfg.seed, "stage1"),
        lr_decay=cfg.stage1.lr_decay,
        lr_decay_every=cfg.stage1.lr_decay_every,
    )
    out = _out(cfg)
    write_loss_history(out / "stage1_loss.csv", history)
    save_encoder(out / "stage1_encoder.ckpt", params)
    return params, history


def cluster_once(cfg: RunConfig, corpus: Corpus | None = None, params: EncoderParams | None = None):
    """Embed the corpus and cluster it once; optionally run the elbow scan."""
    validate_config(cfg)
    if corpus is None:
        corpus, _ = _load_or_gen_data(cfg)
    out = _out(cfg)
    if params is None:
        ckpt = out / "stage1_encoder.ckpt"
        if not ckpt.exists():
            raise ConfigError(f"no encoder checkpoint at {ckpt}; run stage1 first")
        params = load_encoder(ckpt)
    embeddings = _embed_all(params, corpus)
    result = kmeans(
        embeddings,
        cfg.resolved_k(),
        max_iters=cfg.cluster.max_iters,
        seed=child_seed(cfg.seed, "cluster", 0),
        restarts=cfg.cluster.restarts,
    )
    save_labels(out / "labels.txt", result.label_set)
    scan = []
    if cfg.cluster.elbow_ks:
        scan = elbow_scan(
            embeddings,
            cfg.cluster.elbow_ks,
            max_iters=cfg.cluster.max_iters,
            seed=child_seed(cfg.seed, "cluster", 0),
            restarts=cfg.cluster.restarts,
        )
        write_wcss_scan(out / "wcss_scan.csv", scan)
    return result, scan


def stage2(cfg: RunConfig, corpus: Corpus | None = None, params: EncoderParams | None = None, trials=None):
    """Run the full iteration schedule from a pretrained encoder."""
    validate_config(cfg)
    if corpus is None or trials is None:
        corpus, trials = _load_or_gen_data(cfg)
    out = _out(cfg)
    if params is None:
        ckpt = out / "stage1_encoder.ckpt"
        if not ckpt.exists():
            raise ConfigError(f"no encoder checkpoint at {ckpt}; run stage1 first")
        params = load_encoder(ckpt)
    final, results = run_stage2(
        corpus,
        params,
        cfg.schedule(),
        crop_len=cfg.stage2.crop_len,
        batch_size=cfg.stage2.batch_size,
        lr=cfg.stage2.lr,
        margin=cfg.stage2.margin,
        scale=cfg.stage2.scale,
        cluster_restarts=cfg.cluster.restarts,
        cluster_max_iters=cfg.cluster.max_iters,
        trials=trials,
        seed=cfg.seed,
        noise_scale=cfg.stage2.noise_scale,
        gain_range=(cfg.stage2.gain_lo, cfg.stage2.gain_hi),
    )
    for result in results:
        write_iteration_artifacts(out / f"iter{result.report.iteration}", result)
    write_run_reports(out / "run_reports.json", [r.report for r in results])
    save_encoder(out / "encoder_final.ckpt", final)
    return final, results


def run_pipeline(cfg: RunConfig):
    """gen-data + stage1 + stage2 + final scoring, with a printed summary."""
    validate_config(cfg)
    corpus, trials = gen_data(cfg)
    params, _ = stage1(cfg, corpus)
    final, results = stage2(cfg, corpus, params, trials)
    embeddings = _embed_all(final, corpus)
    scores = np.sum(embeddings[[t.utt_a for t in trials]] * embeddings[[t.utt_b for t in trials]], axis=1)
    write_scores(_out(cfg) / "scores.txt", trials, scores)
    table = format_summary_table([r.report for r in results])
    print(table)
    return final, results


def run_toy(cfg: RunConfig):
    """Label-noise fitting experiment: train on partly corrupted labels and
    split the per-epoch loss curves by label reliability.

    Returns a dict with the curves, the final-epoch gap between the mean
    unreliable and reliable losses, and the reliability mask.
    """
    validate_config(cfg)
    t = cfg.toy
    corpus = generate_corpus(
        t.num_speakers,
        t.utts_per_speaker,
        cfg.corpus.frames_per_utt,
        cfg.corpus.feature_dim,
        cfg.corpus.intra_spread,
        cfg.corpus.inter_spread,
        seed=child_seed(cfg.seed, "toy"),
    )
    truth = corpus.truth_labels()
    rng = child_rng(cfg.seed, "toy", 1)

    params = init_encoder(_layer_sizes(cfg), seed=child_seed(cfg.seed, "encoder_init"))
    if t.pretrain_epochs > 0:
        params, _ = train_contrastive(
            corpus,
            params,
            batch_size=cfg.stage1.batch_size,
            epochs=t.pretrain_epochs,
            lr=cfg.stage1.lr,
            segment_len=cfg.stage1.segment_len,
            noise_scale=cfg.stage1.noise_scale,
            gain_range=(cfg.stage1.gain_lo, cfg.stage1.gain_hi),
            rng=child_rng(cfg.seed, "stage1"),
        )

    if t.label_source == "kmeans":
        embeddings = _embed_all(params, corpus)
        result = kmeans(
            embeddings,
            t.num_speakers,
            max_iters=cfg.cluster.max_iters,
            seed=child_seed(cfg.seed, "cluster", 0),
            restarts=cfg.cluster.restarts,
        )
        labels = result.label_set.labels
    else:
        labels, _ = inject_label_noise(truth, t.corrupt_fraction, t.num_speakers, rng)

    rel = reliable_mask(truth, labels)
    classifier = init_classifier(t.num_speakers, cfg.encoder.embedding_dim, child_seed(cfg.seed, "classifier_init"))
    state = GatedTrainerState.fresh(params, classifier)
    train_rng = child_rng(cfg.seed, "stage2", 0)
    reports = []
    for epoch in range(1, t.epochs + 1):
        state, report = train_epoch(
            corpus,
            labels,
            state,
            math.inf,
            crop_len=cfg.stage2.crop_len,
            batch_size=cfg.stage2.batch_size,
            lr=cfg.stage2.lr,
            margin=cfg.stage2.margin,
            scale=cfg.stage2.scale,
            rng=train_rng,
            noise_scale=cfg.stage2.noise_scale,
            gain_range=(cfg.stage2.gain_lo, cfg.stage2.gain_hi),
            epoch=epoch,
        )
        reports.append(report)

    traces = np.stack([r.losses for r in reports])
    reliable_curve, unreliable_curve = toy_loss_split(traces, rel)
    gap = None
    if reliable_curve is not None and unreliable_curve is not None:
        gap = float(unreliable_curve[-1] - reliable_curve[-1])

    out = _out(cfg)
    write_toy_curves(out / "toy_curves.csv", t.epochs, reliable_curve, unreliable_curve)
    write_loss_traces(out / "toy_loss_traces.csv", tuple(reports))
    stats = {
        "num_reliable": int(rel.sum()),
        "num_unreliable": int((~rel).sum()),
        "final_gap": gap,
        "warmup_epochs": t.warmup_epochs,
        "separated_after_warmup": _separated_after_warmup(reliable_curve, unreliable_curve, t.warmup_epochs),
    }
    write_json(out / "toy_stats.json", stats)
    return {
        "reliable_curve": reliable_curve,
        "unreliable_curve": unreliable_curve,
        "reliable_mask": rel,
        "stats": stats,
        "traces": traces,
    }


def _separated_after_warmup(reliable_curve, unreliable_curve, warmup: int) -> bool | None:
    if reliable_curve is None or unreliable_curve is None:
        return None
    return bool(np.all(reliable_curve[warmup:] < unreliable_curve[warmup:]))


def run_ablation(cfg: RunConfig, axis: str):
    """Single-iteration sweep over the gate threshold or the cluster count.

    Each setting reuses the same pretrained encoder and runs one iteration
    of the schedule. Emits one CSV row per setting.
    """
    validate_config(cfg)
    if axis not in ("tau", "k"):
        raise ConfigError(f"ablation axis must be 'tau' or 'k', got {axis!r}")
    corpus, trials = _load_or_gen_data(cfg)
    params, _ = stage1(cfg, corpus)

    rows = []
    results_by_setting = {}
    if axis == "tau":
        settings = list(cfg.ablate.taus)
    else:
        settings = [max(1, int(round(f * cfg.corpus.num_speakers))) for f in cfg.ablate.k_factors]

    for setting in settings:
        if axis == "tau":
            # the tau = inf column is the baseline without any gated phase,
            # mirroring how the no-gate row of a threshold sweep is produced
            if math.isinf(setting):
                record_cfg = replace(cfg, stage2=replace(cfg.stage2, taus=(1.0,), epochs_gated=0))
            else:
                record_cfg = replace(cfg, stage2=replace(cfg.stage2, taus=(float(setting),)))
        else:
            record_cfg = replace(
                cfg,
                stage2=replace(cfg.stage2, taus=(cfg.stage2.taus[0],)),
                cluster=replace(cfg.cluster, k=int(setting)),
            )
        _, results = run_stage2(
            corpus,
            params,
            record_cfg.schedule(),
            crop_len=record_cfg.stage2.crop_len,
            batch_size=record_cfg.stage2.batch_size,
            lr=record_cfg.stage2.lr,
            margin=record_cfg.stage2.margin,
            scale=record_cfg.stage2.scale,
            cluster_restarts=record_cfg.cluster.restarts,
            cluster_max_iters=record_cfg.cluster.max_iters,
            trials=trials,
            seed=cfg.seed,
            noise_scale=record_cfg.stage2.noise_scale,
            gain_range=(record_cfg.stage2.gain_lo, record_cfg.stage2.gain_hi),
        )
        report = results[0].report
        label = "inf" if (axis == "tau" and math.isinf(setting)) else f"{setting:g}"
        rows.append((label, report.eer, report.nmi, report.cluster_accuracy, report.selection_fraction))
        results_by_setting[label] = report

    out = _out(cfg)
    write_csv(out / f"ablate_{axis}.csv", [axis, "eer", "nmi", "cluster_accuracy", "selection_fraction"], rows)
    return results_by_setting


def run_eval(cfg: RunConfig, checkpoint=None):
    """Score the trial list with a stored encoder; writes scores and a metrics JSON."""
    validate_config(cfg)
    corpus, trials = _load_or_gen_data(cfg)
    out = _out(cfg)
    ckpt = Path(checkpoint) if checkpoint else out / "encoder_final.ckpt"
    if not ckpt.exists():
        fallback = out / "stage1_encoder.ckpt"
        if checkpoint is None and fallback.exists():
            ckpt = fallback
        else:
            raise ConfigError(f"no encoder checkpoint at {ckpt}")
    params = load_encoder(ckpt)
    embeddings = _embed_all(params, corpus)
    scores = np.sum(embeddings[[t.utt_a for t in trials]] * embeddings[[t.utt_b for t in trials]], axis=1)
    rate, threshold = eer(scores, [t.is_target for t in trials])
    write_scores(out / "scores.txt", trials, scores)
    summary = {"eer": rate, "threshold": threshold, "checkpoint": str(ckpt)}
    labels_path = out / "labels.txt"
    if labels_path.exists():
        from .cluster import load_labels

        labels = load_labels(labels_path)
        summary["nmi"] = nmi(corpus.truth_labels(), labels)
    write_json(out / "eval.json", summary)
    return summary
