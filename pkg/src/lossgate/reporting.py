"""Deterministic JSON/CSV writers for every exported artifact.

Floats are written with ``repr`` (full round-trip precision) and JSON keys
are sorted, so a rerun with the same seed produces byte-identical files.
Nothing here embeds timestamps.
"""

from __future__ import annotations

import json
from dataclasses import asdict

import numpy as np

from .gated import GateReport, IterationResult
from .metrics import RunReport


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_loss_history(path, history: list[dict]) -> None:
    write_csv(path, ["epoch", "mean_loss", "lr"], [(h["epoch"], h["mean_loss"], h["lr"]) for h in history])


def write_wcss_scan(path, pairs) -> None:
    write_csv(path, ["k", "wcss"], pairs)


def write_scores(path, trials, scores) -> None:
    with open(path, "w") as fh:
        for t, s in zip(trials, scores):
            fh.write(f"{t.utt_a} {t.utt_b} {_fmt(float(s))}\n")


def gate_report_dict(report: GateReport) -> dict:
    return {
        "epoch": report.epoch,
        "phase": report.phase,
        "tau": report.tau,
        "selection_fraction": report.selection_fraction,
        "utt_ids": list(range(report.losses.size)),
        "losses": report.losses,
        "selected": report.selected,
    }


def write_gate_reports(path, reports: tuple[GateReport, ...]) -> None:
    write_json(path, [gate_report_dict(r) for r in reports])


def write_run_reports(path, reports: list[RunReport]) -> None:
    write_json(path, [asdict(r) for r in reports])


def write_loss_traces(path, reports: tuple[GateReport, ...]) -> None:
    rows = []
    for r in reports:
        for uid in range(r.losses.size):
            rows.append((uid, r.epoch, float(r.losses[uid]), int(r.selected[uid])))
    write_csv(path, ["utt_id", "epoch", "loss", "selected"], rows)


def write_iteration_artifacts(out_dir, result: IterationResult) -> None:
    from .cluster import save_labels  # local import keeps module load order flat

    out_dir.mkdir(parents=True, exist_ok=True)
    save_labels(out_dir / "labels.txt", result.kmeans_result.label_set)
    write_gate_reports(out_dir / "gate_reports.json", result.gate_reports)
    write_loss_traces(out_dir / "loss_traces.csv", result.gate_reports)
    write_json(out_dir / "run_report.json", asdict(result.report))


def write_toy_curves(path, epochs: int, reliable, unreliable) -> None:
    rows = []
    for e in range(epochs):
        rel = repr(float(reliable[e])) if reliable is not None else ""
        unrel = repr(float(unreliable[e])) if unreliable is not None else ""
        rows.append((e + 1, rel, unrel))
    with open(path, "w") as fh:
        fh.write("epoch,mean_reliable,mean_unreliable\n")
        for row in rows:
            fh.write(f"{row[0]},{row[1]},{row[2]}\n")


def format_summary_table(reports: list[RunReport]) -> str:
    lines = [
        f"{'iter':>4}  {'EER%':>7}  {'NMI':>6}  {'acc':>6}  {'selNMI':>6}  {'sel%':>6}",
    ]
    for r in reports:
        lines.append(
            f"{r.iteration:>4}  {100 * r.eer:>7.2f}  {r.nmi:>6.3f}  {r.cluster_accuracy:>6.3f}"
            f"  {r.selected_nmi:>6.3f}  {100 * r.selection_fraction:>6.1f}"
        )
    return "\n".join(lines)
