"""Evaluation report rendering: markdown tables, CSV curve dumps, and
static plots.

All numbers in the markdown tables round half-up to two decimals.
Rendering is deterministic: same inputs give byte-identical markdown,
CSVs, and (within one matplotlib build) PNGs, so reports can be diffed
across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg", force=True)
import matplotlib.pyplot as plt  # noqa: E402 - backend must be pinned first

import numpy as np  # noqa: E402

from .metrics import (AveragedMetrics, ClassMetrics, CurvePoint, auc,
                      averaged_metrics, confusion_matrix, one_vs_rest_curves,
                      overall_accuracy, per_class_metrics, round_half_up)
from .training import TrainHistory, TrialsSummary  # noqa: E402


@dataclass
class ReportBundle:
    class_names: tuple[str, ...]
    cm: np.ndarray
    per_class: list[ClassMetrics]
    averages: AveragedMetrics
    curves: dict[str, dict[str, list[CurvePoint]]]
    trial_summary: TrialsSummary | None = None
    history: TrainHistory | None = None


def build_report(y_true: Sequence[int], y_pred: Sequence[int],
                 probs: np.ndarray | None, class_names: Sequence[str],
                 trial_summary: TrialsSummary | None = None,
                 history: TrainHistory | None = None) -> ReportBundle:
    """Assemble every table and curve a report needs from raw predictions."""
    names = tuple(class_names)
    cm = confusion_matrix(y_true, y_pred, len(names))
    per_class = per_class_metrics(cm)
    averages = averaged_metrics(per_class)
    curves: dict[str, dict[str, list[CurvePoint]]] = {}
    if probs is not None:
        by_index = one_vs_rest_curves(y_true, probs)
        curves = {names[c]: v for c, v in by_index.items()}
    return ReportBundle(names, cm, per_class, averages, curves,
                        trial_summary, history)


def _fmt(value: float) -> str:
    return f"{round_half_up(value):.2f}"


def _fmt_pct(value: float) -> str:
    return f"{round_half_up(value * 100):.2f}"


def _markdown(bundle: ReportBundle) -> str:
    names = bundle.class_names
    cm = bundle.cm
    lines: list[str] = []
    lines.append("# Evaluation report")
    lines.append("")
    total = int(cm.sum())
    lines.append(f"Samples: {total}. Overall accuracy: "
                 f"{_fmt_pct(overall_accuracy(cm))} %.")
    lines.append("")
    lines.append("## Confusion matrix")
    lines.append("")
    lines.append("| true \\ predicted | " + " | ".join(names) + " |")
    lines.append("|---" * (len(names) + 1) + "|")
    for i, name in enumerate(names):
        cells = " | ".join(str(int(v)) for v in cm[i])
        lines.append(f"| {name} | {cells} |")
    lines.append("")
    lines.append("## Per-class metrics")
    lines.append("")
    lines.append("| class | accuracy | precision | recall | specificity | f1 | support |")
    lines.append("|---|---|---|---|---|---|---|")
    flagged = False
    for name, m in zip(names, bundle.per_class):
        def cell(metric: str, value: float, m=m) -> str:
            nonlocal flagged
            if metric in m.degenerate:
                flagged = True
                return _fmt(value) + "*"
            return _fmt(value)
        lines.append(f"| {name} | {cell('accuracy', m.accuracy)} | "
                     f"{cell('precision', m.precision)} | {cell('recall', m.recall)} | "
                     f"{cell('specificity', m.specificity)} | {cell('f1', m.f1)} | "
                     f"{m.support} |")
    if flagged:
        lines.append("")
        lines.append("\\* metric had a zero denominator on this sample and "
                     "defaults to 0.")
    av = bundle.averages
    lines.append("")
    lines.append("## Averages")
    lines.append("")
    lines.append("| average | precision | recall | f1 |")
    lines.append("|---|---|---|---|")
    lines.append(f"| macro | {_fmt(av.macro_precision)} | {_fmt(av.macro_recall)} | "
                 f"{_fmt(av.macro_f1)} |")
    lines.append(f"| weighted | {_fmt(av.weighted_precision)} | "
                 f"{_fmt(av.weighted_recall)} | {_fmt(av.weighted_f1)} |")
    if bundle.curves:
        lines.append("")
        lines.append("## Ranking quality")
        lines.append("")
        lines.append("| class | ROC AUC | PR AUC |")
        lines.append("|---|---|---|")
        for name in names:
            if name not in bundle.curves:
                continue
            pair = bundle.curves[name]
            lines.append(f"| {name} | {_fmt(auc(pair['roc']))} | "
                         f"{_fmt(auc(pair['pr']))} |")
    if bundle.trial_summary is not None:
        ts = bundle.trial_summary
        lines.append("")
        lines.append("## Repeated trials")
        lines.append("")
        accs = ", ".join(_fmt_pct(a) for a in ts.accuracies)
        lines.append(f"Test accuracy per trial: {accs} %.")
        lines.append(f"Mean accuracy: {_fmt_pct(ts.mean_accuracy)} %. "
                     f"Standard deviation: {_fmt_pct(ts.std_accuracy_sample)} (sample, n-1), "
                     f"{_fmt_pct(ts.std_accuracy_population)} (population, n).")
        lines.append(f"Mean test loss: {_fmt(ts.mean_loss)}.")
    lines.append("")
    return "\n".join(lines)


def _write_curve_csv(points: list[CurvePoint], path: Path,
                     x_name: str, y_name: str) -> None:
    lines = [f"threshold,{x_name},{y_name}"]
    for p in points:
        lines.append(f"{p.threshold!r},{p.x!r},{p.y!r}")
    path.write_text("\n".join(lines) + "\n")


def _plot_curves(bundle: ReportBundle, kind: str, xlabel: str, ylabel: str,
                 path: Path) -> None:
    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    for name in bundle.class_names:
        if name not in bundle.curves:
            continue
        pts = bundle.curves[name][kind]
        ax.plot([p.x for p in pts], [p.y for p in pts],
                label=f"{name} ({auc(pts):.2f})", linewidth=1.2)
    if kind == "roc":
        ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=0.8)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=7, loc="lower right" if kind == "roc" else "lower left")
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _plot_confusion(bundle: ReportBundle, path: Path) -> None:
    cm = bundle.cm
    fig, ax = plt.subplots(figsize=(5, 4.5), dpi=100)
    im = ax.imshow(cm, cmap="Blues")
    ax.set_xticks(range(len(bundle.class_names)), bundle.class_names,
                  rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(len(bundle.class_names)), bundle.class_names, fontsize=7)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    threshold = cm.max() / 2 if cm.max() > 0 else 0
    for i in range(cm.shape[0]):
        for j in range(cm.shape[1]):
            ax.text(j, i, str(int(cm[i, j])), ha="center", va="center",
                    fontsize=7, color="white" if cm[i, j] > threshold else "black")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def _plot_history(history: TrainHistory, path: Path) -> None:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5), dpi=100)
    ax1.plot(history.epochs, history.train_loss, label="train")
    ax1.plot(history.epochs, history.val_loss, label="validation")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend(fontsize=8)
    ax2.plot(history.epochs, history.train_accuracy, label="train")
    ax2.plot(history.epochs, history.val_accuracy, label="validation")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("accuracy")
    ax2.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)


def render_report(bundle: ReportBundle, out_dir: str | Path) -> list[Path]:
    """Write report.md, CSV artefacts, and plots; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    md_path = out_dir / "report.md"
    md_path.write_text(_markdown(bundle))
    written.append(md_path)

    cm_path = out_dir / "confusion_matrix.csv"
    lines = ["true\\predicted," + ",".join(bundle.class_names)]
    for name, row in zip(bundle.class_names, bundle.cm):
        lines.append(name + "," + ",".join(str(int(v)) for v in row))
    cm_path.write_text("\n".join(lines) + "\n")
    written.append(cm_path)

    if bundle.curves:
        curve_dir = out_dir / "curves"
        curve_dir.mkdir(exist_ok=True)
        for name in bundle.class_names:
            if name not in bundle.curves:
                continue
            pair = bundle.curves[name]
            roc_path = curve_dir / f"{name}_roc.csv"
            _write_curve_csv(pair["roc"], roc_path, "fpr", "tpr")
            written.append(roc_path)
            pr_path = curve_dir / f"{name}_pr.csv"
            _write_curve_csv(pair["pr"], pr_path, "recall", "precision")
            written.append(pr_path)

    plot_dir = out_dir / "plots"
    plot_dir.mkdir(exist_ok=True)
    cm_png = plot_dir / "confusion_matrix.png"
    _plot_confusion(bundle, cm_png)
    written.append(cm_png)
    if bundle.curves:
        roc_png = plot_dir / "roc.png"
        _plot_curves(bundle, "roc", "false positive rate", "true positive rate", roc_png)
        written.append(roc_png)
        pr_png = plot_dir / "pr.png"
        _plot_curves(bundle, "pr", "recall", "precision", pr_png)
        written.append(pr_png)
    if bundle.history is not None:
        hist_png = plot_dir / "training_curves.png"
        _plot_history(bundle.history, hist_png)
        written.append(hist_png)
    return written
