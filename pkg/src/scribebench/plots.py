"""Figure rendering for report and stats outputs.

Every figure lands next to the delimited files so a report directory is
self-contained: TSV/JSON for machines, PNGs for eyeballs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .dataset import CorpusStats
from .metrics import EvalReport

__all__ = ["save_report_figures", "save_stats_figures"]

DPI = 150


def save_report_figures(report: EvalReport, out_dir: Path | str, stem: str = "report") -> list[Path]:
    """Bar chart of aggregates plus a per-sample CER histogram."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, ax = plt.subplots(figsize=(5, 3.2))
    labels = ["macro CER", "micro CER", "macro WER", "micro WER"]
    values = [report.macro_cer, report.micro_cer, report.macro_wer, report.micro_wer]
    bars = ax.bar(labels, values, color=["#336699", "#6699cc", "#993333", "#cc6666"])
    ax.bar_label(bars, fmt="%.2f")
    ax.set_ylabel("error rate (%)")
    ax.set_title(f"{report.engine_name} on {report.dataset_name}")
    fig.tight_layout()
    path = out / f"{stem}_rates.png"
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.hist([s.cer for s in report.per_sample], bins=20, color="#336699")
    ax.axvline(report.macro_cer, color="#993333", linestyle="--", label="macro mean")
    ax.set_xlabel("per-sample CER (%)")
    ax.set_ylabel("samples")
    ax.legend()
    fig.tight_layout()
    path = out / f"{stem}_cer_hist.png"
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    written.append(path)
    return written


def save_stats_figures(stats: CorpusStats, ages: list[int], out_dir: Path | str) -> list[Path]:
    """Status/gender bars and a volunteer age histogram."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    axes[0].bar(
        list(stats.status_counts), list(stats.status_counts.values()), color="#336699"
    )
    axes[0].set_title("samples by status")
    if stats.gender_counts:
        axes[1].bar(
            list(stats.gender_counts), list(stats.gender_counts.values()), color="#993333"
        )
    axes[1].set_title("volunteers by gender")
    fig.tight_layout()
    path = out / "stats_counts.png"
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    written.append(path)

    if ages:
        fig, ax = plt.subplots(figsize=(5, 3.2))
        ax.hist(ages, bins=range(min(ages), max(ages) + 2), color="#336699")
        if stats.mean_age is not None:
            ax.axvline(stats.mean_age, color="#993333", linestyle="--", label="mean age")
            ax.legend()
        ax.set_xlabel("age (years)")
        ax.set_ylabel("volunteers")
        fig.tight_layout()
        path = out / "stats_ages.png"
        fig.savefig(path, dpi=DPI)
        plt.close(fig)
        written.append(path)
    return written
