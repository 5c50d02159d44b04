"""Report rendering: delimited data plus matplotlib figures next to it."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .retrieval import BenchReport
from .sim import SIDES


def save_benchmark_report(report: BenchReport, outdir: str | Path) -> list[Path]:
    """cases.csv with one row per case plus an accuracy bar figure."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = outdir / "cases.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["case_id", "kind", "passed", "expected", "got"])
        for r in report.results:
            writer.writerow([r.case_id, r.kind, int(r.passed), r.expected, r.got])
    written.append(csv_path)

    kinds = sorted({r.kind for r in report.results})
    labels = kinds + ["overall"]
    values = []
    for kind in kinds:
        subset = [r for r in report.results if r.kind == kind]
        values.append(sum(r.passed for r in subset) / len(subset))
    values.append(report.passed / len(report.results))

    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(labels, values, color=["#4878a8"] * len(kinds) + ["#308a58"])
    for bar, value in zip(bars, values):
        ax.annotate(f"{value:.0%}", (bar.get_x() + bar.get_width() / 2, value), ha="center", va="bottom")
    ax.set_ylim(0, 1.1)
    ax.set_ylabel("retrieval accuracy")
    ax.set_title(f"{report.passed}/{len(report.results)} cases passed")
    fig.tight_layout()
    fig_path = outdir / "accuracy.png"
    fig.savefig(fig_path, dpi=120)
    plt.close(fig)
    written.append(fig_path)
    return written


def save_demo_report(header: dict, frames, outdir: str | Path) -> list[Path]:
    """frames.csv plus arm-speed and hand-joint trajectory figures."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    csv_path = outdir / "frames.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["timestamp"]
            + [f"proprio_{i:02d}" for i in range(44)]
            + [f"action_{i:02d}" for i in range(44)]
        )
        for f in frames:
            writer.writerow(
                [f"{f.timestamp:.6f}"]
                + [f"{v:.9g}" for v in f.proprioception]
                + [f"{v:.9g}" for v in f.action]
            )
    written.append(csv_path)

    if len(frames) >= 2:
        t = np.array([f.timestamp for f in frames])
        proprio = np.stack([f.proprioception for f in frames])
        dt = np.diff(t)

        fig, axes = plt.subplots(2, 1, figsize=(6.5, 5), sharex=True)
        for i, side in enumerate(SIDES):
            pos = proprio[:, i * 6 : i * 6 + 3]
            speed = np.linalg.norm(np.diff(pos, axis=0), axis=1) / dt
            axes[0].plot(t[1:], speed, label=f"{side} arm")
        axes[0].axhline(0.2, color="crimson", linestyle="--", linewidth=1, label="speed cap")
        axes[0].set_ylabel("arm speed (m/s)")
        axes[0].legend(loc="upper right", fontsize=8)

        right_hand = proprio[:, 12 + 16 : 12 + 32]
        for j in range(right_hand.shape[1]):
            axes[1].plot(t, right_hand[:, j], linewidth=0.8)
        axes[1].set_ylabel("right hand joints (rad)")
        axes[1].set_xlabel("time (s)")
        fig.suptitle(f"demonstration: {len(frames)} frames at {header.get('record_hz', '?')} FPS")
        fig.tight_layout()
        fig_path = outdir / "trajectories.png"
        fig.savefig(fig_path, dpi=120)
        plt.close(fig)
        written.append(fig_path)
    return written
