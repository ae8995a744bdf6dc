"""Report serialization (JSON, TSV) and figure rendering.

Percentages are rounded to two decimals (half-even) at this layer only;
the metric structures keep full precision.  Serialization is fully
deterministic: sorted keys, fixed float formatting, stable row order.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import DiarizationReport, FileScore


def _round2(value: float | None) -> float | None:
    return None if value is None else round(value, 2)


def _file_dict(fs: FileScore) -> dict:
    return {
        "audio_id": fs.audio_id,
        "ji_bona": _round2(fs.ji_bona),
        "jer_spoof": _round2(fs.jer_spoof),
        "per_attack": {k: _round2(v) for k, v in sorted(fs.per_attack.items())},
        "attack_count": fs.attack_count,
    }


def report_to_dict(report: DiarizationReport, per_file: bool = False) -> dict:
    return {
        "global": {
            "ji_bona": _round2(report.ji_bona_global),
            "jer_spoof": _round2(report.jer_spoof_global),
            "per_attack": {k: _round2(v) for k, v in sorted(report.per_attack_global.items())},
            "groups": {k: _round2(v) for k, v in sorted(report.group_scores.items())},
        },
        "files": [_file_dict(fs) for fs in report.per_file] if per_file else [],
    }


def render_json(report: DiarizationReport, per_file: bool = False) -> str:
    return json.dumps(report_to_dict(report, per_file), sort_keys=True, indent=2) + "\n"


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{round(value, 2):.2f}"


def render_tsv(report: DiarizationReport, per_file: bool = False) -> str:
    """Delimited report: one row per (kind, id, metric, value)."""
    rows = [("kind", "id", "metric", "value")]
    rows.append(("global", "-", "ji_bona", _fmt(report.ji_bona_global)))
    rows.append(("global", "-", "jer_spoof", _fmt(report.jer_spoof_global)))
    for attack_id, value in sorted(report.per_attack_global.items()):
        rows.append(("attack", attack_id, "jer", _fmt(value)))
    for group, value in sorted(report.group_scores.items()):
        rows.append(("group", group, "jer", _fmt(value)))
    if per_file:
        for fs in report.per_file:
            rows.append(("file", fs.audio_id, "ji_bona", _fmt(fs.ji_bona)))
            rows.append(("file", fs.audio_id, "jer_spoof", _fmt(fs.jer_spoof)))
            for attack_id, value in sorted(fs.per_attack.items()):
                rows.append(("file", fs.audio_id, f"jer:{attack_id}", _fmt(value)))
    return "\n".join("\t".join(row) for row in rows) + "\n"


def render_figures(report: DiarizationReport, out_dir: str | Path) -> list[Path]:
    """Render summary figures next to the delimited output.

    Writes up to three PNGs into `out_dir` (created if needed):
    ``summary.png`` with the global metrics and group breakdown,
    ``per_attack.png`` with one bar per spoofing method, and
    ``per_file.png`` with the distribution of per-file scores.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    names, values = [], []
    if report.ji_bona_global is not None:
        names.append("JI bona")
        values.append(report.ji_bona_global)
    if report.jer_spoof_global is not None:
        names.append("JER spoof")
        values.append(report.jer_spoof_global)
    for group, value in sorted(report.group_scores.items()):
        names.append(group)
        values.append(value)
    if names:
        fig, ax = plt.subplots(figsize=(max(4.0, 1.2 * len(names)), 3.2))
        bars = ax.bar(names, values, color="#4878a8")
        ax.bar_label(bars, fmt="%.2f", fontsize=8)
        ax.set_ylabel("error (%)")
        ax.set_ylim(0, max(100.0, max(values) * 1.15))
        ax.set_title("Diarization error summary")
        fig.tight_layout()
        path = out / "summary.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    if report.per_attack_global:
        items = sorted(report.per_attack_global.items())
        fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(items)), 3.2))
        ax.bar([k for k, _ in items], [v for _, v in items], color="#a85048")
        ax.set_ylabel("JER (%)")
        ax.set_ylim(0, 105)
        ax.set_title("Per-attack JER")
        ax.tick_params(axis="x", rotation=45, labelsize=8)
        fig.tight_layout()
        path = out / "per_attack.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    ji_values = [fs.ji_bona for fs in report.per_file if fs.ji_bona is not None]
    jer_values = [fs.jer_spoof for fs in report.per_file if fs.jer_spoof is not None]
    if ji_values or jer_values:
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2), sharey=True)
        for ax, data, title in zip(axes, (ji_values, jer_values), ("JI bona", "JER spoof")):
            if data:
                ax.hist(data, bins=min(30, max(5, len(data) // 5)), color="#64a064")
            ax.set_xlabel(f"{title} (%)")
            ax.set_title(f"Per-file {title}")
        axes[0].set_ylabel("files")
        fig.tight_layout()
        path = out / "per_file.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    return written
