"""Synthetic partial-spoof corpus generator.

Produces everything the inference and scoring pipeline consumes — frame
ground truth (PSA), per-frame embeddings (EMB1), binary and multi-class
localization score tracks, an oracle cluster-count table and a JSON
manifest — without any audio or neural model, with difficulty knobs:

* ``class_sep`` sets the distance between class centroids in embedding
  space (one centroid per class on orthogonal axes, isotropic Gaussian
  noise ``embed_noise`` on top), so clustering difficulty sweeps from
  chance (0) to trivial (large).
* ``loc_auc_target`` sets the quality of the binary localization scores;
  1.0 means perfectly separated scores.

All randomness for file ``i`` derives from ``(seed, i)`` only, so
generation order or parallelism cannot change outputs, and the embedding
noise is drawn before the centroid scale is applied, so sweeping
``class_sep`` at a fixed seed reuses identical noise.
"""

from __future__ import annotations

import dataclasses
import json
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .errors import InvalidConfig, IoError
from .localization import BONAFIDE_CLASS
from .timeline import BONAFIDE, CONP, NONSPEECH, ClassLabel, LabelKind, Segment, Timeline

DEFAULT_ATTACK_POOL = (
    "A07", "A08", "A09", "A10", "A11", "A12", "A13",
    "A14", "A15", "A16", "A17", "A18", "A19",
)


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for one synthetic corpus; identical config+seed means identical bytes."""

    seed: int = 0
    n_files: int = 100
    frame_duration: float = 0.02
    duration_range: tuple[float, float] = (2.0, 6.0)
    attack_pool: tuple[str, ...] = DEFAULT_ATTACK_POOL
    attacks_per_file_range: tuple[int, int] = (1, 3)
    bona_fraction_target: float = 0.553
    segment_len_range: tuple[float, float] = (0.1, 1.0)
    embed_dim: int = 16
    class_sep: float = 4.0
    embed_noise: float = 1.0
    loc_auc_target: float = 0.95
    conp_prob: float = 0.3
    nonspeech_prob: float = 0.15
    # When False, bona fide (and nonspeech) frames take a random spoof
    # centroid per frame instead of their own, emulating an embedding
    # extractor that never saw bona fide data.
    bona_centroid: bool = True

    def __post_init__(self) -> None:
        if self.n_files < 1:
            raise InvalidConfig(f"n_files must be >= 1, got {self.n_files}")
        if self.frame_duration <= 0:
            raise InvalidConfig(f"frame_duration must be positive, got {self.frame_duration}")
        for name in ("duration_range", "segment_len_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise InvalidConfig(f"{name} must satisfy 0 < min <= max, got ({lo}, {hi})")
        lo, hi = self.attacks_per_file_range
        if not 0 <= lo <= hi:
            raise InvalidConfig(f"attacks_per_file_range must be ordered, got ({lo}, {hi})")
        if hi > len(self.attack_pool):
            raise InvalidConfig(
                f"attacks_per_file_range max {hi} exceeds pool size {len(self.attack_pool)}"
            )
        if len(set(self.attack_pool)) != len(self.attack_pool) or not all(self.attack_pool):
            raise InvalidConfig("attack_pool entries must be unique and non-empty")
        if not 0 < self.bona_fraction_target < 1:
            raise InvalidConfig(f"bona_fraction_target must be in (0, 1), got {self.bona_fraction_target}")
        n_classes = len(self.attack_pool) + 2  # bona fide + attacks + ConP
        if self.embed_dim < n_classes:
            raise InvalidConfig(
                f"embed_dim {self.embed_dim} cannot host {n_classes} class centroids"
            )
        if self.class_sep < 0:
            raise InvalidConfig(f"class_sep must be >= 0, got {self.class_sep}")
        if self.embed_noise <= 0:
            raise InvalidConfig(f"embed_noise must be positive, got {self.embed_noise}")
        if not 0.5 < self.loc_auc_target <= 1.0:
            raise InvalidConfig(f"loc_auc_target must be in (0.5, 1], got {self.loc_auc_target}")
        for name in ("conp_prob", "nonspeech_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {value}")

    @property
    def class_names(self) -> tuple[str, ...]:
        return (BONAFIDE_CLASS,) + tuple(self.attack_pool) + ("ConP",)


def config_from_dict(raw: dict) -> SynthConfig:
    """Build a config from JSON data, rejecting unknown keys."""
    known = {f.name for f in dataclasses.fields(SynthConfig)}
    unknown = set(raw) - known
    if unknown:
        raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(raw)
    for key in ("duration_range", "attacks_per_file_range", "segment_len_range", "attack_pool"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return SynthConfig(**kwargs)
    except TypeError as exc:
        raise InvalidConfig(str(exc)) from exc


def expected_frame_eer(auc: float) -> float:
    """Frame EER (percent) implied by an AUC under the Gaussian score model."""
    if auc >= 1.0:
        return 0.0
    d = math.sqrt(2.0) * float(norm.ppf(auc))
    return 100.0 * float(norm.cdf(-d / 2.0))


@dataclass(frozen=True)
class _FileData:
    audio_id: str
    timeline: Timeline
    segments: list[Segment]
    embeddings: np.ndarray
    binary_scores: np.ndarray
    multi_scores: np.ndarray
    oracle_k: int
    attacks: tuple[str, ...]
    has_conp: bool


def _file_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _layout_runs(cfg: SynthConfig, rng: np.random.Generator, n_frames: int) -> list[tuple[ClassLabel | None, int]]:
    """Lay out speech segments and nonspeech gaps as (label, frames) runs.

    None labels are nonspeech gaps.  Every drawn attack and at least one
    bona fide segment are guaranteed to fit; a per-file feedback term
    steers the bona fide frame fraction toward the corpus target.
    """
    fd = cfg.frame_duration
    min_seg = max(1, round(cfg.segment_len_range[0] / fd))
    lo, hi = cfg.attacks_per_file_range
    n_attacks = int(rng.integers(lo, hi + 1))
    n_attacks = min(n_attacks, max(0, n_frames // min_seg - 1))
    picked = rng.choice(len(cfg.attack_pool), size=n_attacks, replace=False)
    pending = deque(ClassLabel.attack(cfg.attack_pool[i]) for i in picked)
    attack_labels = list(pending)

    runs: list[tuple[ClassLabel | None, int]] = []
    pos = 0
    bona_placed = False
    bona_frames = 0
    speech_frames = 0
    while pos < n_frames:
        remaining = n_frames - pos
        need = len(pending) + (0 if bona_placed else 1)
        if need > 0 and remaining <= need * min_seg:
            label = pending.popleft() if pending else BONAFIDE
        else:
            if runs and cfg.nonspeech_prob > 0 and rng.random() < cfg.nonspeech_prob:
                gap = max(1, round(rng.uniform(*cfg.segment_len_range) / fd * 0.5))
                gap = min(gap, remaining - need * min_seg - 1)
                if gap >= 1:
                    runs.append((None, gap))
                    pos += gap
                    continue
            frac = bona_frames / speech_frames if speech_frames else cfg.bona_fraction_target
            p_bona = min(0.95, max(0.05, 2.0 * cfg.bona_fraction_target - frac))
            if rng.random() < p_bona:
                label = BONAFIDE
            elif pending:
                label = pending.popleft()
            elif attack_labels:
                label = attack_labels[int(rng.integers(len(attack_labels)))]
            else:
                label = BONAFIDE
        seg_len = max(1, round(rng.uniform(*cfg.segment_len_range) / fd))
        reserve = (len(pending) + (0 if (bona_placed or label is BONAFIDE) else 1)) * min_seg
        seg_len = max(1, min(seg_len, n_frames - pos - reserve))
        runs.append((label, seg_len))
        pos += seg_len
        if label is BONAFIDE:
            bona_placed = True
            bona_frames += seg_len
        speech_frames += seg_len

    # Merge adjacent equal-label runs so concatenation points are real
    # label changes.
    merged: list[tuple[ClassLabel | None, int]] = []
    for label, length in runs:
        if merged and merged[-1][0] == label:
            merged[-1] = (label, merged[-1][1] + length)
        else:
            merged.append((label, length))
    return merged


def _insert_conp(cfg: SynthConfig, rng: np.random.Generator, runs: list[tuple[ClassLabel | None, int]]) -> list[tuple[ClassLabel | None, int]]:
    """Convert the head of a segment into ConP at seamless class changes."""
    out: list[tuple[ClassLabel | None, int]] = []
    for label, length in runs:
        prev = out[-1][0] if out else None
        seamless = (
            prev is not None
            and label is not None
            and prev.kind is not LabelKind.CONP
            and prev != label
        )
        if seamless and rng.random() < cfg.conp_prob:
            conp_len = int(rng.integers(1, 3))
            if length > conp_len:
                out.append((CONP, conp_len))
                out.append((label, length - conp_len))
                continue
        out.append((label, length))
    return out


def _runs_to_timeline(audio_id: str, fd: float, runs: list[tuple[ClassLabel | None, int]]) -> tuple[Timeline, list[Segment]]:
    labels: list[ClassLabel] = []
    segments: list[Segment] = []
    pos = 0
    for label, length in runs:
        actual = label if label is not None else NONSPEECH
        labels.extend([actual] * length)
        segments.append(Segment(pos * fd, (pos + length) * fd, actual))
        pos += length
    mask = tuple(lab.kind is not LabelKind.NONSPEECH for lab in labels)
    return Timeline(audio_id, fd, tuple(labels), mask), segments


def _build_file(cfg: SynthConfig, index: int) -> _FileData:
    rng = _file_rng(cfg.seed, index)
    audio_id = f"synth{index:04d}"
    fd = cfg.frame_duration
    duration = rng.uniform(*cfg.duration_range)
    n_frames = max(1, round(duration / fd))

    runs = _insert_conp(cfg, rng, _layout_runs(cfg, rng, n_frames))
    timeline, segments = _runs_to_timeline(audio_id, fd, runs)

    class_names = cfg.class_names
    class_index = {name: i for i, name in enumerate(class_names)}
    frame_classes = np.empty(n_frames, dtype=np.int64)
    for i, label in enumerate(timeline.labels):
        if label.kind is LabelKind.ATTACK:
            frame_classes[i] = class_index[label.name]
        elif label.kind is LabelKind.CONP:
            frame_classes[i] = class_index["ConP"]
        else:
            # Bona fide and nonspeech share the bona fide centroid so the
            # oracle cluster count stays the number of scored classes.
            frame_classes[i] = class_index[BONAFIDE_CLASS]

    noise = rng.standard_normal((n_frames, cfg.embed_dim)) * cfg.embed_noise
    if not cfg.bona_centroid:
        spoof_present = sorted(
            {int(frame_classes[i]) for i in range(n_frames) if frame_classes[i] != 0}
        )
        bona_like = np.flatnonzero(frame_classes == 0)
        if spoof_present and bona_like.size:
            picks = rng.integers(len(spoof_present), size=bona_like.size)
            frame_classes[bona_like] = np.asarray(spoof_present)[picks]

    scale = cfg.class_sep / math.sqrt(2.0)
    embeddings = noise
    embeddings[np.arange(n_frames), frame_classes] += scale

    bona_side = np.asarray(
        [lab.kind in (LabelKind.BONAFIDE, LabelKind.NONSPEECH) for lab in timeline.labels]
    )
    if cfg.loc_auc_target >= 1.0:
        binary = np.where(bona_side, 1.0, 0.0)
    else:
        gap = math.sqrt(2.0) * float(norm.ppf(cfg.loc_auc_target))
        z = np.where(bona_side, gap / 2.0, -gap / 2.0) + rng.standard_normal(n_frames)
        binary = 1.0 / (1.0 + np.exp(-z))

    centroids = np.zeros((len(class_names), cfg.embed_dim))
    centroids[np.arange(len(class_names)), np.arange(len(class_names))] = scale
    dists = np.linalg.norm(embeddings[:, None, :] - centroids[None, :, :], axis=2)
    logits = -dists
    logits -= logits.max(axis=1, keepdims=True)
    multi = np.exp(logits)
    multi /= multi.sum(axis=1, keepdims=True)

    attacks = tuple(sorted({lab.name for lab in timeline.labels if lab.kind is LabelKind.ATTACK}))
    has_conp = any(lab.kind is LabelKind.CONP for lab in timeline.labels)
    has_bona = any(lab.kind is LabelKind.BONAFIDE for lab in timeline.labels)
    oracle_k = len(attacks) + int(has_conp) + int(has_bona)

    return _FileData(
        audio_id=audio_id,
        timeline=timeline,
        segments=segments,
        embeddings=embeddings,
        binary_scores=binary,
        multi_scores=multi,
        oracle_k=oracle_k,
        attacks=attacks,
        has_conp=has_conp,
    )


def generate(cfg: SynthConfig, out_dir: str | Path) -> dict:
    """Generate a corpus under `out_dir` and return its manifest.

    Layout: ``ref.psa`` (ground truth for all files), ``oracle_k.tsv``,
    ``emb/<id>.emb``, ``scores_binary/<id>.emb``,
    ``scores_multi/<id>.emb`` + ``scores_multi/classes.json``, and
    ``manifest.json`` (the returned dict).
    """
    from .formats import write_emb1, write_k_table, write_psa

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "emb").mkdir(exist_ok=True)
        (out / "scores_binary").mkdir(exist_ok=True)
        (out / "scores_multi").mkdir(exist_ok=True)

        files = [_build_file(cfg, i) for i in range(cfg.n_files)]

        write_psa(out / "ref.psa", {f.audio_id: f.segments for f in files})
        write_k_table(out / "oracle_k.tsv", {f.audio_id: f.oracle_k for f in files})
        for f in files:
            write_emb1(out / "emb" / f"{f.audio_id}.emb", f.embeddings, cfg.frame_duration)
            write_emb1(out / "scores_binary" / f"{f.audio_id}.emb", f.binary_scores, cfg.frame_duration)
            write_emb1(out / "scores_multi" / f"{f.audio_id}.emb", f.multi_scores, cfg.frame_duration)
        (out / "scores_multi" / "classes.json").write_text(
            json.dumps(list(cfg.class_names)) + "\n", encoding="utf-8"
        )

        total_frames = sum(f.timeline.n_frames for f in files)
        scored = sum(sum(f.timeline.scored_mask) for f in files)
        bona = sum(
            1
            for f in files
            for lab, m in zip(f.timeline.labels, f.timeline.scored_mask)
            if m and lab.kind is LabelKind.BONAFIDE
        )
        manifest = {
            "config": dataclasses.asdict(cfg),
            "files": [
                {
                    "audio_id": f.audio_id,
                    "duration": f.timeline.duration,
                    "n_frames": f.timeline.n_frames,
                    "attacks": list(f.attacks),
                    "has_conp": f.has_conp,
                    "k": f.oracle_k,
                }
                for f in files
            ],
            "corpus": {
                "n_files": cfg.n_files,
                "total_frames": total_frames,
                "scored_frames": scored,
                "bona_frames": bona,
                "bona_fraction": bona / scored if scored else 0.0,
                "expected_frame_eer": expected_frame_eer(cfg.loc_auc_target),
            },
        }
        (out / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoError(f"cannot write corpus under {out}: {exc}") from exc
    return manifest
