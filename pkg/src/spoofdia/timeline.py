"""Frame-aligned timelines for partially spoofed audio.

An audio file is annotated as a sequence of class-homogeneous segments
(bona fide speech, one of several spoofing methods, concatenation
artifacts, nonspeech).  All scoring and inference in this package runs on
a uniform frame grid, so the central representation is a :class:`Timeline`:
one class label per frame plus a boolean mask saying which frames take
part in scoring.  Nonspeech frames are never scored (oracle-VAD
convention); external exclusion regions can mask further frames.

Frame ``i`` covers ``[i * frame_duration, (i + 1) * frame_duration)``.
A frame takes the label of the segment containing its midpoint; a
midpoint falling exactly on a segment boundary belongs to the earlier
segment.  Frames covered by no segment are nonspeech.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

from .errors import InvalidAnnotation

DEFAULT_FRAME_DURATION = 0.02

#: Sentinel emitted by :func:`derive_labels` for frames excluded from training.
EXCLUDED = "excluded"

# Tolerance used when snapping segment boundaries onto the frame grid,
# expressed as a fraction of one frame.  Absorbs decimal-parsing noise
# without ever moving a boundary by a meaningful amount.
_GRID_EPS = 1e-6

_ATTACK_RE = re.compile(r"^A\d+$")
_CLUSTER_RE = re.compile(r"^cluster\d+$")


class LabelKind(enum.Enum):
    """Kind of class a label denotes."""

    BONAFIDE = "bonafide"
    ATTACK = "attack"
    CONP = "ConP"
    NONSPEECH = "nonspeech"
    CLUSTER = "cluster"


@dataclass(frozen=True)
class ClassLabel:
    """One diarization class.

    Reference annotations use the first four kinds: genuine speech
    (``BONAFIDE``), a specific spoofing method (``ATTACK`` with a short
    id such as ``"A07"``), a concatenation artifact (``CONP``), and
    ``NONSPEECH``.  Hypothesis timelines additionally use opaque
    ``CLUSTER`` labels (``cluster0``, ``cluster1``, ...) produced by the
    clustering stage; metrics treat hypothesis labels as opaque ids.
    """

    kind: LabelKind
    name: str = ""

    def __post_init__(self) -> None:
        if self.kind is LabelKind.ATTACK and not self.name:
            raise InvalidAnnotation("attack labels need a non-empty id")
        if self.kind is LabelKind.CLUSTER and not self.name:
            raise InvalidAnnotation("cluster labels need a non-empty id")

    @staticmethod
    def attack(attack_id: str) -> "ClassLabel":
        return ClassLabel(LabelKind.ATTACK, attack_id)

    @staticmethod
    def cluster(index: int) -> "ClassLabel":
        return ClassLabel(LabelKind.CLUSTER, f"cluster{index}")

    @staticmethod
    def parse(text: str) -> "ClassLabel":
        """Parse an annotation-file label token.

        Accepted forms: ``bonafide``, ``ConP``, ``nonspeech``,
        ``A<digits>``, ``spoof`` (a generic single spoof class) and
        ``cluster<digits>``.  The word forms are case-insensitive.
        """
        token = text.strip()
        lowered = token.lower()
        if lowered == "bonafide":
            return BONAFIDE
        if lowered == "conp":
            return CONP
        if lowered == "nonspeech":
            return NONSPEECH
        if lowered == "spoof":
            return ClassLabel(LabelKind.ATTACK, "spoof")
        if _ATTACK_RE.match(token):
            return ClassLabel(LabelKind.ATTACK, token)
        if _CLUSTER_RE.match(lowered):
            return ClassLabel(LabelKind.CLUSTER, lowered)
        raise InvalidAnnotation(f"unknown label {text!r}")

    @property
    def is_spoof(self) -> bool:
        """Attack and ConP frames both count as spoofed material."""
        return self.kind in (LabelKind.ATTACK, LabelKind.CONP)

    def __str__(self) -> str:
        if self.kind in (LabelKind.ATTACK, LabelKind.CLUSTER):
            return self.name
        return self.kind.value


BONAFIDE = ClassLabel(LabelKind.BONAFIDE)
CONP = ClassLabel(LabelKind.CONP)
NONSPEECH = ClassLabel(LabelKind.NONSPEECH)


@dataclass(frozen=True)
class Segment:
    """A class-homogeneous stretch of audio, in seconds."""

    onset: float
    offset: float
    label: ClassLabel

    def __post_init__(self) -> None:
        if self.onset < 0:
            raise InvalidAnnotation(f"negative onset {self.onset}")
        if not self.offset > self.onset:
            raise InvalidAnnotation(
                f"segment [{self.onset}, {self.offset}) has non-positive duration"
            )

    @property
    def duration(self) -> float:
        return self.offset - self.onset


@dataclass(frozen=True)
class Timeline:
    """Frame-level class annotation of one audio file.

    ``scored_mask[i]`` is False exactly when frame ``i`` is nonspeech or
    covered by an external exclusion region; only scored frames enter
    metric computation.  Instances are immutable; derive modified copies
    with :func:`apply_vad` / :func:`apply_exclusion`.
    """

    audio_id: str
    frame_duration: float
    labels: tuple[ClassLabel, ...]
    scored_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        if self.frame_duration <= 0:
            raise InvalidAnnotation(f"frame_duration must be positive, got {self.frame_duration}")
        if len(self.labels) != len(self.scored_mask):
            raise InvalidAnnotation(
                f"labels ({len(self.labels)}) and scored_mask ({len(self.scored_mask)}) differ in length"
            )
        # Nonspeech frames are unconditionally unscored.
        coerced = tuple(
            bool(m) and lab.kind is not LabelKind.NONSPEECH
            for lab, m in zip(self.labels, self.scored_mask)
        )
        object.__setattr__(self, "scored_mask", coerced)

    @property
    def n_frames(self) -> int:
        return len(self.labels)

    @property
    def duration(self) -> float:
        return self.n_frames * self.frame_duration

    def with_mask(self, mask: tuple[bool, ...]) -> "Timeline":
        return Timeline(self.audio_id, self.frame_duration, self.labels, mask)


class LabelScheme(enum.Enum):
    """Training-label alphabets derivable from a reference timeline."""

    BIN = "bin"
    MUL = "mul"
    SPF = "spf"

    @staticmethod
    def parse(text: str) -> "LabelScheme":
        try:
            return LabelScheme(text.strip().lower())
        except ValueError:
            raise InvalidAnnotation(f"unknown labeling scheme {text!r}") from None


def validate_segments(segments: list[Segment]) -> list[Segment]:
    """Return segments sorted by onset, rejecting overlaps.

    A single audio stream carries at most one class at a time, so any
    overlap between two segments is invalid input.
    """
    ordered = sorted(segments, key=lambda s: (s.onset, s.offset))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.onset < prev.offset - 1e-9:
            raise InvalidAnnotation(
                f"segments [{prev.onset}, {prev.offset}) and "
                f"[{cur.onset}, {cur.offset}) overlap"
            )
    return ordered


def segments_to_timeline(
    segments: list[Segment],
    frame_duration: float,
    total_duration: float,
    audio_id: str = "",
) -> Timeline:
    """Materialize segment annotations onto a uniform frame grid.

    Args:
        segments: non-overlapping segments (any order; sorted internally).
        frame_duration: grid resolution in seconds.
        total_duration: audio length; must cover every segment offset.
        audio_id: carried through to the resulting timeline.

    Returns:
        Timeline with ``ceil(total_duration / frame_duration)`` frames.
        Frames covered by no segment are nonspeech and unscored.
    """
    if frame_duration <= 0:
        raise InvalidAnnotation(f"frame_duration must be positive, got {frame_duration}")
    if total_duration < 0:
        raise InvalidAnnotation(f"negative total_duration {total_duration}")
    ordered = validate_segments(segments)
    if ordered and ordered[-1].offset > total_duration + 1e-9:
        raise InvalidAnnotation(
            f"total_duration {total_duration} does not cover segment offset {ordered[-1].offset}"
        )

    n_frames = int(math.ceil(total_duration / frame_duration - 1e-9))
    eps = frame_duration * _GRID_EPS
    labels: list[ClassLabel] = []
    seg_idx = 0
    for i in range(n_frames):
        midpoint = (i + 0.5) * frame_duration
        # Segments are sorted; midpoints are increasing, so a single
        # forward pointer suffices.
        while seg_idx < len(ordered) and ordered[seg_idx].offset + eps < midpoint:
            seg_idx += 1
        if seg_idx < len(ordered) and ordered[seg_idx].onset + eps < midpoint <= ordered[seg_idx].offset + eps:
            labels.append(ordered[seg_idx].label)
        else:
            labels.append(NONSPEECH)

    mask = tuple(lab.kind is not LabelKind.NONSPEECH for lab in labels)
    return Timeline(audio_id, frame_duration, tuple(labels), mask)


def timeline_to_segments(timeline: Timeline, include_nonspeech: bool = False) -> list[Segment]:
    """Merge consecutive equal-label frames back into segments.

    Nonspeech runs are dropped by default (they are implied by gaps);
    pass ``include_nonspeech=True`` when writing files whose total
    duration must be preserved.
    """
    segments: list[Segment] = []
    fd = timeline.frame_duration
    start = 0
    for i in range(1, timeline.n_frames + 1):
        if i == timeline.n_frames or timeline.labels[i] != timeline.labels[start]:
            label = timeline.labels[start]
            if include_nonspeech or label.kind is not LabelKind.NONSPEECH:
                segments.append(Segment(start * fd, i * fd, label))
            start = i
    return segments


def apply_vad(timeline: Timeline, keep_conp: bool = True) -> Timeline:
    """Mask nonspeech frames out of scoring.

    Concatenation-artifact (ConP) frames stay scored by default; with
    ``keep_conp=False`` they are masked out as well.  Frames already
    excluded stay excluded.
    """
    mask = tuple(
        m
        and lab.kind is not LabelKind.NONSPEECH
        and (keep_conp or lab.kind is not LabelKind.CONP)
        for lab, m in zip(timeline.labels, timeline.scored_mask)
    )
    return timeline.with_mask(mask)


def apply_exclusion(timeline: Timeline, regions: list[tuple[float, float]]) -> Timeline:
    """Mask out frames whose midpoint falls inside any exclusion region.

    Region boundaries follow the same midpoint rule as segments: a
    midpoint exactly on a region edge belongs to the earlier side.
    """
    fd = timeline.frame_duration
    eps = fd * _GRID_EPS
    mask = list(timeline.scored_mask)
    for onset, offset in regions:
        if offset <= onset:
            raise InvalidAnnotation(f"exclusion region [{onset}, {offset}) has non-positive duration")
        first = max(0, int(math.floor(onset / fd - 0.5)))
        for i in range(first, timeline.n_frames):
            midpoint = (i + 0.5) * fd
            if midpoint > offset + eps:
                break
            if onset + eps < midpoint:
                mask[i] = False
    return timeline.with_mask(tuple(mask))


def derive_labels(timeline: Timeline, scheme: LabelScheme | str) -> tuple[str, ...]:
    """Derive per-frame training labels under one of three schemes.

    ``BIN`` collapses every spoof class (attacks and ConP) into a single
    ``spoof`` label opposite ``bonafide``.  ``MUL`` keeps the full class
    alphabet.  ``SPF`` keeps only spoof classes and emits the
    :data:`EXCLUDED` sentinel for bona fide frames.  Unscored frames
    (nonspeech or externally excluded) are always :data:`EXCLUDED`.
    """
    if isinstance(scheme, str):
        scheme = LabelScheme.parse(scheme)
    out: list[str] = []
    for lab, scored in zip(timeline.labels, timeline.scored_mask):
        if not scored:
            out.append(EXCLUDED)
            continue
        if lab.kind is LabelKind.CLUSTER:
            raise InvalidAnnotation(
                "training labels are derived from reference annotations, "
                f"not hypothesis clusters (got {lab})"
            )
        if scheme is LabelScheme.BIN:
            out.append("bonafide" if lab.kind is LabelKind.BONAFIDE else "spoof")
        elif scheme is LabelScheme.MUL:
            out.append(str(lab))
        else:  # SPF
            out.append(EXCLUDED if lab.kind is LabelKind.BONAFIDE else str(lab))
    return tuple(out)
