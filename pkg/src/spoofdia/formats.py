"""On-disk formats: PSA annotation files and EMB1 binary matrices.

PSA ("partial spoof annotation") is a UTF-8 TSV with one segment per
line::

    audio_id<TAB>onset_sec<TAB>offset_sec<TAB>label

with labels drawn from bonafide / ConP / nonspeech / A<digits> / spoof /
cluster<digits>.  Lines starting with ``#`` are comments.  Exclusion-mask
files use the same shape minus the label column.

EMB1 is a little-endian binary container for per-frame float32 matrices:
magic ``EMB1``, u32 version (=1), u32 frame count M, u32 dimension D,
u32 frame duration in microseconds, then M*D float32 values row-major.
Embeddings use D>1; binary score tracks use D=1; multi-class score
tracks use D=C with a sidecar JSON list of class names in column order
(``<audio_id>.classes.json`` next to the file, or ``classes.json`` for
the whole directory).
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .clustering import EmbeddingMatrix
from .errors import FormatError, InvalidAnnotation
from .localization import ScoreTrack
from .timeline import ClassLabel, Segment, Timeline, segments_to_timeline, timeline_to_segments, validate_segments

EMB1_MAGIC = b"EMB1"
EMB1_VERSION = 1
_EMB1_HEADER = struct.Struct("<4sIIII")


def _format_seconds(value: float) -> str:
    """Fixed-point seconds with at least three decimals, no float noise."""
    text = f"{value:.6f}".rstrip("0")
    whole, _, frac = text.partition(".")
    return f"{whole}.{frac.ljust(3, '0')}"


# ---------------------------------------------------------------------------
# PSA annotation files


def read_psa(path: str | Path) -> dict[str, list[Segment]]:
    """Parse a PSA file into per-audio sorted segment lists.

    Raises InvalidAnnotation naming the file and line on any malformed
    content (bad field count, unparsable floats, unknown labels,
    overlapping segments).
    """
    path = Path(path)
    per_audio: dict[str, list[tuple[int, Segment]]] = {}
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InvalidAnnotation(f"cannot read annotation file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise InvalidAnnotation(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}")
        audio_id, onset_s, offset_s, label_s = fields
        try:
            onset, offset = float(onset_s), float(offset_s)
        except ValueError:
            raise InvalidAnnotation(f"{path}:{lineno}: bad onset/offset {onset_s!r}/{offset_s!r}") from None
        try:
            segment = Segment(onset, offset, ClassLabel.parse(label_s))
        except InvalidAnnotation as exc:
            raise InvalidAnnotation(f"{path}:{lineno}: {exc}") from None
        per_audio.setdefault(audio_id, []).append((lineno, segment))

    result: dict[str, list[Segment]] = {}
    for audio_id, entries in per_audio.items():
        entries.sort(key=lambda e: (e[1].onset, e[1].offset))
        for (_, prev), (lineno, cur) in zip(entries, entries[1:]):
            if cur.onset < prev.offset - 1e-9:
                raise InvalidAnnotation(
                    f"{path}:{lineno}: segment [{cur.onset}, {cur.offset}) of {audio_id!r} "
                    f"overlaps [{prev.onset}, {prev.offset})"
                )
        result[audio_id] = [seg for _, seg in entries]
    return result


def write_psa(path: str | Path, entries: dict[str, list[Segment]]) -> None:
    """Write per-audio segments as a PSA file (audios sorted by id)."""
    lines = []
    for audio_id in sorted(entries):
        for seg in validate_segments(entries[audio_id]):
            lines.append(
                f"{audio_id}\t{_format_seconds(seg.onset)}\t{_format_seconds(seg.offset)}\t{seg.label}"
            )
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def write_timelines_psa(path: str | Path, timelines: dict[str, Timeline]) -> None:
    """Serialize timelines, keeping nonspeech runs so total duration survives."""
    entries = {
        audio_id: timeline_to_segments(tl, include_nonspeech=True)
        for audio_id, tl in timelines.items()
    }
    write_psa(path, entries)


def timelines_from_psa(
    entries: dict[str, list[Segment]],
    frame_duration: float,
    durations: dict[str, float] | None = None,
) -> dict[str, Timeline]:
    """Materialize parsed PSA segments onto a frame grid.

    Per audio, the grid extends to the supplied duration when given,
    otherwise to the last segment offset.
    """
    timelines = {}
    for audio_id, segments in entries.items():
        if durations and audio_id in durations:
            total = durations[audio_id]
        else:
            total = max((s.offset for s in segments), default=0.0)
        timelines[audio_id] = segments_to_timeline(segments, frame_duration, total, audio_id)
    return timelines


def read_exclusion_mask(path: str | Path) -> dict[str, list[tuple[float, float]]]:
    """Parse an exclusion-mask TSV: audio_id, onset, offset per line."""
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InvalidAnnotation(f"cannot read mask file {path}: {exc}") from exc
    regions: dict[str, list[tuple[float, float]]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise InvalidAnnotation(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(fields)}")
        audio_id, onset_s, offset_s = fields
        try:
            onset, offset = float(onset_s), float(offset_s)
        except ValueError:
            raise InvalidAnnotation(f"{path}:{lineno}: bad onset/offset {onset_s!r}/{offset_s!r}") from None
        if offset <= onset:
            raise InvalidAnnotation(f"{path}:{lineno}: region [{onset}, {offset}) has non-positive duration")
        regions.setdefault(audio_id, []).append((onset, offset))
    return regions


# ---------------------------------------------------------------------------
# Oracle cluster-count tables


def read_k_table(path: str | Path) -> dict[str, int]:
    """Parse an audio_id -> cluster count TSV."""
    path = Path(path)
    table: dict[str, int] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise InvalidAnnotation(f"{path}:{lineno}: expected 2 tab-separated fields, got {len(fields)}")
        try:
            k = int(fields[1])
        except ValueError:
            raise InvalidAnnotation(f"{path}:{lineno}: bad cluster count {fields[1]!r}") from None
        if k < 1:
            raise InvalidAnnotation(f"{path}:{lineno}: cluster count must be >= 1, got {k}")
        table[fields[0]] = k
    return table


def write_k_table(path: str | Path, table: dict[str, int]) -> None:
    lines = [f"{audio_id}\t{k}" for audio_id, k in sorted(table.items())]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


# ---------------------------------------------------------------------------
# EMB1 binary matrices


def write_emb1(path: str | Path, matrix: np.ndarray, frame_duration: float) -> None:
    """Write a float32 matrix with its frame duration to an EMB1 file."""
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise FormatError(f"EMB1 payload must be 1-D or 2-D, got shape {matrix.shape}")
    frame_us = round(frame_duration * 1e6)
    if frame_us <= 0:
        raise FormatError(f"frame duration {frame_duration}s does not fit microsecond resolution")
    header = _EMB1_HEADER.pack(EMB1_MAGIC, EMB1_VERSION, arr.shape[0], arr.shape[1], frame_us)
    Path(path).write_bytes(header + arr.tobytes())


def read_emb1(path: str | Path) -> tuple[np.ndarray, float]:
    """Read an EMB1 file; returns (read-only float32 matrix, frame duration)."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _EMB1_HEADER.size:
        raise FormatError(f"{path}: truncated EMB1 header")
    magic, version, n_frames, dim, frame_us = _EMB1_HEADER.unpack_from(blob)
    if magic != EMB1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != EMB1_VERSION:
        raise FormatError(f"{path}: unsupported EMB1 version {version}")
    expected = _EMB1_HEADER.size + n_frames * dim * 4
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes for {n_frames}x{dim}, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_EMB1_HEADER.size).reshape(n_frames, dim).copy()
    data.setflags(write=False)
    return data, frame_us / 1e6


def load_embeddings(path: str | Path, audio_id: str | None = None) -> EmbeddingMatrix:
    """Load an EMB1 file as an embedding matrix (zero rows rejected)."""
    path = Path(path)
    matrix, frame_duration = read_emb1(path)
    return EmbeddingMatrix(audio_id or path.stem, frame_duration, matrix)


def load_score_track(path: str | Path, kind: str, audio_id: str | None = None) -> ScoreTrack:
    """Load an EMB1 file as a localization score track.

    ``kind`` is "binary" (D must be 1) or "multi" (class names come from
    the sidecar JSON).
    """
    path = Path(path)
    matrix, frame_duration = read_emb1(path)
    name = audio_id or path.stem
    if kind == "binary":
        if matrix.shape[1] != 1:
            raise FormatError(f"{path}: binary score track must have D=1, got D={matrix.shape[1]}")
        return ScoreTrack(name, frame_duration, matrix[:, 0])
    if kind != "multi":
        raise FormatError(f"unknown score track kind {kind!r}")
    classes = _read_class_sidecar(path)
    if len(classes) != matrix.shape[1]:
        raise FormatError(
            f"{path}: {matrix.shape[1]} score columns but {len(classes)} class names"
        )
    return ScoreTrack(name, frame_duration, matrix, tuple(classes))


def _read_class_sidecar(emb_path: Path) -> list[str]:
    for candidate in (emb_path.with_suffix(".classes.json"), emb_path.parent / "classes.json"):
        if candidate.exists():
            try:
                classes = json.loads(candidate.read_text(encoding="utf-8"))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{candidate}: bad JSON: {exc}") from exc
            if not isinstance(classes, list) or not all(isinstance(c, str) for c in classes):
                raise FormatError(f"{candidate}: expected a JSON list of class names")
            return classes
    raise FormatError(f"no class-name sidecar found for {emb_path}")


def infer_frame_count(duration: float, frame_duration: float) -> int:
    """Number of grid frames covering `duration` seconds."""
    return int(math.ceil(duration / frame_duration - 1e-9))
