"""Jaccard-style diarization error metrics with optimal class-cluster mapping.

Scoring one file proceeds in three steps.  First, build the matrix of
overlap durations between every reference class and every hypothesis
cluster over the scored frames.  Second, find a one-to-one mapping
between classes and clusters that maximizes the total mapped overlap —
the classic assignment problem.  Third, for each reference class ``r``
with mapped cluster ``h``::

    JER_r = 100 * (FA + MD) / TOTAL
          = 100 * (1 - |r ∩ h| / |r ∪ h|)

where FA is the duration in ``h`` but not ``r``, MD the duration in
``r`` but not ``h`` and TOTAL the duration of their union.  Unmapped
reference classes score 100.  ``ji_bona`` is the error of the bona fide
class; ``jer_spoof`` is the mean error over the spoofing methods present
in the file.

All durations are counted in whole frames internally so equal overlaps
compare exactly; seconds are derived views.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import EmptyReference, EmptyReport, GridMismatch
from .timeline import ClassLabel, LabelKind, Timeline

#: Default grouping of spoofing methods by their presence in training data.
DEFAULT_ATTACK_GROUPS: dict[str, str] = {
    "A16": "known",
    "A19": "known",
    "A07": "varied",
    "A08": "varied",
    "A09": "varied",
    "A17": "varied",
    "A10": "unknown",
    "A11": "unknown",
    "A12": "unknown",
    "A13": "unknown",
    "A14": "unknown",
    "A15": "unknown",
    "A18": "unknown",
}


class ConPPolicy(enum.Enum):
    """How concatenation-artifact frames participate in scoring.

    AS_ATTACK keeps ConP as its own spoof class (the default).  MERGE
    folds each ConP frame into the nearest attack in time, so it does not
    claim a cluster of its own.  EXCLUDE masks ConP frames out entirely.
    """

    AS_ATTACK = "attack"
    MERGE = "merge"
    EXCLUDE = "exclude"

    @staticmethod
    def parse(text: str) -> "ConPPolicy":
        try:
            return ConPPolicy(text.strip().lower())
        except ValueError:
            raise ValueError(f"unknown ConP policy {text!r}") from None


@dataclass(frozen=True)
class OverlapMatrix:
    """Reference-class x hypothesis-cluster overlap durations.

    Rows and columns are ordered by first appearance among the scored
    frames, which makes every downstream result invariant under renaming
    of hypothesis cluster ids.
    """

    seconds: np.ndarray
    frames: np.ndarray
    ref_labels: tuple[ClassLabel, ...]
    hyp_labels: tuple[str, ...]
    frame_duration: float


@dataclass(frozen=True)
class MappingResult:
    """Outcome of the optimal one-to-one class-cluster mapping.

    ``pairs`` holds (reference, cluster) pairs with positive overlap;
    leftovers appear in ``unmapped_refs`` / ``unmapped_hyps``.  When built
    from a plain matrix the entries are row/column indices; when built
    from an :class:`OverlapMatrix` they are the actual labels.
    """

    pairs: tuple[tuple[object, object], ...]
    unmapped_refs: tuple[object, ...]
    unmapped_hyps: tuple[object, ...]

    @property
    def as_dict(self) -> dict[object, object]:
        return dict(self.pairs)


@dataclass(frozen=True)
class FileScore:
    """Per-file metric values, in percent.

    ``ji_bona`` is None when the file has no scored bona fide frames;
    ``jer_spoof`` is None when no spoof class is present
    (``attack_count == 0``).  Such files are skipped by the relevant
    global averages.
    """

    audio_id: str
    ji_bona: float | None
    per_attack: dict[str, float]
    jer_spoof: float | None
    attack_count: int


@dataclass(frozen=True)
class DiarizationReport:
    """Corpus-level metric summary plus the per-file scores it was built from."""

    per_file: tuple[FileScore, ...]
    ji_bona_global: float | None
    jer_spoof_global: float | None
    per_attack_global: dict[str, float]
    group_scores: dict[str, float]


def _first_appearance_codes(keys: list[object]) -> tuple[list[object], np.ndarray]:
    """Map a key sequence to integer codes ordered by first appearance."""
    order: dict[object, int] = {}
    codes = np.empty(len(keys), dtype=np.int64)
    for i, key in enumerate(keys):
        if key not in order:
            order[key] = len(order)
        codes[i] = order[key]
    return list(order), codes


def overlap_matrix(ref: Timeline, hyp: Timeline) -> OverlapMatrix:
    """Count scored-frame overlap between reference classes and hypothesis clusters.

    Only frames with ``ref.scored_mask`` true are counted; the hypothesis
    label of each such frame is used as an opaque cluster id.
    """
    _check_grids(ref, hyp)
    scored = [i for i, m in enumerate(ref.scored_mask) if m]
    ref_keys: list[object] = [ref.labels[i] for i in scored]
    hyp_keys: list[object] = [str(hyp.labels[i]) for i in scored]
    ref_labels, ref_codes = _first_appearance_codes(ref_keys)
    hyp_labels, hyp_codes = _first_appearance_codes(hyp_keys)
    counts = np.zeros((len(ref_labels), len(hyp_labels)), dtype=np.int64)
    np.add.at(counts, (ref_codes, hyp_codes), 1)
    return OverlapMatrix(
        seconds=counts * ref.frame_duration,
        frames=counts,
        ref_labels=tuple(ref_labels),
        hyp_labels=tuple(hyp_labels),
        frame_duration=ref.frame_duration,
    )


def _check_grids(ref: Timeline, hyp: Timeline) -> None:
    if ref.frame_duration != hyp.frame_duration:
        raise GridMismatch(
            f"frame durations differ: {ref.frame_duration} vs {hyp.frame_duration}"
        )
    if ref.n_frames != hyp.n_frames:
        raise GridMismatch(
            f"frame counts differ for {ref.audio_id!r}: {ref.n_frames} vs {hyp.n_frames}"
        )
    if ref.audio_id and hyp.audio_id and ref.audio_id != hyp.audio_id:
        raise GridMismatch(f"audio ids differ: {ref.audio_id!r} vs {hyp.audio_id!r}")


def _assignment_entries(matrix: np.ndarray) -> list[float]:
    if matrix.size == 0:
        return []
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return [float(matrix[r, c]) for r, c in zip(rows, cols)]


def _totals_match(a: float, b: float) -> bool:
    # Exact for integer-valued matrices (frame counts stay below 2**53);
    # the relative tolerance only matters for float-second inputs, where
    # summation order can perturb the last bit.
    return a == b or math.isclose(a, b, rel_tol=1e-12, abs_tol=0.0)


def _canonical_pairs(matrix: np.ndarray) -> list[tuple[int, int]]:
    """Deterministic maximum-overlap assignment.

    Among all one-to-one mappings with maximal total overlap, returns the
    one whose (row, column) pair list is lexicographically smallest:
    row 0 takes the lowest-index column compatible with optimality, then
    row 1, and so on.  Pairs with zero overlap are never emitted, since
    dropping them cannot change the total.  Totals compare exactly when
    the matrix entries are integer-valued (frame counts).
    """
    n_rows, n_cols = matrix.shape
    if n_rows == 0 or n_cols == 0:
        return []
    best_total = math.fsum(_assignment_entries(matrix))
    pairs: list[tuple[int, int]] = []
    fixed_entries: list[float] = []
    free_cols = list(range(n_cols))
    for row in range(n_rows):
        rest_rows = list(range(row + 1, n_rows))
        chosen = None
        for col in free_cols:
            if matrix[row, col] <= 0:
                continue
            rest_cols = [c for c in free_cols if c != col]
            remainder = _assignment_entries(matrix[np.ix_(rest_rows, rest_cols)])
            total = math.fsum(fixed_entries + [float(matrix[row, col])] + remainder)
            if _totals_match(total, best_total):
                chosen = col
                break
        if chosen is not None:
            pairs.append((row, chosen))
            fixed_entries.append(float(matrix[row, chosen]))
            free_cols.remove(chosen)
    return pairs


def optimal_mapping(overlaps: OverlapMatrix | np.ndarray | list) -> MappingResult:
    """Find the one-to-one class-cluster mapping maximizing total overlap.

    Accepts either an :class:`OverlapMatrix` (pairs are then expressed
    with actual labels) or any non-negative matrix (pairs are row/column
    indices).  An empty matrix yields an empty mapping.
    """
    if isinstance(overlaps, OverlapMatrix):
        matrix = overlaps.frames
        ref_names: list[object] = list(overlaps.ref_labels)
        hyp_names: list[object] = list(overlaps.hyp_labels)
    else:
        matrix = np.asarray(overlaps, dtype=float)
        if matrix.size == 0:
            matrix = matrix.reshape(0, 0)
        elif matrix.ndim != 2:
            raise ValueError(f"overlap matrix must be 2-D, got shape {matrix.shape}")
        ref_names = list(range(matrix.shape[0]))
        hyp_names = list(range(matrix.shape[1]))
    if matrix.size and matrix.min() < 0:
        raise ValueError("overlap entries must be non-negative")

    idx_pairs = _canonical_pairs(matrix)
    mapped_rows = {r for r, _ in idx_pairs}
    mapped_cols = {c for _, c in idx_pairs}
    return MappingResult(
        pairs=tuple((ref_names[r], hyp_names[c]) for r, c in idx_pairs),
        unmapped_refs=tuple(ref_names[r] for r in range(matrix.shape[0]) if r not in mapped_rows),
        unmapped_hyps=tuple(hyp_names[c] for c in range(matrix.shape[1]) if c not in mapped_cols),
    )


def _merge_conp_into_attacks(labels: list[ClassLabel]) -> list[ClassLabel]:
    """Relabel ConP frames with the nearest attack label in time.

    Ties (equidistant attack frames) resolve to the earlier frame.  If
    the file contains no attack frames the ConP labels are left as they
    are, which makes MERGE degrade gracefully to AS_ATTACK.
    """
    attack_pos = [i for i, lab in enumerate(labels) if lab.kind is LabelKind.ATTACK]
    if not attack_pos:
        return labels
    out = list(labels)
    for i, lab in enumerate(labels):
        if lab.kind is not LabelKind.CONP:
            continue
        j = int(np.searchsorted(attack_pos, i))
        candidates = []
        if j > 0:
            candidates.append(attack_pos[j - 1])
        if j < len(attack_pos):
            candidates.append(attack_pos[j])
        nearest = min(candidates, key=lambda p: (abs(p - i), p))
        out[i] = labels[nearest]
    return out


def score_file(
    ref: Timeline,
    hyp: Timeline,
    conp_policy: ConPPolicy = ConPPolicy.AS_ATTACK,
) -> FileScore:
    """Score one hypothesis timeline against its reference.

    The bona fide class takes part in the joint mapping like any other
    reference class.  Per-class errors use scored frames only, so edits
    to masked frames can never change the result.

    Raises:
        EmptyReference: if no scored reference frames remain.
        GridMismatch: if the two timelines disagree on the frame grid.
    """
    _check_grids(ref, hyp)

    labels = list(ref.labels)
    mask = list(ref.scored_mask)
    if conp_policy is ConPPolicy.MERGE:
        labels = _merge_conp_into_attacks(labels)
    elif conp_policy is ConPPolicy.EXCLUDE:
        mask = [m and lab.kind is not LabelKind.CONP for lab, m in zip(labels, mask)]
    if not any(mask):
        raise EmptyReference(f"no scored reference frames for {ref.audio_id!r}")

    working_ref = Timeline(ref.audio_id, ref.frame_duration, tuple(labels), tuple(mask))
    overlaps = overlap_matrix(working_ref, hyp)
    counts = overlaps.frames
    idx_pairs = _canonical_pairs(counts)
    mapped_col = {r: c for r, c in idx_pairs}

    row_totals = counts.sum(axis=1)
    col_totals = counts.sum(axis=0)
    ji_bona: float | None = None
    per_attack: dict[str, float] = {}
    for r, label in enumerate(overlaps.ref_labels):
        if r in mapped_col:
            c = mapped_col[r]
            inter = int(counts[r, c])
            union = int(row_totals[r]) + int(col_totals[c]) - inter
            jer = 100.0 * (union - inter) / union
        else:
            jer = 100.0
        if label.kind is LabelKind.BONAFIDE:
            ji_bona = jer
        elif label.kind is LabelKind.ATTACK or label.kind is LabelKind.CONP:
            per_attack[str(label)] = jer

    jer_spoof = None
    if per_attack:
        jer_spoof = sum(per_attack.values()) / len(per_attack)
    return FileScore(
        audio_id=ref.audio_id,
        ji_bona=ji_bona,
        per_attack=per_attack,
        jer_spoof=jer_spoof,
        attack_count=len(per_attack),
    )


def aggregate(
    per_file: list[FileScore],
    attack_groups: dict[str, str] | None = None,
    per_attack_over_all_files: bool = False,
) -> DiarizationReport:
    """Fold per-file scores into the corpus-level report.

    The global bona fide error is the unweighted mean over files that
    contain scored bona fide frames.  The global spoof error weights by
    attack instances: it sums every per-file per-attack error and divides
    by the total number of attack instances.  Per-attack global values
    average over the files in which the attack appears; pass
    ``per_attack_over_all_files=True`` to divide by the full corpus size
    instead.  Group scores average the per-instance errors of every
    attack assigned to the group.

    The result does not depend on the order of ``per_file``.
    """
    if not per_file:
        raise EmptyReport("no file scores to aggregate")
    if attack_groups is None:
        attack_groups = DEFAULT_ATTACK_GROUPS

    ordered = sorted(per_file, key=lambda fs: fs.audio_id)

    ji_values = [fs.ji_bona for fs in ordered if fs.ji_bona is not None]
    ji_global = sum(ji_values) / len(ji_values) if ji_values else None

    instance_values: list[float] = []
    by_attack: dict[str, list[float]] = {}
    by_group: dict[str, list[float]] = {}
    for fs in ordered:
        for attack_id, jer in fs.per_attack.items():
            instance_values.append(jer)
            by_attack.setdefault(attack_id, []).append(jer)
            group = attack_groups.get(attack_id)
            if group is not None:
                by_group.setdefault(group, []).append(jer)

    jer_global = sum(instance_values) / len(instance_values) if instance_values else None
    denominator = len(ordered) if per_attack_over_all_files else None
    per_attack_global = {
        attack_id: sum(vals) / (denominator or len(vals))
        for attack_id, vals in sorted(by_attack.items())
    }
    group_scores = {group: sum(vals) / len(vals) for group, vals in sorted(by_group.items())}

    return DiarizationReport(
        per_file=tuple(ordered),
        ji_bona_global=ji_global,
        jer_spoof_global=jer_global,
        per_attack_global=per_attack_global,
        group_scores=group_scores,
    )
