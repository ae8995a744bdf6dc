"""Frame-level agglomerative clustering over countermeasure embeddings.

This is the diarization branch of the inference pipeline: build a
pairwise cosine-distance affinity matrix over per-frame embeddings, then
merge clusters bottom-up until the externally supplied (oracle) cluster
count is reached.

The merge loop is written out here instead of delegating to a library
linkage routine so that tie-breaking is fully specified: among
equal-distance pairs the one with the smallest (min cluster id, max
cluster id) merges first, where a cluster's id is the smallest frame
index it contains.  This makes the output reproducible across platforms
and worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEmbedding, TooFewFrames
from .timeline import ClassLabel, Timeline

LINKAGES = ("single", "complete", "average")

#: Frames beyond this need stride pooling; the dense affinity matrix is O(M^2).
MAX_DENSE_FRAMES = 20_000


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-frame embeddings of one audio file (row i = frame i)."""

    audio_id: str
    frame_duration: float
    vectors: np.ndarray

    def __post_init__(self) -> None:
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2:
            raise DegenerateEmbedding(f"embeddings must be 2-D, got shape {vectors.shape}")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise DegenerateEmbedding(
                f"zero-norm embedding at frame {bad} of {self.audio_id!r}"
            )
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def n_frames(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster id per frame; ids are 0..k-1 in order of first appearance."""

    audio_id: str
    cluster_ids: tuple[int, ...]

    @property
    def n_clusters(self) -> int:
        return len(set(self.cluster_ids))


def affinity(emb: EmbeddingMatrix) -> np.ndarray:
    """Pairwise cosine-distance matrix: 1 - e_i.e_j / (|e_i||e_j|).

    Symmetric with an exactly zero diagonal; values lie in [0, 2].
    """
    vectors = emb.vectors
    if vectors.shape[0] < 1:
        raise DegenerateEmbedding("affinity needs at least one frame")
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    unit = vectors / norms
    dist = 1.0 - unit @ unit.T
    dist = (dist + dist.T) / 2.0
    np.clip(dist, 0.0, 2.0, out=dist)
    np.fill_diagonal(dist, 0.0)
    return dist


def _renumber_first_appearance(raw: np.ndarray) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    out = []
    for value in raw.tolist():
        if value not in seen:
            seen[value] = len(seen)
        out.append(seen[value])
    return tuple(out)


def ahc(emb: EmbeddingMatrix, k: int, linkage: str = "average") -> ClusterAssignment:
    """Agglomerative hierarchical clustering down to exactly k clusters.

    Args:
        emb: frame embeddings; cosine distance is computed internally.
        k: target cluster count, 1 <= k <= number of frames.
        linkage: "single", "complete" or "average" (default).

    Returns:
        ClusterAssignment with ids renumbered by first frame appearance.

    The merge order does not depend on k, so the k-cluster partition
    always refines the (k-1)-cluster partition of the same input.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    n = emb.n_frames
    if k < 1 or k > n:
        raise TooFewFrames(f"cannot form {k} clusters from {n} frames")

    dist = affinity(emb)
    np.fill_diagonal(dist, np.inf)
    membership = np.arange(n)
    sizes = np.ones(n)
    active = n
    while active > k:
        # Row-major argmin visits (i, j) with i < j before (j, i), so the
        # first minimal entry realizes the (min id, max id) tie-break.
        flat = int(np.argmin(dist))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        if linkage == "average":
            merged = (sizes[i] * dist[i, :] + sizes[j] * dist[j, :]) / (sizes[i] + sizes[j])
        elif linkage == "single":
            merged = np.minimum(dist[i, :], dist[j, :])
        else:
            merged = np.maximum(dist[i, :], dist[j, :])
        dist[i, :] = merged
        dist[:, i] = merged
        dist[i, i] = np.inf
        dist[j, :] = np.inf
        dist[:, j] = np.inf
        sizes[i] += sizes[j]
        membership[membership == j] = i
        active -= 1

    return ClusterAssignment(emb.audio_id, _renumber_first_appearance(membership))


def pool_embeddings(emb: EmbeddingMatrix, stride: int) -> EmbeddingMatrix:
    """Average consecutive frames in groups of `stride` (for very long audio)."""
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    if stride == 1:
        return emb
    n = emb.n_frames
    groups = [emb.vectors[start : start + stride].mean(axis=0) for start in range(0, n, stride)]
    return EmbeddingMatrix(emb.audio_id, emb.frame_duration * stride, np.asarray(groups))


def expand_assignment(assign: ClusterAssignment, stride: int, n_frames: int) -> ClusterAssignment:
    """Undo stride pooling by repeating each pooled id `stride` times."""
    expanded = []
    for cid in assign.cluster_ids:
        expanded.extend([cid] * stride)
    return ClusterAssignment(assign.audio_id, tuple(expanded[:n_frames]))


def assignment_to_timeline(assign: ClusterAssignment, frame_duration: float) -> Timeline:
    """Turn a cluster assignment into a fully scored hypothesis timeline.

    Ids are renumbered by first appearance and rendered as opaque
    ``cluster<i>`` labels for the metrics stage.
    """
    canonical = _renumber_first_appearance(np.asarray(assign.cluster_ids, dtype=np.int64))
    labels = tuple(ClassLabel.cluster(cid) for cid in canonical)
    return Timeline(assign.audio_id, frame_duration, labels, tuple(True for _ in labels))
