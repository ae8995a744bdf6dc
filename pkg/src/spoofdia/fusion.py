"""Combining the clustering and localization branches.

The fusion rule is a label-level constraint: wherever the localization
branch decides bona fide, the final output is bona fide; everywhere else
the cluster assignment stands.  Fusion happens after clustering has
finished, so the requested cluster count keeps its meaning.
"""

from __future__ import annotations

from dataclasses import dataclass

from .clustering import ClusterAssignment, EmbeddingMatrix, ahc
from .errors import GridMismatch
from .localization import ScoreTrack, Threshold, decide_bonafide
from .timeline import BONAFIDE, ClassLabel, LabelKind, Timeline


@dataclass(frozen=True)
class DiarizationOutput:
    """Final per-frame prediction: bona fide or an opaque cluster label."""

    audio_id: str
    frame_duration: float
    labels: tuple[ClassLabel, ...]

    @property
    def n_frames(self) -> int:
        return len(self.labels)

    @property
    def bona_mask(self) -> tuple[bool, ...]:
        return tuple(lab.kind is LabelKind.BONAFIDE for lab in self.labels)

    def to_timeline(self) -> Timeline:
        """Fully scored hypothesis timeline for the metrics stage."""
        return Timeline(
            self.audio_id,
            self.frame_duration,
            self.labels,
            tuple(True for _ in self.labels),
        )


def lcm_fuse(
    assign: ClusterAssignment,
    bona_mask: tuple[bool, ...] | list[bool],
    frame_duration: float,
) -> DiarizationOutput:
    """Overwrite cluster labels with bona fide where the mask says so.

    Cluster ids pass through unrenumbered; the metric mapping is
    id-agnostic so renumbering would be pointless churn.
    """
    if len(assign.cluster_ids) != len(bona_mask):
        raise GridMismatch(
            f"cluster assignment has {len(assign.cluster_ids)} frames "
            f"but bona mask has {len(bona_mask)}"
        )
    labels = tuple(
        BONAFIDE if bona else ClassLabel.cluster(cid)
        for cid, bona in zip(assign.cluster_ids, bona_mask)
    )
    return DiarizationOutput(assign.audio_id, frame_duration, labels)


def run_3c(
    emb: EmbeddingMatrix,
    k: int,
    track: ScoreTrack | None = None,
    tau: Threshold | float | None = None,
    linkage: str = "average",
    pre_mask: bool = False,
) -> DiarizationOutput:
    """Run the two-branch pipeline on one file.

    Clusters the embeddings to k clusters, then, when a localization
    track is given, forces frames it deems bona fide to bona fide.
    Without a track the output is the bare clustering.

    With ``pre_mask`` (experimental) bona fide frames are removed before
    clustering and the remaining frames are grouped into max(1, k - 1)
    clusters, on the assumption that bona fide owns one of the k.
    """
    if track is not None and track.n_frames != emb.n_frames:
        raise GridMismatch(
            f"embeddings have {emb.n_frames} frames but scores have {track.n_frames}"
        )
    if track is None:
        assign = ahc(emb, k, linkage=linkage)
        return lcm_fuse(assign, tuple(False for _ in range(emb.n_frames)), emb.frame_duration)

    bona = decide_bonafide(track, tau)
    if pre_mask:
        keep = [i for i, b in enumerate(bona) if not b]
        if keep:
            sub = EmbeddingMatrix(emb.audio_id, emb.frame_duration, emb.vectors[keep])
            sub_k = min(max(1, k - 1), len(keep))
            sub_assign = ahc(sub, sub_k, linkage=linkage)
            ids = [0] * emb.n_frames
            for pos, frame in enumerate(keep):
                ids[frame] = sub_assign.cluster_ids[pos]
        else:
            ids = [0] * emb.n_frames
        assign = ClusterAssignment(emb.audio_id, tuple(ids))
    else:
        assign = ahc(emb, k, linkage=linkage)
    return lcm_fuse(assign, bona, emb.frame_duration)
