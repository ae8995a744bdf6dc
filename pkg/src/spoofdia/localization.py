"""Per-frame bona fide detection from countermeasure scores.

The localization branch turns frame-level scores into boolean bona fide
decisions.  Binary score tracks compare each score against a threshold
calibrated at the frame-wise equal error rate on development data;
multi-class tracks simply take the argmax class and test whether it is
the bona fide class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateScores, GridMismatch, MissingThreshold

BONAFIDE_CLASS = "bonafide"


@dataclass(frozen=True)
class ScoreTrack:
    """Frame-level localization scores for one audio file.

    Binary tracks hold one score per frame, higher meaning more bona
    fide.  Multi-class tracks hold one row of class scores per frame with
    ``class_names`` naming the columns; rows need not sum to one since
    only the argmax matters.
    """

    audio_id: str
    frame_duration: float
    scores: np.ndarray
    class_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        if self.class_names is None:
            if scores.ndim != 1:
                raise DegenerateScores(
                    f"binary track must be 1-D, got shape {scores.shape}"
                )
        else:
            if scores.ndim != 2 or scores.shape[1] != len(self.class_names):
                raise DegenerateScores(
                    f"multi-class track shape {scores.shape} does not match "
                    f"{len(self.class_names or ())} class names"
                )
            if BONAFIDE_CLASS not in self.class_names:
                raise DegenerateScores(
                    f"multi-class track needs a {BONAFIDE_CLASS!r} class, got {self.class_names}"
                )
        if not np.all(np.isfinite(scores)):
            raise DegenerateScores(f"non-finite score in track {self.audio_id!r}")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def is_binary(self) -> bool:
        return self.class_names is None

    @property
    def n_frames(self) -> int:
        return self.scores.shape[0]


@dataclass(frozen=True)
class Threshold:
    """An operating point: decide bona fide when score > tau."""

    tau: float
    eer: float
    source: str = ""


def frame_eer(pairs: list[tuple[float, bool]]) -> Threshold:
    """Estimate the frame-wise equal error rate and its threshold.

    Every distinct score is swept as a candidate operating point
    "accept frames scoring at least this value as bona fide", plus a
    reject-everything point.  The candidate minimizing |FAR - FRR| wins
    (ties: smaller threshold), the reported EER is the mean of FAR and
    FRR there, and tau is placed at the midpoint between the winning
    candidate and the next lower distinct score so that the ``score >
    tau`` decision is robust to float noise.

    FAR is the fraction of spoof frames accepted as bona fide; FRR is the
    fraction of bona fide frames rejected.

    Args:
        pairs: (score, is_bona_fide) for every frame pooled over files.

    Raises:
        DegenerateScores: if only one of the two classes is present.
    """
    if not pairs:
        raise DegenerateScores("no score/label pairs")
    ordered = sorted(pairs, key=lambda p: (p[0], p[1]))
    scores = np.asarray([p[0] for p in ordered], dtype=np.float64)
    is_bona = np.asarray([p[1] for p in ordered], dtype=bool)
    n_bona = int(is_bona.sum())
    n_spoof = len(ordered) - n_bona
    if n_bona == 0 or n_spoof == 0:
        raise DegenerateScores("EER needs both bona fide and spoof frames")

    bona_sorted = np.sort(scores[is_bona])
    spoof_sorted = np.sort(scores[~is_bona])
    candidates = np.unique(scores)

    # Accepting s >= c: FAR(c) = #spoof >= c, FRR(c) = #bona < c.
    far = (n_spoof - np.searchsorted(spoof_sorted, candidates, side="left")) / n_spoof
    frr = np.searchsorted(bona_sorted, candidates, side="left") / n_bona

    taus = np.empty(len(candidates) + 1)
    taus[0] = candidates[0] - 1.0
    taus[1:-1] = (candidates[1:] + candidates[:-1]) / 2.0
    taus[-1] = candidates[-1]  # reject-all point: nothing exceeds the max
    far = np.append(far, 0.0)
    frr = np.append(frr, 1.0)

    gaps = np.abs(far - frr)
    best = min(range(len(taus)), key=lambda idx: (gaps[idx], taus[idx]))
    eer = 100.0 * (far[best] + frr[best]) / 2.0
    return Threshold(
        tau=float(taus[best]),
        eer=float(eer),
        source=f"sweep over {len(ordered)} frames ({n_bona} bona, {n_spoof} spoof)",
    )


def decide_bonafide(track: ScoreTrack, tau: Threshold | float | None = None) -> tuple[bool, ...]:
    """Per-frame bona fide decisions.

    Binary tracks require a threshold and decide ``score > tau``.
    Multi-class tracks ignore tau and decide by argmax, with ties
    resolved in favor of bona fide first and then column order.
    """
    if track.is_binary:
        if tau is None:
            raise MissingThreshold(f"binary track {track.audio_id!r} needs a threshold")
        cut = tau.tau if isinstance(tau, Threshold) else float(tau)
        return tuple(bool(v) for v in track.scores > cut)

    names = list(track.class_names or ())
    bona_idx = names.index(BONAFIDE_CLASS)
    order = [bona_idx] + [i for i in range(len(names)) if i != bona_idx]
    reordered = track.scores[:, order]
    return tuple(bool(v) for v in np.argmax(reordered, axis=1) == 0)


def repeat_to_resolution(track: ScoreTrack, target_frame_duration: float) -> ScoreTrack:
    """Resample a track to a finer grid by integer frame repetition."""
    if target_frame_duration <= 0:
        raise GridMismatch(f"target frame duration must be positive, got {target_frame_duration}")
    factor = track.frame_duration / target_frame_duration
    rounded = round(factor)
    if rounded < 1 or abs(factor - rounded) > 1e-9 * max(1.0, factor):
        raise GridMismatch(
            f"cannot repeat frames from {track.frame_duration}s to "
            f"{target_frame_duration}s: ratio {factor} is not a positive integer"
        )
    repeated = np.repeat(track.scores, rounded, axis=0)
    return ScoreTrack(track.audio_id, target_frame_duration, repeated, track.class_names)
