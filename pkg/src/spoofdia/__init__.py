"""Spoof diarization toolkit.

Answers "what spoofed when" for partially spoofed audio: frame-aligned
timelines, Jaccard-style error metrics (JI_bona / JER_spoof) computed
after an optimal class-cluster mapping, a clustering + localization
inference pipeline, training-label derivation, and a synthetic scenario
generator for end-to-end verification without neural models.
"""

from .clustering import ClusterAssignment, EmbeddingMatrix, affinity, ahc, assignment_to_timeline
from .errors import (
    DegenerateEmbedding,
    DegenerateScores,
    EmptyReference,
    EmptyReport,
    FormatError,
    GridMismatch,
    InvalidAnnotation,
    InvalidConfig,
    IoError,
    MissingThreshold,
    SpoofDiaError,
    TooFewFrames,
)
from .fusion import DiarizationOutput, lcm_fuse, run_3c
from .localization import ScoreTrack, Threshold, decide_bonafide, frame_eer, repeat_to_resolution
from .metrics import (
    DEFAULT_ATTACK_GROUPS,
    ConPPolicy,
    DiarizationReport,
    FileScore,
    MappingResult,
    OverlapMatrix,
    aggregate,
    optimal_mapping,
    overlap_matrix,
    score_file,
)
from .synth import SynthConfig, expected_frame_eer, generate
from .timeline import (
    BONAFIDE,
    CONP,
    EXCLUDED,
    NONSPEECH,
    ClassLabel,
    LabelKind,
    LabelScheme,
    Segment,
    Timeline,
    apply_exclusion,
    apply_vad,
    derive_labels,
    segments_to_timeline,
    timeline_to_segments,
)

__version__ = "0.1.0"

__all__ = [
    "BONAFIDE",
    "CONP",
    "DEFAULT_ATTACK_GROUPS",
    "ClassLabel",
    "ClusterAssignment",
    "ConPPolicy",
    "DegenerateEmbedding",
    "DegenerateScores",
    "DiarizationOutput",
    "DiarizationReport",
    "EXCLUDED",
    "EmbeddingMatrix",
    "EmptyReference",
    "EmptyReport",
    "FileScore",
    "FormatError",
    "GridMismatch",
    "InvalidAnnotation",
    "InvalidConfig",
    "IoError",
    "LabelKind",
    "LabelScheme",
    "MappingResult",
    "MissingThreshold",
    "NONSPEECH",
    "OverlapMatrix",
    "ScoreTrack",
    "Segment",
    "SpoofDiaError",
    "SynthConfig",
    "Threshold",
    "Timeline",
    "TooFewFrames",
    "affinity",
    "aggregate",
    "ahc",
    "apply_exclusion",
    "apply_vad",
    "assignment_to_timeline",
    "decide_bonafide",
    "derive_labels",
    "expected_frame_eer",
    "frame_eer",
    "generate",
    "lcm_fuse",
    "optimal_mapping",
    "overlap_matrix",
    "repeat_to_resolution",
    "run_3c",
    "score_file",
    "segments_to_timeline",
    "timeline_to_segments",
]
