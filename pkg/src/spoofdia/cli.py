"""Command-line interface: score, diarize, eer, derive-labels, synth."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .clustering import MAX_DENSE_FRAMES, ahc, expand_assignment, pool_embeddings
from .errors import GridMismatch, InvalidAnnotation, InvalidConfig, SpoofDiaError
from .formats import (
    load_embeddings,
    load_score_track,
    read_exclusion_mask,
    read_k_table,
    read_psa,
    write_psa,
)
from .fusion import lcm_fuse, run_3c
from .localization import decide_bonafide, frame_eer
from .metrics import DEFAULT_ATTACK_GROUPS, ConPPolicy, aggregate, score_file
from .report import render_figures, render_json, render_tsv
from .synth import SynthConfig, config_from_dict, generate
from .timeline import (
    LabelKind,
    Segment,
    apply_exclusion,
    derive_labels,
    segments_to_timeline,
    timeline_to_segments,
)

logger = logging.getLogger("spoofdia")


class _Parser(argparse.ArgumentParser):
    """Argument errors are validation errors: exit 1, not argparse's 2."""

    def error(self, message):  # noqa: D102 - argparse hook
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="spoofdia", description=__doc__)
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for per-file stages")
    parser.add_argument(
        "--log-level",
        choices=("debug", "info", "warning", "error"),
        default="info",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the configured seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[], help="score a hypothesis PSA against a reference PSA")
    p.add_argument("--ref", required=True, help="reference PSA file")
    p.add_argument("--hyp", required=True, help="hypothesis PSA file")
    p.add_argument("--mask", default=None, help="exclusion-mask TSV (regions removed from scoring)")
    p.add_argument("--conp", choices=("attack", "merge", "exclude"), default="attack")
    p.add_argument("--groups", default=None, help="JSON file mapping attack id to group name")
    p.add_argument("--frame-ms", type=int, default=20, help="scoring frame size in milliseconds")
    p.add_argument("--out", default=None, help="report path (.json or .tsv); default: JSON on stdout")
    p.add_argument("--per-file", action="store_true", help="include per-file scores in the report")
    p.add_argument(
        "--per-attack-all-files",
        action="store_true",
        help="divide per-attack global JER by the corpus size instead of the files containing the attack",
    )
    p.add_argument("--figures", default=None, help="directory for summary figures (PNG)")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("diarize", help="cluster embeddings (and optionally fuse localization)")
    p.add_argument("--emb-dir", required=True, help="directory of <audio_id>.emb embedding files")
    p.add_argument("--k", required=True, help="TSV of audio_id<TAB>oracle cluster count")
    p.add_argument("--linkage", choices=("single", "complete", "average"), default="average")
    p.add_argument("--loc-dir", default=None, help="directory of <audio_id>.emb score tracks")
    p.add_argument("--loc-kind", choices=("binary", "multi"), default="binary")
    p.add_argument("--tau", type=float, default=None, help="bona fide threshold for binary tracks")
    p.add_argument("--pre-mask", action="store_true", help="exclude bona fide frames before clustering (experimental)")
    p.add_argument("--stride", type=int, default=1, help="stride pooling factor for very long audio")
    p.add_argument("--out", required=True, help="hypothesis PSA output path")
    p.set_defaults(func=_cmd_diarize)

    p = sub.add_parser("eer", help="frame-wise EER and threshold from binary score tracks")
    p.add_argument("--scores-dir", required=True, help="directory of binary <audio_id>.emb score tracks")
    p.add_argument("--ref", required=True, help="reference PSA file")
    p.add_argument("--eval-frame-ms", type=int, default=None, help="repeat frames to this resolution first")
    p.set_defaults(func=_cmd_eer)

    p = sub.add_parser("derive-labels", help="derive per-frame training labels from a reference PSA")
    p.add_argument("--ref", required=True)
    p.add_argument("--scheme", choices=("bin", "mul", "spf"), required=True)
    p.add_argument("--frame-ms", type=int, default=20)
    p.add_argument("--out", default=None, help="TSV output path; default stdout")
    p.set_defaults(func=_cmd_derive_labels)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--config", default=None, help="JSON config; defaults are used when omitted")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    return parser


def _config_hash(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in vars(args).items() if k != "func"}
    blob = json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _map_tasks(worker, tasks, jobs: int):
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, tasks))


# ---------------------------------------------------------------------------
# score


def _total_duration(*segment_lists: list[Segment]) -> float:
    return max((seg.offset for segs in segment_lists for seg in segs), default=0.0)


def _score_worker(task) -> object:
    audio_id, ref_segs, hyp_segs, regions, frame_duration, policy = task
    total = _total_duration(ref_segs, hyp_segs)
    ref = segments_to_timeline(ref_segs, frame_duration, total, audio_id)
    if regions:
        ref = apply_exclusion(ref, regions)
    hyp = segments_to_timeline(hyp_segs, frame_duration, total, audio_id)
    return score_file(ref, hyp, ConPPolicy(policy))


def _load_groups(path: str | None) -> dict[str, str]:
    if path is None:
        return DEFAULT_ATTACK_GROUPS
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: bad JSON: {exc}") from exc
    if not isinstance(raw, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
    ):
        raise InvalidConfig(f"{path}: expected a JSON object mapping attack id to group name")
    return raw


def _cmd_score(args) -> int:
    ref_entries = read_psa(args.ref)
    hyp_entries = read_psa(args.hyp)
    masks = read_exclusion_mask(args.mask) if args.mask else {}
    groups = _load_groups(args.groups)
    frame_duration = args.frame_ms / 1000.0
    if frame_duration <= 0:
        raise InvalidConfig(f"--frame-ms must be positive, got {args.frame_ms}")

    for audio_id in sorted(set(hyp_entries) - set(ref_entries)):
        logger.warning("hypothesis audio %r has no reference; ignored", audio_id)

    tasks = [
        (
            audio_id,
            ref_entries[audio_id],
            hyp_entries.get(audio_id, []),
            masks.get(audio_id, []),
            frame_duration,
            args.conp,
        )
        for audio_id in sorted(ref_entries)
    ]
    scores = _map_tasks(_score_worker, tasks, args.jobs)
    report = aggregate(scores, groups, per_attack_over_all_files=args.per_attack_all_files)

    if args.out and args.out.endswith(".tsv"):
        rendered = render_tsv(report, per_file=args.per_file)
    else:
        rendered = render_json(report, per_file=args.per_file)
    if args.out:
        Path(args.out).write_text(rendered, encoding="utf-8")
        logger.info("report written to %s", args.out)
    else:
        sys.stdout.write(rendered)
    if args.figures:
        for path in render_figures(report, args.figures):
            logger.info("figure written to %s", path)
    return 0


# ---------------------------------------------------------------------------
# diarize


def _diarize_worker(task) -> tuple[str, list[Segment]]:
    (audio_id, emb_path, k, linkage, loc_path, loc_kind, tau, pre_mask, stride) = task
    emb = load_embeddings(emb_path, audio_id)
    effective = emb.n_frames if stride <= 1 else (emb.n_frames + stride - 1) // stride
    if effective > MAX_DENSE_FRAMES:
        raise InvalidAnnotation(
            f"{audio_id!r} has {emb.n_frames} frames; the dense affinity matrix is "
            f"capped at {MAX_DENSE_FRAMES} — rerun with a larger --stride"
        )
    track = load_score_track(loc_path, loc_kind, audio_id) if loc_path else None
    if track is not None and track.n_frames != emb.n_frames:
        raise GridMismatch(
            f"{audio_id!r}: embeddings have {emb.n_frames} frames, scores have {track.n_frames}"
        )
    if stride > 1:
        pooled = pool_embeddings(emb, stride)
        assign = ahc(pooled, min(k, pooled.n_frames), linkage=linkage)
        assign = expand_assignment(assign, stride, emb.n_frames)
        bona = decide_bonafide(track, tau) if track is not None else tuple(False for _ in range(emb.n_frames))
        output = lcm_fuse(assign, bona, emb.frame_duration)
    else:
        output = run_3c(emb, min(k, emb.n_frames), track=track, tau=tau, linkage=linkage, pre_mask=pre_mask)
    return audio_id, timeline_to_segments(output.to_timeline(), include_nonspeech=True)


def _cmd_diarize(args) -> int:
    emb_dir = Path(args.emb_dir)
    emb_paths = sorted(emb_dir.glob("*.emb"))
    if not emb_paths:
        raise InvalidAnnotation(f"no .emb files found in {emb_dir}")
    k_table = read_k_table(args.k)
    if args.stride < 1:
        raise InvalidConfig(f"--stride must be >= 1, got {args.stride}")
    if args.loc_dir and args.loc_kind == "binary" and args.tau is None:
        raise InvalidConfig("binary localization needs --tau (run the eer subcommand first)")

    tasks = []
    for emb_path in emb_paths:
        audio_id = emb_path.stem
        if audio_id not in k_table:
            raise InvalidAnnotation(f"{args.k}: no cluster count for audio {audio_id!r}")
        loc_path = None
        if args.loc_dir:
            loc_path = Path(args.loc_dir) / emb_path.name
            if not loc_path.exists():
                raise InvalidAnnotation(f"missing score track {loc_path}")
        tasks.append(
            (
                audio_id,
                str(emb_path),
                k_table[audio_id],
                args.linkage,
                str(loc_path) if loc_path else None,
                args.loc_kind,
                args.tau,
                args.pre_mask,
                args.stride,
            )
        )
    results = _map_tasks(_diarize_worker, tasks, args.jobs)
    write_psa(args.out, dict(results))
    logger.info("hypothesis written to %s (%d files)", args.out, len(results))
    return 0


# ---------------------------------------------------------------------------
# eer


def _cmd_eer(args) -> int:
    from .localization import repeat_to_resolution

    ref_entries = read_psa(args.ref)
    scores_dir = Path(args.scores_dir)
    pairs: list[tuple[float, bool]] = []
    for audio_id in sorted(ref_entries):
        track_path = scores_dir / f"{audio_id}.emb"
        if not track_path.exists():
            raise InvalidAnnotation(f"missing score track {track_path}")
        track = load_score_track(track_path, "binary", audio_id)
        if args.eval_frame_ms is not None:
            track = repeat_to_resolution(track, args.eval_frame_ms / 1000.0)
        segments = ref_entries[audio_id]
        total = _total_duration(segments)
        timeline = segments_to_timeline(segments, track.frame_duration, total, audio_id)
        if timeline.n_frames != track.n_frames:
            raise GridMismatch(
                f"{audio_id!r}: reference covers {timeline.n_frames} frames, "
                f"score track has {track.n_frames}"
            )
        for i, (label, scored) in enumerate(zip(timeline.labels, timeline.scored_mask)):
            if scored:
                pairs.append((float(track.scores[i]), label.kind is LabelKind.BONAFIDE))
    threshold = frame_eer(pairs)
    sys.stdout.write(json.dumps({"eer": round(threshold.eer, 2), "tau": threshold.tau}) + "\n")
    return 0


# ---------------------------------------------------------------------------
# derive-labels


def _cmd_derive_labels(args) -> int:
    ref_entries = read_psa(args.ref)
    frame_duration = args.frame_ms / 1000.0
    lines = []
    for audio_id in sorted(ref_entries):
        segments = ref_entries[audio_id]
        timeline = segments_to_timeline(segments, frame_duration, _total_duration(segments), audio_id)
        for i, label in enumerate(derive_labels(timeline, args.scheme)):
            lines.append(f"{audio_id}\t{i}\t{label}")
    text = "\n".join(lines) + ("\n" if lines else "")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        logger.info("labels written to %s", args.out)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# synth


def _cmd_synth(args) -> int:
    raw = {}
    if args.config:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise InvalidConfig(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: bad JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InvalidConfig(f"{path}: expected a JSON object")
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg: SynthConfig = config_from_dict(raw)
    manifest = generate(cfg, args.out)
    corpus = manifest["corpus"]
    logger.info(
        "generated %d files under %s (bona fraction %.3f)",
        corpus["n_files"],
        args.out,
        corpus["bona_fraction"],
    )
    return 0


# ---------------------------------------------------------------------------


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    print(
        f"spoofdia {__version__} | {args.command} | config {_config_hash(args)} | seed {args.seed}",
        file=sys.stderr,
    )
    try:
        return args.func(args)
    except SpoofDiaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - defensive
        logger.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
