"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .array import DirectionGrid, default_geometry, load_geometry
from .diarization import (DEFAULT_ALPHA, DEFAULT_MAX_SPEAKERS, SegmentList, assign_primary_labels,
                          cosine_similarity_matrix, late_fuse, nme_sc, uniform_segments)
from .exceptions import DataError, DimensionError, NumericalError
from .formats import read_matrix, read_segments, write_intervals, write_matrix, write_segments
from .fsb import DEFAULT_BINS, DEFAULT_REG, DesiredResponse, FilterBank, design_bank, design_frequencies
from .fusion import fuse_campaign
from .osd import (DEFAULT_MIN_OFF, DEFAULT_MIN_ON, DEFAULT_OFFSET, DEFAULT_ONSET, AfsbConfig, AfsbWeights,
                  assign_second_speaker, detect_overlap, detection_metrics, load_external_overlaps)
from .pipeline import run_pipeline
from .scoring import DEFAULT_COLLAR, emit_rttm, parse_rttm, score_corpus
from .signal import load_wav, write_wav
from .simulator import load_scene, render
from .svector import extract_svectors

logger = logging.getLogger("beamdiar")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pair(text, sep=":"):
    try:
        a, b = (float(v) for v in text.replace("/", sep).split(sep))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected two numbers like 1.0{sep}0.5, got {text!r}")
    return a, b


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _recording_segments(path, recording):
    table = read_segments(path)
    if recording is None:
        if len(table) != 1:
            raise DataError(f"{path} lists {len(table)} recordings; pick one with --recording")
        recording = next(iter(table))
    if recording not in table:
        raise DataError(f"recording {recording!r} not in {path}")
    return recording, [(on, off) for _, on, off in table[recording]]


def _segments_for(args):
    rec, intervals = _recording_segments(args.segments, args.recording)
    if args.time_scale:
        return uniform_segments(intervals, args.time_scale[0], args.time_scale[1], rec)
    return SegmentList(rec, intervals)


# -- subcommands ----------------------------------------------------------------


def cmd_design_filters(args):
    geometry = load_geometry(args.geometry, args.speed_of_sound) if args.geometry else default_geometry()
    grid = DirectionGrid(args.directions)
    half = None if args.half_width is None else math.radians(args.half_width)
    bank = design_bank(geometry, grid, design_frequencies(args.band, args.n_bins),
                       DesiredResponse(args.shape, half), args.order, args.reg, args.rate)
    bank.save(args.out)
    logger.info("wrote %s: %d directions x %d mics x %d taps", args.out, *bank.shape)


def cmd_extract_svector(args):
    audio = load_wav(args.wav)
    bank = FilterBank.load(args.bank)
    segments = _segments_for(args)
    S = np.array([s.weights for s in extract_svectors(audio, bank, segments.intervals)])
    write_matrix(args.out, S.reshape(len(segments), bank.n_directions))
    if args.segments_out:
        write_segments(args.segments_out, segments.recording_id, segments.intervals)


def cmd_diarize(args):
    if args.xvec is None and args.svec is None:
        raise DataError("need --xvec, --svec or both")
    segments = _segments_for(args)
    X = read_matrix(args.xvec) if args.xvec else None
    S = read_matrix(args.svec) if args.svec else None
    for name, M in (("x-vector", X), ("s-vector", S)):
        if M is not None and len(M) != len(segments):
            raise DimensionError(f"{len(M)} {name} rows for {len(segments)} segments")
    if X is not None and S is not None:
        A = late_fuse(cosine_similarity_matrix(X), cosine_similarity_matrix(S), args.alpha)
    else:
        A = cosine_similarity_matrix(X if X is not None else S)
    labels = nme_sc(A, args.max_speakers)
    ann = assign_primary_labels(segments, labels)
    if args.overlaps:
        ann = assign_second_speaker(ann, load_external_overlaps(args.overlaps), segments,
                                    X if X is not None else S, labels)
    emit_rttm([ann], args.out)
    logger.info("%s: %d segments, %d speakers", segments.recording_id, len(segments), labels.k)


def cmd_osd(args):
    audio = load_wav(args.wav)
    if args.weights:
        weights = AfsbWeights.load(args.weights)
    else:
        logger.warning("no --weights: random AFSB front end with an inactive frame head")
        weights = AfsbWeights.initialize(AfsbConfig(n_channels=audio.channel_count, sample_rate=audio.sample_rate),
                                         args.seed)
    overlaps = detect_overlap(audio, weights, None, args.onset, args.offset, args.min_on, args.min_off)
    write_intervals(args.out, overlaps)


def cmd_init_afsb(args):
    cfg = AfsbConfig(n_channels=args.channels, sample_rate=args.rate, weight_mode=args.mode)
    AfsbWeights.initialize(cfg, args.seed).save(args.out)


def cmd_osd_score(args):
    ref = load_external_overlaps(args.ref)
    hyp = load_external_overlaps(args.hyp)
    span = args.duration if args.duration is not None else max([b for _, b in ref + hyp], default=0.0)
    m = detection_metrics(ref, hyp, span)
    print(f"DetER     {100 * m.deter:8.2f}%")
    print(f"Accuracy  {m.accuracy:8.2f}%")
    print(f"Precision {m.precision:8.2f}%")
    print(f"Recall    {m.recall:8.2f}%")
    if m.note:
        print(f"# {m.note}")


def cmd_score(args):
    refs = parse_rttm(args.ref)
    hyps = parse_rttm(args.hyp)
    per, total = score_corpus(refs, hyps, args.collar, args.overlap)
    print(f"{'recording':<24} {'DER%':>7} {'MS%':>7} {'FA%':>7} {'SC%':>7}")
    for rec, b in list(per.items()) + [("TOTAL", total)]:
        t = b.total_reference_speech or 1.0
        print(f"{rec:<24} {100 * b.der:7.2f} {100 * b.missed_speech / t:7.2f} "
              f"{100 * b.false_alarm / t:7.2f} {100 * b.speaker_confusion / t:7.2f}")


def cmd_fuse(args):
    fuse_campaign(args.hypotheses, args.weights, args.out)


def cmd_simulate(args):
    scene = load_scene(args.scene)
    rendered = render(scene, args.seed)
    prefix = Path(args.out_prefix)
    write_wav(f"{prefix}.wav", rendered.audio, args.encoding)
    emit_rttm([rendered.annotation], f"{prefix}.rttm")
    write_intervals(f"{prefix}.ovl", rendered.overlaps)
    write_segments(f"{prefix}.segments", scene.recording_id, rendered.speech)


def cmd_pipeline(args):
    result = run_pipeline(args.config)
    print("\n".join(result.report))
    if result.failures:
        raise DataError(f"{len(result.failures)} pipeline cell(s) failed; see the report")


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="beamdiar", description="Multi-channel speaker diarization toolkit.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("design-filters", help="design a filter-and-sum bank over a direction grid")
    s.add_argument("--geometry", help="mic positions file (default: 8-mic UCA, radius 4.25 cm)")
    s.add_argument("--speed-of-sound", type=float, default=343.0)
    s.add_argument("--directions", type=int, default=240)
    s.add_argument("--order", type=int, default=128, help="taps per filter")
    s.add_argument("--band", type=_pair, default=(300.0, 3400.0), help="design band in Hz, lo:hi")
    s.add_argument("--n-bins", type=int, default=DEFAULT_BINS)
    s.add_argument("--reg", type=float, default=DEFAULT_REG, help="ridge weight")
    s.add_argument("--shape", choices=("boxcar", "raised_cosine"), default="boxcar")
    s.add_argument("--half-width", type=float, help="main-lobe half width in degrees (default: one grid step)")
    s.add_argument("--rate", type=int, default=16000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_design_filters)

    def segment_args(s):
        s.add_argument("--segments", required=True, help="Kaldi segments file")
        s.add_argument("--recording", help="recording id (needed if the file lists several)")
        s.add_argument("--time-scale", type=_pair, help="tile segments into window:shift windows")

    s = sub.add_parser("extract-svector", help="s-vectors per segment (trailing partial frames dropped)")
    s.add_argument("--wav", required=True)
    s.add_argument("--bank", required=True)
    segment_args(s)
    s.add_argument("--segments-out", help="also write the segments used, one per row")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract_svector)

    s = sub.add_parser("diarize", help="cluster segments and emit RTTM")
    s.add_argument("--xvec")
    s.add_argument("--svec")
    segment_args(s)
    s.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    s.add_argument("--max-speakers", type=int, default=DEFAULT_MAX_SPEAKERS)
    s.add_argument("--overlaps", help="overlap timeline for the second-speaker stage")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_diarize)

    s = sub.add_parser("osd", help="detect overlapped speech")
    s.add_argument("--wav", required=True)
    s.add_argument("--weights")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--onset", type=float, default=DEFAULT_ONSET)
    s.add_argument("--offset", type=float, default=DEFAULT_OFFSET)
    s.add_argument("--min-on", type=float, default=DEFAULT_MIN_ON)
    s.add_argument("--min-off", type=float, default=DEFAULT_MIN_OFF)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_osd)

    s = sub.add_parser("init-afsb", help="write randomly initialised AFSB weights")
    s.add_argument("--channels", type=int, default=8)
    s.add_argument("--rate", type=int, default=16000)
    s.add_argument("--mode", choices=("shared", "discriminative"), default="discriminative")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_init_afsb)

    s = sub.add_parser("osd-score", help="DetER, accuracy, precision and recall of an overlap timeline")
    s.add_argument("--ref", required=True)
    s.add_argument("--hyp", required=True)
    s.add_argument("--duration", type=float, help="scored span [0, duration] (default: last offset)")
    s.set_defaults(func=cmd_osd_score)

    s = sub.add_parser("score", help="diarization error rate")
    s.add_argument("--ref", required=True)
    s.add_argument("--hyp", required=True)
    s.add_argument("--collar", type=float, default=DEFAULT_COLLAR)
    s.add_argument("--overlap", action=argparse.BooleanOptionalAction, default=True,
                   help="score overlapped reference speech")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("fuse", help="fuse RTTM hypotheses")
    s.add_argument("hypotheses", nargs="+")
    s.add_argument("--weights", type=_floats, help="comma-separated, default 1/rank")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fuse)

    s = sub.add_parser("simulate", help="render a scene file to WAV, RTTM, overlaps and segments")
    s.add_argument("--scene", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--encoding", choices=("float32", "pcm16"), default="float32")
    s.add_argument("--out-prefix", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pipeline", help="run a configured campaign")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"beamdiar: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, ValueError, OSError) as exc:
        print(f"beamdiar: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
