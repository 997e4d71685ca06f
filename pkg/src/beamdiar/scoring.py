"""RTTM input/output and diarization error rate."""

from __future__ import annotations

import itertools
import logging
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .annotation import Annotation, Region, merge_intervals
from .exceptions import DataError, FormatError

logger = logging.getLogger(__name__)

DEFAULT_COLLAR = 0.25
EXHAUSTIVE_MAX_SPEAKERS = 8


def parse_rttm(path) -> list[Annotation]:
    """Read ``SPEAKER`` records grouped by file id, in order of first appearance."""
    groups: OrderedDict[str, list[Region]] = OrderedDict()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if fields[0] != "SPEAKER":
            logger.warning("%s:%d: skipping %s record", path, lineno, fields[0])
            continue
        if len(fields) < 8:
            raise FormatError(f"{path}:{lineno}: SPEAKER record needs at least 8 fields")
        try:
            onset, dur = float(fields[3]), float(fields[4])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if dur < 0:
            raise FormatError(f"{path}:{lineno}: negative duration {dur}")
        if dur == 0:
            logger.warning("%s:%d: skipping zero-duration region", path, lineno)
            groups.setdefault(fields[1], [])
            continue
        groups.setdefault(fields[1], []).append(Region(fields[7], onset, onset + dur))
    return [Annotation(rec, regions) for rec, regions in groups.items()]


def rttm_lines(annotations) -> list[str]:
    if isinstance(annotations, Annotation):
        annotations = [annotations]
    lines = []
    for ann in sorted(annotations, key=lambda a: a.recording_id):
        for r in sorted(ann.regions, key=lambda r: (r.onset, r.speaker, r.offset)):
            lines.append(
                f"SPEAKER {ann.recording_id} 1 {r.onset:.3f} {r.offset - r.onset:.3f} <NA> <NA> {r.speaker} <NA> <NA>"
            )
    return lines


def emit_rttm(annotations, path) -> None:
    """Write annotations sorted by (recording, onset, speaker), 3 decimals."""
    Path(path).write_text("".join(line + "\n" for line in rttm_lines(annotations)))


@dataclass(frozen=True)
class DerBreakdown:
    missed_speech: float
    false_alarm: float
    speaker_confusion: float
    total_reference_speech: float
    correct: float = 0.0

    @property
    def der(self) -> float:
        if self.total_reference_speech == 0:
            return 0.0 if self.missed_speech + self.false_alarm + self.speaker_confusion == 0 else float("inf")
        return (self.missed_speech + self.false_alarm + self.speaker_confusion) / self.total_reference_speech

    def __add__(self, other):
        return DerBreakdown(*(a + b for a, b in zip(self._fields(), other._fields())))

    def _fields(self):
        return (self.missed_speech, self.false_alarm, self.speaker_confusion,
                self.total_reference_speech, self.correct)


def _activity(ann: Annotation, speakers, bounds):
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    act = np.zeros((len(mids), len(speakers)), dtype=bool)
    for j, s in enumerate(speakers):
        for a, b in ann.speaker_intervals(s):
            act[:, j] |= (mids > a) & (mids < b)
    return act


def optimal_mapping(overlap: np.ndarray) -> dict[int, int]:
    """Reference-to-hypothesis speaker mapping maximising total overlap.

    Exhaustive search up to 8 speakers on the larger side, Hungarian above.
    """
    R, H = overlap.shape
    if R == 0 or H == 0:
        return {}
    n = max(R, H)
    if n > EXHAUSTIVE_MAX_SPEAKERS:
        rows, cols = linear_sum_assignment(overlap, maximize=True)
        return {int(r): int(c) for r, c in zip(rows, cols) if overlap[r, c] > 0}
    S = np.zeros((n, n))
    S[:R, :H] = overlap
    perms = np.array(list(itertools.permutations(range(n))))
    scores = S[np.arange(n), perms].sum(axis=1)
    best = perms[int(np.argmax(scores))]
    return {r: int(best[r]) for r in range(R) if best[r] < H and overlap[r, best[r]] > 0}


def compute_der(reference: Annotation, hypothesis: Annotation, collar: float = DEFAULT_COLLAR,
                score_overlap: bool = True) -> DerBreakdown:
    """Score a hypothesis against a reference.

    ``collar`` seconds on either side of every reference boundary are not
    scored. With ``score_overlap=False`` reference regions where two or more
    speakers talk are excluded too.
    """
    if reference.recording_id != hypothesis.recording_id:
        raise DataError(f"recording mismatch: {reference.recording_id!r} vs {hypothesis.recording_id!r}")
    ref, hyp = reference.normalized(), hypothesis.normalized()

    no_score = []
    if collar > 0:
        for r in ref:
            no_score += [(r.onset - collar, r.onset + collar), (r.offset - collar, r.offset + collar)]
    if not score_overlap:
        no_score += ref.overlap()
    no_score = merge_intervals(no_score)

    times = [t for ann in (ref, hyp) for r in ann for t in (r.onset, r.offset)]
    times += [t for iv in no_score for t in iv]
    if len(times) < 2:
        return DerBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
    bounds = np.unique(times)
    lengths = np.diff(bounds)
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    scored = np.ones(len(mids), dtype=bool)
    for a, b in no_score:
        scored &= ~((mids > a) & (mids < b))
    w = lengths * scored

    ref_spk, hyp_spk = ref.speakers, hyp.speakers
    R = _activity(ref, ref_spk, bounds)
    H = _activity(hyp, hyp_spk, bounds)
    overlap = (R.T.astype(float) * w) @ H.astype(float)
    mapping = optimal_mapping(overlap)

    n_ref = R.sum(axis=1)
    n_hyp = H.sum(axis=1)
    n_correct = np.zeros(len(mids))
    for r, h in mapping.items():
        n_correct += R[:, r] & H[:, h]
    missed = float(np.sum(w * np.maximum(n_ref - n_hyp, 0)))
    fa = float(np.sum(w * np.maximum(n_hyp - n_ref, 0)))
    conf = float(np.sum(w * (np.minimum(n_ref, n_hyp) - n_correct)))
    total = float(np.sum(w * n_ref))
    return DerBreakdown(missed, fa, conf, total, float(np.sum(w * n_correct)))


def score_corpus(references, hypotheses, collar=DEFAULT_COLLAR, score_overlap=True):
    """Per-recording breakdowns plus their pooled sum.

    Recordings missing from ``hypotheses`` are scored against an empty one.
    """
    hyp_by_id = {h.recording_id: h for h in hypotheses}
    per = OrderedDict()
    for ref in sorted(references, key=lambda a: a.recording_id):
        hyp = hyp_by_id.get(ref.recording_id, Annotation(ref.recording_id))
        per[ref.recording_id] = compute_der(ref, hyp, collar, score_overlap)
    total = DerBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
    for b in per.values():
        total = total + b
    return per, total

