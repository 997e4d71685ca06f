"""Overlap-aware fusion of diarization hypotheses (DOVER-Lap style).

Hypotheses are first brought into one label space by greedy maximum-overlap
matching, then every elementary region between boundaries takes the
``round(weighted mean speaker count)`` labels with the most weighted votes.
"""

from __future__ import annotations

import logging
from collections import OrderedDict

import numpy as np

from .annotation import Annotation, Region
from .exceptions import DataError
from .scoring import emit_rttm, parse_rttm

logger = logging.getLogger(__name__)


def rank_weights(n: int) -> np.ndarray:
    """``1 / rank`` weights, normalised to sum to one."""
    w = 1.0 / np.arange(1, n + 1)
    return w / w.sum()


def _normalise_weights(weights, n):
    if weights is None:
        return rank_weights(n)
    w = np.asarray(weights, dtype=np.float64)
    if len(w) != n or np.any(w <= 0):
        raise ValueError("need one positive weight per hypothesis")
    return w / w.sum()


def _overlap_duration(xs, ys):
    total = 0.0
    i = j = 0
    while i < len(xs) and j < len(ys):
        lo = max(xs[i][0], ys[j][0])
        hi = min(xs[i][1], ys[j][1])
        if hi > lo:
            total += hi - lo
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return total


def map_labels(hypotheses) -> tuple[list[Annotation], list[str]]:
    """Rename speakers of every hypothesis into a shared label space.

    The first hypothesis seeds the anchor. Each later one is matched greedily,
    largest overlap first, against the time accumulated by each shared label
    over all hypotheses mapped so far; unmatched speakers open new labels.

    Returns the relabelled hypotheses (speaker names are shared label ids
    as strings ``"0"``, ``"1"``, ...) and the display name of each label,
    taken from the hypothesis that introduced it.
    """
    hypotheses = [h.normalized() for h in hypotheses]
    anchor: list[list[list]] = []  # per label id: one interval list per mapped hypothesis
    names: list[str] = []
    mapped = []
    for h in hypotheses:
        speakers = h.speakers
        ivs = {s: h.speaker_intervals(s) for s in speakers}
        pairs = []
        for s in speakers:
            for lab, acc in enumerate(anchor):
                d = sum(_overlap_duration(ivs[s], iv) for iv in acc)
                if d > 0:
                    pairs.append((-d, speakers.index(s), lab))
        pairs.sort()
        assign: dict[str, int] = {}
        used: set[int] = set()
        for _, si, lab in pairs:
            s = speakers[si]
            if s in assign or lab in used:
                continue
            assign[s] = lab
            used.add(lab)
        for s in speakers:
            if s not in assign:
                assign[s] = len(anchor)
                anchor.append([])
                names.append(s if s not in names else f"{s}_{len(names)}")
        for s in speakers:
            anchor[assign[s]].append(ivs[s])
        mapped.append(h.renamed({s: str(assign[s]) for s in speakers}))
    return mapped, names


def vote(mapped, weights=None, names=None) -> Annotation:
    """Weighted overlap-aware vote over hypotheses sharing one label space.

    ``k = floor(weighted mean count + 0.5)``; vote ties go to the lower label id.
    """
    mapped = list(mapped)
    if not mapped:
        raise ValueError("nothing to vote on")
    w = _normalise_weights(weights, len(mapped))
    rec = mapped[0].recording_id
    bounds = np.unique([t for h in mapped for r in h for t in (r.onset, r.offset)])
    if len(bounds) < 2:
        return Annotation(rec)
    labels = sorted({int(r.speaker) for h in mapped for r in h})
    mids = 0.5 * (bounds[:-1] + bounds[1:])
    mass = np.zeros((len(mids), max(labels) + 1))
    counts = np.zeros(len(mids))
    for wi, h in zip(w, mapped):
        act = np.zeros((len(mids), mass.shape[1]), dtype=bool)
        for r in h:
            act[:, int(r.speaker)] |= (mids > r.onset) & (mids < r.offset)
        mass += wi * act
        counts += wi * act.sum(axis=1)
    k_hat = np.floor(counts + 0.5 + 1e-9).astype(int)

    regions = []
    for p in range(len(mids)):
        if k_hat[p] == 0:
            continue
        order = sorted((lab for lab in range(mass.shape[1]) if mass[p, lab] > 0), key=lambda lab: (-mass[p, lab], lab))
        for lab in order[: k_hat[p]]:
            name = names[lab] if names else str(lab)
            regions.append(Region(name, bounds[p], bounds[p + 1]))
    return Annotation(rec, regions).normalized()


def fuse(hypotheses, weights=None) -> Annotation:
    """Fuse hypotheses of one recording; empty ones are dropped with a warning."""
    hypotheses = list(hypotheses)
    if len(hypotheses) < 2:
        raise ValueError("fusion needs at least two hypotheses")
    if len({h.recording_id for h in hypotheses}) != 1:
        raise DataError("hypotheses belong to different recordings")
    w = _normalise_weights(weights, len(hypotheses))
    keep = [i for i, h in enumerate(hypotheses) if len(h)]
    for i in range(len(hypotheses)):
        if i not in keep:
            logger.warning("hypothesis %d of %s is empty; excluded from fusion", i, hypotheses[i].recording_id)
    if not keep:
        return Annotation(hypotheses[0].recording_id)
    mapped, names = map_labels([hypotheses[i] for i in keep])
    return vote(mapped, w[keep], names)


def fuse_campaign(rttm_paths, weights=None, out=None) -> list[Annotation]:
    """Fuse several RTTM files recording by recording.

    Every file must cover the same recordings.
    """
    rttm_paths = list(rttm_paths)
    if len(rttm_paths) < 2:
        raise ValueError("fusion needs at least two RTTM files")
    systems = [OrderedDict((a.recording_id, a) for a in parse_rttm(p)) for p in rttm_paths]
    ids = [set(s) for s in systems]
    if any(i != ids[0] for i in ids[1:]):
        union = set().union(*ids)
        lines = [f"{p}: missing {sorted(union - i)}" for p, i in zip(rttm_paths, ids) if union - i]
        raise DataError("recording-id sets differ:\n" + "\n".join(lines))
    fused = [fuse([s[rec] for s in systems], weights) for rec in sorted(ids[0])]
    if out is not None:
        emit_rttm(fused, out)
    return fused

