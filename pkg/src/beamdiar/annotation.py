"""Speaker annotations and interval arithmetic."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

EPS = 1e-9


class Region(NamedTuple):
    speaker: str
    onset: float
    offset: float

    @property
    def duration(self) -> float:
        return self.offset - self.onset


def merge_intervals(intervals, eps=EPS) -> list[tuple[float, float]]:
    """Sort and merge overlapping or touching ``(onset, offset)`` pairs."""
    items = sorted((float(a), float(b)) for a, b in intervals if b > a)
    out: list[list[float]] = []
    for a, b in items:
        if out and a <= out[-1][1] + eps:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def intersect_intervals(xs, ys) -> list[tuple[float, float]]:
    """Intersection of two merged interval lists."""
    xs, ys = merge_intervals(xs), merge_intervals(ys)
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        a = max(xs[i][0], ys[j][0])
        b = min(xs[i][1], ys[j][1])
        if b > a:
            out.append((a, b))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def subtract_intervals(xs, ys) -> list[tuple[float, float]]:
    """Parts of ``xs`` not covered by ``ys``."""
    out = []
    ys = merge_intervals(ys)
    for a, b in merge_intervals(xs):
        cur = a
        for c, d in ys:
            if d <= cur or c >= b:
                continue
            if c > cur:
                out.append((cur, c))
            cur = max(cur, d)
            if cur >= b:
                break
        if cur < b:
            out.append((cur, b))
    return out


def total_duration(intervals) -> float:
    return float(sum(b - a for a, b in merge_intervals(intervals)))


@dataclass
class Annotation:
    """Speaker regions of one recording.

    Regions of different speakers may overlap in time; :meth:`normalized`
    merges overlapping or touching regions of the same speaker.
    """

    recording_id: str
    regions: list[Region] = field(default_factory=list)

    def __post_init__(self):
        regions = []
        for r in self.regions:
            r = Region(str(r[0]), float(r[1]), float(r[2]))
            if not r.offset > r.onset:
                raise ValueError(f"region {r} has non-positive duration")
            regions.append(r)
        self.regions = regions

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)

    @property
    def speakers(self) -> list[str]:
        return sorted({r.speaker for r in self.regions})

    def speaker_intervals(self, speaker) -> list[tuple[float, float]]:
        return merge_intervals((r.onset, r.offset) for r in self.regions if r.speaker == speaker)

    def normalized(self) -> "Annotation":
        regions = [Region(s, a, b) for s in self.speakers for a, b in self.speaker_intervals(s)]
        regions.sort(key=lambda r: (r.onset, r.speaker, r.offset))
        return Annotation(self.recording_id, regions)

    def speech(self) -> list[tuple[float, float]]:
        return merge_intervals((r.onset, r.offset) for r in self.regions)

    def overlap(self) -> list[tuple[float, float]]:
        """Time where two or more distinct speakers are active."""
        bounds, counts = self.count_function()
        return merge_intervals(
            (bounds[i], bounds[i + 1]) for i in range(len(counts)) if counts[i] >= 2
        )

    def count_function(self):
        """Elementary boundaries and speaker count on each piece between them."""
        norm = self.normalized()
        bounds = np.unique([t for r in norm for t in (r.onset, r.offset)])
        if len(bounds) < 2:
            return bounds, np.zeros(0, dtype=int)
        mids = 0.5 * (bounds[:-1] + bounds[1:])
        counts = np.zeros(len(mids), dtype=int)
        for r in norm:
            counts += (mids > r.onset) & (mids < r.offset)
        return bounds, counts

    def labels_at(self, t: float) -> frozenset:
        return frozenset(r.speaker for r in self.regions if r.onset <= t < r.offset)

    def renamed(self, mapping) -> "Annotation":
        return Annotation(self.recording_id, [Region(mapping.get(r.speaker, r.speaker), r.onset, r.offset)
                                              for r in self.regions])

    def end(self) -> float:
        return max((r.offset for r in self.regions), default=0.0)


def same_label_function(a: Annotation, b: Annotation, up_to_renaming=True, tol=1e-6) -> bool:
    """True when both annotations assign the same speaker set at every instant.

    With ``up_to_renaming`` speakers of ``a`` are first matched to the
    speaker of ``b`` they share the most time with.
    """
    na, nb = a.normalized(), b.normalized()
    if up_to_renaming:
        mapping = {}
        for s in na.speakers:
            shared = [(total_duration(intersect_intervals(na.speaker_intervals(s), nb.speaker_intervals(t))), t)
                      for t in nb.speakers]
            mapping[s] = max(shared)[1] if shared else s
        if len(set(mapping.values())) != len(mapping):
            return False
        na = na.renamed(mapping).normalized()
    if na.speakers != nb.speakers:
        return False
    for s in na.speakers:
        xs, ys = na.speaker_intervals(s), nb.speaker_intervals(s)
        if total_duration(subtract_intervals(xs, ys)) > tol or total_duration(subtract_intervals(ys, xs)) > tol:
            return False
    return True
