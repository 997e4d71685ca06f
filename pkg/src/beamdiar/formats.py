"""Plain-text file formats: embedding matrices, Kaldi segments, overlap lists."""

from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import numpy as np

from .exceptions import FormatError


def read_matrix(path) -> np.ndarray:
    """Read an ``n D`` header followed by ``n`` rows of ``D`` floats."""
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty matrix file")
    try:
        n, d = (int(v) for v in lines[0].split())
    except ValueError as exc:
        raise FormatError(f"{path}:1: header must be 'n D'") from exc
    if len(lines) - 1 != n:
        raise FormatError(f"{path}: header declares {n} rows, found {len(lines) - 1}")
    out = np.empty((n, d))
    for i, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != d:
            raise FormatError(f"{path}:{i + 2}: expected {d} values, got {len(parts)}")
        try:
            out[i] = [float(v) for v in parts]
        except ValueError as exc:
            raise FormatError(f"{path}:{i + 2}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise FormatError(f"{path}: non-finite values")
    return out


def write_matrix(path, matrix) -> None:
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if m.size == 0:
        m = m.reshape(0, m.shape[-1] if m.ndim == 2 else 0)
    rows = [f"{m.shape[0]} {m.shape[1]}"]
    rows += [" ".join(repr(float(v)) for v in row) for row in m]
    Path(path).write_text("\n".join(rows) + "\n")


def read_segments(path) -> "OrderedDict[str, list[tuple[str, float, float]]]":
    """Kaldi ``segments``: ``<utt-id> <rec-id> <onset> <offset>`` per line.

    Returns ``{rec_id: [(utt_id, onset, offset), ...]}`` sorted by onset.
    """
    out: OrderedDict[str, list] = OrderedDict()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 4:
            raise FormatError(f"{path}:{lineno}: expected '<utt> <rec> <onset> <offset>'")
        try:
            onset, offset = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if offset <= onset:
            raise FormatError(f"{path}:{lineno}: offset must exceed onset")
        out.setdefault(parts[1], []).append((parts[0], onset, offset))
    for rec in out:
        out[rec].sort(key=lambda r: (r[1], r[2]))
    return out


def write_segments(path, recording_id: str, intervals) -> None:
    lines = [
        f"{recording_id}-{int(round(on * 1000)):07d}-{int(round(off * 1000)):07d} {recording_id} {on:.3f} {off:.3f}"
        for on, off in intervals
    ]
    Path(path).write_text("".join(line + "\n" for line in lines))


def read_intervals(path) -> list[tuple[float, float]]:
    """``onset offset`` lines in seconds, unmerged; line numbers in errors."""
    out = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'onset offset'")
        try:
            onset, offset = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
        if offset <= onset:
            raise FormatError(f"{path}:{lineno}: offset {offset} must exceed onset {onset}")
        out.append((onset, offset))
    return out


def write_intervals(path, intervals) -> None:
    Path(path).write_text("".join(f"{on:.3f} {off:.3f}\n" for on, off in intervals))
