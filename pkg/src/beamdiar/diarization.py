"""Segmentation, similarity fusion and NME-SC clustering.

NME-SC (normalized maximum eigengap spectral clustering) picks, over a grid
of row-binarization fractions ``p``, the binarized affinity whose Laplacian
shows the largest eigengap relative to its spectral radius, and reads the
speaker count off that gap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.cluster import KMeans

from .annotation import Annotation, Region
from .exceptions import DegenerateEmbeddingError, DimensionError, NumericalError

DEFAULT_ALPHA = 0.95
DEFAULT_MAX_SPEAKERS = 8
DEFAULT_P_GRID = tuple(round(0.05 * i, 2) for i in range(1, 11))
PAPER_TIME_SCALES = ((1.0, 0.5), (1.2, 0.6), (1.5, 0.75))
KMEANS_ITERATIONS = 100

_TOL = 1e-9


@dataclass
class SegmentList:
    recording_id: str
    intervals: list = field(default_factory=list)
    time_scale: tuple | None = None

    def __post_init__(self):
        self.intervals = [(float(a), float(b)) for a, b in self.intervals]
        for a, b in self.intervals:
            if not b > a:
                raise ValueError(f"segment [{a}, {b}] has non-positive duration")
        if any(self.intervals[i][0] > self.intervals[i + 1][0] for i in range(len(self.intervals) - 1)):
            raise ValueError("segments must be sorted by onset")

    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)


@dataclass(frozen=True)
class ClusterLabels:
    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        if self.k < 1 or labels.min(initial=0) < 0 or labels.max(initial=-1) >= self.k:
            raise ValueError("labels must lie in [0, k) with k >= 1")
        if len(labels) and len(np.unique(labels)) != self.k:
            raise ValueError("every cluster must be non-empty")
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.labels)


def uniform_segments(vad, window: float, shift: float, recording_id: str = "") -> SegmentList:
    """Tile every speech interval with ``window``-long segments every ``shift`` seconds.

    Speech left after the last full window becomes one shorter segment that
    starts at the next shift position and ends with the interval; an interval
    shorter than ``window`` becomes a single segment.
    """
    if not window > 0 or not 0 < shift <= window:
        raise ValueError("need window > 0 and 0 < shift <= window")
    out = []
    for onset, offset in sorted((float(a), float(b)) for a, b in vad):
        if offset <= onset:
            continue
        length = offset - onset
        if length <= window + _TOL:
            out.append((onset, offset))
            continue
        n_full = int(math.floor((length - window) / shift + _TOL)) + 1
        for i in range(n_full):
            out.append((onset + i * shift, onset + i * shift + window))
        last_end = onset + (n_full - 1) * shift + window
        if offset - last_end > _TOL:
            out.append((onset + n_full * shift, offset))
    out.sort()
    return SegmentList(recording_id, out, (window, shift))


def cosine_similarity_matrix(embeddings) -> np.ndarray:
    """Pairwise cosine similarity with an exactly symmetric, unit diagonal."""
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim != 2:
        raise DimensionError("embeddings must be an n x D matrix")
    norms = np.linalg.norm(E, axis=1)
    zero = np.flatnonzero(norms == 0)
    if len(zero):
        raise DegenerateEmbeddingError(int(zero[0]))
    U = E / norms[:, None]
    S = np.clip(U @ U.T, -1.0, 1.0)
    S = 0.5 * (S + S.T)
    np.fill_diagonal(S, 1.0)
    return S


def late_fuse(A_x, A_s, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Convex combination ``alpha * A_x + (1 - alpha) * A_s``."""
    A_x = np.asarray(A_x, dtype=np.float64)
    A_s = np.asarray(A_s, dtype=np.float64)
    if A_x.shape != A_s.shape:
        raise DimensionError(f"similarity matrices differ in shape: {A_x.shape} vs {A_s.shape}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * A_x + (1.0 - alpha) * A_s


def binarize_affinity(A, p: float) -> np.ndarray:
    """Keep each row's ``ceil(p n)`` largest entries as 1, symmetrise with max.

    Entries tied with the ``ceil(p n)``-th largest value are kept too, so the
    result does not depend on the order of equal similarities.
    """
    A = np.asarray(A, dtype=np.float64)
    n = A.shape[0]
    keep = min(n, max(1, math.ceil(p * n - 1e-12)))
    kth = -np.partition(-A, keep - 1, axis=1)[:, keep - 1]
    B = (A >= kth[:, None]).astype(np.float64)
    return np.maximum(B, B.T)


def _laplacian_spectrum(B):
    L = np.diag(B.sum(axis=1)) - B
    try:
        w, V = linalg.eigh(L)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    return w, V


def _eigengap_stats(w, max_speakers):
    n = len(w)
    top = min(max_speakers, n - 1)
    lam_max = w[-1]
    if lam_max <= 1e-10 * max(1.0, n):
        # no edges at all: every segment is its own component, the gap ratio
        # is undefined and this p only wins when no other p has edges
        return min(n, max_speakers), 0.0
    gaps = np.diff(w[: top + 1])
    k = int(np.argmax(gaps)) + 1
    return k, float(gaps[k - 1] / lam_max)


def _farthest_point_init(X, k):
    idx = [0]
    d = np.linalg.norm(X - X[0], axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(d))
        idx.append(nxt)
        d = np.minimum(d, np.linalg.norm(X - X[nxt], axis=1))
    return X[idx]


def _canonical(labels):
    order = {}
    for lab in labels:
        order.setdefault(int(lab), len(order))
    return np.array([order[int(lab)] for lab in labels], dtype=int), len(order)


def spectral_partition(B, k: int) -> np.ndarray:
    """k-means on the row-normalised ``k`` smallest Laplacian eigenvectors."""
    n = B.shape[0]
    if k == 1:
        return np.zeros(n, dtype=int)
    _, V = _laplacian_spectrum(B)
    X = V[:, :k]
    X = X / np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-12)
    km = KMeans(n_clusters=k, init=_farthest_point_init(X, k), n_init=1, max_iter=KMEANS_ITERATIONS)
    labels, _ = _canonical(km.fit_predict(X))
    return labels


@dataclass(frozen=True)
class NmeResult:
    labels: ClusterLabels
    p: float
    ratios: dict


def nme_sc_detailed(A, max_speakers=DEFAULT_MAX_SPEAKERS, p_grid=DEFAULT_P_GRID) -> NmeResult:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError("affinity must be square")
    n = A.shape[0]
    if n < 2:
        raise DimensionError("NME-SC needs at least two segments")
    if max_speakers < 1:
        raise ValueError("max_speakers must be >= 1")
    p_grid = list(p_grid)
    if not p_grid or any(not 0 < p <= 1 for p in p_grid):
        raise ValueError("p_grid must be non-empty with values in (0, 1]")

    best = None
    ratios = {}
    for p in p_grid:
        B = binarize_affinity(A, p)
        w, _ = _laplacian_spectrum(B)
        k, g = _eigengap_stats(w, max_speakers)
        r = p / g if g > 0 else math.inf
        ratios[p] = r
        if best is None or r < best[0] or (math.isinf(r) and math.isinf(best[0]) and k > best[2]):
            best = (r, p, k, B)
    _, p_star, k_star, B_star = best
    labels = spectral_partition(B_star, k_star)
    labels, k = _canonical(labels)
    return NmeResult(ClusterLabels(labels, k), p_star, ratios)


def nme_sc(A, max_speakers: int = DEFAULT_MAX_SPEAKERS, p_grid=DEFAULT_P_GRID) -> ClusterLabels:
    """Cluster a similarity matrix with NME-SC, estimating the cluster count.

    Parameters
    ----------
    A : (n, n) array
        Symmetric segment similarity matrix.
    max_speakers : int
        Upper bound on the estimated number of clusters.
    p_grid : sequence of float
        Row-binarization fractions searched.

    Returns
    -------
    ClusterLabels
        Labels numbered by first appearance.
    """
    return nme_sc_detailed(A, max_speakers, p_grid).labels


class NMESpectralClustering(ClusterMixin, BaseEstimator):
    """NME-SC as a scikit-learn clusterer.

    With ``affinity="precomputed"`` ``X`` is an ``n x n`` similarity matrix;
    with ``affinity="cosine"`` it is an ``n x D`` embedding matrix.
    """

    def __init__(self, max_speakers=DEFAULT_MAX_SPEAKERS, p_grid=DEFAULT_P_GRID, affinity="precomputed"):
        self.max_speakers = max_speakers
        self.p_grid = p_grid
        self.affinity = affinity

    def fit(self, X, y=None):
        if self.affinity == "cosine":
            A = cosine_similarity_matrix(X)
        elif self.affinity == "precomputed":
            A = np.asarray(X, dtype=np.float64)
        else:
            raise ValueError(f"unknown affinity {self.affinity!r}")
        result = nme_sc_detailed(A, self.max_speakers, self.p_grid)
        self.labels_ = result.labels.labels
        self.n_clusters_ = result.labels.k
        self.p_ = result.p
        self.ratios_ = result.ratios
        return self


def segment_owners(intervals, labels):
    """Split the covered timeline into pieces owned by a single segment.

    Where segments overlap, a point belongs to the covering segment it lies
    deepest inside; for two overlapping windows that puts the cut at the
    midpoint of their overlap. Returns ``[(onset, offset, segment_index)]``.
    """
    iv = np.asarray(intervals, dtype=np.float64).reshape(-1, 2)
    labels = np.asarray(labels)
    if len(iv) == 0:
        return []
    order = np.lexsort((iv[:, 1], iv[:, 0]))
    on, off = iv[order, 0], iv[order, 1]
    cuts = set(iv.ravel().tolist())
    for ii in range(len(order)):
        jj = ii + 1
        while jj < len(order) and on[jj] < off[ii]:
            if labels[order[ii]] != labels[order[jj]]:
                lo, hi = on[jj], min(off[ii], off[jj])
                for t in (0.5 * (on[ii] + off[jj]), 0.5 * (on[jj] + off[ii])):
                    if lo < t < hi:
                        cuts.add(t)
            jj += 1
    bounds = np.array(sorted(cuts))
    centers = 0.5 * (bounds[:-1] + bounds[1:])
    max_len = float(np.max(off - on))
    hi_idx = np.searchsorted(on, centers, side="left")
    lo_idx = np.searchsorted(on, centers - max_len, side="left")
    pieces = []
    for p, c in enumerate(centers):
        cand = np.arange(lo_idx[p], hi_idx[p])
        if len(cand) == 0:
            continue
        depth = np.minimum(c - on[cand], off[cand] - c)
        best = int(np.argmax(depth))
        if depth[best] > 0:
            pieces.append((float(bounds[p]), float(bounds[p + 1]), int(order[cand[best]])))
    return pieces


def speaker_name(label) -> str:
    return f"spk{int(label)}"


def assign_primary_labels(segments: SegmentList, labels) -> Annotation:
    """Turn per-segment cluster labels into a speaker timeline."""
    lab = labels.labels if isinstance(labels, ClusterLabels) else np.asarray(labels, dtype=int)
    if len(lab) != len(segments):
        raise DimensionError(f"{len(segments)} segments but {len(lab)} labels")
    regions: list[Region] = []
    for lo, hi, i in segment_owners(segments.intervals, lab):
        name = speaker_name(lab[i])
        if regions and regions[-1].speaker == name and abs(regions[-1].offset - lo) <= _TOL:
            regions[-1] = Region(name, regions[-1].onset, hi)
        else:
            regions.append(Region(name, lo, hi))
    return Annotation(segments.recording_id, regions).normalized()
