"""Overlapped speech detection.

Stage one turns multi-channel audio into frame features with an attention
filter-and-sum (AFSB) front end, scores each frame with a pluggable encoder
and decodes the scores into overlap intervals. Stage two gives speech
regions inside those intervals a second speaker label.

The AFSB forward pass per channel is: sinc band-pass filterbank, ``|.|``,
strided convolutions with leaky ReLU. A squeeze-and-excitation block gates
the channel streams, and a 1x1 kernel sums them into one stream, the
learnable counterpart of the filter-and-sum beamformer's sum over mics.
Only the forward pass lives here; trained weights come from files.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.linear_model import LogisticRegression

from .annotation import Annotation, Region, intersect_intervals, merge_intervals, subtract_intervals, total_duration
from .diarization import ClusterLabels, SegmentList, segment_owners, speaker_name
from .exceptions import DataError, DimensionError, FormatError
from .formats import read_intervals
from .signal import MultiChannelAudio

logger = logging.getLogger(__name__)

AFSB_MAGIC = b"AFSB"
AFSB_VERSION = 1
LEAKY_SLOPE = 0.01
DEFAULT_ONSET = 0.7
DEFAULT_OFFSET = 0.6
DEFAULT_MIN_ON = 0.1
DEFAULT_MIN_OFF = 0.1
METRIC_FRAME_RATE = 100
GATE_LOGIT_LIMIT = 36.0


class ContractViolationError(DataError):
    """A pluggable component returned values outside its contract."""


# -- configuration and weights ------------------------------------------------


@dataclass(frozen=True)
class AfsbConfig:
    n_channels: int = 8
    sample_rate: int = 16000
    n_sinc: int = 80
    sinc_kernel: int = 251
    sinc_stride: int = 10
    conv_layers: tuple = ((60, 5, 4), (60, 5, 4))
    weight_mode: str = "discriminative"
    se_reduction: int = 2

    def __post_init__(self):
        object.__setattr__(self, "conv_layers", tuple(tuple(int(v) for v in layer) for layer in self.conv_layers))
        if self.n_channels < 1 or self.n_sinc < 1 or self.sinc_kernel < 1 or self.sinc_stride < 1:
            raise ValueError("channel, filter, kernel and stride counts must be positive")
        if self.weight_mode not in ("shared", "discriminative"):
            raise ValueError("weight_mode must be 'shared' or 'discriminative'")
        if self.se_reduction < 1 or self.n_channels % self.se_reduction:
            raise ValueError("se_reduction must divide the channel count")
        for out, k, s in self.conv_layers:
            if min(out, k, s) < 1:
                raise ValueError(f"bad conv layer {(out, k, s)}")

    @property
    def hop(self) -> int:
        hop = self.sinc_stride
        for _, _, s in self.conv_layers:
            hop *= s
        return hop

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop

    @property
    def feature_dim(self) -> int:
        return self.conv_layers[-1][0] if self.conv_layers else self.n_sinc

    @property
    def weight_sets(self) -> int:
        return self.n_channels if self.weight_mode == "discriminative" else 1

    @property
    def bottleneck(self) -> int:
        return self.n_channels // self.se_reduction

    def n_frames(self, n_samples: int) -> int:
        t = (n_samples - self.sinc_kernel) // self.sinc_stride + 1
        for _, k, s in self.conv_layers:
            if t < k:
                return 0
            t = (t - k) // s + 1
        return max(t, 0)


def _mel(hz):
    return 2595 * np.log10(1 + np.asarray(hz) / 700.0)


def _inv_mel(mel):
    return 700 * (10 ** (np.asarray(mel) / 2595) - 1)


def mel_cutoffs(n_filters: int, sample_rate: int, low_hz: float = 30.0) -> np.ndarray:
    """Mel-spaced ``(low, high)`` pairs in Hz, shape ``(n_filters, 2)``."""
    high = sample_rate / 2 - 100.0
    pts = _inv_mel(np.linspace(_mel(low_hz), _mel(high), n_filters + 1))
    return np.stack([pts[:-1], pts[1:]], axis=1)


@dataclass(frozen=True)
class LogisticFrameEncoder:
    """Frame scorer ``sigmoid(((f - mean) / scale) . coef + bias)``."""

    coef: np.ndarray
    bias: float = 0.0
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def __post_init__(self):
        coef = np.asarray(self.coef, dtype=np.float64).ravel()
        object.__setattr__(self, "coef", coef)
        d = len(coef)
        object.__setattr__(self, "mean", np.zeros(d) if self.mean is None else np.asarray(self.mean, float).ravel())
        object.__setattr__(self, "scale", np.ones(d) if self.scale is None else np.asarray(self.scale, float).ravel())
        object.__setattr__(self, "bias", float(self.bias))

    @classmethod
    def inactive(cls, dim: int) -> "LogisticFrameEncoder":
        """Untrained head: constant probability sigmoid(-6), below any sane threshold."""
        return cls(np.zeros(dim), -6.0)

    def predict_proba(self, features) -> np.ndarray:
        f = np.asarray(features, dtype=np.float64)
        z = ((f - self.mean) / self.scale) @ self.coef + self.bias
        return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class AfsbWeights:
    """AFSB parameters.

    ``sinc``: ``(S, F, 2)`` cutoffs in Hz; ``conv``: per layer ``(S, out, in, k)``;
    ``se_w1``: ``(M / r, M)``; ``se_w2``: ``(M, M / r)``; ``reduce``: ``(M,)``.
    ``S`` is ``M`` in discriminative mode and 1 in shared mode.
    """

    config: AfsbConfig
    sinc: np.ndarray
    conv: tuple
    se_w1: np.ndarray
    se_w2: np.ndarray
    reduce: np.ndarray
    encoder: LogisticFrameEncoder | None = None

    def __post_init__(self):
        cfg = self.config
        S = cfg.weight_sets
        sinc = np.asarray(self.sinc, dtype=np.float64)
        if sinc.shape != (S, cfg.n_sinc, 2):
            raise DimensionError(f"sinc cutoffs must be {(S, cfg.n_sinc, 2)}, got {sinc.shape}")
        nyq = cfg.sample_rate / 2
        if not (np.all(sinc[..., 0] > 0) and np.all(sinc[..., 0] < sinc[..., 1]) and np.all(sinc[..., 1] < nyq)):
            raise ValueError("sinc cutoffs must satisfy 0 < low < high < Nyquist")
        conv = tuple(np.asarray(w, dtype=np.float64) for w in self.conv)
        c_in = cfg.n_sinc
        if len(conv) != len(cfg.conv_layers):
            raise DimensionError("conv weight count does not match the layer config")
        for w, (out, k, _) in zip(conv, cfg.conv_layers):
            if w.shape != (S, out, c_in, k):
                raise DimensionError(f"conv weight must be {(S, out, c_in, k)}, got {w.shape}")
            c_in = out
        se_w1 = np.asarray(self.se_w1, dtype=np.float64)
        se_w2 = np.asarray(self.se_w2, dtype=np.float64)
        reduce = np.asarray(self.reduce, dtype=np.float64).ravel()
        M, B = cfg.n_channels, cfg.bottleneck
        if se_w1.shape != (B, M) or se_w2.shape != (M, B) or reduce.shape != (M,):
            raise DimensionError("SE or reduction weights do not match the channel count")
        arrays = [sinc, se_w1, se_w2, reduce, *conv]
        if not all(np.all(np.isfinite(a)) for a in arrays):
            raise ValueError("AFSB weights must be finite")
        if self.encoder is not None and len(self.encoder.coef) != cfg.feature_dim:
            raise DimensionError("encoder dimension does not match the AFSB feature size")
        for name, val in (("sinc", sinc), ("conv", conv), ("se_w1", se_w1), ("se_w2", se_w2), ("reduce", reduce)):
            object.__setattr__(self, name, val)

    @classmethod
    def initialize(cls, config: AfsbConfig | None = None, seed: int = 0) -> "AfsbWeights":
        """Random He-style kernels, mel-spaced sinc cutoffs, near-uniform reduction."""
        cfg = config or AfsbConfig()
        rng = np.random.default_rng(seed)
        S = cfg.weight_sets
        sinc = np.broadcast_to(mel_cutoffs(cfg.n_sinc, cfg.sample_rate), (S, cfg.n_sinc, 2)).copy()
        conv = []
        c_in = cfg.n_sinc
        for out, k, _ in cfg.conv_layers:
            conv.append(rng.standard_normal((S, out, c_in, k)) * np.sqrt(2.0 / (c_in * k)))
            c_in = out
        M, B = cfg.n_channels, cfg.bottleneck
        se_w1 = rng.standard_normal((B, M)) / np.sqrt(M)
        se_w2 = rng.standard_normal((M, B)) / np.sqrt(B)
        reduce = (1.0 + 0.1 * rng.standard_normal(M)) / M
        return cls(cfg, sinc, tuple(conv), se_w1, se_w2, reduce)

    def with_encoder(self, encoder) -> "AfsbWeights":
        return replace(self, encoder=encoder)

    def permuted(self, perm) -> "AfsbWeights":
        """Weights for channel order ``perm`` (discriminative mode only)."""
        perm = np.asarray(perm)
        if self.config.weight_mode != "discriminative":
            raise ValueError("only per-channel weights can be permuted")
        return replace(
            self,
            sinc=self.sinc[perm],
            conv=tuple(w[perm] for w in self.conv),
            se_w1=self.se_w1[:, perm],
            se_w2=self.se_w2[perm],
            reduce=self.reduce[perm],
        )

    def save(self, path) -> None:
        cfg = self.config
        ints = [AFSB_VERSION, cfg.n_channels, cfg.sample_rate, cfg.n_sinc, cfg.sinc_kernel, cfg.sinc_stride,
                1 if cfg.weight_mode == "discriminative" else 0, cfg.se_reduction, len(cfg.conv_layers)]
        for layer in cfg.conv_layers:
            ints += list(layer)
        blobs = [self.sinc, *self.conv, self.se_w1, self.se_w2, self.reduce]
        with open(path, "wb") as fh:
            fh.write(AFSB_MAGIC)
            fh.write(struct.pack(f"<{len(ints)}I", *ints))
            for b in blobs:
                fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
            if self.encoder is None:
                fh.write(struct.pack("<I", 0))
            else:
                e = self.encoder
                fh.write(struct.pack("<2I", 1, len(e.coef)))
                for b in (e.mean, e.scale, e.coef, np.array([e.bias])):
                    fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "AfsbWeights":
        raw = Path(path).read_bytes()
        pos = 0

        def take_ints(n):
            nonlocal pos
            if pos + 4 * n > len(raw):
                raise FormatError(f"{path}: truncated AFSB file")
            vals = struct.unpack_from(f"<{n}I", raw, pos)
            pos += 4 * n
            return vals

        def take_floats(shape):
            nonlocal pos
            n = int(np.prod(shape))
            if pos + 8 * n > len(raw):
                raise FormatError(f"{path}: truncated AFSB file")
            arr = np.frombuffer(raw, dtype="<f8", count=n, offset=pos).reshape(shape).astype(np.float64)
            pos += 8 * n
            return arr

        if raw[:4] != AFSB_MAGIC:
            raise FormatError(f"{path}: not an AFSB weights file (bad magic)")
        pos = 4
        version, M, rate, F, K, stride, mode, red, n_layers = take_ints(9)
        if version != AFSB_VERSION:
            raise FormatError(f"{path}: unsupported AFSB version {version}")
        layers = tuple(take_ints(3) for _ in range(n_layers))
        try:
            cfg = AfsbConfig(M, rate, F, K, stride, layers, "discriminative" if mode else "shared", red)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc
        S = cfg.weight_sets
        sinc = take_floats((S, F, 2))
        conv, c_in = [], F
        for out, k, _ in layers:
            conv.append(take_floats((S, out, c_in, k)))
            c_in = out
        se_w1 = take_floats((cfg.bottleneck, M))
        se_w2 = take_floats((M, cfg.bottleneck))
        reduce = take_floats((M,))
        (has_enc,) = take_ints(1)
        encoder = None
        if has_enc:
            (d,) = take_ints(1)
            mean, scale, coef = take_floats((d,)), take_floats((d,)), take_floats((d,))
            encoder = LogisticFrameEncoder(coef, float(take_floats((1,))[0]), mean, scale)
        if pos != len(raw):
            raise FormatError(f"{path}: {len(raw) - pos} trailing bytes")
        try:
            return cls(cfg, sinc, tuple(conv), se_w1, se_w2, reduce, encoder)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from exc


# -- forward pass -------------------------------------------------------------


def sinc_filters(cutoffs, kernel: int, sample_rate: int) -> np.ndarray:
    """Hamming-windowed band-pass kernels with unit passband gain, ``(F, kernel)``."""
    cutoffs = np.asarray(cutoffs, dtype=np.float64)
    n = np.arange(kernel) - (kernel - 1) / 2.0
    lo = cutoffs[:, 0:1] / sample_rate
    hi = cutoffs[:, 1:2] / sample_rate
    h = 2 * hi * np.sinc(2 * hi * n) - 2 * lo * np.sinc(2 * lo * n)
    return h * np.hamming(kernel)


def _strided_conv(x, w, stride):
    """Valid 1-D convolution (cross-correlation). ``x``: ``(T, C_in)``; ``w``: ``(out, C_in, k)``."""
    out, c_in, k = w.shape
    if x.shape[0] < k:
        return np.zeros((0, out))
    win = sliding_window_view(x, k, axis=0)[::stride]  # (T', C_in, k)
    return win.reshape(len(win), c_in * k) @ w.reshape(out, c_in * k).T


def _leaky_relu(x):
    return np.where(x > 0, x, LEAKY_SLOPE * x)


def channel_features(signal, weights: AfsbWeights, channel: int = 0) -> np.ndarray:
    """Single-channel path (sinc, conv stack) before gating, ``(T_f, D)``."""
    cfg = weights.config
    s = channel if cfg.weight_mode == "discriminative" else 0
    x = np.asarray(signal, dtype=np.float64)
    if len(x) < cfg.sinc_kernel:
        return np.zeros((0, cfg.feature_dim))
    filt = sinc_filters(weights.sinc[s], cfg.sinc_kernel, cfg.sample_rate)
    h = np.abs(sliding_window_view(x, cfg.sinc_kernel)[:: cfg.sinc_stride] @ filt.T)
    for w, (_, _, stride) in zip(weights.conv, cfg.conv_layers):
        h = _leaky_relu(_strided_conv(h, w[s], stride))
    return h


def _sorted_sum(x, axis):
    # summation order fixed by value and memory layout, so permuting the
    # summed axis is bit-exact
    x = np.ascontiguousarray(np.sort(np.moveaxis(x, axis, -1), axis=-1))
    return np.sum(x, axis=-1)


def se_gates(streams, weights: AfsbWeights) -> np.ndarray:
    """Squeeze-and-excitation gates in ``(0, 1)`` from ``(M, T_f, D)`` streams."""
    pooled = streams.mean(axis=(1, 2)) if streams.size else np.zeros(streams.shape[0])
    hidden = np.maximum(_sorted_sum(weights.se_w1 * pooled[None, :], axis=1), 0.0)
    z = _sorted_sum(weights.se_w2 * hidden[None, :], axis=1)
    # beyond |z| = 36 the float64 sigmoid rounds to exactly 0 or 1
    z = np.clip(z, -GATE_LOGIT_LIMIT, GATE_LOGIT_LIMIT)
    return 1.0 / (1.0 + np.exp(-z))


def afsb_forward(audio, weights: AfsbWeights, gates=None, return_gates: bool = False):
    """Frame features ``(T_f, D)`` of a multi-channel recording.

    ``gates`` overrides the SE output (for analysis with frozen gating).
    """
    cfg = weights.config
    x = audio.samples if isinstance(audio, MultiChannelAudio) else np.asarray(audio, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != cfg.n_channels:
        raise DimensionError(f"AFSB expects {cfg.n_channels} channels, got array of shape {x.shape}")
    if cfg.n_frames(x.shape[0]) < 1:
        raise DimensionError(f"{x.shape[0]} samples is too short for one AFSB frame")
    streams = np.stack([channel_features(x[:, m], weights, m) for m in range(cfg.n_channels)])
    g = se_gates(streams, weights) if gates is None else np.asarray(gates, dtype=np.float64)
    weighted = (weights.reduce * g)[:, None, None] * streams
    features = _sorted_sum(weighted, axis=0)
    return (features, g) if return_gates else features


class AfsbTransformer(TransformerMixin, BaseEstimator):
    """``transform`` maps a ``T x M`` recording to AFSB frame features."""

    def __init__(self, weights=None):
        self.weights = weights

    def fit(self, X=None, y=None):
        self.weights_ = self.weights if self.weights is not None else AfsbWeights.initialize()
        return self

    def transform(self, X):
        return afsb_forward(X, self.weights_)


# -- decoding -----------------------------------------------------------------


def decode_overlaps(probabilities, frame_rate: float, onset=DEFAULT_ONSET, offset=DEFAULT_OFFSET,
                    min_on=DEFAULT_MIN_ON, min_off=DEFAULT_MIN_OFF, duration=None) -> list[tuple[float, float]]:
    """Hysteresis decoding of frame probabilities into intervals.

    A region opens when the probability exceeds ``onset`` and closes when it
    drops below ``offset``. Gaps shorter than ``min_off`` are bridged first,
    then regions shorter than ``min_on`` are dropped. Frame ``i`` spans
    ``[i, i + 1) / frame_rate``.
    """
    p = np.asarray(probabilities, dtype=np.float64).ravel()
    if p.size and (np.any(~np.isfinite(p)) or p.min() < 0 or p.max() > 1):
        raise ContractViolationError("frame probabilities must lie in [0, 1]")
    regions = []
    start = None
    for i, v in enumerate(p):
        if start is None and v > onset:
            start = i
        elif start is not None and v < offset:
            regions.append([start / frame_rate, i / frame_rate])
            start = None
    if start is not None:
        regions.append([start / frame_rate, len(p) / frame_rate])
    merged: list[list[float]] = []
    for a, b in regions:
        if merged and a - merged[-1][1] < min_off:
            merged[-1][1] = b
        else:
            merged.append([a, b])
    end = len(p) / frame_rate if duration is None else duration
    out = []
    for a, b in merged:
        a, b = max(0.0, a), min(end, b)
        if b - a >= min_on - 1e-9 and b > a:
            out.append((a, b))
    return out


def detect_overlap(audio, weights: AfsbWeights, encoder=None, onset=DEFAULT_ONSET, offset=DEFAULT_OFFSET,
                   min_on=DEFAULT_MIN_ON, min_off=DEFAULT_MIN_OFF) -> list[tuple[float, float]]:
    """Run AFSB, score frames with ``encoder`` and decode overlap intervals.

    ``encoder`` needs ``predict_proba(features) -> (T_f,)``; defaults to the
    encoder stored with the weights, else an inactive head.
    """
    feats = afsb_forward(audio, weights)
    encoder = encoder or weights.encoder or LogisticFrameEncoder.inactive(weights.config.feature_dim)
    probs = np.asarray(encoder.predict_proba(feats), dtype=np.float64).ravel()
    if probs.shape[0] != feats.shape[0]:
        raise ContractViolationError(f"encoder returned {probs.shape[0]} scores for {feats.shape[0]} frames")
    duration = audio.duration if isinstance(audio, MultiChannelAudio) else None
    return decode_overlaps(probs, weights.config.frame_rate, onset, offset, min_on, min_off, duration)


def frame_targets(intervals, n_frames: int, frame_rate: float) -> np.ndarray:
    centers = (np.arange(n_frames) + 0.5) / frame_rate
    y = np.zeros(n_frames, dtype=bool)
    for a, b in merge_intervals(intervals):
        y |= (centers >= a) & (centers < b)
    return y


class OverlapDetector(BaseEstimator):
    """AFSB front end plus logistic frame head.

    ``fit`` trains only the logistic head (AFSB stays frozen) from recordings
    and their reference overlap intervals; ``predict`` returns intervals.
    """

    def __init__(self, weights=None, onset=DEFAULT_ONSET, offset=DEFAULT_OFFSET, min_on=DEFAULT_MIN_ON,
                 min_off=DEFAULT_MIN_OFF, C=1.0):
        self.weights = weights
        self.onset = onset
        self.offset = offset
        self.min_on = min_on
        self.min_off = min_off
        self.C = C

    def _weights(self):
        return getattr(self, "weights_", None) or self.weights or AfsbWeights.initialize()

    def fit(self, X, y):
        weights = self._weights()
        feats, targets = [], []
        for audio, overlaps in zip(X, y):
            f = afsb_forward(audio, weights)
            feats.append(f)
            targets.append(frame_targets(overlaps, len(f), weights.config.frame_rate))
        F = np.concatenate(feats)
        Y = np.concatenate(targets)
        mean = F.mean(axis=0)
        scale = np.where(F.std(axis=0) > 0, F.std(axis=0), 1.0)
        if Y.all() or not Y.any():
            raise DataError("training data needs both overlapped and non-overlapped frames")
        clf = LogisticRegression(C=self.C, max_iter=1000).fit((F - mean) / scale, Y)
        enc = LogisticFrameEncoder(clf.coef_.ravel(), float(clf.intercept_[0]), mean, scale)
        self.weights_ = weights.with_encoder(enc)
        return self

    def predict_proba(self, audio):
        w = self._weights()
        enc = w.encoder or LogisticFrameEncoder.inactive(w.config.feature_dim)
        return enc.predict_proba(afsb_forward(audio, w))

    def predict(self, audio):
        return detect_overlap(audio, self._weights(), None, self.onset, self.offset, self.min_on, self.min_off)


def load_external_overlaps(path) -> list[tuple[float, float]]:
    """Read an ``onset offset`` file and merge overlapping lines."""
    return merge_intervals(read_intervals(path))


# -- second speaker -----------------------------------------------------------


def assign_second_speaker(annotation: Annotation, overlaps, segments: SegmentList, embeddings,
                          labels: ClusterLabels) -> Annotation:
    """Add a second speaker to speech inside ``overlaps``.

    Each piece of the timeline owned by a segment (see
    :func:`~beamdiar.diarization.segment_owners`) that falls inside an
    overlap interval gains the cluster whose centroid is the most
    cosine-similar to that segment's embedding among clusters not already
    speaking there. Speech outside overlaps is untouched.
    """
    overlaps = merge_intervals(overlaps)
    if not overlaps:
        return Annotation(annotation.recording_id, list(annotation.regions))
    if labels.k < 2:
        logger.warning("%s: only one cluster, overlaps left without second speaker", annotation.recording_id)
        return Annotation(annotation.recording_id, list(annotation.regions))
    E = np.asarray(embeddings, dtype=np.float64)
    if len(E) != len(segments) or len(labels) != len(segments):
        raise DimensionError("segments, embeddings and labels must have the same length")
    centroids = np.stack([E[labels.labels == c].mean(axis=0) for c in range(labels.k)])
    centroids /= np.maximum(np.linalg.norm(centroids, axis=1, keepdims=True), 1e-12)
    unit = E / np.maximum(np.linalg.norm(E, axis=1, keepdims=True), 1e-12)
    ranking = np.argsort(-(unit @ centroids.T), axis=1, kind="stable")

    speech = annotation.speech()
    added = []
    for lo, hi, seg in segment_owners(segments.intervals, labels.labels):
        for a, b in intersect_intervals(intersect_intervals([(lo, hi)], overlaps), speech):
            present = annotation.labels_at(0.5 * (a + b))
            for c in ranking[seg]:
                name = speaker_name(c)
                if name not in present:
                    added.append(Region(name, a, b))
                    break
    return Annotation(annotation.recording_id, list(annotation.regions) + added).normalized()


# -- metrics ------------------------------------------------------------------


@dataclass(frozen=True)
class DetectionMetrics:
    deter: float
    accuracy: float
    precision: float
    recall: float
    missed: float
    false_alarm: float
    reference_duration: float
    note: str = field(default="", compare=False)


def detection_metrics(reference, hypothesis, total, frame_rate: int = METRIC_FRAME_RATE) -> DetectionMetrics:
    """Overlap detection scores.

    ``deter`` is a ratio (missed + false-alarm overlap time over reference
    overlap time); accuracy, precision and recall are percentages over
    frames of ``1 / frame_rate`` seconds covering ``total``, which is a
    duration or an ``(onset, offset)`` span. Undefined ratios are NaN.
    """
    span = (0.0, float(total)) if np.isscalar(total) else (float(total[0]), float(total[1]))
    ref = merge_intervals(reference)
    hyp = merge_intervals(hypothesis)
    for name, tl in (("reference", ref), ("hypothesis", hyp)):
        if tl and (tl[0][0] < span[0] - 1e-9 or tl[-1][1] > span[1] + 1e-9):
            raise DataError(f"{name} timeline extends outside the scored span {span}")
    missed = total_duration(subtract_intervals(ref, hyp))
    fa = total_duration(subtract_intervals(hyp, ref))
    ref_dur = total_duration(ref)
    note = ""
    if ref_dur > 0:
        deter = (missed + fa) / ref_dur
    elif fa > 0:
        deter = float("inf")
        note = "reference has no overlap; DetER undefined for a non-empty hypothesis"
    else:
        deter = 0.0

    n = int(round((span[1] - span[0]) * frame_rate))
    centers = span[0] + (np.arange(n) + 0.5) / frame_rate
    r = np.zeros(n, dtype=bool)
    h = np.zeros(n, dtype=bool)
    for a, b in ref:
        r |= (centers >= a) & (centers < b)
    for a, b in hyp:
        h |= (centers >= a) & (centers < b)
    tp = np.sum(r & h)
    accuracy = 100.0 * np.mean(r == h) if n else float("nan")
    precision = 100.0 * tp / h.sum() if h.sum() else float("nan")
    recall = 100.0 * tp / r.sum() if r.sum() else float("nan")
    return DetectionMetrics(deter, float(accuracy), float(precision), float(recall), missed, fa, ref_dur, note)


