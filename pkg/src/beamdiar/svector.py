"""Spatial embeddings: normalised per-direction beam energy (s-vectors)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, next_fast_len, rfft, rfftfreq
from sklearn.base import BaseEstimator, TransformerMixin

from .array import DirectionGrid
from .exceptions import BoundsError, DimensionError, DurationError
from .fsb import DEFAULT_BAND, FilterBank
from .signal import MultiChannelAudio

MIN_DURATION = 0.05


@dataclass(frozen=True)
class SVector:
    weights: np.ndarray
    grid: DirectionGrid

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or len(w) != self.grid.n_directions:
            raise DimensionError("s-vector length must equal the grid size")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("s-vector must be a probability vector")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.weights))

    @property
    def peak_angle(self) -> float:
        return float(self.grid.angles[self.peak_index])


class _BandEnergy:
    """Band-limited beam energies with the bank spectrum cached per FFT size.

    Every beam output is taken over its full linear-convolution support
    (``T + K - 1`` samples, so the filter tail is kept) and its energy inside
    ``band`` is read off the zero-padded spectrum by Parseval. FFT sizes are
    powers of two, so segments of similar length share one cached spectrum.
    """

    def __init__(self, bank: FilterBank, band, sample_rate: int):
        self.bank = bank
        self.band = band
        self.rate = sample_rate
        self._spectra = {}

    def _spectrum(self, nfft):
        if nfft not in self._spectra:
            freqs = rfftfreq(nfft, d=1.0 / self.rate)
            sel = np.flatnonzero((freqs >= self.band[0]) & (freqs <= self.band[1]))
            # one-sided spectrum: interior bins stand for two conjugate bins
            weight = np.where((sel == 0) | (sel == nfft // 2), 1.0, 2.0)
            A = rfft(self.bank.coefficients, n=nfft, axis=-1)[:, :, sel]
            self._spectra[nfft] = (sel, weight, np.ascontiguousarray(A.transpose(1, 0, 2)))
        return self._spectra[nfft]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        T, M = x.shape
        if M != self.bank.n_mics:
            raise DimensionError(f"audio has {M} channels, filter bank expects {self.bank.n_mics}")
        nfft = 1 << int(np.ceil(np.log2(T + self.bank.order - 1)))
        sel, weight, A = self._spectrum(nfft)
        X = rfft(x, n=nfft, axis=0)[sel]  # (F_band, M)
        Y = np.zeros(A.shape[1:], dtype=np.complex128)
        for m in range(M):
            Y += A[m] * X[:, m]
        return (np.abs(Y) ** 2 @ weight) / nfft


def beam_energies(audio: MultiChannelAudio, bank: FilterBank, band=DEFAULT_BAND) -> np.ndarray:
    """Energy of every beam output.

    With ``band=None`` this is ``sum_t y_i(t)^2`` over the length-``T``
    causal output of :func:`~beamdiar.fsb.apply_filter_and_sum`. Otherwise it
    is the energy of the full filtered output inside ``band`` (Hz).
    """
    x = audio.samples
    T, M = x.shape
    if M != bank.n_mics:
        raise DimensionError(f"audio has {M} channels, filter bank expects {bank.n_mics}")
    if band is not None:
        return _BandEnergy(bank, band, audio.sample_rate)(x)
    nfft = next_fast_len(T + bank.order - 1, real=True)
    X = rfft(x, n=nfft, axis=0)
    A = rfft(bank.coefficients, n=nfft, axis=-1)
    y = irfft(np.einsum("nmf,fm->nf", A, X), n=nfft, axis=-1)[:, :T]
    return np.sum(y**2, axis=1)


def _normalise(energy, grid) -> SVector:
    energy = np.maximum(energy, 0.0)
    total = energy.sum()
    if not total > 0:
        return SVector(np.full(grid.n_directions, 1.0 / grid.n_directions), grid)
    return SVector(energy / total, grid)


def _check_duration(audio):
    if audio.duration < MIN_DURATION - 1e-12:
        raise DurationError(f"segment of {audio.duration:.4f} s is shorter than {MIN_DURATION} s")


def extract_svector(audio: MultiChannelAudio, bank: FilterBank, band=DEFAULT_BAND) -> SVector:
    """Normalised beam-energy distribution over the bank's look directions.

    All-zero energy (silence) yields the uniform distribution.
    """
    if audio.channel_count != bank.n_mics:
        raise DimensionError(f"audio has {audio.channel_count} channels, filter bank expects {bank.n_mics}")
    _check_duration(audio)
    return _normalise(beam_energies(audio, bank, band), bank.grid)


def extract_svectors(audio: MultiChannelAudio, bank: FilterBank, segments, band=DEFAULT_BAND) -> list[SVector]:
    """One s-vector per ``(onset, offset)`` interval, in input order."""
    segments = list(segments)
    if audio.channel_count != bank.n_mics:
        raise DimensionError(f"audio has {audio.channel_count} channels, filter bank expects {bank.n_mics}")
    span = audio.duration
    tol = 0.5 / audio.sample_rate
    for i, (on, off) in enumerate(segments):
        if on < -tol or off > span + tol or off <= on:
            raise BoundsError(f"segment {i} [{on}, {off}] outside recording [0, {span}]")
    energy = _BandEnergy(bank, band, audio.sample_rate) if band is not None else None
    out = []
    for on, off in segments:
        seg = audio.crop(on, off)
        _check_duration(seg)
        E = energy(seg.samples) if energy is not None else beam_energies(seg, bank, None)
        out.append(_normalise(E, bank.grid))
    return out


class SVectorExtractor(TransformerMixin, BaseEstimator):
    """Map multi-channel segments to s-vectors.

    ``transform`` accepts an iterable of :class:`MultiChannelAudio` (or
    ``T x M`` arrays at ``sample_rate``) and returns an ``(n, N)`` matrix.
    """

    def __init__(self, bank=None, band=DEFAULT_BAND, sample_rate=16000):
        self.bank = bank
        self.band = band
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        if self.bank is None:
            raise ValueError("SVectorExtractor needs a FilterBank")
        self.n_features_out_ = self.bank.n_directions
        return self

    def transform(self, X):
        rows = []
        for seg in X:
            if not isinstance(seg, MultiChannelAudio):
                seg = MultiChannelAudio(seg, self.sample_rate)
            rows.append(extract_svector(seg, self.bank, self.band).weights)
        return np.array(rows).reshape(len(rows), self.bank.n_directions)
