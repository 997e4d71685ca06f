"""Audio containers, WAV I/O, framing and the positive-frequency DFT."""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import get_window

from .exceptions import DimensionError, EmptyInputError, FormatError, UnsupportedFormatError

WINDOWS = ("rectangular", "hann")


@dataclass(frozen=True)
class MultiChannelAudio:
    """A ``T x M`` block of samples in ``[-1, 1]``.

    ``encoding`` remembers the on-disk sample format so that a loaded file
    can be written back without loss.
    """

    samples: np.ndarray
    sample_rate: int
    encoding: str = "float32"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise DimensionError(f"samples must be T x M with T, M >= 1, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise FormatError("samples contain non-finite values")
        if int(self.sample_rate) <= 0:
            raise FormatError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def channel_count(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def crop(self, onset: float, offset: float) -> "MultiChannelAudio":
        start = int(round(onset * self.sample_rate))
        stop = int(round(offset * self.sample_rate))
        return MultiChannelAudio(self.samples[start:stop], self.sample_rate, self.encoding)

    def scaled(self, factor: float) -> "MultiChannelAudio":
        return MultiChannelAudio(self.samples * factor, self.sample_rate, self.encoding)


@dataclass(frozen=True)
class FrameGrid:
    frame_length: int
    frame_shift: int
    window: str = "rectangular"

    def __post_init__(self):
        if not 0 < self.frame_shift <= self.frame_length:
            raise ValueError("need 0 < frame_shift <= frame_length")
        if self.window not in WINDOWS:
            raise ValueError(f"window must be one of {WINDOWS}")

    def window_values(self) -> np.ndarray:
        if self.window == "rectangular":
            return np.ones(self.frame_length)
        return get_window("hann", self.frame_length, fftbins=True)


@dataclass(frozen=True)
class Spectrum:
    """DFT samples at ``L`` positive frequencies ``pi * l / L``, ``l = 1..L``.

    The zero-frequency term is kept in ``dc`` so the frame can be rebuilt;
    ``frame_length`` is the length of the analysed frame.
    """

    bins: np.ndarray
    bin_frequencies: np.ndarray
    dc: float = 0.0
    frame_length: int = 0

    @property
    def n_bins(self) -> int:
        return len(self.bins)


def load_wav(path) -> MultiChannelAudio:
    """Read a PCM16 or float32 RIFF/WAVE file.

    Returns samples scaled to ``[-1, 1]`` (16-bit values divided by 32768)
    with the channel order as stored.
    """
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except ValueError as exc:
        msg = str(exc)
        if "Unknown wave file format" in msg or "not supported" in msg.lower() or "Unsupported" in msg:
            raise UnsupportedFormatError(f"{path}: {msg}") from exc
        raise FormatError(f"{path}: {msg}") from exc
    except (EOFError, OSError, wave.Error) as exc:
        raise FormatError(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
        encoding = "pcm16"
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
        encoding = "float32"
    else:
        raise UnsupportedFormatError(f"{path}: unsupported sample type {data.dtype}")
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] == 0:
        raise FormatError(f"{path}: no samples")
    return MultiChannelAudio(samples, rate, encoding)


def write_wav(path, audio: MultiChannelAudio, encoding: str | None = None) -> None:
    encoding = encoding or audio.encoding
    x = audio.samples
    if encoding == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype("<i2")
    elif encoding == "float32":
        data = x.astype("<f4")
    else:
        raise UnsupportedFormatError(f"cannot write encoding {encoding!r}")
    wavfile.write(str(path), audio.sample_rate, data)


def frame_signal(audio: MultiChannelAudio, grid: FrameGrid) -> np.ndarray:
    """Cut ``audio`` into windowed frames of shape ``(n_frames, frame_length, M)``.

    The trailing partial frame is dropped.
    """
    T = audio.n_samples
    if grid.frame_length > T:
        raise EmptyInputError(f"frame_length {grid.frame_length} exceeds signal length {T}")
    n_frames = (T - grid.frame_length) // grid.frame_shift + 1
    idx = np.arange(n_frames)[:, None] * grid.frame_shift + np.arange(grid.frame_length)[None, :]
    return audio.samples[idx] * grid.window_values()[None, :, None]


def overlap_add(frames: np.ndarray, grid: FrameGrid, n_samples: int) -> np.ndarray:
    """Weighted overlap-add inverse of :func:`frame_signal`.

    Samples not covered by any nonzero window weight are returned as zero.
    """
    n_frames, length, M = frames.shape
    w = grid.window_values()
    out = np.zeros((n_samples, M))
    norm = np.zeros(n_samples)
    for i in range(n_frames):
        start = i * grid.frame_shift
        out[start : start + length] += frames[i] * w[:, None]
        norm[start : start + length] += w**2
    covered = norm > 1e-12
    out[covered] /= norm[covered, None]
    return out


def dft(frame, L: int) -> Spectrum:
    """Evaluate the DTFT of a real frame at ``pi * l / L`` for ``l = 1..L``.

    Frames longer than ``2 L`` are folded modulo ``2 L`` first, which leaves
    the values on this grid unchanged.
    """
    if L < 1:
        raise ValueError("L must be >= 1")
    x = np.asarray(frame, dtype=np.float64).ravel()
    n = 2 * L
    if len(x) > n:
        folded = np.zeros(n)
        np.add.at(folded, np.arange(len(x)) % n, x)
        x_eff = folded
    else:
        x_eff = x
    full = np.fft.rfft(x_eff, n=n)
    freqs = np.pi * np.arange(1, L + 1) / L
    return Spectrum(full[1:], freqs, float(full[0].real), len(x))


def idft(spectrum: Spectrum) -> np.ndarray:
    """Rebuild the frame analysed by :func:`dft` (needs ``frame_length <= 2 L``)."""
    L = spectrum.n_bins
    if spectrum.frame_length > 2 * L:
        raise ValueError("frame longer than 2 L cannot be reconstructed from L bins")
    full = np.concatenate([[spectrum.dc], spectrum.bins])
    return np.fft.irfft(full, n=2 * L)[: spectrum.frame_length]
