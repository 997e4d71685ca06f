import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.io import wavfile

from beamdiar.exceptions import EmptyInputError, FormatError, UnsupportedFormatError
from beamdiar.signal import FrameGrid, MultiChannelAudio, dft, frame_signal, idft, load_wav, overlap_add, write_wav

finite = st.floats(-1, 1, allow_nan=False, width=64)


def brute_dft(x, L):
    n = np.arange(len(x))
    w = np.pi * np.arange(1, L + 1) / L
    return np.array([np.sum(x * np.exp(-1j * wl * n)) for wl in w])


class TestLoadWav:
    def test_silence_8ch(self, tmp_path):
        path = tmp_path / "s.wav"
        wavfile.write(path, 16000, np.zeros((16000, 8), dtype=np.int16))
        a = load_wav(path)
        assert (a.n_samples, a.channel_count, a.sample_rate) == (16000, 8, 16000)
        assert not a.samples.any()

    def test_full_scale_dc_on_channel_3(self, tmp_path):
        data = np.zeros((100, 8), dtype=np.int16)
        data[:, 3] = 32767
        wavfile.write(tmp_path / "dc.wav", 16000, data)
        a = load_wav(tmp_path / "dc.wav")
        assert np.all(a.samples[:, 3] == 32767 / 32768)
        assert not np.delete(a.samples, 3, axis=1).any()

    def test_stereo_length_from_header(self, tmp_path):
        x = (0.1 * np.random.default_rng(0).standard_normal((110250, 2))).astype(np.float32)
        wavfile.write(tmp_path / "m.wav", 44100, x)
        a = load_wav(tmp_path / "m.wav")
        assert (a.n_samples, a.channel_count) == (110250, 2)

    @pytest.mark.parametrize("encoding,dtype", [("pcm16", np.int16), ("float32", np.float32)])
    def test_round_trip_bit_identical(self, tmp_path, encoding, dtype):
        rng = np.random.default_rng(3)
        if dtype is np.int16:
            raw = rng.integers(-32768, 32767, (500, 3), dtype=np.int16)
        else:
            raw = rng.uniform(-1, 1, (500, 3)).astype(np.float32)
        wavfile.write(tmp_path / "a.wav", 8000, raw)
        a = load_wav(tmp_path / "a.wav")
        assert a.encoding == encoding
        write_wav(tmp_path / "b.wav", a)
        assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()
        assert np.array_equal(load_wav(tmp_path / "b.wav").samples, a.samples)

    def test_malformed_header(self, tmp_path):
        (tmp_path / "bad.wav").write_bytes(b"RIFF\x00\x00\x00\x00JUNKdata")
        with pytest.raises(FormatError):
            load_wav(tmp_path / "bad.wav")

    def test_unsupported_encoding(self, tmp_path):
        wavfile.write(tmp_path / "i32.wav", 8000, np.zeros((10, 2), dtype=np.int32))
        with pytest.raises(UnsupportedFormatError):
            load_wav(tmp_path / "i32.wav")


class TestFraming:
    @pytest.mark.parametrize("T,length,shift,expected", [(16000, 400, 160, 98), (400, 400, 160, 1)])
    def test_frame_count(self, T, length, shift, expected):
        frames = frame_signal(MultiChannelAudio(np.zeros((T, 2)), 16000), FrameGrid(length, shift))
        assert frames.shape == (expected, length, 2)

    def test_too_short(self):
        with pytest.raises(EmptyInputError):
            frame_signal(MultiChannelAudio(np.zeros((399, 1)), 16000), FrameGrid(400, 160))

    @pytest.mark.parametrize("window,shift", [("rectangular", 160), ("hann", 100)])
    def test_overlap_add_reconstructs_interior(self, rng, window, shift):
        x = rng.standard_normal((4000, 2))
        grid = FrameGrid(400, shift, window)
        frames = frame_signal(MultiChannelAudio(x, 16000), grid)
        y = overlap_add(frames, grid, len(x))
        covered = (len(frames) - 1) * shift + 400
        interior = slice(400, covered - 400)
        assert np.max(np.abs(y[interior] - x[interior])) <= 1e-9


class TestDft:
    def test_impulse(self):
        s = dft(np.r_[1.0, np.zeros(31)], 16)
        assert np.allclose(s.bins, 1.0, atol=1e-12)

    def test_cosine_concentrates_in_its_bin(self):
        L, k = 32, 5
        n = np.arange(2 * L)
        s = dft(np.cos(np.pi * k * n / L), L)
        mags = np.abs(s.bins)
        assert np.argmax(mags) == k - 1
        assert np.max(np.delete(mags, k - 1)) <= 1e-9 * mags[k - 1]

    def test_matches_brute_force(self, rng):
        x = rng.standard_normal(64)
        for L in (16, 32, 40, 64):
            assert np.max(np.abs(dft(x, L).bins - brute_dft(x, L))) <= 1e-9

    def test_bin_frequencies(self):
        f = dft(np.ones(8), 4).bin_frequencies
        assert np.all(np.diff(f) > 0) and f[0] > 0 and np.isclose(f[-1], np.pi)

    @given(arrays(np.float64, st.integers(1, 64), elements=finite), st.integers(32, 40))
    def test_inverse_round_trip(self, x, L):
        assert np.max(np.abs(idft(dft(x, L)) - x), initial=0) <= 1e-9

    @given(arrays(np.float64, 64, elements=finite))
    def test_parseval(self, x):
        s = dft(x, 32)
        spec = (s.dc**2 + 2 * np.sum(np.abs(s.bins[:-1]) ** 2) + np.abs(s.bins[-1]) ** 2) / 64
        assert np.isclose(spec, np.sum(x**2), rtol=1e-9, atol=1e-12)


def test_audio_validation():
    with pytest.raises(FormatError):
        MultiChannelAudio(np.array([[np.nan]]), 16000)
    with pytest.raises(FormatError):
        MultiChannelAudio(np.zeros((4, 1)), 0)
