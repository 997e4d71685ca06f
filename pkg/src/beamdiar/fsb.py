"""Filter-and-sum beamformer design and application.

Every look direction gets one length-``K`` FIR filter per microphone. The
beamformer output is

    y(t) = sum_m sum_k a[m, k] x_m(t - k)

and its response to a far-field plane wave from ``theta`` at angular
frequency ``omega`` (rad/s) is

    F(theta, omega) = sum_m sum_k a[m, k] exp(-j omega (k / fs + tau_m(theta)))

The coefficients are the real least-squares fit of ``F`` to a desired beam
pattern sampled on a (direction x frequency) grid, solved through ridge
regularized normal equations.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.signal import lfilter
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .array import ArrayGeometry, DirectionGrid, default_geometry, steering_matrix
from .exceptions import ConditioningError, DimensionError, FormatError
from .signal import MultiChannelAudio

DEFAULT_BAND = (300.0, 3400.0)
DEFAULT_BINS = 64
DEFAULT_REG = 1e-2
FSB_MAGIC = b"FSB1"

# relative eigenvalue floor below which lambda = 0 designs are rejected
_SINGULAR_RCOND = 1e-13


def _wrap(angle):
    return np.angle(np.exp(1j * np.asarray(angle, dtype=np.float64)))


@dataclass(frozen=True)
class DesiredResponse:
    """Target beam shape as a function of the offset from the look direction.

    ``half_width`` is in radians; ``None`` means one grid step, resolved by
    :meth:`for_grid`.
    """

    shape: str = "boxcar"
    half_width: float | None = None

    def __post_init__(self):
        if self.shape not in ("boxcar", "raised_cosine"):
            raise ValueError(f"unknown desired response shape {self.shape!r}")
        if self.half_width is not None and not 0 < self.half_width < np.pi:
            raise ValueError("half_width must lie in (0, pi)")

    def for_grid(self, grid: DirectionGrid) -> "DesiredResponse":
        if self.half_width is not None:
            return self
        return DesiredResponse(self.shape, min(grid.step, np.pi * (1 - 1e-12)))

    def __call__(self, offset) -> np.ndarray:
        if self.half_width is None:
            raise ValueError("half_width unresolved; call for_grid first")
        d = np.abs(_wrap(offset))
        if self.shape == "boxcar":
            return (d <= self.half_width * (1 + 1e-9)).astype(np.float64)
        return np.where(d < self.half_width, 0.5 * (1 + np.cos(np.pi * d / self.half_width)), 0.0)


def design_frequencies(band=DEFAULT_BAND, n_bins=DEFAULT_BINS) -> np.ndarray:
    """``n_bins`` uniformly spaced design frequencies (Hz) covering ``band``."""
    f_lo, f_hi = band
    if not 0 <= f_lo <= f_hi:
        raise ValueError("band must satisfy 0 <= f_lo <= f_hi")
    if n_bins == 1:
        return np.array([0.5 * (f_lo + f_hi)])
    return np.linspace(f_lo, f_hi, n_bins)


class _DesignProblem:
    """Quadrature-weighted normal equations shared by all look directions.

    The real coefficient vector is ordered channel-major, tap-minor, i.e.
    ``a.reshape(M, K)``. The per-row basis is ``kron(z(theta, omega), d(omega))``
    where ``d_k = exp(-j omega k / fs)``, which lets the Gram matrix be
    assembled from ``M x M`` and ``K x K`` blocks.
    """

    def __init__(self, geometry, angles, frequencies, order, sample_rate, group_delay=None):
        self.geometry = geometry
        self.angles = np.asarray(angles, dtype=np.float64)
        self.frequencies = np.atleast_1d(np.asarray(frequencies, dtype=np.float64))
        self.order = int(order)
        if self.order < 1:
            raise ValueError("filter order must be >= 1")
        self.sample_rate = float(sample_rate)
        self.group_delay = (self.order - 1) / 2.0 if group_delay is None else float(group_delay)

        omegas = 2 * np.pi * self.frequencies
        self.Z = steering_matrix(geometry, self.angles, omegas)  # (L, N, M)
        k = np.arange(self.order)
        self.D = np.exp(-1j * omegas[:, None] * k[None, :] / self.sample_rate)  # (L, K)
        self.phase = np.exp(-1j * omegas * self.group_delay / self.sample_rate)  # (L,)
        L, N, M = self.Z.shape
        self.weight = 1.0 / (L * N)

        C = np.einsum("lim,lin->lmn", self.Z.conj(), self.Z)
        DD = self.D.conj()[:, :, None] * self.D[:, None, :]
        gram = np.einsum("lmn,lkq->mknq", C, DD).real
        self.gram = self.weight * gram.reshape(M * self.order, M * self.order)

    @property
    def n_mics(self):
        return self.Z.shape[2]

    def targets(self, look_angles, desired: DesiredResponse) -> np.ndarray:
        """Complex desired response, shape ``(n_looks, L, N)``."""
        look_angles = np.atleast_1d(np.asarray(look_angles, dtype=np.float64))
        pattern = desired(self.angles[None, :] - look_angles[:, None])  # (J, N)
        return pattern[:, None, :] * self.phase[None, :, None]

    def rhs(self, targets) -> np.ndarray:
        P = np.einsum("lim,jli->jlm", self.Z.conj(), targets)
        b = np.einsum("jlm,lk->jmk", P, self.D.conj()).real
        return self.weight * b.reshape(len(targets), -1)

    def solve(self, rhs, reg):
        if reg < 0:
            raise ValueError("regularization must be >= 0")
        A = self.gram + reg * np.eye(self.gram.shape[0])
        if reg == 0:
            w = linalg.eigvalsh(A)
            if w[0] <= _SINGULAR_RCOND * max(w[-1], np.finfo(float).tiny):
                raise ConditioningError(
                    "normal equations are singular (rank-deficient steering basis); "
                    "use a regularization lambda > 0"
                )
        try:
            factor = linalg.cho_factor(A, lower=True, check_finite=True)
        except linalg.LinAlgError as exc:
            raise ConditioningError(f"normal equations not positive definite: {exc}; use lambda > 0") from exc
        return linalg.cho_solve(factor, rhs.T).T

    def objective(self, coefficients, look_angle, desired, reg) -> float:
        a = np.asarray(coefficients, dtype=np.float64).reshape(self.n_mics, self.order)
        F = np.einsum("mk,lim,lk->li", a, self.Z, self.D)
        t = self.targets([look_angle], desired)[0]
        return float(self.weight * np.sum(np.abs(t - F) ** 2) + reg * np.sum(a**2))


def _as_angles(grid):
    return grid.angles if isinstance(grid, DirectionGrid) else np.atleast_1d(np.asarray(grid, dtype=np.float64))


def _resolve_desired(desired, grid):
    desired = desired or DesiredResponse()
    if desired.half_width is None:
        if not isinstance(grid, DirectionGrid):
            grid = DirectionGrid(len(_as_angles(grid)))
        desired = desired.for_grid(grid)
    return desired


def design_filter(
    geometry: ArrayGeometry,
    grid,
    frequencies,
    look_direction: float,
    desired: DesiredResponse | None = None,
    order: int = 128,
    reg: float = DEFAULT_REG,
    sample_rate: float = 16000,
    group_delay: float | None = None,
) -> np.ndarray:
    """Least-squares FIR coefficients (``M x K``) steering toward ``look_direction``.

    Minimises the mean over the (direction, frequency) grid of
    ``|F_d(theta - look) exp(-j omega D / fs) - F(theta, omega)|^2`` plus
    ``reg * ||a||^2``, where ``D`` is ``group_delay`` in samples (default
    ``(K - 1) / 2``, the centre tap). ``frequencies`` are in Hz.

    Raises
    ------
    ConditioningError
        If ``reg == 0`` and the normal matrix is singular.
    """
    desired = _resolve_desired(desired, grid)
    problem = _DesignProblem(geometry, _as_angles(grid), frequencies, order, sample_rate, group_delay)
    rhs = problem.rhs(problem.targets([look_direction], desired))
    return problem.solve(rhs, reg)[0].reshape(geometry.n_mics, problem.order)


def design_objective(coefficients, geometry, grid, frequencies, look_direction, desired=None,
                     reg=DEFAULT_REG, sample_rate=16000, group_delay=None) -> float:
    """Value of the regularised design objective for given coefficients."""
    desired = _resolve_desired(desired, grid)
    a = np.asarray(coefficients)
    problem = _DesignProblem(geometry, _as_angles(grid), frequencies, a.shape[-1], sample_rate, group_delay)
    return problem.objective(a, look_direction, desired, reg)


@dataclass(frozen=True)
class FilterBank:
    """``N x M x K`` FIR coefficients, one filter set per look direction."""

    coefficients: np.ndarray
    grid: DirectionGrid

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=np.float64)
        if c.ndim != 3 or min(c.shape) < 1:
            raise DimensionError(f"filter bank must be N x M x K, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("filter bank coefficients must be finite")
        if c.shape[0] != self.grid.n_directions:
            raise DimensionError("filter bank rows do not match the direction grid")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @property
    def shape(self):
        return self.coefficients.shape

    @property
    def n_directions(self):
        return self.coefficients.shape[0]

    @property
    def n_mics(self):
        return self.coefficients.shape[1]

    @property
    def order(self):
        return self.coefficients.shape[2]

    def save(self, path) -> None:
        N, M, K = self.shape
        with open(path, "wb") as fh:
            fh.write(FSB_MAGIC)
            fh.write(struct.pack("<3I", N, M, K))
            fh.write(self.coefficients.astype("<f8").tobytes(order="C"))

    @classmethod
    def load(cls, path) -> "FilterBank":
        raw = Path(path).read_bytes()
        if len(raw) < 16 or raw[:4] != FSB_MAGIC:
            raise FormatError(f"{path}: not a filter bank file (bad magic)")
        N, M, K = struct.unpack("<3I", raw[4:16])
        expected = 16 + 8 * N * M * K
        if len(raw) != expected:
            raise FormatError(f"{path}: expected {expected} bytes for ({N}, {M}, {K}), got {len(raw)}")
        coeffs = np.frombuffer(raw, dtype="<f8", offset=16).reshape(N, M, K).astype(np.float64)
        return cls(coeffs, DirectionGrid(N))


def design_bank(
    geometry: ArrayGeometry,
    grid: DirectionGrid,
    frequencies,
    desired: DesiredResponse | None = None,
    order: int = 128,
    reg: float = DEFAULT_REG,
    sample_rate: float = 16000,
    group_delay: float | None = None,
) -> FilterBank:
    """Design one filter per grid direction.

    The Gram matrix does not depend on the look direction, so it is
    factorised once and solved for all ``N`` right-hand sides together.
    """
    desired = _resolve_desired(desired, grid)
    problem = _DesignProblem(geometry, grid.angles, frequencies, order, sample_rate, group_delay)
    rhs = problem.rhs(problem.targets(grid.angles, desired))
    coeffs = problem.solve(rhs, reg).reshape(grid.n_directions, geometry.n_mics, problem.order)
    return FilterBank(coeffs, grid)


def _samples_of(audio):
    if isinstance(audio, MultiChannelAudio):
        return audio.samples
    x = np.asarray(audio, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def apply_filter_and_sum(audio, coefficients) -> np.ndarray:
    """Causal filter-and-sum with zero history; output has the input length."""
    x = _samples_of(audio)
    a = np.atleast_2d(np.asarray(coefficients, dtype=np.float64))
    if x.shape[1] != a.shape[0]:
        raise DimensionError(f"audio has {x.shape[1]} channels, filters expect {a.shape[0]}")
    y = np.zeros(x.shape[0])
    for m in range(a.shape[0]):
        y += lfilter(a[m], [1.0], x[:, m])
    return y


def spatial_response(coefficients, geometry: ArrayGeometry, theta, omega, sample_rate: float = 16000):
    """Complex response ``F(theta, omega)`` of one filter set; ``omega`` in rad/s.

    Broadcasts over array-valued ``theta`` and ``omega``.
    """
    a = np.atleast_2d(np.asarray(coefficients, dtype=np.float64))
    M, K = a.shape
    if M != geometry.n_mics:
        raise DimensionError("coefficient rows do not match the microphone count")
    theta, omega = np.broadcast_arrays(np.asarray(theta, dtype=np.float64), np.asarray(omega, dtype=np.float64))
    tau = geometry.delays(theta)  # (..., M)
    k = np.arange(K) / sample_rate
    phase = np.exp(-1j * omega[..., None, None] * (tau[..., :, None] + k))
    out = np.sum(phase * a, axis=(-2, -1))
    return out[()] if out.ndim == 0 else out


class FilterAndSumBeamformer(TransformerMixin, BaseEstimator):
    """Fixed filter-and-sum beamformer bank over a uniform azimuth grid.

    ``fit`` designs the bank (no data needed); ``transform`` maps a ``T x M``
    recording to the ``T x N`` matrix of beam outputs.

    Parameters
    ----------
    geometry : ArrayGeometry, optional
        Defaults to the 8-mic, 4.25 cm uniform circular array.
    n_directions : int
        Number of look directions on the azimuth grid.
    order : int
        FIR length ``K``.
    band : tuple of float
        Design band in Hz.
    n_bins : int
        Number of design frequencies in ``band``.
    shape, half_width
        Desired beam pattern, see :class:`DesiredResponse`.
    reg : float
        Ridge weight added to the normal equations.
    sample_rate : int
    """

    def __init__(self, geometry=None, n_directions=240, order=128, band=DEFAULT_BAND, n_bins=DEFAULT_BINS,
                 shape="boxcar", half_width=None, reg=DEFAULT_REG, sample_rate=16000):
        self.geometry = geometry
        self.n_directions = n_directions
        self.order = order
        self.band = band
        self.n_bins = n_bins
        self.shape = shape
        self.half_width = half_width
        self.reg = reg
        self.sample_rate = sample_rate

    def fit(self, X=None, y=None):
        geometry = self.geometry if self.geometry is not None else default_geometry()
        self.geometry_ = geometry
        self.grid_ = DirectionGrid(self.n_directions)
        self.frequencies_ = design_frequencies(self.band, self.n_bins)
        self.bank_ = design_bank(
            geometry, self.grid_, self.frequencies_, DesiredResponse(self.shape, self.half_width),
            self.order, self.reg, self.sample_rate,
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "bank_")
        x = _samples_of(X)
        return np.stack([apply_filter_and_sum(x, c) for c in self.bank_.coefficients], axis=1)

    def response(self, theta, omega):
        """Responses of every look direction, shape ``(N,) + broadcast(theta, omega).shape``."""
        check_is_fitted(self, "bank_")
        return np.stack([
            spatial_response(c, self.geometry_, theta, omega, self.sample_rate) for c in self.bank_.coefficients
        ])
