"""Planar microphone-array geometry and far-field steering vectors."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import FormatError

SPEED_OF_SOUND = 343.0
PAPER_GRID_SIZES = (24, 36, 72, 120, 240)


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in metres (``M x 2``) and the speed of sound."""

    mic_positions: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        p = np.asarray(self.mic_positions, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2:
            raise ValueError(f"mic_positions must be M x 2, got {p.shape}")
        if p.shape[0] < 1:
            raise ValueError("an array needs at least one microphone")
        d = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)
        if np.any(d[np.triu_indices(len(p), 1)] == 0.0):
            raise ValueError("microphone positions must be pairwise distinct")
        if not self.speed_of_sound > 0:
            raise ValueError("speed_of_sound must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "mic_positions", p)
        object.__setattr__(self, "speed_of_sound", float(self.speed_of_sound))

    @property
    def n_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def centered_positions(self) -> np.ndarray:
        return self.mic_positions - self.mic_positions.mean(axis=0)

    @classmethod
    def uniform_circular(cls, n_mics=8, radius=0.0425, speed_of_sound=SPEED_OF_SOUND, rotation=0.0):
        phi = rotation + 2 * np.pi * np.arange(n_mics) / n_mics
        return cls(radius * np.stack([np.cos(phi), np.sin(phi)], axis=1), speed_of_sound)

    def delays(self, theta) -> np.ndarray:
        """Arrival delay of a plane wave from ``theta`` at each mic, in seconds.

        Delays are relative to the array centroid; shape ``theta.shape + (M,)``.
        """
        theta = np.asarray(theta, dtype=np.float64)
        u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return -(u @ self.centered_positions.T) / self.speed_of_sound


def default_geometry() -> ArrayGeometry:
    return ArrayGeometry.uniform_circular()


def load_geometry(path, speed_of_sound: float = SPEED_OF_SOUND) -> ArrayGeometry:
    """Read ``x y`` lines (metres); ``#`` starts a comment."""
    rows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: expected 'x y', got {raw!r}")
        try:
            rows.append([float(parts[0]), float(parts[1])])
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from exc
    try:
        return ArrayGeometry(np.array(rows).reshape(-1, 2), speed_of_sound)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_geometry(path, geometry: ArrayGeometry) -> None:
    lines = ["# x_meters y_meters"]
    lines += [f"{x:.9g} {y:.9g}" for x, y in geometry.mic_positions]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class DirectionGrid:
    """``N`` azimuths ``2 pi i / N``."""

    n_directions: int

    def __post_init__(self):
        if int(self.n_directions) < 1:
            raise ValueError("n_directions must be >= 1")

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.n_directions) / self.n_directions

    @property
    def step(self) -> float:
        return 2 * np.pi / self.n_directions

    def __len__(self):
        return self.n_directions


@dataclass(frozen=True)
class SteeringVector:
    entries: np.ndarray
    theta: float
    omega: float


def steering(geometry: ArrayGeometry, theta: float, omega: float) -> SteeringVector:
    """``z_m = exp(-j omega tau_m(theta))`` with ``omega`` in rad/s."""
    if omega < 0:
        raise ValueError("omega must be >= 0")
    tau = geometry.delays(theta)
    return SteeringVector(np.exp(-1j * omega * tau), float(theta), float(omega))


def steering_matrix(geometry: ArrayGeometry, angles, omegas) -> np.ndarray:
    """Steering rows for every (frequency, direction) pair.

    Returns ``(L, N, M)``: one block per frequency, direction-major within it.
    ``angles`` may be a :class:`DirectionGrid` or an array of radians.
    """
    if isinstance(angles, DirectionGrid):
        angles = angles.angles
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    omegas = np.atleast_1d(np.asarray(omegas, dtype=np.float64))
    if angles.size == 0 or omegas.size == 0:
        raise ValueError("angles and frequencies must be non-empty")
    if np.any(omegas < 0):
        raise ValueError("frequencies must be >= 0")
    tau = geometry.delays(angles)  # (N, M)
    return np.exp(-1j * omegas[:, None, None] * tau[None, :, :])
