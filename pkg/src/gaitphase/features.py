"""Normalization, sliding windows and the circular gait phase encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientDataError, InvalidParameterError, UndefinedPhaseError, ZeroVarianceError

CHANNELS = ("accel_x", "accel_y", "gyro_z", "pseudo_velocity_x", "pseudo_velocity_y", "pseudo_angle")
N_CHANNELS = len(CHANNELS)
N_WINDOW = 60
SAMPLE_INTERVAL = 0.005
LAYOUT = "channel-major"


@dataclass(frozen=True)
class NormalizationStats:
    mean: tuple[float, ...]
    std: tuple[float, ...]

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise InvalidParameterError("mean and std lengths differ")
        if any(not s > 0 for s in self.std):
            raise ZeroVarianceError(f"standard deviations must be > 0, got {self.std}")

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationStats":
        return cls(tuple(float(v) for v in d["mean"]), tuple(float(v) for v in d["std"]))


@dataclass(frozen=True)
class WindowSpec:
    n_window: int = N_WINDOW
    sample_interval: float = SAMPLE_INTERVAL

    def __post_init__(self):
        if self.n_window < 1:
            raise InvalidParameterError(f"n_window must be >= 1, got {self.n_window}")

    @property
    def duration(self) -> float:
        return self.n_window * self.sample_interval

    @property
    def n_features(self) -> int:
        return N_CHANNELS * self.n_window


@dataclass(frozen=True)
class CircularPhase:
    x: float
    y: float
    r: float = 1.0


def _as_channels(channels) -> np.ndarray:
    c = np.asarray(channels, dtype=float)
    if c.ndim != 2:
        raise InvalidParameterError("channels must be a 2-D (n_channels, n_samples) array")
    return c


def compute_normalization_stats(lw_channels) -> NormalizationStats:
    """Population mean and STD per channel over steady level-walking samples."""
    c = _as_channels(lw_channels)
    if c.shape[1] < 2:
        raise InsufficientDataError("need at least 2 samples per channel for normalization")
    mean = c.mean(axis=1)
    std = c.std(axis=1)
    if np.any(std == 0):
        bad = [i for i, s in enumerate(std) if s == 0]
        raise ZeroVarianceError(f"constant channel(s) {bad} cannot be normalized")
    return NormalizationStats(tuple(mean.tolist()), tuple(std.tolist()))


def normalize(channels, stats: NormalizationStats) -> np.ndarray:
    c = _as_channels(channels)
    if c.shape[0] != len(stats.mean):
        raise InvalidParameterError(f"expected {len(stats.mean)} channels, got {c.shape[0]}")
    return (c - np.asarray(stats.mean)[:, None]) / np.asarray(stats.std)[:, None]


def denormalize(channels, stats: NormalizationStats) -> np.ndarray:
    c = _as_channels(channels)
    return c * np.asarray(stats.std)[:, None] + np.asarray(stats.mean)[:, None]


def window_view(channels, spec: WindowSpec) -> np.ndarray:
    """Zero-copy ``(n_channels, n_windows, n_window)`` view of all windows."""
    c = _as_channels(channels)
    if c.shape[1] < spec.n_window:
        raise InsufficientDataError(
            f"series of {c.shape[1]} samples is shorter than the {spec.n_window}-sample window"
        )
    return sliding_window_view(c, spec.n_window, axis=1)


def gather_windows(view: np.ndarray, window_ids) -> np.ndarray:
    """Flatten selected windows of a ``window_view`` channel-major."""
    w = view[:, window_ids, :]
    return np.ascontiguousarray(w.transpose(1, 0, 2)).reshape(w.shape[1], -1)


def assemble_windows(channels, spec: WindowSpec) -> np.ndarray:
    """One flattened window per sample index ``i >= n_window - 1``.

    Row ``k`` holds samples ``k .. k + n_window - 1`` of channel 0, then the
    same span of channel 1, and so on.
    """
    view = window_view(channels, spec)
    return gather_windows(view, slice(None))


def phase_to_circle(g: float, r: float = 1.0) -> CircularPhase:
    a = 2.0 * math.pi * g / 100.0
    return CircularPhase(r * math.cos(a), r * math.sin(a), r)


def phase_to_xy(g, r: float = 1.0) -> np.ndarray:
    """Vectorized ``phase_to_circle``; returns shape ``(n, 2)``."""
    a = 2.0 * np.pi * np.asarray(g, dtype=float) / 100.0
    return np.stack([r * np.cos(a), r * np.sin(a)], axis=-1)


def circle_to_phase(x: float, y: float) -> float:
    """Gait phase in [0, 100) from the angle of ``(x, y)``; the radius is ignored."""
    if x == 0.0 and y == 0.0:
        raise UndefinedPhaseError("phase is undefined at the origin")
    # numpy's atan2, so scalar and vector paths agree to the bit
    a = float(np.arctan2(y, x))
    if a < 0.0:
        a += 2.0 * math.pi
    g = a * 100.0 / (2.0 * math.pi)
    # a tiny negative angle wraps to exactly 2*pi
    return 0.0 if g >= 100.0 else g


def xy_to_phase(xy) -> np.ndarray:
    xy = np.asarray(xy, dtype=float)
    x, y = xy[..., 0], xy[..., 1]
    if np.any((x == 0.0) & (y == 0.0)):
        raise UndefinedPhaseError("phase is undefined at the origin")
    a = np.arctan2(y, x)
    a = np.where(a < 0.0, a + 2.0 * np.pi, a)
    g = a * 100.0 / (2.0 * np.pi)
    return np.where(g >= 100.0, 0.0, g)
