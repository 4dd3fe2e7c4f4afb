"""Ground contact, stride events, gait phase labels and stride cleaning."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, InvalidStrideError

LIFTOFF_PHASE = 63.0
TRANSITION_MARGIN = 258


@dataclass(frozen=True)
class FsrFrame:
    heel: float
    toe: float
    ball: float


@dataclass(frozen=True)
class ContactConfig:
    threshold: float

    def __post_init__(self):
        if not self.threshold > 0:
            raise InvalidParameterError(f"contact threshold must be > 0, got {self.threshold}")


@dataclass(frozen=True)
class StrideEvents:
    touchdown: int
    liftoff: int
    next_touchdown: int

    def __post_init__(self):
        if not (self.touchdown < self.liftoff < self.next_touchdown):
            raise InvalidStrideError(
                f"events must satisfy touchdown < liftoff < next_touchdown, got "
                f"({self.touchdown}, {self.liftoff}, {self.next_touchdown})"
            )

    @property
    def n_samples(self) -> int:
        return self.next_touchdown - self.touchdown

    def duration(self, sample_rate: float) -> float:
        return self.n_samples / sample_rate


@dataclass(frozen=True)
class CleaningConfig:
    min_peak_angular_velocity: float = 1.0  # deg/s
    min_peak_vertical_acceleration: float = 0.1  # m/s^2
    min_stride_duration: float = 0.8  # s
    max_stride_duration: float = 1.4  # s

    def __post_init__(self):
        vals = (
            self.min_peak_angular_velocity,
            self.min_peak_vertical_acceleration,
            self.min_stride_duration,
            self.max_stride_duration,
        )
        if any(not v > 0 for v in vals):
            raise InvalidParameterError("cleaning thresholds must be positive")
        if not self.min_stride_duration < self.max_stride_duration:
            raise InvalidParameterError("min_stride_duration must be < max_stride_duration")


@dataclass(frozen=True)
class TransitionExclusionConfig:
    margin: int = TRANSITION_MARGIN

    def __post_init__(self):
        if self.margin < 0:
            raise InvalidParameterError(f"margin must be >= 0, got {self.margin}")


@dataclass(frozen=True)
class Removal:
    index: int
    stride: StrideEvents
    criterion: str
    value: float


@dataclass
class CleaningReport:
    n_input: int
    removed: list[Removal] = field(default_factory=list)

    @property
    def n_kept(self) -> int:
        return self.n_input - len(self.removed)

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.removed:
            out[r.criterion] = out.get(r.criterion, 0) + 1
        return out

    def to_dict(self) -> dict:
        return {
            "n_input": self.n_input,
            "n_kept": self.n_kept,
            "removed": [
                {
                    "index": r.index,
                    "touchdown": r.stride.touchdown,
                    "liftoff": r.stride.liftoff,
                    "next_touchdown": r.stride.next_touchdown,
                    "criterion": r.criterion,
                    "value": r.value,
                }
                for r in self.removed
            ],
        }


def fsr_sum(frame: FsrFrame) -> float:
    return frame.heel + frame.toe + frame.ball


def fsr_sum_series(heel, toe, ball) -> np.ndarray:
    return np.asarray(heel, dtype=float) + np.asarray(toe, dtype=float) + np.asarray(ball, dtype=float)


def detect_ground_contact(f_sum, config: ContactConfig) -> np.ndarray:
    """Contact wherever the summed force strictly exceeds the threshold.

    No hysteresis: a noisy swing phase crossing the threshold produces
    spurious contact, so the threshold has to sit above the swing noise floor.
    """
    f = np.asarray(f_sum, dtype=float)
    if f.size == 0:
        raise InvalidParameterError("force series is empty")
    return f > config.threshold


def extract_stride_events(contact) -> list[StrideEvents]:
    """Complete (rise, fall, next rise) triples from a contact series.

    A rise is a false->true transition, so a recording that starts in contact
    never yields a touchdown at index 0. Partial strides at either end are
    dropped.
    """
    c = np.asarray(contact, dtype=bool)
    if c.size == 0:
        raise InvalidParameterError("contact series is empty")
    d = np.diff(c.astype(np.int8))
    rises = np.flatnonzero(d == 1) + 1
    falls = np.flatnonzero(d == -1) + 1
    events = []
    for t0, t1 in zip(rises[:-1], rises[1:]):
        # exactly one fall lies between two consecutive rises
        k = np.searchsorted(falls, t0)
        lo = falls[k]
        events.append(StrideEvents(int(t0), int(lo), int(t1)))
    return events


def label_gait_phase(events: StrideEvents, liftoff_phase: float = LIFTOFF_PHASE) -> np.ndarray:
    """Per-sample gait phase (%) over ``[touchdown, next_touchdown)``.

    Linear from 0 to ``liftoff_phase`` during stance and from there to 100
    during swing, so the liftoff sample is exactly ``liftoff_phase``.
    """
    t0, lo, t1 = events.touchdown, events.liftoff, events.next_touchdown
    if lo <= t0 or t1 <= lo:
        raise InvalidStrideError(f"degenerate stride segment ({t0}, {lo}, {t1})")
    n_stance = lo - t0
    n_swing = t1 - lo
    stance = liftoff_phase * np.arange(n_stance) / n_stance
    swing = liftoff_phase + (100.0 - liftoff_phase) * np.arange(n_swing) / n_swing
    return np.concatenate([stance, swing])


def label_series(events: list[StrideEvents], n_samples: int) -> np.ndarray:
    """Phase labels over a whole recording; NaN outside the given strides."""
    phase = np.full(n_samples, np.nan)
    for ev in events:
        phase[ev.touchdown:ev.next_touchdown] = label_gait_phase(ev)
    return phase


def clean_strides(strides, config: CleaningConfig, sample_rate: float) -> tuple[list, CleaningReport]:
    """Drop artifact strides.

    ``strides`` is a sequence of ``(StrideEvents, channels)`` where
    ``channels`` maps ``"gyro_z"`` (deg/s) and ``"accel_y"`` (vertical, m/s^2)
    to arrays covering the stride span. Criteria are checked in order and the
    first hit is reported.
    """
    kept = []
    report = CleaningReport(n_input=len(strides))
    for i, (ev, ch) in enumerate(strides):
        duration = ev.n_samples / sample_rate
        peak_w = float(np.max(np.abs(ch["gyro_z"])))
        peak_a = float(np.max(np.abs(ch["accel_y"])))
        if peak_w < config.min_peak_angular_velocity:
            report.removed.append(Removal(i, ev, "angular_velocity", peak_w))
        elif peak_a < config.min_peak_vertical_acceleration:
            report.removed.append(Removal(i, ev, "vertical_acceleration", peak_a))
        elif duration < config.min_stride_duration:
            report.removed.append(Removal(i, ev, "duration_short", duration))
        elif duration > config.max_stride_duration:
            report.removed.append(Removal(i, ev, "duration_long", duration))
        else:
            kept.append((ev, ch))
    return kept, report


def exclude_transitions(n_samples: int, mode_change_indices, config: TransitionExclusionConfig) -> np.ndarray:
    """Keep-mask that is False within ``margin`` samples of every mode change."""
    keep = np.ones(n_samples, dtype=bool)
    m = config.margin
    for i in mode_change_indices:
        i = int(i)
        if not 0 <= i < n_samples:
            raise InvalidParameterError(f"mode change index {i} outside [0, {n_samples})")
        keep[max(0, i - m):min(n_samples, i + m + 1)] = False
    return keep
