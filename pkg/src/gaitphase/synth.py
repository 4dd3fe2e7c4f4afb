"""Deterministic synthetic gait sessions.

The generator is a stand-in for recorded data. It is not biomechanically
faithful. Each IMU channel is a three-harmonic periodic function of gait
phase. Stair modes reuse the level-walking waveform advanced by a fixed
fraction of the cycle (``_MODE_SHIFT``), optionally blended towards their own
coefficients by ``mode_contrast``. Stair slope scales the harmonic
amplitudes, shifts the second harmonic and tilts the gravity vector.

The default cues are deliberately weak: with zero contrast a single sample
of a stair mode looks like level walking at another phase. Stair modes also
carry a texture, one high harmonic (5th for SA, 10th for SD) whose phase
offset is random per subject and channel. Its amplitude is about twice the
noise, so one sample cannot tell it from noise while a window of history
can. Signals depend on the labelled phase, not on time, so the noiseless
channels still determine phase, slope and mode.

Per subject, the harmonic coefficients are perturbed slightly (gait style),
and each session gets its own per-channel gain and offset (sensor mounting).
Level-walking normalization removes the mounting perturbation.

Forces: the three FSRs add up to ``W (0.6 + 0.4 sin(pi u))`` during stance
(``u`` = stance progress) and to zero during swing. Contact therefore starts
and ends with a jump, so thresholding recovers the stride events exactly on
noiseless data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidConfigError, InvalidSplitError
from .segmentation import LIFTOFF_PHASE, StrideEvents
from .sessionio import MODES, SAMPLE_RATE, SessionFile

GRAVITY = 9.81
DEFAULT_SLOPES = (19.0, 30.0, 40.0)

# (harmonic k, amplitude, phase offset rad) per mode and channel
_BASIS = {
    "LW": {
        "accel_x": ((1, 4.0, 1.0), (2, 2.5, -0.6), (3, 1.5, 0.3)),
        "accel_y": ((1, 3.0, -1.3), (2, 3.0, 0.4), (3, 1.0, 2.2)),
        "gyro_z": ((1, 140.0, 0.0), (2, 60.0, 1.2), (3, 25.0, -0.5)),
    },
    "SA": {
        "accel_x": ((1, 3.0, 2.1), (2, 3.5, 0.8), (3, 1.0, 1.5)),
        "accel_y": ((1, 4.0, -0.2), (2, 1.5, 1.6), (3, 2.0, -0.9)),
        "gyro_z": ((1, 130.0, 0.25), (2, 35.0, 2.3), (3, 35.0, 0.9)),
    },
    "SD": {
        "accel_x": ((1, 5.0, 0.4), (2, 1.5, -2.0), (3, 2.0, -1.0)),
        "accel_y": ((1, 2.5, -2.4), (2, 4.0, 2.6), (3, 1.5, 0.6)),
        "gyro_z": ((1, 150.0, -0.2), (2, 75.0, 0.2), (3, 15.0, 2.0)),
    },
}
MODE_CONTRAST = 0.0
_MODE_SHIFT = {"LW": 0.0, "SA": 8.0, "SD": -6.0}  # % of the cycle the mode waveform is advanced
_TILT = {"LW": 0.0, "SA": 8.0, "SD": -6.0}  # deg, mean shank tilt
_TILT_PER_SLOPE = 0.1  # deg tilt per deg of stair slope
_SLOPE_GAIN = 0.3  # relative amplitude increase at 40 deg
_SLOPE_SHIFT = 0.8  # rad second-harmonic shift at 40 deg
# stair texture: (harmonic, amplitude as a fraction of the channel amplitude);
# its phase offset is drawn per subject and channel
_TEXTURE = {"SA": (5, 0.12), "SD": (10, 0.12)}
_DURATION_FACTOR = {"LW": 1.0, "SA": 1.08, "SD": 0.95}
_STANCE_SHIFT = {"LW": 0.0, "SA": 0.02, "SD": -0.01}

SAGITTAL = ("accel_x", "accel_y", "gyro_z")
AMPLITUDE = {"accel_x": 6.0, "accel_y": 6.0, "gyro_z": 200.0, "accel_z": 1.0, "gyro_x": 20.0, "gyro_y": 20.0}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_subjects: int = 12
    slopes: tuple[float, ...] = DEFAULT_SLOPES
    # explicit (mode, slope, stride count) blocks; None -> default_schedule per slope
    schedule: tuple[tuple[str, float, int], ...] | None = None
    stride_duration: tuple[float, float] = (0.85, 1.35)
    noise: float = 0.05  # channel noise STD as a fraction of channel amplitude
    noise_std: tuple[tuple[str, float], ...] | None = None  # per-channel override
    fsr_noise: float = 0.0  # absolute STD in force units
    body_force: float = 100.0
    style: float = 1.0  # scale of subject/session perturbations; 0 = canonical
    sample_rate: float = SAMPLE_RATE
    lead_in: int = 40
    tail: int = 30
    leg: str = "right"
    # 1 keeps the full per-mode basis; smaller values pull SA/SD shapes toward LW
    mode_contrast: float = MODE_CONTRAST
    # scale of the stair-mode texture harmonic; 0 removes it
    texture: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.mode_contrast <= 1.0:
            raise InvalidConfigError("mode_contrast must lie in [0, 1]")
        if self.n_subjects < 1:
            raise InvalidConfigError("n_subjects must be >= 1")
        lo, hi = self.stride_duration
        if not (0.8 <= lo < hi <= 1.4):
            raise InvalidConfigError("stride_duration range must lie within [0.8, 1.4] s")
        if self.noise < 0 or self.fsr_noise < 0 or self.style < 0 or self.texture < 0:
            raise InvalidConfigError("noise and style levels must be >= 0")
        if self.sample_rate <= 0:
            raise InvalidConfigError("sample_rate must be > 0")
        if self.schedule is not None:
            validate_schedule(self.schedule)

    def channel_noise(self) -> dict[str, float]:
        out = {c: self.noise * a for c, a in AMPLITUDE.items()}
        if self.noise_std is not None:
            out.update(dict(self.noise_std))
        return out


@dataclass
class SynthSession:
    subject: str
    name: str
    stair_slope: float
    sample_rate: float
    imu: dict[str, np.ndarray]
    fsr: dict[str, np.ndarray]
    annotations: list[str]
    phase: np.ndarray
    slope: np.ndarray
    mode: np.ndarray
    in_stride: np.ndarray
    events: list[StrideEvents]
    change_indices: list[int]
    leg: str = "right"
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.phase)

    @property
    def timestamps(self) -> np.ndarray:
        return np.arange(self.n_samples) / self.sample_rate

    @property
    def f_sum(self) -> np.ndarray:
        return self.fsr["fsr_heel"] + self.fsr["fsr_toe"] + self.fsr["fsr_ball"]

    def to_session_file(self) -> SessionFile:
        if math.isnan(self.stair_slope):
            raise InvalidConfigError("a session file holds a single stair slope; schedule mixes several")
        data = dict(self.imu)
        data.update(self.fsr)
        return SessionFile(
            subject=self.subject,
            leg=self.leg,
            stair_slope=self.stair_slope,
            timestamps=self.timestamps,
            data=data,
            annotations=list(self.annotations),
            sample_rate=self.sample_rate,
            extra_header={"session": self.name, "generator": "gaitphase.synth"},
        )


def default_schedule(slope: float) -> tuple[tuple[str, float, int], ...]:
    """LW -> SA -> LW -> SD -> LW; stride counts keep LW > SD > SA."""
    s = abs(float(slope))
    return (("LW", 0.0, 6), ("SA", s, 6), ("LW", 0.0, 5), ("SD", -s, 7), ("LW", 0.0, 5))


def validate_schedule(schedule) -> None:
    if not schedule:
        raise InvalidConfigError("schedule is empty")
    for mode, slope, count in schedule:
        if mode not in MODES:
            raise InvalidConfigError(f"unknown mode {mode!r}")
        if count < 1:
            raise InvalidConfigError("stride counts must be >= 1")
        if mode == "LW" and slope != 0:
            raise InvalidConfigError("LW blocks must have slope 0")
        if mode == "SA" and not slope > 0:
            raise InvalidConfigError("SA blocks need a positive slope")
        if mode == "SD" and not slope < 0:
            raise InvalidConfigError("SD blocks need a negative slope")


@dataclass(frozen=True)
class _Style:
    coeffs: dict  # mode -> channel -> ((k, amp, phi), ...)
    duration: float
    stance: float
    force: float
    contrast: float = 1.0
    texture: dict = field(default_factory=dict)  # mode -> channel -> (k, amp, phi)


@dataclass(frozen=True)
class _Mounting:
    gain: dict
    offset: dict


def mode_basis(mode: str, ch: str, contrast: float = MODE_CONTRAST) -> tuple:
    """Harmonics of ``mode``: phasor ``LW + contrast * (mode - LW)``, advanced by the mode's phase shift."""
    out = []
    for (k, a, p), (_, a0, p0) in zip(_BASIS[mode][ch], _BASIS["LW"][ch]):
        z = a0 * np.exp(1j * p0) + contrast * (a * np.exp(1j * p) - a0 * np.exp(1j * p0))
        z *= np.exp(2j * np.pi * k * _MODE_SHIFT[mode] / 100.0)
        out.append((k, float(abs(z)), float(np.angle(z))))
    return tuple(out)


def _subject_style(config: SynthConfig, subject: int) -> _Style:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, subject, 0]))
    s = config.style
    coeffs = {}
    for mode in MODES:
        coeffs[mode] = {}
        for ch in SAGITTAL:
            coeffs[mode][ch] = tuple(
                (k, a * (1.0 + s * 0.04 * rng.standard_normal()), p + s * 0.05 * rng.standard_normal())
                for k, a, p in mode_basis(mode, ch, config.mode_contrast)
            )
    lo, hi = config.stride_duration
    mid = 0.5 * (lo + hi)
    duration = mid + s * rng.uniform(-0.06, 0.06)
    stance = 0.63 + s * rng.uniform(-0.03, 0.03)
    force = config.body_force * (1.0 + s * rng.uniform(-0.1, 0.1))
    texture = {}
    for mode, (k, frac) in _TEXTURE.items():
        texture[mode] = {
            ch: (k, config.texture * frac * AMPLITUDE[ch], s * rng.uniform(0.0, 2.0 * np.pi)) for ch in SAGITTAL
        }
    return _Style(coeffs, duration, stance, force, config.mode_contrast, texture)


def _session_mounting(config: SynthConfig, subject: int, session: int) -> _Mounting:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, subject, session, 3]))
    s = config.style
    gain = {ch: 1.0 + s * rng.uniform(-0.15, 0.15) for ch in SAGITTAL}
    offset = {ch: s * 0.05 * AMPLITUDE[ch] * rng.standard_normal() for ch in SAGITTAL}
    return _Mounting(gain, offset)


def _shape(style: _Style, mode: str, slope: float, ch: str, g: np.ndarray) -> np.ndarray:
    """Noise-free channel value at gait phase ``g`` (%), before mounting."""
    rel = abs(slope) / 40.0
    gain = 1.0 + _SLOPE_GAIN * rel
    theta = 2.0 * np.pi * g / 100.0
    out = np.zeros_like(g)
    for k, amp, phi in style.coeffs[mode][ch]:
        shift = _SLOPE_SHIFT * rel if k == 2 else 0.0
        out += gain * amp * np.cos(k * theta + phi + shift)
    if mode in style.texture:
        k, amp, phi = style.texture[mode][ch]
        out += amp * np.cos(k * theta + phi)
    tilt = math.radians(style.contrast * _TILT[mode] + _TILT_PER_SLOPE * slope)
    if ch == "accel_x":
        out += GRAVITY * math.sin(tilt)
    elif ch == "accel_y":
        out += GRAVITY * math.cos(tilt)
    return out


def channel_shapes(mode: str, slope: float, g, config: SynthConfig | None = None, subject: int = 0) -> dict[str, np.ndarray]:
    """Noise-free sagittal channels at phases ``g`` for one subject, before mounting."""
    config = config or SynthConfig(style=0.0)
    style = _subject_style(config, subject)
    g = np.asarray(g, dtype=float)
    return {ch: _shape(style, mode, slope, ch, g) for ch in SAGITTAL}


def _stride_phase(n_stance: int, n_swing: int) -> np.ndarray:
    stance = LIFTOFF_PHASE * np.arange(n_stance) / n_stance
    swing = LIFTOFF_PHASE + (100.0 - LIFTOFF_PHASE) * np.arange(n_swing) / n_swing
    return np.concatenate([stance, swing])


def _stride_force(force: float, n_stance: int, n_swing: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    u = np.arange(n_stance) / n_stance
    total = force * (0.6 + 0.4 * np.sin(np.pi * u))
    heel = np.concatenate([total * (1.0 - u) ** 2, np.zeros(n_swing)])
    ball = np.concatenate([total * 2.0 * u * (1.0 - u), np.zeros(n_swing)])
    toe = np.concatenate([total * u * u, np.zeros(n_swing)])
    return heel, toe, ball


def generate_session(
    config: SynthConfig,
    subject: int = 0,
    session: int = 0,
    schedule=None,
) -> SynthSession:
    """Generate one walking session for ``subject``.

    ``schedule`` defaults to ``config.schedule`` and then to
    ``default_schedule(config.slopes[session])``. Identical arguments give
    bitwise-identical output.
    """
    if schedule is None:
        schedule = config.schedule
    if schedule is None:
        if session >= len(config.slopes):
            raise InvalidConfigError(f"session {session} has no slope in {config.slopes}")
        schedule = default_schedule(config.slopes[session])
    schedule = tuple(tuple(b) for b in schedule)
    validate_schedule(schedule)

    fs = config.sample_rate
    style = _subject_style(config, subject)
    mounting = _session_mounting(config, subject, session)
    timing_rng = np.random.default_rng(np.random.SeedSequence([config.seed, subject, session, 2]))
    noise_rng = np.random.default_rng(np.random.SeedSequence([config.seed, subject, session, 1]))
    lo, hi = config.stride_duration

    # one entry per stride: (mode, slope, previous mode, previous slope, n_stance, n_swing)
    strides = []
    prev = None
    for mode, slope, count in schedule:
        for j in range(count):
            d = style.duration * _DURATION_FACTOR[mode] + config.style * timing_rng.uniform(-0.04, 0.04)
            d = min(max(d, lo + 0.01), hi - 0.01)
            n = int(round(d * fs))
            frac = style.stance + _STANCE_SHIFT[mode] + config.style * timing_rng.uniform(-0.01, 0.01)
            n_stance = int(round(frac * n))
            blend_from = prev if (j == 0 and prev is not None and prev[0] != mode) else None
            strides.append((mode, float(slope), blend_from, n_stance, n - n_stance))
        prev = (mode, float(slope))

    first_mode, first_slope = strides[0][0], strides[0][1]
    n_lead = min(config.lead_in, strides[0][4] - 1)
    n_tail = min(config.tail, strides[-1][3] - 1)

    phases, slopes_, modes_, in_stride = [], [], [], []
    chans = {ch: [] for ch in SAGITTAL}
    forces = {"fsr_heel": [], "fsr_toe": [], "fsr_ball": []}
    events = []
    change_indices = []

    def emit(mode, slope, blend_from, n_stance, n_swing, sl, real):
        g = _stride_phase(n_stance, n_swing)[sl]
        for ch in SAGITTAL:
            v = _shape(style, mode, slope, ch, g)
            if blend_from is not None:
                w = g / 100.0
                v = (1.0 - w) * _shape(style, blend_from[0], blend_from[1], ch, g) + w * v
            chans[ch].append(v)
        heel, toe, ball = _stride_force(style.force, n_stance, n_swing)
        forces["fsr_heel"].append(heel[sl])
        forces["fsr_toe"].append(toe[sl])
        forces["fsr_ball"].append(ball[sl])
        phases.append(g)
        slopes_.append(np.full(len(g), slope))
        modes_.append(np.full(len(g), MODES.index(mode)))
        in_stride.append(np.full(len(g), real))

    m0 = strides[0]
    emit(first_mode, first_slope, None, m0[3], m0[4], slice(m0[3] + m0[4] - n_lead, None), False)
    t = n_lead
    for mode, slope, blend_from, n_stance, n_swing in strides:
        if blend_from is not None:
            change_indices.append(t)
        emit(mode, slope, blend_from, n_stance, n_swing, slice(None), True)
        events.append(StrideEvents(t, t + n_stance, t + n_stance + n_swing))
        t += n_stance + n_swing
    last = strides[-1]
    emit(last[0], last[1], None, last[3], last[4], slice(0, n_tail), False)

    phase = np.concatenate(phases)
    n = len(phase)
    noise_std = config.channel_noise()
    imu = {}
    for ch in SAGITTAL:
        clean = mounting.gain[ch] * np.concatenate(chans[ch]) + mounting.offset[ch]
        imu[ch] = clean + noise_std[ch] * noise_rng.standard_normal(n)
    theta = 2.0 * np.pi * phase / 100.0
    imu["accel_z"] = 0.5 * np.sin(theta) + noise_std["accel_z"] * noise_rng.standard_normal(n)
    imu["gyro_x"] = 10.0 * np.sin(theta + 1.0) + noise_std["gyro_x"] * noise_rng.standard_normal(n)
    imu["gyro_y"] = 15.0 * np.cos(2.0 * theta) + noise_std["gyro_y"] * noise_rng.standard_normal(n)
    fsr = {}
    for key, parts in forces.items():
        f = np.concatenate(parts)
        if config.fsr_noise > 0:
            f = np.maximum(f + config.fsr_noise * noise_rng.standard_normal(n), 0.0)
        fsr[key] = f

    mode = np.concatenate(modes_)
    annotations = ["none"] * n
    annotations[0] = first_mode
    for i in change_indices:
        annotations[i] = MODES[int(mode[i])]

    # session files carry one stair slope magnitude; NaN marks a mixed schedule
    magnitudes = {abs(s) for m, s, _ in schedule if m != "LW"}
    if not magnitudes:
        stair = 0.0
    elif len(magnitudes) == 1:
        stair = magnitudes.pop()
    else:
        stair = float("nan")
    return SynthSession(
        subject=f"S{subject + 1:02d}",
        name=f"S{subject + 1:02d}_{session}",
        stair_slope=stair,
        sample_rate=fs,
        imu={ch: imu[ch] for ch in ("accel_x", "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z")},
        fsr=fsr,
        annotations=annotations,
        phase=phase,
        slope=np.concatenate(slopes_),
        mode=mode,
        in_stride=np.concatenate(in_stride),
        events=events,
        change_indices=change_indices,
        leg=config.leg,
        meta={"schedule": [list(b) for b in schedule], "contact_threshold": 0.3 * style.force},
    )


def generate_corpus(config: SynthConfig) -> list[SynthSession]:
    """All subjects, one session per slope (or one per subject with an explicit schedule)."""
    n_sessions = 1 if config.schedule is not None else len(config.slopes)
    return [
        generate_session(config, subject, session)
        for subject in range(config.n_subjects)
        for session in range(n_sessions)
    ]


def split_counts(n_subjects: int, ratios=(9, 2, 1)) -> tuple[int, int, int]:
    """Validation and test get ``max(1, floor(n * r / sum))`` subjects; train the rest."""
    if n_subjects < 3:
        raise InvalidSplitError(f"need at least 3 subjects for a 3-way split, got {n_subjects}")
    total = sum(ratios)
    n_val = max(1, (n_subjects * ratios[1]) // total)
    n_test = max(1, (n_subjects * ratios[2]) // total)
    n_train = n_subjects - n_val - n_test
    if n_train < 1:
        raise InvalidSplitError(f"{n_subjects} subjects leave no training subject")
    return n_train, n_val, n_test


def _subject_of(item) -> str:
    if isinstance(item, str):
        return item
    return item.subject


def split_by_subject(sessions, ratios=(9, 2, 1), seed: int | None = None, key=_subject_of):
    """Partition sessions into (train, validation, test) by subject.

    Subjects are taken in sorted order (or a seeded permutation of it), the
    first ones go to training, then validation, then test.
    """
    sessions = list(sessions)
    subjects = sorted({key(s) for s in sessions})
    n_train, n_val, _ = split_counts(len(subjects), ratios)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(len(subjects))
        subjects = [subjects[i] for i in order]
    groups = (
        set(subjects[:n_train]),
        set(subjects[n_train:n_train + n_val]),
        set(subjects[n_train + n_val:]),
    )
    return tuple([s for s in sessions if key(s) in g] for g in groups)


def with_overrides(config: SynthConfig, **kw) -> SynthConfig:
    return replace(config, **kw)
