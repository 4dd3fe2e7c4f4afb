"""End-to-end processing: recording -> labelled windows -> models -> predictions.

Preprocessing order: Butterworth low-pass on the three sagittal channels,
pseudo-integration of the filtered signals, stride segmentation from the FSR
sum, cleaning, phase labelling, transition exclusion and normalization with
statistics from the session's own steady level walking.

All filters are primed with the first sample (steady state for a constant
input), which removes the gravity transient without looking ahead.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig, PipelineConfig
from .errors import EmptyDatasetError, IncompatibleModelError, InvalidConfigError, UnsupportedRateError
from .evaluation import MetricsReport, build_report
from .features import (
    CHANNELS,
    LAYOUT,
    N_CHANNELS,
    NormalizationStats,
    WindowSpec,
    compute_normalization_stats,
    gather_windows,
    normalize,
    phase_to_xy,
    window_view,
    xy_to_phase,
)
from .nn.model import classifier_specs, forward, init_model, regressor_specs
from .nn.predict import CLASSES, predict_classifier, predict_regressor
from .nn.training import TrainConfig, train
from .segmentation import (
    CleaningReport,
    ContactConfig,
    StrideEvents,
    TransitionExclusionConfig,
    clean_strides,
    detect_ground_contact,
    exclude_transitions,
    extract_stride_events,
    fsr_sum_series,
    label_series,
)
from .sessionio import SessionRecording
from .signal import (
    FilterState,
    PseudoIntegratorSpec,
    apply_filter,
    design_butterworth2,
    filter_step,
    prime_state,
    pseudo_integrator_coefficients,
)

LW, SA, SD = 0, 1, 2


@dataclass
class PreprocessedSession:
    subject: str
    source: str
    timestamps: np.ndarray
    channels: np.ndarray  # (6, n) filtered + pseudo-integrated, not normalized
    normalized: np.ndarray  # (6, n)
    stats: NormalizationStats
    events: list[StrideEvents]  # strides that survived cleaning
    cleaning: CleaningReport
    phase: np.ndarray  # NaN outside kept strides
    slope: np.ndarray  # NaN before the first annotation
    mode: np.ndarray  # -1 before the first annotation
    steady: np.ndarray  # False inside transition exclusion zones
    keep: np.ndarray  # labelled, steady and with a full window of history
    change_indices: list[int]
    n_window: int
    normalization_selection: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return len(self.timestamps)

    def report(self) -> dict:
        return {
            "subject": self.subject,
            "source": self.source,
            "n_samples": self.n_samples,
            "n_strides_kept": len(self.events),
            "n_keep_samples": int(self.keep.sum()),
            "cleaning": self.cleaning.to_dict(),
            "mode_changes": list(self.change_indices),
            "normalization": {"selection": self.normalization_selection, **self.stats.to_dict()},
        }


def filter_channels(recording: SessionRecording, config: PipelineConfig) -> np.ndarray:
    """Six input channels: filtered accel_x, accel_y, gyro_z and their pseudo-integrals."""
    coeffs = design_butterworth2(config.filter_cutoff, config.sample_rate)
    filtered = []
    for raw in (recording.accel_x, recording.accel_y, recording.gyro_z):
        raw = np.asarray(raw, dtype=float)
        filtered.append(apply_filter(coeffs, raw, prime_state(coeffs, float(raw[0]))))
    pseudo = []
    for sig, t in ((filtered[0], config.t_velocity), (filtered[1], config.t_velocity), (filtered[2], config.t_angle)):
        c = pseudo_integrator_coefficients(PseudoIntegratorSpec(t, config.sample_rate))
        pseudo.append(apply_filter(c, sig, prime_state(c, float(sig[0]))))
    return np.stack(filtered + pseudo)


def _normalization_mask(rec: SessionRecording, config: PipelineConfig, keep: np.ndarray, mode: np.ndarray):
    norm = config.normalization
    if norm.get("source", "annotation") == "range":
        t = rec.timestamps
        mask = (t >= float(norm["start_s"])) & (t <= float(norm["end_s"]))
        selection = {"source": "range", "start_s": float(norm["start_s"]), "end_s": float(norm["end_s"])}
    else:
        mask = keep & (mode == LW)
        selection = {"source": "annotation", "mode": "LW"}
    selection["n_samples"] = int(mask.sum())
    return mask, selection


def run_preprocess(recording: SessionRecording, config: PipelineConfig, stats: NormalizationStats | None = None) -> PreprocessedSession:
    """Filter, segment, clean, label and normalize one recording.

    ``stats`` overrides the per-session level-walking normalization.
    """
    if recording.sample_rate != config.sample_rate:
        raise UnsupportedRateError(f"recording at {recording.sample_rate:g} Hz, pipeline at {config.sample_rate:g} Hz")
    n = recording.n_samples
    channels = filter_channels(recording, config)

    f_sum = fsr_sum_series(recording.fsr_heel, recording.fsr_toe, recording.fsr_ball)
    contact = detect_ground_contact(f_sum, ContactConfig(config.contact_threshold(recording.leg)))
    events = extract_stride_events(contact)
    # cleaning looks at the filtered sagittal gyro and vertical acceleration
    candidates = [
        (ev, {"gyro_z": channels[2, ev.touchdown:ev.next_touchdown], "accel_y": channels[1, ev.touchdown:ev.next_touchdown]})
        for ev in events
    ]
    kept, cleaning = clean_strides(candidates, config.cleaning, config.sample_rate)
    if not kept:
        raise EmptyDatasetError(
            f"{recording.source or recording.subject}: no usable strides "
            f"({len(events)} detected, removals {cleaning.counts()})"
        )
    kept_events = [ev for ev, _ in kept]
    phase = label_series(kept_events, n)
    mode = recording.mode_series()
    slope = recording.slope_series()
    changes = recording.mode_change_indices()
    steady = exclude_transitions(n, changes, TransitionExclusionConfig(config.transition_margin))
    labelled = ~np.isnan(phase) & (mode >= 0)
    history = np.arange(n) >= config.n_window - 1
    keep = labelled & steady & history

    selection = {"source": "provided"}
    if stats is None:
        mask, selection = _normalization_mask(recording, config, keep, mode)
        if mask.sum() < 2:
            raise EmptyDatasetError(f"{recording.source or recording.subject}: no steady level walking for normalization")
        stats = compute_normalization_stats(channels[:, mask])
    return PreprocessedSession(
        subject=recording.subject,
        source=recording.source,
        timestamps=np.asarray(recording.timestamps, dtype=float),
        channels=channels,
        normalized=normalize(channels, stats),
        stats=stats,
        events=kept_events,
        cleaning=cleaning,
        phase=phase,
        slope=slope,
        mode=mode,
        steady=steady,
        keep=keep,
        change_indices=list(changes),
        n_window=config.n_window,
        normalization_selection=selection,
    )


class WindowDataset:
    """Windows over several sessions, gathered lazily per batch.

    Channels of all sessions are concatenated; only sample indices whose
    whole window lies inside one session are used.
    """

    def __init__(self, sessions, n_window: int, targets, sample_mask=None, stride: int = 1):
        self.n_window = n_window
        blocks, idx, tgt = [], [], []
        offset = 0
        for k, s in enumerate(sessions):
            mask = s.keep if sample_mask is None else sample_mask[k]
            local = np.flatnonzero(mask & (np.arange(s.n_samples) >= n_window - 1))[::stride]
            blocks.append(s.normalized)
            idx.append(local + offset)
            tgt.append(targets(s, local))
            offset += s.n_samples
        if offset == 0 or sum(len(i) for i in idx) == 0:
            raise EmptyDatasetError("no labelled samples to build a dataset from")
        self.channels = np.concatenate(blocks, axis=1)
        self.indices = np.concatenate(idx)
        self.targets = np.concatenate(tgt)
        self._view = window_view(self.channels, WindowSpec(n_window))

    def __len__(self) -> int:
        return len(self.indices)

    def take(self, idx):
        samples = self.indices[idx]
        return gather_windows(self._view, samples - (self.n_window - 1)), self.targets[idx]


def regression_targets(slope_mean: float, slope_std: float):
    def targets(s: PreprocessedSession, local):
        xy = phase_to_xy(s.phase[local])
        z = (s.slope[local] - slope_mean) / slope_std
        return np.column_stack([xy, z])
    return targets


def classification_targets(s: PreprocessedSession, local):
    return np.eye(len(CLASSES))[s.mode[local]]


def slope_label_stats(sessions) -> tuple[float, float]:
    values = np.concatenate([s.slope[s.keep] for s in sessions])
    mean = float(values.mean())
    std = float(values.std())
    return mean, (std if std > 0 else 1.0)


def _feature_layout(config: PipelineConfig, n_window: int) -> dict:
    return {
        "channels": list(CHANNELS),
        "n_window": n_window,
        "order": LAYOUT,
        "sample_rate_hz": config.sample_rate,
        "filter_cutoff_hz": config.filter_cutoff,
        "t_angle_s": config.t_angle,
        "t_velocity_s": config.t_velocity,
    }


def _train_config(net: NetworkConfig, loss: str) -> TrainConfig:
    return TrainConfig(
        batch_size=net.batch_size,
        dropout_rate=net.dropout_rate,
        patience=net.patience,
        loss=loss,
        learning_rate=net.learning_rate,
        max_epochs=net.max_epochs,
        seed=net.shuffle_seed,
    )


def train_regressor(train_sessions, val_sessions, config: PipelineConfig, progress=None):
    """Gait phase / slope network; returns ``(model, history)``."""
    n_window = config.n_window
    net = config.regressor
    mean, std = slope_label_stats(train_sessions)
    targets = regression_targets(mean, std)
    train_ds = WindowDataset(train_sessions, n_window, targets, stride=net.train_stride)
    val_ds = WindowDataset(val_sessions, n_window, targets)
    model = init_model(regressor_specs(N_CHANNELS * n_window, net.layer_size, net.n_hidden), net.init_seed, task="regressor")
    model.meta.update({
        "feature_layout": _feature_layout(config, n_window),
        "label_normalization": {"slope": {"mean": mean, "std": std}, "phase": "unit-circle"},
        "outputs": ["phase_x", "phase_y", "slope_z"],
        "seeds": {"init": net.init_seed, "shuffle": net.shuffle_seed},
        "data": {"n_train": len(train_ds), "n_val": len(val_ds), "train_stride": net.train_stride},
    })
    return train(model, train_ds, val_ds, _train_config(net, "mse"), progress)


def train_classifier(train_sessions, val_sessions, config: PipelineConfig, n_window: int | None = None, progress=None):
    """Locomotion mode network; ``n_window=1`` gives the no-history variant."""
    n_window = config.n_window if n_window is None else n_window
    net = config.classifier
    train_ds = WindowDataset(train_sessions, n_window, classification_targets, stride=net.train_stride)
    val_ds = WindowDataset(val_sessions, n_window, classification_targets)
    model = init_model(classifier_specs(N_CHANNELS * n_window, net.layer_size, net.n_hidden), net.init_seed, task="classifier")
    model.meta.update({
        "feature_layout": _feature_layout(config, n_window),
        "classes": list(CLASSES),
        "seeds": {"init": net.init_seed, "shuffle": net.shuffle_seed},
        "data": {"n_train": len(train_ds), "n_val": len(val_ds), "train_stride": net.train_stride},
    })
    return train(model, train_ds, val_ds, _train_config(net, "cross_entropy"), progress)


def model_window(model) -> int:
    layout = model.meta.get("feature_layout")
    if not layout:
        raise IncompatibleModelError("model has no feature layout")
    if layout.get("channels") != list(CHANNELS) or layout.get("order") != LAYOUT:
        raise IncompatibleModelError(f"model feature layout {layout} does not match {list(CHANNELS)} {LAYOUT}")
    n_window = int(layout["n_window"])
    if model.n_inputs != N_CHANNELS * n_window:
        raise IncompatibleModelError(f"model expects {model.n_inputs} inputs, layout implies {N_CHANNELS * n_window}")
    return n_window


def check_model_config(model, config: PipelineConfig) -> None:
    layout = model.meta.get("feature_layout", {})
    for key, value in (("sample_rate_hz", config.sample_rate), ("filter_cutoff_hz", config.filter_cutoff),
                       ("t_angle_s", config.t_angle), ("t_velocity_s", config.t_velocity)):
        if key in layout and float(layout[key]) != float(value):
            raise IncompatibleModelError(f"model was trained with {key}={layout[key]}, config has {value}")


@dataclass
class SessionPredictions:
    """Per-sample predictions; NaN / -1 before the window is full."""

    timestamps: np.ndarray
    phase: np.ndarray | None = None
    slope: np.ndarray | None = None
    mode: np.ndarray | None = None
    probabilities: np.ndarray | None = None
    first_index: int = 0


def _chunks(n: int, size: int = 4096):
    for start in range(0, n, size):
        yield start, min(n, start + size)


def predict_session(prep: PreprocessedSession, regressor=None, classifier=None) -> SessionPredictions:
    """Batch inference over every sample that has a full window."""
    n = prep.n_samples
    out = SessionPredictions(prep.timestamps)
    firsts = []
    if regressor is not None:
        w = model_window(regressor)
        view = window_view(prep.normalized, WindowSpec(w))
        out.phase = np.full(n, np.nan)
        out.slope = np.full(n, np.nan)
        for a, b in _chunks(view.shape[1]):
            ph, sl = predict_regressor(regressor, gather_windows(view, slice(a, b)))
            out.phase[a + w - 1:b + w - 1] = ph
            out.slope[a + w - 1:b + w - 1] = sl
        firsts.append(w - 1)
    if classifier is not None:
        w = model_window(classifier)
        view = window_view(prep.normalized, WindowSpec(w))
        out.mode = np.full(n, -1, dtype=np.int64)
        out.probabilities = np.full((n, len(CLASSES)), np.nan)
        for a, b in _chunks(view.shape[1]):
            m, p = predict_classifier(classifier, gather_windows(view, slice(a, b)))
            out.mode[a + w - 1:b + w - 1] = m
            out.probabilities[a + w - 1:b + w - 1] = p
        firsts.append(w - 1)
    out.first_index = max(firsts) if firsts else 0
    return out


def evaluate_sessions(sessions, split: str, regressor=None, classifier=None, mask_fn=None, circular: bool = True) -> MetricsReport:
    """Metrics over the ``keep`` samples (or ``mask_fn(session)``) of all sessions."""
    ph_p, ph_t, sl_p, sl_t, md_p, md_t = [], [], [], [], [], []
    for s in sessions:
        pred = predict_session(s, regressor, classifier)
        mask = s.keep if mask_fn is None else mask_fn(s)
        mask = mask & (np.arange(s.n_samples) >= pred.first_index)
        if regressor is not None:
            ph_p.append(pred.phase[mask])
            ph_t.append(s.phase[mask])
            sl_p.append(pred.slope[mask])
            sl_t.append(s.slope[mask])
        if classifier is not None:
            md_p.append(pred.mode[mask])
            md_t.append(s.mode[mask])
    cat = np.concatenate
    report = build_report(
        split,
        phase=(cat(ph_p), cat(ph_t)) if regressor is not None else None,
        slope=(cat(sl_p), cat(sl_t)) if regressor is not None else None,
        modes=(cat(md_p), cat(md_t)) if classifier is not None else None,
        circular=circular,
    )
    report.extra["n_sessions"] = len(sessions)
    return report


def transition_stride_mask(prep: PreprocessedSession, margin: int) -> tuple[np.ndarray, np.ndarray]:
    """Sample masks of kept strides that touch / do not touch a transition zone."""
    n = prep.n_samples
    trans = np.zeros(n, dtype=bool)
    steady = np.zeros(n, dtype=bool)
    for ev in prep.events:
        span = slice(ev.touchdown, ev.next_touchdown)
        touches = any(ev.touchdown <= c + margin and ev.next_touchdown > c - margin for c in prep.change_indices)
        (trans if touches else steady)[span] = True
    history = np.arange(n) >= prep.n_window - 1
    return trans & history, steady & history


class StreamEngine:
    """Sample-by-sample inference that reproduces ``predict_session`` exactly."""

    def __init__(self, config: PipelineConfig, stats: NormalizationStats, regressor=None, classifier=None):
        if regressor is None and classifier is None:
            raise IncompatibleModelError("streaming needs at least one model")
        self.regressor = regressor
        self.classifier = classifier
        self.windows = {}
        for m in (regressor, classifier):
            if m is not None:
                check_model_config(m, config)
                self.windows[id(m)] = model_window(m)
        self.n_window = max(self.windows.values())
        self.config = config
        self.mean = np.asarray(stats.mean)
        self.std = np.asarray(stats.std)
        self.butter = design_butterworth2(config.filter_cutoff, config.sample_rate)
        self.pi_velo = pseudo_integrator_coefficients(PseudoIntegratorSpec(config.t_velocity, config.sample_rate))
        self.pi_angle = pseudo_integrator_coefficients(PseudoIntegratorSpec(config.t_angle, config.sample_rate))
        self.buffer = np.zeros((N_CHANNELS, self.n_window))
        self.count = 0
        self.states = None

    def _prime(self, ax: float, ay: float, gz: float) -> None:
        b = self.butter
        self.states = [prime_state(b, ax), prime_state(b, ay), prime_state(b, gz)]
        self.pstates = None

    def push(self, ax: float, ay: float, gz: float):
        """Feed one raw sample; returns ``(phase, slope, mode, probs)`` once the window is full."""
        if self.states is None:
            self._prime(ax, ay, gz)
        fx = filter_step(self.butter, self.states[0], ax)
        fy = filter_step(self.butter, self.states[1], ay)
        fz = filter_step(self.butter, self.states[2], gz)
        if self.pstates is None:
            self.pstates = [prime_state(self.pi_velo, fx), prime_state(self.pi_velo, fy), prime_state(self.pi_angle, fz)]
        vx = filter_step(self.pi_velo, self.pstates[0], fx)
        vy = filter_step(self.pi_velo, self.pstates[1], fy)
        pa = filter_step(self.pi_angle, self.pstates[2], fz)
        sample = (np.array([fx, fy, fz, vx, vy, pa]) - self.mean) / self.std
        self.buffer[:, :-1] = self.buffer[:, 1:]
        self.buffer[:, -1] = sample
        self.count += 1
        if self.count < self.n_window:
            return None
        phase = slope = mode = probs = None
        if self.regressor is not None:
            w = self.windows[id(self.regressor)]
            x = self.buffer[:, -w:].reshape(1, -1)
            ph, sl = predict_regressor(self.regressor, x)
            phase, slope = float(ph[0]), float(sl[0])
        if self.classifier is not None:
            w = self.windows[id(self.classifier)]
            x = self.buffer[:, -w:].reshape(1, -1)
            m, p = predict_classifier(self.classifier, x)
            mode, probs = int(m[0]), p[0]
        return phase, slope, mode, probs


def format_prediction(t: float, phase, slope, mode, probs) -> str:
    fields = [repr(float(t))]
    fields.append("" if phase is None else repr(phase))
    fields.append("" if slope is None else repr(slope))
    fields.append("" if mode is None else CLASSES[mode])
    if probs is None:
        fields.extend(["", "", ""])
    else:
        fields.extend(repr(float(v)) for v in probs)
    return ",".join(fields)


STREAM_HEADER = "timestamp_s,phase_pct,slope_deg,mode,p_LW,p_SA,p_SD"


def run_stream(recording: SessionRecording, config: PipelineConfig, regressor=None, classifier=None,
               stats: NormalizationStats | None = None, realtime: bool = False, write=None, latencies=None,
               cpu_latencies=None):
    """Replay a recording sample by sample and emit one line per prediction.

    Normalization statistics default to the recording's own level-walking
    calibration. With ``realtime`` the loop is paced at the sample interval.
    ``latencies`` and ``cpu_latencies`` collect per-sample wall and thread CPU
    time of ``StreamEngine.push`` in seconds.
    Returns the list of ``(index, phase, slope, mode, probs)`` tuples.
    """
    if stats is None:
        stats = run_preprocess(recording, config).stats
    engine = StreamEngine(config, stats, regressor, classifier)
    if write is None:
        write = lambda line: sys.stdout.write(line + "\n")  # noqa: E731
    write(STREAM_HEADER)
    dt = 1.0 / config.sample_rate
    ax = np.asarray(recording.accel_x, dtype=float).tolist()
    ay = np.asarray(recording.accel_y, dtype=float).tolist()
    gz = np.asarray(recording.gyro_z, dtype=float).tolist()
    ts = np.asarray(recording.timestamps, dtype=float).tolist()
    results = []
    start = time.perf_counter()
    for i in range(len(ts)):
        t0 = time.perf_counter()
        c0 = time.thread_time()
        res = engine.push(ax[i], ay[i], gz[i])
        if cpu_latencies is not None:
            cpu_latencies.append(time.thread_time() - c0)
        if latencies is not None:
            latencies.append(time.perf_counter() - t0)
        if res is not None:
            results.append((i, *res))
            write(format_prediction(ts[i], *res))
        if realtime:
            delay = start + (i + 1) * dt - time.perf_counter()
            if delay > 0:
                time.sleep(delay)
    return results


def ensure_thresholds(config: PipelineConfig, legs) -> None:
    missing = [leg for leg in legs if leg not in config.contact_thresholds]
    if missing:
        raise InvalidConfigError(f"contact thresholds missing for legs {missing}")
