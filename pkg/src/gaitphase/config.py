"""Pipeline configuration, loaded from YAML.

Every section is optional except ``contact_thresholds``, which must name a
threshold for each leg that appears in the data (there is no automatic
threshold selection). Example::

    contact_thresholds: {left: 30.0, right: 30.0}
    filter: {cutoff_hz: 12.0}
    pseudo_integration: {t_angle_s: 1.0, t_velocity_s: 0.3333333333333333}
    window: {n_window: 60}
    cleaning: {min_peak_angular_velocity: 1.0, min_peak_vertical_acceleration: 0.1,
               min_stride_duration: 0.8, max_stride_duration: 1.4}
    transition_margin: 258
    normalization: {source: annotation}      # or {source: range, start_s: .., end_s: ..}
    split: {ratios: [9, 2, 1], seed: null}
    regressor: {layer_size: 128, n_hidden: 3, batch_size: 2048, dropout_rate: 0.0,
                patience: 4, learning_rate: 0.001, max_epochs: 200, init_seed: 1, shuffle_seed: 2}
    classifier: {layer_size: 128, n_hidden: 2, batch_size: 256, dropout_rate: 0.15,
                 patience: 10, learning_rate: 0.001, max_epochs: 200, init_seed: 3, shuffle_seed: 4}
    synth: {seed: 0, n_subjects: 12, noise: 0.05}

``GAITPHASE_CONFIG_DIR`` names a directory whose ``config.yaml`` is used when
no ``--config`` is passed.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import yaml

from .errors import InvalidConfigError
from .segmentation import TRANSITION_MARGIN, CleaningConfig

CONFIG_ENV = "GAITPHASE_CONFIG_DIR"

# search ranges of the hyperparameter study; used as validation bounds
BATCH_SIZES = (128, 256, 512, 1024, 2048, 4096)
LAYER_SIZES = (32, 64, 128, 256, 512, 1024)
HIDDEN_LAYERS = range(1, 10)
WINDOW_RANGE = range(1, 76)
DROPOUT_RANGE = (0.0, 0.5)


@dataclass(frozen=True)
class NetworkConfig:
    layer_size: int
    n_hidden: int
    batch_size: int
    dropout_rate: float
    patience: int
    learning_rate: float = 1e-3
    max_epochs: int = 200
    init_seed: int = 1
    shuffle_seed: int = 2
    train_stride: int = 1  # use every k-th training sample

    def validate(self, name: str) -> None:
        if self.batch_size not in BATCH_SIZES:
            raise InvalidConfigError(f"{name}.batch_size must be one of {BATCH_SIZES}")
        if self.layer_size not in LAYER_SIZES:
            raise InvalidConfigError(f"{name}.layer_size must be one of {LAYER_SIZES}")
        if self.n_hidden not in HIDDEN_LAYERS:
            raise InvalidConfigError(f"{name}.n_hidden must lie in 1..9")
        if not DROPOUT_RANGE[0] <= self.dropout_rate <= DROPOUT_RANGE[1]:
            raise InvalidConfigError(f"{name}.dropout_rate must lie in [0, 0.5]")
        if self.patience < 1 or self.max_epochs < 1 or self.train_stride < 1:
            raise InvalidConfigError(f"{name}: patience, max_epochs and train_stride must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidConfigError(f"{name}.learning_rate must be > 0")


def _regressor_default() -> NetworkConfig:
    return NetworkConfig(128, 3, 2048, 0.0, 4, init_seed=1, shuffle_seed=2)


def _classifier_default() -> NetworkConfig:
    return NetworkConfig(128, 2, 256, 0.15, 10, init_seed=3, shuffle_seed=4)


@dataclass(frozen=True)
class PipelineConfig:
    contact_thresholds: dict = field(default_factory=dict)
    sample_rate: float = 200.0
    filter_cutoff: float = 12.0
    t_angle: float = 1.0
    t_velocity: float = 1.0 / 3.0
    n_window: int = 60
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    transition_margin: int = TRANSITION_MARGIN
    normalization: dict = field(default_factory=lambda: {"source": "annotation"})
    split_ratios: tuple = (9, 2, 1)
    split_seed: int | None = None
    regressor: NetworkConfig = field(default_factory=_regressor_default)
    classifier: NetworkConfig = field(default_factory=_classifier_default)
    synth: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_window not in WINDOW_RANGE:
            raise InvalidConfigError("window.n_window must lie in 1..75")
        if not 0 < self.filter_cutoff < self.sample_rate / 2:
            raise InvalidConfigError("filter cutoff must lie below Nyquist")
        if not (self.t_angle > 0 and self.t_velocity > 0):
            raise InvalidConfigError("pseudo-integration time constants must be > 0")
        if self.transition_margin < 0:
            raise InvalidConfigError("transition_margin must be >= 0")
        src = self.normalization.get("source", "annotation")
        if src not in ("annotation", "range"):
            raise InvalidConfigError("normalization.source must be 'annotation' or 'range'")
        if src == "range" and not {"start_s", "end_s"} <= set(self.normalization):
            raise InvalidConfigError("normalization range needs start_s and end_s")
        for leg, thr in self.contact_thresholds.items():
            if not float(thr) > 0:
                raise InvalidConfigError(f"contact threshold for {leg!r} must be > 0")
        self.regressor.validate("regressor")
        self.classifier.validate("classifier")

    def contact_threshold(self, leg: str) -> float:
        try:
            return float(self.contact_thresholds[leg])
        except KeyError:
            raise InvalidConfigError(
                f"no contact threshold configured for leg {leg!r}; set contact_thresholds.{leg}"
            ) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["split_ratios"] = list(self.split_ratios)
        return d


def _section(cls, data, name):
    if data is None:
        return None
    if not isinstance(data, dict):
        raise InvalidConfigError(f"section {name!r} must be a mapping")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise InvalidConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    return data


def from_dict(doc: dict | None) -> PipelineConfig:
    doc = dict(doc or {})
    kw = {}
    try:
        if "contact_thresholds" in doc:
            kw["contact_thresholds"] = {str(k): float(v) for k, v in (doc.pop("contact_thresholds") or {}).items()}
        if "filter" in doc:
            kw["filter_cutoff"] = float(doc.pop("filter")["cutoff_hz"])
        if "pseudo_integration" in doc:
            pi = doc.pop("pseudo_integration")
            kw["t_angle"] = float(pi.get("t_angle_s", 1.0))
            kw["t_velocity"] = float(pi.get("t_velocity_s", 1.0 / 3.0))
        if "window" in doc:
            kw["n_window"] = int(doc.pop("window")["n_window"])
        if "cleaning" in doc:
            kw["cleaning"] = CleaningConfig(**_section(CleaningConfig, doc.pop("cleaning"), "cleaning"))
        if "transition_margin" in doc:
            kw["transition_margin"] = int(doc.pop("transition_margin"))
        if "normalization" in doc:
            kw["normalization"] = dict(doc.pop("normalization"))
        if "split" in doc:
            sp = doc.pop("split")
            kw["split_ratios"] = tuple(int(v) for v in sp.get("ratios", (9, 2, 1)))
            kw["split_seed"] = sp.get("seed")
        for name, default in (("regressor", _regressor_default()), ("classifier", _classifier_default())):
            if name in doc:
                kw[name] = replace(default, **_section(NetworkConfig, doc.pop(name), name))
        if "synth" in doc:
            kw["synth"] = dict(doc.pop("synth"))
        if "sample_rate" in doc:
            kw["sample_rate"] = float(doc.pop("sample_rate"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidConfigError):
            raise
        raise InvalidConfigError(f"bad config value: {exc}") from None
    if doc:
        raise InvalidConfigError(f"unknown config sections: {sorted(doc)}")
    return PipelineConfig(**kw)


def load_config(path=None) -> PipelineConfig:
    """Load ``path``, else ``$GAITPHASE_CONFIG_DIR/config.yaml``, else defaults."""
    if path is None:
        env = os.environ.get(CONFIG_ENV)
        if env and (Path(env) / "config.yaml").is_file():
            path = Path(env) / "config.yaml"
    if path is None:
        return PipelineConfig()
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise InvalidConfigError(f"cannot parse {path}: {exc}") from None
    return from_dict(doc)


def dump_config(config: PipelineConfig) -> str:
    doc = {
        "contact_thresholds": dict(config.contact_thresholds),
        "filter": {"cutoff_hz": config.filter_cutoff},
        "pseudo_integration": {"t_angle_s": config.t_angle, "t_velocity_s": config.t_velocity},
        "window": {"n_window": config.n_window},
        "cleaning": asdict(config.cleaning),
        "transition_margin": config.transition_margin,
        "normalization": dict(config.normalization),
        "split": {"ratios": list(config.split_ratios), "seed": config.split_seed},
        "regressor": asdict(config.regressor),
        "classifier": asdict(config.classifier),
    }
    if config.synth:
        doc["synth"] = dict(config.synth)
    return yaml.safe_dump(doc, sort_keys=True)
