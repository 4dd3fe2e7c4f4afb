"""Error measures and report serialization.

Text reports are ``key: value`` lines; machine-readable reports are JSON with
sorted keys. Both are pure functions of the report contents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidComparisonError, InvalidParameterError

CLASSES = ("LW", "SA", "SD")


def _pair(predicted, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predicted, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size == 0 or t.size == 0:
        raise InvalidParameterError("metric inputs must be non-empty")
    if p.shape != t.shape:
        raise InvalidParameterError(f"length mismatch: {p.size} vs {t.size}")
    return p, t


def circular_mae(predicted, truth, circular: bool = True) -> float:
    """Mean gait phase error in %, measuring distance around the 0/100 wrap.

    ``circular=False`` gives the plain absolute difference for comparison.
    """
    p, t = _pair(predicted, truth)
    d = np.abs(p - t)
    if circular:
        d = np.minimum(d, 100.0 - d)
    return float(np.mean(d))


def slope_mae(predicted, truth) -> float:
    p, t = _pair(predicted, truth)
    return float(np.mean(np.abs(p - t)))


def _class_indices(labels) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.dtype.kind in "US" or arr.dtype == object:
        lookup = {c: i for i, c in enumerate(CLASSES)}
        try:
            return np.array([lookup[str(v)] for v in arr.ravel()], dtype=int)
        except KeyError as exc:
            raise InvalidParameterError(f"unknown mode label {exc}") from None
    return arr.astype(int).ravel()


def classification_metrics(predicted, truth) -> tuple[float, np.ndarray]:
    """Accuracy (%) and confusion matrix (rows truth, columns prediction, order LW/SA/SD)."""
    p = _class_indices(predicted)
    t = _class_indices(truth)
    if p.size == 0:
        raise InvalidParameterError("metric inputs must be non-empty")
    if p.shape != t.shape:
        raise InvalidParameterError(f"length mismatch: {p.size} vs {t.size}")
    k = len(CLASSES)
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (t, p), 1)
    accuracy = 100.0 * np.trace(confusion) / confusion.sum()
    return float(accuracy), confusion


@dataclass
class MetricsReport:
    split: str
    n_samples: int
    gait_phase_mae: float | None = None
    slope_mae: float | None = None
    accuracy: float | None = None
    confusion: list[list[int]] | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "n_samples": self.n_samples,
            "gait_phase_mae": self.gait_phase_mae,
            "slope_mae": self.slope_mae,
            "accuracy": self.accuracy,
            "confusion": self.confusion,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            d["split"], d["n_samples"], d.get("gait_phase_mae"), d.get("slope_mae"),
            d.get("accuracy"), d.get("confusion"), d.get("extra", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_text(self) -> str:
        lines = [f"split: {self.split}", f"n_samples: {self.n_samples}"]
        if self.gait_phase_mae is not None:
            lines.append(f"gait_phase_mae_percent: {self.gait_phase_mae:.4f}")
        if self.slope_mae is not None:
            lines.append(f"slope_mae_deg: {self.slope_mae:.4f}")
        if self.accuracy is not None:
            lines.append(f"accuracy_percent: {self.accuracy:.4f}")
        if self.confusion is not None:
            for name, row in zip(CLASSES, self.confusion):
                lines.append(f"confusion_{name}: " + " ".join(str(v) for v in row))
        for key in sorted(self.extra):
            lines.append(f"{key}: {self.extra[key]}")
        return "\n".join(lines) + "\n"


def build_report(split: str, phase=None, slope=None, modes=None, circular: bool = True) -> MetricsReport:
    """Assemble a report from ``(predicted, truth)`` pairs; any may be None."""
    n = None
    report = MetricsReport(split=split, n_samples=0)
    if phase is not None:
        report.gait_phase_mae = circular_mae(*phase, circular=circular)
        n = len(phase[1])
    if slope is not None:
        report.slope_mae = slope_mae(*slope)
        n = len(slope[1])
    if modes is not None:
        acc, conf = classification_metrics(*modes)
        report.accuracy = acc
        report.confusion = conf.tolist()
        n = int(conf.sum())
    report.n_samples = int(n or 0)
    return report


@dataclass(frozen=True)
class AblationRow:
    split: str
    windowed_accuracy: float
    windowless_accuracy: float

    @property
    def delta(self) -> float:
        return self.windowed_accuracy - self.windowless_accuracy

    @property
    def windowed_better(self) -> bool:
        return self.windowed_accuracy >= self.windowless_accuracy

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "windowed_accuracy": self.windowed_accuracy,
            "windowless_accuracy": self.windowless_accuracy,
            "delta": self.delta,
            "windowed_better": self.windowed_better,
        }


def ablation_compare(windowed, windowless) -> list[AblationRow]:
    """Accuracy with vs without time history, per split.

    Accepts two reports or two ``{split: report}`` mappings over the same splits.
    """
    if isinstance(windowed, MetricsReport):
        windowed = {windowed.split: windowed}
    if isinstance(windowless, MetricsReport):
        windowless = {windowless.split: windowless}
    if set(windowed) != set(windowless):
        raise InvalidComparisonError(f"split sets differ: {sorted(windowed)} vs {sorted(windowless)}")
    rows = []
    for split in windowed:
        a, b = windowed[split], windowless[split]
        if a.n_samples != b.n_samples:
            raise InvalidComparisonError(
                f"split {split!r}: {a.n_samples} windowed vs {b.n_samples} windowless samples"
            )
        if a.accuracy is None or b.accuracy is None:
            raise InvalidComparisonError(f"split {split!r} lacks classification accuracy")
        rows.append(AblationRow(split, a.accuracy, b.accuracy))
    return rows
