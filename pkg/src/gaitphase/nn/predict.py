"""Task-level inference on top of ``forward``.

Both helpers accept one window (1-D) or a batch (2-D). The row-independent
kernel is used so a window gives the same bits whether it is predicted alone
or inside a batch.
"""

from __future__ import annotations

import numpy as np

from ..errors import IncompatibleModelError
from ..features import xy_to_phase
from .model import MlpModel, forward

CLASSES = ("LW", "SA", "SD")


def slope_denormalization(model: MlpModel) -> tuple[float, float]:
    d = model.meta.get("label_normalization", {}).get("slope", {"mean": 0.0, "std": 1.0})
    return float(d["mean"]), float(d["std"])


def predict_regressor(model: MlpModel, window):
    """Gait phase (%) and stair slope (deg) from the ``(x, y, slope_z)`` outputs."""
    if model.task not in ("regressor", "generic") or model.n_outputs != 3:
        raise IncompatibleModelError(f"model task {model.task!r} is not a phase/slope regressor")
    out = forward(model, window, rowwise=True)
    single = out.ndim == 1
    out = np.atleast_2d(out)
    phase = xy_to_phase(out[:, :2])
    mean, std = slope_denormalization(model)
    slope = out[:, 2] * std + mean
    if single:
        return float(phase[0]), float(slope[0])
    return phase, slope


def predict_classifier(model: MlpModel, window):
    """Most probable mode; ties resolve to the earlier class in LW, SA, SD."""
    if model.task not in ("classifier", "generic") or model.layers[-1].activation != "softmax":
        raise IncompatibleModelError(f"model task {model.task!r} is not a mode classifier")
    probs = forward(model, window, rowwise=True)
    if probs.ndim == 1:
        return CLASSES[int(np.argmax(probs))], probs
    return np.argmax(probs, axis=1), probs
