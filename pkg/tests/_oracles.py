"""Independent reference computations shared by several test modules."""

from __future__ import annotations

import numpy as np

from gaitphase.nn.model import forward, loss


def numeric_gradients(model, x, target, kind, masks=None, h=1e-6):
    """Central finite differences of the loss for every parameter."""
    grads = []
    for p in model.parameters():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up = loss(forward(model, x, masks), target, kind)
            flat[i] = old - h
            down = loss(forward(model, x, masks), target, kind)
            flat[i] = old
            gflat[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def relative_error(a, b) -> float:
    """``|a - b| / (|a| + |b|)`` in the Euclidean norm over one parameter tensor."""
    a, b = np.ravel(a), np.ravel(b)
    den = np.linalg.norm(a) + np.linalg.norm(b)
    return 0.0 if den == 0 else float(np.linalg.norm(a - b) / den)


def gradient_check(model, x, target, kind, masks=None):
    """Worst per-tensor relative error and worst floored elementwise error."""
    from gaitphase.nn.model import backward

    _, pairs = backward(model, x, target, kind, masks)
    analytic = [g for pair in pairs for g in pair]
    numeric = numeric_gradients(model, x, target, kind, masks)
    worst = max(relative_error(a, n) for a, n in zip(analytic, numeric))
    elem = max(
        float(np.max(np.abs(a - n) / (np.maximum(np.abs(a), np.abs(n)) + 1e-7)))
        for a, n in zip(analytic, numeric)
    )
    return worst, elem
