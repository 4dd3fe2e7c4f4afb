"""Fully connected networks with hand-written backpropagation.

Weights are stored as ``(fan_in, fan_out)`` so a batch ``X`` of shape
``(n, fan_in)`` maps to ``X @ W + b``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidInputError, InvalidSpecError

ACTIVATIONS = ("relu", "tanh", "linear", "softmax")
LOSSES = ("mse", "cross_entropy")
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class LayerSpec:
    input_size: int
    output_size: int
    activation: str

    def __post_init__(self):
        if self.input_size < 1 or self.output_size < 1:
            raise InvalidSpecError(f"layer sizes must be >= 1, got {self.input_size}->{self.output_size}")
        if self.activation not in ACTIVATIONS:
            raise InvalidSpecError(f"unknown activation {self.activation!r}")

    @property
    def n_params(self) -> int:
        return self.input_size * self.output_size + self.output_size


@dataclass
class MlpModel:
    layers: list[LayerSpec]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    task: str = "generic"
    meta: dict = field(default_factory=dict)

    @property
    def n_inputs(self) -> int:
        return self.layers[0].input_size

    @property
    def n_outputs(self) -> int:
        return self.layers[-1].output_size

    @property
    def n_params(self) -> int:
        return sum(s.n_params for s in self.layers)

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in fixed order ``W0, b0, W1, b1, ...`` (live references)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(
            list(self.layers),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.task,
            copy.deepcopy(self.meta),
        )

    def load_parameters(self, params: list[np.ndarray]) -> None:
        for dst, src in zip(self.parameters(), params):
            dst[...] = src


def validate_specs(specs) -> list[LayerSpec]:
    specs = list(specs)
    if not specs:
        raise InvalidSpecError("a model needs at least one layer")
    for a, b in zip(specs[:-1], specs[1:]):
        if a.output_size != b.input_size:
            raise InvalidSpecError(f"layer chain mismatch: {a.output_size} -> {b.input_size}")
    for s in specs[:-1]:
        if s.activation == "softmax":
            raise InvalidSpecError("softmax is only allowed on the final layer")
    return specs


def dense_stack(n_inputs: int, hidden: list[int], n_outputs: int, hidden_act: str, out_act: str) -> list[LayerSpec]:
    sizes = [n_inputs, *hidden, n_outputs]
    acts = [hidden_act] * len(hidden) + [out_act]
    return [LayerSpec(i, o, a) for i, o, a in zip(sizes[:-1], sizes[1:], acts)]


def regressor_specs(n_features: int = 360, layer_size: int = 128, n_hidden: int = 3) -> list[LayerSpec]:
    """ReLU hidden layers, linear output ``(x, y, slope)``."""
    return dense_stack(n_features, [layer_size] * n_hidden, 3, "relu", "linear")


def classifier_specs(n_features: int = 360, layer_size: int = 128, n_hidden: int = 2) -> list[LayerSpec]:
    """Tanh hidden layers, softmax over LW/SA/SD."""
    return dense_stack(n_features, [layer_size] * n_hidden, 3, "tanh", "softmax")


def init_model(specs, seed: int, task: str = "generic") -> MlpModel:
    """Glorot-uniform weights, zero biases; fully determined by ``seed``."""
    specs = validate_specs(specs)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for s in specs:
        limit = np.sqrt(6.0 / (s.input_size + s.output_size))
        weights.append(rng.uniform(-limit, limit, size=(s.input_size, s.output_size)))
        biases.append(np.zeros(s.output_size))
    meta = {"init": {"scheme": "glorot_uniform", "seed": int(seed)}}
    return MlpModel(specs, weights, biases, task, meta)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    if act == "softmax":
        return softmax(z)
    return z


def _affine(x: np.ndarray, w: np.ndarray, b: np.ndarray, rowwise: bool) -> np.ndarray:
    # einsum keeps each row's result independent of the batch it sits in;
    # BLAS matmul is faster but its rounding depends on the batch shape
    if rowwise:
        return np.einsum("ij,jk->ik", x, w) + b
    return x @ w + b


def make_dropout_masks(model: MlpModel, batch: int, rate: float, rng: np.random.Generator):
    """Inverted-dropout multipliers (0 or 1/(1-rate)) for every hidden layer."""
    if rate <= 0.0:
        return None
    keep = 1.0 - rate
    return [
        (rng.random((batch, s.output_size)) < keep) / keep
        for s in model.layers[:-1]
    ]


def _check_input(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.n_inputs:
        raise InvalidInputError(f"expected input of length {model.n_inputs}, got shape {np.shape(x)}")
    return x, single


def _forward_cache(model: MlpModel, x: np.ndarray, masks, rowwise: bool = False):
    """Pre-activations, activations before dropout, and layer inputs."""
    inputs = [x]
    pre, raw = [], []
    a = x
    last = len(model.layers) - 1
    for i, (s, w, b) in enumerate(zip(model.layers, model.weights, model.biases)):
        z = _affine(a, w, b, rowwise)
        h = _activate(z, s.activation)
        a = h * masks[i] if masks is not None and i < last else h
        pre.append(z)
        raw.append(h)
        inputs.append(a)
    return pre, raw, inputs


def forward(model: MlpModel, x, dropout_masks=None, rowwise: bool = False) -> np.ndarray:
    """Network output for one window (1-D) or a batch (2-D).

    Dropout is applied only when ``dropout_masks`` is given, which is the
    training case; inference needs no rescaling.
    """
    x, single = _check_input(model, x)
    _, _, inputs = _forward_cache(model, x, dropout_masks, rowwise)
    out = inputs[-1]
    return out[0] if single else out


def loss(prediction, target, kind: str) -> float:
    """Batch-mean loss. MSE averages over all components; cross entropy sums over classes."""
    p = np.asarray(prediction, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise InvalidInputError(f"prediction shape {p.shape} != target shape {t.shape}")
    if kind == "mse":
        return float(np.mean((p - t) ** 2))
    if kind == "cross_entropy":
        if p.ndim == 1:
            p, t = p[None, :], t[None, :]
        return float(np.mean(-np.sum(t * np.log(np.maximum(p, PROB_FLOOR)), axis=-1)))
    raise InvalidSpecError(f"unknown loss {kind!r}")


def backward(model: MlpModel, x, target, kind: str, dropout_masks=None):
    """Loss and exact gradients ``[(dW0, db0), (dW1, db1), ...]``.

    The probability floor inside the cross entropy is treated as inactive,
    i.e. the softmax/cross-entropy pair contributes ``(p - t) / n``.
    """
    x, single = _check_input(model, x)
    t = np.asarray(target, dtype=float)
    if single:
        t = t[None, :]
    if t.shape != (x.shape[0], model.n_outputs):
        raise InvalidInputError(f"target shape {t.shape} does not match output {(x.shape[0], model.n_outputs)}")
    n = x.shape[0]
    pre, raw, inputs = _forward_cache(model, x, dropout_masks)
    out = raw[-1]
    out_act = model.layers[-1].activation

    if kind == "mse":
        value = float(np.mean((out - t) ** 2))
        d_out = 2.0 * (out - t) / out.size
        if out_act == "softmax":
            dz = out * (d_out - np.sum(d_out * out, axis=1, keepdims=True))
        else:
            dz = _act_grad(pre[-1], out, out_act) * d_out
    elif kind == "cross_entropy":
        if out_act != "softmax":
            raise InvalidSpecError("cross entropy requires a softmax output layer")
        value = float(np.mean(-np.sum(t * np.log(np.maximum(out, PROB_FLOOR)), axis=1)))
        dz = (out - t) / n
    else:
        raise InvalidSpecError(f"unknown loss {kind!r}")

    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        grads[i] = (inputs[i].T @ dz, dz.sum(axis=0))
        if i == 0:
            break
        da = dz @ model.weights[i].T
        if dropout_masks is not None:
            da = da * dropout_masks[i - 1]
        dz = da * _act_grad(pre[i - 1], raw[i - 1], model.layers[i - 1].activation)
    return value, grads


def _act_grad(z: np.ndarray, a: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return (z > 0.0).astype(float)
    if act == "tanh":
        return 1.0 - a * a
    if act == "linear":
        return np.ones_like(z)
    raise InvalidSpecError(f"no elementwise derivative for {act!r}")
