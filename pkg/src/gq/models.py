"""Tiny dense and recurrent networks with hand-written backprop.

Small enough that every gradient can be cross-checked against central
finite differences, which is how the backward passes are verified.
"""

from dataclasses import dataclass, field

import numpy as np

from .checkpoint import Checkpoint
from .errors import InvalidTask, ShapeError

ACTIVATIONS = ("tanh", "relu", "identity", "softmax-output")


@dataclass
class Layer:
    name: str
    kernel: np.ndarray               # (fan_in, fan_out), float64
    bias: "np.ndarray | None"        # (fan_out,) or None (recurrent kernels)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class ToyModel:
    topology: str                    # "mlp" | "elman-rnn"
    layers: "list[Layer]"
    # Codebooks captured at the hard-compression step; once present, the
    # named kernel stays frozen on those centroids.
    hard_codebooks: dict = field(default_factory=dict)

    def layer(self, name: str) -> Layer:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)

    def kernel_names(self) -> "list[str]":
        return [f"{l.name}.kernel" for l in self.layers]

    def n_params(self) -> int:
        return sum(
            l.kernel.size + (l.bias.size if l.bias is not None else 0) for l in self.layers
        )

    def to_checkpoint(self, metadata: "dict[str, str] | None" = None) -> Checkpoint:
        ckpt = Checkpoint(metadata=dict(metadata or {}))
        for l in self.layers:
            ckpt.add(f"{l.name}.kernel", l.kernel)
            if l.bias is not None:
                ckpt.add(f"{l.name}.bias", l.bias)
        return ckpt


def _act(name, z):
    if name == "tanh":
        return np.tanh(z)
    if name == "relu":
        return np.maximum(z, 0.0)
    return z  # identity and softmax-output (softmax applied by the loss)


def _act_grad(name, z, a):
    if name == "tanh":
        return 1.0 - a * a
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


def _softmax(logits):
    e = np.exp(logits - logits.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def make_model(task: str, seed: int, hidden: int = 16) -> ToyModel:
    """Model sized for a task; all three stay under 1e3 parameters so the
    finite-difference oracle remains affordable."""
    rng = np.random.default_rng(seed)

    def init(fan_in, fan_out):
        return rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out))

    if task == "two-gaussians":
        return ToyModel("mlp", [
            Layer("dense0", init(2, hidden), np.zeros(hidden), "tanh"),
            Layer("dense1", init(hidden, 2), np.zeros(2), "softmax-output"),
        ])
    if task == "sine-regression":
        return ToyModel("mlp", [
            Layer("dense0", init(1, hidden), np.zeros(hidden), "tanh"),
            Layer("dense1", init(hidden, 1), np.zeros(1), "identity"),
        ])
    if task == "parity-sequence":
        h = min(hidden, 8)
        return ToyModel("elman-rnn", [
            Layer("in_hidden", init(1, h), np.zeros(h), "tanh"),
            Layer("hidden_hidden", init(h, h), None, "identity"),
            Layer("hidden_out", init(h, 2), np.zeros(2), "softmax-output"),
        ])
    raise InvalidTask(f"no model defined for task {task!r}")


def loss_kind(task: str) -> str:
    return "mse" if task == "sine-regression" else "cross-entropy"


# -- forward ----------------------------------------------------------------

def forward(model: ToyModel, x: np.ndarray):
    """Returns (output, cache).  For classifiers output is class
    probabilities; for regression the raw last-layer values."""
    if model.topology == "mlp":
        a = x
        cache = [("input", a, None)]
        for layer in model.layers:
            z = a @ layer.kernel + layer.bias
            a = _softmax(z) if layer.activation == "softmax-output" else _act(layer.activation, z)
            cache.append((layer.name, a, z))
        return a, cache

    if model.topology != "elman-rnn":
        raise ValueError(f"unknown topology {model.topology!r}")
    wx, wh, wo = model.layers
    batch, steps, _ = x.shape
    h = np.zeros((batch, wx.kernel.shape[1]))
    hs = [h]
    zs = []
    for t in range(steps):
        z = x[:, t] @ wx.kernel + h @ wh.kernel + wx.bias
        h = np.tanh(z)
        zs.append(z)
        hs.append(h)
    logits = h @ wo.kernel + wo.bias
    probs = _softmax(logits)
    return probs, (hs, zs, probs)


def loss_and_outputs(model: ToyModel, x, y, task: str):
    out, cache = forward(model, x)
    if loss_kind(task) == "mse":
        pred = out[:, 0]
        loss = float(np.mean((pred - y) ** 2))
    else:
        p = out[np.arange(len(y)), y]
        loss = float(-np.mean(np.log(np.maximum(p, 1e-300))))
    return loss, out, cache


# -- backward ---------------------------------------------------------------

def backprop(model: ToyModel, x, y, task: str):
    """Gradient of the batch loss w.r.t. every parameter.

    Returns (loss, grads) with grads keyed like "dense0.kernel".
    """
    loss, out, cache = loss_and_outputs(model, x, y, task)
    batch = len(y)
    grads = {}

    if model.topology == "mlp":
        last = model.layers[-1]
        if last.activation == "softmax-output":
            delta = out.copy()
            delta[np.arange(batch), y] -= 1.0
            delta /= batch
        else:  # identity output with MSE
            delta = np.zeros_like(out)
            delta[:, 0] = 2.0 * (out[:, 0] - y) / batch
        for li in range(len(model.layers) - 1, -1, -1):
            layer = model.layers[li]
            _, a_prev, _ = cache[li]
            if li < len(model.layers) - 1:
                _, a, z = cache[li + 1]
                delta = delta * _act_grad(layer.activation, z, a)
            grads[f"{layer.name}.kernel"] = a_prev.T @ delta
            grads[f"{layer.name}.bias"] = delta.sum(axis=0)
            if li > 0:
                delta = delta @ layer.kernel.T
        return loss, grads

    # Elman backprop through time.
    wx, wh, wo = model.layers
    hs, zs, probs = cache
    steps = len(zs)
    delta_out = probs.copy()
    delta_out[np.arange(batch), y] -= 1.0
    delta_out /= batch

    grads[f"{wo.name}.kernel"] = hs[-1].T @ delta_out
    grads[f"{wo.name}.bias"] = delta_out.sum(axis=0)
    g_wx = np.zeros_like(wx.kernel)
    g_wh = np.zeros_like(wh.kernel)
    g_b = np.zeros_like(wx.bias)
    dh = delta_out @ wo.kernel.T
    for t in range(steps - 1, -1, -1):
        dz = dh * (1.0 - hs[t + 1] ** 2)
        g_wx += x[:, t].T @ dz
        g_wh += hs[t].T @ dz
        g_b += dz.sum(axis=0)
        dh = dz @ wh.kernel.T
    grads[f"{wx.name}.kernel"] = g_wx
    grads[f"{wx.name}.bias"] = g_b
    grads[f"{wh.name}.kernel"] = g_wh
    return loss, grads


def finite_difference_grads(model: ToyModel, x, y, task: str, h: float = 1e-4):
    """Central-difference gradient oracle over every parameter.

    Only intended for models below ~1e3 parameters.
    """
    if model.n_params() > 1000:
        raise ShapeError("finite differences limited to models with <= 1e3 parameters")
    grads = {}
    for layer in model.layers:
        tensors = [("kernel", layer.kernel)]
        if layer.bias is not None:
            tensors.append(("bias", layer.bias))
        for field_name, arr in tensors:
            g = np.zeros_like(arr)
            flat = arr.ravel()
            gf = g.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                lp, _, _ = loss_and_outputs(model, x, y, task)
                flat[i] = orig - h
                lm, _, _ = loss_and_outputs(model, x, y, task)
                flat[i] = orig
                gf[i] = (lp - lm) / (2.0 * h)
            grads[f"{layer.name}.{field_name}"] = g
    return grads


def evaluate(model: ToyModel, x, y, task: str) -> "tuple[float, float]":
    """(loss, metric): accuracy for classifiers, MSE for regression."""
    loss, out, _ = loss_and_outputs(model, x, y, task)
    if loss_kind(task) == "mse":
        return loss, loss
    acc = float(np.mean(out.argmax(axis=1) == y))
    return loss, acc
