"""Minimal deterministic feed-forward network core.

Dense layers with ReLU or identity activations, softmax cross-entropy,
bias-corrected Adam, per-layer parameter freezing, and a central-difference
gradient checker.  Everything is plain numpy and fully seeded: the same seed
and data order always produce bit-identical parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

CHECKPOINT_VERSION = "nncore-v1"


class ShapeError(ValueError):
    pass


@dataclass
class DenseLayer:
    weights: np.ndarray  # (n_in, n_out)
    bias: np.ndarray  # (n_out,)
    activation: str = "relu"  # "relu" | "identity"
    frozen: bool = False

    def __post_init__(self) -> None:
        if self.activation not in ("relu", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ShapeError("bias shape must match weight columns")

    @property
    def n_in(self) -> int:
        return self.weights.shape[0]

    @property
    def n_out(self) -> int:
        return self.weights.shape[1]


@dataclass
class Network:
    layers: list[DenseLayer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].n_in

    @property
    def out_dim(self) -> int:
        return self.layers[-1].n_out

    def parameters(self, trainable_only: bool = False) -> list[np.ndarray]:
        params = []
        for layer in self.layers:
            if trainable_only and layer.frozen:
                continue
            params.extend((layer.weights, layer.bias))
        return params

    def copy(self) -> "Network":
        return Network(
            layers=[
                DenseLayer(
                    weights=l.weights.copy(),
                    bias=l.bias.copy(),
                    activation=l.activation,
                    frozen=l.frozen,
                )
                for l in self.layers
            ]
        )


def glorot_uniform(n_in: int, n_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


def build_network(dims: Sequence[int], seed) -> Network:
    """Dense stack over ``dims``: hidden layers ReLU, final layer identity logits."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    rng = np.random.default_rng(seed)
    layers = []
    for i in range(len(dims) - 1):
        last = i == len(dims) - 2
        layers.append(
            DenseLayer(
                weights=glorot_uniform(dims[i], dims[i + 1], rng),
                bias=np.zeros(dims[i + 1]),
                activation="identity" if last else "relu",
            )
        )
    return Network(layers=layers)


def forward(net: Network, x: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Run the network; returns logits and per-layer (input, pre-activation) caches."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"input must be 2-d (batch, features), got shape {a.shape}")
    caches = []
    for idx, layer in enumerate(net.layers):
        if a.shape[1] != layer.n_in:
            raise ShapeError(
                f"layer {idx}: input has {a.shape[1]} features, layer expects {layer.n_in}"
            )
        z = a @ layer.weights + layer.bias
        caches.append((a, z))
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
    return a, caches


def backward(
    net: Network, caches: list[tuple[np.ndarray, np.ndarray]], dlogits: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Backprop dlogits through the network; returns (dW, db) per layer.

    Gradients are produced for every layer, frozen or not; freezing is an
    update-time concern.
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(net.layers)  # type: ignore[list-item]
    delta = dlogits
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        a_prev, z = caches[idx]
        if layer.activation == "relu":
            delta = delta * (z > 0.0)
        grads[idx] = (a_prev.T @ delta, delta.sum(axis=0))
        if idx > 0:
            delta = delta @ layer.weights.T
    return grads


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(
    logits: np.ndarray, targets_onehot: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits."""
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    if logits.shape != targets_onehot.shape:
        raise ShapeError(f"logits {logits.shape} vs targets {targets_onehot.shape}")
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -float((targets_onehot * log_probs).sum()) / n
    dlogits = (np.exp(log_probs) - targets_onehot) / n
    return loss, dlogits


def one_hot(labels: np.ndarray, n_classes: int = 3) -> np.ndarray:
    out = np.zeros((len(labels), n_classes))
    out[np.arange(len(labels)), labels] = 1.0
    return out


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def init_adam(params: Sequence[np.ndarray], lr: float = 1e-4) -> AdamState:
    return AdamState(
        lr=lr,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    """One bias-corrected Adam update, in place.

    ``params`` must be the same (trainable-only) arrays the state was
    initialized with; frozen parameters are excluded by the caller.
    """
    if len(params) != len(state.m):
        raise ShapeError("parameter count does not match optimizer state")
    state.step += 1
    t = state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


def grad_check(
    net: Network,
    x: np.ndarray,
    y_onehot: np.ndarray,
    eps: float = 1e-5,
    loss_fn: Callable[[np.ndarray, np.ndarray], tuple[float, np.ndarray]] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Frozen layers are excluded from the checked set.  Intended for small
    networks; cost is two forward passes per parameter element.
    """
    loss_fn = loss_fn or softmax_cross_entropy
    logits, caches = forward(net, x)
    _, dlogits = loss_fn(logits, y_onehot)
    grads = backward(net, caches, dlogits)

    worst = 0.0
    for layer, (dw, db) in zip(net.layers, grads):
        if layer.frozen:
            continue
        for param, grad in ((layer.weights, dw), (layer.bias, db)):
            flat_p = param.reshape(-1)
            flat_g = grad.reshape(-1)
            for i in range(flat_p.size):
                orig = flat_p[i]
                flat_p[i] = orig + eps
                lo_plus, _ = loss_fn(forward(net, x)[0], y_onehot)
                flat_p[i] = orig - eps
                lo_minus, _ = loss_fn(forward(net, x)[0], y_onehot)
                flat_p[i] = orig
                numeric = (lo_plus - lo_minus) / (2 * eps)
                analytic = flat_g[i]
                denom = max(abs(analytic), abs(numeric), 1e-8)
                worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def save_checkpoint(net: Network, path: str, seed: int | None = None, adam: AdamState | None = None) -> None:
    payload = {
        "layout_version": CHECKPOINT_VERSION,
        "seed": seed,
        "layers": [
            {
                "n_in": l.n_in,
                "n_out": l.n_out,
                "activation": l.activation,
                "frozen": l.frozen,
                "weights": l.weights.reshape(-1).tolist(),
                "bias": l.bias.tolist(),
            }
            for l in net.layers
        ],
    }
    if adam is not None:
        payload["adam"] = {
            "lr": adam.lr,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "eps": adam.eps,
            "step": adam.step,
            "m": [m.reshape(-1).tolist() for m in adam.m],
            "v": [v.reshape(-1).tolist() for v in adam.v],
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def network_to_dict(net: Network) -> dict:
    return {
        "layers": [
            {
                "n_in": l.n_in,
                "n_out": l.n_out,
                "activation": l.activation,
                "frozen": l.frozen,
                "weights": l.weights.reshape(-1).tolist(),
                "bias": l.bias.tolist(),
            }
            for l in net.layers
        ]
    }


def network_from_dict(payload: dict) -> Network:
    layers = []
    for spec in payload["layers"]:
        w = np.array(spec["weights"], dtype=np.float64).reshape(spec["n_in"], spec["n_out"])
        layers.append(
            DenseLayer(
                weights=w,
                bias=np.array(spec["bias"], dtype=np.float64),
                activation=spec["activation"],
                frozen=bool(spec["frozen"]),
            )
        )
    return Network(layers=layers)


def load_checkpoint(path: str) -> Network:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("layout_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"checkpoint layout {payload.get('layout_version')!r} != expected {CHECKPOINT_VERSION!r}"
        )
    return network_from_dict(payload)
