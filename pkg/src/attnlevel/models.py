"""The classifier zoo: classic baselines and the fusion network families.

Classic baselines (SVM, Logit, MLP) consume the full feature concatenation.
The fusion families handle each modality in its own stream of dense layers:

    early    one network over the concatenated modalities
    fc       streams trained separately, their softmax heads detached, a
             fully connected head trained on the frozen stream activations
    late     streams trained separately and kept whole; their softmax
             outputs combined by average, elementwise maximum, or learned
             per-stream-per-class weights feeding a new softmax

Dense stream layers default to 256 units, the fc head to 64, all ReLU.
Training is Adam at 1e-4 with early stopping on a held-out validation
slice; everything is seeded and reproducible bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import nncore
from .feature_store import (
    MODALITY_DIMS,
    FeatureRecord,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
)
from .nncore import Network, forward, network_from_dict, network_to_dict, one_hot, softmax

MODALITY_ORDER = ("kp", "gf", "depth")
N_CLASSES = 3

CHECKPOINT_VERSION = "attnlevel-model-v1"


class ModelError(ValueError):
    pass


class FrozenParameterError(RuntimeError):
    """A frozen stream parameter changed during a fusion training phase."""


@dataclass(frozen=True)
class ModelSpec:
    name: str
    kind: str  # svm | logit | mlp | early | fc | late | hybrid
    modalities: tuple[str, ...] = MODALITY_ORDER
    combiner: Optional[str] = None  # average | maximum | weighted (late fusion only)
    hidden: tuple[int, ...] = (256, 256)
    head_units: int = 64
    mlp_hidden: int = 256
    svm_l2: float = 1e-4

    def __post_init__(self) -> None:
        if self.kind not in ("svm", "logit", "mlp", "early", "fc", "late", "hybrid"):
            raise ModelError(f"unknown model kind {self.kind!r}")
        if not self.modalities:
            raise ModelError("spec needs at least one modality")
        for m in self.modalities:
            if m not in MODALITY_DIMS:
                raise ModelError(f"unknown modality {m!r}")
        ordered = tuple(m for m in MODALITY_ORDER if m in self.modalities)
        if ordered != self.modalities:
            raise ModelError(f"modalities must follow canonical order {MODALITY_ORDER}")
        if (self.kind == "late") != (self.combiner is not None):
            raise ModelError("a combiner is required for late fusion and only there")
        if self.combiner is not None and self.combiner not in ("average", "maximum", "weighted"):
            raise ModelError(f"unknown combiner {self.combiner!r}")

    def input_dim(self) -> int:
        return sum(MODALITY_DIMS[m] for m in self.modalities)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    max_epochs: int = 50
    patience: int = 5
    val_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.learning_rate, self.batch_size, self.max_epochs) <= 0:
            raise ModelError("learning rate, batch size and max epochs must be positive")


@dataclass
class TrainedModel:
    spec: ModelSpec
    config: TrainConfig
    nets: dict[str, Network]  # "main", "stream:<mod>", "head"
    combiner_weights: Optional[np.ndarray] = None  # (n_streams, 3) for weighted late
    standardizer: Optional[Standardizer] = None
    history: dict = field(default_factory=dict)

    def stream_nets(self) -> dict[str, Network]:
        return {k.split(":", 1)[1]: v for k, v in self.nets.items() if k.startswith("stream:")}


def features_matrix(records: Sequence[FeatureRecord], modalities: Sequence[str]) -> np.ndarray:
    return np.stack([np.concatenate([getattr(r, m) for m in modalities]) for r in records])


def labels_vector(records: Sequence[FeatureRecord]) -> np.ndarray:
    labels = []
    for r in records:
        if r.label is None:
            raise ModelError(f"record {r.set_id}/{r.frame_index} has no label")
        labels.append(r.label)
    return np.array(labels, dtype=np.int64)


def _rng(cfg: TrainConfig, salt: Sequence[int], *tags: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, *salt, *tags])


def _hinge_ovr_loss(logits: np.ndarray, targets_onehot: np.ndarray) -> tuple[float, np.ndarray]:
    # one-vs-rest hinge, summed over classes, averaged over the batch
    n = logits.shape[0]
    signs = 2.0 * targets_onehot - 1.0
    margins = 1.0 - signs * logits
    active = margins > 0.0
    loss = float(np.where(active, margins, 0.0).sum()) / n
    dlogits = -(signs * active) / n
    return loss, dlogits


def _fit_network(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig,
    rng: np.random.Generator,
    loss: str = "softmax_ce",
    l2: float = 0.0,
) -> dict:
    """Mini-batch Adam with early stopping on a held-out validation slice.

    The best-validation-loss parameters are restored at the end.  With too
    little data for a validation slice, training simply runs max_epochs.
    """
    loss_fn = nncore.softmax_cross_entropy if loss == "softmax_ce" else _hinge_ovr_loss
    y1h = one_hot(y, N_CLASSES)
    n = len(x)

    n_val = int(round(n * cfg.val_fraction)) if cfg.patience > 0 else 0
    if n_val > 0 and n - n_val >= cfg.batch_size // 2:
        order = rng.permutation(n)
        val_idx, train_idx = order[:n_val], order[n_val:]
    else:
        val_idx, train_idx = np.array([], dtype=int), np.arange(n)
    x_train, y_train = x[train_idx], y1h[train_idx]
    x_val, y_val = x[val_idx], y1h[val_idx]

    params = net.parameters(trainable_only=True)
    weight_params = [l.weights for l in net.layers if not l.frozen]
    adam = nncore.init_adam(params, lr=cfg.learning_rate)

    def batch_step(xb: np.ndarray, yb: np.ndarray) -> float:
        logits, caches = forward(net, xb)
        loss_val, dlogits = loss_fn(logits, yb)
        grads_all = nncore.backward(net, caches, dlogits)
        grads = []
        for layer, (dw, db) in zip(net.layers, grads_all):
            if layer.frozen:
                continue
            if l2 > 0.0:
                dw = dw + 2.0 * l2 * layer.weights
            grads.extend((dw, db))
        nncore.adam_step(adam, params, grads)
        if l2 > 0.0:
            loss_val += l2 * sum(float((w * w).sum()) for w in weight_params)
        return loss_val

    def eval_loss(xs: np.ndarray, ys: np.ndarray) -> float:
        loss_val, _ = loss_fn(forward(net, xs)[0], ys)
        if l2 > 0.0:
            loss_val += l2 * sum(float((w * w).sum()) for w in weight_params)
        return loss_val

    history: dict = {"train_loss": [], "val_loss": []}
    best_val = np.inf
    best_params = None
    stale = 0
    n_train = len(x_train)
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n_train)
        epoch_losses = []
        for start in range(0, n_train, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            epoch_losses.append(batch_step(x_train[idx], y_train[idx]))
        history["train_loss"].append(float(np.mean(epoch_losses)))
        if len(val_idx) == 0:
            continue
        val_loss = eval_loss(x_val, y_val)
        history["val_loss"].append(val_loss)
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = [p.copy() for p in params]
            stale = 0
        else:
            stale += 1
            if stale > cfg.patience:
                break
    if best_params is not None:
        for p, best in zip(params, best_params):
            np.copyto(p, best)
    history["epochs_run"] = len(history["train_loss"])
    return history


def _check_labels(y: np.ndarray) -> None:
    if len(np.unique(y)) < 2:
        raise ModelError("degenerate training data: only one class present")


def _freeze(net: Network, layers: slice = slice(None)) -> None:
    for layer in net.layers[layers]:
        layer.frozen = True


def _snapshot(nets: Sequence[Network]) -> list[np.ndarray]:
    return [p.copy() for net in nets for p in net.parameters()]


def _verify_frozen(nets: Sequence[Network], snapshot: list[np.ndarray], phase: str) -> None:
    current = [p for net in nets for p in net.parameters()]
    for before, after in zip(snapshot, current):
        if not np.array_equal(before, after):
            raise FrozenParameterError(f"frozen stream parameters changed during {phase}")


def build_streams(spec: ModelSpec, seed=0) -> dict[str, Network]:
    """Untrained per-modality stream networks for an fc or late fusion spec.

    Each stream is dense(hidden...) with ReLU plus a 3-way logits layer whose
    softmax serves as the stream's own classifier head.
    """
    if spec.kind not in ("fc", "late"):
        raise ModelError(f"streams exist only for fc/late fusion specs, not {spec.kind!r}")
    streams = {}
    for i, mod in enumerate(spec.modalities):
        dims = [MODALITY_DIMS[mod], *spec.hidden, N_CLASSES]
        seed_list = seed if isinstance(seed, list) else [seed]
        streams[mod] = nncore.build_network(dims, seed=[*seed_list, 10, i])
    return streams


def _train_streams(
    spec: ModelSpec,
    x_by_mod: dict[str, np.ndarray],
    y: np.ndarray,
    cfg: TrainConfig,
    salt: Sequence[int],
) -> tuple[dict[str, Network], dict]:
    """Phase 1: an independent dense(hidden) x N + softmax network per modality."""
    streams = build_streams(spec, seed=[cfg.seed, *salt])
    history = {}
    for i, mod in enumerate(spec.modalities):
        history[f"stream:{mod}"] = _fit_network(
            streams[mod], x_by_mod[mod], y, cfg, _rng(cfg, salt, 11, i)
        )
    return streams, history


def _stream_probs(streams: dict[str, Network], x_by_mod: dict[str, np.ndarray]) -> np.ndarray:
    """Stacked per-stream softmax outputs, shape (n, n_streams, 3)."""
    return np.stack([softmax(forward(net, x_by_mod[mod])[0]) for mod, net in streams.items()], axis=1)


def weighted_combine(weights: np.ndarray, stream_probs: np.ndarray) -> np.ndarray:
    """Combined logits z[b, c] = sum_s weights[s, c] * stream_probs[b, s, c]."""
    return (weights[None, :, :] * stream_probs).sum(axis=1)


def weighted_combiner_grad(
    weights: np.ndarray, stream_probs: np.ndarray, y_onehot: np.ndarray
) -> tuple[float, np.ndarray]:
    """Cross-entropy loss and its gradient w.r.t. the combiner weights."""
    z = weighted_combine(weights, stream_probs)
    loss, dz = nncore.softmax_cross_entropy(z, y_onehot)
    dw = (stream_probs * dz[:, None, :]).sum(axis=0)
    return loss, dw


def weighted_combiner_grad_check(
    weights: np.ndarray, stream_probs: np.ndarray, y_onehot: np.ndarray, eps: float = 1e-5
) -> float:
    """Central-difference check of the combiner gradient; returns max rel error."""
    _, analytic = weighted_combiner_grad(weights, stream_probs, y_onehot)
    worst = 0.0
    w = weights.copy()
    flat = w.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        lp, _ = nncore.softmax_cross_entropy(weighted_combine(w, stream_probs), y_onehot)
        flat[i] = orig - eps
        lm, _ = nncore.softmax_cross_entropy(weighted_combine(w, stream_probs), y_onehot)
        flat[i] = orig
        numeric = (lp - lm) / (2 * eps)
        analytic_i = analytic.reshape(-1)[i]
        worst = max(worst, abs(analytic_i - numeric) / max(abs(analytic_i), abs(numeric), 1e-8))
    return worst


def _fit_weighted_combiner(
    stream_probs: np.ndarray, y: np.ndarray, cfg: TrainConfig, rng: np.random.Generator
) -> tuple[np.ndarray, dict]:
    """Train the per-stream-per-class combiner weights, streams untouched."""
    n, n_streams, _ = stream_probs.shape
    y1h = one_hot(y, N_CLASSES)
    weights = np.ones((n_streams, N_CLASSES))
    adam = nncore.init_adam([weights], lr=cfg.learning_rate)

    n_val = int(round(n * cfg.val_fraction)) if cfg.patience > 0 else 0
    if n_val > 0 and n - n_val >= cfg.batch_size // 2:
        order = rng.permutation(n)
        val_idx, train_idx = order[:n_val], order[n_val:]
    else:
        val_idx, train_idx = np.array([], dtype=int), np.arange(n)

    history: dict = {"train_loss": [], "val_loss": []}
    best_val, best_w, stale = np.inf, None, 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train_idx))
        losses = []
        for start in range(0, len(train_idx), cfg.batch_size):
            idx = train_idx[order[start : start + cfg.batch_size]]
            loss, dw = weighted_combiner_grad(weights, stream_probs[idx], y1h[idx])
            nncore.adam_step(adam, [weights], [dw])
            losses.append(loss)
        history["train_loss"].append(float(np.mean(losses)))
        if len(val_idx) == 0:
            continue
        val_loss, _ = nncore.softmax_cross_entropy(
            weighted_combine(weights, stream_probs[val_idx]), y1h[val_idx]
        )
        history["val_loss"].append(val_loss)
        if val_loss < best_val - 1e-12:
            best_val, best_w, stale = val_loss, weights.copy(), 0
        else:
            stale += 1
            if stale > cfg.patience:
                break
    if best_w is not None:
        weights = best_w
    history["epochs_run"] = len(history["train_loss"])
    return weights, history


def train(
    spec: ModelSpec,
    records: Sequence[FeatureRecord],
    cfg: TrainConfig,
    standardizer: Standardizer | None = None,
    seed_salt: Sequence[int] = (),
) -> TrainedModel:
    """Train one zoo configuration on labeled records.

    Records are raw (unstandardized); the model standardizes internally with
    the supplied standardizer, or fits one on these records when none is
    given.  Passing a standardizer fitted on a training split is how
    cross-validation keeps test data out of the statistics.
    """
    if standardizer is None:
        standardizer = fit_standardizer(records)
    std_records = [apply_standardizer(standardizer, r) for r in records]
    y = labels_vector(std_records)
    _check_labels(y)
    salt = tuple(int(s) for s in seed_salt)
    x_by_mod = {m: features_matrix(std_records, [m]) for m in spec.modalities}

    nets: dict[str, Network] = {}
    combiner_weights = None
    history: dict = {}

    if spec.kind in ("svm", "logit", "mlp", "early"):
        x = np.concatenate([x_by_mod[m] for m in spec.modalities], axis=1)
        if spec.kind in ("svm", "logit"):
            # zero-initialized convex linear models
            net = Network(
                layers=[
                    nncore.DenseLayer(
                        weights=np.zeros((x.shape[1], N_CLASSES)),
                        bias=np.zeros(N_CLASSES),
                        activation="identity",
                    )
                ]
            )
            loss = "hinge" if spec.kind == "svm" else "softmax_ce"
            l2 = spec.svm_l2 if spec.kind == "svm" else 0.0
            history["main"] = _fit_network(net, x, y, cfg, _rng(cfg, salt, 0), loss=loss, l2=l2)
        elif spec.kind == "mlp":
            net = nncore.build_network([x.shape[1], spec.mlp_hidden, N_CLASSES], seed=[cfg.seed, *salt, 1])
            history["main"] = _fit_network(net, x, y, cfg, _rng(cfg, salt, 2))
        else:  # early fusion
            net = nncore.build_network([x.shape[1], *spec.hidden, N_CLASSES], seed=[cfg.seed, *salt, 3])
            history["main"] = _fit_network(net, x, y, cfg, _rng(cfg, salt, 4))
        nets["main"] = net

    elif spec.kind == "fc":
        streams, history = _train_streams(spec, x_by_mod, y, cfg, salt)
        for mod, net in streams.items():
            nets[f"stream:{mod}"] = net
            _freeze(net, slice(0, len(net.layers) - 1))  # trunk frozen; softmax layer detached
        trunks = {mod: Network(net.layers[:-1]) for mod, net in streams.items()}
        snapshot = _snapshot([trunks[m] for m in spec.modalities])
        acts = np.concatenate(
            [forward(trunks[m], x_by_mod[m])[0] for m in spec.modalities], axis=1
        )
        head = nncore.build_network(
            [acts.shape[1], spec.head_units, N_CLASSES], seed=[cfg.seed, *salt, 20]
        )
        history["head"] = _fit_network(head, acts, y, cfg, _rng(cfg, salt, 21))
        _verify_frozen([trunks[m] for m in spec.modalities], snapshot, "fc head training")
        nets["head"] = head

    elif spec.kind == "late":
        streams, history = _train_streams(spec, x_by_mod, y, cfg, salt)
        for mod, net in streams.items():
            nets[f"stream:{mod}"] = net
            _freeze(net)
        if spec.combiner == "weighted":
            ordered = {m: streams[m] for m in spec.modalities}
            snapshot = _snapshot(list(ordered.values()))
            probs = _stream_probs(ordered, x_by_mod)
            combiner_weights, history["combiner"] = _fit_weighted_combiner(
                probs, y, cfg, _rng(cfg, salt, 30)
            )
            _verify_frozen(list(ordered.values()), snapshot, "weighted combiner training")

    elif spec.kind == "hybrid":
        # fully-connected fusion of kp+gf, then weighted late fusion with depth
        fc_spec = replace(spec, kind="fc", modalities=("kp", "gf"), combiner=None)
        fc_part = train(fc_spec, records, cfg, standardizer=standardizer, seed_salt=(*salt, 40))
        for key, net in fc_part.nets.items():
            nets[key] = net
        history.update({f"fc.{k}": v for k, v in fc_part.history.items()})

        depth_dims = [MODALITY_DIMS["depth"], *spec.hidden, N_CLASSES]
        depth_net = nncore.build_network(depth_dims, seed=[cfg.seed, *salt, 41])
        history["stream:depth"] = _fit_network(
            depth_net, x_by_mod["depth"], y, cfg, _rng(cfg, salt, 42)
        )
        nets["stream:depth"] = depth_net
        _freeze(depth_net)

        frozen_nets = [nets["head"], depth_net]
        snapshot = _snapshot(frozen_nets)
        fc_probs = _predict_fc(nets, {m: x_by_mod[m] for m in ("kp", "gf")}, ("kp", "gf"))
        depth_probs = softmax(forward(depth_net, x_by_mod["depth"])[0])
        probs = np.stack([fc_probs, depth_probs], axis=1)
        combiner_weights, history["combiner"] = _fit_weighted_combiner(
            probs, y, cfg, _rng(cfg, salt, 43)
        )
        _freeze(nets["head"])
        _verify_frozen(frozen_nets, snapshot, "hybrid combiner training")

    else:  # pragma: no cover
        raise ModelError(f"unhandled kind {spec.kind!r}")

    return TrainedModel(
        spec=spec,
        config=cfg,
        nets=nets,
        combiner_weights=combiner_weights,
        standardizer=standardizer,
        history=history,
    )


def _predict_fc(
    nets: dict[str, Network], x_by_mod: dict[str, np.ndarray], modalities: Sequence[str]
) -> np.ndarray:
    trunks = [Network(nets[f"stream:{m}"].layers[:-1]) for m in modalities]
    acts = np.concatenate([forward(t, x_by_mod[m])[0] for t, m in zip(trunks, modalities)], axis=1)
    return softmax(forward(nets["head"], acts)[0])


def predict_proba(model: TrainedModel, records: Sequence[FeatureRecord]) -> np.ndarray:
    """Class probabilities for raw (unstandardized) records, shape (n, 3)."""
    if model.standardizer is None:
        raise ModelError("model has no standardizer attached")
    std_records = [apply_standardizer(model.standardizer, r) for r in records]
    spec = model.spec
    x_by_mod = {m: features_matrix(std_records, [m]) for m in spec.modalities}

    if spec.kind in ("svm", "logit", "mlp", "early"):
        x = np.concatenate([x_by_mod[m] for m in spec.modalities], axis=1)
        # for the margin-based SVM this is a softmax over margins, reported for
        # interface uniformity; the argmax is the usual max-margin decision
        return softmax(forward(model.nets["main"], x)[0])
    if spec.kind == "fc":
        return _predict_fc(model.nets, x_by_mod, spec.modalities)
    if spec.kind == "late":
        streams = {m: model.nets[f"stream:{m}"] for m in spec.modalities}
        probs = _stream_probs(streams, x_by_mod)
        if spec.combiner == "average":
            return probs.mean(axis=1)
        if spec.combiner == "maximum":
            combined = probs.max(axis=1)
            return combined / combined.sum(axis=1, keepdims=True)
        z = weighted_combine(model.combiner_weights, probs)
        return softmax(z)
    if spec.kind == "hybrid":
        fc_probs = _predict_fc(model.nets, {m: x_by_mod[m] for m in ("kp", "gf")}, ("kp", "gf"))
        depth_probs = softmax(forward(model.nets["stream:depth"], x_by_mod["depth"])[0])
        stacked = np.stack([fc_probs, depth_probs], axis=1)
        return softmax(weighted_combine(model.combiner_weights, stacked))
    raise ModelError(f"unhandled kind {spec.kind!r}")  # pragma: no cover


def predict(model: TrainedModel, record: FeatureRecord) -> tuple[np.ndarray, int]:
    """Probabilities and argmax label (ties break to the lowest index)."""
    probs = predict_proba(model, [record])[0]
    return probs, int(np.argmax(probs))


def predict_labels(model: TrainedModel, records: Sequence[FeatureRecord]) -> np.ndarray:
    return np.argmax(predict_proba(model, records), axis=1)


def _zoo_specs() -> dict[str, ModelSpec]:
    specs = [
        ModelSpec(name="svm", kind="svm"),
        ModelSpec(name="logit", kind="logit"),
        ModelSpec(name="mlp", kind="mlp"),
    ]
    for kind in ("early", "fc"):
        for mods in (("kp", "gf"), ("kp", "gf", "depth")):
            specs.append(ModelSpec(name=f"{kind}-{'-'.join(mods)}", kind=kind, modalities=mods))
    for combiner in ("average", "maximum", "weighted"):
        for mods in (("kp", "gf"), ("kp", "gf", "depth")):
            specs.append(
                ModelSpec(
                    name=f"late-{combiner}-{'-'.join(mods)}",
                    kind="late",
                    modalities=mods,
                    combiner=combiner,
                )
            )
    specs.append(ModelSpec(name="hybrid-fcgf-wdepth", kind="hybrid"))
    return {s.name: s for s in specs}


ZOO: dict[str, ModelSpec] = _zoo_specs()
DNN_CONFIG_NAMES = [n for n, s in ZOO.items() if s.kind in ("early", "fc", "late")]


def get_spec(name: str) -> ModelSpec:
    try:
        return ZOO[name]
    except KeyError:
        known = ", ".join(sorted(ZOO))
        raise ModelError(f"unknown model spec {name!r}; known: {known}") from None


def zoo_manifest() -> dict:
    return {
        "models": [
            {
                "name": s.name,
                "kind": s.kind,
                "modalities": list(s.modalities),
                "combiner": s.combiner,
                "input_dim": s.input_dim(),
                "hidden": list(s.hidden),
                "head_units": s.head_units if s.kind in ("fc", "hybrid") else None,
            }
            for s in ZOO.values()
        ]
    }


def save_model(model: TrainedModel, path: str) -> None:
    payload = {
        "layout_version": CHECKPOINT_VERSION,
        "spec": {
            "name": model.spec.name,
            "kind": model.spec.kind,
            "modalities": list(model.spec.modalities),
            "combiner": model.spec.combiner,
            "hidden": list(model.spec.hidden),
            "head_units": model.spec.head_units,
            "mlp_hidden": model.spec.mlp_hidden,
            "svm_l2": model.spec.svm_l2,
        },
        "config": {
            "learning_rate": model.config.learning_rate,
            "batch_size": model.config.batch_size,
            "max_epochs": model.config.max_epochs,
            "patience": model.config.patience,
            "val_fraction": model.config.val_fraction,
            "seed": model.config.seed,
        },
        "nets": {name: network_to_dict(net) for name, net in model.nets.items()},
        "combiner_weights": None
        if model.combiner_weights is None
        else model.combiner_weights.tolist(),
        "standardizer": None
        if model.standardizer is None
        else {
            "layout_version": model.standardizer.layout_version,
            "means": model.standardizer.means.tolist(),
            "stds": model.standardizer.stds.tolist(),
            "constant_flags": model.standardizer.constant.astype(bool).tolist(),
        },
        "history": model.history,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_model(path: str) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("layout_version") != CHECKPOINT_VERSION:
        raise ModelError(
            f"checkpoint layout {payload.get('layout_version')!r} != expected {CHECKPOINT_VERSION!r}"
        )
    spec = ModelSpec(
        name=payload["spec"]["name"],
        kind=payload["spec"]["kind"],
        modalities=tuple(payload["spec"]["modalities"]),
        combiner=payload["spec"]["combiner"],
        hidden=tuple(payload["spec"]["hidden"]),
        head_units=payload["spec"]["head_units"],
        mlp_hidden=payload["spec"]["mlp_hidden"],
        svm_l2=payload["spec"]["svm_l2"],
    )
    cfg = TrainConfig(**payload["config"])
    nets = {name: network_from_dict(d) for name, d in payload["nets"].items()}
    std = None
    if payload["standardizer"] is not None:
        std = Standardizer(
            means=np.array(payload["standardizer"]["means"]),
            stds=np.array(payload["standardizer"]["stds"]),
            constant=np.array(payload["standardizer"]["constant_flags"], dtype=bool),
            layout_version=payload["standardizer"]["layout_version"],
        )
    cw = payload["combiner_weights"]
    return TrainedModel(
        spec=spec,
        config=cfg,
        nets=nets,
        combiner_weights=None if cw is None else np.array(cw),
        standardizer=std,
        history=payload.get("history", {}),
    )
