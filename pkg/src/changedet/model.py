"""Siamese temporal-ordering classifier, trained from scratch in numpy.

Two channel-stacked tensors (A1, Q) and (A2, Q) pass through a shared
convolutional encoder (stride-2 stages, global average pooling); the two
embeddings are concatenated, mapped by a linear head to two logits, and a
softmax yields the probability that the query is temporally closer to the
second anchor. Training uses binary cross-entropy, exact backpropagation,
and decoupled-weight-decay adaptive moments.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .imagery import TimeSeries
from .sampler import (
    assemble_pair_tensor,
    eligible_series,
    make_training_batch,
    sample_triplet,
)

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 1
_STRIDE = 2  # every encoder stage downsamples 2x
_OMEGA_EPS = 1e-15  # keeps reported probabilities strictly inside (0, 1)


@dataclass(frozen=True)
class EncoderConfig:
    """Shared encoder: stride-2 conv stages, rectifier, global average pooling."""

    input_channels: int
    stage_channels: tuple[int, ...] = (16, 32, 64, 64)
    kernel_size: int = 3

    def __post_init__(self):
        if self.input_channels < 1 or not self.stage_channels:
            raise ValueError("encoder needs input channels and at least one stage")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel size must be odd")

    @property
    def embedding_dim(self) -> int:
        return self.stage_channels[-1]

    @staticmethod
    def for_context(c: int, stage_channels: tuple[int, ...] = (16, 32, 64, 64),
                    kernel_size: int = 3) -> "EncoderConfig":
        return EncoderConfig(
            input_channels=3 * (c + 1),
            stage_channels=tuple(stage_channels),
            kernel_size=kernel_size,
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-4
    batch_size: int = 5
    epochs: int = 5
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    split: float = 0.8
    context: int = 3
    seed: int = 0
    # artifact knobs beyond the core hyperparameters
    triplets_per_series: int = 32
    val_triplets_per_series: int = 4
    steps_per_epoch: int | None = None  # overrides the triplets_per_series formula
    stage_channels: tuple[int, ...] = (16, 32, 64, 64)
    kernel_size: int = 3
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 < self.split < 1.0:
            raise ValueError("split fraction must lie strictly in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.epochs < 1 or self.context < 1:
            raise ValueError("batch_size, epochs, and context must be >= 1")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("moment decay rates must lie in [0, 1)")
        if self.epsilon <= 0 or self.weight_decay < 0:
            raise ValueError("epsilon must be > 0 and weight_decay >= 0")

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig.for_context(
            self.context, tuple(self.stage_channels), self.kernel_size
        )


@dataclass
class TrainReport:
    n_train_series: int
    n_val_series: int
    steps_per_epoch: int
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float | None] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class Classifier:
    """Trained parameters plus the configuration needed to run them."""

    params: dict[str, np.ndarray]
    encoder: EncoderConfig
    context: int


# --- parameters ------------------------------------------------------------------


def param_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = config.input_channels
    k = config.kernel_size
    for i, c_out in enumerate(config.stage_channels):
        shapes[f"enc{i}.w"] = (c_out, c_in, k, k)
        shapes[f"enc{i}.b"] = (c_out,)
        c_in = c_out
    shapes["head.w"] = (2, 2 * config.embedding_dim)
    shapes["head.b"] = (2,)
    return shapes


def init_params(
    config: EncoderConfig, rng: np.random.Generator, dtype: str = "float32"
) -> dict[str, np.ndarray]:
    """Uniform init scaled by fan-in for weights and biases."""
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
        else:
            w_shape = param_shapes(config)[name[:-2] + ".w"]
            fan_in = int(np.prod(w_shape[1:]))
        bound = 1.0 / math.sqrt(fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return params


def _validate_param_shapes(params: dict[str, np.ndarray], config: EncoderConfig) -> None:
    expected = param_shapes(config)
    if set(params) != set(expected):
        raise ValueError(f"parameter names {sorted(params)} do not match {sorted(expected)}")
    for name, shape in expected.items():
        if params[name].shape != shape:
            raise ValueError(f"{name}: shape {params[name].shape}, expected {shape}")


# --- forward / backward ----------------------------------------------------------


def _conv_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Stride-2 same-padded convolution via im2col. Returns output and backward cache."""
    n, c_in, h, wd = x.shape
    k = w.shape[2]
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::_STRIDE, ::_STRIDE]
    ho, wo = win.shape[2], win.shape[3]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c_in * k * k)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    out = out.reshape(n, ho, wo, w.shape[0]).transpose(0, 3, 1, 2)
    return out, (cols, x.shape, ho, wo)


def _conv_backward(dout: np.ndarray, w: np.ndarray, cache):
    cols, x_shape, ho, wo = cache
    n, c_in, h, wd = x_shape
    k = w.shape[2]
    p = k // 2
    c_out = w.shape[0]
    dflat = dout.transpose(0, 2, 3, 1).reshape(n * ho * wo, c_out)
    dw = (dflat.T @ cols).reshape(w.shape)
    db = dflat.sum(axis=0)
    dcols = (dflat @ w.reshape(c_out, -1)).reshape(n, ho, wo, c_in, k, k)
    dxp = np.zeros((n, c_in, h + 2 * p, wd + 2 * p), dtype=dout.dtype)
    for ki in range(k):
        for kj in range(k):
            dxp[:, :, ki : ki + _STRIDE * ho : _STRIDE, kj : kj + _STRIDE * wo : _STRIDE] += (
                dcols[:, :, :, :, ki, kj].transpose(0, 3, 1, 2)
            )
    dx = dxp[:, :, p : p + h, p : p + wd]
    return dx, dw, db


def _encoder_forward_cached(x: np.ndarray, params: dict, config: EncoderConfig):
    caches = []
    out = x - np.asarray(0.5, dtype=x.dtype)  # center [0,1] channels around zero
    for i in range(len(config.stage_channels)):
        out, conv_cache = _conv_forward(out, params[f"enc{i}.w"], params[f"enc{i}.b"])
        caches.append((conv_cache, out > 0))
        out = np.maximum(out, 0.0)
    emb = out.mean(axis=(2, 3))
    caches.append(out.shape)
    return emb, caches


def _encoder_backward(demb: np.ndarray, params: dict, config: EncoderConfig, caches):
    last_shape = caches[-1]
    n, c, ho, wo = last_shape
    dout = np.broadcast_to(
        (demb / (ho * wo))[:, :, None, None], last_shape
    ).astype(demb.dtype)
    grads = {}
    for i in reversed(range(len(config.stage_channels))):
        conv_cache, positive = caches[i]
        dout = dout * positive
        dout, dw, db = _conv_backward(dout, params[f"enc{i}.w"], conv_cache)
        grads[f"enc{i}.w"] = dw
        grads[f"enc{i}.b"] = db
    return dout, grads


def _as_batch(t: np.ndarray, dtype) -> np.ndarray:
    t = np.asarray(t)
    if t.ndim == 3:
        t = t[None]
    return np.ascontiguousarray(t, dtype=dtype)


def embed_batch(x: np.ndarray, params: dict, config: EncoderConfig) -> np.ndarray:
    """Embeddings for a batch of pair tensors, (N, embedding_dim)."""
    x = _as_batch(x, params["head.w"].dtype)
    if x.shape[1] != config.input_channels:
        raise ValueError(
            f"tensor has {x.shape[1]} channels, encoder expects {config.input_channels}"
        )
    emb, _ = _encoder_forward_cached(x, params, config)
    return emb


def encoder_forward(t: np.ndarray, params: dict, config: EncoderConfig) -> np.ndarray:
    """Embedding vector for a single pair tensor."""
    return embed_batch(t, params, config)[0]


def _head_logits(e1: np.ndarray, e2: np.ndarray, params: dict):
    ecat = np.concatenate([e1, e2], axis=1)
    return ecat @ params["head.w"].T + params["head.b"], ecat


def _softmax_omega(logits: np.ndarray) -> np.ndarray:
    z = logits.astype(np.float64)
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    p1 = ez[:, 1] / ez.sum(axis=1)
    # finite-precision clamp; exact softmax of finite logits is already in (0, 1)
    return np.clip(p1, _OMEGA_EPS, 1.0 - _OMEGA_EPS)


def classify_batch(
    x1: np.ndarray, x2: np.ndarray, params: dict, config: EncoderConfig
) -> np.ndarray:
    """omega for each (A1,Q)/(A2,Q) tensor pair: P(query closer to A2)."""
    dtype = params["head.w"].dtype
    x1 = _as_batch(x1, dtype)
    x2 = _as_batch(x2, dtype)
    if x1.shape != x2.shape:
        raise ValueError(f"tower tensor shapes differ: {x1.shape} vs {x2.shape}")
    e1 = embed_batch(x1, params, config)
    e2 = embed_batch(x2, params, config)
    logits, _ = _head_logits(e1, e2, params)
    return _softmax_omega(logits)


def classify(t1: np.ndarray, t2: np.ndarray, params: dict, config: EncoderConfig) -> float:
    return float(classify_batch(t1, t2, params, config)[0])


def loss(omega: float | np.ndarray, y: int | np.ndarray) -> float | np.ndarray:
    """Binary cross-entropy of the closer-anchor probability."""
    omega = np.asarray(omega, dtype=np.float64)
    y = np.asarray(y)
    if np.any(omega <= 0.0) or np.any(omega >= 1.0):
        raise ValueError("omega must lie strictly in (0, 1)")
    value = -(y * np.log(omega) + (1 - y) * np.log(1.0 - omega))
    return float(value) if value.ndim == 0 else value


def _stack_batch(batch, dtype):
    x1 = np.stack([t1 for t1, _, _ in batch]).astype(dtype, copy=False)
    x2 = np.stack([t2 for _, t2, _ in batch]).astype(dtype, copy=False)
    y = np.array([y for _, _, y in batch], dtype=np.int64)
    return x1, x2, y


def loss_and_gradients(
    params: dict, config: EncoderConfig, x1: np.ndarray, x2: np.ndarray, y: np.ndarray
):
    """Mean batch loss, exact parameter gradients, and per-example omega."""
    n = x1.shape[0]
    e1, cache1 = _encoder_forward_cached(x1, params, config)
    e2, cache2 = _encoder_forward_cached(x2, params, config)
    logits, ecat = _head_logits(e1, e2, params)

    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    total_loss = float(np.mean(lse - logits[np.arange(n), y]))
    p = np.exp(logits - lse[:, None])
    omega = np.clip(p[:, 1].astype(np.float64), _OMEGA_EPS, 1.0 - _OMEGA_EPS)

    dlogits = p.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dlogits = dlogits.astype(logits.dtype, copy=False)

    grads = {
        "head.w": dlogits.T @ ecat,
        "head.b": dlogits.sum(axis=0),
    }
    decat = dlogits @ params["head.w"]
    dim = e1.shape[1]
    _, g1 = _encoder_backward(decat[:, :dim], params, config, cache1)
    _, g2 = _encoder_backward(decat[:, dim:], params, config, cache2)
    for name in g1:
        grads[name] = g1[name] + g2[name]
    return total_loss, grads, omega


def batch_loss(params: dict, config: EncoderConfig, x1, x2, y) -> float:
    """Loss only; used by finite-difference checks."""
    n = x1.shape[0]
    e1, _ = _encoder_forward_cached(x1, params, config)
    e2, _ = _encoder_forward_cached(x2, params, config)
    logits, _ = _head_logits(e1, e2, params)
    zmax = logits.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(n), y]))


def gradients(batch, params: dict, config: EncoderConfig):
    """Mean gradient over a list of (tensor1, tensor2, y) examples."""
    if not batch:
        raise ValueError("batch is empty")
    dtype = params["head.w"].dtype
    x1, x2, y = _stack_batch(batch, dtype)
    _, grads, _ = loss_and_gradients(params, config, x1, x2, y)
    return grads


# --- optimizer -------------------------------------------------------------------


def init_moments(params: dict) -> dict:
    return {
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def optimizer_step(
    params: dict, grads: dict, moments: dict, config: TrainConfig, step_index: int
):
    """One decoupled-weight-decay adaptive-moment update. Returns new params/moments."""
    if step_index < 1:
        raise ValueError("step_index starts at 1")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**step_index
    bc2 = 1.0 - b2**step_index
    new_params = {}
    new_m = {}
    new_v = {}
    for name, theta in params.items():
        g = grads[name]
        m = b1 * moments["m"][name] + (1.0 - b1) * g
        v = b2 * moments["v"][name] + (1.0 - b2) * g * g
        m_hat = m / bc1
        v_hat = v / bc2
        update = m_hat / (np.sqrt(v_hat) + config.epsilon) + config.weight_decay * theta
        new_params[name] = theta - config.learning_rate * update
        new_m[name] = m
        new_v[name] = v
    return new_params, {"m": new_m, "v": new_v}


def _check_finite(params: dict, moments: dict, step: int) -> None:
    for name, arr in params.items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite parameter {name!r} after step {step}")
    for part in ("m", "v"):
        for name, arr in moments[part].items():
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite moment {part}[{name!r}] after step {step}")


# --- training --------------------------------------------------------------------


def split_series(
    dataset: list[TimeSeries], split: float, rng: np.random.Generator
) -> tuple[list[TimeSeries], list[TimeSeries]]:
    """Series-level split; no series appears on both sides."""
    order = rng.permutation(len(dataset))
    n_train = max(1, int(round(split * len(dataset))))
    train_idx = sorted(order[:n_train])
    val_idx = sorted(order[n_train:])
    return [dataset[i] for i in train_idx], [dataset[i] for i in val_idx]


def _validation_accuracy(
    val_series: list[TimeSeries],
    params: dict,
    enc: EncoderConfig,
    config: TrainConfig,
    rng: np.random.Generator,
) -> float | None:
    pool = eligible_series(val_series, config.context)
    if not pool:
        return None
    correct = 0
    total = 0
    chunk: list[tuple[np.ndarray, np.ndarray, int]] = []

    def flush():
        nonlocal correct, total, chunk
        if not chunk:
            return
        x1, x2, y = _stack_batch(chunk, params["head.w"].dtype)
        omega = classify_batch(x1, x2, params, enc)
        correct += int(((omega > 0.5).astype(np.int64) == y).sum())
        total += len(chunk)
        chunk = []

    for idx in pool:
        for _ in range(config.val_triplets_per_series):
            t = sample_triplet(val_series[idx], config.context, rng)
            chunk.append(
                (assemble_pair_tensor(t.a1, t.q), assemble_pair_tensor(t.a2, t.q), t.y)
            )
            if len(chunk) >= 64:
                flush()
    flush()
    return correct / total if total else None


def train(dataset: list[TimeSeries], config: TrainConfig) -> tuple[dict, TrainReport]:
    """Full training run: series-level split, epoch loop, per-epoch validation."""
    if not dataset:
        raise ValueError("dataset is empty")
    enc = config.encoder_config()
    ss = np.random.SeedSequence(config.seed)
    split_rng, init_rng, train_rng, val_rng = (
        np.random.default_rng(s) for s in ss.spawn(4)
    )
    train_series, val_series = split_series(dataset, config.split, split_rng)
    pool = eligible_series(train_series, config.context)
    if not pool:
        raise ValueError(
            f"no training series long enough for context {config.context}"
        )

    params = init_params(enc, init_rng, config.dtype)
    moments = init_moments(params)
    if config.steps_per_epoch is not None:
        steps_per_epoch = config.steps_per_epoch
    else:
        steps_per_epoch = max(
            1, math.ceil(len(pool) * config.triplets_per_series / config.batch_size)
        )
    report = TrainReport(
        n_train_series=len(train_series),
        n_val_series=len(val_series),
        steps_per_epoch=steps_per_epoch,
    )

    step = 0
    for epoch in range(config.epochs):
        epoch_loss = 0.0
        for _ in range(steps_per_epoch):
            batch = make_training_batch(
                train_series, config.batch_size, config.context, train_rng
            )
            x1, x2, y = _stack_batch(batch, config.dtype)
            loss_value, grads, _ = loss_and_gradients(params, enc, x1, x2, y)
            step += 1
            params, moments = optimizer_step(params, grads, moments, config, step)
            _check_finite(params, moments, step)
            epoch_loss += loss_value
        val_acc = _validation_accuracy(val_series, params, enc, config, val_rng)
        report.train_loss.append(epoch_loss / steps_per_epoch)
        report.val_accuracy.append(val_acc)
        log.info(
            "epoch %d/%d: train loss %.4f, val accuracy %s",
            epoch + 1,
            config.epochs,
            report.train_loss[-1],
            "n/a" if val_acc is None else f"{val_acc:.3f}",
        )
    return params, report


def train_classifier(dataset: list[TimeSeries], config: TrainConfig) -> tuple[Classifier, TrainReport]:
    params, report = train(dataset, config)
    return Classifier(params=params, encoder=config.encoder_config(), context=config.context), report


# --- checkpoints -------------------------------------------------------------------


def save_checkpoint(path: Path, params: dict, train_config: TrainConfig) -> None:
    enc = train_config.encoder_config()
    _validate_param_shapes(params, enc)
    meta = {
        "format": CHECKPOINT_FORMAT,
        "encoder": {
            "input_channels": enc.input_channels,
            "stage_channels": list(enc.stage_channels),
            "kernel_size": enc.kernel_size,
        },
        "train": {**asdict(train_config), "stage_channels": list(train_config.stage_channels)},
    }
    blob = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    np.savez(path, meta=blob, **{f"param/{k}": v for k, v in params.items()})


def load_checkpoint(path: Path) -> tuple[dict, EncoderConfig, TrainConfig]:
    path = Path(path)
    with np.load(path if path.suffix == ".npz" else str(path), allow_pickle=False) as data:
        if "meta" not in data:
            raise ValueError(f"{path}: not a model checkpoint (missing metadata)")
        meta = json.loads(bytes(data["meta"]).decode("utf-8"))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(
                f"{path}: unsupported checkpoint format {meta.get('format')}"
            )
        train_meta = dict(meta["train"])
        train_meta["stage_channels"] = tuple(train_meta["stage_channels"])
        train_config = TrainConfig(**train_meta)
        enc_meta = meta["encoder"]
        enc = EncoderConfig(
            input_channels=int(enc_meta["input_channels"]),
            stage_channels=tuple(enc_meta["stage_channels"]),
            kernel_size=int(enc_meta["kernel_size"]),
        )
        if enc != train_config.encoder_config():
            raise ValueError(f"{path}: encoder metadata disagrees with train config")
        params = {
            k[len("param/") :]: data[k] for k in data.files if k.startswith("param/")
        }
    _validate_param_shapes(params, enc)
    return params, enc, train_config


def load_classifier(path: Path) -> tuple[Classifier, TrainConfig]:
    params, enc, train_config = load_checkpoint(path)
    return Classifier(params=params, encoder=enc, context=train_config.context), train_config
