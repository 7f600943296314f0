"""A small fixed-architecture classifier over AU vectors.

Two fully connected layers (20 -> 8 -> 1) with sigmoid activations, binary
cross entropy, and Adam. The arithmetic is written out directly in numpy so
the gradients are explicit and can be verified against finite differences.
All math runs in float64 and every random decision flows from one seeded
generator, so training is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .core import CANONICAL_AU_NAMES, LabeledExample, N_AUS
from .errors import ConfigError, DegenerateTrainingSet, SchemaError, ValidationError

N_INPUT = N_AUS
N_HIDDEN = 8
MODEL_FORMAT = "sentipipe-mlp-v1"
BCE_EPS = 1e-12

_SHAPES = {"w1": (N_HIDDEN, N_INPUT), "b1": (N_HIDDEN,), "w2": (1, N_HIDDEN), "b2": (1,)}


@dataclass(frozen=True, eq=False)
class MlpParams:
    """Network weights. Arrays are copied in and marked read-only."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        for name, shape in _SHAPES.items():
            arr = np.array(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValidationError(
                    f"{name} must have shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zeros(cls) -> "MlpParams":
        return cls(*(np.zeros(shape) for shape in _SHAPES.values()))


@dataclass(frozen=True, slots=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 64
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    oversample_positives: bool = True
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("adam_beta1", "adam_beta2"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ConfigError(f"{name} must lie in [0, 1)")
        if self.adam_epsilon <= 0:
            raise ConfigError("adam_epsilon must be > 0")


@dataclass(frozen=True, eq=False)
class AdamState:
    """First and second moment estimates plus the step counter."""

    m: MlpParams
    v: MlpParams
    t: int = 0

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValidationError(f"step counter must be >= 0, got {self.t}")

    @classmethod
    def initial(cls, params: MlpParams) -> "AdamState":
        del params  # shapes are fixed by the architecture
        return cls(m=MlpParams.zeros(), v=MlpParams.zeros(), t=0)


def _map_params(fn: Callable[..., np.ndarray], *ps: MlpParams) -> MlpParams:
    return MlpParams(
        w1=fn(*(p.w1 for p in ps)),
        b1=fn(*(p.b1 for p in ps)),
        w2=fn(*(p.w2 for p in ps)),
        b2=fn(*(p.b2 for p in ps)),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # clip keeps exp() finite; sigmoid is saturated far before +-700 anyway
    return 1.0 / (1.0 + np.exp(-np.clip(z, -700.0, 700.0)))


def _as_input_row(aus) -> np.ndarray:
    scores = getattr(aus, "scores", aus)
    x = np.asarray(scores, dtype=np.float64)
    if x.shape != (N_INPUT,):
        raise ValidationError(f"input must hold {N_INPUT} scores, got shape {x.shape}")
    return x.reshape(1, N_INPUT)


def _forward_batch(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched forward pass. x: (n, 20). Returns (scores (n,), hidden (n, 8))."""
    h = _sigmoid(x @ params.w1.T + params.b1)
    p = _sigmoid(h @ params.w2.T + params.b2)[:, 0]
    return p, h


def forward(params: MlpParams, aus) -> float:
    """Score one AU vector; the sigmoid output lies strictly inside (0, 1)."""
    p, _ = _forward_batch(params, _as_input_row(aus))
    return float(p[0])


def bce_loss(score: float, label: float) -> float:
    """Binary cross entropy with the score clamped to [1e-12, 1 - 1e-12]."""
    p = min(max(float(score), BCE_EPS), 1.0 - BCE_EPS)
    y = float(label)
    return -(y * math.log(p) + (1.0 - y) * math.log1p(-p))


def _bce_batch(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))


def _backward_batch(
    params: MlpParams,
    x: np.ndarray,
    h: np.ndarray,
    p: np.ndarray,
    y: np.ndarray,
) -> MlpParams:
    """Gradient of the mean BCE over the batch, via the sigmoid + BCE shortcut."""
    n = x.shape[0]
    delta2 = (p - y) / n                      # (n,)
    gw2 = (delta2 @ h).reshape(1, N_HIDDEN)
    gb2 = np.array([delta2.sum()])
    dh = np.outer(delta2, params.w2[0])       # (n, 8)
    delta1 = dh * h * (1.0 - h)
    gw1 = delta1.T @ x                        # (8, 20)
    gb1 = delta1.sum(axis=0)
    return MlpParams(gw1, gb1, gw2, gb2)


def backward(params: MlpParams, aus, label: float) -> MlpParams:
    """Exact gradient of bce_loss(forward(params, aus), label) for one example."""
    x = _as_input_row(aus)
    y = np.array([float(label)])
    p, h = _forward_batch(params, x)
    return _backward_batch(params, x, h, p, y)


def adam_step(
    params: MlpParams,
    grads: MlpParams,
    state: AdamState,
    config: TrainConfig,
) -> tuple[MlpParams, AdamState]:
    """One bias-corrected Adam update. Returns new params and the advanced state."""
    t = state.t + 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    m = _map_params(lambda m_, g: b1 * m_ + (1.0 - b1) * g, state.m, grads)
    v = _map_params(lambda v_, g: b2 * v_ + (1.0 - b2) * g * g, state.v, grads)
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    lr, eps = config.learning_rate, config.adam_epsilon
    new_params = _map_params(
        lambda p_, m_, v_: p_ - lr * (m_ / c1) / (np.sqrt(v_ / c2) + eps),
        params, m, v)
    return new_params, AdamState(m=m, v=v, t=t)


def _glorot_init(rng: np.random.Generator) -> MlpParams:
    lim1 = math.sqrt(6.0 / (N_INPUT + N_HIDDEN))
    lim2 = math.sqrt(6.0 / (N_HIDDEN + 1))
    return MlpParams(
        w1=rng.uniform(-lim1, lim1, size=(N_HIDDEN, N_INPUT)),
        b1=np.zeros(N_HIDDEN),
        w2=rng.uniform(-lim2, lim2, size=(1, N_HIDDEN)),
        b2=np.zeros(1),
    )


def _balanced_epoch_order(
    rng: np.random.Generator, y: np.ndarray, oversample: bool
) -> np.ndarray:
    """Index stream for one epoch.

    With oversampling, the minority class is resampled with replacement up to
    the majority count, so each epoch sees the classes in an exact 1:1 ratio.
    """
    if not oversample:
        return rng.permutation(len(y))
    pos = np.flatnonzero(y == 1.0)
    neg = np.flatnonzero(y == 0.0)
    if len(pos) < len(neg):
        extra = rng.choice(pos, size=len(neg) - len(pos), replace=True)
    elif len(neg) < len(pos):
        extra = rng.choice(neg, size=len(pos) - len(neg), replace=True)
    else:
        extra = np.empty(0, dtype=np.int64)
    return rng.permutation(np.concatenate([pos, neg, extra]))


def train(
    examples: Sequence[LabeledExample],
    config: TrainConfig = TrainConfig(),
) -> tuple[MlpParams, list[float]]:
    """Train on weakly labeled examples; returns (params, mean loss per epoch).

    The reported loss is the running training loss: each batch is scored
    before the update that it triggers.
    """
    if not examples:
        raise DegenerateTrainingSet("no training examples")
    x = np.array([ex.aus.scores for ex in examples], dtype=np.float64)
    y = np.array([ex.label for ex in examples], dtype=np.float64)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTrainingSet(
            f"need both classes, got {n_pos} positives and {n_neg} negatives")
    rng = np.random.default_rng(config.rng_seed)
    params = _glorot_init(rng)
    state = AdamState.initial(params)
    losses: list[float] = []
    for _ in range(config.epochs):
        order = _balanced_epoch_order(rng, y, config.oversample_positives)
        loss_total = 0.0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = x[idx], y[idx]
            p, h = _forward_batch(params, xb)
            loss_total += float(_bce_batch(p, yb).sum())
            grads = _backward_batch(params, xb, h, p, yb)
            params, state = adam_step(params, grads, state, config)
        losses.append(loss_total / len(order))
    return params, losses


def evaluate_accuracy(
    params: MlpParams, examples: Sequence[LabeledExample], cut: float = 0.5
) -> float:
    """Fraction of examples whose thresholded score matches the label."""
    if not examples:
        raise DegenerateTrainingSet("no examples to evaluate")
    x = np.array([ex.aus.scores for ex in examples], dtype=np.float64)
    y = np.array([ex.label for ex in examples], dtype=np.float64)
    p, _ = _forward_batch(params, x)
    return float(np.mean((p >= cut) == (y == 1.0)))


def save_model(params: MlpParams, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "w1": params.w1.tolist(),
        "b1": params.b1.tolist(),
        "w2": params.w2.tolist(),
        "b2": params.b2.tolist(),
        "au_order": list(CANONICAL_AU_NAMES),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_model(path: str | Path) -> MlpParams:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: model file must be a JSON object")
    if payload.get("format") != MODEL_FORMAT:
        raise SchemaError(
            f"{path}: expected format {MODEL_FORMAT!r}, got {payload.get('format')!r}")
    missing = {"w1", "b1", "w2", "b2", "au_order"} - set(payload)
    if missing:
        raise SchemaError(f"{path}: missing keys {sorted(missing)}")
    if payload["au_order"] != list(CANONICAL_AU_NAMES):
        raise SchemaError(f"{path}: au_order does not match the canonical AU order")
    arrays = {}
    for name, shape in _SHAPES.items():
        try:
            arr = np.array(payload[name], dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path}: {name} is not a numeric array ({exc})") from exc
        if arr.shape != shape:
            raise SchemaError(
                f"{path}: {name} must have shape {shape}, got {arr.shape}")
        arrays[name] = arr
    try:
        return MlpParams(**arrays)
    except ValidationError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
