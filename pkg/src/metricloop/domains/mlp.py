"""Small fully connected classifier with hand-written backprop and optimizers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")
HIDDEN = (64, 32)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class MlpModel:
    params: dict[str, np.ndarray]

    @classmethod
    def init(cls, n_in: int, n_classes: int, seed: int, hidden: tuple[int, int] = HIDDEN) -> MlpModel:
        rng = np.random.default_rng(seed)
        sizes = (n_in, *hidden, n_classes)
        params = {}
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
            params[f"W{i}"] = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
            params[f"b{i}"] = np.zeros(fan_out)
        return cls(params)

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> MlpModel:
        return MlpModel({k: v.copy() for k, v in self.params.items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params.values())


def dropout_masks(rng: np.random.Generator, batch: int, p: float,
                  hidden: tuple[int, ...] = HIDDEN) -> tuple[np.ndarray, ...] | None:
    """Inverted-dropout masks for the two hidden layers, or None when p == 0."""
    if p <= 0:
        return None
    keep = 1.0 - p
    return tuple((rng.random((batch, h)) < keep) / keep for h in hidden)


def forward(model: MlpModel, x: np.ndarray, masks=None):
    p = model.params
    z1 = x @ p["W1"] + p["b1"]
    h1 = np.maximum(z1, 0.0)
    if masks is not None:
        h1 = h1 * masks[0]
    z2 = h1 @ p["W2"] + p["b2"]
    h2 = np.maximum(z2, 0.0)
    if masks is not None:
        h2 = h2 * masks[1]
    logits = h2 @ p["W3"] + p["b3"]
    return logits, (x, z1, h1, z2, h2)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_z - shifted[np.arange(len(y)), y]))


def loss(model: MlpModel, x: np.ndarray, y: np.ndarray, masks=None) -> float:
    logits, _ = forward(model, x, masks)
    return cross_entropy(logits, y)


def backward(model: MlpModel, batch: tuple[np.ndarray, np.ndarray], masks=None) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over ``batch`` and its exact gradient for every parameter."""
    x, y = batch
    p = model.params
    logits, (x, z1, h1, z2, h2) = forward(model, x, masks)
    n = len(y)
    probs = softmax(logits)
    value = cross_entropy(logits, y)

    d_logits = probs
    d_logits[np.arange(n), y] -= 1.0
    d_logits /= n
    grads = {"W3": h2.T @ d_logits, "b3": d_logits.sum(axis=0)}
    d_h2 = d_logits @ p["W3"].T
    if masks is not None:
        d_h2 = d_h2 * masks[1]
    d_z2 = d_h2 * (z2 > 0)
    grads["W2"] = h1.T @ d_z2
    grads["b2"] = d_z2.sum(axis=0)
    d_h1 = d_z2 @ p["W2"].T
    if masks is not None:
        d_h1 = d_h1 * masks[0]
    d_z1 = d_h1 * (z1 > 0)
    grads["W1"] = x.T @ d_z1
    grads["b1"] = d_z1.sum(axis=0)
    return value, grads


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_gradient(grad: np.ndarray, threshold: float) -> np.ndarray:
    """Rescale ``grad`` onto the L2 ball of radius ``threshold`` if it lies outside."""
    if threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    g = np.asarray(grad, dtype=float)
    norm = float(np.sqrt(np.sum(g * g)))
    if norm <= threshold:
        return g
    scaled = g * (threshold / norm)
    # guard the bound against a last-ulp overshoot
    post = float(np.sqrt(np.sum(scaled * scaled)))
    if post > threshold:
        scaled = scaled * (threshold / post)
    return scaled


def clip_grads(grads: dict[str, np.ndarray], threshold: float) -> dict[str, np.ndarray]:
    """Global-norm clipping across all parameter tensors."""
    flat = np.concatenate([grads[k].ravel() for k in PARAM_NAMES])
    clipped = clip_gradient(flat, threshold)
    out, i = {}, 0
    for k in PARAM_NAMES:
        size = grads[k].size
        out[k] = clipped[i:i + size].reshape(grads[k].shape)
        i += size
    return out


class Optimizer:
    """SGD (optionally with momentum), Adam and AdamW over a parameter dict.

    Plain weight decay is added to the gradient for SGD/Adam and applied
    decoupled for AdamW.
    """

    def __init__(self, kind: str, weight_decay: float = 0.0, momentum: float = 0.0):
        if kind not in ("SGD", "Adam", "AdamW"):
            raise ValueError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.weight_decay = weight_decay
        self.momentum = momentum
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def reset(self) -> None:
        self.t = 0
        self.m.clear()
        self.v.clear()

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> None:
        self.t += 1
        wd = self.weight_decay
        for k in PARAM_NAMES:
            g = grads[k]
            if wd and self.kind != "AdamW":
                g = g + wd * params[k]
            if self.kind == "SGD":
                if self.momentum:
                    buf = self.m.get(k)
                    buf = g.copy() if buf is None else self.momentum * buf + g
                    self.m[k] = buf
                    g = buf
                params[k] -= lr * g
                continue
            m = self.m.get(k, np.zeros_like(g))
            v = self.v.get(k, np.zeros_like(g))
            m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
            v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
            self.m[k], self.v[k] = m, v
            m_hat = m / (1 - ADAM_BETA1**self.t)
            v_hat = v / (1 - ADAM_BETA2**self.t)
            if self.kind == "AdamW" and wd:
                params[k] -= lr * wd * params[k]
            params[k] -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


def scheduled_lr(base: float, schedule: str, t: int, total: int) -> float:
    if schedule == "constant":
        return base
    if schedule == "cosine":
        return base * 0.5 * (1.0 + math.cos(math.pi * t / max(total, 1)))
    if schedule == "warmup":
        warm = max(1, total // 10)
        return base * min(1.0, (t + 1) / warm)
    raise ValueError(f"unknown schedule {schedule!r}")


def minibatches(n: int, batch_size: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
