"""High-observability domain: hyperparameter interventions on a small MLP.

Every loop step retrains a fresh model from the same ``init_seed`` under the
step's configuration (``mode="retrain"``), or continues from the previous
step's weights (``mode="resume"``).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from ..core.types import ActionSpec, AgentDecision, MetricSnapshot, MetricSummary
from ..errors import ConfigError, UnknownAction
from . import mlp

OPTIMIZERS = ("SGD", "Adam", "AdamW")
SCHEDULES = ("constant", "cosine", "warmup")

N_FEATURES = 8
N_CLASSES = 2
CONVERGENCE_WINDOW = 3
# Losses this large (or non-finite) count as divergence.
DIVERGENCE_LOSS = 1e6
DIVERGED_SENTINEL = sys.float_info.max

LR_BOUNDS = (1e-7, 10.0)
BATCH_BOUNDS = (4, 512)
DROPOUT_BOUNDS = (0.0, 0.9)
WEIGHT_DECAY_BOUNDS = (0.0, 1.0)

METRIC_NAMES = (
    "train_loss",
    "val_loss",
    "val_accuracy",
    "grad_norm_mean",
    "grad_norm_max",
    "loss_variance",
    "convergence_rate",
)
METRIC_GOALS = {
    "train_loss": "decrease",
    "val_loss": "decrease",
    "val_accuracy": "increase",
    "grad_norm_mean": "decrease",
    "grad_norm_max": "decrease",
    "loss_variance": "decrease",
    "convergence_rate": "increase",
}


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    dropout_p: float = 0.0
    weight_decay: float = 0.0
    optimizer: str = "Adam"
    grad_clip: float | None = None
    lr_schedule: str = "constant"
    epochs_per_iteration: int = 10
    init_seed: int = 0
    momentum: float = 0.0  # SGD only

    def validate(self) -> TrainConfig:
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise ConfigError("learning_rate must be a finite nonnegative real")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be positive")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError("dropout_p must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ConfigError("weight_decay must be nonnegative")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigError("grad_clip must be positive or None")
        if self.lr_schedule not in SCHEDULES:
            raise ConfigError(f"lr_schedule must be one of {SCHEDULES}")
        if self.epochs_per_iteration < 1:
            raise ConfigError("epochs_per_iteration must be positive")
        return self


@dataclass(frozen=True)
class TrainMetrics:
    train_loss: float
    val_loss: float
    val_accuracy: float
    grad_norm_mean: float
    grad_norm_max: float
    loss_variance: float
    convergence_rate: float
    diverged: bool = False
    epoch_losses: tuple[float, ...] = field(default=(), compare=False)

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


@dataclass(frozen=True)
class Dataset:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray


def generate_dataset(seed: int, n_train: int = 512, n_val: int = 256) -> Dataset:
    """Two interleaved noisy classes in 8 dimensions.

    Along a random unit direction, class 0 sits at blobs -3 and +1 and class 1 at
    -1 and +3, so no single hyperplane separates them.
    """
    if n_train < 1 or n_val < 1:
        raise ConfigError("n_train and n_val must be >= 1")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=N_FEATURES)
    direction /= np.linalg.norm(direction)
    n = n_train + n_val
    y = rng.integers(0, N_CLASSES, size=n)
    side = rng.integers(0, 2, size=n)
    centre = np.where(y == 0, np.where(side == 0, -3.0, 1.0), np.where(side == 0, -1.0, 3.0))
    x = centre[:, None] * direction[None, :] + rng.normal(scale=0.8, size=(n, N_FEATURES))
    return Dataset(x[:n_train], y[:n_train], x[n_train:], y[n_train:])


def _finite_or_sentinel(value: float) -> float:
    return value if math.isfinite(value) else DIVERGED_SENTINEL


def train_and_measure(config: TrainConfig, dataset: Dataset,
                      model: mlp.MlpModel | None = None) -> tuple[TrainMetrics, mlp.MlpModel]:
    """Train for ``epochs_per_iteration`` epochs and report the observable metrics.

    ``model`` continues training from existing weights; by default a fresh model
    is drawn from ``init_seed``. Divergence never raises: metrics come back with
    ``val_loss`` at the sentinel maximum and ``diverged`` set.
    """
    config.validate()
    if model is None:
        model = mlp.MlpModel.init(N_FEATURES, N_CLASSES, config.init_seed)
    else:
        model = model.copy()
    rng = np.random.default_rng([config.init_seed, 1])
    opt = mlp.Optimizer(config.optimizer, config.weight_decay, config.momentum)
    n = len(dataset.y_train)
    steps_per_epoch = math.ceil(n / config.batch_size)
    total = steps_per_epoch * config.epochs_per_iteration

    epoch_losses: list[float] = []
    batch_losses: list[float] = []
    norms: list[float] = []
    diverged = False
    t = 0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for _ in range(config.epochs_per_iteration):
            batch_losses, norms = [], []
            for idx in mlp.minibatches(n, config.batch_size, rng):
                masks = mlp.dropout_masks(rng, len(idx), config.dropout_p)
                value, grads = mlp.backward(model, (dataset.x_train[idx], dataset.y_train[idx]), masks)
                norm = mlp.global_norm(grads)
                if not math.isfinite(value) or value > DIVERGENCE_LOSS or not math.isfinite(norm):
                    diverged = True
                    break
                batch_losses.append(value)
                norms.append(norm)
                if config.grad_clip is not None:
                    grads = mlp.clip_grads(grads, config.grad_clip)
                opt.step(model.params, grads, mlp.scheduled_lr(config.learning_rate, config.lr_schedule, t, total))
                t += 1
                if not model.is_finite():
                    diverged = True
                    break
            if diverged:
                break
            epoch_losses.append(float(np.mean(batch_losses)))

        if not diverged:
            logits, _ = mlp.forward(model, dataset.x_val)
            val_loss = mlp.cross_entropy(logits, dataset.y_val)
            val_acc = float(np.mean(np.argmax(logits, axis=1) == dataset.y_val))
            if not math.isfinite(val_loss) or val_loss > DIVERGENCE_LOSS:
                diverged = True

    if diverged:
        finite_norms = [v for v in norms if math.isfinite(v)]
        metrics = TrainMetrics(
            train_loss=DIVERGED_SENTINEL,
            val_loss=DIVERGED_SENTINEL,
            val_accuracy=0.0,
            grad_norm_mean=float(np.mean(finite_norms)) if finite_norms else 0.0,
            grad_norm_max=max(finite_norms) if finite_norms else 0.0,
            loss_variance=0.0,
            convergence_rate=0.0,
            diverged=True,
            epoch_losses=tuple(_finite_or_sentinel(v) for v in epoch_losses),
        )
        return metrics, model

    improvements = [a - b for a, b in zip(epoch_losses, epoch_losses[1:])][-CONVERGENCE_WINDOW:]
    metrics = TrainMetrics(
        train_loss=epoch_losses[-1],
        val_loss=val_loss,
        val_accuracy=val_acc,
        grad_norm_mean=float(np.mean(norms)),
        grad_norm_max=float(np.max(norms)),
        loss_variance=float(np.var(batch_losses)),
        convergence_rate=float(np.mean(improvements)) if improvements else 0.0,
        epoch_losses=tuple(epoch_losses),
    )
    return metrics, model


def _clamp(value, bounds):
    lo, hi = bounds
    clamped = min(max(value, lo), hi)
    return clamped, clamped != value


def _roster() -> list[tuple[str, str, str]]:
    return [
        ("lr_up_2x", "learning_rate", "increase learning rate 2x"),
        ("lr_up_5x", "learning_rate", "increase learning rate 5x"),
        ("lr_down_2x", "learning_rate", "decrease learning rate 2x"),
        ("lr_down_5x", "learning_rate", "decrease learning rate 5x"),
        ("lr_cosine", "learning_rate", "cosine learning-rate schedule"),
        ("lr_warmup", "learning_rate", "linear warmup schedule"),
        ("batch_up_2x", "batch_size", "double batch size"),
        ("batch_down_2x", "batch_size", "halve batch size"),
        ("batch_16", "batch_size", "set batch size 16"),
        ("batch_128", "batch_size", "set batch size 128"),
        ("dropout_up_0.1", "regularization", "raise dropout by 0.1"),
        ("dropout_down_0.1", "regularization", "lower dropout by 0.1"),
        ("wd_up_10x", "regularization", "weight decay x10"),
        ("wd_down_10x", "regularization", "weight decay /10"),
        ("wd_enable", "regularization", "enable weight decay 1e-4"),
        ("wd_disable", "regularization", "disable weight decay"),
        ("switch_sgd", "optimizer", "switch to SGD"),
        ("switch_adam", "optimizer", "switch to Adam"),
        ("switch_adamw", "optimizer", "switch to AdamW"),
        ("switch_sgd_momentum", "optimizer", "switch to SGD with momentum 0.9"),
        ("clip_1.0", "gradient_control", "clip gradient norm at 1.0"),
        ("clip_0.5", "gradient_control", "clip gradient norm at 0.5"),
        ("clip_off", "gradient_control", "disable gradient clipping"),
        ("clip_5.0", "gradient_control", "clip gradient norm at 5.0"),
    ]


def list_actions() -> list[ActionSpec]:
    return [ActionSpec(id=i, category=c, label=lbl) for i, c, lbl in _roster()]


ACTION_IDS = tuple(a for a, _, _ in _roster())


def apply_action(config: TrainConfig, action_id: str) -> tuple[TrainConfig, bool]:
    """Return the modified config and whether a bound had to be enforced."""
    c = config
    clamped = False
    if action_id.startswith("lr_") and action_id[3:] in ("up_2x", "up_5x", "down_2x", "down_5x"):
        factor = {"up_2x": 2.0, "up_5x": 5.0, "down_2x": 0.5, "down_5x": 0.2}[action_id[3:]]
        lr, clamped = _clamp(c.learning_rate * factor, LR_BOUNDS)
        c = replace(c, learning_rate=lr)
    elif action_id == "lr_cosine":
        c = replace(c, lr_schedule="cosine")
    elif action_id == "lr_warmup":
        c = replace(c, lr_schedule="warmup")
    elif action_id in ("batch_up_2x", "batch_down_2x", "batch_16", "batch_128"):
        target = {"batch_up_2x": c.batch_size * 2, "batch_down_2x": c.batch_size // 2,
                  "batch_16": 16, "batch_128": 128}[action_id]
        bs, clamped = _clamp(target, BATCH_BOUNDS)
        c = replace(c, batch_size=int(bs))
    elif action_id in ("dropout_up_0.1", "dropout_down_0.1"):
        step = 0.1 if action_id == "dropout_up_0.1" else -0.1
        p, clamped = _clamp(round(c.dropout_p + step, 10), DROPOUT_BOUNDS)
        c = replace(c, dropout_p=p)
    elif action_id in ("wd_up_10x", "wd_down_10x"):
        wd, clamped = _clamp(c.weight_decay * (10.0 if action_id == "wd_up_10x" else 0.1), WEIGHT_DECAY_BOUNDS)
        c = replace(c, weight_decay=wd)
    elif action_id == "wd_enable":
        c = replace(c, weight_decay=1e-4)
    elif action_id == "wd_disable":
        c = replace(c, weight_decay=0.0)
    elif action_id == "switch_sgd":
        c = replace(c, optimizer="SGD", momentum=0.0)
    elif action_id == "switch_adam":
        c = replace(c, optimizer="Adam", momentum=0.0)
    elif action_id == "switch_adamw":
        c = replace(c, optimizer="AdamW", momentum=0.0)
    elif action_id == "switch_sgd_momentum":
        c = replace(c, optimizer="SGD", momentum=0.9)
    elif action_id.startswith("clip_"):
        c = replace(c, grad_clip=None if action_id == "clip_off" else float(action_id[5:]))
    else:
        raise UnknownAction(f"unknown training action {action_id!r}")
    return c, clamped


def metrics_snapshot(metrics: TrainMetrics, clock: float, clamped: bool = False) -> MetricSnapshot:
    notes = {}
    if metrics.diverged:
        notes["diverged"] = "true"
    if clamped:
        notes["clamped"] = "true"
    return MetricSnapshot(
        metrics={k: MetricSummary.single(v) for k, v in metrics.as_dict().items()},
        objective_value=metrics.val_loss,
        captured_at=clock,
        notes=notes,
    )


class TrainDomain:
    domain_id = "train"
    objective_sense = "minimize"
    metric_names = METRIC_NAMES
    metric_goals = METRIC_GOALS

    def __init__(self, base_config: TrainConfig | None = None, *, data_seed: int = 1,
                 n_train: int = 512, n_val: int = 256, mode: str = "retrain"):
        if mode not in ("retrain", "resume"):
            raise ConfigError("mode must be 'retrain' or 'resume'")
        self.base_config = (base_config or TrainConfig()).validate()
        self.dataset = generate_dataset(data_seed, n_train, n_val)
        self.mode = mode
        self.benchmark = f"mlp-synthetic-{data_seed}"
        self.config = self.base_config
        self.model: mlp.MlpModel | None = None
        self._clock = 0

    def actions(self) -> list[ActionSpec]:
        return list_actions()

    def _measure(self, clamped: bool = False) -> MetricSnapshot:
        start = self.model if self.mode == "resume" else None
        metrics, model = train_and_measure(self.config, self.dataset, start)
        if not metrics.diverged:
            self.model = model
        snap = metrics_snapshot(metrics, float(self._clock), clamped)
        self._clock += 1
        return snap

    def reset(self, seed: int) -> MetricSnapshot:
        self.config = self.base_config
        self.model = None
        self._clock = 0
        return self._measure()

    def step(self, action: ActionSpec, decision: AgentDecision) -> MetricSnapshot:
        new_config, clamped = apply_action(self.config, action.id)
        self.config = new_config
        return self._measure(clamped)
