"""Fully connected tanh networks trained with Adam, written directly in numpy."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DimensionError, DivergenceError
from .data import TaskKind, training_pairs

NAMED_ARCHITECTURES = {
    "mlp-2-2048": (2, 2048),
    "mlp-3-200": (3, 200),
    "mlp-5-2048": (5, 2048),
    "mlp-4-4096": (4, 4096),
}
TANH_GAIN = 5.0 / 3.0


def parse_architecture(name: str):
    """``"mlp-<depth>-<width>"`` to ``(depth, width)``."""
    if name in NAMED_ARCHITECTURES:
        return NAMED_ARCHITECTURES[name]
    m = re.fullmatch(r"mlp-(\d+)-(\d+)", name)
    if not m or int(m.group(1)) < 1 or int(m.group(2)) < 1:
        raise ValueError(f"unrecognized architecture {name!r}")
    return int(m.group(1)), int(m.group(2))


@dataclass(frozen=True)
class MlpModel:
    """``depth`` affine layers with tanh between them (``depth - 1`` hidden layers).

    ``input_extra`` is a constant vector (the fixed mask) appended to every
    state before the first layer.
    """

    weights: tuple
    biases: tuple
    task: TaskKind = TaskKind.DERIVATIVE
    seed: int = 0
    nq: int | None = None
    input_extra: np.ndarray | None = None

    kind = "mlp"
    separable = True

    @classmethod
    def create(cls, state_dim, output_dim, depth, width, seed=0, task=TaskKind.DERIVATIVE, nq=None, input_extra=None):
        extra = None if input_extra is None else np.asarray(input_extra, dtype=np.float64).ravel()
        in_dim = int(state_dim) + (0 if extra is None else extra.size)
        sizes = [in_dim] + [int(width)] * (int(depth) - 1) + [int(output_dim)]
        rng = np.random.Generator(np.random.PCG64(seed))
        weights, biases = [], []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            gain = TANH_GAIN if i < len(sizes) - 2 else 1.0
            limit = gain * np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(weights), tuple(biases), TaskKind.parse(task), int(seed), nq, extra)

    @classmethod
    def from_architecture(cls, name, state_dim, output_dim, **kwargs):
        depth, width = parse_architecture(name)
        return cls.create(state_dim, output_dim, depth, width, **kwargs)

    @property
    def depth(self):
        return len(self.weights)

    @property
    def width(self):
        return self.weights[0].shape[1] if self.depth > 1 else 0

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def architecture(self):
        return f"mlp-{self.depth}-{self.width}"

    def parameters(self):
        return list(self.weights) + list(self.biases)

    def with_parameters(self, params):
        d = self.depth
        return replace(self, weights=tuple(params[:d]), biases=tuple(params[d:]))

    def network_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if self.input_extra is not None:
            extra = np.broadcast_to(self.input_extra, X.shape[:-1] + self.input_extra.shape)
            X = np.concatenate([X, extra], axis=-1)
        if X.shape[-1] != self.weights[0].shape[0]:
            raise DimensionError(f"input has {X.shape[-1]} entries, first layer expects {self.weights[0].shape[0]}")
        return X

    def _forward_raw(self, H):
        acts = [H]
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            H = H @ W + b
            if i < self.depth - 1:
                H = np.tanh(H)
            acts.append(H)
        return acts

    def predict(self, X):
        return self._forward_raw(self.network_input(X))[-1]

    def derivative(self, X):
        return self.predict(X)


def mlp_forward(model: MlpModel, x):
    return model.predict(x)


def _loss_and_grads(model: MlpModel, H, Y):
    acts = model._forward_raw(H)
    resid = acts[-1] - Y
    loss = float(np.mean(resid * resid))
    delta = 2.0 * resid / resid.size
    gw, gb = [None] * model.depth, [None] * model.depth
    for i in range(model.depth - 1, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - acts[i] ** 2)
    return loss, gw + gb


def mlp_gradients(model: MlpModel, batch):
    """Loss and gradients of the batch mean squared error.

    ``batch`` is ``(inputs, targets)`` with raw states as inputs; gradients
    are ordered like :meth:`MlpModel.parameters`.
    """
    X, Y = batch
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("batch is empty")
    Y = np.asarray(Y, dtype=np.float64).reshape(X.shape[0], -1)
    return _loss_and_grads(model, model.network_input(X), Y)


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    weight_decay: float = 0.0
    epochs: int = 100
    batch_size: int = 32
    noise_variance: float = 0.0
    seed: int = 0
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    sample_stride: int = 1

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.noise_variance < 0 or self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("invalid training configuration")


def default_learning_rate(system: str, learner: str) -> float:
    if learner == "mlp" and system in ("spring-mesh", "navier-stokes"):
        return 1e-4
    return 1e-3


@dataclass
class Adam:
    learning_rate: float = 1e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        b1, b2 = self.betas
        c1, c2 = 1.0 - b1**self.t, 1.0 - b2**self.t
        out = []
        for p, g, m, v in zip(params, grads, self.m, self.v):
            if self.weight_decay:
                g = g + self.weight_decay * p
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            out.append(p - self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps))
        return out


@dataclass
class Sgd:
    learning_rate: float = 1e-3
    weight_decay: float = 0.0

    def step(self, params, grads):
        return [p - self.learning_rate * (g + self.weight_decay * p) for p, g in zip(params, grads)]


def make_optimizer(cfg: TrainConfig):
    if cfg.optimizer == "adam":
        return Adam(cfg.learning_rate, tuple(cfg.betas), cfg.eps, cfg.weight_decay)
    return Sgd(cfg.learning_rate, cfg.weight_decay)


def mlp_train_arrays(model: MlpModel, X, Y, cfg: TrainConfig):
    """Train on explicit arrays; returns ``(fitted model, per-epoch mean loss)``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("no training samples")
    derivative_task = model.task is TaskKind.DERIVATIVE
    shuffle_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(0,))))
    noise_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(1,))))
    sigma = np.sqrt(cfg.noise_variance)
    opt = make_optimizer(cfg)
    params = [np.array(p) for p in model.parameters()]
    current = model
    history = []
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            b = order[start : start + cfg.batch_size]
            xb, yb = X[b], Y[b]
            if cfg.noise_variance > 0:
                noise = sigma * noise_rng.standard_normal(xb.shape)
                xb = xb + noise
                if derivative_task:
                    yb = yb - noise
            loss, grads = _loss_and_grads(current, current.network_input(xb), yb)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss in epoch {epoch}", step=epoch)
            total += loss * len(b)
            params = opt.step(params, grads)
            current = model.with_parameters(params)
        history.append(total / n)
    for p in params:
        p.setflags(write=False)
    return model.with_parameters(params), history


def mlp_train(model: MlpModel, trajectories, task, cfg: TrainConfig):
    """Fit ``model`` to training pairs drawn from ``trajectories``; returns ``(model, history)``."""
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("at least one trajectory is required")
    task = TaskKind.parse(task)
    if task is not model.task:
        model = replace(model, task=task)
    X, Y = training_pairs(trajectories, task, cfg.sample_stride)
    return mlp_train_arrays(model, X, Y, cfg)
