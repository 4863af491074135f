"""Random-feature kernel ridge regression.

Features are ``ReLU(<x, z_l>) / sqrt(L)`` with frozen ``z_l ~ N(0, I)``. The
first ``L`` rows of ``z`` depend only on the seed, so models with the same
seed and growing ``L`` use nested feature sets.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ..errors import DimensionError, IllConditionedError
from .data import TaskKind, training_pairs

DEFAULT_RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class RandomFeatureModel:
    projections: np.ndarray  # (L, input_dim)
    weights: np.ndarray  # (L, output_dim)
    task: TaskKind = TaskKind.DERIVATIVE
    seed: int = 0
    ridge: float | None = None
    nq: int | None = None

    kind = "random-features"
    separable = True

    @classmethod
    def create(cls, input_dim, output_dim, n_features=1024, seed=0, task=TaskKind.DERIVATIVE, nq=None):
        rng = np.random.Generator(np.random.PCG64(seed))
        z = rng.standard_normal((int(n_features), int(input_dim)))
        w = np.zeros((int(n_features), int(output_dim)))
        z.setflags(write=False)
        w.setflags(write=False)
        return cls(z, w, TaskKind.parse(task), int(seed), None, nq)

    @property
    def n_features(self):
        return self.projections.shape[0]

    @property
    def input_dim(self):
        return self.projections.shape[1]

    def features(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.input_dim:
            raise DimensionError(f"input has {X.shape[-1]} entries, features expect {self.input_dim}")
        return np.maximum(X @ self.projections.T, 0.0) / np.sqrt(self.n_features)

    def predict(self, X):
        return self.features(X) @ self.weights

    def derivative(self, X):
        return self.predict(X)


def rf_features(model: RandomFeatureModel, x):
    return model.features(x)


def _ridge_solve(phi, Y, lam):
    """Minimize ``|phi W - Y|^2 + lam |W|^2``; dual form when features outnumber samples."""
    n, L = phi.shape
    if L <= n:
        gram = phi.T @ phi
        rhs = phi.T @ Y
    else:
        gram = phi @ phi.T
        rhs = Y
    gram[np.diag_indices_from(gram)] += lam
    try:
        factor = cho_factor(gram, lower=True, check_finite=True)
    except LinAlgError:
        raise IllConditionedError("normal matrix is singular; use a ridge parameter > 0") from None
    if lam == 0.0 and np.linalg.cond(gram) > 1e14:
        raise IllConditionedError("normal matrix is numerically singular; use a ridge parameter > 0")
    sol = cho_solve(factor, rhs)
    return sol if L <= n else phi.T @ sol


def default_ridge(phi):
    return DEFAULT_RIDGE_SCALE * float(np.mean(np.sum(phi * phi, axis=0)))


def rf_fit(model: RandomFeatureModel, inputs, targets, ridge=None) -> RandomFeatureModel:
    """Closed-form fit. ``ridge=None`` picks a tiny multiple of the mean Gram diagonal."""
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or Y.shape[0] != X.shape[0]:
        raise DimensionError("inputs and targets must have matching sample counts")
    if Y.shape[1] != model.weights.shape[1]:
        raise DimensionError(f"targets have {Y.shape[1]} outputs, model has {model.weights.shape[1]}")
    phi = model.features(X)
    lam = default_ridge(phi) if ridge is None else float(ridge)
    if lam < 0:
        raise ValueError("ridge parameter must be non-negative")
    W = _ridge_solve(phi, Y, lam)
    W.setflags(write=False)
    return replace(model, weights=W, ridge=lam)


def rf_fit_sgd(model, inputs, targets, learning_rate=1e-3, weight_decay=1e-4, epochs=100, batch_size=32, seed=0):
    """Plain mini-batch SGD with weight decay on the per-sample squared error.

    Each step is ``W -= lr * (2/B phi_b^T r_b + weight_decay W)``, so the
    fixed point is the ridge solution with ``lam = weight_decay * N / 2``.
    Returns the fitted model and the per-epoch training loss.
    """
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64).reshape(X.shape[0], -1)
    phi = model.features(X)
    W = np.array(model.weights)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = X.shape[0]
    history = []
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            b = order[start : start + batch_size]
            resid = phi[b] @ W - Y[b]
            W -= learning_rate * (2.0 / len(b) * (phi[b].T @ resid) + weight_decay * W)
        history.append(float(np.mean(np.sum((phi @ W - Y) ** 2, axis=1))))
    W.setflags(write=False)
    return replace(model, weights=W, ridge=weight_decay * n / 2.0), history


def rf_train(trajectories, task, n_features=1024, seed=0, ridge=None, stride=1) -> RandomFeatureModel:
    trajectories = list(trajectories)
    X, Y = training_pairs(trajectories, task, stride)
    model = RandomFeatureModel.create(X.shape[1], Y.shape[1], n_features, seed, task, trajectories[0].nq)
    return rf_fit(model, X, Y, ridge)
