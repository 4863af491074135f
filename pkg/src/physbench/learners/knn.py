"""One-nearest-neighbor lookup predictor."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..errors import DimensionError
from .data import TaskKind, training_pairs


class KnnModel:
    """Returns the target stored with the closest training input.

    Distance is Euclidean. Exact ties go to the entry inserted first.
    """

    kind = "knn"
    separable = True

    def __init__(self, inputs, targets, task, nq=None, k=1):
        if k != 1:
            raise ValueError("only k=1 is supported")
        self.inputs = np.array(inputs, dtype=np.float64)
        self.targets = np.array(targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] != self.targets.shape[0] or self.inputs.shape[0] == 0:
            raise DimensionError("inputs and targets must be non-empty 2-D arrays of equal length")
        self.inputs.setflags(write=False)
        self.targets.setflags(write=False)
        self.task = TaskKind.parse(task)
        self.k = k
        self.nq = nq
        self._tree = cKDTree(self.inputs)

    def __len__(self):
        return self.inputs.shape[0]

    def nearest(self, X):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.inputs.shape[1]:
            raise DimensionError(f"query has {X.shape[1]} entries, index expects {self.inputs.shape[1]}")
        if len(self) == 1:
            idx = np.zeros(X.shape[0], dtype=np.int64)
            return idx[0] if single else idx
        dist, idx = self._tree.query(X, k=2)
        idx = idx[:, 0].astype(np.int64)
        # second neighbour as close as the first: settle the tie exactly
        for row in np.flatnonzero(dist[:, 1] <= dist[:, 0] * (1 + 1e-9) + 1e-300):
            radius = dist[row, 0] * (1 + 1e-9) + 1e-300
            cand = np.array(sorted(self._tree.query_ball_point(X[row], radius)), dtype=np.int64)
            if cand.size == 0:
                continue
            d2 = np.sum((self.inputs[cand] - X[row]) ** 2, axis=1)
            idx[row] = cand[np.flatnonzero(d2 == d2.min())[0]]
        return idx[0] if single else idx

    def predict(self, X):
        return self.targets[self.nearest(X)]

    def derivative(self, X):
        return self.predict(X)


def knn_fit(trajectories, task) -> KnnModel:
    trajectories = list(trajectories)
    if not trajectories:
        raise ValueError("cannot fit a nearest-neighbor model without trajectories")
    X, Y = training_pairs(trajectories, task)
    return KnnModel(X, Y, task, nq=trajectories[0].nq)


def knn_predict(model: KnnModel, x):
    return model.predict(x)
