"""k-nearest-neighbour imputation over incomplete day vectors."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..core import HOURS_PER_DAY
from ..errors import PipelineError
from .base import Imputer, require_complete


@dataclass(frozen=True)
class KnnConfig:
    k: int = 3
    distance: str = "nan-euclidean"
    weighting: str = "uniform"

    def __post_init__(self):
        if int(self.k) < 1:
            raise PipelineError("bad-config", "k must be >= 1")
        if self.distance != "nan-euclidean" or self.weighting != "uniform":
            raise PipelineError("bad-config", "only nan-euclidean distance with uniform weights is supported")


def nan_euclidean(query: np.ndarray, train: np.ndarray) -> np.ndarray:
    """Presence-scaled Euclidean distances from each query row to each train row.

    Over the columns C present in a query row,
    ``d = sqrt(24 / |C| * sum_{j in C} (q_j - t_j) ** 2)``.
    Returns an array of shape ``(n_query, n_train)``.
    """
    query = np.atleast_2d(query)
    present = ~np.isnan(query)
    n_present = present.sum(axis=1)
    if np.any(n_present == 0):
        raise PipelineError("empty-query-row", "query row has no present value")
    q = np.where(present, query, 0.0)
    d2 = np.zeros((query.shape[0], train.shape[0]))
    for j in range(query.shape[1]):
        diff = q[:, j, None] - train[None, :, j]
        d2 += np.where(present[:, j, None], diff * diff, 0.0)
    return np.sqrt(d2 * (query.shape[1] / n_present)[:, None])


class KnnImputer(Imputer):
    """Fill a missing cell with the unweighted mean of the ``k`` nearest
    training rows' values in that column.

    Neighbours are ranked by :func:`nan_euclidean`; equal distances are
    broken in favour of the lower training-row index.
    """

    kind = "knn"

    def __init__(self, k=3, config: KnnConfig | None = None):
        super().__init__()
        self.config = config or KnnConfig(k=int(k))

    def fit(self, train, seed=None):
        x = require_complete(train)
        if x.shape[0] < self.config.k:
            raise PipelineError("insufficient-data", f"kNN needs at least k={self.config.k} training rows")
        self.train_ = x
        self.fitted_ = True
        return self

    def neighbors(self, rows) -> np.ndarray:
        """Indices of the k nearest training rows, nearest first."""
        d = nan_euclidean(np.atleast_2d(rows), self.train_)
        return np.argsort(d, axis=1, kind="stable")[:, : self.config.k]

    def _fill(self, rows):
        idx = self.neighbors(rows)
        # (n, k, 24) -> sum over k in rank order, then divide
        return self.train_[idx].sum(axis=1) / self.config.k

    def get_config(self):
        return asdict(self.config)

    def get_arrays(self):
        return {"train": self.train_}

    @classmethod
    def from_state(cls, config, arrays, extra=None):
        model = cls(config=KnnConfig(**config))
        model.train_ = np.array(arrays["train"]).reshape(-1, HOURS_PER_DAY)
        model.fitted_ = True
        return model
