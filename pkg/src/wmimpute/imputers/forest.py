"""Regression trees, bagged forests, and MissForest iterative imputation."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import PipelineError
from ..rng import make_rng
from .base import Imputer, as_rows

# Split scores within this fraction of the node's total sum of squares are ties.
TIE_RTOL = 1e-12


class RegressionTree:
    """Binary regression tree grown by exhaustive variance-reduction search.

    Every feature is considered at every node; thresholds are midpoints between
    consecutive distinct values, and a sample goes left when ``x <= threshold``.
    Equal-gain candidates resolve to the lowest feature index, then the lowest
    threshold. Leaves predict the mean target of their samples.
    """

    def __init__(self, max_depth=10, min_samples_split=2):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(y[idx].mean()))
            return len(feature) - 1

        stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if depth >= self.max_depth or idx.size < self.min_samples_split:
                continue
            split = best_split(X[idx], y[idx])
            if split is None:
                continue
            f, thr = split
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = f, thr
            left[node], right[node] = new_node(li), new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature, dtype=np.int64)
        self.threshold_ = np.array(threshold)
        self.left_ = np.array(left, dtype=np.int64)
        self.right_ = np.array(right, dtype=np.int64)
        self.value_ = np.array(value)
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature_[node]
            inner = f >= 0
            if not inner.any():
                return self.value_[node]
            r, n = rows[inner], node[inner]
            goes_left = X[r, f[inner]] <= self.threshold_[n]
            node[inner] = np.where(goes_left, self.left_[n], self.right_[n])

    @property
    def n_nodes(self):
        return self.feature_.size

    def to_arrays(self):
        return np.stack([self.feature_.astype(float), self.threshold_,
                         self.left_.astype(float), self.right_.astype(float), self.value_])

    @classmethod
    def from_arrays(cls, a, max_depth=10):
        tree = cls(max_depth=max_depth)
        tree.feature_, tree.left_, tree.right_ = (a[i].astype(np.int64) for i in (0, 2, 3))
        tree.threshold_, tree.value_ = a[1].copy(), a[4].copy()
        return tree


def best_split(X, y):
    """Return ``(feature, threshold)`` maximizing SSE reduction, or None."""
    m = y.shape[0]
    centered = y - y.mean()
    sst = float(centered @ centered)
    if m < 2 or sst <= 0.0:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    cs = np.cumsum(centered[order], axis=0)[:-1]
    n_left = np.arange(1, m, dtype=float)[:, None]
    # with a centered target the right-hand sum is -cs
    gain = cs * cs * (1.0 / n_left + 1.0 / (m - n_left))
    gain[xs[:-1] >= xs[1:]] = -np.inf
    best = gain.max()
    tol = TIE_RTOL * sst
    if not np.isfinite(best) or best <= tol:
        return None
    pos, feats = np.nonzero(gain >= best - tol)
    # lowest feature, then lowest threshold (positions are sorted per feature)
    f = int(feats.min())
    i = int(pos[feats == f].min())
    lo, hi = xs[i, f], xs[i + 1, f]
    thr = (lo + hi) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return f, float(thr)


class RandomForest:
    """Bagged regression trees; prediction is the mean over trees.

    Each tree is trained on ``round(max_samples * n)`` rows drawn with
    replacement (or without, when ``bootstrap`` is off). Row draws for all
    trees are taken up front from one seeded stream, so the fitted forest does
    not depend on ``n_jobs``.
    """

    def __init__(self, n_estimators=4, max_depth=10, bootstrap=True, max_samples=0.5, n_jobs=1, seed=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.bootstrap = bootstrap
        self.max_samples = max_samples
        self.n_jobs = n_jobs
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n = X.shape[0]
        rng = make_rng(self.seed)
        size = max(1, int(np.floor(self.max_samples * n + 0.5)))
        draws = [
            rng.integers(0, n, size) if self.bootstrap else np.sort(rng.choice(n, size, replace=False))
            for _ in range(self.n_estimators)
        ]

        def grow(idx):
            return RegressionTree(self.max_depth).fit(X[idx], y[idx])

        if self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                self.trees_ = list(pool.map(grow, draws))
        else:
            self.trees_ = [grow(idx) for idx in draws]
        return self

    def predict(self, X):
        total = np.zeros(np.shape(X)[0])
        for tree in self.trees_:
            total += tree.predict(X)
        return total / len(self.trees_)


@dataclass(frozen=True)
class MissForestConfig:
    n_estimators: int = 4
    max_depth: int = 10
    bootstrap: bool = True
    max_samples: float = 0.5
    n_jobs: int = 2
    max_iter: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1 or self.max_depth < 1 or self.max_iter < 1:
            raise PipelineError("bad-config", "n_estimators, max_depth and max_iter must be >= 1")
        if not 0 < self.max_samples <= 1:
            raise PipelineError("bad-config", "max_samples must lie in (0, 1]")


@dataclass
class MissForestResult:
    imputed: np.ndarray
    deltas: list = field(default_factory=list)
    n_iter: int = 0
    stopped_on_increase: bool = False


def missforest(X, config: MissForestConfig | None = None, seed=None) -> MissForestResult:
    """Iteratively impute the NaN cells of ``X`` with per-column random forests.

    Missing cells start at their column means. Each iteration visits the
    incomplete columns from least to most missing and refits a forest on the
    rows where that column is observed (features: all other columns at their
    current values). The change ``delta_t`` is the sum of squared differences
    of the imputed cells between iterations; iteration stops at the first
    increase of ``delta_t`` and returns the iterate before it, or after
    ``max_iter`` iterations.
    """
    cfg = config or MissForestConfig()
    X = np.asarray(X, dtype=float)
    missing = np.isnan(X)
    if not missing.any():
        return MissForestResult(X.copy())
    n_obs = (~missing).sum(axis=0)
    if np.any(n_obs == 0):
        col = int(np.flatnonzero(n_obs == 0)[0])
        raise PipelineError("unlearnable-column", f"column {col} is never observed", column=col)

    rng = make_rng(cfg.seed if seed is None else seed)
    current = np.where(missing, np.nanmean(X, axis=0), X)
    n_miss = missing.sum(axis=0)
    columns = [int(j) for j in np.argsort(n_miss, kind="stable") if n_miss[j] > 0]
    all_cols = np.arange(X.shape[1])

    result = MissForestResult(current)
    previous_delta = np.inf
    for it in range(cfg.max_iter):
        before = current.copy()
        for j in columns:
            feats = all_cols != j
            obs, miss = ~missing[:, j], missing[:, j]
            forest = RandomForest(cfg.n_estimators, cfg.max_depth, cfg.bootstrap, cfg.max_samples,
                                  cfg.n_jobs, seed=int(rng.integers(2**63 - 1)))
            forest.fit(current[obs][:, feats], current[obs, j])
            current[miss, j] = forest.predict(current[miss][:, feats])
        diff = (current - before)[missing]
        delta = float(diff @ diff)
        result.deltas.append(delta)
        if delta > previous_delta:
            result.imputed = before
            result.n_iter = it
            result.stopped_on_increase = True
            return result
        result.imputed, result.n_iter = current, it + 1
        if delta == 0.0:
            break
        previous_delta = delta
    return result


class MissForestImputer(Imputer):
    """MissForest run jointly over the training rows and the query rows.

    ``fit`` stores the training matrix (holes allowed); ``impute`` stacks the
    queries under it and runs :func:`missforest` on the whole block, so the
    per-column forests learn from training rows and query rows alike.
    """

    kind = "missforest"

    def __init__(self, config: MissForestConfig | None = None, **kwargs):
        super().__init__()
        self.config = config or MissForestConfig(**kwargs)

    def fit(self, train, seed=None):
        x = as_rows(train)
        if np.isnan(x).all(axis=0).any():
            col = int(np.flatnonzero(np.isnan(x).all(axis=0))[0])
            raise PipelineError("unlearnable-column", f"column {col} is never observed in training data", column=col)
        self.seed_ = self.config.seed if seed is None else int(seed)
        self.train_ = x
        self.train_result_ = missforest(x, self.config, self.seed_)
        self.fitted_ = True
        return self

    def _fill(self, rows):
        self.last_result_ = missforest(np.vstack([self.train_, rows]), self.config, self.seed_)
        return self.last_result_.imputed[self.train_.shape[0]:]

    def get_config(self):
        return asdict(self.config)

    def get_arrays(self):
        return {"train": self.train_}

    def get_extra(self):
        return {"seed": self.seed_}

    @classmethod
    def from_state(cls, config, arrays, extra=None):
        model = cls(MissForestConfig(**config))
        model.train_ = np.array(arrays["train"]).reshape(-1, 24)
        model.seed_ = int((extra or {}).get("seed", model.config.seed))
        model.train_result_ = MissForestResult(model.train_)
        model.fitted_ = True
        return model
