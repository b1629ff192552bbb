"""The contract every imputer satisfies.

An imputer is fitted on complete 24-value rows and fills the NaN cells of
query rows. Present cells always pass through bit-identically: subclasses only
produce candidate values in ``_fill`` and the base class merges them.
"""

from __future__ import annotations

import numpy as np

from ..core import HOURS_PER_DAY
from ..errors import PipelineError


def as_rows(rows) -> np.ndarray:
    x = np.array(rows, dtype=float, ndmin=2)
    if x.ndim != 2 or x.shape[1] != HOURS_PER_DAY:
        raise PipelineError("shape-error", f"expected rows of {HOURS_PER_DAY} values, got shape {x.shape}")
    return x


def require_complete(train, what="training rows"):
    x = as_rows(train)
    if np.isnan(x).any():
        raise PipelineError("row-not-complete", f"{what} must be complete")
    return x


class Imputer:
    kind: str = ""

    def __init__(self):
        self.fitted_ = False

    def fit(self, train, seed=None):
        raise NotImplementedError

    def _fill(self, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def impute(self, rows) -> np.ndarray:
        """Return a complete copy of ``rows``; a 1-D input gives a 1-D output."""
        if not self.fitted_:
            raise PipelineError("not-fitted", f"{self.kind} imputer must be fitted before imputing")
        single = np.ndim(rows) == 1
        x = as_rows(rows)
        missing = np.isnan(x)
        out = x.copy()
        if missing.any():
            todo = missing.any(axis=1)
            filled = self._fill(x[todo])
            out[todo] = np.where(missing[todo], filled, x[todo])
        return out[0] if single else out

    # persistence hooks used by the model artifact format
    def get_config(self) -> dict:
        raise NotImplementedError

    def get_arrays(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_state(cls, config: dict, arrays: dict, extra: dict | None = None):
        raise NotImplementedError

    def get_extra(self) -> dict:
        return {}
