"""Reference-floor imputers: column mean and within-row linear interpolation."""

import numpy as np

from ..errors import PipelineError
from .base import Imputer, require_complete


class MeanImputer(Imputer):
    """Fill each missing cell with the training mean of its hour column."""

    kind = "mean"

    def fit(self, train, seed=None):
        x = require_complete(train)
        if x.shape[0] == 0:
            raise PipelineError("insufficient-data", "mean imputer needs at least one training row")
        self.means_ = x.mean(axis=0)
        self.fitted_ = True
        return self

    def _fill(self, rows):
        return np.broadcast_to(self.means_, rows.shape)

    def get_config(self):
        return {}

    def get_arrays(self):
        return {"means": self.means_}

    @classmethod
    def from_state(cls, config, arrays, extra=None):
        model = cls()
        model.means_ = np.array(arrays["means"])
        model.fitted_ = True
        return model


class InterpImputer(MeanImputer):
    """Linear interpolation between the present neighbours inside the row.

    Leading and trailing gaps repeat the nearest present value. A row with no
    present value falls back to the training column means.
    """

    kind = "interp"

    def _fill(self, rows):
        out = np.empty_like(rows)
        cols = np.arange(rows.shape[1])
        for i, row in enumerate(rows):
            present = ~np.isnan(row)
            if not present.any():
                out[i] = self.means_
            else:
                out[i] = np.interp(cols, cols[present], row[present])
        return out
