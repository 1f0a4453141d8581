from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import ReconstructionError, ShapeMismatchError
from .temporal import SignalLike, as_matrix
from .timegnn import IndexSet, index_mask

MAPE_GUARD = 1e-8


@dataclass(frozen=True)
class Metrics:
    rmse: float
    mae: float
    mape: Optional[float]
    mape_skipped: int
    count: int

    def __iter__(self):
        return iter((self.rmse, self.mae, self.mape))

    def to_dict(self):
        return {
            "rmse": self.rmse,
            "mae": self.mae,
            "mape": self.mape,
            "mape_skipped": self.mape_skipped,
            "count": self.count,
        }


def compute_metrics(x_hat: SignalLike, x_true: SignalLike, eval_indices: IndexSet) -> Metrics:
    """RMSE, MAE and MAPE over eval_indices

    MAPE skips entries with |truth| < 1e-8 and is None when every entry is skipped.
    """
    estimate = as_matrix(x_hat)
    truth = as_matrix(x_true)
    if estimate.shape != truth.shape:
        raise ShapeMismatchError(f"Estimate {estimate.shape} and truth {truth.shape} differ in shape")
    selected = index_mask(eval_indices, truth.shape)
    count = int(selected.sum())
    if count == 0:
        raise ReconstructionError("Evaluation set is empty")

    error = (estimate - truth)[selected]
    reference = np.abs(truth[selected])
    usable = reference >= MAPE_GUARD
    skipped = int(count - usable.sum())
    mape = float(np.mean(np.abs(error[usable]) / reference[usable])) if usable.any() else None

    return Metrics(
        rmse=float(np.sqrt(np.mean(error * error))),
        mae=float(np.mean(np.abs(error))),
        mape=mape,
        mape_skipped=skipped,
        count=count,
    )
