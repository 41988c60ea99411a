"""Scikit-learn style estimators wrapping the calibration core.

``MinimalPenaltySelector`` fits one observation vector: it computes the
empirical risks over a model collection, the exact selection path, the
requested minimal-penalty calibrator, and the final model under the doubled
penalty; ``transform`` then applies the selected projection.
``SingularValueThresholder`` is a matrix denoiser at the minimal or optimal
singular-value threshold.  Both follow the BaseEstimator parameter
conventions so they compose with pipelines and ``get_params``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validate import as_float_vector, as_square_matrix
from .calibrate import c_hat_jump, c_hat_jump_merged, c_hat_slope, c_hat_window, select_final
from .models import ModelCollection, emp_risks
from .path import PenaltyShape, compute_path
from .svt import hard_threshold_denoise, minimal_threshold, optimal_threshold


class MinimalPenaltySelector(BaseEstimator, TransformerMixin):
    """Model selection by minimal-penalty calibration over a fixed collection.

    Parameters
    ----------
    collection : ModelCollection
        Candidate projection models (all sharing the sample size n).
    method : {"jump", "jump_merged", "window", "slope"}
        Calibrator used to estimate the minimal-penalty constant.
    factor : float
        Multiplier applied to C_hat for the final selection (2.0 recovers
        the optimal penalty from the minimal one).
    shape : PenaltyShape or None
        Penalty shape; None means the dimension shape D/n.
    delta_rel, frac_high, frac_low, region_frac, robust
        Method-specific settings, forwarded to the matching calibrator.

    Attributes
    ----------
    emp_risks_ : dict
        Per-model empirical risks of the fitted data.
    path_ : SelectionPath
        Exact selection path.
    calibration_ : CalibrationResult
        Calibrator output with diagnostics.
    C_hat_ : float
        Estimated minimal-penalty constant.
    selected_id_ : str
        Identifier of the finally selected model.
    fitted_signal_ : np.ndarray
        Projection of the training data onto the selected model.
    """

    def __init__(
        self,
        collection: ModelCollection,
        method: str = "jump",
        factor: float = 2.0,
        shape: PenaltyShape | None = None,
        delta_rel: float = 0.05,
        frac_high: float = 0.9,
        frac_low: float = 0.1,
        region_frac: float = 0.4,
        robust: bool = False,
    ):
        self.collection = collection
        self.method = method
        self.factor = factor
        self.shape = shape
        self.delta_rel = delta_rel
        self.frac_high = frac_high
        self.frac_low = frac_low
        self.region_frac = region_frac
        self.robust = robust

    def _shape(self) -> PenaltyShape:
        return self.shape if self.shape is not None else PenaltyShape.dimension(self.collection)

    def fit(self, y, _ignored=None):
        y = as_float_vector(y, self.collection.n, "y")
        shape = self._shape()
        self.emp_risks_ = emp_risks(self.collection, y)
        self.path_ = compute_path(self.emp_risks_, shape)
        dims = self.collection.dims()
        if self.method == "jump":
            result = c_hat_jump(self.path_, dims)
        elif self.method == "jump_merged":
            result = c_hat_jump_merged(self.path_, dims, self.delta_rel)
        elif self.method == "window":
            result = c_hat_window(self.path_, dims, self.frac_high, self.frac_low)
        elif self.method == "slope":
            result = c_hat_slope(self.emp_risks_, shape, self.region_frac, self.robust)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.calibration_ = result
        self.selected_id_ = select_final(self.emp_risks_, shape, result, self.factor)
        self.C_hat_ = result.c_hat
        self.fitted_signal_ = self.collection[self.selected_id_].project(y)
        return self

    def transform(self, y):
        """Project new data of the same length onto the selected model."""
        if not hasattr(self, "selected_id_"):
            raise RuntimeError("fit must be called before transform")
        y = as_float_vector(y, self.collection.n, "y")
        return self.collection[self.selected_id_].project(y)


class SingularValueThresholder(BaseEstimator, TransformerMixin):
    """Hard singular-value thresholding of square matrices.

    Parameters
    ----------
    sigma : float
        Known entrywise noise level.
    threshold : {"optimal", "minimal"} or float
        Named threshold (scaled by sqrt(n) * sigma at fit time) or an
        explicit non-negative value.

    Attributes
    ----------
    lambda_ : float
        Threshold used by ``transform``.
    n_ : int
        Matrix side seen at fit time.
    """

    def __init__(self, sigma: float = 1.0, threshold: str | float = "optimal"):
        self.sigma = sigma
        self.threshold = threshold

    def fit(self, x, _ignored=None):
        x = as_square_matrix(x, name="x")
        self.n_ = x.shape[0]
        if self.threshold == "minimal":
            self.lambda_ = minimal_threshold(self.n_, self.sigma)
        elif self.threshold == "optimal":
            self.lambda_ = optimal_threshold(self.n_, self.sigma)
        else:
            lam = float(self.threshold)
            if lam < 0:
                raise ValueError("threshold must be >= 0")
            self.lambda_ = lam
        return self

    def transform(self, x):
        if not hasattr(self, "lambda_"):
            raise RuntimeError("fit must be called before transform")
        x = as_square_matrix(x, self.n_, "x")
        return hard_threshold_denoise(x, self.lambda_)
