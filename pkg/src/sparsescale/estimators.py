"""scikit-learn compatible wrappers around the analysis layer."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .analysis import ACF_THRESHOLD, assemble_timeseries, filter_cyclic, loglog_regression


def _column(X, estimator, reset):
    # a 1-D array is read as a single feature column
    if np.ndim(X) == 1:
        X = np.asarray(X).reshape(-1, 1)
    X = validate_data(estimator, X, reset=reset, dtype=np.float64)
    if X.shape[1] != 1:
        raise ValueError(f"expected a single feature column, got {X.shape[1]}")
    return X[:, 0]


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Fit ``y = exp(intercept) * X**slope`` by least squares in log-log space.

    ``X`` is the diffusion scale ``d`` (one column), ``y`` the scale of
    sparseness ``r``. ``score`` is the usual R^2 on ``y``; the log-space R^2
    of the fit is ``r_squared_``.
    """

    def fit(self, X, y):
        X = _column(X, self, reset=True)
        y = check_array(np.asarray(y), ensure_2d=False, dtype=np.float64).ravel()
        if np.any(X <= 0) or np.any(y <= 0):
            raise ValueError("PowerLawRegressor needs strictly positive X and y")
        self.result_ = loglog_regression(d=X, r=y)
        self.slope_ = self.result_.slope
        self.intercept_ = self.result_.intercept
        self.slope_stderr_ = self.result_.slope_stderr
        self.intercept_stderr_ = self.result_.intercept_stderr
        self.r_squared_ = self.result_.r_squared
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        X = _column(X, self, reset=False)
        return np.exp(self.intercept_) * X**self.slope_


class CyclicFilter(TransformerMixin, BaseEstimator):
    """Remove the dominant periodic component from a uniformly sampled series.

    ``fit`` detects the period (unless ``period`` is given) and learns the
    seasonal pattern; ``transform`` subtracts it by sample index. With
    ``log=True`` the filter acts on ``log(X)`` and returns to linear scale.
    """

    def __init__(self, period=None, threshold=ACF_THRESHOLD, log=False):
        self.period = period
        self.threshold = threshold
        self.log = log

    def _prepare(self, X, reset):
        X = _column(X, self, reset=reset)
        if self.log:
            if np.any(X <= 0):
                raise ValueError("log filtering needs positive values")
            X = np.log(X)
        return X

    def fit(self, X, y=None):
        X = self._prepare(X, reset=True)
        res = filter_cyclic(X, period=self.period, threshold=self.threshold)
        self.period_ = res.period
        self.detected_ = res.detected
        self.acf_peak_ = res.acf_peak
        self.seasonal_ = res.seasonal
        return self

    def transform(self, X):
        check_is_fitted(self, "detected_")
        X = self._prepare(X, reset=False)
        out = X.copy()
        if self.detected_:
            out -= self.seasonal_[np.arange(X.size) % self.period_]
        if self.log:
            out = np.exp(out)
        return out.reshape(-1, 1)


class SparsenessScaleTransformer(TransformerMixin, BaseEstimator):
    """Snapshots to rows ``[t, omega_max, d, r]``.

    Stateless: ``fit`` only validates the parameters. Input is a sequence of
    snapshots or snapshot header paths.
    """

    def __init__(self, lam=0.5, connectivity=26, refine_levels=3, rays=5, window=None):
        self.lam = lam
        self.connectivity = connectivity
        self.refine_levels = refine_levels
        self.rays = rays
        self.window = window

    def fit(self, X=None, y=None):
        if not 0 < self.lam < 1:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam!r}")
        if self.connectivity not in (6, 18, 26):
            raise ValueError("connectivity must be 6, 18 or 26")
        self.fitted_ = True
        return self

    def transform(self, X):
        check_is_fitted(self, "fitted_")
        self.records_ = assemble_timeseries(
            X, self.lam, self.window, self.connectivity,
            refine_levels=self.refine_levels, rays=self.rays,
        )
        return np.array([[r.t, r.omega_max, r.d, r.r] for r in self.records_]).reshape(-1, 4)
