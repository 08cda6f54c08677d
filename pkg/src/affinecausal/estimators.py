"""Thin scikit-learn style wrappers over the functional core.

These make the estimator and selector composable with sklearn tooling
(``get_params``/``set_params``/``clone``); heavy lifting stays in
:mod:`affinecausal.estimation` and :mod:`affinecausal.selection`.
"""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .estimation import OptimizerOptions, attach_covariance, fit_qmle
from .families import ModelSpec, TimeSeries
from .likelihood import quasi_loglik, residuals
from .selection import Penalty, enumerate_candidates, fit_candidates, rank_candidates

__all__ = ["QmleEstimator", "PenalizedSelector"]


def _check_series(y) -> np.ndarray:
    """Validate a 1-d finite float series (sklearn's check_array is 2-d-centric)."""
    if isinstance(y, TimeSeries):
        return y.values
    y = np.asarray(y, dtype=float)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1:
        raise ValueError(f"expected a 1-d series, got shape {y.shape}")
    if y.size < 2:
        raise ValueError("need at least two observations")
    if not np.all(np.isfinite(y)):
        raise ValueError("series contains NaN or infinite values")
    return y


class QmleEstimator(BaseEstimator):
    """Gaussian quasi-maximum-likelihood fit of one fixed model.

    Parameters
    ----------
    spec : ModelSpec
        The model (family plus active-parameter mask) to fit.
    restarts : int
        Simplex restarts; the first uses a method-of-moments start.
    compute_covariance : bool
        Whether to attach sandwich standard errors after the fit.
    seed : int
        Seed of the random restart generator.
    """

    def __init__(self, spec: Optional[ModelSpec] = None, restarts: int = 2,
                 compute_covariance: bool = True, seed: int = 0):
        self.spec = spec
        self.restarts = restarts
        self.compute_covariance = compute_covariance
        self.seed = seed

    def _options(self) -> OptimizerOptions:
        return OptimizerOptions(
            restarts=self.restarts,
            seed=self.seed,
            compute_covariance=self.compute_covariance,
        )

    def fit(self, y, X=None):
        """Fit the model to the series ``y`` (``X`` is ignored)."""
        if self.spec is None:
            raise ValueError("spec must be set before fitting")
        yv = _check_series(y)
        self.result_ = fit_qmle(self.spec, yv, self._options())
        self.params_ = self.result_.params
        self.loglik_ = self.result_.loglik
        self.std_errors_ = self.result_.std_errors
        self.n_obs_ = yv.size
        return self

    def _require_fit(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit before using this estimator")

    def transform(self, y):
        """Standardized residuals ``(y_t - f_t) / sqrt(H_t)`` under the fit."""
        self._require_fit()
        return residuals(self.spec, self.params_, _check_series(y)).values

    def score(self, y, X=None) -> float:
        """Average quasi log-likelihood of ``y`` under the fitted parameters."""
        self._require_fit()
        yv = _check_series(y)
        return quasi_loglik(self.spec, self.params_, yv).total / yv.size


class PenalizedSelector(BaseEstimator):
    """Model selection by the penalized likelihood criterion.

    ``candidates`` is either a grid description dict (see
    :func:`affinecausal.selection.enumerate_candidates`) or an explicit
    sequence of models; ``penalty`` is a :class:`Penalty` or a string such as
    ``"sqrt_n"`` or ``"power:0.6667"``.
    """

    def __init__(self, candidates=None, penalty: Union[str, Penalty] = "sqrt_n",
                 restarts: int = 2, seed: int = 0):
        self.candidates = candidates
        self.penalty = penalty
        self.restarts = restarts
        self.seed = seed

    def _candidate_list(self) -> list[ModelSpec]:
        if self.candidates is None:
            raise ValueError("candidates must be set before fitting")
        if isinstance(self.candidates, dict):
            return enumerate_candidates(self.candidates)
        return list(self.candidates)

    def fit(self, y, X=None):
        """Fit all candidates to ``y`` and select the criterion argmin."""
        yv = _check_series(y)
        specs = self._candidate_list()
        penalty = self.penalty if isinstance(self.penalty, Penalty) \
            else Penalty.parse(self.penalty)
        opts = OptimizerOptions(restarts=self.restarts, seed=self.seed,
                                compute_covariance=False)
        fits = fit_candidates(yv, specs, opts)
        self.report_ = rank_candidates(specs, fits, penalty, yv.size)
        chosen = self.report_.chosen_record
        self.best_spec_ = chosen.spec
        self.best_result_ = attach_covariance(chosen.fit, yv)
        return self

    def transform(self, y):
        """Standardized residuals of ``y`` under the selected model."""
        if not hasattr(self, "best_result_"):
            raise NotFittedError("call fit before using this selector")
        return residuals(self.best_spec_, self.best_result_.params,
                         _check_series(y)).values
