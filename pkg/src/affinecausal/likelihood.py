"""Truncated conditional quasi-likelihood, per-observation terms and residuals.

For each family the conditional mean ``f_hat`` and conditional variance
``h_hat`` are computed from the observed past only, with unknown pre-sample
values replaced by zero; recursive variance states start at the value that
makes the recursion equal to the zero-past ARCH(inf) expansion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import _kernels
from .families import ModelSpec, ParamVector, TimeSeries, _split

__all__ = [
    "VARIANCE_FLOOR",
    "QuasiLikEval",
    "ResidualSeries",
    "conditional_moments",
    "quasi_loglik",
    "residuals",
]

#: lower bound applied to the conditional variance inside every recursion
VARIANCE_FLOOR = 1e-10


@dataclass
class QuasiLikEval:
    """Per-observation likelihood terms and their total."""

    f_hat: np.ndarray
    h_hat: np.ndarray
    q_hat: np.ndarray
    total: float


@dataclass
class ResidualSeries:
    """Standardized residuals (X_t - f_hat_t) / sqrt(h_hat_t)."""

    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size


def _as_values(x) -> np.ndarray:
    if isinstance(x, TimeSeries):
        return x.values
    return np.asarray(x, dtype=float).ravel()


def conditional_moments(spec: ModelSpec, theta: ParamVector, x) -> tuple[np.ndarray, np.ndarray]:
    """Conditional mean and variance series of the truncated recursion.

    Returns ``(f_hat, h_hat)`` with ``h_hat`` floored at VARIANCE_FLOOR.
    Safe to call at inadmissible points probed by the optimizer: denominators
    are clamped instead of raising.
    """
    fam = spec.family
    if theta.family != fam:
        raise ValueError("parameter vector family does not match the spec")
    xv = _as_values(x)
    n = xv.size
    v = theta.values
    kind = fam.kind

    if kind == "white_noise":
        f = np.zeros(n)
        h = np.full(n, v[0] * v[0])
    elif kind == "ar":
        eps = _kernels.arma_innovations(xv, v[1:], np.empty(0))
        f = xv - eps
        h = np.full(n, v[0] * v[0])
    elif kind == "arma":
        ar, ma = _split(v[1:], fam.p, fam.q)
        eps = _kernels.arma_innovations(xv, ar, ma)
        f = xv - eps
        h = np.full(n, v[0] * v[0])
    elif kind == "arch":
        f = np.zeros(n)
        h = _kernels.garch_variance(xv * xv, v[0], v[1:], np.empty(0), 0.0)
    elif kind == "garch":
        c, d = _split(v[1:], fam.p, fam.q)
        psi0 = v[0] / max(1.0 - d.sum(), 1e-8)
        f = np.zeros(n)
        h = _kernels.garch_variance(xv * xv, v[0], c, d, psi0)
    elif kind == "aparch":
        alpha, gamma, beta = _split(v[1:], fam.p, fam.p, fam.q)
        s0 = v[0] / max(1.0 - beta.sum(), 1e-8)
        s = _kernels.aparch_power_variance(xv, v[0], alpha, gamma, beta, fam.delta, s0)
        f = np.zeros(n)
        h = np.maximum(s, 0.0) ** (2.0 / fam.delta)
    elif kind == "arma_garch":
        c, d, ar, ma = _split(v[1:], fam.garch_p, fam.garch_q, fam.p, fam.q)
        eps = _kernels.arma_innovations(xv, ar, ma)
        f = xv - eps
        psi0 = v[0] / max(1.0 - d.sum(), 1e-8)
        h = _kernels.garch_variance(eps * eps, v[0], c, d, psi0)
    else:  # ar_arch_inf
        omega, alpha = v[0], v[1]
        phi = v[2:]
        xi = _kernels.arma_innovations(xv, phi, np.empty(0))
        f = xv - xi
        h = np.full(n, omega)
        if n > 1:
            lags = min(n - 1, fam.max_lag)
            w = np.arange(1, lags + 1, dtype=float) ** (-fam.decay)
            conv = fftconvolve(xi * xi, w)[: n - 1]
            h[1:] += alpha * conv

    if not np.all(np.isfinite(f)) or not np.all(np.isfinite(h)):
        raise FloatingPointError(
            f"non-finite value in the conditional recursion of {spec.label()}"
        )
    return f, np.maximum(h, VARIANCE_FLOOR)


def quasi_loglik(spec: ModelSpec, theta: ParamVector, x) -> QuasiLikEval:
    """Gaussian quasi log-likelihood (up to the constant n*log(2*pi))."""
    xv = _as_values(x)
    f, h = conditional_moments(spec, theta, xv)
    q = (xv - f) ** 2 / h + np.log(h)
    return QuasiLikEval(f_hat=f, h_hat=h, q_hat=q, total=-0.5 * float(q.sum()))


def residuals(spec: ModelSpec, theta: ParamVector, x) -> ResidualSeries:
    """Standardized residuals of the fitted recursion."""
    xv = _as_values(x)
    f, h = conditional_moments(spec, theta, xv)
    return ResidualSeries((xv - f) / np.sqrt(h))
