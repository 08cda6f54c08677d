"""Portmanteau goodness-of-fit test on squared standardized residuals.

The statistic is ``Q = n rho' V^-1 rho`` where rho is the adjusted
correlogram of squared residuals and V accounts for parameter estimation
through the finite-difference Jacobian of the log-volatility.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import special

from ._linalg import SpdSolveError, solve_spd
from .estimation import FitResult, _fd_steps, score_and_curvature
from .families import ModelSpec, ParamVector
from .likelihood import ResidualSeries, _as_values, conditional_moments, residuals

__all__ = [
    "Correlogram",
    "PortmanteauReport",
    "DiagnosticsError",
    "DegenerateResidualError",
    "squared_residual_correlogram",
    "estimate_V",
    "portmanteau",
    "portmanteau_arch",
    "chi2_sf",
    "solve_spd",
    "SpdSolveError",
]


class DiagnosticsError(RuntimeError):
    pass


class DegenerateResidualError(DiagnosticsError):
    """Squared residuals are constant; the correlogram is undefined."""


@dataclass
class Correlogram:
    """Adjusted covariances and correlations of squared residuals minus one."""

    K: int
    gamma: np.ndarray  # gamma_0 .. gamma_K
    rho: np.ndarray  # rho_1 .. rho_K


@dataclass
class PortmanteauReport:
    K: int
    correlogram: Correlogram
    Q: float
    df: int
    p_value: float
    variant: str = "general"  # general | arch_special
    mu4_hat: Optional[float] = None
    J_hat: Optional[np.ndarray] = None
    V_hat: Optional[np.ndarray] = None
    ridged: bool = False

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "K": self.K,
            "Q": self.Q,
            "df": self.df,
            "p_value": self.p_value,
            "rho": [float(r) for r in self.correlogram.rho],
            "mu4_hat": self.mu4_hat,
            "ridged": self.ridged,
        }

    def format_text(self) -> str:
        rho = ", ".join(f"{r:.4f}" for r in self.correlogram.rho)
        lines = [
            f"portmanteau ({self.variant}) K={self.K}: Q={self.Q:.4f}, "
            f"df={self.df}, p-value={self.p_value:.4f}",
            f"  rho: [{rho}]",
        ]
        if self.ridged:
            lines.append("  note: V required ridge regularization")
        return "\n".join(lines)


def squared_residual_correlogram(e: Union[ResidualSeries, np.ndarray], K: int) -> Correlogram:
    """gamma_k = (1/n) sum_{t>k} (e_t^2 - 1)(e_{t-k}^2 - 1); rho_k = gamma_k/gamma_0."""
    ev = e.values if isinstance(e, ResidualSeries) else np.asarray(e, float).ravel()
    n = ev.size
    if not (0 < K < n):
        raise ValueError(f"need 0 < K < n, got K={K}, n={n}")
    if not np.all(np.isfinite(ev)):
        raise ValueError("residuals contain non-finite values")
    z = ev * ev - 1.0
    gamma = np.empty(K + 1)
    for k in range(K + 1):
        gamma[k] = np.dot(z[k:], z[: n - k]) / n
    if gamma[0] <= 0.0:
        raise DegenerateResidualError("squared residuals are constant (gamma_0 = 0)")
    return Correlogram(K=K, gamma=gamma, rho=gamma[1:] / gamma[0])


def _log_vol_gradient(spec: ModelSpec, theta: ParamVector, x: np.ndarray) -> np.ndarray:
    """Central finite differences of log M_theta^t over the active slots."""
    idx = spec.active_index
    v0 = theta.values
    h = _fd_steps(v0[idx])
    out = np.empty((x.size, idx.size))
    for j, (i, hj) in enumerate(zip(idx, h)):
        vp = v0.copy()
        vm = v0.copy()
        vp[i] += hj
        vm[i] -= hj
        _, hp = conditional_moments(spec, ParamVector(spec.family, vp), x)
        _, hm = conditional_moments(spec, ParamVector(spec.family, vm), x)
        # log M = 0.5 * log H
        out[:, j] = 0.5 * (np.log(hp) - np.log(hm)) / (2.0 * hj)
    return out


def estimate_V(
    spec: ModelSpec,
    fit: FitResult,
    x,
    K: int,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Sample estimates of mu_4, the lag Jacobian J and the covariance V.

    ``J[k-1, j] = -(2/n) sum_{t>k} (e_{t-k}^2 - 1) d/dtheta_j log M^t`` and
    ``V = I_K + (mu4-1)^-2 J F^-1 G F^-1 J' + (mu4-1)^-1 J F^-1 J'``.
    """
    xv = _as_values(x)
    n = xv.size
    if not (0 < K < n):
        raise ValueError(f"need 0 < K < n, got K={K}, n={n}")
    e = residuals(spec, fit.params, xv).values
    mu4 = float(np.mean(e**4))
    if mu4 <= 1.0:
        raise DegenerateResidualError(f"sample fourth moment {mu4:g} <= 1")

    dlog = _log_vol_gradient(spec, fit.params, xv)
    z = e * e - 1.0
    d = spec.active_index.size
    J = np.empty((K, d))
    for k in range(1, K + 1):
        J[k - 1] = -2.0 / n * z[: n - k] @ dlog[k:]

    F, G = fit.F_hat, fit.G_hat
    if F is None or G is None:
        G, F = score_and_curvature(spec, fit.params, xv)
    Finv = solve_spd(F, np.eye(d))
    a = 1.0 / (mu4 - 1.0)
    V = np.eye(K) + a**2 * (J @ Finv @ G @ Finv @ J.T) + a * (J @ Finv @ J.T)
    V = 0.5 * (V + V.T)
    return mu4, J, V


def portmanteau(spec: ModelSpec, fit: FitResult, x, K: int = 3) -> PortmanteauReport:
    """General portmanteau test; Q is asymptotically chi^2(K) under the null."""
    xv = _as_values(x)
    n = xv.size
    e = residuals(spec, fit.params, xv)
    corr = squared_residual_correlogram(e, K)
    mu4, J, V = estimate_V(spec, fit, xv, K)
    try:
        w, ridged = solve_spd(V, corr.rho, return_flag=True)
    except SpdSolveError as exc:
        raise DiagnosticsError(f"V matrix not invertible: {exc}") from exc
    Q = float(n * corr.rho @ w)
    Q = max(Q, 0.0)
    return PortmanteauReport(
        K=K,
        correlogram=corr,
        Q=Q,
        df=K,
        p_value=chi2_sf(Q, K),
        variant="general",
        mu4_hat=mu4,
        J_hat=J,
        V_hat=V,
        ridged=ridged,
    )


def portmanteau_arch(fit: FitResult, x, p: int, K: int = 6) -> PortmanteauReport:
    """Simplified statistic for a pure ARCH(p) fit.

    Beyond lag p the correlogram entries have unit asymptotic variance, so
    ``Q = n * sum_{i>p} rho_i^2`` is chi^2 with K - p degrees of freedom.
    """
    kind = fit.spec.family.kind
    if not (kind == "arch" or (kind == "garch" and fit.spec.family.q == 0)):
        raise ValueError("the ARCH special case needs a pure ARCH(p) fit")
    if K <= p:
        raise ValueError(f"need K > p, got K={K}, p={p}")
    xv = _as_values(x)
    e = residuals(fit.spec, fit.params, xv)
    corr = squared_residual_correlogram(e, K)
    Q = float(xv.size * np.sum(corr.rho[p:] ** 2))
    df = K - p
    return PortmanteauReport(
        K=K, correlogram=corr, Q=Q, df=df, p_value=chi2_sf(Q, df), variant="arch_special"
    )


def chi2_sf(x: float, df: int) -> float:
    """Upper tail P(chi^2_df > x) via the regularized incomplete gamma."""
    if x < 0:
        raise ValueError("statistic must be >= 0")
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    return float(special.gammaincc(df / 2.0, x / 2.0))
