"""Gaussian QMLE over a model's active parameters and sandwich covariance.

The optimizer is a derivative-free Nelder-Mead simplex on the active
subvector, with an additive infeasibility penalty keeping the search inside
the admissible region.  Standard errors come from the sandwich
``F^-1 G F^-1`` estimated by finite differences of the per-observation
objective terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special
from scipy.optimize import minimize

from ._linalg import solve_spd
from .families import (
    ModelSpec,
    ParamVector,
    TimeSeries,
    constraint_violation,
    param_layout,
    _split,
)
from .likelihood import _as_values, quasi_loglik

__all__ = [
    "OptimizerOptions",
    "FitResult",
    "FitError",
    "DegenerateSeriesError",
    "fit_qmle",
    "score_and_curvature",
    "moment_start",
]

#: weight of the admissibility penalty added to -2 * loglik
PENALTY_WEIGHT = 1e8

_FD_BASE = float(np.finfo(float).eps) ** (1.0 / 3.0)


class FitError(RuntimeError):
    pass


class DegenerateSeriesError(FitError):
    """The observed series is constant; no parameter is identifiable."""


@dataclass
class OptimizerOptions:
    """Knobs of the simplex search and its restarts."""

    restarts: int = 2
    max_iter: Optional[int] = None
    xtol: float = 1e-6
    ftol: float = 1e-8
    seed: int = 0
    #: moment order of the admissible region the fit is constrained to;
    #: 2 is the second-order stationarity region (e.g. sum(a) < 1 for ARCH)
    moment_order: float = 2.0
    compute_covariance: bool = True

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.xtol <= 0 or self.ftol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class FitResult:
    """QMLE point, likelihood value and covariance diagnostics."""

    spec: ModelSpec
    params: ParamVector
    loglik: float
    converged: bool
    n_iter: int
    n_eval: int
    best_restart: int
    boundary: bool = False
    message: str = ""
    F_hat: Optional[np.ndarray] = None
    G_hat: Optional[np.ndarray] = None
    sandwich: Optional[np.ndarray] = None
    std_errors: Optional[np.ndarray] = None
    cond_F: Optional[float] = None

    def summary(self) -> str:
        lines = [f"model: {self.spec.label()}  |m|={self.spec.dim}"]
        lines.append(f"loglik: {self.loglik:.6f}  converged: {self.converged}"
                     + ("  (boundary)" if self.boundary else ""))
        names = [s.name for s in param_layout(self.spec.family)]
        se = {}
        if self.std_errors is not None:
            for j, i in enumerate(self.spec.active_index):
                se[i] = self.std_errors[j]
        for i, (name, val) in enumerate(zip(names, self.params.values)):
            if not self.spec.active[i]:
                continue
            tail = f"  (se {se[i]:.4g})" if i in se else ""
            lines.append(f"  {name:>8s} = {val: .6f}{tail}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# starting points

def _ols_ar(x: np.ndarray, lags: np.ndarray) -> np.ndarray:
    """Least-squares AR coefficients on the given lags with zero pre-samples."""
    n = x.size
    if lags.size == 0:
        return np.empty(0)
    X = np.zeros((n, lags.size))
    for j, lag in enumerate(lags):
        X[lag:, j] = x[: n - lag]
    coef, *_ = np.linalg.lstsq(X, x, rcond=None)
    return coef


def _shrink_until_valid(spec: ModelSpec, values: np.ndarray, r: float) -> np.ndarray:
    v = values.copy()
    for _ in range(60):
        if constraint_violation(spec, v, r) == 0.0:
            return v
        v[1:] *= 0.9
    return v


def moment_start(spec: ModelSpec, x, r: float = 4.0) -> np.ndarray:
    """Method-of-moments starting point respecting the active mask."""
    xv = _as_values(x)
    fam = spec.family
    d = fam.dim
    v = np.zeros(d)
    active = np.asarray(spec.active)
    m2 = float(np.mean(xv * xv))
    kind = fam.kind

    if kind == "white_noise":
        v[0] = math.sqrt(max(m2, 1e-12))
    elif kind in ("ar", "arma"):
        p = fam.p
        ar_slots = np.arange(1, p + 1)
        lags = ar_slots[active[ar_slots]]
        coef = _ols_ar(xv, lags)
        v[lags] = coef
        resid = xv.copy()
        for lag, c in zip(lags, coef):
            resid[lag:] -= c * xv[: xv.size - lag]
        v[0] = math.sqrt(max(float(np.mean(resid * resid)), 1e-12))
    elif kind == "arch":
        v[0] = 0.5 * m2
        slots = np.arange(1, fam.p + 1)
        slots = slots[active[slots]]
        if slots.size:
            v[slots] = 0.2 / slots.size
    elif kind == "garch":
        v[0] = 0.5 * m2
        c_slots = np.arange(1, fam.p + 1)
        d_slots = np.arange(fam.p + 1, fam.p + fam.q + 1)
        c_slots = c_slots[active[c_slots]]
        d_slots = d_slots[active[d_slots]]
        if c_slots.size:
            v[c_slots] = 0.2 / c_slots.size
        if d_slots.size:
            v[d_slots] = 0.5 / d_slots.size
    elif kind == "aparch":
        v[0] = 0.5 * float(np.mean(np.abs(xv) ** fam.delta))
        a_slots = np.arange(1, fam.p + 1)
        b_slots = np.arange(2 * fam.p + 1, 2 * fam.p + fam.q + 1)
        a_slots = a_slots[active[a_slots]]
        b_slots = b_slots[active[b_slots]]
        if a_slots.size:
            v[a_slots] = 0.1 / a_slots.size
        if b_slots.size:
            v[b_slots] = 0.3 / b_slots.size
    elif kind == "arma_garch":
        gp, gq, p, q = fam.garch_p, fam.garch_q, fam.p, fam.q
        ar_slots = np.arange(1 + gp + gq, 1 + gp + gq + p)
        lags_all = np.arange(1, p + 1)
        lags = lags_all[active[ar_slots]]
        coef = _ols_ar(xv, lags)
        v[ar_slots[active[ar_slots]]] = coef
        resid = xv.copy()
        for lag, c in zip(lags, coef):
            resid[lag:] -= c * xv[: xv.size - lag]
        v[0] = 0.5 * float(np.mean(resid * resid))
        c_slots = np.arange(1, gp + 1)
        d_slots = np.arange(gp + 1, gp + gq + 1)
        c_slots = c_slots[active[c_slots]]
        d_slots = d_slots[active[d_slots]]
        if c_slots.size:
            v[c_slots] = 0.15 / c_slots.size
        if d_slots.size:
            v[d_slots] = 0.4 / d_slots.size
    else:  # ar_arch_inf
        p = fam.p
        phi_slots = np.arange(2, p + 2)
        lags_all = np.arange(1, p + 1)
        lags = lags_all[active[phi_slots]]
        coef = _ols_ar(xv, lags)
        v[phi_slots[active[phi_slots]]] = coef
        resid = xv.copy()
        for lag, c in zip(lags, coef):
            resid[lag:] -= c * xv[: xv.size - lag]
        v[0] = 0.5 * float(np.mean(resid * resid))
        if active[1]:
            tail = float(special.zeta(fam.decay, 1.0))
            v[1] = 0.25 / (math.sqrt(3.0) * tail)
    v[~active] = 0.0
    return _shrink_until_valid(spec, v, r)


def _random_start(spec: ModelSpec, base: np.ndarray, rng: np.random.Generator, r: float) -> np.ndarray:
    layout = param_layout(spec.family)
    active = np.asarray(spec.active)
    for scale in (1.0, 0.5, 0.25, 0.1, 0.0):
        v = base.copy()
        for i, slot in enumerate(layout):
            if not active[i]:
                continue
            if slot.strict_lower and slot.lower == 0.0:
                v[i] = base[i] * math.exp(scale * rng.normal(0.0, 0.5))
            elif slot.lower == 0.0:
                v[i] = abs(base[i] + scale * rng.normal(0.0, 0.1))
            else:
                v[i] = base[i] + scale * rng.normal(0.0, 0.2)
        v = _shrink_until_valid(spec, v, r)
        if constraint_violation(spec, v, r) == 0.0:
            return v
    return base.copy()


# ---------------------------------------------------------------------------
# fitting

def _objective(spec: ModelSpec, x: np.ndarray, r: float):
    fam = spec.family
    idx = spec.active_index
    d = fam.dim

    def fn(sub: np.ndarray) -> float:
        v = np.zeros(d)
        v[idx] = sub
        pen = constraint_violation(spec, v, r)
        try:
            ev = quasi_loglik(spec, ParamVector(fam, v), x)
        except FloatingPointError:
            return 1e12 + PENALTY_WEIGHT * pen
        obj = -2.0 * ev.total + PENALTY_WEIGHT * pen
        if not math.isfinite(obj):
            return 1e12
        return obj

    return fn


def _boundary_flag(spec: ModelSpec, values: np.ndarray, r: float, tol: float = 1e-6) -> bool:
    layout = param_layout(spec.family)
    for i in spec.active_index:
        slot = layout[i]
        if math.isfinite(slot.lower) and abs(values[i] - slot.lower) <= tol:
            return True
        if math.isfinite(slot.upper) and abs(values[i] - slot.upper) <= tol:
            return True
    # contraction boundary: a small multiplicative inflation of the
    # non-scale slots should stay admissible in the interior
    probe = values.copy()
    probe[1:] *= 1.0 + 10.0 * tol
    return constraint_violation(spec, probe, r) > 0.0


def fit_qmle(spec: ModelSpec, x, opts: Optional[OptimizerOptions] = None) -> FitResult:
    """Maximize the quasi log-likelihood over the model's active slots.

    Runs a method-of-moments start plus ``opts.restarts - 1`` random
    admissible restarts; the best objective wins, earlier restarts winning
    ties within the objective tolerance.
    """
    opts = opts or OptimizerOptions()
    xv = _as_values(x)
    n = xv.size
    if np.ptp(xv) == 0.0:
        raise DegenerateSeriesError("constant series: no parameter is identifiable")
    if n <= 10 * spec.dim:
        raise FitError(f"need n > 10*|m| = {10 * spec.dim} observations, got {n}")

    r = opts.moment_order
    fn = _objective(spec, xv, r)
    rng = np.random.default_rng(opts.seed)
    base = moment_start(spec, xv, r)
    idx = spec.active_index
    maxiter = opts.max_iter or 200 * max(idx.size, 1)

    best = None
    best_obj = math.inf
    any_converged = False
    total_iter = 0
    total_eval = 0
    for k in range(opts.restarts):
        start = base if k == 0 else _random_start(spec, base, rng, r)
        res = minimize(
            fn,
            start[idx],
            method="Nelder-Mead",
            options={
                "xatol": opts.xtol,
                "fatol": opts.ftol,
                "maxiter": maxiter,
                "maxfev": 2 * maxiter,
            },
        )
        total_iter += int(res.nit)
        total_eval += int(res.nfev)
        any_converged = any_converged or bool(res.success)
        if res.fun < best_obj - opts.ftol:
            best_obj = float(res.fun)
            best = (k, np.asarray(res.x, float))

    assert best is not None
    k_best, sub = best
    values = np.zeros(spec.family.dim)
    values[idx] = sub
    theta = ParamVector(spec.family, values)
    ev = quasi_loglik(spec, theta, xv)
    result = FitResult(
        spec=spec,
        params=theta,
        loglik=ev.total,
        converged=any_converged,
        n_iter=total_iter,
        n_eval=total_eval,
        best_restart=k_best,
        boundary=_boundary_flag(spec, values, r),
        message="" if any_converged else "no restart reported convergence",
    )
    if opts.compute_covariance:
        attach_covariance(result, xv)
    return result


def attach_covariance(result: FitResult, x) -> FitResult:
    """Compute F/G/sandwich at the fitted point and store them on the result."""
    xv = _as_values(x)
    G, F = score_and_curvature(result.spec, result.params, xv)
    result.F_hat, result.G_hat = F, G
    result.cond_F = float(np.linalg.cond(F))
    try:
        Finv = solve_spd(F, np.eye(F.shape[0]))
        sandwich = Finv @ G @ Finv
        sandwich = 0.5 * (sandwich + sandwich.T)
        result.sandwich = sandwich
        result.std_errors = np.sqrt(np.maximum(np.diag(sandwich), 0.0) / xv.size)
    except np.linalg.LinAlgError:
        result.message = (result.message + "; " if result.message else "") + (
            f"curvature matrix numerically singular (cond={result.cond_F:.3g})"
        )
    return result


def _fd_steps(values: np.ndarray) -> np.ndarray:
    return _FD_BASE * np.maximum(np.abs(values), 1e-2)


def score_and_curvature(spec: ModelSpec, theta: ParamVector, x) -> tuple[np.ndarray, np.ndarray]:
    """Score outer product G and curvature F of the per-observation terms.

    Central finite differences of ``q_t`` over the active slots; both
    matrices are averaged over observations and symmetrized.
    """
    xv = _as_values(x)
    n = xv.size
    idx = spec.active_index
    d = idx.size
    v0 = theta.values
    h = _fd_steps(v0[idx])

    def q_at(delta: np.ndarray) -> np.ndarray:
        v = v0.copy()
        v[idx] = v[idx] + delta
        return quasi_loglik(spec, ParamVector(spec.family, v), xv).q_hat

    q0 = q_at(np.zeros(d))
    q_plus = []
    q_minus = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = h[i]
        q_plus.append(q_at(e))
        q_minus.append(q_at(-e))

    D = np.empty((n, d))
    for i in range(d):
        D[:, i] = (q_plus[i] - q_minus[i]) / (2.0 * h[i])
    G = D.T @ D / n

    F = np.empty((d, d))
    for i in range(d):
        F[i, i] = float(np.mean(q_plus[i] - 2.0 * q0 + q_minus[i])) / h[i] ** 2
        for j in range(i + 1, d):
            ei = np.zeros(d)
            ej = np.zeros(d)
            ei[i] = h[i]
            ej[j] = h[j]
            qpp = q_at(ei + ej)
            qpm = q_at(ei - ej)
            qmp = q_at(-ei + ej)
            qmm = q_at(-ei - ej)
            F[i, j] = F[j, i] = float(np.mean(qpp - qpm - qmp + qmm)) / (4.0 * h[i] * h[j])
    G = 0.5 * (G + G.T)
    F = 0.5 * (F + F.T)
    return G, F
