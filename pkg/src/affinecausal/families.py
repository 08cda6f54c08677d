"""Process families, parameter layouts, admissibility checks and simulation.

Every family is an affine causal process ``X_t = M(past) * xi_t + f(past)``
driven by i.i.d. standard Gaussian noise.  A model is a family together with
a boolean mask over the family's parameter slots; masked-out slots are pinned
to zero exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import special

from . import _kernels

__all__ = [
    "ModelFamily",
    "ModelSpec",
    "ParamVector",
    "TimeSeries",
    "Slot",
    "ParamCheck",
    "SimulationError",
    "param_layout",
    "validate_params",
    "constraint_violation",
    "simulate",
    "simulate_from_noise",
    "garch_archinf_weights",
    "gaussian_noise_norm",
]

FAMILY_KINDS = (
    "white_noise",
    "ar",
    "arma",
    "arch",
    "garch",
    "aparch",
    "arma_garch",
    "ar_arch_inf",
)

#: default truncation of the infinite ARCH sum in AR-ARCH(inf) simulation
DEFAULT_MAX_LAG = 10_000


class SimulationError(RuntimeError):
    """Raised when a simulated recursion produces a non-finite value."""

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class ModelFamily:
    """A process family with fixed orders.

    ``p``/``q`` are the mean-part orders for ARMA-type families and the
    ARCH/GARCH orders for volatility families.  ``garch_p``/``garch_q`` hold
    the GARCH orders of the ARMA-GARCH family.  ``delta`` is the APARCH power,
    ``decay``/``max_lag`` parameterize the AR-ARCH(inf) weight sequence
    ``alpha * i**-decay``.
    """

    kind: str
    p: int = 0
    q: int = 0
    garch_p: int = 0
    garch_q: int = 0
    delta: float = 2.0
    decay: float = 3.0
    max_lag: int = DEFAULT_MAX_LAG

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"unknown family kind {self.kind!r}")
        for name in ("p", "q", "garch_p", "garch_q"):
            if getattr(self, name) < 0:
                raise ValueError(f"order {name} must be >= 0")
        if self.kind == "aparch" and self.delta < 1.0:
            raise ValueError("APARCH power delta must be >= 1")
        if self.kind == "ar_arch_inf":
            if self.decay <= 1.0:
                raise ValueError("AR-ARCH(inf) decay exponent must be > 1")
            if self.max_lag < 1:
                raise ValueError("max_lag must be >= 1")

    # -- constructors ------------------------------------------------------
    @staticmethod
    def white_noise() -> "ModelFamily":
        return ModelFamily("white_noise")

    @staticmethod
    def ar(p: int) -> "ModelFamily":
        return ModelFamily("ar", p=p)

    @staticmethod
    def arma(p: int, q: int) -> "ModelFamily":
        return ModelFamily("arma", p=p, q=q)

    @staticmethod
    def arch(p: int) -> "ModelFamily":
        return ModelFamily("arch", p=p)

    @staticmethod
    def garch(p: int, q: int) -> "ModelFamily":
        return ModelFamily("garch", p=p, q=q)

    @staticmethod
    def aparch(delta: float, p: int, q: int) -> "ModelFamily":
        return ModelFamily("aparch", p=p, q=q, delta=delta)

    @staticmethod
    def arma_garch(p: int, q: int, garch_p: int, garch_q: int) -> "ModelFamily":
        return ModelFamily("arma_garch", p=p, q=q, garch_p=garch_p, garch_q=garch_q)

    @staticmethod
    def ar_arch_inf(p: int, decay: float = 3.0, max_lag: int = DEFAULT_MAX_LAG) -> "ModelFamily":
        return ModelFamily("ar_arch_inf", p=p, decay=decay, max_lag=max_lag)

    @property
    def dim(self) -> int:
        """Full parameter dimension of the family layout."""
        return len(param_layout(self))

    def label(self) -> str:
        if self.kind == "white_noise":
            return "WhiteNoise"
        if self.kind == "ar":
            return f"AR({self.p})"
        if self.kind == "arma":
            return f"ARMA({self.p},{self.q})"
        if self.kind == "arch":
            return f"ARCH({self.p})"
        if self.kind == "garch":
            return f"GARCH({self.p},{self.q})"
        if self.kind == "aparch":
            return f"APARCH({self.delta:g},{self.p},{self.q})"
        if self.kind == "arma_garch":
            return f"ARMA({self.p},{self.q})-GARCH({self.garch_p},{self.garch_q})"
        return f"AR({self.p})-ARCHinf(decay={self.decay:g})"

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind in ("ar", "arch", "ar_arch_inf"):
            d["p"] = self.p
        if self.kind in ("arma", "garch", "aparch", "arma_garch"):
            d["p"] = self.p
            d["q"] = self.q
        if self.kind == "arma_garch":
            d["garch_p"] = self.garch_p
            d["garch_q"] = self.garch_q
        if self.kind == "aparch":
            d["delta"] = self.delta
        if self.kind == "ar_arch_inf":
            d["decay"] = self.decay
            d["max_lag"] = self.max_lag
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelFamily":
        d = dict(d)
        kind = d.pop("kind")
        return ModelFamily(kind, **d)


@dataclass(frozen=True)
class Slot:
    """One parameter slot of a family layout."""

    name: str
    lower: float = -math.inf
    upper: float = math.inf
    strict_lower: bool = False

    def bound_violation(self, value: float) -> float:
        v = 0.0
        if value < self.lower:
            v += self.lower - value
        elif self.strict_lower and value <= self.lower:
            v += 1e-12
        if value > self.upper:
            v += value - self.upper
        return v


def _positive(name: str) -> Slot:
    return Slot(name, lower=0.0, strict_lower=True)


def _nonneg(name: str) -> Slot:
    return Slot(name, lower=0.0)


def _free(name: str) -> Slot:
    return Slot(name)


def param_layout(family: ModelFamily) -> list[Slot]:
    """Deterministic ordered slot layout of a family.

    The scale slot (sigma, a0, c0 or omega) always comes first.
    """
    k = family.kind
    if k == "white_noise":
        return [_positive("sigma")]
    if k == "ar":
        return [_positive("sigma")] + [_free(f"phi{i}") for i in range(1, family.p + 1)]
    if k == "arma":
        return (
            [_positive("sigma")]
            + [_free(f"ar{i}") for i in range(1, family.p + 1)]
            + [_free(f"ma{j}") for j in range(1, family.q + 1)]
        )
    if k == "arch":
        return [_positive("a0")] + [_nonneg(f"a{i}") for i in range(1, family.p + 1)]
    if k == "garch":
        return (
            [_positive("c0")]
            + [_nonneg(f"c{i}") for i in range(1, family.p + 1)]
            + [_nonneg(f"d{j}") for j in range(1, family.q + 1)]
        )
    if k == "aparch":
        return (
            [_positive("omega")]
            + [_nonneg(f"alpha{i}") for i in range(1, family.p + 1)]
            + [Slot(f"gamma{i}", lower=-1.0, upper=1.0) for i in range(1, family.p + 1)]
            + [_nonneg(f"beta{j}") for j in range(1, family.q + 1)]
        )
    if k == "arma_garch":
        return (
            [_positive("c0")]
            + [_nonneg(f"c{i}") for i in range(1, family.garch_p + 1)]
            + [_nonneg(f"d{j}") for j in range(1, family.garch_q + 1)]
            + [_free(f"ar{i}") for i in range(1, family.p + 1)]
            + [_free(f"ma{j}") for j in range(1, family.q + 1)]
        )
    # ar_arch_inf
    return (
        [_positive("omega"), _nonneg("alpha")]
        + [_free(f"phi{i}") for i in range(1, family.p + 1)]
    )


@dataclass(frozen=True)
class ModelSpec:
    """A family plus an active-parameter mask (the model ``m``)."""

    family: ModelFamily
    active: tuple[bool, ...] = ()

    def __post_init__(self):
        d = self.family.dim
        if not self.active:
            object.__setattr__(self, "active", tuple([True] * d))
        if len(self.active) != d:
            raise ValueError(f"active mask length {len(self.active)} != layout dim {d}")
        if not self.active[0]:
            raise ValueError("the scale slot must always be active")
        if self.dim < 1:
            raise ValueError("a model needs at least one active slot")

    @property
    def dim(self) -> int:
        """Number of estimated parameters |m|."""
        return int(sum(self.active))

    @property
    def active_index(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.active))

    def label(self) -> str:
        base = self.family.label()
        if all(self.active):
            return base
        lags = ",".join(str(i) for i in self.active_index)
        return f"{base}[{lags}]"

    def to_dict(self) -> dict:
        d = {"family": self.family.to_dict()}
        if not all(self.active):
            d["active"] = [bool(a) for a in self.active]
        return d

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        family = ModelFamily.from_dict(d["family"])
        active = tuple(bool(a) for a in d.get("active", ())) or ()
        return ModelSpec(family, active)


@dataclass
class ParamVector:
    """A full parameter point matching a family layout."""

    family: ModelFamily
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.family.dim,):
            raise ValueError(
                f"parameter vector of length {self.values.size} does not match "
                f"layout dim {self.family.dim} of {self.family.label()}"
            )

    @property
    def names(self) -> list[str]:
        return [s.name for s in param_layout(self.family)]

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_dict(self) -> dict:
        return {"family": self.family.to_dict(), "values": [float(v) for v in self.values]}

    @staticmethod
    def from_dict(d: dict) -> "ParamVector":
        return ParamVector(ModelFamily.from_dict(d["family"]), np.asarray(d["values"], float))


@dataclass
class TimeSeries:
    """An observed trajectory."""

    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size < 1:
            raise ValueError("a time series needs at least one observation")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series contains non-finite values")

    def __len__(self) -> int:
        return self.values.size


@dataclass
class ParamCheck:
    valid: bool
    violations: list[str] = field(default_factory=list)
    #: total constraint excess, 0 when valid; used as an optimizer penalty
    excess: float = 0.0

    def __bool__(self) -> bool:
        return self.valid


def gaussian_noise_norm(r: float) -> float:
    """L^r norm of a standard Gaussian, ``(E|xi|^r)^(1/r)``.

    For r=4 this is 3**0.25.
    """
    if r <= 0:
        raise ValueError("moment order must be positive")
    abs_moment = 2.0 ** (r / 2.0) * special.gamma((r + 1.0) / 2.0) / math.sqrt(math.pi)
    return abs_moment ** (1.0 / r)


def _poly_min_root_modulus(coeffs: np.ndarray) -> float:
    """Smallest modulus among roots of ``1 - sum_i coeffs[i] z^(i+1)``.

    Returns +inf when the polynomial is constant (all coefficients zero).
    """
    c = np.asarray(coeffs, float)
    c = np.trim_zeros(c, "b")
    if c.size == 0:
        return math.inf
    poly = np.concatenate(([1.0], -c))[::-1]
    roots = np.roots(poly)
    if roots.size == 0:
        return math.inf
    return float(np.min(np.abs(roots)))


def garch_archinf_weights(c0, c, d, n_lags: int) -> np.ndarray:
    """ARCH(inf) expansion weights (psi_0, ..., psi_n_lags) of a GARCH model.

    ``H_t = psi_0 + sum_k psi_k X_{t-k}^2`` with
    ``psi_k = c_k + sum_j d_j psi_{k-j}``.
    """
    c = np.asarray(c, float)
    d = np.asarray(d, float)
    psi = np.zeros(n_lags + 1)
    dsum = d.sum()
    psi[0] = c0 / (1.0 - dsum) if dsum < 1.0 else math.inf
    for k in range(1, n_lags + 1):
        v = c[k - 1] if k <= c.size else 0.0
        for j in range(1, min(d.size, k - 1) + 1):
            v += d[j - 1] * psi[k - j]
        psi[k] = v
    return psi


def _aparch_expanded_weights(alpha, gamma, beta, delta, n_lags: int):
    """Signed expansion weights (b_k+, b_k-) of the APARCH power recursion."""
    alpha = np.asarray(alpha, float)
    gamma = np.asarray(gamma, float)
    beta = np.asarray(beta, float)
    up = alpha * (1.0 - gamma) ** delta
    um = alpha * (1.0 + gamma) ** delta
    bp = np.zeros(n_lags + 1)
    bm = np.zeros(n_lags + 1)
    for k in range(1, n_lags + 1):
        vp = up[k - 1] if k <= up.size else 0.0
        vm = um[k - 1] if k <= um.size else 0.0
        for j in range(1, min(beta.size, k - 1) + 1):
            vp += beta[j - 1] * bp[k - j]
            vm += beta[j - 1] * bm[k - j]
        bp[k] = vp
        bm[k] = vm
    return bp[1:], bm[1:]


def _split(values: np.ndarray, *sizes: int) -> list[np.ndarray]:
    out, i = [], 0
    for s in sizes:
        out.append(values[i : i + s])
        i += s
    return out


_CONTRACTION_LAGS = 1000


def validate_params(spec: ModelSpec, theta: ParamVector, r: float = 4.0) -> ParamCheck:
    """Check per-slot bounds and the family's contraction condition.

    ``r`` is the moment order of the stationarity region; Gaussian noise norms
    are used throughout.  Returns the list of violated constraints and the
    total excess (for optimizer penalties).
    """
    fam = spec.family
    if theta.family != fam:
        raise ValueError("parameter vector family does not match the spec")
    v = theta.values
    layout = param_layout(fam)
    violations: list[str] = []
    excess = 0.0

    for slot, val, act in zip(layout, v, spec.active):
        if not act:
            if val != 0.0:
                violations.append(f"{slot.name}: inactive slot must be exactly 0")
                excess += abs(val)
            continue
        b = slot.bound_violation(val)
        if b > 0:
            violations.append(f"{slot.name}={val:g} violates bounds")
            excess += b

    kind = fam.kind
    norm_r = gaussian_noise_norm(r)

    def _roots_check(coeffs, what):
        nonlocal excess
        m = _poly_min_root_modulus(coeffs)
        if m <= 1.0:
            violations.append(f"{what} polynomial has a root inside the unit disk")
            excess += max(1.0 + 1e-8 - m, 1e-8)

    if kind in ("ar", "arma"):
        if kind == "ar":
            _roots_check(v[1:], "AR")
        else:
            (ar, ma) = _split(v[1:], fam.p, fam.q)
            _roots_check(ar, "AR")
            _roots_check(ma, "MA")
    elif kind == "arch":
        s = norm_r**2 * v[1:].sum()
        if s >= 1.0:
            violations.append(f"ARCH contraction ||xi||_r^2 * sum(a) = {s:g} >= 1")
            excess += s - 1.0 + 1e-8
    elif kind == "garch":
        c, d = _split(v[1:], fam.p, fam.q)
        dsum = d.sum()
        if dsum >= 1.0:
            violations.append(f"sum(d) = {dsum:g} >= 1")
            excess += dsum - 1.0 + 1e-8
        else:
            s = norm_r**2 * c.sum() / (1.0 - dsum)
            if s >= 1.0:
                violations.append(f"GARCH contraction ||xi||_r^2 * sum(psi) = {s:g} >= 1")
                excess += s - 1.0 + 1e-8
    elif kind == "aparch":
        alpha, gamma, beta = _split(v[1:], fam.p, fam.p, fam.q)
        bsum = beta.sum()
        if bsum >= 1.0:
            violations.append(f"sum(beta) = {bsum:g} >= 1")
            excess += bsum - 1.0 + 1e-8
        else:
            bp, bm = _aparch_expanded_weights(alpha, gamma, beta, fam.delta, _CONTRACTION_LAGS)
            s = norm_r * np.sum(np.maximum(np.abs(bp), np.abs(bm)) ** (1.0 / fam.delta))
            if s >= 1.0:
                violations.append(f"APARCH contraction ||xi||_r * sum(max|b|^(1/delta)) = {s:g} >= 1")
                excess += s - 1.0 + 1e-8
    elif kind == "arma_garch":
        c, d, ar, ma = _split(v[1:], fam.garch_p, fam.garch_q, fam.p, fam.q)
        s = d.sum() + gaussian_noise_norm(4.0) * c.sum()
        if s >= 1.0:
            violations.append(f"ARMA-GARCH contraction sum(d) + ||xi||_4 * sum(c) = {s:g} >= 1")
            excess += s - 1.0 + 1e-8
        _roots_check(ar, "AR")
        _roots_check(ma, "MA")
    elif kind == "ar_arch_inf":
        alpha = v[1]
        phi = v[2:]
        tail = float(special.zeta(fam.decay, 1.0))
        s = norm_r**2 * alpha * tail
        if s >= 1.0:
            violations.append(f"ARCH(inf) contraction ||xi||_r^2 * alpha * zeta(decay) = {s:g} >= 1")
            excess += s - 1.0 + 1e-8
        _roots_check(phi, "AR")

    return ParamCheck(valid=not violations, violations=violations, excess=excess)


def constraint_violation(spec: ModelSpec, values: np.ndarray, r: float = 4.0) -> float:
    """Total constraint excess of a raw value vector (0 when admissible)."""
    return validate_params(spec, ParamVector(spec.family, values), r=r).excess


# ---------------------------------------------------------------------------
# simulation

def _simulate_values(family: ModelFamily, v: np.ndarray, noise: np.ndarray) -> np.ndarray:
    kind = family.kind
    if kind == "white_noise":
        return v[0] * noise
    if kind == "ar":
        return _kernels.simulate_arma(noise, v[0], v[1:], np.empty(0))
    if kind == "arma":
        ar, ma = _split(v[1:], family.p, family.q)
        return _kernels.simulate_arma(noise, v[0], ar, ma)
    if kind == "arch":
        c0, c = v[0], v[1:]
        h0 = c0 / max(1.0 - c.sum(), 1e-12)
        return _kernels.simulate_garch(noise, c0, c, np.empty(0), h0)
    if kind == "garch":
        c, d = _split(v[1:], family.p, family.q)
        h0 = v[0] / max(1.0 - c.sum() - d.sum(), 1e-12)
        return _kernels.simulate_garch(noise, v[0], c, d, h0)
    if kind == "aparch":
        alpha, gamma, beta = _split(v[1:], family.p, family.p, family.q)
        s0 = v[0] / max(1.0 - beta.sum(), 1e-12)
        return _kernels.simulate_aparch(noise, v[0], alpha, gamma, beta, family.delta, s0)
    if kind == "arma_garch":
        c, d, ar, ma = _split(v[1:], family.garch_p, family.garch_q, family.p, family.q)
        h0 = v[0] / max(1.0 - c.sum() - d.sum(), 1e-12)
        eps = _kernels.simulate_garch(noise, v[0], c, d, h0)
        return _kernels.simulate_arma(eps, 1.0, ar, ma)
    # ar_arch_inf
    omega, alpha = v[0], v[1]
    phi = v[2:]
    weights = np.arange(1, family.max_lag + 1, dtype=float) ** (-family.decay)
    return _kernels.simulate_ar_archinf(noise, omega, alpha, phi, weights)


def simulate_from_noise(spec: ModelSpec, theta: ParamVector, noise: np.ndarray) -> np.ndarray:
    """Run the family recursion on a given standard-noise stream.

    Pre-sample values are zero except the recursive variance states, which
    start at their unconditional mean.  Returns a trajectory the same length
    as ``noise``.
    """
    noise = np.asarray(noise, dtype=float)
    x = _simulate_values(spec.family, theta.values, noise)
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        raise SimulationError(
            f"non-finite value at index {int(bad[0])} (explosive recursion)", int(bad[0])
        )
    return x


def simulate(
    spec: ModelSpec,
    theta: ParamVector,
    n: int,
    burn_in: int = 1000,
    seed: int = 0,
    r: float = 2.0,
) -> TimeSeries:
    """Simulate ``n`` observations after a ``burn_in`` warm-up.

    Parameters are checked against the order-``r`` stationarity region
    (default second-order).  Identical arguments (including seed) give
    bit-identical output.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    check = validate_params(spec, theta, r=r)
    if not check:
        raise ValueError("invalid parameters: " + "; ".join(check.violations))
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(burn_in + n)
    x = simulate_from_noise(spec, theta, noise)
    return TimeSeries(x[burn_in:], label=spec.label())
