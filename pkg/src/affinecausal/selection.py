"""Candidate enumeration, penalized criterion and model selection."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .estimation import FitError, FitResult, OptimizerOptions, fit_qmle
from .families import DEFAULT_MAX_LAG, ModelFamily, ModelSpec, TimeSeries
from .likelihood import _as_values

__all__ = [
    "Penalty",
    "penalty_value",
    "criterion",
    "arma_garch_grid",
    "garch_grid",
    "ar_subset_family",
    "ar_archinf_grid",
    "enumerate_candidates",
    "CandidateRecord",
    "SelectionReport",
    "fit_candidates",
    "rank_candidates",
    "select",
    "classify",
]


@dataclass(frozen=True)
class Penalty:
    """Penalty weight sequence kappa_n of the criterion."""

    kind: str  # log_n | sqrt_n | power | custom
    delta: float = 0.0
    fn: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.kind not in ("log_n", "sqrt_n", "power", "custom"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "power" and not (0.0 < self.delta < 1.0):
            raise ValueError("power penalty needs delta in (0, 1)")
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom penalty needs a function of n")

    @staticmethod
    def log_n() -> "Penalty":
        return Penalty("log_n")

    @staticmethod
    def sqrt_n() -> "Penalty":
        return Penalty("sqrt_n")

    @staticmethod
    def power(delta: float) -> "Penalty":
        return Penalty("power", delta=delta)

    @staticmethod
    def custom(fn: Callable[[int], float]) -> "Penalty":
        return Penalty("custom", fn=fn)

    @staticmethod
    def parse(text: str) -> "Penalty":
        text = text.strip()
        if text == "log_n":
            return Penalty.log_n()
        if text == "sqrt_n":
            return Penalty.sqrt_n()
        if text.startswith("power:"):
            return Penalty.power(float(text.split(":", 1)[1]))
        raise ValueError(f"cannot parse penalty {text!r}; use log_n, sqrt_n or power:<delta>")

    def label(self) -> str:
        if self.kind == "log_n":
            return "log_n"
        if self.kind == "sqrt_n":
            return "sqrt_n"
        if self.kind == "power":
            return f"power:{self.delta:g}"
        return "custom"

    def value(self, n: int) -> float:
        return penalty_value(self, n)


def penalty_value(p: Penalty, n: int) -> float:
    """Evaluate kappa_n."""
    if n < 2:
        raise ValueError("penalty needs n >= 2")
    if p.kind == "log_n":
        return math.log(n)
    if p.kind == "sqrt_n":
        return math.sqrt(n)
    if p.kind == "power":
        return float(n) ** p.delta
    v = float(p.fn(n))
    if v <= 0:
        raise ValueError("custom penalty must be positive")
    return v


def criterion(loglik: float, m_size: int, kappa: float) -> float:
    """Penalized contrast -2*loglik + |m|*kappa."""
    if m_size < 1:
        raise ValueError("m_size must be >= 1")
    return -2.0 * loglik + m_size * kappa


# ---------------------------------------------------------------------------
# candidate grids

def arma_garch_grid(
    arma_p_max: int = 5,
    arma_q_max: int = 5,
    garch_p_min: int = 1,
    garch_p_max: int = 5,
    garch_q_min: int = 0,
    garch_q_max: int = 5,
) -> list[ModelSpec]:
    """Mixed order grid of ARMA and GARCH candidates.

    The defaults give the 66-candidate family: 36 ARMA orders up to (5,5)
    plus 30 GARCH orders with at least one ARCH lag (GARCH(p,0) is ARCH(p)).
    """
    out = [
        ModelSpec(ModelFamily.arma(p, q))
        for p in range(arma_p_max + 1)
        for q in range(arma_q_max + 1)
    ]
    out += [
        ModelSpec(ModelFamily.garch(p, q))
        for p in range(garch_p_min, garch_p_max + 1)
        for q in range(garch_q_min, garch_q_max + 1)
    ]
    return out


def garch_grid(p_min: int = 1, p_max: int = 10, q_min: int = 0, q_max: int = 10) -> list[ModelSpec]:
    return [
        ModelSpec(ModelFamily.garch(p, q))
        for p in range(p_min, p_max + 1)
        for q in range(q_min, q_max + 1)
    ]


def ar_subset_family(p_max: int = 4) -> list[ModelSpec]:
    """All 2^p_max coefficient-subset models of AR(p_max); sigma always active."""
    fam = ModelFamily.ar(p_max)
    out = []
    for bits in range(2**p_max):
        mask = [True] + [bool(bits >> i & 1) for i in range(p_max)]
        out.append(ModelSpec(fam, tuple(mask)))
    return out


def ar_archinf_grid(
    p_min: int = 1,
    p_max: int = 8,
    decay: float = 3.0,
    max_lag: int = DEFAULT_MAX_LAG,
) -> list[ModelSpec]:
    return [
        ModelSpec(ModelFamily.ar_arch_inf(p, decay=decay, max_lag=max_lag))
        for p in range(p_min, p_max + 1)
    ]


def enumerate_candidates(desc: dict) -> list[ModelSpec]:
    """Build a candidate list from a grid description (as found in configs)."""
    desc = dict(desc)
    kind = desc.pop("kind")
    if kind == "arma_garch_grid":
        out = arma_garch_grid(**desc)
    elif kind == "garch_grid":
        out = garch_grid(**desc)
    elif kind == "ar_subsets":
        out = ar_subset_family(**desc)
    elif kind == "ar_archinf_grid":
        out = ar_archinf_grid(**desc)
    elif kind == "list":
        out = [ModelSpec.from_dict(d) for d in desc["models"]]
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    if not out:
        raise ValueError("empty candidate grid")
    return out


# ---------------------------------------------------------------------------
# classification against a reference structure

def _structure(spec: ModelSpec):
    """Active-lag sets of the mean and volatility parts, family-agnostic.

    ARMA(p,0) and AR(p) share a structure, as do GARCH(p,0) and ARCH(p).
    """
    fam = spec.family
    act = spec.active
    ar: set[int] = set()
    ma: set[int] = set()
    arch: set[int] = set()
    garch: set[int] = set()
    asym: set[int] = set()
    archinf = False
    k = fam.kind
    if k in ("ar", "arma"):
        ar = {i for i in range(1, fam.p + 1) if act[i]}
        if k == "arma":
            ma = {j for j in range(1, fam.q + 1) if act[fam.p + j]}
    elif k == "arch":
        arch = {i for i in range(1, fam.p + 1) if act[i]}
    elif k == "garch":
        arch = {i for i in range(1, fam.p + 1) if act[i]}
        garch = {j for j in range(1, fam.q + 1) if act[fam.p + j]}
    elif k == "aparch":
        arch = {i for i in range(1, fam.p + 1) if act[i]}
        asym = {i for i in range(1, fam.p + 1) if act[fam.p + i]}
        garch = {j for j in range(1, fam.q + 1) if act[2 * fam.p + j]}
    elif k == "arma_garch":
        gp, gq = fam.garch_p, fam.garch_q
        arch = {i for i in range(1, gp + 1) if act[i]}
        garch = {j for j in range(1, gq + 1) if act[gp + j]}
        ar = {i for i in range(1, fam.p + 1) if act[gp + gq + i]}
        ma = {j for j in range(1, fam.q + 1) if act[gp + gq + fam.p + j]}
    else:  # ar_arch_inf
        archinf = True
        ar = {i for i in range(1, fam.p + 1) if act[1 + i]}
    return archinf, ar, ma, arch, garch, asym


def classify(candidate: ModelSpec, reference: ModelSpec) -> str:
    """Classify a candidate as ``true``, ``overfitted`` or ``wrong``.

    ``true`` means identical active structure (up to family aliases such as
    ARCH(p) vs GARCH(p,0)); ``overfitted`` means the candidate strictly
    contains the reference's active lags within the same structural class.
    """
    cs = _structure(candidate)
    rs = _structure(reference)
    if cs == rs:
        return "true"
    if cs[0] != rs[0]:
        return "wrong"
    if all(r <= c for r, c in zip(rs[1:], cs[1:])):
        return "overfitted"
    return "wrong"


# ---------------------------------------------------------------------------
# selection

@dataclass
class CandidateRecord:
    index: int
    spec: ModelSpec
    fit: Optional[FitResult]
    m_size: int
    criterion: Optional[float]
    failed: bool = False
    note: str = ""
    classification: str = ""


@dataclass
class SelectionReport:
    """Per-candidate criterion values and the argmin."""

    records: list[CandidateRecord]
    chosen: int
    ties: list[int]
    penalty: Penalty
    kappa: float
    n: int
    reference: Optional[ModelSpec] = None

    @property
    def chosen_record(self) -> CandidateRecord:
        return self.records[self.chosen]

    def to_dict(self) -> dict:
        return {
            "penalty": self.penalty.label(),
            "kappa": self.kappa,
            "n": self.n,
            "chosen": self.chosen,
            "ties": list(self.ties),
            "reference": self.reference.to_dict() if self.reference else None,
            "candidates": [
                {
                    "index": r.index,
                    "model": r.spec.to_dict(),
                    "label": r.spec.label(),
                    "m_size": r.m_size,
                    "loglik": None if r.fit is None else r.fit.loglik,
                    "criterion": r.criterion,
                    "failed": r.failed,
                    "note": r.note,
                    "classification": r.classification,
                }
                for r in self.records
            ],
        }

    def format_text(self) -> str:
        lines = [
            f"selection over {len(self.records)} candidates, n={self.n}, "
            f"penalty={self.penalty.label()} (kappa={self.kappa:.4f})",
            f"{'idx':>4s} {'model':<28s} {'|m|':>4s} {'loglik':>14s} {'criterion':>14s}  flags",
        ]
        for r in self.records:
            ll = "-" if r.fit is None else f"{r.fit.loglik:.4f}"
            cr = "-" if r.criterion is None else f"{r.criterion:.4f}"
            flags = []
            if r.index == self.chosen:
                flags.append("chosen")
            elif r.index in self.ties:
                flags.append("tie")
            if r.failed:
                flags.append("failed")
            if r.classification:
                flags.append(r.classification)
            lines.append(
                f"{r.index:>4d} {r.spec.label():<28s} {r.m_size:>4d} {ll:>14s} {cr:>14s}  "
                + ",".join(flags)
            )
        return "\n".join(lines)


def fit_candidates(
    x,
    candidates: Sequence[ModelSpec],
    opts: Optional[OptimizerOptions] = None,
) -> list[tuple[Optional[FitResult], str]]:
    """Fit every candidate once; failures become ``(None, reason)`` entries."""
    xv = _as_values(x)
    opts = opts or OptimizerOptions(compute_covariance=False)
    out: list[tuple[Optional[FitResult], str]] = []
    for spec in candidates:
        try:
            out.append((fit_qmle(spec, xv, opts), ""))
        except FitError as exc:
            warnings.warn(f"candidate {spec.label()} excluded: {exc}")
            out.append((None, str(exc)))
    return out


def rank_candidates(
    candidates: Sequence[ModelSpec],
    fits: Sequence[tuple[Optional[FitResult], str]],
    penalty: Penalty,
    n: int,
    reference: Optional[ModelSpec] = None,
    tie_tol: float = 1e-6,
) -> SelectionReport:
    """Build a selection report from precomputed fits.

    Ties within ``tie_tol`` break toward the smallest |m|, then the lowest
    enumeration index.
    """
    kappa = penalty.value(n)
    records: list[CandidateRecord] = []
    for i, (spec, (fit, note)) in enumerate(zip(candidates, fits)):
        rec = CandidateRecord(index=i, spec=spec, fit=fit, m_size=spec.dim, criterion=None)
        if fit is None:
            rec.failed = True
            rec.note = note
        else:
            rec.criterion = criterion(fit.loglik, spec.dim, kappa)
            if reference is not None:
                rec.classification = classify(spec, reference)
        records.append(rec)

    ok = [r for r in records if not r.failed]
    if not ok:
        raise FitError("all candidates failed to fit")
    cmin = min(r.criterion for r in ok)
    ties = [r.index for r in ok if r.criterion <= cmin + tie_tol]
    chosen = min(ties, key=lambda i: (records[i].m_size, i))
    return SelectionReport(
        records=records,
        chosen=chosen,
        ties=ties,
        penalty=penalty,
        kappa=kappa,
        n=n,
        reference=reference,
    )


def select(
    x,
    candidates: Sequence[ModelSpec],
    penalty: Penalty,
    opts: Optional[OptimizerOptions] = None,
    reference: Optional[ModelSpec] = None,
    tie_tol: float = 1e-6,
) -> SelectionReport:
    """Fit every candidate, compute the criterion and pick the argmin.

    Failed fits are excluded with a warning.  Candidate covariance matrices
    are not computed here; use
    :func:`affinecausal.estimation.attach_covariance` on the winner if needed.
    """
    xv = _as_values(x)
    n = xv.size
    if n < 2:
        raise ValueError("need at least two observations")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate list")
    fits = fit_candidates(xv, candidates, opts)
    return rank_candidates(candidates, fits, penalty, n, reference=reference, tie_tol=tie_tol)
