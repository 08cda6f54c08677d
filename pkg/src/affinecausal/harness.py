"""Monte Carlo experiment orchestration, data ingestion and report emission.

Experiments are described by a YAML configuration, run sequentially with one
seed per replication (``base_seed + r`` for the null generator and
``base_seed + replications + r`` for the power alternative), and aggregated
into reports that render as text tables or round-trip through JSON.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import yaml

from .diagnostics import DiagnosticsError, portmanteau
from .estimation import FitError, OptimizerOptions, attach_covariance, fit_qmle
from .families import (
    ModelSpec,
    ParamVector,
    SimulationError,
    TimeSeries,
    simulate,
    validate_params,
)
from .selection import (
    Penalty,
    SelectionReport,
    classify,
    enumerate_candidates,
    fit_candidates,
    rank_candidates,
)

__all__ = [
    "ExperimentConfig",
    "McReport",
    "PipelineReport",
    "run_selection_experiment",
    "run_size_power_experiment",
    "run_pipeline",
    "load_returns",
    "emit_report",
    "load_report",
    "load_model_file",
]


def load_model_file(path) -> tuple[ModelSpec, Optional[ParamVector]]:
    """Read a ``{model: ..., params: [...]}`` YAML document."""
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    spec = ModelSpec.from_dict(doc["model"])
    params = None
    if doc.get("params") is not None:
        params = ParamVector(spec.family, np.asarray(doc["params"], float))
    return spec, params


@dataclass
class ExperimentConfig:
    """Declarative description of a Monte Carlo experiment."""

    truth: ModelSpec
    truth_params: ParamVector
    candidates: dict
    penalties: list[Penalty]
    sample_sizes: list[int]
    replications: int = 200
    base_seed: int = 0
    burn_in: int = 1000
    restarts: int = 2
    K: list[int] = field(default_factory=lambda: [3])
    level: float = 0.05
    reference: Optional[ModelSpec] = None
    alternative: Optional[ModelSpec] = None
    alternative_params: Optional[ParamVector] = None
    #: under the power alternative, fit the reference model ("reference")
    #: or rerun the full selection ("selected")
    power_fit: str = "reference"
    test_penalty: Penalty = field(default_factory=Penalty.sqrt_n)

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if any(n < 20 for n in self.sample_sizes):
            raise ValueError("sample sizes must be >= 20")
        if self.power_fit not in ("reference", "selected"):
            raise ValueError("power_fit must be 'reference' or 'selected'")
        if self.reference is None:
            self.reference = self.truth
        if not validate_params(self.truth, self.truth_params, r=2.0):
            raise ValueError("inadmissible generator parameters")
        if self.alternative is not None and self.alternative_params is None:
            raise ValueError("alternative generator needs parameters")

    def optimizer_options(self) -> OptimizerOptions:
        return OptimizerOptions(restarts=self.restarts, compute_covariance=False)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        truth_spec = ModelSpec.from_dict(doc["truth"]["model"])
        truth_params = ParamVector(truth_spec.family, np.asarray(doc["truth"]["params"], float))
        alt_spec = None
        alt_params = None
        if doc.get("alternative") is not None:
            alt_spec = ModelSpec.from_dict(doc["alternative"]["model"])
            alt_params = ParamVector(
                alt_spec.family, np.asarray(doc["alternative"]["params"], float)
            )
        reference = None
        if doc.get("reference") is not None:
            reference = ModelSpec.from_dict(doc["reference"])
        return ExperimentConfig(
            truth=truth_spec,
            truth_params=truth_params,
            candidates=doc["candidates"],
            penalties=[Penalty.parse(p) for p in doc.get("penalties", ["log_n", "sqrt_n"])],
            sample_sizes=[int(n) for n in doc["sample_sizes"]],
            replications=int(doc.get("replications", 200)),
            base_seed=int(doc.get("base_seed", 0)),
            burn_in=int(doc.get("burn_in", 1000)),
            restarts=int(doc.get("restarts", 2)),
            K=[int(k) for k in doc.get("K", [3])],
            level=float(doc.get("level", 0.05)),
            reference=reference,
            alternative=alt_spec,
            alternative_params=alt_params,
            power_fit=doc.get("power_fit", "reference"),
            test_penalty=Penalty.parse(doc.get("test_penalty", "sqrt_n")),
        )

    @staticmethod
    def from_yaml(path) -> "ExperimentConfig":
        with open(path) as fh:
            return ExperimentConfig.from_dict(yaml.safe_load(fh))

    def echo(self) -> dict:
        d = {
            "truth": {"model": self.truth.to_dict(), "params": list(map(float, self.truth_params.values))},
            "candidates": self.candidates,
            "penalties": [p.label() for p in self.penalties],
            "sample_sizes": self.sample_sizes,
            "replications": self.replications,
            "base_seed": self.base_seed,
            "burn_in": self.burn_in,
            "restarts": self.restarts,
            "K": self.K,
            "level": self.level,
            "power_fit": self.power_fit,
            "test_penalty": self.test_penalty.label(),
        }
        if self.reference is not None and self.reference != self.truth:
            d["reference"] = self.reference.to_dict()
        if self.alternative is not None:
            d["alternative"] = {
                "model": self.alternative.to_dict(),
                "params": list(map(float, self.alternative_params.values)),
            }
        return d


@dataclass
class McReport:
    """Aggregated Monte Carlo rates plus a full configuration echo."""

    kind: str  # selection | size_power
    config: dict
    rows: list[dict]
    runtime_seconds: float = 0.0

    def to_dict(self) -> dict:
        # runtime deliberately excluded so identical configs give
        # byte-identical machine-readable reports
        return {"kind": self.kind, "config": self.config, "rows": self.rows}

    @staticmethod
    def from_dict(d: dict) -> "McReport":
        return McReport(kind=d["kind"], config=d["config"], rows=d["rows"])

    def format_text(self) -> str:
        lines = [f"Monte Carlo {self.kind} experiment "
                 f"({self.config.get('replications')} replications)"]
        if self.kind == "selection":
            for n in sorted({r["n"] for r in self.rows}):
                rows_n = [r for r in self.rows if r["n"] == n]
                lines.append(f"\nsample length n={n}")
                header = f"{'':>12s}" + "".join(f"{r['penalty']:>12s}" for r in rows_n)
                lines.append(header)
                for key in ("wrong", "true", "overfitted"):
                    lines.append(
                        f"{key:>12s}" + "".join(f"{r[key]:>12.1f}" for r in rows_n)
                    )
                failed = sum(r["failed"] for r in rows_n)
                if failed:
                    lines.append(f"{'failed reps':>12s}{failed:>12d}")
        else:
            lines.append(f"\n{'K':>4s}{'n':>8s}{'size %':>10s}{'power %':>10s}")
            for r in self.rows:
                power = "-" if r.get("power") is None else f"{r['power']:.1f}"
                lines.append(f"{r['K']:>4d}{r['n']:>8d}{r['size']:>10.1f}{power:>10s}")
        lines.append(f"\nruntime: {self.runtime_seconds:.1f} s")
        return "\n".join(lines)


def _pct(count: int, total: int) -> float:
    return 100.0 * count / total if total else float("nan")


def run_selection_experiment(cfg: ExperimentConfig) -> McReport:
    """Simulate, select and classify per replication; aggregate percentages.

    Replication ``r`` uses seed ``base_seed + r``; results are bit-reproducible
    for a fixed configuration.
    """
    t0 = time.monotonic()
    candidates = enumerate_candidates(cfg.candidates)
    opts = cfg.optimizer_options()
    rows = []
    for n in cfg.sample_sizes:
        counts = {p.label(): {"wrong": 0, "true": 0, "overfitted": 0} for p in cfg.penalties}
        completed = 0
        failed = 0
        for rep in range(cfg.replications):
            seed = cfg.base_seed + rep
            try:
                x = simulate(cfg.truth, cfg.truth_params, n, burn_in=cfg.burn_in, seed=seed)
                fits = fit_candidates(x.values, candidates, opts)
                for penalty in cfg.penalties:
                    report = rank_candidates(
                        candidates, fits, penalty, n, reference=cfg.reference
                    )
                    cls = classify(report.chosen_record.spec, cfg.reference)
                    counts[penalty.label()][cls] += 1
            except (SimulationError, FitError):
                failed += 1
                continue
            completed += 1
        for penalty in cfg.penalties:
            c = counts[penalty.label()]
            rows.append(
                {
                    "penalty": penalty.label(),
                    "n": n,
                    "wrong": _pct(c["wrong"], completed),
                    "true": _pct(c["true"], completed),
                    "overfitted": _pct(c["overfitted"], completed),
                    "completed": completed,
                    "failed": failed,
                }
            )
    if all(r["completed"] == 0 for r in rows):
        raise FitError("all replications failed")
    return McReport(
        kind="selection",
        config=cfg.echo(),
        rows=rows,
        runtime_seconds=time.monotonic() - t0,
    )


def run_size_power_experiment(cfg: ExperimentConfig) -> McReport:
    """Empirical size and power of the portmanteau test on selected models."""
    t0 = time.monotonic()
    candidates = enumerate_candidates(cfg.candidates)
    opts = cfg.optimizer_options()
    rows = []
    for n in cfg.sample_sizes:
        size_rejects = {K: 0 for K in cfg.K}
        power_rejects = {K: 0 for K in cfg.K} if cfg.alternative is not None else None
        completed = 0
        failed = 0
        for rep in range(cfg.replications):
            try:
                x = simulate(
                    cfg.truth, cfg.truth_params, n, burn_in=cfg.burn_in,
                    seed=cfg.base_seed + rep,
                )
                report = rank_candidates(
                    candidates, fit_candidates(x.values, candidates, opts),
                    cfg.test_penalty, n,
                )
                winner = attach_covariance(report.chosen_record.fit, x.values)
                for K in cfg.K:
                    pm = portmanteau(winner.spec, winner, x.values, K)
                    if pm.p_value < cfg.level:
                        size_rejects[K] += 1
                if cfg.alternative is not None:
                    xa = simulate(
                        cfg.alternative, cfg.alternative_params, n, burn_in=cfg.burn_in,
                        seed=cfg.base_seed + cfg.replications + rep,
                    )
                    if cfg.power_fit == "reference":
                        alt_fit = fit_qmle(
                            cfg.reference, xa.values,
                            OptimizerOptions(restarts=cfg.restarts),
                        )
                    else:
                        alt_report = rank_candidates(
                            candidates, fit_candidates(xa.values, candidates, opts),
                            cfg.test_penalty, n,
                        )
                        alt_fit = attach_covariance(alt_report.chosen_record.fit, xa.values)
                    for K in cfg.K:
                        pm = portmanteau(alt_fit.spec, alt_fit, xa.values, K)
                        if pm.p_value < cfg.level:
                            power_rejects[K] += 1
            except (SimulationError, FitError, DiagnosticsError):
                failed += 1
                continue
            completed += 1
        for K in cfg.K:
            rows.append(
                {
                    "K": K,
                    "n": n,
                    "size": _pct(size_rejects[K], completed),
                    "power": None if power_rejects is None else _pct(power_rejects[K], completed),
                    "completed": completed,
                    "failed": failed,
                }
            )
    if all(r["completed"] == 0 for r in rows):
        raise FitError("all replications failed")
    return McReport(
        kind="size_power",
        config=cfg.echo(),
        rows=rows,
        runtime_seconds=time.monotonic() - t0,
    )


# ---------------------------------------------------------------------------
# data ingestion

def load_returns(path, scheme: str = "prices", scale: float = 1.0) -> TimeSeries:
    """Read a delimited single- or two-column (date, value) text table.

    With ``scheme="prices"`` the series of ``scale * log(P_t / P_{t-1})`` is
    returned; ``scheme="returns"`` passes scaled values through.  A leading
    non-numeric line is treated as a header; any other non-numeric row is an
    error reported with its line number.
    """
    if scheme not in ("prices", "returns"):
        raise ValueError("scheme must be 'prices' or 'returns'")
    values = []
    bad_lines = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        fields = [f for f in line.replace(";", ",").replace("\t", ",").replace(" ", ",").split(",") if f]
        try:
            values.append(float(fields[-1]))
        except ValueError:
            if lineno == 1 and not values:
                continue  # header
            bad_lines.append(lineno)
    if bad_lines:
        raise ValueError(f"non-numeric rows at lines {bad_lines}")
    v = np.asarray(values, float)
    if scheme == "returns":
        if v.size < 1:
            raise ValueError("no observations found")
        return TimeSeries(scale * v, label=str(path))
    if v.size < 2:
        raise ValueError("need at least two prices to form returns")
    if np.any(v <= 0):
        raise ValueError("non-positive price cannot be log-differenced")
    return TimeSeries(scale * np.diff(np.log(v)), label=str(path))


# ---------------------------------------------------------------------------
# single-series pipeline

@dataclass
class PipelineReport:
    """Selection plus portmanteau diagnostics of each penalty's winner."""

    n: int
    K: int
    selections: list[SelectionReport]
    tests: list[dict]  # one per penalty: {penalty, model, portmanteau dict}

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "K": self.K,
            "selections": [s.to_dict() for s in self.selections],
            "tests": self.tests,
        }

    def format_text(self) -> str:
        parts = []
        for sel, test in zip(self.selections, self.tests):
            parts.append(sel.format_text())
            parts.append(
                f"winner under {test['penalty']}: {test['model']}"
            )
            pm = test["portmanteau"]
            parts.append(
                f"  Q_{pm['K']} = {pm['Q']:.4f}, df={pm['df']}, p-value={pm['p_value']:.4f}"
            )
            parts.append("")
        return "\n".join(parts)


def run_pipeline(
    x,
    candidates: Sequence[ModelSpec],
    penalties: Sequence[Penalty],
    K: int = 3,
    opts: Optional[OptimizerOptions] = None,
) -> PipelineReport:
    """Select a model per penalty, then test each winner's goodness of fit."""
    x = x.values if isinstance(x, TimeSeries) else np.asarray(x, float).ravel()
    candidates = list(candidates)
    fits = fit_candidates(x, candidates, opts)
    selections = []
    tests = []
    for penalty in penalties:
        report = rank_candidates(candidates, fits, penalty, x.size)
        winner = attach_covariance(report.chosen_record.fit, x)
        pm = portmanteau(winner.spec, winner, x, K)
        selections.append(report)
        tests.append(
            {
                "penalty": penalty.label(),
                "model": winner.spec.label(),
                "portmanteau": pm.to_dict(),
            }
        )
    return PipelineReport(n=x.size, K=K, selections=selections, tests=tests)


# ---------------------------------------------------------------------------
# report emission

def emit_report(report, format: str = "text", path=None) -> str:
    """Render a report as text or JSON; optionally write it to ``path``."""
    if format not in ("text", "json"):
        raise ValueError("format must be 'text' or 'json'")
    if isinstance(report, McReport) and report.rows:
        if all(r.get("completed", 0) == 0 for r in report.rows):
            raise ValueError("refusing to emit a report with zero completed replications")
    if format == "text":
        out = report.format_text() + "\n"
    else:
        out = json.dumps(report.to_dict(), indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(out)
    return out


def load_report(path) -> dict:
    """Parse a machine-readable report back into its dictionary form."""
    with open(path) as fh:
        return json.load(fh)
