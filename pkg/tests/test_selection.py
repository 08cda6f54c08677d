import math

import numpy as np
import pytest

from affinecausal.estimation import FitError, FitResult, OptimizerOptions
from affinecausal.families import ModelFamily, ModelSpec, ParamVector, simulate
from affinecausal.selection import (
    Penalty,
    ar_archinf_grid,
    ar_subset_family,
    arma_garch_grid,
    classify,
    criterion,
    enumerate_candidates,
    garch_grid,
    penalty_value,
    rank_candidates,
    select,
)


def fake_fit(spec, loglik):
    return FitResult(
        spec=spec,
        params=ParamVector(spec.family, np.zeros(spec.family.dim)),
        loglik=loglik,
        converged=True,
        n_iter=1,
        n_eval=1,
        best_restart=0,
    )


# ---------------------------------------------------------------------------
# penalties and criterion

def test_penalty_values():
    assert penalty_value(Penalty.log_n(), 100) == pytest.approx(4.60517, abs=1e-5)
    assert penalty_value(Penalty.sqrt_n(), 100) == 10.0
    assert penalty_value(Penalty.power(2.0 / 3.0), 1000) == pytest.approx(100.0, rel=1e-12)


def test_penalty_parse_and_label():
    assert Penalty.parse("log_n").label() == "log_n"
    assert Penalty.parse("power:0.5").value(100) == pytest.approx(10.0)
    with pytest.raises(ValueError):
        Penalty.parse("aic")
    with pytest.raises(ValueError):
        Penalty.power(1.5)
    with pytest.raises(ValueError):
        penalty_value(Penalty.log_n(), 1)


def test_custom_penalty():
    p = Penalty.custom(lambda n: 2.0 * n**0.25)
    assert p.value(16) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        Penalty.custom(lambda n: -1.0).value(10)


def test_criterion_arithmetic():
    assert criterion(-100.0, 3, math.log(100)) == pytest.approx(213.8155, abs=1e-4)
    assert criterion(0.0, 1, 10.0) == 10.0
    assert criterion(-5.0, 3, 2.0) > criterion(-5.0, 2, 2.0)
    with pytest.raises(ValueError):
        criterion(0.0, 0, 1.0)


# ---------------------------------------------------------------------------
# grids

def test_grid_counts():
    assert len(arma_garch_grid()) == 66
    assert len(garch_grid()) == 110
    assert len(ar_subset_family(4)) == 16
    assert len(ar_archinf_grid(1, 8)) == 8


def test_grid_contents():
    grid = arma_garch_grid()
    labels = {s.label() for s in grid}
    assert "ARMA(0,0)" in labels and "GARCH(2,0)" in labels and "GARCH(5,5)" in labels
    assert "GARCH(0,1)" not in labels
    subsets = ar_subset_family(2)
    assert all(s.active[0] for s in subsets)
    assert {s.dim for s in subsets} == {1, 2, 3}


def test_enumerate_candidates():
    assert len(enumerate_candidates({"kind": "arma_garch_grid"})) == 66
    out = enumerate_candidates(
        {"kind": "list", "models": [{"family": {"kind": "ar", "p": 2}}]}
    )
    assert out[0].label() == "AR(2)"
    with pytest.raises(ValueError):
        enumerate_candidates({"kind": "nope"})
    with pytest.raises(ValueError):
        enumerate_candidates({"kind": "garch_grid", "p_min": 3, "p_max": 2})


def test_grid_order_deterministic():
    a = [s.label() for s in arma_garch_grid()]
    b = [s.label() for s in arma_garch_grid()]
    assert a == b


# ---------------------------------------------------------------------------
# classification

def test_classify_aliases_and_nesting():
    ar2 = ModelSpec(ModelFamily.ar(2))
    assert classify(ModelSpec(ModelFamily.arma(2, 0)), ar2) == "true"
    assert classify(ModelSpec(ModelFamily.ar(3)), ar2) == "overfitted"
    assert classify(ModelSpec(ModelFamily.arma(2, 1)), ar2) == "overfitted"
    assert classify(ModelSpec(ModelFamily.ar(1)), ar2) == "wrong"
    assert classify(ModelSpec(ModelFamily.garch(2, 0)), ar2) == "wrong"

    arch2 = ModelSpec(ModelFamily.arch(2))
    assert classify(ModelSpec(ModelFamily.garch(2, 0)), arch2) == "true"
    assert classify(ModelSpec(ModelFamily.garch(2, 1)), arch2) == "overfitted"
    assert classify(ModelSpec(ModelFamily.arma(1, 1)), arch2) == "wrong"


def test_classify_subset_masks():
    ref = ModelSpec(ModelFamily.ar(4), (True, False, False, True, True))
    same = ModelSpec(ModelFamily.ar(4), (True, False, False, True, True))
    sup = ModelSpec(ModelFamily.ar(4), (True, True, False, True, True))
    other = ModelSpec(ModelFamily.ar(4), (True, True, True, True, False))
    assert classify(same, ref) == "true"
    assert classify(sup, ref) == "overfitted"
    assert classify(other, ref) == "wrong"


def test_classify_archinf_orders():
    ref = ModelSpec(ModelFamily.ar_arch_inf(2))
    assert classify(ModelSpec(ModelFamily.ar_arch_inf(2)), ref) == "true"
    assert classify(ModelSpec(ModelFamily.ar_arch_inf(3)), ref) == "overfitted"
    assert classify(ModelSpec(ModelFamily.ar(2)), ref) == "wrong"


# ---------------------------------------------------------------------------
# ranking

def test_rank_singleton():
    spec = ModelSpec(ModelFamily.white_noise())
    rep = rank_candidates([spec], [(fake_fit(spec, -10.0), "")], Penalty.log_n(), 100)
    assert rep.chosen == 0
    assert rep.chosen_record.criterion == pytest.approx(20.0 + math.log(100))


def test_rank_argmin_and_exactness():
    specs = [ModelSpec(ModelFamily.ar(p)) for p in (1, 2, 3)]
    fits = [(fake_fit(s, ll), "") for s, ll in zip(specs, [-120.0, -100.0, -99.5])]
    rep = rank_candidates(specs, fits, Penalty.sqrt_n(), 400)
    kappa = 20.0
    for rec in rep.records:
        assert rec.criterion == -2.0 * rec.fit.loglik + rec.m_size * kappa
    assert rep.chosen == 1  # -2*-100+3*20=260 < -2*-99.5+4*20=279


def test_rank_shift_invariance():
    specs = [ModelSpec(ModelFamily.ar(p)) for p in (1, 2, 3)]
    base = [-120.0, -100.0, -99.5]
    r1 = rank_candidates(specs, [(fake_fit(s, b), "") for s, b in zip(specs, base)],
                         Penalty.sqrt_n(), 400)
    r2 = rank_candidates(specs, [(fake_fit(s, b + 37.0), "") for s, b in zip(specs, base)],
                         Penalty.sqrt_n(), 400)
    assert r1.chosen == r2.chosen


def test_rank_penalty_dominance():
    specs = [ModelSpec(ModelFamily.ar(1)), ModelSpec(ModelFamily.ar(4))]
    fits = [(fake_fit(specs[0], -110.0), ""), (fake_fit(specs[1], -100.0), "")]
    big = rank_candidates(specs, fits, Penalty.custom(lambda n: 1000.0), 100)
    assert big.chosen == 0
    small = rank_candidates(specs, fits, Penalty.custom(lambda n: 0.001), 100)
    assert small.chosen == 1


def test_tie_breaking():
    small = ModelSpec(ModelFamily.ar(1))
    big = ModelSpec(ModelFamily.ar(2))
    # equal criterion: loglik difference exactly offsets the penalty gap
    fits = [(fake_fit(big, -100.0), ""), (fake_fit(small, -100.0 - 5.0), "")]
    rep = rank_candidates([big, small], fits, Penalty.custom(lambda n: 10.0), 100)
    assert set(rep.ties) == {0, 1}
    assert rep.chosen == 1  # smaller |m| wins the tie
    twin_a, twin_b = ModelSpec(ModelFamily.ar(1)), ModelSpec(ModelFamily.ar(1))
    rep = rank_candidates(
        [twin_a, twin_b],
        [(fake_fit(twin_a, -100.0), ""), (fake_fit(twin_b, -100.0), "")],
        Penalty.log_n(),
        100,
    )
    assert rep.chosen == 0  # lowest index among equal |m|


def test_failed_fits_excluded():
    specs = [ModelSpec(ModelFamily.ar(1)), ModelSpec(ModelFamily.ar(2))]
    fits = [(None, "diverged"), (fake_fit(specs[1], -100.0), "")]
    rep = rank_candidates(specs, fits, Penalty.log_n(), 100)
    assert rep.chosen == 1
    assert rep.records[0].failed and rep.records[0].note == "diverged"
    with pytest.raises(FitError):
        rank_candidates(specs, [(None, "a"), (None, "b")], Penalty.log_n(), 100)


def test_report_serialization():
    spec = ModelSpec(ModelFamily.ar(1))
    rep = rank_candidates([spec], [(fake_fit(spec, -10.0), "")], Penalty.log_n(), 100,
                          reference=spec)
    d = rep.to_dict()
    assert d["chosen"] == 0
    assert d["candidates"][0]["classification"] == "true"
    assert "AR(1)" in rep.format_text()


# ---------------------------------------------------------------------------
# end-to-end select

def test_select_end_to_end():
    spec = ModelSpec(ModelFamily.ar(1))
    theta = ParamVector(spec.family, [1.0, 0.5])
    x = simulate(spec, theta, 500, seed=1)
    candidates = [ModelSpec(ModelFamily.white_noise()), spec, ModelSpec(ModelFamily.ar(2))]
    rep = select(x, candidates, Penalty.log_n(),
                 OptimizerOptions(restarts=1, compute_covariance=False),
                 reference=spec)
    assert rep.chosen_record.spec == spec
    assert rep.chosen_record.classification == "true"


def test_select_prefers_small_model_on_white_noise():
    wn = ModelSpec(ModelFamily.white_noise())
    candidates = [wn, ModelSpec(ModelFamily.ar(1))]
    theta = ParamVector(wn.family, [1.0])
    hits = 0
    for seed in range(20):
        x = simulate(wn, theta, 500, seed=seed)
        rep = select(x, candidates, Penalty.log_n(),
                     OptimizerOptions(restarts=1, compute_covariance=False))
        hits += rep.chosen_record.spec == wn
    assert hits >= 14


def test_select_excludes_unfittable_candidate():
    spec = ModelSpec(ModelFamily.ar(1))
    theta = ParamVector(spec.family, [1.0, 0.5])
    x = simulate(spec, theta, 60, seed=2)
    # ARMA(3,3) needs n > 70 observations and must be excluded, not fatal
    candidates = [spec, ModelSpec(ModelFamily.arma(3, 3))]
    with pytest.warns(UserWarning):
        rep = select(x, candidates, Penalty.log_n(),
                     OptimizerOptions(restarts=1, compute_covariance=False))
    assert rep.chosen == 0
    assert rep.records[1].failed
