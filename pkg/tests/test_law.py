import math

import numpy as np
import pytest

from cpt_law.errors import LawEvaluationError
from cpt_law.law import (
    EvalContext,
    LawParams,
    ModelSizeTerms,
    ReplayTerms,
    eval_loss,
    eval_shift,
    evaluate,
    predict_curve,
)
from cpt_law.schedules import concat_pt_cpt, constant_schedule


def test_shift_is_zero_without_cpt():
    assert eval_shift(LawParams(), 0.0) == 0.0


def test_shift_example_value():
    p = LawParams(B=0.276, E=99.35, beta=0.5)
    assert abs(eval_shift(p, 0.01) - 0.08052) < 5e-5


def test_shift_asymptote():
    p = LawParams(B=0.276, E=99.35, beta=1.0)
    assert abs(eval_shift(p, 1e9 / 99.35) - 0.276) < 1e-6


@pytest.mark.parametrize("beta", [0.1, 0.5, 1.0])
def test_shift_monotone_and_concave(beta):
    p = LawParams(beta=beta)
    s = np.linspace(0.0, 1.0, 1001)
    h = eval_shift(p, s)
    first = np.diff(h)
    assert np.all(first > 0)
    assert np.all(np.diff(first) <= 1e-15)


def test_shift_rejects_negative_area():
    with pytest.raises(ValueError):
        eval_shift(LawParams(), -1e-3)


def test_pt_endpoint_has_no_cpt_terms():
    p = LawParams()
    b = eval_loss(p, 2.0, 0.1, 0.0, 0.0)
    assert b.shift == 0.0 and b.anneal_cpt == 0.0
    assert math.isclose(b.total, p.L0 + p.A * 2.0 ** -p.alpha - p.C1 * 0.1, rel_tol=1e-15)


def test_breakdown_components_sum_to_total():
    p = LawParams(model_size=ModelSizeTerms(gamma1=0.1, gamma2=-0.05, gamma3=0.2, F=1.5))
    b = eval_loss(p, 1.5, 0.05, 0.3, 0.02, EvalContext(N=4.0))
    parts = p.L0 + b.base_power - b.anneal_pt - b.anneal_cpt + b.shift + b.size_term
    assert math.isclose(b.total, parts, rel_tol=1e-14)


def test_singular_forward_area():
    with pytest.raises(LawEvaluationError):
        eval_loss(LawParams(), 0.0, 0.0, 0.0, 0.0)


def test_replay_law_example_matches_scalar_evaluation():
    p = LawParams.reference_replay_pt(beta=0.5)
    b = eval_loss(p, 8e-3, 0.0, 2e-3, 0.0, EvalContext(r_cpt=1.0, domain="pt"))
    shift = 0.276 * (1 - (1 + 99.35 * 2e-3) ** -0.5) * (1 - math.exp(-3.238))
    expected = 3.067 + 0.480 * (1e-2) ** -0.510 + shift
    assert math.isclose(b.total, expected, rel_tol=1e-12)
    assert abs(b.total - 8.1162) < 1e-3


@pytest.mark.parametrize("domain", ["pt", "cpt"])
def test_replay_without_cpt_data_has_no_shift(domain):
    p = LawParams.reference_replay_pt() if domain == "pt" else LawParams.reference_replay_cpt()
    b = eval_loss(p, 1.0, 0.1, 0.5, 0.05, EvalContext(r_cpt=0.0, domain=domain))
    assert b.shift == 0.0


def test_replay_cpt_domain_shift_lowers_loss():
    p = LawParams.reference_replay_cpt()
    b = eval_loss(p, 1.0, 0.1, 0.5, 0.0, EvalContext(r_cpt=0.5, domain="cpt"))
    assert b.shift < 0
    assert p.check_invariants("cpt") == []


@pytest.mark.parametrize("r_cpt", [0.0, 0.2, 0.999])
def test_mixture_needs_replay_terms(r_cpt):
    with pytest.raises(LawEvaluationError, match="replay terms"):
        eval_loss(LawParams(), 1.0, 0.1, 0.5, 0.05, EvalContext(r_cpt=r_cpt))
    assert np.isfinite(eval_loss(LawParams(), 1.0, 0.1, 0.5, 0.05, EvalContext(r_cpt=1.0)).total)


def test_check_invariants_flags_bad_constants():
    assert LawParams().check_invariants() == []
    problems = LawParams(A=-1.0, C2=-0.1, B=0.0).check_invariants()
    assert "A must be > 0" in problems
    assert "C2 must be >= 0" in problems
    assert "B must be > 0" in problems


def test_variants_reduce_to_base_law():
    rng = np.random.default_rng(11)
    n = 1000
    s1_pt = rng.uniform(0.01, 10.0, n)
    s2_pt = rng.uniform(-0.05, 0.5, n)
    s1_cpt = rng.uniform(0.0, 3.0, n)
    s2_cpt = rng.uniform(-0.05, 0.5, n)
    base = LawParams(B=0.0)
    ref = evaluate(base, s1_pt, s2_pt, s1_cpt, s2_cpt).total

    power = base.model_copy(update={"variant": "s2_power", "zeta1": 1.0, "zeta2": 1.0})
    np.testing.assert_allclose(evaluate(power, s1_pt, s2_pt, s1_cpt, s2_cpt).total, ref, rtol=1e-12)

    weighted = base.model_copy(update={"variant": "lr_weighted", "epsilon": 0.0})
    np.testing.assert_allclose(evaluate(weighted, s1_pt, s2_pt, s1_cpt, s2_cpt).total, ref, rtol=1e-12)

    sized = base.model_copy(update={"model_size": ModelSizeTerms()})
    np.testing.assert_allclose(
        evaluate(sized, s1_pt, s2_pt, s1_cpt, s2_cpt, N=rng.uniform(1e6, 1e9, n)).total, ref, rtol=1e-12
    )

    replay = base.model_copy(update={"replay": ReplayTerms(a1=0.0, a2=3.0)})
    np.testing.assert_allclose(evaluate(replay, s1_pt, s2_pt, s1_cpt, s2_cpt, r_cpt=0.0).total, ref, rtol=1e-12)


def test_constant_cpt_after_constant_pt_only_rises():
    s = concat_pt_cpt(constant_schedule(10_000, 2e-4), constant_schedule(500, 2e-4))
    curve = predict_curve(LawParams(), s)
    assert len(curve) == 500
    assert curve.steps[0] == 10_001
    assert np.all(np.diff(curve.loss) > 0)


def test_predict_curve_with_pt_steps():
    s = concat_pt_cpt(constant_schedule(100, 2e-4), constant_schedule(50, 1e-4))
    curve = predict_curve(LawParams(), s, include_pt=True)
    assert list(curve.steps) == list(range(1, 151))
    assert np.all(np.diff(curve.loss[:100]) < 0)


def test_params_json_round_trip():
    p = LawParams.reference_replay_cpt(beta=0.37)
    assert LawParams.model_validate_json(p.model_dump_json()) == p
