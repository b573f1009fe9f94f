import warnings

import numpy as np
import pytest

from cpt_law.areas import areas_at_steps, compute_areas
from cpt_law.errors import DataError
from cpt_law.fit import (
    Dataset,
    FitConfig,
    FitResult,
    Run,
    _analytic_gradient,
    _build_problem,
    _initial_thetas,
    _objective,
    central_gradient,
    fit,
    fit_domains,
    goodness,
    holdout_error,
    huber,
    huber_objective,
    predict_observations,
    r_squared,
)
from cpt_law.law import LawParams, LossSeries, ModelSizeTerms, ReplayTerms, evaluate
from cpt_law.schedules import concat_pt_cpt, constant_schedule, warmup_cosine_schedule, wsd_schedule
from cpt_law.synth import SynthSpec, generate, sample_truth


def _two_point_run(params, residuals):
    schedule = concat_pt_cpt(constant_schedule(100, 2e-4), constant_schedule(100, 1e-4))
    placeholder = Run(schedule, {"pt": LossSeries([50, 150], [1.0, 1.0])})
    pred = predict_observations(params, placeholder, "pt")
    observed = pred * np.exp(-np.asarray(residuals))
    return Run(schedule, {"pt": LossSeries([50, 150], observed)})


def test_huber_branches():
    assert huber(np.array([1e-3]), 1e-3)[0] == pytest.approx(0.5e-6)
    np.testing.assert_allclose(huber(np.array([-0.01, 0.0, 0.0005]), 1e-3), [9.5e-6, 0.0, 1.25e-7])


def test_huber_objective_example():
    p = LawParams()
    dataset = Dataset([_two_point_run(p, [0.001, 0.01])])
    assert huber_objective(p, dataset, 1e-3) == pytest.approx(5e-6, rel=1e-9)


def test_huber_objective_is_zero_at_truth():
    p = LawParams()
    dataset = Dataset([_two_point_run(p, [0.0, 0.0])])
    assert huber_objective(p, dataset) == pytest.approx(0.0, abs=1e-20)


def test_nonpositive_observation_rejected():
    schedule = constant_schedule(10, 1e-4)
    dataset = Dataset([Run(schedule, {"pt": LossSeries([5, 10], [3.0, 0.0])})])
    with pytest.raises(DataError):
        huber_objective(LawParams(), dataset)
    with pytest.raises(DataError):
        fit(dataset, FitConfig(n_starts=1))


def test_steps_outside_schedule_rejected():
    with pytest.raises(DataError):
        Run(constant_schedule(10, 1e-4), {"pt": LossSeries([0, 5], [3.0, 3.0])})
    with pytest.raises(DataError):
        Run(constant_schedule(10, 1e-4), {"pt": LossSeries([5, 11], [3.0, 3.0])})


def test_too_few_observations():
    run = Run(constant_schedule(10, 1e-4), {"pt": LossSeries([2, 4, 6], [3.5, 3.4, 3.3])})
    with pytest.raises(DataError):
        fit(Dataset([run]), FitConfig(n_starts=1))


def test_free_s1_pt_requires_cpt_only_schedules(short_schedules):
    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values())))
    with pytest.raises(DataError):
        fit(dataset, FitConfig(n_starts=1, free_s1_pt=True))


def test_mixture_runs_need_replay_fit(short_schedules):
    spec = SynthSpec.from_schedules(
        list(short_schedules.values())[:1], truth=LawParams.reference_replay_pt(), r_cpt=0.5
    )
    with pytest.raises(DataError, match="replay"):
        fit(generate(spec), FitConfig(n_starts=1))


def test_noiseless_fit_recovers_curves(short_schedules, truth):
    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values()), truth=truth))
    result = fit(dataset, FitConfig(n_starts=16, gradient="analytic"))
    for run in dataset.runs:
        assert holdout_error(result, run) < 1e-4
    assert result.objective == huber_objective(result.params_by_domain, dataset, 1e-3)
    finite = [v for v in result.start_objectives if v is not None]
    assert result.objective <= min(finite) * (1 + 1e-9) + 1e-18
    assert result.start_objectives[result.start_index] == min(finite)
    assert result.r_squared["pt"] > 0.999999


@pytest.mark.parametrize("seed", range(6))
def test_random_truth_recovery_and_held_out_prediction(short_schedules, seed):
    order = ["wsd_cosine", "const_wsd", "const_const", "wsd_cosine_long"]
    spec = SynthSpec.from_schedules([short_schedules[k] for k in order], truth=sample_truth(seed), stride=20)
    dataset = generate(spec)
    train = Dataset(dataset.runs[:3], lam=dataset.lam)
    result = fit(train, FitConfig(n_starts=16, gradient="analytic", seed=seed))
    for run in train.runs:
        assert holdout_error(result, run) < 1e-4
    assert holdout_error(result, dataset.runs[3]) < 1e-3


def test_noisy_fit_quality(short_schedules, truth):
    spec = SynthSpec.from_schedules(list(short_schedules.values()), truth=truth, noise_sigma=0.005, seed=3)
    result = fit(generate(spec), FitConfig(n_starts=8, gradient="analytic"))
    assert result.huber_per_domain["pt"] <= 0.003
    assert result.r_squared["pt"] >= 0.99


def test_fit_is_deterministic_across_worker_counts(short_schedules):
    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values())[:2], noise_sigma=0.002))
    base = FitConfig(n_starts=4, max_iterations=50, seed=9, gradient="analytic")
    a = fit(dataset, base.model_copy(update={"workers": 1}))
    b = fit(dataset, base.model_copy(update={"workers": 2}))
    c = fit(dataset, base.model_copy(update={"workers": 1}))
    assert a.params == b.params == c.params
    assert a.objective == b.objective
    assert a.start_objectives == b.start_objectives
    assert a.model_dump_json() == c.model_dump_json()


def _gradient_dataset(**spec_kwargs):
    schedules = [
        concat_pt_cpt(wsd_schedule(300, 100, 2e-4), warmup_cosine_schedule(200, 2e-4, warmup_steps=20)),
        concat_pt_cpt(constant_schedule(400, 2e-4), constant_schedule(200, 1e-4)),
    ]
    return generate(SynthSpec.from_schedules(schedules, stride=20, **spec_kwargs))


@pytest.mark.parametrize(
    "config, spec_kwargs, n_points",
    [
        (FitConfig(), {}, 100),
        (FitConfig(variant="s2_power"), {}, 20),
        (FitConfig(variant="lr_weighted", epsilon=0.2), {}, 20),
        (FitConfig(replay=True), {"truth": LawParams.reference_replay_pt(), "r_cpt": 0.7}, 20),
        (
            FitConfig(model_size=True),
            {"truth": LawParams(model_size=ModelSizeTerms(gamma1=0.1, gamma2=0.05, gamma3=0.2, F=0.5)), "N": 3.0},
            20,
        ),
        (
            FitConfig(joint=True, replay=True),
            {
                "truth": LawParams(replay=ReplayTerms(a1=0.05, a2=3.0)),
                "truth_cpt": LawParams(L0=2.9, B=-0.4, replay=ReplayTerms(a1=0.04, a2=5.0)),
                "r_cpt": 0.6,
            },
            20,
        ),
    ],
)
def test_analytic_gradient_matches_central_differences(config, spec_kwargs, n_points):
    dataset = _gradient_dataset(**spec_kwargs)
    problem = _build_problem(dataset, config)
    thetas = _initial_thetas(problem, config.model_copy(update={"n_starts": n_points, "seed": 42}))
    for theta in thetas:
        if not np.isfinite(_objective(theta, problem)):
            continue
        analytic = _analytic_gradient(theta, problem)
        numeric = central_gradient(lambda t: _objective(t, problem), theta)
        scale = max(float(np.linalg.norm(numeric)), 1e-12)
        assert np.linalg.norm(analytic - numeric) / scale < 1e-4


def test_extreme_parameters_stay_silent(short_schedules):
    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values())[:1]))
    problem = _build_problem(dataset, FitConfig())
    theta = np.full(len(problem.slots), 800.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        assert _objective(theta, problem) == float("inf")
        assert np.all(_analytic_gradient(theta, problem) == 0.0)


def test_free_s1_pt_gradient():
    hidden, truth = 2.0, LawParams(C1=0.0)
    schedule = warmup_cosine_schedule(300, 2e-4, warmup_steps=20)
    steps = np.arange(10, 301, 10)
    a = areas_at_steps(compute_areas(schedule), steps)
    loss = evaluate(truth, a[0] + hidden, a[1], a[2], a[3]).total
    dataset = Dataset([Run(schedule, {"pt": LossSeries(steps, loss)})])
    config = FitConfig(free_s1_pt=True, n_starts=10, seed=1)
    problem = _build_problem(dataset, config)
    assert [s.name for s in problem.slots][-1] == "s1_pt"
    assert "C1" not in [s.name for s in problem.slots]
    for theta in _initial_thetas(problem, config):
        analytic = _analytic_gradient(theta, problem)
        numeric = central_gradient(lambda t: _objective(t, problem), theta)
        assert np.linalg.norm(analytic - numeric) / max(float(np.linalg.norm(numeric)), 1e-12) < 1e-4


def _cpt_only_run(schedule, truth, hidden, stride, sigma=0.0, rng=None):
    steps = np.arange(stride, len(schedule) + 1, stride)
    a = areas_at_steps(compute_areas(schedule), steps)
    loss = np.asarray(evaluate(truth, a[0] + hidden, a[1], a[2], a[3]).total)
    if sigma > 0:
        loss = loss * np.exp(sigma * rng.standard_normal(loss.size))
    return Run(schedule, {"pt": LossSeries(steps, loss)})


def test_free_s1_pt_predicts_held_out_schedule():
    truth, hidden, sigma = LawParams(C1=0.0), 2.0, 0.002
    rng = np.random.default_rng(1)
    train = [
        warmup_cosine_schedule(500, 2e-4, warmup_steps=25),
        wsd_schedule(400, 100, 2e-4),
        constant_schedule(500, 1e-4),
    ]
    dataset = Dataset([_cpt_only_run(s, truth, hidden, 5, sigma, rng) for s in train])
    result = fit(dataset, FitConfig(free_s1_pt=True, n_starts=16, gradient="analytic"))
    assert result.fitted_s1_pt is not None and result.fitted_s1_pt > 0

    held_out = _cpt_only_run(warmup_cosine_schedule(800, 2e-4, warmup_steps=40), truth, hidden, 5)
    observed = held_out.observations["pt"].loss
    assert holdout_error(result, held_out) <= 2 * sigma * float(observed.max())


def test_fit_both_domains(short_schedules):
    spec = SynthSpec.from_schedules(
        list(short_schedules.values()), truth_cpt=LawParams(L0=2.9, C2=0.35, B=0.15), noise_sigma=0.001
    )
    dataset = generate(spec)
    config = FitConfig(n_starts=2, max_iterations=30, gradient="analytic")
    results = fit_domains(dataset, config)
    assert set(results) == {"pt", "cpt"}
    assert results["cpt"].params_by_domain.keys() == {"cpt"}

    joint = fit(dataset, config.model_copy(update={"joint": True}))
    pt, cpt = joint.params_by_domain["pt"], joint.params_by_domain["cpt"]
    assert (pt.L0, pt.A, pt.alpha) == (cpt.L0, cpt.A, cpt.alpha)
    assert set(joint.r_squared) == {"pt", "cpt"}


def test_goodness_of_exact_law(short_schedules, truth):
    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values()), truth=truth))
    result = FitResult(params=truth, params_by_domain={"pt": truth}, objective=0.0, start_index=0, converged=True)
    scores = goodness(result, dataset)
    assert scores["pt"].r_squared == 1.0
    assert scores["pt"].huber == 0.0


def test_r_squared():
    y = np.array([3.0, 2.5, 2.0, 2.2])
    assert r_squared(y, y) == 1.0
    assert r_squared(y, np.full(4, y.mean())) == 0.0


def test_goodness_needs_two_observations():
    run = Run(constant_schedule(10, 1e-4), {"pt": LossSeries([5], [3.0])})
    result = FitResult(params=LawParams(), params_by_domain={"pt": LawParams()}, objective=0.0, start_index=0, converged=True)
    with pytest.raises(ValueError):
        goodness(result, Dataset([run]))


def test_fit_result_round_trip(short_schedules):
    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values())[:1]))
    result = fit(dataset, FitConfig(n_starts=1, max_iterations=20, gradient="analytic"))
    assert FitResult.model_validate_json(result.model_dump_json()) == result
