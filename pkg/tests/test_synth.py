import numpy as np
import pytest

from cpt_law.law import EvalContext, LawParams, predict_curve
from cpt_law.schedules import concat_pt_cpt, constant_schedule
from cpt_law.synth import SynthSpec, demo_schedules, generate, sample_steps, sample_truth


def test_noiseless_data_matches_law(short_schedules):
    truth = LawParams()
    truth_cpt = LawParams(L0=2.9, B=0.1, C2=0.35)
    spec = SynthSpec.from_schedules(list(short_schedules.values()), truth=truth, truth_cpt=truth_cpt, stride=7)
    dataset = generate(spec)
    for run in dataset.runs:
        pt = run.observations["pt"]
        expected = predict_curve(truth, run.schedule, include_pt=True).at(pt.steps)
        np.testing.assert_allclose(pt.loss, expected.loss, rtol=1e-13)
        cpt = run.observations["cpt"]
        assert cpt.steps.min() > run.schedule.boundary
        expected = predict_curve(truth_cpt, run.schedule, ctx=EvalContext(domain="cpt")).at(cpt.steps)
        np.testing.assert_allclose(cpt.loss, expected.loss, rtol=1e-13)


def test_seeded_noise_is_reproducible(short_schedules):
    spec = SynthSpec.from_schedules(list(short_schedules.values()), noise_sigma=0.01, seed=5)
    a, b = generate(spec), generate(spec)
    c = generate(spec.model_copy(update={"seed": 6}))
    for ra, rb, rc in zip(a.runs, b.runs, c.runs):
        assert np.array_equal(ra.observations["pt"].loss, rb.observations["pt"].loss)
        assert not np.array_equal(ra.observations["pt"].loss, rc.observations["pt"].loss)


def test_no_shift_means_no_rise_on_constant_cpt():
    s = concat_pt_cpt(constant_schedule(1000, 2e-4), constant_schedule(500, 2e-4))
    dataset = generate(SynthSpec.from_schedules([s], truth=LawParams(B=0.0), stride=1))
    series = dataset.runs[0].observations["pt"]
    cpt_part = series.loss[series.steps > 1000]
    assert np.all(np.diff(cpt_part) <= 0)


def test_noise_is_unbiased_in_log_space():
    s = constant_schedule(100_000, 2e-4)
    sigma = 0.01
    clean = generate(SynthSpec.from_schedules([s], stride=1)).runs[0].observations["pt"]
    noisy = generate(SynthSpec.from_schedules([s], stride=1, noise_sigma=sigma, seed=3)).runs[0].observations["pt"]
    log_ratio = np.log(noisy.loss / clean.loss)
    assert abs(log_ratio.mean()) < 3 * sigma / np.sqrt(log_ratio.size)
    assert abs(log_ratio.std() - sigma) < 0.05 * sigma


def test_empty_spec_rejected():
    with pytest.raises(ValueError):
        generate(SynthSpec())


def test_sample_steps():
    s = concat_pt_cpt(constant_schedule(20, 1e-4), constant_schedule(10, 1e-4))
    assert list(sample_steps(s, 5, "pt")) == [5, 10, 15, 20, 25, 30]
    assert list(sample_steps(s, 5, "cpt")) == [25, 30]


def test_sample_truth_is_valid_and_seeded():
    for seed in range(20):
        p = sample_truth(seed)
        assert p.check_invariants() == []
        assert p == sample_truth(seed)


def test_demo_schedules_families():
    scheds = demo_schedules(pt_steps=400, cpt_steps=200)
    assert set(scheds) == {"wsd_cosine", "const_wsd", "const_const", "wsd_cosine_long"}
    assert all(s.boundary == 400 for s in scheds.values())
    assert len(scheds["wsd_cosine_long"]) == 800
