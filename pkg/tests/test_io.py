import io
import json

import numpy as np
import pytest

from cpt_law.errors import DataError, FormatVersionError
from cpt_law.fit import Dataset
from cpt_law.io import (
    RunManifest,
    dataset_from_manifests,
    dumps,
    load_fit_result,
    load_law_params,
    load_loss_log,
    load_manifests,
    load_schedule_spec,
    manifest_document,
    parse_manifest,
    run_from_manifest,
    write_dataset,
    write_json,
    write_loss_log,
)
from cpt_law.law import LawParams, LossSeries
from cpt_law.schedules import concat_pt_cpt, warmup_cosine_schedule, wsd_schedule
from cpt_law.synth import SynthSpec, generate


def _log(text):
    return load_loss_log(io.StringIO(text))


def test_loss_log_basic():
    log = _log("step,loss_pt\n1,3.5\n2,3.4\n")
    assert list(log) == ["loss_pt"]
    assert list(log["loss_pt"].steps) == [1, 2]
    assert list(log["loss_pt"].loss) == [3.5, 3.4]


def test_non_monotone_steps_report_row():
    with pytest.raises(DataError, match="rows 3"):
        _log("step,loss_pt\n2,3.5\n1,3.4\n")


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("step,loss_pt\n1,0\n", "positive"),
        ("step,loss_pt\n1,-2.0\n", "positive"),
        ("step,loss_pt\n1,abc\n", "malformed"),
        ("step,loss_pt\n1,inf\n", "non-finite"),
        ("step,loss_pt\n1,nan\n", "non-finite"),
        ("loss_pt\n3.5\n", "step"),
        ("step\n1\n", "no loss columns"),
        ("step,loss_pt\n", "no data rows"),
        ("", "empty"),
        ("step,loss_pt\n0,3.5\n", "positive integer"),
        ("step,loss_pt\n1.5,3.5\n", "positive integer"),
    ],
)
def test_loss_log_errors(text, fragment):
    with pytest.raises(DataError, match=fragment):
        _log(text)


def test_blank_cells_are_missing_points():
    log = _log("step,loss_pt,loss_cpt\n1,3.5,\n2,3.4,2.9\n3,,2.8\n")
    assert list(log["loss_pt"].steps) == [1, 2]
    assert list(log["loss_cpt"].steps) == [2, 3]


@pytest.mark.parametrize("seed", range(5))
def test_loss_log_round_trip_is_exact(tmp_path, seed):
    rng = np.random.default_rng(seed)
    steps = np.cumsum(rng.integers(1, 20, 300))
    keep = rng.random(300) < 0.7
    pt = LossSeries(steps, rng.uniform(1.0, 10.0, 300) * 10.0 ** rng.integers(-3, 4, 300))
    cpt = LossSeries(steps[keep], rng.uniform(2.0, 4.0, int(keep.sum())))
    path = write_loss_log(tmp_path / "log.csv", {"loss_pt": pt, "loss_cpt": cpt})
    log = load_loss_log(path)
    assert np.array_equal(log["loss_pt"].steps, pt.steps)
    assert np.array_equal(log["loss_pt"].loss, pt.loss)
    assert np.array_equal(log["loss_cpt"].steps, cpt.steps)
    assert np.array_equal(log["loss_cpt"].loss, cpt.loss)


def test_law_params_round_trip(tmp_path):
    p = LawParams.reference_replay_cpt(beta=0.4321)
    assert load_law_params(io.StringIO(dumps(p))) == p
    path = write_json(tmp_path / "nested" / "law.json", p)
    assert load_law_params(path) == p


def test_law_params_from_fit_report(short_schedules):
    from cpt_law.fit import FitConfig, fit

    dataset = generate(SynthSpec.from_schedules(list(short_schedules.values())[:1]))
    result = fit(dataset, FitConfig(n_starts=1, max_iterations=10, gradient="analytic"))
    assert load_law_params(io.StringIO(dumps(result))) == result.params
    assert load_fit_result(io.StringIO(dumps(result))) == result


def test_schedule_round_trip_is_bit_exact(tmp_path):
    s = concat_pt_cpt(wsd_schedule(36_000, 4_000, 3e-4), warmup_cosine_schedule(10_000, 3e-4, warmup_steps=500))
    path = write_json(tmp_path / "schedule.json", s.to_spec())
    again = load_schedule_spec(path).build()
    assert np.array_equal(again.etas, s.etas)
    assert again.boundary == 40_000


@pytest.mark.parametrize(
    "loader, payload",
    [
        (load_law_params, {"law_version": 2, "L0": 3.0}),
        (load_schedule_spec, {"format_version": 2, "etas": [1e-4]}),
        (load_fit_result, {"report_version": 9}),
    ],
)
def test_future_versions_rejected(loader, payload):
    with pytest.raises(FormatVersionError):
        loader(payload)


def test_invalid_documents_are_data_errors():
    with pytest.raises(DataError):
        load_law_params({"L0": "three"})
    with pytest.raises(DataError):
        load_schedule_spec(io.StringIO("{not json"))


def _write_run(tmp_path, log_text, boundary=0, name="run"):
    (tmp_path / f"{name}.json").write_text(json.dumps({"etas": [2e-4] * 10, "boundary": boundary}))
    (tmp_path / f"{name}.csv").write_text(log_text)
    return {"schedule_path": f"{name}.json", "losslog_path": f"{name}.csv"}


def test_manifest_missing_column(tmp_path):
    entry = _write_run(tmp_path, "step,loss_pt\n1,3.5\n2,3.4\n")
    entry["domains"] = {"loss_pt": "pt", "loss_math": "cpt"}
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(entry))
    (manifest,) = load_manifests(path)
    with pytest.raises(DataError, match="loss_math"):
        run_from_manifest(manifest)


def test_manifest_runs_and_relative_steps(tmp_path):
    a = _write_run(tmp_path, "step,loss_pt,loss_ood\n2,3.5,3.7\n4,3.4,3.6\n", boundary=0, name="a")
    a["domains"] = {"loss_pt": "pt", "loss_ood": "ood"}
    b = _write_run(tmp_path, "step,loss_cpt\n1,2.9\n3,2.8\n", boundary=6, name="b")
    b.update({"domains": {"loss_cpt": "cpt"}, "steps_relative_to_cpt": True, "lambda": 0.999, "r_cpt": 0.5})
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"format_version": 1, "runs": [a, b]}))

    manifests = load_manifests(path)
    assert manifests[0].schedule_path == str(tmp_path / "a.json")
    _, ood = run_from_manifest(manifests[0])
    assert list(ood) == ["loss_ood"]
    dataset = dataset_from_manifests(manifests)
    assert list(dataset.runs[1].observations["cpt"].steps) == [7, 9]
    assert dataset.runs[1].r_cpt == 0.5
    assert dataset.domains() == ["pt", "cpt"]


def test_manifest_document_round_trip(tmp_path):
    manifest = RunManifest(
        schedule_path="run.json",
        losslog_path="run.csv",
        lam=0.995,
        r_cpt=0.25,
        N=3.5e8,
        domains={"loss_pt": "pt", "loss_cpt": "cpt", "loss_code": "ood"},
        steps_relative_to_cpt=True,
    )
    document = manifest_document([manifest])
    assert document["runs"][0]["lambda"] == 0.995
    assert parse_manifest(document["runs"][0]) == manifest
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(document))
    (again,) = load_manifests(path)
    assert again == manifest.resolved(tmp_path)
    assert again.schedule_path == str(tmp_path / "run.json")


def test_manifests_must_agree_on_lambda(tmp_path):
    a = _write_run(tmp_path, "step,loss_pt\n1,3.5\n", name="a")
    manifests = [
        RunManifest(**a, domains={"loss_pt": "pt"}).resolved(tmp_path),
        RunManifest(**a, domains={"loss_pt": "pt"}, lam=0.99).resolved(tmp_path),
    ]
    with pytest.raises(DataError, match="lambda"):
        dataset_from_manifests(manifests)


def test_future_manifest_rejected(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"format_version": 3, "runs": []}))
    with pytest.raises(FormatVersionError):
        load_manifests(path)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dataset_round_trip(tmp_path, short_schedules, seed):
    spec = SynthSpec.from_schedules(
        list(short_schedules.values()),
        truth=LawParams.reference_replay_pt(),
        truth_cpt=LawParams.reference_replay_cpt(),
        noise_sigma=0.01,
        seed=seed,
        r_cpt=0.8,
    )
    dataset = generate(spec)
    paths = write_dataset(dataset, tmp_path / "data")
    assert paths[-1].endswith("manifest.json")
    again = dataset_from_manifests(load_manifests(paths[-1]))
    assert isinstance(again, Dataset) and len(again.runs) == len(dataset.runs)
    for old, new in zip(dataset.runs, again.runs):
        assert np.array_equal(old.schedule.etas, new.schedule.etas)
        assert old.schedule.boundary == new.schedule.boundary
        assert new.r_cpt == 0.8
        for domain in ("pt", "cpt"):
            assert np.array_equal(old.observations[domain].steps, new.observations[domain].steps)
            assert np.array_equal(old.observations[domain].loss, new.observations[domain].loss)
