"""Loss-log CSV and JSON document formats.

Loss logs are CSV with a ``step`` column and one column per validation
domain; a blank cell means the domain was not evaluated at that step.
Structured documents (schedules, law parameters, reports, manifests) are
JSON carrying a format version that is checked before validation.
"""
from __future__ import annotations

import json
import math
import logging
import os
from pathlib import Path
from typing import IO, Any, Dict, Iterable, List, Literal, Mapping, Optional, Tuple, Type, TypeVar, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import DEFAULT_LAMBDA
from .errors import DataError, FormatVersionError
from .fit import FIT_REPORT_VERSION, Dataset, FitResult, Run
from .hpopt import OPTIMUM_REPORT_VERSION, OptimumReport
from .law import LAW_VERSION, LawParams, LossSeries
from .ood import OOD_REPORT_VERSION, OodCoeffs
from .schedules import SCHEDULE_FORMAT_VERSION, ScheduleSpec
from .synth import SynthSpec


logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
FLOAT_FORMAT = "%.17g"

PathLike = Union[str, "os.PathLike[str]"]
Source = Union[PathLike, IO[str], IO[bytes]]
Role = Literal["pt", "cpt", "ood"]
M = TypeVar("M", bound=BaseModel)


# ---------------------------------------------------------------------------
# Loss logs


def load_loss_log(source: Source) -> Dict[str, LossSeries]:
    """Parse a loss-log CSV into one series per loss column.

    Row numbers in error messages count the header as row 1.
    """
    try:
        df = pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise DataError("loss log is empty (missing header)") from exc
    except pd.errors.ParserError as exc:
        raise DataError(f"malformed loss log: {exc}") from exc
    df.columns = [str(c).strip() for c in df.columns]
    if "step" not in df.columns:
        raise DataError(f"loss log header must contain a 'step' column, got {list(df.columns)}")
    loss_cols = [c for c in df.columns if c != "step"]
    if not loss_cols:
        raise DataError("loss log has no loss columns")
    if df.empty:
        raise DataError("loss log has no data rows")
    rows = np.arange(2, len(df) + 2)

    steps = pd.to_numeric(df["step"].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(steps) | (steps != np.round(steps)) | (steps < 1)
    if np.any(bad):
        raise DataError(f"step must be a positive integer (rows {_rows(rows[bad])})")
    steps = steps.astype(np.int64)
    nonmono = np.flatnonzero(np.diff(steps) <= 0) + 1
    if nonmono.size:
        raise DataError(f"steps must be strictly increasing (rows {_rows(rows[nonmono])})")

    out: Dict[str, LossSeries] = {}
    for col in loss_cols:
        text = df[col].str.strip()
        present = (text != "").to_numpy()
        values = text.where(present, "nan").map(_to_float).to_numpy(dtype=np.float64)
        malformed = present & np.isnan(values) & ~text.str.lower().isin(["nan", "+nan", "-nan"]).to_numpy()
        if np.any(malformed):
            raise DataError(f"column '{col}': malformed value (rows {_rows(rows[malformed])})")
        nonfinite = present & ~np.isfinite(values)
        if np.any(nonfinite):
            raise DataError(f"column '{col}': non-finite loss (rows {_rows(rows[nonfinite])})")
        nonpos = present & (values <= 0)
        if np.any(nonpos):
            raise DataError(f"column '{col}': loss must be positive (rows {_rows(rows[nonpos])})")
        out[col] = LossSeries(steps[present], values[present], col)
    return out


def _to_float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        return math.nan


def _rows(rows: Iterable[int], limit: int = 10) -> str:
    rows = [int(r) for r in rows]
    text = ", ".join(str(r) for r in rows[:limit])
    return text + (f", ... ({len(rows)} total)" if len(rows) > limit else "")


def loss_log_frame(series: Mapping[str, LossSeries]) -> pd.DataFrame:
    frames = [pd.Series(s.loss, index=pd.Index(s.steps, name="step"), name=col) for col, s in series.items()]
    if not frames:
        raise ValueError("no series to write")
    return pd.concat(frames, axis=1).sort_index().reset_index()


def write_loss_log(path: PathLike, series: Mapping[str, LossSeries]) -> str:
    return write_frame(path, loss_log_frame(series))


def write_frame(path: PathLike, df: pd.DataFrame) -> str:
    _ensure_parent(path)
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return os.path.abspath(path)


def write_series(path: PathLike, series: LossSeries, column: str = "loss") -> str:
    return write_frame(path, pd.DataFrame({"step": series.steps, column: series.loss}))


# ---------------------------------------------------------------------------
# JSON documents


def read_json(source: Union[Source, Mapping[str, Any]]) -> Any:
    if isinstance(source, Mapping):
        return dict(source)
    try:
        if hasattr(source, "read"):
            return json.load(source)  # type: ignore[arg-type]
        with open(source, "r", encoding="utf-8") as fp:
            return json.load(fp)
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON: {exc}") from exc


def _check_version(data: Any, key: str, supported: int, kind: str) -> None:
    if not isinstance(data, dict) or key not in data:
        return
    try:
        found = int(data[key])
    except (TypeError, ValueError) as exc:
        raise DataError(f"{kind} {key} must be an integer, got {data[key]!r}") from exc
    if found > supported:
        raise FormatVersionError(kind, found, supported)


def _validate(model: Type[M], data: Any, kind: str) -> M:
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        raise DataError(f"invalid {kind}: {exc}") from exc


def parse_document(model: Type[M], data: Any, key: str, supported: int, kind: str) -> M:
    _check_version(data, key, supported, kind)
    return _validate(model, data, kind)


def load_schedule_spec(source: Union[Source, Mapping[str, Any]]) -> ScheduleSpec:
    return parse_document(ScheduleSpec, read_json(source), "format_version", SCHEDULE_FORMAT_VERSION, "schedule")


def load_law_params(source: Union[Source, Mapping[str, Any]], domain: Optional[str] = None) -> LawParams:
    """LawParams JSON, or the parameters inside a fit report (``domain`` picks a joint fit's set)."""
    data = read_json(source)
    if isinstance(data, dict) and "params" in data and "law_version" not in data:
        _check_version(data, "report_version", FIT_REPORT_VERSION, "fit report")
        by_domain = data.get("params_by_domain") or {}
        data = by_domain[domain] if domain in by_domain else data["params"]
    return parse_document(LawParams, data, "law_version", LAW_VERSION, "law parameters")


def load_fit_result(source: Union[Source, Mapping[str, Any]]) -> FitResult:
    return parse_document(FitResult, read_json(source), "report_version", FIT_REPORT_VERSION, "fit report")


def load_optimum_report(source: Union[Source, Mapping[str, Any]]) -> OptimumReport:
    return parse_document(OptimumReport, read_json(source), "report_version", OPTIMUM_REPORT_VERSION, "optimum report")


def load_ood_coeffs(source: Union[Source, Mapping[str, Any]]) -> OodCoeffs:
    return parse_document(OodCoeffs, read_json(source), "report_version", OOD_REPORT_VERSION, "OOD coefficients")


def load_synth_spec(source: Union[Source, Mapping[str, Any]]) -> SynthSpec:
    return _validate(SynthSpec, read_json(source), "synth spec")


def dumps(model: BaseModel) -> str:
    return model.model_dump_json(indent=2, by_alias=True)


def write_json(path: PathLike, model: BaseModel) -> str:
    _ensure_parent(path)
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(dumps(model))
        fp.write("\n")
    return os.path.abspath(path)


def _ensure_parent(path: PathLike) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


# ---------------------------------------------------------------------------
# Run manifests


class RunManifest(BaseModel):
    """One training run: schedule file, loss log, and how the log's columns map to domains."""

    model_config = ConfigDict(populate_by_name=True)

    format_version: int = Field(MANIFEST_VERSION, ge=1, le=MANIFEST_VERSION)
    schedule_path: str
    losslog_path: str
    lam: float = Field(DEFAULT_LAMBDA, alias="lambda", gt=0.0, lt=1.0)
    r_cpt: float = Field(1.0, ge=0.0, le=1.0)
    N: Optional[float] = Field(None, gt=0.0)
    domains: Dict[str, Role] = Field(..., description="Loss-log column -> pt / cpt / ood")
    steps_relative_to_cpt: bool = Field(False, description="Log steps restart at 1 at the first CPT step")

    def validate_against(self, columns: Iterable[str]) -> None:
        columns = set(columns)
        missing = [c for c in self.domains if c not in columns]
        if missing:
            raise DataError(f"loss log {self.losslog_path} has no column(s) {', '.join(missing)}")

    def columns_for(self, role: Role) -> List[str]:
        return [c for c, r in self.domains.items() if r == role]

    def resolved(self, base_dir: PathLike) -> "RunManifest":
        def _abs(p: str) -> str:
            return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

        return self.model_copy(
            update={"schedule_path": _abs(self.schedule_path), "losslog_path": _abs(self.losslog_path)}
        )


def parse_manifest(data: Mapping[str, Any]) -> RunManifest:
    return parse_document(RunManifest, dict(data), "format_version", MANIFEST_VERSION, "manifest")


def load_manifests(path: PathLike) -> List[RunManifest]:
    """A single manifest or ``{"runs": [...]}``; relative paths resolve against the file's directory."""
    data = read_json(path)
    base = os.path.dirname(os.path.abspath(path))
    if isinstance(data, dict) and "runs" in data:
        _check_version(data, "format_version", MANIFEST_VERSION, "manifest")
        entries = data["runs"]
        if not isinstance(entries, list) or not entries:
            raise DataError("manifest 'runs' must be a nonempty list")
    else:
        entries = [data]
    return [parse_manifest(e).resolved(base) for e in entries]


def manifest_document(manifests: List[RunManifest]) -> Dict[str, Any]:
    return {
        "format_version": MANIFEST_VERSION,
        "runs": [m.model_dump(mode="json", by_alias=True) for m in manifests],
    }


def run_from_manifest(manifest: RunManifest) -> Tuple[Run, Dict[str, LossSeries]]:
    """The fitting run plus any OOD-role series of the same log."""
    schedule = load_schedule_spec(manifest.schedule_path).build()
    log = load_loss_log(manifest.losslog_path)
    manifest.validate_against(log)
    offset = schedule.boundary if manifest.steps_relative_to_cpt else 0
    observations: Dict[str, LossSeries] = {}
    ood: Dict[str, LossSeries] = {}
    for column, role in manifest.domains.items():
        series = log[column]
        shifted = LossSeries(series.steps + offset, series.loss, role if role != "ood" else column)
        if role == "ood":
            ood[column] = shifted
            continue
        if role in observations:
            raise DataError(f"manifest maps more than one column to domain '{role}'")
        observations[role] = shifted
    run = Run(schedule=schedule, observations=observations, r_cpt=manifest.r_cpt, N=manifest.N)
    return run, ood


def dataset_from_manifests(manifests: List[RunManifest]) -> Dataset:
    if not manifests:
        raise DataError("no run manifests given")
    lams = {m.lam for m in manifests}
    if len(lams) > 1:
        raise DataError(f"runs disagree on lambda: {sorted(lams)}")
    runs = [run_from_manifest(m)[0] for m in manifests]
    logger.info("loaded %d runs (%d observations)", len(runs), sum(len(s) for r in runs for s in r.observations.values()))
    return Dataset(runs=runs, lam=manifests[0].lam)


def write_dataset(dataset: Dataset, out_dir: PathLike) -> List[str]:
    """Schedule JSON + loss-log CSV per run and a manifest.json tying them together."""
    os.makedirs(out_dir, exist_ok=True)
    manifests: List[RunManifest] = []
    paths: List[str] = []
    for i, run in enumerate(dataset.runs):
        sched_name, log_name = f"schedule_{i:03d}.json", f"losslog_{i:03d}.csv"
        paths.append(write_json(Path(out_dir) / sched_name, run.schedule.to_spec()))
        columns = {f"loss_{d}": s for d, s in run.observations.items()}
        paths.append(write_loss_log(Path(out_dir) / log_name, columns))
        manifests.append(
            RunManifest(
                schedule_path=sched_name,
                losslog_path=log_name,
                lam=dataset.lam,
                r_cpt=run.r_cpt,
                N=run.N,
                domains={c: d for c, d in zip(columns, run.observations)},
            )
        )
    manifest_path = Path(out_dir) / "manifest.json"
    with open(manifest_path, "w", encoding="utf-8") as fp:
        json.dump(manifest_document(manifests), fp, indent=2)
        fp.write("\n")
    paths.append(os.path.abspath(manifest_path))
    return paths
