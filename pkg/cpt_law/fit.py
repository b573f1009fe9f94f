"""Fit law parameters to observed loss curves.

Huber loss on log-loss residuals, minimised with L-BFGS-B from many seeded
initial conditions; the best start wins (ties go to the lowest start index).
Parameters are optimised in a transformed space: positive constants in log
space, signed ones as-is.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import minimize

from .areas import areas_at_steps, compute_areas
from .config import (
    DEFAULT_HUBER_DELTA,
    DEFAULT_LAMBDA,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_N_STARTS,
    DEFAULT_SEED,
    worker_count,
)
from .errors import DataError, FitDivergenceError
from .law import (
    Domain,
    LawParams,
    LossSeries,
    ModelSizeTerms,
    ReplayTerms,
    Variant,
    evaluate,
    replay_factors,
    signed_power,
)
from .schedules import Schedule


logger = logging.getLogger(__name__)

FIT_REPORT_VERSION = 1
MIN_OBS_PER_PARAM = 8
_LOSS_FLOOR = 1e-10


@dataclass(frozen=True, eq=False)
class Run:
    schedule: Schedule
    observations: Dict[str, LossSeries]
    r_cpt: float = 1.0
    N: Optional[float] = None

    def __post_init__(self) -> None:
        for name, series in self.observations.items():
            if len(series) and (series.steps.min() < 1 or series.steps.max() > len(self.schedule)):
                raise DataError(
                    f"observation steps for '{name}' must lie in [1, {len(self.schedule)}]"
                )
        if not 0.0 <= self.r_cpt <= 1.0:
            raise DataError(f"r_cpt must lie in [0, 1], got {self.r_cpt}")


@dataclass(frozen=True, eq=False)
class Dataset:
    runs: List[Run]
    lam: float = DEFAULT_LAMBDA

    def domains(self) -> List[str]:
        seen: List[str] = []
        for run in self.runs:
            for name in run.observations:
                if name not in seen:
                    seen.append(name)
        return seen

    def n_observations(self, domain: Optional[str] = None) -> int:
        return sum(
            len(series)
            for run in self.runs
            for name, series in run.observations.items()
            if domain is None or name == domain
        )


class FitConfig(BaseModel):
    huber_delta: float = Field(DEFAULT_HUBER_DELTA, gt=0.0)
    n_starts: int = Field(DEFAULT_N_STARTS, ge=1)
    max_iterations: int = Field(DEFAULT_MAX_ITERATIONS, ge=1)
    seed: int = DEFAULT_SEED
    free_s1_pt: bool = Field(False, description="Fit S1_pt as an unknown (PT schedule not available)")
    variant: Variant = "base"
    epsilon: float = Field(0.0, description="Fixed LR-weight exponent for the lr_weighted variant")
    replay: bool = False
    model_size: bool = False
    gradient: Literal["numeric-central", "analytic"] = "numeric-central"
    domain: Domain = "pt"
    joint: bool = Field(False, description="Share L0, A, alpha between the pt and cpt domains")
    workers: Optional[int] = Field(None, ge=1)


class DomainGoodness(BaseModel):
    huber: float
    r_squared: float


class FitResult(BaseModel):
    report_version: int = Field(FIT_REPORT_VERSION, ge=1, le=FIT_REPORT_VERSION)
    params: LawParams
    params_by_domain: Dict[str, LawParams]
    objective: float
    r_squared: Dict[str, float] = Field(default_factory=dict)
    huber_per_domain: Dict[str, float] = Field(default_factory=dict)
    start_index: int
    converged: bool
    fitted_s1_pt: Optional[float] = None
    start_objectives: List[Optional[float]] = Field(default_factory=list)
    n_observations: int = 0
    config: FitConfig = Field(default_factory=FitConfig)


def huber(residuals: np.ndarray, delta: float) -> np.ndarray:
    abs_r = np.abs(residuals)
    return np.where(abs_r <= delta, 0.5 * residuals**2, delta * (abs_r - 0.5 * delta))


# ---------------------------------------------------------------------------
# Problem assembly


@dataclass(frozen=True)
class _Slot:
    key: str  # domain name, "shared" or "global"
    name: str
    log: bool
    init: Tuple[float, float]


@dataclass(eq=False)
class _Group:
    domain: str
    s1_pt: np.ndarray
    s2_pt: np.ndarray
    s1_cpt: np.ndarray
    s2_cpt: np.ndarray
    r_cpt: np.ndarray
    N: np.ndarray
    log_obs: np.ndarray


@dataclass(eq=False)
class _Problem:
    groups: List[_Group]
    slots: List[_Slot]
    domains: List[str]
    delta: float
    variant: Variant
    epsilon: float
    replay: bool
    model_size: bool
    free_s1_pt: bool
    n_total: int = field(init=False)

    def __post_init__(self) -> None:
        self.n_total = int(sum(g.log_obs.size for g in self.groups))


_INIT_RANGES: Dict[str, Tuple[float, float]] = {
    "L0": (1.0, 5.0),
    "A": (0.1, 2.0),
    "alpha": (0.1, 1.0),
    "C1": (0.01, 1.0),
    "C2": (0.01, 1.0),
    "B": (0.01, 1.0),
    "E": (1.0, 1000.0),
    "beta": (0.1, 2.0),
    "zeta1": (0.5, 2.0),
    "zeta2": (0.5, 2.0),
    "a1": (-0.5, 0.5),
    "a2": (0.1, 10.0),
    "gamma1": (-0.3, 0.3),
    "gamma2": (-0.3, 0.3),
    "gamma3": (0.05, 0.5),
    "F": (0.1, 10.0),
    "s1_pt": (0.1, 100.0),
}
_SIGNED = {"a1", "gamma1", "gamma2"}


def _slot(key: str, name: str, config: FitConfig) -> _Slot:
    log = name not in _SIGNED
    init = _INIT_RANGES[name]
    if name == "B" and config.replay and key == "cpt":
        # D_cpt shift coefficient of the replay law is fitted signed.
        log, init = False, (-1.0, 1.0)
    return _Slot(key=key, name=name, log=log, init=init)


def _layout(config: FitConfig, domains: Sequence[str]) -> List[_Slot]:
    per_domain = ["C1", "C2", "B", "E", "beta"]
    if config.free_s1_pt:
        # The constant C1 * S2_pt folds into L0 when the PT schedule is unknown.
        per_domain.remove("C1")
    if config.variant == "s2_power":
        per_domain += ["zeta1", "zeta2"]
    if config.replay:
        per_domain += ["a1", "a2"]
    if config.model_size:
        per_domain += ["gamma1", "gamma2", "gamma3", "F"]
    head = ["L0", "A", "alpha"]
    slots: List[_Slot] = []
    if config.joint:
        slots += [_slot("shared", n, config) for n in head]
        for d in domains:
            slots += [_slot(d, n, config) for n in per_domain]
    else:
        for d in domains:
            slots += [_slot(d, n, config) for n in head + per_domain]
    if config.free_s1_pt:
        slots.append(_slot("global", "s1_pt", config))
    return slots


def _groups(dataset: Dataset, domains: Sequence[str], epsilon: float) -> List[_Group]:
    parts: Dict[str, List[Tuple[np.ndarray, ...]]] = {d: [] for d in domains}
    for run in dataset.runs:
        present = [d for d in domains if d in run.observations and len(run.observations[d])]
        if not present:
            continue
        trace = compute_areas(run.schedule, dataset.lam, lr_weight_epsilon=epsilon)
        for d in present:
            series = run.observations[d]
            if np.any(~np.isfinite(series.loss)) or np.any(series.loss <= 0):
                raise DataError(f"observed losses for '{d}' must be finite and positive")
            s1_pt, s2_pt, s1_cpt, s2_cpt = areas_at_steps(trace, series.steps)
            n = len(series)
            N = run.N if run.N is not None else 1.0
            parts[d].append(
                (s1_pt, s2_pt, s1_cpt, s2_cpt, np.full(n, run.r_cpt), np.full(n, N), np.log(series.loss))
            )
    groups = []
    for d in domains:
        if not parts[d]:
            continue
        cols = [np.concatenate(c) for c in zip(*parts[d])]
        groups.append(_Group(d, *cols))
    return groups


def _build_problem(dataset: Dataset, config: FitConfig) -> _Problem:
    if not dataset.runs:
        raise DataError("dataset has no runs")
    if config.free_s1_pt and any(run.schedule.boundary != 0 for run in dataset.runs):
        raise DataError("free_s1_pt expects CPT-only schedules (boundary 0)")
    if not config.replay and any(run.r_cpt < 1.0 for run in dataset.runs):
        raise DataError("runs with r_cpt < 1 need a replay fit (replay=true)")
    domains = [d for d in ("pt", "cpt") if d in dataset.domains()] if config.joint else [config.domain]
    if config.joint and len(domains) < 2:
        raise DataError("joint fitting needs observations for both 'pt' and 'cpt'")
    epsilon = config.epsilon if config.variant == "lr_weighted" else 0.0
    groups = _groups(dataset, domains, epsilon)
    if not groups:
        raise DataError(f"dataset has no observations for domain(s) {domains}")
    slots = _layout(config, domains)
    problem = _Problem(
        groups=groups,
        slots=slots,
        domains=domains,
        delta=config.huber_delta,
        variant=config.variant,
        epsilon=epsilon,
        replay=config.replay,
        model_size=config.model_size,
        free_s1_pt=config.free_s1_pt,
    )
    if problem.n_total < len(slots):
        raise DataError(f"{problem.n_total} observations cannot determine {len(slots)} parameters")
    if problem.n_total < MIN_OBS_PER_PARAM * len(slots):
        logger.warning(
            "only %d observations for %d parameters (recommended at least %d)",
            problem.n_total, len(slots), MIN_OBS_PER_PARAM * len(slots),
        )
    return problem


# ---------------------------------------------------------------------------
# Parameter mapping


def _values(theta: np.ndarray, problem: _Problem) -> List[float]:
    return [float(np.exp(t)) if s.log else float(t) for s, t in zip(problem.slots, theta)]


def _domain_values(values: Sequence[float], problem: _Problem, domain: str) -> Dict[str, float]:
    return {s.name: v for s, v in zip(problem.slots, values) if s.key in (domain, "shared", "global")}


def _law_params(v: Mapping[str, float], problem: _Problem) -> LawParams:
    kw = dict(
        L0=v["L0"], A=v["A"], alpha=v["alpha"], C1=v.get("C1", 0.0), C2=v["C2"],
        B=v["B"], E=v["E"], beta=v["beta"], variant=problem.variant,
    )
    if problem.variant == "lr_weighted":
        kw["epsilon"] = problem.epsilon
    if problem.variant == "s2_power":
        kw.update(zeta1=v["zeta1"], zeta2=v["zeta2"])
    if problem.replay:
        kw["replay"] = ReplayTerms(a1=v["a1"], a2=v["a2"])
    if problem.model_size:
        kw["model_size"] = ModelSizeTerms(gamma1=v["gamma1"], gamma2=v["gamma2"], gamma3=v["gamma3"], F=v["F"])
    return LawParams(**kw)


def _predict_group(p: LawParams, g: _Group, s1_extra: float) -> np.ndarray:
    return np.asarray(
        evaluate(p, g.s1_pt + s1_extra, g.s2_pt, g.s1_cpt, g.s2_cpt, g.r_cpt, g.N, g.domain).total
    )


# ---------------------------------------------------------------------------
# Objective and gradients


def _objective(theta: np.ndarray, problem: _Problem) -> float:
    with np.errstate(all="ignore"):
        values = _values(theta, problem)
        if not np.all(np.isfinite(values)):
            return float("inf")
        total = 0.0
        for g in problem.groups:
            v = _domain_values(values, problem, g.domain)
            try:
                pred = _predict_group(_law_params(v, problem), g, v.get("s1_pt", 0.0))
            except ValueError:
                return float("inf")
            r = np.log(np.maximum(pred, _LOSS_FLOOR)) - g.log_obs
            total += float(np.sum(huber(r, problem.delta)))
    out = total / problem.n_total
    return out if np.isfinite(out) else float("inf")


def _law_partials(p: LawParams, g: _Group, s1_extra: float) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """Loss and its partial derivatives with respect to each named constant."""
    S = g.s1_pt + s1_extra + g.s1_cpt
    base = p.A * np.power(S, -p.alpha)
    if p.variant == "s2_power":
        f_pt, f_cpt = signed_power(g.s2_pt, p.zeta1), signed_power(g.s2_cpt, p.zeta2)
    else:
        f_pt, f_cpt = g.s2_pt, g.s2_cpt
    g_pt = g_cpt = 1.0
    if p.model_size is not None:
        g_pt = np.power(g.N, p.model_size.gamma1)
        g_cpt = np.power(g.N, p.model_size.gamma2)
    mult, smult = replay_factors(p, g.r_cpt, g.domain)
    one_plus = 1.0 + p.E * g.s1_cpt
    h = 1.0 - np.power(one_plus, -p.beta)
    anneal_pt = p.C1 * f_pt * g_pt
    anneal_cpt = p.C2 * f_cpt * g_cpt * mult
    shift = p.B * h * smult
    size = p.model_size.F * np.power(g.N, -p.model_size.gamma3) if p.model_size is not None else 0.0
    L = p.L0 + base - anneal_pt - anneal_cpt + shift + size

    d: Dict[str, np.ndarray] = {
        "L0": np.ones_like(S),
        "A": np.power(S, -p.alpha),
        "alpha": -base * np.log(S),
        "s1_pt": -p.alpha * base / S,
        "C1": -f_pt * g_pt * np.ones_like(S),
        "C2": -f_cpt * g_cpt * mult * np.ones_like(S),
        "B": h * smult * np.ones_like(S),
        "E": p.B * smult * p.beta * g.s1_cpt * np.power(one_plus, -p.beta - 1.0),
        "beta": p.B * smult * np.power(one_plus, -p.beta) * np.log(one_plus),
    }
    if p.variant == "s2_power":
        with np.errstate(divide="ignore", invalid="ignore"):
            ln_pt = np.where(g.s2_pt != 0, np.log(np.abs(g.s2_pt)), 0.0)
            ln_cpt = np.where(g.s2_cpt != 0, np.log(np.abs(g.s2_cpt)), 0.0)
        d["zeta1"] = -anneal_pt * ln_pt
        d["zeta2"] = -anneal_cpt * ln_cpt
    if p.replay is not None:
        r_anneal = (1.0 - g.r_cpt) if g.domain == "pt" else g.r_cpt
        d["a1"] = -anneal_cpt * r_anneal
        a2 = p.replay.a2
        if g.domain == "pt":
            d["a2"] = p.B * h * g.r_cpt * np.exp(-a2 * g.r_cpt)
        else:
            d["a2"] = p.B * h * g.r_cpt * np.exp(a2 * g.r_cpt)
    if p.model_size is not None:
        ln_n = np.log(g.N)
        d["gamma1"] = -anneal_pt * ln_n
        d["gamma2"] = -anneal_cpt * ln_n
        d["gamma3"] = -size * ln_n
        d["F"] = np.power(g.N, -p.model_size.gamma3)
    return L, d


def _analytic_gradient(theta: np.ndarray, problem: _Problem) -> np.ndarray:
    grad = np.zeros(len(problem.slots))
    with np.errstate(all="ignore"):
        values = _values(theta, problem)
        if not np.all(np.isfinite(values)):
            return grad
        for g in problem.groups:
            v = _domain_values(values, problem, g.domain)
            L, partials = _law_partials(_law_params(v, problem), g, v.get("s1_pt", 0.0))
            live = L > _LOSS_FLOOR
            r = np.log(np.maximum(L, _LOSS_FLOOR)) - g.log_obs
            weight = np.where(live, np.clip(r, -problem.delta, problem.delta) / np.where(live, L, 1.0), 0.0)
            for j, s in enumerate(problem.slots):
                if s.key in (g.domain, "shared", "global") and s.name in partials:
                    grad[j] += float(np.sum(weight * partials[s.name]))
        grad /= problem.n_total
        chain = np.array([v if s.log else 1.0 for s, v in zip(problem.slots, values)])
        out = grad * chain
    return np.where(np.isfinite(out), out, 0.0)


def central_gradient(fun, theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.empty_like(theta)
    for j in range(theta.size):
        h = 1e-6 * max(1.0, abs(theta[j]))
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (fun(up) - fun(down)) / (2.0 * h)
    return np.where(np.isfinite(grad), grad, 0.0)


def _gradient(theta: np.ndarray, problem: _Problem, mode: str) -> np.ndarray:
    if mode == "analytic":
        return _analytic_gradient(theta, problem)
    return central_gradient(lambda t: _objective(t, problem), theta)


# ---------------------------------------------------------------------------
# Multi-start minimisation


def _initial_thetas(problem: _Problem, config: FitConfig) -> np.ndarray:
    rng = np.random.default_rng(config.seed)
    thetas = np.empty((config.n_starts, len(problem.slots)))
    for i in range(config.n_starts):
        for j, s in enumerate(problem.slots):
            lo, hi = s.init
            if s.log:
                thetas[i, j] = rng.uniform(np.log(lo), np.log(hi))
            else:
                thetas[i, j] = rng.uniform(lo, hi)
    return thetas


def _run_start(problem: _Problem, config: FitConfig, theta0: np.ndarray) -> Tuple[float, np.ndarray, bool]:
    # Minimised as objective / delta^2; the reported value is unscaled.
    scale = 1.0 / problem.delta**2

    def fun(t: np.ndarray) -> float:
        return _objective(t, problem) * scale

    def jac(t: np.ndarray) -> np.ndarray:
        return _gradient(t, problem, config.gradient) * scale

    if not np.isfinite(fun(theta0)):
        return float("inf"), theta0, False
    try:
        res = minimize(
            fun,
            theta0,
            jac=jac,
            method="L-BFGS-B",
            options={"maxiter": config.max_iterations, "ftol": 1e-15, "gtol": 1e-12},
        )
    except (ValueError, FloatingPointError, OverflowError) as exc:
        logger.debug("start diverged: %s", exc)
        return float("inf"), theta0, False
    value = _objective(res.x, problem)
    return value, np.asarray(res.x), bool(res.success)


def _run_all_starts(problem: _Problem, config: FitConfig, thetas: np.ndarray) -> List[Tuple[float, np.ndarray, bool]]:
    workers = min(config.workers or worker_count(), len(thetas))
    job = partial(_run_start, problem, config)
    if workers <= 1:
        return [job(t) for t in thetas]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, list(thetas)))


def fit(dataset: Dataset, config: Optional[FitConfig] = None) -> FitResult:
    config = config or FitConfig()
    problem = _build_problem(dataset, config)
    thetas = _initial_thetas(problem, config)
    outcomes = _run_all_starts(problem, config, thetas)

    best_idx, best_val = -1, float("inf")
    for i, (val, _, ok) in enumerate(outcomes):
        logger.debug("start %d: objective=%.6g converged=%s", i, val, ok)
        if np.isfinite(val) and val < best_val:
            best_idx, best_val = i, val
    if best_idx < 0:
        raise FitDivergenceError(f"all {config.n_starts} starts produced a non-finite objective")

    _, theta, converged = outcomes[best_idx]
    values = _values(theta, problem)
    by_domain = {d: _law_params(_domain_values(values, problem, d), problem) for d in problem.domains}
    s1_pt = _domain_values(values, problem, problem.domains[0]).get("s1_pt")
    objective = huber_objective(by_domain, dataset, config.huber_delta, s1_pt=s1_pt)
    primary = config.domain if config.domain in by_domain else problem.domains[0]
    result = FitResult(
        params=by_domain[primary],
        params_by_domain=by_domain,
        objective=objective,
        start_index=best_idx,
        converged=converged,
        fitted_s1_pt=s1_pt,
        start_objectives=[float(v) if np.isfinite(v) else None for v, _, _ in outcomes],
        n_observations=problem.n_total,
        config=config,
    )
    scores = goodness(result, dataset)
    result = result.model_copy(
        update={
            "r_squared": {d: s.r_squared for d, s in scores.items()},
            "huber_per_domain": {d: s.huber for d, s in scores.items()},
        }
    )
    logger.info("best of %d starts: #%d objective=%.6g", config.n_starts, best_idx, objective)
    return result


def fit_domains(dataset: Dataset, config: Optional[FitConfig] = None) -> Dict[str, FitResult]:
    """Separate fit for every observed law domain ('pt' and/or 'cpt')."""
    config = config or FitConfig()
    out: Dict[str, FitResult] = {}
    for d in dataset.domains():
        if d in ("pt", "cpt"):
            out[d] = fit(dataset, config.model_copy(update={"domain": d, "joint": False}))
    return out


# ---------------------------------------------------------------------------
# Evaluation helpers


def predict_observations(
    params: LawParams, run: Run, domain: str, lam: float = DEFAULT_LAMBDA, s1_pt: Optional[float] = None
) -> np.ndarray:
    series = run.observations[domain]
    trace = compute_areas(run.schedule, lam, lr_weight_epsilon=params.lr_weight_epsilon())
    a1, a2, a3, a4 = areas_at_steps(trace, series.steps)
    law_domain = "cpt" if domain == "cpt" else "pt"
    N = run.N if run.N is not None else 1.0
    return np.asarray(evaluate(params, a1 + (s1_pt or 0.0), a2, a3, a4, run.r_cpt, N, law_domain).total)


def _params_for(params: Union[LawParams, Mapping[str, LawParams]], domain: str) -> Optional[LawParams]:
    if isinstance(params, LawParams):
        return params
    return params.get(domain)


def huber_objective(
    params: Union[LawParams, Mapping[str, LawParams]],
    dataset: Dataset,
    delta: float = DEFAULT_HUBER_DELTA,
    *,
    s1_pt: Optional[float] = None,
) -> float:
    """Mean Huber loss of log residuals over every observation the params cover.

    A single LawParams is applied to every domain; a mapping covers only its keys.
    """
    if delta <= 0:
        raise ValueError("huber delta must be > 0")
    total, count = 0.0, 0
    for run in dataset.runs:
        for domain, series in run.observations.items():
            p = _params_for(params, domain)
            if p is None or not len(series):
                continue
            if np.any(series.loss <= 0):
                raise DataError(f"nonpositive observed loss in '{domain}'")
            pred = predict_observations(p, run, domain, dataset.lam, s1_pt)
            r = np.log(np.maximum(pred, _LOSS_FLOOR)) - np.log(series.loss)
            total += float(np.sum(huber(r, delta)))
            count += len(series)
    if count == 0:
        raise DataError("dataset has no observations for the given parameters")
    return total / count


def goodness(result: FitResult, dataset: Dataset) -> Dict[str, DomainGoodness]:
    """Per-domain Huber (log space) and R^2 (raw loss space)."""
    out: Dict[str, DomainGoodness] = {}
    delta = result.config.huber_delta
    for domain, params in result.params_by_domain.items():
        obs, pred = [], []
        for run in dataset.runs:
            if domain in run.observations and len(run.observations[domain]):
                obs.append(run.observations[domain].loss)
                pred.append(predict_observations(params, run, domain, dataset.lam, result.fitted_s1_pt))
        if not obs:
            continue
        y, yhat = np.concatenate(obs), np.concatenate(pred)
        if y.size < 2:
            raise ValueError(f"R^2 needs at least 2 observations for '{domain}'")
        out[domain] = DomainGoodness(
            huber=float(np.mean(huber(np.log(np.maximum(yhat, _LOSS_FLOOR)) - np.log(y), delta))),
            r_squared=r_squared(y, yhat),
        )
    return out


def r_squared(observed: np.ndarray, predicted: np.ndarray) -> float:
    y = np.asarray(observed, dtype=np.float64)
    ss_res = float(np.sum((y - np.asarray(predicted)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else float("-inf")
    return 1.0 - ss_res / ss_tot


def holdout_error(result: FitResult, run: Run, lam: float = DEFAULT_LAMBDA) -> float:
    """Max absolute loss error of the fitted law on a run it was not fitted on."""
    worst = 0.0
    for domain, params in result.params_by_domain.items():
        if domain in run.observations and len(run.observations[domain]):
            pred = predict_observations(params, run, domain, lam, result.fitted_s1_pt)
            worst = max(worst, float(np.max(np.abs(pred - run.observations[domain].loss))))
    return worst
