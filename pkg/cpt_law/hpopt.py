"""Hyper-parameter search over fitted D_pt / D_cpt laws.

The balance objective weighs the signed change of each domain's loss over the
CPT phase: lambda1 * dL_pt + lambda2 * dL_cpt, with each delta taken as
(loss at the end of CPT) - (loss at the CPT starting checkpoint).
"""
from __future__ import annotations

import logging
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import minimize_scalar

from .areas import compute_areas
from .config import (
    DEFAULT_CPT_STEPS,
    DEFAULT_CPT_WARMUP_STEPS,
    DEFAULT_GRID_POINTS,
    DEFAULT_LAMBDA,
    DEFAULT_PEAK_LR,
    DEFAULT_PT_DECAY_STEPS,
    DEFAULT_PT_STEPS,
    DEFAULT_TURNING_CANDIDATES,
)
from .errors import NumericalError
from .law import EvalContext, LawParams, evaluate
from .schedules import Schedule, concat_pt_cpt, warmup_cosine_schedule, wsd_schedule


logger = logging.getLogger(__name__)

OPTIMUM_REPORT_VERSION = 1
MAX_INTEGER_SCAN = 4096
CRITICAL_EXHAUSTIVE_CAP = 2048

Knob = Literal["loss_potential", "peak_lr", "replay_ratio", "cpt_steps"]


class BalanceWeights(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(..., ge=0.0, le=1.0, description="Weight of the D_pt loss change")
    lambda2: float = Field(..., ge=0.0, le=1.0, description="Weight of the D_cpt loss change")

    @model_validator(mode="after")
    def _normalised(self) -> "BalanceWeights":
        if abs(self.lambda1 + self.lambda2 - 1.0) > 1e-12:
            raise ValueError(f"lambda1 + lambda2 must equal 1, got {self.lambda1 + self.lambda2}")
        return self

    @classmethod
    def from_lambda1(cls, lambda1: float) -> "BalanceWeights":
        return cls(lambda1=lambda1, lambda2=1.0 - lambda1)


# A plain (w1, w2) pair skips normalisation; any positive scaling has the same argmin.
Weights = Union[BalanceWeights, Tuple[float, float]]


def _pair(weights: Weights) -> Tuple[float, float]:
    if isinstance(weights, BalanceWeights):
        return weights.lambda1, weights.lambda2
    w1, w2 = weights
    return float(w1), float(w2)


class BalanceResult(BaseModel):
    objective: float
    delta_pt: float
    delta_cpt: float


class ScheduleTemplate(BaseModel):
    """PT = WSD ending at loss_potential * peak_lr; CPT = linear re-warm to the CPT peak then cosine to 0.

    With ``scratch`` there is no PT phase: the CPT schedule alone, trained from
    random initialisation.
    """

    model_config = ConfigDict(frozen=True)

    pt_steps: int = Field(DEFAULT_PT_STEPS, ge=1)
    pt_decay_steps: int = Field(DEFAULT_PT_DECAY_STEPS, ge=0)
    peak_lr: float = Field(DEFAULT_PEAK_LR, gt=0.0, description="PT peak (stable) LR")
    loss_potential: float = Field(0.0, ge=0.0, le=1.0, description="PT final LR / PT peak LR")
    cpt_peak_lr: Optional[float] = Field(None, ge=0.0, description="CPT peak LR (defaults to peak_lr)")
    cpt_steps: int = Field(DEFAULT_CPT_STEPS, ge=1)
    cpt_warmup_steps: int = Field(DEFAULT_CPT_WARMUP_STEPS, ge=0, description="Linear re-warm steps before the cosine decay")
    rewarm_from_zero: bool = Field(False, description="CPT warmup starts at LR 0 instead of the PT final LR")
    r_cpt: float = Field(1.0, ge=0.0, le=1.0, description="CPT-data fraction of the mixture")
    N: float = Field(1.0, gt=0.0)
    scratch: bool = False

    @model_validator(mode="after")
    def _decay_fits(self) -> "ScheduleTemplate":
        if self.pt_decay_steps > self.pt_steps:
            raise ValueError("pt_decay_steps cannot exceed pt_steps")
        return self

    @property
    def pt_final_lr(self) -> float:
        return self.loss_potential * self.peak_lr

    def context(self) -> EvalContext:
        return EvalContext(r_cpt=self.r_cpt, N=self.N)

    def with_knob(self, knob: Knob, value: float) -> "ScheduleTemplate":
        if knob == "loss_potential":
            update = {"loss_potential": float(value)}
        elif knob == "peak_lr":
            update = {"cpt_peak_lr": float(value)}
        elif knob == "replay_ratio":
            update = {"r_cpt": 1.0 - float(value)}
        else:
            update = {"cpt_steps": int(round(value))}
        return self.model_copy(update=update)

    def build(self) -> Schedule:
        cpt_peak = self.peak_lr if self.cpt_peak_lr is None else self.cpt_peak_lr
        warm = min(self.cpt_warmup_steps, self.cpt_steps - 1)
        if self.scratch:
            return warmup_cosine_schedule(self.cpt_steps, cpt_peak, 0.0, warm, 0.0)
        pt = wsd_schedule(self.pt_steps - self.pt_decay_steps, self.pt_decay_steps, self.peak_lr, self.pt_final_lr)
        start = 0.0 if self.rewarm_from_zero else self.pt_final_lr
        return concat_pt_cpt(pt, warmup_cosine_schedule(self.cpt_steps, cpt_peak, 0.0, warm, start))


_DEFAULT_RANGES = {
    "loss_potential": (0.0, 1.0),
    "peak_lr": (1e-5, 1e-3),
    "replay_ratio": (0.01, 0.99),
    "cpt_steps": (1.0, float(DEFAULT_CPT_STEPS)),
}


class KnobSpace(BaseModel):
    knob: Knob
    lo: float
    hi: float
    template: ScheduleTemplate = Field(default_factory=ScheduleTemplate)
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _check_range(self) -> "KnobSpace":
        if self.knob == "cpt_steps":
            if self.lo > self.hi:
                raise ValueError(f"cpt_steps range needs lo <= hi, got [{self.lo}, {self.hi}]")
        elif not self.lo < self.hi:
            raise ValueError(f"knob range needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.knob in ("loss_potential", "replay_ratio") and (self.lo < 0.0 or self.hi > 1.0):
            raise ValueError(f"{self.knob} range must lie within [0, 1]")
        if self.knob == "peak_lr" and self.lo < 0.0:
            raise ValueError("peak_lr range must be nonnegative")
        if self.knob == "cpt_steps" and self.lo < 1:
            raise ValueError("cpt_steps range must start at 1 or above")
        return self

    @classmethod
    def default(cls, knob: Knob, template: Optional[ScheduleTemplate] = None, **kwargs) -> "KnobSpace":
        lo, hi = _DEFAULT_RANGES[knob]
        return cls(knob=knob, lo=lo, hi=hi, template=template or ScheduleTemplate(), **kwargs)


class OptimumReport(BaseModel):
    report_version: int = Field(OPTIMUM_REPORT_VERSION, ge=1, le=OPTIMUM_REPORT_VERSION)
    knob: Knob
    knob_value: float
    objective: float
    delta_pt: float
    delta_cpt: float
    lambda1: float
    lambda2: float
    refined: bool = False
    curve: List[Tuple[float, float]] = Field(default_factory=list, description="(knob value, objective) grid samples")


class TurningReport(BaseModel):
    steps: Optional[int] = Field(None, description="Turning length, None when unreachable within the cap")
    cap: int
    scanned: List[Tuple[int, float]] = Field(default_factory=list)

    @property
    def reachable(self) -> bool:
        return self.steps is not None


class CriticalPointReport(BaseModel):
    reachable: bool
    infimum_loss: float
    start_loss: float
    argmin_steps: int
    cap: int


# ---------------------------------------------------------------------------
# Balance objective


def domain_delta(
    params: LawParams,
    s1_pt: float,
    s2_pt: float,
    s1_cpt: float,
    s2_cpt: float,
    ctx: Optional[EvalContext] = None,
    domain: str = "pt",
) -> float:
    """Signed loss change of one domain between the CPT start checkpoint and the given CPT point."""
    ctx = ctx or EvalContext()
    end = evaluate(params, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx.r_cpt, ctx.N, domain).total
    start = evaluate(params, s1_pt, s2_pt, 0.0, 0.0, ctx.r_cpt, ctx.N, domain).total
    return float(end) - float(start)


def balance_from_areas(
    params_pt: LawParams,
    params_cpt: LawParams,
    weights: Weights,
    s1_pt: float,
    s2_pt: float,
    s1_cpt: float,
    s2_cpt: float,
    ctx: Optional[EvalContext] = None,
) -> BalanceResult:
    w1, w2 = _pair(weights)
    d_pt = domain_delta(params_pt, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx, "pt")
    d_cpt = domain_delta(params_cpt, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx, "cpt")
    return BalanceResult(objective=w1 * d_pt + w2 * d_cpt, delta_pt=d_pt, delta_cpt=d_cpt)


def _end_areas(params: LawParams, schedule: Schedule, lam: float) -> Tuple[float, float, float, float]:
    trace = compute_areas(schedule, lam, lr_weight_epsilon=params.lr_weight_epsilon())
    b = schedule.boundary
    s1_pt = float(trace.s1[b - 1]) if b > 0 else 0.0
    s2_pt = float(trace.s2[b - 1]) if b > 0 else 0.0
    return s1_pt, s2_pt, float(trace.s1[-1]) - s1_pt, float(trace.s2[-1]) - s2_pt


def balance_objective(
    params_pt: LawParams,
    params_cpt: LawParams,
    weights: Weights,
    schedule: Schedule,
    ctx: Optional[EvalContext] = None,
    lam: float = DEFAULT_LAMBDA,
) -> BalanceResult:
    if schedule.boundary <= 0:
        raise ValueError("balance objective needs a PT phase (boundary > 0)")
    if schedule.cpt_steps <= 0:
        raise ValueError("schedule has no CPT steps")
    w1, w2 = _pair(weights)
    d_pt = domain_delta(params_pt, *_end_areas(params_pt, schedule, lam), ctx, "pt")
    d_cpt = domain_delta(params_cpt, *_end_areas(params_cpt, schedule, lam), ctx, "cpt")
    return BalanceResult(objective=w1 * d_pt + w2 * d_cpt, delta_pt=d_pt, delta_cpt=d_cpt)


def scratch_balance(
    params_pt: LawParams,
    params_cpt: LawParams,
    weights: Weights,
    schedule: Schedule,
    ctx: Optional[EvalContext] = None,
    lam: float = DEFAULT_LAMBDA,
) -> BalanceResult:
    """Balance for a model trained from scratch on the mixture (no PT checkpoint).

    Each domain follows its hidden curve plus the cross-entropy excess -ln(share)
    of seeing only that fraction of its data; deltas are measured from zero.
    Replay terms only scale CPT-area terms, which are zero here, so this is a
    weight-only baseline: the optimum replay ratio equals lambda1.
    """
    if schedule.boundary != 0:
        raise ValueError("scratch balance expects a schedule without a PT phase")
    ctx = ctx or EvalContext()
    w1, w2 = _pair(weights)
    deltas = []
    for params, share in ((params_pt, ctx.r_pt), (params_cpt, ctx.r_cpt)):
        trace = compute_areas(schedule, lam, lr_weight_epsilon=params.lr_weight_epsilon())
        hidden = evaluate(params, trace.s1[-1], trace.s2[-1], 0.0, 0.0, 1.0, ctx.N, "pt").total
        with np.errstate(divide="ignore"):
            deltas.append(float(hidden) - float(np.log(share)))
    return BalanceResult(objective=w1 * deltas[0] + w2 * deltas[1], delta_pt=deltas[0], delta_cpt=deltas[1])


# ---------------------------------------------------------------------------
# Knob search


def _check_replay(space: KnobSpace, *params: LawParams) -> None:
    if space.knob == "replay_ratio" and not space.template.scratch:
        if any(p.replay is None for p in params):
            raise ValueError("replay_ratio search needs laws fitted with replay terms")


def knob_balance(
    space: KnobSpace, value: float, weights: Weights, params_pt: LawParams, params_cpt: LawParams
) -> BalanceResult:
    template = space.template.with_knob(space.knob, value)
    schedule = template.build()
    if template.scratch:
        return scratch_balance(params_pt, params_cpt, weights, schedule, template.context(), space.lam)
    return balance_objective(params_pt, params_cpt, weights, schedule, template.context(), space.lam)


def _grid(space: KnobSpace, grid_points: int) -> np.ndarray:
    if space.knob != "cpt_steps":
        return np.linspace(space.lo, space.hi, grid_points)
    lo, hi = int(np.ceil(space.lo)), int(np.floor(space.hi))
    if hi - lo + 1 > MAX_INTEGER_SCAN:
        logger.warning("cpt_steps scan capped at %d values (range %d..%d)", MAX_INTEGER_SCAN, lo, hi)
        hi = lo + MAX_INTEGER_SCAN - 1
    return np.arange(lo, hi + 1, dtype=np.float64)


def optimize_knob(
    space: KnobSpace,
    weights: Weights,
    params_pt: LawParams,
    params_cpt: LawParams,
    *,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> OptimumReport:
    """Grid scan over the knob, then golden-section refinement around the best grid point."""
    if grid_points < 3:
        raise ValueError("grid_points must be >= 3")
    _check_replay(space, params_pt, params_cpt)
    w1, w2 = _pair(weights)

    def objective(x: float) -> float:
        return knob_balance(space, x, weights, params_pt, params_cpt).objective

    grid = _grid(space, grid_points)
    values = np.array([objective(x) for x in grid])
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise NumericalError(
            f"balance objective is not finite at {space.knob}={grid[bad][0]:g} ({int(bad.sum())} grid points)"
        )
    best = int(np.argmin(values))
    best_x, best_val = float(grid[best]), float(values[best])
    refined = False
    if space.knob != "cpt_steps" and 0 < best < grid.size - 1:
        try:
            res = minimize_scalar(
                objective, bracket=(grid[best - 1], grid[best], grid[best + 1]), method="golden"
            )
            if np.isfinite(res.fun) and res.fun < best_val and space.lo <= res.x <= space.hi:
                best_x, best_val, refined = float(res.x), float(res.fun), True
        except (ValueError, RuntimeError) as exc:
            logger.debug("golden refinement skipped: %s", exc)

    at_best = knob_balance(space, best_x, weights, params_pt, params_cpt)
    logger.info("optimal %s = %.6g (objective %.6g)", space.knob, best_x, at_best.objective)
    return OptimumReport(
        knob=space.knob,
        knob_value=best_x,
        objective=at_best.objective,
        delta_pt=at_best.delta_pt,
        delta_cpt=at_best.delta_cpt,
        lambda1=w1,
        lambda2=w2,
        refined=refined,
        curve=[(float(x), float(v)) for x, v in zip(grid, values)],
    )


# ---------------------------------------------------------------------------
# Turning length and critical point


def _log_candidates(lo: int, hi: int, count: int) -> List[int]:
    if hi - lo + 1 <= count:
        return list(range(lo, hi + 1))
    raw = np.geomspace(lo, hi, count)
    return sorted(set(int(round(x)) for x in raw) | {lo, hi})


def first_crossing(
    objective: Callable[[int], float], lo: int, hi: int, candidates: int = DEFAULT_TURNING_CANDIDATES
) -> Tuple[Optional[int], List[Tuple[int, float]]]:
    """Smallest integer t in [lo, hi] with objective(t) <= 0, by log scan plus bisection."""
    scanned: List[Tuple[int, float]] = []
    prev: Optional[int] = None
    for t in _log_candidates(lo, hi, candidates):
        value = objective(t)
        scanned.append((t, value))
        if value <= 0:
            if prev is None:
                return t, scanned
            a, b = prev, t
            while b - a > 1:
                mid = (a + b) // 2
                if objective(mid) <= 0:
                    b = mid
                else:
                    a = mid
            return b, scanned
        prev = t
    return None, scanned


def _steps_space(space: KnobSpace) -> Tuple[int, int]:
    if space.knob != "cpt_steps":
        raise ValueError("turning length needs a cpt_steps knob space")
    lo, hi = int(np.ceil(space.lo)), int(np.floor(space.hi))
    if hi < 1:
        raise ValueError("cap must be >= 1")
    return max(1, lo), hi


def turning_length(
    params_pt: LawParams,
    space: KnobSpace,
    ctx: Optional[EvalContext] = None,
    *,
    candidates: int = DEFAULT_TURNING_CANDIDATES,
) -> TurningReport:
    """Fewest CPT steps (full anneal to zero) after which D_pt loss is back at its starting value."""
    lo, hi = _steps_space(space)
    ctx = ctx or space.template.context()

    def delta(t: int) -> float:
        schedule = space.template.with_knob("cpt_steps", t).build()
        return domain_delta(params_pt, *_end_areas(params_pt, schedule, space.lam), ctx, "pt")

    steps, scanned = first_crossing(delta, lo, hi, candidates)
    return TurningReport(steps=steps, cap=hi, scanned=scanned)


def balance_turning_length(
    params_pt: LawParams,
    params_cpt: LawParams,
    weights: Weights,
    space: KnobSpace,
    *,
    candidates: int = DEFAULT_TURNING_CANDIDATES,
) -> TurningReport:
    """Turning length of the composite lambda1 * L_pt + lambda2 * L_cpt loss."""
    lo, hi = _steps_space(space)
    steps_space = space.model_copy(update={"knob": "cpt_steps"})

    def objective(t: int) -> float:
        return knob_balance(steps_space, t, weights, params_pt, params_cpt).objective

    steps, scanned = first_crossing(objective, lo, hi, candidates)
    return TurningReport(steps=steps, cap=hi, scanned=scanned)


def _critical_candidates(cap: int) -> List[int]:
    if cap <= CRITICAL_EXHAUSTIVE_CAP:
        return list(range(1, cap + 1))
    return _log_candidates(1, cap, DEFAULT_GRID_POINTS)


def critical_point(
    params_pt: LawParams,
    pt_checkpoint: Tuple[float, float],
    ctx: Optional[EvalContext] = None,
    cap: int = DEFAULT_CPT_STEPS,
    *,
    peak_lr: float = DEFAULT_PEAK_LR,
    lam: float = DEFAULT_LAMBDA,
) -> CriticalPointReport:
    """Lowest final D_pt loss over cosine-to-zero CPT runs of 1..cap steps from a checkpoint.

    The checkpoint is given by its PT areas (s1_pt, s2_pt) and carries no momentum.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    ctx = ctx or EvalContext()
    s1_pt, s2_pt = float(pt_checkpoint[0]), float(pt_checkpoint[1])
    start = float(evaluate(params_pt, s1_pt, s2_pt, 0.0, 0.0, ctx.r_cpt, ctx.N, "pt").total)
    best_loss, best_n = float("inf"), 1
    for n in _critical_candidates(cap):
        trace = compute_areas(
            warmup_cosine_schedule(n, peak_lr), lam, lr_weight_epsilon=params_pt.lr_weight_epsilon()
        )
        loss = float(
            evaluate(params_pt, s1_pt, s2_pt, trace.s1[-1], trace.s2[-1], ctx.r_cpt, ctx.N, "pt").total
        )
        if loss < best_loss:
            best_loss, best_n = loss, n
    return CriticalPointReport(
        reachable=best_loss < start, infimum_loss=best_loss, start_loss=start, argmin_steps=best_n, cap=cap
    )


def sweep_lambda1(
    space: KnobSpace,
    lambda1_values: Sequence[float],
    params_pt: LawParams,
    params_cpt: LawParams,
    *,
    grid_points: int = DEFAULT_GRID_POINTS,
) -> List[OptimumReport]:
    """Optimal knob for each lambda1 (lambda2 = 1 - lambda1)."""
    return [
        optimize_knob(space, BalanceWeights.from_lambda1(l1), params_pt, params_cpt, grid_points=grid_points)
        for l1 in lambda1_values
    ]
