"""The CPT loss law and its variants.

    L = L0 + A*(S1_pt + S1_cpt)**-alpha - C1*S2_pt - C2*S2_cpt
           + B*(1 - (1 + E*S1_cpt)**-beta)

Optional extensions: replay ratio (annealing and shift terms scaled by
exponentials of the mixture ratio, one equation per validation domain),
model size (annealing terms scaled by N**gamma, plus F*N**-gamma3), and two
alternate annealing forms (LR-weighted S2, signed power of S2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .areas import areas_at_steps, compute_areas
from .config import DEFAULT_LAMBDA, MIN_FORWARD_AREA
from .errors import LawEvaluationError
from .schedules import Schedule


LAW_VERSION = 1

Domain = Literal["pt", "cpt"]
Variant = Literal["base", "lr_weighted", "s2_power"]
ArrayLike = Union[float, np.ndarray]


class ReplayTerms(BaseModel):
    model_config = ConfigDict(frozen=True)

    a1: float = 0.0
    a2: float = 1.0


class ModelSizeTerms(BaseModel):
    model_config = ConfigDict(frozen=True)

    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    F: float = 0.0


class LawParams(BaseModel):
    """Fitted constants of the law. Defaults are the replay-law D_pt fit with beta = 0.5."""

    model_config = ConfigDict(frozen=True)

    law_version: int = Field(LAW_VERSION, ge=1, le=LAW_VERSION)
    L0: float = 3.067
    A: float = 0.480
    alpha: float = 0.510
    C1: float = 0.280
    C2: float = 0.263
    B: float = 0.276
    E: float = 99.35
    beta: float = 0.5
    variant: Variant = "base"
    epsilon: float = Field(0.0, description="LR-weight exponent (lr_weighted variant)")
    zeta1: float = Field(1.0, description="S2_pt exponent (s2_power variant)")
    zeta2: float = Field(1.0, description="S2_cpt exponent (s2_power variant)")
    replay: Optional[ReplayTerms] = None
    model_size: Optional[ModelSizeTerms] = None

    def check_invariants(self, domain: Domain = "pt") -> List[str]:
        """Human-readable violations of the parameter constraints (empty when valid)."""
        problems: List[str] = []
        values = [self.L0, self.A, self.alpha, self.C1, self.C2, self.B, self.E, self.beta]
        if not all(np.isfinite(values)):
            problems.append("all parameters must be finite")
        for name in ("L0", "A", "alpha", "E", "beta"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be > 0")
        if self.B <= 0 and not (self.replay is not None and domain == "cpt"):
            problems.append("B must be > 0")
        for name in ("C1", "C2"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be >= 0")
        return problems

    def lr_weight_epsilon(self) -> float:
        return self.epsilon if self.variant == "lr_weighted" else 0.0

    @classmethod
    def reference_replay_pt(cls, beta: float = 0.5) -> "LawParams":
        return cls(
            L0=3.067, A=0.480, alpha=0.510, C1=0.280, C2=0.263, B=0.276, E=99.35, beta=beta,
            replay=ReplayTerms(a1=0.055, a2=3.238),
        )

    @classmethod
    def reference_replay_cpt(cls, beta: float = 0.5) -> "LawParams":
        return cls(
            L0=2.992, A=0.456, alpha=0.510, C1=0.285, C2=0.279, B=-0.526, E=100.34, beta=beta,
            replay=ReplayTerms(a1=0.037, a2=5.696),
        )


class EvalContext(BaseModel):
    model_config = ConfigDict(frozen=True)

    r_cpt: float = Field(1.0, ge=0.0, le=1.0, description="CPT-data fraction of the training mixture")
    N: float = Field(1.0, gt=0.0, description="Non-embedding parameter count")
    domain: Domain = "pt"

    @property
    def r_pt(self) -> float:
        return 1.0 - self.r_cpt


@dataclass(frozen=True, eq=False)
class LossBreakdown:
    total: ArrayLike
    base_power: ArrayLike
    anneal_pt: ArrayLike
    anneal_cpt: ArrayLike
    shift: ArrayLike
    size_term: ArrayLike

    def as_dict(self) -> Dict[str, ArrayLike]:
        return {
            "total": self.total,
            "base_power": self.base_power,
            "anneal_pt": self.anneal_pt,
            "anneal_cpt": self.anneal_cpt,
            "shift": self.shift,
            "size_term": self.size_term,
        }


@dataclass(frozen=True, eq=False)
class LossSeries:
    steps: np.ndarray
    loss: np.ndarray
    domain: str = "pt"

    def __post_init__(self) -> None:
        steps = np.asarray(self.steps, dtype=np.int64).reshape(-1)
        loss = np.asarray(self.loss, dtype=np.float64).reshape(-1)
        if steps.shape != loss.shape:
            raise ValueError("steps and loss must have the same length")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "loss", loss)

    def __len__(self) -> int:
        return int(self.steps.size)

    def at(self, steps: np.ndarray) -> "LossSeries":
        mask = np.isin(self.steps, steps)
        return LossSeries(self.steps[mask], self.loss[mask], self.domain)


def signed_power(x: ArrayLike, p: float) -> ArrayLike:
    return np.sign(x) * np.power(np.abs(x), p)


def shift_term(params: LawParams, s1_cpt: ArrayLike) -> ArrayLike:
    return params.B * (1.0 - np.power(1.0 + params.E * np.asarray(s1_cpt, dtype=np.float64), -params.beta))


def eval_shift(params: LawParams, s1_cpt: ArrayLike) -> ArrayLike:
    s = np.asarray(s1_cpt, dtype=np.float64)
    if np.any(s < 0):
        raise ValueError("s1_cpt must be nonnegative")
    out = shift_term(params, s)
    return float(out) if out.ndim == 0 else out


def replay_factors(params: LawParams, r_cpt: ArrayLike, domain: Domain):
    """(annealing multiplier for the CPT term, shift multiplier) under the replay law."""
    if params.replay is None:
        if np.any(np.asarray(r_cpt, dtype=np.float64) < 1.0):
            raise LawEvaluationError("r_cpt < 1 needs a law with replay terms")
        return 1.0, 1.0
    a1, a2 = params.replay.a1, params.replay.a2
    r_cpt = np.asarray(r_cpt, dtype=np.float64)
    if domain == "pt":
        return np.exp(a1 * (1.0 - r_cpt)), 1.0 - np.exp(-a2 * r_cpt)
    return np.exp(a1 * r_cpt), np.exp(a2 * r_cpt) - 1.0


def evaluate(
    params: LawParams,
    s1_pt: ArrayLike,
    s2_pt: ArrayLike,
    s1_cpt: ArrayLike,
    s2_cpt: ArrayLike,
    r_cpt: ArrayLike = 1.0,
    N: ArrayLike = 1.0,
    domain: Domain = "pt",
) -> LossBreakdown:
    """Vectorised law evaluation; r_cpt and N may be per-point arrays."""
    s1_pt = np.asarray(s1_pt, dtype=np.float64)
    s1_cpt = np.asarray(s1_cpt, dtype=np.float64)
    s2_pt = np.asarray(s2_pt, dtype=np.float64)
    s2_cpt = np.asarray(s2_cpt, dtype=np.float64)
    total_area = s1_pt + s1_cpt
    if np.any(~np.isfinite(total_area)) or np.any(~np.isfinite(s2_pt)) or np.any(~np.isfinite(s2_cpt)):
        raise LawEvaluationError("areas must be finite")
    if np.any(total_area < MIN_FORWARD_AREA):
        raise LawEvaluationError("total forward area S1_pt + S1_cpt is zero; the power term is singular")
    if np.any(s1_cpt < 0):
        raise LawEvaluationError("s1_cpt must be nonnegative")

    if params.variant == "s2_power":
        f_pt, f_cpt = signed_power(s2_pt, params.zeta1), signed_power(s2_cpt, params.zeta2)
    else:
        f_pt, f_cpt = s2_pt, s2_cpt

    base_power = params.A * np.power(total_area, -params.alpha)
    anneal_pt = params.C1 * f_pt
    anneal_cpt = params.C2 * f_cpt
    shift = shift_term(params, s1_cpt)
    size_term = np.zeros_like(base_power)

    anneal_mult, shift_mult = replay_factors(params, r_cpt, domain)
    anneal_cpt = anneal_cpt * anneal_mult
    shift = shift * shift_mult

    if params.model_size is not None:
        ms = params.model_size
        N = np.asarray(N, dtype=np.float64)
        anneal_pt = anneal_pt * np.power(N, ms.gamma1)
        anneal_cpt = anneal_cpt * np.power(N, ms.gamma2)
        size_term = size_term + ms.F * np.power(N, -ms.gamma3)

    total = params.L0 + base_power - anneal_pt - anneal_cpt + shift + size_term
    return LossBreakdown(
        total=total,
        base_power=base_power,
        anneal_pt=np.broadcast_to(anneal_pt, np.shape(total)),
        anneal_cpt=np.broadcast_to(anneal_cpt, np.shape(total)),
        shift=np.broadcast_to(shift, np.shape(total)),
        size_term=np.broadcast_to(size_term, np.shape(total)),
    )


def _scalarize(b: LossBreakdown) -> LossBreakdown:
    vals = {k: (float(v) if np.ndim(v) == 0 else np.asarray(v)) for k, v in b.as_dict().items()}
    return LossBreakdown(**vals)


def eval_loss(
    params: LawParams,
    s1_pt: ArrayLike,
    s2_pt: ArrayLike,
    s1_cpt: ArrayLike,
    s2_cpt: ArrayLike,
    ctx: Optional[EvalContext] = None,
) -> LossBreakdown:
    ctx = ctx or EvalContext()
    return _scalarize(evaluate(params, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx.r_cpt, ctx.N, ctx.domain))


def predict_curve(
    params: LawParams,
    schedule: Schedule,
    lam: float = DEFAULT_LAMBDA,
    ctx: Optional[EvalContext] = None,
    *,
    include_pt: bool = False,
    reset_momentum_at_boundary: bool = False,
) -> LossSeries:
    """Predicted loss at every CPT step (and every PT step with ``include_pt``)."""
    ctx = ctx or EvalContext()
    trace = compute_areas(
        schedule,
        lam,
        lr_weight_epsilon=params.lr_weight_epsilon(),
        reset_momentum_at_boundary=reset_momentum_at_boundary,
    )
    first = 1 if include_pt else schedule.boundary + 1
    steps = np.arange(first, len(schedule) + 1)
    s1_pt, s2_pt, s1_cpt, s2_cpt = areas_at_steps(trace, steps)
    loss = evaluate(params, s1_pt, s2_pt, s1_cpt, s2_cpt, ctx.r_cpt, ctx.N, ctx.domain).total
    return LossSeries(steps=steps, loss=np.asarray(loss), domain=ctx.domain)
