"""Synthetic loss curves drawn from a known law (ground truth for fitting tests and demos)."""
from __future__ import annotations

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from .areas import areas_at_steps, compute_areas
from .config import DEFAULT_LAMBDA, DEFAULT_PEAK_LR, DEFAULT_SEED, DEFAULT_STRIDE
from .fit import Dataset, Run
from .law import LawParams, LossSeries, evaluate
from .schedules import (
    Schedule,
    ScheduleSpec,
    concat_pt_cpt,
    constant_schedule,
    warmup_cosine_schedule,
    wsd_schedule,
)


logger = logging.getLogger(__name__)


class SynthSpec(BaseModel):
    truth: LawParams = Field(default_factory=LawParams, description="Law generating the D_pt curves")
    truth_cpt: Optional[LawParams] = Field(None, description="Law generating the D_cpt curves (omit for D_pt only)")
    schedules: List[ScheduleSpec] = Field(default_factory=list)
    noise_sigma: float = Field(0.0, ge=0.0, description="Multiplicative log-normal noise level")
    seed: int = DEFAULT_SEED
    stride: int = Field(DEFAULT_STRIDE, ge=1, description="Log every stride-th step")
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0)
    r_cpt: float = Field(1.0, ge=0.0, le=1.0)
    N: Optional[float] = Field(None, gt=0.0)

    @classmethod
    def from_schedules(cls, schedules: Sequence[Schedule], **kwargs) -> "SynthSpec":
        return cls(schedules=[s.to_spec() for s in schedules], **kwargs)


def sample_steps(schedule: Schedule, stride: int, domain: str) -> np.ndarray:
    """Logged steps: multiples of stride; D_cpt is only logged once CPT has started."""
    steps = np.arange(stride, len(schedule) + 1, stride, dtype=np.int64)
    if domain == "cpt" and schedule.boundary > 0:
        steps = steps[steps > schedule.boundary]
    return steps


def _true_curve(params: LawParams, schedule: Schedule, steps: np.ndarray, spec: SynthSpec, domain: str) -> np.ndarray:
    trace = compute_areas(schedule, spec.lam, lr_weight_epsilon=params.lr_weight_epsilon())
    s1_pt, s2_pt, s1_cpt, s2_cpt = areas_at_steps(trace, steps)
    N = spec.N if spec.N is not None else 1.0
    return np.asarray(evaluate(params, s1_pt, s2_pt, s1_cpt, s2_cpt, spec.r_cpt, N, domain).total)


def generate(spec: SynthSpec) -> Dataset:
    if not spec.schedules:
        raise ValueError("synth spec lists no schedules")
    rng = np.random.default_rng(spec.seed)
    laws: Dict[str, LawParams] = {"pt": spec.truth}
    if spec.truth_cpt is not None:
        laws["cpt"] = spec.truth_cpt
    runs: List[Run] = []
    for sched_spec in spec.schedules:
        schedule = sched_spec.build()
        observations: Dict[str, LossSeries] = {}
        for domain, params in laws.items():
            steps = sample_steps(schedule, spec.stride, domain)
            loss = _true_curve(params, schedule, steps, spec, domain)
            if spec.noise_sigma > 0:
                loss = loss * np.exp(spec.noise_sigma * rng.standard_normal(loss.size))
            observations[domain] = LossSeries(steps, loss, domain)
        runs.append(Run(schedule=schedule, observations=observations, r_cpt=spec.r_cpt, N=spec.N))
    logger.debug("generated %d runs (sigma=%g, seed=%d)", len(runs), spec.noise_sigma, spec.seed)
    return Dataset(runs=runs, lam=spec.lam)


def sample_truth(seed: int, *, replay: bool = False) -> LawParams:
    """A random but plausible D_pt law, around the magnitudes of published CPT fits."""
    rng = np.random.default_rng(seed)
    return LawParams(
        L0=float(rng.uniform(2.5, 3.5)),
        A=float(rng.uniform(0.3, 0.6)),
        alpha=float(rng.uniform(0.35, 0.65)),
        C1=float(rng.uniform(0.15, 0.4)),
        C2=float(rng.uniform(0.15, 0.4)),
        B=float(rng.uniform(0.1, 0.4)),
        E=float(np.exp(rng.uniform(np.log(20.0), np.log(300.0)))),
        beta=float(rng.uniform(0.3, 0.9)),
    )


def demo_schedules(
    pt_steps: int = 2000,
    cpt_steps: int = 1000,
    peak_lr: float = DEFAULT_PEAK_LR,
    pt_decay_steps: Optional[int] = None,
) -> Dict[str, Schedule]:
    """PT+CPT schedules of the usual families, shrunk to desk scale.

    PT is WSD (final LR 0) or constant; CPT is cosine, WSD or constant.
    """
    decay = pt_decay_steps if pt_decay_steps is not None else max(1, pt_steps // 10)
    pt_wsd = wsd_schedule(pt_steps - decay, decay, peak_lr)
    pt_const = constant_schedule(pt_steps, peak_lr)
    cpt_decay = max(1, cpt_steps // 5)
    return {
        "wsd_cosine": concat_pt_cpt(pt_wsd, warmup_cosine_schedule(cpt_steps, peak_lr, warmup_steps=cpt_steps // 20)),
        "const_wsd": concat_pt_cpt(pt_const, wsd_schedule(cpt_steps - cpt_decay, cpt_decay, peak_lr)),
        "const_const": concat_pt_cpt(pt_const, constant_schedule(cpt_steps, peak_lr / 2)),
        "wsd_cosine_long": concat_pt_cpt(pt_wsd, warmup_cosine_schedule(2 * cpt_steps, peak_lr, warmup_steps=cpt_steps // 20)),
    }
