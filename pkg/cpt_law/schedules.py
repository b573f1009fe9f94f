"""Per-step learning-rate schedules and PT/CPT concatenation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


SCHEDULE_FORMAT_VERSION = 1

PhaseKind = Literal["constant", "linear", "cosine", "wsd-stable", "wsd-decay"]


class PhaseSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: PhaseKind
    steps: int = Field(..., ge=1, description="Number of steps in the phase")
    lr_start: float = Field(..., ge=0.0, description="LR at the first step of the phase")
    lr_end: float = Field(0.0, ge=0.0, description="LR at the last step (ignored for constant kinds)")


@dataclass(frozen=True, eq=False)
class Schedule:
    """LR values eta_1..eta_T with the last PT step marked by ``boundary`` (0 = pure CPT)."""

    etas: np.ndarray
    boundary: int = 0

    def __post_init__(self) -> None:
        etas = np.array(self.etas, dtype=np.float64).reshape(-1)
        if etas.size < 1:
            raise ValueError("schedule must contain at least one step")
        if not np.all(np.isfinite(etas)) or np.any(etas < 0):
            raise ValueError("schedule learning rates must be finite and nonnegative")
        if not 0 <= int(self.boundary) <= etas.size:
            raise ValueError(f"boundary {self.boundary} outside [0, {etas.size}]")
        etas.setflags(write=False)
        object.__setattr__(self, "etas", etas)
        object.__setattr__(self, "boundary", int(self.boundary))

    def __len__(self) -> int:
        return int(self.etas.size)

    @property
    def cpt_steps(self) -> int:
        return len(self) - self.boundary

    def with_boundary(self, boundary: int) -> "Schedule":
        return Schedule(self.etas, boundary)

    def to_spec(self) -> "ScheduleSpec":
        return ScheduleSpec(etas=[float(x) for x in self.etas], boundary=self.boundary)


def _phase_etas(phase: PhaseSpec) -> np.ndarray:
    n = phase.steps
    if phase.kind in ("constant", "wsd-stable"):
        return np.full(n, phase.lr_start, dtype=np.float64)
    if n == 1:
        return np.array([phase.lr_start], dtype=np.float64)
    lo, hi = min(phase.lr_start, phase.lr_end), max(phase.lr_start, phase.lr_end)
    if phase.kind in ("linear", "wsd-decay"):
        etas = np.linspace(phase.lr_start, phase.lr_end, n, dtype=np.float64)
    else:
        j = np.arange(n, dtype=np.float64)
        etas = phase.lr_end + (phase.lr_start - phase.lr_end) * (1.0 + np.cos(np.pi * j / (n - 1))) / 2.0
        etas[0], etas[-1] = phase.lr_start, phase.lr_end
    return np.clip(etas, lo, hi)


def build_schedule(phases: Sequence[PhaseSpec]) -> Schedule:
    phases = list(phases)
    if not phases:
        raise ValueError("phase list is empty")
    parts = [_phase_etas(p if isinstance(p, PhaseSpec) else PhaseSpec.model_validate(p)) for p in phases]
    return Schedule(np.concatenate(parts), boundary=0)


def concat_pt_cpt(pt: Schedule, cpt: Schedule) -> Schedule:
    """PT followed by CPT, boundary at the last PT step; pt's own boundary is ignored."""
    return Schedule(np.concatenate([pt.etas, cpt.etas]), boundary=len(pt))


def constant_schedule(steps: int, lr: float) -> Schedule:
    return build_schedule([PhaseSpec(kind="constant", steps=steps, lr_start=lr)])


def wsd_phases(
    stable_steps: int,
    decay_steps: int,
    peak_lr: float,
    final_lr: float = 0.0,
    decay_kind: Literal["wsd-decay", "cosine"] = "wsd-decay",
    warmup_steps: int = 0,
    warmup_from: float = 0.0,
) -> List[PhaseSpec]:
    phases: List[PhaseSpec] = []
    if warmup_steps > 0:
        phases.append(PhaseSpec(kind="linear", steps=warmup_steps, lr_start=warmup_from, lr_end=peak_lr))
    if stable_steps > 0:
        phases.append(PhaseSpec(kind="wsd-stable", steps=stable_steps, lr_start=peak_lr))
    if decay_steps > 0:
        phases.append(PhaseSpec(kind=decay_kind, steps=decay_steps, lr_start=peak_lr, lr_end=final_lr))
    return phases


def wsd_schedule(
    stable_steps: int,
    decay_steps: int,
    peak_lr: float,
    final_lr: float = 0.0,
    decay_kind: Literal["wsd-decay", "cosine"] = "wsd-decay",
    warmup_steps: int = 0,
    warmup_from: float = 0.0,
) -> Schedule:
    return build_schedule(
        wsd_phases(stable_steps, decay_steps, peak_lr, final_lr, decay_kind, warmup_steps, warmup_from)
    )


def warmup_cosine_phases(
    steps: int,
    peak_lr: float,
    final_lr: float = 0.0,
    warmup_steps: int = 0,
    warmup_from: float = 0.0,
) -> List[PhaseSpec]:
    warmup_steps = min(max(0, warmup_steps), steps - 1)
    phases: List[PhaseSpec] = []
    if warmup_steps > 0:
        phases.append(PhaseSpec(kind="linear", steps=warmup_steps, lr_start=warmup_from, lr_end=peak_lr))
    phases.append(PhaseSpec(kind="cosine", steps=steps - warmup_steps, lr_start=peak_lr, lr_end=final_lr))
    return phases


def warmup_cosine_schedule(
    steps: int,
    peak_lr: float,
    final_lr: float = 0.0,
    warmup_steps: int = 0,
    warmup_from: float = 0.0,
) -> Schedule:
    return build_schedule(warmup_cosine_phases(steps, peak_lr, final_lr, warmup_steps, warmup_from))


class ScheduleSpec(BaseModel):
    """JSON form of a schedule: either phases or an explicit LR list, plus the PT boundary."""

    format_version: int = Field(SCHEDULE_FORMAT_VERSION, ge=1, le=SCHEDULE_FORMAT_VERSION)
    phases: Optional[List[PhaseSpec]] = None
    etas: Optional[List[float]] = None
    boundary: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _one_source(self) -> "ScheduleSpec":
        if (self.phases is None) == (self.etas is None):
            raise ValueError("schedule spec needs exactly one of 'phases' or 'etas'")
        if self.phases is not None and not self.phases:
            raise ValueError("phase list is empty")
        return self

    def build(self) -> Schedule:
        sched = build_schedule(self.phases) if self.phases is not None else Schedule(np.asarray(self.etas))
        return sched.with_boundary(self.boundary or 0)

    @classmethod
    def pt_cpt(cls, pt: "ScheduleSpec", cpt: "ScheduleSpec") -> "ScheduleSpec":
        """Spec whose build() equals concat_pt_cpt(pt.build(), cpt.build())."""
        if pt.phases is not None and cpt.phases is not None:
            return cls(phases=list(pt.phases) + list(cpt.phases), boundary=sum(p.steps for p in pt.phases))
        return concat_pt_cpt(pt.build(), cpt.build()).to_spec()
