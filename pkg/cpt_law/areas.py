"""Forward area S1 and momentum-weighted annealing area S2 of an LR schedule.

S1(t) = sum_{i<=t} eta_i
m_t   = lam * m_{t-1} + (eta_{t-1} - eta_t),  m_0 = 0, eta_0 := eta_1
S2(t) = sum_{i<=t} m_i * eta_i**eps          (eps = 0 is the plain annealing area)

A single momentum sequence runs over the concatenated PT+CPT schedule, so the
afterglow of a PT decay keeps feeding S2 during early CPT steps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from .config import DEFAULT_LAMBDA
from .schedules import Schedule


BRUTE_FORCE_MAX_STEPS = 10_000
_CUMSUM_BLOCK = 4096


@dataclass(frozen=True, eq=False)
class AreaTrace:
    etas: np.ndarray
    s1: np.ndarray
    m: np.ndarray
    s2: np.ndarray
    boundary: int
    lam: float
    lr_weight_epsilon: float = 0.0

    def __len__(self) -> int:
        return int(self.s1.size)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "step": np.arange(1, len(self) + 1),
                "eta": self.etas,
                "s1": self.s1,
                "m": self.m,
                "s2": self.s2,
            }
        )


@dataclass(frozen=True, eq=False)
class AreaSplit:
    """PT areas at the boundary and CPT offsets; index t of the CPT arrays is CPT step t (0 included)."""

    s1_pt: float
    s2_pt: float
    s1_cpt: np.ndarray
    s2_cpt: np.ndarray


def _check_lambda(lam: float) -> None:
    if not (0.0 < lam < 1.0) or not math.isfinite(lam):
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")


def _compensated_cumsum(x: np.ndarray) -> np.ndarray:
    # Block-wise prefix sums; block offsets are carried with Kahan compensation.
    out = np.empty_like(x)
    total, comp = 0.0, 0.0
    for start in range(0, x.size, _CUMSUM_BLOCK):
        block = x[start:start + _CUMSUM_BLOCK]
        out[start:start + block.size] = np.cumsum(block) + total
        y = math.fsum(block) - comp
        t = total + y
        comp = (t - total) - y
        total = t
    return out


def _momentum(etas: np.ndarray, lam: float) -> np.ndarray:
    prev = np.concatenate([etas[:1], etas[:-1]])
    diffs = prev - etas
    if not np.any(diffs):
        return np.zeros_like(etas)
    return lfilter([1.0], [1.0, -lam], diffs)


def compute_areas(
    schedule: Schedule,
    lam: float = DEFAULT_LAMBDA,
    *,
    lr_weight_epsilon: float = 0.0,
    reset_momentum_at_boundary: bool = False,
) -> AreaTrace:
    _check_lambda(lam)
    etas = np.asarray(schedule.etas, dtype=np.float64)
    b = schedule.boundary
    if reset_momentum_at_boundary and 0 < b < etas.size:
        m = np.concatenate([_momentum(etas[:b], lam), _momentum(etas[b:], lam)])
    else:
        m = _momentum(etas, lam)
    contrib = m if lr_weight_epsilon == 0.0 else m * np.power(etas, lr_weight_epsilon)
    return AreaTrace(
        etas=etas,
        s1=_compensated_cumsum(etas),
        m=m,
        s2=_compensated_cumsum(contrib),
        boundary=b,
        lam=float(lam),
        lr_weight_epsilon=float(lr_weight_epsilon),
    )


def split_areas(trace: AreaTrace) -> AreaSplit:
    b = trace.boundary
    if not 0 <= b <= len(trace):
        raise ValueError(f"boundary {b} outside [0, {len(trace)}]")
    s1_pt = float(trace.s1[b - 1]) if b > 0 else 0.0
    s2_pt = float(trace.s2[b - 1]) if b > 0 else 0.0
    s1_cpt = np.concatenate([[0.0], trace.s1[b:] - s1_pt])
    s2_cpt = np.concatenate([[0.0], trace.s2[b:] - s2_pt])
    return AreaSplit(s1_pt=s1_pt, s2_pt=s2_pt, s1_cpt=s1_cpt, s2_cpt=s2_cpt)


def areas_at_steps(trace: AreaTrace, steps: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(s1_pt, s2_pt, s1_cpt, s2_cpt) at absolute 1-based steps.

    PT steps carry their running areas in the PT slots and zero CPT parts;
    CPT steps carry the boundary areas plus the CPT offsets.
    """
    steps = np.asarray(steps, dtype=np.int64)
    if steps.size and (steps.min() < 1 or steps.max() > len(trace)):
        raise ValueError(f"steps must lie in [1, {len(trace)}]")
    split = split_areas(trace)
    b = trace.boundary
    in_pt = steps <= b
    idx = steps - 1
    cpt_t = np.where(in_pt, 0, steps - b)
    s1_pt = np.where(in_pt, trace.s1[idx], split.s1_pt)
    s2_pt = np.where(in_pt, trace.s2[idx], split.s2_pt)
    s1_cpt = np.where(in_pt, 0.0, split.s1_cpt[cpt_t])
    s2_cpt = np.where(in_pt, 0.0, split.s2_cpt[cpt_t])
    return s1_pt, s2_pt, s1_cpt, s2_cpt


def brute_force_s2(schedule: Schedule, lam: float = DEFAULT_LAMBDA) -> np.ndarray:
    """Literal double sum for S2; O(T^2), meant as a test oracle."""
    etas = np.asarray(schedule.etas, dtype=np.float64)
    T = etas.size
    if T > BRUTE_FORCE_MAX_STEPS:
        raise ValueError(f"brute force S2 limited to {BRUTE_FORCE_MAX_STEPS} steps, got {T}")
    prev = np.concatenate([etas[:1], etas[:-1]])
    diffs = prev - etas
    out = np.empty(T)
    running = 0.0
    for i in range(T):
        k = np.arange(i + 1)
        running += float(np.dot(diffs[: i + 1], np.power(lam, i - k)))
        out[i] = running
    return out
