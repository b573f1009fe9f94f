"""Out-of-domain loss as a linear combination of the D_pt and D_cpt curves."""
from __future__ import annotations

import logging
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field
from scipy.optimize import nnls

from .errors import CollinearityError, DataError
from .hpopt import BalanceWeights
from .law import LossSeries


logger = logging.getLogger(__name__)

OOD_REPORT_VERSION = 1
MAX_CONDITION = 1e8

OodMode = Literal["ols", "nonnegative", "sum_to_one"]


class OodCoeffs(BaseModel):
    report_version: int = Field(OOD_REPORT_VERSION, ge=1, le=OOD_REPORT_VERSION)
    lambda1p: float = Field(..., description="Weight of the D_pt curve")
    lambda2p: float = Field(..., description="Weight of the D_cpt curve")
    residual_rmse: float = Field(0.0, ge=0.0)
    mode: OodMode = "ols"
    n_points: int = 0

    def balance_weights(self) -> BalanceWeights:
        """Normalised weights turning OOD optimisation into the D_pt / D_cpt balance problem."""
        total = self.lambda1p + self.lambda2p
        if total <= 0 or self.lambda1p < 0 or self.lambda2p < 0:
            raise ValueError(f"coefficients ({self.lambda1p}, {self.lambda2p}) cannot be normalised to weights")
        l1 = self.lambda1p / total
        return BalanceWeights(lambda1=l1, lambda2=1.0 - l1)


def _aligned(*series: LossSeries) -> None:
    first = series[0].steps
    for s in series[1:]:
        if s.steps.shape != first.shape or not np.array_equal(s.steps, first):
            raise DataError("loss series are not aligned on the same steps")


def fit_ood(l_pt: LossSeries, l_cpt: LossSeries, l_ood: LossSeries, mode: OodMode = "ols") -> OodCoeffs:
    _aligned(l_pt, l_cpt, l_ood)
    n = len(l_pt)
    if n < 2:
        raise DataError("OOD fit needs at least 2 aligned observations")
    X = np.column_stack([l_pt.loss, l_cpt.loss])
    y = l_ood.loss
    cond = np.linalg.cond(X.T @ X)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise CollinearityError(f"D_pt and D_cpt curves are nearly collinear (condition number {cond:.3g})")

    if mode == "nonnegative":
        coef, _ = nnls(X, y)
    elif mode == "sum_to_one":
        # y - l_cpt = w * (l_pt - l_cpt)
        d = l_pt.loss - l_cpt.loss
        w = float(np.dot(d, y - l_cpt.loss) / np.dot(d, d))
        coef = np.array([w, 1.0 - w])
    else:
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)

    resid = y - X @ coef
    rmse = float(np.sqrt(np.mean(resid**2)))
    logger.info("OOD coefficients (%s): %.6g, %.6g, rmse %.3g", mode, coef[0], coef[1], rmse)
    return OodCoeffs(lambda1p=float(coef[0]), lambda2p=float(coef[1]), residual_rmse=rmse, mode=mode, n_points=n)


def predict_ood(coeffs: OodCoeffs, l_pt: LossSeries, l_cpt: LossSeries) -> LossSeries:
    _aligned(l_pt, l_cpt)
    loss = coeffs.lambda1p * l_pt.loss + coeffs.lambda2p * l_cpt.loss
    return LossSeries(steps=l_pt.steps.copy(), loss=loss, domain="ood")


def rmse(a: LossSeries, b: LossSeries) -> float:
    _aligned(a, b)
    return float(np.sqrt(np.mean((a.loss - b.loss) ** 2)))
