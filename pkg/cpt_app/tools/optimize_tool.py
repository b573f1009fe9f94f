import logging
import os
from typing import Optional

import pandas as pd

from cpt_law.hpopt import BalanceWeights, KnobSpace, ScheduleTemplate, optimize_knob
from cpt_law.io import load_law_params, read_json, write_frame, write_json

from ..schemas import OptimizeInput, OptimizeOutput, PlotInput
from .plot_tool import plot_tool


logger = logging.getLogger(__name__)


def load_template(path: Optional[str], scratch: bool = False) -> ScheduleTemplate:
    template = ScheduleTemplate.model_validate(read_json(path)) if path else ScheduleTemplate()
    if scratch:
        template = template.model_copy(update={"scratch": True})
    return template


def _curve_path(params: OptimizeInput) -> str:
    if params.curve_out:
        return params.curve_out
    stem, _ = os.path.splitext(params.out)
    return f"{stem}_curve.csv"


def optimize_tool(params: OptimizeInput) -> OptimizeOutput:
    params_pt = load_law_params(params.params_pt_path, "pt")
    params_cpt = load_law_params(params.params_cpt_path, "cpt")
    template = load_template(params.template_path, params.scratch)
    space = KnobSpace.default(params.knob, template, lam=params.lam)
    if params.lo is not None or params.hi is not None:
        space = KnobSpace(
            knob=params.knob,
            lo=space.lo if params.lo is None else params.lo,
            hi=space.hi if params.hi is None else params.hi,
            template=template,
            lam=params.lam,
        )
    weights = BalanceWeights.from_lambda1(params.lambda1)
    report = optimize_knob(space, weights, params_pt, params_cpt, grid_points=params.grid_points)

    report_path = write_json(params.out, report)
    curve = pd.DataFrame(report.curve, columns=[params.knob, "objective"])
    curve_path = write_frame(_curve_path(params), curve)

    plot_path: Optional[str] = None
    if params.plot:
        plot_path = plot_tool(
            PlotInput(
                csv_path=curve_path,
                x=params.knob,
                columns=["objective"],
                out=params.plot,
                title=f"Balance objective (lambda1={params.lambda1:g})",
                ylabel="lambda1*dL_pt + lambda2*dL_cpt",
                marker_x=report.knob_value,
            )
        ).plot_path

    return OptimizeOutput(
        report_path=report_path,
        curve_path=curve_path,
        plot_path=plot_path,
        knob_value=report.knob_value,
        objective=report.objective,
        delta_pt=report.delta_pt,
        delta_cpt=report.delta_cpt,
    )
