from typing import Optional

from cpt_law.io import load_law_params, load_schedule_spec, write_series
from cpt_law.law import EvalContext, predict_curve

from ..schemas import PlotInput, PredictInput, PredictOutput
from .plot_tool import plot_tool


def predict_tool(params: PredictInput) -> PredictOutput:
    law = load_law_params(params.params_path, params.domain)
    schedule = load_schedule_spec(params.schedule_path).build()
    if not params.include_pt and schedule.cpt_steps == 0:
        raise ValueError("schedule has no CPT steps; pass include_pt to predict the PT phase")
    ctx = EvalContext(r_cpt=params.r_cpt, N=params.N, domain=params.domain)
    curve = predict_curve(law, schedule, params.lam, ctx, include_pt=params.include_pt)
    csv_path = write_series(params.out, curve)

    plot_path: Optional[str] = None
    if params.plot:
        plot_path = plot_tool(
            PlotInput(
                csv_path=csv_path,
                x="step",
                columns=["loss"],
                out=params.plot,
                title=f"Predicted D_{params.domain} loss",
                ylabel="loss",
                marker_x=float(schedule.boundary) if params.include_pt and schedule.boundary else None,
            )
        ).plot_path

    return PredictOutput(
        csv_path=csv_path,
        plot_path=plot_path,
        n_steps=len(curve),
        final_loss=float(curve.loss[-1]),
    )
