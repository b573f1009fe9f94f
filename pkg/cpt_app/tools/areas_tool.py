import os
from typing import Optional

from cpt_law.areas import compute_areas, split_areas
from cpt_law.io import load_schedule_spec, write_frame

from ..schemas import AreasInput, AreasOutput, PlotInput
from .plot_tool import plot_tool


def areas_tool(params: AreasInput) -> AreasOutput:
    schedule = load_schedule_spec(params.schedule_path).build()
    trace = compute_areas(
        schedule,
        params.lam,
        lr_weight_epsilon=params.lr_weight_epsilon,
        reset_momentum_at_boundary=params.reset_momentum_at_boundary,
    )
    csv_path = write_frame(params.out, trace.to_frame())
    split = split_areas(trace)

    plot_path: Optional[str] = None
    if params.plot:
        plot_path = plot_tool(
            PlotInput(
                csv_path=csv_path,
                x="step",
                columns=["s1", "s2"],
                out=params.plot,
                title=f"Forward and annealing areas (lambda={params.lam})",
                ylabel="area",
                marker_x=float(schedule.boundary) if schedule.boundary else None,
            )
        ).plot_path

    return AreasOutput(
        csv_path=os.path.abspath(csv_path),
        plot_path=plot_path,
        steps=len(schedule),
        boundary=schedule.boundary,
        s1_final=float(trace.s1[-1]),
        s2_final=float(trace.s2[-1]),
        s1_pt=split.s1_pt,
        s2_pt=split.s2_pt,
    )
