from cpt_law.errors import DataError
from cpt_law.hpopt import BalanceWeights, KnobSpace, balance_turning_length, turning_length
from cpt_law.io import load_law_params, write_json

from ..schemas import TurningInput, TurningOutput
from .optimize_tool import load_template


def turning_tool(params: TurningInput) -> TurningOutput:
    params_pt = load_law_params(params.params_pt_path, "pt")
    template = load_template(params.template_path)
    if params.lo > params.cap:
        raise DataError(f"turning-length range needs lo <= cap, got {params.lo} and {params.cap}")
    space = KnobSpace(knob="cpt_steps", lo=params.lo, hi=params.cap, template=template, lam=params.lam)

    if params.params_cpt_path is not None:
        if params.lambda1 is None:
            raise DataError("composite turning length needs lambda1 alongside the D_cpt law")
        params_cpt = load_law_params(params.params_cpt_path, "cpt")
        weights = BalanceWeights.from_lambda1(params.lambda1)
        report = balance_turning_length(params_pt, params_cpt, weights, space, candidates=params.candidates)
    else:
        report = turning_length(params_pt, space, candidates=params.candidates)

    report_path = write_json(params.out, report) if params.out else None
    return TurningOutput(steps=report.steps, reachable=report.reachable, cap=report.cap, report_path=report_path)
