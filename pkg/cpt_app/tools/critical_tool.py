from cpt_law.hpopt import critical_point
from cpt_law.io import load_law_params, write_json
from cpt_law.law import EvalContext

from ..schemas import CriticalInput, CriticalOutput


def critical_tool(params: CriticalInput) -> CriticalOutput:
    params_pt = load_law_params(params.params_pt_path, "pt")
    report = critical_point(
        params_pt,
        (params.s1_pt, params.s2_pt),
        EvalContext(r_cpt=params.r_cpt, N=params.N),
        params.cap,
        peak_lr=params.peak_lr,
        lam=params.lam,
    )
    report_path = write_json(params.out, report) if params.out else None
    return CriticalOutput(
        reachable=report.reachable,
        infimum_loss=report.infimum_loss,
        start_loss=report.start_loss,
        argmin_steps=report.argmin_steps,
        report_path=report_path,
    )
