from cpt_law.io import load_law_params
from cpt_law.law import EvalContext, eval_loss

from ..schemas import EvalInput, EvalOutput


def eval_tool(params: EvalInput) -> EvalOutput:
    law = load_law_params(params.params_path, params.domain)
    ctx = EvalContext(r_cpt=params.r_cpt, N=params.N, domain=params.domain)
    b = eval_loss(law, params.s1_pt, params.s2_pt, params.s1_cpt, params.s2_cpt, ctx)
    return EvalOutput(
        breakdown={k: float(v) for k, v in b.as_dict().items()},
        violations=law.check_invariants(params.domain),
    )
