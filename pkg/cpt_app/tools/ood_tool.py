from cpt_law.errors import DataError
from cpt_law.io import load_loss_log, write_json
from cpt_law.ood import fit_ood

from ..schemas import OodInput, OodOutput


def ood_tool(params: OodInput) -> OodOutput:
    log = load_loss_log(params.log_path)
    cols = [params.pt_col, params.cpt_col, params.ood_col]
    missing = [c for c in cols if c not in log]
    if missing:
        raise DataError(f"{params.log_path} has no column(s) {', '.join(missing)}")
    coeffs = fit_ood(log[params.pt_col], log[params.cpt_col], log[params.ood_col], mode=params.mode)
    return OodOutput(
        report_path=write_json(params.out, coeffs),
        lambda1p=coeffs.lambda1p,
        lambda2p=coeffs.lambda2p,
        residual_rmse=coeffs.residual_rmse,
    )
