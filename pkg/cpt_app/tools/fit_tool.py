import logging

from cpt_law.fit import FitConfig, fit
from cpt_law.io import dataset_from_manifests, load_manifests, parse_document, read_json, write_json

from ..schemas import FitInput, FitOutput


logger = logging.getLogger(__name__)


def _load_config(path) -> FitConfig:
    if not path:
        return FitConfig()
    return parse_document(FitConfig, read_json(path), "format_version", 1, "fit config")


def fit_tool(params: FitInput) -> FitOutput:
    config = _load_config(params.config_path)
    update = {}
    if params.seed is not None:
        update["seed"] = params.seed
    if params.domain is not None:
        update["domain"] = params.domain
    if update:
        config = config.model_copy(update=update)

    dataset = dataset_from_manifests(load_manifests(params.manifest_path))
    result = fit(dataset, config)
    report_path = write_json(params.out, result)
    logger.info("fit report written to %s", report_path)
    return FitOutput(
        report_path=report_path,
        objective=result.objective,
        r_squared=result.r_squared,
        huber_per_domain=result.huber_per_domain,
        start_index=result.start_index,
        converged=result.converged,
        fitted_s1_pt=result.fitted_s1_pt,
    )
