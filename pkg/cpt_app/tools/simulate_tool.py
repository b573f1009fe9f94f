import os

from cpt_law.io import load_synth_spec, write_dataset
from cpt_law.synth import generate

from ..schemas import SimulateInput, SimulateOutput


def simulate_tool(params: SimulateInput) -> SimulateOutput:
    spec = load_synth_spec(params.spec_path)
    if params.seed is not None:
        spec = spec.model_copy(update={"seed": params.seed})
    dataset = generate(spec)
    paths = write_dataset(dataset, params.out_dir)
    return SimulateOutput(
        manifest_path=os.path.abspath(os.path.join(params.out_dir, "manifest.json")),
        paths=paths,
        n_runs=len(dataset.runs),
    )
