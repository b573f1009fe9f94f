from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field

from cpt_law.config import DEFAULT_CPT_STEPS, DEFAULT_GRID_POINTS, DEFAULT_LAMBDA, DEFAULT_PEAK_LR, DEFAULT_TURNING_CANDIDATES


class AreasInput(BaseModel):
    schedule_path: str = Field(..., description="Schedule JSON")
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0, description="Momentum decay lambda")
    out: str = Field("trace.csv", description="CSV output path (step, eta, s1, m, s2)")
    lr_weight_epsilon: float = Field(0.0, description="LR-weight exponent for S2")
    reset_momentum_at_boundary: bool = False
    plot: Optional[str] = Field(None, description="Optional SVG chart path")


class AreasOutput(BaseModel):
    csv_path: str
    plot_path: Optional[str] = None
    steps: int
    boundary: int
    s1_final: float
    s2_final: float
    s1_pt: float
    s2_pt: float


class FitInput(BaseModel):
    manifest_path: str = Field(..., description="Run manifest JSON (single run or {'runs': [...]})")
    config_path: Optional[str] = Field(None, description="FitConfig JSON; defaults apply when omitted")
    out: str = Field("fit_result.json", description="FitResult JSON output path")
    seed: Optional[int] = Field(None, description="Overrides the config seed")
    domain: Optional[Literal["pt", "cpt"]] = Field(None, description="Overrides the config domain")


class FitOutput(BaseModel):
    report_path: str
    objective: float
    r_squared: Dict[str, float] = Field(default_factory=dict)
    huber_per_domain: Dict[str, float] = Field(default_factory=dict)
    start_index: int
    converged: bool
    fitted_s1_pt: Optional[float] = None


class PredictInput(BaseModel):
    params_path: str = Field(..., description="LawParams JSON (or a fit report)")
    schedule_path: str = Field(..., description="Schedule JSON")
    out: str = Field("curve.csv", description="CSV output path (step, loss)")
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0)
    r_cpt: float = Field(1.0, ge=0.0, le=1.0)
    N: float = Field(1.0, gt=0.0)
    domain: Literal["pt", "cpt"] = "pt"
    include_pt: bool = Field(False, description="Also predict PT steps")
    plot: Optional[str] = None


class PredictOutput(BaseModel):
    csv_path: str
    plot_path: Optional[str] = None
    n_steps: int
    final_loss: float


class SimulateInput(BaseModel):
    spec_path: str = Field(..., description="SynthSpec JSON")
    out_dir: str = Field("dataset", description="Directory for schedules, loss logs and manifest.json")
    seed: Optional[int] = Field(None, description="Overrides the spec seed")


class SimulateOutput(BaseModel):
    manifest_path: str
    paths: List[str] = Field(default_factory=list)
    n_runs: int


class OptimizeInput(BaseModel):
    knob: Literal["loss_potential", "peak_lr", "replay_ratio", "cpt_steps"]
    lambda1: float = Field(..., ge=0.0, le=1.0, description="Weight of the D_pt loss change")
    params_pt_path: str
    params_cpt_path: str
    out: str = Field("optimum.json", description="OptimumReport JSON output path")
    curve_out: Optional[str] = Field(None, description="(knob, objective) CSV; defaults next to the report")
    template_path: Optional[str] = Field(None, description="ScheduleTemplate JSON")
    scratch: bool = Field(False, description="Train from scratch on the mixture (no PT phase)")
    lo: Optional[float] = None
    hi: Optional[float] = None
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0)
    grid_points: int = Field(DEFAULT_GRID_POINTS, ge=3)
    plot: Optional[str] = None


class OptimizeOutput(BaseModel):
    report_path: str
    curve_path: str
    plot_path: Optional[str] = None
    knob_value: float
    objective: float
    delta_pt: float
    delta_cpt: float


class OodInput(BaseModel):
    log_path: str = Field(..., description="Loss-log CSV holding the three aligned columns")
    pt_col: str = "loss_pt"
    cpt_col: str = "loss_cpt"
    ood_col: str = "loss_ood"
    mode: Literal["ols", "nonnegative", "sum_to_one"] = "ols"
    out: str = Field("ood_coeffs.json", description="OodCoeffs JSON output path")


class OodOutput(BaseModel):
    report_path: str
    lambda1p: float
    lambda2p: float
    residual_rmse: float


class EvalInput(BaseModel):
    params_path: str
    s1_pt: float
    s2_pt: float
    s1_cpt: float = Field(0.0, ge=0.0)
    s2_cpt: float = 0.0
    r_cpt: float = Field(1.0, ge=0.0, le=1.0)
    N: float = Field(1.0, gt=0.0)
    domain: Literal["pt", "cpt"] = "pt"


class EvalOutput(BaseModel):
    breakdown: Dict[str, float]
    violations: List[str] = Field(default_factory=list, description="Parameter constraint violations, if any")


class TurningInput(BaseModel):
    params_pt_path: str
    params_cpt_path: Optional[str] = Field(None, description="Set with lambda1 for the composite-loss turning length")
    lambda1: Optional[float] = Field(None, ge=0.0, le=1.0)
    template_path: Optional[str] = None
    lo: int = Field(1, ge=1)
    cap: int = Field(DEFAULT_CPT_STEPS, ge=1)
    candidates: int = Field(DEFAULT_TURNING_CANDIDATES, ge=2)
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0)
    out: Optional[str] = None


class TurningOutput(BaseModel):
    steps: Optional[int] = None
    reachable: bool
    cap: int
    report_path: Optional[str] = None


class CriticalInput(BaseModel):
    params_pt_path: str
    s1_pt: float = Field(..., gt=0.0, description="Forward area of the PT checkpoint")
    s2_pt: float = Field(..., description="Annealing area of the PT checkpoint")
    cap: int = Field(DEFAULT_CPT_STEPS, ge=1)
    peak_lr: float = Field(DEFAULT_PEAK_LR, gt=0.0)
    r_cpt: float = Field(1.0, ge=0.0, le=1.0)
    N: float = Field(1.0, gt=0.0)
    lam: float = Field(DEFAULT_LAMBDA, gt=0.0, lt=1.0)
    out: Optional[str] = None


class CriticalOutput(BaseModel):
    reachable: bool
    infimum_loss: float
    start_loss: float
    argmin_steps: int
    report_path: Optional[str] = None


class PlotInput(BaseModel):
    csv_path: str = Field(..., description="CSV to chart")
    x: str = Field(..., description="Column on the x axis")
    columns: List[str] = Field(..., min_length=1, description="Columns drawn as lines")
    out: str = Field(..., description="SVG output path")
    title: str = ""
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    logx: bool = False
    marker_x: Optional[float] = Field(None, description="Vertical reference line (e.g. the PT/CPT boundary)")


class PlotOutput(BaseModel):
    plot_path: Optional[str] = None
