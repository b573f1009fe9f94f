from .areas_tool import areas_tool
from .critical_tool import critical_tool
from .eval_tool import eval_tool
from .fit_tool import fit_tool
from .ood_tool import ood_tool
from .optimize_tool import optimize_tool
from .plot_tool import plot_tool
from .predict_tool import predict_tool
from .simulate_tool import simulate_tool
from .turning_tool import turning_tool

__all__ = [
    "areas_tool",
    "critical_tool",
    "eval_tool",
    "fit_tool",
    "ood_tool",
    "optimize_tool",
    "plot_tool",
    "predict_tool",
    "simulate_tool",
    "turning_tool",
]
