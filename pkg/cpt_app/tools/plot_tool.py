import logging
import os

import pandas as pd

from ..schemas import PlotInput, PlotOutput


logger = logging.getLogger(__name__)

PALETTE = ["#4C78A8", "#F58518", "#54A24B", "#EECA3B", "#B279A2", "#FF9DA6", "#9C755F", "#BAB0AC"]


def plot_tool(params: PlotInput) -> PlotOutput:
    """Static SVG line chart of CSV columns. Returns no path if matplotlib is unavailable."""
    try:
        import matplotlib

        matplotlib.use("Agg")  # non-interactive backend
        import matplotlib as mpl
        import matplotlib.pyplot as plt
    except ImportError as exc:
        logger.warning("matplotlib unavailable, skipping chart %s: %s", params.out, exc)
        return PlotOutput()

    df = pd.read_csv(params.csv_path)
    missing = [c for c in [params.x, *params.columns] if c not in df.columns]
    if missing:
        raise ValueError(f"{params.csv_path} has no column(s) {', '.join(missing)}")

    mpl.rcParams.update({
        "axes.spines.top": False,
        "axes.spines.right": False,
        "axes.grid": True,
        "grid.alpha": 0.2,
        "axes.titlesize": 14,
        "axes.labelsize": 12,
        "xtick.labelsize": 10,
        "ytick.labelsize": 10,
        "svg.hashsalt": "cpt-law",
    })
    fig, ax = plt.subplots(figsize=(10, 6))
    for i, col in enumerate(params.columns):
        ax.plot(df[params.x], df[col], linewidth=2, color=PALETTE[i % len(PALETTE)], label=col)
    if params.marker_x is not None:
        ax.axvline(params.marker_x, color=PALETTE[-1], linestyle="--", linewidth=1)
    if params.logx:
        ax.set_xscale("log")
    ax.set_title(params.title)
    ax.set_xlabel(params.xlabel or params.x)
    if params.ylabel:
        ax.set_ylabel(params.ylabel)
    if len(params.columns) > 1:
        ax.legend(frameon=False)
    fig.tight_layout()

    parent = os.path.dirname(os.path.abspath(params.out))
    os.makedirs(parent, exist_ok=True)
    fig.savefig(params.out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return PlotOutput(plot_path=os.path.abspath(params.out))
