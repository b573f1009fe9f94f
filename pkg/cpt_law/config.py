import logging
import os


DEFAULT_LAMBDA = 0.999
DEFAULT_SEED = 0
DEFAULT_HUBER_DELTA = 1e-3
DEFAULT_N_STARTS = 64
DEFAULT_MAX_ITERATIONS = 2000
DEFAULT_STRIDE = 10
DEFAULT_GRID_POINTS = 256
DEFAULT_TURNING_CANDIDATES = 64

# Knob-search template defaults: WSD pre-training of 40k steps, cosine CPT of 10k.
DEFAULT_PT_STEPS = 40_000
DEFAULT_PT_DECAY_STEPS = 4_000
DEFAULT_CPT_STEPS = 10_000
DEFAULT_CPT_WARMUP_STEPS = 200
DEFAULT_PEAK_LR = 2e-4

# Total forward area below this is treated as singular.
MIN_FORWARD_AREA = 1e-12

THREADS_ENV = "CPTLAW_THREADS"
LOG_LEVEL_ENV = "CPTLAW_LOG_LEVEL"


def worker_count() -> int:
    """Worker processes allowed for parallel sections (CPTLAW_THREADS, default 1)."""
    try:
        n = int(os.environ.get(THREADS_ENV, "1"))
    except Exception:
        n = 1
    return max(1, n)


def log_level() -> int:
    name = os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING
