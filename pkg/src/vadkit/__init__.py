"""Human-centric video anomaly classification toolkit.

Pipeline: person tracking over detector output, background suppression
around the tracked people, fixed-length clip sampling, per-frame feature
extraction into a binary cache, recurrent sequence classification, and
evaluation reporting. Each step is importable on its own and also runs
as a content-addressed CLI stage.
"""

from . import (config, data, features, metrics, model, report, sampling,
               stages, suppress, synthetic, tracking, training)
from .accel import NUMBA_ENABLED, warmup

__version__ = "0.1.0"

__all__ = [
    "config", "data", "features", "metrics", "model", "report", "sampling",
    "stages", "suppress", "synthetic", "tracking", "training",
    "NUMBA_ENABLED", "warmup", "__version__",
]
