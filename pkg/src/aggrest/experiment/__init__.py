"""Single-index simulation study and Monte-Carlo risk harness."""

from .splines import SplineBasis
from .meb import minimum_enclosing_ball
from .singleindex import (SingleIndexConfig, build_encodings, mc_risk,
                          run_single_index)

__all__ = [
    "SplineBasis",
    "minimum_enclosing_ball",
    "SingleIndexConfig",
    "build_encodings",
    "run_single_index",
    "mc_risk",
]
