"""Convex compact sets, seminorms, and the projection/distance oracles."""

from .sets import (
    Ball,
    Box,
    ConvexCompactSet,
    Ellipsoid,
    Ellitope,
    HalfspaceCut,
    MonotoneParamSet,
    PNormCap,
    SeminormBallCut,
    UnitBox,
    project,
)
from .seminorms import Seminorm, seminorm_eval
from .distance import min_seminorm_distance, seminorm_distance_to_point

__all__ = [
    "Ball",
    "Box",
    "ConvexCompactSet",
    "Ellipsoid",
    "Ellitope",
    "HalfspaceCut",
    "MonotoneParamSet",
    "PNormCap",
    "SeminormBallCut",
    "UnitBox",
    "Seminorm",
    "project",
    "seminorm_eval",
    "min_seminorm_distance",
    "seminorm_distance_to_point",
]
