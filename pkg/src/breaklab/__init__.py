"""breaklab: numerical laboratory for circle homeomorphisms with breaks."""

from .circle import Arc, arc_length, circle_distance, circular_order, frac, lift_vector
from .maps import (
    BreakPoint,
    OneBreakMoebius,
    PHomeomorphism,
    RigidRotation,
    TwoBreakMoebius,
    TwoBreakPL,
    build_family,
    c1_moebius_twist,
    conjugate_map,
)

__all__ = [
    "Arc", "arc_length", "circle_distance", "circular_order", "frac",
    "lift_vector", "BreakPoint", "PHomeomorphism", "RigidRotation",
    "TwoBreakPL", "TwoBreakMoebius", "OneBreakMoebius", "build_family",
    "conjugate_map", "c1_moebius_twist",
]

__version__ = "0.1.0"
