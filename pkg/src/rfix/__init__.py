"""Robust fixed-order controller synthesis for interval plants via (G)KYP LMIs."""

from .poly import Controller, IntervalPlant, closed_loop_polynomial, hurwitz_from_controller, is_strictly_hurwitz
from .sdp import FEASIBLE, INFEASIBLE, NUMERICAL_FAILURE, SdpProblem, solve
from .synth import PerformanceSpec, SynthesisResult, SynthesisSpec, check_controller, synthesize

__all__ = [
    "Controller", "IntervalPlant", "closed_loop_polynomial", "hurwitz_from_controller", "is_strictly_hurwitz",
    "FEASIBLE", "INFEASIBLE", "NUMERICAL_FAILURE", "SdpProblem", "solve",
    "PerformanceSpec", "SynthesisResult", "SynthesisSpec", "check_controller", "synthesize",
]
