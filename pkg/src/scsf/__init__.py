"""Numerical experiments for curve shortening flow of closed space curves."""

from .curve import Curve, FourierSpec, circle, synthesize_fourier_curve
from .flow import FlowConfig, FlowTrace, run
from .ratio import min_huisken_ratio, min_symmetric_ratio
from .singularity import analyze, classify_type, estimate_blowup_time, rescale_curve, roundness
from .symmetry import Hyperplane, build_symmetric_pairing, is_symmetric_two_crossing

__all__ = [
    "Curve", "FourierSpec", "circle", "synthesize_fourier_curve",
    "FlowConfig", "FlowTrace", "run",
    "min_huisken_ratio", "min_symmetric_ratio",
    "analyze", "classify_type", "estimate_blowup_time", "rescale_curve", "roundness",
    "Hyperplane", "build_symmetric_pairing", "is_symmetric_two_crossing",
]
