"""Entanglement-based clock synchronization: simulation, estimation and checks."""

from . import causal, channels, distill, protocols, qcore, qec
from .protocols import ClockFrame, LikelihoodModel, estimate_offset, run_product_protocol, run_qcs, run_sct

__version__ = "0.1.0"

__all__ = [
    "causal", "channels", "distill", "protocols", "qcore", "qec",
    "ClockFrame", "LikelihoodModel", "estimate_offset", "run_qcs", "run_sct", "run_product_protocol",
]
