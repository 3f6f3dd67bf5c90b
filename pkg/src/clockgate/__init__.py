"""Simulation and design tools for a two-ion phase gate driven by differential Stark shifts."""
from .analysis import FidelityReport, IdealGate, bell_test, conditional_phase, z_compensated_process_fidelity
from .dynamics import GateResult, PropagationSettings, propagate, run_gate
from .hamiltonians import ModelTier, build
from .model import GateDesign, ca43_design, design_gate, scaled_design, validity_report
from .sequencer import compose_echo, plain_sequence

__version__ = "0.1.0"
