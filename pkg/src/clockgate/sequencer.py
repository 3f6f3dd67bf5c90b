"""Gate schedules: closed-loop drive segments with ideal pulses in between."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .model import GateDesign

XX = np.kron(qcore.SIGMA_X, qcore.SIGMA_X)


@dataclass(frozen=True)
class Segment:
    delta: float
    duration: float
    drive: bool = True


@dataclass(frozen=True, eq=False)
class EchoSequence:
    """Drive segments plus instantaneous qubit pulses.

    ``pulses`` holds ``(index, unitary)`` pairs; the pulse is applied right
    after segment ``index``.
    """

    segments: tuple
    pulses: tuple = ()

    def __post_init__(self):
        for seg in self.segments:
            if seg.drive and not math.isclose(seg.duration * abs(seg.delta), 2 * math.pi, rel_tol=1e-12):
                raise ValueError("every drive segment must be one closed loop, duration = 2 pi / delta")
        for idx, u in self.pulses:
            u = np.asarray(u)
            if u.shape != (4, 4) or not qcore.is_unitary(u, atol=1e-12):
                raise ValueError(f"pulse after segment {idx} is not a 4x4 unitary")
            if not 0 <= idx < len(self.segments):
                raise ValueError(f"pulse index {idx} out of range")

    @property
    def total_time(self) -> float:
        return sum(s.duration for s in self.segments)

    @property
    def drive_time(self) -> float:
        return sum(s.duration for s in self.segments if s.drive)


def plain_sequence(design: GateDesign) -> EchoSequence:
    loop = Segment(design.delta_loop, 2 * math.pi / abs(design.delta_loop))
    return EchoSequence((loop,) * design.n_loops)


def compose_echo(design: GateDesign) -> EchoSequence:
    """Split the gate into two halves at sqrt(2) delta with X(x)X after each half.

    At fixed coupling the per-loop phase scales as 1/delta^2, so each loop at
    ``sqrt(2) delta`` carries half the conditional phase and the drive time
    grows by sqrt(2). The second pulse restores the qubit populations.
    """
    delta = math.sqrt(2) * design.delta_loop
    loop = Segment(delta, 2 * math.pi / abs(delta))
    n = design.n_loops
    return EchoSequence((loop,) * (2 * n), ((n - 1, XX), (2 * n - 1, XX)))


def apply_pulse(state: qcore.QuantumState, pulse) -> qcore.QuantumState:
    """Ideal instantaneous qubit pulse ``(pulse (x) 1_mode) |state>``."""
    pulse = np.asarray(pulse, dtype=complex)
    if pulse.shape != (4, 4) or not qcore.is_unitary(pulse, atol=1e-12):
        raise ValueError("pulse must be a 4x4 unitary")
    f = state.dims.factors
    if len(f) != 3 or f[:2] != (2, 2):
        raise qcore.DimensionError("apply_pulse needs dims [2, 2, n_max]")
    return qcore.QuantumState(state.dims, np.kron(pulse, np.eye(f[2])) @ state.amplitudes)
