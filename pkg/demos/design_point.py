"""
Solving for the laser coupling
==============================

At ``Delta = omega0 / 2`` the two qubit levels sit symmetrically about
the mediator level, so their modulated Stark shifts are equal and
opposite. One closed loop then gives a quarter turn of conditional phase
when ``|g|^2 = delta omega0 / (8 eta)``.
"""

import math

from clockgate import ca43_design
from clockgate.model import (
    CA43_OMEGA0,
    design_gate,
    predicted_conditional_phase,
    validity_report,
)

design = ca43_design()
g = abs(design.lasers.g_a[0])
print(f"|g|  = 2 pi x {g / (2 * math.pi) / 1e6:.4f} MHz")
print(f"T    = {design.gate_time * 1e3:.3f} ms")
print(f"Phi  = {predicted_conditional_phase(design):.6f} rad")

# the approximations behind the effective model, as ratios against 0.1
for name, check in validity_report(design).items():
    print(f"  {name:<13} {check.value:.3e}  {'ok' if check.passed else 'VIOLATED'}")

# Phi grows as |g|^4 at fixed delta
for scale in (0.5, 2 ** -0.25, 1.0, 2 ** 0.25):
    d = design_gate(design.encoding, design.trap, design.delta_loop, coupling=scale * g)
    print(f"g x {scale:.4f}: Phi / (pi/2) = {predicted_conditional_phase(d) / (math.pi / 2):.4f}")

# moving the Raman detuning away from omega0/2 costs coupling strength
quarter = design_gate(design.encoding, design.trap, design.delta_loop, delta_raman=CA43_OMEGA0 / 4)
print(f"at Delta = omega0/4 the gate needs |g| = 2 pi x {abs(quarter.lasers.g_a[0]) / (2 * math.pi) / 1e6:.4f} MHz")
