"""Physical parameters of the gate and the closed-form design relations.

All frequencies are angular (rad/s). The adiabatically eliminated
coefficients follow the convention

    chi_up   = -(|g_A,up|^2 + |g_B,up|^2) / Delta
    chi_down = -(|g_A,down|^2 + |g_B,down|^2) / (Delta - omega0)
    theta_up   = -g_B,up g_A,up^* / Delta
    theta_down = -g_B,down g_A,down^* / (Delta - omega0)

so that the per-ion effective Hamiltonian is
``sum_m [chi_m + (i theta_m eta e^{-i phi_i} a^dag e^{i delta t} + h.c.)] |m><m|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2 * math.pi
LEVELS = ("up", "down")
BRANCHES = ("uu", "ud", "du", "dd")

# relative guard band around the Raman poles, in units of the largest coupling
POLE_GUARD = 10.0
DEFAULT_VALIDITY_THRESHOLD = 0.1


class SingularDetuningError(ValueError):
    pass


class GeometryError(ValueError):
    pass


class DesignError(ValueError):
    pass


def two_pi(hz: float) -> float:
    """Convert an ordinary frequency in Hz to rad/s."""
    return TWO_PI * hz


@dataclass(frozen=True)
class Encoding:
    omega0: float
    gamma_d: float = 0.0
    label: str = ""
    mediator_occupied_during_gate: bool = False

    def __post_init__(self):
        if not self.omega0 > 0:
            raise DesignError("omega0 must be positive")
        if self.gamma_d < 0:
            raise DesignError("gamma_d must be non-negative")


@dataclass(frozen=True)
class TrapMode:
    nu: float
    eta: float
    mode_kind: str = "cm"

    def __post_init__(self):
        if not self.nu > 0:
            raise DesignError("trap frequency must be positive")
        if not 0 < self.eta < 1:
            raise DesignError("Lamb-Dicke parameter must lie in (0, 1)")
        if self.mode_kind not in ("cm", "stretch"):
            raise DesignError(f"unknown mode kind {self.mode_kind!r}")


def _per_level(g) -> tuple:
    if isinstance(g, Mapping):
        return complex(g["up"]), complex(g["down"])
    return complex(g), complex(g)


@dataclass(frozen=True)
class LaserPair:
    """Two Raman beams A (lower frequency) and B.

    ``g_a`` and ``g_b`` are either one complex coupling shared by both qubit
    levels or a mapping ``{"up": ..., "down": ...}``.
    """

    g_a: object
    g_b: object
    delta_raman: float
    phi_a: float = 0.0
    phi_b: float = 0.0
    dkz: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "g_a", _per_level(self.g_a))
        object.__setattr__(self, "g_b", _per_level(self.g_b))

    def coupling(self, laser: str, level: str) -> complex:
        pair = self.g_a if laser == "A" else self.g_b
        return pair[LEVELS.index(level)]

    @property
    def max_coupling(self) -> float:
        return max(abs(g) for g in self.g_a + self.g_b)

    def scaled(self, factor: float) -> "LaserPair":
        return replace(
            self,
            g_a={"up": self.g_a[0] * factor, "down": self.g_a[1] * factor},
            g_b={"up": self.g_b[0] * factor, "down": self.g_b[1] * factor},
        )


def check_poles(lasers: LaserPair, encoding: Encoding) -> None:
    band = POLE_GUARD * lasers.max_coupling
    d_up = lasers.delta_raman
    d_down = lasers.delta_raman - encoding.omega0
    if d_up == 0 or d_down == 0 or abs(d_up) < band or abs(d_down) < band:
        raise SingularDetuningError(
            f"Raman detuning {d_up:.6g} rad/s is within {band:.3g} rad/s of a pole (0 or omega0)"
        )


@dataclass(frozen=True)
class IonGeometry:
    z0_1: float
    z0_2: float

    def __post_init__(self):
        if self.z0_1 == self.z0_2:
            raise GeometryError("ions must sit at distinct positions")

    @classmethod
    def from_spacing_phase(cls, spacing_phase: float = math.pi, dkz: float = 1.0) -> "IonGeometry":
        """Place ion 1 at the origin and ion 2 so that ``dkz * (z0_1 - z0_2) = spacing_phase``."""
        return cls(0.0, -spacing_phase / dkz)

    def spacing_phase(self, dkz: float) -> float:
        return dkz * (self.z0_1 - self.z0_2)

    def ion_phases(self, lasers: LaserPair) -> tuple:
        base = lasers.phi_b - lasers.phi_a
        return (base - lasers.dkz * self.z0_1, base - lasers.dkz * self.z0_2)

    def has_opposite_forces(self, dkz: float, atol: float = 1e-6) -> bool:
        offset = math.remainder(self.spacing_phase(dkz) - math.pi, TWO_PI)
        return abs(offset) < atol


@dataclass(frozen=True)
class StarkCoefficients:
    chi_up: float
    chi_down: float
    theta_up: complex
    theta_down: complex

    def chi(self, level: str) -> float:
        return self.chi_up if level == "up" else self.chi_down

    def theta(self, level: str) -> complex:
        return self.theta_up if level == "up" else self.theta_down


@dataclass(frozen=True)
class GateDesign:
    encoding: Encoding
    trap: TrapMode
    lasers: LaserPair
    geometry: IonGeometry = field(default_factory=IonGeometry.from_spacing_phase)
    delta_loop: float = two_pi(1e3)
    n_loops: int = 1
    include_static_stark: bool = False
    opposite_forces: bool = True

    def __post_init__(self):
        if self.n_loops < 1:
            raise DesignError("n_loops must be >= 1")
        if self.delta_loop == 0:
            raise DesignError("gate detuning delta must be non-zero")
        # the loop detuning must sit far inside the sideband; exactly nu/50 is accepted
        if abs(self.delta_loop) > self.trap.nu / 50 * (1 + 1e-12):
            raise DesignError(f"delta={self.delta_loop:.4g} must satisfy delta <= nu/50")
        if self.opposite_forces and not self.geometry.has_opposite_forces(self.lasers.dkz):
            raise GeometryError("ion spacing does not satisfy dkz * dz0 = (2n+1) pi")
        check_poles(self.lasers, self.encoding)

    @property
    def gate_time(self) -> float:
        return self.n_loops * TWO_PI / abs(self.delta_loop)

    def coefficients(self) -> StarkCoefficients:
        return stark_coefficients(self.lasers, self.encoding)


def stark_coefficients(lasers: LaserPair, encoding: Encoding) -> StarkCoefficients:
    check_poles(lasers, encoding)
    d_up = lasers.delta_raman
    d_down = lasers.delta_raman - encoding.omega0
    ga_u, ga_d = lasers.g_a
    gb_u, gb_d = lasers.g_b
    return StarkCoefficients(
        chi_up=-(abs(ga_u) ** 2 + abs(gb_u) ** 2) / d_up,
        chi_down=-(abs(ga_d) ** 2 + abs(gb_d) ** 2) / d_down,
        theta_up=-gb_u * ga_u.conjugate() / d_up,
        theta_down=-gb_d * ga_d.conjugate() / d_down,
    )


def required_coupling(delta_loop: float, trap: TrapMode, encoding: Encoding) -> float:
    """Coupling |g| = |g_A| = |g_B| giving a pi/2 conditional phase at Delta = omega0/2."""
    if delta_loop <= 0 or encoding.omega0 <= 0:
        raise DesignError("delta and omega0 must be positive")
    return math.sqrt(delta_loop * encoding.omega0 / (8 * trap.eta))


def discrimination_residual(lasers: LaserPair, encoding: Encoding, trap: TrapMode, delta_loop: float) -> float:
    """Signed mismatch of the maximal-entanglement condition; zero at Phi = pi/2."""
    c = stark_coefficients(lasers, encoding)
    # |theta_up - theta_down| with the minus signs of the definitions cancelling
    lhs = abs(c.theta_up - c.theta_down)
    return lhs - abs(delta_loop / (2 * trap.eta))


def solve_coupling(
    encoding: Encoding,
    trap: TrapMode,
    delta_loop: float,
    delta_raman: float | None = None,
    phi_a: float = 0.0,
    phi_b: float = 0.0,
    dkz: float = 1.0,
) -> float:
    """Equal real coupling magnitude that zeroes the discrimination residual.

    Works at any Raman detuning away from the poles; at ``omega0/2`` it
    reproduces :func:`required_coupling`.
    """
    if delta_raman is None:
        delta_raman = encoding.omega0 / 2

    d_up, d_down = delta_raman, delta_raman - encoding.omega0

    def residual(g):
        # formulas inlined so the pole guard does not trip while bracketing
        return abs(-g * g / d_up + g * g / d_down) - abs(delta_loop / (2 * trap.eta))

    hi = required_coupling(abs(delta_loop), trap, encoding)
    while residual(hi) < 0:
        hi *= 2
    g = brentq(residual, 0.0, hi, xtol=1e-14 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)
    check_poles(LaserPair(g, g, delta_raman, phi_a, phi_b, dkz), encoding)
    return g


def branch_force(m1: str, m2: str, coeffs: StarkCoefficients, trap: TrapMode, geometry: IonGeometry, lasers: LaserPair) -> complex:
    """Total force amplitude on the mode for spins (m1, m2) with opposite per-ion forces.

    Convention: ``H / hbar = f a^dag e^{i delta t} + h.c.``.
    """
    if not geometry.has_opposite_forces(lasers.dkz):
        raise GeometryError("branch_force needs dkz * dz0 = (2n+1) pi; use per-ion phases instead")
    phi_1, _ = geometry.ion_phases(lasers)
    return 1j * (coeffs.theta(m1) - coeffs.theta(m2)) * trap.eta * np.exp(-1j * phi_1)


def predicted_conditional_phase(design: GateDesign) -> float:
    """Phi = 2 pi n |(theta_up - theta_down) eta / delta|^2 for the designed gate."""
    c = design.coefficients()
    f = abs(c.theta_up - c.theta_down) * design.trap.eta
    return TWO_PI * design.n_loops * (f / design.delta_loop) ** 2


@dataclass(frozen=True)
class Check:
    value: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.value < self.bound


@dataclass(frozen=True)
class ValidityReport:
    check_I_up: Check
    check_I_down: Check
    check_II: Check
    check_III: Check

    def items(self):
        return [
            ("check_I_up", self.check_I_up),
            ("check_I_down", self.check_I_down),
            ("check_II", self.check_II),
            ("check_III", self.check_III),
        ]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for _, c in self.items())


def validity_report(design: GateDesign, n_bar: float = 0.0, threshold: float = DEFAULT_VALIDITY_THRESHOLD) -> ValidityReport:
    """Ratios behind the adiabatic-elimination, resolved-sideband and Lamb-Dicke approximations."""
    lasers, enc, trap = design.lasers, design.encoding, design.trap
    c = design.coefficients()
    g_up = max(abs(lasers.g_a[0]), abs(lasers.g_b[0]))
    g_down = max(abs(lasers.g_a[1]), abs(lasers.g_b[1]))
    return ValidityReport(
        check_I_up=Check(g_up / abs(lasers.delta_raman), threshold),
        check_I_down=Check(g_down / abs(lasers.delta_raman - enc.omega0), threshold),
        check_II=Check(max(abs(c.theta_up), abs(c.theta_down)) / trap.nu, threshold),
        check_III=Check(trap.eta ** 2 * (n_bar + 0.5), threshold),
    )


def design_gate(
    encoding: Encoding,
    trap: TrapMode,
    delta_loop: float,
    delta_raman: float | None = None,
    coupling: float | None = None,
    n_loops: int = 1,
    include_static_stark: bool = False,
    phi_a: float = 0.0,
    phi_b: float = 0.0,
    dkz: float = 1.0,
    spacing_phase: float = math.pi,
) -> GateDesign:
    """Assemble a ``GateDesign``, solving for the coupling when it is not given.

    With ``n_loops > 1`` the solved coupling still targets pi/2 per loop; use
    ``coupling`` to set it explicitly otherwise.
    """
    if delta_raman is None:
        delta_raman = encoding.omega0 / 2
    if coupling is None:
        coupling = solve_coupling(encoding, trap, delta_loop, delta_raman, phi_a, phi_b, dkz)
    lasers = LaserPair(coupling, coupling, delta_raman, phi_a, phi_b, dkz)
    return GateDesign(
        encoding=encoding,
        trap=trap,
        lasers=lasers,
        geometry=IonGeometry.from_spacing_phase(spacing_phase, dkz),
        delta_loop=delta_loop,
        n_loops=n_loops,
        include_static_stark=include_static_stark,
        opposite_forces=math.isclose(math.remainder(spacing_phase - math.pi, TWO_PI), 0.0, abs_tol=1e-6),
    )


# parameters quoted for 43Ca+ with the S1/2 <-> D5/2 quadrupole transition
CA43_OMEGA0 = two_pi(3.226e9)
CA43_GAMMA_D = two_pi(0.18)
CA43_NU_CM = two_pi(1.2e6)


def ca43_design(delta_loop: float = two_pi(1e3), eta: float = 0.1, **kwargs) -> GateDesign:
    """Ground-state clock-qubit design point for 43Ca+."""
    enc = Encoding(CA43_OMEGA0, CA43_GAMMA_D, "43Ca+ S1/2 clock")
    trap = TrapMode(CA43_NU_CM, eta, "cm")
    return design_gate(enc, trap, delta_loop, **kwargs)


def scaled_design(coupling_scale: float = 1.0, **kwargs) -> GateDesign:
    """Dimensionless parameter set (nu = 1) for full-model comparisons.

    ``coupling_scale`` multiplies the designed coupling and re-solves delta
    so that the gate still targets pi/2 (delta scales as g^2).
    """
    omega0, nu, eta = 200.0, 1.0, 0.1
    delta = 0.02 * coupling_scale ** 2
    enc = Encoding(omega0, 0.0, "scaled")
    trap = TrapMode(nu, eta, "cm")
    return design_gate(enc, trap, delta, delta_raman=100.0, **kwargs)
