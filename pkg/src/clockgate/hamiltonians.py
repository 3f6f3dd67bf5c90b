"""Time-dependent generators for the three model tiers.

Every generator has the form

    H(t) = H_static + sum_k (C_k e^{i w_k t} + C_k^dag e^{-i w_k t})

(units of rad/s, hbar = 1), which keeps evaluation cheap and makes the
fastest frequency and the period explicit.

Tiers
-----
FORCE
    State-dependent force on the CM mode, spins ``{up, down}`` per ion,
    interaction picture of the mode.
EFFECTIVE
    Lamb-Dicke, resolved-sideband Hamiltonian after adiabatic elimination,
    with optional static Stark shifts and arbitrary per-ion phases.
FULL
    Both ions keep the mediator level ``e``. The frame rotates ``e`` at the
    frequency of laser B, so ``up`` sits at 0, ``down`` at ``-omega0``, ``e``
    at ``-Delta`` and the mode keeps ``nu a^dag a``. Laser B is then static and
    laser A oscillates at ``nu - delta``. The motional factor
    ``exp(i k_l z (a + a^dag))`` is exponentiated exactly. The beams are taken
    counter-propagating along the trap axis with ``k_B = -k_A = dkz / 2``, so
    each beam carries half the Lamb-Dicke parameter.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import qcore
from .model import LEVELS, GateDesign, StarkCoefficients, branch_force

UP, DOWN, EXCITED = 0, 1, 2


class ModelTier(enum.Enum):
    FORCE = "force"
    EFFECTIVE = "effective"
    FULL = "full"


@dataclass(frozen=True, eq=False)
class Generator:
    tier: ModelTier
    dims: qcore.SpaceDims
    static: np.ndarray
    drives: tuple  # ((C_k, w_k), ...)
    fastest_frequency: float
    period: float | None = None
    frame: np.ndarray | None = None  # diagonal of the frame Hamiltonian, see ``to_interaction_frame``
    dressing_terms: tuple = field(default=())
    # contiguous diagonal blocks of this size are never coupled (qubit labels
    # are conserved by the reduced tiers), so steps can be exponentiated per block
    block_size: int | None = None

    def __call__(self, t: float) -> np.ndarray:
        h = self.static.copy()
        for c, w in self.drives:
            term = c * np.exp(1j * w * t)
            h += term + term.conj().T
        return h

    def to_interaction_frame(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        """Map a state from the generator's frame to the qubit/mode interaction picture."""
        if self.frame is None:
            return amplitudes
        return np.exp(1j * self.frame * t) * amplitudes

    def dressing(self, t: float = 0.0) -> np.ndarray:
        """Unitary adiabatic dressing ``exp(S - S^dag)`` of the bare basis.

        ``S`` is the first-order virtual admixture of ``e`` induced by each
        laser term, so column ``k`` is bare state ``k`` as a smoothly
        switched-on field leaves it. Identity for the reduced tiers.
        """
        s = np.zeros((self.dims.total, self.dims.total), dtype=complex)
        for piece, w, gap in self.dressing_terms:
            s += piece * np.exp(1j * w * t) / gap
        return expm(s - s.conj().T)


def _ops(n_levels: int, n_max: int):
    dims = qcore.SpaceDims((n_levels, n_levels, n_max))
    a = qcore.destroy(n_max).entries
    eye_l = np.eye(n_levels, dtype=complex)
    eye_n = np.eye(n_max, dtype=complex)

    def ion(op, i):
        return np.kron(op, eye_l) if i == 0 else np.kron(eye_l, op)

    def embed(ion_op, i, mode_op=eye_n):
        return np.kron(ion(ion_op, i), mode_op)

    return dims, a, embed


def _ket_bra(n_levels: int, r: int, c: int) -> np.ndarray:
    m = np.zeros((n_levels, n_levels), dtype=complex)
    m[r, c] = 1.0
    return m


def build_force(design: GateDesign, n_max: int = 20, delta: float | None = None) -> Generator:
    """Spin-dependent force with opposite forces on the two ions."""
    delta = design.delta_loop if delta is None else delta
    dims, a, embed = _ops(2, n_max)
    c = design.coefficients()
    drive = np.zeros((dims.total, dims.total), dtype=complex)
    fmax = 0.0
    for m1 in LEVELS:
        for m2 in LEVELS:
            f = branch_force(m1, m2, c, design.trap, design.geometry, design.lasers)
            fmax = max(fmax, abs(f))
            proj = np.kron(_ket_bra(2, LEVELS.index(m1), LEVELS.index(m1)), _ket_bra(2, LEVELS.index(m2), LEVELS.index(m2)))
            drive += f * np.kron(proj, a.conj().T)
    return Generator(
        tier=ModelTier.FORCE,
        dims=dims,
        static=np.zeros((dims.total, dims.total), dtype=complex),
        drives=((drive, delta),),
        fastest_frequency=max(abs(delta), fmax),
        period=2 * np.pi / abs(delta),
        block_size=n_max,
    )


def build_effective(design: GateDesign, n_max: int = 20, include_static_stark: bool | None = None, delta: float | None = None) -> Generator:
    """Lamb-Dicke effective Hamiltonian with per-ion phases ``phi_i``."""
    if include_static_stark is None:
        include_static_stark = design.include_static_stark
    delta = design.delta_loop if delta is None else delta
    dims, a, embed = _ops(2, n_max)
    c: StarkCoefficients = design.coefficients()
    eta = design.trap.eta
    phases = design.geometry.ion_phases(design.lasers)
    static = np.zeros((dims.total, dims.total), dtype=complex)
    drive = np.zeros_like(static)
    adag = a.conj().T
    for i in (0, 1):
        for k, m in enumerate(LEVELS):
            proj = _ket_bra(2, k, k)
            if include_static_stark:
                static += c.chi(m) * embed(proj, i)
            drive += 1j * c.theta(m) * eta * np.exp(-1j * phases[i]) * embed(proj, i, adag)
    diag = np.diag(static).real
    spread = float(np.ptp(diag)) if diag.size else 0.0
    fmax = float(np.max(np.abs(drive))) if drive.size else 0.0
    return Generator(
        tier=ModelTier.EFFECTIVE,
        dims=dims,
        static=static,
        drives=((drive, delta),),
        fastest_frequency=max(abs(delta), fmax, spread),
        period=2 * np.pi / abs(delta),
        block_size=n_max,
    )


def displacement_factor(eta_l: float, n_max: int) -> np.ndarray:
    """``exp(i eta_l (a + a^dag))`` by exact matrix exponentiation on the truncated space."""
    a = qcore.destroy(n_max).entries
    return expm(1j * eta_l * (a + a.conj().T))


def build_full(design: GateDesign, n_max: int = 20, delta: float | None = None) -> Generator:
    """Three-level ions coupled to the mode by both Raman beams, no elimination."""
    delta = design.delta_loop if delta is None else delta
    dims, a, embed = _ops(3, n_max)
    lasers, enc, trap = design.lasers, design.encoding, design.trap
    big_delta, omega0, nu = lasers.delta_raman, enc.omega0, trap.nu

    energies = {UP: 0.0, DOWN: -omega0, EXCITED: -big_delta}
    static = np.zeros((dims.total, dims.total), dtype=complex)
    for i in (0, 1):
        for level, e in energies.items():
            static += e * embed(_ket_bra(3, level, level), i)
    number = np.kron(np.eye(9), a.conj().T @ a)
    static += nu * number
    frame = np.diag(static).real.copy()

    k_b, k_a = lasers.dkz / 2, -lasers.dkz / 2
    eta_b, eta_a = trap.eta / 2, -trap.eta / 2
    disp = {"A": displacement_factor(eta_a, n_max), "B": displacement_factor(eta_b, n_max)}
    wave = {"A": k_a, "B": k_b}
    optical_phase = {"A": lasers.phi_a, "B": lasers.phi_b}
    detuning = {"A": nu - delta, "B": 0.0}
    z0 = (design.geometry.z0_1, design.geometry.z0_2)

    drive_a = np.zeros_like(static)
    dressing = []
    for i in (0, 1):
        for laser in ("A", "B"):
            for level, m in zip((UP, DOWN), LEVELS):
                g = lasers.coupling(laser, m)
                if g == 0:
                    continue
                amp = g * np.exp(-1j * optical_phase[laser] + 1j * wave[laser] * z0[i])
                piece = amp * embed(_ket_bra(3, EXCITED, level), i, disp[laser])
                if laser == "B":
                    static += piece + piece.conj().T
                else:
                    drive_a += piece
                gap = energies[level] - energies[EXCITED] - detuning[laser]
                dressing.append((piece, detuning[laser], gap))

    fastest = max(abs(big_delta), abs(big_delta - omega0), nu, abs(delta))
    return Generator(
        tier=ModelTier.FULL,
        dims=dims,
        static=static,
        drives=((drive_a, nu - delta),),
        fastest_frequency=fastest,
        period=2 * np.pi / abs(nu - delta),
        frame=frame,
        dressing_terms=tuple(dressing),
    )


def build(tier: ModelTier, design: GateDesign, n_max: int = 20, delta: float | None = None) -> Generator:
    tier = ModelTier(tier)
    if tier is ModelTier.FORCE:
        return build_force(design, n_max, delta=delta)
    if tier is ModelTier.EFFECTIVE:
        return build_effective(design, n_max, delta=delta)
    return build_full(design, n_max, delta=delta)


def eliminate_excited_numeric(design: GateDesign) -> StarkCoefficients:
    """Numerically eliminate ``e`` from the Raman Lambda system of each qubit level.

    For each level the two Raman-resonant paths (one photon from A or from B)
    and ``e`` form a three-state system whose exact low-energy block gives the
    shift (trace) and the Raman coupling (off-diagonal). Sign conventions are
    mapped onto those of :func:`clockgate.model.stark_coefficients`, which
    carry an overall minus sign relative to the lab-frame light shift.
    """
    lasers, enc = design.lasers, design.encoding
    gaps = {"up": lasers.delta_raman, "down": lasers.delta_raman - enc.omega0}
    chi, theta = {}, {}
    for m in LEVELS:
        ga, gb = lasers.coupling("A", m), lasers.coupling("B", m)
        h = np.array(
            [[0, 0, np.conj(ga)], [0, 0, np.conj(gb)], [ga, gb, -gaps[m]]],
            dtype=complex,
        )
        evals, evecs = np.linalg.eigh(h)
        # the two eigenstates with the least e-character span the ground block
        order = np.argsort(np.abs(evecs[2]) ** 2)[:2]
        p = evecs[:2, order]
        # orthonormalize the projection (des Cloizeaux effective Hamiltonian)
        u, _, vh = np.linalg.svd(p)
        basis = u @ vh
        h_eff = basis @ np.diag(evals[order]) @ basis.conj().T
        chi[m] = -float(np.trace(h_eff).real)
        theta[m] = -complex(h_eff[1, 0])
    return StarkCoefficients(chi["up"], chi["down"], theta["up"], theta["down"])
