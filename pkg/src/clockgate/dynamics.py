"""Fixed-step unitary propagation and gate runs.

The stepper evaluates the generator at the two Gauss-Legendre nodes of each
step and exponentiates the fourth-order Magnus generator

    K = dt/2 (H1 + H2) - i sqrt(3)/12 dt^2 [H2, H1]

through an eigendecomposition, so every step is unitary to rounding. The
second-order midpoint rule ``K = dt H(t + dt/2)`` is available as
``method="midpoint"``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import qcore
from .hamiltonians import EXCITED, Generator, ModelTier, build
from .model import BRANCHES, GateDesign

SQRT3 = math.sqrt(3.0)
GAUSS_NODES = (0.5 - SQRT3 / 6, 0.5 + SQRT3 / 6)
TRUNCATION_LIMIT = 1e-8
CLOSURE_FLAG = 0.01


class ConvergenceError(RuntimeError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class PropagationSettings:
    t_final: float = 0.0
    steps_per_fastest_period: int = 64
    record_stride: int = 1
    convergence_check: bool = False
    method: str = "magnus4"
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if self.steps_per_fastest_period < 16:
            raise ValueError("steps_per_fastest_period must be >= 16")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.method not in ("magnus4", "midpoint"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: list
    alpha: np.ndarray
    phase: np.ndarray
    n_mean: np.ndarray
    norm_err: np.ndarray
    convergence_error: float | None = None

    @property
    def final_state(self) -> qcore.QuantumState:
        return self.states[-1]


def step_count(generator: Generator, t_final: float, settings: PropagationSettings) -> int:
    periods = t_final * generator.fastest_frequency / (2 * math.pi)
    return max(settings.steps_per_fastest_period, int(math.ceil(periods * settings.steps_per_fastest_period)))


def _step_unitary(generator: Generator, t: float, dt: float, method: str) -> np.ndarray:
    n = generator.dims.total
    b = generator.block_size or n
    blocks = range(0, n, b)

    def diag_blocks(h):
        return np.stack([h[s:s + b, s:s + b] for s in blocks])

    if method == "midpoint":
        k = dt * diag_blocks(generator(t + dt / 2))
    else:
        h1 = diag_blocks(generator(t + GAUSS_NODES[0] * dt))
        h2 = diag_blocks(generator(t + GAUSS_NODES[1] * dt))
        k = dt / 2 * (h1 + h2) - 1j * SQRT3 / 12 * dt * dt * (h2 @ h1 - h1 @ h2)
    k = (k + np.swapaxes(k.conj(), -1, -2)) / 2
    w, v = np.linalg.eigh(k)
    ub = (v * np.exp(-1j * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)
    if len(ub) == 1:
        return ub[0]
    u = np.zeros((n, n), dtype=complex)
    for i, s in enumerate(blocks):
        u[s:s + b, s:s + b] = ub[i]
    return u


def _mode_tail(dims: qcore.SpaceDims, psi: np.ndarray) -> np.ndarray:
    n_max = dims.factors[-1]
    blocks = psi.reshape(-1, n_max, psi.shape[-1])
    return np.sum(np.abs(blocks[:, -2:, :]) ** 2, axis=(0, 1))


def _required_n_max(n_mean: float, n_max: int) -> int:
    n = n_max + 2
    while True:
        tail = qcore.coherent_tail_weight(math.sqrt(max(n_mean, 1e-12)), n)
        if tail < TRUNCATION_LIMIT / 10 or n > 4 * n_max + 50:
            return n
        n += 2


def _check_truncation(dims, psi, t):
    tail = _mode_tail(dims, psi)
    if np.max(tail) > TRUNCATION_LIMIT:
        n_mean = float(np.max(mode_number(dims, psi)))
        required = _required_n_max(n_mean, dims.factors[-1])
        raise qcore.TruncationError(
            f"top-two Fock population {np.max(tail):.2e} > {TRUNCATION_LIMIT:g} at t={t:.6g}; "
            f"increase n_max to about {required}",
            required,
        )


def mode_lowering(dims: qcore.SpaceDims, psi: np.ndarray) -> np.ndarray:
    """<a> for each column of ``psi``; the mode is the last factor."""
    n_max = dims.factors[-1]
    blocks = psi.reshape(-1, n_max, psi.shape[-1])
    sq = np.sqrt(np.arange(1, n_max))[None, :, None]
    return np.sum(blocks[:, :-1, :].conj() * sq * blocks[:, 1:, :], axis=(0, 1))


def mode_number(dims: qcore.SpaceDims, psi: np.ndarray) -> np.ndarray:
    n_max = dims.factors[-1]
    blocks = psi.reshape(-1, n_max, psi.shape[-1])
    n = np.arange(n_max)[None, :, None]
    return np.sum(np.abs(blocks) ** 2 * n, axis=(0, 1))


@dataclass
class _Run:
    times: np.ndarray
    snapshots: list
    overlaps: np.ndarray
    final: np.ndarray
    stride: int = 1


def _integrate(generator, psi0, t_final, settings, refs, n_steps=None) -> _Run:
    """Step all columns of ``psi0`` together, tracking overlaps with ``refs`` every step."""
    dims = generator.dims
    n = n_steps or step_count(generator, t_final, settings)
    dt = t_final / n
    psi = np.array(psi0, dtype=complex)
    overlaps = np.empty((n + 1, psi.shape[1]), dtype=complex)
    overlaps[0] = np.sum(refs.conj() * psi, axis=0)
    times, snaps = [0.0], [psi.copy()]
    for k in range(n):
        psi = _step_unitary(generator, k * dt, dt, settings.method) @ psi
        t = (k + 1) * dt
        _check_truncation(dims, psi, t)
        framed = generator.to_interaction_frame(psi.T, t).T if generator.frame is not None else psi
        overlaps[k + 1] = np.sum(refs.conj() * framed, axis=0)
        if (k + 1) % settings.record_stride == 0 or k + 1 == n:
            times.append(t)
            snaps.append(psi.copy())
    return _Run(np.array(times), snaps, overlaps, psi, settings.record_stride)


def period_propagator(generator: Generator, settings: PropagationSettings) -> np.ndarray:
    """Evolution operator over one period of the generator's time dependence."""
    tau = generator.period
    n = step_count(generator, tau, settings)
    dt = tau / n
    u = np.eye(generator.dims.total, dtype=complex)
    for k in range(n):
        u = _step_unitary(generator, k * dt, dt, settings.method) @ u
    return u


def _integrate_stroboscopic(generator, psi0, n_periods, u_period, refs) -> _Run:
    dims = generator.dims
    tau = generator.period
    psi = np.array(psi0, dtype=complex)
    overlaps = np.empty((n_periods + 1, psi.shape[1]), dtype=complex)
    framed = generator.to_interaction_frame(psi.T, 0.0).T
    overlaps[0] = np.sum(refs.conj() * framed, axis=0)
    times, snaps = [0.0], [psi.copy()]
    for k in range(n_periods):
        psi = u_period @ psi
        t = (k + 1) * tau
        _check_truncation(dims, psi, t)
        framed = generator.to_interaction_frame(psi.T, t).T
        overlaps[k + 1] = np.sum(refs.conj() * framed, axis=0)
        times.append(t)
        snaps.append(psi.copy())
    return _Run(np.array(times), snaps, overlaps, psi)


def _trajectory_from_run(generator, run: _Run, column: int, convergence_error=None) -> Trajectory:
    dims = generator.dims
    frames = [generator.to_interaction_frame(s[:, column], t) for s, t in zip(run.snapshots, run.times)]
    stack = np.array(frames).T
    alpha = mode_lowering(dims, stack)
    n_mean = mode_number(dims, stack)
    norm_err = np.abs(np.linalg.norm(stack, axis=0) - np.linalg.norm(stack[:, 0]))
    phase_all = np.unwrap(np.angle(run.overlaps[:, column]))
    idx = np.minimum(np.arange(len(run.times)) * run.stride, len(phase_all) - 1)
    idx[-1] = len(phase_all) - 1
    states = [qcore.QuantumState(dims, f) for f in frames]
    return Trajectory(run.times, states, alpha, phase_all[idx], n_mean, norm_err, convergence_error)


def propagate(generator: Generator, initial: qcore.QuantumState, settings: PropagationSettings, reference=None) -> Trajectory:
    """Propagate one state for ``settings.t_final``.

    ``reference`` (defaults to the initial state) is the state whose overlap
    phase is tracked and unwrapped step by step.
    """
    if initial.dims != generator.dims:
        raise qcore.DimensionError("generator and state dims differ")
    if settings.t_final <= 0:
        raise ValueError("t_final must be positive")
    ref = (reference if reference is not None else initial).amplitudes[:, None]
    psi0 = initial.amplitudes[:, None]
    run = _integrate(generator, psi0, settings.t_final, settings, ref)
    err = None
    if settings.convergence_check:
        err = _convergence_error(generator, psi0, settings, run.final)
    return _trajectory_from_run(generator, run, 0, err)


def _convergence_error(generator, psi0, settings, final):
    n = step_count(generator, settings.t_final, settings)
    fine = _integrate(generator, psi0, settings.t_final, settings, psi0, n_steps=2 * n).final
    err = float(np.max(np.linalg.norm(fine - final, axis=0)))
    if err > settings.convergence_tol:
        raise ConvergenceError(
            f"state error {err:.2e} vs half-step run exceeds {settings.convergence_tol:g}; "
            f"raise steps_per_fastest_period above {settings.steps_per_fastest_period}",
            err,
        )
    return err


def forced_oscillator_oracle(f: complex, delta: float, t):
    """Closed-form displacement and phase of the mode under ``f a^dag e^{i delta t} + h.c.``.

    Starting from the vacuum the state is ``e^{i phase} |alpha>`` with
    ``alpha = -(f/delta)(e^{i delta t} - 1)`` and
    ``phase = |f/delta|^2 (delta t - sin(delta t))``.
    """
    if delta == 0:
        raise ValueError("delta must be non-zero")
    t = np.asarray(t, dtype=float)
    alpha = -(f / delta) * (np.exp(1j * delta * t) - 1)
    phase = abs(f / delta) ** 2 * (delta * t - np.sin(delta * t))
    return alpha, phase


# ---------------------------------------------------------------- gate runs

@dataclass(frozen=True, eq=False)
class GateResult:
    tier: ModelTier
    design: GateDesign
    total_time: float
    final_states: dict
    qubit_propagator: np.ndarray
    branch_phases: np.ndarray
    conditional_phase: float
    single_ion_phases: tuple
    motional_residual: dict
    loop_closed: bool
    trajectories: dict = field(default_factory=dict)
    thermal_components: tuple = ()
    leakage: float = 0.0
    drive_time: float = 0.0
    convergence_error: float | None = None
    fidelity: object = None

    @property
    def max_motional_residual(self) -> float:
        return max(r["alpha"] for r in self.motional_residual.values())


def wrap_phase(x: float) -> float:
    """Reduce to (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if math.isclose(y, -math.pi, abs_tol=1e-15) else y


def conditional_from_phases(phases) -> float:
    """Half the alternating branch sum, which equals Phi for diag(1, e^{iPhi}, e^{iPhi}, 1)."""
    uu, ud, du, dd = phases
    return wrap_phase((ud + du - uu - dd) / 2)


def single_ion_from_phases(phases) -> tuple:
    """Phase of |up> relative to |down> on each ion, with the conditional part removed."""
    uu, ud, du, dd = phases
    return ((uu + ud - du - dd) / 2, (uu - ud + du - dd) / 2)


def thermal_weights(n_bar: float, tol: float = 1e-6) -> list:
    if n_bar <= 0:
        return [(0, 1.0)]
    if n_bar > 2:
        raise ValueError("thermal initial states are supported for n_bar <= 2")
    out, total, n = [], 0.0, 0
    while total < 1 - tol:
        p = n_bar ** n / (n_bar + 1) ** (n + 1)
        out.append((n, p))
        total += p
        n += 1
    return [(k, p / total) for k, p in out]


def _qubit_index(n_levels: int, label: int, n0: int, n_max: int) -> int:
    m1, m2 = divmod(label, 2)
    return int(np.ravel_multi_index((m1, m2, n0), (n_levels, n_levels, n_max)))


def _embed_pulse(pulse: np.ndarray, n_levels: int, n_max: int) -> np.ndarray:
    if n_levels == 2:
        full = pulse
    else:
        # act on the qubit pair, leave any component with an ion in e untouched
        full = np.eye(n_levels ** 2, dtype=complex)
        idx = [i * n_levels + j for i in (0, 1) for j in (0, 1)]
        full[np.ix_(idx, idx)] = pulse
    return np.kron(full, np.eye(n_max))


def _dressing_unitary(generator: Generator, t: float):
    if not generator.dressing_terms:
        return None
    return generator.dressing(t)


def run_gate(
    design: GateDesign,
    tier=ModelTier.EFFECTIVE,
    settings: PropagationSettings | None = None,
    sequence=None,
    n_max: int = 20,
    n_bar: float = 0.0,
    include_static_stark: bool | None = None,
    record_trajectories: bool = True,
) -> GateResult:
    """Propagate the four computational basis states (times the mode state) through the gate.

    ``sequence`` is an optional :class:`clockgate.sequencer.EchoSequence`;
    without it the gate is ``n_loops`` closed loops at ``design.delta_loop``.
    """
    tier = ModelTier(tier)
    settings = settings or PropagationSettings()
    if include_static_stark is not None:
        design = replace(design, include_static_stark=include_static_stark)
    n_levels = 3 if tier is ModelTier.FULL else 2
    dims = qcore.SpaceDims((n_levels, n_levels, n_max))

    if sequence is None:
        from .sequencer import plain_sequence

        sequence = plain_sequence(design)

    mode_states = thermal_weights(n_bar)
    columns = [(b, n0) for n0, _ in mode_states for b in range(4)]
    psi = np.zeros((dims.total, len(columns)), dtype=complex)
    labels = np.array([b for b, _ in columns])
    n0s = np.array([n0 for _, n0 in columns])
    for c, (b, n0) in enumerate(columns):
        psi[_qubit_index(n_levels, b, n0, n_max), c] = 1.0
    cumulative = np.zeros(len(columns))
    ground_cols = [c for c, (_, n0) in enumerate(columns) if n0 == 0]

    traj_parts = {b: [] for b in range(4)}
    t_offset = 0.0
    conv_err = None
    pulses = dict(sequence.pulses)
    for s_idx, seg in enumerate(sequence.segments):
        if seg.drive:
            gen = _segment_generator(tier, design, n_max, seg.delta)
            refs = _reference_columns(dims, labels, n0s, n_levels, n_max)
            dress = _dressing_unitary(gen, 0.0)
            start = dress @ psi if dress is not None else psi
            seg_settings = replace(settings, t_final=seg.duration)
            run = _run_segment(gen, start, seg.duration, seg_settings, refs)
            if settings.convergence_check and tier is not ModelTier.FULL:
                conv_err = max(conv_err or 0.0, _convergence_error(gen, start, seg_settings, run.final))
            end = gen.to_interaction_frame(run.final.T, seg.duration).T
            undress = _dressing_unitary(gen, seg.duration)
            if undress is not None:
                end = undress.conj().T @ end
            unwrapped = np.unwrap(np.angle(run.overlaps), axis=0)
            before = cumulative.copy()
            cumulative += unwrapped[-1] - unwrapped[0]
            if record_trajectories:
                for b in range(4):
                    col = ground_cols[b]
                    traj_parts[b].append((t_offset, _trajectory_from_run(gen, run, col), before[col]))
            psi = end
            t_offset += seg.duration
        else:
            t_offset += seg.duration
        if s_idx in pulses:
            pulse = np.asarray(pulses[s_idx], dtype=complex)
            psi = _embed_pulse(pulse, n_levels, n_max) @ psi
            new_labels = np.argmax(np.abs(pulse[:, labels]), axis=0)
            cumulative += np.angle(pulse[new_labels, labels])
            labels = new_labels

    # branch phases are the tracked, unwrapped overlap phases of the ground-mode inputs
    phases = cumulative[ground_cols]

    u = np.zeros((4, 4), dtype=complex)
    for k, c in enumerate(ground_cols):
        for j in range(4):
            u[j, k] = psi[_qubit_index(n_levels, j, 0, n_max), c]

    thermal = []
    if n_bar > 0:
        for n0, p in mode_states:
            un = np.zeros((4, 4), dtype=complex)
            cols = [c for c, (_, m) in enumerate(columns) if m == n0]
            for k, c in enumerate(cols):
                for j in range(4):
                    un[j, k] = psi[_qubit_index(n_levels, j, n0, n_max), c]
            thermal.append((p, un))

    residual = {}
    alphas = mode_lowering(dims, psi)
    numbers = mode_number(dims, psi)
    for k, c in enumerate(ground_cols):
        residual[BRANCHES[k]] = {"alpha": float(abs(alphas[c])), "phonon_excess": float(numbers[c])}
    closed = max(r["alpha"] for r in residual.values()) <= CLOSURE_FLAG

    excited = 0.0
    if n_levels == 3:
        blocks = psi.reshape(3, 3, n_max, -1)
        excited = float(np.max(np.sum(np.abs(blocks[EXCITED]) ** 2, axis=(0, 1)) + np.sum(np.abs(blocks[:2, EXCITED]) ** 2, axis=(0, 1))))

    final_states = {(BRANCHES[b], n0): qcore.QuantumState(dims, psi[:, c]) for c, (b, n0) in enumerate(columns)}
    trajectories = {}
    if record_trajectories:
        trajectories = {BRANCHES[b]: _join(parts) for b, parts in traj_parts.items() if parts}

    return GateResult(
        tier=tier,
        design=design,
        total_time=t_offset,
        final_states=final_states,
        qubit_propagator=u,
        branch_phases=phases,
        conditional_phase=conditional_from_phases(phases),
        single_ion_phases=single_ion_from_phases(phases),
        motional_residual=residual,
        loop_closed=closed,
        trajectories=trajectories,
        thermal_components=tuple(thermal),
        leakage=excited,
        drive_time=sequence.drive_time,
        convergence_error=conv_err,
    )


def _segment_generator(tier, design, n_max, delta):
    return build(tier, design, n_max, delta=delta)


def _reference_columns(dims, labels, n0s, n_levels, n_max):
    refs = np.zeros((dims.total, len(labels)), dtype=complex)
    for c, (lab, n0) in enumerate(zip(labels, n0s)):
        refs[_qubit_index(n_levels, int(lab), int(n0), n_max), c] = 1.0
    return refs


def _run_segment(gen, psi0, duration, settings, refs) -> _Run:
    if gen.tier is ModelTier.FULL and gen.period:
        n_periods = duration / gen.period
        if n_periods >= 2 and abs(n_periods - round(n_periods)) < 1e-9 * n_periods:
            u_tau = period_propagator(gen, settings)
            return _integrate_stroboscopic(gen, psi0, int(round(n_periods)), u_tau, refs)
    return _integrate(gen, psi0, duration, settings, refs)


def _join(parts) -> Trajectory:
    """Concatenate per-segment trajectories into one on a global time axis."""
    times, states, alpha, phase, n_mean, norm_err = [], [], [], [], [], []
    for offset, traj, phase_offset in parts:
        skip = 1 if times else 0
        times.append(traj.times[skip:] + offset)
        states.extend(traj.states[skip:])
        alpha.append(traj.alpha[skip:])
        phase.append(traj.phase[skip:] - traj.phase[0] + phase_offset)
        n_mean.append(traj.n_mean[skip:])
        norm_err.append(traj.norm_err[skip:])
    return Trajectory(
        np.concatenate(times), states, np.concatenate(alpha), np.concatenate(phase),
        np.concatenate(n_mean), np.concatenate(norm_err),
    )
