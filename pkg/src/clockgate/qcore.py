"""Dense linear algebra on small composite Hilbert spaces.

States and operators carry their tensor structure (``SpaceDims``) so that
partial traces and embeddings can be done without bookkeeping at the call
site. Everything is ``complex128`` and dense; the spaces used for the gate
never exceed a few hundred dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

MAX_DIMENSION = 4096

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


class DimensionError(ValueError):
    pass


class TruncationError(ValueError):
    """Fock truncation too small for the requested state or evolution."""

    def __init__(self, message, required_n_max=None):
        super().__init__(message)
        self.required_n_max = required_n_max


class PhysicalityError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceDims:
    factors: tuple

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        if not factors:
            raise DimensionError("at least one factor is required")
        if any(f < 2 for f in factors):
            raise DimensionError(f"every factor must be >= 2, got {factors}")
        total = int(np.prod(factors))
        if total > MAX_DIMENSION:
            raise DimensionError(f"total dimension {total} exceeds {MAX_DIMENSION}")
        object.__setattr__(self, "factors", factors)

    @property
    def total(self) -> int:
        return int(np.prod(self.factors))

    def __len__(self):
        return len(self.factors)

    def __add__(self, other: "SpaceDims") -> "SpaceDims":
        return SpaceDims(self.factors + other.factors)


def _as_dims(dims) -> SpaceDims:
    if isinstance(dims, SpaceDims):
        return dims
    if isinstance(dims, int):
        return SpaceDims((dims,))
    return SpaceDims(tuple(dims))


@dataclass(frozen=True, eq=False)
class QuantumState:
    dims: SpaceDims
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = _as_dims(self.dims)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != dims.total:
            raise DimensionError(f"{amps.size} amplitudes for dims {dims.factors}")
        amps.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "QuantumState":
        return QuantumState(self.dims, self.amplitudes / self.norm())

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def expect(self, op) -> complex:
        mat = op.entries if isinstance(op, Operator) else np.asarray(op)
        return complex(self.amplitudes.conj() @ mat @ self.amplitudes)


@dataclass(frozen=True, eq=False)
class Operator:
    dims: SpaceDims
    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        dims = _as_dims(self.dims)
        mat = np.array(self.entries, dtype=complex)
        if mat.shape != (dims.total, dims.total):
            raise DimensionError(f"matrix shape {mat.shape} does not match dims {dims.factors}")
        if self.hermitian and not is_hermitian(mat):
            raise ValueError("operator flagged Hermitian but |A - A^dag|_max >= 1e-12")
        mat.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "entries", mat)

    def dag(self) -> "Operator":
        return Operator(self.dims, self.entries.conj().T, self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, Operator):
            if other.dims != self.dims:
                raise DimensionError("operator dims differ")
            return Operator(self.dims, self.entries @ other.entries)
        if isinstance(other, QuantumState):
            if other.dims != self.dims:
                raise DimensionError("operator and state dims differ")
            return QuantumState(self.dims, self.entries @ other.amplitudes)
        return NotImplemented

    def __add__(self, other: "Operator") -> "Operator":
        if other.dims != self.dims:
            raise DimensionError("operator dims differ")
        return Operator(self.dims, self.entries + other.entries)

    def __sub__(self, other: "Operator") -> "Operator":
        if other.dims != self.dims:
            raise DimensionError("operator dims differ")
        return Operator(self.dims, self.entries - other.entries)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.dims, self.entries * scalar)

    __rmul__ = __mul__


def is_hermitian(mat, atol=1e-12) -> bool:
    mat = np.asarray(mat)
    return bool(np.max(np.abs(mat - mat.conj().T), initial=0.0) < atol)


def is_unitary(mat, atol=1e-9) -> bool:
    mat = np.asarray(mat)
    return bool(np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0]))) < atol)


def norm_preserved(propagator, state, atol=1e-9) -> bool:
    """Unitarity witness: ``|U psi| == |psi|`` within ``atol``."""
    u = propagator.entries if isinstance(propagator, Operator) else np.asarray(propagator)
    psi = state.amplitudes if isinstance(state, QuantumState) else np.asarray(state)
    return abs(np.linalg.norm(u @ psi) - np.linalg.norm(psi)) < atol


def identity(n: int) -> Operator:
    return Operator(SpaceDims((n,)), np.eye(n, dtype=complex), hermitian=True)


def destroy(n_max: int) -> Operator:
    """Annihilation operator on the Fock states ``|0>..|n_max-1>``."""
    if n_max < 2:
        raise DimensionError(f"n_max must be >= 2, got {n_max}")
    a = np.diag(np.sqrt(np.arange(1, n_max, dtype=float)), k=1).astype(complex)
    return Operator(SpaceDims((n_max,)), a)


def create(n_max: int) -> Operator:
    return destroy(n_max).dag()


def projector(n: int, k: int) -> Operator:
    p = np.zeros((n, n), dtype=complex)
    p[k, k] = 1.0
    return Operator(SpaceDims((n,)), p, hermitian=True)


def kron_all(ops: Sequence[Operator]) -> Operator:
    ops = list(ops)
    if not ops:
        raise ValueError("kron_all needs at least one operator")
    dims = reduce(lambda a, b: a + b, (op.dims for op in ops))
    mat = reduce(np.kron, (op.entries for op in ops))
    return Operator(dims, mat)


def basis_state(dims, index: Sequence[int]) -> QuantumState:
    dims = _as_dims(dims)
    if len(index) != len(dims):
        raise DimensionError("one index per factor is required")
    flat = int(np.ravel_multi_index(tuple(index), dims.factors))
    amps = np.zeros(dims.total, dtype=complex)
    amps[flat] = 1.0
    return QuantumState(dims, amps)


def tensor_states(states: Iterable[QuantumState]) -> QuantumState:
    states = list(states)
    dims = reduce(lambda a, b: a + b, (s.dims for s in states))
    return QuantumState(dims, reduce(np.kron, (s.amplitudes for s in states)))


def coherent_amplitudes(alpha: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max)
    if alpha == 0:
        return (n == 0).astype(complex)
    log_mag = -abs(alpha) ** 2 / 2 + n * np.log(abs(alpha)) - gammaln(n + 1) / 2
    return np.exp(log_mag + 1j * n * np.angle(alpha))


def coherent_tail_weight(alpha: complex, n_max: int) -> float:
    """Unnormalized population of the two highest retained Fock levels."""
    c = coherent_amplitudes(alpha, n_max)
    return float(np.sum(np.abs(c[-2:]) ** 2))


def coherent_state(alpha: complex, n_max: int) -> QuantumState:
    """Truncated coherent state ``|alpha>``, renormalized.

    Raises
    ------
    TruncationError
        If ``|alpha|**2 > n_max / 4``; the error carries the smallest safe ``n_max``.
    """
    if n_max < 2:
        raise DimensionError(f"n_max must be >= 2, got {n_max}")
    if abs(alpha) ** 2 > n_max / 4:
        required = int(np.ceil(4 * abs(alpha) ** 2))
        raise TruncationError(f"|alpha|^2={abs(alpha)**2:.3g} needs n_max >= {required}", required)
    c = coherent_amplitudes(alpha, n_max)
    return QuantumState(SpaceDims((n_max,)), c / np.linalg.norm(c))


def state_fidelity(psi: QuantumState, phi: QuantumState) -> float:
    if psi.dims != phi.dims:
        raise DimensionError(f"dims {psi.dims.factors} vs {phi.dims.factors}")
    return float(min(1.0, abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2))


def partial_trace(state_or_rho, keep: Sequence[int], dims=None) -> np.ndarray:
    """Reduced density matrix over the factors listed in ``keep``.

    ``state_or_rho`` may be a ``QuantumState``, an ``Operator`` holding a
    density matrix, or a bare array together with ``dims``.
    """
    if isinstance(state_or_rho, QuantumState):
        dims = state_or_rho.dims
        rho = state_or_rho.density_matrix()
    elif isinstance(state_or_rho, Operator):
        dims = state_or_rho.dims
        rho = state_or_rho.entries
    else:
        if dims is None:
            raise ValueError("dims are required for a bare array")
        dims = _as_dims(dims)
        rho = np.asarray(state_or_rho, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
    keep = sorted(set(int(k) for k in keep))
    n = len(dims)
    if not keep or keep[0] < 0 or keep[-1] >= n:
        raise IndexError(f"keep={keep} invalid for {n} factors")
    factors = dims.factors
    t = rho.reshape(factors + factors)
    traced = [k for k in range(n) if k not in keep]
    # contract traced factors pairwise, highest index first so axis numbers stay valid
    for k in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + m)
    d = int(np.prod([factors[k] for k in keep]))
    return t.reshape(d, d)


def validate_density_matrix(rho, atol=1e-9) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise PhysicalityError("density matrix must be square")
    if not is_hermitian(rho, atol=atol):
        raise PhysicalityError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise PhysicalityError(f"trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise PhysicalityError("density matrix has negative eigenvalues")
    return rho


def concurrence(rho) -> float:
    """Wootters concurrence of a two-qubit state (ket or 4x4 density matrix)."""
    if isinstance(rho, QuantumState):
        rho = rho.density_matrix()
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    if rho.shape != (4, 4):
        raise DimensionError("concurrence needs a 4x4 density matrix")
    rho = validate_density_matrix(rho)
    # lambda_i are the singular values of X^T (Y x Y) X with rho = X X^dag;
    # eigenvalues at rounding level are zeroed so pure states stay exact
    p, v = np.linalg.eigh(rho)
    p = np.where(p > 1e-14 * p.max(), p, 0.0)
    x = v * np.sqrt(p)
    lam = np.linalg.svd(x.T @ np.kron(SIGMA_Y, SIGMA_Y) @ x, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))
