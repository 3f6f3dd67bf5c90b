import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clockgate import qcore
from clockgate.qcore import (
    DimensionError,
    PhysicalityError,
    SpaceDims,
    TruncationError,
    basis_state,
    coherent_state,
    concurrence,
    create,
    destroy,
    identity,
    kron_all,
    partial_trace,
    state_fidelity,
)


def test_space_dims_guards():
    assert SpaceDims((3, 3, 20)).total == 180
    with pytest.raises(DimensionError):
        SpaceDims((1, 4))
    with pytest.raises(DimensionError):
        SpaceDims((64, 65))


def test_destroy_small():
    np.testing.assert_array_equal(destroy(2).entries, [[0, 1], [0, 0]])
    assert destroy(3).entries[1, 2] == pytest.approx(math.sqrt(2), abs=1e-8)
    with pytest.raises(DimensionError):
        destroy(1)


def test_commutator_is_identity_below_cutoff():
    a = destroy(20).entries
    comm = a @ a.conj().T - a.conj().T @ a
    # sqrt(n)**2 is n only to rounding, so "exact" means a few ulp
    assert np.max(np.abs(comm[:19, :19] - np.eye(19))) < 1e-14


def test_create_is_adjoint():
    n = 12
    raising = np.diag(np.sqrt(np.arange(1, n)), k=-1)
    np.testing.assert_array_equal(create(n).entries, raising)


def test_kron_all_examples():
    np.testing.assert_array_equal(kron_all([identity(2), identity(3)]).entries, np.eye(6))
    sz = qcore.Operator(SpaceDims((2,)), qcore.SIGMA_Z)
    psi = basis_state((2, 2), (0, 1))
    out = kron_all([sz, identity(2)]) @ psi
    np.testing.assert_allclose(out.amplitudes, psi.amplitudes)
    m = kron_all([destroy(3), identity(2)]).entries
    # rows (0, k), columns (1, k)
    assert m[0, 2] == 1 and m[1, 3] == 1
    assert kron_all([destroy(3), identity(2)]).dims.factors == (3, 2)


def _random_op(rng, n):
    # Gaussian-integer entries keep every product exact, so associativity can be checked bit for bit
    return qcore.Operator(SpaceDims((n,)), rng.integers(-9, 10, size=(n, n)) + 1j * rng.integers(-9, 10, size=(n, n)))


def test_kron_associative():
    rng = np.random.default_rng(3)
    a, b, c = _random_op(rng, 2), _random_op(rng, 3), _random_op(rng, 2)
    left = kron_all([kron_all([a, b]), c]).entries
    right = kron_all([a, kron_all([b, c])]).entries
    np.testing.assert_array_equal(left, right)


def test_coherent_state_examples():
    vac = coherent_state(0, 10)
    np.testing.assert_allclose(vac.amplitudes, basis_state(10, (0,)).amplitudes)
    one = coherent_state(1.0, 20)
    n = np.arange(20)
    assert np.sum(n * np.abs(one.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-6)
    alpha = 0.5 + 0.3j
    psi = coherent_state(alpha, 20)
    assert psi.expect(destroy(20)) == pytest.approx(alpha, abs=1e-6)


def test_coherent_state_truncation_guard():
    with pytest.raises(TruncationError) as info:
        coherent_state(3.0, 20)
    assert info.value.required_n_max == 36


def test_state_fidelity_examples():
    zero, one = basis_state(2, (0,)), basis_state(2, (1,))
    plus = qcore.QuantumState(2, np.array([1, 1]) / math.sqrt(2))
    assert state_fidelity(plus, plus) == pytest.approx(1.0)
    assert state_fidelity(zero, one) == 0.0
    assert state_fidelity(zero, plus) == pytest.approx(0.5)
    with pytest.raises(DimensionError):
        state_fidelity(zero, basis_state(3, (0,)))


def test_concurrence_examples():
    assert concurrence(basis_state((2, 2), (0, 0))) == pytest.approx(0.0, abs=1e-12)
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    assert concurrence(bell) == pytest.approx(1.0, abs=1e-12)
    gate = np.diag([1, 1j, 1j, 1])
    assert concurrence(gate @ np.full(4, 0.5)) == pytest.approx(1.0, abs=1e-12)


def test_concurrence_rejects_unphysical():
    with pytest.raises(PhysicalityError):
        concurrence(np.eye(4) / 2)
    with pytest.raises(PhysicalityError):
        concurrence(np.diag([1.5, -0.5, 0, 0]))


def test_werner_state_concurrence():
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    for p in (0.2, 0.5, 0.9):
        rho = p * np.outer(bell, bell) + (1 - p) * np.eye(4) / 4
        assert concurrence(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.floats(0, 1))
def test_concurrence_local_z_invariant(b1, b2, mix):
    bell = np.array([1, 0, 0, 1]) / math.sqrt(2)
    prod = np.array([1, 1, 1, 1]) / 2
    psi = math.sqrt(mix) * bell + math.sqrt(1 - mix) * prod
    psi /= np.linalg.norm(psi)
    u = np.kron(np.diag([1, np.exp(1j * b1)]), np.diag([1, np.exp(1j * b2)]))
    assert abs(concurrence(u @ psi) - concurrence(psi)) < 1e-9


def test_partial_trace_product_and_bell():
    psi = basis_state((2, 2, 5), (0, 0, 0))
    rho = partial_trace(psi, keep=[0, 1])
    expected = np.zeros((4, 4))
    expected[0, 0] = 1
    np.testing.assert_allclose(rho, expected)
    bell = qcore.QuantumState((2, 2), np.array([1, 0, 0, 1]) / math.sqrt(2))
    np.testing.assert_allclose(partial_trace(bell, keep=[0]), np.eye(2) / 2, atol=1e-15)
    np.testing.assert_allclose(partial_trace(bell, keep=[1]), np.eye(2) / 2, atol=1e-15)
    with pytest.raises(IndexError):
        partial_trace(bell, keep=[2])


def test_partial_trace_coherent_overlap():
    n = 30
    a0, a1 = 0.4 + 0.1j, -0.3 + 0.5j
    c0, c1 = coherent_state(a0, n), coherent_state(a1, n)
    spin = [basis_state(2, (0,)), basis_state(2, (1,))]
    psi = (qcore.tensor_states([spin[0], c0]).amplitudes + qcore.tensor_states([spin[1], c1]).amplitudes) / math.sqrt(2)
    rho = partial_trace(psi, keep=[0], dims=(2, n))
    overlap = np.exp(-abs(a0 - a1) ** 2 / 2) * np.exp(1j * np.imag(np.conj(a0) * a1))
    # rho_01 = <c1|c0> / 2
    assert rho[0, 1] == pytest.approx(np.conj(overlap) / 2, abs=1e-10)
    assert np.trace(rho) == pytest.approx(1.0, abs=1e-12)


def test_norm_preserved_witness():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    h = h + h.conj().T
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * w)) @ v.conj().T
    psi = qcore.QuantumState(6, rng.normal(size=6) + 0j).normalized()
    assert qcore.norm_preserved(u, psi)
    assert not qcore.norm_preserved(2 * u, psi)


def test_operator_hermitian_flag_checked():
    with pytest.raises(ValueError):
        qcore.Operator(SpaceDims((2,)), np.array([[0, 1], [0, 0]]), hermitian=True)
