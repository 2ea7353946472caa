import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from designscope import clifford, qsim
from designscope.clifford import CliffordCircuit, CliffordTableau
from designscope.errors import SizeError, ValidityError
from designscope.qsim import StateVector


def pauli_matrix(x, z):
    """Dense Pauli with X^x Z^z per qubit and Y for x = z = 1 (qubit 0 most significant)."""
    out = np.eye(1)
    for xi, zi in zip(x, z):
        p = {(0, 0): np.eye(2), (1, 0): qsim.X, (0, 1): qsim.Z, (1, 1): qsim.Y}[(int(xi), int(zi))]
        out = np.kron(out, p)
    return out


def equal_up_to_phase(a, b, atol=1e-10):
    k = np.argmax(np.abs(b))
    if abs(b.flat[k]) < atol:
        return np.allclose(a, b, atol=atol)
    phase = a.flat[k] / b.flat[k]
    return abs(abs(phase) - 1) < 1e-8 and np.allclose(a, phase * b, atol=atol)


def random_tab(n, seed):
    return clifford.sample_uniform_clifford(n, np.random.default_rng(seed))


# ---------------------------------------------------------------- sampling


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8])
def test_samples_are_symplectic(n, gen):
    sym, _ = clifford.random_tableaus(n, 500, gen)
    omega = clifford.symplectic_form(n).astype(np.int64)
    m = sym.astype(np.int64)
    assert np.all((m @ omega @ m.transpose(0, 2, 1)) % 2 == omega)


def test_size_errors(gen):
    with pytest.raises(SizeError):
        clifford.sample_uniform_clifford(0, gen)
    with pytest.raises(SizeError):
        clifford.sample_uniform_clifford(clifford.MAX_QUBITS + 1, gen)


def single_qubit_cosets():
    """The 24 single-qubit Cliffords modulo phase, by closure under H and S."""
    found = [np.eye(2, dtype=complex)]
    frontier = list(found)
    while frontier:
        nxt = []
        for u in frontier:
            for g in (qsim.H, qsim.S):
                v = g @ u
                if not any(equal_up_to_phase(v, w) for w in found):
                    found.append(v)
                    nxt.append(v)
        frontier = nxt
    return found


def test_single_qubit_cosets_uniform(gen):
    cosets = single_qubit_cosets()
    assert len(cosets) == 24
    draws = 100_000
    sym, phases = clifford.random_tableaus(1, draws, gen)
    us = clifford.clifford_unitaries(sym, phases)
    # fingerprint each unitary up to phase by conjugation of X and Z
    def key(u):
        return tuple(np.round(np.concatenate([(u @ p @ u.conj().T).ravel() for p in (qsim.X, qsim.Z)]), 6))

    index = {key(c): i for i, c in enumerate(cosets)}
    assert len(index) == 24
    conj = np.concatenate(
        [(us @ p @ us.conj().transpose(0, 2, 1)).reshape(draws, -1) for p in (qsim.X, qsim.Z)], axis=1
    )
    labels = np.array([index[tuple(row)] for row in np.round(conj, 6)])
    freq = np.bincount(labels, minlength=24) / draws
    sigma = np.sqrt((1 / 24) * (23 / 24) / draws)
    assert np.all(np.abs(freq - 1 / 24) < 4 * sigma)


def test_two_design_second_moment(gen):
    sym, phases = clifford.random_tableaus(2, 100_000, gen)
    x = np.abs(clifford.stabilizer_states(sym, phases)[:, 0]) ** 4
    assert abs(x.mean() - 0.1) < 3 * x.std() / np.sqrt(x.size)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_three_design_second_moment_with_preprocessing(n, gen):
    d = 2**n
    v = qsim.haar_states(1, d, np.random.default_rng(99))[0]
    sym, phases = clifford.random_tableaus(n, 10_000, gen)
    psi = clifford.apply_clifford_batch(sym, phases, v)
    z = qsim.outcome_probabilities(psi) @ qsim.z_signs(n, [0])
    assert abs((z**2).mean() - 1 / (d + 1)) < 4 * (z**2).std() / np.sqrt(z.size)


# ---------------------------------------------------------------- dense reconstruction


@pytest.mark.parametrize("n", [1, 2, 3])
def test_unitary_conjugates_generators_as_tableau_says(n, gen):
    sym, phases = clifford.random_tableaus(n, 1000 if n == 3 else 200, gen)
    us = clifford.clifford_unitaries(sym, phases)
    for u, m, r in zip(us, sym, phases):
        np.testing.assert_allclose(u @ u.conj().T, np.eye(2**n), atol=1e-10)
        for row in range(2 * n):
            gen_x = np.zeros(n, int)
            gen_z = np.zeros(n, int)
            (gen_x if row < n else gen_z)[row % n] = 1
            image = u @ pauli_matrix(gen_x, gen_z) @ u.conj().T
            expected = (-1) ** int(r[row]) * pauli_matrix(m[row, :n], m[row, n:])
            np.testing.assert_allclose(image, expected, atol=1e-10)


def test_invalid_tableau_rejected():
    bad = CliffordTableau(1, np.array([[1, 0], [1, 0]]), np.zeros(2))
    assert not bad.is_symplectic()
    with pytest.raises(ValidityError):
        clifford.tableau_to_circuit(bad)


def test_identity_and_hadamard_circuits():
    ident = clifford.tableau_to_circuit(CliffordTableau.identity(3))
    s = qsim.haar_states(1, 8, np.random.default_rng(0))[0]
    out = clifford.run_circuit(StateVector(3, s), ident).amplitudes
    assert equal_up_to_phase(out, s)
    tab_h = clifford.tableau_from_circuit(CliffordCircuit(1, [("H", 0)]))
    plus = clifford.run_circuit(qsim.new_zero_state(1), clifford.tableau_to_circuit(tab_h)).amplitudes
    assert equal_up_to_phase(plus, np.array([1, 1]) / np.sqrt(2))


@given(st.integers(1, 4), st.integers(0, 2**32))
def test_circuit_round_trip(n, seed):
    tab = random_tab(n, seed)
    circ = clifford.tableau_to_circuit(tab)
    assert clifford.tableau_from_circuit(circ) == tab
    s = qsim.haar_states(1, 2**n, np.random.default_rng(seed + 1))[0]
    via_circuit = clifford.run_circuit(StateVector(n, s), circ).amplitudes
    via_tableau = clifford.apply_clifford(StateVector(n, s), tab).amplitudes
    assert equal_up_to_phase(via_circuit, via_tableau)


@given(st.integers(1, 3), st.integers(0, 2**32))
def test_composition(n, seed):
    t1, t2 = random_tab(n, seed), random_tab(n, seed + 7)
    s = StateVector(n, qsim.haar_states(1, 2**n, np.random.default_rng(seed))[0])
    step = clifford.apply_clifford(clifford.apply_clifford(s, t1), t2).amplitudes
    once = clifford.apply_clifford(s, clifford.compose(t2, t1)).amplitudes
    assert equal_up_to_phase(step, once)


def test_symplectic_closure(gen):
    n = 3
    a, _ = clifford.random_tableaus(n, 10_000, gen)
    b, _ = clifford.random_tableaus(n, 10_000, gen)
    prod = (a.astype(np.int64) @ b.astype(np.int64)) % 2
    omega = clifford.symplectic_form(n).astype(np.int64)
    assert np.all((prod @ omega @ prod.transpose(0, 2, 1)) % 2 == omega)
    for i in range(200):
        c = clifford.compose(CliffordTableau(n, a[i], np.zeros(2 * n)), CliffordTableau(n, b[i], np.zeros(2 * n)))
        assert c.is_symplectic()


def test_identity_tableau_leaves_state_unchanged(gen):
    s = StateVector(3, qsim.haar_states(1, 8, gen)[0])
    assert equal_up_to_phase(clifford.apply_clifford(s, CliffordTableau.identity(3)).amplitudes, s.amplitudes)
    with pytest.raises(SizeError):
        clifford.apply_clifford(qsim.new_zero_state(2), CliffordTableau.identity(3))


# ---------------------------------------------------------------- stabilizer structure


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_stabilizer_support_is_affine_subspace(n, gen):
    sym, phases = clifford.random_tableaus(n, 300, gen)
    probs = qsim.outcome_probabilities(clifford.stabilizer_states(sym, phases))
    for p in probs:
        support = np.flatnonzero(p > 1e-12)
        a = int(round(np.log2(len(support))))
        assert len(support) == 2**a
        np.testing.assert_allclose(p[support], 2.0**-a, atol=1e-10)
        shifted = set((support ^ support[0]).tolist())
        assert all((x ^ y) in shifted for x, y in itertools.product(shifted, repeat=2))
