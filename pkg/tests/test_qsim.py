import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from designscope import qsim
from designscope.errors import SizeError, ValidityError
from designscope.qsim import StateVector


def random_state(n, gen):
    return StateVector(n, qsim.haar_states(1, 2**n, gen)[0])


def kron_embed(gate, q, n):
    """Dense oracle: identity everywhere except ``gate`` on qubit ``q`` (qubit 0 most significant)."""
    out = np.eye(1)
    for k in range(n):
        out = np.kron(out, gate if k == q else np.eye(2))
    return out


def plus():
    return StateVector(1, np.array([1, 1]) / np.sqrt(2))


# ---------------------------------------------------------------- states and gates


def test_zero_state_and_size_errors():
    s = qsim.new_zero_state(3)
    assert s.amplitudes[0] == 1 and s.norm() == pytest.approx(1.0)
    with pytest.raises(SizeError):
        qsim.new_zero_state(0)
    with pytest.raises(SizeError):
        qsim.new_zero_state(qsim.MAX_QUBITS + 1)


def test_single_qubit_gate_examples():
    one = qsim.apply_single_qubit_gate(qsim.new_zero_state(1), qsim.X, 0)
    np.testing.assert_allclose(one.amplitudes, [0, 1])
    h = qsim.apply_single_qubit_gate(qsim.new_zero_state(1), qsim.H, 0)
    np.testing.assert_allclose(h.amplitudes, plus().amplitudes)
    s = random_state(3, np.random.default_rng(1))
    np.testing.assert_allclose(qsim.apply_single_qubit_gate(s, np.eye(2), 1).amplitudes, s.amplitudes)


def test_single_qubit_gate_errors():
    s = qsim.new_zero_state(2)
    with pytest.raises(ValidityError):
        qsim.apply_single_qubit_gate(s, np.array([[1, 1], [0, 1]]), 0)
    with pytest.raises(IndexError):
        qsim.apply_single_qubit_gate(s, qsim.X, 2)


def test_two_qubit_gate_examples():
    np.testing.assert_allclose(
        qsim.apply_two_qubit_gate(qsim.basis_state([1, 0]), qsim.CNOT, 0, 1).amplitudes,
        qsim.basis_state([1, 1]).amplitudes,
    )
    np.testing.assert_allclose(
        qsim.apply_two_qubit_gate(qsim.basis_state([0, 1]), qsim.SWAP, 0, 1).amplitudes,
        qsim.basis_state([1, 0]).amplitudes,
    )
    s = random_state(3, np.random.default_rng(2))
    np.testing.assert_allclose(qsim.apply_two_qubit_gate(s, np.eye(4), 0, 2).amplitudes, s.amplitudes)
    with pytest.raises(IndexError):
        qsim.apply_two_qubit_gate(s, qsim.CNOT, 1, 1)


@given(st.integers(2, 5), st.data())
def test_two_qubit_gate_matches_dense_oracle(n, data):
    q1, q2 = data.draw(st.lists(st.integers(0, n - 1), min_size=2, max_size=2, unique=True))
    gen = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    gate = qsim.sample_haar_unitary(4, gen)
    s = random_state(n, gen)
    # dense oracle: permute qubits so (q1, q2) lead, apply gate (x) I, permute back
    t = s.amplitudes.reshape((2,) * n)
    rest = [k for k in range(n) if k not in (q1, q2)]
    t = np.transpose(t, [q1, q2] + rest).reshape(4, -1)
    t = (gate @ t).reshape((2,) * n)
    expected = np.transpose(t, np.argsort([q1, q2] + rest)).reshape(-1)
    np.testing.assert_allclose(qsim.apply_two_qubit_gate(s, gate, q1, q2).amplitudes, expected, atol=1e-12)


@given(st.integers(1, 5), st.data())
def test_single_qubit_gate_matches_kron(n, data):
    q = data.draw(st.integers(0, n - 1))
    gen = np.random.default_rng(data.draw(st.integers(0, 2**32)))
    gate = qsim.sample_haar_unitary(2, gen)
    s = random_state(n, gen)
    out = qsim.apply_single_qubit_gate(s, gate, q)
    np.testing.assert_allclose(out.amplitudes, kron_embed(gate, q, n) @ s.amplitudes, atol=1e-12)


def test_dense_unitary_examples():
    s = qsim.new_zero_state(3)
    np.testing.assert_allclose(qsim.apply_dense_unitary(s, np.eye(8)).amplitudes, s.amplitudes)
    flipped = qsim.apply_dense_unitary(s, kron_embed(qsim.X, 0, 3))
    np.testing.assert_allclose(flipped.amplitudes, qsim.basis_state([1, 0, 0]).amplitudes)
    u = qsim.sample_haar_unitary(8, np.random.default_rng(3))
    assert abs(qsim.apply_dense_unitary(s, u).norm() - 1) < 1e-10
    with pytest.raises(SizeError):
        qsim.apply_dense_unitary(s, np.eye(4))


def test_norm_preserved_over_1000_random_operations():
    gen = np.random.default_rng(4)
    n = 4
    s = random_state(n, gen)
    for _ in range(1000):
        kind = gen.integers(4)
        if kind == 0:
            s = qsim.apply_single_qubit_gate(s, qsim.sample_haar_unitary(2, gen), int(gen.integers(n)))
        elif kind == 1:
            a, b = gen.choice(n, 2, replace=False)
            s = qsim.apply_two_qubit_gate(s, qsim.sample_haar_unitary(4, gen), int(a), int(b))
        elif kind == 2:
            _, s = qsim.measure_and_collapse(s, int(gen.integers(n)), gen)
        else:
            s = qsim.apply_depolarizing_trajectory(s, int(gen.integers(n)), 0.5, gen)
        assert abs(s.norm() - 1) < 1e-10


# ---------------------------------------------------------------- Haar sampling


def test_haar_unitarity_and_size_error(gen):
    for dim in (2, 4, 16):
        u = qsim.sample_haar_unitary(dim, gen)
        np.testing.assert_allclose(u @ u.conj().T, np.eye(dim), atol=1e-10)
    with pytest.raises(SizeError):
        qsim.sample_haar_unitary(1, gen)


def test_haar_marginal_moments(gen):
    u2 = qsim.haar_unitaries(100_000, 2, gen)
    x = np.abs(u2[:, 0, 0]) ** 2
    assert abs(x.mean() - 0.5) < 3 * x.std() / np.sqrt(x.size)
    u4 = qsim.haar_unitaries(100_000, 4, gen)
    y = np.abs(u4[:, 0, 0]) ** 4
    assert abs(y.mean() - 0.1) < 3 * y.std() / np.sqrt(y.size)


def test_haar_invariance_of_traceless_operator(gen):
    a = np.diag([1, -1, 2, -2]).astype(complex)
    u = qsim.haar_unitaries(10_000, 4, gen)
    conj = u @ a @ u.conj().transpose(0, 2, 1)
    mean = conj.mean(axis=0)
    sigma = conj.std(axis=0) / np.sqrt(len(u))
    assert np.all(np.abs(mean) <= 5 * sigma + 1e-12)


def test_haar_states_match_first_column_statistics(gen):
    # both the shortcut and the dense first column give E|psi_0|^4 = 2/(d(d+1))
    d = 4
    s = qsim.haar_states(100_000, d, gen)
    y = np.abs(s[:, 0]) ** 4
    assert abs(y.mean() - 2 / (d * (d + 1))) < 4 * y.std() / np.sqrt(y.size)


# ---------------------------------------------------------------- measurement


def test_sample_measurement_examples(gen):
    shots = qsim.sample_measurements(qsim.basis_state([0, 1]), 50, gen)
    assert shots.shape == (50, 2) and np.all(shots == [0, 1])
    assert np.all(qsim.sample_measurements(qsim.new_zero_state(3), 20, gen) == 0)
    ones = qsim.sample_measurements(plus(), 100_000, gen)[:, 0]
    assert abs(ones.mean() - 0.5) < 3 * np.sqrt(0.25 / ones.size)
    with pytest.raises(SizeError):
        qsim.sample_measurements(plus(), 0, gen)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_born_consistency(n, gen):
    s = random_state(n, gen)
    shots = qsim.sample_measurements(s, 20_000, gen)
    idx = shots @ (1 << np.arange(n - 1, -1, -1))
    freq = np.bincount(idx, minlength=2**n) / len(idx)
    p = s.probabilities()
    assert np.all(np.abs(freq - p) <= 4 * np.sqrt(p * (1 - p) / len(idx)) + 1e-12)


def test_z_string_examples():
    for k in range(1, 4):
        assert qsim.z_string_expectation(qsim.new_zero_state(3), list(range(k))) == (-1) ** k
    assert qsim.z_string_expectation(qsim.basis_state([1]), [0]) == 1
    assert abs(qsim.z_string_expectation(plus(), [0])) < 1e-15
    with pytest.raises(ValueError):
        qsim.z_string_expectation(plus(), [])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_sign_convention_exhaustive(n):
    for bits in itertools.product([0, 1], repeat=n):
        s = qsim.basis_state(bits)
        for r in range(1, n + 1):
            for subset in itertools.combinations(range(n), r):
                expected = np.prod([(-1) ** (1 - bits[h]) for h in subset])
                assert qsim.z_string_expectation(s, subset) == expected


def test_measure_and_collapse_examples(gen):
    out, post = qsim.measure_and_collapse(qsim.basis_state([1]), 0, gen)
    assert out == 1 and np.allclose(post.amplitudes, [0, 1])
    outs = []
    for _ in range(2000):
        o, post = qsim.measure_and_collapse(plus(), 0, gen)
        np.testing.assert_allclose(np.abs(post.amplitudes), np.eye(2)[o])
        outs.append(o)
    assert abs(np.mean(outs) - 0.5) < 4 * np.sqrt(0.25 / 2000)
    bell = StateVector(2, np.array([1, 0, 0, 1]) / np.sqrt(2))
    for _ in range(50):
        o, post = qsim.measure_and_collapse(bell, 0, gen)
        assert abs(post.norm() - 1) < 1e-10
        second = qsim.sample_measurements(post, 5, gen)
        assert np.all(second == o)


# ---------------------------------------------------------------- depolarizing noise


def depolarize_dm(rho, p):
    return (1 - p) * rho + p * np.trace(rho) * np.eye(2) / 2


def test_depolarizing_examples(gen):
    s = random_state(2, gen)
    for _ in range(20):
        np.testing.assert_array_equal(qsim.apply_depolarizing_trajectory(s, 1, 0.0, gen).amplitudes, s.amplitudes)
    with pytest.raises(ValueError):
        qsim.apply_depolarizing_trajectory(s, 0, 1.5, gen)
    # p=1 on |0>: Z averaged over trajectories vanishes
    codes = qsim.depolarizing_choice(1.0, 100_000, gen)
    z = np.where(np.isin(codes, (1, 2)), 1.0, -1.0)  # X or Y flip |0> to |1>
    assert abs(z.mean()) < 3 * z.std() / np.sqrt(z.size)


@pytest.mark.parametrize("p", [0.1, 0.37, 1.0])
def test_pauli_twirl_matches_channel(p, gen):
    inputs = [
        np.array([1, 0]),
        np.array([1, 1]) / np.sqrt(2),
        np.array([1, 1j]) / np.sqrt(2),
        np.array([0.6, 0.8j]),
    ]
    runs = 40_000
    for psi in inputs:
        codes = qsim.depolarizing_choice(p, runs, gen)
        counts = np.bincount(codes, minlength=4)
        rho = sum(c * np.outer(P @ psi, (P @ psi).conj()) for c, P in zip(counts, qsim.PAULIS)) / runs
        expected = depolarize_dm(np.outer(psi, psi.conj()), p)
        assert np.max(np.abs(rho - expected)) < 4 * np.sqrt(0.25 / runs)


def test_depolarizing_p01_on_zero_state(gen):
    runs = 40_000
    rho = np.zeros((2, 2), dtype=complex)
    s = qsim.new_zero_state(1)
    for _ in range(runs // 100):
        for _ in range(100):
            out = qsim.apply_depolarizing_trajectory(s, 0, 0.1, gen).amplitudes
            rho += np.outer(out, out.conj())
    rho /= runs
    np.testing.assert_allclose(rho, np.diag([0.95, 0.05]), atol=4 * np.sqrt(0.05 * 0.95 / runs))
