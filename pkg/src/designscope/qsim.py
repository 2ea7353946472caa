"""Dense statevector simulation.

Qubit 0 is the most significant bit of the basis index, so that
``X (x) I (x) ... (x) I`` on ``|0...0>`` gives ``|10...0>``. The batched
kernels (``*_batch``) act on arrays of shape ``(batch, 2**n)`` and are what
the ensemble samplers use; the ``StateVector`` functions are thin checked
wrappers around them.

Z-strings follow the convention ``Z = -|0><0| + |1><1|``, so a measured bit
``x`` contributes ``(-1)**(1 - x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import SizeError, ValidityError
from .rng import RngStream, as_generator

MAX_QUBITS = 20
NORM_ATOL = 1e-10

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
S = np.array([[1, 0], [0, 1j]], dtype=complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise SizeError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return outcome_probabilities(self.amplitudes)

    def copy(self) -> StateVector:
        return StateVector(self.n_qubits, self.amplitudes.copy())


def check_n_qubits(n: int, max_qubits: int = MAX_QUBITS) -> None:
    if not 1 <= n <= max_qubits:
        raise SizeError(f"n_qubits must be in [1, {max_qubits}], got {n}")


def _check_qubit(q: int, n: int) -> None:
    if not 0 <= q < n:
        raise IndexError(f"qubit index {q} out of range for {n} qubits")


def check_unitary(u: np.ndarray, dim: int | None = None, atol: float = NORM_ATOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise SizeError(f"gate must be a square matrix, got shape {u.shape}")
    if dim is not None and u.shape[0] != dim:
        raise SizeError(f"expected a {dim}x{dim} gate, got {u.shape[0]}x{u.shape[1]}")
    if not np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=atol, rtol=0):
        raise ValidityError("gate is not unitary")
    return u


def new_zero_state(n_qubits: int) -> StateVector:
    check_n_qubits(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def basis_state(bits) -> StateVector:
    """``|x_0 x_1 ... x_{n-1}>`` from a sequence of bits ordered by qubit."""
    bits = [int(b) for b in bits]
    n = len(bits)
    check_n_qubits(n)
    amps = np.zeros(2**n, dtype=complex)
    amps[int("".join(map(str, bits)), 2)] = 1.0
    return StateVector(n, amps)


# ---------------------------------------------------------------- batched kernels


def apply_1q_batch(psi: np.ndarray, gate: np.ndarray, q: int, n: int) -> np.ndarray:
    """Apply a 2x2 gate (or a stack of per-row gates, shape (B, 2, 2)) to qubit ``q``."""
    b = psi.shape[0]
    t = psi.reshape(b, 2**q, 2, 2 ** (n - q - 1)).swapaxes(1, 2).reshape(b, 2, -1)
    out = gate @ t
    return out.reshape(b, 2, 2**q, -1).swapaxes(1, 2).reshape(b, -1)


def apply_2q_batch(psi: np.ndarray, gate: np.ndarray, q1: int, q2: int, n: int) -> np.ndarray:
    """Apply a 4x4 gate (or per-row stack (B, 4, 4)) with ``q1`` as the high bit."""
    b = psi.shape[0]
    t = np.moveaxis(psi.reshape((b,) + (2,) * n), (q1 + 1, q2 + 1), (1, 2))
    shape = t.shape
    t = gate @ t.reshape(b, 4, -1)
    return np.moveaxis(t.reshape(shape), (1, 2), (q1 + 1, q2 + 1)).reshape(b, -1)


def hadamard_all_batch(psi: np.ndarray, n: int) -> np.ndarray:
    """``H^{(x) n}`` as a fast Walsh-Hadamard transform."""
    b = psi.shape[0]
    out = psi.reshape((b,) + (2,) * n)
    for axis in range(1, n + 1):
        a0 = np.take(out, 0, axis=axis)
        a1 = np.take(out, 1, axis=axis)
        out = np.stack([a0 + a1, a0 - a1], axis=axis)
    return out.reshape(b, -1) / np.sqrt(2**n)


def outcome_probabilities(psi: np.ndarray) -> np.ndarray:
    """Born probabilities, renormalised so each row sums to exactly one."""
    p = np.abs(psi) ** 2
    return p / p.sum(axis=-1, keepdims=True)


@lru_cache(maxsize=None)
def bit_table(n: int) -> np.ndarray:
    """``(2**n, n)`` array; row ``j`` holds the bits of basis index ``j`` by qubit."""
    j = np.arange(2**n)
    shifts = np.arange(n - 1, -1, -1)
    table = ((j[:, None] >> shifts[None, :]) & 1).astype(np.uint8)
    table.setflags(write=False)
    return table


def z_signs(n: int, subset) -> np.ndarray:
    """Eigenvalue of the Z-string on each basis state: ``prod (-1)**(1 - x_h)``."""
    bits = bit_table(n)[:, list(subset)].astype(np.int64)
    return np.prod(1 - 2 * (1 - bits), axis=1).astype(float)


# ---------------------------------------------------------------- state API


def apply_single_qubit_gate(state: StateVector, gate, target: int) -> StateVector:
    gate = check_unitary(gate, 2)
    _check_qubit(target, state.n_qubits)
    out = apply_1q_batch(state.amplitudes[None, :], gate, target, state.n_qubits)
    return StateVector(state.n_qubits, out[0])


def apply_two_qubit_gate(state: StateVector, gate, q1: int, q2: int) -> StateVector:
    gate = check_unitary(gate, 4)
    _check_qubit(q1, state.n_qubits)
    _check_qubit(q2, state.n_qubits)
    if q1 == q2:
        raise IndexError(f"two-qubit gate needs distinct qubits, got {q1} twice")
    if q1 > q2:
        # relabel so q1 is the lower index: conjugate the gate by SWAP
        gate = SWAP @ gate @ SWAP
        q1, q2 = q2, q1
    out = apply_2q_batch(state.amplitudes[None, :], gate, q1, q2, state.n_qubits)
    return StateVector(state.n_qubits, out[0])


def apply_dense_unitary(state: StateVector, u) -> StateVector:
    u = np.asarray(u, dtype=complex)
    if u.shape != (state.dim, state.dim):
        raise SizeError(f"unitary of shape {u.shape} does not act on {state.n_qubits} qubits")
    return StateVector(state.n_qubits, u @ state.amplitudes)


def haar_unitaries(count: int, dim: int, gen: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random ``dim x dim`` unitaries, shape ``(count, dim, dim)``.

    Ginibre matrix -> QR, then each column of Q is rotated by the phase of the
    matching diagonal entry of R, which removes the bias of the QR sign
    convention.
    """
    g = gen.standard_normal((count, dim, dim, 2))
    g = (g[..., 0] + 1j * g[..., 1]) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[:, None, :]


def sample_haar_unitary(dim: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    if dim < 2:
        raise SizeError(f"Haar unitary needs dim >= 2, got {dim}")
    return haar_unitaries(1, dim, as_generator(rng))[0]


def haar_states(count: int, dim: int, gen: np.random.Generator) -> np.ndarray:
    """Rows distributed as ``U|0>`` for Haar ``U``: normalised complex Gaussians.

    This is exactly the first column of the phase-corrected QR output, without
    paying for the other ``dim - 1`` columns.
    """
    g = gen.standard_normal((count, dim, 2))
    v = g[..., 0] + 1j * g[..., 1]
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_indices(probs: np.ndarray, n_shots: int, gen: np.random.Generator) -> np.ndarray:
    """Inverse-CDF sampling of basis indices from a probability vector."""
    cdf = np.cumsum(probs)
    u = gen.random(n_shots) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)


def sample_measurements(state: StateVector, n_shots: int, rng) -> np.ndarray:
    """Terminal computational-basis measurement, repeated ``n_shots`` times.

    Returns a ``(n_shots, n_qubits)`` uint8 array; each row is one shot record
    with bits ordered by qubit index.
    """
    if n_shots < 1:
        raise SizeError(f"n_shots must be >= 1, got {n_shots}")
    idx = sample_indices(state.probabilities(), n_shots, as_generator(rng))
    return bit_table(state.n_qubits)[idx].copy()


def z_string_expectation(state: StateVector, subset) -> float:
    subset = list(subset)
    if not subset:
        raise ValueError("subset must be non-empty")
    if any(b <= a for a, b in zip(subset, subset[1:])):
        raise ValueError(f"subset must be strictly increasing, got {subset}")
    for q in subset:
        _check_qubit(q, state.n_qubits)
    return float(np.dot(state.probabilities(), z_signs(state.n_qubits, subset)))


def measure_and_collapse(state: StateVector, target: int, rng) -> tuple[int, StateVector]:
    _check_qubit(target, state.n_qubits)
    gen = as_generator(rng)
    n = state.n_qubits
    t = state.amplitudes.reshape(2**target, 2, 2 ** (n - target - 1))
    p1 = float(np.sum(np.abs(t[:, 1, :]) ** 2))
    outcome = int(gen.random() < p1)
    # only a branch with nonzero weight can be drawn
    post = np.zeros_like(t)
    post[:, outcome, :] = t[:, outcome, :]
    post = post.reshape(-1)
    post /= np.linalg.norm(post)
    return outcome, StateVector(n, post)


PAULIS = (I2, X, Y, Z)


def depolarizing_choice(p: float, size, gen: np.random.Generator) -> np.ndarray:
    """Pauli index (0=I, 1=X, 2=Y, 3=Z) of the twirl unravelling of the channel."""
    u = np.asarray(gen.random(size))
    if p == 0:
        return np.zeros(u.shape, dtype=np.int64)
    return np.where(u < 3 * p / 4, 1 + np.floor(u / (p / 4)).astype(np.int64), 0)


def apply_depolarizing_trajectory(state: StateVector, target: int, p: float, rng) -> StateVector:
    """One trajectory of ``rho -> (1 - p) rho + p I/2`` on ``target``.

    Applies I with probability ``1 - 3p/4`` and each of X, Y, Z with
    probability ``p/4``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"depolarizing probability must be in [0, 1], got {p}")
    _check_qubit(target, state.n_qubits)
    k = int(depolarizing_choice(p, None, as_generator(rng)))
    if k == 0:
        return state.copy()
    out = apply_1q_batch(state.amplitudes[None, :], PAULIS[k], target, state.n_qubits)
    return StateVector(state.n_qubits, out[0])
