"""Uniform random Clifford elements and their action on statevectors.

A tableau stores the images of the Pauli generators under conjugation,
``C X_i C^dag`` in row ``i`` and ``C Z_i C^dag`` in row ``n + i``. Each row is
``(x | z)`` with sign bit ``r`` and denotes the Hermitian Pauli
``(-1)^r i^{x.z} X^x Z^z`` (so ``x = z = 1`` is ``Y``). Paulis here are the
standard ones; the sign flip of the measurement convention only enters when
Z-string expectations are read out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import qsim
from .errors import SizeError, ValidityError
from .qsim import StateVector
from .rng import as_generator

MAX_QUBITS = 12


@dataclass
class CliffordTableau:
    n_qubits: int
    symplectic: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        n = self.n_qubits
        self.symplectic = np.asarray(self.symplectic, dtype=np.uint8) & 1
        self.phases = np.asarray(self.phases, dtype=np.uint8) & 1
        if self.symplectic.shape != (2 * n, 2 * n) or self.phases.shape != (2 * n,):
            raise SizeError(f"tableau arrays do not match n_qubits={n}")

    @classmethod
    def identity(cls, n: int) -> CliffordTableau:
        return cls(n, np.eye(2 * n, dtype=np.uint8), np.zeros(2 * n, dtype=np.uint8))

    def is_symplectic(self) -> bool:
        m = self.symplectic.astype(np.int64)
        return bool(np.array_equal(m @ symplectic_form(self.n_qubits) @ m.T % 2, symplectic_form(self.n_qubits)))

    def copy(self) -> CliffordTableau:
        return CliffordTableau(self.n_qubits, self.symplectic.copy(), self.phases.copy())

    def __eq__(self, other):
        return (
            isinstance(other, CliffordTableau)
            and self.n_qubits == other.n_qubits
            and np.array_equal(self.symplectic, other.symplectic)
            and np.array_equal(self.phases, other.phases)
        )


@dataclass
class CliffordCircuit:
    """Gates in time order: ``("H", q)``, ``("S", q)``, ``("X", q)``, ``("Z", q)``,
    ``("CNOT", control, target)``, ``("CZ", a, b)``."""

    n_qubits: int
    gates: list[tuple] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            if g[0] not in _GATE_ARITY or len(g) != _GATE_ARITY[g[0]] + 1:
                raise ValidityError(f"unknown gate token {g!r}")
            for q in g[1:]:
                if not 0 <= q < self.n_qubits:
                    raise IndexError(f"gate {g!r} out of range for {self.n_qubits} qubits")


_GATE_ARITY = {"H": 1, "S": 1, "X": 1, "Z": 1, "CNOT": 2, "CZ": 2}


@lru_cache(maxsize=None)
def symplectic_form(n: int) -> np.ndarray:
    omega = np.zeros((2 * n, 2 * n), dtype=np.int64)
    omega[:n, n:] = np.eye(n, dtype=np.int64)
    omega[n:, :n] = np.eye(n, dtype=np.int64)
    omega.setflags(write=False)
    return omega


def _packed_inner(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    """Symplectic inner product of bit-packed vectors (x in bits 0..n-1, z in n..2n-1)."""
    low = (1 << n) - 1
    cross = ((a & low) & (b >> n)) ^ ((a >> n) & (b & low))
    return np.bitwise_count(cross) & 1


def random_symplectic(n: int, count: int, gen: np.random.Generator) -> np.ndarray:
    """``count`` uniformly random symplectic matrices over GF(2), shape (count, 2n, 2n).

    Builds a uniformly random symplectic basis pair by pair. A uniform vector
    projected onto the symplectic complement of the pairs chosen so far is
    uniform on that complement; the image of X_i is drawn from the nonzero
    vectors there and the image of Z_i from those pairing to 1 with it.
    Rows are handled as bit-packed integers and unpacked at the end.
    """
    rows = np.zeros((count, 2 * n), dtype=np.int64)

    def draw(todo, i):
        v = gen.integers(0, 1 << (2 * n), todo.size, dtype=np.int64)
        for k in range(i):
            xk, zk = rows[todo, k], rows[todo, n + k]
            v = v ^ np.where(_packed_inner(v, zk, n) == 1, xk, 0) ^ np.where(_packed_inner(v, xk, n) == 1, zk, 0)
        return v

    for i in range(n):
        todo = np.arange(count)
        while todo.size:
            cand = draw(todo, i)
            ok = cand != 0
            rows[todo[ok], i] = cand[ok]
            todo = todo[~ok]
        todo = np.arange(count)
        while todo.size:
            cand = draw(todo, i)
            ok = _packed_inner(cand, rows[todo, i], n) == 1
            rows[todo[ok], n + i] = cand[ok]
            todo = todo[~ok]
    return ((rows[..., None] >> np.arange(2 * n)) & 1).astype(np.uint8)


def random_tableaus(n: int, count: int, gen: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Batch of uniform Clifford tableaus as ``(symplectic, phases)`` arrays."""
    sym = random_symplectic(n, count, gen)
    phases = gen.integers(0, 2, (count, 2 * n), dtype=np.uint8)
    return sym, phases


def sample_uniform_clifford(n_qubits: int, rng) -> CliffordTableau:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    sym, phases = random_tableaus(n_qubits, 1, as_generator(rng))
    return CliffordTableau(n_qubits, sym[0], phases[0])


# ---------------------------------------------------------------- gate updates


def _update(sym: np.ndarray, r: np.ndarray, gate: tuple, n: int) -> None:
    """Conjugate every row by ``gate`` in place (tableau of ``gate . C``)."""
    x, z = sym[:, :n], sym[:, n:]
    name = gate[0]
    if name == "H":
        q = gate[1]
        r ^= x[:, q] & z[:, q]
        x[:, q], z[:, q] = z[:, q].copy(), x[:, q].copy()
    elif name == "S":
        q = gate[1]
        r ^= x[:, q] & z[:, q]
        z[:, q] ^= x[:, q]
    elif name == "X":
        r ^= z[:, gate[1]]
    elif name == "Z":
        r ^= x[:, gate[1]]
    elif name == "CNOT":
        a, b = gate[1], gate[2]
        r ^= x[:, a] & z[:, b] & (x[:, b] ^ z[:, a] ^ 1)
        x[:, b] ^= x[:, a]
        z[:, a] ^= z[:, b]
    elif name == "CZ":
        a, b = gate[1], gate[2]
        for g in (("H", b), ("CNOT", a, b), ("H", b)):
            _update(sym, r, g, n)
    else:
        raise ValidityError(f"unknown gate {gate!r}")


def tableau_from_circuit(circuit: CliffordCircuit) -> CliffordTableau:
    tab = CliffordTableau.identity(circuit.n_qubits)
    for g in circuit.gates:
        _update(tab.symplectic, tab.phases, g, circuit.n_qubits)
    return tab


def compose(second: CliffordTableau, first: CliffordTableau) -> CliffordTableau:
    """Tableau of ``second . first`` (``first`` acts first)."""
    if first.n_qubits != second.n_qubits:
        raise SizeError("cannot compose tableaus on different qubit counts")
    c1, c2 = tableau_to_circuit(first), tableau_to_circuit(second)
    return tableau_from_circuit(CliffordCircuit(first.n_qubits, c1.gates + c2.gates))


def tableau_to_circuit(tab: CliffordTableau) -> CliffordCircuit:
    """Decompose into H, S, CNOT, X, Z gates, O(n^2) of them.

    Greedy reduction: qubit by qubit, gates are appended until the image of
    X_i is X_i and the image of Z_i is Z_i, touching only qubits >= i. The
    reducing sequence g_1..g_m satisfies g_m...g_1 C = I, so C is the
    reversed sequence of inverses.
    """
    if not tab.is_symplectic():
        raise ValidityError("tableau violates the symplectic condition")
    n = tab.n_qubits
    sym = tab.symplectic.copy()
    r = tab.phases.copy()
    ops: list[tuple] = []

    def do(*g):
        ops.append(g)
        _update(sym, r, g, n)

    def swap(a, b):
        do("CNOT", a, b)
        do("CNOT", b, a)
        do("CNOT", a, b)

    for i in range(n):
        row = i
        # image of X_i -> X_i
        if not sym[row, i]:
            js = [j for j in range(i + 1, n) if sym[row, j]]
            if js:
                swap(i, js[0])
            else:
                j = next(j for j in range(i, n) if sym[row, n + j])
                do("H", j)
                if j != i:
                    swap(i, j)
        for j in range(i + 1, n):
            if sym[row, j]:
                do("CNOT", i, j)
        if any(sym[row, n + j] for j in range(i + 1, n)):
            if not sym[row, n + i]:
                do("S", i)
            for j in range(i + 1, n):
                if sym[row, n + j]:
                    do("CNOT", j, i)
            do("S", i)
        elif sym[row, n + i]:
            do("S", i)
        # image of Z_i -> Z_i, using only gates that fix X_i
        row = n + i
        if sym[row, i]:
            do("H", i)
            do("S", i)
            do("H", i)
        for j in range(i + 1, n):
            xj, zj = sym[row, j], sym[row, n + j]
            if xj and zj:
                do("S", j)
                do("H", j)
            elif xj:
                do("H", j)
        for j in range(i + 1, n):
            if sym[row, n + j]:
                do("CNOT", j, i)
    for i in range(n):
        if r[i]:
            do("Z", i)
        if r[n + i]:
            do("X", i)
    if not np.array_equal(sym, np.eye(2 * n, dtype=np.uint8)) or r.any():
        raise AssertionError("Clifford reduction did not reach the identity")  # pragma: no cover

    gates: list[tuple] = []
    for g in reversed(ops):
        if g[0] == "S":
            # S^dag = S Z (time order: Z then S is the same operator since they commute)
            gates.extend([("S", g[1]), ("Z", g[1])])
        else:
            gates.append(g)
    return CliffordCircuit(n, gates)


_GATE_MATRICES = {"H": qsim.H, "S": qsim.S, "X": qsim.X, "Z": qsim.Z, "CNOT": qsim.CNOT, "CZ": qsim.CZ}


def run_circuit(state: StateVector, circuit: CliffordCircuit) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise SizeError("circuit and state qubit counts differ")
    psi = state.amplitudes[None, :]
    n = state.n_qubits
    for g in circuit.gates:
        if len(g) == 2:
            psi = qsim.apply_1q_batch(psi, _GATE_MATRICES[g[0]], g[1], n)
        else:
            a, b = g[1], g[2]
            mat = _GATE_MATRICES[g[0]]
            if a > b:
                mat = qsim.SWAP @ mat @ qsim.SWAP
                a, b = b, a
            psi = qsim.apply_2q_batch(psi, mat, a, b, n)
    return StateVector(n, psi[0])


# ---------------------------------------------------------------- dense action


@lru_cache(maxsize=None)
def _parity_table(d: int) -> np.ndarray:
    k = np.arange(d)
    par = np.zeros(d, dtype=np.int64)
    while k.any():
        par ^= k & 1
        k = k >> 1
    return par


@lru_cache(maxsize=None)
def _probe_vector(n: int) -> np.ndarray:
    # fixed generic vector: overlaps every stabilizer state with probability one
    g = np.random.default_rng(0x5EED_C11F).standard_normal((2**n, 2))
    return g[:, 0] + 1j * g[:, 1]


def _row_masks(rows: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    xm = rows[..., :n].astype(np.int64) @ weights
    zm = rows[..., n:].astype(np.int64) @ weights
    return xm, zm


def _apply_pauli_rows(v: np.ndarray, rows: np.ndarray, signs: np.ndarray, n: int) -> np.ndarray:
    """Apply one Hermitian Pauli per batch row: ``v[b] <- P_b v[b]``."""
    d = 2**n
    xm, zm = _row_masks(rows, n)
    src = np.arange(d)[None, :] ^ xm[:, None]
    par = _parity_table(d)
    ipow = np.sum(rows[:, :n] & rows[:, n:], axis=1) % 4
    coeff = (1j ** ipow) * (1 - 2 * signs.astype(np.int64))
    sign = 1 - 2 * par[zm[:, None] & src]
    return coeff[:, None] * sign * np.take_along_axis(v, src, axis=1)


def stabilizer_states(sym: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """``C|0...0>`` for each tableau in the batch (arbitrary global phase)."""
    count = sym.shape[0]
    n = sym.shape[1] // 2
    v = np.broadcast_to(_probe_vector(n), (count, 2**n)).copy()
    for i in range(n):
        v = 0.5 * (v + _apply_pauli_rows(v, sym[:, n + i], phases[:, n + i], n))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def clifford_unitaries(sym: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Dense unitaries (up to global phase) of a batch of tableaus, shape (count, d, d).

    Uses ``C|j> = (prod_{q in j} C X_q C^dag) C|0>``: column ``j`` is column
    ``j`` with its lowest set bit cleared, acted on by one Pauli row.
    """
    s = stabilizer_states(sym, phases)
    count = sym.shape[0]
    n = sym.shape[1] // 2
    d = 2**n
    cols = np.empty((count, d, d), dtype=complex)
    cols[:, 0] = s
    for j in range(1, d):
        low = j & -j
        q = n - low.bit_length()
        cols[:, j] = _apply_pauli_rows(cols[:, j ^ low], sym[:, q], phases[:, q], n)
    return cols.transpose(0, 2, 1)


def apply_clifford_batch(sym: np.ndarray, phases: np.ndarray, psi: np.ndarray | None = None) -> np.ndarray:
    """``C_b psi`` for a batch of tableaus; ``psi`` may be one state or one per row.

    ``psi=None`` means ``|0...0>`` and only the stabilizer state is built.
    """
    if psi is None:
        return stabilizer_states(sym, phases)
    u = clifford_unitaries(sym, phases)
    psi = np.broadcast_to(psi, (sym.shape[0], u.shape[1]))
    return np.einsum("bij,bj->bi", u, psi)


def clifford_unitary(tab: CliffordTableau) -> np.ndarray:
    """Dense unitary (up to global phase)."""
    return clifford_unitaries(tab.symplectic[None], tab.phases[None])[0]


def apply_clifford(state: StateVector, tab: CliffordTableau) -> StateVector:
    if state.n_qubits != tab.n_qubits:
        raise SizeError(f"tableau on {tab.n_qubits} qubits applied to {state.n_qubits}-qubit state")
    out = apply_clifford_batch(tab.symplectic[None], tab.phases[None], state.amplitudes[None])
    return StateVector(state.n_qubits, out[0])
