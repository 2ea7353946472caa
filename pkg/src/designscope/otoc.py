"""Out-of-time-ordered correlator matrices as an alternative feature input.

For sampled unitaries ``U_1..U_m`` and single-qubit Paulis ``A_i``, ``B_j``
the ``(i, j)`` entry averages one of

* ``ALV``: ``<sigma| A_i U^dag B_j U A_i U^dag B_j U |sigma>`` with a fresh Haar state per ``U``,
* ``CB``:  the same with a uniformly random computational-basis state,
* ``TR``:  ``tr(A_i^dag U^dag B_j U A_i U^dag B_j U)``.

One state is drawn per ``U`` and shared by all ``(i, j)`` entries. ALV and CB
are expectation values of a unitary, so they are complex in general; TR is
real by cyclicity of the trace.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ensembles, qsim
from .ensembles import EnsembleSpec
from .features import Dataset, FeatureMeta
from .rng import RngStream, as_generator

VARIANTS = ("ALV", "CB", "TR")
_PAULI = {"X": qsim.X, "Y": qsim.Y, "Z": qsim.Z}
MAX_TR_QUBITS = 8


@dataclass(frozen=True)
class OtocConfig:
    ensemble: EnsembleSpec
    m: int
    a: str = "X"
    b: str = "Y"
    variant: str = "ALV"

    def __post_init__(self):
        object.__setattr__(self, "variant", self.variant.upper())
        object.__setattr__(self, "a", self.a.upper())
        object.__setattr__(self, "b", self.b.upper())
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.a not in _PAULI or self.b not in _PAULI:
            raise ValueError(f"A and B must be X, Y or Z, got {self.a}, {self.b}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant}")
        if self.variant == "TR" and self.ensemble.n_qubits > MAX_TR_QUBITS:
            raise ValueError(f"TR variant supports at most {MAX_TR_QUBITS} qubits")


@dataclass
class OtocMatrix:
    """``entries`` as defined per variant; ``normalized`` divides TR by ``d`` (ALV/CB unchanged)."""

    entries: np.ndarray
    variant: str
    dim: int

    @property
    def normalized(self) -> np.ndarray:
        return self.entries / self.dim if self.variant == "TR" else self.entries


def _left(m: np.ndarray, pauli: np.ndarray, q: int, n: int) -> np.ndarray:
    """``P_q M`` for a stack of square matrices (count, d, d)."""
    c, d, _ = m.shape
    cols = m.transpose(0, 2, 1).reshape(c * d, d)
    return qsim.apply_1q_batch(cols, pauli, q, n).reshape(c, d, d).transpose(0, 2, 1)


def _right(m: np.ndarray, pauli: np.ndarray, q: int, n: int) -> np.ndarray:
    """``M P_q``: each row ``r`` becomes ``P_q^T r``."""
    c, d, _ = m.shape
    return qsim.apply_1q_batch(m.reshape(c * d, d), pauli.T, q, n).reshape(c, d, d)


def _heisenberg(u: np.ndarray, pauli: np.ndarray, q: int, n: int) -> np.ndarray:
    """``U^dag P_q U`` for a stack of unitaries."""
    return np.conj(u).transpose(0, 2, 1) @ _left(u, pauli, q, n)


def otoc_entries(u: np.ndarray, variant: str, a: str = "X", b: str = "Y", states: np.ndarray | None = None) -> np.ndarray:
    """Per-unitary OTOC matrices, shape (count, n, n), before averaging over ``U``.

    ``states`` (count, d) is required for ALV and CB.
    """
    u = np.asarray(u, dtype=complex)
    if u.ndim == 2:
        u = u[None]
    count, d, _ = u.shape
    n = d.bit_length() - 1
    pa, pb = _PAULI[a], _PAULI[b]
    out = np.empty((count, n, n), dtype=complex)
    for j in range(n):
        bj = _heisenberg(u, pb, j, n)
        if variant == "TR":
            for i in range(n):
                abja = _right(_left(bj, pa, i, n), pa, i, n)
                # tr(A B' A B') = sum_kl (A B' A)_kl (B')_lk
                out[:, i, j] = np.einsum("bkl,blk->b", abja, bj)
            continue
        v = np.einsum("bkl,bl->bk", bj, states)
        for i in range(n):
            w = qsim.apply_1q_batch(v, pa, i, n)
            w = np.einsum("bkl,bl->bk", bj, w)
            left = qsim.apply_1q_batch(states, pa, i, n)
            out[:, i, j] = np.einsum("bk,bk->b", np.conj(left), w)
    return out


def _states_for(variant: str, count: int, d: int, gen) -> np.ndarray | None:
    if variant == "ALV":
        return qsim.haar_states(count, d, gen)
    if variant == "CB":
        states = np.zeros((count, d), dtype=complex)
        states[np.arange(count), gen.integers(0, d, count)] = 1.0
        return states
    return None


def compute_otoc_matrix(cfg: OtocConfig, rng) -> OtocMatrix:
    """Average of ``cfg.m`` per-unitary OTOC matrices."""
    gen = as_generator(rng)
    d = cfg.ensemble.dim
    u = ensembles.sample_unitaries(cfg.ensemble, cfg.m, gen)
    states = _states_for(cfg.variant, cfg.m, d, gen)
    entries = otoc_entries(u, cfg.variant, cfg.a, cfg.b, states).mean(axis=0)
    return OtocMatrix(entries, cfg.variant, d)


def flatten(matrix: OtocMatrix) -> np.ndarray:
    """Real parts of the normalised entries (row-major), then imaginary parts."""
    z = matrix.normalized.reshape(-1)
    return np.concatenate([z.real, z.imag])


def otoc_dataset(cfg: OtocConfig, count: int, seed: int, label: str | None = None) -> Dataset:
    """``count`` flattened OTOC matrices; matrix ``i`` uses substream ``i`` of ``seed``.

    Rows have ``2 n^2`` features. The meta records ``m`` in the ``N_u`` slot;
    the variant and Paulis go to the file header.
    """
    n = cfg.ensemble.n_qubits
    rows = np.stack([flatten(compute_otoc_matrix(cfg, RngStream(seed, i))) for i in range(count)])
    meta = FeatureMeta(n, cfg.m, None, (1,), layout="otoc")
    info = {
        "ensemble": cfg.ensemble.to_text(),
        "seed": str(seed),
        "preproc": cfg.ensemble.preproc,
        "variant": cfg.variant,
        "A": cfg.a,
        "B": cfg.b,
    }
    return Dataset(rows, np.full(count, label or cfg.ensemble.kind, dtype=object), meta, info)

