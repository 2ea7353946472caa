"""The random-dynamics families and their samplers.

Two paths share the same definitions:

* ``draw_instance`` / ``run_instance`` build one explicit gate program and
  simulate it gate by gate, one shot at a time for the non-unitary kinds.
* ``sample_states`` / ``sample_counts`` draw a whole batch of instances as
  arrays and simulate them together. Feature generation uses these; the
  test suite checks them against the explicit path.

Qubits are 0-based internally. The brickwork rule is usually written 1-based:
odd layers act on (1,2), (3,4), ..., even layers on (2,3), (4,5), ...; with
0-based storage that is (0,1), (2,3), ... and (1,2), (3,4), ....
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from . import clifford, qsim
from .errors import DomainError, UnsupportedError
from .qsim import StateVector
from .rng import as_generator

KINDS = ("RC", "HAAR", "LRC", "RDC", "NOISY_LRC", "MONIT_LRC")
UNITARY_KINDS = ("RC", "HAAR", "LRC", "RDC")
_DEPTH_KINDS = ("LRC", "NOISY_LRC", "MONIT_LRC")
_P_KINDS = ("NOISY_LRC", "MONIT_LRC")


@dataclass(frozen=True)
class EnsembleSpec:
    kind: str
    n_qubits: int
    depth: int | None = None
    iterations: int | None = None
    p: float | None = None
    preproc: str = "identity"

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; expected one of {KINDS}")
        if not 1 <= self.n_qubits <= qsim.MAX_QUBITS:
            raise ValueError(f"n_qubits out of range: {self.n_qubits}")
        if kind == "RC" and self.n_qubits > clifford.MAX_QUBITS:
            raise ValueError(f"RC supports at most {clifford.MAX_QUBITS} qubits")
        if kind in _DEPTH_KINDS:
            if self.depth is None or self.depth < 1:
                raise ValueError(f"{kind} needs depth D >= 1")
        elif self.depth is not None:
            raise ValueError(f"depth is not a parameter of {kind}")
        if kind == "RDC":
            if self.iterations is None or self.iterations < 1:
                raise ValueError("RDC needs iterations I >= 1")
        elif self.iterations is not None:
            raise ValueError(f"iterations is not a parameter of {kind}")
        if kind in _P_KINDS:
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ValueError(f"{kind} needs a probability p in [0, 1]")
        elif self.p is not None:
            raise ValueError(f"p is not a parameter of {kind}")
        preproc_seed(self.preproc)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def to_text(self) -> str:
        """Canonical key-value form, e.g. ``kind=LRC;n=7;D=20;preproc=identity``."""
        parts = [f"kind={self.kind}", f"n={self.n_qubits}"]
        if self.depth is not None:
            parts.append(f"D={self.depth}")
        if self.iterations is not None:
            parts.append(f"I={self.iterations}")
        if self.p is not None:
            parts.append(f"p={self.p!r}")
        parts.append(f"preproc={self.preproc}")
        return ";".join(parts)

    @classmethod
    def from_text(cls, text: str) -> EnsembleSpec:
        fields = dict(item.split("=", 1) for item in text.strip().split(";") if item)
        try:
            return cls(
                kind=fields["kind"],
                n_qubits=int(fields["n"]),
                depth=int(fields["D"]) if "D" in fields else None,
                iterations=int(fields["I"]) if "I" in fields else None,
                p=float(fields["p"]) if "p" in fields else None,
                preproc=fields.get("preproc", "identity"),
            )
        except KeyError as exc:
            raise ValueError(f"ensemble text {text!r} is missing {exc}") from None


def preproc_seed(preproc: str) -> int | None:
    """``None`` for ``identity``, the seed for ``fixed:<seed>``."""
    if preproc == "identity":
        return None
    if preproc.startswith("fixed:"):
        try:
            seed = int(preproc[len("fixed:") :])
        except ValueError:
            pass
        else:
            if 0 <= seed < 2**64:
                return seed
    raise ValueError(f"preprocessing must be 'identity' or 'fixed:<seed>', got {preproc!r}")


@lru_cache(maxsize=16)
def fixed_preprocessing(n: int, seed: int) -> np.ndarray:
    """The Haar unitary used as fixed preprocessing; a pure function of ``(n, seed)``."""
    qsim.check_n_qubits(n)
    u = qsim.sample_haar_unitary(2**n, np.random.default_rng(seed))
    u.setflags(write=False)
    return u


def initial_state(spec: EnsembleSpec) -> np.ndarray:
    """``P|0...0>`` as a plain amplitude vector."""
    seed = preproc_seed(spec.preproc)
    if seed is None:
        psi = np.zeros(spec.dim, dtype=complex)
        psi[0] = 1.0
        return psi
    return fixed_preprocessing(spec.n_qubits, seed)[:, 0].copy()


# ---------------------------------------------------------------- circuit structure


def brickwork_pairs(n: int, layer: int) -> list[tuple[int, int]]:
    """0-based qubit pairs of 1-based ``layer``."""
    start = 0 if layer % 2 == 1 else 1
    return [(a, a + 1) for a in range(start, n - 1, 2)]


def rdc_pairs(n: int) -> list[tuple[int, int]]:
    return list(combinations(range(n), 2))


@lru_cache(maxsize=None)
def _pair_index(n: int, a: int, b: int) -> np.ndarray:
    bits = qsim.bit_table(n)
    return (2 * bits[:, a] + bits[:, b]).astype(np.intp)


@dataclass
class GateOp:
    layer: int
    name: str
    qubits: tuple[int, ...]
    data: object = None


@dataclass
class CircuitInstance:
    spec: EnsembleSpec
    program: list[GateOp]
    instance_seed: int

    def gates(self, name: str | None = None) -> list[GateOp]:
        return [op for op in self.program if name is None or op.name == name]


# ---------------------------------------------------------------- batched draws


def _draw_lrc_gates(n: int, depth: int, count: int, gen) -> list[np.ndarray]:
    per_layer = [len(brickwork_pairs(n, layer)) for layer in range(1, depth + 1)]
    flat = qsim.haar_unitaries(count * sum(per_layer), 4, gen).reshape(count, sum(per_layer), 4, 4)
    out, at = [], 0
    for k in per_layer:
        out.append(flat[:, at : at + k])
        at += k
    return out


def _draw_rdc_phases(n: int, iterations: int, count: int, gen) -> np.ndarray:
    return gen.uniform(0.0, 2 * np.pi, (count, iterations, len(rdc_pairs(n)), 4))


def _draw(spec: EnsembleSpec, count: int, gen: np.random.Generator) -> dict:
    n = spec.n_qubits
    if spec.kind == "RC":
        sym, phases = clifford.random_tableaus(n, count, gen)
        return {"sym": sym, "phases": phases}
    if spec.kind == "HAAR":
        return {"unitary": qsim.haar_unitaries(count, spec.dim, gen)}
    if spec.kind == "RDC":
        return {"theta": _draw_rdc_phases(n, spec.iterations, count, gen)}
    return {"layers": _draw_lrc_gates(n, spec.depth, count, gen)}


def _run_lrc_batch(psi: np.ndarray, layers: list[np.ndarray], n: int, record: list | None = None) -> np.ndarray:
    """Brickwork evolution; ``record`` (if given) receives the state after every layer."""
    for layer, gates in enumerate(layers, start=1):
        for j, (a, b) in enumerate(brickwork_pairs(n, layer)):
            psi = qsim.apply_2q_batch(psi, gates[:, j], a, b, n)
        if record is not None:
            record.append(psi)
    return psi


def _rdc_diagonal_phase(theta_it: np.ndarray, n: int) -> np.ndarray:
    """Summed phase of all pairwise diagonal gates on each basis state, shape (count, d)."""
    total = np.zeros((theta_it.shape[0], 2**n))
    for p, (a, b) in enumerate(rdc_pairs(n)):
        total += theta_it[:, p, _pair_index(n, a, b)]
    return total


def _run_rdc_batch(psi: np.ndarray, theta: np.ndarray, n: int) -> np.ndarray:
    for it in range(theta.shape[1]):
        psi = psi * np.exp(1j * _rdc_diagonal_phase(theta[:, it], n))
        psi = qsim.hadamard_all_batch(psi, n)
    return psi


def sample_states(spec: EnsembleSpec, count: int, rng) -> np.ndarray:
    """Output states ``U_i P|0>`` of ``count`` fresh instances, shape (count, 2**n)."""
    if spec.kind not in UNITARY_KINDS:
        raise UnsupportedError(f"{spec.kind} has no single output state; use sample_counts")
    gen = as_generator(rng)
    n = spec.n_qubits
    psi0 = initial_state(spec)
    if spec.kind == "HAAR":
        # U P|0> is Haar-distributed for any fixed P
        return qsim.haar_states(count, spec.dim, gen)
    if spec.kind == "RC":
        sym, phases = clifford.random_tableaus(n, count, gen)
        pre = None if preproc_seed(spec.preproc) is None else psi0
        out = np.empty((count, spec.dim), dtype=complex)
        chunk = max(1, 2**22 // spec.dim**2)
        for lo in range(0, count, chunk):
            out[lo : lo + chunk] = clifford.apply_clifford_batch(sym[lo : lo + chunk], phases[lo : lo + chunk], pre)
        return out
    psi = np.broadcast_to(psi0, (count, spec.dim)).copy()
    if spec.kind == "RDC":
        return _run_rdc_batch(psi, _draw_rdc_phases(n, spec.iterations, count, gen), n)
    return _run_lrc_batch(psi, _draw_lrc_gates(n, spec.depth, count, gen), n)


def sample_unitaries(spec: EnsembleSpec, count: int, rng) -> np.ndarray:
    """Dense ``U_i P`` of ``count`` fresh instances, shape (count, d, d)."""
    if spec.kind not in UNITARY_KINDS:
        raise UnsupportedError(f"{spec.kind} is not a unitary ensemble")
    gen = as_generator(rng)
    n, d = spec.n_qubits, spec.dim
    seed = preproc_seed(spec.preproc)
    pre = None if seed is None else fixed_preprocessing(n, seed)
    if spec.kind == "HAAR":
        u = qsim.haar_unitaries(count, d, gen)
    elif spec.kind == "RC":
        u = clifford.clifford_unitaries(*clifford.random_tableaus(n, count, gen))
    else:
        # run every basis state through the instance: row j of the batch is U|j>
        basis = np.tile(np.eye(d, dtype=complex), (count, 1))
        if spec.kind == "RDC":
            theta = np.repeat(_draw_rdc_phases(n, spec.iterations, count, gen), d, axis=0)
            out = _run_rdc_batch(basis, theta, n)
        else:
            layers = [np.repeat(g, d, axis=0) for g in _draw_lrc_gates(n, spec.depth, count, gen)]
            out = _run_lrc_batch(basis, layers, n)
        u = out.reshape(count, d, d).transpose(0, 2, 1)
    return u if pre is None else u @ pre


def _truncated_geometric(r: float, m: int, size: int, gen) -> np.ndarray:
    """Index of the first success among ``m`` Bernoulli(r) trials, given at least one."""
    if r >= 1.0:
        return np.zeros(size, dtype=np.int64)
    q = -math.expm1(m * math.log1p(-r))
    u = gen.random(size)
    k = np.ceil(np.log1p(-u * q) / math.log1p(-r)) - 1
    return np.clip(k, 0, m - 1).astype(np.int64)


def _event_patterns(r: float, depth: int, n: int, f: int, gen) -> np.ndarray:
    """Boolean (f, depth, n) event masks, each conditioned on at least one event.

    Locations are ordered layer-major; the first event is drawn from the
    truncated geometric law and later locations fire independently with
    probability ``r``.
    """
    m = depth * n
    first = _truncated_geometric(r, m, f, gen)
    loc = np.arange(m)[None, :]
    events = (gen.random((f, m)) < r) & (loc > first[:, None])
    events[np.arange(f), first] = True
    return events.reshape(f, depth, n)


def _sample_one_each(psi: np.ndarray, gen) -> np.ndarray:
    cdf = np.cumsum(qsim.outcome_probabilities(psi), axis=1)
    u = gen.random(psi.shape[0])
    return np.minimum((cdf < u[:, None]).sum(axis=1), psi.shape[1] - 1)


def _start_order(events: np.ndarray, inst: np.ndarray, n: int):
    """Sort trajectories by the layer of their first event (0-based)."""
    first_layer = (events.reshape(len(events), -1) != 0).argmax(axis=1) // n
    order = np.argsort(first_layer, kind="stable")
    return order, first_layer[order], inst[order]


def _trajectory_counts(spec, layers, prefix, counts, inst, events, act, gen) -> np.ndarray:
    """Simulate trajectories that each start from the ideal state at their first event layer.

    Before its first event a trajectory coincides with the ideal evolution, so
    it is seeded from ``prefix[l]`` (the ideal state after the gates of layer
    ``l``) and only the remaining layers are simulated. ``act(psi, rows,
    layer_index)`` applies the events of one layer in place.
    """
    n, d = spec.n_qubits, spec.dim
    order, first_layer, inst = _start_order(events, inst, n)
    events = events[order]
    total = len(inst)
    psi = np.empty((total, d), dtype=complex)
    started = 0
    for li, gates in enumerate(layers):
        if started:
            g = gates[inst[:started]]
            for j, (a, b) in enumerate(brickwork_pairs(n, li + 1)):
                psi[:started] = qsim.apply_2q_batch(psi[:started], g[:, j], a, b, n)
        end = int(np.searchsorted(first_layer, li, side="right"))
        psi[started:end] = prefix[li][inst[started:end]]
        started = end
        if li < events.shape[1]:
            act(psi, events[:started, li], li, started)
    outcomes = _sample_one_each(psi, gen)
    np.add.at(counts, (inst, outcomes), 1)
    return counts


def _counts_noisy(spec: EnsembleSpec, layers, prefix, n_shots: int, gen) -> np.ndarray:
    n, depth, p = spec.n_qubits, spec.depth, spec.p
    count = prefix[-1].shape[0]
    r = 3 * p / 4
    m = depth * n
    q_fault = -math.expm1(m * math.log1p(-r)) if r < 1 else 1.0
    faulty = gen.binomial(n_shots, q_fault, size=count)
    counts = gen.multinomial(n_shots - faulty, qsim.outcome_probabilities(prefix[-1]))
    total = int(faulty.sum())
    if total == 0:
        return counts
    inst = np.repeat(np.arange(count), faulty)
    events = _event_patterns(r, depth, n, total, gen)
    codes = np.where(events, gen.integers(1, 4, events.shape), 0)

    def act(psi, layer_events, li, started):
        for q in range(n):
            for code in (1, 2, 3):
                rows = np.flatnonzero(layer_events[:, q] == code)
                if rows.size:
                    psi[rows] = qsim.apply_1q_batch(psi[rows], qsim.PAULIS[code], q, n)

    return _trajectory_counts(spec, layers, prefix, counts, inst, codes, act, gen)


def _collapse_rows(psi: np.ndarray, rows: np.ndarray, q: int, n: int, gen) -> None:
    t = psi[rows].reshape(len(rows), 2**q, 2, 2 ** (n - q - 1))
    p1 = np.sum(np.abs(t[:, :, 1, :]) ** 2, axis=(1, 2))
    outcome = (gen.random(len(rows)) < p1).astype(np.intp)
    keep = np.zeros_like(t)
    idx = np.arange(len(rows))
    keep[idx, :, outcome, :] = t[idx, :, outcome, :]
    keep = keep.reshape(len(rows), -1)
    psi[rows] = keep / np.linalg.norm(keep, axis=1, keepdims=True)


def _counts_monitored(spec: EnsembleSpec, layers, prefix, n_shots: int, gen) -> np.ndarray:
    n, depth, p = spec.n_qubits, spec.depth, spec.p
    count = prefix[-1].shape[0]
    m = (depth - 1) * n
    q_meas = 0.0 if m == 0 or p == 0 else (-math.expm1(m * math.log1p(-p)) if p < 1 else 1.0)
    monitored = gen.binomial(n_shots, q_meas, size=count)
    counts = gen.multinomial(n_shots - monitored, qsim.outcome_probabilities(prefix[-1]))
    total = int(monitored.sum())
    if total == 0:
        return counts
    inst = np.repeat(np.arange(count), monitored)
    events = _event_patterns(p, depth - 1, n, total, gen)

    def act(psi, layer_events, li, started):
        for q in range(n):
            rows = np.flatnonzero(layer_events[:, q])
            if rows.size:
                _collapse_rows(psi, rows, q, n, gen)

    return _trajectory_counts(spec, layers, prefix, counts, inst, events, act, gen)


def sample_counts(spec: EnsembleSpec, count: int, n_shots: int, rng) -> np.ndarray:
    """Outcome histograms of ``count`` fresh instances, ``n_shots`` shots each.

    Shape ``(count, 2**n)``. For the unitary kinds the shots are iid draws
    from one output state. For the noisy and monitored kinds every shot is
    its own trajectory (fresh Pauli errors / measurement locations and
    outcomes); shots whose trajectory has no event are exactly draws from the
    ideal state and are sampled in bulk, the rest are simulated one
    trajectory per shot.
    """
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    gen = as_generator(rng)
    if spec.kind in UNITARY_KINDS:
        probs = qsim.outcome_probabilities(sample_states(spec, count, gen))
        return gen.multinomial(n_shots, probs)
    return lrc_counts(spec, _draw_lrc_gates(spec.n_qubits, spec.depth, count, gen), n_shots, gen)


def lrc_counts(spec: EnsembleSpec, layers: list[np.ndarray], n_shots: int, rng) -> np.ndarray:
    """Histograms for given brickwork gates (``layers[l]`` has shape (count, pairs, 4, 4)).

    Handles all three brickwork kinds; the noise or monitoring comes from ``spec``.
    """
    gen = as_generator(rng)
    count = layers[0].shape[0]
    prefix: list[np.ndarray] = []
    ideal = _run_lrc_batch(np.broadcast_to(initial_state(spec), (count, spec.dim)).copy(), layers, spec.n_qubits, prefix)
    if spec.kind == "NOISY_LRC":
        return _counts_noisy(spec, layers, prefix, n_shots, gen)
    if spec.kind == "MONIT_LRC":
        return _counts_monitored(spec, layers, prefix, n_shots, gen)
    return gen.multinomial(n_shots, qsim.outcome_probabilities(ideal))


def instance_layers(inst: CircuitInstance) -> list[np.ndarray]:
    """Brickwork gates of one instance in the batched layout (count = 1)."""
    n = inst.spec.n_qubits
    depth = max(op.layer for op in inst.program)
    layers = []
    for layer in range(1, depth + 1):
        ops = [op for op in inst.program if op.layer == layer and op.name == "u4"]
        layers.append(np.stack([op.data for op in ops])[None] if ops else np.zeros((1, 0, 4, 4), complex))
        assert [op.qubits for op in ops] == brickwork_pairs(n, layer)
    return layers


# ---------------------------------------------------------------- explicit instances


def instance_from_seed(spec: EnsembleSpec, instance_seed: int) -> CircuitInstance:
    gen = np.random.default_rng(instance_seed)
    n = spec.n_qubits
    program: list[GateOp] = []
    seed = preproc_seed(spec.preproc)
    if seed is not None:
        program.append(GateOp(0, "preproc", tuple(range(n)), fixed_preprocessing(n, seed)))
    drawn = _draw(spec, 1, gen)
    if spec.kind == "RC":
        tab = clifford.CliffordTableau(n, drawn["sym"][0], drawn["phases"][0])
        program.append(GateOp(1, "clifford", tuple(range(n)), tab))
    elif spec.kind == "HAAR":
        program.append(GateOp(1, "unitary", tuple(range(n)), drawn["unitary"][0]))
    elif spec.kind == "RDC":
        theta = drawn["theta"][0]
        for it in range(spec.iterations):
            for p, pair in enumerate(rdc_pairs(n)):
                program.append(GateOp(2 * it + 1, "diag", pair, theta[it, p]))
            program.extend(GateOp(2 * it + 2, "H", (q,)) for q in range(n))
    else:
        for layer, gates in enumerate(drawn["layers"], start=1):
            for j, pair in enumerate(brickwork_pairs(n, layer)):
                program.append(GateOp(layer, "u4", pair, gates[0, j]))
            if spec.kind == "NOISY_LRC":
                program.extend(GateOp(layer, "depolarize", (q,), spec.p) for q in range(n))
            elif spec.kind == "MONIT_LRC" and layer < spec.depth:
                program.extend(GateOp(layer, "monitor", (q,), spec.p) for q in range(n))
    return CircuitInstance(spec, program, instance_seed)


def draw_instance(spec: EnsembleSpec, rng) -> CircuitInstance:
    seed = int(as_generator(rng).integers(0, 2**63))
    return instance_from_seed(spec, seed)


def _execute(inst: CircuitInstance, gen: np.random.Generator | None) -> StateVector:
    n = inst.spec.n_qubits
    state = qsim.new_zero_state(n)
    for op in inst.program:
        if op.name in ("preproc", "unitary"):
            state = qsim.apply_dense_unitary(state, op.data)
        elif op.name == "clifford":
            state = clifford.apply_clifford(state, op.data)
        elif op.name == "u4":
            state = qsim.apply_two_qubit_gate(state, op.data, *op.qubits)
        elif op.name == "diag":
            state = qsim.apply_two_qubit_gate(state, np.diag(np.exp(1j * op.data)), *op.qubits)
        elif op.name == "H":
            state = qsim.apply_single_qubit_gate(state, qsim.H, op.qubits[0])
        elif op.name == "depolarize":
            state = qsim.apply_depolarizing_trajectory(state, op.qubits[0], op.data, gen)
        elif op.name == "monitor":
            if gen.random() < op.data:
                _, state = qsim.measure_and_collapse(state, op.qubits[0], gen)
        else:
            raise ValueError(f"unknown program op {op.name!r}")
    return state


def instance_state(inst: CircuitInstance) -> StateVector:
    """``|psi_out>`` of a unitary instance."""
    if inst.spec.kind not in UNITARY_KINDS:
        raise UnsupportedError(f"{inst.spec.kind} output depends on the shot; no single state")
    return _execute(inst, None)


def run_instance(inst: CircuitInstance, n_shots: int, rng) -> np.ndarray:
    """Shot records ``(n_shots, n_qubits)`` for one instance.

    Non-unitary kinds re-simulate the whole program for every shot.
    """
    if n_shots < 1:
        raise ValueError(f"n_shots must be >= 1, got {n_shots}")
    gen = as_generator(rng)
    if inst.spec.kind in UNITARY_KINDS:
        return qsim.sample_measurements(instance_state(inst), n_shots, gen)
    return np.concatenate([qsim.sample_measurements(_execute(inst, gen), 1, gen) for _ in range(n_shots)])


def exact_expectation(inst: CircuitInstance, subset) -> float:
    """Z-string expectation of the output state without shot noise."""
    if inst.spec.kind not in UNITARY_KINDS:
        raise UnsupportedError(f"exact expectation is undefined for {inst.spec.kind}")
    return qsim.z_string_expectation(instance_state(inst), subset)


# ---------------------------------------------------------------- design bounds


@dataclass(frozen=True)
class DesignBoundParams:
    t: int
    n: int
    epsilon: float
    c: float = 1.0

    def __post_init__(self):
        if self.t < 1 or self.n < 2 or self.epsilon <= 0 or self.c <= 0:
            raise ValueError(f"invalid design-bound parameters {self}")


def lrc_design_depth_bound(params: DesignBoundParams) -> float:
    """Brickwork depth sufficient for an epsilon-approximate t-design: ``c t^9 (n t + log2(1/eps))``."""
    t = params.t
    return params.c * t**9 * (params.n * t + math.log2(1 / params.epsilon))


def rdc_design_iteration_bound(t: int, n: int, epsilon: float) -> float:
    """Diagonal-circuit iterations sufficient for an epsilon-approximate t-design.

    ``(t n + log2(1/eps)) / (n - 2 log2(t!))``; raises ``DomainError`` when the
    denominator is not positive.
    """
    if t < 1 or n < 1 or epsilon <= 0:
        raise ValueError(f"invalid arguments t={t}, n={n}, epsilon={epsilon}")
    denom = n - 2 * math.log2(math.factorial(t))
    if denom <= 0:
        raise DomainError(f"bound inapplicable: n - 2 log2(t!) = {denom:.4g} <= 0")
    return (t * n + math.log2(1 / epsilon)) / denom
