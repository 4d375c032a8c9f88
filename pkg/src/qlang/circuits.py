"""Gate-level circuits and exact evolution.

Gates are either small unitaries (Hadamard, Pauli-X, raw injected
unitaries) applied by tensor contraction, or basis permutations
(controlled-SWAP blocks, Toffoli-type conjunction gates, qubit
permutations) applied by index gather, which keeps the controlled-SWAP of
two n-qubit registers cheap without materializing a 2^(2n+1) matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, ResourceLimitError
from .rng import make_rng
from .states import (
    MAX_QUBITS,
    Bipartition,
    DensityOperator,
    PureState,
    basis_state,
    partial_trace,
    tensor,
)

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


@dataclass(frozen=True)
class Gate:
    """One circuit element; build through the class-method constructors."""

    kind: str
    targets: tuple
    matrix: np.ndarray | None = field(default=None, compare=False)
    control: int | None = None
    reg_a: tuple = ()
    reg_b: tuple = ()
    controls: tuple = ()
    flip_target: int | None = None
    perm: tuple = ()

    def __post_init__(self):
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"duplicate targets in {self.kind} gate: {self.targets}")

    @classmethod
    def h(cls, q: int) -> "Gate":
        return cls("Hadamard", (q,), matrix=_H)

    @classmethod
    def x(cls, q: int) -> "Gate":
        return cls("PauliX", (q,), matrix=_X)

    @classmethod
    def cswap(cls, control: int, reg_a, reg_b) -> "Gate":
        a, b = tuple(reg_a), tuple(reg_b)
        if len(a) != len(b) or not a:
            raise ValueError("controlled-SWAP needs two equal-size nonempty registers")
        return cls("ControlledSwapBlock", (control,) + a + b,
                   control=control, reg_a=a, reg_b=b)

    @classmethod
    def toffoli_type(cls, controls, flip_target: int) -> "Gate":
        ctl = tuple(controls)
        if not ctl:
            raise ValueError("Toffoli-type gate needs at least one control")
        return cls("ToffoliType", ctl + (flip_target,), controls=ctl, flip_target=flip_target)

    @classmethod
    def permutation(cls, perm) -> "Gate":
        p = tuple(int(q) for q in perm)
        if sorted(p) != list(range(len(p))):
            raise ValueError(f"not a permutation of 0..{len(p) - 1}: {p}")
        return cls("QubitPermutation", tuple(range(len(p))), perm=p)

    @classmethod
    def unitary(cls, matrix: np.ndarray, targets) -> "Gate":
        t = tuple(targets)
        u = np.asarray(matrix, dtype=complex)
        d = 1 << len(t)
        if u.shape != (d, d):
            raise ValueError(f"unitary shape {u.shape} does not match {len(t)} targets")
        if np.max(np.abs(u.conj().T @ u - np.eye(d))) > 1e-9:
            raise ValueError("matrix is not unitary within 1e-9")
        u = u.copy()
        u.setflags(write=False)
        return cls("RawUnitary", t, matrix=u)

    def is_permutation(self) -> bool:
        return self.kind in ("ControlledSwapBlock", "ToffoliType", "QubitPermutation")

    def basis_map(self, n: int) -> np.ndarray:
        """Index map pi with |i> -> |pi[i]> for permutation-kind gates."""
        idx = np.arange(1 << n)
        if self.kind == "ControlledSwapBlock":
            sw = idx
            for qa, qb in zip(self.reg_a, self.reg_b):
                diff = ((idx >> (n - 1 - qa)) ^ (idx >> (n - 1 - qb))) & 1
                sw = sw ^ (diff << (n - 1 - qa)) ^ (diff << (n - 1 - qb))
            ctl = (idx >> (n - 1 - self.control)) & 1
            return np.where(ctl == 1, sw, idx)
        if self.kind == "ToffoliType":
            fire = np.ones_like(idx)
            for q in self.controls:
                fire &= (idx >> (n - 1 - q)) & 1
            return idx ^ (fire << (n - 1 - self.flip_target))
        if self.kind == "QubitPermutation":
            out = np.zeros_like(idx)
            for j, src in enumerate(self.perm):
                out |= ((idx >> (n - 1 - src)) & 1) << (n - 1 - j)
            return out
        raise ValueError(f"{self.kind} gate has no basis map")


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over ``n`` qubits; ``measured`` are output qubits."""

    n: int
    gates: tuple
    measured: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "measured", tuple(int(q) for q in self.measured))
        if self.n < 1 or self.n > MAX_QUBITS:
            raise ResourceLimitError(f"circuit size {self.n} outside 1..{MAX_QUBITS}")
        for g in self.gates:
            if any(q < 0 or q >= self.n for q in g.targets):
                raise ValueError(f"{g.kind} targets {g.targets} out of range for n={self.n}")
            if g.kind == "QubitPermutation" and len(g.perm) != self.n:
                raise ValueError("qubit permutation must cover the whole circuit")
        if any(q < 0 or q >= self.n for q in self.measured):
            raise ValueError("measured qubits out of range")


@dataclass(frozen=True)
class ShotResult:
    """Measured-bitstring counts from one seeded sampling run."""

    outcomes: dict
    shots: int
    seed: int

    def frequency(self, bits: str) -> float:
        return self.outcomes.get(bits, 0) / self.shots


# ---------------------------------------------------------------------------
# evolution


def _apply_gate_left(mat: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    """G @ mat for mat with 2^n rows (any column count)."""
    if gate.is_permutation():
        out = np.empty_like(mat)
        out[gate.basis_map(n)] = mat
        return out
    k = len(gate.targets)
    cols = mat.shape[1] if mat.ndim == 2 else 1
    t = mat.reshape([2] * n + ([cols] if mat.ndim == 2 else []))
    u = gate.matrix.reshape([2] * (2 * k))
    t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), list(gate.targets)))
    t = np.moveaxis(t, list(range(k)), list(gate.targets))
    return t.reshape(mat.shape)


def evolve_pure(c: Circuit, phi: PureState) -> PureState:
    """Apply the circuit unitary to a pure state."""
    if phi.n != c.n:
        raise ValueError("state size does not match circuit size")
    v = phi.amplitudes.copy()
    for g in c.gates:
        v = _apply_gate_left(v, g, c.n)
    return PureState(c.n, v / np.linalg.norm(v))


def evolve_exact(c: Circuit, rho: DensityOperator) -> DensityOperator:
    """Conjugate the input density operator by every gate in order."""
    if rho.n != c.n:
        raise ValueError("state size does not match circuit size")
    m = rho.matrix
    for g in c.gates:
        left = _apply_gate_left(m, g, c.n)
        m = _apply_gate_left(left.conj().T, g, c.n).conj().T
    return DensityOperator(c.n, m, validate=False)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Full 2^n x 2^n unitary induced by the circuit."""
    u = np.eye(1 << c.n, dtype=complex)
    for g in c.gates:
        u = _apply_gate_left(u, g, c.n)
    return u


def _bit_of(idx: np.ndarray, q: int, n: int) -> np.ndarray:
    return (idx >> (n - 1 - q)) & 1


def outcome_distribution(c: Circuit, rho: DensityOperator) -> np.ndarray:
    """Exact Born-rule distribution over the measured qubits' bitstrings."""
    if not c.measured:
        raise ValueError("circuit declares no measured qubits")
    diag = np.clip(evolve_exact(c, rho).matrix.diagonal().real, 0.0, None)
    idx = np.arange(1 << c.n)
    k = len(c.measured)
    om = np.zeros_like(idx)
    for pos, q in enumerate(c.measured):
        om |= _bit_of(idx, q, c.n) << (k - 1 - pos)
    dist = np.bincount(om, weights=diag, minlength=1 << k)
    return dist / dist.sum()


def probability_of_outcome(c: Circuit, rho: DensityOperator, bits: str) -> float:
    if len(bits) != len(c.measured):
        raise ValueError(f"outcome length {len(bits)} != {len(c.measured)} measured qubits")
    return float(outcome_distribution(c, rho)[int(bits, 2)])


def sample_shots(c: Circuit, rho: DensityOperator, shots: int, seed: int,
                 *stream: int) -> ShotResult:
    """Inverse-CDF sampling from the exact outcome distribution."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    dist = outcome_distribution(c, rho)
    return sample_from_distribution(dist, len(c.measured), shots, seed, *stream)


def sample_from_distribution(dist: np.ndarray, width: int, shots: int, seed: int,
                             *stream: int) -> ShotResult:
    rng = make_rng(seed, *stream)
    cdf = np.cumsum(dist)
    cdf[-1] = 1.0
    draws = np.searchsorted(cdf, rng.random(shots), side="right")
    counts = np.bincount(draws, minlength=len(dist))
    outcomes = {format(i, f"0{width}b"): int(cnt)
                for i, cnt in enumerate(counts) if cnt}
    return ShotResult(outcomes, shots, seed)


# ---------------------------------------------------------------------------
# named networks


def build_estimation_network(n: int) -> Circuit:
    """Swap-test interferometer on 2n+1 qubits; qubit 0 is the control.

    The control's probability of reading 0 on input |0><0| (x) rho_a (x)
    rho_b is (tr(rho_a rho_b) + 1) / 2.
    """
    if n < 1 or n > 6:
        raise ResourceLimitError(f"estimation network size {n} outside 1..6")
    reg_a = tuple(range(1, n + 1))
    reg_b = tuple(range(n + 1, 2 * n + 1))
    gates = (Gate.h(0), Gate.cswap(0, reg_a, reg_b), Gate.h(0))
    return Circuit(2 * n + 1, gates, measured=(0,))


def estimation_input(rho_a: DensityOperator, rho_b: DensityOperator) -> DensityOperator:
    """|0><0| (x) rho_a (x) rho_b, the canonical estimation-network input."""
    if rho_a.n != rho_b.n:
        raise ValueError("register sizes differ")
    return tensor(tensor(basis_state(1, 0).density(), rho_a), rho_b)


def swap_test_prob0(rho_a: DensityOperator, rho_b: DensityOperator) -> float:
    """Exact control-qubit P0 of the estimation network on the given pair."""
    c = build_estimation_network(rho_a.n)
    return probability_of_outcome(c, estimation_input(rho_a, rho_b), "0")


@dataclass(frozen=True)
class CompositePlan:
    """Execution plan for the repeated-purity circuit.

    The monolithic network runs M copies of the estimation network side by
    side and feeds the (negated) control outcomes into a conjunction gate.
    Since the copies act on disjoint qubits, execution factorizes into M
    independent runs whose pass events are ANDed classically; the
    acceptance probability is P0^M either way.  ``monolithic_circuit``
    materializes the paper-facing single circuit for tiny regression sizes.
    """

    m: int
    repetitions: int
    estimator: Circuit

    def exact_accept_prob(self, rho: DensityOperator) -> float:
        p0 = probability_of_outcome(self.estimator, estimation_input(rho, rho), "0")
        return p0 ** self.repetitions

    def sample_accept_freq(self, rho: DensityOperator, shots: int, seed: int,
                           *stream: int) -> float:
        """Fraction of ``shots`` protocol runs in which all M tests pass."""
        p0 = probability_of_outcome(self.estimator, estimation_input(rho, rho), "0")
        passed = np.ones(shots, dtype=bool)
        for r in range(self.repetitions):
            rng = make_rng(seed, *stream, r)
            passed &= rng.random(shots) < p0
        return float(passed.mean())

    def monolithic_circuit(self) -> Circuit:
        block = 2 * self.m + 1
        total = self.repetitions * block + 1
        if total > MAX_QUBITS:
            raise ResourceLimitError(
                f"monolithic purity circuit needs {total} qubits (limit {MAX_QUBITS})")
        gates = []
        controls = []
        for i in range(self.repetitions):
            base = i * block
            controls.append(base)
            reg_a = tuple(range(base + 1, base + 1 + self.m))
            reg_b = tuple(range(base + 1 + self.m, base + block))
            gates += [Gate.h(base), Gate.cswap(base, reg_a, reg_b), Gate.h(base)]
        # the conjunction fires on all-ones, but a passing test reads 0
        gates += [Gate.x(q) for q in controls]
        gates.append(Gate.toffoli_type(tuple(controls), total - 1))
        return Circuit(total, tuple(gates), measured=(total - 1,))

    def monolithic_input(self, rho: DensityOperator) -> DensityOperator:
        ctrl = basis_state(1, 0).density()
        block = tensor(tensor(ctrl, rho), rho)
        full = block
        for _ in range(self.repetitions - 1):
            full = tensor(full, block)
        return tensor(full, ctrl)

    def monolithic_accept_prob(self, rho: DensityOperator) -> float:
        return probability_of_outcome(self.monolithic_circuit(),
                                      self.monolithic_input(rho), "1")


def build_purity_circuit(m: int, repetitions: int) -> CompositePlan:
    if m < 1 or repetitions < 1:
        raise ValueError("register size and repetition count must be >= 1")
    return CompositePlan(m, repetitions, build_estimation_network(m))


def subset_extract(phi: PureState, subset_string: str) -> DensityOperator:
    """State of the qubits marked '1', via permute-to-front then trace."""
    if len(subset_string) != phi.n or set(subset_string) - {"0", "1"}:
        raise ValueError(f"subset string must be {phi.n} bits of 0/1")
    ones = [i for i, b in enumerate(subset_string) if b == "1"]
    zeros = [i for i, b in enumerate(subset_string) if b == "0"]
    if not ones or not zeros:
        raise ValueError("subset string must select a proper nonempty subset")
    net = Circuit(phi.n, (Gate.permutation(ones + zeros),))
    moved = evolve_pure(net, phi)
    return partial_trace(moved.density(), range(len(ones)))


def reflection_matrix(phi: PureState) -> np.ndarray:
    """2 |phi><phi| - I."""
    return 2 * np.outer(phi.amplitudes, phi.amplitudes.conj()) - np.eye(phi.dim)


def controlled_reflection(phi: PureState) -> Gate:
    """Reflection about ``phi`` applied iff the extra last qubit reads 1."""
    if phi.n > 6:
        raise ResourceLimitError("controlled reflection supports at most 6 register qubits")
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    u = np.kron(np.eye(phi.dim), p0) + np.kron(reflection_matrix(phi), p1)
    return Gate.unitary(u, tuple(range(phi.n + 1)))


def controlled_circuit_unitary(c: Circuit) -> Gate:
    """Apply the circuit's unitary iff the extra last qubit reads 1."""
    u = circuit_unitary(c)
    p0 = np.diag([1.0, 0.0])
    p1 = np.diag([0.0, 1.0])
    full = np.kron(np.eye(u.shape[0]), p0) + np.kron(u, p1)
    return Gate.unitary(full, tuple(range(c.n + 1)))


# ---------------------------------------------------------------------------
# text format
#
# One gate per line:   H q0
#                      X q1
#                      CSWAP q0 | q1 q2 | q3 q4
#                      PERM 2 0 1
#                      TOFF q0 q1 | q2
#                      UNITARY payload.json
# plus a mandatory "qubits N" header and an optional "measure q0 q1" line.
# UNITARY payloads are JSON {"targets": [...], "matrix": [[[re, im], ...]]}
# resolved relative to the description's base directory.


def _parse_qubit(tok: str) -> int:
    if not tok.startswith("q") or not tok[1:].isdigit():
        raise FormatError(f"expected qubit token like 'q0', got {tok!r}")
    return int(tok[1:])


def parse_circuit_text(text: str, unitary_loader=None) -> Circuit:
    """Parse the one-gate-per-line circuit description format."""
    n = None
    gates = []
    measured = ()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        op = toks[0].lower()
        try:
            if op == "qubits":
                n = int(toks[1])
            elif n is None:
                raise FormatError("first directive must be 'qubits N'")
            elif op == "h":
                gates.append(Gate.h(_parse_qubit(toks[1])))
            elif op == "x":
                gates.append(Gate.x(_parse_qubit(toks[1])))
            elif op == "cswap":
                groups = [g.split() for g in " ".join(toks[1:]).split("|")]
                if len(groups) != 3 or len(groups[0]) != 1:
                    raise FormatError("CSWAP needs 'CSWAP ctrl | regA | regB'")
                gates.append(Gate.cswap(_parse_qubit(groups[0][0]),
                                        [_parse_qubit(t) for t in groups[1]],
                                        [_parse_qubit(t) for t in groups[2]]))
            elif op == "perm":
                gates.append(Gate.permutation([int(t) for t in toks[1:]]))
            elif op == "toff":
                groups = [g.split() for g in " ".join(toks[1:]).split("|")]
                if len(groups) != 2 or len(groups[1]) != 1:
                    raise FormatError("TOFF needs 'TOFF controls | target'")
                gates.append(Gate.toffoli_type([_parse_qubit(t) for t in groups[0]],
                                               _parse_qubit(groups[1][0])))
            elif op == "unitary":
                if unitary_loader is None:
                    raise FormatError("UNITARY directives need a payload loader")
                matrix, targets = unitary_loader(toks[1])
                gates.append(Gate.unitary(matrix, targets))
            elif op == "measure":
                measured = tuple(_parse_qubit(t) for t in toks[1:])
            else:
                raise FormatError(f"unknown directive {toks[0]!r}")
        except FormatError:
            raise
        except (ValueError, IndexError) as exc:
            raise FormatError(f"line {lineno}: {exc}") from exc
    if n is None:
        raise FormatError("missing 'qubits N' header")
    try:
        return Circuit(n, tuple(gates), measured)
    except ValueError as exc:
        raise FormatError(str(exc)) from exc


def format_circuit_text(c: Circuit, unitary_namer=None) -> str:
    """Inverse of :func:`parse_circuit_text` (RawUnitary needs a namer)."""
    lines = [f"qubits {c.n}"]
    for g in c.gates:
        if g.kind == "Hadamard":
            lines.append(f"H q{g.targets[0]}")
        elif g.kind == "PauliX":
            lines.append(f"X q{g.targets[0]}")
        elif g.kind == "ControlledSwapBlock":
            lines.append("CSWAP q%d | %s | %s" % (
                g.control,
                " ".join(f"q{q}" for q in g.reg_a),
                " ".join(f"q{q}" for q in g.reg_b)))
        elif g.kind == "QubitPermutation":
            lines.append("PERM " + " ".join(str(q) for q in g.perm))
        elif g.kind == "ToffoliType":
            lines.append("TOFF %s | q%d" % (
                " ".join(f"q{q}" for q in g.controls), g.flip_target))
        elif g.kind == "RawUnitary":
            if unitary_namer is None:
                raise ValueError("serializing a RawUnitary gate needs a payload namer")
            lines.append(f"UNITARY {unitary_namer(g)}")
        else:
            raise ValueError(f"cannot serialize {g.kind}")
    if c.measured:
        lines.append("measure " + " ".join(f"q{q}" for q in c.measured))
    return "\n".join(lines) + "\n"
