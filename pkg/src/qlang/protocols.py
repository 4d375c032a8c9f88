"""Verifier procedures and prover strategies for the five languages.

Every verifier is a pure function of (instance, certificate, repetition
count, seed) and runs in two modes: exact (``shots=None``), where
acceptance statistics come from the density-matrix oracle, and sampled,
where control-qubit outcomes are drawn from the exact estimation-network
distribution with the given shot budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificateError, StrategyError
from .rng import make_rng
from .circuits import (
    Circuit,
    Gate,
    build_estimation_network,
    build_purity_circuit,
    controlled_circuit_unitary,
    controlled_reflection,
    estimation_input,
    evolve_pure,
    probability_of_outcome,
    reflection_matrix,
    sample_shots,
    subset_extract,
)
from .languages import member_L2, member_L3
from .states import (
    Bipartition,
    DensityOperator,
    PureState,
    basis_state,
    decompose_hermitian,
    overlap,
    partial_trace,
    partial_transpose,
    random_pure_state,
    schmidt_spectrum,
    tensor_states,
)

ACCEPT_THRESHOLD = 0.5
EXACT_DECISION_ATOL = 1e-9
L4_EXACT_TOL = 1e-6


@dataclass(frozen=True)
class Certificate:
    """Merlin's message: subset string, witness decomposition, or circuit."""

    kind: str  # subset | witness | circuit
    subset: str | None = None
    coeffs: tuple = ()
    states: tuple = ()
    circuit: Circuit | None = None
    size_bound: int = 0

    @classmethod
    def subset_string(cls, bits: str) -> "Certificate":
        if set(bits) - {"0", "1"}:
            raise CertificateError(f"subset string must be 0/1, got {bits!r}")
        return cls("subset", subset=bits, size_bound=len(bits))

    @classmethod
    def witness(cls, parts) -> "Certificate":
        coeffs = tuple(float(c) for c, _ in parts)
        states = tuple(r for _, r in parts)
        if not coeffs or any(not math.isfinite(c) for c in coeffs):
            raise CertificateError("witness coefficients must be finite and nonempty")
        if len({r.n for r in states}) != 1:
            raise CertificateError("witness states must share one dimension")
        size = sum(r.dim * r.dim * 2 for r in states) + len(coeffs)
        return cls("witness", coeffs=coeffs, states=states, size_bound=size)

    @classmethod
    def circuit_description(cls, circuit: Circuit, text: str | None = None) -> "Certificate":
        size = len(text) if text is not None else len(circuit.gates) + 1
        return cls("circuit", circuit=circuit, size_bound=size)

    def witness_matrix(self) -> np.ndarray:
        return sum(c * r.matrix for c, r in zip(self.coeffs, self.states))


@dataclass(frozen=True)
class Verdict:
    """Outcome of one protocol execution."""

    accepted: bool
    exact_accept_prob: float
    sampled_accept_freq: float | None
    repetitions: int
    copies_consumed: int
    transcript: tuple = ()

    def as_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "exact_accept_prob": self.exact_accept_prob,
            "sampled_accept_freq": self.sampled_accept_freq,
            "repetitions": self.repetitions,
            "copies_consumed": self.copies_consumed,
            "transcript": list(self.transcript),
        }


# ---------------------------------------------------------------------------
# overlap estimation shared by the sampled-mode verifiers


def _estimate_overlap(a: DensityOperator, b: DensityOperator, shots: int | None,
                      seed: int, *stream: int):
    """(estimate of tr(a b), statistical sigma) from swap-test statistics."""
    if shots is None:
        return overlap(a, b), 0.0
    net = build_estimation_network(a.n)
    res = sample_shots(net, estimation_input(a, b), shots, seed, *stream)
    p_hat = res.frequency("0")
    sigma_p = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / shots) / shots)
    return 2 * p_hat - 1, 2 * sigma_p


# ---------------------------------------------------------------------------
# L1 / L2: purity of a prefix, purity of a claimed product factor


def _purity_protocol(rho: DensityOperator, repetitions: int, seed: int,
                     shots: int | None, copies_per_run: int) -> Verdict:
    plan = build_purity_circuit(rho.n, repetitions)
    p0 = probability_of_outcome(plan.estimator, estimation_input(rho, rho), "0")
    exact = p0 ** repetitions
    transcript = [{"p0_exact": p0}]
    sampled = None
    if shots is not None:
        passed = np.ones(shots, dtype=bool)
        for r in range(repetitions):
            rng = make_rng(seed, r)
            zeros = rng.random(shots) < p0
            passed &= zeros
        sampled = float(passed.mean())
        transcript.append({"sampled_accept_freq": sampled, "shots": shots})
    decided_on = exact if sampled is None else sampled
    return Verdict(
        accepted=decided_on >= ACCEPT_THRESHOLD,
        exact_accept_prob=exact,
        sampled_accept_freq=sampled,
        repetitions=repetitions,
        copies_consumed=copies_per_run * repetitions * (shots or 1),
        transcript=tuple(transcript),
    )


def verify_L1(phi: PureState, f_n: int, repetitions: int, seed: int = 0,
              shots: int | None = None) -> Verdict:
    """Swap-test the reduced state of the first ``f_n`` qubits M times.

    Each run consumes two fresh copies of the instance; all M control
    outcomes must read 0, so the exact acceptance probability is
    ((tr(rho^2) + 1) / 2)^M.
    """
    if repetitions < 1:
        raise ValueError("repetition count must be >= 1")
    if not 1 <= f_n <= phi.n:
        raise ValueError(f"prefix length {f_n} outside 1..{phi.n}")
    rho = phi.density() if f_n == phi.n else partial_trace(phi.density(), range(f_n))
    return _purity_protocol(rho, repetitions, seed, shots, copies_per_run=2)


def merlin_L2_honest(phi: PureState) -> Certificate:
    """Subset string for a product cut of a member instance."""
    res = member_L2(phi)
    if not res.member:
        raise StrategyError("state is not separable across any bipartition")
    return Certificate.subset_string(res.witness_cut)


def verify_L2(phi: PureState, cert: Certificate, repetitions: int, seed: int = 0,
              shots: int | None = None) -> Verdict:
    """Extract the claimed factor and run the purity protocol on it."""
    if cert.kind != "subset" or cert.subset is None:
        raise CertificateError("expected a subset-string certificate")
    bits = cert.subset
    if len(bits) != phi.n:
        raise CertificateError(f"subset string length {len(bits)} != {phi.n} qubits")
    if len(set(bits)) != 2:
        raise CertificateError("subset string must select a proper nonempty subset")
    rho_s = subset_extract(phi, bits)
    return _purity_protocol(rho_s, repetitions, seed, shots, copies_per_run=2)


# ---------------------------------------------------------------------------
# L3: entanglement witness


def _product_state_across(cut: Bipartition, a: PureState, b: PureState) -> PureState:
    """a on subset A and b on subset B, in the original qubit ordering."""
    joined = tensor_states(a, b)
    order = cut.subset_a + cut.subset_b
    inverse = [0] * cut.n
    for pos, q in enumerate(order):
        inverse[q] = pos
    t = joined.amplitudes.reshape([2] * cut.n).transpose(inverse)
    return PureState(cut.n, t.reshape(-1))


def validity_panel(cut: Bipartition, seed: int, random_count: int = 200):
    """Product states used to vet a claimed witness: the computational
    basis plus ``random_count`` seeded Haar product states across the cut."""
    states = [basis_state(cut.n, i) for i in range(1 << cut.n)]
    na, nb = len(cut.subset_a), len(cut.subset_b)
    for j in range(random_count):
        a = random_pure_state(na, seed, 101, j)
        b = random_pure_state(nb, seed, 102, j)
        states.append(_product_state_across(cut, a, b))
    return states


def merlin_L3_honest(rho: DensityOperator, cut: Bipartition) -> Certificate:
    """Entanglement witness for a state the oracle calls entangled.

    Pure instances get the standard witness (largest Schmidt coefficient
    squared) * I - |psi><psi|; mixed instances get the partial transpose of
    the projector onto the negative-eigenvalue eigenvector of rho^T_B.
    """
    res = member_L3(rho, cut)
    if not res.member:
        raise StrategyError("state is separable across the given cut")
    if rho.is_pure():
        psi = rho.principal_state()
        lam = schmidt_spectrum(psi, cut).largest
        w = lam ** 2 * np.eye(rho.dim) - np.outer(psi.amplitudes, psi.amplitudes.conj())
    else:
        vals, vecs = np.linalg.eigh(partial_transpose(rho, cut))
        v = vecs[:, 0]
        w = partial_transpose(np.outer(v, v.conj()), cut)
    return Certificate.witness(decompose_hermitian(w))


def _witness_value(cert: Certificate, sigma: DensityOperator, shots: int | None,
                   seed: int, *stream: int):
    """(sum_i c_i tr(rho_i sigma), sigma of the combined estimate)."""
    total = 0.0
    var = 0.0
    for i, (c, r) in enumerate(zip(cert.coeffs, cert.states)):
        est, sig = _estimate_overlap(r, sigma, shots, seed, *stream, i)
        total += c * est
        var += (c * sig) ** 2
    return total, math.sqrt(var)


def verify_L3(rho: DensityOperator, cert: Certificate, shots: int | None = None,
              seed: int = 0, cut: Bipartition | None = None,
              panel_random: int = 200) -> Verdict:
    """Two-phase witness check: vet the witness on product states, then
    accept iff the witness expectation on the instance is negative beyond
    statistical noise (3 sigma sampled, 1e-9 exact)."""
    if cert.kind != "witness":
        raise CertificateError("expected a witness certificate")
    if any(r.n != rho.n for r in cert.states):
        raise CertificateError("witness states do not match the instance dimension")
    if cut is None:
        cut = Bipartition.from_subset(rho.n, [0])
    transcript = []
    panel_min = math.inf
    valid = True
    for j, sigma in enumerate(validity_panel(cut, seed, panel_random)):
        value, sig = _witness_value(cert, sigma.density(), shots, seed, 1, j)
        panel_min = min(panel_min, value)
        if value < -(3 * sig if shots is not None else EXACT_DECISION_ATOL):
            valid = False
            transcript.append({"phase": "validity", "panel_index": j,
                               "value": value, "sigma": sig})
            break
    transcript.insert(0, {"phase": "validity", "min_value": panel_min,
                          "passed": valid})
    exact_stat = float(np.vdot(cert.witness_matrix(), rho.matrix).real)
    stat, sig = _witness_value(cert, rho, shots, seed, 2)
    transcript.append({"phase": "decision", "statistic": stat, "sigma": sig,
                       "exact_statistic": exact_stat})
    if shots is None:
        decided = stat < -EXACT_DECISION_ATOL
        sampled = None
    else:
        decided = stat < -3 * sig
        sampled = 1.0 if (valid and decided) else 0.0
    accepted = valid and decided
    exact_accept = 1.0 if (valid and exact_stat < -EXACT_DECISION_ATOL) else 0.0
    n_est = len(cert.coeffs)
    return Verdict(
        accepted=accepted,
        exact_accept_prob=exact_accept,
        sampled_accept_freq=sampled,
        repetitions=1,
        copies_consumed=n_est * (shots or 1),
        transcript=tuple(transcript),
    )


# ---------------------------------------------------------------------------
# L4: reflection-operator certificates


def merlin_L4_honest(phi: PureState) -> Certificate:
    """Circuit implementing the exact reflection about the instance."""
    gate = Gate.unitary(reflection_matrix(phi), tuple(range(phi.n)))
    return Certificate.circuit_description(Circuit(phi.n, (gate,)))


@dataclass(frozen=True)
class MerlinStrategy:
    """Honest or cheating certificate generator for the L4/L5 protocols."""

    mode: str
    parameters: dict = field(default_factory=dict)

    def certificate(self, phi: PureState, seed: int = 0) -> Certificate:
        n, d = phi.n, phi.dim
        if self.mode == "honest":
            return merlin_L4_honest(phi)
        if self.mode == "identity":
            return Certificate.circuit_description(Circuit(n, ()))
        if self.mode == "reflect_other":
            target = self.parameters.get("overlap", 0.9)
            chi = random_orthogonal_state(phi, seed, 11)
            psi = PureState(n, math.sqrt(target) * phi.amplitudes
                            + math.sqrt(1 - target) * chi.amplitudes)
            gate = Gate.unitary(reflection_matrix(psi), tuple(range(n)))
            return Certificate.circuit_description(Circuit(n, (gate,)))
        if self.mode == "complement_phase":
            theta = self.parameters.get("theta")
            if theta is None:
                theta = float(make_rng(seed, 12).uniform(0, 2 * math.pi))
            proj = np.outer(phi.amplitudes, phi.amplitudes.conj())
            u = proj + np.exp(1j * theta) * (np.eye(d) - proj)
            gate = Gate.unitary(u, tuple(range(n)))
            return Certificate.circuit_description(Circuit(n, (gate,)))
        if self.mode == "complement_unitary":
            proj = np.outer(phi.amplitudes, phi.amplitudes.conj())
            q = _complement_basis(phi)
            w = haar_unitary(d - 1, seed, 13)
            u = proj - q @ w @ q.conj().T
            gate = Gate.unitary(u, tuple(range(n)))
            return Certificate.circuit_description(Circuit(n, (gate,)))
        if self.mode == "haar":
            gate = Gate.unitary(haar_unitary(d, seed, 14), tuple(range(n)))
            return Certificate.circuit_description(Circuit(n, (gate,)))
        raise StrategyError(f"unknown strategy mode {self.mode!r}")


def merlin_L4_cheat_library() -> list:
    """The adversarial strategies soundness is demonstrated against."""
    return [
        MerlinStrategy("identity"),
        MerlinStrategy("reflect_other", {"overlap": 0.9}),
        MerlinStrategy("complement_phase"),
        MerlinStrategy("complement_unitary"),
        MerlinStrategy("haar"),
    ]


def haar_unitary(dim: int, seed: int, *stream: int) -> np.ndarray:
    rng = make_rng(seed, *stream)
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_orthogonal_state(phi: PureState, seed: int, *stream: int) -> PureState:
    """Haar-random state in the orthogonal complement of ``phi``."""
    for attempt in range(16):
        v = random_pure_state(phi.n, seed, *stream, attempt).amplitudes.copy()
        v -= np.vdot(phi.amplitudes, v) * phi.amplitudes
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            return PureState(phi.n, v / norm)
    raise RuntimeError("could not draw an orthogonal state")


def _complement_basis(phi: PureState) -> np.ndarray:
    """Columns: an orthonormal basis of the complement of ``phi``."""
    d = phi.dim
    m = np.eye(d, dtype=complex) - np.outer(phi.amplitudes, phi.amplitudes.conj())
    vals, vecs = np.linalg.eigh(m)
    return vecs[:, 1:]  # the single near-zero eigenvalue is phi itself


def verify_L4(phi: PureState, cert: Certificate, probes: int, seed: int = 0,
              shots: int | None = None, tol: float = L4_EXACT_TOL) -> Verdict:
    """Probe the claimed reflection network with Haar-random states.

    For each probe xi: O1 = |<xi|phi>|^2, O2 = |<N xi|phi>|^2,
    O3 = |<N xi|xi>|^2.  A true reflection about phi gives O2 = O1 and
    O3 = (2 O1 - 1)^2; any probe violating either relation (beyond ``tol``
    exact, 3 sigma sampled) is a detected cheat.
    """
    if cert.kind != "circuit" or cert.circuit is None:
        raise CertificateError("expected a circuit certificate")
    if cert.circuit.n != phi.n:
        raise CertificateError(
            f"certificate acts on {cert.circuit.n} qubits, instance has {phi.n}")
    if probes < 1:
        raise ValueError("probe count must be >= 1")
    phi_rho = phi.density()
    transcript = []
    accepted = True
    for i in range(probes):
        xi = random_pure_state(phi.n, seed, i)
        xo = evolve_pure(cert.circuit, xi)
        o1, s1 = _estimate_overlap(phi_rho, xi.density(), shots, seed, i, 0)
        o2, s2 = _estimate_overlap(phi_rho, xo.density(), shots, seed, i, 1)
        o3, s3 = _estimate_overlap(xo.density(), xi.density(), shots, seed, i, 2)
        expected_o3 = (2 * o1 - 1) ** 2
        if shots is None:
            tol1, tol2 = tol, tol
        else:
            tol1 = 3 * math.sqrt(s1 ** 2 + s2 ** 2)
            tol2 = 3 * math.sqrt(s3 ** 2 + (4 * abs(2 * o1 - 1) * s1) ** 2) + tol
        ok = abs(o2 - o1) <= tol1 and abs(o3 - expected_o3) <= tol2
        transcript.append({"probe": i, "O1": o1, "O2": o2, "O3": o3,
                           "expected_O3": expected_o3, "passed": ok})
        if not ok:
            accepted = False
            break
    exact = 1.0 if accepted else 0.0
    return Verdict(
        accepted=accepted,
        exact_accept_prob=exact,
        sampled_accept_freq=None if shots is None else exact,
        repetitions=probes,
        copies_consumed=2 * probes * (shots or 1),
        transcript=tuple(transcript),
    )


# ---------------------------------------------------------------------------
# L5: checkable states via the derived checker


def build_checker_from_reflection(phi: PureState) -> Circuit:
    """(I (x) H) ctrl-R (I (x) H) with the flag as the extra last qubit.

    On phi (x) |0> the flag stays 0; on any state orthogonal to phi it
    flips to 1.
    """
    return Circuit(phi.n + 1,
                   (Gate.h(phi.n), controlled_reflection(phi), Gate.h(phi.n)),
                   measured=(phi.n,))


def checker_from_certificate(cert: Certificate) -> Circuit:
    """Same composition, but around the certificate's network."""
    if cert.kind != "circuit" or cert.circuit is None:
        raise CertificateError("expected a circuit certificate")
    n = cert.circuit.n
    return Circuit(n + 1,
                   (Gate.h(n), controlled_circuit_unitary(cert.circuit), Gate.h(n)),
                   measured=(n,))


def verify_L5(phi: PureState, cert: Certificate, probes: int, seed: int = 0,
              shots: int | None = None) -> Verdict:
    """L4 verification plus behavioral tests of the derived checker:
    orthogonal probes must raise the flag, the instance must not."""
    base = verify_L4(phi, cert, probes, seed, shots)
    checker = checker_from_certificate(cert)
    transcript = list(base.transcript)
    accepted = base.accepted

    def flag_prob(state: PureState, want: str, *stream: int) -> float:
        inp = tensor_states(state, basis_state(1, 0)).density()
        if shots is None:
            return probability_of_outcome(checker, inp, want)
        res = sample_shots(checker, inp, shots, seed, *stream)
        return res.frequency(want)

    if accepted:
        for j in range(probes):
            psi = random_orthogonal_state(phi, seed, 20, j)
            p1 = flag_prob(psi, "1", 21, j)
            threshold = (1.0 - EXACT_DECISION_ATOL if shots is None
                         else 1.0 - 3 * math.sqrt(1.0 / shots))
            ok = p1 >= threshold
            transcript.append({"phase": "checker_orthogonal", "probe": j,
                               "flag1_prob": p1, "passed": ok})
            if not ok:
                accepted = False
                break
    if accepted:
        p0 = flag_prob(phi, "0", 22)
        threshold = (1.0 - EXACT_DECISION_ATOL if shots is None
                     else 1.0 - 3 * math.sqrt(1.0 / shots))
        ok = p0 >= threshold
        transcript.append({"phase": "checker_instance", "flag0_prob": p0,
                           "passed": ok})
        accepted = ok
    exact = 1.0 if accepted else 0.0
    return Verdict(
        accepted=accepted,
        exact_accept_prob=exact,
        sampled_accept_freq=None if shots is None else exact,
        repetitions=probes,
        copies_consumed=base.copies_consumed + (probes + 1) * (shots or 1),
        transcript=tuple(transcript),
    )


# ---------------------------------------------------------------------------
# repetition calibration


def required_repetitions(gap: float, error_bound: float) -> int:
    """Smallest M with exp(-2 M (gap/2)^2) <= error_bound, at least 1."""
    if not 0 < gap <= 1:
        raise ValueError("gap must lie in (0, 1]")
    if not 0 < error_bound <= 1:
        raise ValueError("error bound must lie in (0, 1]")
    m = math.ceil(math.log(1.0 / error_bound) / (2 * (gap / 2) ** 2))
    return max(1, m)
