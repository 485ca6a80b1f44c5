"""Distributed algorithms over the nonlocal gates: the two-qubit
Deutsch-Jozsa problem with its four oracles, and the m-round iterative phase
estimation with bit-by-bit phase feedback.

Qubit 0 is the query/measurement register, qubit 1 the auxiliary/state
register; the nonlocal gates act with qubit 0 as control.  Phases are handled
in turns (fractions of a full revolution) internally; radians appear only at
API boundaries that mirror common usage.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import photon, qsim, teleport


class OracleKind(enum.Enum):
    ID = "ID"
    NOT = "NOT"
    CNOT = "CNOT"
    ZCNOT = "ZCNOT"

    @property
    def is_constant(self) -> bool:
        return self in (OracleKind.ID, OracleKind.NOT)

    @property
    def function_class(self) -> str:
        return "constant" if self.is_constant else "balanced"


def z_power(s: float) -> np.ndarray:
    """Z^s = diag(1, e^{i pi s}); acts on |V> with phase 2*pi*(s/2)."""
    return np.array([[1, 0], [0, np.exp(1j * np.pi * s)]], dtype=complex)


def phase_turns_of(u: np.ndarray) -> float:
    """Eigenphase of |V> under a diagonal unitary, in turns."""
    u = np.asarray(u, dtype=complex)
    if max(abs(u[0, 1]), abs(u[1, 0])) > 1e-12:
        raise ValueError("phase estimation target must be diagonal (|V> an eigenstate)")
    return float((np.angle(u[1, 1]) - np.angle(u[0, 0])) / (2 * np.pi) % 1.0)


class IdealBackend:
    """Noiseless direct execution of the nonlocal gates."""

    name = "ideal"

    def nonlocal_cnot(self, state_ct: qsim.QuantumState) -> qsim.QuantumState:
        return qsim.apply_gate(state_ct, qsim.gate("CNOT", 0, 1))

    def nonlocal_cu(self, state_ct: qsim.QuantumState, u: np.ndarray) -> qsim.QuantumState:
        return qsim.apply_gate(state_ct, qsim.gate("ControlledU", 0, 1, unitary=u))

    def finalize(self, state: qsim.QuantumState) -> qsim.QuantumState:
        return state


class NoisyBackend:
    """Teleported gates over the modeled source, with postselected statistics.

    Nonlocal gates consume an entangled pair drawn from the source model and
    keep only the branches allowed by ``mode`` (infinite-shot postselection).
    ``finalize`` applies the retrieval white noise and optional depolarizing
    noise once per experimental run, for every oracle alike.
    """

    name = "netsim"

    def __init__(self, source: photon.SourceParams | None = None,
                 white_lambda: float = 0.0, depolarizing_p: float = 0.0,
                 mode: teleport.TeleportMode = teleport.TeleportMode.UNILATERAL_LOCC):
        self.source = source if source is not None else photon.SourceParams()
        self.white_lambda = white_lambda
        self.depolarizing_p = depolarizing_p
        self.mode = mode
        self._epr = photon.make_entangled_pair(self.source)

    def nonlocal_cnot(self, state_ct: qsim.QuantumState) -> qsim.QuantumState:
        table = teleport.cnot_branch_table(state_ct, self._epr, self.mode)
        return table.kept_average_output()

    def nonlocal_cu(self, state_ct: qsim.QuantumState, u: np.ndarray) -> qsim.QuantumState:
        table = teleport.cu_branch_table(state_ct, self._epr, u, self.mode)
        return table.kept_average_output()

    def finalize(self, state: qsim.QuantumState) -> qsim.QuantumState:
        if self.white_lambda > 0:
            state = qsim.apply_channel(state, "white_admixture", self.white_lambda,
                                       tuple(range(state.n_qubits)))
        if self.depolarizing_p > 0:
            state = qsim.apply_channel(state, "depolarizing", self.depolarizing_p,
                                       tuple(range(state.n_qubits)))
        return state


@dataclass(frozen=True)
class Oracle:
    kind: OracleKind

    def apply(self, state: qsim.QuantumState, backend) -> qsim.QuantumState:
        if self.kind is OracleKind.ID:
            return state
        if self.kind is OracleKind.NOT:
            return qsim.apply_gate(state, qsim.gate("X", 1))
        state = backend.nonlocal_cnot(state)
        if self.kind is OracleKind.ZCNOT:
            state = qsim.apply_gate(state, qsim.gate("X", 1))
        return state


def build_oracle(kind: OracleKind | str) -> Oracle:
    return Oracle(OracleKind(kind) if isinstance(kind, str) else kind)


@dataclass
class DjResult:
    kind: OracleKind
    p_h: float
    p_v: float
    classification: str
    shots: int | None = None
    counts: dict[str, int] | None = None

    @property
    def correct(self) -> bool:
        return self.classification == self.kind.function_class


def run_deutsch_jozsa(kind: OracleKind | str, backend=None,
                      shots: int | None = None,
                      rng: np.random.Generator | None = None) -> DjResult:
    """Single-query Deutsch-Jozsa: query register H, auxiliary V, oracle,
    inverse transform, Z measurement of the query register.

    With ``shots`` the classification uses sampled frequencies; otherwise the
    exact probabilities decide.  Constant functions leave the register at H,
    balanced functions take it to V.
    """
    oracle = build_oracle(kind)
    backend = backend if backend is not None else IdealBackend()
    state = qsim.product_state(qsim.KET0, qsim.KET1)     # |H>|V>
    state = qsim.apply_gate(state, qsim.gate("H", 0))
    state = qsim.apply_gate(state, qsim.gate("H", 1))
    state = oracle.apply(state, backend)
    state = qsim.apply_gate(state, qsim.gate("H", 0))
    state = qsim.apply_gate(state, qsim.gate("H", 1))
    state = backend.finalize(state)
    probs = qsim.measurement_probabilities(state, qsim.MeasBasis("Z", 0))
    p_h = float(probs[0])
    counts = None
    if shots is not None:
        if shots < 1:
            raise ValueError("shots must be >= 1")
        rng = rng if rng is not None else np.random.default_rng()
        n_h = int(rng.binomial(shots, p_h))
        counts = {"H": n_h, "V": shots - n_h}
        p_hat = n_h / shots
        classification = "constant" if p_hat > 0.5 else "balanced"
        return DjResult(oracle.kind, p_hat, 1 - p_hat, classification, shots, counts)
    classification = "constant" if p_h > 0.5 else "balanced"
    return DjResult(oracle.kind, p_h, 1 - p_h, classification)


@dataclass
class IpeaResult:
    m: int
    bits: tuple[int, ...]                 # phi_1 ... phi_m, most significant first
    per_round_prob0: tuple[float, ...]    # measurement order (k = m down to 1)
    phi_estimate_turns: Fraction
    delta: float
    ambiguous_rounds: tuple[int, ...] = ()

    @property
    def bit_string(self) -> str:
        return "".join(str(b) for b in self.bits)


def ipea_iteration(k: int, m: int, feedback_turns: float, u: np.ndarray,
                   backend=None, shots: int | None = None,
                   rng: np.random.Generator | None = None
                   ) -> tuple[float, int | None]:
    """One IPEA round: H, nonlocal controlled-U^(2^(k-1)), feedback rotation,
    H, Z measurement of the register.

    Returns (P(bit=0), decided bit); the bit is None on an exact tie.
    """
    if not 1 <= k <= m:
        raise ValueError("round index k must satisfy 1 <= k <= m")
    backend = backend if backend is not None else IdealBackend()
    u_pow = np.linalg.matrix_power(np.asarray(u, dtype=complex), 2 ** (k - 1))
    state = qsim.product_state(qsim.KET0, qsim.KET1)     # register |H>, target |V>
    state = qsim.apply_gate(state, qsim.gate("H", 0))
    state = backend.nonlocal_cu(state, u_pow)
    if feedback_turns:
        state = qsim.apply_gate(
            state, qsim.gate("PhaseZ", 0, phi=2 * np.pi * feedback_turns))
    state = qsim.apply_gate(state, qsim.gate("H", 0))
    state = backend.finalize(state)
    p0 = float(qsim.measurement_probabilities(state, qsim.MeasBasis("Z", 0))[0])
    if shots is not None:
        rng = rng if rng is not None else np.random.default_rng()
        n0 = int(rng.binomial(shots, p0))
        p0_hat = n0 / shots
        bit = None if p0_hat == 0.5 else int(p0_hat < 0.5)
        return p0_hat, bit
    bit = None if abs(p0 - 0.5) < 1e-12 else int(p0 < 0.5)
    return p0, bit


def run_ipea(u: np.ndarray | None = None, phi_turns: float | None = None,
             m: int = 3, backend=None, shots: int | None = None,
             rng: np.random.Generator | None = None) -> IpeaResult:
    """m-round IPEA, least significant bit first with Z-rotation feedback.

    Provide either a diagonal unitary ``u`` or the eigenphase ``phi_turns``
    directly.  Round k applies controlled-U^(2^(k-1)) and the feedback
    rotation by -(0.0 phi_{k+1} ... phi_m) turns built from the bits already
    decided; each bit is the majority outcome of its round.  An exact tie is
    recorded in ambiguous_rounds and resolved towards 0 for the feedback.
    """
    if m < 1:
        raise ValueError("need at least one round")
    if (u is None) == (phi_turns is None):
        raise ValueError("provide exactly one of u or phi_turns")
    if u is None:
        phi_turns = float(phi_turns) % 1.0
        u = np.array([[1, 0], [0, np.exp(2j * np.pi * phi_turns)]], dtype=complex)
    else:
        u = np.asarray(u, dtype=complex)
        phi_turns = phase_turns_of(u)
    backend = backend if backend is not None else IdealBackend()
    bits_lsb_first: list[int] = []
    prob0: list[float] = []
    ambiguous: list[int] = []
    tail = 0.0   # 0.phi_{k+1} ... phi_m in turns, times 2
    for k in range(m, 0, -1):
        p0, bit = ipea_iteration(k, m, -tail / 2.0, u, backend, shots=shots, rng=rng)
        prob0.append(p0)
        if bit is None:
            ambiguous.append(k)
            bit = 0
        bits_lsb_first.append(bit)
        tail = (bit + tail) / 2.0
    bits = tuple(reversed(bits_lsb_first))
    estimate = sum((Fraction(b, 2 ** (i + 1)) for i, b in enumerate(bits)), Fraction(0))
    delta = ((phi_turns - float(estimate)) * 2 ** m) % 1.0
    return IpeaResult(m=m, bits=bits, per_round_prob0=tuple(prob0),
                      phi_estimate_turns=estimate, delta=delta,
                      ambiguous_rounds=tuple(ambiguous))


def ipea_analytic(phi_turns: float, m: int) -> list[float]:
    """Per-round correct-bit probabilities cos^2(pi delta / 2^j).

    delta is the remainder below the m-bit truncation of phi; round j's value
    is conditional on all earlier rounds having decided correctly.
    """
    if not 0.0 <= phi_turns < 1.0:
        raise ValueError("phase must be given in [0, 1) turns")
    if m < 1:
        raise ValueError("need at least one round")
    delta = (phi_turns * 2 ** m) % 1.0
    return [float(np.cos(np.pi * delta / 2 ** j) ** 2) for j in range(1, m + 1)]
