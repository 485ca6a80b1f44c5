"""Dense quantum-state engine for small registers (up to 6 qubits).

Register convention (used by every module in this package): qubit ``j`` of an
``n``-qubit register is bit ``j`` of the basis-state index, counting from the
least significant bit.  ``|q0=1, q1=0>`` therefore has amplitude index 1, and
``make_register(2)`` returns amplitudes ``(1, 0, 0, 0)``.

States are either pure (complex amplitude vector) or mixed (density matrix).
A pure state auto-promotes to a density matrix on the first channel
application; gates and measurements never promote.  Global phase is not an
observable here: pure-state comparisons go through
:func:`phase_invariant_distance`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_QUBITS = 6

UNITARY_ATOL = 1e-10
PSD_ATOL = 1e-10

SQRT2_INV = 1.0 / np.sqrt(2.0)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * SQRT2_INV
S = np.array([[1, 0], [0, 1j]], dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0],
     [0, 1, 0, 0],
     [0, 0, 0, 1],
     [0, 0, 1, 0]], dtype=complex)

PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
_FIXED_1Q = {"I": I2, "X": X, "Y": Y, "Z": Z, "H": H, "S": S}

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS = np.array([1, 1], dtype=complex) * SQRT2_INV
KET_MINUS = np.array([1, -1], dtype=complex) * SQRT2_INV

# Measurement outcome symbols, indexed by outcome bit.
OUTCOME_SYMBOLS = {"Z": ("0", "1"), "X": ("+", "-")}


def phase_z(phi: float) -> np.ndarray:
    """diag(1, e^{i phi}) phase gate."""
    return np.array([[1, 0], [0, np.exp(1j * phi)]], dtype=complex)


def controlled(u: np.ndarray) -> np.ndarray:
    """4x4 controlled-U, control = first gate slot (more significant bit)."""
    _check_unitary(u, 2)
    cu = np.eye(4, dtype=complex)
    cu[2:, 2:] = u
    return cu


def _check_unitary(u: np.ndarray, dim: int) -> None:
    u = np.asarray(u)
    if u.shape != (dim, dim):
        raise ValueError(f"expected {dim}x{dim} matrix, got shape {u.shape}")
    if not np.allclose(u.conj().T @ u, np.eye(dim), atol=UNITARY_ATOL):
        raise ValueError("matrix is not unitary within 1e-10")


@dataclass(frozen=True)
class GateSpec:
    """A named gate acting on specific register qubits.

    ``targets`` lists the qubits in gate-slot order; for two-qubit gates the
    first target is the control.
    """

    name: str
    targets: tuple[int, ...]
    phi: float | None = None
    unitary: np.ndarray | None = None

    def matrix(self) -> np.ndarray:
        if self.name in _FIXED_1Q:
            return _FIXED_1Q[self.name]
        if self.name == "PhaseZ":
            if self.phi is None:
                raise ValueError("PhaseZ requires phi")
            return phase_z(self.phi)
        if self.name == "CNOT":
            return CNOT
        if self.name == "ControlledU":
            if self.unitary is None:
                raise ValueError("ControlledU requires a 2x2 unitary")
            return controlled(self.unitary)
        raise ValueError(f"unknown gate name {self.name!r}")

    def n_qubits(self) -> int:
        return 2 if self.name in ("CNOT", "ControlledU") else 1


def gate(name: str, *targets: int, phi: float | None = None,
         unitary: np.ndarray | None = None) -> GateSpec:
    return GateSpec(name, tuple(targets), phi=phi, unitary=unitary)


@dataclass(frozen=True)
class MeasBasis:
    """Single-qubit measurement axis, Z (computational) or X (Fourier)."""

    axis: str
    qubit: int

    def __post_init__(self):
        if self.axis not in ("Z", "X"):
            raise ValueError(f"unsupported measurement axis {self.axis!r}")

    def eigenvector(self, outcome: int) -> np.ndarray:
        if self.axis == "Z":
            return KET0 if outcome == 0 else KET1
        return KET_PLUS if outcome == 0 else KET_MINUS

    def symbol(self, outcome: int) -> str:
        return OUTCOME_SYMBOLS[self.axis][outcome]


@dataclass
class QuantumState:
    """Pure or mixed state of an ordered qubit register."""

    kind: str  # "pure" | "mixed"
    data: np.ndarray
    labels: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex)
        if self.kind not in ("pure", "mixed"):
            raise ValueError(f"kind must be 'pure' or 'mixed', got {self.kind!r}")
        n = self.n_qubits
        if not self.labels:
            self.labels = tuple(f"q{i}" for i in range(n))
        if len(self.labels) != n:
            raise ValueError("label count does not match qubit count")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    @property
    def n_qubits(self) -> int:
        n = int(round(np.log2(self.data.shape[0])))
        if 2 ** n != self.data.shape[0] or not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"bad state dimension {self.data.shape[0]}")
        if self.kind == "pure" and self.data.ndim != 1:
            raise ValueError("pure state must be a vector")
        if self.kind == "mixed" and self.data.shape != (2 ** n, 2 ** n):
            raise ValueError("mixed state must be a square matrix")
        return n

    def copy(self) -> "QuantumState":
        return QuantumState(self.kind, self.data.copy(), self.labels)

    def validate(self) -> None:
        """Raise if normalisation / positivity invariants are violated."""
        if self.kind == "pure":
            if abs(np.vdot(self.data, self.data).real - 1.0) > 1e-9:
                raise ValueError("pure state norm deviates from 1")
        else:
            if abs(np.trace(self.data).real - 1.0) > 1e-9:
                raise ValueError("density matrix trace deviates from 1")
            if not np.allclose(self.data, self.data.conj().T, atol=1e-9):
                raise ValueError("density matrix is not Hermitian")
            if np.linalg.eigvalsh(self.data).min() < -PSD_ATOL:
                raise ValueError("density matrix has negative eigenvalues")

    def density(self) -> np.ndarray:
        return np.outer(self.data, self.data.conj()) if self.kind == "pure" else self.data

    def as_mixed(self) -> "QuantumState":
        if self.kind == "mixed":
            return self
        return QuantumState("mixed", self.density(), self.labels)


def make_register(n: int, labels: tuple[str, ...] | None = None) -> QuantumState:
    """Pure |0...0> register of n qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"register size must be 1..{MAX_QUBITS}, got {n}")
    amps = np.zeros(2 ** n, dtype=complex)
    amps[0] = 1.0
    return QuantumState("pure", amps, tuple(labels) if labels else ())


def pure_state(amplitudes, labels: tuple[str, ...] | None = None) -> QuantumState:
    amps = np.asarray(amplitudes, dtype=complex)
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ValueError("zero vector is not a state")
    return QuantumState("pure", amps / norm, tuple(labels) if labels else ())


def product_state(*single_qubit_kets) -> QuantumState:
    """Pure product state; argument order follows qubit index (qubit 0 first)."""
    amps = np.array([1.0], dtype=complex)
    for ket in single_qubit_kets:
        # qubit j is bit j of the index, so later factors go to higher bits
        amps = np.kron(np.asarray(ket, dtype=complex), amps)
    return pure_state(amps)


def bell_state(which: str) -> QuantumState:
    """Phi+/Phi-/Psi+/Psi- on a 2-qubit register."""
    vecs = {
        "phi_plus": [1, 0, 0, 1], "phi_minus": [1, 0, 0, -1],
        "psi_plus": [0, 1, 1, 0], "psi_minus": [0, 1, -1, 0],
    }
    return pure_state(np.array(vecs[which], dtype=complex))


# --- tensor index helpers ---------------------------------------------------
# A flat vector reshaped to (2,)*n in C order puts qubit (n-1) on axis 0, so
# qubit j lives on axis (n-1-j).

def _axis(n: int, qubit: int) -> int:
    return n - 1 - qubit


def _contract_vec(vec: np.ndarray, m: np.ndarray, targets: tuple[int, ...],
                  n: int) -> np.ndarray:
    k = len(targets)
    tensor_m = m.reshape((2,) * (2 * k))
    psi = vec.reshape((2,) * n)
    axes = [_axis(n, q) for q in targets]
    psi = np.tensordot(tensor_m, psi, axes=(list(range(k, 2 * k)), axes))
    psi = np.moveaxis(psi, list(range(k)), axes)
    return psi.reshape(-1)


def _contract_dm(rho: np.ndarray, m: np.ndarray, targets: tuple[int, ...],
                 n: int) -> np.ndarray:
    """m rho m^dagger on the target qubits."""
    k = len(targets)
    tensor_m = m.reshape((2,) * (2 * k))
    t = rho.reshape((2,) * (2 * n))
    ket_axes = [_axis(n, q) for q in targets]
    bra_axes = [a + n for a in ket_axes]
    t = np.tensordot(tensor_m, t, axes=(list(range(k, 2 * k)), ket_axes))
    t = np.moveaxis(t, list(range(k)), ket_axes)
    t = np.tensordot(tensor_m.conj(), t, axes=(list(range(k, 2 * k)), bra_axes))
    t = np.moveaxis(t, list(range(k)), bra_axes)
    return t.reshape(rho.shape)


def _validate_targets(n: int, targets: tuple[int, ...]) -> None:
    if not targets or len(set(targets)) != len(targets):
        raise ValueError("targets must be non-empty and distinct")
    if any(not 0 <= q < n for q in targets):
        raise ValueError(f"target out of range for {n}-qubit register")


def apply_gate(state: QuantumState, g: GateSpec) -> QuantumState:
    """Apply a unitary gate; norm/trace preserved within 1e-12."""
    return apply_unitary(state, g.matrix(), g.targets)


def apply_unitary(state: QuantumState, u: np.ndarray,
                  targets: tuple[int, ...]) -> QuantumState:
    """Apply a raw unitary on the given qubits (first target = top gate slot)."""
    n = state.n_qubits
    _validate_targets(n, targets)
    _check_unitary(u, 2 ** len(targets))
    if state.kind == "pure":
        return QuantumState("pure", _contract_vec(state.data, u, targets, n),
                            state.labels)
    return QuantumState("mixed", _contract_dm(state.data, u, targets, n),
                        state.labels)


def tensor(a: QuantumState, b: QuantumState) -> QuantumState:
    """Combined register; a's qubits keep their indices, b's follow after."""
    labels = a.labels + b.labels
    if a.kind == "pure" and b.kind == "pure":
        return QuantumState("pure", np.kron(b.data, a.data), labels)
    return QuantumState("mixed", np.kron(b.density(), a.density()), labels)


def reorder_qubits(state: QuantumState, new_order: tuple[int, ...]) -> QuantumState:
    """Permute the register so that old qubit ``new_order[i]`` becomes qubit i."""
    n = state.n_qubits
    if sorted(new_order) != list(range(n)):
        raise ValueError("new_order must be a permutation of all qubits")
    src = [_axis(n, q) for q in new_order]
    dst = [_axis(n, i) for i in range(n)]
    labels = tuple(state.labels[q] for q in new_order)
    if state.kind == "pure":
        t = np.moveaxis(state.data.reshape((2,) * n), src, dst)
        return QuantumState("pure", t.reshape(-1).copy(), labels)
    t = state.data.reshape((2,) * (2 * n))
    t = np.moveaxis(t, src + [a + n for a in src], dst + [a + n for a in dst])
    return QuantumState("mixed", t.reshape(state.data.shape).copy(), labels)


def partial_trace(state: QuantumState, keep: tuple[int, ...]) -> QuantumState:
    """Reduced density matrix over ``keep``, in the order given."""
    n = state.n_qubits
    if not keep:
        raise ValueError("keep set must be non-empty")
    _validate_targets(n, tuple(keep))
    rho = state.density().reshape((2,) * (2 * n))
    removed = [q for q in range(n) if q not in keep]
    cur = n
    t = rho
    present = list(range(n))  # original qubit index per current position
    for q in removed:
        pos = present.index(q)
        a = _axis(cur, pos)
        t = np.trace(t, axis1=a, axis2=a + cur)
        present.pop(pos)
        cur -= 1
    k = len(keep)
    reduced = QuantumState("mixed", t.reshape(2 ** k, 2 ** k),
                           tuple(state.labels[q] for q in present))
    # present is ascending; reorder to the caller's requested order
    order = tuple(present.index(q) for q in keep)
    return reorder_qubits(reduced, order)


def measurement_probabilities(state: QuantumState, basis: MeasBasis) -> np.ndarray:
    """P(outcome=0), P(outcome=1) for a single-qubit measurement."""
    n = state.n_qubits
    _validate_targets(n, (basis.qubit,))
    probs = np.empty(2)
    for outcome in (0, 1):
        ev = basis.eigenvector(outcome)
        proj = np.outer(ev, ev.conj())
        if state.kind == "pure":
            v = _contract_vec(state.data, proj, (basis.qubit,), n)
            probs[outcome] = np.vdot(v, v).real
        else:
            probs[outcome] = np.trace(
                _contract_dm(state.data, proj, (basis.qubit,), n)).real
    return probs / probs.sum()


def project(state: QuantumState, basis: MeasBasis, outcome: int
            ) -> tuple[float, QuantumState | None]:
    """Deterministic branch extraction: (probability, collapsed state or None)."""
    probs = measurement_probabilities(state, basis)
    p = float(probs[outcome])
    if p < 1e-14:
        return p, None
    ev = basis.eigenvector(outcome)
    proj_m = np.outer(ev, ev.conj())
    n = state.n_qubits
    if state.kind == "pure":
        v = _contract_vec(state.data, proj_m, (basis.qubit,), n)
        return p, QuantumState("pure", v / np.linalg.norm(v), state.labels)
    r = _contract_dm(state.data, proj_m, (basis.qubit,), n)
    return p, QuantumState("mixed", r / np.trace(r).real, state.labels)


def measure(state: QuantumState, basis: MeasBasis, rng: np.random.Generator,
            force: int | None = None) -> tuple[int, QuantumState]:
    """Projective measurement of one qubit, outcome drawn from Born rule.

    The measured qubit stays in the register, left in the measured
    eigenstate; drop it with :func:`partial_trace` if needed.  ``force``
    deterministically selects a branch and raises on a zero-probability one.
    """
    probs = measurement_probabilities(state, basis)
    if force is not None:
        if probs[force] < 1e-14:
            raise ValueError(f"forced outcome {force} has zero probability")
        outcome = int(force)
    else:
        outcome = int(rng.random() < probs[1])
    ev = basis.eigenvector(outcome)
    proj_m = np.outer(ev, ev.conj())
    n = state.n_qubits
    if state.kind == "pure":
        v = _contract_vec(state.data, proj_m, (basis.qubit,), n)
        return outcome, QuantumState("pure", v / np.linalg.norm(v), state.labels)
    r = _contract_dm(state.data, proj_m, (basis.qubit,), n)
    return outcome, QuantumState("mixed", r / np.trace(r).real, state.labels)


def outcome_probabilities(state: QuantumState, bases: list[MeasBasis]) -> dict[str, float]:
    """Joint outcome distribution over the listed (distinct-qubit) bases.

    Keys concatenate per-qubit symbols in the order the bases are given,
    e.g. "00", "+-".  Probabilities sum to 1 within 1e-12.
    """
    qubits = [b.qubit for b in bases]
    if len(set(qubits)) != len(qubits):
        raise ValueError("bases must address distinct qubits")
    result: dict[str, float] = {}

    def recurse(s: QuantumState | None, idx: int, prefix: str, weight: float):
        if idx == len(bases):
            result[prefix] = weight
            return
        b = bases[idx]
        for outcome in (0, 1):
            if s is None:
                recurse(None, idx + 1, prefix + b.symbol(outcome), 0.0)
                continue
            p, collapsed = project(s, b, outcome)
            recurse(collapsed, idx + 1, prefix + b.symbol(outcome), weight * p)

    recurse(state, 0, "", 1.0)
    total = sum(result.values())
    return {k: v / total for k, v in result.items()}


def apply_channel(state: QuantumState, channel: str, param: float,
                  targets: tuple[int, ...]) -> QuantumState:
    """Apply a noise channel; pure states auto-promote to density matrices.

    channels: "depolarizing" (per-qubit Pauli twirl), "dephasing" (per-qubit
    phase flip), "white_admixture" ((1-lam) rho + lam I/d over the joint
    target subspace).
    """
    if not 0.0 <= param <= 1.0:
        raise ValueError(f"channel parameter must be in [0, 1], got {param}")
    st = state.as_mixed()
    n = st.n_qubits
    _validate_targets(n, targets)
    rho = st.data
    if channel == "depolarizing":
        for q in targets:
            twirl = sum(_contract_dm(rho, p, (q,), n) for p in (X, Y, Z))
            rho = (1 - param) * rho + (param / 3.0) * twirl
    elif channel == "dephasing":
        for q in targets:
            rho = (1 - param) * rho + param * _contract_dm(rho, Z, (q,), n)
    elif channel == "white_admixture":
        rho = (1 - param) * rho + param * _white_on(st, targets).data
    else:
        raise ValueError(f"unknown channel {channel!r}")
    return QuantumState("mixed", rho, st.labels)


def _white_on(state: QuantumState, targets: tuple[int, ...]) -> QuantumState:
    """(I/d on targets) tensor (reduced state on the rest), in register order."""
    n = state.n_qubits
    k = len(targets)
    mm = QuantumState("mixed", np.eye(2 ** k, dtype=complex) / 2 ** k)
    rest = tuple(q for q in range(n) if q not in targets)
    if not rest:
        return QuantumState("mixed", mm.data, state.labels)
    combined = tensor(partial_trace(state, rest), mm)
    # combined order: rest (ascending) then targets; permute back
    current = list(rest) + sorted(targets)
    order = tuple(current.index(q) for q in range(n))
    out = reorder_qubits(combined, order)
    return QuantumState("mixed", out.data, state.labels)


def fidelity(rho: QuantumState, target: QuantumState) -> float:
    """Overlap fidelity <psi|rho|psi> against a pure target state."""
    if target.kind != "pure":
        raise ValueError("target must be a pure state")
    if rho.dim != target.dim:
        raise ValueError("dimension mismatch")
    if rho.kind == "pure":
        f = abs(np.vdot(target.data, rho.data)) ** 2
    else:
        f = np.vdot(target.data, rho.data @ target.data).real
    if f < -PSD_ATOL or f > 1 + PSD_ATOL:
        raise ValueError(f"fidelity {f} outside [0, 1] beyond tolerance")
    return float(min(max(f, 0.0), 1.0))


def expectation(state: QuantumState, pauli_string: dict[int, str]) -> float:
    """<P> for a product of single-qubit Paulis, e.g. {0: "X", 1: "X"}."""
    n = state.n_qubits
    qubits = tuple(pauli_string)
    _validate_targets(n, qubits)
    if state.kind == "pure":
        v = state.data
        for q, p in pauli_string.items():
            v = _contract_vec(v, PAULIS[p], (q,), n)
        val = np.vdot(state.data, v).real
    else:
        rho = state.data
        op_applied = rho
        for q, p in pauli_string.items():
            # trace(P rho): apply P on the ket side only
            k = 1
            tensor_m = PAULIS[p].reshape((2,) * (2 * k))
            t = op_applied.reshape((2,) * (2 * n))
            a = _axis(n, q)
            t = np.tensordot(tensor_m, t, axes=([1], [a]))
            t = np.moveaxis(t, 0, a)
            op_applied = t.reshape(rho.shape)
        val = np.trace(op_applied).real
    return float(val)


def phase_invariant_distance(a: QuantumState, b: QuantumState) -> float:
    """Distance ignoring global phase.

    Pure/pure: max-abs amplitude difference after optimal phase alignment.
    Otherwise: max-abs difference of density matrices (no phase freedom).
    """
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    if a.kind == "pure" and b.kind == "pure":
        overlap = np.vdot(b.data, a.data)
        phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
        return float(np.max(np.abs(a.data - phase * b.data)))
    return float(np.max(np.abs(a.density() - b.density())))


def states_close(a: QuantumState, b: QuantumState, tol: float = 1e-10) -> bool:
    return phase_invariant_distance(a, b) < tol
