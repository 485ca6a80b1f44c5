"""Gate-teleportation engine for the nonlocal CNOT and controlled-U.

Protocol wires follow the four-qubit convention used throughout the package:
register index i holds wire (i+1), i.e. (A1, A2, B3, B4).  The EPR pair lives
on wires 2 and 3.  Both protocols expose the teleported gate on an ordered
logical pair (control, target):

* CNOT: local gates C21 (A2 controls A1) and C43 (B4 controls B3), wire 2
  measured in X, wire 3 in Z.  X-type corrections land on wire 1 and Z-type
  on wire 4, so the logical control maps to wire 4 and the target to wire 1.
* C-U: local gates C12 (A1 controls A2) and CU34 (B3 controls a U on B4),
  wire 2 measured in Z, wire 3 in X.  Control maps to wire 1, target to
  wire 4.

Branch corrections for the kept branches are the published convention:
CNOT (+,0) -> nothing, (+,1) -> sigma_x on 1, (-,0) -> sigma_z on 4,
(-,1) -> both; C-U (0,+) -> nothing, (0,-) -> sigma_z on 1.  Global phases
in the branch decomposition are dropped (unobservable).

``full_correction`` is a simulator oracle mode in which every branch is
recovered.  For the C-U protocol the branches with wire-2 outcome 1 cannot be
fixed by a local gate on wire 4 alone when U^2 != I; the engine recovers them
the way bidirectional feedforward would: a conditional bit flip on wire 3
(teleporting the correct control value) before the controlled-U is applied.
The recorded CorrectionSpec still carries the published per-branch
bookkeeping including the inverse-U entry.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import qsim

WIRE_LABELS = ("A1", "A2", "B3", "B4")


class TeleportMode(enum.Enum):
    FULL_CORRECTION = "full_correction"
    UNILATERAL_LOCC = "unilateral_locc"
    NO_LOCC = "no_locc"


SUCCESS_PROBABILITY = {
    TeleportMode.FULL_CORRECTION: 1.0,
    TeleportMode.UNILATERAL_LOCC: 0.5,
    TeleportMode.NO_LOCC: 0.25,
}


def success_probability(mode: TeleportMode) -> float:
    """Ideal lossless keep probability of the mode."""
    return SUCCESS_PROBABILITY[mode]


@dataclass(frozen=True)
class CorrectionSpec:
    """Keep/discard decision plus the branch's correction operations.

    ops entries are (gate, wire) with gate in {"x", "z", "u_inv"} and wire in
    {1, 4}; they record the published branch convention even for discarded
    trials.
    """

    keep: bool
    ops: tuple[tuple[str, int], ...] = ()


@dataclass
class TrialRecord:
    """One teleportation attempt, including timing filled in by the network layer."""

    trial_id: int
    mode_index: int
    a2_outcome: str
    b3_outcome: str
    correction: CorrectionSpec
    kept: bool
    t_generated_us: float | None = None
    t_measured_b_us: float | None = None
    t_msg_arrival_us: float | None = None
    t_retrieval_us: float | None = None
    loss_flags: dict[str, bool] = field(default_factory=dict)

    def validate(self) -> None:
        if self.kept:
            if any(self.loss_flags.values()):
                raise ValueError("kept trial has a loss flag set")
            if (self.t_msg_arrival_us is not None and self.t_retrieval_us is not None
                    and self.t_msg_arrival_us > self.t_retrieval_us):
                raise ValueError("kept trial missed the feedforward deadline")


_CNOT_OPS = {
    ("+", "0"): (),
    ("+", "1"): (("x", 1),),
    ("-", "0"): (("z", 4),),
    ("-", "1"): (("x", 1), ("z", 4)),
}

_CU_OPS = {
    ("0", "+"): (),
    ("0", "-"): (("z", 1),),
    ("1", "+"): (("u_inv", 4),),
    ("1", "-"): (("z", 1), ("u_inv", 4)),
}


def correction_for_cnot(a2: str, b3: int | str,
                        mode: TeleportMode = TeleportMode.FULL_CORRECTION) -> CorrectionSpec:
    """Branch table for the teleported CNOT, keyed on (A2 in X, B3 in Z)."""
    b3 = str(b3)
    if a2 not in ("+", "-") or b3 not in ("0", "1"):
        raise ValueError(f"invalid outcome pair ({a2!r}, {b3!r})")
    ops = _CNOT_OPS[(a2, b3)]
    if mode is TeleportMode.FULL_CORRECTION:
        keep = True
    elif mode is TeleportMode.UNILATERAL_LOCC:
        keep = a2 == "+"
    else:
        keep = a2 == "+" and b3 == "0"
    return CorrectionSpec(keep=keep, ops=ops)


def correction_for_cu(q2: int | str, q3: str,
                      mode: TeleportMode = TeleportMode.FULL_CORRECTION) -> CorrectionSpec:
    """Branch table for the teleported C-U, keyed on (A2 in Z, B3 in X)."""
    q2 = str(q2)
    if q2 not in ("0", "1") or q3 not in ("+", "-"):
        raise ValueError(f"invalid outcome pair ({q2!r}, {q3!r})")
    ops = _CU_OPS[(q2, q3)]
    if mode is TeleportMode.FULL_CORRECTION:
        keep = True
    elif mode is TeleportMode.UNILATERAL_LOCC:
        keep = q2 == "0"
    else:
        keep = q2 == "0" and q3 == "+"
    return CorrectionSpec(keep=keep, ops=ops)


@dataclass
class Branch:
    """One of the four measurement branches of a protocol run."""

    a2_outcome: str
    b3_outcome: str
    prob: float
    correction: CorrectionSpec
    kept: bool
    output: qsim.QuantumState | None


@dataclass
class BranchTable:
    """All four branches with their joint probabilities, enumerated once."""

    branches: list[Branch]

    @property
    def probs(self) -> np.ndarray:
        return np.array([b.prob for b in self.branches])

    def kept_probability(self) -> float:
        return float(sum(b.prob for b in self.branches if b.kept))

    def kept_average_output(self) -> qsim.QuantumState:
        """Postselected infinite-shot output state over the kept branches."""
        total = self.kept_probability()
        if total <= 0:
            raise ValueError("no kept branch has positive probability")
        dim = next(b.output.dim for b in self.branches if b.kept and b.output is not None)
        rho = np.zeros((dim, dim), dtype=complex)
        labels: tuple[str, ...] = ()
        for b in self.branches:
            if b.kept and b.output is not None:
                rho += (b.prob / total) * b.output.density()
                labels = b.output.labels
        return qsim.QuantumState("mixed", rho, labels)


def _compose_register(input_ct: qsim.QuantumState, epr: qsim.QuantumState,
                      control_wire: int) -> qsim.QuantumState:
    """4-qubit register (A1, A2, B3, B4) from a logical (control, target) pair."""
    if input_ct.n_qubits != 2 or epr.n_qubits != 2:
        raise ValueError("input and EPR states must be two-qubit states")
    combined = qsim.tensor(input_ct, epr)  # qubits (c, t, epr_a, epr_b)
    if control_wire == 4:
        order = (1, 2, 3, 0)   # -> (t, A2, B3, c)
    elif control_wire == 1:
        order = (0, 2, 3, 1)   # -> (c, A2, B3, t)
    else:
        raise ValueError("control wire must be 1 or 4")
    reg = qsim.reorder_qubits(combined, order)
    reg.labels = WIRE_LABELS
    return reg


def _reduce_pair(state4: qsim.QuantumState, keep: tuple[int, int]) -> qsim.QuantumState:
    """State of two register qubits; stays pure when the register factorises."""
    if state4.kind == "pure":
        rest = tuple(q for q in range(4) if q not in keep)
        arranged = qsim.reorder_qubits(state4, keep + rest)
        m = arranged.data.reshape(4, 4)  # rows: rest qubits, cols: kept qubits
        u, s, vh = np.linalg.svd(m)
        if s[1] < 1e-9:
            return qsim.pure_state(vh[0], (state4.labels[keep[0]], state4.labels[keep[1]]))
    return qsim.partial_trace(state4, keep)


def _apply_wire_ops(state: qsim.QuantumState, ops: tuple[tuple[str, int], ...],
                    u: np.ndarray | None = None) -> qsim.QuantumState:
    for name, wire in ops:
        reg = wire - 1
        if name == "x":
            state = qsim.apply_gate(state, qsim.gate("X", reg))
        elif name == "z":
            state = qsim.apply_gate(state, qsim.gate("Z", reg))
        elif name == "u_inv":
            if u is None:
                raise ValueError("u_inv correction requires the gate unitary")
            state = qsim.apply_unitary(state, np.asarray(u).conj().T, (reg,))
        else:
            raise ValueError(f"unknown correction op {name!r}")
    return state


def cnot_branch_table(input_ct: qsim.QuantumState, epr: qsim.QuantumState,
                      mode: TeleportMode) -> BranchTable:
    """Enumerate the four (A2, B3) branches of the teleported CNOT."""
    reg = _compose_register(input_ct, epr, control_wire=4)
    reg = qsim.apply_gate(reg, qsim.gate("CNOT", 1, 0))   # C21
    reg = qsim.apply_gate(reg, qsim.gate("CNOT", 3, 2))   # C43
    branches = []
    for a2_bit in (0, 1):
        p_a2, s_a2 = qsim.project(reg, qsim.MeasBasis("X", 1), a2_bit)
        a2_sym = qsim.OUTCOME_SYMBOLS["X"][a2_bit]
        for b3_bit in (0, 1):
            b3_sym = str(b3_bit)
            corr = correction_for_cnot(a2_sym, b3_sym, mode)
            if s_a2 is None:
                branches.append(Branch(a2_sym, b3_sym, 0.0, corr, False, None))
                continue
            p_b3, s_b3 = qsim.project(s_a2, qsim.MeasBasis("Z", 2), b3_bit)
            prob = p_a2 * p_b3
            if s_b3 is None:
                branches.append(Branch(a2_sym, b3_sym, 0.0, corr, False, None))
                continue
            output = None
            if corr.keep:
                corrected = _apply_wire_ops(s_b3, corr.ops)
                output = _reduce_pair(corrected, (3, 0))  # (control, target)
            branches.append(Branch(a2_sym, b3_sym, prob, corr, corr.keep, output))
    return BranchTable(branches)


def cu_branch_table(input_ct: qsim.QuantumState, epr: qsim.QuantumState,
                    u: np.ndarray, mode: TeleportMode) -> BranchTable:
    """Enumerate the four (A2, B3) branches of the teleported C-U."""
    u = np.asarray(u, dtype=complex)
    qsim._check_unitary(u, 2)
    reg = _compose_register(input_ct, epr, control_wire=1)
    reg = qsim.apply_gate(reg, qsim.gate("CNOT", 0, 1))   # C12
    branches = []
    for q2_bit in (0, 1):
        p_q2, s_q2 = qsim.project(reg, qsim.MeasBasis("Z", 1), q2_bit)
        q2_sym = str(q2_bit)
        if s_q2 is not None:
            fixed = s_q2
            if mode is TeleportMode.FULL_CORRECTION and q2_bit == 1:
                # teleport the control value: undo the known bit flip on wire 3
                fixed = qsim.apply_gate(fixed, qsim.gate("X", 2))
            gated = qsim.apply_gate(fixed, qsim.gate("ControlledU", 2, 3, unitary=u))
        for q3_bit in (0, 1):
            q3_sym = qsim.OUTCOME_SYMBOLS["X"][q3_bit]
            corr = correction_for_cu(q2_sym, q3_sym, mode)
            if s_q2 is None:
                branches.append(Branch(q2_sym, q3_sym, 0.0, corr, False, None))
                continue
            p_q3, s_q3 = qsim.project(gated, qsim.MeasBasis("X", 2), q3_bit)
            prob = p_q2 * p_q3
            if s_q3 is None:
                branches.append(Branch(q2_sym, q3_sym, 0.0, corr, False, None))
                continue
            output = None
            if corr.keep:
                applied = tuple(op for op in corr.ops if op[0] != "u_inv")
                corrected = _apply_wire_ops(s_q3, applied, u=u)
                output = _reduce_pair(corrected, (0, 3))  # (control, target)
            branches.append(Branch(q2_sym, q3_sym, prob, corr, corr.keep, output))
    return BranchTable(branches)


def sample_branch(table: BranchTable, rng: np.random.Generator) -> int:
    probs = table.probs
    return int(rng.choice(len(probs), p=probs / probs.sum()))


def _record_from_branch(branch: Branch, trial_id: int, mode_index: int) -> TrialRecord:
    return TrialRecord(
        trial_id=trial_id,
        mode_index=mode_index,
        a2_outcome=branch.a2_outcome,
        b3_outcome=branch.b3_outcome,
        correction=branch.correction,
        kept=branch.kept,
    )


def teleported_cnot(input_ct: qsim.QuantumState, epr: qsim.QuantumState,
                    mode: TeleportMode, rng: np.random.Generator,
                    trial_id: int = 0, mode_index: int = 0
                    ) -> tuple[TrialRecord, qsim.QuantumState | None]:
    """One teleported-CNOT attempt on a logical (control, target) pair.

    With full correction and an ideal EPR pair the output equals the direct
    CNOT applied to the input.  Discarded attempts return (record, None).
    """
    table = cnot_branch_table(input_ct, epr, mode)
    branch = table.branches[sample_branch(table, rng)]
    record = _record_from_branch(branch, trial_id, mode_index)
    return record, branch.output.copy() if branch.output is not None else None


def teleported_cu(input_ct: qsim.QuantumState, epr: qsim.QuantumState,
                  u: np.ndarray, mode: TeleportMode, rng: np.random.Generator,
                  trial_id: int = 0, mode_index: int = 0
                  ) -> tuple[TrialRecord, qsim.QuantumState | None]:
    """One teleported C-U attempt; mirrors :func:`teleported_cnot`."""
    table = cu_branch_table(input_ct, epr, u, mode)
    branch = table.branches[sample_branch(table, rng)]
    record = _record_from_branch(branch, trial_id, mode_index)
    return record, branch.output.copy() if branch.output is not None else None


def run_protocol_trials(table: BranchTable, shots: int,
                        rng: np.random.Generator) -> list[TrialRecord]:
    """Sample many attempts from a fixed branch table (same input every shot)."""
    probs = table.probs
    idx = rng.choice(len(probs), size=shots, p=probs / probs.sum())
    return [_record_from_branch(table.branches[i], t, 0) for t, i in enumerate(idx)]
