"""Two-node network layer: fiber channels, AFC memory timing, multiplexing,
feedforward deadlines, per-stage loss sampling and rate accounting.

The quantum channel (QC) carries the 1537-nm photon A -> B; the classical
channel (CC) carries the measurement results B -> A.  The 580-nm photon waits
in the multimode memory, so a trial is only correctable if the classical
message arrives before the programmed retrieval time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import photon, qsim, teleport
from .analysis import CountsTable

if TYPE_CHECKING:  # pragma: no cover
    from .config import ExperimentConfig

SPEED_OF_LIGHT_M_PER_S = 2.99792458e8

# Detector signal -> correction applied by the EOM at node A.  S1/S2 are the
# two detectors behind the B3 = 1 port, S3/S4 behind B3 = 0; which pair maps
# to sigma_x is a fixed convention exposed through the config.
DEFAULT_FEEDFORWARD_MAP = {"S1": "x", "S2": "x", "S3": "i", "S4": "i"}


@dataclass(frozen=True)
class ChannelParams:
    """One fiber channel; attenuation covers transmission plus coupling."""

    length_km: float
    attenuation_total_db: float
    propagation_us_per_km: float = 5.0

    def __post_init__(self):
        if self.length_km < 0 or self.attenuation_total_db < 0 or self.propagation_us_per_km < 0:
            raise ValueError("channel parameters must be non-negative")


@dataclass(frozen=True)
class MemoryParams:
    """AFC memory: efficiency decay, programmed storage time, multiplexing."""

    eta0: float = 0.278
    t2afc_us: float = 148.0
    storage_time_us: float = 80.315
    bandwidth_mhz: float = 24.0
    slot_ns: float = 72.0
    window_us: float = 79.0

    def __post_init__(self):
        if self.storage_time_us < 0:
            raise ValueError("storage time must be non-negative")
        if self.slot_ns <= 0:
            raise ValueError("mode slot must be positive")
        if self.window_us * 1000.0 < self.slot_ns:
            raise ValueError("input window must hold at least one mode slot")
        if not 0 <= self.eta0 <= 1 or self.t2afc_us <= 0:
            raise ValueError("eta0 in [0,1] and T2_AFC > 0 required")


@dataclass(frozen=True)
class LossStage:
    """One step of the efficiency chain; value is a probability or a dB loss."""

    name: str
    value: float
    unit: str = "prob"          # "prob" | "dB"
    role: str = "optical"       # "scheme" | "memory_internal" | "optical"

    def probability(self) -> float:
        if self.unit == "dB":
            return fiber_transmittance(self.value)
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"stage {self.name!r}: probability {self.value} outside [0, 1]")
        return self.value


@dataclass(frozen=True)
class LossChain:
    stages: tuple[LossStage, ...]
    duty_cycle: float = 0.037

    def product(self) -> float:
        p = 1.0
        for s in self.stages:
            p *= s.probability()
        return p


def default_loss_chain() -> LossChain:
    """Per-step success probabilities of the reference setup."""
    return LossChain(stages=(
        LossStage("gate_teleportation_scheme", 0.5, role="scheme"),
        LossStage("postselection_interferometer_580", 0.5),
        LossStage("postselection_interferometer_1537", 0.5),
        LossStage("collection_unfiltered_source", 0.42),
        LossStage("heralding_narrowband_source", 0.049),
        LossStage("etalon_transmittance_580", 0.63),
        LossStage("etalon_transmittance_1537", 0.63),
        LossStage("fiber_qc", 2.2, unit="dB"),
        LossStage("interferometer_coupling_580", 0.71),
        LossStage("interferometer_coupling_1537", 0.62),
        LossStage("memory_internal_storage", 0.032, role="memory_internal"),
        LossStage("memory_optics_transmission", 0.65),
        LossStage("bandwidth_match", 0.08),
        LossStage("detector_580", 0.80),
        LossStage("detector_1537", 0.91),
    ))


def propagation_delay(ch: ChannelParams) -> float:
    """One-way fiber delay in microseconds."""
    return ch.length_km * ch.propagation_us_per_km


def fiber_transmittance(db: float) -> float:
    """Power transmittance 10^(-dB/10)."""
    if db < 0:
        raise ValueError("attenuation in dB must be non-negative")
    return 10.0 ** (-db / 10.0)


def memory_efficiency(t_us: float, mem: MemoryParams) -> float:
    """eta0 * exp(-4 t / T2_AFC): retrieval efficiency after t microseconds."""
    if t_us < 0:
        raise ValueError("storage time must be non-negative")
    return mem.eta0 * float(np.exp(-4.0 * t_us / mem.t2afc_us))


def memory_1e_time(mem: MemoryParams) -> float:
    """Storage time at which the efficiency has decayed to eta0 / e."""
    return mem.t2afc_us / 4.0


def mode_capacity(mem: MemoryParams) -> int:
    """Number of temporal modes: floor(input window / mode slot)."""
    return int(np.floor(mem.window_us * 1000.0 / mem.slot_ns))


@dataclass
class ArmCheck:
    wavelength_nm: int
    arm_delay_ns: float
    coherence_ns: float
    ratio: float
    ok: bool


@dataclass
class TimingReport:
    """Feasibility report; never raises, callers decide what to do with it."""

    qc_delay_us: float
    cc_delay_us: float
    meas_latency_us: float
    required_storage_us: float
    storage_time_us: float
    slack_us: float
    storage_ok: bool
    arm_checks: list[ArmCheck]
    ok: bool

    def to_dict(self) -> dict:
        return {
            "qc_delay_us": self.qc_delay_us,
            "cc_delay_us": self.cc_delay_us,
            "meas_latency_us": self.meas_latency_us,
            "required_storage_us": self.required_storage_us,
            "storage_time_us": self.storage_time_us,
            "slack_us": self.slack_us,
            "storage_ok": self.storage_ok,
            "arm_checks": [vars(a).copy() for a in self.arm_checks],
            "ok": self.ok,
        }


ARM_RATIO_THRESHOLD = 10.0


def validate_timing(config: "ExperimentConfig") -> TimingReport:
    """Check the storage-time bound and the interferometer arm-delay condition.

    (i) the memory must hold the photon for QC delay + node-B measurement
    latency + CC delay; (ii) each unbalanced interferometer's arm delay must
    exceed the photon coherence time by at least a factor of 10.
    """
    qc_delay = propagation_delay(config.qc)
    cc_delay = propagation_delay(config.cc)
    required = qc_delay + config.meas_latency_us + cc_delay
    slack = config.memory.storage_time_us - required
    arm_delay_ns = (config.interferometer.arm_length_m * config.interferometer.fiber_index
                    / SPEED_OF_LIGHT_M_PER_S * 1e9)
    checks = []
    for wl, bw in ((580, config.source.bandwidth_580_mhz),
                   (1537, config.source.bandwidth_1537_mhz)):
        coherence_ns = 1000.0 / bw
        ratio = arm_delay_ns / coherence_ns
        checks.append(ArmCheck(wl, arm_delay_ns, coherence_ns, ratio,
                               ratio >= ARM_RATIO_THRESHOLD))
    storage_ok = slack >= 0
    return TimingReport(
        qc_delay_us=qc_delay, cc_delay_us=cc_delay,
        meas_latency_us=config.meas_latency_us,
        required_storage_us=required,
        storage_time_us=config.memory.storage_time_us,
        slack_us=slack, storage_ok=storage_ok, arm_checks=checks,
        ok=storage_ok and all(c.ok for c in checks))


@dataclass
class BudgetRow:
    name: str
    unit: str
    value: float
    probability: float
    cumulative: float


@dataclass
class BudgetReport:
    rows: list[BudgetRow]
    product: float
    duty_cycle: float

    def to_dict(self) -> dict:
        return {
            "rows": [vars(r).copy() for r in self.rows],
            "product": self.product,
            "duty_cycle": self.duty_cycle,
        }


def rate_budget(chain: LossChain) -> BudgetReport:
    """Per-stage and cumulative success probabilities of the loss chain."""
    rows = []
    cum = 1.0
    for s in chain.stages:
        p = s.probability()
        cum *= p
        rows.append(BudgetRow(s.name, s.unit, s.value, p, cum))
    return BudgetReport(rows=rows, product=cum, duty_cycle=chain.duty_cycle)


@dataclass
class ThroughputReport:
    n_modes: int
    per_attempt_probability: float
    pair_rate_hz: float
    duty_cycle: float
    successes_per_hour: float
    successes_per_second: float

    def to_dict(self) -> dict:
        return vars(self).copy()


def throughput(config: "ExperimentConfig", n_modes: int) -> ThroughputReport:
    """Deterministic success-rate model, exactly linear in the mode count.

    pair_rate_hz is the pair generation rate per mode slot; multimode storage
    multiplies the attempt rate by n_modes, and the duty cycle accounts for
    the fraction of wall time the memory accepts input.
    """
    if n_modes < 0:
        raise ValueError("n_modes must be non-negative")
    p = config.loss_chain.product()
    rate_s = (config.source.pair_rate_hz * config.loss_chain.duty_cycle
              * p * n_modes)
    return ThroughputReport(
        n_modes=n_modes, per_attempt_probability=p,
        pair_rate_hz=config.source.pair_rate_hz,
        duty_cycle=config.loss_chain.duty_cycle,
        successes_per_hour=rate_s * 3600.0,
        successes_per_second=rate_s)


# --- trial engine ------------------------------------------------------------

_PREP_KETS = {"H": qsim.KET0, "V": qsim.KET1, "+": qsim.KET_PLUS, "-": qsim.KET_MINUS}
_AXIS_SYMBOLS = {"Z": ("H", "V"), "X": ("+", "-")}


def prep_state(control_sym: str, target_sym: str) -> qsim.QuantumState:
    """Separable polarization input |control>|target> from H/V/+/- symbols."""
    try:
        return qsim.product_state(_PREP_KETS[control_sym], _PREP_KETS[target_sym])
    except KeyError as exc:
        raise ValueError(f"unknown preparation symbol {exc.args[0]!r}") from None


def _branch_outcome_dists(table: teleport.BranchTable, bases: tuple[str, str],
                          white_lambda: float, depolarizing_p: float
                          ) -> list[dict[str, float] | None]:
    """Final (control, target) measurement distribution for each kept branch."""
    meas = [qsim.MeasBasis(bases[0], 0), qsim.MeasBasis(bases[1], 1)]
    dists: list[dict[str, float] | None] = []
    for b in table.branches:
        if not b.kept or b.output is None:
            dists.append(None)
            continue
        out = b.output
        if white_lambda > 0:
            out = qsim.apply_channel(out, "white_admixture", white_lambda, (0, 1))
        if depolarizing_p > 0:
            out = qsim.apply_channel(out, "depolarizing", depolarizing_p, (0, 1))
        raw = qsim.outcome_probabilities(out, meas)
        dist = {}
        for bits, p in raw.items():
            label = (_AXIS_SYMBOLS[bases[0]][0 if bits[0] in "0+" else 1]
                     + _AXIS_SYMBOLS[bases[1]][0 if bits[1] in "0+" else 1])
            dist[label] = dist.get(label, 0.0) + p
        dists.append(dist)
    return dists


def feedforward_signal(b3_outcome: str, b4_bit: int) -> str:
    """Detector label for a node-B result: S1/S2 behind B3=1, S3/S4 behind B3=0."""
    if b3_outcome in ("1", "-"):
        return "S1" if b4_bit == 0 else "S2"
    return "S3" if b4_bit == 0 else "S4"


@dataclass
class TrialRunResult:
    records: list[teleport.TrialRecord]
    counts: CountsTable
    attempted: int
    detected: int
    kept: int

    def kept_fraction_of_detected(self) -> float:
        return self.kept / self.detected if self.detected else 0.0


def run_trials(config: "ExperimentConfig", shots: int | None = None,
               seed: int | None = None,
               prep: tuple[str, str] = ("+", "H"),
               bases: tuple[str, str] = ("Z", "Z"),
               gate: str = "cnot", u: np.ndarray | None = None,
               override_timing: bool = False) -> TrialRunResult:
    """Sample end-to-end teleportation attempts through the loss/timing chain.

    Each trial occupies one temporal mode slot; losses are independent
    Bernoulli draws per stage, the teleportation branch is drawn from the
    exact joint outcome law, and the feedforward correction only applies when
    the classical message beats the programmed retrieval time.  Deterministic
    given (seed, trial_id): every trial uses its own derived RNG stream.
    """
    timing = validate_timing(config)
    if not timing.ok and not override_timing:
        raise ValueError("timing validation failed; pass override_timing=True to force")
    shots = shots if shots is not None else config.shots
    seed = seed if seed is not None else config.seed

    epr = photon.make_entangled_pair(config.source)
    input_ct = prep_state(*prep)
    mode = config.teleport_mode
    if gate == "cnot":
        table = teleport.cnot_branch_table(input_ct, epr, mode)
    elif gate == "cu":
        if u is None:
            raise ValueError("gate='cu' requires a unitary")
        table = teleport.cu_branch_table(input_ct, epr, u, mode)
    else:
        raise ValueError(f"unknown gate {gate!r}")
    branch_probs = table.probs
    branch_probs = branch_probs / branch_probs.sum()
    dists = _branch_outcome_dists(table, bases, config.noise.white_lambda,
                                  config.noise.depolarizing_p)
    labels = [a + b for a in _AXIS_SYMBOLS[bases[0]] for b in _AXIS_SYMBOLS[bases[1]]]

    # the branch law already accounts for the teleportation scheme itself, and
    # the memory stage follows the decay model instead of a fixed table value
    stages = []
    for s in config.loss_chain.stages:
        if s.role == "scheme":
            continue
        if s.role == "memory_internal":
            stages.append((s.name, memory_efficiency(config.memory.storage_time_us,
                                                     config.memory)))
        else:
            stages.append((s.name, s.probability()))

    qc_delay = propagation_delay(config.qc)
    cc_delay = propagation_delay(config.cc)
    slot_us = config.memory.slot_ns / 1000.0
    n_modes = config.n_modes

    records: list[teleport.TrialRecord] = []
    counts: dict[str, int] = {lbl: 0 for lbl in labels}
    detected = kept_total = 0
    root = np.random.SeedSequence(seed)
    for trial_id in range(shots):
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=root.entropy, spawn_key=(trial_id,)))
        mode_index = trial_id % n_modes
        t_gen = mode_index * slot_us
        t_meas_b = t_gen + qc_delay
        t_msg = t_meas_b + config.meas_latency_us + cc_delay
        t_retr = t_gen + config.memory.storage_time_us

        flags = {name: bool(rng.random() >= p) for name, p in stages}
        lost = any(flags.values())
        deadline_ok = t_msg <= t_retr

        record = teleport.TrialRecord(
            trial_id=trial_id, mode_index=mode_index,
            a2_outcome="", b3_outcome="",
            correction=teleport.CorrectionSpec(keep=False),
            kept=False,
            t_generated_us=t_gen, t_measured_b_us=t_meas_b,
            t_msg_arrival_us=t_msg, t_retrieval_us=t_retr,
            loss_flags=flags)

        if not lost:
            detected += 1
            idx = int(rng.choice(len(branch_probs), p=branch_probs))
            branch = table.branches[idx]
            record.a2_outcome = branch.a2_outcome
            record.b3_outcome = branch.b3_outcome
            record.correction = branch.correction
            if branch.kept and deadline_ok:
                record.kept = True
                kept_total += 1
                dist = dists[idx]
                keys = sorted(dist)
                probs = np.array([dist[k] for k in keys])
                outcome = keys[int(rng.choice(len(keys), p=probs / probs.sum()))]
                counts[outcome] = counts.get(outcome, 0) + 1
        record.validate()
        records.append(record)

    setting = f"{prep[0]}{prep[1]}:{bases[0]}{bases[1]}"
    return TrialRunResult(
        records=records,
        counts=CountsTable(setting=setting, counts=counts, shots=kept_total),
        attempted=shots, detected=detected, kept=kept_total)


def record_to_dict(r: teleport.TrialRecord) -> dict:
    return {
        "trial_id": r.trial_id,
        "mode_index": r.mode_index,
        "a2_outcome": r.a2_outcome,
        "b3_outcome": r.b3_outcome,
        "correction": {"keep": r.correction.keep,
                       "ops": [list(op) for op in r.correction.ops]},
        "kept": r.kept,
        "t_generated_us": r.t_generated_us,
        "t_measured_b_us": r.t_measured_b_us,
        "t_msg_arrival_us": r.t_msg_arrival_us,
        "t_retrieval_us": r.t_retrieval_us,
        "loss_flags": dict(r.loss_flags),
    }
