"""Photonic degree-of-freedom bookkeeping and the entangled-pair source model.

Each photon carries two qubits: one in polarization (H/V) and one in a second
DOF that may be encoded as a time bin (S/L), a spatial path (0/1) or a second
polarization stage, connected by the fixed bijection S <-> 0 <-> H and
L <-> 1 <-> V.  Because the bijection preserves bit values, re-encoding never
touches amplitudes; it only relabels which physical DOF carries the qubit.

Inter-DOF gates on a single photon are deterministic (no postselection):
they are plain two-qubit unitaries between that photon's own qubits.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import qsim

DOFS = ("time_bin", "path", "polarization")

# basis symbol for bit value b, per DOF
DOF_SYMBOLS = {
    "time_bin": ("S", "L"),
    "path": ("0", "1"),
    "polarization": ("H", "V"),
}


@dataclass(frozen=True)
class PhotonRef:
    """One photon and the register indices of the two qubits it carries.

    ``pol_qubit`` is the polarization qubit; ``aux_qubit`` is the second
    qubit whose current encoding is tracked in ``aux_dof``.
    """

    node: str               # "A" | "B"
    wavelength_nm: int      # 580 | 1537
    pol_qubit: int
    aux_qubit: int
    aux_dof: str = "path"

    def __post_init__(self):
        if self.node not in ("A", "B"):
            raise ValueError("node must be 'A' or 'B'")
        if self.wavelength_nm not in (580, 1537):
            raise ValueError("wavelength must be 580 or 1537 nm")
        if self.wavelength_nm == 580 and self.node != "A":
            raise ValueError("the 580-nm photon stays at node A")
        if self.aux_dof not in DOFS:
            raise ValueError(f"unknown DOF {self.aux_dof!r}")


@dataclass(frozen=True)
class SourceParams:
    """Entangled-pair source quality and rate parameters.

    vz / vx are the correlation visibilities in the computational and
    Fourier bases; pair_rate_hz is the mean pair generation rate per
    temporal mode slot and is a user-supplied calibration input.
    """

    vz: float = 0.990
    vx: float = 0.862
    heralding_efficiency: float = 0.049
    bandwidth_580_mhz: float = 178.0
    bandwidth_1537_mhz: float = 155.0
    pair_rate_hz: float = 1.0

    def __post_init__(self):
        for name in ("vz", "vx", "heralding_efficiency"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.vx > self.vz:
            raise ValueError(
                f"vx ({self.vx}) must not exceed vz ({self.vz}); the pair noise "
                "model is only positive for vx <= vz")
        if self.bandwidth_580_mhz <= 0 or self.bandwidth_1537_mhz <= 0:
            raise ValueError("photon bandwidths must be positive")
        if self.pair_rate_hz < 0:
            raise ValueError("pair_rate_hz must be non-negative")


def pair_fidelity(vz: float, vx: float) -> float:
    """Fidelity of the modeled source state to Phi+: (1 + vz + 2 vx) / 4."""
    return (1.0 + vz + 2.0 * vx) / 4.0


def make_entangled_pair(params: SourceParams) -> qsim.QuantumState:
    """Two-qubit source state (A2 path, B3 path).

    Ideal visibilities give pure Phi+.  Otherwise a Bell-diagonal mixture is
    returned whose Z-basis correlation visibility is vz, X-basis coherence is
    vx, and whose fidelity to Phi+ is exactly (1 + vz + 2 vx)/4:

        rho = vx |Phi+><Phi+|
            + (vz - vx)/2 (|00><00| + |11><11|)
            + (1 - vz)/4  (|00><00| + |01><01| + |10><10| + |11><11|)
    """
    vz, vx = params.vz, params.vx
    labels = ("A2", "B3")
    if vz == 1.0 and vx == 1.0:
        return qsim.QuantumState("pure", qsim.bell_state("phi_plus").data, labels)
    phi_plus = qsim.bell_state("phi_plus").density()
    diag_corr = np.zeros((4, 4), dtype=complex)
    diag_corr[0, 0] = diag_corr[3, 3] = 0.5
    rho = (vx * phi_plus
           + (vz - vx) * diag_corr
           + (1.0 - vz) * np.eye(4, dtype=complex) / 4.0)
    return qsim.QuantumState("mixed", rho, labels)


def convert_encoding(state: qsim.QuantumState, photon: PhotonRef,
                     dof_from: str, dof_to: str) -> tuple[qsim.QuantumState, PhotonRef]:
    """Re-encode the photon's auxiliary qubit between DOFs.

    The S<->0<->H bijection makes this a pure relabeling: the returned state
    has identical amplitudes, only the PhotonRef's DOF tag changes.
    """
    for d in (dof_from, dof_to):
        if d not in DOFS:
            raise ValueError(f"unknown DOF {d!r}")
    if dof_from == dof_to:
        raise ValueError("conversion requires two different DOFs")
    if photon.aux_dof != dof_from:
        raise ValueError(
            f"photon's auxiliary qubit is encoded in {photon.aux_dof!r}, not {dof_from!r}")
    return state.copy(), replace(photon, aux_dof=dof_to)


def basis_symbol(dof: str, bit: int) -> str:
    return DOF_SYMBOLS[dof][bit]


def local_cnot_path_on_pol(state: qsim.QuantumState, photon: PhotonRef) -> qsim.QuantumState:
    """Deterministic CNOT: path (control) flips polarization (target)."""
    return qsim.apply_gate(state, qsim.gate("CNOT", photon.aux_qubit, photon.pol_qubit))


def local_cnot_pol_on_path(state: qsim.QuantumState, photon: PhotonRef) -> qsim.QuantumState:
    """Deterministic CNOT: polarization (control) flips path (target)."""
    return qsim.apply_gate(state, qsim.gate("CNOT", photon.pol_qubit, photon.aux_qubit))


def local_cu_path_on_pol(state: qsim.QuantumState, photon: PhotonRef,
                         u: np.ndarray) -> qsim.QuantumState:
    """Deterministic controlled-U: path controls a U on polarization."""
    return qsim.apply_gate(
        state, qsim.gate("ControlledU", photon.aux_qubit, photon.pol_qubit, unitary=u))
