"""Estimation and reporting: truth tables, witness-reconstructed density
matrix elements, Bell fidelities, visibility and SNR conversions, bootstrap
error bars, and regression comparison against the bundled reference dataset.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import numpy as np

TRUTH_INPUTS = ("HH", "HV", "VH", "VV")
# ideal CNOT action on |control target>, control flips the target when V
IDEAL_CNOT_MAP = {"HH": "HH", "HV": "HV", "VH": "VV", "VV": "VH"}

BELL_NAMES = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")


@dataclass
class CountsTable:
    """Integer outcome counts for one measurement setting."""

    setting: str
    counts: dict[str, int]
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise ValueError("counts must sum to the shot total")

    def probabilities(self) -> dict[str, float]:
        if self.shots == 0:
            return {k: 0.0 for k in self.counts}
        return {k: v / self.shots for k, v in self.counts.items()}


def truth_table_fidelity(tables: dict[str, CountsTable]
                         ) -> tuple[np.ndarray, float]:
    """(4x4 output-probability matrix, mean ideal-output probability).

    ``tables`` maps each input setting HH/HV/VH/VV to its measured counts.
    The matrix is input-major: row i = input TRUTH_INPUTS[i], column j =
    output TRUTH_INPUTS[j].  The fidelity is invariant under transposing the
    input/output orientation of the underlying data.
    """
    missing = [k for k in TRUTH_INPUTS if k not in tables]
    if missing:
        raise ValueError(f"missing input settings: {missing}")
    matrix = np.zeros((4, 4))
    for i, inp in enumerate(TRUTH_INPUTS):
        probs = tables[inp].probabilities()
        for j, out in enumerate(TRUTH_INPUTS):
            matrix[i, j] = probs.get(out, 0.0)
    fid = float(np.mean([matrix[i, TRUTH_INPUTS.index(IDEAL_CNOT_MAP[inp])]
                         for i, inp in enumerate(TRUTH_INPUTS)]))
    return matrix, fid


def probability_matrix_fidelity(matrix: np.ndarray) -> float:
    """Mean ideal-output probability of an input-major 4x4 matrix."""
    matrix = np.asarray(matrix, dtype=float)
    return float(np.mean([matrix[i, TRUTH_INPUTS.index(IDEAL_CNOT_MAP[inp])]
                          for i, inp in enumerate(TRUTH_INPUTS)]))


def witness_real_elements(populations: dict[str, float],
                          xx: float, yy: float) -> dict[str, float]:
    """Real density-matrix elements from the witness settings.

    populations: computational-basis populations keyed HH/HV/VH/VV.
    xx, yy: <sigma_x sigma_x> and <sigma_y sigma_y> expectation values.
    Returns the diagonals plus Re<HH|rho|VV> = (xx - yy)/4 and
    Re<HV|rho|VH> = (xx + yy)/4.
    """
    for name, e in (("xx", xx), ("yy", yy)):
        if abs(e) > 1.0 + 1e-9:
            raise ValueError(f"expectation {name}={e} outside [-1, 1]")
    elements = {f"p_{k}": float(populations[k]) for k in TRUTH_INPUTS}
    elements["re_hh_vv"] = (xx - yy) / 4.0
    elements["re_hv_vh"] = (xx + yy) / 4.0
    return elements


def bell_fidelity_from_elements(elements: dict[str, float], which: str) -> float:
    """Bell fidelity from witness elements.

    F(Phi+-) = (p_HH + p_VV)/2 +- Re<HH|rho|VV>;
    F(Psi+-) = (p_HV + p_VH)/2 +- Re<HV|rho|VH>.
    """
    sign = 1.0 if which.endswith("plus") else -1.0
    if which.startswith("phi"):
        return (elements["p_HH"] + elements["p_VV"]) / 2.0 + sign * elements["re_hh_vv"]
    if which.startswith("psi"):
        return (elements["p_HV"] + elements["p_VH"]) / 2.0 + sign * elements["re_hv_vh"]
    raise ValueError(f"unknown Bell state {which!r}")


def bell_fidelity(matrix: np.ndarray, which: str) -> float:
    """Bell fidelity straight from a (real part of a) 4x4 density matrix.

    Basis order (HH, HV, VH, VV); off-diagonal asymmetry from rounding is
    averaged away.
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape != (4, 4):
        raise ValueError("expected a 4x4 matrix")
    elements = {
        "p_HH": m[0, 0], "p_HV": m[1, 1], "p_VH": m[2, 2], "p_VV": m[3, 3],
        "re_hh_vv": (m[0, 3] + m[3, 0]) / 2.0,
        "re_hv_vh": (m[1, 2] + m[2, 1]) / 2.0,
    }
    return bell_fidelity_from_elements(elements, which)


def fidelity_from_visibilities(vz: float, vx: float) -> float:
    """Source fidelity to Phi+ from the two correlation visibilities."""
    if not 0.0 <= vx <= vz <= 1.0:
        raise ValueError(f"require 0 <= vx <= vz <= 1, got vx={vx}, vz={vz}")
    return (1.0 + vz + 2.0 * vx) / 4.0


def snr_to_noise_fraction(snr: float) -> float:
    """White-noise weight lambda = 1 / (1 + SNR) of the retrieved signal."""
    if snr <= 0:
        raise ValueError("signal-to-noise ratio must be positive")
    return 1.0 / (1.0 + snr)


def error_bars(table: CountsTable, statistic: Callable[[CountsTable], float],
               n_resamples: int = 1000, seed: int = 0) -> float:
    """One-sigma uncertainty of a counts statistic by multinomial resampling."""
    if table.shots < 1:
        raise ValueError("cannot resample an empty counts table")
    if n_resamples < 2:
        raise ValueError("need at least two resamples")
    rng = np.random.default_rng(seed)
    keys = sorted(table.counts)
    p = np.array([table.counts[k] for k in keys], dtype=float) / table.shots
    draws = rng.multinomial(table.shots, p, size=n_resamples)
    values = np.empty(n_resamples)
    for i, row in enumerate(draws):
        resampled = CountsTable(table.setting,
                                dict(zip(keys, (int(c) for c in row))), table.shots)
        values[i] = statistic(resampled)
    return float(values.std(ddof=1))


# --- reference dataset -------------------------------------------------------

@dataclass
class ReferenceData:
    """Bundled measured values used as regression fixtures."""

    truth_table: dict[str, dict[str, float]]          # input -> output -> prob
    truth_table_errors: dict[str, dict[str, float]]
    dj: dict[str, dict[str, float]]                   # oracle -> {H, V, error}
    ipea: dict[str, dict[str, list[float]]]           # bits -> {p0, p1, errors}
    bell_matrices: dict[str, np.ndarray] = field(default_factory=dict)
    truth_table_fidelity: tuple[float, float] = (0.0, 0.0)   # (value, one sigma)
    bell_fidelities: dict[str, tuple[float, float]] = field(default_factory=dict)

    def bell_matrix(self, which: str) -> np.ndarray:
        return self.bell_matrices[which]


def _require(cond: bool, path: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"reference file: {path}: {msg}")


def _validate_prob(value, path: str) -> float:
    _require(isinstance(value, (int, float)), path, "expected a number")
    _require(-1e-9 <= value <= 1.0 + 1e-9, path, f"probability {value} outside [0, 1]")
    return float(value)


def parse_reference(doc: dict) -> ReferenceData:
    for section in ("truth_table", "dj", "ipea", "bell_matrices"):
        _require(section in doc, section, "missing section")
    tt, tt_err = {}, {}
    for inp in TRUTH_INPUTS:
        _require(inp in doc["truth_table"], f"truth_table.{inp}", "missing input column")
        col = doc["truth_table"][inp]
        tt[inp] = {}
        tt_err[inp] = {}
        for out in TRUTH_INPUTS:
            _require(out in col, f"truth_table.{inp}.{out}", "missing output entry")
            cell = col[out]
            _require(isinstance(cell, list) and len(cell) == 2,
                     f"truth_table.{inp}.{out}", "expected [value, error]")
            tt[inp][out] = _validate_prob(cell[0], f"truth_table.{inp}.{out}")
            tt_err[inp][out] = float(cell[1])
    dj = {}
    for oracle, row in doc["dj"].items():
        for k in ("H", "V", "error"):
            _require(k in row, f"dj.{oracle}.{k}", "missing field")
        dj[oracle] = {"H": _validate_prob(row["H"], f"dj.{oracle}.H"),
                      "V": _validate_prob(row["V"], f"dj.{oracle}.V"),
                      "error": float(row["error"])}
    ipea = {}
    for bits, row in doc["ipea"].items():
        _require(set(bits) <= {"0", "1"}, f"ipea.{bits}", "key must be a bit string")
        for k in ("p0", "p1", "errors"):
            _require(k in row and isinstance(row[k], list) and len(row[k]) == len(bits),
                     f"ipea.{bits}.{k}", f"expected a list of {len(bits)} values")
        ipea[bits] = {
            "p0": [_validate_prob(v, f"ipea.{bits}.p0[{i}]") for i, v in enumerate(row["p0"])],
            "p1": [_validate_prob(v, f"ipea.{bits}.p1[{i}]") for i, v in enumerate(row["p1"])],
            "errors": [float(v) for v in row["errors"]],
        }
    mats = {}
    for name in BELL_NAMES:
        _require(name in doc["bell_matrices"], f"bell_matrices.{name}", "missing matrix")
        m = np.asarray(doc["bell_matrices"][name], dtype=float)
        _require(m.shape == (4, 4), f"bell_matrices.{name}", "expected a 4x4 matrix")
        mats[name] = m
    tt_fid = doc.get("truth_table_fidelity", [0.0, 0.0])
    _require(isinstance(tt_fid, list) and len(tt_fid) == 2,
             "truth_table_fidelity", "expected [value, error]")
    bell_fids = {}
    for name, cell in doc.get("bell_fidelities", {}).items():
        _require(name in BELL_NAMES, f"bell_fidelities.{name}", "unknown Bell state")
        _require(isinstance(cell, list) and len(cell) == 2,
                 f"bell_fidelities.{name}", "expected [value, error]")
        bell_fids[name] = (float(cell[0]), float(cell[1]))
    return ReferenceData(truth_table=tt, truth_table_errors=tt_err, dj=dj,
                         ipea=ipea, bell_matrices=mats,
                         truth_table_fidelity=(float(tt_fid[0]), float(tt_fid[1])),
                         bell_fidelities=bell_fids)


def ingest_reference(path: str | None = None) -> ReferenceData:
    """Load the reference dataset; defaults to the bundled fixture file."""
    if path is None:
        text = resources.files("telegate.data").joinpath("reference.json").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"reference file: invalid JSON at line {exc.lineno}, "
                         f"column {exc.colno}: {exc.msg}") from None
    return parse_reference(doc)


def reference_truth_matrix(ref: ReferenceData) -> np.ndarray:
    """Input-major probability matrix from the reference truth table."""
    m = np.zeros((4, 4))
    for i, inp in enumerate(TRUTH_INPUTS):
        for j, out in enumerate(TRUTH_INPUTS):
            m[i, j] = ref.truth_table[inp][out]
    return m


@dataclass
class ComparisonCell:
    name: str
    ours: float
    reference: float
    deviation: float
    tolerance: float
    ok: bool


@dataclass
class ComparisonReport:
    cells: list[ComparisonCell]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cells)

    @property
    def max_deviation(self) -> float:
        return max((c.deviation for c in self.cells), default=0.0)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "max_deviation": self.max_deviation,
                "cells": [vars(c).copy() for c in self.cells]}


def compare_to_reference(results: dict[str, float], reference: dict[str, float],
                         tolerances: dict[str, float] | float) -> ComparisonReport:
    """Cell-by-cell deviation report; tolerance may be global or per key."""
    cells = []
    for name in sorted(reference):
        if name not in results:
            raise ValueError(f"results missing entry {name!r}")
        tol = tolerances if isinstance(tolerances, (int, float)) else tolerances[name]
        dev = abs(results[name] - reference[name])
        cells.append(ComparisonCell(name=name, ours=float(results[name]),
                                    reference=float(reference[name]),
                                    deviation=float(dev), tolerance=float(tol),
                                    ok=dev <= tol))
    return ComparisonReport(cells)
