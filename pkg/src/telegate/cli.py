"""Command-line front end.

Every subcommand emits a single JSON report (stdout or ``--out``) that embeds
the fully resolved config and seed, so identical (config, seed) pairs produce
byte-identical reports.  Exit codes: 0 success, 2 config error, 3 failed
reference comparison under ``--compare-reference``.

Seed precedence: ``--seed`` flag, then the TELEGATE_SEED environment
variable, then the config file.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import afcpulse, algo, analysis, netsim, qsim
from .config import ConfigError, ExperimentConfig, parse_config

SCHEMA_VERSION = 1

BELL_INPUTS = (("+", "H"), ("+", "V"), ("-", "H"), ("-", "V"))
BELL_TARGETS = {("+", "H"): "phi_plus", ("+", "V"): "psi_plus",
                ("-", "H"): "phi_minus", ("-", "V"): "psi_minus"}


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value)
    return value


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _resolve_seed(cfg: ExperimentConfig, args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("TELEGATE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"TELEGATE_SEED must be an integer, got {env!r}") from None
    return cfg.seed


def _report(cfg: ExperimentConfig, seed: int, command: str, results: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, "command": command,
            "seed": seed, "config": cfg.to_dict(), "results": results}


def _backend_for(cfg: ExperimentConfig, ideal: bool):
    if ideal:
        return algo.IdealBackend()
    return algo.NoisyBackend(cfg.source, white_lambda=cfg.noise.white_lambda,
                             depolarizing_p=cfg.noise.depolarizing_p,
                             mode=cfg.teleport_mode)


_ZZ = [qsim.MeasBasis("Z", 0), qsim.MeasBasis("Z", 1)]


def _zz_probabilities(state: qsim.QuantumState) -> dict[str, float]:
    raw = qsim.outcome_probabilities(state, _ZZ)
    return {"HV"[int(k[0])] + "HV"[int(k[1])]: p for k, p in raw.items()}


def _sample_counts(probs: dict[str, float], shots: int,
                   rng: np.random.Generator) -> dict[str, int]:
    keys = sorted(probs)
    p = np.array([probs[k] for k in keys])
    draw = rng.multinomial(shots, p / p.sum())
    return dict(zip(keys, (int(c) for c in draw)))


# --- subcommand implementations ----------------------------------------------

def _cmd_check(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    report = netsim.validate_timing(cfg)
    return _report(cfg, seed, "check", report.to_dict()), 0


def _cmd_truth_table(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    backend = _backend_for(cfg, args.ideal)
    rng = np.random.default_rng(seed)
    rows = {}
    tables = {}
    for inp in analysis.TRUTH_INPUTS:
        state = netsim.prep_state(inp[0], inp[1])
        out = backend.finalize(backend.nonlocal_cnot(state))
        probs = _zz_probabilities(out)
        if args.shots:
            counts = _sample_counts(probs, args.shots, rng)
            tables[inp] = analysis.CountsTable(inp, counts, args.shots)
            rows[inp] = {k: v / args.shots for k, v in counts.items()}
        else:
            rows[inp] = probs
    if args.shots:
        matrix, fid = analysis.truth_table_fidelity(tables)
    else:
        matrix = np.array([[rows[i].get(o, 0.0) for o in analysis.TRUTH_INPUTS]
                           for i in analysis.TRUTH_INPUTS])
        fid = analysis.probability_matrix_fidelity(matrix)
    results = {"probabilities": rows, "fidelity": fid,
               "shots": args.shots, "ideal": args.ideal}
    code = 0
    if args.compare_reference:
        ref = analysis.ingest_reference(args.reference)
        ours, expect, tol = {}, {}, {}
        for inp in analysis.TRUTH_INPUTS:
            for outc in analysis.TRUTH_INPUTS:
                key = f"{inp}->{outc}"
                ours[key] = rows[inp].get(outc, 0.0)
                expect[key] = ref.truth_table[inp][outc]
                tol[key] = max(ref.truth_table_errors[inp][outc], 1e-12) * args.tolerance_scale
        cmp = analysis.compare_to_reference(ours, expect, tol)
        results["reference_comparison"] = cmp.to_dict()
        code = 0 if cmp.ok else 3
    return _report(cfg, seed, "truth-table", results), code


def _cmd_bell(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    backend = _backend_for(cfg, args.ideal)
    rng = np.random.default_rng(seed)
    per_state = {}
    fidelities = {}
    for inp in BELL_INPUTS:
        name = BELL_TARGETS[inp]
        state = netsim.prep_state(*inp)
        out = backend.finalize(backend.nonlocal_cnot(state))
        pops = _zz_probabilities(out)
        xx = qsim.expectation(out, {0: "X", 1: "X"})
        yy = qsim.expectation(out, {0: "Y", 1: "Y"})
        if args.shots:
            counts = _sample_counts(pops, args.shots, rng)
            pops = {k: v / args.shots for k, v in counts.items()}
            # correlation settings estimated from sampled +1/-1 parities
            xx = 2.0 * rng.binomial(args.shots, (1 + xx) / 2) / args.shots - 1.0
            yy = 2.0 * rng.binomial(args.shots, (1 + yy) / 2) / args.shots - 1.0
        elements = analysis.witness_real_elements(pops, xx, yy)
        fid = analysis.bell_fidelity_from_elements(elements, name)
        fidelities[name] = fid
        per_state["".join(inp)] = {"target": name, "elements": elements,
                                   "fidelity": fid}
    results = {"states": per_state, "fidelities": fidelities,
               "average_fidelity": float(np.mean(list(fidelities.values()))),
               "shots": args.shots, "ideal": args.ideal}
    code = 0
    if args.compare_reference:
        ref = analysis.ingest_reference(args.reference)
        expect = {n: v[0] for n, v in ref.bell_fidelities.items()}
        tol = {n: v[1] * args.tolerance_scale for n, v in ref.bell_fidelities.items()}
        cmp = analysis.compare_to_reference(fidelities, expect, tol)
        results["reference_comparison"] = cmp.to_dict()
        code = 0 if cmp.ok else 3
    return _report(cfg, seed, "bell", results), code


def _cmd_dj(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    backend = _backend_for(cfg, args.ideal)
    rng = np.random.default_rng(seed)
    kinds = ([algo.OracleKind(args.oracle)] if args.oracle != "all"
             else list(algo.OracleKind))
    per_oracle = {}
    for kind in kinds:
        r = algo.run_deutsch_jozsa(kind, backend, shots=args.shots, rng=rng)
        per_oracle[kind.value] = {
            "p_h": r.p_h, "p_v": r.p_v, "classification": r.classification,
            "expected_class": kind.function_class, "correct": r.correct,
            "counts": r.counts}
    results = {"oracles": per_oracle, "shots": args.shots, "ideal": args.ideal}
    code = 0
    if args.compare_reference:
        ref = analysis.ingest_reference(args.reference)
        ours, expect, tol = {}, {}, {}
        for kind in kinds:
            row = ref.dj[kind.value]
            ours[f"{kind.value}.H"] = per_oracle[kind.value]["p_h"]
            expect[f"{kind.value}.H"] = row["H"]
            tol[f"{kind.value}.H"] = row["error"] * args.tolerance_scale
        cmp = analysis.compare_to_reference(ours, expect, tol)
        results["reference_comparison"] = cmp.to_dict()
        code = 0 if cmp.ok else 3
    return _report(cfg, seed, "dj", results), code


def parse_unitary_label(label: str) -> tuple[float, np.ndarray]:
    """CLI unitary: "I" or "Z^s" with fractional or decimal s.

    Returns (eigenphase of |V> in turns, 2x2 matrix).
    """
    label = label.strip()
    if label.upper() == "I":
        return 0.0, np.eye(2, dtype=complex)
    if not label.startswith("Z^"):
        raise ConfigError(f"unsupported unitary {label!r}; use I or Z^s")
    try:
        s = Fraction(label[2:])
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"cannot parse exponent in {label!r}") from None
    return float(s) / 2.0 % 1.0, algo.z_power(float(s))


def _cmd_ipea(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    backend = _backend_for(cfg, args.ideal)
    rng = np.random.default_rng(seed)
    phi_turns, u = parse_unitary_label(args.u)
    r = algo.run_ipea(u=u, m=args.rounds, backend=backend,
                      shots=args.shots, rng=rng)
    analytic = algo.ipea_analytic(phi_turns, args.rounds)
    results = {
        "unitary": args.u, "rounds": args.rounds,
        "phi_true_turns": phi_turns,
        "bits": r.bit_string,
        "per_round_prob0": list(r.per_round_prob0),
        "analytic_correct_prob": analytic,
        "phi_estimate_turns": r.phi_estimate_turns,
        "phi_estimate_float": float(r.phi_estimate_turns),
        "delta": r.delta,
        "ambiguous_rounds": list(r.ambiguous_rounds),
        "shots": args.shots, "ideal": args.ideal,
    }
    code = 0
    if args.compare_reference:
        ref = analysis.ingest_reference(args.reference)
        bits = r.bit_string
        if bits not in ref.ipea:
            raise ConfigError(
                f"reference has no phase-estimation column for bits {bits!r}")
        row = ref.ipea[bits]
        # reference columns are bit positions (most significant first);
        # round k measures bit k, so reverse into measurement order
        ours = {f"round{i + 1}.p0": p for i, p in enumerate(r.per_round_prob0)}
        expect = {f"round{i + 1}.p0": row["p0"][args.rounds - 1 - i]
                  for i in range(args.rounds)}
        tol = {f"round{i + 1}.p0": row["errors"][args.rounds - 1 - i] * args.tolerance_scale
               for i in range(args.rounds)}
        cmp = analysis.compare_to_reference(ours, expect, tol)
        results["reference_comparison"] = cmp.to_dict()
        code = 0 if cmp.ok else 3
    return _report(cfg, seed, "ipea", results), code


def _cmd_budget(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    report = netsim.rate_budget(cfg.loss_chain)
    return _report(cfg, seed, "budget", report.to_dict()), 0


def _cmd_throughput(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    report = netsim.throughput(cfg, args.modes)
    return _report(cfg, seed, "throughput", report.to_dict()), 0


def _cmd_trials(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    result = netsim.run_trials(
        cfg, shots=args.shots, seed=seed,
        prep=(args.prep[0], args.prep[1]), bases=(args.bases[0], args.bases[1]),
        override_timing=args.override_timing)
    if args.records:
        with open(args.records, "w", encoding="utf-8") as fh:
            for rec in result.records:
                fh.write(json.dumps(_jsonable(netsim.record_to_dict(rec)),
                                    sort_keys=True) + "\n")
    results = {
        "attempted": result.attempted,
        "detected": result.detected,
        "kept": result.kept,
        "kept_fraction_of_detected": result.kept_fraction_of_detected(),
        "counts": {"setting": result.counts.setting,
                   "shots": result.counts.shots,
                   "counts": result.counts.counts},
        "records_written": args.records or None,
    }
    return _report(cfg, seed, "trials", results), 0


def _cmd_pulse_synth(cfg: ExperimentConfig, seed: int, args) -> tuple[dict, int]:
    params = afcpulse.AfcPulseParams(n_teeth=args.teeth)
    rate = args.sample_rate if args.sample_rate else 4.2 * params.total_span_hz
    wave = afcpulse.synth_prep_waveform(params, rate, variant=args.variant,
                                        phase_scheme=args.phase_scheme,
                                        floor_variant=args.floor_phase)
    metrics = afcpulse.comb_metrics(wave)
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_s", "re", "im"])
            for t, z in zip(wave.times_s, wave.samples):
                writer.writerow([repr(float(t)), repr(float(np.real(z))),
                                 repr(float(np.imag(z)))])
    results = {
        "n_teeth": args.teeth,
        "sample_rate_hz": rate,
        "variant": args.variant,
        "phase_scheme": args.phase_scheme,
        "n_samples": len(wave.samples),
        "prenorm_peak": wave.prenorm_peak,
        "metrics": metrics.to_dict(),
        "expected_spacing_hz": params.delta_hz,
        "expected_span_hz": params.total_span_hz,
        "csv_written": args.csv or None,
    }
    return _report(cfg, seed, "pulse synth", results), 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telegate",
        description="Simulator and analysis toolkit for teleported nonlocal "
                    "two-qubit gates between fiber-linked nodes.")
    parser.add_argument("--config", help="path to a JSON config file")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--out", help="write the JSON report to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        return p

    add("check", _cmd_check, help="timing feasibility report")

    def add_compare(p):
        p.add_argument("--compare-reference", action="store_true",
                       help="compare against the bundled reference data "
                            "(exit 3 on mismatch)")
        p.add_argument("--reference", help="alternative reference JSON file")
        p.add_argument("--tolerance-scale", type=float, default=1.0,
                       help="multiply the reference one-sigma tolerances")

    p = add("truth-table", _cmd_truth_table, help="CNOT truth table and fidelity")
    p.add_argument("--ideal", action="store_true", help="noiseless backend")
    p.add_argument("--shots", type=int, help="sample counts instead of exact probabilities")
    add_compare(p)

    p = add("bell", _cmd_bell, help="Bell states from separable inputs via witness settings")
    p.add_argument("--ideal", action="store_true")
    p.add_argument("--shots", type=int)
    add_compare(p)

    p = add("dj", _cmd_dj, help="Deutsch-Jozsa with one or all oracles")
    p.add_argument("--oracle", default="all",
                   choices=["all"] + [k.value for k in algo.OracleKind])
    p.add_argument("--ideal", action="store_true")
    p.add_argument("--shots", type=int)
    add_compare(p)

    p = add("ipea", _cmd_ipea, help="iterative phase estimation")
    p.add_argument("--u", required=True, help="unitary: I or Z^s (e.g. Z^5/4)")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--ideal", action="store_true")
    p.add_argument("--shots", type=int)
    add_compare(p)

    add("budget", _cmd_budget, help="loss-chain budget breakdown")

    p = add("throughput", _cmd_throughput, help="success-rate model")
    p.add_argument("--modes", type=int, required=True)

    p = add("trials", _cmd_trials, help="end-to-end loss/timing trial sampling")
    p.add_argument("--shots", type=int)
    p.add_argument("--prep", nargs=2, default=["+", "H"], metavar=("C", "T"),
                   help="control/target preparation symbols (H V + -)")
    p.add_argument("--bases", nargs=2, default=["Z", "Z"], metavar=("BC", "BT"),
                   help="final measurement axes (Z or X)")
    p.add_argument("--records", help="write per-trial records as NDJSON here")
    p.add_argument("--override-timing", action="store_true",
                   help="run even if the timing check fails")

    pulse = sub.add_parser("pulse", help="waveform tools")
    pulse_sub = pulse.add_subparsers(dest="pulse_command", required=True)
    p = pulse_sub.add_parser("synth", help="synthesize the comb-preparation waveform")
    p.set_defaults(fn=_cmd_pulse_synth)
    p.add_argument("--teeth", type=int, default=64)
    p.add_argument("--sample-rate", type=float,
                   help="samples/s (default: 4.2 x comb span)")
    p.add_argument("--variant", default="complex_exponential",
                   choices=list(afcpulse.VARIANTS))
    p.add_argument("--phase-scheme", default="schroeder",
                   choices=list(afcpulse.PHASE_SCHEMES))
    p.add_argument("--floor-phase", action="store_true",
                   help="use the integer-floor variant of the quadratic phase")
    p.add_argument("--csv", help="write samples as CSV (t, re, im) here")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
        seed = _resolve_seed(cfg, args)
        report, code = args.fn(cfg, seed, args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _emit(report, args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
