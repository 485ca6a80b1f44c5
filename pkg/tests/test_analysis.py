import json
import math

import numpy as np
import pytest

from telegate import analysis, qsim


def rand_density2(rng, rank=4):
    rho = np.zeros((4, 4), dtype=complex)
    w = rng.dirichlet(np.ones(rank))
    for k in range(rank):
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        v /= np.linalg.norm(v)
        rho += w[k] * np.outer(v, v.conj())
    return rho


def counts_for(probs: dict[str, float], shots: int) -> analysis.CountsTable:
    counts = {k: int(round(p * shots)) for k, p in probs.items()}
    drift = shots - sum(counts.values())
    counts[max(counts, key=counts.get)] += drift
    return analysis.CountsTable("test", counts, shots)


class TestCountsTable:
    def test_sum_invariant(self):
        with pytest.raises(ValueError):
            analysis.CountsTable("s", {"a": 3, "b": 4}, 10)

    def test_probabilities(self):
        t = analysis.CountsTable("s", {"a": 3, "b": 1}, 4)
        assert t.probabilities() == {"a": 0.75, "b": 0.25}


class TestTruthTable:
    def ideal_tables(self, shots=1000):
        tables = {}
        for inp in analysis.TRUTH_INPUTS:
            out = analysis.IDEAL_CNOT_MAP[inp]
            tables[inp] = analysis.CountsTable(inp, {out: shots}, shots)
        return tables

    def test_ideal_counts_give_unit_fidelity(self):
        matrix, fid = analysis.truth_table_fidelity(self.ideal_tables())
        assert fid == 1.0
        assert np.allclose(matrix.sum(axis=1), 1.0)

    def test_reference_fixture_value(self):
        ref = analysis.ingest_reference()
        matrix = analysis.reference_truth_matrix(ref)
        assert analysis.probability_matrix_fidelity(matrix) == pytest.approx(0.887, abs=0.001)

    def test_uniform_outputs_are_chance(self):
        tables = {inp: counts_for({o: 0.25 for o in analysis.TRUTH_INPUTS}, 1000)
                  for inp in analysis.TRUTH_INPUTS}
        _, fid = analysis.truth_table_fidelity(tables)
        assert fid == pytest.approx(0.25, abs=1e-3)

    def test_missing_setting_rejected(self):
        tables = self.ideal_tables()
        del tables["VH"]
        with pytest.raises(ValueError):
            analysis.truth_table_fidelity(tables)

    def test_transpose_ambiguity_does_not_change_fidelity(self):
        ref = analysis.ingest_reference()
        m = analysis.reference_truth_matrix(ref)
        assert analysis.probability_matrix_fidelity(m.T) == \
            pytest.approx(analysis.probability_matrix_fidelity(m), abs=1e-12)


class TestWitness:
    def test_bell_phi_plus(self):
        pops = {"HH": 0.5, "HV": 0.0, "VH": 0.0, "VV": 0.5}
        el = analysis.witness_real_elements(pops, xx=1.0, yy=-1.0)
        assert el["re_hh_vv"] == pytest.approx(0.5)
        assert el["re_hv_vh"] == pytest.approx(0.0)

    def test_bell_psi_plus(self):
        pops = {"HH": 0.0, "HV": 0.5, "VH": 0.5, "VV": 0.0}
        el = analysis.witness_real_elements(pops, xx=1.0, yy=1.0)
        assert el["re_hv_vh"] == pytest.approx(0.5)

    def test_maximally_mixed(self):
        pops = {k: 0.25 for k in analysis.TRUTH_INPUTS}
        el = analysis.witness_real_elements(pops, xx=0.0, yy=0.0)
        assert el["re_hh_vv"] == 0.0 and el["re_hv_vh"] == 0.0

    def test_inconsistent_expectation_rejected(self):
        pops = {k: 0.25 for k in analysis.TRUTH_INPUTS}
        with pytest.raises(ValueError):
            analysis.witness_real_elements(pops, xx=1.2, yy=0.0)

    def test_reconstructs_exact_elements_random_states(self):
        rng = np.random.default_rng(50)
        for _ in range(50):
            rho = rand_density2(rng)
            state = qsim.QuantumState("mixed", rho)
            pops = {"HH": rho[0, 0].real, "HV": rho[1, 1].real,
                    "VH": rho[2, 2].real, "VV": rho[3, 3].real}
            xx = qsim.expectation(state, {0: "X", 1: "X"})
            yy = qsim.expectation(state, {0: "Y", 1: "Y"})
            el = analysis.witness_real_elements(pops, xx, yy)
            assert el["re_hh_vv"] == pytest.approx(rho[0, 3].real, abs=1e-12)
            assert el["re_hv_vh"] == pytest.approx(rho[1, 2].real, abs=1e-12)


class TestBellFidelity:
    def test_reference_matrices(self):
        ref = analysis.ingest_reference()
        computed = {name: analysis.bell_fidelity(ref.bell_matrix(name), name)
                    for name in analysis.BELL_NAMES}
        assert computed["phi_plus"] == pytest.approx(0.812, abs=5e-4)
        assert computed["phi_minus"] == pytest.approx(0.851, abs=1e-3)
        assert computed["psi_plus"] == pytest.approx(0.813, abs=1e-3)
        assert computed["psi_minus"] == pytest.approx(0.802, abs=5e-4)
        for name, (quoted, _) in ref.bell_fidelities.items():
            assert abs(computed[name] - quoted) <= 0.002

    def test_exact_bell_state(self):
        rho = qsim.bell_state("phi_plus").density().real
        assert analysis.bell_fidelity(rho, "phi_plus") == pytest.approx(1.0)

    def test_matches_engine_fidelity_for_random_states(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            rho = rand_density2(rng)
            state = qsim.QuantumState("mixed", rho)
            for name in analysis.BELL_NAMES:
                via_matrix = analysis.bell_fidelity(rho.real, name)
                via_engine = qsim.fidelity(state, qsim.bell_state(name))
                assert via_matrix == pytest.approx(via_engine, abs=1e-12)

    def test_shape_and_name_checks(self):
        with pytest.raises(ValueError):
            analysis.bell_fidelity(np.eye(3), "phi_plus")
        with pytest.raises(ValueError):
            analysis.bell_fidelity_from_elements({}, "omega_plus")


class TestScalarConversions:
    def test_visibility_fidelity(self):
        assert analysis.fidelity_from_visibilities(0.990, 0.862) == pytest.approx(0.9285)
        assert abs(analysis.fidelity_from_visibilities(0.990, 0.862) - 0.926) < 0.005
        assert analysis.fidelity_from_visibilities(1.0, 1.0) == 1.0
        assert analysis.fidelity_from_visibilities(1.0, 0.0) == 0.5

    def test_visibility_ordering(self):
        with pytest.raises(ValueError):
            analysis.fidelity_from_visibilities(0.5, 0.9)

    def test_snr_conversion(self):
        assert analysis.snr_to_noise_fraction(12.6) == pytest.approx(1 / 13.6)
        assert analysis.snr_to_noise_fraction(1.0) == 0.5
        assert analysis.snr_to_noise_fraction(1e12) < 1e-11
        with pytest.raises(ValueError):
            analysis.snr_to_noise_fraction(0.0)


class TestErrorBars:
    @staticmethod
    def p_of_a(table):
        return table.counts.get("a", 0) / table.shots

    def test_binomial_oracle(self):
        table = analysis.CountsTable("s", {"a": 50, "b": 50}, 100)
        sigma = analysis.error_bars(table, self.p_of_a, n_resamples=4000, seed=1)
        binomial = math.sqrt(0.5 * 0.5 / 100)
        assert abs(sigma - binomial) / binomial < 0.2

    def test_deterministic_distribution(self):
        table = analysis.CountsTable("s", {"a": 100}, 100)
        assert analysis.error_bars(table, self.p_of_a, seed=2) == 0.0

    def test_scaling_with_shots(self):
        small = analysis.CountsTable("s", {"a": 500, "b": 500}, 1000)
        big = analysis.CountsTable("s", {"a": 500_000, "b": 500_000}, 1_000_000)
        s_small = analysis.error_bars(small, self.p_of_a, n_resamples=6000, seed=3)
        s_big = analysis.error_bars(big, self.p_of_a, n_resamples=6000, seed=4)
        ratio = s_small / s_big
        assert abs(ratio - math.sqrt(1000)) / math.sqrt(1000) < 0.1

    def test_monotone_in_shots(self):
        sigmas = []
        for shots in (100, 1000, 10_000):
            t = analysis.CountsTable("s", {"a": shots // 2, "b": shots - shots // 2}, shots)
            sigmas.append(analysis.error_bars(t, self.p_of_a, n_resamples=3000, seed=5))
        assert sigmas[0] > sigmas[1] > sigmas[2]

    def test_empty_table_rejected(self):
        t = analysis.CountsTable("s", {}, 0)
        with pytest.raises(ValueError):
            analysis.error_bars(t, self.p_of_a)


class TestReferenceIngestion:
    def test_bundled_fixture_parses(self):
        ref = analysis.ingest_reference()
        assert set(ref.truth_table) == set(analysis.TRUTH_INPUTS)
        assert set(ref.dj) == {"ID", "NOT", "CNOT", "ZCNOT"}
        assert set(ref.ipea) == {"000", "010", "101", "110"}
        assert ref.truth_table_fidelity == (0.887, 0.021)

    def test_ipea_column_shape(self):
        ref = analysis.ingest_reference()
        row = ref.ipea["101"]
        assert row["p0"] == [0.182, 0.828, 0.153]
        assert row["p1"] == [0.818, 0.172, 0.847]
        assert len(row["errors"]) == 3

    def test_round_trip(self, tmp_path):
        from importlib import resources
        doc = json.loads(resources.files("telegate.data")
                         .joinpath("reference.json").read_text())
        path = tmp_path / "copy.json"
        path.write_text(json.dumps(doc))
        again = analysis.ingest_reference(str(path))
        bundled = analysis.ingest_reference()
        assert again.truth_table == bundled.truth_table
        assert again.dj == bundled.dj
        for name in analysis.BELL_NAMES:
            assert np.array_equal(again.bell_matrix(name), bundled.bell_matrix(name))

    def test_schema_diagnostics(self, tmp_path):
        doc = {"truth_table": {}, "dj": {}, "ipea": {}, "bell_matrices": {}}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="truth_table.HH"):
            analysis.ingest_reference(str(path))

    def test_bad_probability_diagnosed(self, tmp_path):
        doc = json.loads(json.dumps({
            "truth_table": {i: {o: [0.0, 0.0] for o in analysis.TRUTH_INPUTS}
                            for i in analysis.TRUTH_INPUTS},
            "dj": {}, "ipea": {}, "bell_matrices": {}}))
        doc["truth_table"]["HH"]["HH"] = [1.7, 0.0]
        path = tmp_path / "bad2.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match=r"truth_table.HH.HH"):
            analysis.ingest_reference(str(path))

    def test_invalid_json_line_reported(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\n  \"truth_table\": oops\n}")
        with pytest.raises(ValueError, match="line 2"):
            analysis.ingest_reference(str(path))


class TestComparison:
    def test_fixture_vs_ideal_max_deviation(self):
        ref = analysis.ingest_reference()
        ours, expected = {}, {}
        for inp in analysis.TRUTH_INPUTS:
            ideal_out = analysis.IDEAL_CNOT_MAP[inp]
            for out in analysis.TRUTH_INPUTS:
                key = f"{inp}->{out}"
                ours[key] = 1.0 if out == ideal_out else 0.0
                expected[key] = ref.truth_table[inp][out]
        report = analysis.compare_to_reference(ours, expected, 1.0)
        assert report.ok
        assert report.max_deviation == pytest.approx(0.129, abs=1e-12)

    def test_failures_flagged(self):
        report = analysis.compare_to_reference({"x": 1.0}, {"x": 0.5}, {"x": 0.1})
        assert not report.ok
        assert report.cells[0].deviation == pytest.approx(0.5)

    def test_missing_result_rejected(self):
        with pytest.raises(ValueError):
            analysis.compare_to_reference({}, {"x": 0.5}, 0.1)
