import math

import numpy as np
import pytest
from scipy.stats import unitary_group

from telegate import analysis, qsim


def rand_pure(rng, n):
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return qsim.pure_state(v)


def rand_density(rng, n, rank=3):
    dim = 2 ** n
    rho = np.zeros((dim, dim), dtype=complex)
    w = rng.dirichlet(np.ones(rank))
    for k in range(rank):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        v /= np.linalg.norm(v)
        rho += w[k] * np.outer(v, v.conj())
    return qsim.QuantumState("mixed", rho)


class TestRegisters:
    def test_ground_states(self):
        assert np.allclose(qsim.make_register(1).data, [1, 0])
        assert np.allclose(qsim.make_register(2).data, [1, 0, 0, 0])
        st = qsim.make_register(4, labels=("A1", "A2", "B3", "B4"))
        assert st.dim == 16
        assert st.data[0] == 1.0 and np.count_nonzero(st.data) == 1
        assert st.labels == ("A1", "A2", "B3", "B4")

    def test_size_limits(self):
        with pytest.raises(ValueError):
            qsim.make_register(0)
        with pytest.raises(ValueError):
            qsim.make_register(7)

    def test_product_state_order(self):
        # qubit 0 is the least significant index bit
        st = qsim.product_state(qsim.KET1, qsim.KET0)
        assert np.allclose(st.data, [0, 1, 0, 0])


class TestGates:
    def test_x_flip(self):
        st = qsim.apply_gate(qsim.make_register(1), qsim.gate("X", 0))
        assert np.allclose(st.data, [0, 1])

    def test_cnot_bell_creation(self):
        st = qsim.product_state(qsim.KET_PLUS, qsim.KET0)
        st = qsim.apply_gate(st, qsim.gate("CNOT", 0, 1))
        assert qsim.phase_invariant_distance(st, qsim.bell_state("phi_plus")) < 1e-12

    def test_phase_z_eigenphase(self):
        one = qsim.pure_state(qsim.KET1)
        out = qsim.apply_gate(one, qsim.gate("PhaseZ", 0, phi=math.pi / 2))
        assert np.allclose(out.data, [0, np.exp(1j * math.pi / 2)])
        zero = qsim.make_register(1)
        out0 = qsim.apply_gate(zero, qsim.gate("PhaseZ", 0, phi=math.pi / 2))
        assert np.allclose(out0.data, [1, 0])

    def test_rejects_non_unitary(self):
        bad = np.array([[1, 1], [0, 1]], dtype=complex)
        with pytest.raises(ValueError):
            qsim.apply_gate(qsim.make_register(2),
                            qsim.gate("ControlledU", 0, 1, unitary=bad))

    def test_rejects_index_collision(self):
        with pytest.raises(ValueError):
            qsim.apply_gate(qsim.make_register(2), qsim.gate("CNOT", 1, 1))

    def test_norm_preserved_random_circuits(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            st = rand_pure(rng, 3)
            for _ in range(6):
                u = unitary_group.rvs(2, random_state=rng)
                q = int(rng.integers(3))
                st = qsim.apply_unitary(st, u, (q,))
            assert abs(np.vdot(st.data, st.data).real - 1.0) < 1e-12

    def test_gate_inverse_roundtrip(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            st = rand_pure(rng, 2)
            u = unitary_group.rvs(4, random_state=rng)
            fwd = qsim.apply_unitary(st, u, (0, 1))
            back = qsim.apply_unitary(fwd, u.conj().T, (0, 1))
            assert np.max(np.abs(back.data - st.data)) < 1e-10

    def test_gate_inverse_roundtrip_mixed(self):
        rng = np.random.default_rng(6)
        rho = rand_density(rng, 2)
        u = unitary_group.rvs(4, random_state=rng)
        fwd = qsim.apply_unitary(rho, u, (0, 1))
        back = qsim.apply_unitary(fwd, u.conj().T, (0, 1))
        assert np.max(np.abs(back.data - rho.data)) < 1e-10
        assert abs(np.trace(fwd.data).real - 1.0) < 1e-12


class TestMeasurement:
    def test_deterministic_outcomes(self):
        rng = np.random.default_rng(0)
        one = qsim.pure_state(qsim.KET1)
        outcome, _ = qsim.measure(one, qsim.MeasBasis("Z", 0), rng)
        assert outcome == 1
        plus = qsim.pure_state(qsim.KET_PLUS)
        outcome, post = qsim.measure(plus, qsim.MeasBasis("X", 0), rng)
        assert outcome == 0
        assert np.allclose(post.data, qsim.KET_PLUS)

    def test_bell_collapse(self):
        rng = np.random.default_rng(3)
        bell = qsim.bell_state("phi_plus")
        outcome, post = qsim.measure(bell, qsim.MeasBasis("Z", 0), rng, force=0)
        assert outcome == 0
        assert np.allclose(post.data, [1, 0, 0, 0])

    def test_forced_zero_probability_branch(self):
        rng = np.random.default_rng(0)
        one = qsim.pure_state(qsim.KET1)
        with pytest.raises(ValueError):
            qsim.measure(one, qsim.MeasBasis("Z", 0), rng, force=0)

    def test_outcome_probabilities_plus(self):
        probs = qsim.outcome_probabilities(
            qsim.pure_state(qsim.KET_PLUS), [qsim.MeasBasis("Z", 0)])
        assert probs == pytest.approx({"0": 0.5, "1": 0.5}, abs=1e-12)

    def test_outcome_probabilities_bell_zz(self):
        probs = qsim.outcome_probabilities(
            qsim.bell_state("phi_plus"),
            [qsim.MeasBasis("Z", 0), qsim.MeasBasis("Z", 1)])
        assert probs["00"] == pytest.approx(0.5, abs=1e-12)
        assert probs["11"] == pytest.approx(0.5, abs=1e-12)
        assert probs["01"] == pytest.approx(0.0, abs=1e-12)

    def test_outcome_probabilities_bell_xx(self):
        # independent oracle: expand phi+ in the X eigenbasis by explicit
        # projection amplitudes <s1 s2|phi+>
        bell = qsim.bell_state("phi_plus").data
        expected = {}
        kets = {"+": qsim.KET_PLUS, "-": qsim.KET_MINUS}
        for s1 in "+-":
            for s2 in "+-":
                basis_vec = np.kron(kets[s2], kets[s1])  # qubit 0 least significant
                expected[s1 + s2] = abs(np.vdot(basis_vec, bell)) ** 2
        assert expected["++"] == pytest.approx(0.5, abs=1e-12)
        assert expected["--"] == pytest.approx(0.5, abs=1e-12)
        probs = qsim.outcome_probabilities(
            qsim.bell_state("phi_plus"),
            [qsim.MeasBasis("X", 0), qsim.MeasBasis("X", 1)])
        for key, val in expected.items():
            assert probs[key] == pytest.approx(val, abs=1e-12)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(17)
        st = rand_density(rng, 3)
        probs = qsim.outcome_probabilities(
            st, [qsim.MeasBasis("Z", 0), qsim.MeasBasis("X", 2)])
        assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)

    def test_empirical_frequencies_match(self):
        # >= 1e5 shots within 4 binomial standard deviations
        shots = 100_000
        rng = np.random.default_rng(123)
        state = qsim.pure_state([0.6, 0.8])
        p = qsim.outcome_probabilities(state, [qsim.MeasBasis("Z", 0)])
        hits = sum(qsim.measure(state, qsim.MeasBasis("Z", 0), rng)[0]
                   for _ in range(shots))
        sigma = math.sqrt(p["1"] * p["0"] / shots)
        assert abs(hits / shots - p["1"]) < 4 * sigma


class TestChannels:
    def test_depolarizing_zero_is_identity(self):
        rng = np.random.default_rng(2)
        rho = rand_density(rng, 2)
        out = qsim.apply_channel(rho, "depolarizing", 0.0, (0, 1))
        assert np.max(np.abs(out.data - rho.data)) < 1e-14

    def test_white_admixture_full(self):
        rho = qsim.pure_state(qsim.KET1).as_mixed()
        out = qsim.apply_channel(rho, "white_admixture", 1.0, (0,))
        assert np.allclose(out.data, np.eye(2) / 2)

    def test_white_admixture_bell_fidelity(self):
        lam = 1.0 / (1.0 + 12.6)
        bell = qsim.bell_state("phi_plus")
        out = qsim.apply_channel(bell, "white_admixture", lam, (0, 1))
        expected = (1 - lam) + lam / 4
        assert qsim.fidelity(out, bell) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.9449, abs=5e-4)

    def test_white_admixture_partial_targets(self):
        # admixing only qubit 0 of |00> leaves qubit 1 pure
        st = qsim.make_register(2)
        out = qsim.apply_channel(st, "white_admixture", 1.0, (0,))
        reduced1 = qsim.partial_trace(out, (1,))
        reduced0 = qsim.partial_trace(out, (0,))
        assert np.allclose(reduced1.data, [[1, 0], [0, 0]])
        assert np.allclose(reduced0.data, np.eye(2) / 2)

    def test_channels_preserve_trace_and_positivity(self):
        rng = np.random.default_rng(9)
        for channel in ("depolarizing", "dephasing", "white_admixture"):
            for p in (0.1, 0.5, 1.0):
                rho = rand_density(rng, 2)
                out = qsim.apply_channel(rho, channel, p, (0,))
                assert abs(np.trace(out.data).real - 1.0) < 1e-12
                assert np.linalg.eigvalsh(out.data).min() > -1e-10

    def test_parameter_range(self):
        with pytest.raises(ValueError):
            qsim.apply_channel(qsim.make_register(1), "dephasing", 1.5, (0,))

    def test_pure_state_promotes(self):
        st = qsim.make_register(1)
        out = qsim.apply_channel(st, "dephasing", 0.3, (0,))
        assert out.kind == "mixed"


class TestPartialTrace:
    def test_bell_reduces_to_mixed(self):
        red = qsim.partial_trace(qsim.bell_state("phi_plus"), (0,))
        assert np.allclose(red.data, np.eye(2) / 2)

    def test_keep_everything(self):
        rng = np.random.default_rng(1)
        rho = rand_density(rng, 2)
        out = qsim.partial_trace(rho, (0, 1))
        assert np.max(np.abs(out.data - rho.data)) < 1e-14

    def test_product_factor(self):
        st = qsim.product_state(qsim.KET0, qsim.KET_PLUS)
        red = qsim.partial_trace(st, (0,))
        assert np.allclose(red.data, [[1, 0], [0, 0]])

    def test_empty_keep_rejected(self):
        with pytest.raises(ValueError):
            qsim.partial_trace(qsim.bell_state("phi_plus"), ())

    def test_keep_order_matters(self):
        st = qsim.product_state(qsim.KET0, qsim.KET1)
        swapped = qsim.partial_trace(st, (1, 0))
        assert np.allclose(np.diag(swapped.data), [0, 1, 0, 0])  # |q1 q0> = |0 1>


class TestFidelityExpectation:
    def test_self_fidelity(self):
        rng = np.random.default_rng(4)
        psi = rand_pure(rng, 2)
        assert qsim.fidelity(psi.as_mixed(), psi) == pytest.approx(1.0, abs=1e-12)

    def test_maximally_mixed(self):
        rho = qsim.QuantumState("mixed", np.eye(4, dtype=complex) / 4)
        assert qsim.fidelity(rho, qsim.bell_state("psi_minus")) == pytest.approx(0.25)

    def test_reference_matrix_fidelity(self):
        ref = analysis.ingest_reference()
        rho = qsim.QuantumState("mixed", ref.bell_matrix("phi_plus").astype(complex))
        f = qsim.fidelity(rho, qsim.bell_state("phi_plus"))
        assert f == pytest.approx(0.812, abs=0.002)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            qsim.fidelity(qsim.make_register(1), qsim.bell_state("phi_plus"))

    def test_pauli_expectations(self):
        phi = qsim.bell_state("phi_plus")
        psi = qsim.bell_state("psi_plus")
        assert qsim.expectation(phi, {0: "X", 1: "X"}) == pytest.approx(1.0)
        assert qsim.expectation(phi, {0: "Y", 1: "Y"}) == pytest.approx(-1.0)
        assert qsim.expectation(psi, {0: "Z", 1: "Z"}) == pytest.approx(-1.0)

    def test_expectation_matches_trace_formula(self):
        rng = np.random.default_rng(21)
        rho = rand_density(rng, 2)
        direct = np.trace(rho.data @ np.kron(qsim.Y, qsim.X)).real  # q1=Y, q0=X
        assert qsim.expectation(rho, {0: "X", 1: "Y"}) == pytest.approx(direct, abs=1e-12)


class TestPhaseInvariance:
    def test_global_phase_ignored(self):
        rng = np.random.default_rng(8)
        psi = rand_pure(rng, 2)
        shifted = qsim.QuantumState("pure", psi.data * np.exp(0.7j))
        assert qsim.phase_invariant_distance(psi, shifted) < 1e-12

    def test_distinct_states_far(self):
        a = qsim.make_register(1)
        b = qsim.pure_state(qsim.KET1)
        assert qsim.phase_invariant_distance(a, b) > 0.5
