import numpy as np
import pytest

from telegate import photon, qsim


class TestSourceParams:
    def test_defaults_valid(self):
        p = photon.SourceParams()
        assert p.vz == 0.990 and p.vx == 0.862

    def test_visibility_ordering_enforced(self):
        with pytest.raises(ValueError):
            photon.SourceParams(vz=0.5, vx=0.9)

    def test_range_checks(self):
        with pytest.raises(ValueError):
            photon.SourceParams(vz=1.2)
        with pytest.raises(ValueError):
            photon.SourceParams(heralding_efficiency=-0.1)


class TestEntangledPair:
    def test_ideal_pair_is_pure_bell(self):
        pair = photon.make_entangled_pair(photon.SourceParams(vz=1.0, vx=1.0))
        assert pair.kind == "pure"
        assert qsim.phase_invariant_distance(pair, qsim.bell_state("phi_plus")) < 1e-12

    def test_reference_visibilities(self):
        pair = photon.make_entangled_pair(photon.SourceParams())
        f = qsim.fidelity(pair, qsim.bell_state("phi_plus"))
        assert f == pytest.approx(photon.pair_fidelity(0.990, 0.862), abs=1e-12)
        assert f == pytest.approx(0.9285, abs=1e-12)
        assert abs(f - 0.926) < 0.003

    def test_classically_correlated_limit(self):
        pair = photon.make_entangled_pair(photon.SourceParams(vz=1.0, vx=0.0))
        expected = np.zeros((4, 4), dtype=complex)
        expected[0, 0] = expected[3, 3] = 0.5
        assert np.max(np.abs(pair.data - expected)) < 1e-12
        assert qsim.fidelity(pair, qsim.bell_state("phi_plus")) == pytest.approx(0.5)

    def test_fidelity_formula_on_grid(self):
        grid = (0.0, 0.25, 0.5, 0.75, 1.0)
        for vz in grid:
            for vx in grid:
                if vx > vz:
                    continue
                pair = photon.make_entangled_pair(photon.SourceParams(vz=vz, vx=vx))
                f = qsim.fidelity(pair, qsim.bell_state("phi_plus"))
                assert f == pytest.approx((1 + vz + 2 * vx) / 4, abs=1e-12)
                assert abs(np.trace(pair.density()).real - 1.0) < 1e-12
                assert np.linalg.eigvalsh(pair.density()).min() > -1e-12

    def test_visibilities_recovered_from_state(self):
        pair = photon.make_entangled_pair(photon.SourceParams(vz=0.9, vx=0.7))
        assert qsim.expectation(pair, {0: "Z", 1: "Z"}) == pytest.approx(0.9, abs=1e-12)
        assert qsim.expectation(pair, {0: "X", 1: "X"}) == pytest.approx(0.7, abs=1e-12)


class TestEncodingConversion:
    def photon_a(self, aux_dof="time_bin"):
        return photon.PhotonRef(node="A", wavelength_nm=580, pol_qubit=0,
                                aux_qubit=1, aux_dof=aux_dof)

    def test_time_bin_to_path_relabels_only(self):
        st = qsim.product_state(qsim.KET0, qsim.KET1)  # aux qubit in |L>
        out, ref2 = photon.convert_encoding(st, self.photon_a(), "time_bin", "path")
        assert np.array_equal(out.data, st.data)
        assert ref2.aux_dof == "path"
        # the bijection maps the |L> bit value 1 to path |1>
        assert photon.basis_symbol("time_bin", 1) == "L"
        assert photon.basis_symbol("path", 1) == "1"
        assert photon.basis_symbol("polarization", 1) == "V"

    def test_round_trip_identity(self):
        st = qsim.pure_state(np.array([0.5, 0.5, 0.5, 0.5]))
        ref = self.photon_a("path")
        mid, ref_mid = photon.convert_encoding(st, ref, "path", "polarization")
        back, ref_back = photon.convert_encoding(mid, ref_mid, "polarization", "path")
        assert np.array_equal(back.data, st.data)
        assert ref_back.aux_dof == "path"

    def test_rejects_wrong_source_dof(self):
        st = qsim.make_register(2)
        with pytest.raises(ValueError):
            photon.convert_encoding(st, self.photon_a("time_bin"), "path", "polarization")

    def test_rejects_identical_dofs(self):
        st = qsim.make_register(2)
        with pytest.raises(ValueError):
            photon.convert_encoding(st, self.photon_a(), "time_bin", "time_bin")

    def test_rejects_unknown_dof(self):
        st = qsim.make_register(2)
        with pytest.raises(ValueError):
            photon.convert_encoding(st, self.photon_a(), "time_bin", "frequency")

    def test_spectrum_unchanged(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        st = qsim.pure_state(v).as_mixed()
        out, _ = photon.convert_encoding(st, self.photon_a("path"), "path", "polarization")
        assert np.allclose(np.linalg.eigvalsh(out.data), np.linalg.eigvalsh(st.data))


class TestPhotonRef:
    def test_580_stays_at_node_a(self):
        with pytest.raises(ValueError):
            photon.PhotonRef(node="B", wavelength_nm=580, pol_qubit=0, aux_qubit=1)

    def test_telecom_photon_at_b(self):
        ref = photon.PhotonRef(node="B", wavelength_nm=1537, pol_qubit=0, aux_qubit=1)
        assert ref.node == "B"


class TestLocalGates:
    def photon_a(self):
        return photon.PhotonRef(node="A", wavelength_nm=580, pol_qubit=0,
                                aux_qubit=1, aux_dof="path")

    def photon_b(self):
        return photon.PhotonRef(node="B", wavelength_nm=1537, pol_qubit=0,
                                aux_qubit=1, aux_dof="path")

    def test_path_on_pol_truth_table(self):
        # register: qubit0 = polarization, qubit1 = path
        ref = self.photon_a()
        st = qsim.product_state(qsim.KET0, qsim.KET0)   # |H>, path 0
        out = photon.local_cnot_path_on_pol(st, ref)
        assert np.allclose(out.data, st.data)
        st = qsim.product_state(qsim.KET0, qsim.KET1)   # |H>, path 1
        out = photon.local_cnot_path_on_pol(st, ref)
        expected = qsim.product_state(qsim.KET1, qsim.KET1)
        assert qsim.phase_invariant_distance(out, expected) < 1e-12

    def test_path_on_pol_superposition(self):
        ref = self.photon_a()
        st = qsim.product_state(qsim.KET0, qsim.KET_PLUS)   # |H>, (|0>+|1>)/sqrt2
        out = photon.local_cnot_path_on_pol(st, ref)
        assert qsim.phase_invariant_distance(out, qsim.bell_state("phi_plus")) < 1e-12

    def test_pol_on_path_truth_table(self):
        ref = self.photon_b()
        st = qsim.product_state(qsim.KET0, qsim.KET0)   # |H>, path 0
        out = photon.local_cnot_pol_on_path(st, ref)
        assert np.allclose(out.data, st.data)
        st = qsim.product_state(qsim.KET1, qsim.KET0)   # |V>, path 0
        out = photon.local_cnot_pol_on_path(st, ref)
        expected = qsim.product_state(qsim.KET1, qsim.KET1)
        assert qsim.phase_invariant_distance(out, expected) < 1e-12

    def test_pol_on_path_plus_invariant(self):
        ref = self.photon_b()
        st = qsim.product_state(qsim.KET1, qsim.KET_PLUS)   # |V>, |+>
        out = photon.local_cnot_pol_on_path(st, ref)
        assert qsim.phase_invariant_distance(out, st) < 1e-12

    def test_cu_reduces_to_cnot(self):
        ref = self.photon_a()
        rng = np.random.default_rng(7)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        st = qsim.pure_state(v)
        via_cu = photon.local_cu_path_on_pol(st, ref, qsim.X)
        via_cnot = photon.local_cnot_path_on_pol(st, ref)
        assert qsim.phase_invariant_distance(via_cu, via_cnot) < 1e-12

    def test_cu_identity(self):
        ref = self.photon_a()
        st = qsim.pure_state(np.array([0.1, 0.2, 0.3, 0.4]))
        out = photon.local_cu_path_on_pol(st, ref, np.eye(2))
        assert qsim.phase_invariant_distance(out, st) < 1e-12

    def test_cu_phase_eigenstate(self):
        ref = self.photon_a()
        st = qsim.product_state(qsim.KET1, qsim.KET1)   # |V>, path 1
        out = photon.local_cu_path_on_pol(st, ref, qsim.phase_z(np.pi / 2))
        assert np.allclose(out.data, st.data * np.exp(1j * np.pi / 2))

    def test_gates_are_deterministic(self):
        ref = self.photon_a()
        rng = np.random.default_rng(1)
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        st = qsim.pure_state(v).as_mixed()
        out = photon.local_cnot_path_on_pol(st, ref)
        assert abs(np.trace(out.data).real - 1.0) < 1e-12
