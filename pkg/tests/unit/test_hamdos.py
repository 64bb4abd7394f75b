import json
import pytest
import numpy as np
from pathlib import Path
from structlog.testing import capture_logs

from src.core.bqpcount import accepting_dimension
from src.core.errors import InputError, PreconditionError
from src.core.hamdos import (
    LocalTerm, LocalHamiltonian, assemble, spectrum, histogram, count_dos, count_dos_spectrum,
    lh_to_dos_query, ground_report, count_ground, quadratic_shift, verify_shift, shift_report,
    dos_thresholds, dos_acceptance_operator, dos_verifier_from_shift,
)
from src.core.models import ComplexMatrix, DosQuery, HamiltonianDocument
from tests.fixtures.sample_data import PAULI_X, PAULI_Z, random_two_local

EXAMPLES = Path(__file__).parent.parent.parent / "docs" / "examples"


class TestLocalHamiltonian:

    def test_assemble_sum_z(self, sum_z3):
        """Test the spectrum of Z_0 + Z_1 + Z_2."""
        assert np.allclose(spectrum(sum_z3), [-3, -1, -1, -1, 1, 1, 1, 3])

    def test_assemble_matches_kronecker(self, ising3):
        """Test the assembled Ising chain against explicit Kronecker products."""
        eye = np.eye(2)
        expected = (np.kron(eye, np.kron(PAULI_Z, PAULI_Z)) + np.kron(np.kron(PAULI_Z, PAULI_Z), eye)
                    + 0.5 * (np.kron(eye, np.kron(eye, PAULI_X)) + np.kron(eye, np.kron(PAULI_X, eye))
                             + np.kron(PAULI_X, np.kron(eye, eye))))
        assert np.allclose(assemble(ising3), expected)

    @pytest.mark.parametrize("qubits", [2, 3, 4])
    def test_assemble_linear(self, qubits):
        """Test that assembling the union of two term lists adds the assembled matrices."""
        for seed in range(5):
            first = random_two_local(qubits, seed=seed)
            second = random_two_local(qubits, seed=100 + seed)
            union = LocalHamiltonian(site_dims=first.site_dims, terms=first.terms + second.terms)
            assert np.allclose(assemble(union), assemble(first) + assemble(second), atol=1e-12)

    def test_k(self, sum_z3, ising3):
        """Test the locality of the fixtures."""
        assert sum_z3.k == 1
        assert ising3.k == 2

    def test_unsorted_sites(self):
        """Test rejection of unsorted term sites."""
        with pytest.raises(InputError, match="sorted"):
            LocalTerm(sites=(1, 0), matrix=np.eye(4))

    def test_non_hermitian_term(self):
        """Test rejection of a non-Hermitian term."""
        with pytest.raises(InputError, match="not Hermitian"):
            LocalTerm(sites=(0,), matrix=np.array([[0, 1], [0, 0]]))

    def test_site_out_of_range(self):
        """Test rejection of terms beyond the last site."""
        with pytest.raises(InputError, match="only 2 sites"):
            LocalHamiltonian(site_dims=(2, 2), terms=(LocalTerm(sites=(2,), matrix=PAULI_Z),))

    def test_term_shape(self):
        """Test rejection of a term matrix of the wrong size for its sites."""
        with pytest.raises(InputError, match="needs a 3x3"):
            LocalHamiltonian(site_dims=(2, 3), terms=(LocalTerm(sites=(1,), matrix=PAULI_Z),))

    def test_relabel_mixed_radix(self):
        """Test that relabeling reorders local factors and site dimensions."""
        clock = np.diag([0.0, 1.0, 2.0])
        h = LocalHamiltonian(site_dims=(2, 3), terms=(LocalTerm(sites=(0, 1), matrix=np.kron(clock, PAULI_Z)),))
        swapped = h.relabel([1, 0])

        assert swapped.site_dims == (3, 2)
        assert np.allclose(swapped.terms[0].matrix, np.kron(PAULI_Z, clock))
        assert np.allclose(spectrum(swapped), spectrum(h))

    def test_relabel_preserves_spectrum(self):
        """Test that a random relabeling keeps the spectrum."""
        h = random_two_local(4, seed=3)
        assert np.allclose(spectrum(h.relabel([2, 0, 3, 1])), spectrum(h), atol=1e-10)

    def test_relabel_rejects_non_permutation(self, sum_z3):
        """Test rejection of an invalid permutation."""
        with pytest.raises(InputError, match="Not a permutation"):
            sum_z3.relabel([0, 0, 1])

    def test_document_example(self):
        """Test loading the shipped Hamiltonian document."""
        doc = HamiltonianDocument(**json.loads((EXAMPLES / "sumz3.json").read_text()))
        h = LocalHamiltonian.from_document(doc)

        assert h.site_dims == (2, 2, 2)
        assert np.allclose(spectrum(h), [-3, -1, -1, -1, 1, 1, 1, 3])
        assert h.to_document().site_dims == [2, 2, 2]

    def test_document_strict_hermitian(self):
        """Test that document terms use the strict tolerance while direct terms use the general one."""
        matrix = PAULI_X.copy()
        matrix[0, 1] += 1e-11
        LocalTerm(sites=(0,), matrix=matrix)

        doc = HamiltonianDocument(site_dims=[2], terms=[{'sites': [0], 'matrix': ComplexMatrix.from_array(matrix)}])
        with pytest.raises(InputError, match="term 0 is not Hermitian"):
            LocalHamiltonian.from_document(doc)

    def test_dense_cap(self, sum_z3, override_config, tmp_path):
        """Test rejection of Hamiltonians above the dense cap."""
        path = tmp_path / "small.yaml"
        path.write_text("caps:\n  dense_dim: 4\n")
        override_config(config_path=path)
        with pytest.raises(InputError, match="dense cap"):
            assemble(sum_z3)

    def test_large_term_warning(self):
        """Test the warning for terms of norm above 1."""
        h = LocalHamiltonian(site_dims=(2,), terms=(LocalTerm(sites=(0,), matrix=2 * PAULI_Z),))
        with capture_logs() as logs:
            assemble(h)
        assert any(entry['event'] == "local term norm exceeds 1" for entry in logs)


class TestDensityOfStates:

    def test_window_count(self, sum_z3):
        """Test counting eigenvalues in [-2, 2]."""
        report = count_dos(sum_z3, DosQuery(e1=-2.0, e2=2.0, delta=1.0))

        assert report.count == 6
        assert report.ok
        assert report.dim == 8
        assert sum(report.histogram.counts) == 8

    def test_strict_violation(self, sum_z3):
        """Test that strict mode flags eigenvalues inside a grace interval."""
        report = count_dos(sum_z3, DosQuery(e1=-1.2, e2=2.0, delta=1.0))

        assert not report.ok
        assert report.grace_violations == [pytest.approx(-1.0)] * 3
        assert report.count_range is None

    def test_grace_range(self, sum_z3):
        """Test the grace-mode count range."""
        report = count_dos(sum_z3, DosQuery(e1=-1.2, e2=2.0, delta=1.0), grace_mode=True)

        assert report.ok
        assert report.count == 6
        assert report.count_range == (3, 6)

    def test_closed_endpoints(self):
        """Test that eigenvalues on the window ends are counted."""
        report = count_dos_spectrum(np.array([-1.0, 0.0, 1.0, 5.0]), DosQuery(e1=-1.0, e2=1.0, delta=0.5), grace_mode=True)
        assert report.count == 3

    def test_histogram_bins(self):
        """Test equal-width histogram binning."""
        result = histogram([0.0, 1.0, 2.0, 3.0], bins=3)
        assert result.counts == [1, 1, 2]
        assert result.bin_edges == pytest.approx([0.0, 1.0, 2.0, 3.0])

    def test_histogram_default_bins(self):
        """Test the configured default bin count."""
        assert len(histogram([0.0, 1.0]).counts) == 20


class TestGroundSpace:

    def test_lh_query(self):
        """Test the DOS window derived from (e0, e1, e2)."""
        query = lh_to_dos_query(0.0, 1.0, 2.0)
        assert (query.e1, query.e2, query.delta) == (-0.5, 1.5, 1.0)

    def test_lh_query_degenerate_window(self):
        """Test the widened window when e1 equals e0."""
        query = lh_to_dos_query(0.0, 0.0, 1.0)
        assert query.e1 == pytest.approx(-0.75)
        assert query.e2 - query.e1 > query.delta

    def test_lh_query_energy_order(self):
        """Test rejection of unordered energies."""
        with pytest.raises(InputError):
            lh_to_dos_query(1.0, 0.0, 2.0)

    def test_ground_state(self, sum_z3):
        """Test the unique ground state of sum Z."""
        report = ground_report(sum_z3, -3.0, -3.0, -1.0)

        assert report.count == 1
        assert report.via_dos == 1
        assert report.agree

    def test_low_energy_space(self, sum_z3):
        """Test counting the four lowest states."""
        assert count_ground(sum_z3, -3.0, -1.0, 1.0) == 4

    def test_below_e0(self, sum_z3):
        """Test the precondition that no eigenvalue lies below e0."""
        with pytest.raises(PreconditionError) as excinfo:
            ground_report(sum_z3, -2.0, -1.0, 1.0)
        assert excinfo.value.witnesses == [pytest.approx(-3.0)]

    def test_inside_gap(self, sum_z3):
        """Test the precondition that (e1, e2) is empty."""
        with pytest.raises(PreconditionError) as excinfo:
            ground_report(sum_z3, -3.0, -2.0, 0.0)
        assert len(excinfo.value.witnesses) == 3


class TestQuadraticShift:

    def test_shift_spectrum(self, sum_z3):
        """Test that H' has the mapped spectrum of H."""
        shift = quadratic_shift(sum_z3, DosQuery(e1=-2.0, e2=2.0, delta=1.0))

        assert shift.m_terms == 10
        assert shift.nu == pytest.approx(1 / 1600)
        assert verify_shift(sum_z3, shift)
        assert np.allclose(spectrum(shift.h_prime), np.sort(shift.map_energy(spectrum(sum_z3))))

    def test_threshold_signs(self, sum_z3):
        """Test A < 0 < B and a > 1/2 > b."""
        shift = quadratic_shift(sum_z3, DosQuery(e1=-2.0, e2=2.0, delta=1.0))
        a, b = dos_thresholds(shift.m_terms, shift.a_neg, shift.b_pos)

        assert shift.a_neg < 0 < shift.b_pos
        assert a > 0.5 > b

    def test_shift_report(self, sum_z3):
        """Test the shift report fields."""
        shift = quadratic_shift(sum_z3, DosQuery(e1=-2.0, e2=2.0, delta=1.0))
        report = shift_report(sum_z3, shift)

        assert report.k_prime == 2
        assert report.spectrum_ok
        assert report.m_terms == 10

    def test_random_shift(self):
        """Test the shift on a random two-local chain."""
        h = random_two_local(3, seed=12)
        eigenvalues = spectrum(h)
        query = DosQuery(e1=float(eigenvalues[0]) - 0.1, e2=float(eigenvalues[4]), delta=0.05)
        shift = quadratic_shift(h, query)

        assert shift.h_prime.k == 3
        assert verify_shift(h, shift)

    def test_dos_verifier_counts_window(self, sum_z3):
        """Test that the one-term-sampling verifier accepts the window states."""
        shift = quadratic_shift(sum_z3, DosQuery(e1=-2.0, e2=2.0, delta=1.0))
        v = dos_verifier_from_shift(shift)
        report = accepting_dimension(v)

        assert report.promise_ok
        assert report.dim_accept == 6

    def test_acceptance_operator_range(self, sum_z3):
        """Test that the acceptance operator lies between 0 and 1."""
        shift = quadratic_shift(sum_z3, DosQuery(e1=-2.0, e2=2.0, delta=1.0))
        eigenvalues = np.linalg.eigvalsh(dos_acceptance_operator(shift.h_prime))
        assert eigenvalues[0] >= 0.0
        assert eigenvalues[-1] <= 1.0

    def test_acceptance_operator_needs_terms(self, sum_z3):
        """Test rejection of a non-positive term count."""
        with pytest.raises(InputError):
            dos_acceptance_operator(sum_z3, m_terms=0)
