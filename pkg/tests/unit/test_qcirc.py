import pytest
import numpy as np
from pathlib import Path

from src.core.errors import CircuitParseError, InputError
from src.core.qcirc import (
    Circuit, StateVector, named_gate, raw_gate, apply_circuit, evolve_block, omega,
    circuit_unitary, prefix_unitaries, realify, serialize_circuit, parse_circuit,
    read_circuit, write_circuit, merge_gates, plant_verifier, plant_to_length, random_circuit,
)
from src.core.numkit import eigvals_hermitian
from tests.fixtures.sample_data import identity_circuit, single_gate_circuit

EXAMPLES = Path(__file__).parent.parent.parent / "docs" / "examples"


class TestGates:

    def test_named_gate_arity(self):
        """Test that named gates check their target count."""
        with pytest.raises(InputError, match="takes 2 target"):
            named_gate('CNOT', [0])

    def test_unknown_gate(self):
        """Test rejection of unknown gate names."""
        with pytest.raises(InputError, match="Unknown gate"):
            named_gate('CCX', [0, 1, 2])

    def test_repeated_targets(self):
        """Test rejection of repeated targets."""
        with pytest.raises(InputError, match="repeated"):
            named_gate('SWAP', [1, 1])

    def test_non_unitary_raw_gate(self):
        """Test rejection of a non-unitary raw matrix."""
        with pytest.raises(InputError, match="not unitary"):
            raw_gate([0], np.array([[1, 0], [0, 2]]))

    def test_is_real(self):
        """Test real-gate detection."""
        assert named_gate('H', [0]).is_real
        assert not named_gate('S', [0]).is_real


class TestCircuit:

    def test_validation(self):
        """Test register bounds."""
        with pytest.raises(InputError, match="Input register"):
            Circuit(m=1, n=2, gates=(named_gate('I', [0]),))
        with pytest.raises(InputError, match="out of range"):
            Circuit(m=1, n=1, gates=(named_gate('X', [1]),))
        with pytest.raises(InputError, match="no gates"):
            Circuit(m=1, n=1, gates=())

    def test_x_flips_qubit(self):
        """Test that X on qubit 1 maps |00> to |10> (index 2)."""
        c = single_gate_circuit('X', [1], 2, 2)
        out = apply_circuit(c, StateVector.basis(2, 0))
        assert np.allclose(out.amplitudes, [0, 0, 1, 0])

    def test_cnot_convention(self):
        """Test that the first CNOT target is the control."""
        c = single_gate_circuit('CNOT', [0, 1], 2, 2)
        out = apply_circuit(c, StateVector.basis(2, 1))
        assert np.allclose(out.amplitudes, [0, 0, 0, 1])
        unchanged = apply_circuit(c, StateVector.basis(2, 2))
        assert np.allclose(unchanged.amplitudes, [0, 0, 1, 0])

    def test_norm_preserved(self, rng):
        """Test that random circuits keep states normalized."""
        c = random_circuit(3, 2, 8, seed=3)
        state = rng.normal(size=8) + 1j * rng.normal(size=8)
        state /= np.linalg.norm(state)
        assert apply_circuit(c, StateVector(m=3, amplitudes=state)).norm == pytest.approx(1.0)

    def test_evolve_matches_dense_unitary(self):
        """Test the gather kernel against Kronecker-lifted gates."""
        c = random_circuit(3, 1, 10, seed=11)
        assert np.allclose(evolve_block(c, np.eye(8, dtype=complex)), circuit_unitary(c), atol=1e-12)

    def test_partial_evolution(self):
        """Test evolving only the first steps."""
        c = random_circuit(2, 1, 5, seed=4)
        prefixes = prefix_unitaries(c)

        assert len(prefixes) == 6
        assert np.allclose(prefixes[0], np.eye(4))
        assert np.allclose(evolve_block(c, np.eye(4, dtype=complex), steps=3), prefixes[3], atol=1e-12)

    def test_digest_stable(self):
        """Test that equal circuits share a digest."""
        assert random_circuit(2, 1, 4, seed=5).digest() == random_circuit(2, 1, 4, seed=5).digest()
        assert random_circuit(2, 1, 4, seed=5).digest() != random_circuit(2, 1, 4, seed=6).digest()

    def test_state_size_mismatch(self):
        """Test rejection of a state on the wrong qubit count."""
        with pytest.raises(InputError):
            apply_circuit(identity_circuit(2, 1), StateVector.basis(3, 0))


class TestOmega:

    def test_identity_circuit(self):
        """Test Omega for U = 1: projector onto inputs with qubit 0 set."""
        assert np.allclose(omega(identity_circuit(2, 2)), np.diag([0, 1, 0, 1]))

    def test_flip_output(self):
        """Test Omega after flipping the output qubit."""
        assert np.allclose(omega(single_gate_circuit('X', [0], 2, 2)), np.diag([1, 0, 1, 0]))

    def test_accept_bit_zero(self):
        """Test counting |0> on the output as acceptance."""
        c = identity_circuit(2, 2)
        assert np.allclose(omega(c, 0) + omega(c, 1), np.eye(4))

    def test_superposed_output(self):
        """Test Omega when the output qubit ends in superposition."""
        c = single_gate_circuit('H', [0], 2, 1)
        assert np.allclose(omega(c), [[0.5, -0.5], [-0.5, 0.5]])

    def test_spectrum_in_unit_interval(self):
        """Test 0 <= Omega <= 1 for random circuits."""
        for seed in range(5):
            eigenvalues = eigvals_hermitian(omega(random_circuit(3, 2, 6, seed=seed)))
            assert eigenvalues[0] >= -1e-12
            assert eigenvalues[-1] <= 1 + 1e-12

    def test_example_circuit(self):
        """Test the shipped copy-bit example."""
        c = read_circuit(EXAMPLES / "copy_bit.qc")
        assert np.allclose(omega(c), np.diag([0, 1, 0, 1]))


class TestRealify:

    def test_real_circuit_unchanged_gates(self):
        """Test that real gates survive unchanged on one extra qubit."""
        c = random_circuit(2, 1, 4, seed=2, gate_set='real')
        real = realify(c)

        assert real.m == 3
        assert real.gates == c.gates

    def test_omega_is_real_part(self):
        """Test that the realified verifier operator is Re(Omega)."""
        c = Circuit(m=2, n=1, gates=(named_gate('H', [0]), named_gate('S', [0]), named_gate('T', [1]),
                                     named_gate('H', [0]), named_gate('CNOT', [1, 0])))
        real = realify(c)

        assert real.is_real
        assert np.allclose(omega(real), omega(c).real, atol=1e-12)
        assert np.trace(omega(real)).real == pytest.approx(np.trace(omega(c)).real)

    def test_realified_gate_block_form(self):
        """Test the [[A, -B], [B, A]] layout with the extra qubit most significant."""
        real = realify(single_gate_circuit('S', [0], 1, 1))
        gate = real.gates[0]

        assert gate.targets == (0, 1)
        expected = np.array([[1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0]])
        assert np.allclose(gate.matrix, expected)


class TestTextFormat:

    def test_round_trip(self):
        """Test that serialized circuits parse back to the same circuit."""
        c = random_circuit(3, 2, 12, seed=8)
        assert parse_circuit(serialize_circuit(c)) == c

    def test_comments_and_blank_lines(self):
        """Test that comments and blank lines are ignored."""
        text = "# header comment\n\nqubits 2 inputs 1  # trailing\nG H 0\n\nG CNOT 0 1\n"
        c = parse_circuit(text)
        assert c.T == 2
        assert c.gates[1].targets == (0, 1)

    def test_missing_header(self):
        """Test error for a gate line before the header."""
        with pytest.raises(CircuitParseError) as excinfo:
            parse_circuit("G X 0\n")
        assert excinfo.value.line_number == 1

    def test_unknown_gate_line_number(self):
        """Test that errors report the offending line."""
        with pytest.raises(CircuitParseError, match="line 3") as excinfo:
            parse_circuit("qubits 2 inputs 1\nG X 0\nG FOO 1\n")
        assert excinfo.value.line_number == 3

    def test_target_out_of_range(self):
        """Test rejection of targets outside the register."""
        with pytest.raises(CircuitParseError, match="out of range"):
            parse_circuit("qubits 2 inputs 1\nG X 2\n")

    def test_raw_gate_value_count(self):
        """Test rejection of a raw gate with too few entries."""
        with pytest.raises(CircuitParseError, match="needs 8 floats"):
            parse_circuit("qubits 1 inputs 1\nU 1 0 1 0 0 0\n")

    def test_raw_gate_not_unitary(self):
        """Test rejection of a non-unitary raw gate."""
        with pytest.raises(CircuitParseError, match="not unitary"):
            parse_circuit("qubits 1 inputs 1\nU 1 0 1 0 0 0 0 0 2 0\n")

    def test_raw_gate_arity_cap(self):
        """Test rejection of raw gates above the arity cap."""
        with pytest.raises(CircuitParseError, match="arity"):
            parse_circuit("qubits 4 inputs 1\nU 4 0 1 2 3\n")

    def test_empty_circuit(self):
        """Test rejection of a header with no gates."""
        with pytest.raises(CircuitParseError, match="no gates"):
            parse_circuit("qubits 1 inputs 1\n")

    def test_write_and_read(self, tmp_path):
        """Test writing a circuit file into a new directory."""
        c = random_circuit(2, 1, 3, seed=1)
        path = tmp_path / "nested" / "c.qc"
        write_circuit(c, path)
        assert read_circuit(path) == c

    def test_missing_file(self, tmp_path):
        """Test error for a missing circuit file."""
        with pytest.raises(InputError, match="not found"):
            read_circuit(tmp_path / "absent.qc")


class TestGenerators:

    def test_merge_preserves_product(self):
        """Test that fusing gates keeps the overall unitary."""
        c = random_circuit(3, 1, 12, seed=21)
        merged = Circuit(m=3, n=1, gates=tuple(merge_gates(c.gates, 3)))

        assert merged.T <= c.T
        assert np.allclose(circuit_unitary(merged), circuit_unitary(c), atol=1e-10)
        assert all(g.arity <= 3 for g in merged.gates)

    def test_merge_keeps_isolated_names(self):
        """Test that a gate fused with nothing keeps its name."""
        gates = [named_gate('CNOT', [0, 1]), named_gate('CNOT', [2, 3])]
        merged = merge_gates(gates, 2)
        assert [g.name for g in merged] == ['CNOT', 'CNOT']

    @pytest.mark.parametrize("n,d", [(1, 0), (1, 1), (2, 1), (2, 3), (3, 5), (3, 8)])
    def test_planted_spectrum(self, n, d):
        """Test that planted verifiers have exactly d accepting eigenvalues."""
        c, planted = plant_verifier(n, d, 0, 0.0, seed=13)
        eigenvalues = eigvals_hermitian(omega(c))

        assert planted == d
        assert c.m == n + 1
        assert np.sum(eigenvalues > 0.5) == d
        assert np.allclose(eigenvalues[eigenvalues > 0.5], 1.0, atol=1e-9)
        assert np.allclose(eigenvalues[eigenvalues <= 0.5], 0.0, atol=1e-9)

    def test_planted_eps(self):
        """Test eigenvalues 1 - eps and eps under a nonzero error."""
        c, _ = plant_verifier(2, 1, 0, 0.1, seed=3)
        eigenvalues = eigvals_hermitian(omega(c))
        assert np.allclose(eigenvalues, [0.1, 0.1, 0.1, 0.9], atol=1e-9)

    def test_planted_padding(self):
        """Test that padding appends identity gates."""
        base, _ = plant_verifier(2, 2, 0, 0.0, seed=1)
        padded, _ = plant_verifier(2, 2, 3, 0.0, seed=1)

        assert padded.T == base.T + 3
        assert [g.name for g in padded.gates[-3:]] == ['I', 'I', 'I']
        assert np.allclose(omega(padded), omega(base))

    def test_plant_to_length(self):
        """Test padding to an exact total length."""
        base, _ = plant_verifier(3, 2, 0, 0.0, seed=5)
        c, _ = plant_to_length(3, 2, base.T + 2, 0.0, seed=5)
        assert c.T == base.T + 2

    def test_plant_to_length_too_short(self):
        """Test rejection of lengths below the minimal planted circuit."""
        base, _ = plant_verifier(3, 2, 0, 0.0, seed=5)
        with pytest.raises(InputError, match="minimal planted length"):
            plant_to_length(3, 2, base.T - 1, 0.0, seed=5)

    def test_plant_argument_checks(self):
        """Test rejection of out-of-range planting parameters."""
        with pytest.raises(InputError):
            plant_verifier(2, 5, 0, 0.0, seed=1)
        with pytest.raises(InputError):
            plant_verifier(2, 1, 0, 0.25, seed=1)
        with pytest.raises(InputError):
            plant_verifier(0, 0, 0, 0.0, seed=1)

    def test_plant_reproducible(self):
        """Test that seeds are reproducible."""
        first, _ = plant_verifier(3, 4, 0, 0.0, seed=1)
        again, _ = plant_verifier(3, 4, 0, 0.0, seed=1)
        assert first == again

    def test_real_gate_set(self):
        """Test that the real gate set yields real circuits."""
        assert random_circuit(3, 1, 20, seed=9, gate_set='real').is_real

    def test_dyadic_gate_set(self):
        """Test that dyadic circuits only contain 0, +-1 and +-1/2 entries."""
        c = random_circuit(3, 1, 20, seed=9, gate_set='dyadic')
        for gate in c.gates:
            values = np.abs(gate.matrix.ravel())
            assert np.all(np.isin(np.round(values, 12), [0.0, 0.5, 1.0]))
            assert gate.is_real

    def test_unknown_gate_set(self):
        """Test rejection of unknown gate sets."""
        with pytest.raises(InputError, match="gate_set"):
            random_circuit(2, 1, 3, seed=1, gate_set='clifford')
