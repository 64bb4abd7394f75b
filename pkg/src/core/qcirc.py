"""
Verifier circuits: representation, statevector simulation and the verifier operator.

Basis indexing is little-endian (qubit 0 is the least significant bit) and
qubit 0 is the measured output qubit. The input register is qubits 0..n-1,
the ancilla register n..m-1.
"""

import hashlib
from dataclasses import dataclass
from functools import lru_cache, reduce
from math import asin, sqrt
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .config import config_loader
from .errors import CircuitParseError, InputError
from .numkit import embed_operator, random_unitary
from .seeding import make_rng

logger = structlog.get_logger(__name__)

_SQRT2_INV = 1 / sqrt(2)

GATE_MATRICES: Dict[str, np.ndarray] = {
    'I': np.eye(2, dtype=complex),
    'X': np.array([[0, 1], [1, 0]], dtype=complex),
    'Y': np.array([[0, -1j], [1j, 0]], dtype=complex),
    'Z': np.array([[1, 0], [0, -1]], dtype=complex),
    'H': np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    'S': np.array([[1, 0], [0, 1j]], dtype=complex),
    'T': np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    # targets[0] is the local least significant bit: CNOT(control, target)
    'CNOT': np.eye(4, dtype=complex)[[0, 3, 2, 1]],
    'CZ': np.diag([1, 1, 1, -1]).astype(complex),
    'SWAP': np.eye(4, dtype=complex)[[0, 2, 1, 3]],
}

RAW_GATE = 'U'

# Tensor square of the real Hadamard, every entry +-1/2
_DYADIC_HH = 0.5 * np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]], dtype=complex)


def _ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True, eq=False)
class Gate:
    """A named or raw-unitary gate on an ordered tuple of qubits."""
    name: str
    targets: Tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        k = len(self.targets)
        if k == 0:
            raise InputError("Gate needs at least one target")
        if len(set(self.targets)) != k:
            raise InputError(f"Gate {self.name} has repeated targets {list(self.targets)}")
        if self.matrix.shape != (1 << k, 1 << k):
            raise InputError(f"Gate {self.name} on {k} qubits needs a {1 << k}x{1 << k} matrix, got {self.matrix.shape}")
        deviation = unitarity_deviation(self.matrix)
        if deviation > config_loader.get_tolerances().unitary:
            raise InputError(f"Gate {self.name} is not unitary: max |U^dagger U - 1| = {deviation:.3e}")

    @property
    def arity(self) -> int:
        return len(self.targets)

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.matrix.imag == 0))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Gate):
            return NotImplemented
        return (self.name == other.name and self.targets == other.targets
                and np.array_equal(self.matrix, other.matrix))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Circuit:
    """Gate list U_1..U_T on m qubits with an n-qubit input register."""
    m: int
    n: int
    gates: Tuple[Gate, ...]

    def __post_init__(self):
        if self.m < 1:
            raise InputError(f"Circuit needs at least one qubit, got m={self.m}")
        if not 0 <= self.n <= self.m:
            raise InputError(f"Input register size n={self.n} must lie in [0, m={self.m}]")
        if len(self.gates) < 1:
            raise InputError("Circuit has no gates")
        for position, gate in enumerate(self.gates, start=1):
            if max(gate.targets) >= self.m or min(gate.targets) < 0:
                raise InputError(f"Gate {position} ({gate.name}) targets {list(gate.targets)} out of range for m={self.m}")

    @property
    def T(self) -> int:
        return len(self.gates)

    @property
    def dim(self) -> int:
        return 1 << self.m

    @property
    def input_dim(self) -> int:
        return 1 << self.n

    @property
    def is_real(self) -> bool:
        return all(gate.is_real for gate in self.gates)

    def digest(self) -> str:
        """SHA-256 of the serialized circuit."""
        return hashlib.sha256(serialize_circuit(self).encode('utf-8')).hexdigest()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.m == other.m and self.n == other.n and self.gates == other.gates

    __hash__ = None


@dataclass(frozen=True, eq=False)
class StateVector:
    """2^m amplitudes, little-endian."""
    m: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.m,):
            raise InputError(f"State on {self.m} qubits needs {1 << self.m} amplitudes, got {self.amplitudes.shape}")

    @classmethod
    def basis(cls, m: int, index: int) -> 'StateVector':
        amplitudes = np.zeros(1 << m, dtype=complex)
        amplitudes[index] = 1.0
        return cls(m=m, amplitudes=amplitudes)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def unitarity_deviation(matrix: np.ndarray) -> float:
    """Max entrywise |U^dagger U - 1|."""
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def named_gate(name: str, targets: Sequence[int]) -> Gate:
    """Build a gate from the named gate set."""
    if name not in GATE_MATRICES:
        raise InputError(f"Unknown gate name '{name}'")
    matrix = GATE_MATRICES[name]
    expected = matrix.shape[0].bit_length() - 1
    if len(targets) != expected:
        raise InputError(f"Gate {name} takes {expected} target(s), got {len(targets)}")
    return Gate(name=name, targets=tuple(int(t) for t in targets), matrix=matrix)


def raw_gate(targets: Sequence[int], matrix: np.ndarray) -> Gate:
    return Gate(name=RAW_GATE, targets=tuple(int(t) for t in targets), matrix=np.asarray(matrix, dtype=complex))


# Simulation kernels

@lru_cache(maxsize=256)
def _gather_indices(m: int, targets: Tuple[int, ...]) -> np.ndarray:
    """Index table (base states with target bits cleared) x (local basis offsets)."""
    mask = sum(1 << t for t in targets)
    indices = np.arange(1 << m)
    base = indices[(indices & mask) == 0]
    offsets = np.array([
        sum(((local >> bit) & 1) << target for bit, target in enumerate(targets))
        for local in range(1 << len(targets))
    ], dtype=np.int64)
    return base[:, None] + offsets[None, :]


def _apply_gate(block: np.ndarray, gate: Gate, m: int) -> None:
    """Apply one gate in place to a (2^m, K) block of columns."""
    index = _gather_indices(m, gate.targets)
    amplitudes = block[index]
    block[index] = np.einsum('lj,bjk->blk', gate.matrix, amplitudes)


def evolve_block(c: Circuit, block: np.ndarray, steps: Optional[int] = None) -> np.ndarray:
    """U_steps...U_1 applied to each column of a copy of block."""
    if block.shape[0] != c.dim:
        raise InputError(f"Block has {block.shape[0]} rows, circuit acts on dimension {c.dim}")
    state = np.array(block, dtype=complex, copy=True)
    for gate in c.gates[:c.T if steps is None else steps]:
        _apply_gate(state, gate, c.m)
    return state


def apply_circuit(c: Circuit, s: StateVector) -> StateVector:
    """U_T...U_1 |s>."""
    if s.m != c.m:
        raise InputError(f"State has {s.m} qubits, circuit has {c.m}")
    evolved = evolve_block(c, s.amplitudes.reshape(-1, 1))
    return StateVector(m=c.m, amplitudes=evolved[:, 0])


def input_embedding(c: Circuit) -> np.ndarray:
    """Columns |i>_I |0>_A for every input basis state i."""
    block = np.zeros((c.dim, c.input_dim), dtype=complex)
    block[np.arange(c.input_dim), np.arange(c.input_dim)] = 1.0
    return block


def output_mask(m: int, accept_bit: int = 1) -> np.ndarray:
    """Boolean mask of basis states whose qubit 0 equals accept_bit."""
    if accept_bit not in (0, 1):
        raise InputError(f"accept bit must be 0 or 1, got {accept_bit}")
    return (np.arange(1 << m) & 1) == accept_bit


def omega(c: Circuit, accept_bit: int = 1) -> np.ndarray:
    """
    Verifier operator on the input register.

    Omega = (1 x <0|_A) U^dagger (|1><1|_1 x 1) U (1 x |0>_A), assembled
    from the simulated columns U|i>|0> projected onto the accepting output.

    Args:
        c: Verifier circuit
        accept_bit: Output value counted as acceptance

    Returns:
        2^n x 2^n Hermitian ndarray
    """
    caps = config_loader.get_caps()
    if c.m > caps.total_qubits + 1:
        raise InputError(f"Circuit on {c.m} qubits exceeds the cap of {caps.total_qubits} qubits")
    evolved = evolve_block(c, input_embedding(c))
    projected = evolved[output_mask(c.m, accept_bit)]
    operator = projected.conj().T @ projected
    logger.debug("assembled omega", n=c.n, m=c.m, T=c.T)
    return 0.5 * (operator + operator.conj().T)


def circuit_unitary(c: Circuit, steps: Optional[int] = None) -> np.ndarray:
    """Dense U_steps...U_1 from Kronecker-lifted gate matrices."""
    site_dims = [2] * c.m
    lifted = [embed_operator(site_dims, gate.targets, gate.matrix) for gate in c.gates[:c.T if steps is None else steps]]
    return reduce(lambda acc, u: u @ acc, lifted, np.eye(c.dim, dtype=complex))


def prefix_unitaries(c: Circuit) -> List[np.ndarray]:
    """[1, U_1, U_2 U_1, ..., U_T...U_1] as dense matrices."""
    site_dims = [2] * c.m
    current = np.eye(c.dim, dtype=complex)
    prefixes = [current]
    for gate in c.gates:
        current = embed_operator(site_dims, gate.targets, gate.matrix) @ current
        prefixes.append(current)
    return prefixes


def realify(c: Circuit) -> Circuit:
    """
    Rewrite a circuit with real gate matrices on one extra qubit.

    The amplitude x + iy is stored as x|r=0> + y|r=1> on qubit r = m, which
    joins the ancilla register. A gate A + iB becomes [[A, -B], [B, A]] on
    its targets plus r (r most significant); real gates are kept as they are.
    """
    r = c.m
    gates = []
    for gate in c.gates:
        if gate.is_real:
            gates.append(gate)
            continue
        a, b = gate.matrix.real, gate.matrix.imag
        doubled = np.block([[a, -b], [b, a]]).astype(complex)
        gates.append(raw_gate(gate.targets + (r,), doubled))
    return Circuit(m=c.m + 1, n=c.n, gates=tuple(gates))


# Text format

def _format_float(value: float) -> str:
    return repr(float(value))


def serialize_circuit(c: Circuit) -> str:
    """Render a circuit in the line-oriented text format."""
    lines = [f"qubits {c.m} inputs {c.n}"]
    for gate in c.gates:
        targets = ' '.join(str(t) for t in gate.targets)
        if gate.name == RAW_GATE:
            values = ' '.join(
                f"{_format_float(z.real)} {_format_float(z.imag)}" for z in gate.matrix.ravel()
            )
            lines.append(f"U {gate.arity} {targets} {values}")
        else:
            lines.append(f"G {gate.name} {targets}")
    return '\n'.join(lines) + '\n'


def _parse_int(token: str, what: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise CircuitParseError(f"expected integer {what}, got '{token}'", line_number)


def _check_targets(targets: List[int], m: int, line_number: int) -> None:
    for t in targets:
        if t < 0 or t >= m:
            raise CircuitParseError(f"target {t} out of range for {m} qubit(s)", line_number)
    if len(set(targets)) != len(targets):
        raise CircuitParseError(f"repeated target in {targets}", line_number)


def parse_circuit(text: str) -> Circuit:
    """
    Parse the circuit text format.

    Header "qubits <m> inputs <n>", then "G <NAME> <targets...>" and
    "U <arity> <targets...> <re im ...>" lines; '#' starts a comment.
    """
    caps = config_loader.get_caps()
    unitary_tol = config_loader.get_tolerances().unitary
    m: Optional[int] = None
    n: Optional[int] = None
    gates: List[Gate] = []
    last_line = 0

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        last_line = line_number
        tokens = line.split()

        if m is None:
            if len(tokens) != 4 or tokens[0] != 'qubits' or tokens[2] != 'inputs':
                raise CircuitParseError("expected header 'qubits <m> inputs <n>'", line_number)
            m = _parse_int(tokens[1], "qubit count", line_number)
            n = _parse_int(tokens[3], "input count", line_number)
            if not 1 <= m <= caps.total_qubits:
                raise CircuitParseError(f"qubit count {m} outside [1, {caps.total_qubits}]", line_number)
            if not 0 <= n <= m:
                raise CircuitParseError(f"input count {n} outside [0, {m}]", line_number)
            continue

        kind = tokens[0]
        if kind == 'G':
            if len(tokens) < 2:
                raise CircuitParseError("gate line needs a name", line_number)
            name = tokens[1]
            if name not in GATE_MATRICES:
                raise CircuitParseError(f"unknown gate name '{name}'", line_number)
            targets = [_parse_int(t, "target", line_number) for t in tokens[2:]]
            expected = GATE_MATRICES[name].shape[0].bit_length() - 1
            if len(targets) != expected:
                raise CircuitParseError(f"gate {name} takes {expected} target(s), got {len(targets)}", line_number)
            _check_targets(targets, m, line_number)
            gates.append(named_gate(name, targets))
        elif kind == RAW_GATE:
            if len(tokens) < 2:
                raise CircuitParseError("raw gate line needs an arity", line_number)
            arity = _parse_int(tokens[1], "arity", line_number)
            if not 1 <= arity <= caps.raw_gate_arity:
                raise CircuitParseError(f"raw gate arity {arity} outside [1, {caps.raw_gate_arity}]", line_number)
            targets = [_parse_int(t, "target", line_number) for t in tokens[2:2 + arity]]
            if len(targets) != arity:
                raise CircuitParseError(f"raw gate needs {arity} target(s)", line_number)
            _check_targets(targets, m, line_number)
            values = tokens[2 + arity:]
            expected_values = 2 * 4 ** arity
            if len(values) != expected_values:
                raise CircuitParseError(f"raw gate of arity {arity} needs {expected_values} floats, got {len(values)}", line_number)
            try:
                floats = np.array([float(v) for v in values])
            except ValueError as e:
                raise CircuitParseError(f"invalid matrix entry: {e}", line_number)
            matrix = (floats[0::2] + 1j * floats[1::2]).reshape(1 << arity, 1 << arity)
            deviation = unitarity_deviation(matrix)
            if deviation > unitary_tol:
                raise CircuitParseError(f"raw matrix is not unitary: max |U^dagger U - 1| = {deviation:.3e}", line_number)
            gates.append(raw_gate(targets, matrix))
        else:
            raise CircuitParseError(f"unknown line type '{kind}'", line_number)

    if m is None or n is None:
        raise CircuitParseError("missing header 'qubits <m> inputs <n>'", max(last_line, 1))
    if not gates:
        raise CircuitParseError("circuit has no gates", max(last_line, 1))
    return Circuit(m=m, n=n, gates=tuple(gates))


def read_circuit(path: Path) -> Circuit:
    """Parse a circuit file."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except FileNotFoundError:
        raise InputError(f"Circuit file not found: {path}")
    return parse_circuit(text)


def write_circuit(c: Circuit, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_circuit(c), encoding='utf-8')


# Generators

def merge_gates(gates: Sequence[Gate], max_arity: int) -> List[Gate]:
    """
    Greedily fuse consecutive gates while their joint support stays within max_arity.

    A gate that is not fused with anything keeps its name.
    """
    merged: List[Gate] = []
    group: List[Gate] = []
    support: List[int] = []

    def flush():
        if not group:
            return
        if len(group) == 1:
            merged.append(group[0])
            return
        dims = [2] * len(support)
        product = np.eye(1 << len(support), dtype=complex)
        for gate in group:
            local_sites = [support.index(t) for t in gate.targets]
            product = embed_operator(dims, local_sites, gate.matrix) @ product
        merged.append(raw_gate(support, product))

    for gate in gates:
        union = support + [t for t in gate.targets if t not in support]
        if group and len(union) > max_arity:
            flush()
            group, support = [], []
            union = list(gate.targets)
        group.append(gate)
        support = union
    flush()
    return merged


def _walsh_gray_angles(alpha: np.ndarray) -> np.ndarray:
    """Rotation angles of the Gray-code multiplexor realizing angle alpha[x] on control value x."""
    size = len(alpha)
    j = np.arange(size)
    gray = j ^ (j >> 1)
    overlap = gray[:, None] & np.arange(size)[None, :]
    parity = np.array([[bin(int(v)).count('1') & 1 for v in row] for row in overlap])
    signs = 1.0 - 2.0 * parity
    return signs @ alpha / size


def plant_verifier(n: int, d: int, t_pad: int, eps: float, seed: int) -> Tuple[Circuit, int]:
    """
    Build a verifier whose Omega has exactly d eigenvalues 1-eps and 2^n-d eigenvalues eps.

    Layout: a seeded basis permutation of the inputs, a Gray-code
    multiplexed Y rotation of the ancilla (qubit n) with acceptance
    amplitude sin(alpha/2), a SWAP routing the ancilla onto qubit 0, and
    t_pad identity gates. Consecutive gates are fused into raw gates of
    arity <= raw_gate_arity.

    Returns:
        (circuit, d)
    """
    caps = config_loader.get_caps()
    if n < 1:
        raise InputError(f"planted verifiers need n >= 1, got {n}")
    if n + 1 > caps.total_qubits:
        raise InputError(f"n={n} needs {n + 1} qubits, above the cap of {caps.total_qubits}")
    if not 0 <= d <= (1 << n):
        raise InputError(f"d must lie in [0, {1 << n}], got {d}")
    if not 0 <= eps < 0.25:
        raise InputError(f"eps must lie in [0, 1/4), got {eps}")
    if t_pad < 0:
        raise InputError(f"t_pad must be non-negative, got {t_pad}")

    rng = make_rng(seed)
    m = n + 1
    ancilla = n
    steps: List[Gate] = []

    for q in range(n):
        if rng.random() < 0.5:
            steps.append(named_gate('X', [q]))
    if n >= 2:
        first, second = (int(v) for v in rng.choice(n, size=2, replace=False))
        steps.append(named_gate('SWAP', [first, second]))
        control, target = (int(v) for v in rng.choice(n, size=2, replace=False))
        steps.append(named_gate('CNOT', [control, target]))

    size = 1 << n
    accept_angle = 2 * asin(sqrt(1 - eps))
    reject_angle = 2 * asin(sqrt(eps))
    alpha = np.where(np.arange(size) < d, accept_angle, reject_angle)
    theta = _walsh_gray_angles(alpha)
    for j in range(size):
        steps.append(raw_gate([ancilla], _ry(theta[j])))
        changed = (j ^ (j >> 1)) ^ (((j + 1) % size) ^ (((j + 1) % size) >> 1))
        steps.append(named_gate('CNOT', [changed.bit_length() - 1, ancilla]))
    steps.append(named_gate('SWAP', [0, ancilla]))

    gates = merge_gates(steps, caps.raw_gate_arity)
    gates.extend(named_gate('I', [0]) for _ in range(t_pad))
    circuit = Circuit(m=m, n=n, gates=tuple(gates))
    logger.info("planted verifier", n=n, d=d, eps=eps, seed=seed, T=circuit.T)
    return circuit, d


def plant_to_length(n: int, d: int, T: int, eps: float, seed: int) -> Tuple[Circuit, int]:
    """Planted verifier padded to exactly T gates."""
    base, _ = plant_verifier(n, d, 0, eps, seed)
    if T < base.T:
        raise InputError(f"circuit length {T} is below the minimal planted length {base.T} for n={n}")
    return plant_verifier(n, d, T - base.T, eps, seed)


GATE_SETS = ('universal', 'real', 'dyadic')


def random_circuit(m: int, n: int, T: int, seed: int, gate_set: str = 'universal') -> Circuit:
    """
    Seeded random circuit.

    gate_set "universal" draws from all named gates plus random raw
    unitaries, "real" restricts to real gates and random orthogonal raw
    gates, "dyadic" to gates whose entries are 0, +-1 or +-1/2.
    """
    if gate_set not in GATE_SETS:
        raise InputError(f"gate_set must be one of {GATE_SETS}, got '{gate_set}'")
    if T < 1:
        raise InputError(f"T must be positive, got {T}")
    rng = make_rng(seed)

    one_qubit = {'universal': ['X', 'Y', 'Z', 'H', 'S', 'T'], 'real': ['X', 'Z', 'H'], 'dyadic': ['X', 'Z']}[gate_set]
    two_qubit = ['CNOT', 'CZ', 'SWAP']

    gates = []
    for _ in range(T):
        u = rng.random()
        if u < 0.3:
            arity = 1 if m < 2 else int(rng.integers(1, 3))
            targets = [int(t) for t in rng.choice(m, size=arity, replace=False)]
            if gate_set == 'dyadic':
                if arity == 2:
                    gates.append(raw_gate(targets, _DYADIC_HH))
                else:
                    gates.append(named_gate('Z', targets))
            else:
                gates.append(raw_gate(targets, random_unitary(1 << arity, rng, real=(gate_set == 'real'))))
        elif m >= 2 and u < 0.65:
            name = two_qubit[int(rng.integers(len(two_qubit)))]
            targets = [int(t) for t in rng.choice(m, size=2, replace=False)]
            gates.append(named_gate(name, targets))
        else:
            name = one_qubit[int(rng.integers(len(one_qubit)))]
            gates.append(named_gate(name, [int(rng.integers(m))]))
    return Circuit(m=m, n=n, gates=tuple(gates))
