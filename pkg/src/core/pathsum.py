"""
Path-integral evaluation of tr(Omega) and its integer model count.

A path assignment zeta fixes a forward path i_0..i_T and a backward
interior path j_1..j_{T-1} (j_0 = i_0, j_T = i_T), with i_0 ranging over
input basis states with the ancillas at zero. Its weight

    f(zeta) = P(i_T) prod_t <i_t|U_t|i_{t-1}> prod_t <j_t|U_t|j_{t-1}>

sums to tr(Omega) for real circuits. Each weight is mapped to the integer
g(zeta) = round(2^(|zeta|+2) (f + 1)), and N = sum g is the model count
of the predicate h(zeta, xi) = [0 <= xi < g(zeta)].
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import floor
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import structlog

from .bqpcount import VerifierInstance, accepting_dimension, amplify_spectrum
from .config import config_loader
from .errors import ConsistencyError, InputError, PromiseViolationError
from .models import TraceCountReport
from .numkit import eigvals_hermitian
from .qcirc import Circuit, Gate, omega, realify

logger = structlog.get_logger(__name__)

_EXACT_DENOMINATOR_BITS = 16
_OUTER_CHUNK = 1 << 20


@dataclass(frozen=True)
class Path:
    """Forward path i_0..i_T and backward interior path j_1..j_{T-1}."""
    i: Tuple[int, ...]
    j: Tuple[int, ...] = ()


@dataclass(frozen=True)
class _PartitionSum:
    trace: float
    delta: int
    nonzero: int


def zeta_bits(c: Circuit) -> int:
    """|zeta| = n + (2T - 1) m: bits of i_0 (inputs only), i_1..i_T and j_1..j_{T-1}."""
    return c.n + (2 * c.T - 1) * c.m


def _require_real(c: Circuit) -> None:
    for position, gate in enumerate(c.gates, start=1):
        if not gate.is_real:
            raise InputError(f"Gate {position} ({gate.name}) has complex entries; realify the circuit first")


def _local_index(index: int, targets: Sequence[int]) -> int:
    return sum(((index >> t) & 1) << bit for bit, t in enumerate(targets))


def _transition(gate: Gate, after: int, before: int) -> float:
    """<after|U|before> for a gate embedded in the full register."""
    mask = sum(1 << t for t in gate.targets)
    if (after & ~mask) != (before & ~mask):
        return 0.0
    return float(gate.matrix[_local_index(after, gate.targets), _local_index(before, gate.targets)].real)


def path_amplitude(c: Circuit, p: Path, accept_bit: int = 1) -> float:
    """
    Weight f(zeta) of one path assignment.

    Args:
        c: Real circuit
        p: Path with len(i) = T + 1 and len(j) = T - 1
        accept_bit: Output value of qubit 0 counted as acceptance

    Returns:
        Real weight; 0 when the endpoint rejects or a transition vanishes
    """
    _require_real(c)
    if accept_bit not in (0, 1):
        raise InputError(f"accept bit must be 0 or 1, got {accept_bit}")
    if len(p.i) != c.T + 1 or len(p.j) != c.T - 1:
        raise InputError(f"Path needs {c.T + 1} forward and {c.T - 1} backward indices, got {len(p.i)} and {len(p.j)}")
    if any(not 0 <= x < c.dim for x in p.i + p.j):
        raise InputError(f"Path indices must lie in [0, {c.dim})")
    if p.i[0] >= c.input_dim:
        raise InputError(f"i_0 = {p.i[0]} has nonzero ancilla bits")

    if (p.i[-1] & 1) != accept_bit:
        return 0.0
    backward = (p.i[0],) + p.j + (p.i[-1],)
    value = 1.0
    for t, gate in enumerate(c.gates, start=1):
        value *= _transition(gate, p.i[t], p.i[t - 1]) * _transition(gate, backward[t], backward[t - 1])
        if value == 0.0:
            return 0.0
    return value


def _forward_paths(c: Circuit, start: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Endpoints and amplitudes of every forward path from start with nonzero weight.

    Exact zeros are pruned after every gate.
    """
    indices = np.array([start], dtype=np.int64)
    amplitudes = np.array([1.0])
    for gate in c.gates:
        k = gate.arity
        mask = sum(1 << t for t in gate.targets)
        local_in = np.zeros_like(indices)
        for bit, t in enumerate(gate.targets):
            local_in |= ((indices >> t) & 1) << bit
        cleared = indices & ~mask
        matrix = gate.matrix.real
        new_indices = []
        new_amplitudes = []
        for out in range(1 << k):
            offset = sum(((out >> bit) & 1) << t for bit, t in enumerate(gate.targets))
            weights = matrix[out, local_in]
            keep = weights != 0.0
            new_indices.append(cleared[keep] | offset)
            new_amplitudes.append(amplitudes[keep] * weights[keep])
        indices = np.concatenate(new_indices)
        amplitudes = np.concatenate(new_amplitudes)
        keep = amplitudes != 0.0
        indices, amplitudes = indices[keep], amplitudes[keep]
    return indices, amplitudes


def _rounded_offsets(values: np.ndarray, shift: int) -> np.ndarray:
    """round_half_up(2^shift f) as int64, computed without float tie errors."""
    scaled = np.ldexp(values, shift)
    base = np.floor(scaled)
    return (base + (scaled - base >= 0.5)).astype(np.int64)


def _sum_int64(values: np.ndarray, bound_bits: int) -> int:
    if len(values) == 0:
        return 0
    if bound_bits + int(len(values)).bit_length() < 63:
        return int(np.sum(values))
    return sum(int(v) for v in values)


def _partition(c: Circuit, start: int, accept_bit: int, k: int) -> _PartitionSum:
    """Sum of f and of the rounded offsets over all paths with i_0 = start."""
    endpoints, amplitudes = _forward_paths(c, start)
    order = np.argsort(endpoints, kind='stable')
    endpoints, amplitudes = endpoints[order], amplitudes[order]
    boundaries = np.flatnonzero(np.diff(endpoints)) + 1
    trace = 0.0
    delta = 0
    nonzero = 0
    for group, values in zip(np.split(endpoints, boundaries), np.split(amplitudes, boundaries)):
        if len(group) == 0 or (int(group[0]) & 1) != accept_bit:
            continue
        rows = max(1, _OUTER_CHUNK // len(values))
        for first in range(0, len(values), rows):
            weights = np.outer(values[first:first + rows], values)
            trace += float(np.sum(weights))
            delta += _sum_int64(_rounded_offsets(weights.ravel(), k + 2), k + 3)
            nonzero += weights.size
    return _PartitionSum(trace=trace, delta=delta, nonzero=nonzero)


def _check_path_cap(c: Circuit) -> int:
    k = zeta_bits(c)
    cap = config_loader.get_caps().path_cap
    if (1 << k) > cap:
        raise InputError(f"Path space has 2^{k} = {1 << k} assignments, above the cap of {cap}; set DOSLAB_PATH_CAP >= {1 << k} to allow it")
    return k


def _path_sums(c: Circuit, accept_bit: int) -> Tuple[float, int, int]:
    """(sum of f, sum of rounded offsets, paths with nonzero f) over the whole path space."""
    _require_real(c)
    if accept_bit not in (0, 1):
        raise InputError(f"accept bit must be 0 or 1, got {accept_bit}")
    k = _check_path_cap(c)
    workers = config_loader.get_execution_settings().workers
    starts = range(c.input_dim)
    if workers > 1 and c.input_dim > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda s: _partition(c, s, accept_bit, k), starts))
    else:
        partials = [_partition(c, s, accept_bit, k) for s in starts]
    # fixed combination order over i_0
    trace = sum(p.trace for p in partials)
    delta = sum(p.delta for p in partials)
    nonzero = sum(p.nonzero for p in partials)
    logger.debug("path sums", zeta_bits=k, nonzero=nonzero, workers=workers)
    return trace, delta, nonzero


def enumerate_trace(c: Circuit, accept_bit: int = 1) -> float:
    """Sum of f over every path assignment; equals tr(Omega) for real circuits."""
    trace, _, _ = _path_sums(c, accept_bit)
    return trace


def integerize(f_value: float, zeta_bits: int) -> int:
    """
    g = round(2^(|zeta|+2) (f + 1)), halves rounded away from zero.

    Computed in exact rational arithmetic.
    """
    if abs(f_value) > 1.0 + 1e-9:
        raise InputError(f"path weight {f_value} lies outside [-1, 1]")
    if zeta_bits < 0:
        raise InputError(f"zeta_bits must be non-negative, got {zeta_bits}")
    clipped = min(max(Fraction(f_value), Fraction(-1)), Fraction(1))
    return floor((clipped + 1) * (1 << (zeta_bits + 2)) + Fraction(1, 2))


def indicator(g: int, xi: int) -> int:
    """h(zeta, xi) = 1 iff 0 <= xi < g(zeta)."""
    return int(0 <= xi < g)


def model_indicator(c: Circuit, p: Path, xi: int, accept_bit: int = 1) -> int:
    """The predicate h evaluated directly on a path assignment and a counter value."""
    return indicator(integerize(path_amplitude(c, p, accept_bit), zeta_bits(c)), xi)


def count_oracle(c: Circuit, accept_bit: int = 1) -> int:
    """
    N = sum over zeta of g(zeta), in arbitrary-precision integers.

    Paths with f = 0 contribute exactly 2^(|zeta|+2) each, so only nonzero
    weights are enumerated individually.
    """
    k = zeta_bits(c)
    _, delta, _ = _path_sums(c, accept_bit)
    return (1 << k) * (1 << (k + 2)) + delta


def _dyadic(value: float, position: int) -> Fraction:
    exact = Fraction(value)
    if exact.denominator > (1 << _EXACT_DENOMINATOR_BITS):
        raise InputError(f"Gate {position} has entry {value} that is not a dyadic rational with denominator <= 2^{_EXACT_DENOMINATOR_BITS}")
    return exact


def exact_trace(c: Circuit, accept_bit: int = 1) -> Fraction:
    """
    Sum of f over every path in exact rational arithmetic.

    Restricted to real circuits whose entries are dyadic rationals; paths
    sharing endpoints are accumulated as exact amplitudes.
    """
    _require_real(c)
    matrices = [
        [[_dyadic(float(x), position) for x in row] for row in gate.matrix.real]
        for position, gate in enumerate(c.gates, start=1)
    ]
    total = Fraction(0)
    for start in range(c.input_dim):
        state: Dict[int, Fraction] = {start: Fraction(1)}
        for gate, matrix in zip(c.gates, matrices):
            mask = sum(1 << t for t in gate.targets)
            nxt: Dict[int, Fraction] = {}
            for index, amplitude in state.items():
                local_in = _local_index(index, gate.targets)
                cleared = index & ~mask
                for out in range(1 << gate.arity):
                    weight = matrix[out][local_in]
                    if weight:
                        target = cleared | sum(((out >> bit) & 1) << t for bit, t in enumerate(gate.targets))
                        nxt[target] = nxt.get(target, Fraction(0)) + amplitude * weight
            state = {index: value for index, value in nxt.items() if value}
        total += sum((value * value for index, value in state.items() if (index & 1) == accept_bit), Fraction(0))
    return total


def _tails_within(v: VerifierInstance, tail: float) -> bool:
    spectrum = eigvals_hermitian(v.omega)
    slack = config_loader.get_tolerances().spectral_slack
    return bool(np.all((spectrum >= 1.0 - tail - slack) | (spectrum <= tail + slack)))


def reconstruct(c: Circuit, a: Optional[float] = None, b: Optional[float] = None, r: Optional[int] = None,
                accept_bit: int = 1, exact_rational: bool = False) -> TraceCountReport:
    """
    Recover tr(Omega) (and, with thresholds, dim A) from the model count.

    The path side runs on the realified circuit; the estimate
    2^(-|zeta|-2) N - 2^|zeta| lies within 1/4 of the trace. With
    thresholds a and b the spectrum is amplified to (1 - 2^-r, 2^-r),
    r = n + 2 by default, and the rounded amplified trace must equal the
    accepting dimension.

    Args:
        c: Verifier circuit, complex gates allowed
        a: Acceptance threshold, optional
        b: Rejection threshold, optional
        r: Amplification exponent
        accept_bit: Output value counted as acceptance
        exact_rational: Also compute the exact rational trace (dyadic gates only)

    Returns:
        TraceCountReport
    """
    realified = not c.is_real
    work = realify(c) if realified else c
    k = zeta_bits(work)
    path_count = 1 << k

    trace_direct = float(np.trace(omega(c, accept_bit)).real)
    trace_pathsum, delta, _ = _path_sums(work, accept_bit)
    model_count = path_count * (1 << (k + 2)) + delta
    estimate = float(Fraction(model_count, 1 << (k + 2)) - path_count)
    estimate_error = abs(estimate - trace_direct)
    within_quarter = estimate_error <= 0.25 + config_loader.get_tolerances().spectral_slack
    if not within_quarter:
        logger.warning("path-count estimate outside 1/4 of the trace", estimate=estimate, trace=trace_direct)

    fields = dict(
        trace_direct=trace_direct, trace_pathsum=trace_pathsum, zeta_bits=k, path_count=path_count,
        model_count=model_count, estimate=estimate, estimate_error=estimate_error,
        within_quarter=within_quarter, accept_bit=accept_bit, realified=realified, m=work.m, T=work.T,
    )

    if exact_rational:
        exact = exact_trace(work, accept_bit)
        fields.update(exact_trace=str(exact), exact_error=abs(float(exact) - trace_direct))

    if (a is None) != (b is None):
        raise InputError("Thresholds a and b must be given together")
    if a is not None:
        instance = VerifierInstance(omega=omega(c, accept_bit), a=a, b=b, n=c.n)
        count = accepting_dimension(instance)
        if not count.promise_ok:
            raise PromiseViolationError(f"Gap promise fails at (a={a}, b={b}): eigenvalues {count.violations} inside (b, a)", count)
        r = c.n + 2 if r is None else r
        amplified = amplify_spectrum(instance, r)
        amplified_trace = float(np.trace(amplified.omega).real)
        dim_estimate = int(round(amplified_trace))
        if r >= c.n + 2 and dim_estimate != count.dim_accept:
            raise ConsistencyError(f"Amplified trace {amplified_trace} rounds to {dim_estimate}, accepting dimension is {count.dim_accept}")
        fields.update(a=a, b=b, r=r, amplified_trace=amplified_trace, dim_estimate=dim_estimate, dim_accept=count.dim_accept)
        if _tails_within(instance, 2.0 ** -(c.n + 2)):
            fields.update(dim_from_paths=int(round(estimate)))

    report = TraceCountReport(**fields)
    logger.info("reconstructed trace", zeta_bits=k, estimate=estimate, trace=trace_direct, dim_estimate=report.dim_estimate)
    return report
