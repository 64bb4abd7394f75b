"""
k-local Hamiltonians, density-of-states counting and the quadratic shift.

A LocalHamiltonian is a list of Hermitian terms, each acting on a sorted
set of sites of a mixed-radix system (site 0 least significant). Counts are
taken by exact diagonalization of the assembled dense matrix.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog

from .bqpcount import VerifierInstance
from .config import config_loader
from .errors import ConsistencyError, InputError, PreconditionError
from .models import (
    ComplexMatrix, DegeneracyReport, DosQuery, DosReport, HamiltonianDocument,
    Histogram, ShiftReport, TermDocument,
)
from .numkit import (
    apply_local, check_hermitian, check_tagged_hermitian, eigvals_hermitian, embed_operator, operator_norm,
)

logger = structlog.get_logger(__name__)


@dataclass(frozen=True, eq=False)
class LocalTerm:
    """Hermitian operator on a sorted tuple of sites."""
    sites: Tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        if list(self.sites) != sorted(set(self.sites)):
            raise InputError(f"Term sites must be sorted and distinct, got {list(self.sites)}")
        object.__setattr__(self, 'matrix', check_hermitian(self.matrix))

    @property
    def size(self) -> int:
        return len(self.sites)


@dataclass(frozen=True, eq=False)
class LocalHamiltonian:
    """H = sum of local terms on sites with the given dimensions."""
    site_dims: Tuple[int, ...]
    terms: Tuple[LocalTerm, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.site_dims or any(d <= 0 for d in self.site_dims):
            raise InputError(f"Site dimensions must be positive, got {list(self.site_dims)}")
        for index, term in enumerate(self.terms):
            if term.sites and term.sites[-1] >= len(self.site_dims):
                raise InputError(f"Term {index} acts on site {term.sites[-1]}, only {len(self.site_dims)} sites exist")
            local_dim = int(np.prod([self.site_dims[s] for s in term.sites])) if term.sites else 1
            if term.matrix.shape != (local_dim, local_dim):
                raise InputError(f"Term {index} on sites {list(term.sites)} needs a {local_dim}x{local_dim} matrix, got {term.matrix.shape}")

    @property
    def dim(self) -> int:
        return int(np.prod(self.site_dims))

    @property
    def k(self) -> int:
        """Largest support size."""
        return max((term.size for term in self.terms), default=0)

    @classmethod
    def from_document(cls, doc: HamiltonianDocument) -> 'LocalHamiltonian':
        """Terms read from a document are held to the strict Hermitian tolerance."""
        terms = tuple(
            LocalTerm(sites=tuple(t.sites), matrix=check_tagged_hermitian(t.matrix, f"term {index}"))
            for index, t in enumerate(doc.terms)
        )
        return cls(site_dims=tuple(doc.site_dims), terms=terms)

    def to_document(self) -> HamiltonianDocument:
        return HamiltonianDocument(
            site_dims=list(self.site_dims),
            terms=[TermDocument(sites=list(t.sites), matrix=ComplexMatrix.from_array(t.matrix)) for t in self.terms],
        )

    def relabel(self, permutation: Sequence[int]) -> 'LocalHamiltonian':
        """Move site s to position permutation[s], reordering each term's local factors."""
        if sorted(permutation) != list(range(len(self.site_dims))):
            raise InputError(f"Not a permutation of {len(self.site_dims)} sites: {list(permutation)}")
        new_dims = [0] * len(self.site_dims)
        for old, new in enumerate(permutation):
            new_dims[new] = self.site_dims[old]
        terms = []
        for term in self.terms:
            new_sites = [permutation[s] for s in term.sites]
            order = sorted(new_sites)
            local_dims = [self.site_dims[s] for s in term.sites]
            # local factor i (old order) lands at position order.index(new_sites[i])
            sorted_dims = [0] * len(order)
            for i, s in enumerate(new_sites):
                sorted_dims[order.index(s)] = local_dims[i]
            positions = [order.index(s) for s in new_sites]
            matrix = embed_operator(sorted_dims, positions, term.matrix) if order else term.matrix
            terms.append(LocalTerm(sites=tuple(order), matrix=matrix))
        return LocalHamiltonian(site_dims=tuple(new_dims), terms=tuple(terms))


@dataclass(frozen=True, eq=False)
class ShiftResult:
    """Quadratic shift H' = nu (H^2 - (e1 + e2) H + e1 e2) and its thresholds."""
    h_prime: LocalHamiltonian
    query: DosQuery
    nu: float
    a_neg: float
    b_pos: float

    @property
    def m_terms(self) -> int:
        return len(self.h_prime.terms)

    def map_energy(self, energy):
        """Scalar image nu (x - e1)(x - e2)."""
        return self.nu * (energy - self.query.e1) * (energy - self.query.e2)


def _check_dim(dim: int) -> None:
    cap = config_loader.get_caps().dense_dim
    if dim > cap:
        raise InputError(f"Hamiltonian dimension {dim} exceeds the dense cap of {cap}")


def assemble(h: LocalHamiltonian) -> np.ndarray:
    """
    Dense matrix of H.

    Terms with operator norm above 1 produce a warning; dimensions above
    the dense cap are rejected.
    """
    _check_dim(h.dim)
    total = np.zeros((h.dim, h.dim), dtype=complex)
    identity = np.eye(h.dim, dtype=complex)
    for index, term in enumerate(h.terms):
        norm = operator_norm(term.matrix)
        if norm > 1 + config_loader.get_tolerances().spectral_slack:
            logger.warning("local term norm exceeds 1", term=index, sites=list(term.sites), norm=norm)
        total += apply_local(h.site_dims, term.sites, term.matrix, identity)
    return 0.5 * (total + total.conj().T)


def spectrum(h: LocalHamiltonian) -> np.ndarray:
    """Ascending eigenvalues of the assembled Hamiltonian."""
    return eigvals_hermitian(assemble(h))


def histogram(eigenvalues: Sequence[float], bins: Optional[int] = None) -> Histogram:
    """Equal-width histogram of a spectrum."""
    if bins is None:
        bins = config_loader.get_report_settings().histogram_bins
    counts, edges = np.histogram(np.asarray(eigenvalues, dtype=float), bins=bins)
    return Histogram(bin_edges=[float(e) for e in edges], counts=[int(c) for c in counts])


def _count_closed(eigenvalues: np.ndarray, low: float, high: float, slack: float) -> int:
    return int(np.sum((eigenvalues >= low - slack) & (eigenvalues <= high + slack)))


def count_dos_spectrum(eigenvalues: np.ndarray, q: DosQuery, grace_mode: bool = False,
                       bins: Optional[int] = None) -> DosReport:
    """DOS count on a precomputed spectrum."""
    slack = config_loader.get_tolerances().spectral_slack
    half = q.delta / 2
    count = _count_closed(eigenvalues, q.e1, q.e2, slack)
    inside = (np.abs(eigenvalues - q.e1) < half - slack) | (np.abs(eigenvalues - q.e2) < half - slack)
    violations = [float(x) for x in eigenvalues[inside]]
    count_range = None
    if grace_mode:
        count_range = (
            _count_closed(eigenvalues, q.e1 + half, q.e2 - half, slack),
            _count_closed(eigenvalues, q.e1 - half, q.e2 + half, slack),
        )
    return DosReport(
        query=q,
        grace_mode=grace_mode,
        count=count,
        grace_violations=violations,
        count_range=count_range,
        ok=grace_mode or not violations,
        dim=len(eigenvalues),
        histogram=histogram(eigenvalues, bins),
    )


def count_dos(h: LocalHamiltonian, q: DosQuery, grace_mode: bool = False) -> DosReport:
    """
    Number of eigenstates with energy in [e1, e2].

    In strict mode eigenvalues within delta/2 of e1 or e2 make the report
    not ok; in grace mode the count range over the grace intervals is added.

    Args:
        h: Local Hamiltonian
        q: Energy window and grace width
        grace_mode: Tolerate eigenvalues inside the grace intervals

    Returns:
        DosReport with count, violations and histogram
    """
    report = count_dos_spectrum(spectrum(h), q, grace_mode)
    if not report.ok:
        logger.warning("eigenvalues inside grace intervals", violations=report.grace_violations)
    return report


def lh_to_dos_query(e0: float, e1: float, e2: float) -> DosQuery:
    """
    DOS query counting the eigenvalues at or below e1 of a gapped Hamiltonian.

    delta = e2 - e1, window [e0 - delta/2, e1 + delta/2]. When e1 equals e0
    the lower end is moved down by delta/4 so the window stays wider than
    delta.
    """
    if not e0 <= e1 < e2:
        raise InputError(f"Energies must satisfy e0 <= e1 < e2, got e0={e0}, e1={e1}, e2={e2}")
    delta = e2 - e1
    if e1 - e0 <= 0:
        e0 = e0 - delta / 4
    return DosQuery(e1=e0 - delta / 2, e2=e1 + delta / 2, delta=delta)


def ground_report(h: LocalHamiltonian, e0: float, e1: float, e2: float) -> DegeneracyReport:
    """
    Low-energy eigenspace dimension with its DOS cross-check.

    Raises PreconditionError with the offending eigenvalues when the
    spectrum dips below e0 or has eigenvalues inside (e1, e2).
    """
    if not e0 <= e1 < e2:
        raise InputError(f"Energies must satisfy e0 <= e1 < e2, got e0={e0}, e1={e1}, e2={e2}")
    slack = config_loader.get_tolerances().spectral_slack
    eigenvalues = spectrum(h)

    below = eigenvalues[eigenvalues < e0 - slack]
    if len(below):
        raise PreconditionError(f"{len(below)} eigenvalue(s) below e0={e0}", [float(x) for x in below])
    gap_states = eigenvalues[(eigenvalues > e1 + slack) & (eigenvalues < e2 - slack)]
    if len(gap_states):
        raise PreconditionError(f"{len(gap_states)} eigenvalue(s) inside the gap ({e1}, {e2})", [float(x) for x in gap_states])

    count = int(np.sum(eigenvalues <= e1 + slack))
    query = lh_to_dos_query(e0, e1, e2)
    dos = count_dos_spectrum(eigenvalues, query)
    if not dos.ok or dos.count != count:
        raise ConsistencyError(f"Direct count {count} disagrees with DOS reduction count {dos.count} (ok={dos.ok})")
    logger.info("ground space counted", count=count, e0=e0, e1=e1, e2=e2)
    return DegeneracyReport(e0=e0, e1=e1, e2=e2, count=count, via_dos=dos.count, dos_query=query, agree=True)


def count_ground(h: LocalHamiltonian, e0: float, e1: float, e2: float) -> int:
    """Number of eigenvalues at or below e1 (the #LH count)."""
    return ground_report(h, e0, e1, e2).count


def _anticommutator_term(first: LocalTerm, second: LocalTerm, site_dims: Sequence[int]) -> LocalTerm:
    sites = sorted(set(first.sites) | set(second.sites))
    dims = [site_dims[s] for s in sites]
    lift_a = embed_operator(dims, [sites.index(s) for s in first.sites], first.matrix)
    lift_b = embed_operator(dims, [sites.index(s) for s in second.sites], second.matrix)
    return LocalTerm(sites=tuple(sites), matrix=lift_a @ lift_b + lift_b @ lift_a)


def quadratic_shift(h: LocalHamiltonian, q: DosQuery) -> ShiftResult:
    """
    Shifted Hamiltonian whose negative eigenvalues mark the DOS window.

    H^2 is expanded into the squares H_i^2 and anticommutators {H_i, H_j},
    followed by the linear terms -(e1 + e2) H_i and the constant e1 e2.
    nu = 1 / (4 m_terms^2 max(1, max term norm)) keeps every term
    subnormalized. Eigenvalues of H in [e1 + delta/2, e2 - delta/2] map to
    at most A = -nu delta/2 (e2 - e1 - delta/2); eigenvalues outside
    [e1 - delta/2, e2 + delta/2] map to at least B = nu delta/2 (e2 - e1 + delta/2).
    """
    raw: List[LocalTerm] = []
    for term in h.terms:
        raw.append(LocalTerm(sites=term.sites, matrix=term.matrix @ term.matrix))
    for first, second in combinations(h.terms, 2):
        raw.append(_anticommutator_term(first, second, h.site_dims))
    for term in h.terms:
        raw.append(LocalTerm(sites=term.sites, matrix=-(q.e1 + q.e2) * term.matrix))
    raw.append(LocalTerm(sites=(), matrix=np.array([[q.e1 * q.e2]], dtype=complex)))

    m_terms = len(raw)
    max_norm = max(operator_norm(term.matrix) for term in raw)
    nu = 1.0 / (4.0 * m_terms ** 2 * max(1.0, max_norm))
    terms = tuple(LocalTerm(sites=term.sites, matrix=nu * term.matrix) for term in raw)
    h_prime = LocalHamiltonian(site_dims=h.site_dims, terms=terms)

    half = q.delta / 2
    a_neg = -nu * half * (q.e2 - q.e1 - half)
    b_pos = nu * half * (q.e2 - q.e1 + half)
    result = ShiftResult(h_prime=h_prime, query=q, nu=nu, a_neg=a_neg, b_pos=b_pos)
    logger.debug("quadratic shift", m_terms=m_terms, nu=nu, k_prime=h_prime.k)
    return result


def verify_shift(h: LocalHamiltonian, shift: ShiftResult) -> bool:
    """
    Check the spectrum of H' against the scalar quadratic applied to the spectrum of H.

    Also checks the threshold mapping of the window interior and exterior.
    """
    slack = config_loader.get_tolerances().spectral_slack
    q = shift.query
    half = q.delta / 2
    original = spectrum(h)
    mapped = np.sort(shift.map_energy(original))
    shifted = spectrum(shift.h_prime)
    if np.max(np.abs(mapped - shifted)) > slack:
        raise ConsistencyError(f"Shifted spectrum deviates from the mapped spectrum by {np.max(np.abs(mapped - shifted)):.3e}")
    inner = original[(original >= q.e1 + half) & (original <= q.e2 - half)]
    outer = original[(original < q.e1 - half) | (original > q.e2 + half)]
    inner_ok = bool(np.all(shift.map_energy(inner) <= shift.a_neg + slack))
    outer_ok = bool(np.all(shift.map_energy(outer) >= shift.b_pos - slack))
    return inner_ok and outer_ok


def shift_report(h: LocalHamiltonian, shift: ShiftResult) -> ShiftReport:
    """Report of a quadratic shift with the induced verifier thresholds."""
    a, b = dos_thresholds(shift.m_terms, shift.a_neg, shift.b_pos)
    return ShiftReport(
        e1=shift.query.e1,
        e2=shift.query.e2,
        delta=shift.query.delta,
        nu=shift.nu,
        m_terms=shift.m_terms,
        a_neg=shift.a_neg,
        b_pos=shift.b_pos,
        a=a,
        b=b,
        k_prime=shift.h_prime.k,
        spectrum_ok=verify_shift(h, shift),
    )


def dos_thresholds(m_terms: int, a_neg: float, b_pos: float) -> Tuple[float, float]:
    """Acceptance thresholds a = 1/2 - A/(2 m), b = 1/2 - B/(2 m)."""
    return 0.5 - a_neg / (2 * m_terms), 0.5 - b_pos / (2 * m_terms)


def dos_acceptance_operator(h_prime: LocalHamiltonian, m_terms: Optional[int] = None) -> np.ndarray:
    """Omega = (1 - H'/m_terms)/2, the acceptance operator of one-term sampling."""
    m_terms = len(h_prime.terms) if m_terms is None else m_terms
    if m_terms <= 0:
        raise InputError(f"m_terms must be positive, got {m_terms}")
    matrix = assemble(h_prime)
    return 0.5 * (np.eye(h_prime.dim) - matrix / m_terms)


def dos_verifier_omega(h_prime: LocalHamiltonian, a_neg: float, b_pos: float,
                       m_terms: Optional[int] = None, n: Optional[int] = None) -> VerifierInstance:
    """
    Verifier instance of the one-term-sampling circuit for H'.

    The circuit accepts |psi> with probability 1/2 - <psi|H'|psi>/(2 m_terms);
    its operator is assembled directly from that expression.
    """
    m_terms = len(h_prime.terms) if m_terms is None else m_terms
    omega = dos_acceptance_operator(h_prime, m_terms)
    a, b = dos_thresholds(m_terms, a_neg, b_pos)
    return VerifierInstance(omega=omega, a=a, b=b, n=n)


def dos_verifier_from_shift(shift: ShiftResult) -> VerifierInstance:
    return dos_verifier_omega(shift.h_prime, shift.a_neg, shift.b_pos, shift.m_terms)
