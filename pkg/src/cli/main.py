"""
doslab command line.

Each subcommand runs one experiment, validates its report against the
schema in docs/schemas and writes it as canonical JSON (or a markdown
summary with --format markdown) to --report (or stdout). Exit status: 0 on success, 1 when a promise or cross-check fails,
2 on invalid input.
"""

import argparse
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Type, TypeVar

import numpy as np
import structlog
from pydantic import BaseModel, ValidationError

from src.core import config as config_module
from src.core.bqpcount import VerifierInstance, accepting_dimension
from src.core.clockcomp import (
    analyze_ground_space, compile_clock, compile_report, gap_bound, to_local_hamiltonian,
)
from src.core.errors import ConsistencyError, InputError, PromiseViolationError
from src.core.hamdos import (
    LocalHamiltonian, count_dos, ground_report, quadratic_shift, shift_report,
)
from src.core.log_setup import configure_logging
from src.core.models import (
    ComplexMatrix, DosQuery, EndToEndReport, FinalVariant, HamiltonianDocument,
    OmegaReport, PlantReport,
)
from src.core.numkit import check_tagged_hermitian, eigvals_hermitian, projector_difference_bound
from src.core.pathsum import reconstruct
from src.core.qcirc import omega, plant_to_length, plant_verifier, read_circuit, write_circuit
from src.integrations.report_exporter import ExportFormat, ReportExporter

logger = structlog.get_logger(__name__)

ModelT = TypeVar('ModelT', bound=BaseModel)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2

DEFAULT_A = 0.75
DEFAULT_B = 0.25


class CheckFailed(Exception):
    """A subcommand's own acceptance check did not pass; the report is still written."""


def _finite(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got '{text}'")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a finite number, got '{text}'")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'")
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _load_model(path: Path, model: Type[ModelT]) -> ModelT:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Input file not found: {path}")
    return model.model_validate_json(path.read_text(encoding='utf-8'))


def _load_hamiltonian(path: Path) -> LocalHamiltonian:
    return LocalHamiltonian.from_document(_load_model(path, HamiltonianDocument))


def _emit(exporter: ReportExporter, report: BaseModel, schema: str, destination: Optional[Path],
          format_name: str = ExportFormat.JSON.value) -> None:
    format_type = ExportFormat(format_name)
    if destination is None:
        sys.stdout.write(exporter.export(report, format_type, schema=schema))
    else:
        exporter.export_to_file(report, destination, format_type, schema=schema)


def cmd_omega(args: argparse.Namespace, exporter: ReportExporter) -> None:
    circuit = read_circuit(args.circuit)
    instance = VerifierInstance(omega=omega(circuit, args.accept_bit), a=args.a, b=args.b, n=circuit.n)
    count = accepting_dimension(instance, grace=args.grace)
    report = OmegaReport(
        n=circuit.n, m=circuit.m, T=circuit.T,
        trace=float(np.trace(instance.omega).real),
        eigenvalues=[float(x) for x in eigvals_hermitian(instance.omega)],
        count=count,
    )
    _emit(exporter, report, 'omega', args.report, args.format)
    if not count.promise_ok and not args.grace:
        raise CheckFailed(f"gap promise violated at (a={args.a}, b={args.b})")


def cmd_plant(args: argparse.Namespace, exporter: ReportExporter) -> None:
    circuit, d = plant_to_length(args.n, args.d, args.t, args.eps, args.seed)
    base, _ = plant_verifier(args.n, args.d, 0, args.eps, args.seed)
    write_circuit(circuit, args.out)
    report = PlantReport(
        n=args.n, m=circuit.m, d=d, T=circuit.T, t_pad=circuit.T - base.T,
        eps=args.eps, seed=args.seed, circuit_path=str(args.out),
    )
    _emit(exporter, report, 'plant', args.report, args.format)


def cmd_compile(args: argparse.Namespace, exporter: ReportExporter) -> None:
    circuit = read_circuit(args.circuit)
    h = compile_clock(circuit, FinalVariant(args.final), args.a, args.b)
    local = to_local_hamiltonian(h, circuit)
    exporter.export_to_file(local.to_document(), args.out, ExportFormat.JSON, schema='hamiltonian')
    _emit(exporter, compile_report(h, len(local.terms)), 'compile', args.report, args.format)


def cmd_degeneracy(args: argparse.Namespace, exporter: ReportExporter) -> None:
    h = _load_hamiltonian(args.ham)
    _emit(exporter, ground_report(h, args.e0, args.e1, args.e2), 'degeneracy', args.report, args.format)


def cmd_dos(args: argparse.Namespace, exporter: ReportExporter) -> None:
    h = _load_hamiltonian(args.ham)
    query = DosQuery(e1=args.e1, e2=args.e2, delta=args.delta)
    report = count_dos(h, query, grace_mode=args.grace)
    if args.csv is not None:
        exporter.export_to_file(report.histogram, args.csv, ExportFormat.CSV)
    _emit(exporter, report, 'dos', args.report, args.format)
    if not report.ok:
        raise CheckFailed(f"{len(report.grace_violations)} eigenvalue(s) inside the grace intervals")


def cmd_shift(args: argparse.Namespace, exporter: ReportExporter) -> None:
    h = _load_hamiltonian(args.ham)
    shift = quadratic_shift(h, DosQuery(e1=args.e1, e2=args.e2, delta=args.delta))
    report = shift_report(h, shift)
    exporter.export_to_file(shift.h_prime.to_document(), args.out, ExportFormat.JSON, schema='hamiltonian')
    _emit(exporter, report, 'shift', args.report, args.format)
    if not report.spectrum_ok:
        raise CheckFailed("shifted spectrum does not separate the window from its exterior")


def cmd_trace_count(args: argparse.Namespace, exporter: ReportExporter) -> None:
    if (args.a is None) != (args.b is None):
        raise InputError("--a and --b must be given together")
    circuit = read_circuit(args.circuit)
    report = reconstruct(circuit, a=args.a, b=args.b, r=args.r, accept_bit=args.accept_bit,
                         exact_rational=args.exact_rational)
    _emit(exporter, report, 'trace-count', args.report, args.format)
    if not report.within_quarter:
        raise CheckFailed(f"estimate {report.estimate} is not within 1/4 of the trace {report.trace_direct}")


def cmd_verify_bound(args: argparse.Namespace, exporter: ReportExporter) -> None:
    p = check_tagged_hermitian(_load_model(args.p, ComplexMatrix), "P")
    q = check_tagged_hermitian(_load_model(args.q, ComplexMatrix), "Q")
    report = projector_difference_bound(p, q)
    _emit(exporter, report, 'verify-bound', args.report, args.format)
    if not report.bound_holds:
        raise CheckFailed(f"least eigenvalue {report.min_eig} of P - Q is below -sqrt(eps) = {-report.sqrt_epsilon}")


def cmd_end_to_end(args: argparse.Namespace, exporter: ReportExporter) -> None:
    circuit, d = plant_to_length(args.n, args.d, args.t, args.eps, args.seed)
    h = compile_clock(circuit, FinalVariant.PROJECTOR, args.a, args.b)
    ground = analyze_ground_space(h, d)

    bound = gap_bound(h.T, FinalVariant.PROJECTOR, h.eps)
    local = to_local_hamiltonian(h, circuit)
    dense_cap = config_module.config_loader.get_caps().dense_dim
    if local.dim > dense_cap:
        logger.warning("skipping local-term count above the dense cap", dim=local.dim, dense_dim=dense_cap)
        degeneracy_lh = None
    else:
        degeneracy_lh = ground_report(local, 0.0, bound / 4, bound / 2).count

    trace_count = reconstruct(circuit, a=args.a, b=args.b)
    counts = [h.dim_accept, ground.degeneracy, trace_count.dim_estimate]
    if degeneracy_lh is not None:
        counts.append(degeneracy_lh)
    if trace_count.dim_from_paths is not None:
        counts.append(trace_count.dim_from_paths)
    agree = all(count == d for count in counts) and ground.passed and trace_count.within_quarter

    report = EndToEndReport(
        n=args.n, d=d, T=circuit.T, seed=args.seed, eps=args.eps, a=args.a, b=args.b,
        dim_accept=h.dim_accept, degeneracy=ground.degeneracy, degeneracy_lh=degeneracy_lh,
        dim_estimate=trace_count.dim_estimate, trace_count=trace_count, ground_space=ground, agree=agree,
    )
    _emit(exporter, report, 'end-to-end', args.report, args.format)
    if not agree:
        raise CheckFailed(f"counts disagree: planted {d}, observed {counts}")


COMMANDS: Dict[str, Callable[[argparse.Namespace, ReportExporter], None]] = {
    'omega': cmd_omega,
    'plant': cmd_plant,
    'compile': cmd_compile,
    'degeneracy': cmd_degeneracy,
    'dos': cmd_dos,
    'shift': cmd_shift,
    'trace-count': cmd_trace_count,
    'verify-bound': cmd_verify_bound,
    'end-to-end': cmd_end_to_end,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='doslab', description="Counting-complexity laboratory")
    parser.add_argument('--log-level', default=None, help="DEBUG, INFO, WARNING or ERROR (default: DOSLAB_LOG_LEVEL)")
    parser.add_argument('--log-json', action='store_true', help="Emit log events as JSON lines on stderr")
    sub = parser.add_subparsers(dest='command', required=True)

    def with_report(p: argparse.ArgumentParser) -> argparse.ArgumentParser:
        p.add_argument('--report', type=Path, default=None, help="Report file (default: stdout)")
        p.add_argument('--format', choices=(ExportFormat.JSON.value, ExportFormat.MARKDOWN.value),
                       default=ExportFormat.JSON.value, help="Report format; markdown gives a one-table summary")
        return p

    p = with_report(sub.add_parser('omega', help="Spectrum of Omega and the accepting dimension"))
    p.add_argument('circuit', type=Path)
    p.add_argument('--a', type=_finite, default=DEFAULT_A)
    p.add_argument('--b', type=_finite, default=DEFAULT_B)
    p.add_argument('--grace', action='store_true', help="Report the grace-interval count range")
    p.add_argument('--accept-bit', type=int, choices=(0, 1), default=1)

    p = with_report(sub.add_parser('plant', help="Write a planted verifier circuit"))
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--d', type=_non_negative_int, required=True)
    p.add_argument('--t', type=int, required=True, help="Total number of gates")
    p.add_argument('--eps', type=_finite, default=0.0)
    p.add_argument('--seed', type=_non_negative_int, required=True)
    p.add_argument('--out', type=Path, required=True)

    p = with_report(sub.add_parser('compile', help="Clock Hamiltonian of a circuit"))
    p.add_argument('circuit', type=Path)
    p.add_argument('--final', choices=[v.value for v in FinalVariant], default=FinalVariant.PROJECTOR.value)
    p.add_argument('--a', type=_finite, default=DEFAULT_A)
    p.add_argument('--b', type=_finite, default=DEFAULT_B)
    p.add_argument('--out', type=Path, required=True)

    p = with_report(sub.add_parser('degeneracy', help="Low-energy count of a gapped Hamiltonian"))
    p.add_argument('--ham', type=Path, required=True)
    p.add_argument('--e0', type=_finite, required=True)
    p.add_argument('--e1', type=_finite, required=True)
    p.add_argument('--e2', type=_finite, required=True)

    p = with_report(sub.add_parser('dos', help="Density-of-states count in a window"))
    p.add_argument('--ham', type=Path, required=True)
    p.add_argument('--e1', type=_finite, required=True)
    p.add_argument('--e2', type=_finite, required=True)
    p.add_argument('--delta', type=_finite, required=True)
    p.add_argument('--grace', action='store_true')
    p.add_argument('--csv', type=Path, default=None, help="Histogram CSV output")

    p = with_report(sub.add_parser('shift', help="Quadratic shift of a Hamiltonian"))
    p.add_argument('--ham', type=Path, required=True)
    p.add_argument('--e1', type=_finite, required=True)
    p.add_argument('--e2', type=_finite, required=True)
    p.add_argument('--delta', type=_finite, required=True)
    p.add_argument('--out', type=Path, required=True)

    p = with_report(sub.add_parser('trace-count', help="Path-sum model count of tr(Omega)"))
    p.add_argument('circuit', type=Path)
    p.add_argument('--a', type=_finite, default=None)
    p.add_argument('--b', type=_finite, default=None)
    p.add_argument('--r', type=int, default=None)
    p.add_argument('--accept-bit', type=int, choices=(0, 1), default=1)
    p.add_argument('--exact-rational', action='store_true')

    p = with_report(sub.add_parser('verify-bound', help="Projector-difference bound for two projectors"))
    p.add_argument('p', type=Path)
    p.add_argument('q', type=Path)

    p = with_report(sub.add_parser('end-to-end', help="Plant, compile, count and compare"))
    p.add_argument('--n', type=int, required=True)
    p.add_argument('--d', type=_non_negative_int, required=True)
    p.add_argument('--t', type=int, required=True, help="Total number of gates")
    p.add_argument('--seed', type=_non_negative_int, required=True)
    p.add_argument('--eps', type=_finite, default=0.0)
    p.add_argument('--a', type=_finite, default=DEFAULT_A)
    p.add_argument('--b', type=_finite, default=DEFAULT_B)

    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run one subcommand and return its exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT

    try:
        configure_logging(args.log_level or config_module.config_loader.settings.log_level, args.log_json)
    except ValueError as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT

    try:
        COMMANDS[args.command](args, ReportExporter())
    except CheckFailed as e:
        sys.stderr.write(f"check failed: {e}\n")
        return EXIT_FAILED
    except (PromiseViolationError, ConsistencyError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FAILED
    except (InputError, ValidationError, FileNotFoundError, ValueError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_INPUT
    except Exception as e:
        logger.error("unexpected failure", command=args.command, error=repr(e))
        sys.stderr.write(f"error: {e}\n")
        return EXIT_FAILED
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
