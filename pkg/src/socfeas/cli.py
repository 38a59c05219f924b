"""Command-line front end.

Subcommands::

    socfeas solve INSTANCE       exit 0 primal, 1 dual, 2 precision exceeded, 3 error
    socfeas generate KIND ...    write a random instance with a certificate
    socfeas check INSTANCE CERT  exit 0 if the certificate holds, 1 if not
    socfeas experiment SUITE     batch runs, per-instance reports and a CSV summary
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import io
from .conditioning import Instance, condition_number, generate
from .embed import normalize_blocks, verify_dual, verify_primal
from .errors import ParseError, SocfeasError, Unbounded
from .ipm import Outcome, SolverConfig, solve
from .lorentz import ConeStructure

EXIT_PRIMAL, EXIT_DUAL, EXIT_PRECISION, EXIT_ERROR = 0, 1, 2, 3
_EXIT = {"primal": EXIT_PRIMAL, "dual": EXIT_DUAL, "precision_exceeded": EXIT_PRECISION}


def _config_from_args(args, **extra) -> SolverConfig:
    return SolverConfig(
        gamma_fw=args.gamma,
        schedule_constant=args.schedule_constant,
        fixed_bits=args.fixed_precision_bits,
        max_iterations=args.max_iters,
        **extra,
    )


def _certificates(inst: Instance, outcome: Outcome | None = None):
    """Certificates usable for condition brackets, in normalized coordinates."""
    certs = []
    A, scales = normalize_blocks(inst.A, inst.cone)
    if inst.certificate is not None and inst.kind == "primal":
        x = np.array(inst.certificate, dtype=float)
        for lam, sl in zip(scales, inst.cone.slices):
            x[sl] /= lam
        certs.append(("primal", x))
    elif inst.certificate is not None and inst.kind == "dual":
        certs.append(("dual", np.asarray(inst.certificate, dtype=float)))
    if outcome is not None and outcome.status == "primal":
        certs.append(("primal", outcome.x_assoc))
    elif outcome is not None and outcome.status == "dual":
        certs.append(("dual", outcome.y))
    return A, certs


def estimate_condition(inst: Instance, outcome: Outcome | None, samples: int, seed: int):
    A, certs = _certificates(inst, outcome)
    try:
        return condition_number(A, inst.cone, samples, seed, certs)
    except Unbounded:
        return None


def cmd_solve(args) -> int:
    inst = io.read_instance(args.instance)
    cfg = _config_from_args(args)
    t0 = time.perf_counter()
    outcome = solve(inst.A, inst.cone, cfg)
    elapsed = time.perf_counter() - t0
    cond = None
    if args.condition_estimate:
        est = estimate_condition(inst, outcome, args.samples, args.seed)
        cond = io.condition_to_dict(est) if est is not None else {"unbounded": True}
    report = io.report_from_outcome(outcome, cond, elapsed if args.timing else None, not args.no_trace)
    text = report.emit()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return _EXIT.get(outcome.status, EXIT_ERROR)


def cmd_generate(args) -> int:
    cone = ConeStructure(tuple(args.cone))
    inst = generate(args.kind, args.m, cone, args.margin, args.seed)
    text = io.format_instance(inst)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def check_certificate(inst: Instance, cert: dict, gamma: float | None = None) -> bool:
    """Verify a report's certificate against an instance in native precision."""
    A, _ = normalize_blocks(inst.A, inst.cone)
    kind = cert.get("kind")
    if kind == "dual":
        y = np.asarray(cert["y"], dtype=float)
        if y.shape != (A.shape[0],):
            raise ParseError("dual certificate has the wrong length")
        return verify_dual(A, inst.cone, y).ok
    if kind == "primal":
        x = np.asarray(cert["x_hat"], dtype=float)
        if x.shape != (A.shape[1],):
            raise ParseError("primal certificate has the wrong length")
        g = cert.get("gamma") if gamma is None else gamma
        if g is None:
            raise ParseError("primal certificate needs a gamma")
        return verify_primal(A, inst.cone, x, float(g)).ok
    raise ParseError(f"unknown certificate kind {kind!r}")


def cmd_check(args) -> int:
    inst = io.read_instance(args.instance)
    try:
        doc = json.loads(Path(args.certificate).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc)) from None
    cert = doc.get("certificate", doc) if isinstance(doc, dict) else None
    if not isinstance(cert, dict):
        raise ParseError("no certificate found")
    ok = check_certificate(inst, cert, args.gamma)
    print("pass" if ok else "fail")
    return 0 if ok else 1


# Experiments


@dataclass
class SuiteEntry:
    id: str
    kind: str
    m: int
    cone: tuple[int, ...]
    margin: float
    seed: int
    gamma: float


@dataclass
class ExperimentRow:
    id: str
    kind: str
    m: int
    cone: str
    r: int
    seed: int
    margin: float
    gamma: float
    outcome: str
    iterations: int
    max_bits: int
    rho_p_lower: float
    rho_p_upper: float
    rho_d_lower: float
    rho_d_upper: float
    c_lower: float
    c_upper: float
    complexity: float  # sqrt(r) (log r + log C_upper + |log gamma|), no gamma term for dual outcomes
    certificate_ok: bool
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and self.outcome == self.kind and self.certificate_ok


def expand_suite(spec: dict) -> list[SuiteEntry]:
    """Flatten a suite document into one entry per (instance, seed, gamma)."""
    out = []
    for i, item in enumerate(spec.get("entries", [])):
        gammas = item.get("gamma", [0.1])
        gammas = gammas if isinstance(gammas, list) else [gammas]
        for seed in item.get("seeds", [0]):
            for g in gammas:
                cone = tuple(int(d) for d in item["cone"])
                eid = f"{i:03d}-{item['kind']}-m{item['m']}-c{'x'.join(map(str, cone))}-s{seed}-g{g}"
                out.append(SuiteEntry(eid, item["kind"], int(item["m"]), cone, float(item.get("margin", 0.5)), int(seed), float(g)))
    return sorted(out, key=lambda e: e.id)


def complexity_measure(r: int, c_upper: float, gamma: float | None) -> float:
    """``sqrt(r) (log r + log C + |log gamma|)``; pass ``gamma=None`` for dual-feasible data."""
    g = 0.0 if gamma is None else abs(math.log(gamma))
    return math.sqrt(r) * (math.log(r) + math.log(c_upper) + g)


def run_entry(entry: SuiteEntry, samples: int = 200, schedule_constant: float = 1e6, keep_iterates: bool = False):
    """Generate, solve and bracket one suite entry; returns ``(row, outcome)``."""
    cone = ConeStructure(entry.cone)
    inst = generate(entry.kind, entry.m, cone, entry.margin, entry.seed)
    cfg = SolverConfig(gamma_fw=entry.gamma, schedule_constant=schedule_constant, keep_iterates=keep_iterates)
    base = dict(id=entry.id, kind=entry.kind, m=entry.m, cone=" ".join(map(str, entry.cone)), r=cone.r, seed=entry.seed,
                margin=entry.margin, gamma=entry.gamma)
    try:
        outcome = solve(inst.A, cone, cfg)
    except SocfeasError as exc:
        nan = float("nan")
        return ExperimentRow(**base, outcome="error", iterations=0, max_bits=0, rho_p_lower=nan, rho_p_upper=nan,
                             rho_d_lower=nan, rho_d_upper=nan, c_lower=nan, c_upper=nan, complexity=nan,
                             certificate_ok=False, error=f"{type(exc).__name__}: {exc}"), None
    est = estimate_condition(inst, outcome, samples, entry.seed)
    if outcome.status == "dual":
        cert_ok = verify_dual(outcome.A, cone, outcome.y).ok
    elif outcome.status == "primal":
        cert_ok = verify_primal(outcome.A, cone, outcome.x_hat, entry.gamma).ok
    else:
        cert_ok = False
    if est is None:
        brackets = [0.0, 0.0, 0.0, 0.0, math.inf, math.inf]
    else:
        brackets = [*est.rho_p_bracket.as_tuple(), *est.rho_d_bracket.as_tuple(), *est.c_bracket.as_tuple()]
    g = entry.gamma if outcome.status == "primal" else None
    cx = complexity_measure(cone.r, brackets[5], g) if math.isfinite(brackets[5]) else math.inf
    row = ExperimentRow(**base, outcome=outcome.status, iterations=outcome.iterations, max_bits=outcome.max_bits,
                        rho_p_lower=brackets[0], rho_p_upper=brackets[1], rho_d_lower=brackets[2],
                        rho_d_upper=brackets[3], c_lower=brackets[4], c_upper=brackets[5], complexity=cx,
                        certificate_ok=cert_ok)
    return row, outcome


def _run_entry_star(args):
    return run_entry(*args)


def run_experiment(entries, samples=200, schedule_constant=1e6, jobs=1, keep_iterates=False):
    """Run entries (optionally in a process pool); results follow the entry order."""
    work = [(e, samples, schedule_constant, keep_iterates) for e in entries]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_entry_star, work))
    return [_run_entry_star(w) for w in work]


def fit_iteration_constant(rows) -> float | None:
    """Least-squares slope through the origin of iterations against complexity."""
    pts = [(r.complexity, r.iterations) for r in rows if r.ok and math.isfinite(r.complexity)]
    if not pts:
        return None
    f = np.array([p[0] for p in pts])
    k = np.array([p[1] for p in pts], dtype=float)
    return float(f @ k / (f @ f))


def rows_to_csv(rows) -> str:
    buf = _io.StringIO()
    names = list(ExperimentRow.__dataclass_fields__)
    w = csv.DictWriter(buf, fieldnames=names, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in asdict(r).items()})
    return buf.getvalue()


def cmd_experiment(args) -> int:
    try:
        spec = json.loads(Path(args.suite).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(str(exc)) from None
    entries = expand_suite(spec)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = run_experiment(entries, spec.get("samples", 200), spec.get("schedule_constant", 1e6), args.jobs)
    rows = [r for r, _ in results]
    for row, outcome in results:
        if outcome is not None:
            (out_dir / f"{row.id}.json").write_text(io.report_from_outcome(outcome, include_trace=False).emit())
    (out_dir / "summary.csv").write_text(rows_to_csv(rows))
    k0 = fit_iteration_constant(rows)
    worst = max((r.iterations / (k0 * r.complexity) for r in rows if r.ok and k0 and math.isfinite(r.complexity)), default=None)
    (out_dir / "fit.json").write_text(json.dumps({"K0": k0, "max_ratio": worst, "instances": len(rows)}, sort_keys=True, indent=1) + "\n")
    for r in rows:
        print(f"{r.id:40s} {r.outcome:20s} k={r.iterations:5d} bits<={r.max_bits:3d} C<={r.c_upper:.3g} {'ok' if r.ok else 'FAIL'}")
    if k0 is not None:
        print(f"K0 = {k0:.4g}, max ratio to fit = {worst:.3f}")
    return 0 if all(r.ok for r in rows) else 1


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the generic error code rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="socfeas", description="Strict feasibility of homogeneous second-order conic systems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    defaults = SolverConfig()

    s = sub.add_parser("solve", help="decide feasibility and print a JSON report")
    s.add_argument("instance")
    s.add_argument("--gamma", type=float, default=defaults.gamma_fw, help="forward accuracy of a primal certificate")
    s.add_argument("--schedule-constant", type=float, default=defaults.schedule_constant)
    s.add_argument("--fixed-precision-bits", type=int, default=None, help="run at a fixed precision instead of the schedule")
    s.add_argument("--max-iters", type=int, default=defaults.max_iterations)
    s.add_argument("--condition-estimate", action="store_true", help="add condition-number brackets to the report")
    s.add_argument("--samples", type=int, default=200, help="sample count for condition brackets")
    s.add_argument("--seed", type=int, default=0, help="seed for condition-bracket sampling")
    s.add_argument("--timing", action="store_true", help="include wall-clock time (makes reports non-reproducible)")
    s.add_argument("--no-trace", action="store_true", help="omit per-iteration records")
    s.add_argument("--output", "-o", default=None)
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", help="write a random instance with a known certificate")
    g.add_argument("kind", choices=["primal", "dual"])
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--cone", type=int, nargs="+", required=True, help="block dimensions n_1 ... n_r")
    g.add_argument("--margin", type=float, default=0.5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("check", help="verify a certificate (a report or certificate JSON)")
    c.add_argument("instance")
    c.add_argument("certificate")
    c.add_argument("--gamma", type=float, default=None, help="override the forward accuracy to check")
    c.set_defaults(func=cmd_check)

    e = sub.add_parser("experiment", help="run a suite of generated instances")
    e.add_argument("suite", help="JSON suite document")
    e.add_argument("--out", required=True)
    e.add_argument("--jobs", type=int, default=1)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SocfeasError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
