"""Text instance files and JSON run reports.

Instance files are line oriented::

    version: 1
    m: 2
    cone: 2 3
    kind: primal          (optional)
    seed: 11              (optional)
    margin: 0.5           (optional)
    matrix:
    <m rows of N decimal entries>
    certificate:          (optional)
    <N or m decimal entries>

Numbers are written with the shortest representation that round-trips.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .conditioning import Instance
from .errors import ParseError
from .lorentz import ConeStructure

FORMAT_VERSION = 1


def _fmt(v: float) -> str:
    return repr(float(v))


def format_instance(inst: Instance) -> str:
    lines = [f"version: {FORMAT_VERSION}", f"m: {inst.A.shape[0]}", "cone: " + " ".join(map(str, inst.cone.block_dims))]
    if inst.kind is not None:
        lines.append(f"kind: {inst.kind}")
    if inst.seed is not None:
        lines.append(f"seed: {int(inst.seed)}")
    if inst.margin is not None:
        lines.append(f"margin: {_fmt(inst.margin)}")
    lines.append("matrix:")
    lines += [" ".join(_fmt(v) for v in row) for row in inst.A]
    if inst.certificate is not None:
        lines.append("certificate:")
        lines.append(" ".join(_fmt(v) for v in inst.certificate))
    return "\n".join(lines) + "\n"


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(format_instance(inst))


def _floats(line: str, lineno: int) -> list[float]:
    try:
        return [float(t) for t in line.split()]
    except ValueError as exc:
        raise ParseError(f"line {lineno}: {exc}") from None


def parse_instance(text: str) -> Instance:
    lines = [ln.strip() for ln in text.splitlines()]
    header: dict[str, str] = {}
    i = 0
    while i < len(lines) and lines[i] != "matrix:":
        ln = lines[i]
        if ln and not ln.startswith("#"):
            if ":" not in ln:
                raise ParseError(f"line {i + 1}: expected 'key: value'")
            key, val = ln.split(":", 1)
            header[key.strip()] = val.strip()
        i += 1
    if header.get("version") != str(FORMAT_VERSION):
        raise ParseError(f"unsupported or missing version: {header.get('version')!r}")
    if i == len(lines):
        raise ParseError("missing 'matrix:' section")
    try:
        m = int(header["m"])
        cone = ConeStructure(tuple(int(t) for t in header["cone"].split()))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"bad header: {exc}") from None
    if m < 1:
        raise ParseError("m must be positive")
    N = cone.ambient_dim
    rows = []
    i += 1
    while i < len(lines) and lines[i] != "certificate:" and len(rows) < m:
        if lines[i]:
            rows.append(_floats(lines[i], i + 1))
        i += 1
    entries = sum(len(r) for r in rows)
    if len(rows) != m or any(len(r) != N for r in rows):
        raise ParseError(f"expected {m} x {N} = {m * N} matrix entries, found {entries}")
    cert = None
    while i < len(lines) and not lines[i]:
        i += 1
    if i < len(lines):
        if lines[i] != "certificate:":
            raise ParseError(f"line {i + 1}: unexpected content after the matrix")
        rest = [v for j in range(i + 1, len(lines)) for v in _floats(lines[j], j + 1)]
        cert = np.array(rest)
    kind = header.get("kind")
    if kind not in (None, "primal", "dual"):
        raise ParseError(f"unknown kind {kind!r}")
    if cert is not None and kind is None:
        raise ParseError("a certificate needs a 'kind' header")
    if cert is not None and len(cert) != (N if kind == "primal" else m):
        raise ParseError("certificate length does not match its kind")
    try:
        seed = int(header["seed"]) if "seed" in header else None
        margin = float(header["margin"]) if "margin" in header else None
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return Instance(np.array(rows, dtype=float), cone, kind, cert, seed, margin)


def read_instance(path) -> Instance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc)) from None
    return parse_instance(text)


def _clean(v):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


@dataclass
class RunReport:
    outcome: str
    iterations: int
    max_bits: int
    certificate: dict | None
    config: dict
    trace: list[dict] = field(default_factory=list)
    c_u: float | None = None
    condition: dict | None = None
    wall_clock: float | None = None
    version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        d = _clean(asdict(self))
        if d["wall_clock"] is None:
            d.pop("wall_clock")
        return d

    def emit(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def parse(cls, text: str) -> "RunReport":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"report is not JSON: {exc}") from None
        if d.get("version") != FORMAT_VERSION:
            raise ParseError("unsupported report version")
        d.setdefault("wall_clock", None)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ParseError(str(exc)) from None


def report_from_outcome(outcome, condition=None, wall_clock=None, include_trace=True) -> RunReport:
    cert = None
    if outcome.status == "primal":
        cert = {
            "kind": "primal",
            "x_hat": outcome.x_hat,
            "x_assoc": outcome.x_assoc,
            "x_hat_raw": outcome.x_hat_raw,
            "gamma": outcome.config.gamma_fw,
        }
    elif outcome.status == "dual":
        cert = {"kind": "dual", "y": outcome.y}
    cfg = asdict(outcome.config)
    cfg.pop("keep_iterates")
    return RunReport(
        outcome=outcome.status,
        iterations=outcome.iterations,
        max_bits=outcome.max_bits,
        certificate=_clean(cert),
        config=_clean(cfg),
        trace=[_clean(asdict(r)) for r in outcome.trace] if include_trace else [],
        c_u=outcome.c_u,
        condition=_clean(condition),
        wall_clock=wall_clock,
    )


def condition_to_dict(est) -> dict:
    return {
        "rho_p": list(est.rho_p_bracket.as_tuple()),
        "rho_d": list(est.rho_d_bracket.as_tuple()),
        "c": list(est.c_bracket.as_tuple()),
        "samples": est.samples,
        "seed": est.seed,
    }
