"""Instance and solution files, flux tables and network graphs.

Instance files are JSON::

    {
      "enterprises": [
        {"id": 1, "c_in_ppm": 30, "c_out_ppm": 100, "m_g_per_h": 7500},
        ...
      ],
      "prices": {"c": 0.13, "beta": 0.22, "gamma": 0.01},
      "horizon_a_h": 1.0,
      "alpha": 0.95
    }

Solution files keep every number at full precision (``repr`` of the
double) together with a hash of the instance they belong to.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from importlib import resources
from pathlib import Path

import numpy as np

from .model import (
    Enterprise, EipInstance, InstanceError, ParkOperation, Prices, compute_discharge,
    validate_instance,
)

SOLUTION_FORMAT = "eipnet-solution/1"
BUNDLED = ("eip15", "eip10")
ENTERPRISE_FIELDS = ("id", "c_in_ppm", "c_out_ppm", "m_g_per_h")
PRICE_FIELDS = ("c", "beta", "gamma")


class InstanceFileError(InstanceError):
    """Instance document that cannot be read; the message names line and field."""


class SolutionFileError(ValueError):
    """Solution document that is malformed or belongs to another instance."""


def _line_of(text: str, pattern: str, start_line: int = 1) -> int | None:
    lines = text.splitlines()
    rx = re.compile(pattern)
    for no in range(max(start_line, 1), len(lines) + 1):
        if rx.search(lines[no - 1]):
            return no
    return None


def _enterprise_line(text: str, idx: int) -> int | None:
    # the idx-th object opening inside the "enterprises" array
    m = re.search(r'"enterprises"\s*:\s*\[', text)
    if not m:
        return None
    depth, count = 0, -1
    for pos in range(m.end(), len(text)):
        ch = text[pos]
        if ch == "{":
            if depth == 0:
                count += 1
                if count == idx:
                    return text.count("\n", 0, pos) + 1
            depth += 1
        elif ch == "}":
            depth -= 1
        elif ch == "]" and depth == 0:
            break
    return None


def _where(line: int | None, field: str) -> str:
    return f"line {line}, field {field}" if line else f"field {field}"


def _number(value, line, field, text_name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InstanceFileError(f"{text_name}: {_where(line, field)}: expected a number, "
                                f"got {json.dumps(value)}")
    return float(value)


def parse_instance(text: str, name: str = "<instance>", alpha: float | None = None) -> EipInstance:
    """Parse and validate an instance document.

    Raises
    ------
    InstanceFileError
        With the file name, the line (when it can be located) and the field
        path of the first problem.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFileError(f"{name}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise InstanceFileError(f"{name}: line 1: top level must be an object")
    for key in ("enterprises", "prices"):
        if key not in doc:
            raise InstanceFileError(f"{name}: field {key}: missing")
    ents = doc["enterprises"]
    if not isinstance(ents, list) or not ents:
        where = _where(_line_of(text, r'"enterprises"'), "enterprises")
        raise InstanceFileError(f"{name}: {where}: expected a non-empty list")
    enterprises = []
    for idx, e in enumerate(ents):
        line = _enterprise_line(text, idx)
        if not isinstance(e, dict):
            raise InstanceFileError(f"{name}: {_where(line, f'enterprises[{idx}]')}: expected an object")
        for f in ENTERPRISE_FIELDS:
            if f not in e:
                raise InstanceFileError(f"{name}: {_where(line, f'enterprises[{idx}].{f}')}: missing")
        unknown = set(e) - set(ENTERPRISE_FIELDS)
        if unknown:
            raise InstanceFileError(f"{name}: {_where(line, f'enterprises[{idx}]')}: "
                                    f"unknown field(s) {sorted(unknown)}")
        fline = {f: _line_of(text, rf'"{f}"', line or 1) for f in ENTERPRISE_FIELDS}
        vals = {f: _number(e[f], fline[f], f"enterprises[{idx}].{f}", name)
                for f in ENTERPRISE_FIELDS}
        if vals["id"] != int(vals["id"]):
            raise InstanceFileError(f"{name}: {_where(fline['id'], f'enterprises[{idx}].id')}: "
                                    "id must be an integer")
        enterprises.append(Enterprise(int(vals["id"]), vals["c_in_ppm"], vals["c_out_ppm"],
                                      vals["m_g_per_h"]))
    p = doc["prices"]
    pline = _line_of(text, r'"prices"')
    if not isinstance(p, dict):
        raise InstanceFileError(f"{name}: {_where(pline, 'prices')}: expected an object")
    for f in PRICE_FIELDS:
        if f not in p:
            raise InstanceFileError(f"{name}: {_where(pline, f'prices.{f}')}: missing")
    pv = {f: _number(p[f], _line_of(text, rf'"{f}"', pline or 1), f"prices.{f}", name)
          for f in PRICE_FIELDS}
    horizon = _number(doc.get("horizon_a_h", 1.0), _line_of(text, r'"horizon_a_h"'),
                      "horizon_a_h", name)
    alpha_given = alpha is not None
    if alpha is None:
        if "alpha" not in doc:
            raise InstanceFileError(f"{name}: field alpha: missing (or pass it explicitly)")
        alpha = _number(doc["alpha"], _line_of(text, r'"alpha"'), "alpha", name)
    inst = EipInstance(tuple(enterprises), Prices(pv["c"], pv["beta"], pv["gamma"], horizon),
                       float(alpha))
    try:
        validate_instance(inst)
    except InstanceError as exc:
        msg = str(exc)
        m = re.search(r"enterprise (\d+)", msg)
        line = None
        if m:
            ids = [e.id for e in enterprises]
            if int(m.group(1)) in ids:
                line = _enterprise_line(text, ids.index(int(m.group(1))))
        elif "alpha" in msg:
            if alpha_given:
                raise InstanceFileError(f"alpha override: {msg}") from None
            line = _line_of(text, r'"alpha"')
        elif "price" in msg or "gamma" in msg:
            line = pline
        where = f"line {line}: " if line else ""
        raise InstanceFileError(f"{name}: {where}{msg}") from None
    return inst


def load_instance(source: str | Path, alpha: float | None = None) -> EipInstance:
    """Read an instance from a path or a bundled fixture name (``eip15``, ``eip10``)."""
    text, name = _read_source(source)
    return parse_instance(text, name, alpha)


def _read_source(source) -> tuple[str, str]:
    s = str(source)
    if s in BUNDLED or s in ("eip15_reference",):
        return resources.files("eipnet.data").joinpath(f"{s}.json").read_text(), s
    path = Path(s)
    try:
        return path.read_text(), str(path)
    except OSError as exc:
        raise InstanceFileError(f"{path}: cannot read ({exc.strerror})") from None


def instance_to_dict(inst: EipInstance) -> dict:
    return {
        "enterprises": [{"id": e.id, "c_in_ppm": e.c_in, "c_out_ppm": e.c_out,
                         "m_g_per_h": e.m} for e in inst.enterprises],
        "prices": {"c": inst.prices.c, "beta": inst.prices.beta, "gamma": inst.prices.gamma},
        "horizon_a_h": inst.prices.horizon_a,
        "alpha": inst.alpha,
    }


def save_instance(inst: EipInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=2) + "\n")


def instance_hash(inst: EipInstance) -> str:
    """SHA-256 over the canonical parameter document (alpha included)."""
    canon = json.dumps(instance_to_dict(inst), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def solution_to_dict(op: ParkOperation, inst: EipInstance, edges=None, **meta) -> dict:
    doc = {
        "format": SOLUTION_FORMAT,
        "instance_hash": instance_hash(inst),
        "n": inst.n,
        "z": [float(v) for v in op.z],
        "flux": [[float(v) for v in row] for row in op.flux],
        "y_null": [bool(v) for v in op.y_null],
        "y_act": [bool(v) for v in op.y_act],
        "y_pos": [bool(v) for v in op.y_pos],
    }
    if edges is not None:
        doc["network"] = [list(e) for e in sorted(edges)]
    doc.update(meta)
    return doc


def save_solution(path: str | Path, op: ParkOperation, inst: EipInstance, edges=None,
                  **meta) -> None:
    """Write the operation at full precision (Python's JSON floats round-trip)."""
    Path(path).write_text(json.dumps(solution_to_dict(op, inst, edges, **meta), indent=1) + "\n")


def load_solution(source: str | Path, inst: EipInstance,
                  check_hash: bool = True) -> tuple[ParkOperation, set | None, dict]:
    """Read a solution file; returns ``(operation, network or None, raw document)``."""
    text, name = _read_source(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SolutionFileError(f"{name}: line {exc.lineno}: {exc.msg}") from None
    if doc.get("format") != SOLUTION_FORMAT:
        raise SolutionFileError(f"{name}: not a {SOLUTION_FORMAT} document")
    if check_hash and doc.get("instance_hash") != instance_hash(inst):
        raise SolutionFileError(f"{name}: solution belongs to a different instance "
                                "(instance hash mismatch)")
    n = inst.n
    try:
        z = np.array(doc["z"], dtype=float)
        flux = np.array(doc["flux"], dtype=float)
        ys = [np.array(doc[k], dtype=bool) for k in ("y_null", "y_act", "y_pos")]
    except (KeyError, ValueError, TypeError) as exc:
        raise SolutionFileError(f"{name}: malformed field ({exc})") from None
    if z.shape != (n,) or flux.shape != (n, n) or any(y.shape != (n,) for y in ys):
        raise SolutionFileError(f"{name}: dimensions do not match {n} enterprises")
    op = ParkOperation(z, flux, *ys)
    op.discharge = compute_discharge(op, inst)
    edges = None
    if "network" in doc:
        edges = {(int(a), int(b)) for a, b in doc["network"]}
    return op, edges, doc


def write_flux_csv(path_or_stream, op: ParkOperation, discharge=None) -> None:
    """Flux matrix with a row per sender and columns ``1..n, Sink``."""
    n = len(op.z)
    disc = op.discharge if discharge is None else discharge
    own = isinstance(path_or_stream, (str, Path))
    fh = open(path_or_stream, "w", newline="") if own else path_or_stream
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from"] + [str(j + 1) for j in range(n)] + ["Sink"])
        for i in range(n):
            w.writerow([i + 1] + [repr(float(v)) for v in op.flux[i]] + [repr(float(disc[i]))])
    finally:
        if own:
            fh.close()


def read_flux_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    data = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return data[:, :-1], data[:, -1]


def to_dot(op: ParkOperation, edges, name: str = "eip") -> str:
    """Graphviz text: gray nodes draw fresh water, dashed nodes are excluded.

    The sink is the square node ``0``; every edge carries its flux at two
    decimals.
    """
    n = len(op.z)
    disc = op.discharge if op.discharge is not None else np.zeros(n)
    lines = [f"digraph {name} {{", "  rankdir=LR;",
             '  "0" [shape=square, label="0"];']
    for i in range(n):
        styles = []
        if op.z[i] > 1e-7:
            styles.append("filled")
        if op.y_null[i]:
            styles.append("dashed")
        attr = [f'label="{i + 1}"']
        if styles:
            attr.append(f'style="{",".join(styles)}"')
        if "filled" in styles:
            attr.append('fillcolor="gray"')
        lines.append(f'  "{i + 1}" [{", ".join(attr)}];')
    for k, j in sorted(edges):
        val = disc[k - 1] if j == 0 else op.flux[k - 1, j - 1]
        lines.append(f'  "{k}" -> "{j}" [label="{val:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
