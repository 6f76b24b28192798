"""Plain-text LP dump of a :class:`MipModel` for external cross-checks.

The output follows the common CPLEX LP layout (``Minimize``, ``Subject To``,
``Bounds``, ``Binary``, ``End``) and prints every coefficient with ``repr``
so that a round trip through another reader is lossless.
"""

from __future__ import annotations

import math
import re

from .model import MipModel

_BAD = re.compile(r"[^A-Za-z0-9_.]")
_LINE = 8  # terms per output line


def _name(s: str) -> str:
    s = _BAD.sub("_", s)
    return s if s and not (s[0].isdigit() or s[0] == ".") else "x" + s


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


def _terms(coefs, names) -> list[str]:
    out = []
    for j, v in coefs:
        if v == 0.0:
            continue
        sign = "-" if v < 0 else "+"
        out.append(f"{sign} {_num(abs(v))} {names[j]}")
    if not out:
        return ["0 " + names[0]] if names else ["0"]
    if out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(prefix: str, terms: list[str], tail: str = "") -> str:
    lines = []
    for s in range(0, len(terms), _LINE):
        lines.append(" ".join(terms[s:s + _LINE]))
    body = ("\n   ").join(lines)
    return f" {prefix}{body}{tail}"


def write_lp(model: MipModel) -> str:
    """Return the model as LP text."""
    names = [_name(v.name) for v in model.variables]
    if len(set(names)) != len(names):
        raise ValueError("variable names collide after sanitising")
    out = [f"\\ {model.name}", "Minimize"]
    obj = sorted(model.objective.items())
    out.append(_wrap("obj: ", _terms(obj, names)))
    out.append("Subject To")
    for con in model.constraints:
        out.append(_wrap(f"{_name(con.name)}: ", _terms(con.coefs, names),
                         f" {con.sense} {_num(con.rhs)}"))
    out.append("Bounds")
    for v, nm in zip(model.variables, names):
        if v.kind == "binary" and v.lb == 0.0 and v.ub == 1.0:
            continue
        if math.isinf(v.lb) and math.isinf(v.ub):
            out.append(f" {nm} free")
        elif v.lb == v.ub:
            out.append(f" {nm} = {_num(v.lb)}")
        elif math.isinf(v.ub):
            if v.lb != 0.0:
                out.append(f" {nm} >= {_num(v.lb)}")
        else:
            out.append(f" {_num(v.lb)} <= {nm} <= {_num(v.ub)}")
    bins = [nm for v, nm in zip(model.variables, names) if v.kind == "binary"]
    if bins:
        out.append("Binary")
        for s in range(0, len(bins), _LINE):
            out.append(" " + " ".join(bins[s:s + _LINE]))
    out.append("End")
    return "\n".join(out) + "\n"


def save_lp(model: MipModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_lp(model))
