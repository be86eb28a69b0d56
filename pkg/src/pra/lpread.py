"""Reader for the LP subset produced by :func:`pra.model.write_lp`.

Handles one objective, linear rows with integer coefficients, a ``Binary``
section and ``\\`` comments. Enough for adapters that take our files and
hand them to a solver library.
"""

from __future__ import annotations

import re

from .model import EQ, GE, LE, MAX, MIN, BipModel, LinearConstraint, Objective, Tag, VarRef

_REL = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}
_SECTIONS = {"maximize": "obj", "maximise": "obj", "max": "obj", "minimize": "obj", "minimise": "obj",
             "min": "obj", "subject to": "rows", "such that": "rows", "st": "rows", "s.t.": "rows",
             "binary": "bin", "binaries": "bin", "bin": "bin", "end": "end"}
_TOKEN = re.compile(r"<=|>=|=<|=>|[<>=+-]|[^\s<>=+-]+")


class LpParseError(ValueError):
    pass


def _parse_number(tok: str, lineno: int) -> int:
    try:
        x = float(tok)
    except ValueError:
        raise LpParseError(f"line {lineno}: expected a number, got {tok!r}") from None
    if x != int(x):
        raise LpParseError(f"line {lineno}: non-integer coefficient {tok}")
    return int(x)


def _linear(tokens: list[str], lineno: int) -> list[tuple[int, str]]:
    terms = []
    sign, coef = 1, None
    for tok in tokens:
        if tok in "+-":
            sign = -sign if tok == "-" else sign
            continue
        if re.fullmatch(r"[0-9.eE]+", tok):
            coef = _parse_number(tok, lineno)
            continue
        terms.append((sign * (1 if coef is None else coef), tok))
        sign, coef = 1, None
    if coef is not None:
        raise LpParseError(f"line {lineno}: dangling coefficient")
    return terms


def read_lp(text: str) -> BipModel:
    section = None
    sense = None
    statements: dict[str, list[tuple[str, int]]] = {"obj": [], "rows": []}
    binaries: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTIONS:
            section = _SECTIONS[key]
            if section == "obj":
                sense = MAX if key.startswith("max") else MIN
            continue
        if section is None:
            raise LpParseError(f"line {lineno}: content before any section")
        if section == "end":
            raise LpParseError(f"line {lineno}: content after End")
        if section == "bin":
            binaries.extend(line.split())
            continue
        # a new statement starts with "label:"; anything else continues the last one
        if re.match(r"^[A-Za-z_][A-Za-z0-9_.]*\s*:", line) or not statements[section]:
            statements[section].append((line, lineno))
        else:
            prev, n = statements[section][-1]
            statements[section][-1] = (prev + " " + line, n)
    if sense is None:
        raise LpParseError("missing objective section")

    names: list[str] = list(dict.fromkeys(binaries))
    index = {n: i for i, n in enumerate(names)}

    def idx(name: str, lineno: int) -> int:
        if name not in index:
            raise LpParseError(f"line {lineno}: variable {name!r} is not declared binary")
        return index[name]

    obj_terms: list[tuple[int, int]] = []
    for body, lineno in statements["obj"]:
        _, _, expr = body.partition(":") if ":" in body else ("", "", body)
        obj_terms += [(a, idx(n, lineno)) for a, n in _linear(_TOKEN.findall(expr), lineno) if a != 0]

    rows = []
    for body, lineno in statements["rows"]:
        label, _, expr = body.partition(":") if re.match(r"^[A-Za-z_][A-Za-z0-9_.]*\s*:", body) else ("", "", body)
        toks = _TOKEN.findall(expr)
        rel_at = [k for k, t in enumerate(toks) if t in _REL]
        if len(rel_at) != 1:
            raise LpParseError(f"line {lineno}: expected exactly one relation")
        k = rel_at[0]
        rhs_toks = toks[k + 1:]
        rhs_sign = 1
        if rhs_toks and rhs_toks[0] in "+-":
            rhs_sign = -1 if rhs_toks[0] == "-" else 1
            rhs_toks = rhs_toks[1:]
        if len(rhs_toks) != 1:
            raise LpParseError(f"line {lineno}: right-hand side must be a single number")
        terms = tuple((a, idx(n, lineno)) for a, n in _linear(toks[:k], lineno))
        rows.append(LinearConstraint(terms, _REL[toks[k]], rhs_sign * _parse_number(rhs_toks[0], lineno),
                                     label.strip()))

    refs = tuple(VarRef(i, n, Tag.OTHER) for i, n in enumerate(names))
    return BipModel(refs, tuple(rows), (Objective(sense, tuple(obj_terms), 0, "obj"),), "lp")
