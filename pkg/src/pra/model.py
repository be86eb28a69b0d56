"""Solver-agnostic binary integer programs.

A :class:`BipModel` holds binary variables, integer linear constraints and an
ordered objective stack (position = lexicographic priority). Models render to
LP text, read back solutions in the plain ``name value`` format, and can be
solved by :func:`bruteforce_solve` when they are tiny.
"""

from __future__ import annotations

import re
import sys
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Sequence

NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
INT_TOL = 1e-6

LE, EQ, GE = "<=", "=", ">="
MAX, MIN = "max", "min"


class ModelError(ValueError):
    pass


class SolutionParseError(ValueError):
    pass


class Tag(str, Enum):
    ASSIGN_PRT = "AssignPRT"
    ASSIGN_PR = "AssignPR"
    FEMALE_ROOM = "FemaleRoom"
    MALE_ROOM = "MaleRoom"
    SINGLE_ROOM = "SingleRoom"
    TRANSFER = "Transfer"
    OTHER = "Other"


@dataclass(frozen=True)
class VarRef:
    index: int
    name: str
    tag: Tag = Tag.OTHER
    patient: str | None = None
    room: str | None = None
    period: int | None = None


Terms = tuple[tuple[int, int], ...]  # (coefficient, variable index)


@dataclass(frozen=True)
class LinearConstraint:
    terms: Terms
    relation: str
    rhs: int
    label: str = ""

    def activity(self, values: Sequence[int]) -> int:
        return sum(a * values[j] for a, j in self.terms)

    def satisfied(self, values: Sequence[int]) -> bool:
        lhs = self.activity(values)
        if self.relation == LE:
            return lhs <= self.rhs
        if self.relation == GE:
            return lhs >= self.rhs
        return lhs == self.rhs


@dataclass(frozen=True)
class Objective:
    sense: str
    terms: Terms
    constant: int = 0
    label: str = ""

    def value(self, values: Sequence[int]) -> int:
        return self.constant + sum(a * values[j] for a, j in self.terms)


@dataclass(frozen=True)
class BipModel:
    vars: tuple[VarRef, ...]
    constraints: tuple[LinearConstraint, ...]
    objectives: tuple[Objective, ...]
    name: str = "pra"
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.objectives:
            raise ModelError("a model needs at least one objective (use the constant 0)")
        n = len(self.vars)
        for v, ref in enumerate(self.vars):
            if ref.index != v:
                raise ModelError(f"variable {ref.name} has index {ref.index}, expected {v}")
        for c in self.constraints:
            if c.relation not in (LE, EQ, GE):
                raise ModelError(f"bad relation {c.relation!r}")
            for a, j in c.terms:
                if not 0 <= j < n or not isinstance(a, int):
                    raise ModelError(f"constraint {c.label}: bad term ({a}, {j})")
        for o in self.objectives:
            if o.sense not in (MAX, MIN):
                raise ModelError(f"bad sense {o.sense!r}")
            for a, j in o.terms:
                if not 0 <= j < n:
                    raise ModelError(f"objective {o.label}: unknown variable {j}")

    @property
    def by_name(self) -> dict[str, VarRef]:
        cache = self.__dict__.get("_by_name")
        if cache is None:
            cache = {v.name: v for v in self.vars}
            object.__setattr__(self, "_by_name", cache)
        return cache

    def with_constraints(self, extra: Iterable[LinearConstraint]) -> "BipModel":
        return replace(self, constraints=self.constraints + tuple(extra))

    def with_objectives(self, objectives: Sequence[Objective]) -> "BipModel":
        return replace(self, objectives=tuple(objectives))

    def violated(self, values: Sequence[int]) -> list[LinearConstraint]:
        return [c for c in self.constraints if not c.satisfied(values)]


class ModelBuilder:
    """Mutable helper that assembles a :class:`BipModel`."""

    def __init__(self, name: str = "pra"):
        self.name = name
        self.vars: list[VarRef] = []
        self.constraints: list[LinearConstraint] = []
        self.objectives: list[Objective] = []
        self._names: set[str] = set()

    def var(self, name: str, tag: Tag = Tag.OTHER, patient=None, room=None, period=None) -> int:
        if not NAME_RE.fullmatch(name):
            raise ModelError(f"illegal variable name {name!r}")
        if name in self._names:
            raise ModelError(f"duplicate variable name {name!r}")
        self._names.add(name)
        ref = VarRef(len(self.vars), name, tag, patient, room, period)
        self.vars.append(ref)
        return ref.index

    def add(self, terms: Iterable[tuple[int, int]], relation: str, rhs: int, label: str = "") -> None:
        merged: dict[int, int] = {}
        for a, j in terms:
            merged[j] = merged.get(j, 0) + a
        clean = tuple((a, j) for j, a in merged.items() if a != 0)
        if not clean:
            return
        self.constraints.append(LinearConstraint(clean, relation, rhs, label))

    def objective(self, sense: str, terms: Iterable[tuple[int, int]], constant: int = 0,
                  label: str = "") -> None:
        merged: dict[int, int] = {}
        for a, j in terms:
            merged[j] = merged.get(j, 0) + a
        clean = tuple((a, j) for j, a in merged.items() if a != 0)
        self.objectives.append(Objective(sense, clean, constant, label))

    def build(self, **meta) -> BipModel:
        objectives = self.objectives or [Objective(MAX, (), 0, "zero")]
        return BipModel(tuple(self.vars), tuple(self.constraints), tuple(objectives), self.name, meta)


@dataclass(frozen=True)
class VarAssignment:
    values: tuple[int, ...]

    def __getitem__(self, key: int | VarRef) -> int:
        return self.values[key.index if isinstance(key, VarRef) else key]

    def __len__(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# LP text


def _expr(terms: Terms, names: Sequence[str]) -> list[str]:
    out = []
    for k, (a, j) in enumerate(sorted(terms, key=lambda t: t[1])):
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        body = names[j] if mag == 1 else f"{mag} {names[j]}"
        if k == 0:
            out.append(body if sign == "+" else f"- {body}")
        else:
            out.append(f"{sign} {body}")
    return out


def _wrap(head: str, tokens: list[str], tail: str = "", width: int = 200) -> list[str]:
    lines, cur = [], head
    for tok in tokens:
        if len(cur) + 1 + len(tok) > width and cur.strip():
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    cur = f"{cur} {tail}" if tail else cur
    lines.append(cur)
    return lines


def write_lp(model: BipModel, objective_index: int = 0) -> str:
    """Render one objective and all constraints as LP text."""
    if not 0 <= objective_index < len(model.objectives):
        raise IndexError(f"objective index {objective_index} out of range")
    obj = model.objectives[objective_index]
    names = [v.name for v in model.vars]
    lines = [f"\\ model {model.name}", f"\\ objective {objective_index}: {obj.label}"]
    if obj.constant:
        lines.append(f"\\ objective constant {obj.constant} (not part of the expression below)")
    lines.append("Maximize" if obj.sense == MAX else "Minimize")
    obj_tokens = _expr(obj.terms, names)
    if not obj_tokens and names:
        obj_tokens = [f"0 {names[0]}"]  # some readers reject an empty objective
    lines.extend(_wrap(" obj:", obj_tokens))
    lines.append("Subject To")
    for k, c in enumerate(model.constraints):
        lines.extend(_wrap(f" c{k}:", _expr(c.terms, names), f"{c.relation} {c.rhs}"))
    lines.append("Binary")
    lines.extend(f" {n}" for n in names)
    lines.append("End")
    return "\n".join(lines) + "\n"


def render_solution(model: BipModel, values: VarAssignment | Sequence[int], status: str | None = None) -> str:
    vals = values.values if isinstance(values, VarAssignment) else values
    lines = [f"STATUS {status}"] if status else []
    lines.extend(f"{v.name} {vals[v.index]}" for v in model.vars)
    return "\n".join(lines) + "\n"


def parse_solution(text: str, model: BipModel) -> VarAssignment:
    """Read ``name value`` lines; missing variables default to 0."""
    values = [0] * len(model.vars)
    by_name = model.by_name
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("STATUS"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"line {lineno}: expected 'name value', got {raw!r}")
        name, num = parts
        ref = by_name.get(name)
        if ref is None:
            raise SolutionParseError(f"line {lineno}: unknown variable {name!r}")
        try:
            x = float(num)
        except ValueError:
            raise SolutionParseError(f"line {lineno}: bad number {num!r}") from None
        if abs(x) <= INT_TOL:
            values[ref.index] = 0
        elif abs(x - 1) <= INT_TOL:
            values[ref.index] = 1
        else:
            raise SolutionParseError(f"line {lineno}: {name} = {num} is not binary")
    return VarAssignment(tuple(values))


# ---------------------------------------------------------------------------
# embedded exhaustive solver


OPTIMAL, INFEASIBLE, NODE_LIMIT, TIME_LIMIT = "Optimal", "Infeasible", "NodeLimit", "TimeLimit"

_BRANCH_RANK = {Tag.SINGLE_ROOM: 0, Tag.ASSIGN_PR: 1, Tag.ASSIGN_PRT: 1,
                Tag.FEMALE_ROOM: 2, Tag.MALE_ROOM: 2, Tag.OTHER: 3, Tag.TRANSFER: 4}


class _Limit(Exception):
    pass


class _Search:
    """Depth-first search over 0/1 values with activity-bound propagation.

    Every constraint is kept as ``sum(a_j x_j) <= rhs``. ``minact`` holds the
    smallest reachable activity given the fixings; a variable whose
    coefficient exceeds the remaining slack is forced to its cheaper value.
    The objective sits in an extra row whose right-hand side tightens with
    each incumbent, so the bound prunes through the same propagation.
    """

    def __init__(self, model: BipModel, objective: Objective | None, node_limit: int,
                 deadline: float | None):
        n = len(model.vars)
        rows: list[tuple[list[int], list[int], int]] = []
        for c in model.constraints:
            coefs = [a for a, _ in c.terms]
            idx = [j for _, j in c.terms]
            if c.relation in (LE, EQ):
                rows.append((coefs, idx, c.rhs))
            if c.relation in (GE, EQ):
                rows.append(([-a for a in coefs], idx, -c.rhs))
        self.obj_row = -1
        self.objective = objective
        if objective is not None and objective.terms:
            sign = -1 if objective.sense == MAX else 1
            rows.append(([sign * a for a, _ in objective.terms], [j for _, j in objective.terms],
                          10 ** 12))
            self.obj_row = len(rows) - 1
        self.coef = [r[0] for r in rows]
        self.idx = [r[1] for r in rows]
        self.rhs = [r[2] for r in rows]
        self.maxabs = [max((abs(a) for a in r[0]), default=0) for r in rows]
        self.minact = [sum(a for a in r[0] if a < 0) for r in rows]
        self.occ: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for k, (coefs, idx, _) in enumerate(rows):
            for a, j in zip(coefs, idx):
                self.occ[j].append((k, a))
        self.val = [-1] * n
        self.trail: list[int] = []
        self.nodes = 0
        self.node_limit = node_limit
        self.deadline = deadline
        self.best: tuple[int, ...] | None = None
        self.best_value: int | None = None

        obj_coef = [0] * n
        if objective is not None:
            for a, j in objective.terms:
                obj_coef[j] = a if objective.sense == MAX else -a
        self.first_value = [1 if obj_coef[j] > 0 or (obj_coef[j] == 0 and model.vars[j].tag != Tag.TRANSFER)
                            else 0 for j in range(n)]
        self.order = sorted(range(n), key=lambda j: (_BRANCH_RANK[model.vars[j].tag], -obj_coef[j],
                                                     model.vars[j].period or 0, j))

    def _fix(self, j: int, x: int, queue: list[int]) -> bool:
        self.val[j] = x
        self.trail.append(j)
        ok = True
        minact, rhs = self.minact, self.rhs
        for k, a in self.occ[j]:
            if x:
                if a > 0:
                    minact[k] += a
            elif a < 0:
                minact[k] -= a
            if minact[k] > rhs[k]:
                ok = False
            queue.append(k)
        return ok

    def _undo(self, mark: int) -> None:
        val, minact, trail = self.val, self.minact, self.trail
        while len(trail) > mark:
            j = trail.pop()
            x = val[j]
            for k, a in self.occ[j]:
                if x:
                    if a > 0:
                        minact[k] -= a
                elif a < 0:
                    minact[k] += a
            val[j] = -1

    def _propagate(self, queue: list[int]) -> bool:
        val, minact, rhs, maxabs = self.val, self.minact, self.rhs, self.maxabs
        while queue:
            k = queue.pop()
            slack = rhs[k] - minact[k]
            if slack < 0:
                return False
            if slack >= maxabs[k]:
                continue
            for a, j in zip(self.coef[k], self.idx[k]):
                if val[j] < 0 and abs(a) > slack:
                    if not self._fix(j, 0 if a > 0 else 1, queue):
                        return False
                    slack = rhs[k] - minact[k]
                    if slack < 0:
                        return False
        return True

    def run(self) -> str:
        queue = list(range(len(self.rhs)))
        if not self._propagate(queue):
            return INFEASIBLE
        try:
            self._dfs(0)
        except _Limit as exc:
            return str(exc)
        return OPTIMAL if self.best is not None else INFEASIBLE

    def _dfs(self, pos: int) -> None:
        self.nodes += 1
        if self.nodes > self.node_limit:
            raise _Limit(NODE_LIMIT)
        if self.deadline is not None and self.nodes % 512 == 0 and time.monotonic() > self.deadline:
            raise _Limit(TIME_LIMIT)
        if self.obj_row >= 0 and self.minact[self.obj_row] > self.rhs[self.obj_row]:
            return
        order, val = self.order, self.val
        while pos < len(order) and val[order[pos]] >= 0:
            pos += 1
        if pos == len(order):
            self._record()
            return
        j = order[pos]
        first = self.first_value[j]
        for x in (first, 1 - first):
            mark = len(self.trail)
            queue: list[int] = []
            if self._fix(j, x, queue) and self._propagate(queue):
                self._dfs(pos + 1)
            self._undo(mark)
            if self.obj_row >= 0 and self.minact[self.obj_row] > self.rhs[self.obj_row]:
                return

    def _record(self) -> None:
        values = tuple(self.val)
        if self.objective is None:
            self.best = values
            raise _Limit(OPTIMAL)
        value = self.objective.value(values)
        self.best, self.best_value = values, value
        if self.obj_row >= 0:
            # row is  sign * expr <= rhs ; demand a strict improvement
            expr = value - self.objective.constant
            self.rhs[self.obj_row] = -(expr + 1) if self.objective.sense == MAX else expr - 1
        else:
            raise _Limit(OPTIMAL)


@dataclass
class BruteforceResult:
    status: str
    objective_values: list[int]
    values: VarAssignment | None
    nodes: int = 0


def solve_single(model: BipModel, objective_index: int | None, node_limit: int = 10 ** 7,
                 time_limit: float | None = None) -> tuple[str, VarAssignment | None, int]:
    """Optimise one objective of ``model``; ``None`` means feasibility only.

    Returns ``(status, values, nodes)``. ``values`` is the incumbent, which
    may be set even when a limit was hit.
    """
    objective = None if objective_index is None else model.objectives[objective_index]
    deadline = None if time_limit is None else time.monotonic() + time_limit
    search = _Search(model, objective, node_limit, deadline)
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * len(model.vars) + 1000))
    try:
        status = search.run()
    finally:
        sys.setrecursionlimit(old)
    values = VarAssignment(search.best) if search.best is not None else None
    if status == OPTIMAL and values is None:
        status = INFEASIBLE
    return status, values, search.nodes


def fixing_constraint(objective: Objective, value: int, label: str) -> LinearConstraint:
    """Pin an integral objective to ``value`` (exact, no tolerance needed)."""
    return LinearConstraint(objective.terms, EQ, value - objective.constant, label)


def bruteforce_solve(model: BipModel, node_limit: int = 10 ** 7,
                     time_limit: float | None = None) -> BruteforceResult:
    """Lexicographic optimum by exhaustive search, one objective at a time."""
    if node_limit <= 0:
        raise ValueError("node_limit must be positive")
    current = model
    achieved: list[int] = []
    values = None
    nodes = 0
    for k, obj in enumerate(model.objectives):
        if not obj.terms:
            status, stage_values, used = solve_single(current, None, node_limit - nodes, time_limit)
        else:
            status, stage_values, used = solve_single(current, k, node_limit - nodes, time_limit)
        nodes += used
        if status != OPTIMAL:
            return BruteforceResult(status, achieved, stage_values or values, nodes)
        values = stage_values
        value = obj.value(values.values)
        achieved.append(value)
        if k + 1 < len(model.objectives) and obj.terms:
            current = current.with_constraints([fixing_constraint(obj, value, f"fix_obj{k}")])
    return BruteforceResult(OPTIMAL, achieved, values, nodes)
