"""Binary programs for patient-to-room assignment.

Variant letters follow the usual catalogue:

* A-D  minimise transfers with per-period assignment variables, differing in
  how capacity and sex separation are written;
* E, F, H, I, K  add single rooms for private patients;
* M, N, O, P  one room per stay (no transfers), pre-assignments hard;
* Ostar, Pstar  one room per stay, but pre-assigned patients may be moved once
  at the start (the number kept in place is maximised instead).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from .combinatorics import InfeasibleCensusError, s_max_value
from .core import (Assignment, Instance, count_private_single_days, count_transfers, census,
                   validate_assignment)
from .model import (EQ, GE, LE, MAX, MIN, BipModel, LinearConstraint, ModelBuilder, Objective,
                    Tag, VarAssignment)

VARIANTS = ("A", "B", "C", "D", "E", "F", "H", "I", "K", "M", "N", "O", "P", "Ostar", "Pstar")
PER_PERIOD = frozenset("ABCDEFHIK")
STAY_LEVEL = frozenset(("M", "N", "O", "P", "Ostar", "Pstar"))
WITH_SINGLES = frozenset(("E", "F", "H", "I", "K", "M", "N", "O", "P", "Ostar", "Pstar"))
NEEDS_SMAX = frozenset(("K", "P", "Pstar"))
# variants whose objective stack ends with f_priv maximised (s sums are exact)
PRIV_OPTIMISED = frozenset(("E", "F", "H", "I", "M", "N", "O", "Ostar"))


class FormulationError(ValueError):
    pass


class ExtractionError(ValueError):
    pass


@dataclass(frozen=True)
class Variant:
    id: str
    with_conflicts: bool = False
    with_objective_cuts: bool = False

    def __post_init__(self):
        if self.id not in VARIANTS:
            raise FormulationError(f"unknown variant {self.id!r}; choose from {', '.join(VARIANTS)}")
        if self.with_objective_cuts and self.id not in WITH_SINGLES:
            raise FormulationError(f"variant {self.id} has no single-room variables to cut")

    @classmethod
    def parse(cls, text: str, **options) -> "Variant":
        aliases = {"O*": "Ostar", "P*": "Pstar"}
        return cls(aliases.get(text, text), **options)


_TOKEN_RE = re.compile(r"[A-Za-z0-9]+")


def _tokens(ids: list[str], prefix: str) -> dict[str, str]:
    """Name-safe tokens for ids; positional fallback if any id needs escaping."""
    if all(_TOKEN_RE.fullmatch(i) for i in ids) and len(set(ids)) == len(ids):
        return {i: i for i in ids}
    return {i: f"{prefix}{k}" for k, i in enumerate(ids)}


class _Vars:
    def __init__(self, instance: Instance, builder: ModelBuilder):
        self.inst = instance
        self.b = builder
        self.pt = _tokens([p.id for p in instance.patients], "p")
        self.rt = _tokens([r.id for r in instance.ward.rooms], "r")
        self.x: dict[tuple, int] = {}
        self.g: dict[tuple, int] = {}
        self.m: dict[tuple, int] = {}
        self.s: dict[tuple, int] = {}
        self.d: dict[tuple, int] = {}


def _s_max_or_zero(inst: Instance) -> dict[int, int]:
    # an infeasible period makes the whole model infeasible anyway
    out = {}
    for t in inst.periods:
        try:
            out[t] = s_max_value(census(inst, t))[0]
        except InfeasibleCensusError:
            out[t] = 0
    return out


def _present_split(inst: Instance, t: int):
    present = inst.present(t)
    return ([p for p in present if p.female], [p for p in present if not p.female])


def build(instance: Instance, variant: Variant | str,
          s_max: Mapping[int, int] | None = None) -> BipModel:
    """Construct the binary program of ``variant`` for ``instance``.

    ``s_max`` maps periods to the single-room maximum; computed from the
    instance census when omitted and the variant needs it.
    """
    if isinstance(variant, str):
        variant = Variant.parse(variant)
    vid = variant.id
    inst = instance
    rooms = inst.ward.rooms
    if (vid in NEEDS_SMAX or variant.with_objective_cuts) and s_max is None:
        s_max = _s_max_or_zero(inst)
    b = ModelBuilder(f"pra_{vid}")
    V = _Vars(inst, b)
    stay_level = vid in STAY_LEVEL
    singles = vid in WITH_SINGLES
    use_m = vid in ("A", "C")

    # variables, in a deterministic order
    staying = [p for p in inst.patients if len(inst.stay(p))]
    if stay_level:
        for p in staying:
            for r in rooms:
                V.x[(p.id, r.id)] = b.var(f"x_{V.pt[p.id]}_{V.rt[r.id]}", Tag.ASSIGN_PR, p.id, r.id)
    else:
        for t in inst.periods:
            for p in inst.present(t):
                for r in rooms:
                    V.x[(p.id, r.id, t)] = b.var(f"x_{V.pt[p.id]}_{V.rt[r.id]}_{t}", Tag.ASSIGN_PRT, p.id, r.id, t)
    for t in inst.periods:
        for r in rooms:
            V.g[(r.id, t)] = b.var(f"g_{V.rt[r.id]}_{t}", Tag.FEMALE_ROOM, room=r.id, period=t)
            if use_m:
                V.m[(r.id, t)] = b.var(f"m_{V.rt[r.id]}_{t}", Tag.MALE_ROOM, room=r.id, period=t)
    if singles:
        for t in inst.periods:
            for p in inst.present(t):
                if p.private:
                    for r in rooms:
                        V.s[(p.id, r.id, t)] = b.var(f"s_{V.pt[p.id]}_{V.rt[r.id]}_{t}", Tag.SINGLE_ROOM, p.id, r.id, t)
    if not stay_level:
        for p in staying:
            for t in inst.stay(p)[:-1]:
                for r in rooms:
                    V.d[(p.id, r.id, t)] = b.var(f"d_{V.pt[p.id]}_{V.rt[r.id]}_{t}", Tag.TRANSFER, p.id, r.id, t)

    def x(pid, rid, t):
        return V.x[(pid, rid)] if stay_level else V.x[(pid, rid, t)]

    # every patient gets a room
    if stay_level:
        for p in staying:
            b.add([(1, x(p.id, r.id, None)) for r in rooms], EQ, 1, f"room[{p.id}]")
    else:
        for t in inst.periods:
            for p in inst.present(t):
                b.add([(1, x(p.id, r.id, t)) for r in rooms], EQ, 1, f"room[{p.id},{t}]")

    for t in inst.periods:
        fem, mal = _present_split(inst, t)
        for r in rooms:
            c, g = r.capacity, V.g[(r.id, t)]
            tag = f"{r.id},{t}"
            fx = [(1, x(p.id, r.id, t)) for p in fem]
            mx = [(1, x(p.id, r.id, t)) for p in mal]
            if vid in ("A", "B", "M"):
                b.add(fx + mx, LE, c, f"cap[{tag}]")
                for p in fem:
                    b.add([(1, x(p.id, r.id, t)), (-1, g)], LE, 0, f"sexF[{p.id},{tag}]")
                if vid == "A":
                    m = V.m[(r.id, t)]
                    for p in mal:
                        b.add([(1, x(p.id, r.id, t)), (-1, m)], LE, 0, f"sexM[{p.id},{tag}]")
                    b.add([(1, g), (1, m)], LE, 1, f"sexGM[{tag}]")
                else:
                    for p in mal:
                        b.add([(1, x(p.id, r.id, t)), (1, g)], LE, 1, f"sexM[{p.id},{tag}]")
            elif vid == "C":
                m = V.m[(r.id, t)]
                if fx:
                    b.add(fx + [(-c, g)], LE, 0, f"capF[{tag}]")
                if mx:
                    b.add(mx + [(-c, m)], LE, 0, f"capM[{tag}]")
                b.add([(1, g), (1, m)], LE, 1, f"sexGM[{tag}]")
            elif vid in ("D", "E", "F", "N"):
                if fx:
                    b.add(fx + [(-c, g)], LE, 0, f"capF[{tag}]")
                if mx:
                    b.add(mx + [(c, g)], LE, c, f"capM[{tag}]")
            else:  # H I K O P Ostar Pstar: capacity, sex and single rooms in one row
                fs = [(c - 1, V.s[(p.id, r.id, t)]) for p in fem if p.private]
                ms = [(c - 1, V.s[(p.id, r.id, t)]) for p in mal if p.private]
                if fx:
                    b.add(fx + fs + [(-c, g)], LE, 0, f"capF[{tag}]")
                if mx:
                    b.add(mx + ms + [(c, g)], LE, c, f"capM[{tag}]")

            if singles:
                present = fem + mal
                for p in present:
                    if not p.private:
                        continue
                    s = V.s[(p.id, r.id, t)]
                    b.add([(1, s), (-1, x(p.id, r.id, t))], LE, 0, f"single_s[{p.id},{tag}]")
                    if vid in ("E", "F", "M", "N"):
                        others = [(1, x(q.id, r.id, t)) for q in present if q.id != p.id]
                        b.add([(c, s)] + others, LE, c, f"single_c[{p.id},{tag}]")

    # transfer counting
    if not stay_level:
        for p in staying:
            for t in inst.stay(p)[:-1]:
                for r in rooms:
                    b.add([(1, x(p.id, r.id, t)), (-1, x(p.id, r.id, t + 1)), (-1, V.d[(p.id, r.id, t)])],
                          LE, 0, f"delta[{p.id},{r.id},{t}]")

    pre = [(pid, rid) for pid, rid in inst.pre_assignments if len(inst.stay(inst.patient[pid]))]
    if vid in ("M", "N", "O", "P"):
        for pid, rid in pre:
            b.add([(1, x(pid, rid, 1))], EQ, 1, f"prefix[{pid}]")

    if vid in NEEDS_SMAX:
        for t in inst.periods:
            s_terms = [(1, v) for (pid, rid, tt), v in V.s.items() if tt == t]
            if s_max[t] > 0:
                b.add(s_terms, GE, s_max[t], f"fix_smax[{t}]")

    if variant.with_objective_cuts:
        _cut_rows(b, V, s_max)
    if variant.with_conflicts:
        _conflict_rows(b, V, inst, stay_level)

    # objectives
    trans_terms = [(1, v) for v in V.d.values()] + [(-1, x(pid, rid, 1)) for pid, rid in pre]
    trans = Objective(MIN, tuple(trans_terms), len(pre), "f_trans")
    priv = Objective(MAX, tuple((1, v) for v in V.s.values()), 0, "f_priv")
    retention = Objective(MAX, tuple((1, x(pid, rid, 1)) for pid, rid in pre), 0, "retained")
    stacks = {
        "A": [trans], "B": [trans], "C": [trans], "D": [trans],
        "E": [trans, priv], "H": [trans, priv], "F": [priv, trans], "I": [priv, trans],
        "K": [trans],
        "M": [priv], "N": [priv], "O": [priv],
        "P": [Objective(MAX, (), 0, "zero")],
        "Ostar": [priv, retention], "Pstar": [retention],
    }
    b.objectives = list(stacks[vid])
    return b.build(variant=variant, n_pre=len(pre))


def _cut_rows(b: ModelBuilder, V: _Vars, s_max: Mapping[int, int]) -> None:
    by_t: dict[int, list[int]] = {}
    for (pid, rid, t), v in V.s.items():
        by_t.setdefault(t, []).append(v)
    for t in sorted(by_t):
        b.add([(1, v) for v in by_t[t]], LE, s_max[t], f"cut_smax[{t}]")


def _conflict_rows(b: ModelBuilder, V: _Vars, inst: Instance, stay_level: bool) -> None:
    rows = []
    for pid, qid in inst.conflicts:
        p, q = inst.patient[pid], inst.patient[qid]
        shared = [t for t in inst.stay(p) if t in inst.stay(q)]
        if not shared:
            continue
        for r in inst.ward.rooms:
            if stay_level:
                rows.append(([(1, V.x[(pid, r.id)]), (1, V.x[(qid, r.id)])], f"conflict[{pid},{qid},{r.id}]"))
            else:
                for t in shared:
                    rows.append(([(1, V.x[(pid, r.id, t)]), (1, V.x[(qid, r.id, t)])],
                                 f"conflict[{pid},{qid},{r.id},{t}]"))
    for terms, label in rows:
        b.add(terms, LE, 1, label)


def add_objective_cuts(model: BipModel, instance: Instance,
                       s_max: Mapping[int, int] | None = None) -> BipModel:
    """Append one row per period: single-room variables sum to at most s_max."""
    s_by_t: dict[int, list[int]] = {}
    for v in model.vars:
        if v.tag == Tag.SINGLE_ROOM:
            s_by_t.setdefault(v.period, []).append(v.index)
    if not s_by_t:
        if instance.private_ids and any(len(instance.stay(instance.patient[p])) for p in instance.private_ids):
            raise FormulationError("model has no single-room variables")
        return model
    if s_max is None:
        s_max = _s_max_or_zero(instance)
    cuts = [LinearConstraint(tuple((1, v) for v in s_by_t[t]), LE, s_max[t], f"cut_smax[{t}]")
            for t in sorted(s_by_t)]
    return model.with_constraints(cuts)


def add_conflict_constraints(model: BipModel, instance: Instance) -> BipModel:
    """Append pairwise room exclusions for every conflict pair that shares a period."""
    stay_level = any(v.tag == Tag.ASSIGN_PR for v in model.vars)
    lookup = {}
    for v in model.vars:
        if v.tag in (Tag.ASSIGN_PR, Tag.ASSIGN_PRT):
            lookup[(v.patient, v.room, v.period)] = v.index
    rows = []
    for pid, qid in instance.conflicts:
        p, q = instance.patient[pid], instance.patient[qid]
        shared = [t for t in instance.stay(p) if t in instance.stay(q)]
        if not shared:
            continue
        for r in instance.ward.rooms:
            if stay_level:
                rows.append(LinearConstraint(((1, lookup[(pid, r.id, None)]), (1, lookup[(qid, r.id, None)])),
                                             LE, 1, f"conflict[{pid},{qid},{r.id}]"))
            else:
                for t in shared:
                    rows.append(LinearConstraint(((1, lookup[(pid, r.id, t)]), (1, lookup[(qid, r.id, t)])),
                                                 LE, 1, f"conflict[{pid},{qid},{r.id},{t}]"))
    return model.with_constraints(rows)


def _variant_of(model: BipModel, variant: Variant | str | None) -> Variant:
    if variant is None:
        variant = model.meta.get("variant")
    if isinstance(variant, str):
        variant = Variant.parse(variant)
    if variant is None:
        raise FormulationError("cannot tell which variant built this model")
    return variant


def extract_assignment(instance: Instance, model: BipModel, values: VarAssignment,
                       variant: Variant | str | None = None) -> Assignment:
    """Read z(p, t) off a solution; any inconsistency is a hard error."""
    variant = _variant_of(model, variant)
    broken = model.violated(values.values)
    if broken:
        raise ExtractionError(f"solution violates {len(broken)} constraints, first: {broken[0].label}")
    stay_level = variant.id in STAY_LEVEL
    chosen: dict[tuple, list[str]] = {}
    for v in model.vars:
        if v.tag in (Tag.ASSIGN_PR, Tag.ASSIGN_PRT) and values[v]:
            chosen.setdefault((v.patient, v.period), []).append(v.room)
    entries = {}
    for p in instance.patients:
        stay = instance.stay(p)
        if not len(stay):
            continue
        keys = [(p.id, None)] if stay_level else [(p.id, t) for t in stay]
        for key in keys:
            rooms = chosen.get(key, [])
            if len(rooms) != 1:
                raise ExtractionError(f"patient {p.id} period {key[1]}: {len(rooms)} rooms selected")
        if stay_level:
            room = chosen[(p.id, None)][0]
            for t in stay:
                entries[(p.id, t)] = room
        else:
            for t in stay:
                entries[(p.id, t)] = chosen[(p.id, t)][0]
    a = Assignment(entries)
    report = validate_assignment(instance, a)
    bad = [v for v in report.violations if variant.with_conflicts or v.kind != "ConflictViolated"]
    if bad:
        raise ExtractionError(f"extracted assignment is invalid: {bad[0]}")
    return a


def model_objective_values(model: BipModel, values: VarAssignment) -> dict[str, int]:
    """Value of every distinct objective expression in the stack, keyed by label."""
    return {o.label: o.value(values.values) for o in model.objectives}


def evaluate_objectives(instance: Instance, model: BipModel, values: VarAssignment,
                        variant: Variant | str | None = None, optimal: bool = True) -> tuple[int, int]:
    """(f_trans, f_priv) of a solution, cross-checked against the assignment.

    The model expressions can only over-count transfers and under-count lone
    private patients; when the stack was solved to optimality they must match
    the recount exactly. Any disagreement is a formulation bug.
    """
    variant = _variant_of(model, variant)
    a = extract_assignment(instance, model, values, variant)
    trans = count_transfers(instance, a)
    priv = count_private_single_days(instance, a)

    d_sum = sum(values[v] for v in model.vars if v.tag == Tag.TRANSFER)
    n_pre = 0
    kept = 0
    for pid, rid in instance.pre_assignments:
        if not len(instance.stay(instance.patient[pid])):
            continue
        n_pre += 1
        kept += a.entries[(pid, 1)] == rid
    model_trans = d_sum + n_pre - kept
    if model_trans < trans or (optimal and model_trans != trans):
        raise FormulationError(f"transfer expression {model_trans} disagrees with recount {trans}")
    if variant.id in WITH_SINGLES:
        model_priv = sum(values[v] for v in model.vars if v.tag == Tag.SINGLE_ROOM)
        exact = optimal and (variant.id in PRIV_OPTIMISED or variant.id in ("K", "P", "Pstar"))
        if model_priv > priv or (exact and model_priv != priv):
            raise FormulationError(f"single-room expression {model_priv} disagrees with recount {priv}")
    return trans, priv
