"""Exhaustive reference solvers used to cross-check formulas and IP models.

Everything here is deliberately naive. Size caps are hard errors, never
silent truncation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

from .combinatorics import InfeasibleCensusError
from .core import Assignment, Census, Instance, Patient


class CapExceededError(ValueError):
    pass


class NoFeasibleAssignmentError(ValueError):
    pass


TRANS_FIRST = "trans_first"  # (-f_trans, f_priv)
PRIV_FIRST = "priv_first"  # (f_priv, -f_trans)


def _compositions(n: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for head in range(n + 1):
        for tail in _compositions(n - head, parts - 1):
            yield (head,) + tail


def ppp_bruteforce(c: Census, max_rooms: int = 12) -> int:
    """Maximum |S_F*| + |S_M*| over all room quadruples, by enumeration.

    Rooms of equal capacity are interchangeable, so each capacity class is
    split into (female, female-single, male, male-single, unused) counts.
    """
    if c.n_rooms > max_rooms:
        raise CapExceededError(f"{c.n_rooms} rooms exceed the enumeration cap {max_rooms}")
    classes = list(c.room_histogram)
    best = None
    for split in itertools.product(*(_compositions(n, 5) for _, n in classes)):
        f_beds = sum(cap * s[0] for (cap, _), s in zip(classes, split))
        f_star = sum(s[1] for s in split)
        m_beds = sum(cap * s[2] for (cap, _), s in zip(classes, split))
        m_star = sum(s[3] for s in split)
        if (f_star <= c.F_priv and m_star <= c.M_priv
                and f_beds + f_star >= c.F and m_beds + m_star >= c.M):
            if best is None or f_star + m_star > best:
                best = f_star + m_star
    if best is None:
        raise InfeasibleCensusError(f"census {c} admits no sex-separated placement")
    return best


def ppp_by_placement(c: Census, max_patients: int = 8) -> int:
    """Same quantity by placing individual patients into individual rooms."""
    if c.n_patients > max_patients:
        raise CapExceededError(f"{c.n_patients} patients exceed the cap {max_patients}")
    caps = c.capacities
    people = ([("F", True)] * c.F_priv + [("F", False)] * (c.F - c.F_priv)
              + [("M", True)] * c.M_priv + [("M", False)] * (c.M - c.M_priv))
    best = None
    for rooms in itertools.product(range(len(caps)), repeat=len(people)):
        load = [0] * len(caps)
        sexes: list[set] = [set() for _ in caps]
        for (sex, _), r in zip(people, rooms):
            load[r] += 1
            sexes[r].add(sex)
        if any(load[r] > caps[r] or len(sexes[r]) > 1 for r in range(len(caps))):
            continue
        alone = sum(1 for (_, priv), r in zip(people, rooms) if priv and load[r] == 1)
        best = alone if best is None else max(best, alone)
    if best is None:
        raise InfeasibleCensusError(f"census {c} admits no sex-separated placement")
    return best


@dataclass(frozen=True)
class Caps:
    patients: int = 6
    rooms: int = 3
    horizon: int = 4


def _check_caps(instance: Instance, caps: Caps) -> None:
    if (len(instance.patients) > caps.patients or len(instance.ward) > caps.rooms
            or instance.horizon > caps.horizon):
        raise CapExceededError(
            f"instance ({len(instance.patients)} patients, {len(instance.ward)} rooms, "
            f"T={instance.horizon}) exceeds oracle caps {caps}")


def _period_layouts(instance: Instance, present: Sequence[Patient]) -> list[tuple[str, ...]]:
    """Every placement of ``present`` (in order) satisfying capacity, sex and conflicts."""
    rooms = instance.ward.rooms
    conflicts = {frozenset(pair) for pair in instance.conflicts}
    out = []
    for combo in itertools.product(range(len(rooms)), repeat=len(present)):
        load = [0] * len(rooms)
        sex: list[str | None] = [None] * len(rooms)
        ok = True
        for p, r in zip(present, combo):
            load[r] += 1
            if load[r] > rooms[r].capacity or (sex[r] is not None and sex[r] != p.sex):
                ok = False
                break
            sex[r] = p.sex
        if ok and conflicts:
            ok = not any(combo[i] == combo[j] and frozenset((present[i].id, present[j].id)) in conflicts
                         for i in range(len(present)) for j in range(i + 1, len(present)))
        if ok:
            out.append(tuple(rooms[r].id for r in combo))
    return out


def _singles(present: Sequence[Patient], layout: tuple[str, ...]) -> int:
    counts: dict[str, int] = {}
    for rid in layout:
        counts[rid] = counts.get(rid, 0) + 1
    return sum(1 for p, rid in zip(present, layout) if p.private and counts[rid] == 1)


def exhaustive_pra(instance: Instance, priority: str = TRANS_FIRST,
                   caps: Caps = Caps()) -> tuple[int, int, Assignment]:
    """Lexicographic optimum over all complete feasible assignments.

    Every feasible placement of every period is enumerated; since both
    objectives add up over periods and period transitions, the best
    combination is picked by a forward pass that keeps, per layout, the best
    (first-found on ties) history. Returns ``(f_trans, f_priv, assignment)``.
    """
    if priority not in (TRANS_FIRST, PRIV_FIRST):
        raise ValueError(f"unknown priority {priority!r}")
    _check_caps(instance, caps)

    def key(trans: int, priv: int) -> tuple[int, int]:
        return (trans, -priv) if priority == TRANS_FIRST else (-priv, trans)

    pre = instance.pre_room
    # state: layout -> (trans, priv, back-pointer chain)
    prev_present: tuple[Patient, ...] = ()
    states: dict[tuple[str, ...], tuple[int, int, tuple]] = {(): (0, 0, ())}
    for t in instance.periods:
        present = instance.present(t)
        layouts = _period_layouts(instance, present)
        if not layouts:
            raise NoFeasibleAssignmentError(f"period {t} has no feasible placement")
        idx_prev = {p.id: i for i, p in enumerate(prev_present)}
        carried = [(i, idx_prev[p.id]) for i, p in enumerate(present) if p.id in idx_prev]
        # the transition cost only sees the carried patients' rooms
        by_proj: dict[tuple[str, ...], tuple[int, int, tuple]] = {}
        for old, state in states.items():
            proj = tuple(old[j] for _, j in carried)
            kept = by_proj.get(proj)
            if kept is None or key(state[0], state[1]) < key(kept[0], kept[1]):
                by_proj[proj] = state
        new_states = {}
        for layout in layouts:
            priv = _singles(present, layout)
            if t == 1:
                pre_moves = sum(1 for p, rid in zip(present, layout) if p.id in pre and pre[p.id] != rid)
            else:
                pre_moves = 0
            best = None
            for proj, (tr, pv, chain) in by_proj.items():
                moved = pre_moves + sum(1 for (i, _), old_room in zip(carried, proj) if layout[i] != old_room)
                cand = (tr + moved, pv + priv, chain)
                if best is None or key(cand[0], cand[1]) < key(best[0], best[1]):
                    best = cand
            assert best is not None
            new_states[layout] = (best[0], best[1], (best[2], (t, present, layout)))
        states = new_states
        prev_present = present

    trans, priv, chain = min(states.values(), key=lambda s: key(s[0], s[1]))
    entries = {}
    while chain:
        chain, (t, present, layout) = chain
        for p, rid in zip(present, layout):
            entries[(p.id, t)] = rid
    return trans, priv, Assignment(entries)


def no_transfer_optimum(instance: Instance, caps: Caps = Caps()) -> tuple[int, Assignment] | None:
    """Best private-single-days with one room per stay and pre-assignments kept.

    Returns ``None`` when no transfer-free assignment exists.
    """
    _check_caps(instance, caps)
    staying = [p for p in instance.patients if len(instance.stay(p))]
    rooms = [r.id for r in instance.ward.rooms]
    pre = instance.pre_room
    choices = [[pre[p.id]] if p.id in pre else rooms for p in staying]
    conflicts = {frozenset(pair) for pair in instance.conflicts}
    best = None
    for combo in itertools.product(*choices):
        entries = {(p.id, t): rid for p, rid in zip(staying, combo) for t in instance.stay(p)}
        ok = True
        priv = 0
        for t in instance.periods:
            present = instance.present(t)
            layout = tuple(entries[(p.id, t)] for p in present)
            cap = instance.ward.capacity
            counts: dict[str, int] = {}
            sex: dict[str, str] = {}
            for p, rid in zip(present, layout):
                counts[rid] = counts.get(rid, 0) + 1
                if counts[rid] > cap[rid] or sex.setdefault(rid, p.sex) != p.sex:
                    ok = False
            if ok and conflicts:
                ok = not any(layout[i] == layout[j] and frozenset((present[i].id, present[j].id)) in conflicts
                             for i in range(len(present)) for j in range(i + 1, len(present)))
            if not ok:
                break
            priv += _singles(present, layout)
        if ok and (best is None or priv > best[0]):
            best = (priv, Assignment(entries))
    return best
