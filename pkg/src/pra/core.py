"""Domain model for patient-to-room assignment.

Periods run from 1 to ``horizon``. A patient with ``arrival == 0`` was already
in hospital before the horizon starts and occupies a bed from period 1 on.
Patients leave at the beginning of their discharge period, so the stay covers
``max(arrival, 1) <= t < min(discharge, horizon + 1)``.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping

FEMALE = "F"
MALE = "M"


class InstanceError(ValueError):
    """Malformed or inconsistent instance document.

    ``path`` points at the offending node of the document, e.g.
    ``patients[3].discharge``.
    """

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class IncompleteAssignmentError(ValueError):
    pass


@dataclass(frozen=True)
class RoomSpec:
    id: str
    capacity: int


@dataclass(frozen=True)
class Ward:
    rooms: tuple[RoomSpec, ...]

    @cached_property
    def capacity_histogram(self) -> dict[int, int]:
        return dict(sorted(Counter(r.capacity for r in self.rooms).items()))

    @cached_property
    def capacity(self) -> dict[str, int]:
        return {r.id: r.capacity for r in self.rooms}

    @property
    def total_capacity(self) -> int:
        return sum(r.capacity for r in self.rooms)

    def __len__(self) -> int:
        return len(self.rooms)


@dataclass(frozen=True)
class Patient:
    id: str
    sex: str
    registration: int
    arrival: int
    discharge: int
    private: bool = False

    @property
    def female(self) -> bool:
        return self.sex == FEMALE

    @property
    def emergency(self) -> bool:
        return self.registration == self.arrival


@dataclass(frozen=True)
class Census:
    """Head counts of one period plus the ward's capacity histogram."""

    F: int
    M: int
    F_priv: int = 0
    M_priv: int = 0
    room_histogram: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if min(self.F, self.M, self.F_priv, self.M_priv) < 0:
            raise ValueError("census counts must be non-negative")
        if self.F_priv > self.F or self.M_priv > self.M:
            raise ValueError("private counts exceed head counts")
        for cap, count in self.room_histogram:
            if cap < 1 or count < 0:
                raise ValueError(f"bad histogram entry {cap}: {count}")

    @classmethod
    def of(cls, F: int, M: int, F_priv: int = 0, M_priv: int = 0,
           capacities: Iterable[int] = ()) -> "Census":
        hist = tuple(sorted(Counter(capacities).items()))
        return cls(F, M, F_priv, M_priv, hist)

    @property
    def capacities(self) -> tuple[int, ...]:
        """Expanded capacity list, ascending."""
        return tuple(c for c, n in self.room_histogram for _ in range(n))

    @property
    def n_rooms(self) -> int:
        return sum(n for _, n in self.room_histogram)

    @property
    def total_capacity(self) -> int:
        return sum(c * n for c, n in self.room_histogram)

    @property
    def n_private(self) -> int:
        return self.F_priv + self.M_priv

    @property
    def n_patients(self) -> int:
        return self.F + self.M

    def rooms_with(self, capacity: int) -> int:
        return dict(self.room_histogram).get(capacity, 0)


@dataclass(frozen=True)
class Instance:
    ward: Ward
    horizon: int
    patients: tuple[Patient, ...]
    pre_assignments: tuple[tuple[str, str], ...] = ()
    conflicts: tuple[tuple[str, str], ...] = ()
    name: str = ""

    @cached_property
    def patient(self) -> dict[str, Patient]:
        return {p.id: p for p in self.patients}

    @cached_property
    def pre_room(self) -> dict[str, str]:
        return dict(self.pre_assignments)

    def first_period(self, p: Patient) -> int:
        return max(p.arrival, 1)

    def end_period(self, p: Patient) -> int:
        """Exclusive end of the in-horizon stay (discharge truncated to T+1)."""
        return min(p.discharge, self.horizon + 1)

    def stay(self, p: Patient) -> range:
        return range(self.first_period(p), self.end_period(p))

    @cached_property
    def _present(self) -> dict[int, tuple[Patient, ...]]:
        by_t: dict[int, list[Patient]] = defaultdict(list)
        for p in self.patients:
            for t in self.stay(p):
                by_t[t].append(p)
        return {t: tuple(by_t.get(t, ())) for t in range(1, self.horizon + 1)}

    def present(self, t: int) -> tuple[Patient, ...]:
        return self._present[t]

    @property
    def periods(self) -> range:
        return range(1, self.horizon + 1)

    def domain(self) -> list[tuple[str, int]]:
        """All (patient id, period) pairs a complete assignment must cover."""
        return [(p.id, t) for p in self.patients for t in self.stay(p)]

    @cached_property
    def private_ids(self) -> frozenset[str]:
        return frozenset(p.id for p in self.patients if p.private)


@dataclass(frozen=True)
class Assignment:
    """z(p, t): room of patient ``p`` in period ``t``."""

    entries: Mapping[tuple[str, int], str] = field(default_factory=dict)

    def room(self, pid: str, t: int) -> str | None:
        return self.entries.get((pid, t))

    def __len__(self) -> int:
        return len(self.entries)

    def rows(self) -> list[dict[str, Any]]:
        return [{"patient": p, "period": t, "room": r}
                for (p, t), r in sorted(self.entries.items(), key=lambda kv: (kv[0][1], kv[0][0]))]

    @classmethod
    def from_rows(cls, rows: Iterable[Mapping[str, Any]]) -> "Assignment":
        entries = {}
        for i, row in enumerate(rows):
            try:
                key = (str(row["patient"]), int(row["period"]))
                entries[key] = str(row["room"])
            except (KeyError, TypeError, ValueError) as exc:
                raise InstanceError(f"bad assignment row ({exc})", f"[{i}]") from None
        return cls(entries)

    def merged(self, other: "Assignment") -> "Assignment":
        return Assignment({**self.entries, **other.entries})


@dataclass(frozen=True)
class Violation:
    kind: str  # CapacityExceeded | SexMixed | MissingAssignment | UnknownRoom | ConflictViolated | UnexpectedEntry
    t: int
    room: str | None = None
    patients: tuple[str, ...] = ()

    def __str__(self) -> str:
        where = f" room {self.room}" if self.room is not None else ""
        who = f" [{', '.join(self.patients)}]" if self.patients else ""
        return f"t={self.t}{where}: {self.kind}{who}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def count(self, kind: str) -> int:
        return sum(v.kind == kind for v in self.violations)


# ---------------------------------------------------------------------------
# ingestion


def _need(doc: Mapping, key: str, path: str):
    if not isinstance(doc, Mapping):
        raise InstanceError("expected a mapping", path)
    if key not in doc:
        raise InstanceError(f"missing field '{key}'", path)
    return doc[key]


def _int(value, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise InstanceError(f"expected integer, got {value!r}", path)
    if value < minimum:
        raise InstanceError(f"must be >= {minimum}, got {value}", path)
    return value


def instance_from_dict(doc: Mapping[str, Any]) -> Instance:
    """Build and validate an :class:`Instance` from a parsed document."""
    rooms_doc = _need(_need(doc, "ward", ""), "rooms", "ward")
    if not isinstance(rooms_doc, list):
        raise InstanceError("expected a list", "ward.rooms")
    rooms = []
    for i, r in enumerate(rooms_doc):
        path = f"ward.rooms[{i}]"
        rooms.append(RoomSpec(str(_need(r, "id", path)),
                              _int(_need(r, "capacity", path), path + ".capacity", 1)))
    room_ids = [r.id for r in rooms]
    dup = [rid for rid, n in Counter(room_ids).items() if n > 1]
    if dup:
        raise InstanceError(f"duplicate room id {dup[0]!r}", "ward.rooms")

    horizon = _int(_need(doc, "horizon", ""), "horizon", 1)

    patients = []
    for i, p in enumerate(doc.get("patients", []) or []):
        path = f"patients[{i}]"
        pid = str(_need(p, "id", path))
        sex = _need(p, "sex", path)
        if sex not in (FEMALE, MALE):
            raise InstanceError(f"sex must be 'F' or 'M', got {sex!r} (patient {pid})", path + ".sex")
        reg = _int(_need(p, "registration", path), path + ".registration", 0)
        arr = _int(_need(p, "arrival", path), path + ".arrival", 0)
        dis = _int(_need(p, "discharge", path), path + ".discharge", 1)
        private = p.get("private", False)
        if not isinstance(private, bool):
            raise InstanceError(f"expected boolean, got {private!r}", path + ".private")
        if arr >= dis:
            raise InstanceError(f"patient {pid}: arrival {arr} must precede discharge {dis}", path)
        if reg > arr:
            raise InstanceError(f"patient {pid}: registration {reg} after arrival {arr}", path)
        if arr > horizon:
            raise InstanceError(f"patient {pid}: arrival {arr} beyond horizon {horizon}", path)
        patients.append(Patient(pid, sex, reg, arr, dis, private))
    dup = [pid for pid, n in Counter(p.id for p in patients).items() if n > 1]
    if dup:
        raise InstanceError(f"duplicate patient id {dup[0]!r}", "patients")
    by_id = {p.id: p for p in patients}
    known_rooms = set(room_ids)

    pre = []
    seen = set()
    for i, entry in enumerate(doc.get("pre_assignments", []) or []):
        path = f"pre_assignments[{i}]"
        pid, rid = str(_need(entry, "patient", path)), str(_need(entry, "room", path))
        if pid not in by_id:
            raise InstanceError(f"unknown patient {pid!r}", path)
        if rid not in known_rooms:
            raise InstanceError(f"unknown room {rid!r} (patient {pid})", path)
        if by_id[pid].arrival != 0:
            raise InstanceError(f"pre-assigned patient {pid} must have arrival 0", path)
        if pid in seen:
            raise InstanceError(f"patient {pid} pre-assigned twice", path)
        seen.add(pid)
        pre.append((pid, rid))

    conflicts = []
    for i, pair in enumerate(doc.get("conflicts", []) or []):
        path = f"conflicts[{i}]"
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise InstanceError("conflict must be a pair of patient ids", path)
        a, b = str(pair[0]), str(pair[1])
        for pid in (a, b):
            if pid not in by_id:
                raise InstanceError(f"unknown patient {pid!r}", path)
        if a == b:
            raise InstanceError(f"patient {a} conflicts with itself", path)
        conflicts.append(tuple(sorted((a, b))))
    conflicts = list(dict.fromkeys(conflicts))

    return Instance(Ward(tuple(rooms)), horizon, tuple(patients), tuple(pre),
                    tuple(conflicts), str(doc.get("name", "")))


def instance_to_dict(instance: Instance) -> dict[str, Any]:
    doc: dict[str, Any] = {}
    if instance.name:
        doc["name"] = instance.name
    doc["ward"] = {"rooms": [{"id": r.id, "capacity": r.capacity} for r in instance.ward.rooms]}
    doc["horizon"] = instance.horizon
    doc["patients"] = [
        {"id": p.id, "sex": p.sex, "registration": p.registration, "arrival": p.arrival,
         "discharge": p.discharge, "private": p.private}
        for p in instance.patients
    ]
    doc["pre_assignments"] = [{"patient": p, "room": r} for p, r in instance.pre_assignments]
    doc["conflicts"] = [list(pair) for pair in instance.conflicts]
    return doc


def _parse_text(text: str, suffix: str = ".json"):
    if suffix in (".yaml", ".yml"):
        import yaml

        try:
            return yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise InstanceError(f"invalid YAML: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}") from None


def load_instance(source: str | Path | Mapping) -> Instance:
    """Load an instance from a mapping, a JSON/YAML file path, or JSON text."""
    if isinstance(source, Mapping):
        return instance_from_dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        return instance_from_dict(_parse_text(path.read_text(), path.suffix.lower()))
    return instance_from_dict(_parse_text(source))


def dump_instance(instance: Instance, path: str | Path | None = None) -> str:
    text = json.dumps(instance_to_dict(instance), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


def load_assignment(source: str | Path) -> Assignment:
    text = Path(source).read_text() if not str(source).lstrip().startswith("[") else str(source)
    rows = _parse_text(text)
    if not isinstance(rows, list):
        raise InstanceError("assignment document must be a list of rows")
    return Assignment.from_rows(rows)


def dump_assignment(assignment: Assignment, path: str | Path | None = None) -> str:
    text = json.dumps(assignment.rows(), indent=1)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text


# ---------------------------------------------------------------------------
# queries


def _check_period(instance: Instance, t: int) -> None:
    if not 1 <= t <= instance.horizon:
        raise ValueError(f"period {t} outside 1..{instance.horizon}")


def patients_present(instance: Instance, t: int) -> set[str]:
    _check_period(instance, t)
    return {p.id for p in instance.present(t)}


def census(instance: Instance, t: int) -> Census:
    _check_period(instance, t)
    F = M = Fp = Mp = 0
    for p in instance.present(t):
        if p.female:
            F += 1
            Fp += p.private
        else:
            M += 1
            Mp += p.private
    return Census(F, M, Fp, Mp, tuple(instance.ward.capacity_histogram.items()))


def validate_assignment(instance: Instance, a: Assignment) -> ValidationReport:
    found: list[Violation] = []
    cap = instance.ward.capacity
    domain = set(instance.domain())

    for key in sorted(set(a.entries) - domain, key=lambda k: (k[1], k[0])):
        found.append(Violation("UnexpectedEntry", key[1], a.entries[key], (key[0],)))

    occupants: dict[tuple[int, str], list[Patient]] = defaultdict(list)
    for pid, t in sorted(domain, key=lambda k: (k[1], k[0])):
        rid = a.entries.get((pid, t))
        if rid is None:
            found.append(Violation("MissingAssignment", t, None, (pid,)))
        elif rid not in cap:
            found.append(Violation("UnknownRoom", t, rid, (pid,)))
        else:
            occupants[(t, rid)].append(instance.patient[pid])

    conflicts = {frozenset(c) for c in instance.conflicts}
    for (t, rid), group in occupants.items():
        ids = tuple(sorted(p.id for p in group))
        if len(group) > cap[rid]:
            found.append(Violation("CapacityExceeded", t, rid, ids))
        if len({p.sex for p in group}) > 1:
            found.append(Violation("SexMixed", t, rid, ids))
        if conflicts:
            for i, p in enumerate(ids):
                for q in ids[i + 1:]:
                    if frozenset((p, q)) in conflicts:
                        found.append(Violation("ConflictViolated", t, rid, (p, q)))

    kind_order = {"UnexpectedEntry": 0, "MissingAssignment": 1, "UnknownRoom": 2,
                  "CapacityExceeded": 3, "SexMixed": 4, "ConflictViolated": 5}
    found.sort(key=lambda v: (v.t, v.room or "", kind_order[v.kind], v.patients))
    return ValidationReport(tuple(found))


def _require_complete(instance: Instance, a: Assignment) -> None:
    missing = [k for k in instance.domain() if k not in a.entries]
    if missing:
        pid, t = missing[0]
        raise IncompleteAssignmentError(f"no room for patient {pid} in period {t} "
                                        f"({len(missing)} gaps)")


def count_transfers(instance: Instance, a: Assignment) -> int:
    """Room changes between consecutive periods plus altered pre-assignments."""
    _require_complete(instance, a)
    total = 0
    for p in instance.patients:
        stay = instance.stay(p)
        for t in stay[:-1]:
            if a.entries[(p.id, t)] != a.entries[(p.id, t + 1)]:
                total += 1
    for pid, rid in instance.pre_assignments:
        if (pid, 1) in a.entries and a.entries[(pid, 1)] != rid:
            total += 1
    return total


def count_private_single_days(instance: Instance, a: Assignment) -> int:
    _require_complete(instance, a)
    occupancy = Counter((t, rid) for (_, t), rid in a.entries.items())
    return sum(1 for p in instance.patients if p.private
               for t in instance.stay(p) if occupancy[(t, a.entries[(p.id, t)])] == 1)
