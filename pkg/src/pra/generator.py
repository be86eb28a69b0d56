"""Synthetic ward instances.

Arrivals per day are Poisson, lengths of stay and registration lead times are
geometric with the requested medians. A burn-in period before day 1 produces
the patients already in hospital at the start; they are pre-assigned to a
sex-separated layout. An arrival that would make some day of its stay
infeasible is turned away, so every period of a generated instance passes
the combinatorial check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np

from .combinatorics import check_feasibility, feasible_general
from .core import FEMALE, MALE, Census, Instance, Patient, RoomSpec, Ward


@dataclass(frozen=True)
class GeneratorParams:
    # defaults follow one mid-sized internal-medicine ward of the calibration table
    n_rooms: int = 18
    capacity_mix: Mapping[int, float] = field(default_factory=lambda: {1: 0.25, 2: 0.75})
    days: int = 365
    mean_daily_arrivals: float = 1375 / 365
    median_los: float = 3
    median_lead_time: float = 3
    private_fraction: float = 235 / 1375
    emergency_fraction: float = 296 / 1375
    female_fraction: float = 494 / 1375
    burn_in: int = 60
    seed: int = 0

    def __post_init__(self):
        for name in ("private_fraction", "emergency_fraction", "female_fraction"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.n_rooms < 1 or self.days < 1:
            raise ValueError("n_rooms and days must be positive")
        if self.mean_daily_arrivals < 0:
            raise ValueError("mean_daily_arrivals must be non-negative")
        if self.median_los < 1:
            raise ValueError("median_los must be at least 1")
        if self.median_lead_time < 0:
            raise ValueError("median_lead_time must be non-negative")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        mix = dict(self.capacity_mix)
        if not mix or any(int(c) != c or c < 1 for c in mix) or any(w < 0 for w in mix.values()):
            raise ValueError(f"bad capacity mix {mix}")
        if sum(mix.values()) <= 0:
            raise ValueError("capacity mix weights sum to zero")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["capacity_mix"] = {str(k): v for k, v in self.capacity_mix.items()}
        return d

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GeneratorParams":
        d = dict(doc)
        if "capacity_mix" in d:
            d["capacity_mix"] = {int(k): float(v) for k, v in d["capacity_mix"].items()}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
        return cls(**d)


def apportion_rooms(n_rooms: int, mix: Mapping[int, float]) -> list[int]:
    """Room capacities (ascending) by largest-remainder apportionment."""
    total = sum(mix.values())
    caps = sorted(mix)
    quotas = [n_rooms * mix[c] / total for c in caps]
    counts = [math.floor(q) for q in quotas]
    # ties go to the larger capacity
    order = sorted(range(len(caps)), key=lambda i: (-(quotas[i] - counts[i]), -caps[i]))
    for i in order[: n_rooms - sum(counts)]:
        counts[i] += 1
    return [c for c, n in zip(caps, counts) for _ in range(n)]


def geometric_q(median: float, support_start: int) -> float:
    """Ratio q so a geometric law on {start, start+1, ...} has the given median."""
    return 0.5 ** (1.0 / (median - support_start + 0.5))


def _sample_geometric(rng: np.random.Generator, median: float, start: int) -> int:
    if start == 0 and median == 0:
        return 0
    q = geometric_q(median, start)
    return int(rng.geometric(1.0 - q)) - 1 + start


def layout_for(census_obj: Census, rooms: list[RoomSpec], females: list[str],
               males: list[str]) -> dict[str, str]:
    """Place patients into rooms following a witness split of the census."""
    verdict = check_feasibility(census_obj)
    if not verdict.feasible:
        raise ValueError("census admits no sex-separated placement")
    witness = verdict.witness or feasible_general(census_obj.F, census_obj.M, census_obj.capacities).witness
    order = sorted(range(len(rooms)), key=lambda i: (rooms[i].capacity, i))  # matches census.capacities
    out = {}
    for group, idx in ((females, witness[0]), (males, witness[1])):
        beds = [rooms[order[i]].id for i in idx for _ in range(rooms[order[i]].capacity)]
        for pid, rid in zip(group, beds):
            out[pid] = rid
        assert len(group) <= len(beds)
    return out


def generate(params: GeneratorParams) -> Instance:
    rng = np.random.default_rng(params.seed)
    caps = apportion_rooms(params.n_rooms, params.capacity_mix)
    width = len(str(len(caps)))
    rooms = [RoomSpec(f"R{i + 1:0{width}d}", c) for i, c in enumerate(caps)]
    T = params.days
    first_day = 1 - params.burn_in

    @lru_cache(maxsize=None)
    def fits(F: int, M: int) -> bool:
        return check_feasibility(Census.of(F, M, capacities=caps)).feasible

    # occupancy counters for days first_day..T
    span = T - first_day + 1
    occ = {FEMALE: np.zeros(span, dtype=int), MALE: np.zeros(span, dtype=int)}
    raw = []
    for day in range(first_day, T + 1):
        n = int(rng.poisson(params.mean_daily_arrivals)) if params.mean_daily_arrivals > 0 else 0
        for _ in range(n):
            sex = FEMALE if rng.random() < params.female_fraction else MALE
            private = bool(rng.random() < params.private_fraction)
            emergency = bool(rng.random() < params.emergency_fraction)
            los = _sample_geometric(rng, params.median_los, 1)
            lead = 0 if emergency else _sample_geometric(rng, params.median_lead_time, 0)
            lo, hi = day - first_day, min(day + los, T + 1) - first_day
            F_new = occ[FEMALE][lo:hi] + (sex == FEMALE)
            M_new = occ[MALE][lo:hi] + (sex == MALE)
            if not all(fits(int(f), int(m)) for f, m in zip(F_new, M_new)):
                continue  # turned away
            occ[sex][lo:hi] += 1
            raw.append((sex, private, day, day + los, lead))

    patients: list[Patient] = []
    carried_f, carried_m = [], []
    n_carried = 0
    for sex, private, arr, dis, lead in raw:
        if arr <= 0:
            if dis < 2:
                continue
            pid = f"c{n_carried:04d}"
            n_carried += 1
            patients.append(Patient(pid, sex, 0, 0, dis, private))
            (carried_f if sex == FEMALE else carried_m).append(pid)
        else:
            pid = f"p{len(patients) - n_carried:05d}"
            patients.append(Patient(pid, sex, max(arr - lead, 0), arr, dis, private))
    pre = []
    if carried_f or carried_m:
        c0 = Census.of(len(carried_f), len(carried_m), capacities=caps)
        placed = layout_for(c0, rooms, carried_f, carried_m)
        pre = [(pid, placed[pid]) for pid in carried_f + carried_m]
    name = f"synthetic-s{params.seed}-r{params.n_rooms}-d{T}"
    return Instance(Ward(tuple(rooms)), T, tuple(patients), tuple(pre), (), name)


def tiny_instance(seed: int, max_rooms: int = 3, max_patients: int = 6, max_horizon: int = 4,
                  conflicts: bool = False) -> Instance:
    """Small random instance inside the exhaustive oracles' caps.

    Periods may be infeasible and pre-assignments may clash; both are
    legitimate inputs for the formulations.
    """
    rng = np.random.default_rng(seed)
    T = int(rng.integers(1, max_horizon + 1))
    rooms = tuple(RoomSpec(f"r{i}", int(rng.choice([1, 2, 2, 3])))
                  for i in range(int(rng.integers(1, max_rooms + 1))))
    patients = []
    pre = []
    for i in range(int(rng.integers(1, max_patients + 1))):
        arr = int(rng.integers(0, T + 1))
        dis = int(rng.integers(max(arr, 1) + 1, T + 3))
        reg = 0 if arr == 0 else int(rng.integers(0, arr + 1))
        p = Patient(f"p{i}", FEMALE if rng.random() < 0.5 else MALE, reg, arr, dis, bool(rng.random() < 0.4))
        patients.append(p)
        if arr == 0 and rng.random() < 0.7:
            pre.append((p.id, rooms[int(rng.integers(len(rooms)))].id))
    pairs = ()
    if conflicts and len(patients) > 1 and rng.random() < 0.5:
        a, b = sorted(rng.choice(len(patients), size=2, replace=False))
        pairs = ((f"p{a}", f"p{b}"),)
    return Instance(Ward(rooms), T, tuple(patients), tuple(pre), pairs, f"tiny-{seed}")
