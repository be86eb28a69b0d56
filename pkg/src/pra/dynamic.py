"""Rolling-horizon assignment: one planning step per period.

At period ``t`` every registered patient who has not yet left is planned
over a window ``[t, end)``, with ``end`` the latest known discharge (clipped
to the horizon). Patients already in hospital carry their current room as a
pre-assignment. The step tries, in order:

1. a combinatorial feasibility check of every window period (terminate if any fails),
2. variant P (no transfers at all, single-room maximum on every day),
3. variant Pstar (newly placed or re-placed patients only, single-room maximum),
4. variant Ostar (same move rules, best single-room count) under a time budget,
5. variant H (transfers allowed).

Only the rooms of period ``t`` are committed.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .combinatorics import is_feasible, s_max_value
from .core import (Assignment, Instance, Patient, census, count_private_single_days, count_transfers,
                   validate_assignment)
from .formulations import build, extract_assignment
from .solver import Backend, ScipyBackend, SolveLimits, SolveResult, Status, solve


class Stage(str, Enum):
    COMBINATORIAL_INFEASIBLE = "CombinatorialInfeasible"
    P = "P"
    PSTAR = "Pstar"
    OSTAR = "Ostar"
    H = "H"


class DynamicError(RuntimeError):
    pass


WINDOW_KNOWN_DISCHARGE = "known_discharge"


@dataclass
class DynamicConfig:
    ostar_time_limit: float = 20.0  # whole Ostar solve, split evenly over its two stages
    backend: Backend | None = None  # defaults to the in-process HiGHS backend
    stage_time_limit: float | None = None  # per-stage limit for P, Pstar and H
    horizon_policy: str = WINDOW_KNOWN_DISCHARGE

    def __post_init__(self):
        if self.ostar_time_limit <= 0:
            raise ValueError("ostar_time_limit must be positive")
        if self.horizon_policy != WINDOW_KNOWN_DISCHARGE:
            raise ValueError(f"unsupported horizon policy {self.horizon_policy!r}")

    def get_backend(self) -> Backend:
        return self.backend if self.backend is not None else ScipyBackend()


@dataclass(frozen=True)
class DynamicState:
    t: int
    known: frozenset[str]
    rpold: tuple[tuple[str, str], ...]  # (patient, room) for patients in hospital

    @property
    def rooms(self) -> dict[str, str]:
        return dict(self.rpold)


@dataclass
class StepResult:
    t: int
    stage_used: Stage
    solve: SolveResult | None
    assignment_fragment: Assignment  # window plan in original period numbering
    transfers_incurred: int
    singles_achieved: int
    s_max_t: int
    wall_time: float
    attempts: tuple[tuple[str, str], ...] = ()  # (stage, status) in cascade order


@dataclass
class DynamicRunResult:
    steps: list[StepResult] = field(default_factory=list)
    assignment: Assignment = field(default_factory=Assignment)
    f_trans: int = 0
    f_priv: int = 0
    s_max: int = 0
    terminated_at: int | None = None

    @property
    def completed(self) -> bool:
        return self.terminated_at is None

    @property
    def ratio(self) -> float:
        return 1.0 if self.s_max == 0 else self.f_priv / self.s_max

    def rows(self, include_times: bool = True) -> list[dict]:
        out = []
        for s in self.steps:
            row = {"t": s.t, "stage": s.stage_used.value}
            if include_times:
                row["wall_time_s"] = f"{s.wall_time:.6f}"
            row.update(transfers=s.transfers_incurred, singles=s.singles_achieved, s_max_t=s.s_max_t)
            out.append(row)
        return out

    def fingerprint(self) -> str:
        """Deterministic text summary (wall times excluded)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.rows(include_times=False):
            w.writerow(row.values())
        for (pid, t), rid in sorted(self.assignment.entries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            w.writerow((t, pid, rid))
        w.writerow((self.f_trans, self.f_priv, self.s_max, self.terminated_at))
        return buf.getvalue()


CSV_FIELDS = ("t", "stage", "wall_time_s", "transfers", "singles", "s_max_t")


def write_iterations_csv(result: DynamicRunResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerows(result.rows())


def initial_state(instance: Instance) -> DynamicState:
    known = frozenset(p.id for p in instance.patients if p.registration <= 1)
    return DynamicState(1, known, tuple(instance.pre_assignments))


def window_instance(instance: Instance, state: DynamicState) -> Instance:
    """Known patients not yet discharged, re-indexed so period ``t`` becomes 1."""
    t = state.t
    T = instance.horizon
    rpold = state.rooms
    kept: list[Patient] = []
    for p in instance.patients:
        if p.id not in state.known or instance.end_period(p) <= t:
            continue
        arr = 0 if p.arrival < t else p.arrival - t + 1
        dis = instance.end_period(p) - t + 1
        kept.append(Patient(p.id, p.sex, 0, arr, dis, p.private))
    end = min(max((p.discharge + t - 1 for p in kept), default=t + 1), T + 1)
    horizon = max(end - t, 1)
    pre = tuple((p.id, rpold[p.id]) for p in kept if p.arrival == 0 and p.id in rpold)
    return Instance(instance.ward, horizon, tuple(kept), pre, (), f"{instance.name}@{t}")


_CASCADE = ((Stage.P, "P"), (Stage.PSTAR, "Pstar"), (Stage.OSTAR, "Ostar"), (Stage.H, "H"))


def step(instance: Instance, state: DynamicState, config: DynamicConfig) -> tuple[StepResult, DynamicState]:
    t = state.t
    win = window_instance(instance, state)
    s_max_t = _s_max_or_zero(instance, t)
    start = time.perf_counter()
    if not all(is_feasible(census(win, tau)) for tau in win.periods):
        res = StepResult(t, Stage.COMBINATORIAL_INFEASIBLE, None, Assignment(), 0, 0, s_max_t,
                         time.perf_counter() - start)
        return res, state

    backend = config.get_backend()
    limits = SolveLimits(time_limit=config.stage_time_limit)
    attempts = []
    chosen = None
    for stage, vid in _CASCADE:
        if stage == Stage.OSTAR:
            stage_limits = SolveLimits(time_limit=config.ostar_time_limit / 2)
        else:
            stage_limits = limits
        model = build(win, vid)
        result = solve(model, backend, stage_limits)
        attempts.append((stage.value, result.status.value))
        if result.status == Status.BACKEND_ERROR:
            raise DynamicError(f"t={t}, stage {stage.value}: {result.message}")
        if result.has_values:
            chosen = (stage, model, result)
            break
    if chosen is None:
        raise DynamicError(f"t={t}: cascade exhausted ({attempts})")
    stage, model, result = chosen
    plan = extract_assignment(win, model, result.values)

    fragment = Assignment({(pid, tau + t - 1): rid for (pid, tau), rid in plan.entries.items()})
    rpold = state.rooms
    present = win.present(1)
    transfers = sum(1 for p in present if p.id in rpold and plan.entries[(p.id, 1)] != rpold[p.id])
    occupancy: dict[str, int] = {}
    for p in present:
        occupancy[plan.entries[(p.id, 1)]] = occupancy.get(plan.entries[(p.id, 1)], 0) + 1
    singles = sum(1 for p in present if p.private and occupancy[plan.entries[(p.id, 1)]] == 1)

    nxt = t + 1
    new_rpold = tuple((p.id, plan.entries[(p.id, 1)]) for p in present if p.discharge > 2)  # window numbering
    known = frozenset(p.id for p in instance.patients if p.registration <= nxt)
    res = StepResult(t, stage, result, fragment, transfers, singles, s_max_t,
                     time.perf_counter() - start, tuple(attempts))
    return res, DynamicState(nxt, known, new_rpold)


def _s_max_or_zero(instance: Instance, t: int) -> int:
    c = census(instance, t)
    return s_max_value(c)[0] if is_feasible(c) else 0


def run_dynamic(instance: Instance, config: DynamicConfig | None = None) -> DynamicRunResult:
    config = config or DynamicConfig()
    state = initial_state(instance)
    out = DynamicRunResult()
    realized: dict[tuple[str, int], str] = {}
    for t in instance.periods:
        res, state = step(instance, state, config)
        out.steps.append(res)
        if res.stage_used == Stage.COMBINATORIAL_INFEASIBLE:
            out.terminated_at = t
            break
        for (pid, tau), rid in res.assignment_fragment.entries.items():
            if tau == t:
                realized[(pid, tau)] = rid
    out.assignment = Assignment(realized)
    out.s_max = sum(_s_max_or_zero(instance, t) for t in instance.periods)
    if out.completed:
        report = validate_assignment(instance, out.assignment)
        if not report.ok:
            raise DynamicError(f"realized assignment is invalid: {report.violations[0]}")
        out.f_trans = count_transfers(instance, out.assignment)
        out.f_priv = count_private_single_days(instance, out.assignment)
        if out.f_trans != sum(s.transfers_incurred for s in out.steps) or \
                out.f_priv != sum(s.singles_achieved for s in out.steps):
            raise DynamicError("per-step totals disagree with the realized assignment")
    else:
        out.f_trans = sum(s.transfers_incurred for s in out.steps)
        out.f_priv = sum(s.singles_achieved for s in out.steps)
    return out
