"""Lexicographic solve driver and backends.

A backend solves one objective of a :class:`~pra.model.BipModel` at a time.
The driver walks the objective stack, pins each achieved optimum with an
equality row and moves on.
"""

from __future__ import annotations

import os
import shlex
import subprocess
import tempfile
import time
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint as ScipyRow, milp
from scipy.sparse import csr_matrix

from .model import (EQ, GE, LE, MAX, BipModel, SolutionParseError, VarAssignment, fixing_constraint,
                    parse_solution, render_solution, solve_single, write_lp)
from . import model as _model


class Status(str, Enum):
    OPTIMAL = "Optimal"
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    TIME_LIMIT = "TimeLimit"
    BACKEND_ERROR = "BackendError"


@dataclass(frozen=True)
class SolveLimits:
    time_limit: float | None = None  # seconds per objective stage
    node_limit: int | None = None  # embedded backend only

    def __post_init__(self):
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValueError("node_limit must be positive")


@dataclass
class SolveResult:
    status: Status
    objective_values: list[int] = field(default_factory=list)
    values: VarAssignment | None = None
    wall_time: float = 0.0
    message: str = ""

    @property
    def has_values(self) -> bool:
        return self.status in (Status.OPTIMAL, Status.FEASIBLE) and self.values is not None


class BackendFailure(RuntimeError):
    pass


# stage outcomes reported by backends
STAGE_OPTIMAL, STAGE_INFEASIBLE, STAGE_TIMELIMIT = "optimal", "infeasible", "timelimit"


@dataclass
class StageOutcome:
    status: str
    values: VarAssignment | None = None
    message: str = ""


class Backend(Protocol):
    name: str

    def solve_stage(self, model: BipModel, objective_index: int | None,
                    time_limit: float | None) -> StageOutcome: ...


class EmbeddedBackend:
    """Exhaustive depth-first search; exact, meant for small models."""

    name = "embedded"

    def __init__(self, node_limit: int = 10 ** 7):
        self.node_limit = node_limit

    def solve_stage(self, model, objective_index, time_limit):
        status, values, nodes = solve_single(model, objective_index, self.node_limit, time_limit)
        if status == _model.OPTIMAL:
            return StageOutcome(STAGE_OPTIMAL, values, f"{nodes} nodes")
        if status == _model.INFEASIBLE:
            return StageOutcome(STAGE_INFEASIBLE, None, f"{nodes} nodes")
        return StageOutcome(STAGE_TIMELIMIT, values, f"{status} after {nodes} nodes")


def _matrices(model: BipModel):
    n = len(model.vars)
    rows, cols, data, lo, hi = [], [], [], [], []
    for i, c in enumerate(model.constraints):
        for a, j in c.terms:
            rows.append(i)
            cols.append(j)
            data.append(a)
        lo.append(c.rhs if c.relation in (GE, EQ) else -np.inf)
        hi.append(c.rhs if c.relation in (LE, EQ) else np.inf)
    A = csr_matrix((data, (rows, cols)), shape=(len(model.constraints), n), dtype=float)
    return A, np.array(lo, dtype=float), np.array(hi, dtype=float)


class ScipyBackend:
    """HiGHS branch-and-cut through :func:`scipy.optimize.milp`, in process."""

    name = "scipy"

    def solve_stage(self, model, objective_index, time_limit):
        n = len(model.vars)
        if n == 0:
            ok = all(c.satisfied(()) for c in model.constraints)
            return StageOutcome(STAGE_OPTIMAL if ok else STAGE_INFEASIBLE, VarAssignment(()) if ok else None)
        cost = np.zeros(n)
        if objective_index is not None:
            obj = model.objectives[objective_index]
            sign = -1.0 if obj.sense == MAX else 1.0
            for a, j in obj.terms:
                cost[j] += sign * a
        kwargs = {}
        if model.constraints:
            A, lo, hi = _matrices(model)
            kwargs["constraints"] = ScipyRow(A, lo, hi)
        options = {"disp": False}
        if time_limit is not None:
            options["time_limit"] = float(time_limit)
        res = milp(cost, integrality=np.ones(n), bounds=Bounds(0, 1), options=options, **kwargs)
        values = None
        if res.x is not None:
            x = np.rint(res.x).astype(int)
            if np.max(np.abs(res.x - x)) > _model.INT_TOL:
                raise BackendFailure(f"HiGHS returned a fractional point ({res.message})")
            values = VarAssignment(tuple(int(v) for v in x))
        if res.status == 0:
            return StageOutcome(STAGE_OPTIMAL, values, res.message)
        if res.status == 2:
            return StageOutcome(STAGE_INFEASIBLE, None, res.message)
        if res.status == 1:
            return StageOutcome(STAGE_TIMELIMIT, values, res.message)
        raise BackendFailure(f"HiGHS status {res.status}: {res.message}")


DEFAULT_ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "PYTHONPATH", "VIRTUAL_ENV")


class ExternalBackend:
    """Run a solver command on an LP file and read back a solution file.

    ``command`` is a template with ``{model_path}``, ``{solution_path}`` and
    optionally ``{time_limit}`` placeholders. The solution file must follow
    the adapter convention: a ``STATUS optimal|infeasible|timelimit`` first
    line, then one ``name value`` line per variable.
    """

    name = "external"

    def __init__(self, command: str, workdir: str | Path | None = None,
                 env_allowlist: Sequence[str] = DEFAULT_ENV_ALLOWLIST, keep_files: bool = False):
        if "{model_path}" not in command or "{solution_path}" not in command:
            raise ValueError("command template needs {model_path} and {solution_path}")
        self.command = command
        self.workdir = Path(workdir) if workdir else None
        self.env_allowlist = tuple(env_allowlist)
        self.keep_files = keep_files

    def _argv(self, model_path: Path, solution_path: Path, time_limit: float | None) -> list[str]:
        subst = {"model_path": str(model_path), "solution_path": str(solution_path),
                 "time_limit": "" if time_limit is None else f"{time_limit:g}"}
        argv: list[str] = []
        for tok in shlex.split(self.command):
            arg = tok.format(**subst)
            if arg:
                argv.append(arg)
            elif tok == "{time_limit}" and argv and argv[-1].startswith("-"):
                argv.pop()  # flag whose value is missing
        return argv

    def solve_stage(self, model, objective_index, time_limit):
        index = 0 if objective_index is None else objective_index
        if objective_index is None:
            model = model.with_objectives([_model.Objective(MAX, (), 0, "zero")])
            index = 0
        tmp = None
        if self.workdir is None:
            tmp = tempfile.TemporaryDirectory(prefix="pra-")
            workdir = Path(tmp.name)
        else:
            workdir = self.workdir
            workdir.mkdir(parents=True, exist_ok=True)
        run_id = uuid.uuid4().hex[:12]
        model_path, solution_path = workdir / f"{run_id}.lp", workdir / f"{run_id}.sol"
        try:
            model_path.write_text(write_lp(model, index))
            env = {k: os.environ[k] for k in self.env_allowlist if k in os.environ}
            timeout = None if time_limit is None else 2 * time_limit + 30
            try:
                proc = subprocess.run(self._argv(model_path, solution_path, time_limit), cwd=workdir,
                                      env=env, capture_output=True, text=True, timeout=timeout)
            except FileNotFoundError as exc:
                raise BackendFailure(f"solver command not found: {exc}") from None
            except subprocess.TimeoutExpired:
                raise BackendFailure(f"solver process exceeded {timeout:g} s") from None
            diag = (proc.stderr or proc.stdout or "").strip()[-2000:]
            if proc.returncode != 0:
                raise BackendFailure(f"solver exited with code {proc.returncode}: {diag}")
            if not solution_path.exists():
                raise BackendFailure(f"solver wrote no solution file: {diag}")
            return _read_solution_file(solution_path.read_text(), model)
        finally:
            if tmp is not None and not self.keep_files:
                tmp.cleanup()
            elif not self.keep_files:
                for p in (model_path, solution_path):
                    p.unlink(missing_ok=True)


def _read_solution_file(text: str, model: BipModel) -> StageOutcome:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("STATUS"):
        raise BackendFailure("solution file does not start with a STATUS line")
    parts = lines[0].split()
    if len(parts) != 2 or parts[1] not in (STAGE_OPTIMAL, STAGE_INFEASIBLE, STAGE_TIMELIMIT):
        raise BackendFailure(f"bad status line {lines[0]!r}")
    status = parts[1]
    if status == STAGE_INFEASIBLE:
        return StageOutcome(status)
    if len(lines) == 1:
        if status == STAGE_TIMELIMIT:
            return StageOutcome(status)
        raise BackendFailure("optimal status but no variable values")
    try:
        values = parse_solution(text, model)
    except SolutionParseError as exc:
        raise BackendFailure(f"unparseable solution: {exc}") from None
    return StageOutcome(status, values)


def write_solution_file(path: str | Path, model: BipModel, status: str,
                        values: VarAssignment | None) -> None:
    """Write a solution in the adapter format (used by bundled adapters)."""
    if values is None:
        Path(path).write_text(f"STATUS {status}\n")
    else:
        Path(path).write_text(render_solution(model, values, status))


def make_backend(kind: str = "embedded", command: str | None = None, **kwargs) -> Backend:
    if kind == "embedded":
        return EmbeddedBackend(**kwargs)
    if kind == "scipy":
        return ScipyBackend()
    if kind == "external":
        if not command:
            raise ValueError("the external backend needs a command template")
        return ExternalBackend(command, **kwargs)
    raise ValueError(f"unknown backend {kind!r}")


def solve(model: BipModel, backend: Backend | None = None,
          limits: SolveLimits = SolveLimits()) -> SolveResult:
    """Optimise the objective stack of ``model`` lexicographically.

    A time limit with an incumbent yields ``Feasible``; the reported
    objective values then cover the completed stages only.
    """
    if backend is None:
        backend = EmbeddedBackend(limits.node_limit or 10 ** 7)
    elif limits.node_limit is not None and isinstance(backend, EmbeddedBackend):
        backend = EmbeddedBackend(limits.node_limit)
    start = time.perf_counter()
    current = model
    achieved: list[int] = []
    values: VarAssignment | None = None
    notes = []

    def done(status: Status, vals, msg: str = "") -> SolveResult:
        text = "; ".join([*notes, msg] if msg else notes)
        return SolveResult(status, achieved, vals, time.perf_counter() - start, text)

    for k, obj in enumerate(model.objectives):
        try:
            out = backend.solve_stage(current, k if obj.terms else None, limits.time_limit)
        except BackendFailure as exc:
            return done(Status.BACKEND_ERROR, None, str(exc))
        if out.message:
            notes.append(f"stage {k}: {out.message}")
        if out.status == STAGE_INFEASIBLE:
            if k > 0:
                return done(Status.BACKEND_ERROR, None, "stage infeasible after fixing an attained optimum")
            return done(Status.INFEASIBLE, None)
        if out.status == STAGE_TIMELIMIT:
            incumbent = out.values if out.values is not None else values
            if incumbent is None:
                return done(Status.TIME_LIMIT, None)
            return done(Status.FEASIBLE, incumbent)
        if out.values is None or len(out.values) != len(model.vars):
            return done(Status.BACKEND_ERROR, None, "optimal status without a full value vector")
        values = out.values
        value = obj.value(values.values)
        achieved.append(value)
        if obj.terms and k + 1 < len(model.objectives):
            current = current.with_constraints([fixing_constraint(obj, value, f"fix_obj{k}")])
    return done(Status.OPTIMAL, values)


def verify(model: BipModel, result: SolveResult) -> bool:
    """Re-check every row and each reported objective value against the values."""
    if result.values is None or len(result.values) != len(model.vars):
        return False
    vals = result.values.values
    if any(v not in (0, 1) for v in vals):
        return False
    if model.violated(vals):
        return False
    if len(result.objective_values) > len(model.objectives):
        return False
    return all(obj.value(vals) == got for obj, got in zip(model.objectives, result.objective_values))
