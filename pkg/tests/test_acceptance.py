"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
Runtime-sensitive numbers are measured on the machine running the suite.
"""

import itertools
import os
import sys
import time
from dataclasses import replace

import pytest

from pra.combinatorics import (feasible_even, feasible_general, feasible_single_and_c, is_feasible,
                               s_max_period, s_max_total)
from pra.core import Census, count_private_single_days, validate_assignment
from pra.dynamic import DynamicConfig, Stage, run_dynamic
from pra.formulations import build, add_objective_cuts, evaluate_objectives, extract_assignment
from pra.generator import GeneratorParams, generate, tiny_instance
from pra.oracles import NoFeasibleAssignmentError, TRANS_FIRST, exhaustive_pra, no_transfer_optimum, ppp_bruteforce
from pra.solver import EmbeddedBackend, ExternalBackend, ScipyBackend, SolveLimits, Status, solve

from fixtures import two_doubles

ADAPTER = f"{sys.executable} -m pra.adapters.scipy_lp {{model_path}} {{solution_path}} --time-limit {{time_limit}}"
EXTERNAL_CMD = os.environ.get("PRA_EXTERNAL_CMD", ADAPTER)

# (f_priv, s_max_total, P feasible over the whole horizon) from every solved instance
_BOUND_LOG: list[tuple[str, int, int, bool]] = []


def _sweep_12():
    for r in range(1, 5):
        for caps in itertools.combinations_with_replacement((1, 2), r):
            for F, M in itertools.product(range(7), repeat=2):
                for Fp, Mp in itertools.product(range(F + 1), range(M + 1)):
                    c = Census.of(F, M, Fp, Mp, capacities=caps)
                    if is_feasible(c):
                        yield c


def test_criterion_1_smax_matches_bruteforce(acceptance_line):
    start = time.perf_counter()
    cases = mismatches = 0
    for c in _sweep_12():
        cases += 1
        mismatches += s_max_period(c).s_max != ppp_bruteforce(c)
    took = time.perf_counter() - start
    ok = mismatches == 0 and cases > 0 and took < 60
    acceptance_line("1 s_max oracle equivalence", ok, f"{cases} censuses, {mismatches} mismatches, {took:.1f} s")
    assert ok


def test_criterion_2_feasibility_closed_forms(acceptance_line):
    start = time.perf_counter()
    cases = mismatches = 0
    for c in range(1, 5):
        for R1 in range(c - 1, 6):
            for Rc in range(0, 6 - R1):
                caps = [1] * R1 + [c] * Rc
                total = sum(caps)
                for F, M in itertools.product(range(total + 1), repeat=2):
                    cases += 1
                    mismatches += feasible_single_and_c(F, M, R1, Rc, c) != feasible_general(F, M, caps).feasible
    for c in range(1, 4):
        for R2 in range(c - 1, 6):
            for R2c in range(0, 6 - R2):
                caps = [2] * R2 + [2 * c] * R2c
                total = sum(caps)
                for F, M in itertools.product(range(total + 1), repeat=2):
                    cases += 1
                    mismatches += feasible_even(F, M, R2, R2c, c) != feasible_general(F, M, caps).feasible
    tight = not feasible_general(2, 2, [1, 3]).feasible
    took = time.perf_counter() - start
    ok = mismatches == 0 and tight and took < 30
    acceptance_line("2 feasibility closed forms", ok,
                    f"{cases} cases, {mismatches} mismatches, tightness example infeasible={tight}, {took:.1f} s")
    assert ok


def test_criterion_3_gap(acceptance_line):
    gaps = {}
    for c in _sweep_12():
        b = s_max_period(c)
        gaps[b.s_max_frac - b.s_max] = gaps.get(b.s_max_frac - b.s_max, 0) + 1
    ok = set(gaps) <= {0, 1}
    acceptance_line("3 fractional gap in {0, 1}", ok, f"gap histogram {dict(sorted(gaps.items()))}")
    assert ok


def _lex(inst, variant, backend, cuts=False):
    m = build(inst, variant)
    if cuts:
        m = add_objective_cuts(m, inst)
    r = solve(m, backend)
    assert r.status in (Status.OPTIMAL, Status.INFEASIBLE), (variant, r.status, r.message)
    if r.status == Status.INFEASIBLE:
        return None, None
    f_trans, f_priv = evaluate_objectives(inst, m, r.values)
    return tuple(r.objective_values), (f_trans, f_priv)


def test_criterion_4_formulation_equivalence(acceptance_line):
    backend = EmbeddedBackend()
    start = time.perf_counter()
    failures = []
    feasible = 0
    for seed in range(1, 201):
        inst = tiny_instance(seed)
        try:
            oracle_trans, _, _ = exhaustive_pra(inst, TRANS_FIRST)
        except NoFeasibleAssignmentError:
            oracle_trans = None
        feasible += oracle_trans is not None
        trans = {v: _lex(inst, v, backend)[0] for v in "ABCD"}
        if {t[0] if t else None for t in trans.values()} != {oracle_trans}:
            failures.append((seed, "A-D", trans, oracle_trans))
        lex = {v: _lex(inst, v, backend) for v in ("E", "F", "H", "I", "M", "N", "O", "P")}
        if lex["E"][0] != lex["H"][0] or lex["F"][0] != lex["I"][0]:
            failures.append((seed, "E/H F/I", lex))
        no_move = no_transfer_optimum(inst)
        privs = {v: lex[v][1][1] if lex[v][1] else None for v in "MNO"}
        if len(set(privs.values())) != 1 or privs["O"] != (no_move[0] if no_move else None):
            failures.append((seed, "M-O", privs, no_move))
        for v in ("E", "F", "H", "I", "M", "N", "O"):
            if _lex(inst, v, backend, cuts=True)[0] != lex[v][0]:
                failures.append((seed, f"cuts {v}"))
        for v, (_, counts) in lex.items():
            if counts is not None:
                s_tot = s_max_total(inst)  # only reached when every period is feasible
                _BOUND_LOG.append((f"tiny-{seed}/{v}", counts[1], s_tot, lex["P"][1] is not None))
    took = time.perf_counter() - start
    ok = not failures and took < 600
    acceptance_line("4 formulation equivalence", ok, f"200 instances ({feasible} feasible), {len(failures)} mismatches, {took:.1f} s")
    assert ok, failures[:5]


def _dynamic_instance(seed, days=90):
    n = 8 + (seed * 5) % 13
    return generate(GeneratorParams(n_rooms=n, days=days, mean_daily_arrivals=1375 / 365 * n / 18, seed=seed))


FULL_INFO_DAYS = 21  # one-shot P over 90 days can exceed minutes per ward; same seed gives the prefix


def test_criterion_6_dynamic_cascade(acceptance_line):
    problems = []
    completed = full_info_checked = 0
    start = time.perf_counter()
    for seed in range(1, 21):
        inst = _dynamic_instance(seed)
        first, second = run_dynamic(inst), run_dynamic(inst)
        if first.fingerprint() != second.fingerprint():
            problems.append((seed, "nondeterministic"))
        if first.completed:
            completed += 1
            if not validate_assignment(inst, first.assignment).ok:
                problems.append((seed, "violations"))
            _BOUND_LOG.append((f"dynamic-{seed}", first.f_priv, first.s_max, False))
        if any(s.transfers_incurred for s in first.steps if s.stage_used == Stage.P):
            problems.append((seed, "transfer in a P step"))

        prefix = _dynamic_instance(seed, FULL_INFO_DAYS)
        full = replace(prefix, patients=tuple(replace(p, registration=0) for p in prefix.patients))
        m = build(full, "P")
        one_shot = solve(m, ScipyBackend(), SolveLimits(time_limit=120))
        if one_shot.status != Status.OPTIMAL:
            continue
        full_info_checked += 1
        a = extract_assignment(full, m, one_shot.values)
        shot_priv = count_private_single_days(full, a)
        _BOUND_LOG.append((f"full-{seed}/P", shot_priv, s_max_total(full), True))
        run = run_dynamic(full)
        if not (run.completed and all(s.stage_used == Stage.P for s in run.steps)
                and (run.f_trans, run.f_priv) == (0, shot_priv)):
            problems.append((seed, "full information differs from one-shot P",
                             run.f_trans, run.f_priv, shot_priv))
    took = time.perf_counter() - start
    ok = not problems and full_info_checked > 0
    acceptance_line("6 dynamic cascade soundness", ok,
                    f"20 instances, {completed} completed, {full_info_checked} full-information comparisons "
                    f"({FULL_INFO_DAYS}-day prefixes), "
                    f"{len(problems)} problems, {took:.1f} s")
    assert ok, problems


def test_criterion_7_two_doubles_end_to_end(acceptance_line):
    inst = two_doubles()
    got = {}
    for name, backend in (("embedded", EmbeddedBackend()), ("external", ExternalBackend(EXTERNAL_CMD))):
        m = build(inst, "H")
        r = solve(m, backend, SolveLimits(time_limit=60))
        got[name] = (r.status.value, tuple(r.objective_values))
        if r.has_values:
            _BOUND_LOG.append((f"two_doubles/{name}", evaluate_objectives(inst, m, r.values)[1], s_max_total(inst), False))
    ok = all(v == ("Optimal", (1, 1)) for v in got.values())
    acceptance_line("7 two-double-room example end-to-end", ok, str(got))
    assert ok


def test_criterion_5_bound(acceptance_line):
    # runs after the criteria that populate the log (file order)
    if not _BOUND_LOG:
        pytest.skip("no solved instances recorded (run the whole module)")
    over = [e for e in _BOUND_LOG if e[1] > e[2]]
    short = [e for e in _BOUND_LOG if e[3] and e[0].endswith("/P") and e[1] != e[2]]
    tight = sum(1 for e in _BOUND_LOG if e[3] and e[0].endswith("/P"))
    ok = not over and not short
    acceptance_line("5 bound f_priv <= s_max", ok,
                    f"{len(_BOUND_LOG)} solved instances, {len(over)} above the bound, "
                    f"{tight} P-feasible with equality checked, {len(short)} short")
    assert ok, (over[:5], short[:5])


def test_criterion_8_runtime_sanity(acceptance_line):
    if "PRA_SKIP_EXTERNAL_RUNTIME" in os.environ:
        pytest.skip("external runtime report disabled")
    inst = generate(GeneratorParams(n_rooms=20, days=90, mean_daily_arrivals=1375 / 365 * 20 / 18, seed=101))
    res = run_dynamic(inst, DynamicConfig(backend=ExternalBackend(EXTERNAL_CMD)))
    times = sorted(s.wall_time for s in res.steps)
    slow = sum(t >= 15 for t in times)
    acceptance_line("8 runtime sanity (soft, reported only)", True,
                    f"{len(times)} iterations via external backend, max {times[-1]:.2f} s, "
                    f"median {times[len(times) // 2]:.2f} s, {slow} at or above 15 s")
