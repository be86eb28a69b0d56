"""Per-period combinatorics: sex-separated feasibility and single-room bounds.

With arbitrarily many transfers allowed, every period can be judged on its
own, so everything here works on a :class:`~pra.core.Census`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from math import ceil
from typing import Iterable, Sequence

from .core import Census, Instance, census


class InfeasibleCensusError(ValueError):
    """No sex-separated placement exists for the census."""


class PreconditionError(ValueError):
    """A closed form was called outside the range where it is valid."""


class UnsupportedCapacitiesError(ValueError):
    pass


class Method(str, Enum):
    DOUBLE_ONLY = "DoubleOnly"
    SINGLE_AND_C = "SingleAndC"
    EVEN_TWO_TWO_C = "EvenTwoTwoC"
    GENERAL_DP = "GeneralDP"


@dataclass(frozen=True)
class FeasibilityVerdict:
    feasible: bool
    method: Method
    # indices into the capacity sequence the verdict was computed on
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None


@dataclass(frozen=True)
class PppBound:
    alpha: int
    beta_f: int
    beta_m: int
    gamma: int
    s_max: int
    s_max_frac: int


# ---------------------------------------------------------------------------
# feasibility


def feasible_double(F: int, M: int, n_rooms: int) -> bool:
    if min(F, M, n_rooms) < 0:
        raise ValueError("counts must be non-negative")
    return ceil(F / 2) + ceil(M / 2) <= n_rooms


def feasible_single_and_c(F: int, M: int, R1: int, Rc: int, c: int) -> bool:
    """Capacities {1, c}: feasible iff the patients fit into the beds.

    Only valid when there are at least ``c - 1`` single rooms.
    """
    if c < 1 or min(F, M, R1, Rc) < 0:
        raise ValueError("invalid arguments")
    if R1 < c - 1:
        raise PreconditionError(f"need at least {c - 1} single rooms, got {R1}")
    return F + M <= R1 + c * Rc


def feasible_even(F: int, M: int, R2: int, R2c: int, c: int) -> bool:
    """Capacities {2, 2c} with ``R2 >= c - 1`` double rooms."""
    if c < 1 or min(F, M, R2, R2c) < 0:
        raise ValueError("invalid arguments")
    if R2 < c - 1:
        raise PreconditionError(f"need at least {c - 1} double rooms, got {R2}")
    total = 2 * R2 + 2 * c * R2c
    return (F % 2 == 0 and M % 2 == 0 and F + M <= total) or F + M < total


def _subset_sums(capacities: Sequence[int]) -> list[int]:
    """first[s] = index of the item that first reached sum s (-1 for s=0, -2 unreachable)."""
    total = sum(capacities)
    first = [-2] * (total + 1)
    first[0] = -1
    for i, c in enumerate(capacities):
        for s in range(total, c - 1, -1):
            if first[s] == -2 and first[s - c] != -2:
                first[s] = i
    return first


def feasible_general(F: int, M: int, capacities: Sequence[int]) -> FeasibilityVerdict:
    """Exact check by subset-sum reachability, with a witness split."""
    capacities = list(capacities)
    total = sum(capacities)
    if F + M > total:
        return FeasibilityVerdict(False, Method.GENERAL_DP)
    first = _subset_sums(capacities)
    for s in range(F, total - M + 1):
        if first[s] != -2:
            chosen = []
            while s > 0:
                i = first[s]
                chosen.append(i)
                s -= capacities[i]
            S = tuple(sorted(chosen))
            rest = tuple(i for i in range(len(capacities)) if i not in set(S))
            return FeasibilityVerdict(True, Method.GENERAL_DP, (S, rest))
    return FeasibilityVerdict(False, Method.GENERAL_DP)


def construct_room_split(c: Census) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Witness split for capacities {1, c} following the constructive argument.

    Returns indices into ``c.capacities`` (ascending, so singles come first):
    the female rooms and the male rooms.
    """
    caps = c.capacities
    big = sorted(set(caps) - {1})
    if len(big) > 1:
        raise UnsupportedCapacitiesError(f"capacities {sorted(set(caps))} are not of the form {{1, c}}")
    cap = big[0] if big else 1
    R1, Rc = caps.count(1), (caps.count(cap) if cap > 1 else 0)
    if not feasible_single_and_c(c.F, c.M, R1, Rc, cap):
        raise InfeasibleCensusError(f"F={c.F}, M={c.M} exceed {len(caps)} rooms")
    singles = list(range(R1))
    larges = list(range(R1, R1 + Rc))
    if cap == 1:
        S = singles[:c.F]
    else:
        k = min(c.F // cap, Rc)
        l = min(c.M // cap, Rc - k)
        if R1 >= (c.F - cap * k) + (c.M - cap * l):
            S = larges[:k] + singles[:c.F - cap * k]
        else:
            S = larges[:k + 1]
    S_set = set(S)
    return tuple(sorted(S)), tuple(i for i in range(len(caps)) if i not in S_set)


def check_feasibility(c: Census) -> FeasibilityVerdict:
    """Cheapest applicable closed form first, subset-sum DP as fallback."""
    caps = c.capacities
    kinds = sorted(set(caps))
    F, M = c.F, c.M
    if not kinds:
        return FeasibilityVerdict(F + M == 0, Method.DOUBLE_ONLY, ((), ()) if F + M == 0 else None)
    if len(kinds) == 1:
        cap = kinds[0]
        nf = ceil(F / cap)
        ok = nf + ceil(M / cap) <= len(caps)
        witness = (tuple(range(nf)), tuple(range(nf, len(caps)))) if ok else None
        return FeasibilityVerdict(ok, Method.DOUBLE_ONLY, witness)
    if len(kinds) == 2:
        small, large = kinds
        n_small, n_large = caps.count(small), caps.count(large)
        if small == 1 and n_small >= large - 1:
            ok = feasible_single_and_c(F, M, n_small, n_large, large)
            return FeasibilityVerdict(ok, Method.SINGLE_AND_C, construct_room_split(c) if ok else None)
        if small == 2 and large % 2 == 0 and n_small >= large // 2 - 1:
            ok = feasible_even(F, M, n_small, n_large, large // 2)
            return FeasibilityVerdict(ok, Method.EVEN_TWO_TWO_C)
    return feasible_general(F, M, caps)


def is_feasible(c: Census) -> bool:
    return check_feasibility(c).feasible


# ---------------------------------------------------------------------------
# private patients in single rooms


def _require_single_double(c: Census) -> None:
    if not set(c.capacities) <= {1, 2}:
        raise UnsupportedCapacitiesError(f"closed form needs capacities in {{1, 2}}, got {sorted(set(c.capacities))}")


def s_max_period(c: Census) -> PppBound:
    """Maximum number of private patients alone in a room (capacities {1, 2})."""
    _require_single_double(c)
    if not is_feasible(c):
        raise InfeasibleCensusError(f"census {c} admits no sex-separated placement")
    n = c.n_rooms  # single rooms count as doubles here
    reg_f, reg_m = c.F - c.F_priv, c.M - c.M_priv
    alpha = n - ceil(reg_f / 2) - ceil(reg_m / 2)
    assert alpha >= 0, f"negative alpha for feasible census {c}"
    beta_f = min(reg_f % 2, c.F_priv)
    beta_m = min(reg_m % 2, c.M_priv)
    gamma = 2 * alpha + beta_f + beta_m
    priv = c.n_private
    if alpha >= priv:
        s = priv
    elif alpha == priv - 1 and beta_f == beta_m == 1:
        s = priv - 1
    else:
        s = gamma - priv
    assert 0 <= s <= priv, f"s_max {s} out of range for {c}"
    return PppBound(alpha, beta_f, beta_m, gamma, s, s_max_frac_period(c))


def s_max_frac_period(c: Census) -> int:
    """Single-room count when sex separation may be violated fractionally."""
    _require_single_double(c)
    return max(0, min(c.n_private, 2 * c.n_rooms - c.n_patients))


def s_max_exchange(c: Census) -> int:
    """Exact single-room maximum for arbitrary capacities.

    Private patients placed alone may always be moved to the smallest rooms
    without hurting the rest of the placement, so for ``k`` lone patients it
    suffices to reserve the ``k`` smallest rooms and split the others by the
    subset-sum check.
    """
    caps = sorted(c.capacities)
    if not feasible_general(c.F, c.M, caps).feasible:
        raise InfeasibleCensusError(f"census {c} admits no sex-separated placement")
    for k in range(min(c.n_private, len(caps)), 0, -1):
        rest = caps[k:]
        for sf in range(max(0, k - c.M_priv), min(c.F_priv, k) + 1):
            if feasible_general(c.F - sf, c.M - (k - sf), rest).feasible:
                return k
    return 0


def s_max_value(c: Census) -> tuple[int, str]:
    """s_max of one census and the method used ('closed-form' or 'exchange')."""
    if set(c.capacities) <= {1, 2}:
        return s_max_period(c).s_max, "closed-form"
    return s_max_exchange(c), "exchange"


def s_max_by_period(instance: Instance) -> dict[int, int]:
    return {t: s_max_value(census(instance, t))[0] for t in instance.periods}


def s_max_total(instance: Instance) -> int:
    """Upper bound on the private-single-days objective over the horizon."""
    return sum(s_max_by_period(instance).values())


# ---------------------------------------------------------------------------
# audit export


SWEEP_FIELDS = ("capacities", "F", "M", "F_priv", "M_priv", "feasible", "method", "s_max", "s_max_frac", "oracle")


def write_sweep_csv(rows: Iterable[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_FIELDS, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
