"""Whittle indexes by binary search and the index-to-Lagrange group bound.

The index of an arm at a given state and remaining horizon is the per-action
charge at which acting and staying passive have equal value. Sorting a
group's indexes and charging the midpoint between the last funded and first
unfunded arm converts an index policy into an upper bound on the group's
budgeted value, which is what the outer allocation loops consume.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .mdp import ArmModel, _backward


class NotIndexableWarning(UserWarning):
    """Act-minus-passive value gap was not monotone over the charge probe grid."""


class BudgetExceedsGroup(ValueError):
    def __init__(self, budget, group_size):
        self.budget, self.group_size = budget, group_size
        super().__init__(f"budget {budget} exceeds group size {group_size}")


@dataclass(frozen=True)
class WhittleIndexSet:
    """Per-arm indexes at the arms' current states, plus the search precision."""

    indexes: np.ndarray
    precision: float


@dataclass(frozen=True)
class GroupValueBound:
    """Lagrangian upper-bound estimate of one group's value at a budget."""

    value: float
    lambda_star: float
    per_arm_values: np.ndarray
    budget: int


@dataclass
class IndexCache:
    """Memo for charged value tables and indexes, keyed by arm content.

    Everything cached is a pure function of its key, so a cache may be shared
    across episodes, seeds, and threads; concurrent refills are benign.
    """

    values: dict = field(default_factory=dict)
    indexes: dict = field(default_factory=dict)

    def backward_values(self, arm: ArmModel, horizon: int, charge: float) -> np.ndarray:
        key = (arm.fingerprint, horizon, charge)
        hit = self.values.get(key)
        if hit is None:
            hit, _ = _backward(arm, 0, horizon, charge)
            self.values[key] = hit
        return hit


def _act_gap(cache, arm, state, horizon, charge):
    """Q(act) - Q(passive) at the top layer of an ``horizon``-step problem."""
    values = cache.backward_values(arm, horizon, charge)
    delta = arm.transitions[state, 1, :] - arm.transitions[state, 0, :]
    return float(-charge + delta @ values[1])


INDEXABILITY_PROBES = 7
INDEXABILITY_TOL = 1e-7


def whittle_index(
    arm: ArmModel,
    state: int,
    remaining_horizon: int,
    precision: float = 1e-4,
    cache: IndexCache | None = None,
    check_indexability: bool = True,
) -> float:
    """Charge at which acting and not acting on ``arm`` in ``state`` break even.

    Binary search over [-1, h + 1]; with rewards in [0, 1] no rational charge
    can exceed the remaining horizon. If the act-minus-passive gap is not
    monotone over a coarse probe grid the arm may not be indexable; a
    NotIndexableWarning is emitted and the first crossing found is returned.
    """
    if remaining_horizon < 1:
        raise ValueError(f"remaining_horizon must be >= 1, got {remaining_horizon}")
    if precision <= 0:
        raise ValueError(f"precision must be positive, got {precision}")
    cache = IndexCache() if cache is None else cache
    key = (arm.fingerprint, state, remaining_horizon, precision)
    hit = cache.indexes.get(key)
    if hit is not None:
        return hit

    lo, hi = -1.0, float(remaining_horizon + 1)
    if check_indexability:
        gaps = [
            _act_gap(cache, arm, state, remaining_horizon, p)
            for p in np.linspace(lo, hi, INDEXABILITY_PROBES)
        ]
        if any(b > a + INDEXABILITY_TOL for a, b in zip(gaps, gaps[1:])):
            warnings.warn(
                f"act/passive gap not monotone in the charge for state {state}",
                NotIndexableWarning,
                stacklevel=2,
            )
    while hi - lo > precision:
        mid = 0.5 * (lo + hi)
        if _act_gap(cache, arm, state, remaining_horizon, mid) > 0.0:
            lo = mid
        else:
            hi = mid
    result = 0.5 * (lo + hi)
    cache.indexes[key] = result
    return result


def compute_index_set(
    arms,
    states,
    remaining_horizon: int,
    precision: float = 1e-4,
    cache: IndexCache | None = None,
) -> WhittleIndexSet:
    """Indexes for each (arm, current state) pair at the same remaining horizon."""
    cache = IndexCache() if cache is None else cache
    indexes = np.array(
        [
            whittle_index(arm, int(s), remaining_horizon, precision, cache)
            for arm, s in zip(arms, states)
        ]
    )
    return WhittleIndexSet(indexes=indexes, precision=precision)


def whittle_to_lagrange(
    arms,
    states,
    budget: int,
    horizon: int,
    indexes: WhittleIndexSet,
    cache: IndexCache | None = None,
) -> GroupValueBound:
    """Group-value upper bound from sorted indexes and one charged DP per arm.

    The charge is the midpoint between the budget-th and (budget+1)-th
    largest index, clamped to be non-negative. At full budget the charge is
    zero, where the bound is exactly the sum of unconstrained arm values. At
    zero budget the charge is pushed above the remaining horizon so that no
    state can profit from acting, making the bound exactly the sum of
    passive values.
    """
    n = len(arms)
    if not 0 <= budget <= n:
        raise BudgetExceedsGroup(budget, n)
    w = np.asarray(indexes.indexes, dtype=float)
    sorted_w = np.array(sorted(w, reverse=True))
    if budget == n:
        lam = 0.0
    elif budget == 0:
        lam = max(float(sorted_w[0]), 0.0, float(horizon)) + indexes.precision
    else:
        lam = max(0.0, 0.5 * float(sorted_w[budget - 1] + sorted_w[budget]))
    cache = IndexCache() if cache is None else cache
    per_arm = np.array(
        [
            cache.backward_values(arm, horizon, lam)[0, int(s)]
            for arm, s in zip(arms, states)
        ]
    )
    value = float(per_arm.sum() + budget * horizon * lam)
    return GroupValueBound(
        value=value, lambda_star=lam, per_arm_values=per_arm, budget=budget
    )
