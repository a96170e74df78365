"""Budget allocation across groups: water-filling maximin and greedy Nash welfare.

Both allocators are generic over a group-value oracle, so they run identically
against the real Lagrangian bound and against synthetic value functions in
tests. The Nash-welfare allocator optionally equalizes group sizes first by
resampling small groups up to the largest size and rescaling the resulting
budgets back, which removes the small-group bias of the naive product
objective.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass

import numpy as np

from .whittle import IndexCache, compute_index_set, whittle_to_lagrange

# Oracle values are floored here before taking logs; a group at exactly zero
# value would otherwise produce infinite log-differences.
LOG_VALUE_FLOOR = 1e-6


class BudgetExceedsArms(ValueError):
    def __init__(self, budget, capacity):
        self.budget, self.capacity = budget, capacity
        super().__init__(f"budget {budget} exceeds total arm capacity {capacity}")


class NonPositiveValue(ValueError):
    def __init__(self, group, budget, value):
        self.group, self.budget, self.value = group, budget, value
        super().__init__(f"oracle value for group {group} at budget {budget} is {value} < 0")


@dataclass
class AllocationResult:
    """Integer per-group budgets plus the values that justified them.

    ``objective_trace`` records, per greedy step, the chosen group and the
    selection score at that step (the refreshed size-normalized value for the
    maximin allocator, the winning log-difference for Nash welfare).
    """

    budgets: np.ndarray
    objective_trace: list[tuple[int, float]]
    final_values: np.ndarray


class GroupValueOracle(abc.ABC):
    """Evaluator of group value at an integer budget, memoized per (g, b).

    Concrete oracles bind whatever context they need (arm models, current
    states, remaining horizon); evaluations must be deterministic for the
    oracle's lifetime, which spans one allocation run.
    """

    def __init__(self, sizes):
        self.sizes = tuple(int(s) for s in sizes)
        self._memo: dict[tuple[int, int], float] = {}

    @property
    def n_groups(self) -> int:
        return len(self.sizes)

    def evaluate(self, group: int, budget: int) -> float:
        key = (group, budget)
        hit = self._memo.get(key)
        if hit is None:
            hit = float(self._value(group, budget))
            self._memo[key] = hit
        return hit

    @abc.abstractmethod
    def _value(self, group: int, budget: int) -> float: ...

    @abc.abstractmethod
    def resampled(self, target_size: int, rng) -> "GroupValueOracle":
        """Oracle over groups upsampled to ``target_size`` arms each."""


class FunctionOracle(GroupValueOracle):
    """Synthetic oracle backed by plain value functions of the budget."""

    def __init__(self, funcs, sizes):
        super().__init__(sizes)
        self.funcs = list(funcs)

    def _value(self, group, budget):
        return self.funcs[group](budget)

    def resampled(self, target_size, rng):
        # Synthetic value functions carry no arms to resample.
        return FunctionOracle(self.funcs, [target_size] * self.n_groups)


class LagrangeBoundOracle(GroupValueOracle):
    """The real inner optimizer: index sort plus charged value iteration."""

    def __init__(self, group_arms, group_states, horizon, precision=1e-4, cache=None):
        super().__init__([len(arms) for arms in group_arms])
        self.group_arms = [list(arms) for arms in group_arms]
        self.group_states = [list(states) for states in group_states]
        self.horizon = horizon
        self.precision = precision
        self.cache = IndexCache() if cache is None else cache
        self._index_sets = [None] * self.n_groups

    def _indexes(self, group):
        if self._index_sets[group] is None:
            self._index_sets[group] = compute_index_set(
                self.group_arms[group],
                self.group_states[group],
                self.horizon,
                self.precision,
                self.cache,
            )
        return self._index_sets[group]

    def _value(self, group, budget):
        bound = whittle_to_lagrange(
            self.group_arms[group],
            self.group_states[group],
            budget,
            self.horizon,
            self._indexes(group),
            self.cache,
        )
        return bound.value

    def resampled(self, target_size, rng):
        arms, states = [], []
        for g in range(self.n_groups):
            a, s = upsample(self.group_arms[g], self.group_states[g], target_size, rng)
            arms.append(a)
            states.append(s)
        return LagrangeBoundOracle(arms, states, self.horizon, self.precision, self.cache)


def upsample(arms, states, target_size, rng):
    """Pad a group with uniform-with-replacement copies of its own arms.

    Copies share the original arm model and carry the source arm's current
    state; the draw order is fixed by the stream, so results are reproducible.
    """
    n = len(arms)
    if target_size < n:
        raise ValueError(f"target size {target_size} is below group size {n}")
    extra = rng.integers(0, n, size=target_size - n)
    new_arms = list(arms) + [arms[i] for i in extra]
    new_states = list(states) + [states[i] for i in extra]
    return new_arms, new_states


def rescale(budgets_upsampled, original_sizes, target_size, total_budget):
    """Map budgets found on equalized groups back to the original sizes.

    Weights each group by its upsampled budget times its true share of the
    equalized size, then apportions the total by largest remainder. Budgets
    are capped at the group size, with overflow passed to the next-largest
    remainders; all-zero weights fall back to a uniform split.
    """
    sizes = np.asarray(original_sizes, dtype=np.int64)
    weights = np.asarray(budgets_upsampled, dtype=float) * sizes / float(target_size)
    if weights.sum() <= 0.0:
        weights = np.ones(len(sizes))
    quotas = total_budget * weights / weights.sum()
    budgets = np.minimum(np.floor(quotas).astype(np.int64), sizes)
    leftover = int(total_budget - budgets.sum())
    remainders = quotas - np.floor(quotas)
    order = sorted(range(len(sizes)), key=lambda g: (-remainders[g], g))
    while leftover > 0:
        placed = False
        for g in order:
            if leftover == 0:
                break
            if budgets[g] < sizes[g]:
                budgets[g] += 1
                leftover -= 1
                placed = True
        if not placed:
            break
    return budgets


def allocate_mmr(oracle: GroupValueOracle, total_budget: int) -> AllocationResult:
    """Water filling for maximin reward: feed the worst-off group one unit at
    a time, comparing size-normalized group values.

    Each step re-evaluates only the group that received the unit. Groups that
    reach one budget unit per arm leave the candidate set.
    """
    sizes = np.asarray(oracle.sizes, dtype=np.int64)
    n_groups = len(sizes)
    if total_budget > sizes.sum():
        raise BudgetExceedsArms(total_budget, int(sizes.sum()))
    budgets = np.zeros(n_groups, dtype=np.int64)
    norm = [oracle.evaluate(g, 0) / sizes[g] for g in range(n_groups)]
    trace = []
    for _ in range(total_budget):
        candidates = [g for g in range(n_groups) if budgets[g] < sizes[g]]
        g_star = min(candidates, key=lambda g: (norm[g], g))
        budgets[g_star] += 1
        norm[g_star] = oracle.evaluate(g_star, int(budgets[g_star])) / sizes[g_star]
        trace.append((g_star, norm[g_star]))
    final = np.array([oracle.evaluate(g, int(budgets[g])) for g in range(n_groups)])
    return AllocationResult(budgets=budgets, objective_trace=trace, final_values=final)


def _checked_log(oracle, group, budget):
    value = oracle.evaluate(group, budget)
    if value < 0.0:
        raise NonPositiveValue(group, budget, value)
    return math.log(max(value, LOG_VALUE_FLOOR))


def _greedy_nash(oracle, total_budget, caps):
    n_groups = oracle.n_groups
    budgets = np.zeros(n_groups, dtype=np.int64)
    log_now = [_checked_log(oracle, g, 0) for g in range(n_groups)]
    log_next = [
        _checked_log(oracle, g, 1) if caps[g] >= 1 else None for g in range(n_groups)
    ]
    delta = [
        log_next[g] - log_now[g] if log_next[g] is not None else -np.inf
        for g in range(n_groups)
    ]
    trace = []
    for _ in range(total_budget):
        g_star = max(range(n_groups), key=lambda g: (delta[g], -g))
        trace.append((g_star, delta[g_star]))
        budgets[g_star] += 1
        log_now[g_star] = log_next[g_star]
        if budgets[g_star] + 1 <= caps[g_star]:
            log_next[g_star] = _checked_log(oracle, g_star, int(budgets[g_star]) + 1)
            delta[g_star] = log_next[g_star] - log_now[g_star]
        else:
            delta[g_star] = -np.inf
    final = np.array([oracle.evaluate(g, int(budgets[g])) for g in range(n_groups)])
    return AllocationResult(budgets=budgets, objective_trace=trace, final_values=final)


def allocate_mnw(
    oracle: GroupValueOracle,
    total_budget: int,
    equalize_group_sizes: bool = False,
    rng=None,
) -> AllocationResult:
    """Greedy max Nash welfare: each unit goes to the group with the largest
    log-value gain.

    With ``equalize_group_sizes`` set, groups are first upsampled to the
    largest group's size, the greedy runs there, and the result is rescaled
    back proportionally to true group sizes; this is the bias-corrected
    variant. Unset, the naive variant over-serves small groups.
    """
    sizes = np.asarray(oracle.sizes, dtype=np.int64)
    if total_budget > sizes.sum():
        raise BudgetExceedsArms(total_budget, int(sizes.sum()))
    if not equalize_group_sizes:
        return _greedy_nash(oracle, total_budget, caps=sizes)
    theta = int(sizes.max())
    rng = np.random.default_rng(0) if rng is None else rng
    equalized = oracle.resampled(theta, rng)
    inner = _greedy_nash(equalized, total_budget, caps=[theta] * len(sizes))
    budgets = rescale(inner.budgets, sizes, theta, total_budget)
    final = np.array([oracle.evaluate(g, int(budgets[g])) for g in range(len(sizes))])
    return AllocationResult(
        budgets=budgets, objective_trace=inner.objective_trace, final_values=final
    )
