"""Seeded episode execution, per-group reward accounting, and aggregation.

One episode walks an instance forward for its horizon, accruing the reward
of the state occupied at each round (the start state counts, the state after
the final transition does not). Randomness is split into independent
substreams per purpose and per arm, so adding randomness to one part of the
system never perturbs another: spawn key 0 feeds per-arm transition
sampling, 1 feeds policy randomness, 2 feeds allocator upsampling, and 3 is
reserved for domain-level instance noise drawn by the experiment runner.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .allocate import LagrangeBoundOracle, allocate_mmr, allocate_mnw
from .policies import PolicySpec, select_actions
from .whittle import IndexCache

STREAM_TRANSITIONS, STREAM_POLICY, STREAM_UPSAMPLE, STREAM_INSTANCE = 0, 1, 2, 3


class NegativeInput(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class BudgetViolation(RuntimeError):
    """A policy returned an action set that breaks a budget constraint."""


def purpose_rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose,)))


def gini(values) -> float:
    """Mean-absolute-difference inequality index with denominator 2 n^2 mu.

    Zero is perfect equality. Returns 0 by convention when the mean is zero.
    """
    x = np.asarray(values, dtype=float)
    if (x < 0).any():
        raise NegativeInput(f"gini requires non-negative values, got {x}")
    mu = x.mean()
    if mu == 0.0:
        return 0.0
    n = len(x)
    spread = np.abs(x[:, None] - x[None, :]).sum()
    return float(spread / (2 * n * n * mu))


@dataclass
class SimulationRecord:
    """Per-seed, per-policy trajectory aggregates."""

    seed: int
    policy: str
    per_group_total_reward: np.ndarray
    per_group_size: np.ndarray
    total_reward: float
    gini: float
    final_round_reward: float
    component_totals: dict | None = None
    actions_log: list | None = None
    allocation_log: list | None = None
    states_log: list | None = None


def _allocate(kind, oracle, budget, upsample_rng):
    if kind == "MMR":
        return allocate_mmr(oracle, budget)
    if kind == "MNW":
        return allocate_mnw(oracle, budget, equalize_group_sizes=False)
    return allocate_mnw(oracle, budget, equalize_group_sizes=True, rng=upsample_rng)


def _check_feasible(acted, instance, allocation):
    if len(acted) > instance.total_budget:
        raise BudgetViolation(
            f"{len(acted)} actions exceed the budget {instance.total_budget}"
        )
    if allocation is not None:
        for g, members in enumerate(instance.group_members):
            used = len(acted & set(int(i) for i in members))
            if used > allocation.budgets[g]:
                raise BudgetViolation(
                    f"group {g} used {used} actions against budget {allocation.budgets[g]}"
                )


def run_episode(
    instance,
    policy: PolicySpec,
    seed: int,
    cache: IndexCache | None = None,
    log_actions: bool = False,
    log_allocations: bool = False,
    log_states: bool = False,
) -> SimulationRecord:
    """Simulate one seeded episode of ``policy`` on ``instance``.

    Allocating policies re-run their group allocator on the current states
    with the remaining horizon every round, or once at t = 0 when the policy
    spec says so. Feasibility of every action set is re-checked here rather
    than trusted from the policy layer. Identical inputs give bit-identical
    records.
    """
    cache = IndexCache() if cache is None else cache
    n = instance.n_arms
    n_groups = instance.n_groups
    horizon = instance.horizon

    arm_streams = [
        np.random.default_rng(s)
        for s in np.random.SeedSequence(seed, spawn_key=(STREAM_TRANSITIONS,)).spawn(n)
    ]
    policy_rng = purpose_rng(seed, STREAM_POLICY)
    upsample_rng = purpose_rng(seed, STREAM_UPSAMPLE)

    states = instance.start_states.copy()
    group_totals = np.zeros(n_groups)
    components = None
    if instance.reward_components is not None:
        components = {name: np.zeros(n_groups) for name in instance.reward_components}
    last_acted = np.full(n, -np.inf)
    allocation = None
    round_reward = 0.0
    actions_log = [] if log_actions else None
    allocation_log = [] if log_allocations else None
    states_log = [] if log_states else None

    for t in range(horizon):
        if states_log is not None:
            states_log.append(states.copy())
        rewards = np.array([arm.rewards[s] for arm, s in zip(instance.arms, states)])
        np.add.at(group_totals, instance.group_of, rewards)
        round_reward = float(rewards.sum())
        if components is not None:
            for name, vector in instance.reward_components.items():
                np.add.at(components[name], instance.group_of, vector[states])

        if policy.needs_allocation and (t == 0 or policy.realloc_every_round):
            oracle = LagrangeBoundOracle(
                group_arms=[
                    [instance.arms[i] for i in members]
                    for members in instance.group_members
                ],
                group_states=[
                    [int(states[i]) for i in members]
                    for members in instance.group_members
                ],
                horizon=horizon - t,
                precision=policy.precision,
                cache=cache,
            )
            allocation = _allocate(
                policy.kind, oracle, instance.total_budget, upsample_rng
            )
        if allocation_log is not None:
            allocation_log.append(
                allocation.budgets.copy() if allocation is not None else None
            )

        actions = select_actions(
            policy,
            instance,
            states,
            t,
            allocation=allocation,
            history=last_acted,
            rng=policy_rng,
            cache=cache,
        )
        _check_feasible(actions.acted, instance, allocation if policy.needs_allocation else None)
        if actions_log is not None:
            actions_log.append(frozenset(actions.acted))
        for i in actions.acted:
            last_acted[i] = t

        next_states = states.copy()
        for i in range(n):
            a = 1 if i in actions.acted else 0
            row = instance.arms[i].transition_cumsums[states[i], a]
            u = arm_streams[i].random()
            next_states[i] = min(int(np.searchsorted(row, u, side="right")), len(row) - 1)
        states = next_states

    per_group_total = group_totals
    sizes = instance.group_sizes
    averages = per_group_total / sizes
    return SimulationRecord(
        seed=seed,
        policy=policy.kind,
        per_group_total_reward=per_group_total,
        per_group_size=sizes.copy(),
        total_reward=float(per_group_total.sum()),
        gini=gini(averages),
        final_round_reward=round_reward,
        component_totals=components,
        actions_log=actions_log,
        allocation_log=allocation_log,
        states_log=states_log,
    )


@dataclass
class AggregateSummary:
    """Across-seed means for one policy on one instance shape."""

    policy: str
    n_records: int
    n_arms: int
    mean_reward_per_arm: float
    stderr_reward_per_arm: float
    mean_gini: float
    per_group_mean_reward: np.ndarray


def aggregate(records) -> AggregateSummary:
    """Mean and standard error of per-arm reward, per-group averages, mean Gini."""
    records = list(records)
    if not records:
        raise EmptyInput("no records to aggregate")
    policy = records[0].policy
    sizes = records[0].per_group_size
    for record in records:
        if record.policy != policy:
            raise ValueError(f"mixed policies in aggregate: {record.policy} vs {policy}")
        if not np.array_equal(record.per_group_size, sizes):
            raise ValueError("records disagree on group sizes")
    n_arms = int(sizes.sum())
    per_arm = np.array([r.total_reward / n_arms for r in records])
    k = len(records)
    stderr = float(per_arm.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    group_means = np.mean(
        [r.per_group_total_reward / sizes for r in records], axis=0
    )
    return AggregateSummary(
        policy=policy,
        n_records=k,
        n_arms=n_arms,
        mean_reward_per_arm=float(per_arm.mean()),
        stderr_reward_per_arm=stderr,
        mean_gini=float(np.mean([r.gini for r in records])),
        per_group_mean_reward=group_means,
    )
