"""Arm-level finite-horizon MDPs and an exact joint oracle for small instances.

An arm is a binary-action MDP with rewards in [0, 1]. Acting can be made
costly through a per-action charge, which is the basic building block for
index computation and Lagrangian group-value bounds. For desk-scale
instances, ``exact_joint_value`` solves the coupled budgeted problem by
brute-force dynamic programming over the joint state space, serving as the
ground-truth oracle in tests.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import cached_property
from math import comb, prod

import numpy as np

ROW_SUM_TOL = 1e-9
# Acting is only chosen when it beats staying passive by more than this.
ACTION_TIE_TOL = 1e-12


class RowNotStochastic(ValueError):
    def __init__(self, state, action, row_sum):
        self.state, self.action, self.row_sum = state, action, row_sum
        super().__init__(
            f"transition row (s={state}, a={action}) is not a probability "
            f"distribution (sum={row_sum})"
        )


class RewardOutOfRange(ValueError):
    def __init__(self, state, value):
        self.state, self.value = state, value
        super().__init__(f"reward for state {state} is {value}, outside [0, 1]")


class InstanceTooLarge(ValueError):
    def __init__(self, work_estimate, work_bound):
        self.work_estimate, self.work_bound = work_estimate, work_bound
        super().__init__(
            f"exact joint DP needs ~{work_estimate:.2e} updates, over the "
            f"bound {work_bound:.2e}"
        )


@dataclass(frozen=True, eq=False)
class ArmModel:
    """One arm: transition tensor indexed (s, a, s'), reward per state, group id."""

    transitions: np.ndarray
    rewards: np.ndarray
    group_id: int = 0

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.transitions, dtype=np.float64))
        r = np.ascontiguousarray(np.asarray(self.rewards, dtype=np.float64))
        t.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "rewards", r)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @cached_property
    def fingerprint(self) -> bytes:
        h = hashlib.sha1()
        h.update(np.int64(self.n_states).tobytes())
        h.update(self.transitions.tobytes())
        h.update(self.rewards.tobytes())
        return h.digest()

    @cached_property
    def transition_cumsums(self) -> np.ndarray:
        """Cumulative rows, shape (s, a, s'), for inverse-CDF state sampling."""
        return np.cumsum(self.transitions, axis=-1)


def validate_arm(arm: ArmModel) -> ArmModel:
    """Check stochasticity and reward range; return the arm unchanged if valid."""
    t, r = arm.transitions, arm.rewards
    if t.ndim != 3 or t.shape[1] != 2 or t.shape[0] != t.shape[2]:
        raise ValueError(f"transitions must have shape (S, 2, S), got {t.shape}")
    if r.shape != (t.shape[0],):
        raise ValueError(f"rewards must have shape ({t.shape[0]},), got {r.shape}")
    for s in range(arm.n_states):
        for a in (0, 1):
            row = t[s, a]
            row_sum = float(row.sum())
            if abs(row_sum - 1.0) > ROW_SUM_TOL or row.min() < 0.0 or row.max() > 1.0:
                raise RowNotStochastic(s, a, row_sum)
    for s in range(arm.n_states):
        if r[s] < 0.0 or r[s] > 1.0:
            raise RewardOutOfRange(s, float(r[s]))
    return arm


@dataclass(frozen=True, eq=False)
class GroupedInstance:
    """A full grouped instance: arms, arm-to-group map, horizon, budget, starts.

    ``high_risk_states`` / ``dropout_states`` are optional per-state flags,
    shared across arms, used by the clinical heuristic policies; they are only
    set by domains whose arms share one state encoding. ``reward_components``
    optionally splits the reward vector into named unweighted components for
    trade-off reporting.
    """

    arms: tuple[ArmModel, ...]
    group_of: np.ndarray
    horizon: int
    total_budget: int
    start_states: np.ndarray
    high_risk_states: np.ndarray | None = None
    dropout_states: np.ndarray | None = None
    reward_components: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        g = np.ascontiguousarray(np.asarray(self.group_of, dtype=np.int64))
        s = np.ascontiguousarray(np.asarray(self.start_states, dtype=np.int64))
        g.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "group_of", g)
        object.__setattr__(self, "start_states", s)
        n = len(self.arms)
        if g.shape != (n,) or s.shape != (n,):
            raise ValueError("group_of and start_states must have one entry per arm")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not 0 <= self.total_budget <= n:
            raise ValueError(f"total_budget must be in [0, {n}], got {self.total_budget}")
        n_groups = int(g.max()) + 1 if n else 0
        counts = np.bincount(g, minlength=n_groups)
        if (counts == 0).any():
            raise ValueError("every group index up to the max must own an arm")
        for i, arm in enumerate(self.arms):
            if not 0 <= s[i] < arm.n_states:
                raise ValueError(f"start state {s[i]} invalid for arm {i}")

    @property
    def n_arms(self) -> int:
        return len(self.arms)

    @property
    def n_groups(self) -> int:
        return int(self.group_of.max()) + 1

    @cached_property
    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_of, minlength=self.n_groups)

    @cached_property
    def group_members(self) -> tuple[np.ndarray, ...]:
        return tuple(
            np.flatnonzero(self.group_of == g) for g in range(self.n_groups)
        )

    def content_hash(self) -> str:
        """Hex digest identifying arms, grouping, horizon, budget, and starts."""
        h = hashlib.sha256()
        for arm in self.arms:
            h.update(arm.fingerprint)
        h.update(self.group_of.tobytes())
        h.update(np.int64([self.horizon, self.total_budget]).tobytes())
        h.update(self.start_states.tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class ChargedValueTable:
    """Backward-induction values for one arm under a fixed per-action charge.

    ``values[k, s]`` is the optimal remaining value from state ``s`` at time
    ``k``; rows are filled for ``k`` in ``[start_time, horizon]`` and the
    terminal row is zero. ``spend[s]`` is the expected number of actions the
    charge-optimal policy takes from ``(start_time, s)``, kept as a
    diagnostic.
    """

    values: np.ndarray
    charge: float
    spend: np.ndarray
    start_time: int = 0


def _backward(arm: ArmModel, start_time: int, horizon: int, charge: float):
    """Value table plus per-step act mask; acting wins only by > ACTION_TIE_TOL."""
    n_states = arm.n_states
    values = np.zeros((horizon + 1, n_states))
    act = np.zeros((horizon, n_states), dtype=bool)
    t_pass = arm.transitions[:, 0, :]
    t_act = arm.transitions[:, 1, :]
    for k in range(horizon - 1, start_time - 1, -1):
        nxt = values[k + 1]
        q_pass = arm.rewards + t_pass @ nxt
        q_act = arm.rewards - charge + t_act @ nxt
        act[k] = q_act > q_pass + ACTION_TIE_TOL
        values[k] = np.where(act[k], q_act, q_pass)
    return values, act


def charged_value_iteration(
    arm: ArmModel, start_time: int, horizon: int, charge: float
) -> ChargedValueTable:
    """Solve one arm's finite-horizon DP with reward R(s) - a * charge.

    The recursion maximizes over acting and staying passive, with terminal
    values zero. Deterministic for identical inputs; ties prefer passivity.
    """
    if not 0 <= start_time < horizon:
        raise ValueError(f"need 0 <= start_time < horizon, got {start_time}, {horizon}")
    if not np.isfinite(charge):
        raise ValueError("charge must be finite")
    values, act = _backward(arm, start_time, horizon, charge)
    spend = np.zeros((horizon + 1, arm.n_states))
    t_pass = arm.transitions[:, 0, :]
    t_act = arm.transitions[:, 1, :]
    for k in range(horizon - 1, start_time - 1, -1):
        cont = np.where(act[k], t_act @ spend[k + 1], t_pass @ spend[k + 1])
        spend[k] = act[k].astype(float) + cont
    return ChargedValueTable(
        values=values, charge=float(charge), spend=spend[start_time],
        start_time=start_time,
    )


def _action_vectors(n_arms: int, budget: int):
    """All 0/1 action vectors with at most ``budget`` ones."""
    vectors = []
    for size in range(min(budget, n_arms) + 1):
        for subset in itertools.combinations(range(n_arms), size):
            a = np.zeros(n_arms, dtype=np.int64)
            a[list(subset)] = 1
            vectors.append(a)
    return vectors


def exact_joint_value(
    instance: GroupedInstance, budget: int, work_bound: float = 1e8
) -> float:
    """Exact optimal value of the coupled budgeted problem, by joint-state DP.

    Enumerates every action subset of size at most ``budget`` each round over
    the full joint state space, so it is only feasible at desk scale; larger
    requests raise InstanceTooLarge. This is the ground-truth oracle against
    which the Lagrangian bounds are tested.
    """
    arms = instance.arms
    n = len(arms)
    if not 0 <= budget <= n:
        raise ValueError(f"budget must be in [0, {n}], got {budget}")
    dims = tuple(arm.n_states for arm in arms)
    joint_size = prod(dims)
    work = joint_size * instance.horizon * comb(n, min(budget, n))
    if work > work_bound:
        raise InstanceTooLarge(work, work_bound)

    base = np.zeros(dims)
    for i, arm in enumerate(arms):
        shape = [1] * n
        shape[i] = dims[i]
        base = base + arm.rewards.reshape(shape)

    vectors = _action_vectors(n, budget)
    values = np.zeros(dims)
    for _t in range(instance.horizon):
        best = np.full(dims, -np.inf)
        for a_vec in vectors:
            ev = values
            for i in range(n):
                mat = arms[i].transitions[:, a_vec[i], :]
                ev = np.moveaxis(np.tensordot(mat, ev, axes=([1], [i])), 0, i)
            np.maximum(best, ev, out=best)
        values = base + best
    return float(values[tuple(instance.start_states)])
