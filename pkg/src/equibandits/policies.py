"""Round-by-round action selection for every compared policy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .whittle import IndexCache, whittle_index

POLICY_KINDS = ("NoAct", "Random", "Opt", "MMR", "MNW", "MNW-EG", "HR-RR", "HR-Rand")
ALLOCATING_KINDS = frozenset({"MMR", "MNW", "MNW-EG"})
CLINICAL_KINDS = frozenset({"HR-RR", "HR-Rand"})


class UnknownPolicy(ValueError):
    def __init__(self, kind):
        self.kind = kind
        super().__init__(f"unknown policy kind {kind!r}; expected one of {POLICY_KINDS}")


class MissingAllocation(ValueError):
    pass


class DomainLacksClinicalFlag(ValueError):
    pass


@dataclass(frozen=True)
class PolicySpec:
    """Which policy to run plus its knobs.

    ``realloc_every_round`` controls whether allocating policies re-run the
    group allocator on the current states each round or only once at t = 0.
    ``precision`` is the index binary-search width.
    """

    kind: str
    realloc_every_round: bool = True
    precision: float = 1e-4

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise UnknownPolicy(self.kind)

    @property
    def needs_allocation(self) -> bool:
        return self.kind in ALLOCATING_KINDS

    @property
    def needs_clinical_flag(self) -> bool:
        return self.kind in CLINICAL_KINDS


@dataclass(frozen=True)
class ActionVector:
    """Set of arm indices receiving the action this round."""

    acted: frozenset

    def mask(self, n_arms: int) -> np.ndarray:
        out = np.zeros(n_arms, dtype=bool)
        out[list(self.acted)] = True
        return out

    def __len__(self):
        return len(self.acted)


def _top_by_index(members, indexes, count):
    order = sorted(members, key=lambda i: (-indexes[i], i))
    return order[: max(count, 0)]


def _recency_order(members, last_acted):
    return sorted(members, key=lambda i: (last_acted[i], i))


def select_actions(
    policy: PolicySpec,
    instance,
    current_states,
    t: int,
    allocation=None,
    history=None,
    rng=None,
    cache: IndexCache | None = None,
) -> ActionVector:
    """Pick this round's action set for ``policy`` at time ``t``.

    Index policies rank arms by their Whittle index at the current state and
    remaining horizon; allocating policies apply that ranking within each
    group's budget. The clinical heuristics order high-risk arms by how long
    ago they were last acted on (never acted goes first), filling any unused
    slots from the low-risk arms by the same rule; arms in an absorbing
    dropout state are never selected.
    """
    n = instance.n_arms
    budget = instance.total_budget
    remaining = instance.horizon - t
    kind = policy.kind

    if kind == "NoAct":
        return ActionVector(frozenset())

    if kind == "Random":
        chosen = rng.choice(n, size=min(budget, n), replace=False)
        return ActionVector(frozenset(int(i) for i in chosen))

    if kind == "Opt" or kind in ALLOCATING_KINDS:
        cache = IndexCache() if cache is None else cache
        indexes = np.array(
            [
                whittle_index(arm, int(s), remaining, policy.precision, cache)
                for arm, s in zip(instance.arms, current_states)
            ]
        )
        if kind == "Opt":
            return ActionVector(frozenset(_top_by_index(range(n), indexes, budget)))
        if allocation is None:
            raise MissingAllocation(f"{kind} requires a group allocation")
        acted = []
        for g, members in enumerate(instance.group_members):
            acted.extend(_top_by_index(members, indexes, int(allocation.budgets[g])))
        return ActionVector(frozenset(int(i) for i in acted))

    # Clinical heuristics.
    if instance.high_risk_states is None:
        raise DomainLacksClinicalFlag(f"{kind} needs a per-state clinical flag")
    states = np.asarray(current_states)
    high = instance.high_risk_states[states]
    if instance.dropout_states is not None:
        selectable = ~instance.dropout_states[states]
    else:
        selectable = np.ones(n, dtype=bool)
    high_pool = [i for i in range(n) if high[i] and selectable[i]]
    low_pool = [i for i in range(n) if not high[i] and selectable[i]]
    last_acted = np.full(n, -np.inf) if history is None else np.asarray(history, dtype=float)

    if kind == "HR-RR":
        ranked = _recency_order(high_pool, last_acted) + _recency_order(low_pool, last_acted)
        return ActionVector(frozenset(ranked[:budget]))

    if kind == "HR-Rand":
        take_high = min(budget, len(high_pool))
        chosen = list(rng.choice(high_pool, size=take_high, replace=False)) if take_high else []
        short = budget - take_high
        if short > 0 and low_pool:
            chosen += list(rng.choice(low_pool, size=min(short, len(low_pool)), replace=False))
        return ActionVector(frozenset(int(i) for i in chosen))

    raise UnknownPolicy(kind)
