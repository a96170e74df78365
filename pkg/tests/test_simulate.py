import numpy as np
import pytest

import equibandits.simulate as sim_mod
from equibandits.domains import SyntheticSpec, build_synthetic
from equibandits.mdp import ArmModel, GroupedInstance
from equibandits.policies import ActionVector, PolicySpec
from equibandits.simulate import (
    BudgetViolation,
    EmptyInput,
    NegativeInput,
    aggregate,
    gini,
    run_episode,
)


def flat_chain_arm(p=0.4):
    """Group D/E shape: state-1 probability p regardless of state or action."""
    transitions = np.array(
        [
            [[1 - p, p], [1 - p, p]],
            [[1 - p, p], [1 - p, p]],
        ]
    )
    return ArmModel(transitions=transitions, rewards=np.array([0.0, 1.0]))


def single_arm_instance(horizon=20, budget=0):
    return GroupedInstance(
        arms=(flat_chain_arm(),),
        group_of=np.zeros(1, dtype=int),
        horizon=horizon,
        total_budget=budget,
        start_states=np.zeros(1, dtype=int),
    )


class TestGini:
    def test_equal_values_are_perfectly_equal(self):
        assert gini([3.5, 3.5, 3.5]) == 0.0

    def test_two_point_extreme(self):
        for x in (0.3, 1.0, 17.0):
            assert abs(gini([0.0, x]) - 0.5) <= 1e-12

    def test_one_two_three(self):
        assert abs(gini([1.0, 2.0, 3.0]) - 2.0 / 9.0) <= 1e-12

    def test_zero_mean_convention(self):
        assert gini([0.0, 0.0]) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(NegativeInput):
            gini([1.0, -0.1])

    def test_scale_invariance(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            x = rng.uniform(0, 5, size=6)
            for c in (0.5, 2.0, 40.0):
                assert gini(c * x) == pytest.approx(gini(x), abs=1e-12)


class TestRunEpisode:
    def test_noact_flat_chain_expectation(self):
        # Analytic: start state earns 0, every later round earns 0.4 in
        # expectation, so 19 * 0.4 = 7.6 over a horizon of 20.
        inst = single_arm_instance()
        totals = [
            run_episode(inst, PolicySpec("NoAct"), seed).total_reward
            for seed in range(1500)
        ]
        mean = np.mean(totals)
        stderr = np.std(totals, ddof=1) / np.sqrt(len(totals))
        assert abs(mean - 7.6) <= 4 * stderr

    def test_reward_counts_start_state_not_terminal(self):
        # Deterministic chain 0 -> 1 -> 0 -> ...: rewards 0,1,0,1 for H=4.
        transitions = np.array(
            [
                [[0.0, 1.0], [0.0, 1.0]],
                [[1.0, 0.0], [1.0, 0.0]],
            ]
        )
        arm = ArmModel(transitions=transitions, rewards=np.array([0.0, 1.0]))
        inst = GroupedInstance(
            arms=(arm,), group_of=np.zeros(1, dtype=int), horizon=4,
            total_budget=0, start_states=np.zeros(1, dtype=int),
        )
        record = run_episode(inst, PolicySpec("NoAct"), seed=0)
        assert record.total_reward == 2.0

    def test_identical_seeds_bit_identical(self):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=6, total_budget=4)
        a = run_episode(inst, PolicySpec("MMR"), seed=11, log_actions=True)
        b = run_episode(inst, PolicySpec("MMR"), seed=11, log_actions=True)
        assert a.total_reward == b.total_reward
        assert np.array_equal(a.per_group_total_reward, b.per_group_total_reward)
        assert a.gini == b.gini and a.actions_log == b.actions_log

    def test_policy_randomness_does_not_perturb_transitions(self):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=6, total_budget=0)
        # With budget 0 both policies act on nothing; trajectories must match.
        a = run_episode(inst, PolicySpec("NoAct"), seed=5, log_states=True)
        b = run_episode(inst, PolicySpec("Random"), seed=5, log_states=True)
        assert all(np.array_equal(x, y) for x, y in zip(a.states_log, b.states_log))

    def test_total_is_sum_of_groups(self):
        inst = build_synthetic(SyntheticSpec(n_arms=24), horizon=5, total_budget=6)
        record = run_episode(inst, PolicySpec("Opt"), seed=2)
        assert record.total_reward == pytest.approx(
            record.per_group_total_reward.sum()
        )
        assert 0.0 <= record.gini <= 1.0

    def test_conservation_against_state_log(self):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=7, total_budget=3)
        record = run_episode(inst, PolicySpec("Opt"), seed=9, log_states=True)
        replayed = 0.0
        for states in record.states_log:
            replayed += sum(
                inst.arms[i].rewards[s] for i, s in enumerate(states)
            )
        assert record.total_reward == pytest.approx(replayed, abs=1e-12)

    def test_budget_feasibility_rechecked(self, monkeypatch):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=4, total_budget=2)

        def greedy_everything(policy, instance, states, t, **kwargs):
            return ActionVector(frozenset(range(instance.n_arms)))

        monkeypatch.setattr(sim_mod, "select_actions", greedy_everything)
        with pytest.raises(BudgetViolation):
            run_episode(inst, PolicySpec("Opt"), seed=0)

    def test_allocation_log_and_group_budgets(self):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=5, total_budget=4)
        record = run_episode(
            inst, PolicySpec("MNW"), seed=3, log_actions=True, log_allocations=True
        )
        assert len(record.allocation_log) == 5
        for budgets, acted in zip(record.allocation_log, record.actions_log):
            assert budgets.sum() == 4
            for g, members in enumerate(inst.group_members):
                assert len(acted & set(int(i) for i in members)) <= budgets[g]

    def test_realloc_once_freezes_budgets(self):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=5, total_budget=4)
        record = run_episode(
            inst,
            PolicySpec("MMR", realloc_every_round=False),
            seed=4,
            log_allocations=True,
        )
        first = record.allocation_log[0]
        assert all(np.array_equal(first, later) for later in record.allocation_log)


class TestAggregate:
    def make_records(self, seeds, policy="NoAct"):
        inst = build_synthetic(SyntheticSpec(n_arms=20), horizon=5, total_budget=0)
        return [run_episode(inst, PolicySpec(policy), s) for s in seeds], inst

    def test_single_record_zero_stderr(self):
        records, inst = self.make_records([0])
        summary = aggregate(records)
        assert summary.stderr_reward_per_arm == 0.0
        assert summary.mean_reward_per_arm == records[0].total_reward / inst.n_arms
        assert summary.mean_gini == records[0].gini

    def test_mean_gini_is_arithmetic_mean(self):
        records, _ = self.make_records([0, 1])
        summary = aggregate(records)
        assert summary.mean_gini == pytest.approx(
            (records[0].gini + records[1].gini) / 2
        )

    def test_stderr_definition(self):
        records, inst = self.make_records(range(25))
        summary = aggregate(records)
        per_arm = np.array([r.total_reward / inst.n_arms for r in records])
        assert summary.stderr_reward_per_arm == pytest.approx(
            per_arm.std(ddof=1) / 5.0
        )

    def test_empty_input_rejected(self):
        with pytest.raises(EmptyInput):
            aggregate([])

    def test_mixed_policies_rejected(self):
        a, _ = self.make_records([0], policy="NoAct")
        b, _ = self.make_records([0], policy="Opt")
        with pytest.raises(ValueError):
            aggregate(a + b)
