import numpy as np
import pytest

from equibandits.domains import (
    A1C_GE8,
    A1C_LT8,
    BadProbability,
    DROPOUT,
    DiabetesSpec,
    DiabetesState,
    ENGAGED,
    MAINTENANCE,
    MaternalSpec,
    N_DIABETES_STATES,
    ParseError,
    SyntheticSpec,
    build_diabetes,
    build_maternal,
    build_synthetic,
    clinical_success,
    default_group_table_path,
    engagement_kernel,
    load_group_table,
    maternal_mean_matrix,
    sample_std,
)
from equibandits.mdp import validate_arm


class TestSynthetic:
    def test_group_sizes(self):
        inst = build_synthetic(SyntheticSpec())
        assert inst.group_sizes.tolist() == [25, 25, 5, 25, 20]
        assert inst.n_arms == 100

    def test_group_c_parameters(self):
        inst = build_synthetic(SyntheticSpec())
        arm = inst.arms[inst.group_members[2][0]]
        assert arm.transitions[1, 0, 1] == pytest.approx(0.05)
        assert arm.transitions[0, 1, 1] == pytest.approx(0.90)
        assert arm.transitions[1, 1, 1] == pytest.approx(0.90)
        assert arm.transitions[0, 0, 1] == pytest.approx(0.05)

    def test_group_d_ignores_action(self):
        inst = build_synthetic(SyntheticSpec())
        arm = inst.arms[inst.group_members[3][0]]
        assert np.all(arm.transitions[:, :, 1] == 0.4)

    def test_residual_arms_go_to_first_group(self):
        inst = build_synthetic(SyntheticSpec(n_arms=102))
        assert inst.group_sizes.tolist() == [27, 25, 5, 25, 20]

    def test_start_states(self):
        inst = build_synthetic(SyntheticSpec())
        assert np.all(inst.start_states == 0)


class TestMaternal:
    def test_group_a_means(self):
        means = maternal_mean_matrix(0)
        assert means[1, 1, 0] == pytest.approx(0.75)   # acted Persuadable recovers
        assert means[1, 0, 2] == pytest.approx(0.75)   # unacted Persuadable slides
        assert means[2, 0, 2] == pytest.approx(0.60)
        assert means[2, 1, 2] == pytest.approx(0.60)
        assert means[0, 0, 0] == pytest.approx(0.5)
        assert means[0, 1, 0] == pytest.approx(0.5)

    def test_zero_noise_reproduces_means(self):
        inst = build_maternal(
            MaternalSpec(n_arms=10, noise_scale=0.0), np.random.default_rng(0),
            total_budget=3,
        )
        for arm in inst.arms:
            assert np.allclose(arm.transitions, maternal_mean_matrix(arm.group_id))

    def test_sampling_std_formula(self):
        assert sample_std(0.5, 0.2) == pytest.approx(0.1)
        assert sample_std(0.75, 0.2) == pytest.approx(0.05)
        assert sample_std(0.0, 0.2) == 0.0

    def test_adjacency_zeros_survive_noise(self):
        inst = build_maternal(MaternalSpec(n_arms=30), np.random.default_rng(1), total_budget=6)
        for arm in inst.arms:
            assert np.all(arm.transitions[0, :, 2] == 0.0)
            assert np.all(arm.transitions[2, :, 0] == 0.0)

    def test_large_group_placement_and_sizes(self):
        inst = build_maternal(MaternalSpec(n_arms=200, large_group=0), np.random.default_rng(2))
        assert inst.group_sizes.tolist() == [120, 40, 40]

    def test_deterministic_per_stream(self):
        a = build_maternal(MaternalSpec(n_arms=12), np.random.default_rng(7), total_budget=4)
        b = build_maternal(MaternalSpec(n_arms=12), np.random.default_rng(7), total_budget=4)
        assert a.content_hash() == b.content_hash()

    def test_rewards_and_start(self):
        inst = build_maternal(MaternalSpec(n_arms=10), np.random.default_rng(3), total_budget=3)
        assert inst.arms[0].rewards.tolist() == [1.0, 0.5, 0.0]
        assert np.all(inst.start_states == 1)


class TestGroupTable:
    def test_bundled_fixture_row_two(self):
        table = load_group_table()
        row = table[2]
        assert row.p_i_mtoe == pytest.approx(0.907)
        assert row.p_u_mtod == pytest.approx(0.077)
        assert row.frac == pytest.approx(0.200)
        assert row.sex == 1 and row.age == "55-64"

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "table.csv"
        path.write_text("p_I_MtoE,frac\n0.5,1.0\n")
        with pytest.raises(ParseError):
            load_group_table(path)

    def test_bad_fraction_sum_rejected(self, tmp_path):
        table = load_group_table()
        lines = ["p_I_MtoE,p_I_MtoD,p_I_EtoE,p_U_MtoD,p_Ebar_A1cGe8,p_Ebar_A1cLt8,"
                 "p_E_A1cGe8,p_E_A1cLt8,frac,sex,age"]
        for row in table:
            lines.append(
                f"{row.p_i_mtoe},{row.p_i_mtod},{row.p_i_etoe},{row.p_u_mtod},"
                f"{row.p_ebar_ge8},{row.p_ebar_lt8},{row.p_e_ge8},{row.p_e_lt8},"
                f"{row.frac / 2},{row.sex},{row.age}"
            )
        path = tmp_path / "table.csv"
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(BadProbability):
            load_group_table(path)

    def test_non_numeric_cell_rejected(self, tmp_path):
        path = tmp_path / "table.csv"
        with open(str(default_group_table_path())) as handle:
            text = handle.read()
        path.write_text(text.replace("0.907", "oops", 1))
        with pytest.raises(ParseError) as err:
            load_group_table(path)
        assert err.value.column == "p_I_MtoE"


class TestDiabetesState:
    def test_encode_decode_bijection(self):
        seen = set()
        for e in range(3):
            for c in range(2):
                for m0 in range(3):
                    for m1 in range(3):
                        state = DiabetesState(e, c, (m0, m1))
                        idx = state.encode()
                        assert 0 <= idx < N_DIABETES_STATES
                        assert DiabetesState.decode(idx) == state
                        seen.add(idx)
        assert len(seen) == N_DIABETES_STATES


class TestDiabetesModel:
    @pytest.fixture(scope="class")
    @staticmethod
    def instance():
        return build_diabetes(DiabetesSpec(alpha=0.5, n_arms=12), horizon=6, total_budget=3)

    def test_group_sizes_follow_fracs(self):
        inst = build_diabetes(DiabetesSpec(n_arms=300), horizon=5, total_budget=10)
        assert inst.group_sizes.tolist() == [53, 45, 60, 45, 37, 60]

    def test_clinical_success_from_table_row_zero(self, instance):
        arm = instance.arms[instance.group_members[0][0]]
        source = DiabetesState(MAINTENANCE, A1C_GE8, (MAINTENANCE, ENGAGED)).encode()
        row = arm.transitions[source, 0]
        reached_low = sum(
            p for target, p in enumerate(row)
            if DiabetesState.decode(target).clinical == A1C_LT8
        )
        assert reached_low == pytest.approx(0.089)

    def test_dropout_is_absorbing(self, instance):
        for arm_idx in (0, instance.n_arms - 1):
            arm = instance.arms[arm_idx]
            for c in range(2):
                for m0 in range(3):
                    for m1 in range(3):
                        source = DiabetesState(DROPOUT, c, (m0, m1)).encode()
                        for a in (0, 1):
                            row = arm.transitions[source, a]
                            stays = sum(
                                p for target, p in enumerate(row)
                                if DiabetesState.decode(target).engagement == DROPOUT
                            )
                            assert stays == pytest.approx(1.0)

    def test_alpha_one_ignores_clinical(self):
        inst = build_diabetes(DiabetesSpec(alpha=1.0, n_arms=12), horizon=4, total_budget=2)
        arm = inst.arms[0]
        for e in range(3):
            for m0 in range(3):
                for m1 in range(3):
                    low = DiabetesState(e, A1C_LT8, (m0, m1)).encode()
                    high = DiabetesState(e, A1C_GE8, (m0, m1)).encode()
                    assert arm.rewards[low] == arm.rewards[high]

    def test_joint_row_factorizes(self, instance):
        arm = instance.arms[instance.group_members[1][0]]
        params = DiabetesSpec().group_table[1]
        eng = engagement_kernel(params)
        rng = np.random.default_rng(4)
        for _ in range(20):
            source_idx = int(rng.integers(0, N_DIABETES_STATES))
            a = int(rng.integers(0, 2))
            source = DiabetesState.decode(source_idx)
            p_low = clinical_success(params, source.memory[1], source.clinical)
            expected = np.zeros(N_DIABETES_STATES)
            for next_e in range(3):
                for next_c, p_c in ((A1C_LT8, p_low), (A1C_GE8, 1 - p_low)):
                    target = DiabetesState(
                        next_e, next_c, (source.engagement, source.memory[0])
                    ).encode()
                    expected[target] += eng[source.engagement, a, next_e] * p_c
            assert np.allclose(arm.transitions[source_idx, a], expected, atol=1e-12)

    def test_memory_shift_is_deterministic(self, instance):
        arm = instance.arms[0]
        rng = np.random.default_rng(5)
        for _ in range(20):
            source_idx = int(rng.integers(0, N_DIABETES_STATES))
            a = int(rng.integers(0, 2))
            source = DiabetesState.decode(source_idx)
            want = (source.engagement, source.memory[0])
            for target, p in enumerate(arm.transitions[source_idx, a]):
                if p > 0.0:
                    assert DiabetesState.decode(target).memory == want

    def test_all_arms_validate(self, instance):
        for arm in instance.arms:
            validate_arm(arm)

    def test_default_start_state(self, instance):
        start = DiabetesState.decode(int(instance.start_states[0]))
        assert start.engagement == MAINTENANCE
        assert start.clinical == A1C_GE8
        assert start.memory == (MAINTENANCE, MAINTENANCE)

    def test_flags_mark_high_risk_and_dropout(self, instance):
        high = instance.high_risk_states
        drop = instance.dropout_states
        idx = DiabetesState(ENGAGED, A1C_GE8, (0, 0)).encode()
        assert high[idx] and not drop[idx]
        idx = DiabetesState(DROPOUT, A1C_LT8, (2, 2)).encode()
        assert not high[idx] and drop[idx]

    def test_alpha_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            DiabetesSpec(alpha=1.5)
