"""Builders for the three simulation domains.

Synthetic: five groups of two-state arms with graded intervention response,
sized (25%, 25%, 5%, 25%, 20%) of the cohort. Maternal: three-state
engagement chains (Self-motivated / Persuadable / Lost Cause) with per-arm
probabilities sampled around group means. Digital diabetes: a 54-state
product model of engagement, clinical state, and a two-slot engagement
memory implementing the delayed effect of interventions on blood sugar,
parameterized by a six-group table of published estimates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .mdp import ArmModel, GroupedInstance, validate_arm


class ParseError(ValueError):
    def __init__(self, row, column, detail=""):
        self.row, self.column = row, column
        super().__init__(f"group table parse error at row {row}, column {column!r}: {detail}")


class BadProbability(ValueError):
    def __init__(self, value, detail=""):
        self.value = value
        super().__init__(f"bad probability {value}: {detail}")


# --------------------------------------------------------------------------
# Synthetic


@dataclass(frozen=True)
class SyntheticSpec:
    n_arms: int = 100
    group_fracs: tuple = (0.25, 0.25, 0.05, 0.25, 0.20)
    start_state: int = 0


# Per group: probabilities of landing in the rewarded state 1, keyed
# (p(0,0,1), p(1,0,1), p(0,1,1), p(1,1,1)). Groups A..C respond to the
# action with decreasing strength; D and E ignore it entirely.
SYNTHETIC_GROUP_PARAMS = (
    (0.05, 0.35, 0.99, 0.99),
    (0.05, 0.10, 0.95, 0.95),
    (0.05, 0.05, 0.90, 0.90),
    (0.40, 0.40, 0.40, 0.40),
    (0.40, 0.40, 0.40, 0.40),
)


def _group_sizes(n_arms, fracs):
    """Round fractional sizes down; leftover arms go to the first group."""
    if abs(sum(fracs) - 1.0) > 1e-9:
        raise ValueError(f"group fractions must sum to 1, got {sum(fracs)}")
    sizes = [int(n_arms * f) for f in fracs]
    sizes[0] += n_arms - sum(sizes)
    if min(sizes) < 1:
        raise ValueError(f"every group needs at least one arm, got sizes {sizes}")
    return sizes


def _two_state_arm(p001, p101, p011, p111, group_id):
    transitions = np.array(
        [
            [[1 - p001, p001], [1 - p011, p011]],
            [[1 - p101, p101], [1 - p111, p111]],
        ]
    )
    return validate_arm(
        ArmModel(transitions=transitions, rewards=np.array([0.0, 1.0]), group_id=group_id)
    )


def build_synthetic(
    spec: SyntheticSpec, horizon: int = 20, total_budget: int = 20
) -> GroupedInstance:
    sizes = _group_sizes(spec.n_arms, spec.group_fracs)
    arms, group_of = [], []
    for g, (size, params) in enumerate(zip(sizes, SYNTHETIC_GROUP_PARAMS)):
        arm = _two_state_arm(*params, group_id=g)
        arms.extend([arm] * size)
        group_of.extend([g] * size)
    return GroupedInstance(
        arms=tuple(arms),
        group_of=np.array(group_of),
        horizon=horizon,
        total_budget=total_budget,
        start_states=np.full(len(arms), spec.start_state),
    )


# --------------------------------------------------------------------------
# Maternal health


@dataclass(frozen=True)
class MaternalSpec:
    n_arms: int = 200
    large_group: int = 2
    noise_scale: float = 0.2
    start_state: int = 1  # Persuadable


# States: 0 Self-motivated (reward 1), 1 Persuadable (0.5), 2 Lost Cause (0).
# Transitions exist between adjacent states only. Each group is pinned by
# p(0,a,0), p(1,0,2), p(1,1,0), p(2,a,2); the leftover mass in the
# Persuadable rows stays put: without action nobody self-recovers to
# Self-motivated, and an acted-on arm never slides to Lost Cause that round.
MATERNAL_REWARDS = np.array([1.0, 0.5, 0.0])
MATERNAL_GROUP_PARAMS = (
    dict(p00=0.5, p102=0.75, p110=0.75, p22=0.60),
    dict(p00=0.5, p102=0.60, p110=0.40, p22=0.60),
    dict(p00=0.5, p102=0.60, p110=0.25, p22=0.60),
)


def maternal_mean_matrix(group: int) -> np.ndarray:
    p = MATERNAL_GROUP_PARAMS[group]
    means = np.zeros((3, 2, 3))
    for a in (0, 1):
        means[0, a] = [p["p00"], 1 - p["p00"], 0.0]
        means[2, a] = [0.0, 1 - p["p22"], p["p22"]]
    means[1, 0] = [0.0, 1 - p["p102"], p["p102"]]
    means[1, 1] = [p["p110"], 1 - p["p110"], 0.0]
    return means


def sample_std(mean: float, noise_scale: float) -> float:
    """Sampling deviation: scale times the mean's distance to the nearer of 0/1."""
    return noise_scale * min(mean, 1.0 - mean)


def _sample_rows(means, noise_scale, rng):
    """Perturb nonzero entries, clamp into (0, 1), renormalize each row.

    Structural zeros stay exactly zero so adjacency is preserved.
    """
    out = means.copy()
    for s in range(means.shape[0]):
        for a in range(means.shape[1]):
            row = out[s, a]
            for j, mean in enumerate(row):
                std = sample_std(mean, noise_scale)
                if mean > 0.0 and std > 0.0:
                    row[j] = min(max(rng.normal(mean, std), 1e-6), 1 - 1e-6)
            row /= row.sum()
    return out


def build_maternal(
    spec: MaternalSpec, rng, horizon: int = 20, total_budget: int = 60
) -> GroupedInstance:
    if spec.large_group not in (0, 1, 2):
        raise ValueError(f"large_group must be 0, 1, or 2, got {spec.large_group}")
    fracs = [0.2, 0.2, 0.2]
    fracs[spec.large_group] = 0.6
    sizes = _group_sizes(spec.n_arms, fracs)
    arms, group_of = [], []
    for g, size in enumerate(sizes):
        means = maternal_mean_matrix(g)
        for _ in range(size):
            sampled = _sample_rows(means, spec.noise_scale, rng)
            arms.append(
                validate_arm(
                    ArmModel(transitions=sampled, rewards=MATERNAL_REWARDS, group_id=g)
                )
            )
            group_of.append(g)
    return GroupedInstance(
        arms=tuple(arms),
        group_of=np.array(group_of),
        horizon=horizon,
        total_budget=total_budget,
        start_states=np.full(len(arms), spec.start_state),
    )


# --------------------------------------------------------------------------
# Digital diabetes

ENGAGED, MAINTENANCE, DROPOUT = 0, 1, 2
A1C_LT8, A1C_GE8 = 0, 1

N_DIABETES_STATES = 3 * 2 * 3 * 3

GROUP_TABLE_COLUMNS = (
    "p_I_MtoE",
    "p_I_MtoD",
    "p_I_EtoE",
    "p_U_MtoD",
    "p_Ebar_A1cGe8",
    "p_Ebar_A1cLt8",
    "p_E_A1cGe8",
    "p_E_A1cLt8",
    "frac",
    "sex",
    "age",
)


@dataclass(frozen=True)
class DiabetesGroupParams:
    """One row of the published six-group parameter table.

    The first four probabilities drive engagement (I = intervened,
    U = unintervened); the next four give the chance of reaching A1c < 8
    next month conditioned on engagement three months ago (E vs not-E) and
    the current clinical state. ``sex`` and ``age`` are labels only.
    """

    p_i_mtoe: float
    p_i_mtod: float
    p_i_etoe: float
    p_u_mtod: float
    p_ebar_ge8: float
    p_ebar_lt8: float
    p_e_ge8: float
    p_e_lt8: float
    frac: float
    sex: int
    age: str


@dataclass(frozen=True)
class DiabetesState:
    """Composite state (engagement, clinical, two-slot engagement memory)."""

    engagement: int
    clinical: int
    memory: tuple

    def encode(self) -> int:
        m0, m1 = self.memory
        return ((self.engagement * 2 + self.clinical) * 3 + m0) * 3 + m1

    @classmethod
    def decode(cls, index: int) -> "DiabetesState":
        index, m1 = divmod(index, 3)
        index, m0 = divmod(index, 3)
        engagement, clinical = divmod(index, 2)
        return cls(engagement=engagement, clinical=clinical, memory=(m0, m1))


@dataclass(frozen=True)
class DiabetesSpec:
    alpha: float = 0.5
    n_arms: int = 300
    group_table: tuple = field(default_factory=lambda: load_group_table())
    start_state: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")


def default_group_table_path():
    return resources.files("equibandits").joinpath("data/marketscan_groups.csv")


def load_group_table(path=None):
    """Read the six-group diabetes parameter table from a CSV file."""
    source = default_group_table_path() if path is None else path
    with open(str(source), newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(0, "<header>", "file is empty") from None
        if tuple(header) != GROUP_TABLE_COLUMNS:
            missing = set(GROUP_TABLE_COLUMNS) - set(header)
            extra = set(header) - set(GROUP_TABLE_COLUMNS)
            raise ParseError(0, ",".join(sorted(missing | extra)) or "<order>",
                             "header does not match the expected column names")
        rows = []
        for r, row in enumerate(reader, start=1):
            if len(row) != len(GROUP_TABLE_COLUMNS):
                raise ParseError(r, "<row>", f"expected 11 columns, got {len(row)}")
            values = {}
            for column, cell in zip(GROUP_TABLE_COLUMNS, row):
                if column == "age":
                    values[column] = cell.strip()
                    continue
                try:
                    values[column] = int(cell) if column == "sex" else float(cell)
                except ValueError:
                    raise ParseError(r, column, f"not a number: {cell!r}") from None
            rows.append(
                DiabetesGroupParams(
                    p_i_mtoe=values["p_I_MtoE"],
                    p_i_mtod=values["p_I_MtoD"],
                    p_i_etoe=values["p_I_EtoE"],
                    p_u_mtod=values["p_U_MtoD"],
                    p_ebar_ge8=values["p_Ebar_A1cGe8"],
                    p_ebar_lt8=values["p_Ebar_A1cLt8"],
                    p_e_ge8=values["p_E_A1cGe8"],
                    p_e_lt8=values["p_E_A1cLt8"],
                    frac=values["frac"],
                    sex=values["sex"],
                    age=values["age"],
                )
            )
    if len(rows) != 6:
        raise ParseError(len(rows), "<row>", f"expected 6 data rows, got {len(rows)}")
    for row in rows:
        for name in ("p_i_mtoe", "p_i_mtod", "p_i_etoe", "p_u_mtod",
                     "p_ebar_ge8", "p_ebar_lt8", "p_e_ge8", "p_e_lt8", "frac"):
            value = getattr(row, name)
            if not 0.0 <= value <= 1.0:
                raise BadProbability(value, f"{name} outside [0, 1]")
        if row.p_i_mtoe + row.p_i_mtod > 1.0:
            raise BadProbability(
                row.p_i_mtoe + row.p_i_mtod, "intervened exits from Maintenance exceed 1"
            )
    total_frac = sum(row.frac for row in rows)
    if abs(total_frac - 1.0) > 1e-9:
        raise BadProbability(total_frac, "group fractions must sum to 1")
    return tuple(rows)


def engagement_kernel(params: DiabetesGroupParams) -> np.ndarray:
    """Engagement transition probabilities, indexed (s_E, action, s_E').

    Under the action, Engaged stays engaged with p_I_EtoE, otherwise slips to
    Maintenance; Maintenance re-engages with p_I_MtoE or drops out with
    p_I_MtoD. Without the action, Engaged always slips to Maintenance (being
    engaged requires responding to a current intervention) and Maintenance
    drops out with p_U_MtoD. Dropout is absorbing either way.
    """
    k = np.zeros((3, 2, 3))
    k[ENGAGED, 1] = [params.p_i_etoe, 1 - params.p_i_etoe, 0.0]
    k[MAINTENANCE, 1] = [
        params.p_i_mtoe,
        1 - params.p_i_mtoe - params.p_i_mtod,
        params.p_i_mtod,
    ]
    k[ENGAGED, 0] = [0.0, 1.0, 0.0]
    k[MAINTENANCE, 0] = [0.0, 1 - params.p_u_mtod, params.p_u_mtod]
    k[DROPOUT, 0] = k[DROPOUT, 1] = [0.0, 0.0, 1.0]
    return k


def clinical_success(params: DiabetesGroupParams, memory_tail: int, clinical: int) -> float:
    """P(next clinical state is A1c < 8 | engagement 3 months ago, current A1c)."""
    if memory_tail == ENGAGED:
        return params.p_e_ge8 if clinical == A1C_GE8 else params.p_e_lt8
    return params.p_ebar_ge8 if clinical == A1C_GE8 else params.p_ebar_lt8


def diabetes_arm(params: DiabetesGroupParams, alpha: float, group_id: int) -> ArmModel:
    transitions = np.zeros((N_DIABETES_STATES, 2, N_DIABETES_STATES))
    eng = engagement_kernel(params)
    for idx in range(N_DIABETES_STATES):
        state = DiabetesState.decode(idx)
        m0, _ = state.memory
        p_lt8 = clinical_success(params, state.memory[1], state.clinical)
        for a in (0, 1):
            for next_e in (ENGAGED, MAINTENANCE, DROPOUT):
                p_e = eng[state.engagement, a, next_e]
                if p_e == 0.0:
                    continue
                # Memory shifts deterministically: new head is the current
                # engagement, old head becomes the tail.
                memory = (state.engagement, m0)
                for next_c, p_c in ((A1C_LT8, p_lt8), (A1C_GE8, 1 - p_lt8)):
                    target = DiabetesState(next_e, next_c, memory).encode()
                    transitions[idx, a, target] += p_e * p_c
    reward_e = np.zeros(N_DIABETES_STATES)
    reward_c = np.zeros(N_DIABETES_STATES)
    for idx in range(N_DIABETES_STATES):
        state = DiabetesState.decode(idx)
        reward_e[idx] = 0.0 if state.engagement == DROPOUT else 1.0
        reward_c[idx] = 1.0 if state.clinical == A1C_LT8 else 0.0
    rewards = alpha * reward_e + (1 - alpha) * reward_c
    return validate_arm(
        ArmModel(transitions=transitions, rewards=rewards, group_id=group_id)
    )


def diabetes_reward_components():
    reward_e = np.zeros(N_DIABETES_STATES)
    reward_c = np.zeros(N_DIABETES_STATES)
    for idx in range(N_DIABETES_STATES):
        state = DiabetesState.decode(idx)
        reward_e[idx] = 0.0 if state.engagement == DROPOUT else 1.0
        reward_c[idx] = 1.0 if state.clinical == A1C_LT8 else 0.0
    return {"engagement": reward_e, "clinical": reward_c}


def diabetes_state_flags():
    high = np.zeros(N_DIABETES_STATES, dtype=bool)
    dropout = np.zeros(N_DIABETES_STATES, dtype=bool)
    for idx in range(N_DIABETES_STATES):
        state = DiabetesState.decode(idx)
        high[idx] = state.clinical == A1C_GE8
        dropout[idx] = state.engagement == DROPOUT
    return high, dropout


def build_diabetes(
    spec: DiabetesSpec, horizon: int = 20, total_budget: int = 75
) -> GroupedInstance:
    sizes = _group_sizes(spec.n_arms, [row.frac for row in spec.group_table])
    arms, group_of = [], []
    for g, (size, params) in enumerate(zip(sizes, spec.group_table)):
        arm = diabetes_arm(params, spec.alpha, group_id=g)
        arms.extend([arm] * size)
        group_of.extend([g] * size)
    if spec.start_state is None:
        start = DiabetesState(
            MAINTENANCE, A1C_GE8, (MAINTENANCE, MAINTENANCE)
        ).encode()
    else:
        start = spec.start_state
    high, dropout = diabetes_state_flags()
    return GroupedInstance(
        arms=tuple(arms),
        group_of=np.array(group_of),
        horizon=horizon,
        total_budget=total_budget,
        start_states=np.full(len(arms), start),
        high_risk_states=high,
        dropout_states=dropout,
        reward_components=diabetes_reward_components(),
    )
