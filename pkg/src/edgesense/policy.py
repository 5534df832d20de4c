"""Sensor-activation policies.

Four selection rules share one vocabulary: a score per candidate node,
an optional per-round energy budget, and a greedy budgeted selector.
Static and periodic ignore learning entirely. The bandit policy ranks by
a UCB index per unit energy and always fills its budget. The adaptive
policy ranks by learned utility per unit energy and additionally applies
a score floor, so it may deliberately leave budget unspent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class PolicyKind(str, enum.Enum):
    STATIC = "static"
    PERIODIC = "periodic"
    UCB = "ucb"
    ADAPTIVE = "adaptive"

    @classmethod
    def from_name(cls, name: str) -> "PolicyKind":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown policy {name!r} (valid: {valid})") from None


POLICY_ORDER = [PolicyKind.STATIC, PolicyKind.PERIODIC, PolicyKind.UCB, PolicyKind.ADAPTIVE]


@dataclass
class SelectionResult:
    """Outcome of one selection pass: node ids in admission order, their
    summed energy cost, and the budget the selector saw. selected is a
    sequence of ints (plain list from the ranked selectors, numpy array
    from the vectorized ones)."""

    selected: "list[int] | np.ndarray"
    total_cost: float
    budget: float

    @property
    def n_selected(self) -> int:
        return len(self.selected)


@dataclass
class PolicyState:
    """Mutable learning state carried across rounds for one policy run."""

    kind: PolicyKind
    utilities: np.ndarray       # adaptive: EMA utility per node, in [0, 1]
    ucb_means: np.ndarray       # bandit: mean normalized payoff per node
    ucb_counts: np.ndarray      # bandit: activation counts per node
    round_index: int = 0
    clamp_warnings: int = 0     # feedback values that arrived outside [0, 1]


def make_policy_state(kind: PolicyKind, n_nodes: int, initial_utility: float = 1.0) -> PolicyState:
    return PolicyState(
        kind=kind,
        utilities=np.full(n_nodes, initial_utility, dtype=np.float64),
        ucb_means=np.zeros(n_nodes, dtype=np.float64),
        ucb_counts=np.zeros(n_nodes, dtype=np.int64),
    )


def reward(info_gain: float, energy_cost: float, alpha: float, beta: float) -> float:
    """Sensing reward: information gain weighted against energy spent."""
    return alpha * info_gain - beta * energy_cost


def score(utility: float, energy_cost: float) -> float:
    """Utility earned per unit of energy. The adaptive policy ranks on this."""
    if energy_cost <= 0:
        raise ValueError(f"energy_cost must be > 0, got {energy_cost}")
    return utility / energy_cost


def update_utility(utility: float, feedback: float, eta: float) -> float:
    """Exponential moving average of feedback. Out-of-range feedback is
    clamped to [0, 1]; callers that care to count clamps should check the
    range first (see PolicyState.clamp_warnings)."""
    if not (0.0 < eta <= 1.0):
        raise ValueError(f"eta must be in (0, 1], got {eta}")
    clamped = min(1.0, max(0.0, feedback))
    return (1.0 - eta) * utility + eta * clamped


def note_feedback(state: PolicyState, feedback: float) -> float:
    """Clamp feedback to [0, 1], counting violations on the state."""
    clamped = min(1.0, max(0.0, feedback))
    if clamped != feedback:
        state.clamp_warnings += 1
    return clamped


def select_budgeted(
    candidates,
    budget: float,
    score_floor: float = 0.0,
) -> SelectionResult:
    """Greedy budgeted selection with skip.

    candidates: sequence of (node_id, score, energy_cost) triples, all with
    positive cost. Candidates are scanned in score-descending order (ties by
    ascending node id); each is admitted if its score reaches the floor and
    its cost fits the remaining budget. A candidate that does not fit is
    skipped without ending the scan, so cheaper lower-ranked candidates can
    still use the leftover budget. The selected count is whatever the budget
    allows, never a fixed quota.
    """
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    ordered = sorted(candidates, key=lambda c: (-c[1], c[0]))
    selected: list[int] = []
    total = 0.0
    remaining = budget
    for node_id, cand_score, cost in ordered:
        if cand_score < score_floor:
            continue
        if cost <= remaining:
            selected.append(node_id)
            total += cost
            remaining -= cost
    return SelectionResult(selected=selected, total_cost=total, budget=budget)


def select_static(node_ids, energy_cost) -> SelectionResult:
    """Activate every supplied (alive) node. The reported budget is simply
    the summed cost, since this policy has no energy cap."""
    ids = np.asarray(node_ids, dtype=np.int64)
    total = float(np.sum(np.asarray(energy_cost, dtype=np.float64))) if ids.size else 0.0
    return SelectionResult(selected=ids, total_cost=total, budget=total)


def select_periodic(node_ids, energy_cost, round_index: int, period: int, duty: int) -> SelectionResult:
    """Duty-cycled activation with per-node phase stagger: node n is active
    when (round + n) mod period < duty."""
    if period < 1:
        raise ValueError(f"period must be >= 1, got {period}")
    if not (0 <= duty <= period):
        raise ValueError(f"duty must be in [0, period], got {duty}")
    ids = np.asarray(node_ids, dtype=np.int64)
    costs = np.asarray(energy_cost, dtype=np.float64)
    mask = (round_index + ids) % period < duty
    chosen = ids[mask]
    total = float(costs[mask].sum()) if chosen.size else 0.0
    return SelectionResult(selected=chosen, total_cost=total, budget=total)


def ucb_index(mean_reward: float, count: int, round_index: int, c: float) -> float:
    """Upper confidence bound index. Untried nodes get +inf so every node is
    sampled before any exploitation; round_index is 1-based."""
    if round_index < 1:
        raise ValueError(f"round_index must be >= 1, got {round_index}")
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    if count == 0:
        return math.inf
    return mean_reward + c * math.sqrt(2.0 * math.log(round_index) / count)


def normalized_payoff(info_gain: float, energy_cost: float, alpha: float, beta: float, max_energy: float) -> float:
    """Map the raw reward alpha*I - beta*E onto [0, 1] with the affine map
    fixed by (alpha, beta, max fleet energy cost) at run start."""
    span = alpha + beta * max_energy
    if span <= 0:
        return 0.0
    return (alpha * info_gain - beta * energy_cost + beta * max_energy) / span


def ucb_scores(means, counts, energy_cost, round_index: int, c: float) -> np.ndarray:
    """Cost-normalized UCB index for a whole fleet at once: ucb_index / E
    per node, +inf for untried nodes. Vectorized twin of ucb_index."""
    if round_index < 1:
        raise ValueError(f"round_index must be >= 1, got {round_index}")
    counts = np.asarray(counts, dtype=np.float64)
    costs = np.asarray(energy_cost, dtype=np.float64)
    if costs.size and costs.min() <= 0:
        raise ValueError("energy costs must be > 0")
    bonus = c * np.sqrt(2.0 * math.log(round_index) / np.maximum(counts, 1.0))
    index = np.where(counts > 0, np.asarray(means, dtype=np.float64) + bonus, np.inf)
    return index / costs


def select_ucb(
    node_ids,
    means,
    counts,
    energy_cost,
    budget: float,
    round_index: int,
    c: float,
) -> SelectionResult:
    """Bandit selection: rank by UCB index per unit energy, then fill the
    budget greedily with no score floor."""
    costs = np.asarray(energy_cost, dtype=np.float64)
    scores = ucb_scores(means, counts, costs, round_index, c)
    candidates = zip(np.asarray(node_ids, dtype=np.int64).tolist(), scores.tolist(), costs.tolist())
    return select_budgeted(candidates, budget, score_floor=0.0)


def select_adaptive(
    node_ids,
    utilities,
    energy_cost,
    budget: float,
    score_floor: float,
) -> SelectionResult:
    """Utility-driven selection: rank by utility per unit energy and admit
    only candidates whose score clears the floor, within the budget."""
    costs = np.asarray(energy_cost, dtype=np.float64)
    if costs.size and costs.min() <= 0:
        raise ValueError("energy costs must be > 0")
    scores = np.asarray(utilities, dtype=np.float64) / costs
    candidates = zip(np.asarray(node_ids, dtype=np.int64).tolist(), scores.tolist(), costs.tolist())
    return select_budgeted(candidates, budget, score_floor=score_floor)
