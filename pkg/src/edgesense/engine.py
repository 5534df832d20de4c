"""Simulation engine: one policy, one fleet, one trace, round by round.

Each round the engine derives per-zone activation budgets, lets the policy
pick nodes, charges their batteries, synthesizes noisy readings for the
activated nodes only, turns readings into deviation feedback against an
observed baseline, feeds learning policies, and scores event detections.

Determinism: every random draw comes from a counter-based stream keyed by
(seed, purpose, round), with per-node draws positional inside the round
block. Reordering policies or rerunning cannot shift anybody's noise.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import hierarchy as hier
from ._util import atomic_write_text, stable_json
from .core import (
    ContextVector,
    Fleet,
    N_POLLUTANTS,
    STREAM_READING,
    SimConfig,
    build_fleet,
    require_valid,
    stream,
)
from .policy import (
    PolicyKind,
    PolicyState,
    SelectionResult,
    make_policy_state,
    normalized_payoff,
    select_budgeted,
    select_periodic,
    select_static,
    ucb_scores,
)
from .trace import EventSpec, TraceSet

log = logging.getLogger("edgesense.engine")

RUN_FORMAT = "edgesense-run/1"

K_DEVIATION = 1.5            # feedback saturates at this multiple of baseline deviation
FEEDBACK_SCALE_FLOOR = 1e-6  # keeps the deviation ratio finite for near-zero baselines
TREND_WINDOW = 8             # rounds of observed history behind the trend slope
INITIAL_UTILITY = 1.0        # optimistic start so every node gets tried early


def sensor_reading(true_value: float, noise_sigma: float, rng: np.random.Generator) -> float:
    """One noisy measurement: true value scaled by (1 + eps) and floored at
    zero, eps drawn normal with the configured sigma."""
    eps = float(rng.normal(0.0, noise_sigma)) if noise_sigma > 0 else 0.0
    return max(0.0, true_value * (1.0 + eps))


def feedback_proxy(measured: float, baseline: float, baseline_scale: float, k_dev: float = K_DEVIATION) -> float:
    """Deviation feedback in [0, 1]: how far the measurement sits from the
    baseline, relative to k_dev times the baseline scale."""
    if baseline_scale <= 0:
        raise ValueError(f"baseline_scale must be > 0, got {baseline_scale}")
    value = abs(measured - baseline) / (k_dev * baseline_scale)
    return min(1.0, max(0.0, value))


@dataclass
class RoundLog:
    round_index: int
    selected: np.ndarray          # node ids activated this round
    spent: float                  # mAh drained this round
    feedback: np.ndarray          # deviation feedback per selected node
    detected_event_ids: tuple[int, ...]  # events first detected this round
    mean_reward: float            # mean of alpha*I - beta*E over selected
    budget_total: float           # summed budget across clusters this round


@dataclass
class RunResult:
    config: dict
    policy: str
    seed: int
    trace_hash: str
    logs: list[RoundLog]
    energy_cost: np.ndarray
    zone_of: np.ndarray
    final_battery: np.ndarray
    activation_counts: np.ndarray
    death_round: np.ndarray       # round a node became unable to fund another activation, -1 if never
    events: list[EventSpec]
    event_detected: list[bool]
    event_detect_round: list[int]  # -1 when undetected
    total_spent: float
    max_budget_violation: float
    n_budgeted_selections: int
    clamp_warnings: int
    final_utilities: np.ndarray
    final_ucb_means: np.ndarray
    final_ucb_counts: np.ndarray

    @property
    def n_rounds(self) -> int:
        return len(self.logs)

    @property
    def n_nodes(self) -> int:
        return len(self.energy_cost)

    def to_dict(self) -> dict:
        return {
            "format": RUN_FORMAT,
            "config": self.config,
            "policy": self.policy,
            "seed": self.seed,
            "trace_hash": self.trace_hash,
            "total_spent": self.total_spent,
            "max_budget_violation": self.max_budget_violation,
            "n_budgeted_selections": self.n_budgeted_selections,
            "clamp_warnings": self.clamp_warnings,
            "energy_cost": [float(x) for x in self.energy_cost],
            "zone_of": [int(x) for x in self.zone_of],
            "final_battery": [float(x) for x in self.final_battery],
            "activation_counts": [int(x) for x in self.activation_counts],
            "death_round": [int(x) for x in self.death_round],
            "events": [
                {
                    "zone_id": ev.zone_id,
                    "start_round": ev.start_round,
                    "end_round": ev.end_round,
                    "pollutant": ev.pollutant.value,
                    "magnitude": ev.magnitude,
                }
                for ev in self.events
            ],
            "event_detected": list(self.event_detected),
            "event_detect_round": list(self.event_detect_round),
            "rounds": [
                {
                    "round": lg.round_index,
                    "selected": [int(i) for i in lg.selected],
                    "spent": lg.spent,
                    "feedback": [float(f) for f in lg.feedback],
                    "detected": list(lg.detected_event_ids),
                    "mean_reward": lg.mean_reward,
                    "budget": lg.budget_total,
                }
                for lg in self.logs
            ],
        }


class ObservationState:
    """Trailing statistics over observed (activated) measurements.

    Baseline: flat mean of a zone channel's activated samples over the last
    `window` rounds, falling back to the first observation ever made for
    that channel. Trend: least-squares slope of the observed per-round zone
    means over a short window. Both see only what sensors reported.
    """

    def __init__(self, n_zones: int, window: int, trend_window: int = TREND_WINDOW):
        self.window = window
        self.ring_sum = np.zeros((window, n_zones, N_POLLUTANTS))
        self.ring_cnt = np.zeros((window, n_zones, N_POLLUTANTS))
        self.win_sum = np.zeros((n_zones, N_POLLUTANTS))
        self.win_cnt = np.zeros((n_zones, N_POLLUTANTS))
        self.first_obs = np.full((n_zones, N_POLLUTANTS), np.nan)
        self.trend_window = trend_window
        self.tb_values = np.full((trend_window, n_zones, N_POLLUTANTS), np.nan)
        self.tb_round = np.full(trend_window, -1, dtype=np.int64)

    def merged(self) -> np.ndarray:
        """Windowed mean per (zone, pollutant), first observation where the
        window is empty, NaN where the channel was never sampled."""
        return np.divide(self.win_sum, self.win_cnt, out=self.first_obs.copy(), where=self.win_cnt > 0)

    def baseline(self, current_mean: np.ndarray | None = None) -> np.ndarray:
        """merged() with the remaining NaNs filled from the current round's
        mean (if given) and finally zero."""
        out = self.merged()
        if current_mean is not None:
            missing = np.isnan(out)
            out[missing] = current_mean[missing]
        return np.nan_to_num(out, copy=False, nan=0.0)

    def recent_level(self) -> np.ndarray:
        return self.baseline(None)

    def trend(self, now: int) -> np.ndarray:
        """Slope per (zone, pollutant) over the trend window, zero when there
        are fewer than two observations."""
        x = (self.tb_round - now).astype(np.float64)
        if self.tb_round.min() >= 0 and not np.isnan(self.tb_values).any():
            # full window, every channel sampled: closed-form with scalar x stats
            k = float(self.trend_window)
            sx = x.sum()
            sxx = float(x @ x)
            denom = k * sxx - sx * sx
            sy = self.tb_values.sum(axis=0)
            sxy = np.tensordot(x, self.tb_values, axes=(0, 0))
            return (k * sxy - sx * sy) / denom
        valid = ~np.isnan(self.tb_values)
        n = valid.sum(axis=0)
        x3 = x[:, None, None]
        xv = np.where(valid, x3, 0.0)
        yv = np.where(valid, self.tb_values, 0.0)
        sx = xv.sum(axis=0)
        sy = yv.sum(axis=0)
        sxx = (xv * xv).sum(axis=0)
        sxy = (xv * yv).sum(axis=0)
        denom = n * sxx - sx * sx
        out = np.zeros_like(denom)
        np.divide(n * sxy - sx * sy, denom, out=out, where=(n >= 2) & (denom != 0))
        return out

    def evict(self, now: int) -> None:
        """Drop the window entry that is about to fall out (round now-window)."""
        if now >= self.window:
            slot = now % self.window
            self.win_sum -= self.ring_sum[slot]
            self.win_cnt -= self.ring_cnt[slot]

    def push(self, now: int, cur_sum: np.ndarray, cur_cnt: np.ndarray, cur_mean: np.ndarray) -> None:
        """Record the current round: cur_mean must be cur_sum/cur_cnt with
        NaN where cur_cnt is zero."""
        slot = now % self.window
        self.ring_sum[slot] = cur_sum
        self.ring_cnt[slot] = cur_cnt
        self.win_sum += cur_sum
        self.win_cnt += cur_cnt
        fresh = np.isnan(self.first_obs) & (cur_cnt > 0)
        self.first_obs[fresh] = cur_mean[fresh]
        tslot = now % self.trend_window
        self.tb_values[tslot] = cur_mean
        self.tb_round[tslot] = now


def build_zone_contexts(
    obs: ObservationState,
    round_index: int,
    rounds_per_day: int,
    battery_fraction: np.ndarray,
) -> list[ContextVector]:
    """Assemble one ContextVector per zone from the observation state and the
    per-zone mean remaining battery fraction."""
    levels = obs.recent_level()
    trends = obs.trend(round_index)
    slot = round_index % rounds_per_day
    return [
        ContextVector(
            round_index=round_index,
            time_of_day_slot=slot,
            zone_id=z,
            recent_level=levels[z],
            trend=trends[z],
            energy_summary=float(battery_fraction[z]),
        )
        for z in range(levels.shape[0])
    ]


class _NoiseSource:
    """Sequential standard-normal source with a fixed (round, node, pollutant)
    layout, prefetched in chunks. Consumption never depends on which nodes
    were selected, so rival policies under one seed share per-node noise.
    Rounds must be visited in increasing order."""

    def __init__(self, seed: int, per_round: int, chunk_rounds: int):
        self._gen = stream(seed, STREAM_READING)
        self._per_round = per_round
        self._chunk = max(1, chunk_rounds)
        self._buf: np.ndarray | None = None
        self._base = -1

    def round_block(self, t: int) -> np.ndarray:
        base = (t // self._chunk) * self._chunk
        if base != self._base:
            self._buf = self._gen.standard_normal(self._chunk * self._per_round)
            self._buf = self._buf.reshape(self._chunk, self._per_round)
            self._base = base
        return self._buf[t - base]


def run_simulation(
    cfg: SimConfig,
    traces: TraceSet,
    policy_kind: PolicyKind | str,
    seed: int | None = None,
) -> RunResult:
    """Simulate one policy over the trace. The per-run seed (defaulting to
    cfg.seed) drives fleet energy costs and sensor noise; the trace itself
    is taken as given so rival policies can share one world."""
    require_valid(cfg)
    policy_kind = PolicyKind.from_name(policy_kind) if isinstance(policy_kind, str) else policy_kind
    seed = cfg.seed if seed is None else seed

    if traces.n_zones != cfg.n_zones:
        raise ValueError(f"trace has {traces.n_zones} zones, config expects {cfg.n_zones}")
    if traces.n_rounds < cfg.rounds:
        raise ValueError(f"trace has {traces.n_rounds} rounds, config needs {cfg.rounds}")

    fleet: Fleet = build_fleet(cfg, seed)
    n = fleet.n_nodes
    costs = fleet.energy_cost
    zone_of = fleet.zone_id.astype(np.int64)
    capacity = cfg.battery_capacity
    max_energy = float(costs.max())

    pulls = np.zeros(n, dtype=np.int64)
    death_round = np.full(n, -1, dtype=np.int64)
    state: PolicyState = make_policy_state(policy_kind, n, INITIAL_UTILITY)

    node_ids = np.arange(n, dtype=np.int64)
    zone_slices = [
        slice(z * cfg.nodes_per_zone, (z + 1) * cfg.nodes_per_zone) for z in range(cfg.n_zones)
    ]
    global_budget = cfg.budget_fraction * float(costs.sum())
    obs = ObservationState(cfg.n_zones, cfg.rounds_per_day)

    events = list(traces.events)
    detected = [False] * len(events)
    detect_round = [-1] * len(events)
    active_by_round: list[list[int]] = [[] for _ in range(cfg.rounds)]
    for idx, ev in enumerate(events):
        for r in range(ev.start_round, min(ev.end_round, cfg.rounds)):
            active_by_round[r].append(idx)

    logs: list[RoundLog] = []
    total_spent = 0.0
    max_violation = 0.0
    n_budgeted = 0
    values = traces.values
    noise = _NoiseSource(seed, n * N_POLLUTANTS, cfg.rounds_per_day)
    budgeted = policy_kind in (PolicyKind.UCB, PolicyKind.ADAPTIVE)
    cost_l = costs.tolist()

    for t in range(cfg.rounds):
        fundable = (pulls + 1) * costs <= capacity
        obs.evict(t)
        merged = obs.merged()  # may hold NaN for never-sampled channels
        merged_nan = np.isnan(merged)

        # hierarchical budget split from observed context only
        cluster_budgets = None
        if budgeted:
            if cfg.hierarchy:
                levels = np.where(merged_nan, 0.0, merged)
                trends = np.abs(obs.trend(t))
                weights = hier.zone_interest_weights(hier.scalarize(trends), hier.scalarize(levels))
                cluster_budgets = hier.allocate_budgets(global_budget, weights)
            else:
                cluster_budgets = [hier.ClusterBudget(zone_id=-1, weight=1.0, budget=global_budget)]

        selections: list[SelectionResult] = []
        if policy_kind is PolicyKind.STATIC:
            mask = fundable
            selections.append(select_static(node_ids[mask], costs[mask]))
        elif policy_kind is PolicyKind.PERIODIC:
            mask = fundable
            selections.append(
                select_periodic(node_ids[mask], costs[mask], t, cfg.periodic_period, cfg.periodic_duty)
            )
        else:
            # score the fleet once, then run the shared admission kernel per
            # cluster; scoring goes through the same functions the policy
            # surface exposes (ucb_scores, utility/energy ratio)
            if policy_kind is PolicyKind.UCB:
                scores = ucb_scores(state.ucb_means, state.ucb_counts, costs, t + 1, cfg.ucb_c)
                floor = 0.0
            else:
                scores = state.utilities / costs
                floor = cfg.score_floor
            score_l = scores.tolist()
            fund_l = fundable.tolist()
            for cb in cluster_budgets:
                sl = zone_slices[cb.zone_id] if cb.zone_id >= 0 else slice(0, n)
                cand = [
                    (i, score_l[i], cost_l[i])
                    for i in range(sl.start, sl.stop)
                    if fund_l[i]
                ]
                res = select_budgeted(cand, cb.budget, floor)
                selections.append(res)
                n_budgeted += 1
                max_violation = max(max_violation, res.total_cost - cb.budget)

        sel = np.concatenate([np.asarray(r.selected, dtype=np.int64) for r in selections]) \
            if selections else np.empty(0, dtype=np.int64)
        spent = float(costs[sel].sum()) if sel.size else 0.0
        budget_total = float(sum(r.budget for r in selections))

        was_fundable = fundable[sel]
        pulls[sel] += 1
        total_spent += spent
        now_dead = (pulls[sel] + 1) * costs[sel] > capacity
        newly_dead = sel[was_fundable & now_dead]
        death_round[newly_dead] = t

        # readings for activated nodes only; the noise layout covers the whole
        # fleet so selection cannot shift anyone else's draws
        eps = noise.round_block(t).reshape(n, N_POLLUTANTS)
        sel_zones = zone_of[sel]
        truth = values[t][sel_zones, :]  # [n_sel, P]
        measured = np.maximum(0.0, truth * (1.0 + eps[sel, :] * cfg.noise_sigma))

        cur_sum = np.zeros((cfg.n_zones, N_POLLUTANTS))
        cur_cnt = np.zeros((cfg.n_zones, N_POLLUTANTS))
        if sel.size:
            np.add.at(cur_sum, sel_zones, measured)
            np.add.at(cur_cnt, sel_zones, 1.0)
        cur_mean = np.divide(cur_sum, cur_cnt, out=np.full_like(cur_sum, np.nan), where=cur_cnt > 0)

        bl = np.where(merged_nan, np.where(np.isnan(cur_mean), 0.0, cur_mean), merged)
        scale = np.maximum(bl, FEEDBACK_SCALE_FLOOR)
        if sel.size:
            dev = np.abs(measured - bl[sel_zones, :]) / (K_DEVIATION * scale[sel_zones, :])
            feedback = np.clip(dev, 0.0, 1.0).max(axis=1)
        else:
            feedback = np.empty(0)

        if policy_kind is PolicyKind.ADAPTIVE and sel.size:
            state.utilities[sel] = (1.0 - cfg.eta) * state.utilities[sel] + cfg.eta * feedback
        elif policy_kind is PolicyKind.UCB and sel.size:
            state.ucb_counts[sel] += 1
            payoff = (cfg.alpha * feedback - cfg.beta * costs[sel] + cfg.beta * max_energy) / (
                cfg.alpha + cfg.beta * max_energy
            )
            state.ucb_means[sel] += (payoff - state.ucb_means[sel]) / state.ucb_counts[sel]

        mean_reward = float(np.mean(cfg.alpha * feedback - cfg.beta * costs[sel])) if sel.size else 0.0

        newly_detected = []
        if active_by_round[t] and sel.size:
            zone_peak = np.zeros(cfg.n_zones)
            np.maximum.at(zone_peak, sel_zones, feedback)
            for idx in active_by_round[t]:
                if not detected[idx] and zone_peak[events[idx].zone_id] >= cfg.detect_threshold:
                    detected[idx] = True
                    detect_round[idx] = t
                    newly_detected.append(idx)

        obs.push(t, cur_sum, cur_cnt, cur_mean)
        state.round_index = t + 1

        logs.append(
            RoundLog(
                round_index=t,
                selected=sel,
                spent=spent,
                feedback=feedback,
                detected_event_ids=tuple(newly_detected),
                mean_reward=mean_reward,
                budget_total=budget_total,
            )
        )

    return RunResult(
        config=cfg.to_dict(),
        policy=policy_kind.value,
        seed=seed,
        trace_hash=traces.content_hash(),
        logs=logs,
        energy_cost=costs,
        zone_of=zone_of,
        final_battery=capacity - pulls * costs,
        activation_counts=pulls,
        death_round=death_round,
        events=events,
        event_detected=detected,
        event_detect_round=detect_round,
        total_spent=total_spent,
        max_budget_violation=max(0.0, max_violation),
        n_budgeted_selections=n_budgeted,
        clamp_warnings=state.clamp_warnings,
        final_utilities=state.utilities,
        final_ucb_means=state.ucb_means,
        final_ucb_counts=state.ucb_counts,
    )


def mark_detections(run: RunResult, events: list[EventSpec] | None = None, threshold: float | None = None) -> list[bool]:
    """Re-score event detections from the run's logs: an event counts as
    detected if any activated sensor in its zone reported feedback at or
    above the threshold during [start_round, end_round)."""
    events = run.events if events is None else events
    threshold = run.config["detect_threshold"] if threshold is None else threshold
    flags = [False] * len(events)
    zone_of = run.zone_of
    for lg in run.logs:
        if not len(lg.selected):
            continue
        for idx, ev in enumerate(events):
            if flags[idx] or not (ev.start_round <= lg.round_index < ev.end_round):
                continue
            in_zone = zone_of[lg.selected] == ev.zone_id
            if in_zone.any() and lg.feedback[in_zone].max() >= threshold:
                flags[idx] = True
    return flags


def save_run(run: RunResult, path: str) -> None:
    atomic_write_text(path, stable_json(run.to_dict()))


def load_run(path: str) -> RunResult:
    """Rehydrate a RunResult written by save_run."""
    from .core import Pollutant

    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    if d.get("format") != RUN_FORMAT:
        raise ValueError(f"unsupported run format {d.get('format')!r} in {path}")
    logs = [
        RoundLog(
            round_index=r["round"],
            selected=np.asarray(r["selected"], dtype=np.int64),
            spent=r["spent"],
            feedback=np.asarray(r["feedback"], dtype=np.float64),
            detected_event_ids=tuple(r["detected"]),
            mean_reward=r["mean_reward"],
            budget_total=r["budget"],
        )
        for r in d["rounds"]
    ]
    events = [
        EventSpec(e["zone_id"], e["start_round"], e["end_round"], Pollutant.from_label(e["pollutant"]), e["magnitude"])
        for e in d["events"]
    ]
    return RunResult(
        config=d["config"],
        policy=d["policy"],
        seed=d["seed"],
        trace_hash=d["trace_hash"],
        logs=logs,
        energy_cost=np.asarray(d["energy_cost"], dtype=np.float64),
        zone_of=np.asarray(d["zone_of"], dtype=np.int64),
        final_battery=np.asarray(d["final_battery"], dtype=np.float64),
        activation_counts=np.asarray(d["activation_counts"], dtype=np.int64),
        death_round=np.asarray(d["death_round"], dtype=np.int64),
        events=events,
        event_detected=list(d["event_detected"]),
        event_detect_round=list(d["event_detect_round"]),
        total_spent=d["total_spent"],
        max_budget_violation=d["max_budget_violation"],
        n_budgeted_selections=d["n_budgeted_selections"],
        clamp_warnings=d["clamp_warnings"],
        final_utilities=np.zeros(len(d["energy_cost"])),
        final_ucb_means=np.zeros(len(d["energy_cost"])),
        final_ucb_counts=np.zeros(len(d["energy_cost"]), dtype=np.int64),
    )


def write_round_log_csv(run: RunResult, path: str) -> None:
    """Stream the per-round log to CSV, one row per (round, node), with a
    selected flag so unselected nodes appear with zero spend."""
    import csv as _csv
    import io

    buf = io.StringIO()
    writer = _csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "policy", "zone", "node", "selected", "spent_mAh", "feedback"])
    n = run.n_nodes
    for lg in run.logs:
        sel_set = {int(i): k for k, i in enumerate(lg.selected)}
        for node in range(n):
            k = sel_set.get(node)
            if k is None:
                writer.writerow([lg.round_index, run.policy, int(run.zone_of[node]), node, 0, 0.0, ""])
            else:
                writer.writerow(
                    [lg.round_index, run.policy, int(run.zone_of[node]), node, 1,
                     repr(float(run.energy_cost[node])), repr(float(lg.feedback[k]))]
                )
    atomic_write_text(path, buf.getvalue())
