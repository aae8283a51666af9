"""Top-level run loop tying graphs, grounding, and geometry together.

One loop iteration: check the goal on a fresh snapshot, pick a candidate
from the newest graph, ground it, dispatch it. Success marks the node
achieved and, unless the goal is already reached, re-instantiates the
main graph against the new state. A geometric failure with known
obstructors grows a rearrangement graph instead; anything else suppresses
the candidate for the current world and tries the next one. An exhausted
frontier re-expands once per distinct state; a repeat means the task is
unsolvable. The network depth cap turns runaway growth into a reported
depth-limit result.

Timing discipline: every timestamp in the trace is simulated clock time,
so traces are reproducible byte for byte. Wall-clock durations appear
only under keys ending in `_s` or containing `[s]`, which `mask_timing`
blanks for comparisons.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from enum import Enum

from .domain import GoalSpec, MotionClass, is_goal
from .dsl import Scenario
from .interface import (
    DispatchResult,
    GroundingFailed,
    PlanningBudget,
    StepOutcome,
    dispatch,
    ground,
)
from .network import (
    Candidate,
    DepthLimitExceeded,
    ExpandReason,
    ExpansionCycle,
    GraphNetwork,
    UnknownStage,
)
from .world import World, snapshot, world_from_scenario

TABLE_COLUMNS = ("Objects", "d", "TP [s]", "Right MP [s]", "Right attempts",
                 "Left MP [s]", "Left attempts")
MODULE_ROWS = ("AND/OR Graph expansion", "Graph Net Search",
               "Motion Planner (right arm)", "Motion Planner (left arm)",
               "Motion Planner (base)")


class FinalStatus(Enum):
    GOAL_ACHIEVED = "goal_achieved"
    UNSOLVABLE = "unsolvable"
    DEPTH_LIMIT = "depth_limit"


@dataclass(frozen=True)
class RunConfig:
    depth_cap: int = 512
    retries: int = 2
    max_expansions: int = 50_000
    seed: int = 0


@dataclass
class PlanResult:
    status: FinalStatus
    depth: int
    moves: int
    steps: list[StepOutcome]
    world: World
    trace: list[dict]
    metrics: dict
    network: GraphNetwork | None = None

    def handovers(self) -> int:
        return sum(1 for s in self.steps
                   if s.motion_class is MotionClass.HANDOVER and s.feasible)


class _Timers:
    def __init__(self):
        self.expand = 0.0
        self.expand_calls = 0
        self.search = 0.0
        self.search_calls = 0

    def timed(self, bucket: str, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            setattr(self, bucket, getattr(self, bucket) + time.perf_counter() - start)
            setattr(self, bucket + "_calls", getattr(self, bucket + "_calls") + 1)


def run_scenario(scenario: Scenario, config: RunConfig = RunConfig()) -> PlanResult:
    world = world_from_scenario(scenario, seed=config.seed)
    goal = GoalSpec(scenario.goal)
    trace: list[dict] = []
    steps: list[StepOutcome] = []
    timers = _Timers()

    known = scenario.entity_ids()
    missing = sorted({arg for fact in scenario.goal for arg in fact.args
                      if arg not in known})
    if missing:
        trace.append({"event": "result", "status": FinalStatus.UNSOLVABLE.value,
                      "d": 0, "moves": 0, "t_sim": 0.0,
                      "detail": "goal names unknown entities: " + ", ".join(missing)})
        return _finish(scenario, FinalStatus.UNSOLVABLE, 0, 0, steps, world,
                       trace, timers, None)

    network = GraphNetwork(scenario.graph, scenario.stages, scenario.actions,
                           depth_cap=config.depth_cap)
    budget = PlanningBudget(retries=config.retries,
                            max_expansions=config.max_expansions)
    state = snapshot(world)
    timers.timed("expand", network.bootstrap, state.facts)
    trace.append({"event": "expand", "reason": "bootstrap", "graph": network.depth})

    moves = 0
    status: FinalStatus | None = None
    while status is None:
        state = snapshot(world)
        if is_goal(state.facts, goal):
            status = FinalStatus.GOAL_ACHIEVED
            break
        candidate = timers.timed("search", network.select, state.facts,
                                 state.signature)
        if candidate is None:
            try:
                timers.timed("expand", network.expand,
                             ExpandReason.NO_FEASIBLE_STATE, state.facts)
                trace.append({"event": "expand",
                              "reason": ExpandReason.NO_FEASIBLE_STATE.value,
                              "graph": network.depth})
            except ExpansionCycle:
                status = FinalStatus.UNSOLVABLE
            except DepthLimitExceeded:
                status = FinalStatus.DEPTH_LIMIT
            continue
        trace.append({"event": "select", "graph": candidate.graph_index + 1,
                      "node": candidate.node_id, "label": candidate.label,
                      "arc": candidate.arc.id,
                      "actions": [a.name for a in candidate.actions]})
        try:
            grounding = ground(world, candidate.actions)
        except GroundingFailed as exc:
            network.suppress(candidate, state.signature)
            trace.append({"event": "suppress", "label": candidate.label,
                          "reason": "grounding", "detail": str(exc)})
            continue

        result = dispatch(world, grounding, budget)
        world = result.world
        steps.extend(result.steps)
        for step in result.steps:
            trace.append(_step_event(step))

        if result.ok:
            network.mark_executed(candidate)
            moves += 1
            trace.append({"event": "execute", "label": candidate.label,
                          "moves": moves})
            after = snapshot(world)
            if is_goal(after.facts, goal):
                status = FinalStatus.GOAL_ACHIEVED
                break
            try:
                timers.timed("expand", network.expand,
                             ExpandReason.STAGE_COMPLETE, after.facts)
                trace.append({"event": "expand",
                              "reason": ExpandReason.STAGE_COMPLETE.value,
                              "graph": network.depth})
            except DepthLimitExceeded:
                status = FinalStatus.DEPTH_LIMIT
            continue

        failure = result.failure
        post = snapshot(world)
        stages_known = failure.kind == "motion" and any(
            f"clear_{oid}" in network.stage_templates
            for oid in failure.obstructors)
        if stages_known:
            try:
                timers.timed("expand", network.expand,
                             ExpandReason.MOTION_FAILURE, post.facts,
                             failure.obstructors)
                trace.append({"event": "expand",
                              "reason": ExpandReason.MOTION_FAILURE.value,
                              "graph": network.depth,
                              "obstructors": list(failure.obstructors)})
                continue
            except DepthLimitExceeded:
                status = FinalStatus.DEPTH_LIMIT
                continue
            except UnknownStage:
                pass  # fall through to suppression
        network.suppress(candidate, state.signature)
        network.suppress(candidate, post.signature)
        trace.append({"event": "suppress", "label": candidate.label,
                      "reason": failure.kind, "detail": failure.detail,
                      "obstructors": list(failure.obstructors)})

    depth = network.depth
    final = snapshot(world)
    trace.append({"event": "result", "status": status.value, "d": depth,
                  "moves": moves, "t_sim": round(final.clock, 9),
                  "poses": {oid: [round(p[0], 9), round(p[1], 9)]
                            for oid, p in sorted(final.poses.items())}})
    return _finish(scenario, status, depth, moves, steps, world, trace, timers,
                   network)


def _step_event(step: StepOutcome) -> dict:
    return {"event": "step", "action": step.action, "agent": step.agent,
            "class": step.motion_class.value, "feasible": step.feasible,
            "attempts": step.attempts, "expansions": step.expansions,
            "path_length": round(step.path_length, 9),
            "t_sim": round(step.sim_time, 9),
            "plan_time_s": step.plan_time}


def _finish(scenario, status, depth, moves, steps, world, trace, timers,
            network):
    metrics = build_metrics(scenario, status, depth, moves, steps, world, timers)
    return PlanResult(status, depth, moves, steps, world, trace, metrics, network)


# ------------------------------------------------------------------ metrics


def _column_side(world: World, agent_id: str) -> str | None:
    agent = world.agents.get(agent_id)
    if agent is None or agent.kind != "arm":
        return None
    return "left" if "left" in agent_id else "right"


def build_metrics(scenario: Scenario, status: FinalStatus, depth: int,
                  moves: int, steps: list[StepOutcome], world: World,
                  timers: _Timers) -> dict:
    attempts: dict[str, int] = {}
    times = {"right": 0.0, "left": 0.0, "base": 0.0}
    calls = {"right": 0, "left": 0, "base": 0}
    for step in steps:
        if step.attempts == 0:
            continue
        attempts[step.agent] = attempts.get(step.agent, 0) + step.attempts
        agent = world.agents.get(step.agent)
        group = "base" if agent is not None and agent.kind == "base" \
            else _column_side(world, step.agent)
        if group is not None:
            times[group] += step.plan_time
            calls[group] += step.attempts

    def avg(total: float, count: int) -> float:
        return total / count if count else 0.0

    table_row = {
        "Objects": sum(1 for o in scenario.objects.values() if o.movable),
        "d": depth,
        "TP [s]": timers.expand + timers.search,
        "Right MP [s]": times["right"],
        "Right attempts": calls["right"],
        "Left MP [s]": times["left"],
        "Left attempts": calls["left"],
    }
    modules = [
        {"module": MODULE_ROWS[0], "avg_s": avg(timers.expand, timers.expand_calls),
         "std_s": 0.0, "calls": timers.expand_calls},
        {"module": MODULE_ROWS[1], "avg_s": avg(timers.search, timers.search_calls),
         "std_s": 0.0, "calls": timers.search_calls},
        {"module": MODULE_ROWS[2], "avg_s": avg(times["right"], calls["right"]),
         "std_s": 0.0, "calls": calls["right"]},
        {"module": MODULE_ROWS[3], "avg_s": avg(times["left"], calls["left"]),
         "std_s": 0.0, "calls": calls["left"]},
        {"module": MODULE_ROWS[4], "avg_s": avg(times["base"], calls["base"]),
         "std_s": 0.0, "calls": calls["base"]},
    ]
    return {
        "scenario": scenario.name,
        "status": status.value,
        "table": {"columns": list(TABLE_COLUMNS), "rows": [table_row]},
        "modules": modules,
        "attempts": attempts,
        "plan_calls": world.counters.plan_calls,
        "moves": moves,
        "sim_time": round(world.clock, 9),
    }


# ----------------------------------------------------------------- exports


def trace_text(trace: list[dict]) -> str:
    """Trace as JSON lines, keys sorted, one event per line."""
    return "".join(json.dumps(event, sort_keys=True) + "\n" for event in trace)


def metrics_text(metrics: dict) -> str:
    return json.dumps(metrics, sort_keys=True, indent=2) + "\n"


def mask_timing(value):
    """Blank every wall-clock field: keys containing "[s]" or ending "_s".

    Simulated-clock fields keep their values; two runs of the same
    scenario must agree byte for byte after this masking.
    """
    if isinstance(value, dict):
        return {k: ("<time>" if "[s]" in k or k.endswith("_s") else mask_timing(v))
                for k, v in value.items()}
    if isinstance(value, list):
        return [mask_timing(v) for v in value]
    return value


def masked_trace_text(trace: list[dict]) -> str:
    return "".join(json.dumps(mask_timing(event), sort_keys=True) + "\n"
                   for event in trace)


def masked_metrics_text(metrics: dict) -> str:
    return json.dumps(mask_timing(metrics), sort_keys=True, indent=2) + "\n"
