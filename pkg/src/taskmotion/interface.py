"""Bridge between selected task candidates and the geometric world.

Grounding turns the actions of a candidate into an executable sequence:
it picks which agent performs each motion, prepends base travel when an
action names a work area the base is not currently at, and rewrites a
transfer whose endpoints no single arm can reach into two handover legs
through a marker flagged for that purpose.

Dispatch then walks the grounded sequence against the live world. Each
geometric step is planned just in time (so it sees every pose change the
previous steps made), retried across a deterministic low-discrepancy set
of alternative goal points when the action allows play in its goal
region, and executed on success. The first failure stops the walk and is
reported with the blocking objects, so the caller can decide between
rearrangement, trying another candidate, or giving up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .domain import ActionTemplate, Box, MotionClass, applicable
from .world import (
    Agent,
    MotionQuery,
    MotionResult,
    World,
    execute,
    plan_motion,
    snapshot,
)

TRANSIT_PREFIX = "approach_"
HANDOVER_SUFFIX = ("_handover_give", "_handover_take")


class InterfaceError(Exception):
    pass


class GroundingFailed(InterfaceError):
    """No agent assignment makes the action geometrically plausible."""


@dataclass(frozen=True)
class PlanningBudget:
    retries: int = 2
    max_expansions: int = 50_000


@dataclass(frozen=True)
class GroundedAction:
    """One dispatchable step: an action plus its agent binding.

    `agent_id` of None defers the choice to execution time (a put binds
    to whoever is holding the object by then). `synthesized` marks steps
    grounding invented (base travel, handover legs).
    """

    action: ActionTemplate
    agent_id: str | None
    synthesized: bool = False


@dataclass(frozen=True)
class GroundingResult:
    steps: tuple[GroundedAction, ...]


@dataclass(frozen=True)
class StepOutcome:
    action: str
    agent: str
    motion_class: MotionClass
    feasible: bool
    attempts: int
    expansions: int
    path_length: float
    sim_time: float
    plan_time: float = 0.0


@dataclass
class DispatchFailure:
    kind: str  # "motion" | "precondition" | "grounding"
    action: str
    obstructors: tuple[str, ...] = ()
    detail: str = ""


@dataclass
class DispatchResult:
    ok: bool
    world: World
    steps: list[StepOutcome] = field(default_factory=list)
    failure: DispatchFailure | None = None


# ----------------------------------------------------------------- helpers


def _dest_point(world: World, dest: str) -> tuple[float, float]:
    if dest in world.markers:
        marker = world.markers[dest]
        return (marker.x, marker.y)
    obj = world.objects[dest]
    return (obj.x, obj.y)


def _goal_region(world: World, dest: str) -> Box:
    point = _dest_point(world, dest)
    if dest in world.markers:
        half = world.markers[dest].snap * 0.7
        return Box(point[0], point[1], half, half)
    return Box(point[0], point[1])


def _reaches(agent: Agent, point: tuple[float, float],
             anchor: tuple[float, float] | None = None) -> bool:
    ax, ay = anchor if anchor is not None else agent.anchor
    return math.hypot(point[0] - ax, point[1] - ay) <= agent.reach + 1e-9


def _needed_points(world: World, action: ActionTemplate) -> list[tuple[float, float]]:
    points = []
    if action.verb in ("grasp", "transfer") and action.manipulated is not None:
        obj = world.objects[action.manipulated]
        points.append((obj.x, obj.y))
    if action.verb in ("put", "transfer") and action.dest is not None:
        points.append(_dest_point(world, action.dest))
    return points


def _prospective_anchor(world: World, arm: Agent,
                        action: ActionTemplate) -> tuple[float, float]:
    """Arm anchor after the base parks at the action's area, if any."""
    if action.area is None or arm.mount is None:
        return arm.anchor
    marker = world.markers[action.area]
    return (marker.x + arm.mount_off[0], marker.y + arm.mount_off[1])


def _arms(world: World) -> list[Agent]:
    return [world.agents[aid] for aid in sorted(world.agents)
            if world.agents[aid].kind == "arm"]


def base_at_area(world: World, base: Agent, marker_id: str) -> bool:
    marker = world.markers[marker_id]
    return math.hypot(base.config[0] - marker.x,
                      base.config[1] - marker.y) <= marker.snap


def _transit_step(world: World, base_id: str, marker_id: str) -> GroundedAction:
    action = ActionTemplate(name=f"{TRANSIT_PREFIX}{marker_id}",
                            motion_class=MotionClass.TRANSIT,
                            agent=base_id, area=marker_id)
    return GroundedAction(action, base_id, synthesized=True)


# ---------------------------------------------------------------- grounding


def ground(world: World, actions: tuple[ActionTemplate, ...]) -> GroundingResult:
    """Assign agents, fold in base travel, rewrite unreachable transfers."""
    steps: list[GroundedAction] = []
    for action in actions:
        if action.motion_class in (MotionClass.SYMBOLIC, MotionClass.WAIT):
            steps.append(GroundedAction(action, None))
            continue
        if action.motion_class is MotionClass.TRANSIT:
            base_id = action.agent
            if base_id is None:
                bases = [a.id for a in world.agents.values() if a.kind == "base"]
                if not bases:
                    raise GroundingFailed(f"action {action.name}: no base agent")
                base_id = sorted(bases)[0]
            if action.area is None:
                raise GroundingFailed(f"action {action.name}: transit without area")
            steps.append(GroundedAction(action, base_id))
            continue
        steps.extend(_ground_manipulation(world, action))
    return GroundingResult(tuple(steps))


def _ground_manipulation(world: World, action: ActionTemplate) -> list[GroundedAction]:
    arms = _arms(world)
    if not arms:
        raise GroundingFailed(f"action {action.name}: no arm agent")
    if action.agent is not None:
        arms = [world.agents[action.agent]]
    points = _needed_points(world, action)

    candidates = [arm for arm in arms
                  if all(_reaches(arm, p, _prospective_anchor(world, arm, action))
                         for p in points)]
    if candidates:
        out = []
        chosen = candidates[0]
        if action.area is not None and chosen.mount is not None:
            out.append(_transit_step(world, chosen.mount, action.area))
        # A put must end up bound to the holder, which may not exist yet
        # when the whole arc is grounded ahead of execution.
        agent_id = None if action.verb == "put" else chosen.id
        out.append(GroundedAction(action, agent_id))
        return out

    if action.verb == "transfer" and len(points) == 2:
        rewrite = _handover_rewrite(world, action, arms, points)
        if rewrite is not None:
            return rewrite
    raise GroundingFailed(
        f"action {action.name}: no agent reaches all required points")


def _handover_rewrite(world: World, action: ActionTemplate, arms: list[Agent],
                      points: list[tuple[float, float]]) -> list[GroundedAction] | None:
    """Split a transfer through a handover marker two arms share."""
    src_point, dst_point = points
    for marker_id in sorted(world.markers):
        marker = world.markers[marker_id]
        if not marker.handover:
            continue
        mpoint = (marker.x, marker.y)
        givers = [a for a in arms if _reaches(a, src_point) and _reaches(a, mpoint)]
        takers = [a for a in arms if _reaches(a, mpoint) and _reaches(a, dst_point)]
        for giver in givers:
            for taker in takers:
                if giver.id == taker.id:
                    continue
                give = replace(action, name=action.name + HANDOVER_SUFFIX[0],
                               motion_class=MotionClass.HANDOVER, dest=marker_id,
                               effects_add=frozenset(), effects_del=frozenset())
                take = replace(action, name=action.name + HANDOVER_SUFFIX[1],
                               motion_class=MotionClass.HANDOVER, source=marker_id,
                               preconditions=())
                return [GroundedAction(give, giver.id, synthesized=True),
                        GroundedAction(take, taker.id, synthesized=True)]
    return None


# ----------------------------------------------------------------- dispatch


def _halton(index: int, base: int) -> float:
    result = 0.0
    f = 1.0
    i = index
    while i > 0:
        f /= base
        result += f * (i % base)
        i //= base
    return result


def goal_candidates(goal: tuple[float, float], region: Box, retries: int,
                    seed: int) -> list[tuple[float, float]]:
    """The declared goal first, then low-discrepancy alternates inside it."""
    points = [goal]
    if region.hw <= 0.0 and region.hh <= 0.0:
        return points
    offset = (seed % 64) + 1
    for i in range(retries):
        u = _halton(offset + i, 2)
        v = _halton(offset + i, 3)
        points.append((region.cx + (2.0 * u - 1.0) * region.hw,
                       region.cy + (2.0 * v - 1.0) * region.hh))
    return points


def _resolve_agent(world: World, grounded: GroundedAction) -> str | None:
    if grounded.agent_id is not None:
        return grounded.agent_id
    action = grounded.action
    if action.verb == "put" and action.manipulated is not None:
        for agent in world.agents.values():
            if agent.holding == action.manipulated:
                return agent.id
        return None
    for arm in _arms(world):
        if all(_reaches(arm, p) for p in _needed_points(world, action)):
            return arm.id
    return None


def build_query(world: World, grounded: GroundedAction, agent_id: str,
                goal: tuple[float, float] | None,
                budget: PlanningBudget) -> MotionQuery:
    action = grounded.action
    agent = world.agents[agent_id]
    if action.motion_class is MotionClass.TRANSIT:
        marker = world.markers[action.area]
        point = goal if goal is not None else (marker.x, marker.y)
        half = marker.snap * 0.7
        return MotionQuery(agent_id, MotionClass.TRANSIT, "transfer",
                           agent.config, point, Box(marker.x, marker.y, half, half),
                           max_expansions=budget.max_expansions)
    if action.verb == "grasp":
        obj = world.objects[action.manipulated]
        point = (obj.x, obj.y)
        return MotionQuery(agent_id, action.motion_class, "grasp", agent.config,
                           point, Box(point[0], point[1]),
                           manipulated=action.manipulated, source=action.source,
                           max_expansions=budget.max_expansions)
    point = goal if goal is not None else _dest_point(world, action.dest)
    return MotionQuery(agent_id, action.motion_class, action.verb, agent.config,
                       point, _goal_region(world, action.dest),
                       manipulated=action.manipulated, source=action.source,
                       dest=action.dest, max_expansions=budget.max_expansions)


def dispatch(world: World, grounding: GroundingResult,
             budget: PlanningBudget = PlanningBudget()) -> DispatchResult:
    """Execute a grounded sequence step by step on the live world."""
    result = DispatchResult(ok=True, world=world)
    for grounded in grounding.steps:
        action = grounded.action
        state = snapshot(result.world)
        if not applicable(state.facts, action):
            unmet = next(c for c in action.preconditions if not c.holds(state.facts))
            result.ok = False
            result.failure = DispatchFailure("precondition", action.name,
                                             detail=unmet.text())
            return result
        if not action.is_geometric():
            result.world = execute(result.world, "", None, action)
            result.steps.append(StepOutcome(
                action.name, "", action.motion_class, True, 0, 0, 0.0,
                result.world.clock))
            continue

        agent_id = _resolve_agent(result.world, grounded)
        if agent_id is None:
            result.ok = False
            result.failure = DispatchFailure("grounding", action.name,
                                             detail="no agent binds the action")
            return result
        if action.motion_class is MotionClass.TRANSIT:
            base = result.world.agents[agent_id]
            if base_at_area(result.world, base, action.area):
                continue  # already parked, nothing to plan

        region = _goal_region(result.world, action.dest) \
            if action.dest is not None and action.verb != "grasp" else Box(0, 0)
        if action.motion_class is MotionClass.TRANSIT:
            marker = result.world.markers[action.area]
            half = marker.snap * 0.7
            region = Box(marker.x, marker.y, half, half)
            goal0 = (marker.x, marker.y)
        elif action.verb == "grasp":
            obj = result.world.objects[action.manipulated]
            goal0 = (obj.x, obj.y)
        else:
            goal0 = _dest_point(result.world, action.dest)

        attempts = 0
        expansions = 0
        plan_time = 0.0
        final: MotionResult | None = None
        for point in goal_candidates(goal0, region, budget.retries,
                                     result.world.rng_seed):
            query = build_query(result.world, grounded, agent_id, point, budget)
            final = plan_motion(result.world, query)
            attempts += 1
            expansions += final.expansions
            plan_time += final.elapsed
            if final.feasible:
                break
        assert final is not None
        if not final.feasible:
            result.ok = False
            result.failure = DispatchFailure("motion", action.name,
                                             obstructors=final.obstructors,
                                             detail=final.detail)
            result.steps.append(StepOutcome(
                action.name, agent_id, action.motion_class, False, attempts,
                expansions, 0.0, result.world.clock, plan_time))
            return result
        result.world = execute(result.world, agent_id, final, action)
        result.steps.append(StepOutcome(
            action.name, agent_id, action.motion_class, True, attempts,
            expansions, _length(final), result.world.clock, plan_time))
    return result


def _length(result: MotionResult) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(result.path, result.path[1:]):
        total += math.hypot(x1 - x0, y1 - y0)
    return total
