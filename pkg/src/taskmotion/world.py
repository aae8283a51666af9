"""Planar top-down geometric world: footprints, motion planning, execution.

Objects live on an axis-aligned plane as circles and boxes. Arms are
modeled by an anchor plus a reach disc their end effector may not leave;
the base is a disc that travels the floor. Motion planning runs A* on a
uniform occupancy grid; when a plan fails, a second search that ignores
movable objects diagnoses which of them stand in the way.

Worlds are value-like: `execute` returns a new world and never touches
its input. Shared diagnostic counters are the one exception, documented
on `Counters`. Reads (`snapshot`, `plan_motion`, `obstructors`) are pure
and safe to repeat; replaying the same query on the same world yields a
bit-identical result apart from the wall-clock `elapsed` field.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .domain import DERIVED_PREDICATES, ActionTemplate, Box, Fact, MotionClass

DEFAULT_RESOLUTION = 0.02
DEFAULT_CLEARANCE = 0.01
DEFAULT_MAX_EXPANSIONS = 50_000
ARM_POINT_RADIUS = 0.02
MOVE_SPEED = 1.0  # meters of path per simulated second


class WorldError(Exception):
    pass


class InvalidQuery(WorldError):
    """Start configuration in collision or outside the agent's region."""


class StaleResult(WorldError):
    """World changed between planning and execution."""


class StaleWorld(WorldError):
    """Grounding snapshot no longer matches the live world."""


class UnknownEntity(WorldError):
    pass


@dataclass
class Counters:
    """Diagnostic tallies shared across world copies (single-writer)."""

    plan_calls: int = 0


@dataclass(frozen=True)
class Obj:
    id: str
    shape: str  # "circle" | "box"
    dims: tuple[float, ...]  # (r,) or (w, h)
    x: float
    y: float
    yaw: float = 0.0
    movable: bool = False
    blocks: str = "all"  # "all" | "arm" | "base"
    stack_on: str | None = None

    def carry_extent(self) -> float:
        """Swept radius while carried. A planar carry can swing a box to
        slip through gaps, so the tight half extent governs, not the
        diagonal; clearance still pads every obstacle test."""
        if self.shape == "circle":
            return self.dims[0]
        return min(self.dims[0], self.dims[1]) / 2.0


@dataclass(frozen=True)
class Marker:
    id: str
    x: float
    y: float
    snap: float = 0.04
    handover: bool = False


@dataclass(frozen=True)
class Agent:
    id: str
    kind: str  # "arm" | "base"
    anchor: tuple[float, float]
    reach: float = 0.0
    radius: float = 0.0
    config: tuple[float, float] = (0.0, 0.0)
    holding: str | None = None
    mount: str | None = None
    mount_off: tuple[float, float] = (0.0, 0.0)


@dataclass
class World:
    bounds: tuple[float, float, float, float]
    objects: dict[str, Obj] = field(default_factory=dict)
    agents: dict[str, Agent] = field(default_factory=dict)
    markers: dict[str, Marker] = field(default_factory=dict)
    facts: frozenset[Fact] = frozenset()
    clock: float = 0.0
    rng_seed: int = 0
    resolution: float = DEFAULT_RESOLUTION
    clearance: float = DEFAULT_CLEARANCE
    counters: Counters = field(default_factory=Counters)


@dataclass(frozen=True)
class WorldState:
    """Read-only snapshot: derived plus stored facts and raw poses."""

    facts: frozenset[Fact]
    poses: dict[str, tuple[float, float, float]]
    holding: dict[str, str]
    configs: dict[str, tuple[float, float]]
    clock: float
    signature: str


@dataclass(frozen=True)
class MotionQuery:
    agent: str
    motion_class: MotionClass
    verb: str
    start: tuple[float, float]
    goal_point: tuple[float, float]
    goal_region: Box
    manipulated: str | None = None
    source: str | None = None
    dest: str | None = None
    max_expansions: int = DEFAULT_MAX_EXPANSIONS


@dataclass(frozen=True)
class MotionResult:
    feasible: bool
    path: tuple[tuple[float, float], ...]
    expansions: int
    obstructors: tuple[str, ...]
    goal_point: tuple[float, float]
    world_sig: str
    detail: str = ""
    elapsed: float = 0.0


def world_from_scenario(scenario, seed: int = 0, resolution: float = DEFAULT_RESOLUTION,
                        clearance: float = DEFAULT_CLEARANCE) -> World:
    """Materialize the initial world from scenario declarations."""
    objects = {}
    for decl in scenario.objects.values():
        objects[decl.id] = Obj(decl.id, decl.shape, tuple(decl.dims), decl.x, decl.y,
                               decl.yaw, decl.movable, decl.blocks, decl.on)
    markers = {m.id: Marker(m.id, m.x, m.y, m.snap, m.handover)
               for m in scenario.markers.values()}
    agents = {}
    for decl in scenario.agents.values():
        anchor = (decl.x, decl.y)
        if decl.mount is not None:
            base = scenario.agents[decl.mount]
            anchor = (base.x + decl.mount_dx, base.y + decl.mount_dy)
        agents[decl.id] = Agent(decl.id, decl.kind, anchor, decl.reach, decl.radius,
                                config=anchor, mount=decl.mount,
                                mount_off=(decl.mount_dx, decl.mount_dy))
    return World(bounds=scenario.bounds, objects=objects, agents=agents, markers=markers,
                 facts=frozenset(scenario.init), rng_seed=seed,
                 resolution=resolution, clearance=clearance)


def stack_chain_down(world: World, obj_id: str) -> list[str]:
    """Everything the object transitively rests on, nearest support first."""
    chain = []
    current = world.objects[obj_id].stack_on
    while current is not None and current in world.objects:
        chain.append(current)
        current = world.objects[current].stack_on
    return chain


def stack_chain_up(world: World, obj_id: str) -> list[str]:
    """Everything resting on the object, lowest first."""
    above = []
    frontier = [obj_id]
    order = sorted(world.objects)
    while frontier:
        current = frontier.pop(0)
        for oid in order:
            if world.objects[oid].stack_on == current:
                above.append(oid)
                frontier.append(oid)
    return above


def stack_top(world: World, obj_id: str) -> str:
    """Topmost object of the stack rooted at obj_id (itself when bare)."""
    top = obj_id
    while True:
        nxt = next((oid for oid in sorted(world.objects)
                    if world.objects[oid].stack_on == top), None)
        if nxt is None:
            return top
        top = nxt


def held_by(world: World) -> dict[str, str]:
    return {a.holding: a.id for a in world.agents.values() if a.holding is not None}


def snapshot(world: World) -> WorldState:
    """Derive the symbolic view of the current geometry.

    `on`/`clear` follow the stacking relation, `at` compares poses with
    marker snap radii, `at_peg` names the root support of a stack, and
    `holding`/`held`/`carrying` reflect attachment. Stored facts (the
    non-derivable ones such as process flags) are unioned in.
    """
    facts: set[Fact] = set()
    holders = held_by(world)
    for oid in sorted(world.objects):
        obj = world.objects[oid]
        if obj.stack_on is not None:
            facts.add(Fact("on", (oid, obj.stack_on)))
            chain = stack_chain_down(world, oid)
            if chain:
                facts.add(Fact("at_peg", (oid, chain[-1])))
        if oid in holders:
            facts.add(Fact("holding", (holders[oid], oid)))
            facts.add(Fact("held", (oid,)))
            continue
        if not any(o.stack_on == oid for o in world.objects.values()):
            facts.add(Fact("clear", (oid,)))
        if obj.movable:
            for marker in world.markers.values():
                if math.hypot(obj.x - marker.x, obj.y - marker.y) <= marker.snap:
                    facts.add(Fact("at", (oid, marker.id)))
    if holders:
        facts.add(Fact("carrying", ()))
    for agent in world.agents.values():
        if agent.kind != "base":
            continue
        for marker in world.markers.values():
            if math.hypot(agent.config[0] - marker.x, agent.config[1] - marker.y) <= marker.snap:
                facts.add(Fact("at", (agent.id, marker.id)))
    facts |= world.facts
    poses = {oid: (o.x, o.y, o.yaw) for oid, o in sorted(world.objects.items())}
    configs = {aid: a.config for aid, a in sorted(world.agents.items())}
    sig = _signature(poses, configs, facts)
    return WorldState(facts=frozenset(facts), poses=poses,
                      holding={a.id: a.holding for a in world.agents.values()
                               if a.holding is not None},
                      configs=configs, clock=world.clock, signature=sig)


def world_signature(world: World) -> str:
    return snapshot(world).signature


def _signature(poses: dict[str, tuple[float, float, float]],
               configs: dict[str, tuple[float, float]], facts: Iterable[Fact]) -> str:
    hasher = hashlib.sha256()
    for oid in sorted(poses):
        x, y, yaw = poses[oid]
        hasher.update(f"{oid}:{round(x, 9)}:{round(y, 9)}:{round(yaw, 9)};".encode())
    for aid in sorted(configs):
        x, y = configs[aid]
        hasher.update(f"{aid}@{round(x, 9)}:{round(y, 9)};".encode())
    for fact in sorted(facts):
        hasher.update(fact.text().encode())
        hasher.update(b"|")
    return hasher.hexdigest()


# ---------------------------------------------------------------- planning


@dataclass(frozen=True)
class _Leg:
    start: tuple[float, float]
    goal: tuple[float, float]
    carry: str | None  # object carried along this leg


def _legs_for(world: World, q: MotionQuery) -> list[_Leg]:
    if q.motion_class is MotionClass.TRANSIT:
        return [_Leg(q.start, q.goal_point, None)]
    if q.verb == "grasp":
        grasp = _grasp_point(world, q.manipulated)
        return [_Leg(q.start, grasp, None)]
    if q.verb == "put":
        return [_Leg(q.start, q.goal_point, q.manipulated)]
    grasp = _grasp_point(world, q.manipulated)
    return [_Leg(q.start, grasp, None), _Leg(grasp, q.goal_point, q.manipulated)]


def _grasp_point(world: World, obj_id: str) -> tuple[float, float]:
    obj = world.objects[obj_id]
    return (obj.x, obj.y)


def _obstacles_for(world: World, agent: Agent, exclude: set[str],
                   ghost: bool) -> list[Obj]:
    """Objects the moving body must avoid.

    Held objects travel with their arm and never count; for the base only
    floor-level (unstacked) objects matter; `ghost` drops every movable
    for the obstruction diagnosis.
    """
    holders = held_by(world)
    out = []
    for oid in sorted(world.objects):
        obj = world.objects[oid]
        if oid in exclude or oid in holders:
            continue
        if ghost and obj.movable:
            continue
        if agent.kind == "base":
            if obj.blocks not in ("all", "base") or obj.stack_on is not None:
                continue
        else:
            if obj.blocks not in ("all", "arm"):
                continue
        out.append(obj)
    return out


def _body_radius(world: World, agent: Agent, carry: str | None) -> float:
    if agent.kind == "base":
        return agent.radius
    radius = ARM_POINT_RADIUS
    if carry is not None:
        radius += world.objects[carry].carry_extent()
    return radius


class _Grid:
    """Occupancy raster over the agent's admissible region."""

    def __init__(self, world: World, agent: Agent, obstacles: list[Obj], inflation: float):
        res = world.resolution
        x0, y0, x1, y1 = world.bounds
        self.res = res
        self.ix0 = math.ceil(round(x0 / res, 9))
        self.iy0 = math.ceil(round(y0 / res, 9))
        ix1 = math.floor(round(x1 / res, 9))
        iy1 = math.floor(round(y1 / res, 9))
        self.nx = max(ix1 - self.ix0 + 1, 0)
        self.ny = max(iy1 - self.iy0 + 1, 0)
        xs = (np.arange(self.nx) + self.ix0) * res
        ys = (np.arange(self.ny) + self.iy0) * res
        self.X, self.Y = np.meshgrid(xs, ys, indexing="ij")
        blocked = np.zeros((self.nx, self.ny), dtype=bool)
        if agent.kind == "arm":
            dist2 = (self.X - agent.anchor[0]) ** 2 + (self.Y - agent.anchor[1]) ** 2
            blocked |= dist2 > agent.reach ** 2
        for obj in obstacles:
            if obj.shape == "circle":
                r = obj.dims[0] + inflation
                blocked |= (self.X - obj.x) ** 2 + (self.Y - obj.y) ** 2 <= r * r
            else:
                hw = obj.dims[0] / 2.0 + inflation
                hh = obj.dims[1] / 2.0 + inflation
                blocked |= (np.abs(self.X - obj.x) <= hw) & (np.abs(self.Y - obj.y) <= hh)
        self.blocked = blocked

    def cell(self, point: tuple[float, float]) -> tuple[int, int]:
        return (round(point[0] / self.res) - self.ix0,
                round(point[1] / self.res) - self.iy0)

    def in_range(self, c: tuple[int, int]) -> bool:
        return 0 <= c[0] < self.nx and 0 <= c[1] < self.ny

    def free(self, c: tuple[int, int]) -> bool:
        return self.in_range(c) and not self.blocked[c[0], c[1]]

    def center(self, c: tuple[int, int]) -> tuple[float, float]:
        return ((c[0] + self.ix0) * self.res, (c[1] + self.iy0) * self.res)


_NEIGHBORS = ((1, 0, 5), (1, 1, 7), (0, 1, 5), (-1, 1, 7),
              (-1, 0, 5), (-1, -1, 7), (0, -1, 5), (1, -1, 7))


def _astar(grid: _Grid, start: tuple[int, int], goal: tuple[int, int],
           budget: int) -> tuple[list[tuple[int, int]] | None, int]:
    """Deterministic 8-connected A*; integer costs 5/7 avoid float ties."""

    def heuristic(c):
        dx = abs(c[0] - goal[0])
        dy = abs(c[1] - goal[1])
        return 5 * (dx + dy) - 3 * min(dx, dy)

    open_heap = [(heuristic(start), 0, start)]
    g_score = {start: 0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    pops = 0
    while open_heap and pops < budget:
        f, g, cell = heapq.heappop(open_heap)
        if cell in closed:
            continue
        closed.add(cell)
        pops += 1
        if cell == goal:
            path = [cell]
            while cell in came:
                cell = came[cell]
                path.append(cell)
            path.reverse()
            return path, pops
        for dx, dy, step in _NEIGHBORS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if nxt in closed or not grid.free(nxt):
                continue
            tentative = g + step
            if tentative < g_score.get(nxt, 1 << 60):
                g_score[nxt] = tentative
                came[nxt] = cell
                heapq.heappush(open_heap, (tentative + heuristic(nxt), tentative, nxt))
    return None, pops


def plan_motion(world: World, q: MotionQuery) -> MotionResult:
    """Plan one query; transfers plan both legs before reporting success.

    Infeasible results carry the obstruction diagnosis: movable objects
    crossing the path a movable-free world would allow, in path order.
    An empty list means not even that world admits a path (out of reach
    or statically sealed).
    """
    t0 = time.perf_counter()
    world.counters.plan_calls += 1
    sig = world_signature(world)
    agent = world.agents.get(q.agent)
    if agent is None:
        raise UnknownEntity(f"agent {q.agent!r} not in world")

    def done(feasible, path, expansions, obstructors, detail):
        return MotionResult(feasible, tuple(path), expansions, tuple(obstructors),
                            q.goal_point, sig, detail, time.perf_counter() - t0)

    if agent.kind == "arm":
        if _out_of_reach(agent, q.goal_point):
            return done(False, (), 0, (), "goal out of reach")
        if q.manipulated is not None and q.verb in ("grasp", "transfer"):
            grasp = _grasp_point(world, q.manipulated)
            if _out_of_reach(agent, grasp):
                return done(False, (), 0, (), "manipulated object out of reach")
            above = stack_chain_up(world, q.manipulated)
            if above:
                return done(False, (), 0, tuple(reversed(above)),
                            "manipulated object is not stack-top")

    legs = _legs_for(world, q)
    budget_left = q.max_expansions
    total_expansions = 0
    full_path: list[tuple[float, float]] = []
    for index, leg in enumerate(legs):
        path, expansions, obstructors, detail = _plan_leg(world, agent, q, leg, budget_left)
        total_expansions += expansions
        budget_left = max(budget_left - expansions, 1)
        if path is None:
            return done(False, (), total_expansions, obstructors, f"leg {index}: {detail}")
        if full_path:
            full_path.extend(path[1:])
        else:
            full_path.extend(path)
    return done(True, full_path, total_expansions, (), "")


def _out_of_reach(agent: Agent, point: tuple[float, float]) -> bool:
    return math.hypot(point[0] - agent.anchor[0],
                      point[1] - agent.anchor[1]) > agent.reach + 1e-9


def _engaged(world: World, point: tuple[float, float], inflation: float) -> set[str]:
    """Objects whose inflated footprint already contains the point."""
    out = set()
    for oid, obj in world.objects.items():
        if obj.shape == "circle":
            if math.hypot(point[0] - obj.x, point[1] - obj.y) <= obj.dims[0] + inflation:
                out.add(oid)
        else:
            if (abs(point[0] - obj.x) <= obj.dims[0] / 2.0 + inflation
                    and abs(point[1] - obj.y) <= obj.dims[1] / 2.0 + inflation):
                out.add(oid)
    return out


def _plan_leg(world: World, agent: Agent, q: MotionQuery, leg: _Leg, budget: int):
    """One grid search. Returns (path | None, expansions, obstructors, detail)."""
    inflation = world.clearance + _body_radius(world, agent, leg.carry)
    exclude: set[str] = set()
    if q.manipulated is not None:
        exclude.add(q.manipulated)
        exclude.update(stack_chain_down(world, q.manipulated))
    if q.dest is not None and q.dest in world.objects:
        exclude.add(q.dest)
        exclude.update(stack_chain_up(world, q.dest))
    # Engagement tolerance: bodies begin flush against whatever they just
    # touched; those footprints cannot invalidate the start.
    exclude.update(_engaged(world, leg.start, inflation))

    obstacles = _obstacles_for(world, agent, exclude, ghost=False)
    grid = _Grid(world, agent, obstacles, inflation)
    start_cell = grid.cell(leg.start)
    goal_cell = grid.cell(leg.goal)
    if not grid.in_range(start_cell) or not grid.free(start_cell):
        raise InvalidQuery(
            f"agent {agent.id}: start {leg.start} in collision or outside region")
    if not grid.free(goal_cell):
        obstructors = _diagnose(world, agent, q, leg, exclude, inflation, budget)
        return None, 0, obstructors, "goal cell blocked"
    cells, expansions = _astar(grid, start_cell, goal_cell, budget)
    if cells is None:
        obstructors = _diagnose(world, agent, q, leg, exclude, inflation, budget)
        return None, expansions, obstructors, "no path within budget"
    points = [grid.center(c) for c in cells]
    points[0] = leg.start
    points[-1] = leg.goal
    return points, expansions, (), ""


def _diagnose(world: World, agent: Agent, q: MotionQuery, leg: _Leg,
              exclude: set[str], inflation: float, budget: int) -> tuple[str, ...]:
    ghost_obstacles = _obstacles_for(world, agent, exclude, ghost=True)
    grid = _Grid(world, agent, ghost_obstacles, inflation)
    start_cell = grid.cell(leg.start)
    goal_cell = grid.cell(leg.goal)
    if not grid.free(start_cell) or not grid.free(goal_cell):
        return ()
    cells, _ = _astar(grid, start_cell, goal_cell, max(budget, DEFAULT_MAX_EXPANSIONS))
    if cells is None:
        return ()
    holders = held_by(world)
    movables = [obj for oid, obj in sorted(world.objects.items())
                if obj.movable and oid not in exclude and oid not in holders]
    first_hit: dict[str, int] = {}
    for idx, cell in enumerate(cells):
        px, py = grid.center(cell)
        for obj in movables:
            if obj.id in first_hit:
                continue
            if obj.shape == "circle":
                hit = math.hypot(px - obj.x, py - obj.y) <= obj.dims[0] + inflation
            else:
                hit = (abs(px - obj.x) <= obj.dims[0] / 2.0 + inflation
                       and abs(py - obj.y) <= obj.dims[1] / 2.0 + inflation)
            if hit:
                first_hit[obj.id] = idx
    return tuple(sorted(first_hit, key=lambda oid: (first_hit[oid], oid)))


def obstructors(world: World, q: MotionQuery) -> list[str]:
    """Movable objects blocking the query, in the order the path meets them."""
    result = plan_motion(world, q)
    world.counters.plan_calls -= 1  # diagnostic probe, not a dispatch attempt
    if result.feasible:
        return []
    return list(result.obstructors)


# ---------------------------------------------------------------- execution


def _resolve_support(world: World, dest: str | None) -> str | None:
    if dest is None or dest not in world.objects:
        return None
    return stack_top(world, dest)


def execute(world: World, agent_id: str, result: MotionResult,
            action: ActionTemplate) -> World:
    """Apply a planned motion (or a symbolic action) to a copy of the world.

    Raises StaleResult when the world signature no longer matches the one
    the plan was computed against. Never creates or destroys objects.
    """
    if result is not None and result.world_sig != world_signature(world):
        raise StaleResult(f"world moved since planning {action.name}")
    objects = dict(world.objects)
    agents = dict(world.agents)
    facts = set(world.facts)
    clock = world.clock

    if action.motion_class in (MotionClass.SYMBOLIC, MotionClass.WAIT):
        clock += action.duration
    else:
        agent = agents[agent_id]
        path_len = _path_length(result.path)
        clock += path_len / MOVE_SPEED
        end = result.path[-1] if result.path else agent.config
        if action.motion_class is MotionClass.TRANSIT:
            delta = (end[0] - agent.config[0], end[1] - agent.config[1])
            agents[agent_id] = replace(agent, anchor=end, config=end)
            for aid, other in list(agents.items()):
                if other.mount == agent_id:
                    # Arms stow over their mount point while the base
                    # drives, so every later leg starts from the mount.
                    new_anchor = (other.anchor[0] + delta[0], other.anchor[1] + delta[1])
                    agents[aid] = replace(other, anchor=new_anchor, config=new_anchor)
                    if other.holding is not None:
                        held = objects[other.holding]
                        objects[other.holding] = replace(
                            held, x=new_anchor[0], y=new_anchor[1])
        elif action.verb == "grasp":
            obj = objects[action.manipulated]
            agents[agent_id] = replace(agent, config=end, holding=action.manipulated)
            objects[action.manipulated] = replace(obj, x=end[0], y=end[1], stack_on=None)
        elif action.verb == "put":
            if agent.holding != action.manipulated:
                raise InvalidQuery(
                    f"agent {agent_id} does not hold {action.manipulated}")
            support = _resolve_support(world, action.dest)
            obj = objects[action.manipulated]
            goal = result.goal_point
            agents[agent_id] = replace(agent, config=end, holding=None)
            objects[action.manipulated] = replace(obj, x=goal[0], y=goal[1],
                                                  stack_on=support)
        else:  # fused transfer
            support = _resolve_support(world, action.dest)
            obj = objects[action.manipulated]
            goal = result.goal_point
            agents[agent_id] = replace(agent, config=end, holding=None)
            objects[action.manipulated] = replace(obj, x=goal[0], y=goal[1],
                                                  stack_on=support)

    for fact in action.effects_del:
        if fact.predicate not in DERIVED_PREDICATES:
            facts.discard(fact)
    for fact in action.effects_add:
        if fact.predicate not in DERIVED_PREDICATES:
            facts.add(fact)

    return World(bounds=world.bounds, objects=objects, agents=agents,
                 markers=world.markers, facts=frozenset(facts), clock=clock,
                 rng_seed=world.rng_seed, resolution=world.resolution,
                 clearance=world.clearance, counters=world.counters)


def _path_length(path: tuple[tuple[float, float], ...]) -> float:
    total = 0.0
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        total += math.hypot(x1 - x0, y1 - y0)
    return total
