"""Network of task graphs that grows while the task is being solved.

One graph describes one decision stage. The first graph is instantiated
from the scenario's main template; every executed step, every geometric
dead end, and every exhausted frontier appends a further graph instead of
mutating an existing one. The network therefore records the full history
of the run, and its length is the reported search depth.

Candidates are drawn from the newest graph only. A node is a candidate
when it is not yet achieved, at least one of its incoming arcs has all
children achieved, the arc's actions are symbolically applicable, and the
combination has not been suppressed in the current world. Selection
prefers arcs on the minimal-cost solution of the graph; when the root is
currently unsolvable it falls back to the cheapest applicable arc with
the lowest arc id.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

from .andor import (
    INF,
    AndOrGraph,
    ArcDecl,
    AugmentedGraph,
    GraphTemplate,
    HyperArc,
    NodeDecl,
    NodeKind,
    augment,
    build_graph,
    node_cost,
    set_leaf_truth,
    solution_subgraph,
    solved,
)
from .domain import ActionTemplate, Fact, chain_applicable


class NetworkError(Exception):
    pass


class DepthLimitExceeded(NetworkError):
    """The network was asked to grow beyond its configured depth cap."""

    def __init__(self, depth: int, cap: int):
        self.depth = depth
        self.cap = cap
        super().__init__(f"network depth {depth} exceeds cap {cap}")


class ExpansionCycle(NetworkError):
    """The same expansion was requested twice with nothing changed."""


class UnknownStage(NetworkError):
    pass


class ExpandReason(Enum):
    STAGE_COMPLETE = "stage_complete"
    MOTION_FAILURE = "motion_failure"
    NO_FEASIBLE_STATE = "no_feasible_state"


OBSTRUCTION_PREDICATE = "obstructs"


@dataclass
class GraphEntry:
    graph: AndOrGraph
    augmented: AugmentedGraph
    kind: str  # "main" | "rearrangement"
    achieved: set[int] = field(default_factory=set)


@dataclass(frozen=True)
class Candidate:
    """One executable option: achieve `node_id` through `arc`."""

    graph_index: int
    node_id: int
    label: str
    arc: HyperArc
    actions: tuple[ActionTemplate, ...]

    def key(self) -> tuple[str, tuple[str, ...]]:
        return (self.label, tuple(a.name for a in self.actions))


def _leaf_truths(graph: AndOrGraph, facts: frozenset[Fact]) -> dict[int, bool]:
    truths = {}
    for leaf in graph.leaves():
        try:
            fact = Fact.parse(leaf.label)
        except ValueError:
            truths[leaf.id] = False
            continue
        truths[leaf.id] = fact in facts
    return truths


class GraphNetwork:
    def __init__(self, main_template: GraphTemplate,
                 stage_templates: dict[str, GraphTemplate],
                 actions: dict[str, ActionTemplate],
                 depth_cap: int = 512):
        self.main_template = main_template
        self.stage_templates = dict(stage_templates)
        self.actions = dict(actions)
        self.depth_cap = depth_cap
        self.entries: list[GraphEntry] = []
        self.knowledge: set[Fact] = set()
        self.suppressed: set[tuple[str, tuple[str, ...], str]] = set()
        self._expansion_seen: set[tuple] = set()

    # -- structure ---------------------------------------------------------

    @property
    def depth(self) -> int:
        return len(self.entries)

    @property
    def latest(self) -> GraphEntry:
        return self.entries[-1]

    def bootstrap(self, facts: frozenset[Fact]) -> GraphEntry:
        if self.entries:
            raise NetworkError("network already bootstrapped")
        return self._instantiate(self.main_template, "main", facts)

    def _instantiate(self, template: GraphTemplate, kind: str,
                     facts: frozenset[Fact]) -> GraphEntry:
        graph = build_graph(template)
        set_leaf_truth(graph, _leaf_truths(graph, facts | self.knowledge))
        achieved = {leaf.id for leaf in graph.leaves() if leaf.truth}
        entry = GraphEntry(graph, augment(graph), kind, achieved)
        self.entries.append(entry)
        return entry

    # -- candidate enumeration and selection --------------------------------

    def frontier(self, facts: frozenset[Fact], world_sig: str) -> list[Candidate]:
        """Executable candidates of the newest graph, in arc-id order."""
        if not self.entries:
            raise NetworkError("network not bootstrapped")
        entry = self.latest
        graph = entry.graph
        index = len(self.entries) - 1
        out = []
        for nid in sorted(graph.nodes):
            node = graph.nodes[nid]
            if nid in entry.achieved or node.kind in (NodeKind.FAILURE, NodeKind.VIRTUAL,
                                                      NodeKind.LEAF):
                continue
            for arc in graph.arcs_into(nid):
                if not set(arc.children) <= entry.achieved:
                    continue
                actions = tuple(self.actions[name] for name in arc.actions)
                candidate = Candidate(index, nid, node.label, arc, actions)
                label, names = candidate.key()
                if (label, names, world_sig) in self.suppressed:
                    continue
                if not chain_applicable(facts, actions):
                    continue
                out.append(candidate)
        return out

    def select(self, facts: frozenset[Fact], world_sig: str) -> Candidate | None:
        """Pick the next candidate to execute, or None when none remain."""
        candidates = self.frontier(facts, world_sig)
        if not candidates:
            return None
        graph = self.latest.graph
        if solved(graph, graph.root):
            chosen = solution_subgraph(graph)
            on_solution = [c for c in candidates
                           if chosen.get(c.node_id) is not None
                           and chosen[c.node_id].id == c.arc.id]
            if on_solution:
                candidates = on_solution

        def sort_key(c: Candidate):
            est = c.arc.weight + sum(
                (node_cost(graph, child) for child in c.arc.children),
                Fraction(0))
            return (est == INF, est if est != INF else Fraction(0), c.arc.id, c.node_id)

        return min(candidates, key=sort_key)

    def mark_executed(self, candidate: Candidate):
        self.entries[candidate.graph_index].achieved.add(candidate.node_id)

    def suppress(self, candidate: Candidate, world_sig: str):
        label, names = candidate.key()
        self.suppressed.add((label, names, world_sig))

    # -- expansion -----------------------------------------------------------

    def expand(self, reason: ExpandReason, facts: frozenset[Fact],
               obstructor_ids: tuple[str, ...] = ()) -> GraphEntry:
        """Append the next graph; how it is built depends on the reason.

        Stage completion and an exhausted frontier re-instantiate the main
        template against the current facts. A geometric dead end composes
        the relocation stages of the reported obstructors into one graph
        and records what obstructs what as network knowledge.
        """
        if len(self.entries) > self.depth_cap:
            raise DepthLimitExceeded(len(self.entries), self.depth_cap)
        if reason is ExpandReason.MOTION_FAILURE:
            return self._expand_rearrangement(facts, obstructor_ids)
        if reason is ExpandReason.NO_FEASIBLE_STATE:
            signature = self._expansion_signature(facts)
            if signature in self._expansion_seen:
                raise ExpansionCycle(
                    "frontier exhausted twice with identical state and knowledge")
            self._expansion_seen.add(signature)
        return self._instantiate(self.main_template, "main", facts)

    def _expansion_signature(self, facts: frozenset[Fact]) -> tuple:
        return ("main", tuple(sorted(f.text() for f in facts)),
                tuple(sorted(self.suppressed)), tuple(sorted(
                    f.text() for f in self.knowledge)))

    def _expand_rearrangement(self, facts: frozenset[Fact],
                              obstructor_ids: tuple[str, ...]) -> GraphEntry:
        stages = [(oid, self.stage_templates[f"clear_{oid}"])
                  for oid in obstructor_ids if f"clear_{oid}" in self.stage_templates]
        if not stages:
            raise UnknownStage(
                "no relocation stage for any of: " + ", ".join(obstructor_ids))
        for oid, _ in stages:
            self.knowledge.add(Fact(OBSTRUCTION_PREDICATE, (oid,)))
        template = compose_rearrangement(stages)
        return self._instantiate(template, "rearrangement", facts)


def compose_rearrangement(stages: list[tuple[str, GraphTemplate]]) -> GraphTemplate:
    """Merge per-obstructor stage templates under one fresh root.

    Every stage keeps its internal structure; its root is demoted to an
    internal node and gains one extra child: a knowledge leaf stating the
    obstruction it answers. The composite root requires all stage roots
    at once, mirroring that feasibility returns only when every reported
    obstruction is gone.
    """
    nodes = [NodeDecl(1, NodeKind.ROOT, "obstructions cleared"),
             NodeDecl(2, NodeKind.FAILURE, "rearrangement impossible")]
    arcs: list[ArcDecl] = []
    ids = itertools.count(3)
    arc_ids = itertools.count(2)
    stage_roots = []
    for oid, template in stages:
        remap: dict[int, int] = {}
        for decl in sorted(template.nodes, key=lambda d: d.id):
            if decl.id == template.failure:
                remap[decl.id] = 2
                continue
            new_id = next(ids)
            remap[decl.id] = new_id
            kind = NodeKind.INTERNAL if decl.id == template.root else decl.kind
            nodes.append(NodeDecl(new_id, kind, decl.label))
        knowledge_leaf = next(ids)
        nodes.append(NodeDecl(knowledge_leaf, NodeKind.LEAF,
                              Fact(OBSTRUCTION_PREDICATE, (oid,)).text()))
        for arc in sorted(template.arcs, key=lambda a: a.id):
            children = tuple(remap[c] for c in arc.children)
            if arc.parent == template.root:
                children = children + (knowledge_leaf,)
            arcs.append(ArcDecl(next(arc_ids), remap[arc.parent], children,
                                arc.weight, arc.actions))
        stage_roots.append(remap[template.root])
    arcs.insert(0, ArcDecl(1, 1, tuple(stage_roots), Fraction(0), ()))
    return GraphTemplate(tuple(nodes), tuple(arcs), 1, 2)


def network_depth(network: GraphNetwork) -> int:
    return network.depth
