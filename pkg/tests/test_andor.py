"""AND/OR graph core: validation, truth, costs, augmentation, DOT."""

import math
import random
from fractions import Fraction

import pytest

from taskmotion.andor import (
    AlreadyAugmented,
    AndOrGraph,
    ArcDecl,
    CycleDetected,
    DanglingReference,
    DuplicateNodeId,
    GraphTemplate,
    HyperArc,
    InvalidArc,
    MissingFailure,
    MissingRoot,
    Node,
    NodeDecl,
    NodeKind,
    NotALeaf,
    UnknownNode,
    UnreachableRoot,
    augment,
    best_arc,
    build_graph,
    node_cost,
    set_leaf_truth,
    solution_subgraph,
    solved,
    to_dot,
)

INF = math.inf


def minimal_template(weight=Fraction(1)):
    """Root fed by two leaves through one arc, plus the failure node."""
    return GraphTemplate(
        nodes=(
            NodeDecl(0, NodeKind.ROOT, "goal"),
            NodeDecl(1, NodeKind.LEAF, "left fact"),
            NodeDecl(2, NodeKind.LEAF, "right fact"),
            NodeDecl(3, NodeKind.FAILURE, "failure"),
        ),
        arcs=(ArcDecl(0, 0, (1, 2), weight),),
        root=0,
        failure=3,
    )


def enumerate_solutions(graph, node_id):
    """Oracle: every solution tree cost for a node, by explicit enumeration.

    Independent of the implementation's bottom-up recursion: builds the
    full set of derivation trees and sums their arc weights, counting
    shared subtrees once per use.
    """
    node = graph.nodes[node_id]
    if node.kind is NodeKind.LEAF:
        return [Fraction(0)] if node.truth else []
    if node.kind in (NodeKind.FAILURE, NodeKind.VIRTUAL):
        return []
    costs = []
    for arc in graph.arcs_into(node_id):
        child_options = [enumerate_solutions(graph, c) for c in arc.children]
        if any(not opts for opts in child_options):
            continue
        totals = [arc.weight]
        for opts in child_options:
            totals = [t + o for t in totals for o in opts]
        costs.extend(totals)
    return costs


def oracle_cost(graph, node_id):
    costs = enumerate_solutions(graph, node_id)
    return min(costs) if costs else INF


def random_template(rng, max_nodes=12, max_arcs=8):
    """Random DAG template: layered construction keeps it acyclic."""
    n_nodes = rng.randint(4, max_nodes)
    n_leaves = rng.randint(1, max(1, n_nodes - 3))
    decls = [NodeDecl(0, NodeKind.ROOT, "root"), NodeDecl(1, NodeKind.FAILURE, "failure")]
    leaf_ids = list(range(2, 2 + n_leaves))
    for lid in leaf_ids:
        decls.append(NodeDecl(lid, NodeKind.LEAF, f"leaf {lid}"))
    internal_ids = list(range(2 + n_leaves, n_nodes))
    for iid in internal_ids:
        decls.append(NodeDecl(iid, NodeKind.INTERNAL, f"node {iid}"))
    # Parents may only take children from strictly lower layers: leaves,
    # then internals in id order, then the root on top.
    below: dict[int, list[int]] = {}
    pool = list(leaf_ids)
    for iid in internal_ids:
        below[iid] = list(pool)
        pool.append(iid)
    below[0] = list(pool)
    arcs = []
    arc_id = 0
    parents = internal_ids + [0]
    # Make sure the root can see a leaf so validation passes.
    first_children = tuple(rng.sample(leaf_ids, min(len(leaf_ids), rng.randint(1, 2))))
    arcs.append(ArcDecl(arc_id, 0, first_children, Fraction(rng.randint(0, 100), 10)))
    arc_id += 1
    while arc_id < rng.randint(2, max_arcs) and parents:
        parent = rng.choice(parents)
        options = below[parent]
        children = tuple(rng.sample(options, rng.randint(1, min(3, len(options)))))
        arcs.append(ArcDecl(arc_id, parent, children, Fraction(rng.randint(0, 100), 10)))
        arc_id += 1
    return GraphTemplate(tuple(decls), tuple(arcs), 0, 1)


def test_minimal_graph_builds_and_solves():
    graph = build_graph(minimal_template())
    assert not solved(graph, 0)
    assert node_cost(graph, 0) == INF
    set_leaf_truth(graph, {1: True, 2: True})
    assert solved(graph, 0)
    assert node_cost(graph, 0) == Fraction(1)


def test_and_semantics_one_false_leaf_blocks_root():
    graph = build_graph(minimal_template())
    set_leaf_truth(graph, {1: True, 2: False})
    assert not solved(graph, 0)
    assert node_cost(graph, 0) == INF


def test_or_choice_takes_cheaper_arc():
    template = GraphTemplate(
        nodes=(
            NodeDecl(0, NodeKind.ROOT, "goal"),
            NodeDecl(1, NodeKind.LEAF, "a"),
            NodeDecl(2, NodeKind.LEAF, "b"),
            NodeDecl(3, NodeKind.FAILURE, "failure"),
        ),
        arcs=(
            ArcDecl(0, 0, (1,), Fraction(5)),
            ArcDecl(1, 0, (2,), Fraction(2)),
        ),
        root=0,
        failure=3,
    )
    graph = build_graph(template)
    set_leaf_truth(graph, {1: True, 2: True})
    assert node_cost(graph, 0) == Fraction(2)
    assert best_arc(graph, 0).id == 1
    set_leaf_truth(graph, {2: False})
    assert node_cost(graph, 0) == Fraction(5)
    assert best_arc(graph, 0).id == 0


def test_cost_tie_breaks_to_lowest_arc_id():
    template = GraphTemplate(
        nodes=(
            NodeDecl(0, NodeKind.ROOT, "goal"),
            NodeDecl(1, NodeKind.LEAF, "a"),
            NodeDecl(2, NodeKind.LEAF, "b"),
            NodeDecl(3, NodeKind.FAILURE, "failure"),
        ),
        arcs=(
            ArcDecl(4, 0, (1,), Fraction(3)),
            ArcDecl(7, 0, (2,), Fraction(3)),
        ),
        root=0,
        failure=3,
    )
    graph = build_graph(template)
    set_leaf_truth(graph, {1: True, 2: True})
    assert best_arc(graph, 0).id == 4


def test_failure_node_never_solved_and_infinite():
    graph = build_graph(minimal_template())
    set_leaf_truth(graph, {1: True, 2: True})
    assert not solved(graph, 3)
    assert node_cost(graph, 3) == INF


def test_duplicate_node_id_rejected():
    template = minimal_template()
    bad = GraphTemplate(template.nodes + (NodeDecl(1, NodeKind.LEAF, "dup"),),
                        template.arcs, 0, 3)
    with pytest.raises(DuplicateNodeId) as err:
        build_graph(bad)
    assert err.value.element == 1


def test_dangling_child_reference_rejected():
    template = minimal_template()
    bad = GraphTemplate(template.nodes, template.arcs + (ArcDecl(1, 0, (99,)),), 0, 3)
    with pytest.raises(DanglingReference):
        build_graph(bad)


def test_cycle_detected():
    template = GraphTemplate(
        nodes=(
            NodeDecl(0, NodeKind.ROOT, "goal"),
            NodeDecl(1, NodeKind.INTERNAL, "x"),
            NodeDecl(2, NodeKind.INTERNAL, "y"),
            NodeDecl(3, NodeKind.LEAF, "leaf"),
            NodeDecl(4, NodeKind.FAILURE, "failure"),
        ),
        arcs=(
            ArcDecl(0, 0, (1, 3)),
            ArcDecl(1, 1, (2,)),
            ArcDecl(2, 2, (1,)),
        ),
        root=0,
        failure=4,
    )
    with pytest.raises(CycleDetected):
        build_graph(template)


def test_missing_root_and_failure_rejected():
    nodes = (
        NodeDecl(0, NodeKind.INTERNAL, "not root"),
        NodeDecl(1, NodeKind.LEAF, "leaf"),
        NodeDecl(2, NodeKind.FAILURE, "failure"),
    )
    with pytest.raises(MissingRoot):
        build_graph(GraphTemplate(nodes, (ArcDecl(0, 0, (1,)),), 0, 2))
    nodes2 = (
        NodeDecl(0, NodeKind.ROOT, "root"),
        NodeDecl(1, NodeKind.LEAF, "leaf"),
    )
    with pytest.raises(MissingFailure):
        build_graph(GraphTemplate(nodes2, (ArcDecl(0, 0, (1,)),), 0, 9))


def test_arc_into_leaf_rejected():
    template = minimal_template()
    bad = GraphTemplate(template.nodes, template.arcs + (ArcDecl(1, 1, (2,)),), 0, 3)
    with pytest.raises(InvalidArc):
        build_graph(bad)


def test_root_unreachable_from_leaves_rejected():
    template = GraphTemplate(
        nodes=(
            NodeDecl(0, NodeKind.ROOT, "goal"),
            NodeDecl(1, NodeKind.INTERNAL, "island"),
            NodeDecl(2, NodeKind.LEAF, "leaf"),
            NodeDecl(3, NodeKind.FAILURE, "failure"),
        ),
        arcs=(
            ArcDecl(0, 0, (1,)),
            ArcDecl(1, 1, (3,)),
        ),
        root=0,
        failure=3,
    )
    with pytest.raises(UnreachableRoot):
        build_graph(template)


def test_set_leaf_truth_rejects_non_leaf_and_unknown():
    graph = build_graph(minimal_template())
    with pytest.raises(NotALeaf):
        set_leaf_truth(graph, {0: True})
    with pytest.raises(UnknownNode):
        set_leaf_truth(graph, {42: True})
    with pytest.raises(UnknownNode):
        solved(graph, 42)
    with pytest.raises(UnknownNode):
        node_cost(graph, 42)


def test_truth_flip_recomputes_as_if_fresh():
    graph = build_graph(minimal_template())
    set_leaf_truth(graph, {1: True, 2: True})
    assert solved(graph, 0)
    set_leaf_truth(graph, {2: False})
    assert not solved(graph, 0)
    set_leaf_truth(graph, {2: True})
    assert node_cost(graph, 0) == Fraction(1)


def test_augment_minimal_graph_adds_virtual_node_and_two_arcs():
    graph = build_graph(minimal_template())
    aug = augment(graph)
    assert aug.virtual_node.kind is NodeKind.VIRTUAL
    assert len(aug.virtual_arcs) == 2
    assert all(a.parent == aug.virtual_node.id for a in aug.virtual_arcs)
    children = sorted(c for a in aug.virtual_arcs for c in a.children)
    assert children == sorted([graph.failure, graph.root])
    # 4 base nodes plus the virtual one.
    assert len(graph.nodes) + 1 == 5
    # Base untouched.
    assert aug.virtual_node.id not in graph.nodes
    with pytest.raises(AlreadyAugmented):
        augment(aug)


def test_to_dot_deterministic_and_structurally_closed():
    graph = build_graph(minimal_template())
    set_leaf_truth(graph, {1: True})
    first = to_dot(augment(graph))
    second = to_dot(augment(graph))
    assert first == second
    declared = set()
    referenced = set()
    for line in first.splitlines():
        line = line.strip()
        if line.startswith(("n", "h")) and "[" in line and "->" not in line:
            declared.add(line.split(" ", 1)[0])
        if "->" in line:
            lhs, rhs = line.split("->")
            referenced.add(lhs.strip().split(" ")[0])
            referenced.add(rhs.strip().split(" ")[0].rstrip(";"))
    assert referenced <= declared


def test_oracle_equivalence_on_random_graphs():
    rng = random.Random(20260816)
    for _ in range(80):
        template = random_template(rng)
        graph = build_graph(template)
        truths = {n.id: rng.random() < 0.6 for n in graph.leaves()}
        set_leaf_truth(graph, truths)
        for nid in graph.nodes:
            costs = enumerate_solutions(graph, nid)
            assert solved(graph, nid) == bool(costs)
            expect = min(costs) if costs else INF
            assert node_cost(graph, nid) == expect


def test_solution_subgraph_nodes_lie_on_minimal_cost_tree():
    rng = random.Random(7)
    solvable_seen = 0
    for _ in range(120):
        template = random_template(rng)
        graph = build_graph(template)
        set_leaf_truth(graph, {n.id: rng.random() < 0.7 for n in graph.leaves()})
        chosen = solution_subgraph(graph)
        if not solved(graph, graph.root):
            assert chosen == {}
            continue
        solvable_seen += 1
        root_arc = chosen[graph.root]
        total = root_arc.weight + sum(node_cost(graph, c) for c in root_arc.children)
        assert total == node_cost(graph, graph.root)
        for nid, arc in chosen.items():
            assert arc.parent == nid
            here = arc.weight + sum(node_cost(graph, c) for c in arc.children)
            assert here == node_cost(graph, nid)
    assert solvable_seen > 10


def test_uniform_weight_scaling_preserves_choices():
    rng = random.Random(99)
    for _ in range(40):
        template = random_template(rng)
        graph = build_graph(template)
        truths = {n.id: rng.random() < 0.7 for n in graph.leaves()}
        set_leaf_truth(graph, truths)
        base_choice = {nid: arc.id for nid, arc in solution_subgraph(graph).items()}
        scaled = GraphTemplate(
            template.nodes,
            tuple(ArcDecl(a.id, a.parent, a.children, a.weight * 17, a.actions)
                  for a in template.arcs),
            template.root,
            template.failure,
        )
        graph2 = build_graph(scaled)
        set_leaf_truth(graph2, truths)
        scaled_choice = {nid: arc.id for nid, arc in solution_subgraph(graph2).items()}
        assert base_choice == scaled_choice
