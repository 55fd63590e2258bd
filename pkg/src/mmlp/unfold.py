"""Graph unfolding via non-backtracking walks and alternating trees.

A port-numbered algorithm cannot tell a cycle from an unrolled path, so its
effective input is the tree of non-backtracking walks from its own node,
truncated at the local horizon.  `unfold_to_depth` materializes that tree
with inherited node types, coefficients and ports.  `view_isomorphic`
decides whether two truncated views carry identical information (a
root-preserving tree isomorphism matching types, coefficients and the port
numbers at both ends of every edge), which is exactly the equivalence under
which deterministic port-numbered algorithms must agree.

`build_alternating_tree` carves out of the view the finite tree reachable
from an agent along walks that alternate between constraint and objective
nodes, the structure on which the per-agent utility bound is computed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .instance import (AGENT, CONSTRAINT, OBJECTIVE, Edge, Instance, MMLPError,
                       NodeRef, _renumber_all_ports)


class NormalizationError(MMLPError):
    """An operation required a normalized instance and got something else."""


@dataclass
class WalkNode:
    """One non-backtracking walk; `orig` is the walk's end node."""

    kind: str
    orig: int
    depth: int
    prev: int | None            # index of the one-step-shorter walk
    edge: tuple[str, int] | None  # instance edge appended last, None at root
    coef: float | None
    port_prev: int | None       # port of `edge` at the predecessor's end node
    port_self: int | None       # port of `edge` at `orig`
    children: list[int] = field(default_factory=list)


@dataclass
class LocalView:
    """Truncated unfolding rooted at one node of the instance."""

    instance: Instance
    root: NodeRef
    depth: int
    nodes: list[WalkNode]

    def dump(self) -> str:
        """Debug text: one walk-node per line (depth, tree parent, type, origin)."""
        lines = []
        for idx, w in enumerate(self.nodes):
            prev = "-" if w.prev is None else str(w.prev)
            lines.append(f"{w.depth}\t{prev}\t{w.kind}\t{w.orig}")
        return "\n".join(lines) + "\n"


def unfold_to_depth(inst: Instance, root: NodeRef, depth: int) -> LocalView:
    """All non-backtracking walks from `root` of length at most `depth`."""
    if depth < 0:
        raise MMLPError("depth must be >= 0")
    kind, idx = root
    limit = {AGENT: inst.n_agents, CONSTRAINT: inst.n_constraints,
             OBJECTIVE: inst.n_objectives}.get(kind)
    if limit is None or not (0 <= idx < limit):
        raise MMLPError(f"root {root} is not in the instance")

    nodes = [WalkNode(kind, idx, 0, None, None, None, None, None)]
    frontier = [0]
    for _ in range(depth):
        new_frontier: list[int] = []
        for wi in frontier:
            w = nodes[wi]
            for inc in inst.incident((w.kind, w.orig)):
                if inc.edge == w.edge:
                    continue  # walks may not backtrack over the arrival edge
                child = WalkNode(inc.other[0], inc.other[1], w.depth + 1, wi,
                                 inc.edge, inc.coef, inc.port_here, inc.port_other)
                ci = len(nodes)
                nodes.append(child)
                w.children.append(ci)
                new_frontier.append(ci)
        frontier = new_frontier
    return LocalView(inst, root, depth, nodes)


def canonical_form(view: LocalView, node: int = 0):
    """Nested-tuple form that two views share iff they are view-isomorphic.

    Children are already ordered by the port at their tree parent, which is
    unique per node, so no search is needed.
    """
    nodes = view.nodes

    def canon(wi: int):
        w = nodes[wi]
        return (w.kind, w.port_prev, w.port_self, w.coef,
                tuple(canon(c) for c in w.children))

    return canon(node)


def view_isomorphic(a: LocalView, b: LocalView) -> bool:
    """Root-preserving isomorphism matching types, coefficients and both ports."""
    return canonical_form(a) == canonical_form(b)


def reroot_canonical_form(view: LocalView, node: int, depth: int):
    """Canonical form of the unfolding re-rooted at a walk-node.

    Walking the view as an undirected tree from `node` out to `depth` yields
    the same tree as a fresh unfolding rooted at the walk's end node, which
    is the checkable content of "walks with the same end node look alike".
    Requires depth + view-depth-of-node <= view.depth so no edges are missing.
    """
    if view.nodes[node].depth + depth > view.depth:
        raise MMLPError("re-rooted depth exceeds the available view depth")
    nodes = view.nodes

    def neighbors(wi: int, skip: int | None):
        out = []
        w = nodes[wi]
        if w.prev is not None and w.prev != skip:
            # Seen from this node, the arrival edge leads back to the parent:
            # ports swap roles.
            out.append((w.port_self, w.port_prev, w.coef, nodes[w.prev].kind, w.prev))
        for c in w.children:
            if c == skip:
                continue
            cw = nodes[c]
            out.append((cw.port_prev, cw.port_self, cw.coef, cw.kind, c))
        return sorted(out, key=lambda t: t[0])

    def canon(wi: int, come_from: int | None, left: int):
        if left == 0:
            kids = ()
        else:
            kids = tuple((ph, po, coef, canon(other, wi, left - 1))
                         for ph, po, coef, kind, other in neighbors(wi, come_from))
        return (nodes[wi].kind, kids)

    return canon(node, None, depth)


# ---------------------------------------------------------------------------
# alternating trees


@dataclass
class TreeNode:
    kind: str
    orig: int
    level: int
    coef: float | None      # coefficient of the edge to the tree parent
    port_parent: int | None  # port of that edge at the parent's end node
    port_self: int | None
    parent: int | None
    children: list[int] = field(default_factory=list)


@dataclass
class AlternatingTree:
    """Finite tree around one agent, with per-node levels.

    The root agent sits at level -1 and its constraints at level -2; the
    root's objective is at level 0 and levels grow away from it, so
    objectives sit at levels 0 mod 4, agents at 1 or 3 mod 4 and constraints
    at 2 mod 4, with constraint leaves at levels -2 and 4r+2.
    """

    r: int
    nodes: list[TreeNode]
    agents_by_level: dict[int, list[int]]

    @property
    def root(self) -> int:
        return 0

    def agent_constraint_children(self, ti: int) -> list[int]:
        return [c for c in self.nodes[ti].children if self.nodes[c].kind == CONSTRAINT]

    def dump(self) -> str:
        lines = []
        for idx, t in enumerate(self.nodes):
            parent = "-" if t.parent is None else str(t.parent)
            lines.append(f"{t.level}\t{parent}\t{t.kind}\t{t.orig}")
        return "\n".join(lines) + "\n"


def _check_local_shape(inst: Instance, w, what: str) -> None:
    if w.kind == AGENT:
        if len(inst.agent_objectives[w.orig]) != 1:
            raise NormalizationError(
                f"{what}: agent {w.orig} is adjacent to "
                f"{len(inst.agent_objectives[w.orig])} objectives, expected exactly 1")
        if not inst.agent_constraints[w.orig]:
            raise NormalizationError(f"{what}: agent {w.orig} has no constraints")
    elif w.kind == CONSTRAINT:
        if len(inst.constraint_agents[w.orig]) > 2:
            raise NormalizationError(
                f"{what}: constraint {w.orig} has more than two agents")
    else:
        if len(inst.objective_agents[w.orig]) < 2:
            raise NormalizationError(
                f"{what}: objective {w.orig} has fewer than two agents")
        for e in inst.objective_agents[w.orig]:
            if e.coef != 1.0:
                raise NormalizationError(
                    f"{what}: objective coefficient c != 1 at objective {w.orig}")


def build_alternating_tree(view: LocalView, r: int) -> AlternatingTree:
    """The finite tree of alternating walks around the view's root agent.

    The view must be rooted at an agent of a normalized instance and reach
    depth at least 4r+3.  Nodes kept: the root (level -1), its constraints
    (level -2, leaves), and inside the subtree hanging off the root's unique
    objective every walk whose non-agent nodes alternate between objectives
    and constraints, truncated at level 4r+2.  Equivalently: below an agent
    at level 3 mod 4 only the objective child survives, everything else is
    kept wholesale.
    """
    if view.root[0] != AGENT:
        raise NormalizationError("alternating tree must be rooted at an agent")
    if r < 0:
        raise MMLPError("r must be >= 0")
    if view.depth < 4 * r + 3:
        raise MMLPError(f"view depth {view.depth} < 4r+3 = {4 * r + 3}")

    inst = view.instance
    nodes: list[TreeNode] = []
    agents_by_level: dict[int, list[int]] = {}

    def add(w: WalkNode, level: int, parent: int | None) -> int:
        _check_local_shape(inst, w, "alternating tree")
        ti = len(nodes)
        nodes.append(TreeNode(w.kind, w.orig, level, w.coef, w.port_prev,
                              w.port_self, parent))
        if parent is not None:
            nodes[parent].children.append(ti)
        if w.kind == AGENT:
            agents_by_level.setdefault(level, []).append(ti)
        return ti

    root_w = view.nodes[0]
    root_t = add(root_w, -1, None)
    obj_child = None
    for ci in root_w.children:
        cw = view.nodes[ci]
        if cw.kind == CONSTRAINT:
            add(cw, -2, root_t)
        else:
            if obj_child is not None:
                raise NormalizationError(
                    f"alternating tree: agent {root_w.orig} has several objectives")
            obj_child = ci
    if obj_child is None:
        raise NormalizationError(
            f"alternating tree: agent {root_w.orig} has no objective")

    max_level = 4 * r + 2
    stack = [(obj_child, 0, root_t)]
    while stack:
        wi, level, parent = stack.pop()
        w = view.nodes[wi]
        ti = add(w, level, parent)
        if level >= max_level:
            continue
        if w.kind == AGENT and level % 4 == 3:
            # Walks through two consecutive constraints do not alternate:
            # only the objective continues below this agent.
            for ci in w.children:
                if view.nodes[ci].kind == OBJECTIVE:
                    stack.append((ci, level + 1, ti))
        else:
            for ci in w.children:
                stack.append((ci, level + 1, ti))

    # Deterministic child order: the stack reverses, so restore port order.
    for t in nodes:
        t.children.sort(key=lambda c: (nodes[c].port_parent or 0))
    for lst in agents_by_level.values():
        lst.sort()
    return AlternatingTree(r, nodes, agents_by_level)


def grow_alternating_tree(inst: Instance, u: int, r: int) -> AlternatingTree:
    """Build the alternating tree by walking the instance directly.

    Produces exactly the tree `build_alternating_tree` extracts from a
    depth-(4r+3) view, without materializing the walks the tree prunes; the
    full view grows much faster than the tree on dense instances.
    """
    if not (0 <= u < inst.n_agents):
        raise MMLPError(f"agent {u} is not in the instance")
    if r < 0:
        raise MMLPError("r must be >= 0")
    nodes: list[TreeNode] = []
    agents_by_level: dict[int, list[int]] = {}

    def add(kind: str, orig: int, coef, pp, ps, level: int,
            parent: int | None) -> int:
        _check_local_shape(inst, WalkNode(kind, orig, 0, None, None, coef, pp, ps),
                           "alternating tree")
        ti = len(nodes)
        nodes.append(TreeNode(kind, orig, level, coef, pp, ps, parent))
        if parent is not None:
            nodes[parent].children.append(ti)
        if kind == AGENT:
            agents_by_level.setdefault(level, []).append(ti)
        return ti

    root_t = add(AGENT, u, None, None, None, -1, None)
    obj_inc = None
    for inc in inst.incident((AGENT, u)):
        if inc.other[0] == CONSTRAINT:
            add(CONSTRAINT, inc.other[1], inc.coef, inc.port_here, inc.port_other,
                -2, root_t)
        else:
            if obj_inc is not None:
                raise NormalizationError(
                    f"alternating tree: agent {u} has several objectives")
            obj_inc = inc
    if obj_inc is None:
        raise NormalizationError(f"alternating tree: agent {u} has no objective")

    max_level = 4 * r + 2
    stack = [(obj_inc, 0, root_t)]
    while stack:
        inc, level, parent = stack.pop()
        kind, orig = inc.other
        ti = add(kind, orig, inc.coef, inc.port_here, inc.port_other, level, parent)
        if level >= max_level:
            continue
        only_objective = kind == AGENT and level % 4 == 3
        for nxt in inst.incident((kind, orig)):
            if nxt.edge == inc.edge:
                continue
            if only_objective and nxt.other[0] != OBJECTIVE:
                continue
            stack.append((nxt, level + 1, ti))

    for t in nodes:
        t.children.sort(key=lambda c: (nodes[c].port_parent or 0))
    for lst in agents_by_level.values():
        lst.sort()
    return AlternatingTree(r, nodes, agents_by_level)


def tree_objective_neighbors(tree: AlternatingTree, ti: int) -> list[int]:
    """Agents adjacent to an objective node, ordered by port at the objective."""
    t = tree.nodes[ti]
    out = []
    if t.parent is not None:
        out.append((t.port_self, t.parent))
    for c in t.children:
        out.append((tree.nodes[c].port_parent, c))
    return [x for _, x in sorted(out, key=lambda p: p[0])]


def tree_agent_constraints(tree: AlternatingTree, ti: int) -> list[tuple[float, int | None, float]]:
    """Constraints at an agent node as (a_self, partner node or None, a_partner).

    Includes the parent edge when the parent is a constraint.  Partners are
    the constraint's other agent inside the tree; leaf constraints have none
    and act as the relaxed single-agent bound a * x <= 1.
    """
    t = tree.nodes[ti]
    out: list[tuple[float, int | None, float]] = []
    if t.parent is not None and tree.nodes[t.parent].kind == CONSTRAINT:
        out.append((t.coef, None, 0.0))
    for c in t.children:
        cn = tree.nodes[c]
        if cn.kind != CONSTRAINT:
            continue
        partner = cn.children[0] if cn.children else None
        if partner is None:
            out.append((cn.coef, None, 0.0))
        else:
            out.append((cn.coef, partner, tree.nodes[partner].coef))
    return out


def alternating_tree_to_instance(tree: AlternatingTree) -> tuple[Instance, dict[int, int]]:
    """The finite max-min LP obtained by restricting to the tree.

    Leaf constraints keep only their in-tree agent, i.e. they are relaxed to
    single-variable bounds.  Returns the instance plus a map from its agent
    indices to tree node indices (`orig` of those nodes recovers the source
    agents).  Ports are renumbered 1..degree preserving inherited order.
    """
    agent_ids: dict[int, int] = {}
    con_ids: dict[int, int] = {}
    obj_ids: dict[int, int] = {}
    for ti, t in enumerate(tree.nodes):
        if t.kind == AGENT:
            agent_ids[ti] = len(agent_ids)
        elif t.kind == CONSTRAINT:
            con_ids[ti] = len(con_ids)
        else:
            obj_ids[ti] = len(obj_ids)

    cons: list[Edge] = []
    objs: list[Edge] = []
    # Incident tree edges at a node are distinct instance edges of its end
    # node, so inherited ports stay unique per node and order-preserving
    # renumbering is safe.
    for ti, t in enumerate(tree.nodes):
        if t.parent is None:
            continue
        if t.kind == AGENT:
            agent_ti, other_ti, pa, pn = ti, t.parent, t.port_self, t.port_parent
        else:
            agent_ti, other_ti, pa, pn = t.parent, ti, t.port_parent, t.port_self
        a = agent_ids[agent_ti]
        if tree.nodes[other_ti].kind == CONSTRAINT:
            cons.append(Edge(a, con_ids[other_ti], t.coef, pa, pn))
        else:
            objs.append(Edge(a, obj_ids[other_ti], t.coef, pa, pn))

    inst = Instance(len(agent_ids), len(con_ids), len(obj_ids),
                    tuple(cons), tuple(objs))
    inst = _renumber_all_ports(inst)
    return inst, {new: ti for ti, new in agent_ids.items()}


def view_to_instance(view: LocalView) -> tuple[Instance, dict[int, int]]:
    """Materialize a truncated view as a standalone instance.

    Interior walk-nodes keep their full edge sets, so only nodes on the
    truncation boundary get renumbered ports.  Returns the instance and the
    map from its agent indices to walk-node indices.
    """
    agent_ids: dict[int, int] = {}
    con_ids: dict[int, int] = {}
    obj_ids: dict[int, int] = {}
    for wi, w in enumerate(view.nodes):
        if w.kind == AGENT:
            agent_ids[wi] = len(agent_ids)
        elif w.kind == CONSTRAINT:
            con_ids[wi] = len(con_ids)
        else:
            obj_ids[wi] = len(obj_ids)
    cons: list[Edge] = []
    objs: list[Edge] = []
    for wi, w in enumerate(view.nodes):
        if w.prev is None:
            continue
        if w.kind == AGENT:
            a_wi, o_wi, pa, pn = wi, w.prev, w.port_self, w.port_prev
        else:
            a_wi, o_wi, pa, pn = w.prev, wi, w.port_prev, w.port_self
        a = agent_ids[a_wi]
        if view.nodes[o_wi].kind == CONSTRAINT:
            cons.append(Edge(a, con_ids[o_wi], w.coef, pa, pn))
        else:
            objs.append(Edge(a, obj_ids[o_wi], w.coef, pa, pn))
    inst = _renumber_all_ports(Instance(len(agent_ids), len(con_ids), len(obj_ids),
                                        tuple(cons), tuple(objs)))
    return inst, {new: wi for wi, new in agent_ids.items()}
