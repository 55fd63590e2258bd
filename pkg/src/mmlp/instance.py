"""Data model for max-min LP instances on port-numbered bipartite graphs.

An instance has three node classes: agents (one LP variable each),
constraints (rows of the packing system A x <= 1) and objectives (rows of
the utility system, omega(x) = min_k sum_v c_kv x_v).  Edges carry a
strictly positive coefficient and a port number at each endpoint; at every
node the ports are exactly 1..degree.  There are no node identifiers beyond
the dense per-class indices, and all downstream algorithms are required to
depend on ports and coefficients only.

This module also holds validation, degeneracy preprocessing, evaluation
(utility / feasibility), deterministic random generators and the line-based
text formats for instances and solutions.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from functools import cached_property

AGENT = "v"
CONSTRAINT = "i"
OBJECTIVE = "k"

# A node reference is (kind, index) with kind one of AGENT/CONSTRAINT/OBJECTIVE.
NodeRef = tuple[str, int]


class MMLPError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(MMLPError):
    """Malformed text input; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DegenerateInstanceError(MMLPError):
    """Raised when a pipeline stage cannot proceed on a degenerate instance."""


@dataclass(frozen=True)
class Edge:
    """One agent-to-constraint or agent-to-objective edge.

    `node` indexes into the constraint or objective class depending on which
    edge list the Edge lives in.  `port_agent` / `port_node` are the port
    numbers of this edge at the agent and at the constraint/objective.
    """

    agent: int
    node: int
    coef: float
    port_agent: int
    port_node: int


@dataclass(frozen=True)
class Incident:
    """View of one edge from one of its endpoints, used for graph walks."""

    port_here: int
    other: NodeRef
    port_other: int
    coef: float
    edge: tuple[str, int]  # ('c', index) or ('o', index), unique per edge


@dataclass(frozen=True)
class Instance:
    """Immutable max-min LP instance.

    All adjacency accessors return edges sorted by port number, which is the
    canonical iteration order everywhere in this package (the model has no
    node identifiers, so ports are the only deterministic local order).
    """

    n_agents: int
    n_constraints: int
    n_objectives: int
    constraint_edges: tuple[Edge, ...]
    objective_edges: tuple[Edge, ...]

    # -- adjacency ---------------------------------------------------------

    @cached_property
    def agent_constraints(self) -> tuple[tuple[Edge, ...], ...]:
        buckets: list[list[Edge]] = [[] for _ in range(self.n_agents)]
        for e in self.constraint_edges:
            buckets[e.agent].append(e)
        return tuple(tuple(sorted(b, key=lambda e: e.port_agent)) for b in buckets)

    @cached_property
    def agent_objectives(self) -> tuple[tuple[Edge, ...], ...]:
        buckets: list[list[Edge]] = [[] for _ in range(self.n_agents)]
        for e in self.objective_edges:
            buckets[e.agent].append(e)
        return tuple(tuple(sorted(b, key=lambda e: e.port_agent)) for b in buckets)

    @cached_property
    def constraint_agents(self) -> tuple[tuple[Edge, ...], ...]:
        buckets: list[list[Edge]] = [[] for _ in range(self.n_constraints)]
        for e in self.constraint_edges:
            buckets[e.node].append(e)
        return tuple(tuple(sorted(b, key=lambda e: e.port_node)) for b in buckets)

    @cached_property
    def objective_agents(self) -> tuple[tuple[Edge, ...], ...]:
        buckets: list[list[Edge]] = [[] for _ in range(self.n_objectives)]
        for e in self.objective_edges:
            buckets[e.node].append(e)
        return tuple(tuple(sorted(b, key=lambda e: e.port_node)) for b in buckets)

    @cached_property
    def _incidence(self) -> dict[NodeRef, tuple[Incident, ...]]:
        inc: dict[NodeRef, list[Incident]] = {}
        for v in range(self.n_agents):
            inc[(AGENT, v)] = []
        for i in range(self.n_constraints):
            inc[(CONSTRAINT, i)] = []
        for k in range(self.n_objectives):
            inc[(OBJECTIVE, k)] = []
        for idx, e in enumerate(self.constraint_edges):
            eid = ("c", idx)
            inc[(AGENT, e.agent)].append(
                Incident(e.port_agent, (CONSTRAINT, e.node), e.port_node, e.coef, eid))
            inc[(CONSTRAINT, e.node)].append(
                Incident(e.port_node, (AGENT, e.agent), e.port_agent, e.coef, eid))
        for idx, e in enumerate(self.objective_edges):
            eid = ("o", idx)
            inc[(AGENT, e.agent)].append(
                Incident(e.port_agent, (OBJECTIVE, e.node), e.port_node, e.coef, eid))
            inc[(OBJECTIVE, e.node)].append(
                Incident(e.port_node, (AGENT, e.agent), e.port_agent, e.coef, eid))
        return {ref: tuple(sorted(lst, key=lambda n: n.port_here)) for ref, lst in inc.items()}

    def incident(self, ref: NodeRef) -> tuple[Incident, ...]:
        """All edges at a node, sorted by the port number at that node."""
        try:
            return self._incidence[ref]
        except KeyError:
            raise MMLPError(f"node {ref} is not in the instance") from None

    # -- degree bounds and small helpers ------------------------------------

    @property
    def delta_i(self) -> int:
        """Largest constraint degree max |V_i| (0 if there are no constraints)."""
        return max((len(b) for b in self.constraint_agents), default=0)

    @property
    def delta_k(self) -> int:
        """Largest objective degree max |V_k| (0 if there are no objectives)."""
        return max((len(b) for b in self.objective_agents), default=0)

    def min_inverse_coef(self, v: int) -> float:
        """min over the agent's constraints of 1/a, the trivial cap on x_v."""
        edges = self.agent_constraints[v]
        if not edges:
            raise DegenerateInstanceError(f"agent {v} has no constraints")
        return min(1.0 / e.coef for e in edges)

    def constraint_partner(self, i: int, v: int) -> Edge | None:
        """The edge of the other agent of a degree-two constraint, else None."""
        others = [e for e in self.constraint_agents[i] if e.agent != v]
        if not others:
            return None
        if len(others) > 1:
            raise MMLPError(f"constraint {i} has more than two agents")
        return others[0]

    def nodes(self) -> list[NodeRef]:
        return ([(AGENT, v) for v in range(self.n_agents)]
                + [(CONSTRAINT, i) for i in range(self.n_constraints)]
                + [(OBJECTIVE, k) for k in range(self.n_objectives)])


@dataclass(frozen=True)
class Solution:
    """Nonnegative value per agent, keyed by agent index."""

    values: dict[int, float]

    def __getitem__(self, v: int) -> float:
        return self.values[v]

    @staticmethod
    def from_list(vals: list[float]) -> "Solution":
        return Solution({v: x for v, x in enumerate(vals)})


@dataclass(frozen=True)
class FeasibilityCheck:
    ok: bool
    violated_constraints: tuple[int, ...]
    negative_agents: tuple[int, ...]


@dataclass(frozen=True)
class DegeneracyReport:
    """What `preprocess_degenerate` removed or flagged, in original indices.

    The categories are disjoint.  `agent_ids` / `constraint_ids` /
    `objective_ids` map indices of the cleaned instance back to the input
    instance, and `component_ids` labels connected components of the cleaned
    instance so callers can treat them independently.
    """

    deleted_constraints: tuple[int, ...] = ()
    zero_forcing_objectives: tuple[int, ...] = ()
    zeroed_agents: tuple[int, ...] = ()
    unbounded_agents: tuple[int, ...] = ()
    agent_ids: tuple[int, ...] = ()
    constraint_ids: tuple[int, ...] = ()
    objective_ids: tuple[int, ...] = ()
    component_ids: dict[NodeRef, int] = field(default_factory=dict)

    @property
    def zero_forcing(self) -> bool:
        """True when an isolated objective forces the optimum to zero."""
        return bool(self.zero_forcing_objectives)

    @property
    def empty(self) -> bool:
        return not (self.deleted_constraints or self.zero_forcing_objectives
                    or self.zeroed_agents or self.unbounded_agents)


# ---------------------------------------------------------------------------
# validation


def validate(inst: Instance) -> list[str]:
    """Return every invariant violation, empty list iff the instance is valid.

    Bipartiteness is structural (edges can only join agents to constraints
    or objectives), so it is not re-checked here.
    """
    out: list[str] = []
    for kind, edges, n_nodes in (("c", inst.constraint_edges, inst.n_constraints),
                                 ("o", inst.objective_edges, inst.n_objectives)):
        seen_pairs: set[tuple[int, int]] = set()
        for e in edges:
            where = f"edge {kind} {e.agent} {e.node}"
            if not (0 <= e.agent < inst.n_agents):
                out.append(f"{where}: agent index out of range")
                continue
            if not (0 <= e.node < n_nodes):
                out.append(f"{where}: node index out of range")
                continue
            if not (e.coef > 0.0) or not math.isfinite(e.coef):
                out.append(f"{where}: nonpositive coefficient {e.coef!r}")
            if (e.agent, e.node) in seen_pairs:
                out.append(f"{where}: parallel edge")
            seen_pairs.add((e.agent, e.node))

    # Port sets must be exactly {1..degree} at every node.
    ports: dict[NodeRef, list[int]] = {ref: [] for ref in inst.nodes()}
    for e in inst.constraint_edges:
        if 0 <= e.agent < inst.n_agents and 0 <= e.node < inst.n_constraints:
            ports[(AGENT, e.agent)].append(e.port_agent)
            ports[(CONSTRAINT, e.node)].append(e.port_node)
    for e in inst.objective_edges:
        if 0 <= e.agent < inst.n_agents and 0 <= e.node < inst.n_objectives:
            ports[(AGENT, e.agent)].append(e.port_agent)
            ports[(OBJECTIVE, e.node)].append(e.port_node)
    for ref, ps in ports.items():
        if len(set(ps)) != len(ps):
            out.append(f"node {ref[0]}{ref[1]}: duplicate port")
        elif ps and set(ps) != set(range(1, len(ps) + 1)):
            out.append(f"node {ref[0]}{ref[1]}: ports are not 1..degree")
    return out


# ---------------------------------------------------------------------------
# degeneracy preprocessing


def preprocess_degenerate(inst: Instance) -> tuple[Instance, DegeneracyReport]:
    """Strip degenerate nodes and report them.

    Constraints with no agents are vacuous and deleted.  Objectives with no
    agents force the optimum to zero and are flagged (and removed from the
    graph).  Agents adjacent to no objective contribute nothing and are
    removed; their value is zero in any back-mapping.  Agents adjacent to no
    constraint are flagged as unbounded but kept: the pipeline refuses to
    continue on their components instead of inventing an infinite value.
    """
    deleted_cons = [i for i in range(inst.n_constraints) if not inst.constraint_agents[i]]
    zero_forcing = [k for k in range(inst.n_objectives) if not inst.objective_agents[k]]
    zeroed = [v for v in range(inst.n_agents) if not inst.agent_objectives[v]]
    zeroed_set = set(zeroed)

    # Removing zeroed agents can empty out more constraints.
    for i in range(inst.n_constraints):
        edges = inst.constraint_agents[i]
        if edges and all(e.agent in zeroed_set for e in edges):
            deleted_cons.append(i)
    deleted_cons = sorted(set(deleted_cons))
    deleted_set = set(deleted_cons)
    zf_set = set(zero_forcing)

    keep_agents = [v for v in range(inst.n_agents) if v not in zeroed_set]
    keep_cons = [i for i in range(inst.n_constraints) if i not in deleted_set]
    keep_objs = [k for k in range(inst.n_objectives) if k not in zf_set]
    agent_map = {v: j for j, v in enumerate(keep_agents)}
    con_map = {i: j for j, i in enumerate(keep_cons)}
    obj_map = {k: j for j, k in enumerate(keep_objs)}

    changed = bool(deleted_cons or zero_forcing or zeroed)
    if changed:
        cons = [e for e in inst.constraint_edges
                if e.agent in agent_map and e.node in con_map]
        objs = [e for e in inst.objective_edges
                if e.agent in agent_map and e.node in obj_map]
        new_cons = [Edge(agent_map[e.agent], con_map[e.node], e.coef,
                         e.port_agent, e.port_node) for e in cons]
        new_objs = [Edge(agent_map[e.agent], obj_map[e.node], e.coef,
                         e.port_agent, e.port_node) for e in objs]
        cleaned = _renumber_all_ports(Instance(
            len(keep_agents), len(keep_cons), len(keep_objs),
            tuple(new_cons), tuple(new_objs)))
    else:
        cleaned = inst

    unbounded = [keep_agents[v] for v in range(cleaned.n_agents)
                 if not cleaned.agent_constraints[v]]
    report = DegeneracyReport(
        deleted_constraints=tuple(deleted_cons),
        zero_forcing_objectives=tuple(zero_forcing),
        zeroed_agents=tuple(zeroed),
        unbounded_agents=tuple(unbounded),
        agent_ids=tuple(keep_agents),
        constraint_ids=tuple(keep_cons),
        objective_ids=tuple(keep_objs),
        component_ids=connected_components(cleaned),
    )
    return cleaned, report


def connected_components(inst: Instance) -> dict[NodeRef, int]:
    """Deterministic component labels: breadth-first from nodes in order."""
    comp: dict[NodeRef, int] = {}
    next_id = 0
    for start in inst.nodes():
        if start in comp:
            continue
        comp[start] = next_id
        queue = [start]
        while queue:
            ref = queue.pop()
            for inc in inst.incident(ref):
                if inc.other not in comp:
                    comp[inc.other] = next_id
                    queue.append(inc.other)
        next_id += 1
    return comp


def _renumber_all_ports(inst: Instance) -> Instance:
    """Reassign ports 1..degree at every node, preserving old port order."""
    orders: dict[NodeRef, dict[int, int]] = {}
    ports: dict[NodeRef, list[int]] = {}
    for e in inst.constraint_edges:
        ports.setdefault((AGENT, e.agent), []).append(e.port_agent)
        ports.setdefault((CONSTRAINT, e.node), []).append(e.port_node)
    for e in inst.objective_edges:
        ports.setdefault((AGENT, e.agent), []).append(e.port_agent)
        ports.setdefault((OBJECTIVE, e.node), []).append(e.port_node)
    for ref, ps in ports.items():
        orders[ref] = {old: new + 1 for new, old in enumerate(sorted(ps))}
    cons = tuple(Edge(e.agent, e.node, e.coef,
                      orders[(AGENT, e.agent)][e.port_agent],
                      orders[(CONSTRAINT, e.node)][e.port_node])
                 for e in inst.constraint_edges)
    objs = tuple(Edge(e.agent, e.node, e.coef,
                      orders[(AGENT, e.agent)][e.port_agent],
                      orders[(OBJECTIVE, e.node)][e.port_node])
                 for e in inst.objective_edges)
    return Instance(inst.n_agents, inst.n_constraints, inst.n_objectives, cons, objs)


# ---------------------------------------------------------------------------
# evaluation


def utility(inst: Instance, x: Solution) -> float:
    """omega(x) = min over objectives of sum c_kv x_v; +inf if K is empty."""
    best = math.inf
    for k in range(inst.n_objectives):
        total = 0.0
        for e in inst.objective_agents[k]:
            if e.agent not in x.values:
                raise MMLPError(f"solution has no value for agent {e.agent}")
            total += e.coef * x.values[e.agent]
        best = min(best, total)
    return best


def check_feasible(inst: Instance, x: Solution, tol: float = 1e-9) -> FeasibilityCheck:
    """A x <= 1 + tol row by row, and x >= -tol entrywise."""
    bad_cons = []
    for i in range(inst.n_constraints):
        total = 0.0
        for e in inst.constraint_agents[i]:
            if e.agent not in x.values:
                raise MMLPError(f"solution has no value for agent {e.agent}")
            total += e.coef * x.values[e.agent]
        if total > 1.0 + tol:
            bad_cons.append(i)
    bad_agents = [v for v in range(inst.n_agents)
                  if v in x.values and x.values[v] < -tol]
    ok = not bad_cons and not bad_agents
    return FeasibilityCheck(ok, tuple(bad_cons), tuple(bad_agents))


# ---------------------------------------------------------------------------
# generators


def _rand_coef(rng: random.Random) -> float:
    # Cap coefficients to [0.1, 10]; the algorithms need no cap but the
    # harness keeps conditioning sane.  Four decimals round-trip exactly.
    return round(rng.uniform(0.1, 10.0), 4)


def _assign_ports(n_agents: int, n_cons: int, n_objs: int,
                  cons: list[tuple[int, int, float]],
                  objs: list[tuple[int, int, float]],
                  rng: random.Random) -> Instance:
    """Build an Instance from raw (agent, node, coef) triples.

    Ports are a seeded random permutation of 1..degree at each node, so the
    generated family exercises port-dependent code paths.
    """
    by_agent: dict[int, list[int]] = {v: [] for v in range(n_agents)}
    by_con: dict[int, list[int]] = {i: [] for i in range(n_cons)}
    by_obj: dict[int, list[int]] = {k: [] for k in range(n_objs)}
    for t, (a, i, _) in enumerate(cons):
        by_agent[a].append(t)
        by_con[i].append(t)
    for t, (a, k, _) in enumerate(objs):
        by_agent[a].append(len(cons) + t)
        by_obj[k].append(len(cons) + t)

    port_at_agent: dict[int, int] = {}
    port_at_node: dict[int, int] = {}
    for slots, target in ((by_agent, port_at_agent), (by_con, port_at_node),
                          (by_obj, port_at_node)):
        for _, edge_ids in sorted(slots.items()):
            perm = list(range(1, len(edge_ids) + 1))
            rng.shuffle(perm)
            for eid, p in zip(edge_ids, perm):
                target[eid] = p

    con_edges = tuple(Edge(a, i, c, port_at_agent[t], port_at_node[t])
                      for t, (a, i, c) in enumerate(cons))
    obj_edges = tuple(Edge(a, k, c, port_at_agent[len(cons) + t],
                           port_at_node[len(cons) + t])
                      for t, (a, k, c) in enumerate(objs))
    return Instance(n_agents, n_cons, n_objs, con_edges, obj_edges)


def generate_random(n_agents: int, delta_i: int, delta_k: int, seed: int,
                    normalized: bool = False) -> Instance:
    """Deterministic random instance generator.

    General mode produces a connected valid instance with max |V_i| <=
    delta_i and max |V_k| <= delta_k; singleton constraints and objectives
    occur occasionally so the normalization gadgets get exercised.

    Normalized mode produces an instance satisfying |V_i| = 2, |V_k| >= 2,
    |K_v| = 1, |I_v| >= 1 and c = 1 with unit packing coefficients.  Such
    instances are cyclic in general (a finite tree cannot satisfy all the
    degree constraints at its leaves); the smallest family, n_agents = 2, is
    the four-cycle with one shared constraint and one shared objective.
    """
    if n_agents < 2 or delta_i < 2 or delta_k < 2:
        raise MMLPError("need n_agents >= 2, delta_i >= 2, delta_k >= 2")
    rng = random.Random(seed)
    if normalized:
        return _generate_normalized(n_agents, delta_k, rng)
    return _generate_general(n_agents, delta_i, delta_k, rng)


def _partition_into_groups(order: list[int], delta_k: int,
                           rng: random.Random, allow_singleton: bool) -> list[list[int]]:
    groups: list[list[int]] = []
    pos = 0
    while pos < len(order):
        left = len(order) - pos
        if left == 1:
            if allow_singleton or not groups:
                groups.append([order[pos]])
            else:
                groups[-1].append(order[pos])
            pos += 1
            continue
        lo = 1 if (allow_singleton and rng.random() < 0.15) else 2
        size = rng.randint(lo, min(delta_k, left))
        if left - size == 1 and not allow_singleton and size + 1 > delta_k:
            size -= 1
        groups.append(order[pos:pos + size])
        pos += size
    return groups


def _generate_general(n: int, delta_i: int, delta_k: int, rng: random.Random) -> Instance:
    order = list(range(n))
    rng.shuffle(order)
    groups = _partition_into_groups(order, delta_k, rng, allow_singleton=True)
    objs = [(v, k, _rand_coef(rng)) for k, grp in enumerate(groups) for v in grp]
    agent_group = {}
    for k, grp in enumerate(groups):
        for v in grp:
            agent_group[v] = k

    cons: list[tuple[int, int, float]] = []
    con_members: list[list[int]] = []

    def add_constraint(members: list[int]) -> None:
        i = len(con_members)
        con_members.append(list(members))
        for v in members:
            cons.append((v, i, _rand_coef(rng)))

    # Spanning constraints over the objective groups keep the graph connected.
    for gi in range(1, len(groups)):
        a = rng.choice(groups[gi])
        b = rng.choice(groups[rng.randrange(gi)])
        add_constraint([a, b])

    con_degree = {v: 0 for v in range(n)}
    for members in con_members:
        for v in members:
            con_degree[v] += 1
    for v in range(n):
        if con_degree[v] == 0:
            size = 1 if rng.random() < 0.15 else rng.randint(2, delta_i)
            pool = [w for w in range(n) if w != v]
            members = [v] + rng.sample(pool, min(size - 1, len(pool)))
            add_constraint(members)
            for w in members:
                con_degree[w] += 1
    for _ in range(rng.randint(0, max(0, n // 3))):
        size = rng.randint(2, delta_i)
        members = rng.sample(range(n), min(size, n))
        if any(con_degree[w] >= 3 for w in members):
            continue
        add_constraint(members)
        for w in members:
            con_degree[w] += 1
    return _assign_ports(n, len(con_members), len(groups), cons, objs, rng)


def _generate_normalized(n: int, delta_k: int, rng: random.Random) -> Instance:
    order = list(range(n))
    rng.shuffle(order)
    groups = _partition_into_groups(order, delta_k, rng, allow_singleton=False)
    objs = [(v, k, 1.0) for k, grp in enumerate(groups) for v in grp]

    cons: list[tuple[int, int, float]] = []
    n_cons = 0
    con_degree = {v: 0 for v in range(n)}

    def add_pair(a: int, b: int) -> None:
        nonlocal n_cons
        cons.append((a, n_cons, 1.0))
        cons.append((b, n_cons, 1.0))
        con_degree[a] += 1
        con_degree[b] += 1
        n_cons += 1

    for gi in range(1, len(groups)):
        add_pair(rng.choice(groups[gi]), rng.choice(groups[rng.randrange(gi)]))
    for v in range(n):
        if con_degree[v] == 0:
            add_pair(v, rng.choice([w for w in range(n) if w != v]))
    for _ in range(rng.randint(0, max(0, n // 3))):
        a, b = rng.sample(range(n), 2)
        if con_degree[a] >= 3 or con_degree[b] >= 3:
            continue
        add_pair(a, b)
    return _assign_ports(n, n_cons, len(groups), cons, objs, rng)


def generate_random_tree(n_agents: int, delta_k: int, seed: int,
                         coef_low: float = 0.25, coef_high: float = 4.0) -> Instance:
    """Deterministic random finite tree for exact algorithm checks.

    The tree satisfies |K_v| = 1, |I_v| >= 1, |V_k| in [2, delta_k] and
    c = 1; constraints have two agents except at leaves, where singleton
    constraints close the tree (a finite tree cannot give every leaf
    constraint two agents).  This is exactly the shape of the finite
    alternating trees the solver itself builds, so every levelwise recursion
    is exact on these instances.
    """
    if n_agents < 2 or delta_k < 2:
        raise MMLPError("need n_agents >= 2, delta_k >= 2")
    rng = random.Random(seed)
    objs: list[tuple[int, int, float]] = []
    cons: list[tuple[int, int, float]] = []
    n_nodes = 0
    n_cons = 0
    n_objs = 0
    pending: list[int] = []

    def coef() -> float:
        return round(rng.uniform(coef_low, coef_high), 4)

    def new_group(first: int | None) -> None:
        nonlocal n_nodes, n_objs
        size = rng.randint(2, delta_k)
        members = [] if first is None else [first]
        while len(members) < size:
            members.append(n_nodes)
            n_nodes += 1
        for v in members:
            objs.append((v, n_objs, 1.0))
        n_objs += 1
        pending.extend(m for m in members if m != first)

    new_group(None)
    qi = 0
    while qi < len(pending):
        v = pending[qi]
        qi += 1
        branches = 2 if rng.random() < 0.2 else 1
        for _ in range(branches):
            if n_nodes < n_agents:
                w = n_nodes
                n_nodes += 1
                cons.append((v, n_cons, coef()))
                cons.append((w, n_cons, coef()))
                n_cons += 1
                new_group(w)
            else:
                cons.append((v, n_cons, coef()))
                n_cons += 1
    return _assign_ports(n_nodes, n_cons, n_objs, cons, objs, rng)


# ---------------------------------------------------------------------------
# text formats


def serialize(inst: Instance) -> str:
    """Line-oriented MMLP text form; shortest round-trip decimals, LF endings."""
    bad = validate(inst)
    if bad:
        raise MMLPError("refusing to serialize invalid instance: " + bad[0])
    lines = ["mmlp 1",
             f"agents {inst.n_agents}",
             f"constraints {inst.n_constraints}",
             f"objectives {inst.n_objectives}"]
    for e in inst.constraint_edges:
        lines.append(f"c {e.agent} {e.node} {e.coef!r} {e.port_agent} {e.port_node}")
    for e in inst.objective_edges:
        lines.append(f"o {e.agent} {e.node} {e.coef!r} {e.port_agent} {e.port_node}")
    return "\n".join(lines) + "\n"


def parse(text: str) -> Instance:
    """Inverse of `serialize`; raises ParseError with the offending line number."""
    counts: list[int] = []
    header_seen = False
    con_edges: list[Edge] = []
    obj_edges: list[Edge] = []
    labels = ("agents", "constraints", "objectives")

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if not header_seen:
            if parts != ["mmlp", "1"]:
                raise ParseError(line_no, "expected header 'mmlp 1'")
            header_seen = True
            continue
        if len(counts) < 3:
            label = labels[len(counts)]
            if len(parts) != 2 or parts[0] != label:
                raise ParseError(line_no, f"expected '{label} <count>'")
            try:
                value = int(parts[1])
            except ValueError:
                raise ParseError(line_no, f"bad integer {parts[1]!r}") from None
            if value < 0:
                raise ParseError(line_no, f"negative {label} count")
            counts.append(value)
            continue
        if parts[0] not in ("c", "o") or len(parts) != 6:
            raise ParseError(line_no, "expected 'c|o <agent> <node> <coef> <port> <port>'")
        try:
            agent, node = int(parts[1]), int(parts[2])
            coef = float(parts[3])
            pa, pn = int(parts[4]), int(parts[5])
        except ValueError:
            raise ParseError(line_no, "malformed edge fields") from None
        n_nodes = counts[1] if parts[0] == "c" else counts[2]
        if not (0 <= agent < counts[0]):
            raise ParseError(line_no, f"agent index {agent} out of range")
        if not (0 <= node < n_nodes):
            raise ParseError(line_no, f"node index {node} out of range")
        if not math.isfinite(coef):
            raise ParseError(line_no, f"non-finite coefficient {parts[3]!r}")
        if pa < 1 or pn < 1:
            raise ParseError(line_no, "ports must be >= 1")
        edge = Edge(agent, node, coef, pa, pn)
        (con_edges if parts[0] == "c" else obj_edges).append(edge)

    if not header_seen or len(counts) < 3:
        raise ParseError(1, "incomplete header")
    return Instance(counts[0], counts[1], counts[2], tuple(con_edges), tuple(obj_edges))


def serialize_solution(x: Solution, omega: float) -> str:
    lines = [f"x {v} {x.values[v]!r}" for v in sorted(x.values)]
    lines.append(f"omega {omega!r}")
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> tuple[Solution, float]:
    values: dict[int, float] = {}
    omega: float | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "x" and len(parts) == 3:
                values[int(parts[1])] = float(parts[2])
            elif parts[0] == "omega" and len(parts) == 2:
                omega = float(parts[1])
            else:
                raise ValueError
        except ValueError:
            raise ParseError(line_no, "expected 'x <agent> <value>' or 'omega <value>'") from None
    if omega is None:
        raise ParseError(1, "missing omega line")
    return Solution(values), omega
