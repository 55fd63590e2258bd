"""Hand-built instances and view-trimming helpers shared across the tests."""

from mmlp.instance import (Edge, Instance, _renumber_all_ports,
                           preprocess_degenerate)


def e1() -> Instance:
    """Symmetric four-cycle: two agents sharing one constraint and one
    objective, all coefficients 1."""
    return Instance(
        2, 1, 1,
        (Edge(0, 0, 1.0, 1, 1), Edge(1, 0, 1.0, 1, 2)),
        (Edge(0, 0, 1.0, 2, 1), Edge(1, 0, 1.0, 2, 2)),
    )


def e2() -> Instance:
    """Like e1 but with packing coefficients (1, 2)."""
    return Instance(
        2, 1, 1,
        (Edge(0, 0, 1.0, 1, 1), Edge(1, 0, 2.0, 1, 2)),
        (Edge(0, 0, 1.0, 2, 1), Edge(1, 0, 1.0, 2, 2)),
    )


def make_cycle(n_agents: int, a: float = 1.0) -> Instance:
    """Normalized cycle of n_agents agents (even, >= 2) alternating
    constraint and objective nodes, with a rotation-invariant port pattern:
    every agent reaches its constraint through port 1 and its objective
    through port 2, so all agents of one parity have isomorphic views.
    e1() == make_cycle(2).
    """
    assert n_agents >= 2 and n_agents % 2 == 0
    half = n_agents // 2
    cons = []
    objs = []
    for j in range(half):
        cons.append(Edge(2 * j, j, a, 1, 1))
        cons.append(Edge(2 * j + 1, j, a, 1, 2))
        objs.append(Edge((2 * j + 2) % n_agents, j, 1.0, 2, 1))
        objs.append(Edge(2 * j + 1, j, 1.0, 2, 2))
    return Instance(n_agents, half, half, tuple(cons), tuple(objs))


def path_tree() -> Instance:
    """Finite normalized tree: j1-w1-k1-v1-i-v2-k2-w2-j2 with unit
    coefficients.  Agents: v1=0, w1=1, v2=2, w2=3; objectives k1=0 (v1, w1)
    and k2=1 (v2, w2); constraints: i=0 shared by v1 and v2, singleton
    leaves j1=1 (w1) and j2=2 (w2).
    """
    cons = (
        Edge(0, 0, 1.0, 1, 1), Edge(2, 0, 1.0, 1, 2),
        Edge(1, 1, 1.0, 1, 1),
        Edge(3, 2, 1.0, 1, 1),
    )
    objs = (
        Edge(0, 0, 1.0, 2, 1), Edge(1, 0, 1.0, 2, 2),
        Edge(2, 1, 1.0, 2, 1), Edge(3, 1, 1.0, 2, 2),
    )
    return Instance(4, 3, 2, cons, objs)


def two_agent_path() -> Instance:
    """Smallest finite normalized tree: i1-v1-k-v2-i2, unit coefficients."""
    cons = (Edge(0, 0, 1.0, 1, 1), Edge(1, 1, 1.0, 1, 1))
    objs = (Edge(0, 0, 1.0, 2, 1), Edge(1, 0, 1.0, 2, 2))
    return Instance(2, 2, 1, cons, objs)


def drop_agents(inst: Instance, drop: set[int]) -> tuple[Instance, list[int]]:
    """Remove the given agents; returns the instance and new->old index map."""
    keep = [v for v in range(inst.n_agents) if v not in drop]
    amap = {v: j for j, v in enumerate(keep)}
    cons = tuple(Edge(amap[e.agent], e.node, e.coef, e.port_agent, e.port_node)
                 for e in inst.constraint_edges if e.agent in amap)
    objs = tuple(Edge(amap[e.agent], e.node, e.coef, e.port_agent, e.port_node)
                 for e in inst.objective_edges if e.agent in amap)
    out = _renumber_all_ports(Instance(len(keep), inst.n_constraints,
                                       inst.n_objectives, cons, objs))
    return out, keep


def trim_for_normalize(inst: Instance) -> tuple[Instance, list[int]]:
    """Strip the degenerate boundary of a view-instance until `normalize`
    accepts it.  Returns the trimmed instance and the map from its agent
    indices to the input's agent indices."""
    idmap = list(range(inst.n_agents))
    while True:
        inst, rep = preprocess_degenerate(inst)
        inv = {old: new for new, old in enumerate(rep.agent_ids)}
        idmap = [idmap[old] for old in rep.agent_ids]
        if not rep.unbounded_agents:
            return inst, idmap
        drop = {inv[u] for u in rep.unbounded_agents if u in inv}
        inst, keep = drop_agents(inst, drop)
        idmap = [idmap[v] for v in keep]


def disjoint_double(inst: Instance) -> Instance:
    """Two disjoint copies of an instance; agent v maps to v and
    v + inst.n_agents, with identical ports, so copies have strictly
    isomorphic views at any depth."""
    cons = list(inst.constraint_edges)
    objs = list(inst.objective_edges)
    for e in inst.constraint_edges:
        cons.append(Edge(e.agent + inst.n_agents, e.node + inst.n_constraints,
                         e.coef, e.port_agent, e.port_node))
    for e in inst.objective_edges:
        objs.append(Edge(e.agent + inst.n_agents, e.node + inst.n_objectives,
                         e.coef, e.port_agent, e.port_node))
    return Instance(2 * inst.n_agents, 2 * inst.n_constraints,
                    2 * inst.n_objectives, tuple(cons), tuple(objs))
