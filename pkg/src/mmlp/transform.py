"""Local transformations that bring an instance into normalized shape.

Five stages run in a fixed order: (1) singleton constraints get a gadget so
every constraint has two agents to talk to, (2) constraints of degree > 2
split into all pairwise constraints, (3) agents split into one copy per
adjacent objective, (4) agents of singleton objectives split into two
halves, (5) packing coefficients are rescaled so every objective
coefficient is 1.  Each stage returns the transformed instance plus a
back-map step; composing the steps in reverse maps any feasible solution of
the normalized instance to a feasible solution of the original.

Every stage is locally computable: new port numbers are defined by sorting
the inherited port numbers and breaking ties by a copy order that is itself
derived from ports, so transforming inside overlapping local views yields
port-identical common parts.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .instance import (AGENT, CONSTRAINT, OBJECTIVE, DegenerateInstanceError,
                       Edge, Instance, MMLPError, Solution, validate)
from .core import certify_normalized
from .unfold import NormalizationError

# Fixed port numbering inside the singleton-constraint gadget {s, t, u, h, l, j}:
#   s: 1 -> existing constraint, 2 -> h, 3 -> l
#   t: 1 -> j, 2 -> h          u: 1 -> j, 2 -> l
#   j: 1 -> t, 2 -> u          h: 1 -> s, 2 -> t        l: 1 -> s, 2 -> u
# The existing constraint numbers the new edge one past its old single edge.


# ---------------------------------------------------------------------------
# back-map steps


@dataclass(frozen=True)
class DropNewAgents:
    """Gadget agents are discarded; original agents keep their values."""

    keep: int

    def apply(self, x: Solution) -> Solution:
        return Solution({v: val for v, val in x.values.items() if v < self.keep})

    def to_line(self) -> str:
        return f"drop-new-agents {self.keep}"


@dataclass(frozen=True)
class PairSplitScale:
    """x_v = 2 x'_v / divisor_v, divisors being pre-split constraint degrees."""

    divisors: tuple[float, ...]

    def apply(self, x: Solution) -> Solution:
        return Solution({v: 2.0 * val / self.divisors[v]
                         for v, val in x.values.items()})

    def to_line(self) -> str:
        return "pair-split-scale " + " ".join(repr(d) for d in self.divisors)


@dataclass(frozen=True)
class MaxOfCopies:
    """x_v = max over the copies of v; groups are indexed by pre-split agent."""

    groups: tuple[tuple[int, ...], ...]

    def apply(self, x: Solution) -> Solution:
        return Solution({v: max(x.values[c] for c in grp)
                         for v, grp in enumerate(self.groups)})

    def to_line(self) -> str:
        return "max-of-copies " + " ".join(",".join(map(str, g)) for g in self.groups)


@dataclass(frozen=True)
class CoefficientScale:
    """x_v = factor_v * x'_v (inverse of the coefficient rescaling)."""

    factors: tuple[float, ...]

    def apply(self, x: Solution) -> Solution:
        return Solution({v: self.factors[v] * val for v, val in x.values.items()})

    def to_line(self) -> str:
        return "coefficient-scale " + " ".join(repr(f) for f in self.factors)


BackMapStep = DropNewAgents | PairSplitScale | MaxOfCopies | CoefficientScale


def parse_backmap_line(line: str) -> BackMapStep:
    parts = line.split()
    if parts[0] == "drop-new-agents" and len(parts) == 2:
        return DropNewAgents(int(parts[1]))
    if parts[0] == "pair-split-scale":
        return PairSplitScale(tuple(float(p) for p in parts[1:]))
    if parts[0] == "max-of-copies":
        return MaxOfCopies(tuple(tuple(int(c) for c in g.split(",")) for g in parts[1:]))
    if parts[0] == "coefficient-scale":
        return CoefficientScale(tuple(float(p) for p in parts[1:]))
    raise MMLPError(f"unknown back-map line: {line!r}")


@dataclass(frozen=True)
class BackMap:
    """Ordered back-map steps plus the accumulated approximation multiplier.

    Steps are recorded in transformation order and applied in reverse.  The
    multiplier is delta_I/2 of the instance entering the pair split (1 when
    nothing was split), the only stage that costs approximation quality.
    """

    steps: tuple[BackMapStep, ...]
    multiplier: float = 1.0

    def apply(self, x: Solution) -> Solution:
        for step in reversed(self.steps):
            x = step.apply(x)
        return x

    def to_text(self) -> str:
        lines = [f"multiplier {self.multiplier!r}"]
        lines.extend(step.to_line() for step in self.steps)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "BackMap":
        steps: list[BackMapStep] = []
        multiplier = 1.0
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("multiplier "):
                multiplier = float(line.split()[1])
            else:
                steps.append(parse_backmap_line(line))
        return BackMap(tuple(steps), multiplier)


# ---------------------------------------------------------------------------
# proto-edge machinery: build an instance from edges carrying sort keys


@dataclass(frozen=True)
class _Proto:
    agent: int
    node: int
    coef: float
    key_agent: tuple[int, int]  # (inherited port, copy tie)
    key_node: tuple[int, int]


def _build(n_agents: int, n_cons: int, n_objs: int,
           cons: list[_Proto], objs: list[_Proto]) -> Instance:
    """Renumber ports 1..degree per node by (inherited port, copy order)."""
    agent_keys: dict[int, list[tuple[int, int]]] = {}
    node_keys: dict[tuple[str, int], list[tuple[int, int]]] = {}
    for p in cons:
        agent_keys.setdefault(p.agent, []).append(p.key_agent)
        node_keys.setdefault((CONSTRAINT, p.node), []).append(p.key_node)
    for p in objs:
        agent_keys.setdefault(p.agent, []).append(p.key_agent)
        node_keys.setdefault((OBJECTIVE, p.node), []).append(p.key_node)
    agent_port = {(a, k): j + 1 for a, keys in agent_keys.items()
                  for j, k in enumerate(sorted(keys))}
    node_port = {(ref, k): j + 1 for ref, keys in node_keys.items()
                 for j, k in enumerate(sorted(keys))}

    con_edges = tuple(Edge(p.agent, p.node, p.coef,
                           agent_port[(p.agent, p.key_agent)],
                           node_port[((CONSTRAINT, p.node), p.key_node)])
                      for p in sorted(cons, key=lambda p: (p.node, p.key_node)))
    obj_edges = tuple(Edge(p.agent, p.node, p.coef,
                           agent_port[(p.agent, p.key_agent)],
                           node_port[((OBJECTIVE, p.node), p.key_node)])
                      for p in sorted(objs, key=lambda p: (p.node, p.key_node)))
    return Instance(n_agents, n_cons, n_objs, con_edges, obj_edges)


# ---------------------------------------------------------------------------
# stage 1: augment singleton constraints


def t1_augment_singleton_constraints(inst: Instance) -> tuple[Instance, DropNewAgents]:
    """Attach a gadget to every single-agent constraint.

    For constraint i with lone agent v: new agents s, t, u, new objectives
    h, l and constraint j, with a_is = a_jt = a_ju = 1, c_hs = c_ls = 1 and
    c_ht = c_lu twice the trivial utility cap of the objective adjacent to v
    at v's smallest port.  The gadget can always absorb x_s = 0,
    x_t = x_u = 1/2, so the optimum is unchanged; the back-map just drops
    the new agents.
    """
    singles = [i for i in range(inst.n_constraints)
               if len(inst.constraint_agents[i]) == 1]
    if not singles:
        return inst, DropNewAgents(inst.n_agents)

    cons = [_Proto(e.agent, e.node, e.coef, (e.port_agent, 0), (e.port_node, 0))
            for e in inst.constraint_edges]
    objs = [_Proto(e.agent, e.node, e.coef, (e.port_agent, 0), (e.port_node, 0))
            for e in inst.objective_edges]
    n_a, n_c, n_o = inst.n_agents, inst.n_constraints, inst.n_objectives

    for i in singles:
        edge_iv = inst.constraint_agents[i][0]
        v = edge_iv.agent
        k_edges = inst.agent_objectives[v]
        if not k_edges:
            raise DegenerateInstanceError(
                f"agent {v} of singleton constraint {i} has no objective")
        k = k_edges[0].node  # smallest port at v comes first
        cap = 0.0
        for e in inst.objective_agents[k]:
            cap += e.coef * inst.min_inverse_coef(e.agent)
        big = 2.0 * cap

        s, t, u = n_a, n_a + 1, n_a + 2
        h, l = n_o, n_o + 1
        j = n_c
        n_a, n_c, n_o = n_a + 3, n_c + 1, n_o + 2
        cons.append(_Proto(s, i, 1.0, (1, 0), (edge_iv.port_node + 1, 0)))
        cons.append(_Proto(t, j, 1.0, (1, 0), (1, 0)))
        cons.append(_Proto(u, j, 1.0, (1, 0), (2, 0)))
        objs.append(_Proto(s, h, 1.0, (2, 0), (1, 0)))
        objs.append(_Proto(t, h, big, (2, 0), (2, 0)))
        objs.append(_Proto(s, l, 1.0, (3, 0), (1, 0)))
        objs.append(_Proto(u, l, big, (2, 0), (2, 0)))

    return _build(n_a, n_c, n_o, cons, objs), DropNewAgents(inst.n_agents)


# ---------------------------------------------------------------------------
# stage 2: reduce constraint degree to exactly two


def t2_reduce_constraint_degree(inst: Instance) -> tuple[Instance, PairSplitScale, float]:
    """Replace every constraint of degree > 2 by all pairwise constraints.

    Returns the instance, the back-map step and the approximation
    multiplier delta_I/2 of the input (1.0 when no constraint was split).
    Copies are ordered by the pair of ports at the split constraint, which
    also breaks the port ties they create at their agents.
    """
    delta = inst.delta_i
    divisors = []
    for v in range(inst.n_agents):
        degs = [len(inst.constraint_agents[e.node]) for e in inst.agent_constraints[v]]
        divisors.append(float(max(degs, default=2)))
    step = PairSplitScale(tuple(divisors))

    if all(len(inst.constraint_agents[i]) <= 2 for i in range(inst.n_constraints)):
        return inst, step, 1.0
    if any(len(inst.constraint_agents[i]) < 2 for i in range(inst.n_constraints)):
        raise MMLPError("pair split requires every constraint to have >= 2 agents")

    cons: list[_Proto] = []
    n_c = 0
    for i in range(inst.n_constraints):
        edges = inst.constraint_agents[i]  # already sorted by port at i
        if len(edges) == 2:
            for e in edges:
                cons.append(_Proto(e.agent, n_c, e.coef, (e.port_agent, 0),
                                   (e.port_node, 0)))
            n_c += 1
            continue
        tie: dict[int, int] = {e.agent: 0 for e in edges}
        for x in range(len(edges)):
            for y in range(x + 1, len(edges)):
                for e in (edges[x], edges[y]):
                    cons.append(_Proto(e.agent, n_c, e.coef,
                                       (e.port_agent, tie[e.agent]), (e.port_node, 0)))
                    tie[e.agent] += 1
                n_c += 1
    objs = [_Proto(e.agent, e.node, e.coef, (e.port_agent, 0), (e.port_node, 0))
            for e in inst.objective_edges]
    return _build(inst.n_agents, n_c, inst.n_objectives, cons, objs), step, delta / 2.0


# ---------------------------------------------------------------------------
# agent splitting shared by stages 3 and 4


def _split_agents(inst: Instance,
                  plans: dict[int, list[list[tuple[Edge, float, int]]]]
                  ) -> tuple[Instance, MaxOfCopies]:
    """Replace each planned agent by copies, all in one pass.

    plans[v][m] lists (objective edge, coefficient, tie) kept by copy m of
    agent v; copies keep a copy of every constraint of v.  A constraint over
    several planned agents gets one copy per combination of copy indices,
    enumerated lexicographically along its port order, which also serves as
    the tie order for the duplicate ports the copies create.
    """
    g = [len(plans[v]) if v in plans else 1 for v in range(inst.n_agents)]
    offset = [0] * (inst.n_agents + 1)
    for v in range(inst.n_agents):
        offset[v + 1] = offset[v] + g[v]

    cons: list[_Proto] = []
    n_c = 0
    for i in range(inst.n_constraints):
        edges = inst.constraint_agents[i]  # port order at i
        ties: dict[tuple[int, int], int] = {}
        for combo in itertools.product(*(range(g[e.agent]) for e in edges)):
            for pos, e in enumerate(edges):
                tie = ties.get((pos, combo[pos]), 0)
                ties[(pos, combo[pos])] = tie + 1
                cons.append(_Proto(offset[e.agent] + combo[pos], n_c, e.coef,
                                   (e.port_agent, tie), (e.port_node, 0)))
            n_c += 1

    objs: list[_Proto] = []
    for e in inst.objective_edges:
        if e.agent not in plans:
            objs.append(_Proto(offset[e.agent], e.node, e.coef,
                               (e.port_agent, 0), (e.port_node, 0)))
    for v, copies in plans.items():
        for m, kept in enumerate(copies):
            for e, coef, tie in kept:
                objs.append(_Proto(offset[v] + m, e.node, coef,
                                   (e.port_agent, 0), (e.port_node, tie)))

    groups = tuple(tuple(range(offset[v], offset[v + 1]))
                   for v in range(inst.n_agents))
    return _build(offset[-1], n_c, inst.n_objectives, cons, objs), MaxOfCopies(groups)


def t3_unique_objective_per_agent(inst: Instance) -> tuple[Instance, MaxOfCopies]:
    """Split every agent into one copy per adjacent objective.

    Copies are ordered by the objective ports at the agent; each adjacent
    constraint is replaced by one copy per agent copy.  Optima coincide, and
    back-mapping takes the maximum over the copies.
    """
    plans = {}
    for v in range(inst.n_agents):
        k_edges = inst.agent_objectives[v]
        if len(k_edges) > 1:
            plans[v] = [[(e, e.coef, 0)] for e in k_edges]
    if not plans:
        return inst, MaxOfCopies(tuple((v,) for v in range(inst.n_agents)))
    return _split_agents(inst, plans)


def t4_augment_singleton_objectives(inst: Instance) -> tuple[Instance, MaxOfCopies]:
    """Split the agent of every single-agent objective into two halves.

    Both copies stay adjacent to the objective with half the coefficient;
    constraints are duplicated.  Copy 0 inherits the original ports and copy
    1 follows it in every renumbering.
    """
    for v in range(inst.n_agents):
        if len(inst.agent_objectives[v]) != 1:
            raise MMLPError("objective split requires every agent to have one objective")
    plans = {}
    for k in range(inst.n_objectives):
        if len(inst.objective_agents[k]) == 1:
            e = inst.objective_agents[k][0]
            plans[e.agent] = [[(e, e.coef / 2.0, 0)], [(e, e.coef / 2.0, 1)]]
    if not plans:
        return inst, MaxOfCopies(tuple((v,) for v in range(inst.n_agents)))
    return _split_agents(inst, plans)


# ---------------------------------------------------------------------------
# stage 5: unit objective coefficients


def t5_normalize_objective_coefficients(inst: Instance) -> tuple[Instance, CoefficientScale]:
    """Scale so every objective coefficient is 1; graph and ports unchanged.

    With c_v the coefficient of the agent's unique objective edge, packing
    coefficients become a/c_v and the transformed variable stands for
    c_v * x_v, so the back-map divides by c_v.
    """
    factors = []
    for v in range(inst.n_agents):
        k_edges = inst.agent_objectives[v]
        if len(k_edges) != 1:
            raise MMLPError("coefficient scaling requires every agent to have one objective")
        factors.append(k_edges[0].coef)
    cons = tuple(Edge(e.agent, e.node, e.coef / factors[e.agent],
                      e.port_agent, e.port_node) for e in inst.constraint_edges)
    objs = tuple(Edge(e.agent, e.node, 1.0, e.port_agent, e.port_node)
                 for e in inst.objective_edges)
    out = Instance(inst.n_agents, inst.n_constraints, inst.n_objectives, cons, objs)
    return out, CoefficientScale(tuple(1.0 / f for f in factors))


# ---------------------------------------------------------------------------
# full pipeline


@dataclass(frozen=True)
class NormalizeResult:
    instance: Instance
    backmap: BackMap
    # Final agent index -> agent index of the input instance (None: gadget agent).
    agent_origin: tuple[int | None, ...]


def normalize(inst: Instance) -> NormalizeResult:
    """Run the five stages in order and certify the result.

    The input must be valid and free of degeneracies (run
    `preprocess_degenerate` first): every agent needs an objective and a
    constraint, every constraint and objective at least one agent.
    """
    bad = validate(inst)
    if bad:
        raise MMLPError("invalid instance: " + bad[0])
    for v in range(inst.n_agents):
        if not inst.agent_objectives[v] or not inst.agent_constraints[v]:
            raise DegenerateInstanceError(
                f"agent {v} lacks an objective or a constraint; preprocess first")
    for i in range(inst.n_constraints):
        if not inst.constraint_agents[i]:
            raise DegenerateInstanceError(f"constraint {i} has no agents; preprocess first")
    for k in range(inst.n_objectives):
        if not inst.objective_agents[k]:
            raise DegenerateInstanceError(f"objective {k} has no agents; preprocess first")

    i1, s1 = t1_augment_singleton_constraints(inst)
    i2, s2, multiplier = t2_reduce_constraint_degree(i1)
    i3, s3 = t3_unique_objective_per_agent(i2)
    i4, s4 = t4_augment_singleton_objectives(i3)
    i5, s5 = t5_normalize_objective_coefficients(i4)

    violations = certify_normalized(i5, allow_leaf_constraints=False)
    if violations:
        raise NormalizationError("normalization failed certification: " + violations[0])

    origin: list[int | None] = []
    for a5 in range(i5.n_agents):
        a3 = None
        for orig3, grp in enumerate(s4.groups):
            if a5 in grp:
                a3 = orig3
                break
        if a3 is None:
            origin.append(None)
            continue
        a2 = None
        for orig2, grp in enumerate(s3.groups):
            if a3 in grp:
                a2 = orig2
                break
        origin.append(a2 if (a2 is not None and a2 < s1.keep) else None)

    return NormalizeResult(i5, BackMap((s1, s2, s3, s4, s5), multiplier),
                           tuple(origin))
