"""The local solver on normalized instances.

Per agent, the optimum of the finite alternating tree around the agent is
found by bisection over a levelwise feasibility recursion; the bounds are
smoothed by taking the minimum over a radius-(4r+2) ball; depth-indexed
lower/upper envelopes are then computed per agent, and each agent outputs
the average of its envelope values.  Layer assignment and the shifted
solutions are analysis-side instruments used by the verification suites,
not part of the shipped output.

All sums run in port order and all per-node values are canonical functions
of the local view, so agents with isomorphic views produce bit-identical
outputs.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .instance import (AGENT, CONSTRAINT, OBJECTIVE, Instance, MMLPError,
                       NodeRef, Solution, connected_components)
from .unfold import (AlternatingTree, LocalView, NormalizationError,
                     build_alternating_tree, grow_alternating_tree,
                     tree_agent_constraints, tree_objective_neighbors,
                     unfold_to_depth)

BISECT_ITERATIONS = 64


@dataclass(frozen=True)
class Params:
    """Solver parameters: R fixes horizon and approximation quality."""

    R: int
    bisect_tol: float = 1e-9
    horizon: int | None = None  # defaults to 12r+7, the information reach

    def __post_init__(self):
        if self.R < 2:
            raise MMLPError("R must be >= 2")
        if not self.bisect_tol > 0:
            raise MMLPError("bisect_tol must be > 0")
        if self.horizon is not None and self.horizon < 12 * (self.R - 2) + 7:
            raise MMLPError("horizon must be >= 12(R-2)+7")

    @property
    def rounds(self) -> int:
        return self.R - 2

    @property
    def depth(self) -> int:
        return self.horizon if self.horizon is not None else 12 * (self.R - 2) + 7


@dataclass
class TreeTables:
    """Levelwise recursion values for one tree at one candidate utility.

    `upper[(node, d)]` caps what the agent can still output given the
    constraints below it; `lower[(node, d)]` is what it must output for the
    objectives below to reach the candidate.  `feasible` is the conjunction
    of all caps staying nonnegative and the root demand staying within the
    root's own cap.
    """

    omega: float
    upper: dict[tuple[int, int], float]
    lower: dict[tuple[int, int], float]
    feasible: bool


@dataclass
class _TreePlan:
    """Static evaluation order for the levelwise recursion of one tree.

    Per depth index d: `up_rows[d]` holds (node, ((1/a, a_partner, partner),
    ...)) for the agents whose cap is computed at d, and `lo_rows[d]` holds
    (node, (other agents of the node's objective, in port order)).
    """

    up_rows: list[list[tuple[int, tuple[tuple[float, float, int], ...]]]]
    lo_rows: list[list[tuple[int, tuple[int, ...]]]]
    root_cap: float


def _tree_plan(tree: AlternatingTree) -> _TreePlan:
    plan = getattr(tree, "_plan", None)
    if plan is not None:
        return plan
    r = tree.r
    up_rows = []
    lo_rows = []
    for d in range(r + 1):
        ups = []
        for ti in tree.agents_by_level.get(4 * (r - d) + 1, ()):
            cons = tuple((1.0 / a, ap, -1 if p is None else p)
                         for a, p, ap in tree_agent_constraints(tree, ti))
            ups.append((ti, cons))
        up_rows.append(ups)
        los = []
        for ti in tree.agents_by_level.get(4 * (r - d) - 1, ()):
            obj = next(c for c in tree.nodes[ti].children
                       if tree.nodes[c].kind == OBJECTIVE)
            others = tuple(w for w in tree_objective_neighbors(tree, obj) if w != ti)
            los.append((ti, others))
        lo_rows.append(los)
    root_cap = min(1.0 / a for a, _, _ in tree_agent_constraints(tree, tree.root))
    plan = _TreePlan(up_rows, lo_rows, root_cap)
    tree._plan = plan
    return plan


def tree_tables(tree: AlternatingTree, omega: float) -> TreeTables:
    """Evaluate the recursion bottom-up; one pass per depth index d."""
    plan = _tree_plan(tree)
    r = tree.r
    upper: dict[tuple[int, int], float] = {}
    lower: dict[tuple[int, int], float] = {}
    up_cur: dict[int, float] = {}
    lo_prev: dict[int, float] = {}
    ok = True
    for d in range(r + 1):
        up_cur = {}
        for ti, cons in plan.up_rows[d]:
            if d == 0:
                val = min(inv for inv, _, _ in cons)
            else:
                val = min(inv * (1.0 - (ap * lo_prev[p] if p >= 0 else 0.0))
                          for inv, ap, p in cons)
            up_cur[ti] = val
            upper[(ti, d)] = val
            if val < 0.0:
                ok = False
        lo_cur: dict[int, float] = {}
        for ti, others in plan.lo_rows[d]:
            total = omega
            for w in others:
                total -= up_cur[w]
            lo_cur[ti] = max(0.0, total)
            lower[(ti, d)] = lo_cur[ti]
        lo_prev = lo_cur
    if lower[(tree.root, r)] > plan.root_cap:
        ok = False
    return TreeTables(omega, upper, lower, ok)


def tree_feasible(tree: AlternatingTree, omega: float) -> bool:
    """Whether a candidate utility passes the tree recursion; monotone in omega."""
    if omega < 0:
        raise MMLPError("omega must be >= 0")
    plan = _tree_plan(tree)
    lo_prev: dict[int, float] = {}
    for d in range(len(plan.up_rows)):
        up_cur: dict[int, float] = {}
        for ti, cons in plan.up_rows[d]:
            if d == 0:
                val = min(inv for inv, _, _ in cons)
            else:
                val = min(inv * (1.0 - (ap * lo_prev[p] if p >= 0 else 0.0))
                          for inv, ap, p in cons)
            if val < 0.0:
                return False
            up_cur[ti] = val
        lo_cur: dict[int, float] = {}
        for ti, others in plan.lo_rows[d]:
            total = omega
            for w in others:
                total -= up_cur[w]
            lo_cur[ti] = max(0.0, total)
        lo_prev = lo_cur
    return lo_prev[0] <= plan.root_cap


def tree_utility_cap(tree: AlternatingTree) -> float:
    """max over tree objectives of sum of the agents' trivial caps.

    Any feasible solution of the restricted problem keeps each x_v at or
    below its cheapest in-tree constraint bound, so this bounds the optimum
    and is a safe bisection ceiling.
    """
    best = 0.0
    for ti, t in enumerate(tree.nodes):
        if t.kind != OBJECTIVE:
            continue
        total = 0.0
        for w in tree_objective_neighbors(tree, ti):
            total += min(1.0 / a for a, _, _ in tree_agent_constraints(tree, w))
        best = max(best, total)
    return best


def tree_bound(tree: AlternatingTree, tol: float) -> float:
    """Largest feasible utility of the tree recursion, within tol from below.

    Returns the last feasible bisection endpoint, never an infeasible one:
    an underestimate only costs tol in the final ratio, while an
    overestimate could break feasibility of the assembled output.
    """
    if not tol > 0:
        raise MMLPError("tol must be > 0")
    hi = tree_utility_cap(tree)
    if tree_feasible(tree, hi):
        return hi
    lo = 0.0
    for _ in range(BISECT_ITERATIONS):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        if tree_feasible(tree, mid):
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# smoothing, envelopes, output


def agent_tree(inst: Instance, v: int, r: int) -> AlternatingTree:
    return grow_alternating_tree(inst, v, r)


def agent_bounds(inst: Instance, params: Params) -> dict[int, float]:
    """Per-agent alternating-tree bound, optionally in parallel (MMLP_THREADS)."""
    r = params.rounds

    def one(v: int) -> float:
        return tree_bound(agent_tree(inst, v, r), params.bisect_tol)

    threads = int(os.environ.get("MMLP_THREADS", "1") or "1")
    agents = range(inst.n_agents)
    if threads > 1 and inst.n_agents > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vals = list(pool.map(one, agents))
    else:
        vals = [one(v) for v in agents]
    return dict(enumerate(vals))


def smooth_bounds(inst: Instance, t: dict[int, float], r: int) -> dict[int, float]:
    """Minimum of the per-agent bounds over the radius-(4r+2) ball.

    Agents reachable within the radius are exactly the end nodes of
    non-backtracking walks of that length, so graph distance on the instance
    agrees with distance in the unfolding.
    """
    radius = 4 * r + 2
    out: dict[int, float] = {}
    for v in range(inst.n_agents):
        if v not in t:
            raise MMLPError(f"missing bound for agent {v}")
        best = t[v]
        seen: set[NodeRef] = {(AGENT, v)}
        frontier: list[NodeRef] = [(AGENT, v)]
        for _ in range(radius):
            nxt: list[NodeRef] = []
            for ref in frontier:
                for inc in inst.incident(ref):
                    if inc.other in seen:
                        continue
                    seen.add(inc.other)
                    nxt.append(inc.other)
                    if inc.other[0] == AGENT:
                        best = min(best, t[inc.other[1]])
            frontier = nxt
        out[v] = best
    return out


@dataclass
class Envelopes:
    """Per-agent, per-depth envelope values plus the smoothed bounds.

    `upper[d][v]` is the largest value agent v can safely output after d
    rounds of reacting to the demands below it; `lower[d][v]` the smallest
    value that still lets v's objective reach the smoothed bound given what
    the other agents of that objective can contribute.
    """

    rounds: int
    upper: list[list[float]]
    lower: list[list[float]]
    smoothed: list[float]


def compute_envelopes(inst: Instance, s: dict[int, float], r: int) -> Envelopes:
    """Depth-indexed envelope recursion, evaluated directly on the instance.

    Walk-copies of one agent all receive equal values, so evaluating on the
    instance equals evaluating on the unfolding.  Per depth index, all upper
    values are computed first, then all lower values; sums over an
    objective's other agents run in port order at the objective.
    """
    n = inst.n_agents
    upper: list[list[float]] = []
    lower: list[list[float]] = []
    for d in range(r + 1):
        up_row = []
        for v in range(n):
            if d == 0:
                val = min(1.0 / e.coef for e in inst.agent_constraints[v])
            else:
                val = None
                for e in inst.agent_constraints[v]:
                    partner = inst.constraint_partner(e.node, v)
                    if partner is None:
                        term = 1.0 / e.coef
                    else:
                        term = (1.0 / e.coef) * (1.0 - partner.coef * lower[d - 1][partner.agent])
                    val = term if val is None else min(val, term)
            up_row.append(val)
        upper.append(up_row)
        lo_row = []
        for v in range(n):
            k_edges = inst.agent_objectives[v]
            if len(k_edges) != 1:
                raise NormalizationError(f"agent {v} must have exactly one objective")
            k = k_edges[0].node
            total = s[v]
            for e in inst.objective_agents[k]:
                if e.agent != v:
                    total -= up_row[e.agent]
            lo_row.append(max(0.0, total))
        lower.append(lo_row)
    return Envelopes(r, upper, lower, [s[v] for v in range(n)])


def output_solution(env: Envelopes, R: int) -> Solution:
    """x_v = (1/2R) * sum over d of (upper + lower) envelope values."""
    if R != env.rounds + 2:
        raise MMLPError("R must equal rounds + 2 of the envelope table")
    n = len(env.smoothed)
    vals = {}
    for v in range(n):
        acc = 0.0
        for d in range(env.rounds + 1):
            acc += env.upper[d][v] + env.lower[d][v]
        vals[v] = acc / (2.0 * R)
    return Solution(vals)


def certify_normalized(inst: Instance, allow_leaf_constraints: bool = True) -> list[str]:
    """Violations of the normalized-shape preconditions (empty list = certified).

    Singleton constraints are accepted by default: finite trees need them at
    the leaves, matching the restricted trees the solver itself builds.
    Pass allow_leaf_constraints=False for the strict shape produced by the
    normalization pipeline.
    """
    out = []
    for i in range(inst.n_constraints):
        deg = len(inst.constraint_agents[i])
        low = 1 if allow_leaf_constraints else 2
        if not (low <= deg <= 2):
            out.append(f"constraint {i} has {deg} agents, expected "
                       + ("1 or 2" if allow_leaf_constraints else "exactly 2"))
    for k in range(inst.n_objectives):
        if len(inst.objective_agents[k]) < 2:
            out.append(f"objective {k} has fewer than two agents")
        for e in inst.objective_agents[k]:
            if e.coef != 1.0:
                out.append(f"objective coefficient at objective {k}, agent {e.agent} is not 1")
    for v in range(inst.n_agents):
        if len(inst.agent_objectives[v]) != 1:
            out.append(f"agent {v} has {len(inst.agent_objectives[v])} objectives, expected 1")
        if not inst.agent_constraints[v]:
            out.append(f"agent {v} has no constraints")
    return out


def solve_local(inst: Instance, params: Params) -> Solution:
    """Full local pipeline on a normalized instance.

    Deterministic, never reads the degree bounds, and each output depends
    only on the agent's depth-(12r+7) view (bound radius 4r+3, smoothing
    radius 4r+2, envelope reach 4r).
    """
    bad = certify_normalized(inst)
    if bad:
        raise NormalizationError("; ".join(bad))
    r = params.rounds
    t = agent_bounds(inst, params)
    s = smooth_bounds(inst, t, r)
    env = compute_envelopes(inst, s, r)
    return output_solution(env, params.R)


# ---------------------------------------------------------------------------
# layers and shifting (analysis instrumentation)


UP = "up"
DOWN = "down"

# Traversal weights for layer assignment: walking an edge in the direction
# given below adds the weight, the reverse direction subtracts it.
#   down-agent -> objective: -1     objective -> down-agent: +1
#   objective  -> up-agent:  -1     up-agent  -> objective:  +1
#   up-agent   -> constraint: -1    constraint -> up-agent:  +1
#   constraint -> down-agent: -1    down-agent -> constraint: +1


@dataclass(frozen=True)
class LayerAssignment:
    layer: dict[NodeRef, int]
    role: dict[int, str]


def assign_layers(inst: Instance, root_objective: int,
                  up_agent: int) -> LayerAssignment:
    """Layers and up/down roles on a finite tree instance.

    The root objective sits at layer 0 with `up_agent` as its up-agent at
    layer -1.  When the traversal reaches an objective from one of its
    down-agents, its up-agent is chosen as the unassigned neighbor with the
    smallest port at the objective (the assignment is not unique; this pins
    a deterministic one).  Cyclic instances admit no globally consistent
    assignment in general and are rejected.
    """
    comp = _tree_check(inst)
    if not (0 <= root_objective < inst.n_objectives):
        raise MMLPError(f"objective {root_objective} is not in the instance")
    if up_agent not in [e.agent for e in inst.objective_agents[root_objective]]:
        raise MMLPError(f"agent {up_agent} is not adjacent to objective {root_objective}")

    layer: dict[NodeRef, int] = {(OBJECTIVE, root_objective): 0}
    role: dict[int, str] = {}

    def enter_objective(k: int, come_from: int | None) -> None:
        lay = layer[(OBJECTIVE, k)]
        edges = inst.objective_agents[k]
        unassigned = [e for e in edges if e.agent not in role]
        if come_from is None or role[come_from] == DOWN:
            if not unassigned:
                raise MMLPError(f"objective {k} has no agent left for the up role")
            chosen = up_agent if come_from is None else unassigned[0].agent
            role[chosen] = UP
            layer[(AGENT, chosen)] = lay - 1
        for e in edges:
            if e.agent not in role:
                role[e.agent] = DOWN
                layer[(AGENT, e.agent)] = lay + 1
        for e in edges:
            if e.agent != come_from:
                enter_agent(e.agent, k)

    def enter_agent(v: int, come_from_obj: int | None) -> None:
        lay = layer[(AGENT, v)]
        for e in inst.agent_objectives[v]:
            if e.node == come_from_obj:
                continue
            layer[(OBJECTIVE, e.node)] = lay + 1 if role[v] == UP else lay - 1
            enter_objective(e.node, v)
        for e in inst.agent_constraints[v]:
            if (CONSTRAINT, e.node) in layer:
                continue
            clay = lay - 1 if role[v] == UP else lay + 1
            layer[(CONSTRAINT, e.node)] = clay
            partner = inst.constraint_partner(e.node, v)
            if partner is not None:
                role[partner.agent] = DOWN if role[v] == UP else UP
                layer[(AGENT, partner.agent)] = clay - 1 if role[v] == UP else clay + 1
                enter_agent(partner.agent, None)

    enter_objective(root_objective, None)
    if len(layer) != len(comp):
        raise MMLPError("layer assignment did not reach the whole component")
    return LayerAssignment(layer, role)


def _tree_check(inst: Instance) -> set[NodeRef]:
    """All nodes of the instance; error unless it is one connected tree."""
    n_nodes = inst.n_agents + inst.n_constraints + inst.n_objectives
    n_edges = len(inst.constraint_edges) + len(inst.objective_edges)
    comp_ids = connected_components(inst)
    n_comps = (max(comp_ids.values()) + 1) if comp_ids else 0
    if n_comps != 1 or n_edges != n_nodes - 1:
        raise MMLPError("layer assignment requires one connected tree instance")
    if inst.n_objectives == 0:
        raise MMLPError("layer assignment needs at least one objective")
    return set(comp_ids)


def shift_solution(inst: Instance, env: Envelopes, layers: LayerAssignment,
                   j: int, R: int) -> Solution:
    """Deactivate every R-th layer block and read envelope values elsewhere.

    The agent's layer decomposes uniquely as 4(R*c + j) + 4d + e with
    0 <= d <= R-1 and e in {-1, 1}; down-agents always have e = 1 and
    up-agents e = -1.  Passive agents (d = R-1) output 0; otherwise
    up-agents output the lower envelope at depth r-d and down-agents the
    upper envelope at depth r-d.
    """
    if not (0 <= j <= R - 1):
        raise MMLPError(f"shift parameter j={j} out of range 0..{R - 1}")
    if R != env.rounds + 2:
        raise MMLPError("R must equal rounds + 2 of the envelope table")
    r = env.rounds
    vals: dict[int, float] = {}
    for v in range(inst.n_agents):
        lay = layers.layer[(AGENT, v)]
        e = 1 if lay % 4 == 1 else -1
        d = ((lay - e) // 4 - j) % R
        if d == R - 1:
            vals[v] = 0.0
        elif e == -1:
            vals[v] = env.lower[r - d][v]
        else:
            vals[v] = env.upper[r - d][v]
    return Solution(vals)


def passive_objectives(inst: Instance, layers: LayerAssignment, j: int, R: int) -> list[int]:
    """Objectives whose whole neighborhood is deactivated under shift j."""
    return [k for k in range(inst.n_objectives)
            if layers.layer[(OBJECTIVE, k)] % (4 * R) == (4 * j - 4) % (4 * R)]


def average_shifts(inst: Instance, env: Envelopes, layers: LayerAssignment,
                   R: int) -> Solution:
    """Plain average of the R shifted solutions."""
    acc = {v: 0.0 for v in range(inst.n_agents)}
    for j in range(R):
        y = shift_solution(inst, env, layers, j, R)
        for v, val in y.values.items():
            acc[v] += val
    return Solution({v: val / R for v, val in acc.items()})
