"""Ground truth and verification harness.

`lp_feasible` decides {A x <= 1, C x >= omega, x >= 0} with a dense
phase-one simplex using Bland's rule, and `solve_exact` wraps it in a
bisection over omega.  `compare` runs the full local pipeline against the
oracle and asserts the approximation-ratio bound.  `property_suite` checks
every structural and numerical invariant of the solver on finite tree
instances, and `check_locality` verifies that agents with isomorphic views
produce bit-identical outputs.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (DOWN, UP, Envelopes, LayerAssignment, Params, agent_bounds,
                   agent_tree, assign_layers, average_shifts, certify_normalized,
                   compute_envelopes, output_solution, passive_objectives,
                   shift_solution, smooth_bounds, solve_local, tree_bound,
                   tree_tables)
from .instance import (AGENT, CONSTRAINT, OBJECTIVE, DegenerateInstanceError,
                       Instance, MMLPError, Solution, check_feasible,
                       preprocess_degenerate, utility)
from .transform import normalize
from .unfold import (alternating_tree_to_instance, unfold_to_depth,
                     view_isomorphic)

PIVOT_TOL = 1e-9
MAX_PIVOTS = 20000


# ---------------------------------------------------------------------------
# linear feasibility oracle


def lp_feasible(a_rows: list[list[float]], c_rows: list[list[float]],
                omega: float, tol: float = 1e-9) -> tuple[bool, list[float] | None, float]:
    """Decide feasibility of {A x <= 1, C x >= omega, x >= 0} within tol.

    Returns (feasible, witness x or None, residual); the residual is the
    phase-one objective, a refusal certificate when positive.  Slack columns
    start the A-rows in basis; artificial columns cover the C-rows, and
    minimizing their sum with Bland's rule terminates without cycling.
    """
    n = len(a_rows[0]) if a_rows else (len(c_rows[0]) if c_rows else 0)
    for row in a_rows + c_rows:
        if len(row) != n:
            raise MMLPError("lp_feasible: ragged coefficient rows")
    m, p = len(a_rows), len(c_rows)
    if omega <= 0 or p == 0:
        return True, [0.0] * n, 0.0

    # Columns: x (n) | slack (m) | surplus (p) | artificial (p) | rhs.
    width = n + m + 2 * p + 1
    T = np.zeros((m + p + 1, width))
    for r, row in enumerate(a_rows):
        T[r, :n] = row
        T[r, n + r] = 1.0
        T[r, -1] = 1.0
    for q, row in enumerate(c_rows):
        r = m + q
        T[r, :n] = row
        T[r, n + m + q] = -1.0
        T[r, n + m + p + q] = 1.0
        T[r, -1] = omega
    basis = list(range(n, n + m)) + list(range(n + m + p, n + m + 2 * p))
    # Phase-one cost row, reduced against the artificial basis.
    T[-1, n + m + p:n + m + 2 * p] = 1.0
    T[-1] -= T[m:m + p].sum(axis=0)

    for _ in range(MAX_PIVOTS):
        entering = -1
        for j in range(width - 1):
            if T[-1, j] < -PIVOT_TOL:
                entering = j
                break
        if entering < 0:
            break
        leaving = -1
        best = math.inf
        for r in range(m + p):
            a = T[r, entering]
            if a > PIVOT_TOL:
                ratio = T[r, -1] / a
                if ratio < best - PIVOT_TOL or (ratio < best + PIVOT_TOL
                                                and (leaving < 0 or basis[r] < basis[leaving])):
                    best = ratio
                    leaving = r
        if leaving < 0:
            break  # cost is bounded below by 0, so this cannot happen
        T[leaving] /= T[leaving, entering]
        col = T[:, entering].copy()
        col[leaving] = 0.0
        T -= np.outer(col, T[leaving])
        basis[leaving] = entering
    else:
        raise MMLPError("lp_feasible: pivot limit exceeded")

    residual = float(-T[-1, -1])
    if residual > tol:
        return False, None, residual
    x = [0.0] * n
    for r, b in enumerate(basis):
        if b < n:
            x[b] = max(0.0, float(T[r, -1]))
    return True, x, max(0.0, residual)


def _rows(inst: Instance) -> tuple[list[list[float]], list[list[float]]]:
    a_rows = []
    for i in range(inst.n_constraints):
        row = [0.0] * inst.n_agents
        for e in inst.constraint_agents[i]:
            row[e.agent] = e.coef
        a_rows.append(row)
    c_rows = []
    for k in range(inst.n_objectives):
        row = [0.0] * inst.n_agents
        for e in inst.objective_agents[k]:
            row[e.agent] = e.coef
        c_rows.append(row)
    return a_rows, c_rows


def utility_cap(inst: Instance) -> float:
    """max over objectives of the summed trivial caps; bounds the optimum."""
    best = 0.0
    for k in range(inst.n_objectives):
        total = 0.0
        for e in inst.objective_agents[k]:
            total += e.coef * inst.min_inverse_coef(e.agent)
        best = max(best, total)
    return best


def solve_exact(inst: Instance, tol: float = 1e-9) -> tuple[float, Solution]:
    """Largest utility feasible within tol, by bisection over the oracle.

    Returns the last feasible bisection endpoint and its witness, so the
    reported optimum never exceeds the true one by more than roundoff.
    """
    for v in range(inst.n_agents):
        if not inst.agent_constraints[v]:
            raise DegenerateInstanceError(
                f"agent {v} is unconstrained; the optimum is unbounded")
    if inst.n_objectives == 0:
        raise DegenerateInstanceError("no objectives; the optimum is unbounded")
    a_rows, c_rows = _rows(inst)
    hi = utility_cap(inst)
    ok, witness, _ = lp_feasible(a_rows, c_rows, hi, tol)
    if ok:
        return hi, Solution(dict(enumerate(witness)))
    lo = 0.0
    best = [0.0] * inst.n_agents
    for _ in range(64):
        if hi - lo < tol:
            break
        mid = 0.5 * (lo + hi)
        ok, witness, _ = lp_feasible(a_rows, c_rows, mid, tol)
        if ok:
            lo = mid
            best = witness
        else:
            hi = mid
    return lo, Solution(dict(enumerate(best)))


def safe_baseline(inst: Instance) -> Solution:
    """x_v = min over the agent's constraints of 1/(a * |V_i|).

    Always feasible (each constraint row sums to at most one); no
    approximation ratio is asserted for it here, it is a comparison
    baseline only.
    """
    vals = {}
    for v in range(inst.n_agents):
        edges = inst.agent_constraints[v]
        if not edges:
            raise DegenerateInstanceError(f"agent {v} has no constraints")
        vals[v] = min(1.0 / (e.coef * len(inst.constraint_agents[e.node]))
                      for e in edges)
    return Solution(vals)


# ---------------------------------------------------------------------------
# full-pipeline comparison


@dataclass
class Report:
    exact_optimum: float
    local_utility: float
    ratio: float | None
    ratio_bound: float
    normalized_bound: float
    feasible: bool
    bound_ok: bool
    delta_i: int
    delta_k: int
    R: int
    multiplier: float
    properties: dict[str, tuple[bool, str]] = field(default_factory=dict)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (self.feasible and self.bound_ok
                and all(okay for okay, _ in self.properties.values()))

    def to_text(self) -> str:
        lines = [
            f"exact_optimum {self.exact_optimum!r}",
            f"local_utility {self.local_utility!r}",
            f"ratio {'n/a' if self.ratio is None else repr(self.ratio)}",
            f"ratio_bound {self.ratio_bound!r}",
            f"feasible {'yes' if self.feasible else 'NO'}",
            f"bound_ok {'yes' if self.bound_ok else 'NO'}",
            f"delta_i {self.delta_i}",
            f"delta_k {self.delta_k}",
            f"R {self.R}",
            f"multiplier {self.multiplier!r}",
        ]
        for name, (okay, detail) in sorted(self.properties.items()):
            suffix = "" if not detail or okay else f" ({detail})"
            lines.append(f"property {name} {'pass' if okay else 'FAIL'}{suffix}")
        for name, secs in sorted(self.timings.items()):
            lines.append(f"time_{name} {secs:.3f}")
        return "\n".join(lines) + "\n"

    def to_tsv(self) -> str:
        head = ["exact_optimum", "local_utility", "ratio", "ratio_bound",
                "feasible", "bound_ok", "delta_i", "delta_k", "R", "multiplier"]
        vals = [repr(self.exact_optimum), repr(self.local_utility),
                "n/a" if self.ratio is None else repr(self.ratio),
                repr(self.ratio_bound), str(int(self.feasible)),
                str(int(self.bound_ok)), str(self.delta_i), str(self.delta_k),
                str(self.R), repr(self.multiplier)]
        return "\t".join(head) + "\n" + "\t".join(vals) + "\n"


def ratio_bound(delta_i: int, delta_k: int, R: int) -> float:
    """delta_I (1 - 1/delta_K) (1 + 1/(R-1)), with degrees floored at 2.

    The pipeline only ever raises degrees below two up to two (gadgets and
    splits), so the guarantee holds with the floored values.
    """
    di = max(2, delta_i)
    dk = max(2, delta_k)
    return di * (1.0 - 1.0 / dk) * (1.0 + 1.0 / (R - 1))


def solve_pipeline(inst: Instance, params: Params) -> tuple[Solution, float, dict[str, float]]:
    """preprocess -> normalize -> local solve -> back-map -> reinsert zeros."""
    times: dict[str, float] = {}
    t0 = time.perf_counter()
    cleaned, report = preprocess_degenerate(inst)
    if report.unbounded_agents:
        raise DegenerateInstanceError(
            f"unbounded agents {report.unbounded_agents}; refusing to solve")
    norm = normalize(cleaned)
    times["normalize"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    x_norm = solve_local(norm.instance, params)
    times["solve_local"] = time.perf_counter() - t0

    x_clean = norm.backmap.apply(x_norm)
    vals = {old: 0.0 for old in range(inst.n_agents)}
    for new_idx, old_idx in enumerate(report.agent_ids):
        vals[old_idx] = x_clean.values[new_idx]
    return Solution(vals), norm.backmap.multiplier, times


def compare(inst: Instance, params: Params, bound_slack: float = 1e-3) -> Report:
    """Run the pipeline and the oracle, assemble the ratio report."""
    x, multiplier, times = solve_pipeline(inst, params)
    local_util = utility(inst, x)
    feas = check_feasible(inst, x, params.bisect_tol)

    t0 = time.perf_counter()
    cleaned, report0 = preprocess_degenerate(inst)
    if report0.zero_forcing:
        exact = 0.0
    else:
        exact, _ = solve_exact(cleaned, params.bisect_tol)
    times["solve_exact"] = time.perf_counter() - t0

    bound = ratio_bound(inst.delta_i, inst.delta_k, params.R)
    norm_bound = ratio_bound(2, inst.delta_k, params.R)
    if local_util > 0.0:
        ratio = exact / local_util
        bound_ok = ratio <= bound + bound_slack
    else:
        ratio = None
        bound_ok = exact <= params.bisect_tol
    return Report(exact, local_util, ratio, bound, norm_bound, feas.ok, bound_ok,
                  inst.delta_i, inst.delta_k, params.R, multiplier, {}, times)


# ---------------------------------------------------------------------------
# locality


def check_locality(inst_a: Instance, inst_b: Instance, va: int, vb: int,
                   params: Params) -> bool:
    """Isomorphic horizon views must give bit-identical outputs.

    Returns True when the implication held, including vacuously when the
    views differ (reported as not applicable by `locality_applicable`).
    """
    if not locality_applicable(inst_a, inst_b, va, vb, params):
        return True
    xa = solve_local(inst_a, params)
    xb = solve_local(inst_b, params)
    return xa.values[va] == xb.values[vb]


def locality_applicable(inst_a: Instance, inst_b: Instance, va: int, vb: int,
                        params: Params) -> bool:
    view_a = unfold_to_depth(inst_a, (AGENT, va), params.depth)
    view_b = unfold_to_depth(inst_b, (AGENT, vb), params.depth)
    return view_isomorphic(view_a, view_b)


# ---------------------------------------------------------------------------
# property suite on finite tree instances


@dataclass(frozen=True)
class CheckResult:
    ok: bool
    detail: str = ""


def _fail(msgs: list[str]) -> CheckResult:
    return CheckResult(not msgs, "; ".join(msgs[:3]))


def check_tree_structure(inst: Instance, r: int) -> CheckResult:
    """Level congruences, leaf shape and objective completeness of every tree."""
    msgs = []
    singleton = {i for i in range(inst.n_constraints)
                 if len(inst.constraint_agents[i]) == 1}
    for u in range(inst.n_agents):
        tree = agent_tree(inst, u, r)
        for ti, t in enumerate(tree.nodes):
            want = {OBJECTIVE: 0, CONSTRAINT: 2}.get(t.kind)
            if want is not None and t.level % 4 != want:
                msgs.append(f"u={u}: {t.kind}-node at level {t.level}")
            if t.kind == AGENT and t.level % 4 not in (1, 3):
                msgs.append(f"u={u}: agent at level {t.level}")
            if not t.children and ti != tree.root:
                if t.kind != CONSTRAINT:
                    msgs.append(f"u={u}: leaf of kind {t.kind} at level {t.level}")
                elif t.level not in (-2, 4 * r + 2) and t.orig not in singleton:
                    msgs.append(f"u={u}: leaf constraint at level {t.level}")
            if t.kind == OBJECTIVE:
                adjacent = 1 + sum(1 for c in t.children
                                   if tree.nodes[c].kind == AGENT)
                if adjacent != len(inst.objective_agents[t.orig]):
                    msgs.append(f"u={u}: objective {t.orig} missing agents")
    return _fail(msgs)


def check_tree_bound_upper(inst: Instance, params: Params) -> CheckResult:
    """Each tree restriction's optimum bounds the instance optimum from above."""
    tol = params.bisect_tol
    opt, _ = solve_exact(inst, tol)
    msgs = []
    for u in range(inst.n_agents):
        tree = agent_tree(inst, u, params.rounds)
        sub, _ = alternating_tree_to_instance(tree)
        sub_opt, _ = solve_exact(sub, tol)
        if sub_opt < opt - 2 * tol:
            msgs.append(f"u={u}: tree optimum {sub_opt} < instance optimum {opt}")
    return _fail(msgs)


def check_tree_bound_exact(inst: Instance, params: Params) -> CheckResult:
    """The bisected recursion bound equals the tree restriction's optimum."""
    tol = params.bisect_tol
    msgs = []
    for u in range(inst.n_agents):
        tree = agent_tree(inst, u, params.rounds)
        bound = tree_bound(tree, tol)
        sub, _ = alternating_tree_to_instance(tree)
        sub_opt, _ = solve_exact(sub, tol)
        if abs(bound - sub_opt) > 2 * tol:
            msgs.append(f"u={u}: bound {bound} vs oracle {sub_opt}")
    return _fail(msgs)


def check_envelope_dominance(inst: Instance, params: Params,
                             t: dict[int, float], env: Envelopes) -> CheckResult:
    """Tree tables at the bisected bound sandwich the smoothed envelopes."""
    eps = 10.0 * params.bisect_tol * inst.n_agents
    r = params.rounds
    msgs = []
    for u in range(inst.n_agents):
        tree = agent_tree(inst, u, r)
        tables = tree_tables(tree, t[u])
        for (ti, d), val in tables.upper.items():
            orig = tree.nodes[ti].orig
            if val > env.upper[d][orig] + eps:
                msgs.append(f"u={u}: tree upper exceeds envelope at agent {orig}, d={d}")
        for (ti, d), val in tables.lower.items():
            orig = tree.nodes[ti].orig
            if env.lower[d][orig] > val + eps:
                msgs.append(f"u={u}: envelope lower exceeds tree value at agent {orig}, d={d}")
    return _fail(msgs)


def check_envelope_caps(inst: Instance, env: Envelopes) -> CheckResult:
    """At the last depth: upper stays nonnegative, lower below the trivial cap."""
    eps = 1e-12
    msgs = []
    r = env.rounds
    for v in range(inst.n_agents):
        if env.upper[r][v] < -eps:
            msgs.append(f"agent {v}: upper[{r}] = {env.upper[r][v]}")
        cap = inst.min_inverse_coef(v)
        if env.lower[r][v] > cap + eps:
            msgs.append(f"agent {v}: lower[{r}] = {env.lower[r][v]} > cap {cap}")
    return _fail(msgs)


def check_envelope_monotone(inst: Instance, env: Envelopes) -> CheckResult:
    """lower grows and upper shrinks as the depth index increases."""
    eps = 1e-12
    msgs = []
    for d in range(1, env.rounds + 1):
        for v in range(inst.n_agents):
            if env.lower[d - 1][v] > env.lower[d][v] + eps:
                msgs.append(f"agent {v}: lower not monotone at d={d}")
            if env.upper[d][v] > env.upper[d - 1][v] + eps:
                msgs.append(f"agent {v}: upper not monotone at d={d}")
    return _fail(msgs)


def check_envelope_nonnegative(inst: Instance, env: Envelopes) -> CheckResult:
    eps = 1e-12
    msgs = [f"agent {v}: upper[{d}] = {env.upper[d][v]}"
            for d in range(env.rounds + 1)
            for v in range(inst.n_agents) if env.upper[d][v] < -eps]
    return _fail(msgs)


def check_layers(inst: Instance, layers: LayerAssignment) -> CheckResult:
    """Congruences mod 4 plus the role counts at constraints and objectives."""
    msgs = []
    for v in range(inst.n_agents):
        lay = layers.layer[(AGENT, v)]
        if layers.role[v] == DOWN and lay % 4 != 1:
            msgs.append(f"down-agent {v} at layer {lay}")
        if layers.role[v] == UP and lay % 4 != 3:
            msgs.append(f"up-agent {v} at layer {lay}")
    for i in range(inst.n_constraints):
        if layers.layer[(CONSTRAINT, i)] % 4 != 2:
            msgs.append(f"constraint {i} at layer {layers.layer[(CONSTRAINT, i)]}")
        roles = sorted(layers.role[e.agent] for e in inst.constraint_agents[i])
        if len(roles) == 2 and roles != [DOWN, UP]:
            msgs.append(f"constraint {i} roles {roles}")
    for k in range(inst.n_objectives):
        if layers.layer[(OBJECTIVE, k)] % 4 != 0:
            msgs.append(f"objective {k} at layer {layers.layer[(OBJECTIVE, k)]}")
        ups = sum(1 for e in inst.objective_agents[k] if layers.role[e.agent] == UP)
        if ups != 1:
            msgs.append(f"objective {k} has {ups} up-agents")
    return _fail(msgs)


def _objective_value(inst: Instance, k: int, x: Solution) -> float:
    return sum(e.coef * x.values[e.agent] for e in inst.objective_agents[k])


def check_shifts(inst: Instance, params: Params, env: Envelopes,
                 layers: LayerAssignment) -> CheckResult:
    """Each shifted solution is feasible, zero exactly on its passive
    objectives and above the smoothed bound elsewhere."""
    R = params.R
    eps = 10.0 * params.bisect_tol * inst.n_agents
    msgs = []
    for j in range(R):
        y = shift_solution(inst, env, layers, j, R)
        feas = check_feasible(inst, y, params.bisect_tol)
        if not feas.ok:
            msgs.append(f"j={j}: infeasible at constraints {feas.violated_constraints}")
        passive = set(passive_objectives(inst, layers, j, R))
        for k in range(inst.n_objectives):
            val = _objective_value(inst, k, y)
            if k in passive and val != 0.0:
                msgs.append(f"j={j}: passive objective {k} has value {val}")
            if k not in passive:
                floor = min(env.smoothed[e.agent] for e in inst.objective_agents[k])
                if val < floor - eps:
                    msgs.append(f"j={j}: objective {k} value {val} < floor {floor}")
    return _fail(msgs)


def check_shift_average(inst: Instance, params: Params, env: Envelopes,
                        layers: LayerAssignment) -> CheckResult:
    """The shift average matches its closed form and meets (1-1/R) of the bound."""
    R = params.R
    r = params.rounds
    eps = 10.0 * params.bisect_tol * inst.n_agents
    msgs = []
    y = average_shifts(inst, env, layers, R)
    for v in range(inst.n_agents):
        rows = env.lower if layers.role[v] == UP else env.upper
        closed = sum(rows[d][v] for d in range(r + 1)) / R
        if abs(y.values[v] - closed) > 1e-12:
            msgs.append(f"agent {v}: average {y.values[v]} vs closed form {closed}")
    for k in range(inst.n_objectives):
        floor = min(env.smoothed[e.agent] for e in inst.objective_agents[k])
        val = _objective_value(inst, k, y)
        if val < (1.0 - 1.0 / R) * floor - eps:
            msgs.append(f"objective {k}: average value {val} below bound")
    return _fail(msgs)


def check_output_feasible(inst: Instance, params: Params, x: Solution) -> CheckResult:
    feas = check_feasible(inst, x, params.bisect_tol)
    return CheckResult(feas.ok, f"violated {feas.violated_constraints}" if not feas.ok else "")


def check_objective_floor(inst: Instance, params: Params, env: Envelopes,
                          x: Solution) -> CheckResult:
    """Per objective: value at least (1/2)(1-1/R) |V_k|/(|V_k|-1) min smoothed."""
    R = params.R
    eps = 10.0 * params.bisect_tol * inst.n_agents
    msgs = []
    for k in range(inst.n_objectives):
        edges = inst.objective_agents[k]
        size = len(edges)
        floor = (0.5 * (1.0 - 1.0 / R) * size / (size - 1)
                 * min(env.smoothed[e.agent] for e in edges))
        val = _objective_value(inst, k, x)
        if val < floor - eps:
            msgs.append(f"objective {k}: {val} < floor {floor}")
    return _fail(msgs)


def property_suite(inst: Instance, params: Params) -> dict[str, CheckResult]:
    """All solver invariants on one finite normalized tree instance."""
    bad = certify_normalized(inst)
    if bad:
        raise MMLPError("property suite needs a normalized tree: " + bad[0])
    r = params.rounds
    t = agent_bounds(inst, params)
    s = smooth_bounds(inst, t, r)
    env = compute_envelopes(inst, s, r)
    x = output_solution(env, params.R)
    root_obj = 0
    up_agent = inst.objective_agents[root_obj][0].agent
    layers = assign_layers(inst, root_obj, up_agent)

    return {
        "tree-structure": check_tree_structure(inst, r),
        "tree-bound-upper": check_tree_bound_upper(inst, params),
        "tree-bound-exact": check_tree_bound_exact(inst, params),
        "envelope-dominance": check_envelope_dominance(inst, params, t, env),
        "envelope-caps": check_envelope_caps(inst, env),
        "envelope-monotone": check_envelope_monotone(inst, env),
        "envelope-nonnegative": check_envelope_nonnegative(inst, env),
        "layer-congruence": check_layers(inst, layers),
        "shift-solutions": check_shifts(inst, params, env, layers),
        "shift-average": check_shift_average(inst, params, env, layers),
        "output-feasible": check_output_feasible(inst, params, x),
        "objective-floor": check_objective_floor(inst, params, env, x),
    }
