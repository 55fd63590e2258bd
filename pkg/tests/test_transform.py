import math
import random

import pytest

from mmlp.instance import (Edge, Instance, Solution, check_feasible,
                           generate_random, preprocess_degenerate, utility,
                           validate)
from mmlp.core import certify_normalized
from mmlp.transform import (BackMap, normalize,
                            t1_augment_singleton_constraints,
                            t2_reduce_constraint_degree,
                            t3_unique_objective_per_agent,
                            t4_augment_singleton_objectives,
                            t5_normalize_objective_coefficients)
from mmlp.unfold import canonical_form, unfold_to_depth, view_to_instance
from mmlp.verify import solve_exact

from helpers import e1, e2, trim_for_normalize

TOL = 1e-9


def single_agent_singleton() -> Instance:
    """One agent, one singleton constraint with a = 2, one objective c = 1."""
    return Instance(1, 1, 1, (Edge(0, 0, 2.0, 1, 1),), (Edge(0, 0, 1.0, 2, 1),))


def oracle(inst: Instance) -> float:
    return solve_exact(inst, TOL)[0]


def test_t1_gadget_coefficient_value():
    out, _ = t1_augment_singleton_constraints(single_agent_singleton())
    assert validate(out) == []
    assert (out.n_agents, out.n_constraints, out.n_objectives) == (4, 2, 3)
    # twice (c=1) * (1 / a=2) = 1.0 on the t- and u-side gadget objectives
    gadget = [e.coef for e in out.objective_edges if e.node in (1, 2) and e.agent != 1]
    assert gadget == [1.0, 1.0]
    assert all(len(out.constraint_agents[i]) >= 2 for i in range(out.n_constraints))


def test_t1_noop_without_singletons():
    out, step = t1_augment_singleton_constraints(e1())
    assert out == e1()
    assert step.keep == 2


def test_t1_preserves_optimum():
    inst = single_agent_singleton()
    out, step = t1_augment_singleton_constraints(inst)
    before, after = oracle(inst), oracle(out)
    assert abs(before - 0.5) <= 1e-6
    assert abs(before - after) <= 2 * TOL + 1e-9
    _, witness = solve_exact(out, TOL)
    back = step.apply(witness)
    assert set(back.values) == {0}
    assert check_feasible(inst, back, 1e-8).ok


def triple_constraint(shared_objective=True) -> Instance:
    cons = tuple(Edge(v, 0, 1.0, 1, v + 1) for v in range(3))
    objs = tuple(Edge(v, 0, 1.0, 2, v + 1) for v in range(3))
    return Instance(3, 1, 1, cons, objs)


def test_t2_pairwise_split_and_backmap():
    inst = triple_constraint()
    out, step, mult = t2_reduce_constraint_degree(inst)
    assert validate(out) == []
    assert out.n_constraints == 3
    assert all(len(out.constraint_agents[i]) == 2 for i in range(3))
    assert mult == 1.5
    back = step.apply(Solution({0: 0.5, 1: 0.5, 2: 0.5}))
    assert back.values == {0: 1 / 3, 1: 1 / 3, 2: 1 / 3}
    assert check_feasible(inst, back, 0.0).ok
    # utility relation on the shared objective: 1.0 >= 2 * 1.5 / 3
    assert utility(inst, back) >= 2 * utility(out, Solution({0: .5, 1: .5, 2: .5})) / 3 - 1e-12


def test_t2_noop_when_degree_two():
    out, step, mult = t2_reduce_constraint_degree(e1())
    assert out == e1()
    assert mult == 1.0
    x = step.apply(Solution({0: 0.3, 1: 0.4}))
    assert x.values == {0: 0.3, 1: 0.4}  # divisor two cancels the doubling


def test_t3_copies_agent_per_objective():
    # agent 0 with objectives k0, k1; one constraint shared with agent 1
    cons = (Edge(0, 0, 1.0, 1, 1), Edge(1, 0, 1.0, 1, 2))
    objs = (Edge(0, 0, 1.0, 2, 1), Edge(0, 1, 1.0, 3, 1),
            Edge(1, 0, 1.0, 2, 2))
    inst = Instance(2, 1, 2, cons, objs)
    out, step = t3_unique_objective_per_agent(inst)
    assert validate(out) == []
    assert out.n_agents == 3
    assert out.n_constraints == 2  # one copy of i per copy of agent 0
    assert all(len(out.agent_objectives[v]) == 1 for v in range(3))
    assert step.groups[0] == (0, 1) and step.groups[1] == (2,)
    back = step.apply(Solution({0: 0.3, 1: 0.5, 2: 0.1}))
    assert back.values[0] == 0.5  # max of the copies
    assert abs(oracle(inst) - oracle(out)) <= 1e-6


def test_t4_halves_singleton_objective():
    inst = single_agent_singleton()
    out, step = t4_augment_singleton_objectives(inst)
    assert validate(out) == []
    assert out.n_agents == 2
    assert [e.coef for e in out.objective_agents[0]] == [0.5, 0.5]
    assert abs(oracle(inst) - oracle(out)) <= 1e-6
    back = step.apply(Solution({0: 0.3, 1: 0.5}))
    assert back.values == {0: 0.5}


def test_t4_noop_when_objectives_big():
    out, step = t4_augment_singleton_objectives(e1())
    assert out == e1()
    assert step.groups == ((0,), (1,))


def test_t5_scales_to_unit_objective_coefficients():
    inst = Instance(1, 1, 1, (Edge(0, 0, 1.0, 1, 1),), (Edge(0, 0, 2.0, 2, 1),))
    out, step = t5_normalize_objective_coefficients(inst)
    assert out.objective_edges[0].coef == 1.0
    assert out.constraint_edges[0].coef == 0.5
    assert out.constraint_edges[0].port_agent == 1  # ports untouched
    # transformed variable stands for c*x, so mapping back divides by c
    back = step.apply(Solution({0: 2.0}))
    assert back.values[0] == 1.0
    assert check_feasible(inst, back, 0.0).ok
    assert abs(oracle(inst) - oracle(out)) <= 1e-6


def test_t5_identity_on_unit_coefficients():
    out, step = t5_normalize_objective_coefficients(e1())
    assert out == e1()
    assert step.factors == (1.0, 1.0)


def test_t5_preserves_optimum_on_e2_variant():
    inst = Instance(2, 1, 1,
                    (Edge(0, 0, 1.0, 1, 1), Edge(1, 0, 2.0, 1, 2)),
                    (Edge(0, 0, 2.0, 2, 1), Edge(1, 0, 1.0, 2, 2)))
    out, _ = t5_normalize_objective_coefficients(inst)
    assert abs(oracle(inst) - oracle(out)) <= 1e-6


def test_normalize_identity_pipeline_on_e1():
    res = normalize(e1())
    assert res.instance == e1()
    assert res.backmap.multiplier == 1.0
    assert res.agent_origin == (0, 1)


def test_normalize_triple_constraint_certifies():
    res = normalize(triple_constraint())
    assert certify_normalized(res.instance, allow_leaf_constraints=False) == []
    assert res.backmap.multiplier == 1.5


def test_normalize_rejects_degenerate():
    inst = Instance(1, 1, 0, (Edge(0, 0, 1.0, 1, 1),), ())
    with pytest.raises(Exception, match="preprocess"):
        normalize(inst)


def test_backmap_text_roundtrip():
    inst = generate_random(8, 3, 3, seed=21)
    pre, _ = preprocess_degenerate(inst)
    res = normalize(pre)
    text = res.backmap.to_text()
    again = BackMap.from_text(text)
    assert again == res.backmap


@pytest.mark.parametrize("seed", range(10))
def test_feasibility_preserved_through_full_backmap(seed):
    inst = generate_random(4 + seed, 3, 3, seed=seed)
    pre, _ = preprocess_degenerate(inst)
    res = normalize(pre)
    opt, witness = solve_exact(res.instance, TOL)
    back = res.backmap.apply(witness)
    assert check_feasible(pre, back, 1e-7).ok
    # alpha-approximate solutions stay (alpha * multiplier)-approximate
    orig_opt = oracle(pre)
    if utility(pre, back) > 0:
        alpha = opt / utility(res.instance, witness) if utility(res.instance, witness) else 1.0
        achieved = orig_opt / utility(pre, back)
        assert achieved <= alpha * res.backmap.multiplier + 1e-6


@pytest.mark.parametrize("seed", range(8))
def test_stagewise_optimum_relations(seed):
    inst = generate_random(3 + seed, 4, 3, seed=100 + seed)
    pre, _ = preprocess_degenerate(inst)
    o0 = oracle(pre)
    i1, _ = t1_augment_singleton_constraints(pre)
    assert abs(oracle(i1) - o0) <= 1e-7
    # The pairwise constraints relax the original ones, so the optimum can
    # only go up there, and the back-map recovers at least 2/delta_I of it.
    i2, _, _ = t2_reduce_constraint_degree(i1)
    o2 = oracle(i2)
    assert o2 >= o0 - 1e-7
    assert o0 >= (2.0 / max(2, i1.delta_i)) * o2 - 1e-7
    i3, _ = t3_unique_objective_per_agent(i2)
    assert abs(oracle(i3) - o2) <= 1e-7
    i4, _ = t4_augment_singleton_objectives(i3)
    o4 = oracle(i4)
    assert abs(o4 - o2) <= 1e-7
    i5, _ = t5_normalize_objective_coefficients(i4)
    assert abs(oracle(i5) - o4) <= 1e-7


def normalized_copy_groups(inst: Instance, keys, delta: int):
    """Canonical depth-delta forms of the normalized copies of each agent,
    grouped by keys[agent] (sorted per group)."""
    trimmed, trim_ids = trim_for_normalize(inst)
    res = normalize(trimmed)
    groups: dict = {}
    for j, org in enumerate(res.agent_origin):
        if org is None:
            continue
        form = repr(canonical_form(unfold_to_depth(res.instance, ("v", j), delta)))
        groups.setdefault(keys[trim_ids[org]], []).append(form)
    return {key: sorted(forms) for key, forms in groups.items()}


@pytest.mark.parametrize("seed", range(4))
def test_overlapping_view_normalization_consistency(seed):
    """Normalizing the whole instance and normalizing inside two overlapping
    views yields port-identical common parts: every interior walk-copy of an
    agent gets the same normalized copies (same count, same canonical
    neighborhoods) as the agent itself gets under global normalization."""
    inst = generate_random(10 + seed, 3, 3, seed=50 + seed)
    pre, _ = preprocess_degenerate(inst)
    depth, interior, delta = 13, 4, 2
    rng = random.Random(seed)
    ua = rng.randrange(pre.n_agents)
    dist_a = _agent_distances(pre, ua)
    ub = max((v for v, d in dist_a.items() if d <= 3), key=lambda v: dist_a[v])

    global_groups = normalized_copy_groups(pre, list(range(pre.n_agents)), delta)
    checked = 0
    for root in (ua, ub):
        view = unfold_to_depth(pre, ("v", root), depth)
        view_inst, walk_of_agent = view_to_instance(view)
        walk_key = [walk_of_agent[a] for a in range(view_inst.n_agents)]
        got = normalized_copy_groups(view_inst, walk_key, delta)
        for wi, forms in got.items():
            w = view.nodes[wi]
            if w.depth > interior:
                continue
            assert forms == global_groups[w.orig], (seed, root, wi, w.orig)
            checked += 1
    assert checked >= 4


def _agent_distances(inst: Instance, start: int) -> dict[int, int]:
    seen = {("v", start): 0}
    frontier = [("v", start)]
    while frontier:
        nxt = []
        for ref in frontier:
            for inc in inst.incident(ref):
                if inc.other not in seen:
                    seen[inc.other] = seen[ref] + 1
                    nxt.append(inc.other)
        frontier = nxt
    return {idx: d for (kind, idx), d in seen.items() if kind == "v"}
