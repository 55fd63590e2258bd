import math

import pytest

from mmlp.instance import (Edge, Instance, MMLPError, Solution, check_feasible,
                           generate_random, generate_random_tree,
                           preprocess_degenerate, utility)
from mmlp.core import (Params, agent_bounds, compute_envelopes, smooth_bounds,
                       solve_local)
from mmlp.verify import (CheckResult, Report, check_envelope_monotone,
                         check_locality, compare, locality_applicable,
                         lp_feasible, property_suite, ratio_bound,
                         safe_baseline, solve_exact, solve_pipeline)

from helpers import (disjoint_double, e1, e2, make_cycle, path_tree,
                     two_agent_path)
from bruteforce import bruteforce_optimum


def test_lp_feasible_examples():
    a = [[1.0, 1.0]]
    c = [[1.0, 1.0]]
    ok, x, _ = lp_feasible(a, c, 1.0)
    assert ok
    assert x[0] + x[1] >= 1.0 - 1e-9 and x[0] + x[1] <= 1.0 + 1e-9
    ok, x, residual = lp_feasible(a, c, 1.1)
    assert not ok and x is None and residual > 1e-6
    ok, x, _ = lp_feasible(a, [], 0.0)
    assert ok and x == [0.0, 0.0]


def test_lp_feasible_rejects_ragged_rows():
    with pytest.raises(MMLPError):
        lp_feasible([[1.0, 2.0]], [[1.0]], 0.5)


def test_solve_exact_closed_forms():
    opt, x = solve_exact(e1())
    assert abs(opt - 1.0) <= 1e-8
    assert check_feasible(e1(), x, 1e-8).ok
    assert utility(e1(), x) >= opt - 1e-8

    opt2, x2 = solve_exact(e2())
    assert abs(opt2 - 1.0) <= 1e-8
    assert abs(x2.values[0] - 1.0) <= 1e-7 and abs(x2.values[1]) <= 1e-7

    single = Instance(1, 1, 1, (Edge(0, 0, 2.0, 1, 1),), (Edge(0, 0, 1.0, 2, 1),))
    opt3, _ = solve_exact(single)
    assert abs(opt3 - 0.5) <= 1e-8


def test_solve_exact_rejects_unbounded():
    inst = Instance(1, 0, 1, (), (Edge(0, 0, 1.0, 1, 1),))
    with pytest.raises(Exception, match="unbounded|unconstrained"):
        solve_exact(inst)


def test_safe_baseline_examples():
    assert safe_baseline(e1()).values == {0: 0.5, 1: 0.5}
    assert safe_baseline(e2()).values == {0: 0.5, 1: 0.25}
    # agent in a degree-2 and a degree-3 constraint, all a = 1 -> 1/3
    cons = (Edge(0, 0, 1.0, 1, 1), Edge(1, 0, 1.0, 1, 2),
            Edge(0, 1, 1.0, 2, 1), Edge(1, 1, 1.0, 2, 2), Edge(2, 1, 1.0, 1, 3))
    objs = (Edge(0, 2, 1.0, 3, 1), Edge(1, 2, 1.0, 3, 2), Edge(2, 2, 1.0, 2, 3))
    inst = Instance(3, 2, 3 - 2, cons, objs)
    assert safe_baseline(inst).values[0] == pytest.approx(1 / 3)


@pytest.mark.parametrize("seed", range(6))
def test_safe_baseline_always_feasible(seed):
    inst = generate_random(10, 4, 3, seed=seed)
    assert check_feasible(inst, safe_baseline(inst), 1e-12).ok


def test_compare_closed_forms():
    rep = compare(e1(), Params(3))
    assert rep.ratio == pytest.approx(1.0, abs=1e-6)
    assert rep.ratio_bound == pytest.approx(1.5)
    assert rep.ok

    rep2 = compare(e2(), Params(2))
    assert rep2.ratio == pytest.approx(4 / 3, abs=1e-6)
    assert rep2.ratio_bound == pytest.approx(2.0)
    assert rep2.ok

    rep3 = compare(e1(), Params(2))
    assert rep3.ratio == pytest.approx(1.0, abs=1e-6)
    assert rep3.ratio_bound == pytest.approx(2.0)


def test_compare_zero_forcing_instance():
    inst = Instance(2, 1, 2, e1().constraint_edges, e1().objective_edges)
    rep = compare(inst, Params(2))
    assert rep.exact_optimum == 0.0
    assert rep.local_utility == 0.0
    assert rep.ratio is None
    assert rep.ok


def test_report_text_and_tsv():
    rep = compare(e1(), Params(3))
    text = rep.to_text()
    assert "ratio " in text and "bound_ok yes" in text
    tsv = rep.to_tsv()
    assert tsv.splitlines()[0].startswith("exact_optimum\t")
    assert len(tsv.splitlines()) == 2


def test_ratio_bound_floors_degrees():
    assert ratio_bound(1, 1, 3) == pytest.approx(2 * 0.5 * 1.5)
    assert ratio_bound(4, 3, 2) == pytest.approx(4 * (2 / 3) * 2)


def test_pipeline_output_feasible_and_zeroes_degenerate_agents():
    # agent 2 contributes to no objective: stripped, value fixed to zero
    cons = (Edge(0, 0, 1.0, 1, 1), Edge(2, 0, 1.0, 1, 2), Edge(1, 1, 1.0, 1, 1))
    objs = (Edge(0, 0, 1.0, 2, 1), Edge(1, 0, 1.0, 2, 2))
    inst = Instance(3, 2, 1, cons, objs)
    x, _, _ = solve_pipeline(inst, Params(2))
    assert x.values[2] == 0.0
    assert check_feasible(inst, x, 1e-9).ok


def test_locality_same_parity_cycle_agents():
    inst = make_cycle(20)
    params = Params(2)
    assert locality_applicable(inst, inst, 0, 2, params)
    assert check_locality(inst, inst, 0, 2, params)


def test_locality_across_cycle_lengths():
    params = Params(2)
    a, b = make_cycle(2), make_cycle(20)
    assert locality_applicable(a, b, 0, 0, params)
    assert check_locality(a, b, 0, 0, params)


def test_locality_vacuous_when_views_differ():
    params = Params(2)
    a, b = make_cycle(2), make_cycle(20, a=2.0)
    assert not locality_applicable(a, b, 0, 0, params)
    assert check_locality(a, b, 0, 0, params)  # vacuously true


def test_locality_disjoint_copies():
    inst = disjoint_double(generate_random_tree(8, 3, seed=6))
    params = Params(2)
    base = inst.n_agents // 2
    assert locality_applicable(inst, inst, 0, base, params)
    assert check_locality(inst, inst, 0, base, params)


def test_property_suite_passes_on_hand_trees():
    for inst in (two_agent_path(), path_tree()):
        for R in (2, 3):
            results = property_suite(inst, Params(R))
            failed = {k: v.detail for k, v in results.items() if not v.ok}
            assert not failed


@pytest.mark.parametrize("seed", range(5))
def test_property_suite_random_trees(seed):
    inst = generate_random_tree(10, 3, seed=seed)
    results = property_suite(inst, Params(2 + seed % 3))
    failed = {k: v.detail for k, v in results.items() if not v.ok}
    assert not failed


def test_corrupted_envelopes_fail_monotonicity():
    inst = path_tree()
    params = Params(3)
    env = compute_envelopes(inst, smooth_bounds(
        inst, agent_bounds(inst, params), 1), 1)
    assert check_envelope_monotone(inst, env).ok
    env.lower[1][0] = env.lower[0][0] - 0.5  # decrease at the last depth
    res = check_envelope_monotone(inst, env)
    assert not res.ok and "lower not monotone" in res.detail


def test_oracle_self_consistency_random():
    for seed in range(8):
        inst = generate_random(7, 3, 3, seed=300 + seed)
        pre, _ = preprocess_degenerate(inst)
        opt, x = solve_exact(pre, 1e-9)
        assert check_feasible(pre, x, 1e-7).ok
        assert utility(pre, x) >= opt - 1e-7


def test_oracle_matches_bruteforce_small():
    for seed in range(20):
        inst = generate_random(2 + seed % 3, 3, 3, seed=seed)
        pre, rep = preprocess_degenerate(inst)
        if rep.unbounded_agents or pre.n_agents == 0 or pre.n_objectives == 0:
            continue
        opt, _ = solve_exact(pre, 1e-9)
        assert abs(opt - bruteforce_optimum(pre)) <= 1e-6
