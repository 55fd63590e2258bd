"""Command-line front end.

Subcommands: `generate` writes a random instance, `solve` runs the local
pipeline, `exact` runs the oracle, `normalize` writes the normalized
instance plus the back-map sidecar, and `verify` runs the comparison report
and the invariant suite.  Exit codes: 0 success, 1 a verified property
failed, 2 usage or input error, 3 degenerate / unbounded instance.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import (Params, agent_bounds, compute_envelopes, smooth_bounds)
from .instance import (DegenerateInstanceError, MMLPError, ParseError,
                       generate_random, generate_random_tree, parse,
                       preprocess_degenerate, serialize, serialize_solution,
                       utility)
from .transform import normalize
from .verify import (check_envelope_caps, check_envelope_monotone, compare,
                     check_locality, locality_applicable, property_suite,
                     solve_pipeline, solve_exact)

USAGE_ERROR = 2
DEGENERATE_ERROR = 3


def _read_instance(path: str):
    return parse(Path(path).read_text())


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    if args.agents < 2 or args.delta_i < 2 or args.delta_k < 2:
        print("error: need --agents >= 2, --delta-i >= 2, --delta-k >= 2",
              file=sys.stderr)
        return USAGE_ERROR
    if args.tree:
        inst = generate_random_tree(args.agents, args.delta_k, args.seed)
    else:
        inst = generate_random(args.agents, args.delta_i, args.delta_k,
                               args.seed, normalized=args.normalized)
    _write(args.out, serialize(inst))
    return 0


def cmd_solve(args) -> int:
    inst = _read_instance(getattr(args, "in"))
    params = Params(args.r, args.tol)
    x, multiplier, _ = solve_pipeline(inst, params)
    omega = utility(inst, x)
    _write(args.out, serialize_solution(x, omega))
    print(f"r {args.r}")
    print(f"omega {omega!r}")
    return 0


def cmd_exact(args) -> int:
    inst = _read_instance(getattr(args, "in"))
    cleaned, report = preprocess_degenerate(inst)
    if report.unbounded_agents:
        raise DegenerateInstanceError(f"unbounded agents {report.unbounded_agents}")
    if report.zero_forcing:
        omega = 0.0
        from .instance import Solution
        x = Solution({v: 0.0 for v in range(inst.n_agents)})
    else:
        omega, x_clean = solve_exact(cleaned, args.tol)
        from .instance import Solution
        vals = {v: 0.0 for v in range(inst.n_agents)}
        for new_idx, old_idx in enumerate(report.agent_ids):
            vals[old_idx] = x_clean.values[new_idx]
        x = Solution(vals)
    _write(args.out, serialize_solution(x, omega))
    print(f"omega {omega!r}")
    return 0


def cmd_normalize(args) -> int:
    inst = _read_instance(getattr(args, "in"))
    cleaned, report = preprocess_degenerate(inst)
    if report.unbounded_agents:
        raise DegenerateInstanceError(f"unbounded agents {report.unbounded_agents}")
    result = normalize(cleaned)
    _write(args.out, serialize(result.instance))
    if args.backmap_out:
        Path(args.backmap_out).write_text(result.backmap.to_text())
    print(f"multiplier {result.backmap.multiplier!r}")
    return 0


def _verify_one(inst, params, out_dir: Path | None, tag: str) -> bool:
    report = compare(inst, params)
    if out_dir is not None:
        (out_dir / f"report_{tag}.txt").write_text(report.to_text())
        (out_dir / f"report_{tag}.tsv").write_text(report.to_tsv())
    status = "ok" if report.ok else "FAIL"
    ratio = "n/a" if report.ratio is None else f"{report.ratio:.6f}"
    print(f"verify {tag} ratio {ratio} bound {report.ratio_bound:.6f} {status}")
    return report.ok


def cmd_verify(args) -> int:
    params = Params(args.r, args.tol)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    all_ok = True

    if getattr(args, "in"):
        inst = _read_instance(getattr(args, "in"))
        if args.corrupt:
            # Negative control: tamper with the envelope table and demand the
            # suite notices.
            cleaned, _ = preprocess_degenerate(inst)
            norm = normalize(cleaned)
            t = agent_bounds(norm.instance, params)
            s = smooth_bounds(norm.instance, t, params.rounds)
            env = compute_envelopes(norm.instance, s, params.rounds)
            if params.rounds >= 1:
                env.lower[params.rounds][0] = env.lower[params.rounds - 1][0] - 1.0
                res = check_envelope_monotone(norm.instance, env)
            else:
                env.lower[0][0] = norm.instance.min_inverse_coef(0) + 1.0
                res = check_envelope_caps(norm.instance, env)
            caught = not res.ok
            print(f"verify corrupt-control {'ok' if caught else 'FAIL'}")
            return 0 if caught else 1
        all_ok &= _verify_one(inst, params, out_dir, "instance")

    for seed in range(args.sweep):
        inst = generate_random(6 + (seed % 13), 2 + seed % 3, 2 + (seed // 2) % 3,
                               seed=1000 + seed)
        all_ok &= _verify_one(inst, params, out_dir, f"sweep{seed}")
        tree = generate_random_tree(4 + (seed % 9), 2 + seed % 3, seed=2000 + seed)
        results = property_suite(tree, params)
        for name, res in sorted(results.items()):
            if not res.ok:
                print(f"verify sweep{seed} property {name} FAIL ({res.detail})")
                all_ok = False
        applicable = locality_applicable(tree, tree, 0, 0, params)
        if applicable and not check_locality(tree, tree, 0, 0, params):
            print(f"verify sweep{seed} locality FAIL")
            all_ok = False

    return 0 if all_ok else 1


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="mmlp",
                                  description="max-min LP local approximation toolkit")
    sub = top.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--agents", type=int, required=True)
    g.add_argument("--delta-i", type=int, default=3)
    g.add_argument("--delta-k", type=int, default=3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--normalized", action="store_true")
    g.add_argument("--tree", action="store_true",
                   help="finite normalized tree (exact invariant checks apply)")
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the local approximation pipeline")
    s.add_argument("--r", type=int, required=True, help="horizon parameter R >= 2")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--in", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("exact", help="run the exact oracle")
    e.add_argument("--tol", type=float, default=1e-9)
    e.add_argument("--in", required=True)
    e.add_argument("--out", default=None)
    e.set_defaults(func=cmd_exact)

    n = sub.add_parser("normalize", help="write the normalized instance and back-map")
    n.add_argument("--in", required=True)
    n.add_argument("--out", default=None)
    n.add_argument("--backmap-out", default=None)
    n.set_defaults(func=cmd_normalize)

    v = sub.add_parser("verify", help="ratio report and invariant suite")
    v.add_argument("--r", type=int, required=True)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--in", default=None)
    v.add_argument("--sweep", type=int, default=0,
                   help="also verify this many generated instances")
    v.add_argument("--corrupt", action="store_true",
                   help="negative control: inject a corrupted table, expect failure")
    v.add_argument("--out-dir", default=None)
    v.set_defaults(func=cmd_verify)
    return top


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except DegenerateInstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DEGENERATE_ERROR
    except MMLPError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
