"""Command-line surface: validation, diagnostics, enumeration, reports.

Exit codes are a stable contract: 0 success, 1 domain violation (invalid
model, tripped guard, disagreement), 2 I/O or parse error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import io
import json
import os
import sys

import numpy as np

from .dynamics import evaluate_policy, policy_from_json, regularity_report
from .model import (
    DesignInstance,
    build_design_model,
    generate_random_instance,
    load_model,
    model_to_json,
    validate_model,
)
from .pareto import (
    brute_force_oracle,
    enumerate_efficient,
    result_to_csv,
    result_to_json,
    result_to_markdown,
)
from .vlp import build_program, certify_full_rank, count_regular_bases

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_PARSE = 2


def _load_model_or_exit(path):
    try:
        return load_model(path)
    except FileNotFoundError:
        print(f"error: no such file: {path}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"error: cannot parse model file {path}: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_PARSE)


def cmd_validate(args) -> int:
    m = _load_model_or_exit(args.model)
    report = validate_model(m)
    print(report)
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_info(args) -> int:
    m = _load_model_or_exit(args.model)
    report = validate_model(m)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    cp = build_program(m)
    reg = regularity_report(m)
    info = {
        "num_states": m.num_states,
        "horizon": m.horizon,
        "num_objectives": m.num_objectives,
        "total_actions": cp.K,
        "constraints_m": cp.m,
        "variables_n": cp.n,
        "full_rank_certified": certify_full_rank(cp),
        "regular": reg.regular,
        "deterministic_policies": count_regular_bases(cp),
    }
    if reg.some_policy_witness is not None:
        s, t, acts = reg.some_policy_witness
        info["some_policy_witness"] = {"state": s, "epoch": t, "avoiding_actions": list(acts)}
    if reg.all_policy_witness is not None:
        s, t = reg.all_policy_witness
        info["all_policy_witness"] = {"state": s, "epoch": t}
    if args.format == "json":
        print(json.dumps(info, indent=1))
    else:
        for key, val in info.items():
            print(f"{key}: {val}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    if args.tol <= 0:
        print("error: --tol must be positive", file=sys.stderr)
        return EXIT_DOMAIN
    m = _load_model_or_exit(args.model)
    report = validate_model(m)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    cp = build_program(m)
    try:
        result = enumerate_efficient(cp, collect_weights=args.weights, force=args.force)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    if args.format == "json":
        print(json.dumps(result_to_json(result), indent=1))
    elif args.format == "csv":
        print(result_to_csv(result), end="")
    else:
        print(result_to_markdown(result))

    if args.oracle:
        try:
            oracle = brute_force_oracle(m)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DOMAIN
        ours = sorted(tuple(rec.value) for rec in result.records)
        theirs = sorted(tuple(rec.value) for rec in oracle.efficient)
        match = len(ours) == len(theirs) and all(
            max(abs(a - b) for a, b in zip(va, vb)) <= args.tol
            for va, vb in zip(ours, theirs)
        )
        print(f"oracle agreement: {'MATCH' if match else 'MISMATCH'}")
        if not match:
            return EXIT_DOMAIN
    return EXIT_OK


class DesignCsvError(ValueError):
    "Structurally malformed design CSV (header or non-numeric fields)."


def _read_design_csv(path) -> DesignInstance:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        required = {"component", "alternative", "cost", "reliability"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DesignCsvError(f"design CSV must have columns {sorted(required)}")
        try:
            rows = [
                (int(r["component"]), int(r["alternative"]), float(r["cost"]), float(r["reliability"]))
                for r in reader
            ]
        except (TypeError, ValueError) as exc:
            raise DesignCsvError(f"non-numeric field: {exc}") from exc
    parts = {1: {}, 2: {}}
    for comp, alt, cost, rel in rows:
        if comp not in (1, 2):
            raise ValueError(f"component must be 1 or 2, got {comp}")
        parts[comp][alt] = (cost, rel)
    costs, rels = [], []
    for comp in (1, 2):
        alts = sorted(parts[comp])
        if not alts or alts != list(range(1, len(alts) + 1)):
            raise ValueError(f"component {comp}: alternatives must be 1..k, got {alts}")
        costs.append(np.array([parts[comp][a][0] for a in alts]))
        rels.append(np.array([parts[comp][a][1] for a in alts]))
    return DesignInstance(costs=(costs[0], costs[1]), reliabilities=(rels[0], rels[1]))


def cmd_design(args) -> int:
    try:
        instance = _read_design_csv(args.csv)
    except FileNotFoundError:
        print(f"error: no such file: {args.csv}", file=sys.stderr)
        return EXIT_PARSE
    except (csv.Error, DesignCsvError) as exc:
        print(f"error: cannot parse design CSV: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    alpha = None
    if args.alpha is not None:
        try:
            alpha = np.array([float(v) for v in args.alpha.split(",")])
        except ValueError:
            print("error: --alpha must be comma-separated numbers", file=sys.stderr)
            return EXIT_PARSE
    m = build_design_model(instance, alpha=alpha)
    report = validate_model(m)
    if not report.ok:
        print(report, file=sys.stderr)
        return EXIT_DOMAIN
    payload = json.dumps(model_to_json(m), indent=1)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(payload)
    else:
        print(payload)
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        inst = generate_random_instance(args.k1, args.k2, args.rho, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    buf = io.StringIO()
    buf.write("component,alternative,cost,reliability\n")
    for comp in (0, 1):
        for a, (cost, rel) in enumerate(zip(inst.costs[comp], inst.reliabilities[comp])):
            buf.write(f"{comp + 1},{a + 1},{cost:.6f},{rel:.6f}\n")
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(buf.getvalue())
    else:
        print(buf.getvalue(), end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    m = _load_model_or_exit(args.model)
    try:
        with open(args.policy) as fh:
            pi = policy_from_json(json.load(fh), m)
    except FileNotFoundError:
        print(f"error: no such file: {args.policy}", file=sys.stderr)
        return EXIT_PARSE
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: cannot parse policy file: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ValueError, IndexError) as exc:
        print(f"error: policy does not fit the model: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    per_state, aggregate = evaluate_policy(m, pi)
    out = {"per_state": per_state.tolist(), "aggregate": aggregate.tolist()}
    if args.format == "json":
        print(json.dumps(out, indent=1))
    else:
        for s, row in enumerate(per_state):
            print(f"state {s}: (" + ", ".join(f"{v:.6f}" for v in row) + ")")
        print("aggregate: (" + ", ".join(f"{v:.6f}" for v in aggregate) + ")")
    return EXIT_OK


def _bench_instance(task) -> int:
    # The adjacency walk never visits all bases, so the full-enumeration
    # guard is irrelevant here; large option counts are the whole point.
    k1, k2, rho, seed = task
    inst = generate_random_instance(k1, k2, rho, seed)
    cp = build_program(build_design_model(inst))
    return len(enumerate_efficient(cp, force=True).records)


def cmd_bench(args) -> int:
    if args.count < 1:
        print("error: count must be >= 1", file=sys.stderr)
        return EXIT_DOMAIN
    tasks = [(args.k1, args.k2, args.rho, args.seed + i) for i in range(args.count)]
    jobs = args.jobs or os.cpu_count() or 1
    if jobs > 1 and args.count > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(_bench_instance, tasks, chunksize=4))
    else:
        counts = [_bench_instance(t) for t in tasks]
    counts = np.asarray(counts, dtype=float)
    mean, sd = counts.mean(), counts.std()  # population sd: one instance -> 0
    if args.format == "csv":
        print("k1,k2,rho,count,mean,sd")
        print(f"{args.k1},{args.k2},{args.rho:.6f},{args.count},{mean:.6f},{sd:.6f}")
    elif args.format == "json":
        print(json.dumps({"k1": args.k1, "k2": args.k2, "rho": args.rho,
                          "count": args.count, "mean": mean, "sd": sd}))
    else:
        print(f"k1={args.k1} k2={args.k2} rho={args.rho} count={args.count} "
              f"mean={mean:.2f} sd={sd:.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmdp",
        description="Finite-horizon vector-valued MDP solver: enumerate all "
        "efficient deterministic policies via the equivalent linear program.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_format(p):
        p.add_argument("--format", choices=["json", "csv", "markdown"], default="markdown")

    p = sub.add_parser("validate", help="check a model file against the model axioms")
    p.add_argument("model")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("info", help="dimensions, regularity and policy count of a model")
    p.add_argument("model")
    add_format(p)
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("enumerate", help="enumerate all efficient deterministic policies")
    p.add_argument("model")
    add_format(p)
    p.add_argument("--weights", action="store_true", help="recover scalarization weights per policy")
    p.add_argument("--oracle", action="store_true", help="cross-check against the brute-force oracle")
    p.add_argument("--force", action="store_true", help="ignore the enumeration size guard")
    p.add_argument("--tol", type=float, default=1e-6, help="oracle agreement tolerance")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("design", help="build a model from a costs/reliabilities CSV")
    p.add_argument("csv")
    p.add_argument("--alpha", help="comma-separated initial distribution, default 0.5,0.5")
    p.add_argument("-o", "--output", help="write the model JSON here instead of stdout")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("generate", help="sample a random correlated design instance as CSV")
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", help="write the CSV here instead of stdout")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("eval", help="evaluate a policy file on a model")
    p.add_argument("model")
    p.add_argument("policy")
    add_format(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="mean/sd of the efficient-policy count over random instances")
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.7)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=0, help="worker processes, default all cores")
    add_format(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
