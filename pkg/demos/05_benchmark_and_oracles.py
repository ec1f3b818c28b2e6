"""Generate benchmark questions and check plans against plan-free oracles.

Every template carries two independent answer paths: a canonical plan that
runs through the executor, and an oracle that computes the answer with
plain dict-and-loop code. Agreement between the two is what makes the
benchmark trustworthy as a grading target.

    python3 demos/05_benchmark_and_oracles.py
"""
from __future__ import annotations

import random
import tempfile
from collections import Counter
from pathlib import Path

from filingswarm.corpus.reconcile import reconcile
from filingswarm.corpus.schema import load_default_registry
from filingswarm.corpus.synthetic import SyntheticConfig, generate_synthetic
from filingswarm.evalrun import judge_success
from filingswarm.plans import execute_plan
from filingswarm.questbench import (
    TEMPLATES,
    canonical_plan,
    export_benchmark,
    generate_benchmark,
    instantiate,
    load_benchmark,
    oracle_solve,
)


def main() -> None:
    registry = load_default_registry()
    store = generate_synthetic(SyntheticConfig(records_per_table=150),
                               seed=21, registry=registry)
    view = reconcile(store)

    print("=== templates ===")
    for template_id in sorted(TEMPLATES):
        template = TEMPLATES[template_id]
        routes = ", ".join(r.label() for r in template.gold_routes)
        print(f"  {template_id}  [{template.difficulty:4s}]  {routes}")

    # one instance, both answer paths
    rng = random.Random(99)
    instance = instantiate(TEMPLATES["H1"], view, rng)
    print(f"\nquestion: {instance.text}")
    oracle_answer, supporting = oracle_solve(instance, view)
    plan = canonical_plan(instance, view)
    plan_answer = execute_plan(plan, view, registry)
    print(f"oracle answer type:  {type(oracle_answer).__name__}")
    print(f"plan steps:          {[type(s).__name__ for s in plan.steps]}")
    print(f"answers agree:       {judge_success(plan_answer, oracle_answer)}")
    print(f"supporting records:  {len(supporting)}")

    # full benchmark, then agreement across every instance
    bench = generate_benchmark(view, per_template=5, seed=31)
    print(f"\n=== benchmark ===")
    print(f"instances: {len(bench)}")
    difficulties = Counter(TEMPLATES[i.template_id].difficulty for i in bench)
    for split, count in sorted(difficulties.items()):
        print(f"  {split:5s} {count}")
    agree = sum(
        judge_success(execute_plan(canonical_plan(i, view), view, registry),
                      i.gold_answer)
        for i in bench)
    print(f"plan/oracle agreement: {agree}/{len(bench)}")

    print("\n=== serialization round trip ===")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "bench.jsonl"
        export_benchmark(bench, path)
        loaded = load_benchmark(path)
        print(f"round trip equal: {loaded == bench}")


if __name__ == "__main__":
    main()
