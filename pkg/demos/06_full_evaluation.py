"""Run the complete evaluation suite and render the combined report.

Covers the three result families in one pass: the retrieval scope
ablation, the three routing strategies, and end-to-end agentic question
answering with the screening, decomposition, planning, and execution
pipeline. Everything runs offline on the deterministic provider.

    python3 demos/06_full_evaluation.py
"""
from __future__ import annotations

from filingswarm.corpus.reconcile import reconcile
from filingswarm.corpus.schema import load_default_registry
from filingswarm.corpus.synthetic import SyntheticConfig, generate_synthetic
from filingswarm.evalrun import (
    report_to_markdown,
    run_agentic,
    run_retrieval_ablation,
    run_routing_ablation,
)
from filingswarm.gateway.deterministic import DeterministicProvider
from filingswarm.questbench import generate_benchmark
from filingswarm.routing import SwarmConfig
from filingswarm.vindex import HashFeatureEmbedder


def main() -> None:
    registry = load_default_registry()
    store = generate_synthetic(SyntheticConfig(records_per_table=150),
                               seed=7, registry=registry)
    view = reconcile(store)
    provider = DeterministicProvider()
    # paraphrased variants exercise the variegated split as well
    bench = generate_benchmark(view, per_template=3, seed=13,
                               gateway=provider, variegate_n=1)
    print(f"corpus:    {len(view.records)} visible records")
    print(f"benchmark: {len(bench)} questions")

    retrieval = run_retrieval_ablation(bench, view, HashFeatureEmbedder(64),
                                       registry)
    routing = [
        run_routing_ablation(bench, "generative", registry, provider=provider),
        run_routing_ablation(bench, "swarm", registry, provider=provider,
                             swarm_config=SwarmConfig(seed=2)),
    ]
    agentic = run_agentic(bench, provider, view, registry)

    report = report_to_markdown({
        "retrieval": retrieval,
        "routing": routing,
        "agentic": agentic,
    })
    print()
    print(report)


if __name__ == "__main__":
    main()
