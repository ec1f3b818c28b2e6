"""Compose typed query plans by hand and run them through the executor.

Plans are small DAGs of retrieve, aggregate, join, and arithmetic steps.
The executor validates the plan against the schema registry, runs it over
the reconciled view, and returns a typed answer that carries the record
ids supporting it. The wallet-share example divides one aggregate by
another, something no single retrieval can answer.

    python3 demos/04_plans_and_execution.py
"""
from __future__ import annotations

from filingswarm.corpus.reconcile import reconcile
from filingswarm.corpus.schema import FilingType, load_default_registry
from filingswarm.corpus.synthetic import SyntheticConfig, generate_synthetic
from filingswarm.evalrun import judge_success
from filingswarm.plans import (
    Aggregate,
    Arithmetic,
    Filter,
    Plan,
    PlanError,
    Retrieve,
    Return,
    Scalar,
    execute_plan,
    plan_to_json,
)


def main() -> None:
    registry = load_default_registry()
    store = generate_synthetic(SyntheticConfig(records_per_table=200),
                               seed=9, registry=registry)
    view = reconcile(store)

    record = next(r for r in view.records
                  if r.table_id == "thirteenf_holdings")
    manager = record.fields["manager_name"]
    period = record.fields["period"]

    # total reported value for one manager in one period
    total_plan = Plan((
        Retrieve("r1", FilingType.THIRTEEN_F, "thirteenf_holdings",
                 (Filter("manager_name", "eq", manager),
                  Filter("period", "eq", period))),
        Aggregate("a1", "r1", "sum", value_field="value_usd"),
        Return("ret", "a1"),
    ))
    answer = execute_plan(total_plan, view, registry)
    print(f"manager:             {manager}")
    print(f"period:              {period}")
    print(f"total value_usd:     {answer.value:,.0f}")
    print(f"supporting records:  {len(answer.supporting_record_ids)}")

    # wallet share: that total divided by the period-wide total
    share_plan = Plan((
        Retrieve("mine", FilingType.THIRTEEN_F, "thirteenf_holdings",
                 (Filter("manager_name", "eq", manager),
                  Filter("period", "eq", period))),
        Aggregate("mine_sum", "mine", "sum", value_field="value_usd"),
        Retrieve("all", FilingType.THIRTEEN_F, "thirteenf_holdings",
                 (Filter("period", "eq", period),)),
        Aggregate("all_sum", "all", "sum", value_field="value_usd"),
        Arithmetic("share", "mine_sum", "all_sum", "div"),
        Return("ret", "share"),
    ))
    share = execute_plan(share_plan, view, registry)
    print(f"\nwallet share:        {share.value:.4%}")

    # the independent check agrees with the plan answer
    rows = [r for r in view.records
            if r.table_id == "thirteenf_holdings"
            and r.fields["period"] == period]
    mine = sum(r.fields["value_usd"] for r in rows
               if r.fields["manager_name"] == manager)
    everyone = sum(r.fields["value_usd"] for r in rows)
    print(f"direct computation:  {mine / everyone:.4%}")
    print(f"judge agrees:        {judge_success(share, Scalar(mine / everyone))}")

    # plans serialize to stable json, and bad plans fail at construction
    print("\nplan json (first 3 lines):")
    for line in plan_to_json(total_plan).splitlines()[:3]:
        print(f"  {line}")
    try:
        Aggregate("a1", "r1", "median", value_field="value_usd")
    except PlanError as err:
        print(f"\nrejected bad plan:   {err}")


if __name__ == "__main__":
    main()
