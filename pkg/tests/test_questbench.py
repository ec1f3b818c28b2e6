"""Benchmark templates: instantiation, oracles, canonical plans, and the
file format.

A tiny hand-built corpus freezes expected answers for three templates; the
shared synthetic fixture checks the structural guarantees across all eleven.
"""
from __future__ import annotations

import random
from dataclasses import replace
from datetime import date

import pytest

from filingswarm.corpus.records import CorpusStore, FilingRecord
from filingswarm.corpus.reconcile import reconcile
from filingswarm.corpus.schema import FilingType, load_default_registry
from filingswarm.evalrun import judge_success
from filingswarm.gateway.deterministic import DeterministicProvider
from filingswarm.gateway.providers import ScriptedProvider
from filingswarm.gateway.types import ChatResponse, FixtureMissError, GatewayError
from filingswarm.plans import ListValue, Scalar, TableValue, execute_plan
from filingswarm.questbench import (
    ALL_IDS,
    EASY_IDS,
    HARD_IDS,
    TEMPLATES,
    UnsatisfiableTemplateError,
    canonical_plan,
    datapoint_stats,
    export_benchmark,
    generate_benchmark,
    instantiate,
    load_benchmark,
    oracle_solve,
    variegate,
)

REGISTRY = load_default_registry()
P1 = date(2023, 3, 31)

ANSWER_CLASSES = {"float": Scalar, "list": ListValue, "dataframe": TableValue}


def _rec(table_id, filing_type, acc, no, filer, fields):
    return FilingRecord(
        record_id=f"{acc}:{no}", accession_id=acc, filing_type=filing_type,
        table_id=table_id, filer_id=filer, period=P1, is_amendment=False,
        amends=None, fields=dict(fields, period=P1.isoformat()))


@pytest.fixture(scope="module")
def micro_view():
    store = CorpusStore(REGISTRY)
    tf = [
        {"manager_id": "MGR0001", "manager_name": "Summit Peak Advisors",
         "issuer_name": "Alpha Industries", "cusip": "CUS000001",
         "security_class": "COM", "put_call": None,
         "value_usd": 1000.50, "shares": 10.0},
        {"manager_id": "MGR0001", "manager_name": "Summit Peak Advisors",
         "issuer_name": "Beta Corp", "cusip": "CUS000002",
         "security_class": "COM", "put_call": None,
         "value_usd": 2000.25, "shares": 20.0},
    ]
    for i, fields in enumerate(tf):
        store.add(_rec("thirteenf_holdings", FilingType.THIRTEEN_F,
                       "A13F-1", i, "MGR0001", fields))
    opts = [
        {"manager_id": "MGR0002", "manager_name": "Granite Bay Capital",
         "issuer_name": "Alpha Industries", "cusip": "CUS000001",
         "security_class": "OPT-CALL", "put_call": "CALL",
         "value_usd": 500.00, "shares": 5.0},
        {"manager_id": "MGR0002", "manager_name": "Granite Bay Capital",
         "issuer_name": "Beta Corp", "cusip": "CUS000002",
         "security_class": "OPT-PUT", "put_call": "PUT",
         "value_usd": 250.00, "shares": 2.0},
    ]
    for i, fields in enumerate(opts):
        store.add(_rec("thirteenf_holdings", FilingType.THIRTEEN_F,
                       "A13F-2", i, "MGR0002", fields))

    store.add(_rec("adv_entity", FilingType.ADV, "AADV-1", 0, "ADV0001", {
        "advisor_id": "ADV0001", "advisor_name": "Test Advisors LLC",
        "regulatory_aum": 1234.5, "employee_count": 12.0,
        "client_count": 40.0, "state": "NY"}))

    ncen = [
        {"trust_id": "TR0001", "fund_id": "FND0001",
         "fund_name": "Growth Fund", "advisor_id": "ADV0001",
         "advisor_name": "Test Advisors LLC", "fund_type": "equity"},
        {"trust_id": "TR0001", "fund_id": "FND0002",
         "fund_name": "Income Fund", "advisor_id": "ADV0001",
         "advisor_name": "Test Advisors LLC", "fund_type": "bond"},
    ]
    for i, fields in enumerate(ncen):
        store.add(_rec("ncen_fund_registry", FilingType.NCEN,
                       "ANCEN-1", i, "TR0001", fields))
    return reconcile(store)


def test_template_registry_shape():
    assert set(TEMPLATES) == set(ALL_IDS)
    assert ALL_IDS == EASY_IDS + HARD_IDS
    for template_id in EASY_IDS:
        assert TEMPLATES[template_id].difficulty == "easy"
    for template_id in HARD_IDS:
        assert TEMPLATES[template_id].difficulty == "hard"
    for template in TEMPLATES.values():
        assert template.answer_type in ANSWER_CLASSES
        assert template.gold_routes


# ---------------------------------------------------------------------------
# Hand-frozen instances


def test_cash_positions_instance_is_frozen(micro_view):
    instance = instantiate(TEMPLATES["E0"], micro_view, random.Random(0))
    assert instance.text == ('Get the aggregate cash equity positions for '
                             'manager "Summit Peak Advisors" for period '
                             '2023-03-31.')
    assert instance.variant == "templated"
    assert instance.gold_answer.value == 3000.75
    assert instance.relevant_record_ids == frozenset({"A13F-1:0", "A13F-1:1"})
    assert [r.label() for r in instance.gold_routes] == [
        "13F/thirteenf_holdings"]


def test_option_positions_instance_is_frozen(micro_view):
    instance = instantiate(TEMPLATES["E1"], micro_view, random.Random(0))
    assert instance.slot_values["manager"] == "Granite Bay Capital"
    assert instance.gold_answer.value == 750.0
    assert instance.relevant_record_ids == frozenset({"A13F-2:0", "A13F-2:1"})


def test_aum_instance_is_frozen(micro_view):
    instance = instantiate(TEMPLATES["E2"], micro_view, random.Random(0))
    assert instance.gold_answer.value == 1234.5
    assert instance.relevant_record_ids == frozenset({"AADV-1:0"})


def test_fund_list_instance_is_frozen(micro_view):
    instance = instantiate(TEMPLATES["E3"], micro_view, random.Random(0))
    assert isinstance(instance.gold_answer, ListValue)
    assert set(instance.gold_answer.values) == {"Growth Fund", "Income Fund"}
    assert instance.relevant_record_ids == frozenset({"ANCEN-1:0", "ANCEN-1:1"})


@pytest.mark.parametrize("template_id", ["E0", "E2", "E3"])
def test_canonical_plan_matches_oracle_on_the_micro_corpus(micro_view,
                                                           template_id):
    instance = instantiate(TEMPLATES[template_id], micro_view, random.Random(1))
    answer, relevant = oracle_solve(instance, micro_view)
    assert judge_success(answer, instance.gold_answer)
    assert relevant == instance.relevant_record_ids
    executed = execute_plan(canonical_plan(instance, micro_view), micro_view,
                            REGISTRY)
    assert judge_success(executed, instance.gold_answer)


def test_unsatisfiable_templates_raise():
    empty = CorpusStore(REGISTRY)
    with pytest.raises(UnsatisfiableTemplateError, match="E0"):
        instantiate(TEMPLATES["E0"], empty, random.Random(0))
    with pytest.raises(UnsatisfiableTemplateError):
        generate_benchmark(empty, per_template=1, seed=0)


# ---------------------------------------------------------------------------
# Synthetic-corpus guarantees


def test_benchmark_is_deterministic_per_seed(small_view):
    first = generate_benchmark(small_view, per_template=2, seed=5)
    second = generate_benchmark(small_view, per_template=2, seed=5)
    assert first == second
    assert len(first) == 2 * len(ALL_IDS)


def test_template_streams_draw_independently(small_view):
    full = generate_benchmark(small_view, per_template=3, seed=7)
    only_e0 = generate_benchmark(small_view, per_template=3, seed=7,
                                 template_ids=("E0",))
    assert [i for i in full if i.template_id == "E0"] == only_e0


def test_bench_instances_are_well_formed(bench, small_view):
    assert len(bench) == 4 * len(ALL_IDS)
    for instance in bench:
        assert instance.variant == "templated"
        assert instance.text == instance.base_text
        assert instance.relevant_record_ids
        assert all(rid in small_view for rid in instance.relevant_record_ids)
        expected = ANSWER_CLASSES[TEMPLATES[instance.template_id].answer_type]
        assert isinstance(instance.gold_answer, expected)
        assert "{" not in instance.text  # every slot was filled


def test_canonical_plans_match_oracles_across_all_templates(bench, small_view,
                                                            registry):
    for instance in bench:
        executed = execute_plan(canonical_plan(instance, small_view),
                                small_view, registry)
        assert judge_success(executed, instance.gold_answer), instance.template_id


def test_oracle_solve_accepts_a_raw_store(bench, small_store):
    instance = bench[0]
    answer, relevant = oracle_solve(instance, small_store)
    assert judge_success(answer, instance.gold_answer)
    assert relevant == instance.relevant_record_ids


# ---------------------------------------------------------------------------
# Variegation


def test_variegation_rewrites_but_keeps_gold(bench):
    base = next(i for i in bench if i.template_id == "E0")
    variants = variegate(base, DeterministicProvider(), n=2)
    assert len(variants) == 2
    assert len({v.text for v in variants} | {base.text}) == 3
    for variant in variants:
        assert variant.variant == "variegated"
        assert variant.base_text == base.text
        assert variant.gold_answer == base.gold_answer
        assert variant.relevant_record_ids == base.relevant_record_ids
        assert variant.slot_values == base.slot_values


class _Refuses:
    def complete(self, request):
        raise GatewayError("offline")


class _Blank:
    def complete(self, request):
        return ChatResponse(content="   ", provider_id="test", latency=0.0)


def test_variegation_failure_modes(bench):
    base = bench[0]
    with pytest.raises(ValueError):
        variegate(base, DeterministicProvider(), n=0)
    assert variegate(base, _Refuses(), n=2) == []
    assert variegate(base, _Blank(), n=2) == []
    with pytest.raises(FixtureMissError):
        variegate(base, ScriptedProvider({}), n=1)


def test_mixed_benchmark_interleaves_variants(bench_mixed):
    assert len(bench_mixed) == 3 * 4 * len(ALL_IDS)
    kinds = [i.variant for i in bench_mixed[:3]]
    assert kinds == ["templated", "variegated", "variegated"]


# ---------------------------------------------------------------------------
# File format and stats


def test_benchmark_file_round_trip(tmp_path, bench):
    path = tmp_path / "bench.jsonl"
    export_benchmark(bench, path)
    assert load_benchmark(path) == bench


def test_datapoint_stats_frozen():
    base = None
    store = CorpusStore(REGISTRY)
    store.add(_rec("adv_entity", FilingType.ADV, "AADV-1", 0, "ADV0001", {
        "advisor_id": "ADV0001", "advisor_name": "Test Advisors LLC",
        "regulatory_aum": 1234.5, "employee_count": 12.0,
        "client_count": 40.0, "state": "NY"}))
    base = instantiate(TEMPLATES["E2"], reconcile(store), random.Random(0))
    instances = [
        replace(base, relevant_record_ids=frozenset({"a"})),
        replace(base, relevant_record_ids=frozenset({"a", "b", "c"})),
        replace(base, template_id="E3",
                relevant_record_ids=frozenset({"a", "b"})),
        replace(base, variant="variegated",
                relevant_record_ids=frozenset({"x", "y", "z"})),
    ]
    assert datapoint_stats(instances) == {
        "E2": {"median": 2.0, "total": 4, "instances": 2},
        "E3": {"median": 2, "total": 2, "instances": 1},
    }
