"""Command line chain on a tiny corpus, plus flag and exit-code handling."""
from __future__ import annotations

import json
import subprocess

import pytest

from filingswarm.cli import main
from filingswarm.corpus.records import ingest_jsonl
from filingswarm.corpus.schema import load_default_registry
from filingswarm.questbench import load_benchmark
from filingswarm.vindex import load_index


@pytest.fixture(scope="module")
def rundir(tmp_path_factory):
    """One corpus plus one benchmark, generated through the CLI itself."""
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.jsonl"
    bench = root / "bench.jsonl"
    assert main(["corpus", "gen", "--records-per-table", "120", "--seed", "3",
                 "--out", str(corpus)]) == 0
    assert main(["bench", "gen", "--corpus", str(corpus), "--per-template", "2",
                 "--seed", "5", "--out", str(bench)]) == 0
    return {"root": root, "corpus": str(corpus), "bench": str(bench)}


def test_corpus_gen_output_ingests_cleanly(rundir):
    result = ingest_jsonl(rundir["corpus"], load_default_registry())
    assert not result.rejections
    assert len(result.store.records) > 0


def test_corpus_gen_is_deterministic_per_seed(tmp_path):
    paths = [tmp_path / name for name in ("a.jsonl", "b.jsonl", "c.jsonl")]
    for path, seed in zip(paths, ("9", "9", "10")):
        assert main(["corpus", "gen", "--records-per-table", "30",
                     "--filers", "3", "--seed", seed, "--out", str(path)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert paths[0].read_bytes() != paths[2].read_bytes()


def test_index_build_writes_loadable_snapshot(rundir):
    out = rundir["root"] / "nport.idx"
    assert main(["index", "build", "--corpus", rundir["corpus"],
                 "--scope", "table:nport_holdings", "--dim", "32",
                 "--out", str(out)]) == 0
    index, fingerprint = load_index(out)
    assert fingerprint == "hash:32"
    assert index.dim == 32
    assert len(index) > 0


def test_index_build_rejects_bad_scope(rundir, tmp_path, capsys):
    rc = main(["index", "build", "--corpus", rundir["corpus"],
               "--scope", "nonsense:thing", "--out", str(tmp_path / "x.idx")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_bench_gen_round_trips_questions(rundir):
    instances = load_benchmark(rundir["bench"])
    assert len(instances) == 22
    assert all(i.variant == "templated" for i in instances)
    assert len({i.template_id for i in instances}) == 11


def test_bench_gen_variegates_with_det_provider(rundir):
    out = rundir["root"] / "bench_mixed.jsonl"
    assert main(["bench", "gen", "--corpus", rundir["corpus"],
                 "--per-template", "2", "--seed", "5", "--variegate", "1",
                 "--provider", "det", "--out", str(out)]) == 0
    instances = load_benchmark(out)
    assert sum(1 for i in instances if i.variant == "templated") == 22
    assert sum(1 for i in instances if i.variant == "variegated") == 22
    # rewrites follow their base question
    assert instances[0].variant == "templated"
    assert instances[1].variant == "variegated"
    assert instances[1].base_text == instances[0].text


def test_retrieval_run_covers_every_scope(rundir):
    out = rundir["root"] / "retrieval.json"
    assert main(["retrieval", "run", "--corpus", rundir["corpus"],
                 "--bench", rundir["bench"], "--dim", "32",
                 "--out", str(out)]) == 0
    section = json.loads(out.read_text())
    assert set(section["scopes"]) == {"global", "agent", "table"}
    for scope in section["scopes"].values():
        assert 0.0 <= scope["overall"]["r_precision"] <= 1.0


@pytest.mark.parametrize("flag,name", [("embed", "embedding"),
                                       ("gen", "generative"),
                                       ("swarm", "swarm")])
def test_route_run_each_strategy(rundir, flag, name):
    out = rundir["root"] / f"routing_{flag}.json"
    assert main(["route", "run", "--corpus", rundir["corpus"],
                 "--bench", rundir["bench"], "--strategy", flag,
                 "--dim", "32", "--seed", "1", "--out", str(out)]) == 0
    section = json.loads(out.read_text())
    assert section["strategy"] == name
    cell = section["splits"]["overall"]["both"]
    assert cell["n_samples"] == 22
    assert 0.0 <= cell["acc_overall"] <= 1.0


def test_agentic_run_writes_records_and_memory(rundir):
    out = rundir["root"] / "agentic.json"
    memory = rundir["root"] / "memory.jsonl"
    assert main(["agentic", "run", "--corpus", rundir["corpus"],
                 "--bench", rundir["bench"], "--workers", "2",
                 "--memory", str(memory), "--out", str(out)]) == 0
    section = json.loads(out.read_text())
    assert section["kind"] == "agentic"
    assert section["n_instances"] == 22
    assert len(section["records"]) == 22
    # an honest run on clean templated questions answers at least some
    assert section["splits"]["overall"]["both"]["success_rate"] > 0.0
    assert memory.exists()
    assert memory.stat().st_size > 0


def test_report_combines_all_sections(rundir):
    root = rundir["root"]
    report_md = root / "report.md"
    report_json = root / "report.json"
    assert main(["report",
                 "--retrieval", str(root / "retrieval.json"),
                 "--routing", str(root / "routing_embed.json"),
                 str(root / "routing_gen.json"), str(root / "routing_swarm.json"),
                 "--agentic", str(root / "agentic.json"),
                 "--out", str(report_md), "--json-out", str(report_json)]) == 0
    text = report_md.read_text()
    assert "## Retrieval scope ablation" in text
    assert "## Routing strategies" in text
    assert "## Agentic question answering" in text
    assert text.count("Strategy:") == 3
    doc = json.loads(report_json.read_text())
    assert set(doc) == {"retrieval", "routing", "agentic"}
    assert len(doc["routing"]) == 3


def test_report_with_no_sections_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit):
        main(["report", "--out", str(tmp_path / "empty.md")])


def test_scripted_provider_requires_fixture_path(rundir, tmp_path):
    with pytest.raises(SystemExit):
        main(["route", "run", "--corpus", rundir["corpus"],
              "--bench", rundir["bench"], "--provider", "scripted",
              "--out", str(tmp_path / "r.json")])


def test_missing_corpus_fails_with_nonzero_exit(tmp_path, capsys):
    rc = main(["retrieval", "run", "--corpus", str(tmp_path / "nope.jsonl"),
               "--bench", str(tmp_path / "nope.bench"),
               "--out", str(tmp_path / "o.json")])
    assert rc == 1
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_command_exits_with_usage_code():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_console_script_is_installed(tmp_path):
    help_run = subprocess.run(["filingswarm", "--help"],
                              capture_output=True, text=True)
    assert help_run.returncode == 0
    for word in ("corpus", "bench", "route", "agentic", "report"):
        assert word in help_run.stdout
    gen = subprocess.run(
        ["filingswarm", "corpus", "gen", "--records-per-table", "5",
         "--filers", "2", "--seed", "1", "--out", str(tmp_path / "mini.jsonl")],
        capture_output=True, text=True)
    assert gen.returncode == 0
    assert (tmp_path / "mini.jsonl").exists()
