"""Generate a synthetic filing corpus, amend part of it, and reconcile.

The store keeps every filing ever received. The reconciled view walks
amendment chains and exposes only the terminal filing of each chain, so
every consumer downstream (indexes, benchmarks, plan execution) sees one
authoritative version of each record.

Run from the repository root after an editable install:

    python3 demos/01_corpus_and_reconciliation.py
"""
from __future__ import annotations

import tempfile
from collections import Counter
from pathlib import Path

from filingswarm.corpus.records import export_jsonl, ingest_jsonl
from filingswarm.corpus.reconcile import reconcile
from filingswarm.corpus.schema import load_default_registry
from filingswarm.corpus.synthetic import SyntheticConfig, generate_synthetic


def main() -> None:
    registry = load_default_registry()
    config = SyntheticConfig(records_per_table=200, amendment_fraction=0.2)
    store = generate_synthetic(config, seed=42, registry=registry)

    print("=== store ===")
    print(f"records in store:        {len(store.records)}")
    by_type = Counter(r.filing_type.value for r in store.records)
    for name, count in sorted(by_type.items()):
        print(f"  {name:6s} {count}")

    amendments = [r for r in store.records if r.is_amendment]
    print(f"amendment records:       {len(amendments)}")

    # trace one chain end to end
    sample = amendments[0]
    print("\n=== one amendment chain ===")
    chain = [sample.accession_id]
    current = sample
    by_accession = {r.accession_id: r for r in store.records}
    while current.amends is not None:
        current = by_accession[current.amends]
        chain.append(current.accession_id)
    for accession in reversed(chain):
        marker = "original" if by_accession[accession].amends is None else "amends prior"
        print(f"  {accession}  ({marker})")

    view = reconcile(store)
    print("\n=== reconciled view ===")
    print(f"visible records:         {len(view.records)}")
    print(f"superseded (hidden):     {len(store.records) - len(view.records)}")
    superseded_accessions = chain[1:]  # everything the sample chain replaced
    for accession in superseded_accessions:
        record_ids = [r.record_id for r in store.records
                      if r.accession_id == accession]
        hidden = all(rid not in view for rid in record_ids)
        print(f"  {accession} hidden from view: {hidden}")

    # the serialized corpus survives a round trip unchanged
    print("\n=== jsonl round trip ===")
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "corpus.jsonl"
        export_jsonl(store, path)
        result = ingest_jsonl(path, registry)
        print(f"re-ingested records:     {len(result.store.records)}")
        print(f"rejections:              {len(result.rejections)}")
        same = [a.record_id for a in store.records] == \
               [b.record_id for b in result.store.records]
        print(f"record order preserved:  {same}")


if __name__ == "__main__":
    main()
