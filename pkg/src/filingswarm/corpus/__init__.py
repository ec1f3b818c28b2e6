"""Structured filing corpus: schemas, records, reconciliation, generation."""
from .reconcile import ReconciledView, ReconciliationError, reconcile
from .records import (
    CorpusStore,
    FilingRecord,
    IngestResult,
    Rejection,
    build_store,
    export_jsonl,
    ingest_jsonl,
    record_from_dict,
    record_to_dict,
    to_embedding_text,
    validate_record,
)
from .schema import (
    AgentProfile,
    FieldDef,
    FilingType,
    SchemaError,
    SchemaRegistry,
    TableSchema,
    load_default_registry,
    registry_from_dict,
)
from .synthetic import STATEMENT_LABELS, ConfigError, SyntheticConfig, generate_synthetic

__all__ = [
    "AgentProfile",
    "ConfigError",
    "CorpusStore",
    "FieldDef",
    "FilingRecord",
    "FilingType",
    "IngestResult",
    "ReconciledView",
    "ReconciliationError",
    "Rejection",
    "STATEMENT_LABELS",
    "SchemaError",
    "SchemaRegistry",
    "SyntheticConfig",
    "TableSchema",
    "build_store",
    "export_jsonl",
    "generate_synthetic",
    "ingest_jsonl",
    "load_default_registry",
    "reconcile",
    "record_from_dict",
    "record_to_dict",
    "registry_from_dict",
    "to_embedding_text",
    "validate_record",
]
