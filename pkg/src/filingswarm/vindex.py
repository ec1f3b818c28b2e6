"""Embedders and the exact k-nearest-neighbor flat index.

Distances are squared L2, which ranks identically to L2 without the square
root. The canonical distance between a stored vector and a query is defined
as ``float(np.sum((x64 - q64) ** 2))`` where both operands are the float32
stored values widened to float64; knn computes exactly this expression for
every returned entry, so results are bit-identical to a naive all-pairs
scan. A BLAS prefilter only narrows the candidate set; candidates are
rescored canonically before ranking, and ties break by record_id ascending.

Index snapshots are a small JSON header, the raw little-endian float32
vector block, and the record id table; round trips are byte-exact.
"""
from __future__ import annotations

import json
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import requests

from .corpus.records import to_embedding_text
from .corpus.reconcile import ReconciledView
from .corpus.schema import FilingType, SchemaRegistry

_TOKEN_RE = re.compile(r"[a-z0-9]+")

_MAGIC = b"FSIDX1\n"


class IndexError_(ValueError):
    """Index construction or query contract violation."""


@dataclass(frozen=True)
class IndexScope:
    kind: str  # global | agent | table
    key: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ("global", "agent", "table"):
            raise IndexError_(f"unknown scope kind {self.kind!r}")
        if self.kind == "global" and self.key:
            raise IndexError_("global scope takes no key")
        if self.kind != "global" and not self.key:
            raise IndexError_(f"{self.kind} scope requires a key")

    @classmethod
    def global_(cls) -> "IndexScope":
        return cls("global")

    @classmethod
    def agent(cls, filing_type: FilingType) -> "IndexScope":
        return cls("agent", filing_type.value)

    @classmethod
    def table(cls, table_id: str) -> "IndexScope":
        return cls("table", table_id)

    def label(self) -> str:
        return self.kind if self.kind == "global" else f"{self.kind}:{self.key}"

    @classmethod
    def parse(cls, label: str) -> "IndexScope":
        if label == "global":
            return cls.global_()
        kind, _, key = label.partition(":")
        return cls(kind, key)


class HashFeatureEmbedder:
    """Deterministic test embedder: feature-hash tokens into d signed buckets
    and L2-normalize. Pure function of the text."""

    kind = "hash"

    def __init__(self, dim: int = 64):
        if dim < 1:
            raise IndexError_("dim must be >= 1")
        self.dim = dim
        self._token_cache: dict[str, tuple[int, float]] = {}

    @property
    def fingerprint(self) -> str:
        return f"{self.kind}:{self.dim}"

    def _bucket(self, token: str) -> tuple[int, float]:
        cached = self._token_cache.get(token)
        if cached is None:
            crc = zlib.crc32(token.encode("utf-8"))
            cached = (crc % self.dim, 1.0 if (crc >> 16) & 1 else -1.0)
            self._token_cache[token] = cached
        return cached

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for token in _TOKEN_RE.findall(text.lower()):
            bucket, sign = self._bucket(token)
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0:
            vec /= norm
        return vec.astype(np.float32)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self.embed(text)
        return out


class MappingEmbedder:
    """Oracle embedder for tests and ceilings: exact text-to-vector lookup
    with a configurable default for unknown texts."""

    kind = "mapping"

    def __init__(self, dim: int, mapping: dict[str, np.ndarray],
                 default: np.ndarray | Callable[[str], np.ndarray] | None = None):
        self.dim = dim
        self.mapping = {k: np.asarray(v, dtype=np.float32) for k, v in mapping.items()}
        self.default = default

    @property
    def fingerprint(self) -> str:
        return f"{self.kind}:{self.dim}"

    def embed(self, text: str) -> np.ndarray:
        hit = self.mapping.get(text)
        if hit is not None:
            return hit
        if self.default is None:
            raise IndexError_(f"no mapping for text: {text[:60]!r}")
        if callable(self.default):
            return np.asarray(self.default(text), dtype=np.float32)
        return np.asarray(self.default, dtype=np.float32)

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            out[i] = self.embed(text)
        return out


class RemoteEmbedder:
    """External embedding API client; same minimal wire shape as the
    completion endpoint family: {model, input} in, data[i].embedding out."""

    kind = "remote"

    def __init__(self, endpoint: str, model: str, dim: int,
                 timeout: float = 30.0, session: requests.Session | None = None):
        self.endpoint = endpoint
        self.model = model
        self.dim = dim
        self.timeout = timeout
        self.session = session or requests.Session()

    @property
    def fingerprint(self) -> str:
        return f"{self.kind}:{self.model}:{self.dim}"

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray:
        resp = self.session.post(self.endpoint,
                                 json={"model": self.model, "input": list(texts)},
                                 timeout=self.timeout)
        resp.raise_for_status()
        data = resp.json()["data"]
        out = np.asarray([row["embedding"] for row in data], dtype=np.float32)
        if out.shape != (len(texts), self.dim):
            raise IndexError_(f"endpoint returned shape {out.shape}, "
                              f"expected {(len(texts), self.dim)}")
        return out

    def embed(self, text: str) -> np.ndarray:
        return self.embed_batch([text])[0]


@dataclass
class FlatIndex:
    scope: IndexScope
    dim: int
    record_ids: list[str] = field(default_factory=list)
    vectors: np.ndarray | None = None  # (n, dim) float32

    def __post_init__(self) -> None:
        if self.vectors is None:
            self.vectors = np.zeros((0, self.dim), dtype=np.float32)
        if self.vectors.shape != (len(self.record_ids), self.dim):
            raise IndexError_("vectors shape does not match ids and dim")
        if len(set(self.record_ids)) != len(self.record_ids):
            raise IndexError_("duplicate record ids in index")

    def __len__(self) -> int:
        return len(self.record_ids)


def _scope_records(view: ReconciledView, scope: IndexScope):
    if scope.kind == "global":
        return list(view.records)
    if scope.kind == "agent":
        ft = FilingType.parse(scope.key)
        return [r for r in view.records if r.filing_type == ft]
    return [r for r in view.records if r.table_id == scope.key]


def build_index(view: ReconciledView, scope: IndexScope, embedder) -> FlatIndex:
    """Embed every reconciled record in scope, one entry per record."""
    records = _scope_records(view, scope)
    texts = [to_embedding_text(r) for r in records]
    vectors = embedder.embed_batch(texts) if texts else None
    index = FlatIndex(scope=scope, dim=embedder.dim,
                      record_ids=[r.record_id for r in records],
                      vectors=vectors)
    return index


def build_text_index(entries: Iterable[tuple[str, str]], embedder,
                     scope: IndexScope | None = None) -> FlatIndex:
    """Index arbitrary (entry_id, text) pairs; used for persona and table
    description routing indexes."""
    pairs = list(entries)
    texts = [text for _, text in pairs]
    vectors = embedder.embed_batch(texts) if texts else None
    return FlatIndex(scope=scope or IndexScope.global_(), dim=embedder.dim,
                     record_ids=[eid for eid, _ in pairs], vectors=vectors)


def build_persona_index(registry: SchemaRegistry, embedder) -> FlatIndex:
    return build_text_index(
        ((ft.value, registry.profile(ft).persona) for ft in FilingType),
        embedder)


def build_table_description_index(registry: SchemaRegistry,
                                  filing_type: FilingType, embedder) -> FlatIndex:
    return build_text_index(
        ((schema.table_id, schema.description)
         for schema in registry.tables_for(filing_type)),
        embedder,
        scope=IndexScope.agent(filing_type))


def canonical_distance(x: np.ndarray, q: np.ndarray) -> float:
    """The one true squared-L2: float32 inputs widened to float64."""
    x64 = np.asarray(x, dtype=np.float32).astype(np.float64)
    q64 = np.asarray(q, dtype=np.float32).astype(np.float64)
    return float(np.sum((x64 - q64) ** 2))


def knn(index: FlatIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exact top-k by canonical distance; ties by record_id ascending."""
    if k < 1:
        raise IndexError_("k must be >= 1")
    q32 = np.asarray(query, dtype=np.float32)
    if q32.shape != (index.dim,):
        raise IndexError_(f"query dim {q32.shape} does not match index dim {index.dim}")
    n = len(index)
    if n == 0:
        return []
    vectors = index.vectors
    q64 = q32.astype(np.float64)
    x64 = vectors.astype(np.float64)
    # Prefilter with the expanded form; its rounding differs from the
    # canonical expression by far less than the margin used below.
    approx = (np.einsum("ij,ij->i", x64, x64)
              - 2.0 * (x64 @ q64)
              + float(q64 @ q64))
    take = min(n, k)
    kth = np.partition(approx, take - 1)[take - 1]
    candidate_pos = np.nonzero(approx <= kth + 1e-6)[0]
    rescored = [
        (float(np.sum((x64[pos] - q64) ** 2)), index.record_ids[pos])
        for pos in candidate_pos
    ]
    rescored.sort(key=lambda pair: (pair[0], pair[1]))
    return [(record_id, dist) for dist, record_id in rescored[:take]]


def r_precision(retrieved: Sequence[str], relevant: Iterable[str]) -> float:
    """Precision at R where R = |relevant|; ranks past |retrieved| are
    misses. Equals both precision@R and recall@R."""
    relevant_set = frozenset(relevant)
    if not relevant_set:
        raise ValueError("relevant set must be non-empty")
    r = len(relevant_set)
    top = list(retrieved)[:r]
    return len(frozenset(top) & relevant_set) / r


def precision_at_k(retrieved: Sequence[str], relevant: Iterable[str], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    top = frozenset(list(retrieved)[:k])
    return len(top & frozenset(relevant)) / k


def recall_at_k(retrieved: Sequence[str], relevant: Iterable[str], k: int) -> float:
    relevant_set = frozenset(relevant)
    if not relevant_set:
        raise ValueError("relevant set must be non-empty")
    top = frozenset(list(retrieved)[:k])
    return len(top & relevant_set) / len(relevant_set)


# ---------------------------------------------------------------------------
# Snapshots

def save_index(index: FlatIndex, path: str | Path,
               embedder_fingerprint: str = "") -> None:
    ids_blob = "\n".join(index.record_ids).encode("utf-8")
    header = {
        "scope": index.scope.label(),
        "dim": index.dim,
        "count": len(index),
        "embedder": embedder_fingerprint,
        "ids_bytes": len(ids_blob),
    }
    vec = np.ascontiguousarray(index.vectors, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(vec.tobytes())
        fh.write(ids_blob)


def load_index(path: str | Path) -> tuple[FlatIndex, str]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if not blob.startswith(_MAGIC):
        raise IndexError_("not an index snapshot")
    header_end = blob.index(b"\n", len(_MAGIC))
    header = json.loads(blob[len(_MAGIC):header_end].decode("utf-8"))
    dim = header["dim"]
    count = header["count"]
    vec_bytes = count * dim * 4
    vec_start = header_end + 1
    vectors = np.frombuffer(blob[vec_start:vec_start + vec_bytes],
                            dtype="<f4").reshape(count, dim).copy()
    ids_blob = blob[vec_start + vec_bytes:]
    if len(ids_blob) != header["ids_bytes"]:
        raise IndexError_("snapshot truncated")
    record_ids = ids_blob.decode("utf-8").split("\n") if ids_blob else []
    index = FlatIndex(scope=IndexScope.parse(header["scope"]), dim=dim,
                      record_ids=record_ids, vectors=vectors)
    return index, header["embedder"]
