"""Retrieval-augmented generation: chunking, embedding, indexing, retrieval.

Documents are chunked with a sliding character window (stride = chunk_size
- overlap), embedded, and stored in a flat vector index. Retrieval is an
exact linear scan by cosine similarity; ties break toward the lower chunk
id. No approximate search: at this corpus scale exactness is cheaper than
tuning recall.

The built-in embedder is a deterministic 512-dimension hashed bag of
words: tokens are lowercased ``[a-z0-9_]+`` runs, hashed with blake2b onto
buckets, counted, and L2-normalized. Identical text embeds to the
identical vector on every platform.

Index files are binary: a ``QFRG`` magic, a format version, the dimension,
the embedder id, then per-chunk records with little-endian float32
embeddings. Save and load round-trip embeddings bitwise.
"""

from __future__ import annotations

import hashlib
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyIndexError,
    InvalidParamsError,
)

CORPUS_KINDS = ("api_docs", "algorithm_guides")
INDEX_MAGIC = b"QFRG"
INDEX_VERSION = 1
DEFAULT_CHUNK_SIZE = 1000
DEFAULT_OVERLAP = 200
DEFAULT_RETRIEVAL_K = 4


@dataclass
class DocumentChunk:
    id: int
    source: str
    corpus: str
    text: str
    embedding: np.ndarray | None = None

    def __post_init__(self):
        if self.corpus not in CORPUS_KINDS:
            raise InvalidParamsError(f"unknown corpus kind {self.corpus!r}")
        if not self.text:
            raise InvalidParamsError("chunk text must be nonempty")


@dataclass
class VectorIndex:
    dimension: int
    embedder_id: str
    chunks: list[DocumentChunk] = field(default_factory=list)
    version: int = INDEX_VERSION

    def embedding_matrix(self) -> np.ndarray:
        return np.stack([chunk.embedding for chunk in self.chunks])


@dataclass(frozen=True)
class RetrievalResult:
    chunk: DocumentChunk
    score: float


def chunk_corpus(documents: Sequence, chunk_size: int = DEFAULT_CHUNK_SIZE,
                 overlap: int = DEFAULT_OVERLAP,
                 corpus: str = "api_docs") -> list[DocumentChunk]:
    """Slice documents into overlapping character windows.

    ``documents`` is a sequence of (source, text) pairs, optionally
    (source, text, corpus_kind) triples. Windows start every
    ``chunk_size - overlap`` characters; the final window may be short.
    Chunk ids are dense from 0 in input order. Empty documents yield no
    chunks.
    """
    if overlap < 0 or chunk_size <= overlap:
        raise InvalidParamsError(
            f"need chunk_size > overlap >= 0, got {chunk_size} / {overlap}")
    stride = chunk_size - overlap
    chunks: list[DocumentChunk] = []
    for doc in documents:
        source, text = doc[0], doc[1]
        kind = doc[2] if len(doc) > 2 else corpus
        if not text:
            continue
        pos = 0
        while True:
            chunks.append(DocumentChunk(
                id=len(chunks), source=str(source), corpus=kind,
                text=text[pos:pos + chunk_size]))
            if pos + chunk_size >= len(text):
                break
            pos += stride
    return chunks


class Embedder(Protocol):
    dimension: int
    embedder_id: str

    def embed(self, texts: Sequence[str]) -> np.ndarray: ...


class HashedBagOfWordsEmbedder:
    """Deterministic hashed bag-of-words embedding."""

    _TOKEN = re.compile(r"[a-z0-9_]+")

    def __init__(self, dimension: int = 512):
        if dimension < 1:
            raise InvalidParamsError("dimension must be >= 1")
        self.dimension = dimension
        self.embedder_id = f"hashed-bow-{dimension}"

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dimension

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension), dtype=np.float32)
        for i, text in enumerate(texts):
            counts = np.zeros(self.dimension, dtype=np.float64)
            for token in self._TOKEN.findall(text.lower()):
                counts[self._bucket(token)] += 1.0
            norm = np.linalg.norm(counts)
            if norm > 0:
                out[i] = (counts / norm).astype(np.float32)
        return out


def resolve_embedder(embedder_id: str) -> Embedder:
    match = re.fullmatch(r"hashed-bow-(\d+)", embedder_id)
    if match:
        return HashedBagOfWordsEmbedder(int(match.group(1)))
    raise InvalidParamsError(
        f"no built-in embedder {embedder_id!r}; pass the embedder explicitly")


def embed_chunks(chunks: Sequence[DocumentChunk],
                 embedder: Embedder | None = None) -> VectorIndex:
    """Embed chunks into a fresh index. Every vector must come back with
    the embedder's declared dimension; a ragged batch is an error."""
    if embedder is None:
        embedder = HashedBagOfWordsEmbedder()
    vectors = embedder.embed([chunk.text for chunk in chunks])
    dimension = getattr(embedder, "dimension", None) or (
        len(vectors[0]) if len(vectors) else 0)
    embedded = []
    for chunk, vector in zip(chunks, vectors):
        arr = np.asarray(vector, dtype=np.float32).reshape(-1)
        if arr.shape != (dimension,):
            raise DimensionMismatchError(
                f"chunk {chunk.id} embedded to shape {arr.shape}, "
                f"expected ({dimension},)")
        embedded.append(replace(chunk, embedding=arr))
    return VectorIndex(dimension=dimension, embedder_id=embedder.embedder_id,
                       chunks=embedded)


def _cosine_scores(matrix: np.ndarray, query: np.ndarray) -> np.ndarray:
    matrix64 = matrix.astype(np.float64)
    query64 = query.astype(np.float64)
    norms = np.linalg.norm(matrix64, axis=1)
    qnorm = np.linalg.norm(query64)
    denom = norms * qnorm
    scores = np.zeros(matrix.shape[0], dtype=np.float64)
    nonzero = denom > 0
    scores[nonzero] = (matrix64[nonzero] @ query64) / denom[nonzero]
    return scores


def retrieve(index: VectorIndex, query: str, k: int = DEFAULT_RETRIEVAL_K,
             embedder: Embedder | None = None) -> list[RetrievalResult]:
    """Exact top-k cosine retrieval; ties break toward the lower chunk id.
    k greater than the index size returns everything, ranked."""
    if not index.chunks:
        raise EmptyIndexError("cannot retrieve from an empty index")
    if k < 1:
        raise InvalidParamsError("k must be >= 1")
    if embedder is None:
        embedder = resolve_embedder(index.embedder_id)
    elif embedder.embedder_id != index.embedder_id:
        raise InvalidParamsError(
            f"index built with {index.embedder_id!r}, "
            f"queried with {embedder.embedder_id!r}")
    query_vec = np.asarray(embedder.embed([query])[0], dtype=np.float32)
    if query_vec.shape != (index.dimension,):
        raise DimensionMismatchError("query embedding has wrong dimension")
    scores = _cosine_scores(index.embedding_matrix(), query_vec)
    ids = np.array([chunk.id for chunk in index.chunks])
    order = np.lexsort((ids, -scores))
    top = order[:min(k, len(index.chunks))]
    return [RetrievalResult(chunk=index.chunks[i], score=float(scores[i])) for i in top]


CONTEXT_HEADER = "Context:"


def augment_prompt(prompt: str, results: Sequence[RetrievalResult]) -> str:
    """Prepend retrieved chunks under a ``Context:`` header.

    Chunks appear verbatim in rank order. The one escape rule: a chunk line
    that equals the header token is rewritten (``Context\\:``) so the header
    appears exactly once. No results returns the prompt unchanged.
    """
    if not results:
        return prompt
    parts = [CONTEXT_HEADER]
    for rank, result in enumerate(results, start=1):
        text = "\n".join(
            line.replace(CONTEXT_HEADER, "Context\\:", 1)
            if line.strip() == CONTEXT_HEADER else line
            for line in result.chunk.text.split("\n")
        )
        parts.append(f"[{rank}] {text}")
    parts.append("")
    parts.append(prompt)
    return "\n".join(parts)


# --- binary index format -----------------------------------------------------

def save_index(index: VectorIndex, path: str | Path) -> None:
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(INDEX_MAGIC)
        embedder_bytes = index.embedder_id.encode("utf-8")
        fh.write(struct.pack("<IIHI", index.version, index.dimension,
                             len(embedder_bytes), len(index.chunks)))
        fh.write(embedder_bytes)
        for chunk in index.chunks:
            if chunk.embedding is None:
                raise InvalidParamsError(f"chunk {chunk.id} has no embedding")
            source = chunk.source.encode("utf-8")
            text = chunk.text.encode("utf-8")
            fh.write(struct.pack("<IBII", chunk.id,
                                 CORPUS_KINDS.index(chunk.corpus),
                                 len(source), len(text)))
            fh.write(source)
            fh.write(text)
            fh.write(np.asarray(chunk.embedding, dtype="<f4").tobytes())


def load_index(path: str | Path) -> VectorIndex:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != INDEX_MAGIC:
        raise InvalidParamsError(f"{path} is not an index file (bad magic)")
    version, dimension, embedder_len, count = struct.unpack_from("<IIHI", data, 4)
    if version != INDEX_VERSION:
        raise InvalidParamsError(f"unsupported index version {version}")
    offset = 4 + struct.calcsize("<IIHI")
    embedder_id = data[offset:offset + embedder_len].decode("utf-8")
    offset += embedder_len
    chunks = []
    for _ in range(count):
        chunk_id, kind_idx, source_len, text_len = struct.unpack_from("<IBII", data, offset)
        offset += struct.calcsize("<IBII")
        source = data[offset:offset + source_len].decode("utf-8")
        offset += source_len
        text = data[offset:offset + text_len].decode("utf-8")
        offset += text_len
        embedding = np.frombuffer(data, dtype="<f4", count=dimension,
                                  offset=offset).copy()
        offset += dimension * 4
        chunks.append(DocumentChunk(id=chunk_id, source=source,
                                    corpus=CORPUS_KINDS[kind_idx], text=text,
                                    embedding=embedding))
    return VectorIndex(dimension=dimension, embedder_id=embedder_id,
                       chunks=chunks, version=version)
