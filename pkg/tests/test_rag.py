import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qforge.errors import (
    DimensionMismatchError,
    EmptyIndexError,
    InvalidParamsError,
)
from qforge.rag import (
    CONTEXT_HEADER,
    DocumentChunk,
    HashedBagOfWordsEmbedder,
    INDEX_MAGIC,
    RetrievalResult,
    VectorIndex,
    augment_prompt,
    chunk_corpus,
    embed_chunks,
    load_index,
    resolve_embedder,
    retrieve,
    save_index,
)

WORDS = ("grover", "oracle", "qubit", "phase", "fourier", "amplitude",
         "entangle", "measure", "unitary", "walk")


def make_corpus(rng, n_docs=6, doc_words=30):
    docs = []
    for d in range(n_docs):
        text = " ".join(rng.choice(WORDS) for _ in range(doc_words))
        docs.append((f"doc{d}.txt", text))
    return docs


# ------------------------------------------------------------------ chunking

def test_window_arithmetic_frozen():
    chunks = chunk_corpus([("d.txt", "abcdefghij")], chunk_size=4, overlap=1)
    assert [c.text for c in chunks] == ["abcd", "defg", "ghij"]
    assert [c.id for c in chunks] == [0, 1, 2]
    assert all(c.source == "d.txt" for c in chunks)


def test_chunk_ids_dense_across_documents():
    chunks = chunk_corpus([("a.txt", "xxxx"), ("b.txt", ""), ("c.txt", "yyyyyy")],
                          chunk_size=4, overlap=0)
    assert [(c.id, c.source) for c in chunks] == [
        (0, "a.txt"), (1, "c.txt"), (2, "c.txt")]


def test_short_document_is_one_chunk():
    chunks = chunk_corpus([("a.txt", "hi")], chunk_size=100, overlap=10)
    assert len(chunks) == 1 and chunks[0].text == "hi"


def test_chunk_corpus_validates_params():
    with pytest.raises(InvalidParamsError):
        chunk_corpus([("a", "text")], chunk_size=4, overlap=4)
    with pytest.raises(InvalidParamsError):
        chunk_corpus([("a", "text")], chunk_size=4, overlap=-1)
    with pytest.raises(InvalidParamsError):
        chunk_corpus([("a", "text")], chunk_size=0, overlap=0)


def test_chunk_corpus_kind_field():
    chunks = chunk_corpus([("a", "text", "algorithm_guides")], chunk_size=10,
                          overlap=0)
    assert chunks[0].corpus == "algorithm_guides"
    with pytest.raises(InvalidParamsError):
        chunk_corpus([("a", "text", "tweets")], chunk_size=10, overlap=0)


@settings(max_examples=150, deadline=None)
@given(st.text(alphabet="ab ", min_size=1, max_size=200),
       st.integers(1, 50), st.integers(0, 49))
def test_chunks_cover_text_with_exact_stride(text, chunk_size, overlap):
    if overlap >= chunk_size:
        overlap = chunk_size - 1
    chunks = chunk_corpus([("d", text)], chunk_size=chunk_size, overlap=overlap)
    stride = chunk_size - overlap
    # reassembling from the stride prefix of each chunk plus the last chunk
    # reproduces the document exactly
    rebuilt = "".join(c.text[:stride] for c in chunks[:-1]) + chunks[-1].text
    assert rebuilt == text
    assert all(len(c.text) <= chunk_size for c in chunks)


# ----------------------------------------------------------------- embedding

def test_embedder_is_deterministic_and_normalized():
    emb = HashedBagOfWordsEmbedder(64)
    v1, v2 = emb.embed(["grover oracle grover"]), emb.embed(["grover oracle grover"])
    assert np.array_equal(v1, v2)
    assert v1.dtype == np.float32
    assert abs(np.linalg.norm(v1[0].astype(np.float64)) - 1.0) < 1e-6


def test_embedder_empty_text_is_zero_vector():
    emb = HashedBagOfWordsEmbedder(32)
    assert not emb.embed(["!!!"]).any()


def test_token_pattern_case_folding():
    emb = HashedBagOfWordsEmbedder(128)
    assert np.array_equal(emb.embed(["Grover ORACLE"]), emb.embed(["grover oracle"]))


def test_resolve_embedder():
    emb = resolve_embedder("hashed-bow-256")
    assert emb.dimension == 256
    assert emb.embedder_id == "hashed-bow-256"
    with pytest.raises(InvalidParamsError):
        resolve_embedder("word2vec")


def test_embed_chunks_dimension_guard():
    class Ragged:
        embedder_id = "ragged"
        dimension = 8

        def embed(self, texts):
            return [np.zeros(4, dtype=np.float32) for _ in texts]

    chunks = chunk_corpus([("a", "text")], chunk_size=10, overlap=0)
    with pytest.raises(DimensionMismatchError):
        embed_chunks(chunks, Ragged())


# ----------------------------------------------------------------- retrieval

def brute_force_rank(index, query, embedder):
    """Independent oracle: python-loop cosine + stable sort by (-score, id)."""
    qv = np.asarray(embedder.embed([query])[0], dtype=np.float64)
    qn = np.linalg.norm(qv)
    scored = []
    for chunk in index.chunks:
        cv = np.asarray(chunk.embedding, dtype=np.float64)
        denom = np.linalg.norm(cv) * qn
        score = float(cv @ qv / denom) if denom > 0 else 0.0
        scored.append((chunk.id, score))
    scored.sort(key=lambda t: (-t[1], t[0]))
    return scored


def test_retrieve_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    embedder = HashedBagOfWordsEmbedder(64)
    index = embed_chunks(
        chunk_corpus(make_corpus(rng), chunk_size=40, overlap=10), embedder)
    for query in ("grover oracle", "fourier phase", "walk walk qubit", "zzz"):
        for k in (1, 3, len(index.chunks), len(index.chunks) + 5):
            got = retrieve(index, query, k=k, embedder=embedder)
            want = brute_force_rank(index, query, embedder)[:k]
            assert [(r.chunk.id, round(r.score, 12)) for r in got] == \
                   [(i, round(s, 12)) for i, s in want]


def test_retrieve_breaks_ties_by_ascending_id():
    chunks = [DocumentChunk(id=i, source="s", corpus="api_docs", text="same text")
              for i in range(4)]
    index = embed_chunks(chunks, HashedBagOfWordsEmbedder(32))
    results = retrieve(index, "same text", k=4,
                       embedder=HashedBagOfWordsEmbedder(32))
    assert [r.chunk.id for r in results] == [0, 1, 2, 3]
    assert len({round(r.score, 9) for r in results}) == 1


def test_retrieve_errors():
    embedder = HashedBagOfWordsEmbedder(32)
    index = VectorIndex(dimension=32, embedder_id=embedder.embedder_id, chunks=[])
    with pytest.raises(EmptyIndexError):
        retrieve(index, "q")
    full = embed_chunks(chunk_corpus([("a", "text")], chunk_size=10, overlap=0),
                        embedder)
    with pytest.raises(InvalidParamsError):
        retrieve(full, "q", k=0, embedder=embedder)
    with pytest.raises(InvalidParamsError):
        retrieve(full, "q", embedder=HashedBagOfWordsEmbedder(64))  # id mismatch


# -------------------------------------------------------------- augmentation

def test_augment_prompt_format():
    results = [
        RetrievalResult(DocumentChunk(0, "s", "api_docs", "first chunk"), 0.9),
        RetrievalResult(DocumentChunk(1, "s", "api_docs", "second\nchunk"), 0.5),
    ]
    out = augment_prompt("solve it", results)
    assert out == ("Context:\n[1] first chunk\n[2] second\nchunk\n\nsolve it")
    assert out.count(CONTEXT_HEADER) == 1


def test_augment_prompt_escapes_header_collision():
    chunk = DocumentChunk(0, "s", "api_docs", "before\nContext:\nafter")
    out = augment_prompt("task", [RetrievalResult(chunk, 1.0)])
    lines = out.split("\n")
    assert lines[0] == "Context:"
    assert "Context\\:" in out
    assert sum(1 for line in lines if line.strip() == CONTEXT_HEADER) == 1


def test_augment_prompt_no_results_is_identity():
    assert augment_prompt("task", []) == "task"


# ----------------------------------------------------------------- index IO

def test_index_round_trip_is_bitwise(tmp_path):
    rng = np.random.default_rng(3)
    embedder = HashedBagOfWordsEmbedder(48)
    index = embed_chunks(
        chunk_corpus(make_corpus(rng, n_docs=3), chunk_size=25, overlap=5,
                     corpus="algorithm_guides"),
        embedder)
    path = tmp_path / "x.qfrg"
    save_index(index, path)
    loaded = load_index(path)
    assert loaded.dimension == index.dimension
    assert loaded.embedder_id == index.embedder_id
    assert loaded.version == index.version
    assert len(loaded.chunks) == len(index.chunks)
    for a, b in zip(loaded.chunks, index.chunks):
        assert (a.id, a.source, a.corpus, a.text) == (b.id, b.source, b.corpus, b.text)
        assert a.embedding.tobytes() == b.embedding.tobytes()
    # saving the loaded index reproduces the file byte for byte
    path2 = tmp_path / "y.qfrg"
    save_index(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_index_load_rejects_bad_magic_and_version(tmp_path):
    path = tmp_path / "bad.qfrg"
    path.write_bytes(b"NOPE" + b"\x00" * 32)
    with pytest.raises(InvalidParamsError):
        load_index(path)
    embedder = HashedBagOfWordsEmbedder(8)
    index = embed_chunks(chunk_corpus([("a", "text")], chunk_size=10, overlap=0),
                         embedder)
    good = tmp_path / "good.qfrg"
    save_index(index, good)
    blob = bytearray(good.read_bytes())
    blob[4] = 99  # version field little-endian low byte
    bad_version = tmp_path / "vers.qfrg"
    bad_version.write_bytes(bytes(blob))
    with pytest.raises(InvalidParamsError):
        load_index(bad_version)
    assert good.read_bytes()[:4] == INDEX_MAGIC


def test_unembedded_index_cannot_be_saved(tmp_path):
    chunk = DocumentChunk(0, "s", "api_docs", "text")
    index = VectorIndex(dimension=8, embedder_id="hashed-bow-8", chunks=[chunk])
    with pytest.raises(InvalidParamsError):
        save_index(index, tmp_path / "z.qfrg")


# ------------------------------------------------------- retrieval property

@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 8))
def test_retrieval_oracle_equivalence_property(seed, k):
    rng = np.random.default_rng(seed)
    embedder = HashedBagOfWordsEmbedder(32)
    corpus = make_corpus(rng, n_docs=4, doc_words=12)
    index = embed_chunks(chunk_corpus(corpus, chunk_size=30, overlap=6), embedder)
    query = " ".join(rng.choice(WORDS) for _ in range(3))
    got = retrieve(index, query, k=k, embedder=embedder)
    want = brute_force_rank(index, query, embedder)[:k]
    assert [r.chunk.id for r in got] == [i for i, _ in want]
    for r, (_, s) in zip(got, want):
        assert abs(r.score - s) < 1e-12
