"""Training-corpus preparation: filtering, notebook splitting, chunking,
fill-in-the-middle rearrangement, and weighted upsampling.

Accounting unit: a "token" is a whitespace-delimited word. That keeps the
target arithmetic reproducible without dragging in a subword tokenizer.

FIM uses the PSM sentinel convention ``<fim_prefix>/<fim_suffix>/<fim_middle>``.
Texts that already contain a sentinel are passed through untransformed so the
reassembly inverse stays exact for every chunk.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path

import numpy as np

from .errors import InvalidParamsError, InvalidTargetError, MalformedNotebookError
from .rng import DEFAULT_SEED, substream

CORPUS_KINDS = ("source", "notebook")
DEFAULT_CUTOFF = date(2024, 2, 1)
DEFAULT_IMPORT_PATTERN = r"^\s*(?:import\s+qiskit\b|from\s+qiskit(?:\.\w+)*\s+import\b)"
CODE_SENTINEL = "<jupyter_code>"
TEXT_SENTINEL = "<jupyter_text>"
FIM_PREFIX = "<fim_prefix>"
FIM_SUFFIX = "<fim_suffix>"
FIM_MIDDLE = "<fim_middle>"
DEFAULT_FIM_RATE = 0.1
DEFAULT_OFFICIAL_WEIGHT = 3.0
DEFAULT_CHUNK_CHARS = 2000


@dataclass(frozen=True)
class CorpusFile:
    """One file of the local corpus, either a plain source file (``text``)
    or a notebook (``cells`` as (cell_type, text) pairs)."""

    path: str
    kind: str
    last_updated: date
    official: bool = False
    text: str | None = None
    cells: tuple | None = None

    def __post_init__(self):
        if self.kind not in CORPUS_KINDS:
            raise InvalidParamsError(f"unknown corpus kind {self.kind!r}")
        if self.kind == "source" and self.text is None:
            raise InvalidParamsError("source files carry text")
        if self.kind == "notebook" and self.cells is None:
            raise InvalidParamsError("notebook files carry cells")
        if self.cells is not None:
            object.__setattr__(self, "cells", tuple(tuple(c) for c in self.cells))

    def content(self) -> str:
        if self.kind == "source":
            return self.text or ""
        return "\n".join(text for _, text in self.cells)


@dataclass(frozen=True)
class TrainChunk:
    text: str
    source: str
    fim_applied: bool = False
    official: bool = False

    def __post_init__(self):
        if not self.text:
            raise InvalidParamsError("chunk text must be nonempty")


def filter_corpus(files, cutoff: date = DEFAULT_CUTOFF,
                  import_pattern: str = DEFAULT_IMPORT_PATTERN) -> list[CorpusFile]:
    """Keep files updated strictly after the cutoff whose content matches the
    import pattern. Idempotent by construction."""
    matcher = re.compile(import_pattern, re.MULTILINE)
    return [f for f in files
            if f.last_updated > cutoff and matcher.search(f.content())]


def split_notebook(nb: CorpusFile, code_sentinel: str = CODE_SENTINEL,
                   text_sentinel: str = TEXT_SENTINEL) -> list[str]:
    """Turn a notebook into sentinel-prefixed tiles, one per nonempty cell,
    in document order."""
    if nb.kind != "notebook":
        raise MalformedNotebookError(f"{nb.path} is not a notebook")
    tiles = []
    for cell_type, text in nb.cells:
        if not text.strip():
            continue
        if cell_type == "code":
            tiles.append(code_sentinel + text)
        elif cell_type == "markdown":
            tiles.append(text_sentinel + text)
        else:
            raise MalformedNotebookError(
                f"{nb.path} has unknown cell type {cell_type!r}")
    return tiles


def _parse_notebook_cells(raw: str, path: str):
    try:
        record = json.loads(raw)
        cells = []
        for cell in record["cells"]:
            source = cell["source"]
            if isinstance(source, list):
                source = "".join(source)
            cells.append((cell["cell_type"], source))
        return tuple(cells)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedNotebookError(f"cannot parse {path}: {exc}") from exc


def load_corpus(root: str | Path) -> list[CorpusFile]:
    """Walk a directory tree of ``.py`` and ``.ipynb`` files.

    ``metadata.json`` at the root maps relative paths to
    ``{"last_updated": "YYYY-MM-DD", "official": bool}``; files without an
    entry default to the epoch-like ``date.min`` and unofficial, which the
    date filter then drops.
    """
    root = Path(root)
    meta_path = root / "metadata.json"
    metadata = {}
    if meta_path.exists():
        metadata = json.loads(meta_path.read_text(encoding="utf-8"))
    files = []
    for path in sorted(root.rglob("*")):
        if path.suffix not in (".py", ".ipynb") or not path.is_file():
            continue
        rel = path.relative_to(root).as_posix()
        entry = metadata.get(rel, {})
        updated = (date.fromisoformat(entry["last_updated"])
                   if "last_updated" in entry else date.min)
        official = bool(entry.get("official", False))
        raw = path.read_text(encoding="utf-8")
        if path.suffix == ".py":
            files.append(CorpusFile(path=rel, kind="source", last_updated=updated,
                                    official=official, text=raw))
        else:
            files.append(CorpusFile(path=rel, kind="notebook", last_updated=updated,
                                    official=official,
                                    cells=_parse_notebook_cells(raw, rel)))
    return files


def _windows(text: str, size: int):
    pos = 0
    while True:
        yield text[pos:pos + size]
        if pos + size >= len(text):
            break
        pos += size


def build_train_chunks(files, chunk_chars: int = DEFAULT_CHUNK_CHARS) -> list[TrainChunk]:
    """Chunk a filtered corpus: source files are windowed directly; notebooks
    are split into sentinel tiles first, long tiles windowed the same way."""
    if chunk_chars < 1:
        raise InvalidParamsError("chunk_chars must be positive")
    chunks = []
    for f in files:
        units = [f.text] if f.kind == "source" else split_notebook(f)
        for unit in units:
            for window in _windows(unit, chunk_chars):
                if window:
                    chunks.append(TrainChunk(text=window, source=f.path,
                                             official=f.official))
    return chunks


def fim_transform(chunk: TrainChunk, rng: np.random.Generator,
                  fim_rate: float = DEFAULT_FIM_RATE) -> TrainChunk:
    """With probability ``fim_rate``, rearrange text into PSM order with two
    random cut points i <= j. One uniform draw is always consumed per chunk
    (the cut draws only when the gate fires) so chunk streams stay aligned.
    Texts already containing a sentinel pass through unchanged.
    """
    if not 0.0 <= fim_rate <= 1.0:
        raise InvalidParamsError("fim_rate must be in [0, 1]")
    gate = rng.random() < fim_rate
    if not gate or chunk.fim_applied:
        return chunk
    text = chunk.text
    if any(s in text for s in (FIM_PREFIX, FIM_SUFFIX, FIM_MIDDLE)):
        return chunk
    i, j = sorted(int(v) for v in rng.integers(0, len(text) + 1, size=2))
    rearranged = FIM_PREFIX + text[:i] + FIM_SUFFIX + text[j:] + FIM_MIDDLE + text[i:j]
    return replace(chunk, text=rearranged, fim_applied=True)


def fim_reassemble(chunk: TrainChunk) -> TrainChunk:
    """Invert ``fim_transform``: recover prefix+middle+suffix in source order."""
    if not chunk.fim_applied:
        return chunk
    text = chunk.text
    if not text.startswith(FIM_PREFIX):
        raise InvalidParamsError("transformed chunk missing prefix sentinel")
    rest = text[len(FIM_PREFIX):]
    prefix, sep, rest = rest.partition(FIM_SUFFIX)
    if not sep:
        raise InvalidParamsError("transformed chunk missing suffix sentinel")
    suffix, sep, middle = rest.partition(FIM_MIDDLE)
    if not sep:
        raise InvalidParamsError("transformed chunk missing middle sentinel")
    return replace(chunk, text=prefix + middle + suffix, fim_applied=False)


def count_tokens(text: str) -> int:
    """Whitespace-delimited word count, the accounting unit for targets."""
    return len(text.split())


def total_tokens(chunks) -> int:
    return sum(count_tokens(chunk.text) for chunk in chunks)


def upsample(chunks, target_tokens: int,
             official_weight: float = DEFAULT_OFFICIAL_WEIGHT,
             seed: int = DEFAULT_SEED) -> list[TrainChunk]:
    """Duplicate chunks by weighted sampling with replacement until the token
    total reaches the target. Originals come first, in input order; the
    appended tail is deterministic under the seed."""
    chunks = list(chunks)
    if not chunks:
        raise InvalidParamsError("cannot upsample an empty corpus")
    if official_weight < 1.0:
        raise InvalidParamsError("official_weight must be >= 1")
    tokens = [count_tokens(chunk.text) for chunk in chunks]
    current = sum(tokens)
    if target_tokens < current:
        raise InvalidTargetError(
            f"target {target_tokens} below current corpus size {current}")
    if current == 0 and target_tokens > 0:
        raise InvalidTargetError("corpus has no tokens to duplicate")
    weights = np.array([official_weight if chunk.official else 1.0
                        for chunk in chunks])
    probs = weights / weights.sum()
    rng = substream(seed, "dataprep.upsample")
    out = list(chunks)
    total = current
    while total < target_tokens:
        idx = int(rng.choice(len(chunks), p=probs))
        out.append(chunks[idx])
        total += tokens[idx]
    return out


def write_chunks(chunks, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for chunk in chunks:
            fh.write(json.dumps({
                "text": chunk.text,
                "source": chunk.source,
                "fim_applied": chunk.fim_applied,
                "official": chunk.official,
            }, sort_keys=True) + "\n")


def load_chunks(path: str | Path) -> list[TrainChunk]:
    chunks = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            chunks.append(TrainChunk(text=record["text"], source=record["source"],
                                     fim_applied=record["fim_applied"],
                                     official=record["official"]))
    return chunks
