"""Pluggable completion backends.

Three implementations share one interface: an HTTP client for
OpenAI-compatible ``/completions`` endpoints, a deterministic scripted
backend for tests and offline runs, and a cassette layer that records or
replays responses keyed by a content hash of the request.

Whatever ``n`` a request asks for, a backend returns exactly ``n``
completions; the scripted backend broadcasts or cycles its entries to meet
that contract.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence, runtime_checkable

import requests

from .errors import (
    AuthError,
    CassetteMissError,
    EmptyInputError,
    InvalidParamsError,
    MalformedResponseError,
    ScriptMissError,
    TransportError,
)

ENV_API_BASE = "QFORGE_API_BASE"
ENV_API_KEY = "QFORGE_API_KEY"
ENV_MODEL = "QFORGE_MODEL"


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.8
    top_p: float = 0.95
    max_tokens: int = 512
    n: int = 1

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise InvalidParamsError(f"temperature out of range: {self.temperature}")
        if not 0.0 < self.top_p <= 1.0:
            raise InvalidParamsError(f"top_p out of range: {self.top_p}")
        if self.max_tokens < 1:
            raise InvalidParamsError("max_tokens must be >= 1")
        if self.n < 1:
            raise InvalidParamsError("n must be >= 1")


# sampling used for population (pass@k) runs
PASS_AT_K_SAMPLING = SamplingParams(temperature=0.8, top_p=0.95, max_tokens=512, n=20)


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    params: SamplingParams = field(default_factory=SamplingParams)
    tag: str | None = None

    def __post_init__(self):
        if not self.prompt:
            raise EmptyInputError("prompt must be nonempty")


@dataclass(frozen=True)
class CompletionResponse:
    completions: tuple[str, ...]
    backend_id: str
    latency_ms: int

    def __post_init__(self):
        object.__setattr__(self, "completions", tuple(self.completions))


@runtime_checkable
class Backend(Protocol):
    backend_id: str

    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


def _request_key(request: CompletionRequest) -> str:
    payload = json.dumps(
        {
            "prompt": request.prompt,
            "params": {
                "temperature": request.params.temperature,
                "top_p": request.params.top_p,
                "max_tokens": request.params.max_tokens,
                "n": request.params.n,
            },
            "tag": request.tag,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ScriptedBackend:
    """Canned completions keyed by (tag, pass index).

    Scripts come in two shapes:

    * ``{tag: entry_or_list}`` where a list is the per-pass sequence
      (pass 1 gets the first entry, pass 2 the second, ...), or
    * ``{(tag, pass_index): entry}`` with 1-based pass indices.

    An entry is a string (broadcast to all ``n`` requested samples) or a
    list of strings (cycled to length ``n``). The pass index is the number
    of times this tag has been requested so far; a tag asked for more
    passes than it has entries wraps around. Unknown tags fall back to
    ``default`` when given, otherwise raise ScriptMissError.
    """

    backend_id = "scripted"

    def __init__(self, script: Mapping, default: str | Sequence[str] | None = None):
        per_tag: dict[str, dict[int, object]] = {}
        for key, entry in script.items():
            if isinstance(key, tuple):
                tag, pass_index = key
                if pass_index < 1:
                    raise InvalidParamsError("pass indices are 1-based")
                per_tag.setdefault(tag, {})[int(pass_index)] = entry
            else:
                entries = entry if isinstance(entry, (list, tuple)) else [entry]
                per_tag.setdefault(key, {})
                for i, item in enumerate(entries, start=1):
                    per_tag[key][i] = item
        self._script = {
            tag: [passes[i] for i in sorted(passes)] for tag, passes in per_tag.items()
        }
        self._default = default
        self._calls: dict[str, int] = {}
        self._lock = threading.Lock()

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        tag = request.tag or ""
        with self._lock:
            self._calls[tag] = self._calls.get(tag, 0) + 1
            pass_index = self._calls[tag]
        entries = self._script.get(tag)
        if entries is None:
            if self._default is None:
                raise ScriptMissError(f"no scripted entry for tag {tag!r}")
            entries = [self._default]
        entry = entries[(pass_index - 1) % len(entries)]
        n = request.params.n
        if isinstance(entry, (list, tuple)):
            completions = tuple(entry[i % len(entry)] for i in range(n))
        else:
            completions = (entry,) * n
        return CompletionResponse(completions=completions,
                                  backend_id=self.backend_id, latency_ms=0)


class HttpBackend:
    """OpenAI-compatible completions client.

    Configuration falls back to the QFORGE_API_BASE / QFORGE_API_KEY /
    QFORGE_MODEL environment variables. Transport failures and 5xx
    responses retry up to ``max_attempts`` times with exponential backoff
    starting at ``backoff_s``; 401/403 raise immediately.
    """

    def __init__(self, base_url: str | None = None, api_key: str | None = None,
                 model: str | None = None, *, session=None, timeout_s: float = 60.0,
                 max_attempts: int = 3, backoff_s: float = 0.5, sleep=time.sleep):
        self.base_url = (base_url or os.environ.get(ENV_API_BASE, "")).rstrip("/")
        self.api_key = api_key or os.environ.get(ENV_API_KEY, "")
        self.model = model or os.environ.get(ENV_MODEL, "")
        if not self.base_url:
            raise InvalidParamsError(f"no API base configured (set {ENV_API_BASE})")
        if not self.model:
            raise InvalidParamsError(f"no model configured (set {ENV_MODEL})")
        self._session = session or requests.Session()
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._sleep = sleep
        self.backend_id = f"http:{self.model}"

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        payload = {
            "model": self.model,
            "prompt": request.prompt,
            "temperature": request.params.temperature,
            "top_p": request.params.top_p,
            "max_tokens": request.params.max_tokens,
            "n": request.params.n,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        start = time.monotonic()
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                self._sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self._session.post(f"{self.base_url}/completions",
                                          json=payload, headers=headers,
                                          timeout=self.timeout_s)
            except requests.RequestException as exc:
                last_error = exc
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"authentication rejected ({resp.status_code})")
            if resp.status_code >= 500:
                last_error = TransportError(f"server error {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise MalformedResponseError(
                    f"unexpected status {resp.status_code}: {resp.text[:200]}")
            return self._parse(resp, request, start)
        raise TransportError(
            f"transport failed after {self.max_attempts} attempts: {last_error}")

    def _parse(self, resp, request: CompletionRequest, start: float) -> CompletionResponse:
        try:
            body = resp.json()
            completions = tuple(choice["text"] for choice in body["choices"])
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedResponseError(f"cannot parse completion body: {exc}") from exc
        if len(completions) != request.params.n:
            raise MalformedResponseError(
                f"asked for n={request.params.n}, got {len(completions)} choices")
        latency_ms = int((time.monotonic() - start) * 1000)
        return CompletionResponse(completions=completions,
                                  backend_id=self.backend_id, latency_ms=latency_ms)


class CassetteBackend:
    """Record/replay wrapper around another backend.

    A cassette is a JSON-lines file; each line stores the request key (a
    SHA-256 over prompt, sampling params, and tag), the request itself for
    inspection, and the response. In replay mode the inner backend is never
    called; a missing key raises CassetteMissError. Record mode appends
    under a single-writer lock.
    """

    def __init__(self, inner: Backend | None, path: str | Path, mode: str = "replay"):
        if mode not in ("record", "replay"):
            raise InvalidParamsError(f"cassette mode must be record or replay, got {mode!r}")
        if mode == "record" and inner is None:
            raise InvalidParamsError("record mode needs an inner backend")
        self._inner = inner
        self._path = Path(path)
        self.mode = mode
        self._lock = threading.Lock()
        self.backend_id = f"cassette:{mode}"
        self._store: dict[str, dict] = {}
        if mode == "replay":
            self._load()

    def _load(self):
        if not self._path.exists():
            raise CassetteMissError(f"cassette file not found: {self._path}")
        with self._path.open(encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._store[record["key"]] = record["response"]

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        key = _request_key(request)
        if self.mode == "replay":
            record = self._store.get(key)
            if record is None:
                raise CassetteMissError(f"no cassette entry for request key {key}")
            return CompletionResponse(
                completions=tuple(record["completions"]),
                backend_id=record["backend_id"],
                latency_ms=record["latency_ms"],
            )
        response = self._inner.complete(request)
        record = {
            "key": key,
            "request": {
                "prompt": request.prompt,
                "tag": request.tag,
                "n": request.params.n,
                "temperature": request.params.temperature,
                "top_p": request.params.top_p,
                "max_tokens": request.params.max_tokens,
            },
            "response": {
                "completions": list(response.completions),
                "backend_id": response.backend_id,
                "latency_ms": response.latency_ms,
            },
            "recorded_at": time.time(),
        }
        with self._lock:
            with self._path.open("a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
        return response


ALWAYS_FAIL_CODE = 'raise RuntimeError("scripted failure")\n'


def backend_from_spec(spec: str, *, suite=None) -> Backend:
    """Build a backend from a CLI identifier.

    Recognized forms: ``http``, ``scripted:allpass`` (echo each suite
    case's reference solution; needs a loaded suite), ``scripted:allfail``,
    ``scripted:<script.json>``, ``replay:<cassette>``, ``record:<cassette>``
    (records through the HTTP backend).
    """
    if spec == "http":
        return HttpBackend()
    if spec.startswith("scripted:"):
        arg = spec.split(":", 1)[1]
        if arg == "allpass":
            if suite is None:
                raise InvalidParamsError("scripted:allpass needs a test suite")
            script = {}
            for case in suite:
                if not getattr(case, "reference_solution", None):
                    raise InvalidParamsError(
                        f"case {case.id!r} has no reference solution for allpass")
                script[case.id] = case.reference_solution
            return ScriptedBackend(script)
        if arg == "allfail":
            return ScriptedBackend({}, default=ALWAYS_FAIL_CODE)
        path = Path(arg)
        if not path.exists():
            raise InvalidParamsError(f"scripted backend file not found: {path}")
        return ScriptedBackend(json.loads(path.read_text(encoding="utf-8")))
    if spec.startswith("replay:"):
        return CassetteBackend(None, spec.split(":", 1)[1], mode="replay")
    if spec.startswith("record:"):
        return CassetteBackend(HttpBackend(), spec.split(":", 1)[1], mode="record")
    raise InvalidParamsError(f"unknown backend spec {spec!r}")
