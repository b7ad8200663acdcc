"""Sandboxed execution of generated programs.

The real execution path is an external runner process: the executor writes
the candidate to a file in a fresh temporary directory, invokes the
configured command with ``{file}`` (and optionally ``{timeout_s}``)
substituted, and reads a single JSON envelope from the runner's stdout:

    {"status": "ok|error|timeout|infra_fail", "exit_code": int|null,
     "stdout_b64": ..., "stderr_b64": ..., "duration_ms": int}

A runner that emits anything else is an infrastructure failure, never a
verdict about the candidate. On a wall-clock overrun the whole process
tree is killed (the runner starts in its own session/process group).

``InlineExecutor`` runs code in-process with captured stdio. It offers no
isolation and no timeout; it exists for deterministic tests and scripted
CLI runs, where byte-identical reports matter (its duration_ms is always
0). The subprocess path is the contract; the inline path is a test double.
"""

from __future__ import annotations

import base64
import contextlib
import io
import json
import os
import re
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
import traceback
from dataclasses import dataclass

from .errors import InvalidParamsError

EXECUTION_STATUSES = ("ok", "error", "timeout", "infra_fail")
CAPTURE_CAP_BYTES = 1 << 20  # 1 MiB per stream
TRUNCATION_MARKER = "\n...[truncated]"
STDERR_TAIL_CHARS = 2000
CANDIDATE_STDOUT_ENV = "QFORGE_CANDIDATE_STDOUT"

ENVELOPE_FIELDS = ("status", "exit_code", "stdout_b64", "stderr_b64", "duration_ms")


@dataclass(frozen=True)
class ParsedError:
    """The final exception of a Python traceback."""

    error_type: str
    message: str
    last_frame: tuple[str, int] | None = None

    def __post_init__(self):
        if not self.error_type:
            raise InvalidParamsError("error_type must be nonempty")


@dataclass(frozen=True)
class ExecutionResult:
    status: str
    exit_code: int | None
    stdout: str
    stderr: str
    duration_ms: int
    parsed_error: ParsedError | None = None

    def __post_init__(self):
        if self.status not in EXECUTION_STATUSES:
            raise InvalidParamsError(f"unknown status {self.status!r}")
        if self.status == "ok" and self.exit_code != 0:
            raise InvalidParamsError("status ok requires exit_code 0")
        if self.status != "ok" and self.exit_code == 0:
            raise InvalidParamsError("exit_code 0 requires status ok")
        if self.status == "timeout" and self.exit_code is not None:
            raise InvalidParamsError("timeout carries no exit code")

    def error_text(self) -> str:
        """Error description for the repair prompt: the parsed trace when
        available, else the raw stderr tail."""
        if self.parsed_error is not None:
            if self.parsed_error.message:
                return f"{self.parsed_error.error_type}: {self.parsed_error.message}"
            return self.parsed_error.error_type
        return self.stderr[-STDERR_TAIL_CHARS:]


_FRAME_RE = re.compile(r'^ {2}File "(?P<path>.+)", line (?P<line>\d+)')
_EXC_RE = re.compile(r"^(?P<type>[A-Za-z_][A-Za-z0-9_.]*)(?::\s?(?P<msg>.*))?$")


def parse_error_trace(stderr: str) -> ParsedError | None:
    """Extract the final exception from an interpreter traceback.

    For chained tracebacks only the last block counts. Returns None for
    anything that does not look like a standard traceback.
    """
    lines = stderr.split("\n")
    starts = [i for i, line in enumerate(lines)
              if line.startswith("Traceback (most recent call last):")]
    if starts:
        block = lines[starts[-1] + 1:]
        headerless = False
    else:
        # syntax errors from `python file.py` print frames with no header
        frames = [i for i, line in enumerate(lines) if _FRAME_RE.match(line)]
        if not frames:
            return None
        block = lines[frames[0]:]
        headerless = True

    last_frame: tuple[str, int] | None = None
    exc_line: str | None = None
    for line in block:
        frame = _FRAME_RE.match(line)
        if frame:
            last_frame = (frame.group("path"), int(frame.group("line")))
            continue
        if line.startswith(" ") or not line.strip():
            continue
        match = _EXC_RE.match(line)
        if match:
            exc_line = line
    if exc_line is None or (headerless and last_frame is None):
        return None
    match = _EXC_RE.match(exc_line)
    return ParsedError(error_type=match.group("type"),
                       message=match.group("msg") or "",
                       last_frame=last_frame)


def _cap(text: str) -> str:
    if len(text.encode("utf-8", errors="replace")) <= CAPTURE_CAP_BYTES:
        return text
    encoded = text.encode("utf-8", errors="replace")[:CAPTURE_CAP_BYTES]
    return encoded.decode("utf-8", errors="replace") + TRUNCATION_MARKER


@dataclass(frozen=True)
class ExecutorConfig:
    """How to launch the runner.

    ``command`` must reference ``{file}`` exactly once; ``{timeout_s}`` is
    substituted when present. ``env_allowlist`` names the only variables
    copied from the parent environment. The executor grants the runner
    ``timeout_s + grace_s`` of wall clock before killing the tree (the
    runner enforces ``timeout_s`` on the candidate itself).
    """

    command: tuple[str, ...] = ("qforge-runner", "{file}", "--timeout", "{timeout_s}")
    timeout_s: float = 30.0
    env_allowlist: tuple[str, ...] = ("PATH", "HOME", "LANG", "LC_ALL", "PYTHONPATH")
    max_concurrency: int | None = None
    grace_s: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "command", tuple(self.command))
        if self.timeout_s <= 0:
            raise InvalidParamsError("timeout_s must be positive")
        file_slots = sum(arg.count("{file}") for arg in self.command)
        if file_slots != 1:
            raise InvalidParamsError(
                f"command must contain {{file}} exactly once, found {file_slots}")


class SubprocessExecutor:
    """Runs candidates through the external runner protocol."""

    def __init__(self, config: ExecutorConfig | None = None):
        self.config = config or ExecutorConfig()
        limit = self.config.max_concurrency or os.cpu_count() or 1
        self._semaphore = threading.Semaphore(limit)

    def run(self, code: str, env: dict[str, str] | None = None) -> ExecutionResult:
        with self._semaphore:
            return self._run_once(code, env or {})

    def _run_once(self, code: str, extra_env: dict[str, str]) -> ExecutionResult:
        config = self.config
        workdir = tempfile.mkdtemp(prefix="qforge-sandbox-")
        started = time.monotonic()
        try:
            candidate = os.path.join(workdir, "candidate.py")
            with open(candidate, "w", encoding="utf-8") as fh:
                fh.write(code)
            argv = [
                arg.replace("{file}", candidate)
                   .replace("{timeout_s}", str(config.timeout_s))
                for arg in config.command
            ]
            env = {name: os.environ[name] for name in config.env_allowlist
                   if name in os.environ}
            env.update(extra_env)
            try:
                proc = subprocess.Popen(
                    argv, cwd=workdir, env=env,
                    stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                    start_new_session=True,
                )
            except OSError as exc:
                return self._infra(f"could not spawn runner: {exc}", started)
            try:
                out, err = proc.communicate(timeout=config.timeout_s + config.grace_s)
            except subprocess.TimeoutExpired:
                self._kill_tree(proc)
                out, err = proc.communicate()
                duration = int((time.monotonic() - started) * 1000)
                return ExecutionResult(
                    status="timeout", exit_code=None,
                    stdout="", stderr=_cap(err.decode("utf-8", errors="replace")),
                    duration_ms=duration)
            return self._from_envelope(out, err, started)
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    @staticmethod
    def _kill_tree(proc: subprocess.Popen) -> None:
        with contextlib.suppress(ProcessLookupError, PermissionError):
            os.killpg(os.getpgid(proc.pid), signal.SIGKILL)

    def _infra(self, message: str, started: float) -> ExecutionResult:
        duration = int((time.monotonic() - started) * 1000)
        return ExecutionResult(status="infra_fail", exit_code=None, stdout="",
                               stderr=message, duration_ms=duration)

    def _from_envelope(self, out: bytes, err: bytes, started: float) -> ExecutionResult:
        raw = out.decode("utf-8", errors="replace").strip()
        try:
            envelope = json.loads(raw)
            if not isinstance(envelope, dict):
                raise ValueError("envelope is not an object")
            missing = [k for k in ENVELOPE_FIELDS if k not in envelope]
            if missing:
                raise ValueError(f"envelope missing fields {missing}")
            status = envelope["status"]
            exit_code = envelope["exit_code"]
            stdout = base64.b64decode(envelope["stdout_b64"]).decode(
                "utf-8", errors="replace")
            stderr = base64.b64decode(envelope["stderr_b64"]).decode(
                "utf-8", errors="replace")
            duration_ms = int(envelope["duration_ms"])
            result = ExecutionResult(
                status=status, exit_code=exit_code,
                stdout=_cap(stdout), stderr=_cap(stderr),
                duration_ms=duration_ms,
                parsed_error=parse_error_trace(stderr) if status == "error" else None,
            )
        except (ValueError, KeyError, TypeError, InvalidParamsError) as exc:
            runner_err = err.decode("utf-8", errors="replace")[-500:]
            return self._infra(
                f"malformed runner envelope ({exc}); runner stderr: {runner_err!r}",
                started)
        return result


_INLINE_LOCK = threading.Lock()


class InlineExecutor:
    """In-process execution with captured stdio; deterministic (duration 0).

    No isolation, no timeout, a global lock around the environment
    overlay - this is a test double, not a sandbox.
    """

    def __init__(self, env: dict[str, str] | None = None):
        self.env = dict(env or {})

    def run(self, code: str, env: dict[str, str] | None = None) -> ExecutionResult:
        overlay = {**self.env, **(env or {})}
        stdout_buf, stderr_buf = io.StringIO(), io.StringIO()
        status, exit_code = "ok", 0
        with _INLINE_LOCK:
            saved = {key: os.environ.get(key) for key in overlay}
            os.environ.update(overlay)
            try:
                with contextlib.redirect_stdout(stdout_buf), \
                        contextlib.redirect_stderr(stderr_buf):
                    try:
                        exec(compile(code, "candidate.py", "exec"),
                             {"__name__": "__main__"})
                    except SystemExit as exc:
                        raised = exc.code if isinstance(exc.code, int) else (
                            0 if exc.code is None else 1)
                        if raised != 0:
                            status, exit_code = "error", raised
                    except BaseException:
                        stderr_buf.write(traceback.format_exc())
                        status, exit_code = "error", 1
            finally:
                for key, value in saved.items():
                    if value is None:
                        os.environ.pop(key, None)
                    else:
                        os.environ[key] = value
        stderr = _cap(stderr_buf.getvalue())
        return ExecutionResult(
            status=status, exit_code=exit_code,
            stdout=_cap(stdout_buf.getvalue()), stderr=stderr, duration_ms=0,
            parsed_error=parse_error_trace(stderr) if status == "error" else None,
        )


def execute(code: str, config: ExecutorConfig | None = None) -> ExecutionResult:
    """One-shot convenience wrapper around SubprocessExecutor."""
    return SubprocessExecutor(config).run(code)


def stub_runner_config(runner_path: str, timeout_s: float = 30.0,
                       **kwargs) -> ExecutorConfig:
    """ExecutorConfig that drives a Python runner script directly (used by
    tests that must not depend on an installed runner)."""
    return ExecutorConfig(
        command=(sys.executable, runner_path, "{file}", "--timeout", "{timeout_s}"),
        timeout_s=timeout_s, **kwargs)
