"""Generate / execute / analyze / repair pipeline.

``run_task`` drives one task through up to ``max_passes`` attempts. Pass 1
builds the prompt for the configured strategy (plain, cot, scot, rag);
every later pass builds a repair prompt carrying the original task, the
previous code, and the previous error verbatim. Execution failures
(nonzero exit, timeout) are syntactic fails; a clean run that misses its
checker is a semantic fail; the loop stops early on a pass verdict.

``run_batch`` fans tasks out over a thread pool and never lets one task's
failure abort the rest: infrastructure errors become per-task failure
records in the output.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .backend import Backend, CompletionRequest, SamplingParams
from .errors import (
    BackendUnreachableError,
    ExecutorFailureError,
    IndexMissingError,
    InvalidParamsError,
    NoTasksError,
    QForgeError,
    TransportError,
)
from .prompting import build_cot_prompt, build_repair_prompt, seed_exemplars
from .rag import DEFAULT_RETRIEVAL_K, VectorIndex, augment_prompt, retrieve
from .sandbox import CANDIDATE_STDOUT_ENV, ExecutionResult, ExecutorConfig, \
    SubprocessExecutor

STRATEGIES = ("plain", "cot", "scot", "rag")
VERDICTS = ("syntactic_fail", "semantic_fail", "pass")
CHECKER_KINDS = ("exact_stdout", "contains_stdout", "assertion_script")
TASK_CATEGORIES = ("basic", "intermediate", "advanced")
DEFAULT_MAX_PASSES = 3


@dataclass(frozen=True)
class CheckerSpec:
    """Semantic check on a clean execution.

    * ``exact_stdout``: stdout equals the payload (trailing newlines are
      stripped on both sides, since print appends one);
    * ``contains_stdout``: the payload is a substring of stdout;
    * ``assertion_script``: the payload is a Python script executed in the
      sandbox with the candidate's stdout in the QFORGE_CANDIDATE_STDOUT
      environment variable; exit 0 passes.
    """

    kind: str
    payload: str

    def __post_init__(self):
        if self.kind not in CHECKER_KINDS:
            raise InvalidParamsError(f"unknown checker kind {self.kind!r}")
        if not self.payload:
            raise InvalidParamsError("checker payload must be nonempty")


@dataclass(frozen=True)
class GenerationTask:
    id: str
    prompt: str
    category: str = "basic"
    checker: CheckerSpec | None = None

    def __post_init__(self):
        if not self.id:
            raise InvalidParamsError("task id must be nonempty")
        if not self.prompt:
            raise InvalidParamsError("task prompt must be nonempty")
        if self.category not in TASK_CATEGORIES:
            raise InvalidParamsError(f"unknown category {self.category!r}")


@dataclass(frozen=True)
class PipelineConfig:
    max_passes: int = DEFAULT_MAX_PASSES
    strategy: str = "plain"
    samples_n: int = 1
    sampling: SamplingParams = field(default_factory=SamplingParams)
    retrieval_k: int = 0
    executor: ExecutorConfig = field(default_factory=ExecutorConfig)

    def __post_init__(self):
        if self.max_passes < 1:
            raise InvalidParamsError("max_passes must be >= 1")
        if self.samples_n < 1:
            raise InvalidParamsError("samples_n must be >= 1")
        if self.strategy not in STRATEGIES:
            raise InvalidParamsError(f"unknown strategy {self.strategy!r}")
        if self.retrieval_k < 0:
            raise InvalidParamsError("retrieval_k must be >= 0")
        if self.retrieval_k and self.strategy != "rag":
            raise InvalidParamsError("retrieval_k is only meaningful for the rag strategy")


def default_rag_config(**overrides) -> PipelineConfig:
    overrides.setdefault("strategy", "rag")
    overrides.setdefault("retrieval_k", DEFAULT_RETRIEVAL_K)
    return PipelineConfig(**overrides)


@dataclass(frozen=True)
class Attempt:
    pass_index: int
    prompt_used: str
    code: str
    execution: ExecutionResult
    verdict: str

    def __post_init__(self):
        if self.pass_index < 1:
            raise InvalidParamsError("pass_index is 1-based")
        if self.verdict not in VERDICTS:
            raise InvalidParamsError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "syntactic_fail" and self.execution.status == "ok":
            raise InvalidParamsError("syntactic_fail on a clean execution")
        if self.verdict in ("semantic_fail", "pass") and self.execution.status != "ok":
            raise InvalidParamsError(f"{self.verdict} requires a clean execution")


@dataclass(frozen=True)
class TaskReport:
    task_id: str
    attempts: tuple[Attempt, ...]
    final_verdict: str
    passes_used: int

    def __post_init__(self):
        object.__setattr__(self, "attempts", tuple(self.attempts))
        if not self.attempts:
            raise InvalidParamsError("a report needs at least one attempt")
        if self.passes_used != len(self.attempts):
            raise InvalidParamsError("passes_used must equal the attempt count")
        if self.final_verdict != self.attempts[-1].verdict:
            raise InvalidParamsError("final_verdict must match the last attempt")
        for attempt in self.attempts[:-1]:
            if attempt.verdict == "pass":
                raise InvalidParamsError("pass must terminate the attempt list")
        for i, attempt in enumerate(self.attempts, start=1):
            if attempt.pass_index != i:
                raise InvalidParamsError("attempt pass indices must be 1..n in order")


def classify_verdict(execution: ExecutionResult, checker: CheckerSpec | None = None,
                     checker_passed: bool | None = None) -> str:
    """Total verdict function.

    Any non-ok status is a syntactic fail. A clean execution with a checker
    requires the checker outcome; without a checker it is a pass.
    """
    if execution.status != "ok":
        return "syntactic_fail"
    if checker is not None:
        if checker_passed is None:
            raise InvalidParamsError("checker present but no checker outcome given")
        return "pass" if checker_passed else "semantic_fail"
    if checker_passed is not None:
        raise InvalidParamsError("checker outcome given without a checker")
    return "pass"


def run_checker(checker: CheckerSpec, execution: ExecutionResult,
                executor) -> tuple[bool, str]:
    """Evaluate a checker against a clean execution; returns (passed,
    mismatch description for the repair prompt)."""
    if checker.kind == "exact_stdout":
        got = execution.stdout.rstrip("\n")
        want = checker.payload.rstrip("\n")
        if got == want:
            return True, ""
        return False, f"expected stdout {want!r}, got {got!r}"
    if checker.kind == "contains_stdout":
        if checker.payload in execution.stdout:
            return True, ""
        return False, f"stdout does not contain {checker.payload!r}"
    # assertion_script
    result = executor.run(checker.payload,
                          env={CANDIDATE_STDOUT_ENV: execution.stdout})
    if result.status == "infra_fail":
        raise ExecutorFailureError(f"checker script could not run: {result.stderr}")
    if result.status == "ok":
        return True, ""
    detail = result.error_text() or "checker script failed"
    return False, f"output check failed: {detail}"


_FENCE_BLOCK = re.compile(r"^(`{3,})[a-zA-Z]*\n(.*?)^\1\s*$", re.MULTILINE | re.DOTALL)


def extract_code(completion: str) -> str:
    """Pull the program out of a completion: the first fenced block when
    one exists, otherwise the completion itself."""
    match = _FENCE_BLOCK.search(completion)
    if match:
        return match.group(2).rstrip("\n")
    return completion.strip("\n")


def _first_pass_prompt(task: GenerationTask, config: PipelineConfig,
                       index: VectorIndex | None, exemplars) -> str:
    if config.strategy == "plain":
        return task.prompt
    if config.strategy in ("cot", "scot"):
        pool = exemplars if exemplars is not None else seed_exemplars(config.strategy)
        return build_cot_prompt(task.prompt, pool, style=config.strategy)
    # rag
    if index is None:
        raise IndexMissingError("rag strategy requires a vector index")
    if config.retrieval_k == 0:
        return task.prompt
    results = retrieve(index, task.prompt, k=config.retrieval_k)
    return augment_prompt(task.prompt, results)


def run_task(task: GenerationTask, config: PipelineConfig, backend: Backend,
             executor=None, index: VectorIndex | None = None,
             exemplars=None) -> TaskReport:
    """Run one task through the multi-pass repair loop (n=1 per pass)."""
    if executor is None:
        executor = SubprocessExecutor(config.executor)

    attempts: list[Attempt] = []
    prev_code: str | None = None
    prev_error: str | None = None
    for pass_index in range(1, config.max_passes + 1):
        if pass_index == 1:
            prompt = _first_pass_prompt(task, config, index, exemplars)
        else:
            prompt = build_repair_prompt(task.prompt, prev_code, prev_error)
        params = replace(config.sampling, n=1)
        try:
            response = backend.complete(
                CompletionRequest(prompt=prompt, params=params, tag=task.id))
        except TransportError as exc:
            raise BackendUnreachableError(str(exc)) from exc
        code = extract_code(response.completions[0])
        execution = executor.run(code)
        if execution.status == "infra_fail":
            raise ExecutorFailureError(
                f"sandbox failed for task {task.id!r}: {execution.stderr}")
        checker_passed = None
        mismatch = ""
        if execution.status == "ok" and task.checker is not None:
            checker_passed, mismatch = run_checker(task.checker, execution, executor)
        verdict = classify_verdict(execution, task.checker, checker_passed)
        attempts.append(Attempt(pass_index=pass_index, prompt_used=prompt,
                                code=code, execution=execution, verdict=verdict))
        if verdict == "pass":
            break
        prev_code = code
        prev_error = mismatch if verdict == "semantic_fail" else execution.error_text()
        if not prev_error:
            prev_error = f"exit code {execution.exit_code}, no diagnostics captured"
    return TaskReport(task_id=task.id, attempts=tuple(attempts),
                      final_verdict=attempts[-1].verdict, passes_used=len(attempts))


@dataclass(frozen=True)
class TaskFailure:
    """Per-task infrastructure failure record for batch runs."""

    task_id: str
    error_code: str
    error_message: str


def run_batch(tasks, config: PipelineConfig, backend: Backend, executor=None,
              index: VectorIndex | None = None, exemplars=None,
              max_workers: int | None = None) -> list[TaskReport | TaskFailure]:
    """Run tasks concurrently; output order matches input order."""
    tasks = list(tasks)
    if not tasks:
        raise NoTasksError("run_batch needs at least one task")
    ids = [task.id for task in tasks]
    if len(set(ids)) != len(ids):
        raise InvalidParamsError("task ids must be unique within a batch")
    if executor is None:
        executor = SubprocessExecutor(config.executor)

    def one(task: GenerationTask):
        try:
            return run_task(task, config, backend, executor=executor,
                            index=index, exemplars=exemplars)
        except QForgeError as exc:
            return TaskFailure(task_id=task.id, error_code=exc.code,
                               error_message=str(exc))

    workers = max_workers or min(8, len(tasks))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, tasks))


# --- report serialization ----------------------------------------------------

def execution_to_dict(execution: ExecutionResult) -> dict:
    payload = {
        "status": execution.status,
        "exit_code": execution.exit_code,
        "stdout": execution.stdout,
        "stderr": execution.stderr,
        "duration_ms": execution.duration_ms,
        "parsed_error": None,
    }
    if execution.parsed_error is not None:
        payload["parsed_error"] = {
            "error_type": execution.parsed_error.error_type,
            "message": execution.parsed_error.message,
            "last_frame": list(execution.parsed_error.last_frame)
            if execution.parsed_error.last_frame else None,
        }
    return payload


def report_to_dict(report: TaskReport | TaskFailure) -> dict:
    if isinstance(report, TaskFailure):
        return {
            "task_id": report.task_id,
            "error": {"code": report.error_code, "message": report.error_message},
        }
    return {
        "task_id": report.task_id,
        "attempts": [
            {
                "pass_index": attempt.pass_index,
                "prompt_used": attempt.prompt_used,
                "code": attempt.code,
                "execution": execution_to_dict(attempt.execution),
                "verdict": attempt.verdict,
            }
            for attempt in report.attempts
        ],
        "final_verdict": report.final_verdict,
        "passes_used": report.passes_used,
    }


def write_reports(reports, path: str | Path) -> None:
    """Write a batch (or a single report) as a JSON array of TaskReport
    objects; failed tasks appear as failure records."""
    if isinstance(reports, (TaskReport, TaskFailure)):
        reports = [reports]
    payload = [report_to_dict(report) for report in reports]
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
