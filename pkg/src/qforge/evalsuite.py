"""Benchmark suite: test cases, pass@k, accuracy metrics, reports.

``pass_at_k`` is the unbiased estimator 1 - C(n-c, k)/C(n, k), computed as
a product of per-draw survival ratios in exact rational arithmetic (so no
factorial overflow for n up to 10,000 and no rounding drift) and converted
to float at the end.

``run_suite`` draws ``samples_n`` first-pass completions per case (no
repair passes), executes and checks each, and aggregates: syntactic
accuracy counts samples that ran cleanly, semantic accuracy counts samples
that also satisfied their checker, so semantic <= syntactic always.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

from .backend import Backend, CompletionRequest
from .errors import InvalidArgsError, InvalidParamsError, NoTasksError
from .orchestrator import (
    CheckerSpec,
    GenerationTask,
    PipelineConfig,
    classify_verdict,
    extract_code,
    run_checker,
)
from .rng import DEFAULT_SEED
from .sandbox import SubprocessExecutor

TARGET_CATEGORY_PERCENTS = {"basic": 47.0, "intermediate": 24.0, "advanced": 29.0}
CATEGORY_TOLERANCE_POINTS = 2.0
DEFAULT_K_VALUES = (1, 5, 10)


def pass_at_k(n: int, c: int, k: int) -> float:
    """Probability that at least one of k samples drawn without replacement
    from n candidates (c of them correct) is correct."""
    if n < 1 or not 0 <= c <= n or not 1 <= k <= n:
        raise InvalidArgsError(f"need 1 <= k <= n and 0 <= c <= n, got n={n} c={c} k={k}")
    if c == 0:
        return 0.0
    if n - c < k:
        return 1.0
    survive = Fraction(1)
    for i in range(k):
        survive *= Fraction(n - c - i, n - i)
    return float(1 - survive)


@dataclass(frozen=True)
class TestCase:
    __test__ = False  # not a pytest class, despite the name

    id: str
    prompt: str
    category: str
    checker: CheckerSpec
    reference_solution: str | None = None

    def __post_init__(self):
        # reuse GenerationTask validation for the shared fields
        GenerationTask(id=self.id, prompt=self.prompt, category=self.category,
                       checker=self.checker)
        if self.checker is None:
            raise InvalidParamsError("test cases require a checker")

    def as_task(self) -> GenerationTask:
        return GenerationTask(id=self.id, prompt=self.prompt,
                              category=self.category, checker=self.checker)


def load_suite(path: str | Path) -> list[TestCase]:
    cases = []
    with Path(path).open(encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                cases.append(TestCase(
                    id=record["id"],
                    prompt=record["prompt"],
                    category=record["category"],
                    checker=CheckerSpec(kind=record["checker"]["kind"],
                                        payload=record["checker"]["payload"]),
                    reference_solution=record.get("reference_solution"),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidParamsError(f"bad suite line {line_no}: {exc}") from exc
    return cases


def dump_suite(cases, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(json.dumps({
                "id": case.id,
                "prompt": case.prompt,
                "category": case.category,
                "checker": {"kind": case.checker.kind, "payload": case.checker.payload},
                "reference_solution": case.reference_solution,
            }, sort_keys=True) + "\n")


def default_suite() -> list[TestCase]:
    """The 17-case suite shipped with the package (8/4/5 by category)."""
    return load_suite(Path(__file__).parent / "data" / "default_suite.jsonl")


def validate_suite(cases) -> dict:
    """Category composition report with drift warnings.

    Fractions are percentages; a category off the shipped taxonomy target
    by more than 2 points gets a warning (it is advice, not an error)."""
    cases = list(cases)
    if not cases:
        raise NoTasksError("suite is empty")
    ids = [case.id for case in cases]
    if len(set(ids)) != len(ids):
        raise InvalidParamsError("suite case ids must be unique")
    counts = {name: 0 for name in TARGET_CATEGORY_PERCENTS}
    for case in cases:
        counts[case.category] += 1
    fractions = {name: 100.0 * count / len(cases) for name, count in counts.items()}
    warnings = []
    for name, target in TARGET_CATEGORY_PERCENTS.items():
        drift = abs(fractions[name] - target)
        if drift > CATEGORY_TOLERANCE_POINTS:
            warnings.append(
                f"category {name} is {fractions[name]:.1f}% of the suite, "
                f"{drift:.1f} points from the {target:.0f}% target")
    return {"count": len(cases), "counts": counts, "fractions": fractions,
            "warnings": warnings}


@dataclass(frozen=True)
class SuiteReport:
    category_counts: dict
    syntactic_accuracy: float
    semantic_accuracy: float
    pass_at_k: dict
    samples_n: int
    seed: int

    def __post_init__(self):
        for name, value in (("syntactic_accuracy", self.syntactic_accuracy),
                            ("semantic_accuracy", self.semantic_accuracy)):
            if not 0.0 <= value <= 1.0:
                raise InvalidParamsError(f"{name} must be in [0, 1]")
        if self.semantic_accuracy > self.syntactic_accuracy + 1e-12:
            raise InvalidParamsError(
                "semantic accuracy cannot exceed syntactic accuracy")

    def to_dict(self) -> dict:
        return {
            "category_counts": dict(self.category_counts),
            "syntactic_accuracy": self.syntactic_accuracy,
            "semantic_accuracy": self.semantic_accuracy,
            "pass_at_k": {str(k): v for k, v in sorted(self.pass_at_k.items())},
            "samples_n": self.samples_n,
            "seed": self.seed,
        }


def run_suite(cases, config: PipelineConfig, backend: Backend, executor=None,
              seed: int = DEFAULT_SEED, k_values=None) -> SuiteReport:
    """Evaluate a suite with first-pass sampling only.

    Per case, one backend call asks for ``config.samples_n`` completions;
    each is executed and checked independently. pass@k averages the
    per-case unbiased estimator over the suite for every k <= samples_n
    (default ks: 1, 5, 10 when samples_n >= 10, else just 1).
    Infrastructure errors propagate; run_batch is the isolation layer.
    """
    cases = list(cases)
    if not cases:
        raise NoTasksError("suite is empty")
    if executor is None:
        executor = SubprocessExecutor(config.executor)
    n = config.samples_n
    if k_values is None:
        k_values = DEFAULT_K_VALUES if n >= 10 else (1,)
    ks = sorted({k for k in k_values if 1 <= k <= n})
    if not ks:
        raise InvalidParamsError(f"no valid k values for samples_n={n}")

    category_counts = {name: 0 for name in TARGET_CATEGORY_PERCENTS}
    total_samples = 0
    clean_samples = 0
    passing_samples = 0
    per_case_correct: list[int] = []
    params = replace(config.sampling, n=n)

    for case in cases:
        category_counts[case.category] += 1
        response = backend.complete(
            CompletionRequest(prompt=case.prompt, params=params, tag=case.id))
        correct = 0
        for completion in response.completions:
            code = extract_code(completion)
            execution = executor.run(code)
            checker_passed = None
            if execution.status == "ok":
                checker_passed, _ = run_checker(case.checker, execution, executor)
            verdict = classify_verdict(
                execution, case.checker,
                checker_passed if execution.status == "ok" else None)
            total_samples += 1
            if verdict != "syntactic_fail":
                clean_samples += 1
            if verdict == "pass":
                passing_samples += 1
                correct += 1
        per_case_correct.append(correct)

    pass_rates = {
        k: sum(pass_at_k(n, c, k) for c in per_case_correct) / len(cases)
        for k in ks
    }
    return SuiteReport(
        category_counts=category_counts,
        syntactic_accuracy=clean_samples / total_samples,
        semantic_accuracy=passing_samples / total_samples,
        pass_at_k=pass_rates,
        samples_n=n,
        seed=seed,
    )


def write_suite_report(report: SuiteReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8")


def load_suite_report(path: str | Path) -> SuiteReport:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    return SuiteReport(
        category_counts=record["category_counts"],
        syntactic_accuracy=record["syntactic_accuracy"],
        semantic_accuracy=record["semantic_accuracy"],
        pass_at_k={int(k): v for k, v in record["pass_at_k"].items()},
        samples_n=record["samples_n"],
        seed=record["seed"],
    )


def render_table(report: SuiteReport) -> str:
    """Plain-text summary table."""
    lines = [
        "metric                value",
        "--------------------  -----",
        f"syntactic accuracy    {report.syntactic_accuracy:.3f}",
        f"semantic accuracy     {report.semantic_accuracy:.3f}",
    ]
    for k, rate in sorted(report.pass_at_k.items()):
        lines.append(f"pass@{k:<16} {rate:.3f}")
    lines.append(f"samples per case      {report.samples_n}")
    lines.append(f"seed                  {report.seed}")
    lines.append("")
    lines.append("category counts: " + ", ".join(
        f"{name}={count}" for name, count in sorted(report.category_counts.items())))
    return "\n".join(lines) + "\n"


def render_svg(report: SuiteReport, title: str = "suite results") -> str:
    """Minimal deterministic SVG bar chart of the headline metrics."""
    bars = [("syntactic", report.syntactic_accuracy),
            ("semantic", report.semantic_accuracy)]
    for k, rate in sorted(report.pass_at_k.items()):
        bars.append((f"pass@{k}", rate))
    width, bar_width, gap, height = 80 * len(bars) + 40, 48, 32, 220
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="10" y="18" font-family="monospace" font-size="13">{title}</text>',
    ]
    for i, (label, value) in enumerate(bars):
        x = 20 + i * (bar_width + gap)
        bar_height = int(round(140 * value))
        y = 170 - bar_height
        parts.append(
            f'<rect x="{x}" y="{y}" width="{bar_width}" height="{bar_height}" '
            f'fill="#4477aa"/>')
        parts.append(
            f'<text x="{x}" y="{188}" font-family="monospace" font-size="11">'
            f'{label}</text>')
        parts.append(
            f'<text x="{x}" y="{y - 4}" font-family="monospace" font-size="11">'
            f'{value:.2f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
