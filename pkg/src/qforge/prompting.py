"""Prompt construction: plain, chain-of-thought, structured CoT, repair.

Exemplar grammar (one worked example):

    Q: <single-line question>
    Step 1: <text>
    Step 2 [loop]: <text>        <- structure tag, scot style only
    Answer:
    ```python
    <code>
    ```

Structured CoT tags every step with one of {sequence, branch, loop}; plain
CoT steps carry no tag. ``format_exemplar`` and ``parse_exemplar`` are
exact inverses on well-formed exemplars.

The repair prompt embeds the original task, the previous code, and the
previous error verbatim, in that order, between sentinel delimiters. When a
payload happens to contain a delimiter string, the delimiters (never the
payload) are renamed until collision-free, so each delimiter appears
exactly once and each payload stays byte-identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .backend import Backend, CompletionRequest, SamplingParams
from .errors import (
    EmptyInputError,
    InvalidParamsError,
    NoExemplarsError,
    ParseFailureError,
    StyleMismatchError,
)

STRUCTURE_KINDS = ("sequence", "branch", "loop")
STYLES = ("cot", "scot")


@dataclass(frozen=True)
class PromptTemplate:
    """A named template with ``{placeholder}`` slots.

    Rendering requires every placeholder to be bound; unknown or unbound
    markers are an error rather than silently passing through.
    """

    name: str
    body: str

    _SLOT = re.compile(r"\{([a-z_]+)\}")

    def placeholders(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(self._SLOT.findall(self.body)))

    def render(self, **values: str) -> str:
        needed = set(self.placeholders())
        missing = needed - values.keys()
        if missing:
            raise InvalidParamsError(f"unbound placeholders: {sorted(missing)}")
        out = self.body
        for key in needed:
            out = out.replace("{" + key + "}", values[key])
        return out


@dataclass(frozen=True)
class CotStep:
    text: str
    kind: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidParamsError("step text must be nonempty")
        if self.kind is not None and self.kind not in STRUCTURE_KINDS:
            raise InvalidParamsError(f"unknown structure kind {self.kind!r}")


@dataclass(frozen=True)
class CotExemplar:
    question: str
    steps: tuple[CotStep, ...]
    answer_code: str
    style: str = "cot"

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        # trailing newlines belong to the fence, not the code: canonicalizing
        # here makes format/parse exact inverses on the dataclass
        object.__setattr__(self, "answer_code", self.answer_code.rstrip("\n"))
        if not self.question.strip() or "\n" in self.question:
            raise InvalidParamsError("question must be a nonempty single line")
        if not self.steps:
            raise InvalidParamsError("exemplar needs at least one step")
        if not self.answer_code.strip():
            raise InvalidParamsError("answer code must be nonempty")
        if self.style not in STYLES:
            raise InvalidParamsError(f"unknown style {self.style!r}")
        tagged = [s.kind is not None for s in self.steps]
        if self.style == "scot" and not all(tagged):
            raise StyleMismatchError("scot exemplars must tag every step")
        if self.style == "cot" and any(tagged):
            raise StyleMismatchError("cot exemplars must not tag steps")


def _fence_for(code: str) -> str:
    fence = "```"
    while fence in code:
        fence += "`"
    return fence


def format_exemplar(exemplar: CotExemplar) -> str:
    lines = [f"Q: {exemplar.question}"]
    for i, step in enumerate(exemplar.steps, start=1):
        tag = f" [{step.kind}]" if step.kind else ""
        lines.append(f"Step {i}{tag}: {step.text}")
    fence = _fence_for(exemplar.answer_code)
    lines.append("Answer:")
    lines.append(fence + "python")
    lines.append(exemplar.answer_code.rstrip("\n"))
    lines.append(fence)
    return "\n".join(lines) + "\n"


_STEP_RE = re.compile(r"^Step (\d+)(?: \[([a-z]+)\])?: (.*)$")
_FENCE_RE = re.compile(r"^(`{3,})python$")


def parse_exemplar(text: str, style: str | None = None) -> CotExemplar:
    """Parse one exemplar block; strict, no silent repair."""
    lines = text.strip("\n").split("\n")
    pos = 0
    if pos >= len(lines) or not lines[pos].startswith("Q: "):
        raise ParseFailureError("exemplar must start with a 'Q: ' line")
    question = lines[pos][3:]
    pos += 1

    steps: list[CotStep] = []
    while pos < len(lines) and lines[pos].startswith("Step "):
        match = _STEP_RE.match(lines[pos])
        if not match:
            raise ParseFailureError(f"malformed step line: {lines[pos]!r}")
        number, kind, body = match.groups()
        if int(number) != len(steps) + 1:
            raise ParseFailureError(
                f"steps must be numbered consecutively; expected {len(steps) + 1}, "
                f"got {number}")
        if kind is not None and kind not in STRUCTURE_KINDS:
            raise ParseFailureError(f"unknown structure tag [{kind}]")
        steps.append(CotStep(text=body, kind=kind))
        pos += 1
    if not steps:
        raise ParseFailureError("exemplar has no reasoning steps")

    if pos >= len(lines) or lines[pos] != "Answer:":
        raise ParseFailureError("expected 'Answer:' after the step list")
    pos += 1
    if pos >= len(lines):
        raise ParseFailureError("missing code fence after 'Answer:'")
    fence_match = _FENCE_RE.match(lines[pos])
    if not fence_match:
        raise ParseFailureError(f"expected a ```python fence, got {lines[pos]!r}")
    fence = fence_match.group(1)
    pos += 1
    code_lines = []
    while pos < len(lines) and lines[pos] != fence:
        code_lines.append(lines[pos])
        pos += 1
    if pos >= len(lines):
        raise ParseFailureError("unterminated code fence")
    pos += 1
    if any(line.strip() for line in lines[pos:]):
        raise ParseFailureError("trailing content after the code fence")

    tagged = [s.kind is not None for s in steps]
    inferred = "scot" if all(tagged) else "cot"
    if any(tagged) and not all(tagged):
        raise ParseFailureError("mixed tagged and untagged steps")
    if style is not None and style != inferred:
        raise StyleMismatchError(f"expected a {style} exemplar, parsed {inferred}")
    return CotExemplar(question=question, steps=tuple(steps),
                       answer_code="\n".join(code_lines), style=inferred)


# --- exemplar store ----------------------------------------------------------

def save_exemplar(directory: str | Path, name: str, exemplar: CotExemplar) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{name}.txt"
    path.write_text(format_exemplar(exemplar), encoding="utf-8")
    return path


def load_exemplars(directory: str | Path, style: str | None = None) -> list[CotExemplar]:
    """Load every ``*.txt`` exemplar in a directory, sorted by filename."""
    directory = Path(directory)
    exemplars = []
    for path in sorted(directory.glob("*.txt")):
        exemplars.append(parse_exemplar(path.read_text(encoding="utf-8"), style=style))
    return exemplars


def seed_exemplars(style: str = "cot") -> list[CotExemplar]:
    """The five worked examples shipped with the package."""
    if style not in STYLES:
        raise InvalidParamsError(f"unknown style {style!r}")
    root = Path(__file__).parent / "data" / "exemplars" / style
    return load_exemplars(root, style=style)


# --- prompt assembly ---------------------------------------------------------

_COT_INSTRUCTION = (
    "Think step by step: write numbered 'Step k:' lines explaining your plan, "
    "then 'Answer:' followed by the complete program in a ```python fence."
)
_SCOT_INSTRUCTION = (
    "Think step by step in program structures: write numbered 'Step k [tag]:' "
    "lines where tag is one of [sequence], [branch], [loop], then 'Answer:' "
    "followed by the complete program in a ```python fence."
)


def build_cot_prompt(task_prompt: str, exemplars: Sequence[CotExemplar],
                     style: str = "cot") -> str:
    if style not in STYLES:
        raise InvalidParamsError(f"unknown style {style!r}")
    if not task_prompt:
        raise EmptyInputError("task prompt must be nonempty")
    if not exemplars:
        raise NoExemplarsError("at least one exemplar is required")
    for ex in exemplars:
        if ex.style != style:
            raise StyleMismatchError(
                f"exemplar {ex.question[:40]!r} is {ex.style}, prompt wants {style}")
    blocks = [format_exemplar(ex) for ex in exemplars]
    instruction = _SCOT_INSTRUCTION if style == "scot" else _COT_INSTRUCTION
    return "\n".join(blocks) + f"\nQ: {task_prompt}\n{instruction}\n"


def generate_cot_exemplar(task_prompt: str, seeds: Sequence[CotExemplar],
                          backend: Backend, style: str = "cot",
                          params: SamplingParams | None = None,
                          tag: str | None = None) -> CotExemplar:
    """Ask the backend to produce a new worked example in the seed format.

    The completion must parse under the exemplar grammar; a malformed
    completion raises ParseFailureError, it is never silently repaired.
    """
    if not seeds:
        raise NoExemplarsError("seed exemplars are required")
    prompt = build_cot_prompt(task_prompt, seeds, style=style)
    prompt += (
        "Write the complete worked example for this question in exactly the "
        "same format, starting with its 'Q: ' line.\n"
    )
    if params is None:
        params = SamplingParams(n=1)
    elif params.n != 1:
        raise InvalidParamsError("exemplar generation uses n=1")
    response = backend.complete(CompletionRequest(prompt=prompt, params=params, tag=tag))
    return parse_exemplar(response.completions[0], style=style)


_REPAIR_TEMPLATE = PromptTemplate(
    name="repair",
    body=(
        "You previously attempted this task.\n"
        "\n"
        "Task:\n"
        "{open_task}\n"
        "{task}\n"
        "{close_task}\n"
        "\n"
        "Your code:\n"
        "{open_code}\n"
        "{code}\n"
        "{close_code}\n"
        "\n"
        "Running it failed with this error:\n"
        "{open_error}\n"
        "{error}\n"
        "{close_error}\n"
        "\n"
        "Fix the error and write the complete corrected program.\n"
    ),
)


def _pick_delimiters(payloads: Sequence[str]) -> dict[str, str]:
    suffix = 0
    while True:
        mark = "" if suffix == 0 else f"#{suffix}"
        delims = {}
        for section in ("TASK", "CODE", "ERROR"):
            delims[f"open_{section.lower()}"] = f"<<<{section}{mark}>>>"
            delims[f"close_{section.lower()}"] = f"<<<END {section}{mark}>>>"
        if not any(d in payload for payload in payloads for d in delims.values()):
            return delims
        suffix += 1


def build_repair_prompt(task_prompt: str, code: str, error: str) -> str:
    """Compose the repair prompt: task, previous code, and the parsed error
    trace, each verbatim and in that order."""
    if not task_prompt or not code or not error:
        raise EmptyInputError("task prompt, code, and error must all be nonempty")
    delims = _pick_delimiters([task_prompt, code, error])
    return _REPAIR_TEMPLATE.render(task=task_prompt, code=code, error=error, **delims)
