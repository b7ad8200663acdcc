"""Run one candidate program file under a timeout and report the outcome.

The report is a single JSON object on stdout, nothing else:

    {"status": "ok|error|timeout|infra_fail", "exit_code": int|null,
     "stdout_b64": ..., "stderr_b64": ..., "duration_ms": int}

The candidate runs in a child process of the runner (two-layer spawn), so
the runner can still report when the candidate crashes the interpreter.
Its stdout and stderr are captured over pipes and base64-encoded; they can
never interleave with the envelope. On timeout the candidate's whole
process group is killed and status is "timeout" with a null exit code.
Usage problems (missing file, bad flags) are reported as an "infra_fail"
envelope rather than a raw traceback; the runner exits 0 whenever it
managed to emit an envelope.

Invoked as ``qforge-runner <file> --timeout <seconds>``. The optional
``--checker <script>`` runs the given script after a successful candidate,
with the candidate's stdout in ``QFORGE_CANDIDATE_STDOUT``; a nonzero
checker exit turns the envelope into "error" with that exit code.

This file is deliberately self-contained (stdlib only, no package
imports) so it also works invoked by path: ``python runner.py <file> ...``.
"""

import argparse
import base64
import contextlib
import json
import os
import signal
import subprocess
import sys
import time

CANDIDATE_STDOUT_ENV = "QFORGE_CANDIDATE_STDOUT"


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def envelope(status, exit_code, stdout=b"", stderr=b"", duration_ms=0):
    return {
        "status": status,
        "exit_code": exit_code,
        "stdout_b64": _b64(stdout),
        "stderr_b64": _b64(stderr),
        "duration_ms": int(duration_ms),
    }


def _infra(message: str, duration_ms: int = 0) -> dict:
    return envelope("infra_fail", None, stderr=message.encode("utf-8"),
                    duration_ms=duration_ms)


def _kill_tree(proc: subprocess.Popen) -> None:
    with contextlib.suppress(ProcessLookupError, PermissionError):
        os.killpg(os.getpgid(proc.pid), signal.SIGKILL)


def _run(argv, timeout_s: float, env=None):
    """Run one child in its own process group; returns (code, out, err,
    timed_out). code is None when the child had to be killed."""
    proc = subprocess.Popen(argv, stdout=subprocess.PIPE,
                            stderr=subprocess.PIPE, env=env,
                            start_new_session=True)
    try:
        out, err = proc.communicate(timeout=timeout_s)
    except subprocess.TimeoutExpired:
        _kill_tree(proc)
        out, err = proc.communicate()
        return None, out, err, True
    return proc.returncode, out, err, False


def run_candidate(file: str, timeout_s: float, checker: str | None = None) -> dict:
    if timeout_s <= 0:
        return _infra(f"timeout must be positive, got {timeout_s}")
    if not os.path.isfile(file) or not os.access(file, os.R_OK):
        return _infra(f"candidate file not readable: {file}")
    if checker is not None and not os.path.isfile(checker):
        return _infra(f"checker script not found: {checker}")

    started = time.monotonic()
    code, out, err, timed_out = _run([sys.executable, file], timeout_s)
    duration = int((time.monotonic() - started) * 1000)
    if timed_out:
        return envelope("timeout", None, out, err, duration)

    if checker is not None and code == 0:
        env = dict(os.environ)
        env[CANDIDATE_STDOUT_ENV] = out.decode("utf-8", errors="replace")
        check_code, _, check_err, timed_out = _run(
            [sys.executable, checker], timeout_s, env=env)
        duration = int((time.monotonic() - started) * 1000)
        if timed_out:
            return envelope("timeout", None, out, err + check_err, duration)
        code, err = check_code, err + check_err

    status = "ok" if code == 0 else "error"
    return envelope(status, code, out, err, duration)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qforge-runner",
        description="execute a candidate program and emit a JSON envelope")
    parser.add_argument("file", help="candidate program to run")
    parser.add_argument("--timeout", type=float, default=30.0,
                        help="seconds before the candidate is killed")
    parser.add_argument("--checker", default=None,
                        help="script run after a successful candidate")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):  # --help
            return 0
        print(json.dumps(_infra("unrecognized arguments; "
                                "usage: qforge-runner <file> --timeout <s>")))
        return 0
    try:
        report = run_candidate(args.file, args.timeout, args.checker)
    except Exception as exc:  # noqa: BLE001 - the runner must always report
        report = _infra(f"runner failure: {exc!r}")
    print(json.dumps(report))
    return 0


if __name__ == "__main__":
    sys.exit(main())
