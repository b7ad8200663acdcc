"""Exception hierarchy shared across the pipeline and the QEC toolkit.

Every error carries a stable machine-readable ``code`` used by the CLI to
map failures onto exit codes and by batch runs to build per-task failure
records.
"""

from __future__ import annotations


class QForgeError(Exception):
    """Base class for all package errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class UsageError(QForgeError):
    """Bad command-line arguments or malformed user input files."""

    code = "usage"


# --- backend ---------------------------------------------------------------

class TransportError(QForgeError):
    code = "transport_error"


class AuthError(QForgeError):
    code = "auth_error"


class CassetteMissError(QForgeError):
    code = "cassette_miss"


class MalformedResponseError(QForgeError):
    code = "malformed_response"


class ScriptMissError(QForgeError):
    """Scripted backend has no entry for the requested tag."""

    code = "script_miss"


# --- prompting -------------------------------------------------------------

class EmptyInputError(QForgeError):
    code = "empty_input"


class StyleMismatchError(QForgeError):
    code = "style_mismatch"


class NoExemplarsError(QForgeError):
    code = "no_exemplars"


class ParseFailureError(QForgeError):
    code = "parse_failure"


# --- rag -------------------------------------------------------------------

class InvalidParamsError(QForgeError):
    code = "invalid_params"


class DimensionMismatchError(QForgeError):
    code = "dimension_mismatch"


class EmptyIndexError(QForgeError):
    code = "empty_index"


class IndexMissingError(QForgeError):
    code = "index_missing"


# --- orchestrator / sandbox ------------------------------------------------

class BackendUnreachableError(QForgeError):
    code = "backend_unreachable"


class ExecutorFailureError(QForgeError):
    """The sandbox could not run code at all (infrastructure, not the code)."""

    code = "executor_failure"


class NoTasksError(QForgeError):
    code = "no_tasks"


# --- dataprep --------------------------------------------------------------

class MalformedNotebookError(QForgeError):
    code = "malformed_notebook"


class InvalidTargetError(QForgeError):
    code = "invalid_target"


# --- qec -------------------------------------------------------------------

class InvalidDistanceError(QForgeError):
    code = "invalid_distance"


class TooManyDefectsError(QForgeError):
    code = "too_many_defects"


class InconsistentHistoryError(QForgeError):
    code = "inconsistent_history"


class TopologyUnsupportedError(QForgeError):
    code = "topology_unsupported"


class UnsupportedGateError(QForgeError):
    code = "unsupported_gate"


class LengthMismatchError(QForgeError):
    code = "length_mismatch"


class InvalidArgsError(QForgeError):
    code = "invalid_args"
