import sys
from pathlib import Path

import pytest

from qforge.evalsuite import default_suite
from qforge.sandbox import InlineExecutor, SubprocessExecutor, stub_runner_config

FIXTURES = Path(__file__).parent / "fixtures"
STUB_RUNNER = FIXTURES / "stub_runner.py"


@pytest.fixture(scope="session")
def suite():
    return default_suite()


@pytest.fixture
def inline_executor():
    return InlineExecutor()


@pytest.fixture
def stub_executor():
    """Subprocess executor driving the test-local runner script, so the
    sandbox tests exercise the real process boundary without any runner
    package being installed."""
    return SubprocessExecutor(stub_runner_config(str(STUB_RUNNER), timeout_s=10.0))


@pytest.fixture
def fast_stub_executor():
    return SubprocessExecutor(stub_runner_config(str(STUB_RUNNER), timeout_s=1.0,
                                                 grace_s=2.0))
