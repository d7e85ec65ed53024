from __future__ import annotations

import pytest

from dsaudit.datasets import load_bundle

try:  # androguard logs every chunk it reads at DEBUG level
    from loguru import logger

    logger.remove()
except ImportError:  # pragma: no cover
    pass


@pytest.fixture(scope="session")
def bundle():
    return load_bundle()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
