import pytest

from fasttracker import kernels

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per available kernel backend."""
    previous = kernels.BACKEND
    kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
