import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from afb_screen import _kernels  # noqa: E402

BACKENDS = [pytest.param(_kernels.fallback, id="python")]
if _kernels.compiled is not None:
    BACKENDS.append(pytest.param(_kernels.compiled, id="compiled"))


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route kernel calls through one backend for the duration of a test."""
    mod = request.param
    monkeypatch.setattr(_kernels, "label8", mod.label8)
    monkeypatch.setattr(_kernels, "trace_moore", mod.trace_moore)
    return mod


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
