import numpy as np
import pytest
from hypothesis import settings, strategies as st

from openosc.params import ModelParams, relaxed_r2

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

REFERENCE = ModelParams(1.0, 1.0, 1.0, 0.0)


@pytest.fixture
def reference() -> ModelParams:
    return REFERENCE


@st.composite
def valid_params(draw, allow_overdamped: bool = True) -> ModelParams:
    """Random parameters away from nu = 2 with positive relaxed widths."""
    if allow_overdamped and draw(st.booleans()):
        nu = draw(st.floats(2.05, 3.95))
    else:
        nu = draw(st.floats(0.05, 1.95))
    d0 = draw(st.floats(0.0, 3.0))
    d2 = draw(st.floats(0.0, 3.0))
    if d0 + d2 < 0.05:
        d0 += 0.05
    top = 0.9 * relaxed_r2(ModelParams(nu, d0, d2))
    beta = draw(st.floats(-0.5, top))
    return ModelParams(nu, d0, d2, beta)


def rel_err(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """record(number, ok, detail): one PASS/FAIL line per acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
