import numpy as np
import pytest

from uwenhance.imgcore import ImageBuf

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"[{status}] criterion {number:2d}: {title} -- {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


def random_image(rng: np.random.Generator, h: int, w: int, quantized: bool = False) -> ImageBuf:
    if quantized:
        return ImageBuf.from_array(rng.integers(0, 256, size=(h, w, 3)) / 255.0)
    return ImageBuf.from_array(rng.random((h, w, 3)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
