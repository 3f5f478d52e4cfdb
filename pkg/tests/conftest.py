import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tdmvision.frames import BoundingBox, Frame  # noqa: E402


def gray(pixels, frame_id=0):
    return Frame(frame_id, 0.0, np.asarray(pixels, dtype=np.uint8))


def box(*coords):
    return BoundingBox(*coords)


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    """A 100-image synthetic corpus shared by the dataset, analysis and CLI tests."""
    from tdmvision.dataset import synthetic_fixture

    out = tmp_path_factory.mktemp("corpus")
    synthetic_fixture(seed=1, n_images=100, w=64, h=48, out_dir=out)
    return out


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
