import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pixelcommunities.imageio import LabImage, Labeling, RgbImage  # noqa: E402

QUADRANT_LAB = [(20.0, 60.0, -60.0), (80.0, -60.0, 60.0), (50.0, 70.0, 70.0), (90.0, -50.0, -70.0)]
QUADRANT_RGB = [(255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0)]


def quadrant_ids(size):
    half = size // 2
    rows = np.arange(size)[:, None] >= half
    cols = np.arange(size)[None, :] >= half
    return rows * 2 + cols


def quadrant_lab(size=64, colors=QUADRANT_LAB):
    ids = quadrant_ids(size)
    return LabImage(np.asarray(colors, dtype=np.float64)[ids])


def quadrant_rgb(size=64, colors=QUADRANT_RGB):
    ids = quadrant_ids(size)
    return RgbImage(np.asarray(colors, dtype=np.uint8)[ids])


@pytest.fixture
def quadrants():
    return quadrant_lab(64)


@pytest.fixture
def quadrant_gt():
    return Labeling.from_ids(quadrant_ids(64))


# --- acceptance reporting -----------------------------------------------------------

_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """record(name, ok, detail): one PASS/FAIL line per acceptance criterion, then assert."""
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    record.skip = lambda name, why: (lines.append(f"SKIP  {name}: {why}"), pytest.skip(why))
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
