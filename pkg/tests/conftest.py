import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from coiabr.media import ManifestConfig, generate_manifest  # noqa: E402
from coiabr.trace import BandwidthTrace  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def manifest():
    return generate_manifest(ManifestConfig(num_chunks=20), seed=3)


@pytest.fixture
def const_trace():
    return BandwidthTrace([0.0], [1000.0], name="const-1000")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
