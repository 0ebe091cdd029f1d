import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from egohomophily.features import FeatureDef, FeatureSchema  # noqa: E402
from egohomophily.graph import ProfileTable, build_graph  # noqa: E402


@pytest.fixture
def schema():
    return FeatureSchema([
        FeatureDef("gender", "cat"),
        FeatureDef("city", "cat"),
        FeatureDef("age", "num", 2),
        FeatureDef("bmi", "num", 1),
    ])


def make_graph(edges, schema=None, values=None, present=None):
    """Graph from (u, v, t) triples; profiles given per internal node index."""
    src, dst, ts = zip(*edges)
    g = build_graph(src, dst, ts)
    if schema is not None:
        g = g.with_profiles(ProfileTable(schema, np.asarray(values, float), np.asarray(present, bool)))
    return g


ACCEPTANCE_LINES: list[str] = []


def report(line: str) -> None:
    """Record one acceptance verdict line; printed again in the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
