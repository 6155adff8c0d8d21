import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from csrwsn.graph_core import WsnGraph

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# five-sensor example network: u1..u5 are ids 0..4, sink S is id 5
TOY_SINK = 5
TOY_PATHS = [(1, 0, 5), (3, 2, 0, 5), (4, 2, 5)]
TOY_READINGS = np.array([5.0, 2.0, 7.0, 1.0, 3.0])
TOY_PHI = np.array(
    [
        [1, 1, 0, 0, 0],
        [1, 0, 1, 1, 0],
        [0, 0, 1, 0, 1],
    ],
    dtype=float,
)


@pytest.fixture
def toy_graph():
    edges = [(1, 0), (0, 5), (3, 2), (2, 0), (4, 2), (2, 5)]
    coords = np.array([[0.2, 0.2], [0.4, 0.2], [0.2, 0.4], [0.3, 0.6], [0.1, 0.5], [0.0, 0.0]])
    return WsnGraph(n=6, sink_id=TOY_SINK, edges=tuple(edges), coords=coords)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.format_line(i))
