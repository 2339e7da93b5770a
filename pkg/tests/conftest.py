import pickle

import numpy as np
import pytest

from cchknn import cch
from cchknn.graph import Graph
from cchknn.network import build_network
from cchknn.synth import grid_graph, path_graph, random_road_graph, road_grid

# Large synthetic road graph for the scaling checks (about 1.07e5 vertices).
BIG_GRID = dict(rows=130, cols=130, subdivide=3, seed=1)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, name): acceptance criterion")
    config.stash[_RESULTS] = {}


_RESULTS = pytest.StashKey[dict]()


def pytest_sessionstart(session):
    # every query wrapper and trip loop audits its labels for the whole run
    cch.set_debug(True)


def pytest_collection_modifyitems(session, config, items):
    # acceptance checks go last so the audit tally covers the whole suite
    items.sort(key=lambda it: it.nodeid.startswith("tests/test_acceptance.py"))


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and (report.when == "call" or report.failed):
        num, name = marker.args
        detail = dict(item.user_properties).get("detail", "")
        results = item.config.stash[_RESULTS]
        if report.when == "call" or num not in results:
            results[num] = (name, report.passed, detail)
    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash[_RESULTS]
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            name, ok, detail = results[num]
            line = f"criterion {num:2d} {'PASS' if ok else 'FAIL'}  {name}"
            terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
    stats = cch.audit_stats
    terminalreporter.write_line(
        f"label audits: {stats['audits']} run, {stats['violations']} violations")


# --- fixtures ------------------------------------------------------------------------


@pytest.fixture(scope="session")
def p5():
    return path_graph(5)


@pytest.fixture(scope="session")
def grid3():
    return grid_graph(3, 3)


def pow2_grid3():
    """GRID3 with edge lengths 1, 2, 4, ...: every shortest path is unique and
    distinct vertices are at distinct distances from any source."""
    g, c = grid_graph(3, 3)
    tails = g.tails()
    pairs = sorted({(min(a, b), max(a, b)) for a, b in zip(tails.tolist(), g.head.tolist())})
    length = {p: 1 << i for i, p in enumerate(pairs)}
    w = np.array([length[(min(a, b), max(a, b))] for a, b in zip(tails.tolist(), g.head.tolist())])
    return Graph.from_edges(9, tails, g.head, w), c


@pytest.fixture(scope="session")
def random_networks():
    """50 strongly connected road-like graphs with 100..1000 vertices."""
    rng = np.random.default_rng(2024)
    nets = []
    seed = 0
    while len(nets) < 50:
        n = int(rng.integers(110, 1100))
        g, c = random_road_graph(n, seed=seed)
        seed += 1
        if not 100 <= g.num_vertices <= 1000:
            continue
        leaf = int(rng.choice([4, 16, 32]))
        nets.append(build_network(g, c, leaf_threshold=leaf))
    return nets


@pytest.fixture(scope="session")
def big_network(request):
    """The ~1e5-vertex graph, preprocessed once and cached between runs."""
    path = request.config.cache.mkdir("cchknn") / "big_network_v1.pkl"
    if path.exists():
        with open(path, "rb") as f:
            return pickle.load(f)
    g, c = road_grid(**BIG_GRID)
    net = build_network(g, c)
    with open(path, "wb") as f:
        pickle.dump(net, f)
    return net
