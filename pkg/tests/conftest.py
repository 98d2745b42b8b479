import numpy as np
import pytest

from hystnet.network import load_network, modal_decompose
from hystnet.simulator import ScenarioConfig, run_scenario

ACCEPTANCE = {}


@pytest.fixture(scope="session")
def four():
    return load_network("four_node")


@pytest.fixture(scope="session")
def fifteen():
    return load_network("fifteen_node")


@pytest.fixture(scope="session")
def fifteen_basis(fifteen):
    return modal_decompose(fifteen)


_TRACES = {}


def burst_vector(n, node, amplitude):
    f = np.zeros(n)
    f[node - 1] = amplitude
    return f


def scenario_trace(q, eps, delta, tau, node=None, amplitude=None, t_end=100.0):
    """Cached 15-node run with the standard burst (3 on node 1, or 9 on node 5)."""
    node = node or (1 if q == 1 else 5)
    amplitude = amplitude or (3.0 if q == 1 else 9.0)
    key = (q, eps, delta, tau, node, amplitude, t_end)
    if key not in _TRACES:
        net = load_network("fifteen_node", Q=q, epsilon=eps)
        cfg = ScenarioConfig(network=net, delta=delta, tau=tau,
                             burst_f=burst_vector(15, node, amplitude), t_end=t_end)
        _TRACES[key] = run_scenario(cfg)
    return _TRACES[key]


@pytest.fixture(scope="session")
def traces():
    return scenario_trace


@pytest.fixture
def acceptance():
    """Record one criterion verdict; the terminal summary prints them all."""
    def record(number, title, ok, detail=""):
        ACCEPTANCE[number] = (bool(ok), title, detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
