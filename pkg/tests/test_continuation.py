import math

import numpy as np
import pytest

from hystnet.continuation import (
    ParameterSpec,
    continue_equilibria,
    continue_periodic,
    floquet_multipliers,
    newton_corrector,
    seed_periodic_orbit,
    shooting_residual,
    two_parameter_map,
)
from hystnet.errors import NoConvergence, SeedFailure, ValidationError
from hystnet.network import build_network, load_network

SPEC4 = ParameterSpec("node", node=4, template=(0.0, 1.1, 1.1, 1.0))


@pytest.fixture(scope="module")
def four_branch():
    net = load_network("four_node", epsilon=0.05)
    eq = continue_equilibria(net, SPEC4, (0.5, 3.0))
    hopf = [e for e in eq.events if e.detail["boundary"]][0]
    seed = seed_periodic_orbit(hopf, net, SPEC4)
    br = continue_periodic(net, seed, SPEC4, (0.5, 3.0), ds_max=0.05)
    return net, hopf, seed, br


def test_newton_linear_one_step():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    x, it = newton_corrector(lambda x: A @ x - b, np.zeros(2), jacobian=lambda x: A)
    assert it == 1
    np.testing.assert_allclose(A @ x, b, atol=1e-12)


def test_newton_quintic():
    x, it = newton_corrector(lambda x: x ** 5 - 2.0, np.array([1.0]), tol=1e-13)
    assert x[0] == pytest.approx(2 ** 0.2, rel=1e-12)
    assert it < 10


def test_newton_reports_failure():
    with pytest.raises(NoConvergence) as info:
        newton_corrector(lambda x: x ** 2 + 1.0, np.array([0.5]), max_iter=20)
    assert info.value.residual_norm >= 1.0


def test_parameter_spec():
    net = load_network("four_node")
    assert ParameterSpec.parse("mu").kind == "uniform"
    spec = ParameterSpec.parse("zeta_3", template=(0, 1, 1, 1))
    np.testing.assert_array_equal(spec.damping(net, 2.5), [0, 1, 2.5, 1])
    np.testing.assert_array_equal(spec.slope(net), [0, 0, 1, 0])
    with pytest.raises(ValidationError):
        ParameterSpec.parse("zeta_x")
    with pytest.raises(ValidationError):
        ParameterSpec.parse("zeta_1").damping(net, 1.0)


def test_no_hopf_without_negative_damping():
    net = load_network("four_node", nu=0.0, epsilon=0.1)
    eq = continue_equilibria(net, ParameterSpec("uniform"), (0.1, 10.0), n_grid=60)
    assert eq.events == []
    assert all(p.stable for p in eq.points)


def test_single_node_map_is_empty():
    net = build_network([], 1, 1, epsilon=0.1)
    result = two_parameter_map(net, [0.1, 0.2], mu_range=(0.1, 10.0), n_grid=20)
    assert result.hopf_curves == [] and result.sn_curves == []
    assert result.asymptotes is None


def test_equilibrium_hopf_located(four_branch):
    net, hopf, _, _ = four_branch
    assert hopf.detail["unstable_below"] == 2 and hopf.detail["unstable_above"] == 0
    assert abs(hopf.detail["eigenvalue"].real) < 1e-6
    # first order: the node-4 damping that cancels the negative damping at node 1
    assert hopf.param == pytest.approx(1.0, abs=0.05)


def test_seed_shape(four_branch):
    net, hopf, seed, _ = four_branch
    u = seed.state[:4]
    assert u[0] > 0
    assert abs(u[0] + u[3]) < 0.1 * abs(u[0])
    assert seed.state[seed.anchor] == pytest.approx(0.0, abs=1e-15)
    assert seed.period == pytest.approx(2 * math.pi / hopf.frequency)
    with pytest.raises(SeedFailure):
        seed_periodic_orbit(hopf, net, SPEC4, a0=0.0)


def test_seed_residual_cubic(four_branch):
    net, hopf, _, _ = four_branch
    res = []
    for a0 in (4e-3, 8e-3):
        s = seed_periodic_orbit(hopf, net, SPEC4, a0=a0)
        r = shooting_residual(net, SPEC4, s.state, s.period, s.param, anchor=s.anchor)
        res.append(np.linalg.norm(r, np.inf))
    assert 7.0 < res[1] / res[0] < 9.0


def test_branch_period_starts_at_hopf(four_branch):
    _, hopf, _, br = four_branch
    assert br.points[0].period == pytest.approx(2 * math.pi / hopf.frequency, rel=0.01)


def test_fold_and_floquet(four_branch):
    _, _, _, br = four_branch
    folds = [e for e in br.events if e.kind == "SaddleNode"]
    assert len(folds) >= 1
    i = folds[0].detail["index"]
    stable = br.stable
    assert not stable[max(i - 3, 0)] and stable[min(i + 3, len(stable) - 1)]
    # a multiplier crosses +1 at the fold
    near = [np.abs(br.points[j].spectrum - 1).min() for j in (i, i + 1)]
    assert min(near) < 0.05


def test_floquet_drops_trivial():
    m = floquet_multipliers(np.diag([0.5, 1.0 + 1e-9, 2.0]))
    np.testing.assert_allclose(np.sort(m.real), [0.5, 2.0])
