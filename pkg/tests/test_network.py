import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hystnet.errors import DistinctFrequencyViolation, DominantModeIsRigid, ValidationError
from hystnet.network import (
    DampingState,
    build_network,
    canonicalize_signs,
    dominant_mode,
    full_rhs,
    jacobi_eigh,
    linearization,
    linearized_rates,
    load_network,
    modal_decompose,
    nonlinear_damping,
)


def test_four_node_stiffness(four):
    K = np.array([[3, -1, 0, -1], [-1, 4, -1, -1], [0, -1, 2, 0], [-1, -1, 0, 3]], float)
    np.testing.assert_array_equal(four.stiffness, K)
    np.testing.assert_array_equal(four.stiffness, np.eye(4) + four.laplacian)


def test_four_node_modes(four):
    basis = modal_decompose(four)
    np.testing.assert_allclose(basis.omegas, np.sqrt([1, 2, 4, 5]), atol=1e-13)
    # rigid mode is uniform; mode 4 peaks at node 2
    np.testing.assert_allclose(basis.P[:, 0], 0.5, atol=1e-13)
    np.testing.assert_allclose(basis.P[:, 3], np.array([-1, 3, -1, -1]) / np.sqrt(12), atol=1e-13)
    assert dominant_mode(basis, 1) == 3
    assert dominant_mode(basis, 2) == 4


def test_fifteen_node_degrees(fifteen):
    # recounted from the edge list
    expected = [2, 2, 6, 8, 5, 6, 6, 3, 3, 4, 5, 5, 4, 5, 8]
    np.testing.assert_array_equal(fifteen.degrees, expected)
    assert len(fifteen.edges) == sum(expected) // 2


def test_single_node():
    net = build_network([], 1, 1)
    np.testing.assert_array_equal(net.stiffness, [[1.0]])
    basis = modal_decompose(net)
    with pytest.raises(DominantModeIsRigid):
        dominant_mode(basis, 1)


@pytest.mark.parametrize("edges, n, q", [
    ([(1, 1)], 2, 1),
    ([(1, 2), (2, 1)], 2, 1),
    ([(1, 3)], 2, 1),
    ([(1, 2)], 2, 3),
    ([(1, 2)], 0, 1),
])
def test_bad_graphs(edges, n, q):
    with pytest.raises(ValidationError):
        build_network(edges, n, q)


@pytest.mark.parametrize("field, value", [("nu", -1.0), ("eta", float("nan")),
                                          ("epsilon", 0.0), ("regime", "huge")])
def test_bad_parameters(field, value):
    kwargs = {field: value}
    with pytest.raises(ValidationError):
        build_network([(1, 2)], 2, 1, **kwargs)


def test_disconnected_warns():
    with pytest.warns(RuntimeWarning):
        net = build_network([(1, 2), (3, 4)], 4, 1)
    assert net.metadata["warnings"]


def test_repeated_frequencies_rejected():
    # a star has a degenerate eigenvalue
    star = build_network([(1, 2), (1, 3), (1, 4)], 4, 1)
    with pytest.raises(DistinctFrequencyViolation):
        modal_decompose(star)
    assert modal_decompose(star, check_distinct=False).n_modes == 4


def test_overrides_and_replace(four):
    net = load_network("four_node", Q=2, epsilon=0.05)
    assert (net.q, net.epsilon) == (2, 0.05)
    assert four.replace(q=3).q == 3
    with pytest.raises(ValidationError):
        load_network("nine_node")


def test_canonical_signs():
    P = canonicalize_signs(np.array([[0.1, -0.9], [-0.8, 0.2]]))
    for col in P.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_damping_law_sign():
    assert nonlinear_damping(0.0, 1.0, 10.0) == -1.0
    # negative damping grows with small amplitude, turns positive beyond |u| > 1 ish
    assert nonlinear_damping(0.5, 1.0, 10.0) < -1.0
    assert nonlinear_damping(2.0, 1.0, 10.0) > 0


def test_rhs_matches_linearization(four):
    zetas = np.array([0.0, 0.7, 0.3, 0.5])
    jac = linearization(four, zetas)
    x = 1e-7 * np.arange(1, 9)
    rhs = full_rhs(0.0, np.concatenate([x, zetas]), four)[:8]
    np.testing.assert_allclose(rhs, jac @ x, rtol=1e-9, atol=1e-20)


def test_linearized_rates_first_order(four):
    zetas = np.array([0.0, 0.7, 0.3, 0.5])
    rates = linearized_rates(four, DampingState(zetas))
    exact = np.linalg.eigvals(linearization(four, zetas))
    exact = np.sort_complex(exact[exact.imag > 0])
    err = np.abs(np.sort_complex(rates) - exact)
    assert err.max() < 10 * four.epsilon ** 2


@st.composite
def random_graph(draw):
    n = draw(st.integers(2, 9))
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return n, chosen


@settings(max_examples=60, deadline=None)
@given(random_graph())
def test_jacobi_matches_lapack(graph):
    n, edges = graph
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        net = build_network(edges, n, 1)
    evals, vecs = jacobi_eigh(net.stiffness)
    np.testing.assert_allclose(np.sort(evals), np.linalg.eigvalsh(net.stiffness), atol=1e-11)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(n), atol=1e-12)
    np.testing.assert_allclose(net.stiffness @ vecs, vecs * evals, atol=1e-11)
    assert evals.min() >= 1 - 1e-12
