"""Network structure, modal decomposition and the full equations of motion.

Node and mode indices in the public API are 1-based, matching the labels
used when describing a network (node 1, mode 2, ...). Arrays are indexed
from 0 as usual, so ``P[:, I - 1]`` is the column of mode ``I``.
"""
from __future__ import annotations

import json
import math
import numbers
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import (
    DistinctFrequencyViolation,
    DominantModeIsRigid,
    UnsupportedRegime,
    ValidationError,
)

SMALL = "small"
LARGE = "large"
REGIMES = (SMALL, LARGE)

FREQUENCY_GAP = 1e-8
ZERO_SHAPE = 1e-12


@dataclass(frozen=True)
class NetworkModel:
    n_nodes: int
    edges: tuple
    adjacency: np.ndarray
    laplacian: np.ndarray
    stiffness: np.ndarray
    q: int
    nu: float
    eta: float
    epsilon: float
    regime: str = SMALL
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def qi(self) -> int:
        """0-based index of the nonlinear node."""
        return self.q - 1

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, k: int) -> list[int]:
        """1-based neighbours of 1-based node ``k``."""
        return [int(j) + 1 for j in np.flatnonzero(self.adjacency[k - 1])]

    def replace(self, **changes) -> "NetworkModel":
        spec = {
            "n": self.n_nodes, "edges": self.edges, "q": self.q, "nu": self.nu,
            "eta": self.eta, "epsilon": self.epsilon, "regime": self.regime,
        }
        spec.update(changes)
        return build_network(spec.pop("edges"), spec.pop("n"), **spec)

    def to_dict(self) -> dict:
        return {
            "n": self.n_nodes,
            "edges": [list(e) for e in self.edges],
            "Q": self.q,
            "nu": self.nu,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "regime": self.regime,
        }


@dataclass(frozen=True)
class ModalBasis:
    """Orthonormal mode shapes (columns of ``P``) and natural frequencies."""

    P: np.ndarray
    omegas: np.ndarray

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    def shape(self, mode: int) -> np.ndarray:
        return self.P[:, mode - 1]

    def omega(self, mode: int) -> float:
        return float(self.omegas[mode - 1])


@dataclass(frozen=True)
class DampingState:
    """Per-node linear damping values.

    In the large-damping regime the entries are the rescaled values
    ``1 / (epsilon**2 * zeta_k)``. The entry at the nonlinear node is unused.
    """

    zetas: np.ndarray
    regime: str = SMALL

    def __post_init__(self):
        z = np.asarray(self.zetas, dtype=float)
        if not np.all(np.isfinite(z)):
            raise ValidationError("damping values must be finite")
        object.__setattr__(self, "zetas", z)


def build_network(edges, n, q, nu=1.0, eta=10.0, epsilon=0.01, regime=SMALL) -> NetworkModel:
    """Assemble adjacency, Laplacian ``L`` and stiffness ``K = I + L``.

    ``edges`` are 1-based node pairs. Duplicates and self loops are rejected;
    a disconnected graph only records a warning in ``model.metadata``.
    """
    n = int(n)
    if n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    if not 1 <= int(q) <= n:
        raise ValidationError(f"Q must satisfy 1 <= Q <= {n}, got {q}")
    # nu = 0 or eta = 0 are degenerate but useful limits (conservative checks)
    for name, value, strict in (("nu", nu, False), ("eta", eta, False), ("epsilon", epsilon, True)):
        ok = isinstance(value, numbers.Real) and math.isfinite(value)
        if not ok or value < 0 or (strict and value == 0):
            kind = "positive" if strict else "nonnegative"
            raise ValidationError(f"{name} must be a {kind} finite number, got {value!r}")
    if regime not in REGIMES:
        raise ValidationError(f"regime must be one of {REGIMES}, got {regime!r}")

    adjacency = np.zeros((n, n))
    seen = set()
    clean = []
    for edge in edges:
        if len(edge) != 2:
            raise ValidationError(f"edge {edge!r} must be a pair of node labels")
        i, j = int(edge[0]), int(edge[1])
        if not (1 <= i <= n and 1 <= j <= n):
            raise ValidationError(f"edge ({i}, {j}) references a node outside 1..{n}")
        if i == j:
            raise ValidationError(f"self edge ({i}, {j}) is not allowed")
        key = (min(i, j), max(i, j))
        if key in seen:
            raise ValidationError(f"duplicate edge ({i}, {j})")
        seen.add(key)
        clean.append(key)
        adjacency[i - 1, j - 1] = adjacency[j - 1, i - 1] = 1.0

    laplacian = np.diag(adjacency.sum(axis=1)) - adjacency
    stiffness = np.eye(n) + laplacian
    metadata = {}
    if n > 1 and not _is_connected(adjacency):
        metadata["warnings"] = ["network graph is disconnected"]
        warnings.warn("network graph is disconnected", RuntimeWarning, stacklevel=2)
    return NetworkModel(
        n_nodes=n, edges=tuple(clean), adjacency=adjacency, laplacian=laplacian,
        stiffness=stiffness, q=int(q), nu=float(nu), eta=float(eta),
        epsilon=float(epsilon), regime=regime, metadata=metadata,
    )


def _is_connected(adjacency):
    n = len(adjacency)
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adjacency[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == n


def network_from_dict(data: dict) -> NetworkModel:
    required = ("n", "edges", "Q", "nu", "eta", "epsilon")
    for key in required:
        if key not in data:
            raise ValidationError(f"network: missing required field '{key}'")
    return build_network(
        data["edges"], data["n"], data["Q"], nu=data["nu"], eta=data["eta"],
        epsilon=data["epsilon"], regime=data.get("regime", SMALL),
    )


BUNDLED = {"four_node": "four_node.json", "fifteen_node": "fifteen_node.json"}


def bundled_network_dict(name: str) -> dict:
    if name not in BUNDLED:
        raise ValidationError(f"unknown bundled network {name!r}; choose from {sorted(BUNDLED)}")
    text = resources.files("hystnet.data").joinpath(BUNDLED[name]).read_text()
    return json.loads(text)


def load_network(source, **overrides) -> NetworkModel:
    """Load a network from a bundled name, a JSON file path or a dict."""
    if isinstance(source, dict):
        data = dict(source)
    elif isinstance(source, str) and source in BUNDLED:
        data = bundled_network_dict(source)
    else:
        try:
            data = json.loads(Path(source).read_text())
        except OSError as exc:
            raise ValidationError(f"cannot read network {source!r}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"network file {source!r} is not valid JSON: {exc}") from exc
    for key, value in overrides.items():
        data["Q" if key == "q" else key] = value
    return network_from_dict(data)


def jacobi_eigh(a, rel_tol=1e-13, max_sweeps=100):
    """Eigen-decomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps continue until the largest off-diagonal magnitude drops below
    ``rel_tol * ||a||_F``. Returns unsorted eigenvalues and the matrix whose
    columns are the corresponding orthonormal eigenvectors.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or not np.allclose(a, a.T, rtol=0, atol=1e-14 * max(1.0, np.abs(a).max())):
        raise ValidationError("jacobi_eigh needs a square symmetric matrix")
    v = np.eye(n)
    threshold = rel_tol * max(np.linalg.norm(a), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.abs(a - np.diag(np.diag(a))).max() if n > 1 else 0.0
        if off < threshold:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if abs(apr) < threshold * 1e-3:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                ar = a[:, r].copy()
                a[:, p] = c * ap - s * ar
                a[:, r] = s * ap + c * ar
                ap = a[p, :].copy()
                ar = a[r, :].copy()
                a[p, :] = c * ap - s * ar
                a[r, :] = s * ap + c * ar
                a[p, r] = a[r, p] = 0.0
                vp = v[:, p].copy()
                vr = v[:, r].copy()
                v[:, p] = c * vp - s * vr
                v[:, r] = s * vp + c * vr
    raise DistinctFrequencyViolation("Jacobi iteration did not converge")


def canonicalize_signs(P):
    """Flip columns so that each column's largest-magnitude entry is positive."""
    P = np.array(P, dtype=float)
    for i in range(P.shape[1]):
        j = np.argmax(np.abs(P[:, i]))
        if P[j, i] < 0:
            P[:, i] = -P[:, i]
    return P


def modal_decompose(model: NetworkModel, check_distinct=True) -> ModalBasis:
    """Mode shapes and natural frequencies of ``K``, frequencies ascending."""
    evals, evecs = jacobi_eigh(model.stiffness)
    order = np.argsort(evals, kind="stable")
    evals = evals[order]
    P = canonicalize_signs(evecs[:, order])
    if evals[0] <= 0:
        raise ValidationError("stiffness matrix is not positive definite")
    omegas = np.sqrt(evals)
    if check_distinct and len(omegas) > 1:
        gaps = np.diff(omegas) / omegas[1:]
        bad = np.flatnonzero(gaps < FREQUENCY_GAP)
        if bad.size:
            i = int(bad[0])
            raise DistinctFrequencyViolation(
                f"natural frequencies {i + 1} and {i + 2} coincide "
                f"({omegas[i]:.12g} vs {omegas[i + 1]:.12g})"
            )
    return ModalBasis(P=P, omegas=omegas)


def dominant_mode(basis: ModalBasis, q: int, rigid_tol=1e-8) -> int:
    """Mode index ``I`` (1-based) maximizing ``P[q, I]**2``; ties go to the lowest index."""
    weights = basis.P[q - 1] ** 2
    best = int(np.argmax(weights))  # argmax returns the first maximum
    if abs(basis.omegas[best] - 1.0) < rigid_tol:
        raise DominantModeIsRigid(
            f"dominant mode for Q={q} is the rigid mode with frequency 1"
        )
    return best + 1


def nonlinear_damping(uq, nu, eta):
    """Damping coefficient of the nonlinear node, ``-nu - eta u^2 + eta u^4``."""
    u2 = uq * uq
    return -nu - eta * u2 + eta * u2 * u2


def linear_damping(zetas, model: NetworkModel, regime=None):
    """Physical damping coefficients of the linear nodes from stored values."""
    regime = regime or model.regime
    zetas = np.asarray(zetas, dtype=float)
    if regime == LARGE:
        with np.errstate(divide="ignore"):
            return 1.0 / (model.epsilon ** 2 * zetas)
    return zetas


def damping_coefficients(u, d: DampingState, model: NetworkModel) -> np.ndarray:
    """Diagonal of ``C(u)`` (without the overall factor epsilon)."""
    u = np.asarray(u, dtype=float)
    if u.shape != (model.n_nodes,) or d.zetas.shape != (model.n_nodes,):
        raise ValidationError("displacement and damping vectors must have length n")
    c = np.array(linear_damping(d.zetas, model, d.regime), dtype=float)
    c[model.qi] = nonlinear_damping(u[model.qi], model.nu, model.eta)
    return c


def full_rhs(t, state, model: NetworkModel, force=None, amplitudes=None, rate_law=None,
             regime=None):
    """Time derivative of ``(u, u_dot, zeta)`` for the network with damping dynamics.

    ``force`` is a callable ``F(t)`` or ``None``. ``rate_law(zetas, amplitudes)``
    returns the damping rates with respect to slow time ``epsilon * t``; it is
    scaled by epsilon here. Without a rate law the damping values are frozen.
    """
    n = model.n_nodes
    state = np.asarray(state, dtype=float)
    u, v, zetas = state[:n], state[n:2 * n], state[2 * n:]
    regime = regime or model.regime
    c = np.array(linear_damping(zetas, model, regime), dtype=float)
    c[model.qi] = nonlinear_damping(u[model.qi], model.nu, model.eta)
    acc = -model.epsilon * c * v - model.stiffness @ u
    if force is not None:
        acc = acc + force(t)
    if rate_law is None:
        dz = np.zeros(n)
    else:
        amps = np.zeros(n) if amplitudes is None else np.asarray(amplitudes, dtype=float)
        dz = model.epsilon * np.asarray(rate_law(zetas, amps), dtype=float)
    return np.concatenate([v, acc, dz])


def linearization(model: NetworkModel, zetas, regime=None) -> np.ndarray:
    """First-order Jacobian at ``u = 0`` with frozen damping: ``[[0, I], [-K, -eps C(0)]]``."""
    n = model.n_nodes
    c = np.array(linear_damping(zetas, model, regime), dtype=float)
    c[model.qi] = -model.nu
    jac = np.zeros((2 * n, 2 * n))
    jac[:n, n:] = np.eye(n)
    jac[n:, :n] = -model.stiffness
    jac[n:, n:] = -model.epsilon * np.diag(c)
    return jac


def linearized_rates(model: NetworkModel, d: DampingState, basis: ModalBasis | None = None):
    """First-order-in-epsilon exponential rates ``j omega_i - (eps/2) C~_ii(0)``.

    One rate per mode is returned (the member of each conjugate pair with
    positive imaginary part).
    """
    if d.regime != SMALL:
        raise UnsupportedRegime("linearized rates are only defined for small damping")
    basis = basis or modal_decompose(model, check_distinct=False)
    P2 = basis.P ** 2
    c0 = np.array(d.zetas, dtype=float)
    c0[model.qi] = -model.nu
    modal = P2.T @ c0
    return 1j * basis.omegas - 0.5 * model.epsilon * modal


def is_stable(rates) -> bool:
    return bool(np.all(np.real(rates) < 0))
