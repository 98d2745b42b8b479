"""Averaged amplitude/damping dynamics of the dominant self-excited mode.

Everything here works in slow time ``s = epsilon * t``. Aggregate damping
values use mode-shape weights ``P[k, I]**2`` (small damping) or coupling
weights ``K[Q, k]**2 / K[Q, Q]`` (large damping). The 4-node closed forms
in :func:`fournode_reference` use plain sums of nodal values instead; the
``scale`` attribute converts between the two conventions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    InfiniteTriggerTime,
    NoSaddle,
    NoThreshold,
    NumericalFailure,
    UnsupportedRegime,
    ValidationError,
)
from .network import (
    LARGE,
    SMALL,
    ModalBasis,
    NetworkModel,
    dominant_mode,
    modal_decompose,
)


@dataclass(frozen=True)
class SlowFlowModel:
    regime: str
    p: float
    nu: float
    eta: float
    omega: float
    weights: np.ndarray
    weight_sum: float
    q: int
    epsilon: float
    k_qq: float
    mode: int | None = None
    mode_shape: np.ndarray | None = None

    @property
    def p2(self) -> float:
        return self.p * self.p

    @property
    def qi(self) -> int:
        return self.q - 1

    @property
    def n_nodes(self) -> int:
        return len(self.weights)


class BifurcationValues(NamedTuple):
    zeta_hb: float
    zeta_sn: float
    a_sn: float


class Equilibrium(NamedTuple):
    zeta: float
    A: float
    kind: str
    eigenvalues: np.ndarray


def make_small_damping_model(basis: ModalBasis, model: NetworkModel) -> SlowFlowModel:
    mode = dominant_mode(basis, model.q)
    shape = basis.shape(mode).copy()
    weights = shape ** 2
    weights[model.qi] = 0.0
    return SlowFlowModel(
        regime=SMALL, p=abs(float(shape[model.qi])), nu=model.nu, eta=model.eta,
        omega=basis.omega(mode), weights=weights, weight_sum=float(weights.sum()),
        q=model.q, epsilon=model.epsilon, k_qq=float(model.stiffness[model.qi, model.qi]),
        mode=mode, mode_shape=shape,
    )


def make_large_damping_model(model: NetworkModel) -> SlowFlowModel:
    K = model.stiffness
    qi = model.qi
    k_qq = float(K[qi, qi])
    weights = K[qi] * K[:, qi] / k_qq
    weights[qi] = 0.0
    return SlowFlowModel(
        regime=LARGE, p=1.0, nu=model.nu, eta=model.eta, omega=math.sqrt(k_qq),
        weights=weights, weight_sum=float(weights.sum()), q=model.q,
        epsilon=model.epsilon, k_qq=k_qq,
    )


def make_slow_flow(model: NetworkModel, basis: ModalBasis | None = None) -> SlowFlowModel:
    """Slow-flow model for the network's configured regime."""
    if model.regime == LARGE:
        return make_large_damping_model(model)
    return make_small_damping_model(basis or modal_decompose(model), model)


_FOLD_TOL = 1e-12


def aggregate(sf: SlowFlowModel, zetas) -> float:
    """Weighted aggregate damping of the nodal values."""
    return float(np.dot(sf.weights, zetas))


def amplitude_rhs(sf: SlowFlowModel, A, zeta_agg):
    p2 = sf.p2
    A2 = A * A
    return A * (0.5 * (p2 * sf.nu - zeta_agg) + p2 * p2 * sf.eta / 8.0 * A2
                - p2 ** 3 * sf.eta / 16.0 * A2 * A2)


def nullcline(sf: SlowFlowModel, zeta_agg) -> np.ndarray:
    """Nonnegative equilibria of the amplitude law at fixed aggregate damping."""
    roots = [0.0]
    if sf.eta <= 0:
        return np.array(roots)
    p2 = sf.p2
    disc = (p2 * (8 * sf.nu + sf.eta) - 8 * zeta_agg) / (p2 ** 3 * sf.eta)
    # snap round-off at the fold so the double root is reported once
    if abs(disc) < _FOLD_TOL / p2 ** 2:
        disc = 0.0
    if disc < 0:
        return np.array(roots)
    r = math.sqrt(disc)
    for a2 in (1 / p2 - r, 1 / p2 + r):
        if a2 > 0:
            roots.append(math.sqrt(a2))
    return np.unique(roots)


def bifurcation_values(sf: SlowFlowModel) -> BifurcationValues:
    p2 = sf.p2
    return BifurcationValues(
        zeta_hb=p2 * sf.nu,
        zeta_sn=p2 * (8 * sf.nu + sf.eta) / 8,
        a_sn=1 / sf.p,
    )


def rest_value(sf: SlowFlowModel, delta: float) -> float:
    """Nodal damping value at which the rate law is at rest with zero amplitudes."""
    if sf.weight_sum <= 0:
        raise ValidationError("nonlinear node has no coupled linear nodes")
    return (delta + sf.p2 * sf.nu) / sf.weight_sum


def rest_zetas(sf: SlowFlowModel, delta: float) -> np.ndarray:
    z = np.full(sf.n_nodes, rest_value(sf, delta))
    z[sf.qi] = 0.0
    return z


def damping_rhs(sf: SlowFlowModel, zetas, amplitudes, delta, tau) -> np.ndarray:
    """Per-node damping rates (slow time); zero at the nonlinear node."""
    if tau <= 0:
        raise ValidationError("tau must be positive")
    if sf.weight_sum <= 0:
        raise ValidationError("nonlinear node has no coupled linear nodes")
    amps = np.asarray(amplitudes, dtype=float)
    target = (delta + sf.p2 * sf.nu + sf.p2 * sf.p2 * sf.eta * amps * amps / 8.0) / sf.weight_sum
    rates = (target - np.asarray(zetas, dtype=float)) / tau
    rates[sf.qi] = 0.0
    return rates


def coupled_rhs(sf: SlowFlowModel, A, zeta_agg, delta, tau):
    """Planar (A, zeta) slow flow: amplitude law plus aggregated rate law."""
    dA = amplitude_rhs(sf, A, zeta_agg)
    dz = (-zeta_agg + delta + sf.p2 * sf.nu + sf.p2 * sf.p2 * sf.eta * A * A / 8.0) / tau
    return dA, dz


def planar_jacobian(sf: SlowFlowModel, A, zeta_agg, tau) -> np.ndarray:
    """Jacobian of :func:`coupled_rhs` in the variable order (A, zeta)."""
    p2, eta = sf.p2, sf.eta
    return np.array([
        [0.5 * (p2 * sf.nu - zeta_agg) + 3 * p2 * p2 * eta / 8 * A ** 2
         - 5 * p2 ** 3 * eta / 16 * A ** 4, -0.5 * A],
        [p2 * p2 * eta * A / (4 * tau), -1.0 / tau],
    ])


def _classify(jac):
    eig = np.linalg.eigvals(jac)
    if np.linalg.det(jac) < 0:
        kind = "saddle"
    elif np.trace(jac) < 0:
        kind = "stable"
    elif np.trace(jac) > 0:
        kind = "unstable"
    else:
        kind = "center"
    return kind, eig


def coupled_equilibria(sf: SlowFlowModel, delta, tau) -> list[Equilibrium]:
    """Equilibria of the planar flow, ordered by amplitude."""
    if delta <= 0 or tau <= 0:
        raise ValidationError("delta and tau must be positive")
    p, p2, eta, nu = sf.p, sf.p2, sf.eta, sf.nu
    out = []
    z0 = p2 * nu + delta
    out.append(Equilibrium(z0, 0.0, *_classify(planar_jacobian(sf, 0.0, z0, tau))))
    disc = p2 * eta * eta - 32 * eta * delta
    if disc >= 0 and eta > 0:
        for sign in (-1.0, 1.0):
            zeta = p2 * nu + delta + (p2 * eta + sign * p * math.sqrt(disc)) / 16
            A = math.sqrt(max(8 * (zeta - delta - p2 * nu) / (p2 * p2 * eta), 0.0))
            out.append(Equilibrium(zeta, A, *_classify(planar_jacobian(sf, A, zeta, tau))))
            if disc == 0:
                break
    return sorted(out, key=lambda e: e.A)


def integrate_coupled(sf: SlowFlowModel, A0, zeta0, delta, tau, s_end, n_out=2001,
                      rtol=1e-10, atol=1e-12):
    """Trajectory of the planar flow in slow time; columns ``(s, zeta, A)``."""
    if s_end <= 0:
        raise ValidationError("s_end must be positive")
    s_eval = np.linspace(0.0, s_end, n_out)
    sol = solve_ivp(lambda s, y: coupled_rhs(sf, y[0], y[1], delta, tau), (0.0, s_end),
                    [A0, zeta0], t_eval=s_eval, rtol=rtol, atol=atol, method="DOP853")
    if not sol.success:
        raise NumericalFailure(sol.message)
    return np.column_stack([sol.t, sol.y[1], sol.y[0]])


def hopf_tau(delta) -> float:
    """Time constant at which the upper nontrivial equilibrium changes stability."""
    return 1.0 / (2.0 * delta)


def _forcing_projection(sf: SlowFlowModel, f) -> float:
    if sf.regime != SMALL or sf.mode_shape is None:
        raise UnsupportedRegime("forced slow flow is only available for small damping")
    f = np.asarray(f, dtype=float)
    if f.shape != sf.mode_shape.shape:
        raise ValidationError("forcing vector must have one entry per node")
    return float(sf.mode_shape @ f)


def forced_amplitude_rhs(sf: SlowFlowModel, A, phi, f, delta):
    """Amplitude and phase rates under harmonic forcing ``eps f cos(omega_I t)``.

    Damping is pinned a distance ``delta`` above the Hopf value. The phase
    equation is singular at ``A = 0``; use :func:`locked_growth_rhs` there.
    """
    S = _forcing_projection(sf, f)
    p2, eta, w = sf.p2, sf.eta, sf.omega
    dA = (-0.5 * delta * A + p2 * p2 * eta / 8 * A ** 3 - p2 ** 3 * eta / 16 * A ** 5
          - math.sin(phi) / (2 * w) * S)
    if A == 0:
        if S != 0:
            raise NumericalFailure("phase equation is singular at A = 0 with nonzero forcing")
        return dA, 0.0
    dphi = -math.cos(phi) / (2 * A * w) * S
    return dA, dphi


def locked_phase(sf: SlowFlowModel, f) -> float:
    """Phase at which the forcing feeds the amplitude at the maximal rate."""
    S = _forcing_projection(sf, f)
    return -math.copysign(math.pi / 2, S) if S != 0 else 0.0


def locked_growth_rhs(sf: SlowFlowModel, A, f, delta):
    """Amplitude rate with the phase held at :func:`locked_phase`."""
    S = abs(_forcing_projection(sf, f))
    p2, eta = sf.p2, sf.eta
    return (-0.5 * delta * A + p2 * p2 * eta / 8 * A ** 3 - p2 ** 3 * eta / 16 * A ** 5
            + S / (2 * sf.omega))


def trigger_threshold(sf: SlowFlowModel, delta) -> float:
    """Unstable nullcline amplitude at ``zeta_HB + delta``."""
    p2, eta = sf.p2, sf.eta
    if delta < 0:
        raise ValidationError("delta must be nonnegative")
    if 8 * delta >= p2 * eta:
        raise NoThreshold(f"no bistability window: 8*delta={8 * delta:g} >= p^2*eta={p2 * eta:g}")
    inner = 1 / p2 - math.sqrt((p2 * eta - 8 * delta) / (p2 ** 3 * eta))
    if inner < _FOLD_TOL / p2:
        return 0.0
    return math.sqrt(inner)


def required_trigger_time(sf: SlowFlowModel, f, delta, method="closed_form",
                          epsilon=None, horizon=1e4):
    """Burst duration (fast time) needed to lift the amplitude to the threshold.

    ``closed_form`` uses linear growth from zero amplitude. ``integrate``
    follows the phase-locked forced amplitude law from ``A = 0`` until it
    reaches the threshold.
    """
    eps = sf.epsilon if epsilon is None else epsilon
    S = abs(_forcing_projection(sf, f))
    if S < 1e-14:
        raise InfiniteTriggerTime("forcing is orthogonal to the dominant mode")
    a_bar = trigger_threshold(sf, delta)
    if method == "closed_form":
        return 2 * sf.omega * a_bar / (eps * S)
    if method != "integrate":
        raise ValidationError(f"unknown method {method!r}")
    if a_bar == 0:
        return 0.0

    def reached(s, y):
        return y[0] - a_bar
    reached.terminal = True
    reached.direction = 1

    sol = solve_ivp(lambda s, y: [locked_growth_rhs(sf, y[0], f, delta)], (0.0, horizon),
                    [0.0], events=reached, rtol=1e-11, atol=1e-13, method="DOP853")
    if not sol.t_events[0].size:
        raise InfiniteTriggerTime("forced amplitude saturates below the threshold")
    return float(sol.t_events[0][0]) / eps


def stable_manifold_branch(sf: SlowFlowModel, delta, tau, arc_length=10.0, side=-1,
                           offset=1e-6, max_step=0.01):
    """Polyline ``(zeta, A)`` of one branch of the saddle's stable manifold.

    The branch starts ``offset`` away from the saddle along the stable
    eigenvector, on the side of decreasing aggregate damping when
    ``side=-1``, and is traced in backward time until the arc-length budget
    is spent or it leaves the box ``[0, 2 zeta_SN] x [0, 2 A_SN]``.
    """
    saddles = [e for e in coupled_equilibria(sf, delta, tau) if e.kind == "saddle"]
    if not saddles:
        raise NoSaddle("planar flow has no saddle equilibrium")
    sad = saddles[0]
    jac = planar_jacobian(sf, sad.A, sad.zeta, tau)
    evals, evecs = np.linalg.eig(jac)
    vs = np.real(evecs[:, int(np.argmin(np.real(evals)))])
    vs /= np.linalg.norm(vs)
    if np.sign(vs[1]) != np.sign(side):
        vs = -vs
    start = np.array([sad.A, sad.zeta]) + offset * vs
    bv = bifurcation_values(sf)
    a_max, z_max = 2 * bv.a_sn, 2 * bv.zeta_sn

    def backward(s, y):
        dA, dz = coupled_rhs(sf, y[0], y[1], delta, tau)
        speed = math.hypot(dA, dz)
        return [-dA, -dz, speed]

    def spent(s, y):
        return y[2] - arc_length
    spent.terminal = True

    def outside(s, y):
        return min(y[0], a_max - y[0], y[1], z_max - y[1])
    outside.terminal = True

    sol = solve_ivp(backward, (0.0, 1e6), [start[0], start[1], 0.0], events=(spent, outside),
                    rtol=1e-9, atol=1e-10, max_step=max_step * tau, method="DOP853",
                    dense_output=False)
    return np.column_stack([sol.y[1], sol.y[0]])


@dataclass(frozen=True)
class FourNodeReference:
    """Closed-form slow-flow constants of the 4-node example network.

    Values use plain sums of the relevant nodal damping values; ``scale``
    maps the generic weighted aggregate onto that sum.
    """

    q: int
    regime: str
    label: str
    omega: float
    zeta_hb: float
    zeta_sn: float
    a_sn: float
    scale: float
    linear: tuple
    cubic: float
    quintic: float
    nullcline_center: float
    nullcline_scale: float
    nullcline_root: tuple
    nullcline_coeff: float
    rate_gain: float

    def amplitude_rhs(self, A, zeta):
        a, b = self.linear
        return a * (b - zeta) * A + self.cubic * A ** 3 - self.quintic * A ** 5

    def nullcline(self, zeta):
        c, d = self.nullcline_root
        disc = (c - d * zeta) / self.nullcline_coeff
        if abs(disc) < _FOLD_TOL * max(1.0, abs(c) / self.nullcline_coeff):
            disc = 0.0
        roots = [0.0]
        if disc >= 0:
            for a2 in (self.nullcline_center - self.nullcline_scale * math.sqrt(disc),
                       self.nullcline_center + self.nullcline_scale * math.sqrt(disc)):
                if a2 > 0:
                    roots.append(math.sqrt(a2))
        return np.unique(roots)

    def rate(self, zeta, A, delta, tau):
        """Aggregate rate law in this normalization; ``delta`` is on the same scale."""
        return (-zeta + delta + self.zeta_hb + self.rate_gain * A * A) / tau

    def to_reference(self, zeta_agg):
        return zeta_agg * self.scale

    def from_reference(self, zeta_sum):
        return zeta_sum / self.scale


def _ref(q, regime, label, omega, hb, sn, a_sn, scale, linear, cubic, quintic,
         center, nscale, root, coeff, gain):
    return FourNodeReference(
        q, regime, label, float(omega), float(hb), float(sn), float(a_sn), float(scale),
        (float(linear[0]), float(linear[1])), float(cubic), float(quintic), float(center),
        float(nscale), (float(root[0]), float(root[1])), float(coeff), float(gain),
    )


F = Fraction
_FOURNODE = {
    # A' = a (b - zeta) A + c A^3 - d A^5 ;  A^2 = center +- scale sqrt((r0 - r1 zeta) / coeff)
    (1, SMALL): lambda: _ref(1, SMALL, "zeta_4", 2.0, 1, F(9, 4), math.sqrt(2), 2,
                             (F(1, 4), 1), F(5, 16), F(5, 64), 2, 2, (9, 4), 5, F(5, 8)),
    (2, SMALL): lambda: _ref(2, SMALL, "zeta_1+zeta_3+zeta_4", math.sqrt(5), 9, F(81, 4),
                             2 / math.sqrt(3), 12, (F(1, 24), 9), F(45, 64), F(135, 512),
                             F(4, 3), F(4, 9), (81, 4), 5, F(135, 16)),
    (3, SMALL): lambda: _ref(3, SMALL, "zeta_1+zeta_4", math.sqrt(2), 4, 9, math.sqrt(1.5), 6,
                             (F(1, 12), 4), F(5, 9), F(5, 27), F(3, 2), F(3, 2), (9, 1), 5,
                             F(10, 3)),
    (1, LARGE): lambda: _ref(1, LARGE, "zt_2+zt_4", math.sqrt(3), 3, F(27, 4), 1.0, 3,
                             (F(1, 6), 3), F(5, 4), F(5, 8), 1, 1, (27, 4), 15, F(15, 4)),
    (2, LARGE): lambda: _ref(2, LARGE, "zt_1+zt_3+zt_4", 2.0, 4, 9, 1.0, 4,
                             (F(1, 8), 4), F(5, 4), F(5, 8), 1, 1, (9, 1), 5, 5),
    (3, LARGE): lambda: _ref(3, LARGE, "zt_2", math.sqrt(2), 2, F(9, 2), 1.0, 2,
                             (F(1, 4), 2), F(5, 4), F(5, 8), 1, 1, (9, 2), 5, F(5, 2)),
}


def fournode_reference(q: int, regime: str = SMALL) -> FourNodeReference:
    """Closed-form constants for the 4-node network with unit damping scales (nu=1, eta=10).

    Node 4 mirrors node 1, so ``q=4`` returns the ``q=1`` values with the
    roles of nodes 1 and 4 exchanged.
    """
    if q not in (1, 2, 3, 4):
        raise ValidationError("Q must be one of 1, 2, 3, 4")
    if regime not in (SMALL, LARGE):
        raise ValidationError(f"unknown regime {regime!r}")
    ref = _FOURNODE[(1 if q == 4 else q, regime)]()
    if q == 4:
        label = ref.label.replace("_4", "_1")
        ref = _ref(4, regime, label, ref.omega, ref.zeta_hb, ref.zeta_sn, ref.a_sn, ref.scale,
                   ref.linear, ref.cubic, ref.quintic, ref.nullcline_center,
                   ref.nullcline_scale, ref.nullcline_root, ref.nullcline_coeff, ref.rate_gain)
    return ref


class EpsilonMax(NamedTuple):
    intersection: float
    estimate: float


CORRECTION_FACTOR = 2.0


def epsilon_max_estimate(model: NetworkModel, basis: ModalBasis) -> EpsilonMax:
    """Largest damping scale expected to support hysteresis.

    Intersects the small- and large-damping saddle-node asymptotes of the
    uniform-damping contour and divides by the empirical factor 2.
    """
    mode = dominant_mode(basis, model.q)
    p2 = float(basis.P[model.qi, mode - 1] ** 2)
    k_qq = float(model.stiffness[model.qi, model.qi])
    if p2 == 0:
        raise NumericalFailure("dominant mode does not move the nonlinear node")
    rhs = math.sqrt((k_qq - 1) * (1 - p2) / (k_qq * p2))
    eps = rhs / (model.nu + model.eta / 8)
    return EpsilonMax(eps, eps / CORRECTION_FACTOR)


def uniform_contour_applicable(model: NetworkModel, basis: ModalBasis) -> bool:
    """True when the dominant mode has no displacement nodes among the linear nodes."""
    mode = dominant_mode(basis, model.q)
    shape = np.delete(basis.shape(mode), model.qi)
    return bool(np.all(np.abs(shape) > 1e-12))


class MuAsymptotes(NamedTuple):
    mu_hb: float
    mu_sn: float
    c_hb: float
    c_sn: float

    def large_hb(self, eps):
        return self.c_hb / np.asarray(eps) ** 2

    def large_sn(self, eps):
        return self.c_sn / np.asarray(eps) ** 2


def mu_asymptotes(model: NetworkModel, basis: ModalBasis) -> MuAsymptotes:
    """Uniform-damping bifurcation asymptotes: constants for small, ``c / eps^2`` for large."""
    mode = dominant_mode(basis, model.q)
    p2 = float(basis.P[model.qi, mode - 1] ** 2)
    k_qq = float(model.stiffness[model.qi, model.qi])
    nu, eta = model.nu, model.eta
    return MuAsymptotes(
        mu_hb=p2 * nu / (1 - p2),
        mu_sn=p2 * (nu + eta / 8) / (1 - p2),
        c_hb=(k_qq - 1) / (k_qq * nu),
        c_sn=(k_qq - 1) / (k_qq * (nu + eta / 8)),
    )
