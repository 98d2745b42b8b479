"""Full network simulation with delay-integral amplitude estimators.

Each linear node adjusts its own damping through the slow rate law, driven
by an amplitude estimate built from one carrier period of its local
interaction force. The estimate uses a 4-point trapezoidal rule, which turns
the integro-differential system into a DDE with three discrete delays.

Time in this module is the fast time ``t``; burst length and horizon in
:class:`ScenarioConfig` are given in slow time ``epsilon * t``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationDiverged, NoThreshold, ValidationError
from .network import LARGE, NetworkModel, full_rhs, modal_decompose, nonlinear_damping
from .slowflow import (
    SlowFlowModel,
    bifurcation_values,
    make_slow_flow,
    rest_zetas,
    trigger_threshold,
)

QUAD_POINTS = 4
QUAD_WEIGHTS = np.array([0.5, 1.0, 1.0, 0.5])
DENSE_POINTS = 256


class Outcome(str, enum.Enum):
    QUIESCENT = "Quiescent"
    HYSTERETIC = "Hysteretic"
    PERSISTENT = "PersistentOscillation"


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation run.

    ``burst_f`` is the forcing amplitude vector; the applied force is
    ``epsilon * burst_f * sin(burst_frequency * t)`` while
    ``epsilon * t <= burst_duration``. ``t_end`` is in slow time as well.
    With ``rate_law=False`` the damping values stay at ``zetas0``.
    """

    network: NetworkModel
    delta: float
    tau: float
    burst_f: np.ndarray
    burst_frequency: float | None = None
    burst_duration: float = 1.0
    noise: float = 0.0
    dt: float | None = None
    t_end: float = 100.0
    sample_every: int = 10
    seed: int = 0
    zetas0: np.ndarray | None = None
    rate_law: bool = True

    def __post_init__(self):
        f = np.asarray(self.burst_f, dtype=float)
        if f.shape != (self.network.n_nodes,):
            raise ValidationError("burst_f must have one entry per node")
        object.__setattr__(self, "burst_f", f)
        if self.delta <= 0 or self.tau <= 0:
            raise ValidationError("delta and tau must be positive")
        if self.t_end <= 0 or self.burst_duration < 0:
            raise ValidationError("t_end must be positive and burst_duration nonnegative")
        if self.sample_every < 1:
            raise ValidationError("sample_every must be >= 1")
        if self.noise < 0:
            raise ValidationError("noise must be nonnegative")


@dataclass
class SimulationTrace:
    t: np.ndarray
    u: np.ndarray
    v: np.ndarray
    zeta: np.ndarray
    A: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.u.shape[1]

    @property
    def zeta_aggregate(self) -> np.ndarray:
        return self.zeta @ self.weights

    @property
    def outcome(self):
        return self.meta.get("outcome")


@dataclass(frozen=True)
class Thresholds:
    activation: float
    zeta_rest: float
    zeta_band: float
    burst_end: float
    window: float
    quiescence_fraction: float = 0.05

    def as_dict(self):
        return {
            "activation": self.activation,
            "quiescence_fraction": self.quiescence_fraction,
            "zeta_rest": self.zeta_rest,
            "zeta_band": self.zeta_band,
            "burst_end": self.burst_end,
            "window": self.window,
        }


class HistoryBuffer:
    """Ring buffer of ``(u, u_dot)`` on a uniform grid with cubic Hermite reads.

    Reads before ``t = 0`` return the quiescent initial history ``u = 0``.
    """

    def __init__(self, n_nodes, dt, window):
        self.dt = float(dt)
        self.window = float(window)
        self.size = int(math.ceil(window / dt)) + 4
        self.u = np.zeros((self.size, n_nodes))
        self.v = np.zeros((self.size, n_nodes))
        self.count = 0

    def append(self, u, v):
        j = self.count % self.size
        self.u[j] = u
        self.v[j] = v
        self.count += 1

    @property
    def t_last(self):
        return (self.count - 1) * self.dt

    def value(self, t):
        if t <= 0.0:
            if t < -self.window - 1e-12:
                raise ValidationError("history read before the initial window")
            if t < 0.0:
                return np.zeros(self.u.shape[1])
        x = t / self.dt
        i = int(math.floor(x))
        if i >= self.count - 1:
            if i == self.count - 1 and x - i < 1e-9:
                return self.u[i % self.size].copy()
            raise ValidationError(f"history read at t={t} beyond last sample {self.t_last}")
        if i < self.count - self.size:
            raise ValidationError(f"history read at t={t} older than the buffer")
        s = x - i
        a, b = i % self.size, (i + 1) % self.size
        s2, s3 = s * s, s * s * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = (s3 - 2 * s2 + s) * self.dt
        h01 = -2 * s3 + 3 * s2
        h11 = (s3 - s2) * self.dt
        return h00 * self.u[a] + h10 * self.v[a] + h01 * self.u[b] + h11 * self.v[b]


class AmplitudeEstimator:
    """Per-node amplitude estimates from one trailing carrier period.

    Small damping: projection of the net interaction force ``L u`` onto
    ``exp(j omega_I s)``, divided by ``P[k, I] (omega_I^2 - 1)``; nodes with
    vanishing mode-shape entries get 0. Large damping: projection of
    ``u_Q`` onto ``exp(j sqrt(K_QQ) s)`` for nodes coupled to Q, else 0.
    """

    def __init__(self, model: NetworkModel, sf: SlowFlowModel, shape_tol=1e-12):
        self.omega = sf.omega
        self.window = 2 * math.pi / sf.omega
        self.offsets = np.arange(QUAD_POINTS) * self.window / (QUAD_POINTS - 1)
        n = model.n_nodes
        if sf.regime == LARGE:
            coupled = model.laplacian[:, model.qi] != 0
            coupled[model.qi] = False
            self.operator = np.zeros((n, n))
            self.operator[:, model.qi] = 1.0
            self.gain = np.where(coupled, 1.0, 0.0)
        else:
            shape = sf.mode_shape
            denom = shape * (sf.omega ** 2 - 1.0)
            ok = np.abs(shape) > shape_tol
            self.operator = model.laplacian
            self.gain = np.where(ok, 1.0 / np.where(ok, np.abs(denom), 1.0), 0.0)
        # (omega / pi) * (window / 3) = 2 / 3 for the trapezoid spacing
        self.gain = self.gain * (self.omega / math.pi) * (self.window / (QUAD_POINTS - 1))

    def from_samples(self, times, samples):
        """Estimates from displacement ``samples[m]`` taken at ``times[m]``."""
        phase = np.exp(1j * self.omega * np.asarray(times)) * QUAD_WEIGHTS
        z = phase @ np.asarray(samples)
        return self.gain * np.abs(self.operator @ z)

    def __call__(self, history: HistoryBuffer, t, current=None):
        times = t - self.offsets
        samples = [current if (current is not None and m == 0) else history.value(s)
                   for m, s in enumerate(times)]
        return self.from_samples(times, samples)


def estimate_amplitude(history: HistoryBuffer, t, k, estimator: AmplitudeEstimator):
    """Amplitude estimate ``A_k(t)`` for 1-based node ``k``."""
    return float(estimator(history, t)[k - 1])


def carrier_frequency(model: NetworkModel, sf: SlowFlowModel | None = None):
    sf = sf or make_slow_flow(model)
    return sf.omega


def excitation(t, config: ScenarioConfig, carrier=None):
    """Force vector at fast time ``t``."""
    net = config.network
    freq = config.burst_frequency or carrier or carrier_frequency(net)
    if net.epsilon * t > config.burst_duration or t < 0:
        return np.zeros(net.n_nodes)
    return net.epsilon * config.burst_f * math.sin(freq * t)


def initial_displacement(config: ScenarioConfig):
    """``u(0)``: zero, or uniform noise on ``[-a, a]`` drawn from the seeded generator."""
    n = config.network.n_nodes
    if config.noise == 0:
        return np.zeros(n)
    rng = np.random.default_rng(config.seed)
    return rng.uniform(-config.noise, config.noise, size=n)


def default_dt(carrier):
    return 2 * math.pi / carrier / 100


class _Dynamics:
    """Right-hand side pieces shared by :func:`step` and :func:`run_scenario`."""

    def __init__(self, config: ScenarioConfig, sf: SlowFlowModel, carrier):
        net = config.network
        self.net = net
        self.sf = sf
        self.K = net.stiffness
        self.eps = net.epsilon
        self.qi = net.qi
        self.large = sf.regime == LARGE
        self.linear = np.array([k for k in range(net.n_nodes) if k != net.qi], dtype=int)
        self.rate = net.epsilon / config.tau if config.rate_law else 0.0
        self.delta = config.delta
        self.f = net.epsilon * config.burst_f
        self.freq = config.burst_frequency or carrier
        self.burst_end = config.burst_duration / net.epsilon

    def target(self, amps):
        sf = self.sf
        tgt = (self.delta + sf.p2 * sf.nu + sf.p2 * sf.p2 * sf.eta * amps * amps / 8.0) / sf.weight_sum
        tgt[self.qi] = 0.0
        return tgt

    def damping(self, u, z):
        c = np.empty_like(u)
        if self.large:
            c[self.linear] = 1.0 / (self.eps * self.eps * z[self.linear])
        else:
            c[self.linear] = z[self.linear]
        c[self.qi] = nonlinear_damping(u[self.qi], self.net.nu, self.net.eta)
        return c

    def force(self, t):
        if 0 <= t <= self.burst_end:
            return self.f * math.sin(self.freq * t)
        return None

    def __call__(self, t, u, v, z, tgt):
        acc = -self.eps * self.damping(u, z) * v - self.K @ u
        F = self.force(t)
        if F is not None:
            acc += F
        dz = self.rate * (tgt - z)
        dz[self.qi] = 0.0
        return v, acc, dz


def _rk4(dyn: _Dynamics, t, u, v, z, tgt, h):
    a1, b1, c1 = dyn(t, u, v, z, tgt)
    a2, b2, c2 = dyn(t + h / 2, u + h / 2 * a1, v + h / 2 * b1, z + h / 2 * c1, tgt)
    a3, b3, c3 = dyn(t + h / 2, u + h / 2 * a2, v + h / 2 * b2, z + h / 2 * c2, tgt)
    a4, b4, c4 = dyn(t + h, u + h * a3, v + h * b3, z + h * c3, tgt)
    return (u + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4),
            v + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4),
            z + h / 6 * (c1 + 2 * c2 + 2 * c3 + c4))


def step(state, history: HistoryBuffer, config: ScenarioConfig, t, dt, sf=None,
         estimator=None):
    """Advance ``(u, u_dot, zeta)`` by one RK4 step with delays frozen at ``t``.

    The amplitude estimates entering the rate law are evaluated once from the
    history at the start of the step. ``history`` must already hold the state
    at ``t``; the new state is appended to it.
    """
    net = config.network
    sf = sf or make_slow_flow(net)
    estimator = estimator or AmplitudeEstimator(net, sf)
    n = net.n_nodes
    state = np.asarray(state, dtype=float)
    u, v, z = state[:n], state[n:2 * n], state[2 * n:]
    dyn = _Dynamics(config, sf, sf.omega)
    amps = estimator(history, t, current=u)
    u, v, z = _rk4(dyn, t, u, v, z, dyn.target(amps), dt)
    new = np.concatenate([u, v, z])
    if not np.all(np.isfinite(new)):
        raise IntegrationDiverged(f"non-finite state after t={t}", last_good_time=t)
    history.append(u, v)
    return new


def integrate_frozen(model: NetworkModel, zetas, u0, v0, dt, n_steps):
    """Fixed-step RK4 with the linear damping values held at ``zetas``.

    No forcing and no rate law, so it works for any network size including a
    lone nonlinear node. Returns ``(t, u, v)`` at every step.
    """
    n = model.n_nodes
    x = np.concatenate([np.asarray(u0, float), np.asarray(v0, float), np.asarray(zetas, float)])
    if x.shape != (3 * n,):
        raise ValidationError("u0, v0 and zetas must have one entry per node")
    out = np.empty((n_steps + 1, 3 * n))
    out[0] = x
    f = lambda t, y: full_rhs(t, y, model)  # noqa: E731
    for i in range(n_steps):
        t = i * dt
        k1 = f(t, x)
        k2 = f(t + dt / 2, x + dt / 2 * k1)
        k3 = f(t + dt / 2, x + dt / 2 * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[i + 1] = x
    return np.arange(n_steps + 1) * dt, out[:, :n], out[:, n:2 * n]


def default_thresholds(config: ScenarioConfig, sf: SlowFlowModel) -> Thresholds:
    try:
        activation = 1.2 * trigger_threshold(sf, config.delta)
    except NoThreshold:
        activation = 0.5 * bifurcation_values(sf).a_sn
    return Thresholds(
        activation=activation,
        zeta_rest=sf.p2 * sf.nu + config.delta,
        zeta_band=2 * config.delta,
        burst_end=config.burst_duration / config.network.epsilon,
        window=2 * math.pi / sf.omega,
    )


def run_scenario(config: ScenarioConfig, thresholds: Thresholds | None = None) -> SimulationTrace:
    """Integrate the closed-loop network to ``t_end`` and classify the outcome."""
    net = config.network
    basis = None if net.regime == LARGE else modal_decompose(net)
    sf = make_slow_flow(net, basis)
    carrier = sf.omega
    dt = config.dt or default_dt(carrier)
    if dt > 2 * math.pi / carrier / 40 * (1 + 1e-12):
        raise ValidationError(f"dt={dt} exceeds a fortieth of the carrier period")
    n = net.n_nodes
    n_steps = int(round(config.t_end / net.epsilon / dt))
    estimator = AmplitudeEstimator(net, sf)
    history = HistoryBuffer(n, dt, estimator.window)
    dyn = _Dynamics(config, sf, carrier)
    thresholds = thresholds or default_thresholds(config, sf)

    u = initial_displacement(config)
    v = np.zeros(n)
    z = rest_zetas(sf, config.delta) if config.zetas0 is None else np.array(config.zetas0, float)
    z[net.qi] = 0.0
    history.append(u, v)

    n_samples = n_steps // config.sample_every + 1
    rec_t = np.empty(n_samples)
    rec = {key: np.empty((n_samples, n)) for key in ("u", "v", "zeta", "A")}
    offsets = estimator.offsets
    diverged = None
    j = 0
    for i in range(n_steps + 1):
        t = i * dt
        times = t - offsets
        samples = [u, history.value(times[1]), history.value(times[2]), history.value(times[3])]
        amps = estimator.from_samples(times, samples)
        if i % config.sample_every == 0:
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v)) and np.all(np.isfinite(z))):
                diverged = t
                break
            rec_t[j] = t
            rec["u"][j], rec["v"][j], rec["zeta"][j], rec["A"][j] = u, v, z, amps
            j += 1
        if i == n_steps:
            break
        u, v, z = _rk4(dyn, t, u, v, z, dyn.target(amps), dt)
        history.append(u, v)

    trace = SimulationTrace(
        t=rec_t[:j], u=rec["u"][:j], v=rec["v"][:j], zeta=rec["zeta"][:j], A=rec["A"][:j],
        weights=sf.weights.copy(),
        meta={
            "regime": net.regime,
            "carrier": carrier,
            "dt": dt,
            "epsilon": net.epsilon,
            "delta": config.delta,
            "tau": config.tau,
            "q": net.q,
            "mode": sf.mode,
            "sample_every": config.sample_every,
            "thresholds": thresholds.as_dict(),
        },
    )
    if diverged is not None:
        trace.meta["outcome"] = None
        raise IntegrationDiverged(f"non-finite state at t={diverged}",
                                  last_good_time=float(trace.t[-1]) if j else 0.0,
                                  partial=trace)
    trace.meta["outcome"] = classify_trace(trace, thresholds).value
    return trace


def classify_trace(trace: SimulationTrace, thresholds: Thresholds) -> Outcome:
    """Label a finished trace.

    Hysteretic: the peak estimate exceeds the activation threshold after the
    burst, every estimate stays below ``quiescence_fraction * peak`` over the
    final carrier period, and the aggregate damping ends within the band
    around its rest value. Activation without that return is a persistent
    oscillation; no activation is quiescent.
    """
    amax = trace.A.max(axis=1) if trace.A.size else np.zeros(0)
    after = trace.t >= thresholds.burst_end
    if not np.any(after) or amax[after].max(initial=0.0) <= thresholds.activation:
        return Outcome.QUIESCENT
    peak = amax.max()
    tail = trace.t >= trace.t[-1] - thresholds.window
    quiet = np.all(amax[tail] < thresholds.quiescence_fraction * peak)
    zeta_end = float(trace.zeta_aggregate[-1])
    settled = abs(zeta_end - thresholds.zeta_rest) <= thresholds.zeta_band
    return Outcome.HYSTERETIC if quiet and settled else Outcome.PERSISTENT


def project_modal_amplitude(trace: SimulationTrace, omega, k, points=DENSE_POINTS, at=None):
    """Sliding one-period projection ``|<u_k, exp(j omega t)>|``.

    Uses a dense periodic quadrature on Hermite-interpolated samples, with
    zero displacement assumed before the first sample. Evaluated at the
    trace times, or at the fast times ``at`` when given.
    """
    t = trace.t
    uk = trace.u[:, k - 1]
    vk = trace.v[:, k - 1]
    period = 2 * math.pi / omega
    offsets = np.arange(points) * period / points
    times = t if at is None else np.atleast_1d(np.asarray(at, dtype=float))
    out = np.zeros(len(times))
    for i, ti in enumerate(times):
        s = ti - offsets
        vals = _hermite_eval(t, uk, vk, s)
        out[i] = abs(np.sum(vals * np.exp(1j * omega * s))) * 2.0 / points
    return out


def _hermite_eval(t, y, dy, s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s >= t[0]) & (s <= t[-1])
    if len(t) < 2:
        return out
    x = s[inside]
    i = np.clip(np.searchsorted(t, x, side="right") - 1, 0, len(t) - 2)
    h = t[i + 1] - t[i]
    r = (x - t[i]) / h
    r2, r3 = r * r, r * r * r
    out[inside] = ((2 * r3 - 3 * r2 + 1) * y[i] + (r3 - 2 * r2 + r) * h * dy[i]
                   + (-2 * r3 + 3 * r2) * y[i + 1] + (r3 - r2) * h * dy[i + 1])
    return out
