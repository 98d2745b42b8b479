"""Pseudo-arclength continuation of equilibria and periodic orbits.

Damping is frozen during continuation: the linear nodes carry fixed physical
damping coefficients set by a :class:`ParameterSpec`, so the rate law plays
no part. Periodic orbits are found by single shooting with a batched
fixed-step RK4 flow map; stability comes from Floquet multipliers of the
finite-difference monodromy matrix.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BranchStalled,
    HystnetError,
    NoConvergence,
    SeedFailure,
    ValidationError,
)
from .network import NetworkModel, modal_decompose
from .slowflow import mu_asymptotes

HOPF = "Hopf"
SADDLE_NODE = "SaddleNode"


# ---------------------------------------------------------------- corrector

def _fd_jacobian(fun, x, f0=None, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((np.asarray(fun(xp)) - np.asarray(fun(xm))) / (2 * h))
    return np.column_stack(cols)


def newton_corrector(residual, guess, tol=1e-9, max_iter=25, jacobian=None):
    """Newton's method on a square system.

    ``jacobian(x)`` may return either the Jacobian or a pair
    ``(residual, jacobian)``; without it, central differences are used.
    Returns ``(x, iterations)``.
    """
    x = np.array(guess, dtype=float)
    r = np.atleast_1d(np.asarray(residual(x), dtype=float))
    for it in range(max_iter + 1):
        norm = float(np.linalg.norm(r, np.inf))
        if not np.isfinite(norm):
            raise NoConvergence("residual became non-finite", residual_norm=norm)
        if norm <= tol:
            return x, it
        if it == max_iter:
            break
        if jacobian is None:
            J = _fd_jacobian(residual, x)
        else:
            J = jacobian(x)
            if isinstance(J, tuple):
                r, J = J
        try:
            dx = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            raise NoConvergence("singular Jacobian", residual_norm=norm,
                                condition=float(np.linalg.cond(J))) from None
        cond = None
        if not np.all(np.isfinite(dx)):
            cond = float(np.linalg.cond(J))
            raise NoConvergence("singular Jacobian", residual_norm=norm, condition=cond)
        x = x + dx
        r = np.atleast_1d(np.asarray(residual(x), dtype=float))
    raise NoConvergence(f"no convergence after {max_iter} iterations",
                        residual_norm=float(np.linalg.norm(r, np.inf)))


# ---------------------------------------------------------------- data types

@dataclass(frozen=True)
class ParameterSpec:
    """Maps the scalar continuation parameter onto physical linear damping.

    ``kind="uniform"`` sets every linear node to ``mu``; ``kind="node"``
    sets only ``node`` (1-based) and takes the others from ``template``.
    """

    kind: str = "uniform"
    node: int | None = None
    template: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "node"):
            raise ValidationError(f"unknown parameter kind {self.kind!r}")
        if self.kind == "node" and self.node is None:
            raise ValidationError("node parameter needs a node index")

    @classmethod
    def parse(cls, text, template=None):
        """``"mu"`` or ``"zeta_<k>"``."""
        text = text.strip()
        if text in ("mu", "uniform"):
            return cls("uniform", template=template)
        if text.startswith("zeta_"):
            try:
                k = int(text[5:])
            except ValueError:
                raise ValidationError(f"bad parameter spec {text!r}") from None
            return cls("node", node=k, template=template)
        raise ValidationError(f"bad parameter spec {text!r}")

    def damping(self, model: NetworkModel, mu):
        """Physical damping vector; the entry at Q is ignored."""
        n = model.n_nodes
        if self.kind == "uniform":
            c = np.full(n, float(mu))
        else:
            if not 1 <= self.node <= n or self.node == model.q:
                raise ValidationError("free node must be a linear node")
            c = np.ones(n) if self.template is None else np.array(self.template, dtype=float)
            if c.shape != (n,):
                raise ValidationError("damping template must have one entry per node")
            c[self.node - 1] = mu
        c[model.qi] = 0.0
        return c

    def slope(self, model: NetworkModel):
        """Derivative of the damping vector with respect to the parameter."""
        return self.damping(model, 1.0) - self.damping(model, 0.0)


@dataclass
class BifurcationPoint:
    kind: str
    param: float
    state: np.ndarray
    frequency: float
    period: float | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class BranchPoint:
    param: float
    state: np.ndarray
    period: float
    stable: bool
    max_u: np.ndarray
    spectrum: np.ndarray
    tangent: np.ndarray | None = None


@dataclass
class Branch:
    kind: str
    points: list = field(default_factory=list)
    events: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def params(self):
        return np.array([p.param for p in self.points])

    @property
    def periods(self):
        return np.array([p.period for p in self.points])

    @property
    def stable(self):
        return np.array([p.stable for p in self.points], dtype=bool)

    @property
    def max_u(self):
        return np.array([p.max_u for p in self.points])

    def event_rows(self):
        for ev in self.events:
            yield ev.kind, ev.param, ev.frequency


# ---------------------------------------------------------------- vector field

class FrozenSystem:
    """The network ODE at fixed damping, vectorized over a batch of states.

    ``x`` has shape ``(B, 2N)`` and ``mu`` shape ``(B,)``.
    """

    def __init__(self, model: NetworkModel, spec: ParameterSpec):
        self.model = model
        self.spec = spec
        self.n = model.n_nodes
        self.KT = model.stiffness.T.copy()
        self.eps = model.epsilon
        self.qi = model.qi
        self.base = spec.damping(model, 0.0)
        self.slope = spec.slope(model)

    def damping(self, u, mu):
        c = self.base[None, :] + mu[:, None] * self.slope[None, :]
        uq2 = u[:, self.qi] ** 2
        c[:, self.qi] = -self.model.nu - self.model.eta * uq2 + self.model.eta * uq2 * uq2
        return c

    def rhs(self, x, mu):
        n = self.n
        u, v = x[:, :n], x[:, n:]
        acc = -self.eps * self.damping(u, mu) * v - u @ self.KT
        return np.concatenate([v, acc], axis=1)

    def stiffness_bound(self, mu_max):
        """Largest linear damping rate, used to keep RK4 inside its stability region."""
        c = np.abs(self.base + mu_max * self.slope)
        return self.eps * max(float(c.max(initial=0.0)), self.model.nu)

    def flow(self, x0, mu, T, steps):
        x = np.atleast_2d(np.asarray(x0, dtype=float)).copy()
        mu = np.broadcast_to(np.asarray(mu, dtype=float), (x.shape[0],)).copy()
        h = T / steps
        for _ in range(steps):
            k1 = self.rhs(x, mu)
            k2 = self.rhs(x + 0.5 * h * k1, mu)
            k3 = self.rhs(x + 0.5 * h * k2, mu)
            k4 = self.rhs(x + h * k3, mu)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        return x

    def linearization(self, mu):
        n = self.n
        jac = np.zeros((2 * n, 2 * n))
        jac[:n, n:] = np.eye(n)
        jac[n:, :n] = -self.model.stiffness
        c = self.base + mu * self.slope
        c[self.qi] = -self.model.nu
        jac[n:, n:] = -self.eps * np.diag(c)
        return jac


# ---------------------------------------------------------------- equilibria

def _unstable_count(sys, mu, tol=0.0):
    return int(np.sum(np.linalg.eigvals(sys.linearization(mu)).real > tol))


def continue_equilibria(model: NetworkModel, spec: ParameterSpec, mu_range, n_grid=200,
                        log_grid=None, bisect_tol=1e-8):
    """Trace the trivial equilibrium across ``mu_range`` and locate Hopf points.

    The zero state is confirmed with the corrector at every grid value; the
    stability count of the linearization is monitored and each change is
    bisected down to ``bisect_tol`` in the parameter.
    """
    lo, hi = map(float, mu_range)
    if not hi > lo:
        raise ValidationError("parameter range must be increasing")
    if log_grid is None:
        log_grid = lo > 0 and hi / lo > 50
    grid = np.geomspace(lo, hi, n_grid) if log_grid else np.linspace(lo, hi, n_grid)
    sys = FrozenSystem(model, spec)
    n = model.n_nodes
    branch = Branch("equilibrium", meta={"spec": spec.kind, "node": spec.node})
    counts = []
    for mu in grid:
        x, _ = newton_corrector(lambda y, m=mu: sys.rhs(y[None, :], np.array([m]))[0],
                                np.full(2 * n, 1e-3), tol=1e-12,
                                jacobian=lambda y, m=mu: sys.linearization(m))
        eig = np.linalg.eigvals(sys.linearization(mu))
        cnt = int(np.sum(eig.real > 0))
        counts.append(cnt)
        branch.points.append(BranchPoint(float(mu), x, math.nan, cnt == 0,
                                         np.abs(x[:n]), eig))
    for i in range(len(grid) - 1):
        if counts[i] == counts[i + 1]:
            continue
        a, b = grid[i], grid[i + 1]
        ca = counts[i]
        while b - a > bisect_tol * max(1.0, abs(a)):
            m = 0.5 * (a + b)
            if _unstable_count(sys, m) == ca:
                a = m
            else:
                b = m
        mu_h = 0.5 * (a + b)
        eig = np.linalg.eigvals(sys.linearization(mu_h))
        crit = eig[np.argmin(np.abs(eig.real) + (eig.imag <= 0) * 1e300)]
        branch.events.append(BifurcationPoint(
            HOPF, mu_h, np.zeros(2 * n), float(abs(crit.imag)),
            detail={"eigenvalue": complex(crit), "unstable_below": counts[i],
                    "unstable_above": counts[i + 1],
                    "boundary": min(counts[i], counts[i + 1]) == 0},
        ))
    return branch


# ---------------------------------------------------------------- periodic orbits

@dataclass
class PeriodicSeed:
    state: np.ndarray
    period: float
    param: float
    direction: np.ndarray
    anchor: int
    amplitude: float


def _anchor_index(model, w):
    n = model.n_nodes
    vq = n + model.qi
    if abs(w[vq]) > 1e-8 * np.abs(w).max():
        return vq
    return n + int(np.argmax(np.abs(w[n:])))


def seed_periodic_orbit(hopf: BifurcationPoint, model: NetworkModel, spec: ParameterSpec,
                        a0=1e-3):
    """Linear cycle ``a0 * Re(w exp(j omega t))`` at a Hopf point.

    ``w`` is the critical eigenvector scaled to unit largest displacement
    entry and rotated so that the anchor velocity vanishes at ``t = 0`` with
    a positive displacement at the nonlinear node.
    """
    if not a0 > 0:
        raise SeedFailure("seed amplitude must be positive")
    sys = FrozenSystem(model, spec)
    n = model.n_nodes
    eigval, eigvec = np.linalg.eig(sys.linearization(hopf.param))
    score = np.abs(eigval.imag - hopf.frequency) + np.abs(eigval.real)
    i = int(np.argmin(score + (eigval.imag <= 0) * 1e300))
    lam, w = eigval[i], eigvec[:, i]
    if abs(lam.imag) < 1e-10:
        raise SeedFailure("crossing eigenvalue is real")
    umax = np.abs(w[:n]).max()
    if umax < 1e-14:
        raise SeedFailure("degenerate eigenvector")
    w = w / w[:n][np.argmax(np.abs(w[:n]))]
    anchor = _anchor_index(model, w)
    w = w * np.exp(1j * (math.pi / 2 - np.angle(w[anchor])))
    ref = model.qi if abs(w[model.qi]) > 1e-8 else int(np.argmax(np.abs(w[:n])))
    if w[ref].real < 0:
        w = -w
    direction = w.real / np.linalg.norm(w.real)
    state = a0 * w.real
    return PeriodicSeed(state, 2 * math.pi / abs(lam.imag), hopf.param, direction, anchor, a0)


def shooting_residual(model, spec, state, period, param, steps=256, anchor=None):
    """Return-map residual ``phi_T(x0) - x0`` followed by the anchor velocity."""
    sys = FrozenSystem(model, spec)
    anchor = model.n_nodes + model.qi if anchor is None else anchor
    end = sys.flow(state, param, period, steps)[0]
    return np.concatenate([end - state, [state[anchor]]])


class _Shooting:
    def __init__(self, sys: FrozenSystem, anchor, steps, param_scale, fd_step=1e-7):
        self.sys = sys
        self.anchor = anchor
        self.steps = steps
        self.scale = param_scale
        self.fd = fd_step
        self.dim = 2 * sys.n

    def unpack(self, X):
        return X[:self.dim], X[self.dim], X[self.dim + 1] * self.scale

    def residual(self, X):
        x0, T, mu = self.unpack(X)
        end = self.sys.flow(x0, mu, T, self.steps)[0]
        return np.concatenate([end - x0, [x0[self.anchor]]])

    def jacobian(self, X):
        """Residual and its Jacobian; columns by forward differences of the flow map."""
        x0, T, mu = self.unpack(X)
        d = self.dim
        h = self.fd
        batch = np.repeat(x0[None, :], d + 2, axis=0)
        mus = np.full(d + 2, mu)
        batch[1:d + 1] += h * np.eye(d)
        hp = h * max(1.0, abs(mu))
        mus[d + 1] += hp
        ends = self.sys.flow(batch, mus, T, self.steps)
        end = ends[0]
        J = np.zeros((d + 1, d + 2))
        J[:d, :d] = (ends[1:d + 1] - end).T / h
        monodromy = J[:d, :d].copy()
        J[:d, :d] -= np.eye(d)
        J[:d, d] = self.sys.rhs(end[None, :], np.array([mu]))[0]
        J[:d, d + 1] = (ends[d + 1] - end) / hp * self.scale
        J[d, self.anchor] = 1.0
        r = np.concatenate([end - x0, [x0[self.anchor]]])
        return r, J, monodromy, end


def floquet_multipliers(monodromy):
    """Multipliers with the trivial one (closest to +1) removed."""
    mult = np.linalg.eigvals(monodromy)
    drop = int(np.argmin(np.abs(mult - 1.0)))
    return np.delete(mult, drop)


def _tangent(J, previous=None):
    _, _, vt = np.linalg.svd(J)
    t = vt[-1]
    if previous is not None and np.dot(t, previous) < 0:
        t = -t
    return t / np.linalg.norm(t)


def continue_periodic(model: NetworkModel, seed: PeriodicSeed, spec: ParameterSpec, mu_range,
                      ds=0.02, ds_min=1e-5, ds_max=0.2, max_points=400, steps=None,
                      param_scale=None, tol=1e-9, max_iter=8, amplitude_cap=50.0,
                      stop_after_fold=False):
    """Follow the periodic branch born at ``seed`` with pseudo-arclength steps.

    Unknowns are the initial state, the period and the scaled parameter
    ``mu / param_scale``. Saddle-node events are flagged where the parameter
    component of the tangent changes sign and placed at the vertex of the
    parabola through the three surrounding points.
    """
    lo, hi = map(float, mu_range)
    sys = FrozenSystem(model, spec)
    n = model.n_nodes
    d = 2 * n
    scale = float(param_scale or max(1.0, abs(seed.param)))
    if steps is None:
        rate = sys.stiffness_bound(max(abs(hi), abs(lo)))
        steps = max(256, int(math.ceil(2.0 * seed.period * rate)))
    shoot = _Shooting(sys, seed.anchor, steps, scale)

    def augmented(X, Xp, t):
        r, J, mono, end = shoot.jacobian(X)
        ra = np.concatenate([r, [np.dot(X - Xp, t)]])
        Ja = np.vstack([J, t])
        return ra, Ja, mono

    # first point: amplitude along the seed direction pinned at a0
    X = np.concatenate([seed.state, [seed.period, seed.param / scale]])
    pin = np.concatenate([seed.direction, [0.0, 0.0]])
    X, mono = _correct(lambda Y: _pinned(shoot, Y, pin, seed.amplitude), X, tol, max_iter * 2)
    _, J, mono, _ = shoot.jacobian(X)
    t = _tangent(J)
    if np.dot(t[:d], seed.direction) < 0:
        t = -t

    branch = Branch("periodic", meta={"steps": steps, "param_scale": scale,
                                      "anchor": seed.anchor, "spec": spec.kind,
                                      "node": spec.node})
    branch.points.append(_make_point(shoot, X, mono, t))
    while len(branch.points) < max_points:
        Xp = X + ds * t
        try:
            Xn, mono, iters = _correct_arclength(augmented, Xp, t, tol, max_iter)
        except (NoConvergence, FloatingPointError):
            ds *= 0.5
            if ds < ds_min:
                branch.meta["stalled"] = True
                if len(branch.points) < 3:
                    raise BranchStalled(f"corrector failed near mu={X[-1] * scale}") from None
                break
            continue
        _, J, mono, _ = shoot.jacobian(Xn)
        tn = _tangent(J, t)
        X, t = Xn, tn
        point = _make_point(shoot, X, mono, t)
        branch.points.append(point)
        _check_fold(branch, shoot)
        if iters <= 3:
            ds = min(ds * 1.3, ds_max)
        mu = point.param
        if not (lo <= mu <= hi) or point.max_u.max() > amplitude_cap:
            break
        if point.period > 20 * seed.period:
            break
        if stop_after_fold and branch.events and len(branch.points) > branch.events[0].detail["index"] + 5:
            break
    return branch


def _pinned(shoot, Y, pin, a0):
    r, J, mono, _ = shoot.jacobian(Y)
    ra = np.concatenate([r, [np.dot(Y, pin) - a0]])
    return ra, np.vstack([J, pin]), mono


def _correct(system, X, tol, max_iter):
    for _ in range(max_iter):
        r, J, mono = system(X)
        if np.linalg.norm(r, np.inf) <= tol:
            return X, mono
        X = X - np.linalg.solve(J, r)
    r, J, mono = system(X)
    if np.linalg.norm(r, np.inf) <= tol:
        return X, mono
    raise SeedFailure(f"seed correction failed, residual {np.linalg.norm(r, np.inf):.3e}")


def _correct_arclength(augmented, Xp, t, tol, max_iter):
    X = Xp.copy()
    prev = math.inf
    for it in range(max_iter):
        r, J, mono = augmented(X, Xp, t)
        norm = float(np.linalg.norm(r, np.inf))
        if not np.isfinite(norm) or norm > 10 * prev:
            raise NoConvergence("corrector diverged", residual_norm=norm)
        if norm <= tol:
            return X, mono, it
        prev = norm
        X = X - np.linalg.solve(J, r)
    r, _, mono = augmented(X, Xp, t)
    norm = float(np.linalg.norm(r, np.inf))
    if norm <= tol:
        return X, mono, max_iter
    raise NoConvergence("corrector did not converge", residual_norm=norm)


def _make_point(shoot, X, monodromy, tangent):
    x0, T, mu = shoot.unpack(X)
    n = shoot.sys.n
    mult = floquet_multipliers(monodromy)
    stable = bool(np.all(np.abs(mult) < 1.0))
    samples = [x0]
    y = x0[None, :]
    sub = max(1, shoot.steps // 64)
    for _ in range(64):
        y = shoot.sys.flow(y, mu, T / 64, sub)
        samples.append(y[0])
    samples = np.array(samples)
    return BranchPoint(float(mu), x0.copy(), float(T), stable,
                       np.abs(samples[:, :n]).max(axis=0), mult, tangent.copy())


def _check_fold(branch, shoot):
    pts = branch.points
    if len(pts) < 3:
        return
    a, b = pts[-2].tangent[-1], pts[-1].tangent[-1]
    if a * b >= 0:
        return
    p0, p1, p2 = pts[-3], pts[-2], pts[-1]
    # parabola in arclength-like coordinate through the three parameter values
    s = np.cumsum([0.0, np.linalg.norm(_vec(p1) - _vec(p0)), np.linalg.norm(_vec(p2) - _vec(p1))])
    mus = np.array([p0.param, p1.param, p2.param])
    c = np.polyfit(s, mus, 2)
    if c[0] != 0:
        s_star = -c[1] / (2 * c[0])
        mu_star = float(np.polyval(c, np.clip(s_star, s[0], s[-1])))
    else:
        mu_star = p1.param
    near = p1
    branch.events.append(BifurcationPoint(
        SADDLE_NODE, mu_star, near.state.copy(), 2 * math.pi / near.period, near.period,
        detail={"index": len(pts) - 2,
                "multipliers_before": p0.spectrum, "multipliers_after": p2.spectrum,
                "max_u": near.max_u},
    ))


def _vec(p):
    return np.concatenate([p.state, [p.period, p.param]])


# ---------------------------------------------------------------- two-parameter map

@dataclass
class TwoParameterMap:
    eps: np.ndarray
    hopf: list
    saddle_node: list
    asymptotes: object
    fold_eps: float | None = None
    gaps: list = field(default_factory=list)

    @staticmethod
    def _polylines(events):
        by_rank = {}
        for eps in sorted({e[0] for e in events}):
            row = sorted(e for e in events if e[0] == eps)
            for r, e in enumerate(row):
                by_rank.setdefault(r, []).append(e)
        return [np.array(v) for _, v in sorted(by_rank.items())]

    @property
    def hopf_curves(self):
        """Polylines ``(eps, mu, freq)`` grouped by rank in ``mu`` at each eps."""
        return self._polylines(self.hopf)

    @property
    def sn_curves(self):
        return self._polylines(self.saddle_node)

    def event_rows(self):
        for eps, mu, freq in self.hopf:
            yield HOPF, eps, mu, freq
        for eps, mu, freq in self.saddle_node:
            yield SADDLE_NODE, eps, mu, freq


def sweep_epsilon(model: NetworkModel, eps, spec: ParameterSpec, mu_range, n_grid=160,
                  periodic=True, max_points=300):
    """Events at one value of epsilon: boundary Hopf points and folds of their branches."""
    m = model.replace(epsilon=float(eps))
    eq = continue_equilibria(m, spec, mu_range, n_grid=n_grid)
    hopf = [ev for ev in eq.events if ev.detail.get("boundary")]
    hopf_rows = [(float(eps), ev.param, ev.frequency) for ev in hopf]
    sn_rows, gaps = [], []
    if periodic:
        for ev in hopf:
            try:
                seed = seed_periodic_orbit(ev, m, spec)
                br = continue_periodic(m, seed, spec, mu_range, max_points=max_points,
                                       stop_after_fold=True)
            except HystnetError as exc:
                gaps.append((float(eps), ev.param, f"{type(exc).__name__}: {exc}"))
                continue
            sn_rows += [(float(eps), e.param, e.frequency) for e in br.events
                        if e.kind == SADDLE_NODE][:1]
    return hopf_rows, sn_rows, gaps


def _sweep_task(args):
    return sweep_epsilon(*args)


def two_parameter_map(model: NetworkModel, eps_grid, spec: ParameterSpec | None = None,
                      mu_range=(0.1, 1000.0), n_grid=160, fold_bisections=0, workers=1,
                      max_points=300) -> TwoParameterMap:
    """Grid-and-sweep Hopf and saddle-node curves in the ``(eps, mu)`` plane.

    Each eps value is an independent sweep. Failures are recorded as gaps.
    With ``fold_bisections > 0`` the eps at which the saddle-node events
    disappear is bracketed on the grid and bisected.
    """
    spec = spec or ParameterSpec("uniform")
    eps_grid = np.asarray(sorted(float(e) for e in eps_grid))
    tasks = [(model, e, spec, mu_range, n_grid, True, max_points) for e in eps_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    hopf, sn, gaps = [], [], []
    for h, s, g in results:
        hopf += h
        sn += s
        gaps += g
    try:
        asym = mu_asymptotes(model, modal_decompose(model))
    except HystnetError:
        asym = None
    fold = None
    if fold_bisections > 0 and sn:
        has = [any(r[0] == e for r in sn) for e in eps_grid]
        for i in range(len(eps_grid) - 1):
            if has[i] and not has[i + 1]:
                a, b = eps_grid[i], eps_grid[i + 1]
                for _ in range(fold_bisections):
                    mid = 0.5 * (a + b)
                    _, s_mid, _ = sweep_epsilon(model, mid, spec, mu_range, n_grid,
                                                True, max_points)
                    if s_mid:
                        a = mid
                    else:
                        b = mid
                fold = 0.5 * (a + b)
                break
    return TwoParameterMap(eps_grid, sorted(hopf), sorted(sn), asym, fold, gaps)
