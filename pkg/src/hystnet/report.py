"""Ranking of nonlinear-node placements."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import HystnetError
from .network import NetworkModel, dominant_mode, modal_decompose
from .slowflow import (
    bifurcation_values,
    epsilon_max_estimate,
    make_small_damping_model,
    required_trigger_time,
)

DESIGN_COLUMNS = ["Q", "I", "omega_I", "zeta_HB", "zeta_SN", "eps_max_intersection",
                  "eps_max_estimate", "t_req", "error"]


@dataclass
class DesignRow:
    q: int
    mode: int | None = None
    omega: float = math.nan
    zeta_hb: float = math.nan
    zeta_sn: float = math.nan
    eps_intersection: float = math.nan
    eps_estimate: float = math.nan
    t_req: float = math.nan
    error: str = ""

    def as_list(self):
        return [self.q, self.mode if self.mode is not None else "", self.omega, self.zeta_hb,
                self.zeta_sn, self.eps_intersection, self.eps_estimate, self.t_req, self.error]


def _row(model: NetworkModel, q, delta, amplitude):
    row = DesignRow(q)
    try:
        m = model.replace(q=q)
        basis = modal_decompose(m)
        row.mode = dominant_mode(basis, q)
        sf = make_small_damping_model(basis, m)
        row.omega = sf.omega
        bv = bifurcation_values(sf)
        row.zeta_hb, row.zeta_sn = bv.zeta_hb, bv.zeta_sn
        est = epsilon_max_estimate(m, basis)
        row.eps_intersection, row.eps_estimate = est.intersection, est.estimate
        f = np.zeros(m.n_nodes)
        f[q - 1] = amplitude
        row.t_req = required_trigger_time(sf, f, delta)
    except HystnetError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def design_report(model: NetworkModel, delta=0.1, forcing_amplitude=3.0) -> list[DesignRow]:
    """One row per choice of nonlinear node, best first.

    Rows are ordered by estimated ``eps_max`` (descending), then by the
    burst time needed with ``forcing_amplitude`` applied at the nonlinear
    node (ascending). Rows whose construction failed sink to the bottom and
    carry the error text.
    """
    rows = [_row(model, q, delta, forcing_amplitude) for q in range(1, model.n_nodes + 1)]

    def key(r):
        # rounding lets symmetric placements tie and fall back to node order
        eps = round(r.eps_estimate, 10) if np.isfinite(r.eps_estimate) else -math.inf
        t = round(r.t_req, 8) if np.isfinite(r.t_req) else math.inf
        return (-eps, t, r.q)
    return sorted(rows, key=key)
