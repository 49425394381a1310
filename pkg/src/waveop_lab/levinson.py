"""Levinson's theorem per channel: delta_l(0+) - delta_l(inf) = pi N_l."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .grids import make_radial_grid
from .lippmann_schwinger import ls_grid, s_matrix_channel
from .potentials import Potential, evaluate
from .radial_oracle import (BoundStateReport, OracleError, PhaseShiftTable, ThresholdStateError, bound_states,
                            phase_shifts)

CLEAN = "clean"
SUSPECTED_RESONANCE = "suspected_resonance"
TOP_TOL = 0.05


@dataclass(frozen=True)
class LevinsonReport:
    ell: int
    winding: float
    bound_count: int
    defect: float
    threshold_flag: str
    windings_at_kmin: tuple[float, ...] = ()

    @property
    def ok(self) -> bool:
        return self.threshold_flag == CLEAN and abs(self.defect) < 0.05


def _extrapolate_to_zero(k: np.ndarray, w: np.ndarray) -> float:
    """Value at k = 0 of the quadratic through three (k, w) points (Richardson for uneven steps)."""
    return float(np.polyval(np.polyfit(k, w, 2), 0.0))


def check_levinson(p: Potential, ell: int, table: PhaseShiftTable, bs: BoundStateReport,
                   n_kmin: int = 3) -> LevinsonReport:
    """Winding (delta(k_min) - delta(k_max))/pi, extrapolated to k_min -> 0, against the bound-state count.

    Nodes near k_min, 2 k_min and 4 k_min serve as the k_min values. A threshold
    resonance is suspected, and the extrapolation not trusted, when their
    windings spread by more than 0.1 or when |tan delta(k_min)| > 0.1, i.e. the
    scattering length is so large that k_min is not yet in the threshold regime
    (an s-wave zero-energy resonance leaves a winding near N + 1/2 there).
    """
    d = np.asarray(table.delta)
    if d.size < n_kmin + 1:
        raise ValueError("phase table too short")
    if abs(d[-1]) >= TOP_TOL:
        raise ValueError(f"|delta(k_max)| = {abs(d[-1]):.3f} rad is not below {TOP_TOL}")
    jumps = np.abs(np.diff(d))
    if np.any(jumps >= math.pi / 2):
        raise OracleError("phase branch not resolved (jump >= pi/2 between nodes)")
    # k_min, 2 k_min, 4 k_min, ... (nearest nodes) keep the extrapolation well conditioned
    idx = sorted({int(np.argmin(np.abs(table.k - table.k[0] * 2 ** i))) for i in range(n_kmin)})
    if len(idx) < n_kmin or table.k[idx[-1]] > 0.5 * table.k[-1]:
        raise ValueError("phase table does not resolve the low-momentum end")
    k3 = table.k[idx]
    w3 = (d[idx] - d[-1]) / math.pi
    winding = _extrapolate_to_zero(k3, w3) if n_kmin >= 3 else float(w3[0])
    spread = float(np.max(w3) - np.min(w3))
    unresolved = abs(math.tan(d[0])) > 0.1
    flag = SUSPECTED_RESONANCE if spread > 0.1 or unresolved else CLEAN
    return LevinsonReport(ell, winding, bs.count, winding - bs.count, flag, tuple(float(x) for x in w3))


def k_max_for(p: Potential, target: float = 0.04) -> float:
    """Momentum beyond which the Born estimate |int V| / (2k) drops below ``target``."""
    if p.is_zero:
        return 5.0
    r = np.linspace(0.0, p.support_radius, 4001)
    integral = abs(np.trapezoid(evaluate(p, r), r))
    return max(5.0, integral / (2 * target))


def levinson_k_nodes(p: Potential, k_min: float = 1e-3, n: int = 600) -> np.ndarray:
    return np.geomspace(k_min, k_max_for(p), n)


def numerov_table(p: Potential, ell: int, k_nodes: np.ndarray, nodes_per_period: int = 40) -> PhaseShiftTable:
    """Numerov phases on a uniform grid sized for the largest momentum."""
    v_depth = max(0.0, -float(np.min(evaluate(p, np.linspace(0, p.support_radius or 1.0, 2001)))))
    kappa = math.sqrt(float(k_nodes[-1]) ** 2 + v_depth)
    step = min(1e-3, 2 * math.pi / (kappa * nodes_per_period))
    R = max(p.support_radius, 1.0)
    n = int(math.ceil(R / step))
    # keep breakpoints on nodes
    n = max(n, 16)
    grid = make_radial_grid(n, R, "uniform_trapezoid", p.breakpoints)
    return phase_shifts(p, ell, k_nodes, grid)


def bound_report(p: Potential, ell: int, r_max: float = 40.0, step: float = 0.005,
                 r_cap: float = 1280.0) -> BoundStateReport:
    """Bound states in a box that doubles until the shallowest level has decayed inside it."""
    while True:
        grid = make_radial_grid(int(round(r_max / step)), r_max, "uniform_trapezoid", p.breakpoints)
        try:
            return bound_states(p, ell, grid)
        except ThresholdStateError:
            raise
        except OracleError:
            if 2 * r_max > r_cap:
                raise
            r_max *= 2


def winding_from_lippmann_schwinger(p: Potential, ell: int, k_nodes: np.ndarray) -> np.ndarray:
    """delta_l(k) = arg(s_l)/2 with a radial grid matched to each momentum, unwrapped from the top."""
    from .radial_oracle import _unwrap_from_top

    raw = []
    for k in k_nodes:
        grid = ls_grid(p, max(k * k, 1.0))
        raw.append(0.5 * np.angle(s_matrix_channel(p, ell, np.array([k * k]), grid)[0]))
    raw = np.asarray(raw)
    return _unwrap_from_top(raw)


def levinson_channel(p: Potential, ell: int, k_nodes: np.ndarray | None = None) -> LevinsonReport:
    if p.is_zero:
        return LevinsonReport(ell, 0.0, 0, 0.0, CLEAN)
    k_nodes = levinson_k_nodes(p) if k_nodes is None else k_nodes
    table = numerov_table(p, ell, k_nodes)
    try:
        bs = bound_report(p, ell)
    except ThresholdStateError as err:
        bs = BoundStateReport(ell, err.energies.size, err.energies)
        rep = check_levinson(p, ell, table, bs)
        return dataclasses.replace(rep, threshold_flag=SUSPECTED_RESONANCE)
    return check_levinson(p, ell, table, bs)
