"""Three realisations of W- per channel in the F0 representation.

* exact factorisation:  F0 (W- - 1) F0* = -2 pi i M (theta(A+) x 1) B
* formula:              1 + theta(A+) (S - 1)        (differs by a compact K)
* eigenfunction oracle: F0 W- F0* phi = F0 int psi+_lam phi(lam) dlam, with
  psi+ from the Numerov regular solution and no T-matrix involved.

Matrices act on spectral values phi(lam_j); the L^2(dlam) inner product uses
the weights lam_j h of the log grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dilation import MellinMultiplier, band_limited_refine, dilate, dilation_operator, theta_multiplier
from .grids import GridError, LogEnergyGrid, RadialGrid, make_radial_grid, riccati_h_out, riccati_j
from .lippmann_schwinger import BOperatorChannel, UNIT_TOL, build_B, ls_grid
from .potentials import Potential, evaluate
from .radial_oracle import ReflectionError, Wavepacket, bound_states, regular_amplitude, time_dependent_waveop
from .spectral_transform import CHANNEL_CONST, MOperatorChannel, analyze, build_M, kernel, log_gaussian, synthesize

EXACT = "exact_factorization"
FORMULA = "ra_formula"
EIGEN = "eigenfunction_oracle"
TIME_DEPENDENT = "time_dependent_oracle"
W_PLUS = "w_plus"


@dataclass(frozen=True, eq=False)
class WaveOperatorChannel:
    ell: int
    grid_E: LogEnergyGrid
    tag: str
    matrix: np.ndarray | None
    applier: Callable[[np.ndarray], np.ndarray] | None = None
    diagnostics: dict = field(default_factory=dict)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix @ v
        if np.ndim(v) == 2:
            return np.stack([self.applier(col) for col in v.T], axis=1)
        return self.applier(v)

    def weighted(self) -> np.ndarray:
        """D^1/2 W D^-1/2 with D = diag(lam h): the l^2 form whose norms are L^2(dlam) norms."""
        if self.matrix is None:
            raise ValueError(f"{self.tag} is only available as an action on vectors")
        return weighted_form(self.matrix, self.grid_E)


def weighted_form(a: np.ndarray, grid_E: LogEnergyGrid) -> np.ndarray:
    sw = np.sqrt(grid_E.weights)
    return sw[:, None] * a / sw[None, :]


# --- packets ---------------------------------------------------------------------


def packet_corpus(grid_E: LogEnergyGrid, count: int = 6, width: float = 0.3, seed: int = 20240607,
                  quartiles: tuple[float, float] = (0.25, 0.75)) -> np.ndarray:
    """Gaussians in ln(lam) with centres drawn (fixed seed) from the middle quartiles; rows have unit norm."""
    rng = np.random.default_rng(seed)
    x = grid_E.log_nodes
    lo = x[0] + quartiles[0] * (x[-1] - x[0])
    hi = x[0] + quartiles[1] * (x[-1] - x[0])
    # stratified draw: one centre per sub-interval keeps the corpus spread out
    edges = np.linspace(lo, hi, count + 1)
    centres = edges[:-1] + rng.uniform(0, 1, count) * np.diff(edges)
    return normalized_packets(grid_E, np.exp(centres), width)


def normalized_packets(grid_E: LogEnergyGrid, centres, width: float) -> np.ndarray:
    rows = []
    for c in np.atleast_1d(centres):
        v = log_gaussian(grid_E, float(c), width).astype(complex)
        rows.append(v / grid_E.norm(v))
    return np.array(rows)


def dilated_family(grid_E: LogEnergyGrid, f0: np.ndarray, n_max: int, step: int = 4) -> np.ndarray:
    """f_n = U+_(n h0) f0 with h0 = ``step`` grid steps (exact grid shifts)."""
    return np.array([dilate(grid_E, f0, n * step) for n in range(n_max + 1)])


# --- exact factorisation and the formula ------------------------------------------


def pairing_matrix(M_op: MOperatorChannel, B_op: BOperatorChannel) -> np.ndarray:
    """P[m, n] = lam_m^(-1/4) F0(lam_m) . lam_n^(1/4) T(lam_n) F0(lam_n)*."""
    if not M_op.grid_E.same_as(B_op.grid_E):
        raise GridError("M and B live on different energy grids")
    if M_op.grid_r.n != B_op.grid_r.n or not np.allclose(M_op.grid_r.nodes, B_op.grid_r.nodes, rtol=0, atol=0):
        raise GridError("M and B live on different radial grids")
    return M_op.rows @ B_op.columns.T


def _theta_matrix(theta: MellinMultiplier, grid_E: LogEnergyGrid) -> np.ndarray:
    if not theta.grid.same_as(grid_E):
        raise GridError("multiplier and operators live on different energy grids")
    return dilation_operator(theta, "padded").matrix


def assemble_exact(ell: int, M_op: MOperatorChannel, theta: MellinMultiplier,
                   B_op: BOperatorChannel) -> WaveOperatorChannel:
    """1 - 2 pi i M (theta(A+) x 1) B as a matrix on the energy grid.

    Entry (m, n) is -2 pi i Theta[m, n] P[m, n]: theta(A+) acts on the energy
    variable of the vector-valued function n -> b_n phi_n before M pairs it
    with the functional at lam_m.
    """
    grid_E = B_op.grid_E
    P = pairing_matrix(M_op, B_op)
    W = np.eye(grid_E.n) - 2j * math.pi * _theta_matrix(theta, grid_E) * P
    return WaveOperatorChannel(ell, grid_E, EXACT, W, diagnostics={"s": B_op.s, "pairing_diag": np.diag(P)})


def check_unimodular(s: np.ndarray) -> None:
    dev = float(np.max(np.abs(np.abs(s) - 1))) if np.size(s) else 0.0
    if dev > UNIT_TOL:
        raise ValueError(f"s values are not unimodular (max ||s| - 1| = {dev:.2e})")


def assemble_ra_formula(ell: int, s_values: np.ndarray, theta: MellinMultiplier) -> WaveOperatorChannel:
    """1 + theta(A+) (S - 1)."""
    s_values = np.asarray(s_values, dtype=complex)
    check_unimodular(s_values)
    grid_E = theta.grid
    W = np.eye(grid_E.n) + _theta_matrix(theta, grid_E) * (s_values - 1)[None, :]
    return WaveOperatorChannel(ell, grid_E, FORMULA, W, diagnostics={"s": s_values})


@dataclass(frozen=True, eq=False)
class RemainderReport:
    ell: int
    K: np.ndarray
    singular_values: np.ndarray
    decay: np.ndarray  # ||K f_n|| for n = 0..n_max

    @property
    def relative_singular_values(self) -> np.ndarray:
        s = self.singular_values
        return s / s[0] if s.size and s[0] > 0 else np.zeros_like(s)

    def decay_ok(self, start: int = 2) -> bool:
        d = self.decay
        if d.size < start + 4:
            return False
        return bool(np.all(np.diff(d[start:]) < 0) and d[start + 3] < 0.5 * d[start])


def singular_values(a: np.ndarray, grid_E: LogEnergyGrid) -> np.ndarray:
    return np.linalg.svd(weighted_form(a, grid_E), compute_uv=False)


def extract_remainder(exact: WaveOperatorChannel, formula: WaveOperatorChannel,
                      packets: np.ndarray) -> RemainderReport:
    """K = exact - formula, its singular values, and ||K f_n|| over the dilated family ``packets``."""
    if not exact.grid_E.same_as(formula.grid_E):
        raise GridError("realisations on different energy grids")
    K = exact.matrix - formula.matrix
    gE = exact.grid_E
    decay = np.array([gE.norm(K @ f) for f in packets])
    return RemainderReport(exact.ell, K, singular_values(K, gE), decay)


def assemble_w_plus(w_minus: WaveOperatorChannel, s_values: np.ndarray) -> WaveOperatorChannel:
    """W+ = W- S* in the F0 representation."""
    s_values = np.asarray(s_values, dtype=complex)
    check_unimodular(s_values)
    W = w_minus.matrix * np.conj(s_values)[None, :]
    return WaveOperatorChannel(w_minus.ell, w_minus.grid_E, W_PLUS, W, diagnostics={"from": w_minus.tag})


def complement_formula(s_values: np.ndarray, theta: MellinMultiplier) -> np.ndarray:
    """1 + (1 - theta(A+)) (S* - 1)."""
    grid_E = theta.grid
    comp = np.eye(grid_E.n) - _theta_matrix(theta, grid_E)
    return np.eye(grid_E.n) + comp * (np.conj(s_values) - 1)[None, :]


def w_plus_remainder(w_plus: WaveOperatorChannel, s_values: np.ndarray, theta: MellinMultiplier) -> np.ndarray:
    """K' = W+ - [1 + (1 - theta(A+))(S* - 1)]."""
    return w_plus.matrix - complement_formula(s_values, theta)


# --- the channel problem end to end ------------------------------------------------


@dataclass(frozen=True, eq=False)
class ChannelProblem:
    """Everything the exact and formula realisations need for one (potential, l, grids)."""

    potential: Potential
    ell: int
    grid_E: LogEnergyGrid
    grid_r: RadialGrid
    theta: MellinMultiplier
    M_op: MOperatorChannel
    B_op: BOperatorChannel

    @property
    def s(self) -> np.ndarray:
        return self.B_op.s


def channel_problem(p: Potential, ell: int, grid_E: LogEnergyGrid, t_weight: float | None = None,
                    panel: float | None = None) -> ChannelProblem:
    grid_r = ls_grid(p, grid_E.lam_max, panel)
    t = p.sigma_eff / 2 if t_weight is None else t_weight
    B_op = build_B(p, ell, grid_E, grid_r, t)
    M_op = build_M(ell, grid_r, grid_E, t)
    return ChannelProblem(p, ell, grid_E, grid_r, theta_multiplier(grid_E), M_op, B_op)


def potential_matrix(p: Potential, ell: int, grid_E: LogEnergyGrid, grid_r: RadialGrid) -> np.ndarray:
    """F0(lam_m) V F0(lam_n)* (kernel in lam; multiply by weights lam_n h to act)."""
    F = kernel(ell, grid_E.nodes, grid_r.nodes)
    return (F * (grid_r.weights * evaluate(p, grid_r.nodes))[None, :]) @ F.T


def isometry_defect(W: WaveOperatorChannel, packets: np.ndarray) -> float:
    gE = W.grid_E
    return float(max(abs(gE.norm(W.apply(v)) / gE.norm(v) - 1) for v in packets))


def intertwining_defect(W: WaveOperatorChannel, packets: np.ndarray, vmat: np.ndarray) -> float:
    """max_v ||(Lam + F0 V F0*) W v - W Lam v|| / ||v||."""
    gE = W.grid_E
    lam = gE.nodes
    out = 0.0
    for v in packets:
        wv = W.apply(v)
        lhs = lam * wv + vmat @ (gE.weights * wv)
        rhs = W.apply(lam * v)
        out = max(out, gE.norm(lhs - rhs) / gE.norm(v))
    return float(out)


# --- eigenfunction oracle ----------------------------------------------------------


def _simpson_weights(n_intervals: int, h: float) -> np.ndarray:
    if n_intervals % 2:
        raise GridError("Simpson's rule needs an even number of intervals")
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return w * h / 3


def _numerov_grid(p: Potential, step: float) -> tuple[RadialGrid, int]:
    """Uniform grid whose matching node sits exactly at the support radius, at an even index."""
    R = p.support_radius
    n_int = 2 * max(4, int(math.ceil(R / (2 * step))))
    h = R / n_int
    grid = make_radial_grid(n_int, n_int * h, "uniform_trapezoid", p.breakpoints)
    return grid, n_int


def _significant(phi: np.ndarray, rel: float = 1e-13) -> slice:
    mag = np.abs(phi)
    idx = np.nonzero(mag > rel * mag.max())[0]
    return slice(int(idx[0]), int(idx[-1]) + 1)


def eigenfunction_apply(p: Potential, ell: int, grid_E: LogEnergyGrid, phi: np.ndarray,
                        step: float = 0.01, outer_panel: float = 0.25, tail_tol: float = 1e-7) -> np.ndarray:
    """(F0 W- F0* phi)(lam_m) from outgoing scattering solutions.

    psi+_lam = c(lam) e^(i delta) u_reg / alpha inside the support, and
    c(lam) [j^ + ((s - 1)/2i) h+] outside, with c = (4 lam)^(-1/4) sqrt(2/pi).
    The result is phi + F0 u_sc, u_sc = int (psi+_lam - F0(lam)*) phi(lam) dlam.
    """
    phi = np.asarray(phi, dtype=complex)
    if p.is_zero:
        return phi.copy()
    sl = _significant(phi)
    lam = grid_E.nodes[sl]
    k = np.sqrt(lam)
    a = grid_E.weights[sl] * phi[sl] * CHANNEL_CONST * lam ** -0.25

    grid, n_int = _numerov_grid(p, step)
    u, delta, alpha, r_m = regular_amplitude(p, ell, k, grid)
    r_in = grid.nodes[: u.shape[0]]
    if u.shape[0] != n_int or abs(r_m - p.support_radius) > 1e-9 * max(1.0, r_m):
        raise GridError("matching node is not at the support radius")
    e = np.exp(1j * delta)
    inner = (u * (e / alpha)[None, :] - riccati_j(ell, np.outer(r_in, k))) @ a
    r_in = np.concatenate([[0.0], r_in])
    inner = np.concatenate([[0.0], inner])
    w_in = _simpson_weights(n_int, grid.step)

    # outer packet: Gaussian-like in r with width ~ 1/sigma_k; stay well below the
    # aliasing radius 2 pi/(k h) of the lam-sum
    wts = np.abs(phi[sl]) ** 2 * grid_E.weights[sl]
    k_mean = float(np.sum(wts * k) / np.sum(wts))
    sigma_k = float(np.sqrt(np.sum(wts * (k - k_mean) ** 2) / np.sum(wts)))
    r_big = r_m + 10.0 / sigma_k
    if r_big > 0.9 * 2 * math.pi / (k_mean * grid_E.step):
        raise GridError("packet too narrow in energy for this log-grid step (lam-sum would alias)")
    n_panels = max(1, int(math.ceil((r_big - r_m) / outer_panel)))
    og = make_radial_grid(16 * n_panels, r_big - r_m, "gauss_legendre_composite")
    r_out = r_m + og.nodes
    coef = a * e * np.sin(delta)
    outer = riccati_h_out(ell, np.outer(r_out, k)) @ coef
    tail = np.max(np.abs(outer[int(0.8 * outer.size):]))
    scale = max(np.max(np.abs(outer)), np.max(np.abs(inner)))
    if tail > tail_tol * scale:
        raise GridError(f"scattered packet not contained in r < {r_big:.3g} (tail {tail / scale:.1e})")

    lam_all = grid_E.nodes
    k_all = np.sqrt(lam_all)
    c_all = CHANNEL_CONST * lam_all ** -0.25
    out = phi.copy()
    out += c_all * (riccati_j(ell, np.outer(k_all, r_in)) @ (w_in * inner))
    out += c_all * (riccati_j(ell, np.outer(k_all, r_out)) @ (og.weights * outer))
    return out


def eigenfunction_waveop(ell: int, p: Potential, grid_E: LogEnergyGrid, step: float = 0.01,
                         check_spectrum: bool = True) -> WaveOperatorChannel:
    """W- from scattering solutions (an action on vectors; no matrix is formed)."""
    if check_spectrum and not p.is_zero:
        bs_grid = make_radial_grid(int(round(40.0 / 0.005)), 40.0, "uniform_trapezoid", p.breakpoints)
        report = bound_states(p, ell, bs_grid)
        if report.count and np.max(report.energies) >= grid_E.lam_min:
            raise ValueError("an eigenvalue lies inside the energy window")

    def applier(v):
        return eigenfunction_apply(p, ell, grid_E, v, step)

    return WaveOperatorChannel(ell, grid_E, EIGEN, None, applier, {"step": step})


# --- time-dependent oracle pushed to the F0 side -----------------------------------


@dataclass(frozen=True)
class TimeDependentApplication:
    values: np.ndarray  # F0 W- F0* phi on grid_E
    indicator: float
    t_max: float
    norm: float


def time_dependent_apply(p: Potential, ell: int, grid_E: LogEnergyGrid, phi: np.ndarray,
                         step: float = 0.005, dt: float = 0.02, t_start: float = 2.0,
                         tol: float = 1e-4, t_cap: float = 256.0) -> TimeDependentApplication:
    """Sample F0* phi on a uniform grid, propagate, and transform back with F0.

    t_max starts at ``t_start`` and doubles until ||result(T) - result(T/2)||
    < tol; r_max grows with t_max so the packet never reaches the boundary.
    """
    phi = np.asarray(phi, dtype=complex)
    if p.is_zero:
        return TimeDependentApplication(phi.copy(), 0.0, 0.0, grid_E.norm(phi))
    sl = _significant(phi, 1e-12)
    lam = grid_E.nodes[sl]
    k_hi = float(np.sqrt(lam[-1]))
    k_lo = float(np.sqrt(lam[0]))
    wts = np.abs(phi[sl]) ** 2 * grid_E.weights[sl]
    k_mean = float(np.sum(wts * np.sqrt(lam)) / np.sum(wts))
    sigma_k = float(np.sqrt(np.sum(wts * (np.sqrt(lam) - k_mean) ** 2) / np.sum(wts)))
    radius0 = p.support_radius + 10.0 / sigma_k
    t = t_start
    margin = 2.2
    while True:
        # the packet spreads to ~ 2 k t; leave room for the fastest significant component
        r_max = radius0 + margin * k_hi * t + 10.0
        n = int(math.ceil(r_max / step))
        grid = make_radial_grid(n, n * step, "uniform_trapezoid")
        # a lam-sum on the log grid aliases beyond r ~ 2 pi/(k h); refine phi first
        factor = 1
        while 2 * math.pi / (k_hi * grid_E.step / factor) < 2 * grid.r_max:
            factor *= 2
        lam_f, phi_f = band_limited_refine(grid_E, phi, factor)
        keep = (lam_f >= lam[0]) & (lam_f <= lam[-1])
        w_f = lam_f[keep] * grid_E.step / factor
        psi0 = synthesize(ell, lam_f[keep], w_f * phi_f[keep], grid.nodes)
        packet, scale = Wavepacket.normalized(grid, psi0, ell)
        try:
            # a boundary weight w perturbs the result by ~ sqrt(w); keep it below tol^2
            res = time_dependent_waveop(p, packet, t, dt, edge_tol=min(1e-6, 0.01 * tol * tol))
        except ReflectionError:
            margin *= 1.5
            if margin > 8:
                raise
            continue
        if res.indicator < tol:
            break
        t *= 2
        if t > t_cap:
            raise RuntimeError(f"time-dependent propagation did not converge by t_max={t_cap}")
    values = scale * analyze(ell, grid_E.nodes, grid.nodes, grid.weights * res.values)
    return TimeDependentApplication(values, res.indicator, res.t_max, res.norm)
