"""Independent ground truth for the channel problem.

Stationary part: Numerov integration of u'' = (V + l(l+1)/r^2 - E) u for phase
shifts and bound states. Time-dependent part: Crank-Nicolson realisation of
exp(iTH) exp(-iTH0) on a uniform radial grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy.optimize import brentq

from .grids import RadialGrid, GridError, riccati_j, riccati_y, riccati_j_deriv, riccati_y_deriv
from .potentials import Potential, evaluate, evaluate_outside

# one-sided 7-point first-derivative stencil (order 6), nodes x_N-6 .. x_N
_D1_BACKWARD = np.array([1 / 6, -6 / 5, 15 / 4, -20 / 3, 15 / 2, -6, 49 / 20])


class OracleError(RuntimeError):
    """Matching or resolution failure in the radial oracle."""


class ThresholdStateError(OracleError):
    """The zero-energy solution counts a level the energy scan cannot resolve (E ~ 0)."""

    def __init__(self, msg: str, energies: np.ndarray):
        super().__init__(msg)
        self.energies = energies


@dataclass(frozen=True)
class PhaseShiftTable:
    ell: int
    k: np.ndarray
    delta: np.ndarray
    r_match: float

    @property
    def s(self) -> np.ndarray:
        return np.exp(2j * self.delta)


@dataclass(frozen=True)
class BoundStateReport:
    ell: int
    count: int
    energies: np.ndarray
    method: str = "numerov-shooting"

    def __post_init__(self):
        e = np.asarray(self.energies)
        if e.size != self.count:
            raise ValueError("count must equal the number of energies")
        if np.any(e >= 0) or np.any(np.diff(e) <= 0):
            raise ValueError("energies must be negative and strictly ascending")


def _uniform_step(grid: RadialGrid) -> float:
    if grid.scheme != "uniform_trapezoid":
        raise GridError("the Numerov oracle needs a uniform grid")
    return grid.step


def matching_index(p: Potential, grid: RadialGrid) -> int:
    """Index of the first node at or beyond the effective support of V."""
    h = _uniform_step(grid)
    r_m = max(p.support_radius, 8 * h)
    i = int(math.ceil(r_m / h - 1e-9)) - 1
    if i >= grid.n:
        raise GridError(f"grid ends at {grid.r_max} inside the support radius {r_m:.3g}")
    return i


def numerov_regular(p: Potential, ell: int, energies, grid: RadialGrid, n_steps: int | None = None):
    """Regular solutions u(r_i; E) at nodes r_1..r_n (columns follow ``energies``).

    Normalised as u ~ r^(l+1) near the origin. Started from a four-term series;
    potential jumps at grid nodes are crossed by a Taylor restart so the scheme
    keeps its fourth-order global accuracy.
    """
    h = _uniform_step(grid)
    energies = np.atleast_1d(np.asarray(energies, dtype=float))
    n = grid.n if n_steps is None else n_steps
    r = grid.nodes[:n]
    cent = ell * (ell + 1) / r ** 2
    v_in = evaluate(p, r)
    v_out = evaluate_outside(p, r)
    f_in = (v_in + cent)[:, None] - energies[None, :]
    f_out = (v_out + cent)[:, None] - energies[None, :]

    c0, c1, c2 = p.taylor0()
    v0 = c0 - energies
    a2 = v0 / (2 * (2 * ell + 3))
    a3 = c1 / (3 * (2 * ell + 4)) * np.ones_like(energies)
    a4 = (v0 * a2 + c2) / (4 * (2 * ell + 5))

    def series(x):
        return x ** (ell + 1) * (1 + a2 * x ** 2 + a3 * x ** 3 + a4 * x ** 4)

    u = np.empty((n, energies.size))
    u[0], u[1] = series(r[0]), series(r[1])
    breaks = {grid.index_of(b) for b in p.breakpoints if b < r[-1] - 0.5 * h}
    g_in = 1 - h * h * f_in / 12
    g_out = 1 - h * h * f_out / 12
    # summed form: w = g u, dw_n = dw_(n-1) + h^2 f_n u_n, which keeps the
    # roundoff growth linear in the number of steps
    g_prev = g_in[0]
    dw = g_in[1] * u[1] - g_prev * u[0]
    w = g_in[1] * u[1]
    i = 1
    while i < n - 1:
        if i in breaks:
            # restart across the jump: derivative from the inside, Taylor step outside
            du = _D1_BACKWARD @ u[i - 6:i + 1] / h
            fo = f_out[i]
            dfo = (-3 * f_out[i] + 4 * f_out[i + 1] - f_out[i + 2]) / (2 * h)
            d2fo = (2 * f_out[i] - 5 * f_out[i + 1] + 4 * f_out[i + 2] - f_out[i + 3]) / h ** 2
            u2 = fo * u[i]
            u3 = dfo * u[i] + fo * du
            u4 = d2fo * u[i] + 2 * dfo * du + fo * u2
            u5 = 3 * d2fo * du + 3 * dfo * u2 + fo * u3
            u[i + 1] = u[i] + h * du + h ** 2 / 2 * u2 + h ** 3 / 6 * u3 + h ** 4 / 24 * u4 + h ** 5 / 120 * u5
            w = g_out[i + 1] * u[i + 1]
            dw = w - g_out[i] * u[i]
            i += 1
            continue
        dw = dw + h * h * f_in[i] * u[i]
        w = w + dw
        u[i + 1] = w / g_in[i + 1]
        i += 1
    return u


def _value_and_slope(u: np.ndarray, i: int, h: float):
    return u[i], _D1_BACKWARD @ u[i - 6:i + 1] / h


def _unwrap_from_top(delta_mod: np.ndarray) -> np.ndarray:
    """Continuous branch anchored at the largest k (|delta| < pi/2 there)."""
    out = np.array(delta_mod, dtype=float)
    for i in range(out.size - 2, -1, -1):
        d = (delta_mod[i] - out[i + 1] + math.pi / 2) % math.pi - math.pi / 2
        if abs(d) > 0.4 * math.pi:
            raise OracleError(f"k grid too coarse to unwrap the phase near k={i}")
        out[i] = out[i + 1] + d
    return out


def phase_shifts(p: Potential, ell: int, k_nodes, grid: RadialGrid, unwrap: bool = True) -> PhaseShiftTable:
    """delta_l(k) by matching the Numerov solution at the edge of the support.

    The branch is fixed by |delta(k_max)| < pi/2 and continuity in k.
    """
    k = np.asarray(k_nodes, dtype=float)
    if np.any(k <= 0) or np.any(np.diff(k) <= 0):
        raise ValueError("k_nodes must be positive and increasing")
    h = _uniform_step(grid)
    kappa_max = math.sqrt(k[-1] ** 2 + max(0.0, -float(np.min(evaluate(p, grid.nodes)))))
    if 2 * math.pi / (kappa_max * h) < 10:
        raise GridError(f"step {h:g} gives fewer than 10 nodes per period at k={kappa_max:.3g}")
    im = matching_index(p, grid)
    r_m = grid.nodes[im]
    u = numerov_regular(p, ell, k ** 2, grid, n_steps=im + 1)
    val, slope = _value_and_slope(u, im, h)
    x = k * r_m
    num = k * riccati_j_deriv(ell, x) * val - riccati_j(ell, x) * slope
    den = k * riccati_y_deriv(ell, x) * val - riccati_y(ell, x) * slope
    if np.any(np.hypot(num, den) < 1e-300):
        raise OracleError("degenerate matching (zero Wronskian)")
    delta = np.arctan(num / den)
    if unwrap and k.size > 1:
        delta = _unwrap_from_top(delta)
    return PhaseShiftTable(ell, k, delta, float(r_m))


def regular_amplitude(p: Potential, ell: int, k, grid: RadialGrid):
    """(u, delta, alpha, r_m) with u ~ alpha [j^(kr) cos d - y^(kr) sin d] beyond r_m."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    h = _uniform_step(grid)
    im = matching_index(p, grid)
    r_m = grid.nodes[im]
    u = numerov_regular(p, ell, k ** 2, grid, n_steps=im + 1)
    val, slope = _value_and_slope(u, im, h)
    x = k * r_m
    jj, yy = riccati_j(ell, x), riccati_y(ell, x)
    jd, yd = k * riccati_j_deriv(ell, x), k * riccati_y_deriv(ell, x)
    delta = np.arctan2(jd * val - jj * slope, yd * val - yy * slope)
    # arctan2 picks the branch with alpha > 0 or < 0; fold so alpha carries the sign
    c, s = np.cos(delta), np.sin(delta)
    free = jj * c - yy * s
    dfree = jd * c - yd * s
    alpha = np.where(np.abs(free) > np.abs(dfree) / np.maximum(k, 1e-300),
                     val / np.where(free == 0, 1, free), slope / np.where(dfree == 0, 1, dfree))
    return u, delta, alpha, float(r_m)


# --- bound states -----------------------------------------------------------


def _modified_riccati_k(ell: int, x):
    """x k_l(x) (decaying) and its derivative; scipy's k_l carries a pi/2 factor we drop."""
    kl = special.spherical_kn(ell, x)
    dkl = special.spherical_kn(ell, x, derivative=True)
    return x * kl, kl + x * dkl


def _bound_mismatch(p, ell, energies, grid, im):
    h = grid.step
    energies = np.atleast_1d(energies)
    u = numerov_regular(p, ell, energies, grid, n_steps=im + 1)
    val, slope = _value_and_slope(u, im, h)
    q = np.sqrt(-energies)
    r_m = grid.nodes[im]
    kh, dkh = _modified_riccati_k(ell, q * r_m)
    d = slope * kh - q * dkh * val
    return d / np.hypot(np.abs(slope * kh), np.abs(q * dkh * val) + 1e-300)


def _zero_energy_nodes(p, ell, grid, im) -> int:
    u = numerov_regular(p, ell, [0.0], grid, n_steps=im + 1)[:, 0]
    inner = int(np.count_nonzero(np.signbit(u[1:]) != np.signbit(u[:-1])))
    val, slope = _value_and_slope(u[:, None], im, grid.step)
    r_m = grid.nodes[im]
    # exterior A r^(l+1) + B r^-l through (val, slope)
    a = (slope[0] * r_m + ell * val[0]) / ((2 * ell + 1) * r_m ** (ell + 1))
    b = (val[0] - a * r_m ** (ell + 1)) * r_m ** ell
    extra = 1 if a != 0 and -b / a > r_m ** (2 * ell + 1) else 0
    return inner + extra


def bound_states(p: Potential, ell: int, grid: RadialGrid, decay_margin: float = 8.0) -> BoundStateReport:
    """Bound levels in channel l by shooting against the exact exterior decay.

    The count comes from the nodes of the zero-energy solution; each level is
    bracketed on a dense scan and polished with brentq.
    """
    if p.is_zero:
        return BoundStateReport(ell, 0, np.array([]))
    im = matching_index(p, grid)
    n_expected = _zero_energy_nodes(p, ell, grid, im)
    if n_expected == 0:
        return BoundStateReport(ell, 0, np.array([]))
    v_min = float(np.min(evaluate(p, grid.nodes[: im + 1])))
    roots: list[float] = []
    for n_scan in (2000, 8000, 32000):
        # scan in q = sqrt(-E) so shallow levels are resolved
        q = np.linspace(math.sqrt(-v_min), 0.0, n_scan + 1)[:-1][::-1]
        q = q[q > 0]
        e = -(q ** 2)
        d = _bound_mismatch(p, ell, e, grid, im)
        idx = np.nonzero(np.signbit(d[1:]) != np.signbit(d[:-1]))[0]
        if len(idx) >= n_expected:
            roots = [
                brentq(lambda x: float(_bound_mismatch(p, ell, x, grid, im)[0]), e[i], e[i + 1],
                       xtol=1e-14, rtol=1e-14)
                for i in idx
            ]
            break
    if len(roots) == n_expected - 1:
        raise ThresholdStateError("one level sits at threshold, below the scan resolution",
                                  np.sort(np.asarray(roots)))
    if len(roots) != n_expected:
        raise OracleError(f"found {len(roots)} levels, node count says {n_expected}")
    energies = np.sort(np.asarray(roots))
    q_min = math.sqrt(-energies[-1])
    if q_min * grid.r_max < decay_margin:
        raise OracleError(
            f"r_max={grid.r_max} too small: shallowest level E={energies[-1]:.3g} decays only "
            f"by exp(-{q_min * grid.r_max:.2f}); need exp(-{decay_margin})"
        )
    return BoundStateReport(ell, len(roots), energies)


# --- time-dependent realisation of the strong limit --------------------------


class ReflectionError(OracleError):
    """The propagated packet reached the artificial boundary at r_max."""


@dataclass(frozen=True, eq=False)
class Wavepacket:
    grid: RadialGrid
    values: np.ndarray
    ell: int
    norm: float = 1.0

    def __post_init__(self):
        if abs(self.grid.norm(self.values) - 1.0) > 1e-12:
            raise ValueError("wavepacket must have unit norm on its grid")

    @classmethod
    def normalized(cls, grid: RadialGrid, values: np.ndarray, ell: int) -> tuple["Wavepacket", float]:
        """Unit-norm packet and the factor it was divided by."""
        values = np.asarray(values, dtype=complex)
        nrm = grid.norm(values)
        if nrm == 0:
            raise ValueError("zero wavepacket")
        return cls(grid, values / nrm, ell), nrm


@dataclass(frozen=True)
class TimeDependentResult:
    values: np.ndarray
    values_half: np.ndarray
    t_max: float
    dt: float
    indicator: float
    norm: float
    edge_fraction: float


def _fd_hamiltonian(p: Potential | None, ell: int, grid: RadialGrid):
    """Three-point finite-difference -d^2/dr^2 + l(l+1)/r^2 (+ V), Dirichlet at 0 and r_max + h."""
    from scipy import sparse

    h = _uniform_step(grid)
    r = grid.nodes
    diag = 2.0 / h ** 2 + ell * (ell + 1) / r ** 2
    if p is not None and not p.is_zero:
        # average the one-sided values at a jump so the error stays O(h^2);
        # snap nodes that miss a breakpoint only by rounding
        rv = r.copy()
        for b in p.breakpoints:
            rv[np.abs(rv - b) <= 1e-8 * h] = b
        diag = diag + 0.5 * (evaluate(p, rv) + evaluate_outside(p, rv))
    off = np.full(r.size - 1, -1.0 / h ** 2)
    return sparse.diags([off, diag, off], [-1, 0, 1], format="csc")


class _CrankNicolson:
    """psi -> (1 + i dt H/2)^-1 (1 - i dt H/2) psi with the implicit factor prefactorised."""

    def __init__(self, H, dt: float):
        from scipy import sparse
        from scipy.sparse.linalg import splu

        eye = sparse.identity(H.shape[0], format="csc")
        self.explicit = (eye - 0.5j * dt * H).tocsr()
        self.solver = splu((eye + 0.5j * dt * H).tocsc())

    def step(self, psi: np.ndarray) -> np.ndarray:
        return self.solver.solve(self.explicit @ psi)


def _edge_fraction(psi: np.ndarray, w: np.ndarray, n_edge: int) -> float:
    return float(np.sqrt(np.sum(w[-n_edge:] * np.abs(psi[-n_edge:]) ** 2)))


def time_dependent_waveop(p: Potential, psi: Wavepacket, t_max: float, dt: float,
                          edge_tol: float = 1e-6) -> TimeDependentResult:
    """exp(-i t_max H) exp(i t_max H0) psi, i.e. exp(iTH) exp(-iTH0) psi at T = -t_max.

    Both factors use Crank-Nicolson on the same finite-difference grid. A
    Cayley step is f(H) with f monotone, so the discrete wave operator is that
    of the grid Hamiltonians; using the same scheme for H and H0 keeps their
    dispersion errors from accumulating in t. The indicator is
    ||result(T) - result(T/2)||.
    """
    grid = psi.grid
    n_steps = int(round(t_max / dt))
    if n_steps < 2 or n_steps % 2:
        raise ValueError("t_max/dt must be an even integer >= 2")
    w = grid.weights
    n_edge = max(8, grid.n // 20)
    free = _CrankNicolson(_fd_hamiltonian(None, psi.ell, grid), -dt)  # backward in time
    full = _CrankNicolson(_fd_hamiltonian(p, psi.ell, grid), dt)
    edge = 0.0
    state = psi.values.copy()
    half_state = None
    for i in range(1, n_steps + 1):
        state = free.step(state)
        if i % 10 == 0:
            edge = max(edge, _edge_fraction(state, w, n_edge))
        if i == n_steps // 2:
            half_state = state.copy()
    for i in range(1, n_steps // 2 + 1):
        half_state = full.step(half_state)
    for i in range(1, n_steps + 1):
        state = full.step(state)
        if i % 10 == 0:
            edge = max(edge, _edge_fraction(state, w, n_edge))
    if edge > edge_tol:
        raise ReflectionError(
            f"packet weight {edge:.2e} reached the boundary region near r_max={grid.r_max}; increase r_max")
    return TimeDependentResult(state, half_state, float(t_max), float(dt),
                               grid.norm(state - half_state), grid.norm(state), edge)


def converge_time_dependent(p: Potential, psi: Wavepacket, t_start: float, dt: float,
                            tol: float = 1e-4, t_cap: float = 256.0) -> TimeDependentResult:
    """Double t_max from ``t_start`` until the Cauchy indicator drops below ``tol``."""
    t = t_start
    while True:
        res = time_dependent_waveop(p, psi, t, dt)
        if res.indicator < tol:
            return res
        t *= 2
        if t > t_cap:
            raise OracleError(f"no convergence up to t_max={t_cap}: indicator {res.indicator:.2e}")
