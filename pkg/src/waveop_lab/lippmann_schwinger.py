"""Partial-wave Lippmann-Schwinger solver: R0(lam+i0), T(lam+i0), s_l(lam) and B.

The outgoing free Green kernel of -d^2/dr^2 + l(l+1)/r^2 - k^2 is

    G(r, r') = (1/k) j^(k r<) h+(k r>),     h+ = -y^ + i j^,

so that Im G = (1/k) j^(kr) j^(kr') = pi F0(lam)(r) F0(lam)(r'). Applying it
to a sampled function requires the two running integrals int_0^r and
int_r^R; these are done with per-panel Gauss-Legendre indefinite-integration
matrices, which keeps the discretization spectrally accurate despite the kink
of G on the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as L
from scipy import linalg

from .grids import LogEnergyGrid, RadialGrid, GridError, make_radial_grid, riccati_j, riccati_y
from .potentials import Potential, evaluate
from .spectral_transform import CHANNEL_CONST

COND_LIMIT = 1e10
UNIT_TOL = 1e-7


class NearSingularError(ArithmeticError):
    """1 + R0 V is numerically singular at the requested energy."""


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense matrix acting on sampled values: (A f)_i = sum_j matrix[i, j] f_j."""

    matrix: np.ndarray
    row_grid: object
    col_grid: object
    description: str = ""


@lru_cache(maxsize=8)
def _reference_cumulative(order: int) -> np.ndarray:
    """S[m, n] = int_{-1}^{x_m} l_n(x) dx for the Lagrange basis on Legendre nodes."""
    x, _ = L.leggauss(order)
    vander = L.legvander(x, order - 1)
    integ = np.empty_like(vander)
    for k in range(order):
        c = np.zeros(order)
        c[k] = 1.0
        integ[:, k] = L.legval(x, L.legint(c, lbnd=-1))
    return np.linalg.solve(vander.T, integ.T).T


def cumulative_matrix(grid: RadialGrid) -> np.ndarray:
    """C[i, j] with sum_j C[i, j] f_j = int_0^{r_i} f for f polynomial on every panel."""
    if grid.scheme != "gauss_legendre_composite":
        raise GridError("the Green-kernel discretization needs a Gauss-Legendre composite grid")
    order = grid.n // (grid.panel_edges.size - 1)
    ref = _reference_cumulative(order)
    n = grid.n
    C = np.zeros((n, n))
    w = grid.weights
    for p, (a, b) in enumerate(zip(grid.panel_edges[:-1], grid.panel_edges[1:])):
        s = slice(p * order, (p + 1) * order)
        C[s, : p * order] = w[: p * order]
        C[s, s] = 0.5 * (b - a) * ref
    return C


def _check_lam(lam: float) -> float:
    if not lam > 0:
        raise ValueError(f"lam={lam}: the outgoing boundary value is only built for lam > 0")
    return math.sqrt(lam)


def _resolvent_matrix(ell: int, k: float, grid: RadialGrid, C: np.ndarray) -> np.ndarray:
    jr = riccati_j(ell, k * grid.nodes)
    yr = riccati_y(ell, k * grid.nodes)
    w = grid.weights
    CR = w[None, :] - C
    real = -(yr[:, None] * C * jr[None, :] + jr[:, None] * CR * yr[None, :]) / k
    return real + (1j / k) * np.outer(jr, w * jr)


def free_outgoing_resolvent(ell: int, lam: float, grid: RadialGrid) -> OperatorMatrix:
    """R0_l(lam + i0) acting on values on ``grid`` (functions supported in [0, r_max])."""
    k = _check_lam(lam)
    mat = _resolvent_matrix(ell, k, grid, cumulative_matrix(grid))
    return OperatorMatrix(mat, grid, grid, f"R0_{ell}({lam:g}+i0)")


def born_phase_shift(p: Potential, ell: int, k: float, grid: RadialGrid) -> float:
    """First-order phase shift -(1/k) int j^(kr)^2 V(r) dr."""
    jr = riccati_j(ell, k * grid.nodes)
    return float(-grid.integrate(jr ** 2 * evaluate(p, grid.nodes)) / k)


def born_from_kernel(p: Potential, ell: int, lam: float, grid: RadialGrid) -> float:
    """Born phase shift read off the imaginary (on-shell) part of the discretized R0.

    Uses Im R0 = (1/k) j^ j^T W, so <j^, V j^> = k * <e, Im R0 V e>-type pairing;
    agreement with ``born_phase_shift`` pins the kernel normalisation.
    """
    k = _check_lam(lam)
    R0 = free_outgoing_resolvent(ell, lam, grid).matrix
    v = evaluate(p, grid.nodes)
    jr = riccati_j(ell, k * grid.nodes)
    # Im(R0) V j^ = (1/k) j^ <j^, V j^>; project on j^ to read the scalar
    g = R0.imag @ (v * jr)
    coeff = (g @ jr) / (jr @ jr)
    return float(-coeff)


@dataclass(frozen=True, eq=False)
class TMatrixChannel:
    """T(lam+i0) in channel l; ``matrix`` is W^1/2 T(r_i, r_j) W^1/2 (symmetric)."""

    ell: int
    lam: float
    grid: RadialGrid
    matrix: np.ndarray
    condition: float
    psi: np.ndarray  # (1 + R0 V)^-1 j^ on the grid
    s: complex

    @property
    def symmetry_residual(self) -> float:
        n = np.linalg.norm(self.matrix)
        return float(np.linalg.norm(self.matrix - self.matrix.T) / n) if n else 0.0

    @property
    def delta(self) -> float:
        return 0.5 * float(np.angle(self.s))


def ls_grid(p: Potential, lam_max: float, panel: float | None = None) -> RadialGrid:
    """Composite Gauss-Legendre grid on [0, support] fine enough for k = sqrt(lam_max)."""
    R = p.support_radius if not p.is_zero else 1.0
    if panel is None:
        panel = min(0.25, 2.0 / math.sqrt(lam_max))
    n_panels = max(len(p.breakpoints) + 1, int(math.ceil(R / panel)))
    return make_radial_grid(16 * n_panels, R, "gauss_legendre_composite", p.breakpoints)


def _solve(ell, lam, grid, v, C):
    k = _check_lam(lam)
    w = grid.weights
    sw = np.sqrt(w)
    jr = riccati_j(ell, k * grid.nodes)
    R0 = _resolvent_matrix(ell, k, grid, C)
    system = np.eye(grid.n) + R0 * v[None, :]
    lu = linalg.lu_factor(system)
    # 1-norm condition estimate from the LU factors
    rcond = _rcond_1(system, lu)
    cond = math.inf if rcond == 0 else 1.0 / rcond
    if cond > COND_LIMIT:
        raise NearSingularError(f"1 + R0 V is near-singular at lam={lam:g} (cond ~ {cond:.2e})")
    psi = linalg.lu_solve(lu, jr.astype(complex))
    s = 1.0 - (2j / k) * np.sum(w * jr * v * psi)
    if abs(abs(s) - 1.0) > UNIT_TOL:
        raise ArithmeticError(f"|s_{ell}({lam:g})| - 1 = {abs(s) - 1:.2e}: T-matrix not converged")
    return k, sw, R0, system, lu, cond, psi, complex(s)


def _rcond_1(a: np.ndarray, lu) -> float:
    gecon = linalg.get_lapack_funcs("gecon", (lu[0],))
    anorm = np.linalg.norm(a, 1)
    rcond, info = gecon(lu[0], anorm, norm="1")
    return float(rcond)


def t_matrix(p: Potential, ell: int, lam: float, grid: RadialGrid) -> TMatrixChannel:
    """Dense solve for T = V (1 + R0 V)^-1 at lam + i0."""
    v = evaluate(p, grid.nodes).astype(float)
    C = cumulative_matrix(grid)
    k, sw, R0, system, lu, cond, psi, s = _solve(ell, lam, grid, v, C)
    # T W = V (1 + R0 V)^-1 ; fold: W^1/2 T W^1/2 = W^1/2 V (1+R0 V)^-1 W^-1/2
    X = linalg.lu_solve(lu, np.diag(1.0 / sw).astype(complex))
    T = (sw * v)[:, None] * X
    return TMatrixChannel(ell, float(lam), grid, T, cond, psi, s)


def s_matrix_channel(p: Potential, ell: int, grid_E: LogEnergyGrid | np.ndarray,
                     grid_r: RadialGrid) -> np.ndarray:
    """s_l(lam_j) = 1 - (2i/k) <j^, V psi+> at every energy node."""
    lams = grid_E.nodes if isinstance(grid_E, LogEnergyGrid) else np.asarray(grid_E, dtype=float)
    if p.is_zero:
        return np.ones(lams.size, dtype=complex)
    v = evaluate(p, grid_r.nodes).astype(float)
    C = cumulative_matrix(grid_r)
    return np.array([_solve(ell, lam, grid_r, v, C)[-1] for lam in lams])


def phase_from_s(s: np.ndarray) -> np.ndarray:
    """arg(s)/2 unwrapped along the array (continuous branch)."""
    return 0.5 * np.unwrap(np.angle(s))


# --- operator B ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BOperatorChannel:
    """Columns b_j(r_i) = lam_j^(1/4) (T(lam_j + i0) F0(lam_j)*)(r_i), stored as values.

    ``weighted_norms[j]`` = || <r>^(sigma - t) b_j ||_{L^2(dr)}.
    """

    ell: int
    grid_r: RadialGrid
    grid_E: LogEnergyGrid
    columns: np.ndarray  # shape (N, n_r)
    s: np.ndarray
    t_weight: float
    sigma: float
    weighted_norms: np.ndarray

    @property
    def bound(self) -> float:
        return float(np.max(self.weighted_norms)) if self.weighted_norms.size else 0.0


def check_t_window(t_weight: float, sigma: float) -> None:
    if not 2.5 < t_weight < sigma - 2.5:
        raise ValueError(
            f"t_weight={t_weight} outside the admissible window t in (5/2, sigma-5/2) = "
            f"(2.5, {sigma - 2.5:g}) required for B to be bounded")


def build_B(p: Potential, ell: int, grid_E: LogEnergyGrid, grid_r: RadialGrid,
            t_weight: float | None = None) -> BOperatorChannel:
    sigma = p.sigma_eff
    if t_weight is None:
        t_weight = sigma / 2
    check_t_window(t_weight, sigma)
    N = grid_E.n
    cols = np.zeros((N, grid_r.n), dtype=complex)
    s = np.ones(N, dtype=complex)
    if not p.is_zero:
        v = evaluate(p, grid_r.nodes).astype(float)
        C = cumulative_matrix(grid_r)
        for j, lam in enumerate(grid_E.nodes):
            *_, psi, s[j] = _solve(ell, lam, grid_r, v, C)
            # lam^1/4 * (4 lam)^-1/4 sqrt(2/pi) = CHANNEL_CONST
            cols[j] = CHANNEL_CONST * v * psi
    wt = (1 + grid_r.nodes ** 2) ** ((sigma - t_weight) / 2)
    norms = np.sqrt((np.abs(cols * wt[None, :]) ** 2) @ grid_r.weights)
    if not np.all(np.isfinite(norms)):
        raise ArithmeticError("B column norms are not finite")
    return BOperatorChannel(ell, grid_r, grid_E, cols, s, float(t_weight), sigma, norms)
