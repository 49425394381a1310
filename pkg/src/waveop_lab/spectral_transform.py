"""Per-channel spectral transform of H0 and the operator M.

For a reduced radial function u (f = u(r)/r Y_lm) the transform is

    (F0 u)(lam) = (4 lam)^(-1/4) sqrt(2/pi) int_0^inf j^_l(sqrt(lam) r) u(r) dr,

i.e. the 3D Fourier transform restricted to the sphere of radius sqrt(lam)
with density (lam/4)^(1/4), up to the constant channel phase (-i)^l which we
drop. It is unitary from L^2(dr) onto L^2(R+, dlam) and turns H0_l into
multiplication by lam.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grids import LogEnergyGrid, RadialGrid, GridError, make_radial_grid, riccati_j

CHANNEL_CONST = math.sqrt(2.0 / math.pi) * 4.0 ** -0.25
# nodes-per-wavelength floor for the radial quadrature of j^_l(k r)
_MIN_NODES_PER_WAVELENGTH = 4.0


def kernel(ell: int, lam, r) -> np.ndarray:
    """F0(lam)(r) on the outer product of ``lam`` and ``r``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    k = np.sqrt(lam)
    return (CHANNEL_CONST * lam ** -0.25)[:, None] * riccati_j(ell, k[:, None] * r[None, :])


def check_resolution(grid_r: RadialGrid, lam_max: float) -> None:
    k = math.sqrt(lam_max)
    if grid_r.scheme == "gauss_legendre_composite":
        worst = float(np.max(np.diff(grid_r.panel_edges)))
        nodes_per_wavelength = grid_r.order // 2 + 1
        per_panel = nodes_per_wavelength
        if k * worst / (2 * math.pi) * _MIN_NODES_PER_WAVELENGTH > per_panel:
            raise GridError(
                f"radial panels of length {worst:.3g} under-resolve j_l(k r) at k={k:.3g}")
    else:
        if 2 * math.pi / (k * grid_r.step) < 2 * _MIN_NODES_PER_WAVELENGTH:
            raise GridError(f"uniform step {grid_r.step:.3g} under-resolves j_l(k r) at k={k:.3g}")


def evaluation_map(ell: int, lam: float, grid_r: RadialGrid) -> np.ndarray:
    """Kernel row F0(lam)(r_i); the functional is u -> sum_i row_i w_i u_i."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    return kernel(ell, lam, grid_r.nodes)[0]


@dataclass(frozen=True, eq=False)
class ChannelSpectralMap:
    """F0 restricted to channel l between a radial grid and a log-energy grid.

    ``matrix`` is the weight-folded form sqrt(lam_j h) F0(lam_j)(r_i) sqrt(w_i),
    which is a near-isometry in plain Euclidean norms.
    """

    ell: int
    grid_r: RadialGrid
    grid_E: LogEnergyGrid
    values: np.ndarray
    normalization: dict = field(default_factory=dict)

    @property
    def matrix(self) -> np.ndarray:
        return np.sqrt(self.grid_E.weights)[:, None] * self.values * np.sqrt(self.grid_r.weights)[None, :]

    def apply(self, u: np.ndarray) -> np.ndarray:
        """(F0 u)(lam_j) from radial values u(r_i)."""
        return self.values @ (self.grid_r.weights[:, None] * u if u.ndim == 2 else self.grid_r.weights * u)

    def adjoint(self, phi: np.ndarray) -> np.ndarray:
        """(F0* phi)(r_i) from spectral values phi(lam_j)."""
        wE = self.grid_E.weights
        return self.values.T @ (wE[:, None] * phi if phi.ndim == 2 else wE * phi)


def log_gaussian(grid_E: LogEnergyGrid, center: float, width: float) -> np.ndarray:
    """exp(-(ln lam - ln center)^2 / (2 width^2)), a band-limited packet on the log grid."""
    x = grid_E.log_nodes - math.log(center)
    return np.exp(-0.5 * (x / width) ** 2)


def plancherel_ratio(fmap: ChannelSpectralMap, center: float | None = None, width: float = 0.4) -> float:
    """||F0 F0* phi|| / ||phi|| for a log-Gaussian phi in the middle of the energy grid."""
    gE = fmap.grid_E
    if center is None:
        center = math.sqrt(gE.lam_min * gE.lam_max)
    phi = log_gaussian(gE, center, width)
    u = fmap.adjoint(phi)
    return fmap.grid_r.norm(u) / gE.norm(phi)


def channel_forward(ell: int, grid_r: RadialGrid, grid_E: LogEnergyGrid, pin: bool = False,
                    pin_center: float | None = None) -> ChannelSpectralMap:
    """Build the channel transform matrix between the two grids.

    With ``pin=True`` the normalisation is checked once by the Plancherel
    identity on a packet centred at ``pin_center`` and the measured ratio is
    recorded (the radial grid must then be large enough to hold the packet).
    """
    check_resolution(grid_r, grid_E.lam_max)
    values = kernel(ell, grid_E.nodes, grid_r.nodes)
    fmap = ChannelSpectralMap(ell, grid_r, grid_E, values,
                              {"constant": CHANNEL_CONST, "density": "lam^(-1/4) (4)^(-1/4) sqrt(2/pi)"})
    if pin:
        ratio = plancherel_ratio(fmap, pin_center)
        fmap.normalization["plancherel_ratio"] = ratio
        if abs(ratio - 1) > 1e-4:
            raise GridError(f"Plancherel check failed: ratio {ratio:.8f}")
    return fmap


# --- M operator and the boundedness / decay probes ----------------------------


@dataclass(frozen=True, eq=False)
class MOperatorChannel:
    """(M xi)(lam_j) = lam_j^(-1/4) F0(lam_j) xi(lam_j); ``rows`` include radial weights."""

    ell: int
    grid_r: RadialGrid
    grid_E: LogEnergyGrid
    rows: np.ndarray
    t_weight: float
    weighted_norms: np.ndarray

    def apply(self, xi: np.ndarray) -> np.ndarray:
        """xi has shape (N, n_r): one radial vector per energy node."""
        return np.einsum("ji,ji->j", self.rows, xi)

    @property
    def bound(self) -> float:
        return float(np.max(self.weighted_norms))


def weighted_functional_norms(ell: int, lam, t: float, power: float, grid_r: RadialGrid) -> np.ndarray:
    """||lam^power F0(lam)||_{B(H_t, C)} = lam^power ||<r>^-t F0(lam)(.)||_{L^2(dr)}."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    out = np.empty(lam.size)
    wt = grid_r.weights * (1 + grid_r.nodes ** 2) ** (-t)
    for s in range(0, lam.size, 64):
        kv = kernel(ell, lam[s:s + 64], grid_r.nodes)
        out[s:s + 64] = lam[s:s + 64] ** power * np.sqrt(np.abs(kv) ** 2 @ wt)
    return out


def build_M(ell: int, grid_r: RadialGrid, grid_E: LogEnergyGrid, t_weight: float) -> MOperatorChannel:
    if not t_weight > 1.5:
        raise ValueError(f"t_weight={t_weight} violates the hypothesis t > 3/2 for M")
    lam = grid_E.nodes
    rows = (lam ** -0.25)[:, None] * kernel(ell, lam, grid_r.nodes) * grid_r.weights[None, :]
    norms = weighted_functional_norms(ell, lam, t_weight, -0.25, grid_r)
    if not np.all(np.isfinite(norms)):
        raise ArithmeticError("M is not bounded on this grid")
    return MOperatorChannel(ell, grid_r, grid_E, rows, t_weight, norms)


@dataclass(frozen=True)
class WeightedNormProbe:
    lam: np.ndarray
    norms: np.ndarray
    power: float
    t: float

    @property
    def sup(self) -> float:
        return float(np.max(self.norms))

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.norms))

    @property
    def interior_max(self) -> bool:
        return 0 < self.argmax < self.norms.size - 1

    @property
    def tail_ratio(self) -> float:
        return float(self.norms[-1] / self.sup)

    @property
    def max_adjacent_jump(self) -> float:
        n = self.norms
        return float(np.max(np.abs(np.diff(n)) / np.maximum(n[:-1], n[1:])))


def probe_grid(lam_max: float, r_max: float = 200.0) -> RadialGrid:
    """Radial grid long enough for <r>^-t-weighted norms (t >= 2) and fine enough for lam_max."""
    panel = min(0.5, 2 * math.pi / math.sqrt(lam_max) / 1.5)
    n_panels = int(math.ceil(r_max / panel))
    return make_radial_grid(16 * n_panels, r_max, "gauss_legendre_composite")


def weighted_norm_probe(ell: int, lam, t: float = 2.0, power: float = -0.25, grid_r: RadialGrid | None = None) -> WeightedNormProbe:
    """Sweep of lam^power ||F0(lam)||_{B(H_t, C)} (power -1/4: bounded and vanishing at infinity)."""
    lam = np.asarray(lam, dtype=float)
    grid_r = grid_r or probe_grid(float(lam.max()))
    return WeightedNormProbe(lam, weighted_functional_norms(ell, lam, t, power, grid_r), power, t)


def synthesize(ell: int, lam: np.ndarray, coeffs: np.ndarray, r: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """sum_n F0(lam_n)(r_i) coeffs_n, evaluated in blocks of r to bound memory."""
    out = np.empty(r.size, dtype=complex)
    for s in range(0, r.size, chunk):
        out[s:s + chunk] = kernel(ell, lam, r[s:s + chunk]).T @ coeffs
    return out


def analyze(ell: int, lam: np.ndarray, r: np.ndarray, weighted_values: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """sum_i F0(lam_n)(r_i) weighted_values_i for every lam_n, in blocks of r."""
    out = np.zeros(lam.size, dtype=complex)
    for s in range(0, r.size, chunk):
        out += kernel(ell, lam, r[s:s + chunk]) @ weighted_values[s:s + chunk]
    return out
