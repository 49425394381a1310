"""Functions of the dilation generator A+ on L^2(R+, dlam).

After the substitution x = ln(lam), g(x) = lam^(1/2) f(lam), dilations
(U_tau f)(lam) = e^(tau/2) f(e^tau lam) become translations g(x) -> g(x + tau),
so A+ is the momentum operator -i d/dx and phi(A+) is the Fourier multiplier
phi(p). On the geometric grid this is an FFT.

The symbol used throughout is

    theta(nu) = (1 - tanh(2 pi nu) - i / cosh(2 pi nu)) / 2,

which lies on the circle |theta - 1/2| = 1/2 and runs from 1 (nu -> -inf) to
0 (nu -> +inf). In the log variable it is convolution with

    K(mu) = delta(mu)/2 + (1/(8 pi i)) PV[1/sinh(mu/4) + 1/cosh(mu/4)],

(mu = x - x'), which gives the independent kernel realisation below.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grids import LogEnergyGrid, GridError

DEFAULT_PAD = 8


def theta(nu):
    """theta(nu) = (1 - tanh(2 pi nu) - i sech(2 pi nu)) / 2."""
    nu = np.asarray(nu, dtype=float)
    z = 2 * math.pi * nu
    return 0.5 * (1 - np.tanh(z) - 1j * _sech(z))


def _sech(z):
    e = np.exp(-np.abs(z))
    return 2 * e / (1 + e * e)


def r_symbol(s):
    """The function R(s) = (1 + tanh(pi s) - i sech(pi s)) / 2; theta(nu) = R(-2 nu)."""
    s = np.asarray(s, dtype=float)
    return 0.5 * (1 + np.tanh(math.pi * s) - 1j * _sech(math.pi * s))


def _check_geometric(grid: LogEnergyGrid) -> None:
    ratios = grid.nodes[1:] / grid.nodes[:-1]
    if np.max(np.abs(ratios / ratios[0] - 1)) > 1e-12:
        raise GridError("energy grid is not geometric")
    if grid.n & (grid.n - 1):
        raise GridError("energy grid size must be a power of two")


def dual_nodes(grid: LogEnergyGrid) -> np.ndarray:
    """Frequencies nu_m (FFT order) conjugate to x = ln(lam); |nu| <= pi/h."""
    return 2 * math.pi * np.fft.fftfreq(grid.n, d=grid.step)


@dataclass(frozen=True, eq=False)
class MellinPair:
    """Unitary discrete Mellin transform between (C^N, dlam) and (C^N, l^2).

    forward(f) = FFT(sqrt(lam h) f) / sqrt(N); ``nu`` gives the dual nodes.
    """

    grid: LogEnergyGrid
    nu: np.ndarray

    def forward(self, f: np.ndarray) -> np.ndarray:
        sw = np.sqrt(self.grid.weights)
        scale = sw[:, None] if np.ndim(f) == 2 else sw
        return np.fft.fft(scale * f, axis=0, norm="ortho")

    def inverse(self, fhat: np.ndarray) -> np.ndarray:
        sw = np.sqrt(self.grid.weights)
        scale = sw[:, None] if np.ndim(fhat) == 2 else sw
        return np.fft.ifft(fhat, axis=0, norm="ortho") / scale


def mellin_pair(grid: LogEnergyGrid) -> MellinPair:
    _check_geometric(grid)
    return MellinPair(grid, dual_nodes(grid))


def dilate(grid: LogEnergyGrid, f: np.ndarray, steps: int) -> np.ndarray:
    """(U_tau f)(lam_j) = e^(tau/2) f(lam_(j+steps)) for tau = steps*h, zero beyond the grid."""
    out = np.zeros_like(f)
    n = f.shape[0]
    if steps >= 0:
        out[: n - steps] = f[steps:]
    else:
        out[-steps:] = f[: n + steps]
    return math.exp(steps * grid.step / 2) * out


@dataclass(frozen=True, eq=False)
class MellinMultiplier:
    """A symbol phi sampled on the dual grid of ``grid``."""

    name: str
    symbol: Callable[[np.ndarray], np.ndarray]
    grid: LogEnergyGrid
    nu: np.ndarray
    samples: np.ndarray

    def circle_defect(self) -> float:
        return float(np.max(np.abs(np.abs(self.samples - 0.5) - 0.5)))

    def on(self, grid: LogEnergyGrid) -> "MellinMultiplier":
        return make_multiplier(self.symbol, grid, self.name)

    def complement(self) -> "MellinMultiplier":
        sym = self.symbol
        return make_multiplier(lambda nu: 1 - sym(nu), self.grid, f"1-{self.name}")


def make_multiplier(symbol, grid: LogEnergyGrid, name: str = "custom") -> MellinMultiplier:
    _check_geometric(grid)
    nu = dual_nodes(grid)
    samples = np.asarray(symbol(nu), dtype=complex) * np.ones(grid.n)
    return MellinMultiplier(name, symbol, grid, nu, samples)


def theta_multiplier(grid: LogEnergyGrid) -> MellinMultiplier:
    mult = make_multiplier(theta, grid, "theta")
    if mult.circle_defect() > 1e-12:
        raise ArithmeticError("theta samples left the circle |z - 1/2| = 1/2")
    lo = mult.samples[np.argmin(mult.nu)]
    hi = mult.samples[np.argmax(mult.nu)]
    if abs(lo - 1) > 1e-6 or abs(hi) > 1e-6:
        raise GridError("dual grid too narrow: theta has not reached its limits 1 and 0")
    return mult


def constant_multiplier(grid: LogEnergyGrid, value: complex = 1.0) -> MellinMultiplier:
    return make_multiplier(lambda nu: np.full(np.shape(nu), value, dtype=complex), grid, f"const({value})")


@dataclass(frozen=True, eq=False)
class DilationOperator:
    """Matrix of phi(A+) acting on f-values on ``grid`` (periodic or padded section)."""

    grid: LogEnergyGrid
    multiplier: MellinMultiplier
    matrix: np.ndarray
    realization: str

    @property
    def unitary_form(self) -> np.ndarray:
        """D^1/2 matrix D^-1/2 with D = diag(lam h); the l^2 matrix of the operator."""
        sw = np.sqrt(self.grid.weights)
        return sw[:, None] * self.matrix / sw[None, :]

    def normality_defect(self) -> float:
        a = self.unitary_form
        return float(np.linalg.norm(a @ a.conj().T - a.conj().T @ a, 2))

    def spectrum_distance_to_circle(self) -> float:
        ev = np.linalg.eigvals(self.unitary_form)
        return float(np.max(np.abs(np.abs(ev - 0.5) - 0.5)))


def _padded_samples(mult: MellinMultiplier, pad: int) -> np.ndarray:
    """Symbol samples on the dual grid of a log grid ``pad`` times longer (same step)."""
    m = pad * mult.grid.n
    nu = 2 * math.pi * np.fft.fftfreq(m, d=mult.grid.step)
    return np.asarray(mult.symbol(nu), dtype=complex) * np.ones(m)


def _toeplitz_section(samples: np.ndarray, n: int) -> np.ndarray:
    """First n x n block of the circulant with eigenvalues ``samples`` (acts on g-values)."""
    c = np.fft.ifft(samples)
    idx = np.arange(n)
    return c[(idx[:, None] - idx[None, :]) % c.size]


def dilation_operator(mult: MellinMultiplier, realization: str = "padded", pad: int = DEFAULT_PAD) -> DilationOperator:
    """Matrix of phi(A+) on the grid of ``mult``.

    ``periodic``: the exact circulant on the N-point log torus (normal, with
    spectrum {phi(nu_m)}). ``padded``: phi(A+) on a grid ``pad`` times longer,
    compressed back to the original window, i.e. the section P phi(A+) P of the
    operator on the half-line.
    """
    grid = mult.grid
    if realization == "periodic":
        cg = _toeplitz_section(mult.samples, grid.n)
    elif realization == "padded":
        cg = _toeplitz_section(_padded_samples(mult, pad), grid.n)
    else:
        raise ValueError(f"unknown realization {realization!r}")
    sw = np.sqrt(grid.weights)
    return DilationOperator(grid, mult, cg * sw[None, :] / sw[:, None], realization)


def apply_dilation_function(mult: MellinMultiplier, v: np.ndarray, grid: LogEnergyGrid | None = None,
                            realization: str = "padded", pad: int = DEFAULT_PAD) -> np.ndarray:
    """phi(A+) v by inverse-Mellin o multiply o forward-Mellin.

    The padded realisation zero-extends the log-variable function to ``pad``
    times the window before the FFT, so v is treated as vanishing outside the
    grid rather than periodically continued.
    """
    grid = grid or mult.grid
    if not grid.same_as(mult.grid) or v.shape[0] != grid.n:
        raise GridError("vector and multiplier live on different energy grids")
    two_d = np.ndim(v) == 2
    if realization == "periodic":
        pair = mellin_pair(grid)
        samples = mult.samples[:, None] if two_d else mult.samples
        return pair.inverse(samples * pair.forward(v))
    if realization != "padded":
        raise ValueError(f"unknown realization {realization!r}")
    sw = np.sqrt(grid.weights)
    sw = sw[:, None] if two_d else sw
    samples = _padded_samples(mult, pad)
    samples = samples[:, None] if two_d else samples
    m = samples.shape[0]
    gh = np.fft.fft(sw * v, n=m, axis=0)
    return np.fft.ifft(samples * gh, axis=0)[: grid.n] / sw


# --- independent kernel realisation ---------------------------------------------


class RoughInputError(ValueError):
    """Input too rough on the grid scale for the principal-value discretisation."""


def roughness(v: np.ndarray) -> float:
    """Largest adjacent-sample change relative to max |v|."""
    scale = np.max(np.abs(v))
    return float(np.max(np.abs(np.diff(v))) / scale) if scale else 0.0


def kernel_weights(n: int, h: float) -> tuple[np.ndarray, np.ndarray]:
    """(odd, even) kernel samples at mu = n h, n = -(n-1)..(n-1).

    odd: h/(8 pi i) / sinh(mu/4) with the singular node set to zero, so the
    stencil weights sum to zero; even: h/(8 pi i) / cosh(mu/4).
    """
    m = np.arange(-(n - 1), n)
    mu = m * h
    odd = np.zeros(mu.size, dtype=complex)
    nz = m != 0
    odd[nz] = h / (8j * math.pi) / np.sinh(mu[nz] / 4)
    even = h / (8j * math.pi) / np.cosh(mu / 4) + 0j
    return odd, even


def kernel_form(grid: LogEnergyGrid, v: np.ndarray, strict: bool = True, max_roughness: float = 0.1) -> np.ndarray:
    """theta(A+) v through the log-variable convolution kernel (v zero outside the grid).

    Quadrature: trapezoid for the smooth 1/cosh part; for the 1/sinh part the
    symmetric pairs g(x - nh) - g(x + nh) are summed and the singular node
    contributes its limit -8 g'(x) with weight h/2 (g' by fourth-order central
    differences), which keeps the rule accurate to O(h^2) rather than O(h).
    The delta part is the exact term g/2.
    """
    n = grid.n
    h = grid.step
    sq = np.sqrt(grid.nodes)
    g = sq * v  # log-variable function
    r = roughness(g)
    if r > max_roughness:
        msg = f"input changes by {r:.0%} between adjacent nodes; PV discretisation unreliable"
        if strict:
            raise RoughInputError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    odd, even = kernel_weights(n, h)
    # Toeplitz index: out[a] = sum_b w[a - b] g[b], w indexed by a - b + n - 1
    idx = np.arange(n)[:, None] - np.arange(n)[None, :] + n - 1
    out = 0.5 * g + (odd[idx] + even[idx]) @ g
    gp = np.gradient(g, h, edge_order=2)
    gp[2:-2] = (g[:-4] - 8 * g[1:-3] + 8 * g[3:-1] - g[4:]) / (12 * h)
    out = out + (h / (8j * math.pi)) * 0.5 * (-8.0) * gp
    return out / sq


# --- commutator probe --------------------------------------------------------------


def commutator_compactness_probe(mult: MellinMultiplier, a_symbol: Callable[[np.ndarray], np.ndarray],
                                 grid_E: LogEnergyGrid | None = None, pad: int = DEFAULT_PAD) -> np.ndarray:
    """Singular values (descending) of [phi(A+), a(lam)] on the energy grid.

    The section P phi(A+) P of the half-line operator is used; the circulant on
    the log torus would add a spurious seam where a(lam) jumps from a(lam_max)
    back to a(lam_min).
    """
    grid_E = grid_E or mult.grid
    if not grid_E.same_as(mult.grid):
        mult = mult.on(grid_E)
    op = dilation_operator(mult, "padded", pad).unitary_form
    a = np.asarray(a_symbol(grid_E.nodes), dtype=complex) * np.ones(grid_E.n)
    comm = op * a[None, :] - a[:, None] * op
    return np.linalg.svd(comm, compute_uv=False)


def effective_rank(svals: np.ndarray, rel: float) -> int:
    """Number of singular values with sigma_k / sigma_1 >= rel."""
    if svals.size == 0 or svals[0] == 0:
        return 0
    return int(np.count_nonzero(svals / svals[0] >= rel))


def band_limited_refine(grid: LogEnergyGrid, f: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Trigonometric interpolation of g = lam^(1/2) f onto a log grid ``factor`` times finer.

    Returns (lam_fine, f_fine) covering the same span (the last coarse cell
    included). Used where a lam-sum must resolve large radii without aliasing.
    """
    if factor == 1:
        return grid.nodes.copy(), np.asarray(f, dtype=complex)
    n = grid.n
    g = np.sqrt(grid.nodes) * f
    gh = np.fft.fft(g)
    big = np.zeros(n * factor, dtype=complex)
    half = n // 2
    big[:half] = gh[:half]
    big[-half:] = gh[-half:]
    # split the Nyquist bin symmetrically so real inputs stay real
    big[half] = 0.5 * gh[half]
    big[-half] = 0.5 * gh[half]
    g_fine = np.fft.ifft(big) * factor
    x = np.log(grid.lam_min) + grid.step / factor * np.arange(n * factor)
    lam = np.exp(x)
    return lam, g_fine / np.sqrt(lam)
