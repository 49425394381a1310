"""Radial and log-energy grids, and spherical / Riccati-Bessel evaluation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special

PANEL_ORDER = 16
ELL_CAP = 12


class GridError(ValueError):
    """Raised for discretizations that cannot be used."""


class BesselRangeError(ArithmeticError):
    """Raised when y_l(x) would overflow (x much smaller than l)."""


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Quadrature nodes and weights on (0, r_max].

    ``order`` is the polynomial degree integrated exactly (per panel for the
    composite Gauss-Legendre scheme); ``density`` is nodes per unit length.
    """

    nodes: np.ndarray
    weights: np.ndarray
    r_max: float
    scheme: str
    order: int
    breakpoints: tuple[float, ...] = ()
    panel_edges: np.ndarray | None = None

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def density(self) -> float:
        return self.n / self.r_max

    @property
    def step(self) -> float:
        if self.scheme != "uniform_trapezoid":
            raise GridError("step is only defined for uniform grids")
        return self.r_max / self.n

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))

    def norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(values) ** 2)))

    def index_of(self, r: float, tol: float = 1e-12) -> int:
        i = int(np.argmin(np.abs(self.nodes - r)))
        if abs(self.nodes[i] - r) > tol * max(1.0, r):
            raise GridError(f"r={r} is not a grid node")
        return i


def _panel_edges(r_max: float, n_panels: int, breakpoints) -> np.ndarray:
    cuts = sorted({0.0, r_max, *[b for b in breakpoints if 0.0 < b < r_max]})
    lengths = np.diff(cuts)
    if n_panels < len(lengths):
        raise GridError("fewer panels than breakpoint segments")
    # at least one panel per segment, the rest proportional to length
    counts = np.ones(len(lengths), dtype=int)
    for _ in range(n_panels - len(lengths)):
        counts[np.argmax(lengths / counts)] += 1
    edges = [0.0]
    for a, b, c in zip(cuts[:-1], cuts[1:], counts):
        edges.extend(np.linspace(a, b, c + 1)[1:])
    return np.asarray(edges)


def make_radial_grid(
    n: int,
    r_max: float,
    scheme: str = "gauss_legendre_composite",
    breakpoints=(),
) -> RadialGrid:
    """Build a radial quadrature grid.

    ``gauss_legendre_composite`` uses panels of order 16 (n must be a multiple
    of 16, or n < 16 for a single panel); panel edges include ``breakpoints``
    so that piecewise-smooth integrands stay smooth on every panel.

    ``uniform_trapezoid`` puts nodes at i*r_max/n, i = 1..n, and is the
    trapezoid rule with the node at r = 0 dropped: second order for integrands
    that vanish at the origin, which every reduced radial function does.
    """
    if n < 8:
        raise GridError(f"need at least 8 nodes, got n={n}")
    if not r_max > 0:
        raise GridError(f"r_max must be positive, got {r_max}")
    breakpoints = tuple(float(b) for b in breakpoints if 0.0 < b < r_max)

    if scheme == "gauss_legendre_composite":
        if n < PANEL_ORDER:
            order, n_panels = n, 1
        else:
            if n % PANEL_ORDER:
                raise GridError(f"n={n} is not a multiple of the panel order {PANEL_ORDER}")
            order, n_panels = PANEL_ORDER, n // PANEL_ORDER
        x, w = leggauss(order)
        edges = _panel_edges(r_max, n_panels, breakpoints)
        a, b = edges[:-1, None], edges[1:, None]
        nodes = (0.5 * (b - a) * x + 0.5 * (b + a)).ravel()
        weights = (0.5 * (b - a) * w).ravel()
        return RadialGrid(nodes, weights, float(r_max), scheme, 2 * order - 1,
                          breakpoints, edges)

    if scheme == "uniform_trapezoid":
        step = r_max / n
        nodes = step * np.arange(1, n + 1)
        weights = np.full(n, step)
        weights[-1] = 0.5 * step
        for bp in breakpoints:
            if abs(bp / step - round(bp / step)) > 1e-9:
                raise GridError(f"breakpoint {bp} is not on the uniform grid")
        return RadialGrid(nodes, weights, float(r_max), scheme, 1, breakpoints)

    raise GridError(f"unknown scheme {scheme!r}")


@dataclass(frozen=True, eq=False)
class LogEnergyGrid:
    """Geometric energy nodes lam_j = lam_min * exp(j*h), j = 0..N-1."""

    nodes: np.ndarray
    lam_min: float
    lam_max: float
    step: float = field(init=False)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        object.__setattr__(self, "step", float(np.log(self.lam_max / self.lam_min) / (self.n - 1)))

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def log_nodes(self) -> np.ndarray:
        return np.log(self.lam_min) + self.step * np.arange(self.n)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoid weights for d(lambda) = lambda d(ln lambda)."""
        return self.nodes * self.step

    @property
    def momenta(self) -> np.ndarray:
        return np.sqrt(self.nodes)

    def norm(self, values: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(values) ** 2)))

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        return complex(np.sum(self.weights * np.conj(a) * b))

    def same_as(self, other: "LogEnergyGrid") -> bool:
        return (self.n == other.n and np.isclose(self.lam_min, other.lam_min, rtol=1e-14)
                and np.isclose(self.lam_max, other.lam_max, rtol=1e-14))

    def extended(self, pad: int) -> tuple["LogEnergyGrid", slice]:
        """Same step, ``pad`` times as many nodes, original grid centred."""
        n_ext = pad * self.n
        lo = (n_ext - self.n) // 2
        lam_min = self.lam_min * np.exp(-lo * self.step)
        lam_max = lam_min * np.exp((n_ext - 1) * self.step)
        nodes = lam_min * np.exp(self.step * np.arange(n_ext))
        return LogEnergyGrid(nodes, float(lam_min), float(lam_max)), slice(lo, lo + self.n)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def make_log_energy_grid(n: int, lam_min: float, lam_max: float) -> LogEnergyGrid:
    if not _is_power_of_two(n) or n < 64:
        raise GridError(f"N must be a power of two >= 64, got {n}")
    if not lam_min > 0:
        raise GridError(f"lam_min must be positive, got {lam_min}")
    if not lam_max > lam_min:
        raise GridError("need lam_min < lam_max")
    h = np.log(lam_max / lam_min) / (n - 1)
    nodes = lam_min * np.exp(h * np.arange(n))
    nodes[-1] = lam_max
    return LogEnergyGrid(nodes, float(lam_min), float(lam_max))


@dataclass(frozen=True)
class BesselEval:
    ell: int
    x: np.ndarray
    j: np.ndarray
    y: np.ndarray
    jp: np.ndarray
    yp: np.ndarray

    @property
    def h1(self) -> np.ndarray:
        return self.j + 1j * self.y

    @property
    def wronskian(self) -> np.ndarray:
        return self.j * self.yp - self.jp * self.y


def _check_ell(ell: int, ell_cap: int) -> None:
    if ell < 0 or int(ell) != ell:
        raise ValueError(f"ell must be a nonnegative integer, got {ell}")
    if ell > ell_cap:
        raise ValueError(f"ell={ell} exceeds ell_cap={ell_cap}")


def _y_overflows(ell: int, x: np.ndarray) -> bool:
    # |y_l(x)| ~ (2l-1)!!/x^(l+1) for x << l
    with np.errstate(divide="ignore"):
        logmag = special.gammaln(2 * ell + 1) - special.gammaln(ell + 1) - ell * np.log(2.0) \
            - (ell + 1) * np.log(np.min(x))
    return bool(logmag > 700.0)


def spherical_bessel(ell: int, x, ell_cap: int = ELL_CAP) -> BesselEval:
    """j_l, y_l and their derivatives at positive arguments.

    Values come from scipy.special, which uses downward recurrence (Miller) for
    j_l where upward recurrence loses accuracy.
    """
    _check_ell(ell, ell_cap)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("spherical_bessel needs x > 0")
    if _y_overflows(ell, np.atleast_1d(x)):
        raise BesselRangeError(f"y_{ell}(x) overflows for x={np.min(x):.3g}")
    return BesselEval(
        ell, x,
        special.spherical_jn(ell, x), special.spherical_yn(ell, x),
        special.spherical_jn(ell, x, derivative=True),
        special.spherical_yn(ell, x, derivative=True),
    )


def riccati_j(ell: int, x) -> np.ndarray:
    """x j_l(x); behaves like sin(x - l pi/2) at large x."""
    x = np.asarray(x, dtype=float)
    return x * special.spherical_jn(ell, x)


def riccati_y(ell: int, x) -> np.ndarray:
    """x y_l(x); behaves like -cos(x - l pi/2) at large x."""
    x = np.asarray(x, dtype=float)
    return x * special.spherical_yn(ell, x)


def riccati_j_deriv(ell: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return special.spherical_jn(ell, x) + x * special.spherical_jn(ell, x, derivative=True)


def riccati_y_deriv(ell: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return special.spherical_yn(ell, x) + x * special.spherical_yn(ell, x, derivative=True)


def riccati_h_out(ell: int, x) -> np.ndarray:
    """Outgoing Riccati-Hankel function -x y_l + i x j_l ~ exp(i(x - l pi/2))."""
    return -riccati_y(ell, x) + 1j * riccati_j(ell, x)
