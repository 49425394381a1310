"""Spherically symmetric test potentials (units hbar = 2m = 1, H0 = -Laplacian)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

# weight exponent used for potentials decaying faster than any power
SIGMA_CAP = 16.0
# |V(r)| / V0 below this is treated as outside the support
SUPPORT_TOL = 1e-16


@dataclass(frozen=True)
class Potential:
    """V(r) = -V0 * shape(r); attractive for V0 > 0.

    kinds: ``square_well`` (param = radius a), ``gaussian`` (param = width,
    shape exp(-(r/width)^2)), ``exponential`` (param = range, shape
    exp(-r/range)), ``zero``.
    """

    kind: str
    depth: float = 0.0
    param: float = 1.0
    sigma_decay: float = math.inf
    bound_const: float | None = None
    label: str = field(default="")

    def __post_init__(self):
        if self.kind not in ("square_well", "gaussian", "exponential", "zero"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind != "zero" and not self.param > 0:
            raise ValueError("potential length parameter must be positive")
        if not self.label:
            object.__setattr__(self, "label", self.describe())

    def describe(self) -> str:
        if self.kind == "zero":
            return "zero"
        return f"{self.kind}(V0={self.depth:g},{self.param:g})"

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or self.depth == 0.0

    @property
    def sigma_eff(self) -> float:
        """Finite decay exponent used for weighted norms."""
        return min(self.sigma_decay, SIGMA_CAP)

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.param,) if self.kind == "square_well" and not self.is_zero else ()

    @property
    def support_radius(self) -> float:
        if self.is_zero:
            return 0.0
        if self.kind == "square_well":
            return self.param
        if self.kind == "gaussian":
            return self.param * math.sqrt(-math.log(SUPPORT_TOL))
        return self.param * -math.log(SUPPORT_TOL)

    def taylor0(self) -> tuple[float, float, float]:
        """(V(0), V'(0), V''(0)/2) for the series start of the regular solution."""
        if self.is_zero:
            return 0.0, 0.0, 0.0
        v0, a = self.depth, self.param
        if self.kind == "square_well":
            return -v0, 0.0, 0.0
        if self.kind == "gaussian":
            return -v0, 0.0, v0 / a ** 2
        return -v0, v0 / a, -v0 / (2 * a ** 2)

    @property
    def decay_constant(self) -> float:
        """C with |V(r)| <= C <r>^-sigma_eff (closed-form supremum)."""
        if self.bound_const is not None:
            return self.bound_const
        if self.is_zero:
            return 0.0
        s = self.sigma_eff
        v0 = abs(self.depth)
        if self.kind == "square_well":
            return v0 * (1.0 + self.param ** 2) ** (s / 2)
        # maximise shape(r) * (1 + r^2)^(s/2) on a dense log grid, with margin
        r = np.concatenate([[0.0], np.geomspace(1e-4, 200.0, 20001)])
        return 1.01 * float(np.max(np.abs(evaluate(self, r)) * (1.0 + r ** 2) ** (s / 2)))


def square_well(depth: float, radius: float, **kw) -> Potential:
    return Potential("square_well", depth, radius, **kw)


def gaussian(depth: float, width: float, **kw) -> Potential:
    return Potential("gaussian", depth, width, **kw)


def exponential(depth: float, rng: float, **kw) -> Potential:
    return Potential("exponential", depth, rng, **kw)


def zero() -> Potential:
    return Potential("zero", 0.0, 1.0)


def evaluate(p: Potential, r):
    """V(r) for r >= 0 (vectorised). At r = a the square well takes its inside value."""
    r = np.asarray(r, dtype=float)
    if p.is_zero:
        return np.zeros_like(r)
    if p.kind == "square_well":
        return np.where(r <= p.param, -p.depth, 0.0)
    if p.kind == "gaussian":
        return -p.depth * np.exp(-((r / p.param) ** 2))
    return -p.depth * np.exp(-r / p.param)


def evaluate_outside(p: Potential, r):
    """Right limit V(r+) (differs from ``evaluate`` only at a square-well edge)."""
    r = np.asarray(r, dtype=float)
    if p.kind == "square_well" and not p.is_zero:
        return np.where(r < p.param, -p.depth, 0.0)
    return evaluate(p, r)


def decay_bound_ratio(p: Potential, r_max: float = 100.0, n: int = 20001) -> float:
    """max_r |V(r)| <r>^sigma / C on [0, r_max]; <= 1 when the declared bound holds."""
    if p.is_zero:
        return 0.0
    r = np.linspace(0.0, r_max, n)
    return float(np.max(np.abs(evaluate(p, r)) * (1 + r ** 2) ** (p.sigma_eff / 2)) / p.decay_constant)


def reference_bound_state_count(p: Potential, ell: int) -> int | str:
    """Closed-form bound-state count in channel ell, or ``"unknown"``.

    Square well: a level appears in channel l each time j_{l-1}(sqrt(V0) a)
    crosses zero (j_{-1}(x) = cos(x)/x).
    """
    if p.is_zero or p.depth < 0 and p.kind == "square_well":
        return 0
    if p.kind != "square_well":
        return "unknown"
    x_max = math.sqrt(p.depth) * p.param
    if ell == 0:
        return int(math.floor(x_max / math.pi + 0.5))
    x = np.linspace(1e-6, x_max, max(2000, int(200 * x_max)))
    f = special.spherical_jn(ell - 1, x)
    return int(np.count_nonzero(np.signbit(f[1:]) != np.signbit(f[:-1])))


def square_well_phase_shift(depth: float, radius: float, k, ell: int = 0) -> np.ndarray:
    """Closed-form s-/l-wave phase shift of an attractive square well, mod pi.

    Matches the interior regular solution x j_l(x) (x = kappa r) to the
    exterior combination at r = a; returned in (-pi/2, pi/2].
    """
    k = np.asarray(k, dtype=float)
    kappa = np.sqrt(k ** 2 + depth)
    if ell == 0:
        return np.arctan(k / kappa * np.tan(kappa * radius)) - k * radius
    xi, xo = kappa * radius, k * radius
    # logarithmic derivative of r j_l(kappa r) at r = a
    beta = (special.spherical_jn(ell, xi) + xi * special.spherical_jn(ell, xi, derivative=True)) \
        / (radius * special.spherical_jn(ell, xi))
    jo, yo = xo * special.spherical_jn(ell, xo), xo * special.spherical_yn(ell, xo)
    djo = k * (special.spherical_jn(ell, xo) + xo * special.spherical_jn(ell, xo, derivative=True))
    dyo = k * (special.spherical_yn(ell, xo) + xo * special.spherical_yn(ell, xo, derivative=True))
    # u ~ j cos d - y sin d ; beta = (dj cos - dy sin)/(j cos - y sin)
    t = (djo - beta * jo) / (dyo - beta * yo)
    d = np.arctan(t)
    return d


def square_well_bound_energies(depth: float, radius: float) -> np.ndarray:
    """s-wave bound energies from kappa cot(kappa a) = -q (oracle, brentq)."""
    from scipy.optimize import brentq

    def g(e):
        kap, q = math.sqrt(depth + e), math.sqrt(-e)
        return kap * math.cos(kap * radius) + q * math.sin(kap * radius)

    # roots lie in kappa a in ((n-1/2) pi, n pi]
    out = []
    x_max = math.sqrt(depth) * radius
    n = 1
    while (n - 0.5) * math.pi < x_max:
        lo_x = (n - 0.5) * math.pi
        hi_x = min(n * math.pi, x_max)
        e_lo = (lo_x / radius) ** 2 - depth
        e_hi = (hi_x / radius) ** 2 - depth
        e_hi = min(e_hi, -1e-15)
        out.append(brentq(g, e_lo + 1e-15, e_hi, xtol=1e-15, rtol=1e-15))
        n += 1
    return np.sort(np.asarray(out))


REGISTRY = {
    "square_well_4_1": square_well(4.0, 1.0),
    "square_well_1_1": square_well(1.0, 1.0),
    "square_well_15_1": square_well(15.0, 1.0),
    "gaussian_3_1": gaussian(3.0, 1.0),
    "exponential_2_05": exponential(2.0, 0.5),
    "zero": zero(),
}
