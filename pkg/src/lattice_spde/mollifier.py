"""Even compactly supported mollifier, its Fourier transform and eps(n).

The bump is psi = (eta * eta) / ||eta||_1^2 with
eta(x) = exp(-1 / (1 - (x/s)^2)) on (-s, s) and s = half_width / 2, so
psi is even, nonnegative, supported in (-half_width, half_width) and
integrates to one. Transforms use the cosine convention

    psi_hat(xi) = int cos(pi xi x) psi(x) dx = (eta_hat(xi) / eta_hat(0))^2 >= 0,

which matches int cos(beta pi x) psi_eps(x) dx = psi_hat(eps beta).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .errors import ConfigurationError
from .lattice_core import broadcast_product

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 256
CACHE_MAX = 64.0
CACHE_STEP = 1.0 / 64.0


def bump(x: np.ndarray, s: float) -> np.ndarray:
    """eta(x) = exp(-1/(1-(x/s)^2)) inside (-s, s), zero outside."""
    x = np.asarray(x, dtype=float)
    r2 = (x / s) ** 2
    inside = r2 < 1.0
    out = np.zeros_like(x)
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


@dataclass(frozen=True, eq=False)
class MollifierTable:
    """Quadrature data and cached transform samples for one bump."""

    half_width: float
    order: int
    nodes: np.ndarray
    weights: np.ndarray
    eta_mass: float
    frequencies: np.ndarray
    eta_hat_samples: np.ndarray
    spline: CubicSpline

    @property
    def s(self) -> float:
        return self.half_width / 2.0

    def eta_hat_exact(self, xi: np.ndarray) -> np.ndarray:
        """Normalized eta_hat(xi) / eta_hat(0) by Gauss-Legendre quadrature."""
        xi = np.abs(np.asarray(xi, dtype=float))
        flat = xi.reshape(-1)
        out = np.empty_like(flat)
        weighted = self.weights * bump(self.nodes, self.s) / self.eta_mass
        # chunk to keep the cosine matrix small
        for start in range(0, flat.size, 4096):
            chunk = flat[start : start + 4096]
            out[start : start + 4096] = np.cos(np.pi * np.outer(chunk, self.nodes)) @ weighted
        return out.reshape(xi.shape)

    def eta_hat(self, xi: np.ndarray, exact: bool = False) -> np.ndarray:
        xi = np.abs(np.asarray(xi, dtype=float))
        if exact:
            return self.eta_hat_exact(xi)
        out = np.asarray(self.spline(np.minimum(xi, CACHE_MAX)), dtype=float)
        beyond = xi > CACHE_MAX
        if np.any(beyond):
            out = np.array(out, copy=True)
            out[beyond] = self.eta_hat_exact(xi[beyond])
        return out

    def psi_hat(self, xi: np.ndarray, exact: bool = False) -> np.ndarray:
        return self.eta_hat(xi, exact=exact) ** 2

    def psi(self, x: np.ndarray) -> np.ndarray:
        """Pointwise psi(x) = int eta(y) eta(x - y) dy / ||eta||_1^2."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros_like(flat)
        s = self.s
        t, w = roots_legendre(self.order)
        for k, xv in enumerate(flat):
            if abs(xv) >= 2.0 * s:
                continue
            lo, hi = max(-s, xv - s), min(s, xv + s)
            mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
            y = mid + half * t
            out[k] = half * np.sum(w * bump(y, s) * bump(xv - y, s))
        return out.reshape(x.shape) / self.eta_mass**2


@lru_cache(maxsize=16)
def build_psi(half_width: float = 1.0, order: int = DEFAULT_ORDER) -> MollifierTable:
    """Build the mollifier table for a bump supported in (-half_width, half_width)."""
    if not 0.0 < half_width <= 1.0:
        raise ConfigurationError(
            f"Mollifier half_width must lie in (0, 1] so that supp psi is inside (-1, 1), got {half_width}"
        )
    if order < 8:
        raise ConfigurationError(f"Quadrature order must be >= 8, got {order}")
    s = half_width / 2.0
    t, w = roots_legendre(order)
    nodes, weights = s * t, s * w
    eta_mass = float(np.sum(weights * bump(nodes, s)))

    frequencies = np.arange(0.0, CACHE_MAX + CACHE_STEP / 2, CACHE_STEP)
    weighted = weights * bump(nodes, s) / eta_mass
    samples = np.cos(np.pi * np.outer(frequencies, nodes)) @ weighted
    samples[0] = 1.0
    spline = CubicSpline(frequencies, samples, bc_type=((1, 0.0), "not-a-knot"))
    logger.debug("Built mollifier table: half_width=%s, order=%d, mass=%.6e", half_width, order, eta_mass)
    return MollifierTable(
        half_width=float(half_width),
        order=int(order),
        nodes=nodes,
        weights=weights,
        eta_mass=eta_mass,
        frequencies=frequencies,
        eta_hat_samples=samples,
        spline=spline,
    )


def psi_hat(xi: np.ndarray, table: MollifierTable, exact: bool = False) -> np.ndarray:
    """psi_hat(xi) under the cosine convention; psi_hat(0) = 1."""
    return table.psi_hat(xi, exact=exact)


def big_psi_hat(scaled: np.ndarray, table: MollifierTable) -> np.ndarray:
    """Psi_hat(eps beta) = prod_k psi_hat(eps beta_k) over the last axis."""
    scaled = np.asarray(scaled, dtype=float)
    if scaled.ndim == 0:
        return table.psi_hat(scaled)
    return np.prod(table.psi_hat(scaled), axis=-1)


def lattice_psi_hat(eps: float, d: int, n_modes: int, table: MollifierTable) -> np.ndarray:
    """Psi_hat(eps beta) for beta in {1..n_modes-1}^d as a broadcast array."""
    axis = table.psi_hat(eps * np.arange(1, n_modes, dtype=float))
    return broadcast_product([axis] * d)


def epsilon_of_n(n: float, theta: float, d: int) -> float:
    """eps(n) = n^((2d - 4 - theta) / theta)."""
    if theta <= 2 * d - 4:
        raise ConfigurationError(f"Decay order theta={theta} must exceed 2d-4={2 * d - 4}")
    if n < 1:
        raise ConfigurationError(f"Resolution must be >= 1, got {n}")
    return float(n) ** ((2 * d - 4 - theta) / theta)


def decay_constant(table: MollifierTable, theta: float) -> float:
    """Empirical C(theta) = sup over the cached grid of |xi|^theta psi_hat(xi)."""
    xi = table.frequencies
    return float(np.max(xi**theta * table.eta_hat_samples**2))


def cutoff_frequency(table: MollifierTable, tol: float = 1e-10, xi_max: float = 512.0) -> float:
    """Smallest sampled xi beyond which psi_hat stays below ``tol``."""
    step = 1.0 / 16.0
    xi = np.arange(0.0, xi_max + step / 2, step)
    values = table.psi_hat(xi, exact=True)
    above = np.nonzero(values >= tol)[0]
    if above.size == 0:
        return 0.0
    last = int(above[-1])
    if last == xi.size - 1:
        logger.warning("psi_hat stays above %.1e up to xi=%.1f; using that as cutoff", tol, xi_max)
        return float(xi_max)
    return float(xi[last] + step)


def describe(table: MollifierTable, theta: float) -> dict:
    """Summary of the table for JSON reports."""
    return {
        "half_width": table.half_width,
        "order": table.order,
        "eta_mass": table.eta_mass,
        "decay_order": theta,
        "decay_constant": decay_constant(table, theta),
        "psi_hat_at_1": float(table.psi_hat(1.0)),
        "cutoff_1e-10": cutoff_frequency(table, 1e-10),
    }
