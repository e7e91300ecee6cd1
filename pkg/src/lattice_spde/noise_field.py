"""Coloured Gaussian noise on grid cells: covariances, sampling, aggregation."""

from __future__ import annotations

import itertools
import logging
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import integrate
from scipy.special import gamma as gamma_fn
from scipy.special import roots_jacobi, roots_legendre

from .errors import ConfigurationError, ModelError, SamplerError
from .green_kernel import KernelSpec, Truncation, admissible_alpha_bound, apply_green
from .lattice_core import (
    GridSpec,
    LatticeField,
    apply_along_axes,
    contract_axes,
    sine_matrix,
    sine_transform,
)

logger = logging.getLogger(__name__)

CHOLESKY_LIMIT = 20_000
BACKENDS = ("auto", "cholesky", "circulant")

# Gauss-Legendre nodes per smooth panel
PANEL_ORDER = 20


class CorrelationKind(str, Enum):
    RIESZ = "riesz"
    GAUSSIAN = "gaussian"
    FACTORIZED = "factorized"


@dataclass(frozen=True)
class CorrelationModel:
    """Stationary correlation density phi.

    riesz: |z|^-eta with 0 < eta < d; gaussian: exp(-|z|^2 / 2 sigma^2);
    factorized: prod max(0, 1 - |z_i| / rho), the autocorrelation of a box
    (rho = inf gives phi = 1).
    """

    kind: CorrelationKind
    parameter: float
    d: int

    def __post_init__(self) -> None:
        try:
            kind = CorrelationKind(self.kind)
        except ValueError:
            raise ModelError(
                f"Unknown correlation model: {self.kind}. Must be one of: riesz, gaussian, factorized"
            ) from None
        object.__setattr__(self, "kind", kind)
        p = float(self.parameter)
        if kind is CorrelationKind.RIESZ and not 0.0 < p < self.d:
            raise ModelError(
                f"riesz exponent eta={p} violates the integrability condition 0 < eta < d={self.d}"
            )
        if kind is not CorrelationKind.RIESZ and not p > 0.0:
            raise ModelError(f"{kind.value} parameter must be positive, got {p}")
        object.__setattr__(self, "parameter", p)

    @property
    def separable(self) -> bool:
        return self.kind is not CorrelationKind.RIESZ

    def phi(self, z: np.ndarray) -> np.ndarray:
        """phi at points of shape (..., d)."""
        z = np.asarray(z, dtype=float)
        if self.kind is CorrelationKind.RIESZ:
            r = np.linalg.norm(z, axis=-1)
            with np.errstate(divide="ignore"):
                return r ** (-self.parameter)
        return np.prod(self.profile(z), axis=-1)

    def profile(self, t: np.ndarray) -> np.ndarray:
        """One-dimensional factor of a separable phi."""
        t = np.asarray(t, dtype=float)
        if self.kind is CorrelationKind.GAUSSIAN:
            return np.exp(-(t**2) / (2.0 * self.parameter**2))
        if self.kind is CorrelationKind.FACTORIZED:
            if math.isinf(self.parameter):
                return np.ones_like(t)
            return np.maximum(0.0, 1.0 - np.abs(t) / self.parameter)
        raise ModelError("riesz correlation is not separable")

    def describe(self) -> dict:
        return {"kind": self.kind.value, "parameter": self.parameter, "d": self.d}


def _panel_rule(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    t, w = roots_legendre(PANEL_ORDER)
    edges = np.linspace(a, b, panels + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = 0.5 * (hi - lo)
        nodes.append(0.5 * (lo + hi) + half * t)
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def axis_covariance(model: CorrelationModel, h: float, k: int) -> float:
    """c1(k) = int_{-h}^{h} (h - |t|) phi1(k h + t) dt for a separable model."""
    breaks = {-h, 0.0, h}
    if model.kind is CorrelationKind.FACTORIZED and not math.isinf(model.parameter):
        for kink in (-model.parameter, model.parameter):
            t = kink - k * h
            if -h < t < h:
                breaks.add(t)
    panels = 1
    if model.kind is CorrelationKind.GAUSSIAN:
        panels = max(1, int(math.ceil(h / model.parameter)))
    points = sorted(breaks)
    total = 0.0
    for lo, hi in zip(points[:-1], points[1:]):
        nodes, weights = _panel_rule(lo, hi, panels)
        total += float(np.sum(weights * (h - np.abs(nodes)) * model.profile(k * h + nodes)))
    return total


@lru_cache(maxsize=4096)
def _riesz_unit(offset: tuple[int, ...], eta: float) -> float:
    """C_1(k) = int prod_i T(u_i - k_i) |u|^-eta du with the tent T(s) = max(0, 1 - |s|)."""
    d = len(offset)
    k = np.asarray(offset, dtype=float)
    total = 0.0
    touching = max(abs(c) for c in offset) <= 1
    for corner in itertools.product((0, 1), repeat=d):
        lower = k - 1.0 + np.asarray(corner)
        if touching and np.all((lower == 0.0) | (lower == -1.0)):
            total += _riesz_singular_cube(lower, k, eta)
        else:
            dist = float(np.linalg.norm(np.maximum(np.maximum(lower, -(lower + 1.0)), 0.0)))
            order = 12 if dist < 3.0 else 6
            total += _riesz_smooth_cube(lower, k, eta, order)
    return total


def _tent_product(u: np.ndarray, k: np.ndarray) -> np.ndarray:
    return np.prod(np.maximum(0.0, 1.0 - np.abs(u - k)), axis=-1)


def _riesz_smooth_cube(lower: np.ndarray, k: np.ndarray, eta: float, order: int) -> float:
    t, w = roots_legendre(order)
    nodes = 0.5 * (t + 1.0)
    weights = 0.5 * w
    d = lower.shape[0]
    grids = np.meshgrid(*[lower[i] + nodes for i in range(d)], indexing="ij")
    u = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wts = np.ones(())
    for _ in range(d):
        wts = np.multiply.outer(wts, weights)
    values = _tent_product(u, k) * np.linalg.norm(u, axis=-1) ** (-eta)
    return float(np.sum(wts.reshape(-1) * values))


def _riesz_singular_cube(lower: np.ndarray, k: np.ndarray, eta: float, radial: int = 8, angular: int = 16) -> float:
    """Unit cube with the singularity at a corner: pyramid split plus radial Gauss-Jacobi."""
    d = lower.shape[0]
    # reflect so the cube becomes [0,1]^d with the singular corner at the origin
    signs = np.where(lower == -1.0, -1.0, 1.0)
    c = d - 1.0 - eta
    xr, wr = roots_jacobi(radial, 0.0, c)
    r = 0.5 * (1.0 + xr)
    wr = wr * 0.5 ** (c + 1.0)
    t, w = roots_legendre(angular)
    s = 0.5 * (t + 1.0)
    ws = 0.5 * w
    total = 0.0
    for j in range(d):
        free = [i for i in range(d) if i != j]
        if free:
            grids = np.meshgrid(*[s] * (d - 1), indexing="ij")
            wgrid = np.ones(())
            for _ in free:
                wgrid = np.multiply.outer(wgrid, ws)
            wgrid = wgrid.reshape(-1)
            pts = np.ones((wgrid.size, d))
            for col, g in zip(free, grids):
                pts[:, col] = g.reshape(-1)
        else:
            wgrid = np.ones(1)
            pts = np.ones((1, d))
        ang = np.linalg.norm(pts, axis=-1) ** (-eta)
        # v = r * w, u = signs * v
        for ri, wri in zip(r, wr):
            u = signs * (ri * pts)
            total += wri * float(np.sum(wgrid * ang * _tent_product(u, k)))
    return total


def riesz_unit_covariance(offset: Sequence[int], eta: float) -> float:
    key = tuple(sorted(abs(int(c)) for c in offset))
    return _riesz_unit(key, float(eta))


def cell_covariance(offset: Sequence[int], grid: GridSpec, model: CorrelationModel) -> float:
    """C(k) = int_{D_0} int_{D_k} phi(x - y) dx dy."""
    if len(offset) != grid.d:
        raise ConfigurationError(f"Offset {tuple(offset)} does not match dimension {grid.d}")
    if model.d != grid.d:
        raise ConfigurationError(f"Model dimension {model.d} does not match grid dimension {grid.d}")
    k = [abs(int(c)) for c in offset]
    if model.separable:
        return float(np.prod([axis_covariance(model, grid.h, c) for c in k]))
    return grid.h ** (2 * grid.d - model.parameter) * riesz_unit_covariance(k, model.parameter)


def offset_covariances(grid: GridSpec, model: CorrelationModel, max_offset: int) -> np.ndarray:
    """C(k) for k in {0..max_offset}^d."""
    if model.separable:
        axis = np.array([axis_covariance(model, grid.h, k) for k in range(max_offset + 1)])
        out = np.ones(())
        for _ in range(grid.d):
            out = np.multiply.outer(out, axis)
        return out
    out = np.empty((max_offset + 1,) * grid.d)
    scale = grid.h ** (2 * grid.d - model.parameter)
    for k in itertools.product(range(max_offset + 1), repeat=grid.d):
        out[k] = scale * riesz_unit_covariance(k, model.parameter)
    return out


@dataclass(frozen=True, eq=False)
class CovarianceTable:
    """Cell covariances for nonnegative offsets; C(k) = C(|k|)."""

    grid: GridSpec
    model: CorrelationModel
    entries: np.ndarray
    metadata: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def entry(self, offset: Sequence[int]) -> float:
        return float(self.entries[tuple(abs(int(c)) for c in offset)])

    @property
    def variance(self) -> float:
        return float(self.entries[(0,) * self.grid.d])

    def extended(self, max_offset: int) -> np.ndarray:
        """C(k) up to ``max_offset`` per axis, reusing stored entries when possible."""
        if max_offset <= self.grid.n - 1:
            return self.entries[(slice(0, max_offset + 1),) * self.grid.d]
        return offset_covariances(self.grid, self.model, max_offset)

    def dense_matrix(self) -> np.ndarray:
        """(C(i - j)) over all n^d cells in lexicographic order."""
        d, n = self.grid.d, self.grid.n
        coords = np.indices(self.grid.cell_shape).reshape(d, -1)
        flat = np.zeros((coords.shape[1], coords.shape[1]), dtype=np.int64)
        for axis in range(d):
            flat *= n
            flat += np.abs(coords[axis][:, None] - coords[axis][None, :])
        return self.entries.reshape(-1)[flat]

    def psd_report(self) -> dict:
        matrix = self.dense_matrix()
        trace = float(np.trace(matrix))
        min_eig = float(scipy.linalg.eigvalsh(matrix, subset_by_index=[0, 0])[0])
        return {
            "min_eigenvalue": min_eig,
            "trace": trace,
            "psd": min_eig >= -1e-10 * trace,
        }


def covariance_table(grid: GridSpec, model: CorrelationModel) -> CovarianceTable:
    """Build C(k) for k in {0..n-1}^d."""
    entries = offset_covariances(grid, model, grid.n - 1)
    entries.setflags(write=False)
    metadata = {"rule": "gauss-legendre", "panel_order": PANEL_ORDER}
    if not model.separable:
        metadata = {"rule": "riesz-scaling+pyramid-gauss-jacobi", "scaling_exponent": 2 * grid.d - model.parameter}
    logger.debug("Covariance table %s for %s: C(0)=%.6e", grid, model.kind.value, entries.reshape(-1)[0])
    return CovarianceTable(grid=grid, model=model, entries=entries, metadata=metadata)


@dataclass(frozen=True)
class IntegrabilityReport:
    """Membership of phi in L^{alpha'} and L^{alpha'/2} on a bounded neighbourhood."""

    alpha: float
    alpha_prime: float
    admissible_bound: float
    alpha_admissible: bool
    in_l_alpha_prime: bool
    in_l_half_alpha_prime: bool
    norm_alpha_prime: float
    norm_half_alpha_prime: float

    @property
    def member(self) -> bool:
        return self.in_l_alpha_prime or self.in_l_half_alpha_prime

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["member"] = self.member
        return out


def _lq_norm(model: CorrelationModel, q: float) -> float:
    if model.kind is CorrelationKind.RIESZ:
        d, eta = model.d, model.parameter
        if eta * q >= d:
            return math.inf
        sphere = 2.0 * math.pi ** (d / 2) / gamma_fn(d / 2)
        return (sphere * 2.0 ** (d - eta * q) / (d - eta * q)) ** (1.0 / q)
    axis, _ = integrate.quad(lambda t: float(model.profile(np.array(t))) ** q, -2.0, 2.0, limit=200)
    return (axis**model.d) ** (1.0 / q)


def check_integrability(model: CorrelationModel, alpha: float, lam: float, d: int) -> IntegrabilityReport:
    """Report (not gate) on phi in L^{alpha'} u L^{alpha'/2}.

    Riesz norms are taken on the ball of radius 2 with the exact criterion
    eta q < d; separable models are integrated on [-2, 2]^d.
    """
    if alpha <= 1:
        raise ConfigurationError(f"alpha must exceed 1, got {alpha}")
    alpha_prime = alpha / (alpha - 1.0)
    bound = admissible_alpha_bound(lam, d)
    norm_full = _lq_norm(model, alpha_prime)
    norm_half = _lq_norm(model, alpha_prime / 2.0)
    return IntegrabilityReport(
        alpha=alpha,
        alpha_prime=alpha_prime,
        admissible_bound=bound,
        alpha_admissible=1.0 < alpha < bound,
        in_l_alpha_prime=math.isfinite(norm_full),
        in_l_half_alpha_prime=math.isfinite(norm_half),
        norm_alpha_prime=norm_full,
        norm_half_alpha_prime=norm_half,
    )


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    """Cell integrals F(D_j) on all n^d cells."""

    grid: GridSpec
    values: np.ndarray
    seed: int = 0
    index: int = 0
    backend: str = "none"

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.shape != self.grid.cell_shape:
            raise ConfigurationError(f"Noise shape {arr.shape} does not match cell shape {self.grid.cell_shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "NoiseRealization":
        return cls(grid, np.zeros(grid.cell_shape))

    def interior(self) -> np.ndarray:
        """F(D_i) for i in I^d_n."""
        return self.values[(slice(1, None),) * self.grid.d]


def noise_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based stream keyed by (seed, sample index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


class CholeskySampler:
    """Exact sampler from the dense cell covariance."""

    name = "cholesky"

    def __init__(self, table: CovarianceTable) -> None:
        cov = table.dense_matrix()
        self.symmetric = bool(np.array_equal(cov, cov.T))
        trace = float(np.trace(cov))
        try:
            self.factor = scipy.linalg.cholesky(cov, lower=True)
            self.min_eigenvalue = None
        except np.linalg.LinAlgError:
            logger.warning("Cholesky failed on %s covariance; using clipped eigendecomposition", table.model.kind.value)
            w, v = scipy.linalg.eigh(cov)
            self.min_eigenvalue = float(w.min())
            if self.min_eigenvalue < -1e-10 * trace:
                raise SamplerError(
                    f"Covariance is not positive semidefinite: min eigenvalue {self.min_eigenvalue:.3e}, trace {trace:.3e}"
                ) from None
            self.factor = v * np.sqrt(np.clip(w, 0.0, None))
        self.shape = table.grid.cell_shape

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.factor.shape[1])
        return (self.factor @ z).reshape(self.shape)


class CirculantSampler:
    """Circulant embedding on the torus of period P per axis."""

    name = "circulant"

    def __init__(self, table: CovarianceTable, period_factor: int = 2) -> None:
        n = table.grid.n
        self.shape = table.grid.cell_shape
        for attempt, factor in enumerate((period_factor, 2 * period_factor)):
            period = factor * n
            base = self._embedding_base(table, period)
            eig = np.fft.fftn(base).real
            if eig.min() >= -1e-10 * eig.max():
                self.period = period
                mirror = (-np.arange(period)) % period
                self.symmetric = bool(np.array_equal(base, base[np.ix_(*[mirror] * base.ndim)]))
                self.sqrt_eig = np.sqrt(np.clip(eig, 0.0, None) / eig.size)
                if attempt:
                    logger.warning("Circulant embedding needed period %d for n=%d", period, n)
                return
            logger.debug("Embedding with period %d has min eigenvalue %.3e", period, eig.min())
        raise SamplerError(f"Circulant embedding failed for {table.grid} even with period {period}")

    @staticmethod
    def _embedding_base(table: CovarianceTable, period: int) -> np.ndarray:
        half = period // 2
        base = table.extended(half)
        idx = np.arange(period)
        fold = np.where(idx <= half, idx, period - idx)
        return base[np.ix_(*[fold] * table.grid.d)]

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        shape = self.sqrt_eig.shape
        z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        field_ = np.fft.fftn(self.sqrt_eig * z).real
        return field_[tuple(slice(0, s) for s in self.shape)]


def select_backend(table: CovarianceTable, backend: str) -> str:
    if backend not in BACKENDS:
        raise ConfigurationError(f"Unknown backend: {backend}. Must be one of: {', '.join(BACKENDS)}")
    if backend == "auto":
        return "cholesky" if table.grid.size <= CHOLESKY_LIMIT else "circulant"
    return backend


def get_sampler(table: CovarianceTable, backend: str = "auto"):
    """Sampler for ``table``, built once and cached on the table."""
    name = select_backend(table, backend)
    with table._lock:
        if name not in table._cache:
            if name == "cholesky":
                table._cache[name] = CholeskySampler(table)
            else:
                try:
                    table._cache[name] = CirculantSampler(table)
                except SamplerError:
                    if table.grid.size > CHOLESKY_LIMIT:
                        raise
                    logger.warning("Falling back to Cholesky sampling for %s", table.grid)
                    table._cache[name] = CholeskySampler(table)
        return table._cache[name]


def sample(
    grid: GridSpec,
    table: CovarianceTable,
    seed: int,
    index: int = 0,
    backend: str = "auto",
) -> NoiseRealization:
    """One exact draw of (F(D_j)) keyed by (seed, index)."""
    if table.grid != grid:
        raise ConfigurationError(f"Covariance table grid ({table.grid}) does not match {grid}")
    sampler = get_sampler(table, backend)
    values = sampler.draw(noise_generator(seed, index))
    return NoiseRealization(grid, values, seed=seed, index=index, backend=sampler.name)


def sample_batch(
    grid: GridSpec,
    table: CovarianceTable,
    seed: int,
    indices: Sequence[int],
    backend: str = "auto",
) -> np.ndarray:
    """Stacked draws, shape (len(indices), n, ..., n)."""
    return np.stack([sample(grid, table, seed, i, backend).values for i in indices])


def aggregate(fine: NoiseRealization, factor: int) -> NoiseRealization:
    """Sum fine cells into coarse cells of ``factor``^d fine cells each."""
    d, n = fine.grid.d, fine.grid.n
    if factor < 1 or n % factor:
        raise ConfigurationError(f"Aggregation factor {factor} does not divide n={n}")
    if factor == 1:
        return fine
    coarse_n = n // factor
    shape = []
    for _ in range(d):
        shape.extend([coarse_n, factor])
    values = fine.values.reshape(shape).sum(axis=tuple(range(1, 2 * d, 2)))
    return NoiseRealization(GridSpec(d, coarse_n), values, fine.seed, fine.index, fine.backend)


def _require_kernel(noise: NoiseRealization, kernel: KernelSpec) -> None:
    if kernel.truncation is not Truncation.LATTICE:
        raise ConfigurationError("Stochastic integrals use the lattice kernel")
    if kernel.grid != noise.grid:
        raise ConfigurationError(f"Kernel grid ({kernel.grid}) does not match noise grid ({noise.grid})")


def integrate_kernel(noise: NoiseRealization, kernel: KernelSpec, x: Sequence[float]) -> float:
    """sum_i G_{D,n}^eps(x, i/n) F(D_i)."""
    _require_kernel(noise, kernel)
    n, d = noise.grid.n, noise.grid.d
    coeffs = sine_transform(noise.interior(), n)
    return (n / 2.0) ** (d / 2.0) * contract_axes(kernel.coefficients * coeffs, kernel.axis_values(x))


def integrate_kernel_field(noise: NoiseRealization, kernel: KernelSpec) -> LatticeField:
    """x -> int G_{D,n}^eps(x, y) dF(y) at every interior lattice point."""
    _require_kernel(noise, kernel)
    n, d = noise.grid.n, noise.grid.d
    out = apply_green(kernel, LatticeField(noise.grid, noise.interior()))
    return LatticeField(noise.grid, float(n) ** d * out.values)


def kernel_row(kernel: KernelSpec, x: Sequence[float]) -> np.ndarray:
    """G(x, i/n) for every interior i."""
    weighted = kernel.coefficients * _outer(kernel.axis_values(x))
    return apply_along_axes(weighted, sine_matrix(kernel.grid.n))


def _outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(())
    for vec in vectors:
        out = np.multiply.outer(out, vec)
    return out


def kernel_integral_variance(table: CovarianceTable, kernel: KernelSpec, x: Sequence[float]) -> float:
    """E|int G dF|^2 at x as the quadratic form sum_ij G_i C(i - j) G_j."""
    row = np.pad(kernel_row(kernel, x), [(1, 0)] * kernel.grid.d).reshape(-1)
    return float(row @ table.dense_matrix() @ row)


def describe_sampler(table: CovarianceTable, backend: str = "auto") -> dict:
    """Validation summary for the noise report."""
    sampler = get_sampler(table, backend)
    report: dict = {"backend": sampler.name, "variance": table.variance}
    if isinstance(sampler, CirculantSampler):
        report["period"] = sampler.period
        report["psd"] = True
    elif sampler.min_eigenvalue is None:
        report["psd"] = True
        report["psd_method"] = "cholesky"
    else:
        report["psd"] = True
        report["psd_method"] = "eigh"
        report["min_eigenvalue"] = sampler.min_eigenvalue
    report["symmetric"] = sampler.symmetric
    return report


CellPair = tuple[Sequence[int], Sequence[int]]

# tolerance of every sampling check, in standard errors
CHECK_SIGMAS = 3.0


def default_check_pairs(grid: GridSpec) -> list[CellPair]:
    """Three cell variances and three covariances (axis neighbour, diagonal neighbour, far corner)."""
    d, n = grid.d, grid.n
    zero, last = (0,) * d, (n - 1,) * d
    mid = (n // 2,) * d
    below = mid[:-1] + (mid[-1] - 1,)
    axis = (1,) + (0,) * (d - 1)
    return [(zero, zero), (mid, mid), (last, last), (zero, axis), (mid, below), ((0,) * d, (1,) * d), (zero, last)]


def _moment_row(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    prod = a * b
    return float(prod.mean()), float(prod.std(ddof=1) / math.sqrt(prod.size))


def noise_variance_check(
    table: CovarianceTable,
    seed: int,
    samples: int = 2000,
    pairs: Optional[Sequence[CellPair]] = None,
    backend: str = "auto",
) -> list[dict]:
    """Empirical E[F(D_a) F(D_b)] against C(a - b) on cell pairs, with standard errors."""
    grid = table.grid
    draws = sample_batch(grid, table, seed, range(samples), backend)
    rows = []
    for a, b in pairs or default_check_pairs(grid):
        empirical, se = _moment_row(draws[(slice(None),) + tuple(a)], draws[(slice(None),) + tuple(b)])
        expected = table.entry(np.subtract(a, b))
        rows.append({"cells": [list(a), list(b)], "empirical": empirical, "expected": expected, "stderr": se})
    return rows


def check_passed(rows: Sequence[dict], sigmas: float = CHECK_SIGMAS) -> bool:
    return all(abs(r["empirical"] - r["expected"]) <= sigmas * r["stderr"] for r in rows)


def backend_agreement(
    table: CovarianceTable,
    seed: int,
    samples: int = 2000,
    pairs: Optional[Sequence[CellPair]] = None,
) -> list[dict]:
    """Two-sample z-scores of cell moments between Cholesky and circulant draws.

    The circulant draws use sample indices after the Cholesky ones, so the
    two samples are independent.
    """
    grid = table.grid
    chol = sample_batch(grid, table, seed, range(samples), "cholesky")
    circ = sample_batch(grid, table, seed, range(samples, 2 * samples), "circulant")
    mid = (grid.n // 2,) * grid.d
    cells = [(0,) * grid.d, mid]
    tests: list[tuple[str, CellPair]] = [("mean", (c, c)) for c in cells] + [("variance", (c, c)) for c in cells]
    tests += [("covariance", p) for p in (pairs or default_check_pairs(grid)) if tuple(p[0]) != tuple(p[1])]
    rows = []
    for statistic, (a, b) in tests:
        x1, x2 = chol[(slice(None),) + tuple(a)], circ[(slice(None),) + tuple(a)]
        if statistic == "mean":
            y1, y2 = np.ones_like(x1), np.ones_like(x2)
        else:
            y1, y2 = chol[(slice(None),) + tuple(b)], circ[(slice(None),) + tuple(b)]
        m1, s1 = _moment_row(x1, y1)
        m2, s2 = _moment_row(x2, y2)
        spread = math.hypot(s1, s2)
        z = (m1 - m2) / spread if spread > 0 else 0.0
        rows.append({"statistic": statistic, "cells": [list(a), list(b)], "cholesky": m1, "circulant": m2, "z": z})
    return rows
