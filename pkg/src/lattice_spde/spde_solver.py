"""Nonlinear lattice system A^eps u = f(u) + g_n + n^d F and its mild-form solver."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import roots_legendre

from .errors import ConfigurationError, NonConvergenceError, NumericalError
from .green_kernel import apply_green, gamma_exponent, lattice_kernel, sup_l2_norm
from .lattice_core import CellField, GridSpec, LatticeField, eigenvalues, orthonormal_sine_matrix
from .mollifier import MollifierTable, build_psi, epsilon_of_n, lattice_psi_hat
from .noise_field import NoiseRealization

logger = logging.getLogger(__name__)

DENSE_LIMIT = 1000

ArrayFn = Callable[[np.ndarray], np.ndarray]

F1_KINDS = ("zero", "constant", "arctan", "tanh")
SOURCE_KINDS = ("zero", "constant", "cosine_product", "linear")


@dataclass(frozen=True)
class AuditReport:
    worst: float
    samples: int
    passed: bool


@dataclass(frozen=True, eq=False)
class DriftSpec:
    """f = f1 + f2 with |f1| <= M non-decreasing and f2 L-Lipschitz."""

    f1: ArrayFn
    f2: ArrayFn
    M: float
    L: float
    name: str = "custom"

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        return self.f1(u) + self.f2(u)

    @classmethod
    def from_terms(
        cls,
        f1: str = "zero",
        shift: float = 0.0,
        f2_slope: float = 0.0,
        f2_intercept: float = 0.0,
    ) -> "DriftSpec":
        """Drift built from a named bounded part plus an affine Lipschitz part."""
        if f1 not in F1_KINDS:
            raise ConfigurationError(f"Unknown f1: {f1}. Must be one of: {', '.join(F1_KINDS)}")
        base: dict[str, tuple[ArrayFn, float]] = {
            "zero": (np.zeros_like, 0.0),
            "constant": (np.zeros_like, 0.0),
            "arctan": (np.arctan, math.pi / 2),
            "tanh": (np.tanh, 1.0),
        }
        fn, bound = base[f1]

        def bounded(u: np.ndarray) -> np.ndarray:
            return fn(u) + shift

        def lipschitz(u: np.ndarray) -> np.ndarray:
            return f2_slope * u + f2_intercept

        name = f"{f1}{shift:+g}" if shift else f1
        if f2_slope or f2_intercept:
            name += f" + {f2_slope:g}u{f2_intercept:+g}"
        return cls(f1=bounded, f2=lipschitz, M=bound + abs(shift), L=abs(f2_slope), name=name)

    def shifted(self, c: float) -> "DriftSpec":
        """f + c, absorbed into the bounded part."""
        f1 = self.f1
        return DriftSpec(
            f1=lambda u: f1(u) + c,
            f2=self.f2,
            M=self.M + abs(c),
            L=self.L,
            name=f"{self.name}{c:+g}",
        )

    def monotonicity_audit(self, samples: int = 10_000, seed: int = 0, scale: float = 10.0) -> AuditReport:
        """min of (u - v)(f(u) - f(v)) + L (u - v)^2 over random pairs."""
        rng = np.random.default_rng(seed)
        u = scale * rng.standard_normal(samples)
        v = scale * rng.standard_normal(samples)
        values = (u - v) * (self(u) - self(v)) + self.L * (u - v) ** 2
        worst = float(values.min())
        return AuditReport(worst=worst, samples=samples, passed=worst >= -1e-12 * max(1.0, scale**2))

    def bound_audit(self, samples: int = 10_000, seed: int = 0, scale: float = 10.0) -> AuditReport:
        """max |f1| - M over random points."""
        rng = np.random.default_rng(seed)
        u = scale * rng.standard_normal(samples)
        worst = float(np.max(np.abs(self.f1(u))) - self.M)
        return AuditReport(worst=worst, samples=samples, passed=worst <= 1e-12 * max(1.0, self.M))


def make_source(kind: str = "cosine_product", amplitude: float = 1.0) -> ArrayFn:
    """g evaluated on points of shape (P, d)."""
    if kind not in SOURCE_KINDS:
        raise ConfigurationError(f"Unknown source: {kind}. Must be one of: {', '.join(SOURCE_KINDS)}")
    if kind == "zero":
        return lambda x: np.zeros(np.atleast_2d(x).shape[0])
    if kind == "constant":
        return lambda x: np.full(np.atleast_2d(x).shape[0], float(amplitude))
    if kind == "linear":
        return lambda x: amplitude * np.atleast_2d(x)[:, 0]
    return lambda x: amplitude * np.prod(np.cos(np.pi * np.atleast_2d(x)), axis=1)


@dataclass(frozen=True)
class SolveConfig:
    """Exponents, tolerances and gates of one solve."""

    theta: float
    lam: float
    alpha: float
    tolerance: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    eps: Optional[float] = None
    kernel_gate: bool = True

    @property
    def alpha_prime(self) -> float:
        return self.alpha / (self.alpha - 1.0)

    def gamma(self, d: int) -> float:
        return gamma_exponent(self.lam, self.theta, d)

    def smoothing(self, grid: GridSpec) -> float:
        return epsilon_of_n(grid.n, self.theta, grid.d) if self.eps is None else float(self.eps)

    def validate(self, grid: GridSpec, drift: DriftSpec, kernel_constant: Optional[float] = None) -> None:
        d = grid.d
        if self.theta <= 2 * d - 4:
            raise ConfigurationError(f"theta={self.theta} must exceed 2d-4={2 * d - 4}")
        if not 0.0 < self.lam < 1.0:
            raise ConfigurationError(f"lambda={self.lam} must lie in (0, 1)")
        if self.alpha <= 1.0:
            raise ConfigurationError(f"alpha={self.alpha} must exceed 1")
        if not 0.0 < self.damping <= 1.0:
            raise ConfigurationError(f"damping={self.damping} must lie in (0, 1]")
        if self.tolerance <= 0 or self.max_iter < 1:
            raise ConfigurationError("tolerance must be positive and max_iter >= 1")
        if self.eps is not None and self.eps < 0:
            raise ConfigurationError(f"eps={self.eps} must be >= 0")
        if drift.L >= 4 * d:
            raise ConfigurationError(
                f"Lipschitz constant L={drift.L:g} violates the contraction gate L < 4d = {4 * d}"
            )
        if self.kernel_gate and kernel_constant is not None and drift.L * kernel_constant >= 1.0:
            raise ConfigurationError(
                f"Lipschitz constant L={drift.L:g} violates the kernel gate L < 1/C(theta) = {1.0 / kernel_constant:.4g}"
            )


@dataclass(frozen=True, eq=False)
class Solution:
    """Lattice solution with iteration diagnostics."""

    field: LatticeField
    iterations: int
    residual: float
    residual_history: list[float]
    contraction_ratios: list[float] = field(default_factory=list)
    apriori_norm: float = 0.0
    linear_norm: float = 0.0
    eps: float = 0.0
    kernel_constant: float = 0.0
    alpha_prime: float = 2.0
    converged: bool = False

    @property
    def max_contraction(self) -> float:
        return max(self.contraction_ratios) if self.contraction_ratios else 0.0

    def to_dict(self) -> dict:
        return {
            "d": self.field.grid.d,
            "n": self.field.grid.n,
            "iterations": self.iterations,
            "residual": self.residual,
            "residual_history": list(self.residual_history),
            "contraction_ratios": list(self.contraction_ratios),
            "max_contraction": self.max_contraction,
            "apriori_norm": self.apriori_norm,
            "linear_norm": self.linear_norm,
            "alpha_prime": self.alpha_prime,
            "eps": self.eps,
            "kernel_constant": self.kernel_constant,
            "converged": self.converged,
            "l2_norm": self.field.l2_norm(),
            "sup_norm": self.field.sup_norm(),
        }


def cell_midpoints(grid: GridSpec) -> np.ndarray:
    """Midpoints of all n^d cells in lexicographic order, shape (n^d, d)."""
    axes = [(np.arange(grid.n) + 0.5) / grid.n] * grid.d
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=-1)


def make_g_n(g: ArrayFn, grid: GridSpec) -> CellField:
    """Cell-midpoint step approximation of g."""
    values = np.asarray(g(cell_midpoints(grid)), dtype=float).reshape(grid.cell_shape)
    return CellField(grid, values)


def step_error(g: ArrayFn, grid: GridSpec, p: float = 2.0, order: int = 8) -> float:
    """||g - g_n||_{L^p(D)} by tensor Gauss-Legendre quadrature on every cell."""
    t, w = roots_legendre(order)
    local = 0.5 * (t + 1.0)
    n = grid.n
    coords = ((np.arange(n)[:, None] + local[None, :]) / n).reshape(-1)
    weights = np.tile(0.5 * w / n, n)
    mids = np.repeat((np.arange(n) + 0.5) / n, order)
    mesh = np.meshgrid(*[coords] * grid.d, indexing="ij")
    mid_mesh = np.meshgrid(*[mids] * grid.d, indexing="ij")
    points = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    centers = np.stack([m.reshape(-1) for m in mid_mesh], axis=-1)
    wts = np.ones(())
    for _ in range(grid.d):
        wts = np.multiply.outer(wts, weights)
    diff = np.abs(np.asarray(g(points)) - np.asarray(g(centers)))
    return float(np.sum(wts.reshape(-1) * diff**p) ** (1.0 / p))


def _interior(source: Union[CellField, LatticeField], grid: GridSpec) -> np.ndarray:
    if source.grid != grid:
        raise ConfigurationError(f"Source grid ({source.grid}) does not match {grid}")
    if isinstance(source, CellField):
        return source.interior().values
    return source.values


def _check_noise(noise: NoiseRealization, grid: GridSpec) -> None:
    if noise.grid != grid:
        raise ConfigurationError(f"Noise grid ({noise.grid}) does not match {grid}")


def solve(
    grid: GridSpec,
    drift: DriftSpec,
    g_n: Union[CellField, LatticeField],
    noise: NoiseRealization,
    cfg: SolveConfig,
    mollifier: Optional[MollifierTable] = None,
) -> Solution:
    """Picard iteration u <- (1 - w) u + w Phi(u) on the mild form.

    Phi(u) = G(f(u)) + G(g_n) + n^d G(F), with G the lattice kernel action.
    The residual is the sup norm of u - Phi(u) at the returned iterate.
    """
    mollifier = mollifier or build_psi()
    eps = cfg.smoothing(grid)
    kernel = lattice_kernel(grid, eps, mollifier)
    kernel_constant = sup_l2_norm(kernel).sup
    cfg.validate(grid, drift, kernel_constant)
    _check_noise(noise, grid)

    rhs = _interior(g_n, grid) + float(grid.n) ** grid.d * noise.interior()
    linear = apply_green(kernel, LatticeField(grid, rhs)).values
    omega = cfg.damping

    u = np.zeros(grid.interior_shape)
    history: list[float] = []
    converged = False
    for _ in range(cfg.max_iter):
        phi = apply_green(kernel, LatticeField(grid, drift(u))).values + linear
        residual = float(np.max(np.abs(u - phi))) if u.size else 0.0
        history.append(residual)
        logger.debug("picard %s iter=%d residual=%.3e", grid, len(history), residual)
        if residual <= cfg.tolerance:
            converged = True
            break
        u = (1.0 - omega) * u + omega * phi
    if not converged:
        raise NonConvergenceError(
            f"Fixed-point iteration did not reach tolerance {cfg.tolerance:g} in {cfg.max_iter} iterations "
            f"(last residual {history[-1]:.3e})",
            history,
            partial=u,
        )

    result = LatticeField(grid, u)
    floor = 1e-13 * (1.0 + result.sup_norm())
    ratios = [b / a for a, b in zip(history[:-1], history[1:]) if a > floor and b > floor]
    return Solution(
        field=result,
        iterations=len(history),
        residual=history[-1],
        residual_history=history,
        contraction_ratios=ratios,
        apriori_norm=result.lp_norm(cfg.alpha_prime),
        linear_norm=LatticeField(grid, linear).lp_norm(cfg.alpha_prime),
        eps=eps,
        kernel_constant=kernel_constant,
        alpha_prime=cfg.alpha_prime,
        converged=converged,
    )


def _kron_sine(grid: GridSpec) -> np.ndarray:
    q1 = orthonormal_sine_matrix(grid.n)
    q = np.ones((1, 1))
    for _ in range(grid.d):
        q = np.kron(q, q1)
    return q


def materialize_operator(grid: GridSpec, eps: float, mollifier: Optional[MollifierTable] = None) -> np.ndarray:
    """Dense A^eps = Q diag(lambda_beta / Psi_hat(eps beta)) Q on the interior."""
    if grid.size > DENSE_LIMIT:
        raise ConfigurationError(f"Dense operator limited to (n-1)^d <= {DENSE_LIMIT}, got {grid.size}")
    mollifier = mollifier or build_psi()
    weights = np.asarray(lattice_psi_hat(eps, grid.d, grid.n, mollifier)).reshape(-1)
    if np.any(weights < 1e-300):
        raise NumericalError("Psi_hat underflows on the lattice; A^eps is not defined")
    q = _kron_sine(grid)
    diag = eigenvalues(grid).reshape(-1) / weights
    return q @ (diag[:, None] * q)


def dense_solve_oracle(
    grid: GridSpec,
    drift: DriftSpec,
    g_n: Union[CellField, LatticeField],
    noise: NoiseRealization,
    eps: float,
    mollifier: Optional[MollifierTable] = None,
    max_iter: int = 50,
) -> Solution:
    """Damped Newton on the materialized system; a test oracle for tiny grids."""
    if grid.size > DENSE_LIMIT:
        raise ConfigurationError(f"Grid too large for the dense oracle: (n-1)^d = {grid.size} > {DENSE_LIMIT}")
    _check_noise(noise, grid)
    a = materialize_operator(grid, eps, mollifier)
    rhs = (_interior(g_n, grid) + float(grid.n) ** grid.d * noise.interior()).reshape(-1)

    def system(v: np.ndarray) -> np.ndarray:
        return a @ v - drift(v) - rhs

    u = np.zeros(grid.size)
    history: list[float] = []
    converged = False
    for _ in range(max_iter):
        res = system(u)
        norm = float(np.max(np.abs(res))) if res.size else 0.0
        history.append(norm)
        step_h = 1e-6 * (1.0 + np.abs(u))
        slope = (drift(u + step_h) - drift(u - step_h)) / (2.0 * step_h)
        jac = a - np.diag(slope)
        delta = np.linalg.solve(jac, -res)
        t = 1.0
        while t > 1e-4 and np.max(np.abs(system(u + t * delta))) > (1.0 - 1e-4 * t) * norm:
            t *= 0.5
        u = u + t * delta
        if np.max(np.abs(t * delta)) <= 1e-15 * (1.0 + np.max(np.abs(u))):
            converged = True
            break
    mild = np.linalg.solve(a, drift(u) + rhs)
    residual = float(np.max(np.abs(u - mild))) if u.size else 0.0
    return Solution(
        field=LatticeField(grid, u.reshape(grid.interior_shape)),
        iterations=len(history),
        residual=residual,
        residual_history=history,
        eps=eps,
        converged=converged,
    )


@dataclass(frozen=True)
class ComparisonReport:
    valid: bool
    ordered: bool
    max_violation: float


def comparison_test(
    grid: GridSpec,
    drift_f: DriftSpec,
    drift_h: DriftSpec,
    g_n: Union[CellField, LatticeField],
    noise: NoiseRealization,
    cfg: SolveConfig,
    mollifier: Optional[MollifierTable] = None,
    tolerance: float = 1e-8,
    samples: int = 10_000,
    seed: int = 0,
    scale: float = 10.0,
) -> ComparisonReport:
    """With f >= h, the solutions on shared inputs satisfy u_f <= u_h cellwise."""
    rng = np.random.default_rng(seed)
    points = scale * rng.standard_normal(samples)
    if np.any(drift_f(points) < drift_h(points) - 1e-12):
        logger.warning("comparison precondition f >= h fails on sampled points")
        return ComparisonReport(valid=False, ordered=False, max_violation=math.nan)
    u_f = solve(grid, drift_f, g_n, noise, cfg, mollifier).field.values
    u_h = solve(grid, drift_h, g_n, noise, cfg, mollifier).field.values
    violation = float(np.max(u_f - u_h)) if u_f.size else 0.0
    return ComparisonReport(valid=True, ordered=violation <= tolerance, max_violation=violation)


@dataclass(frozen=True)
class AprioriRow:
    n: int
    estimate: float
    stderr: float
    samples: int


@dataclass(frozen=True)
class AprioriReport:
    rows: list[AprioriRow]
    p: float
    alpha_prime: float
    bounded: bool
    kappa: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "alpha_prime": self.alpha_prime,
            "bounded": self.bounded,
            "kappa": self.kappa,
            "rows": [row.__dict__ for row in self.rows],
        }


def apriori_norm_check(
    solutions_by_n: Mapping[int, Sequence[Solution]],
    p: float,
    alpha_prime: float,
    drift: Optional[DriftSpec] = None,
    growth: float = 1.25,
) -> AprioriReport:
    """(E ||u_n||^p_{L^alpha'})^{1/p} per n and a no-growth check across n."""
    if not 1.0 <= p <= alpha_prime:
        raise ConfigurationError(f"p={p} must lie in [1, alpha'={alpha_prime:g}]")
    rows = []
    for n in sorted(solutions_by_n):
        sols = list(solutions_by_n[n])
        if not sols:
            raise ConfigurationError(f"No solutions for n={n}")
        norms = np.array([s.field.lp_norm(alpha_prime) for s in sols])
        moments = norms**p
        mean = float(moments.mean())
        estimate = mean ** (1.0 / p)
        stderr = 0.0
        if len(sols) > 1 and mean > 0:
            stderr = float(moments.std(ddof=1) / math.sqrt(len(sols))) * estimate / (p * mean)
        rows.append(AprioriRow(n=int(n), estimate=estimate, stderr=stderr, samples=len(sols)))
    bounded = rows[-1].estimate <= growth * rows[0].estimate + 1e-300 if rows else True

    kappa = None
    if drift is not None:
        every = [s for n in solutions_by_n for s in solutions_by_n[n]]
        c1 = max(s.kernel_constant for s in every)
        b = float(np.mean([s.linear_norm for s in every]))
        f2_zero = abs(float(np.asarray(drift.f2(np.zeros(1)))[0]))
        denom = 1.0 - drift.L * c1
        kappa = ((drift.M + f2_zero) * c1 + b) / denom if denom > 0 else math.inf
    return AprioriReport(rows=rows, p=p, alpha_prime=alpha_prime, bounded=bool(bounded), kappa=kappa)
