"""Grids, multi-indices, step fields and the discrete sine eigenbasis."""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Optional, Sequence, TypeVar, Union

import numpy as np
from scipy import fft as sp_fft

from .errors import ConfigurationError, DomainError, GridIndexError

logger = logging.getLogger(__name__)

# Below this resolution the explicit sine matrix is used instead of the DST.
DIRECT_THRESHOLD = 4

TRANSFORM_METHODS = ("auto", "dst", "direct")

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of the unit cube with n cells per axis."""

    d: int
    n: int

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 1:
            raise ConfigurationError(f"Grid dimension must be an integer >= 1, got {self.d}")
        if int(self.n) != self.n or self.n < 2:
            raise ConfigurationError(f"Grid resolution must be an integer >= 2, got {self.n}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return (self.n - 1,) * self.d

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        """Number of interior indices, (n-1)^d."""
        return (self.n - 1) ** self.d

    @property
    def cell_count(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return float(self.n) ** (-self.d)

    def coarsen(self, factor: int) -> "GridSpec":
        if factor < 1 or self.n % factor:
            raise ConfigurationError(f"Factor {factor} does not divide n={self.n}")
        return GridSpec(self.d, self.n // factor)

    def __str__(self) -> str:
        return f"d={self.d}, n={self.n}"


@dataclass(frozen=True)
class MultiIndex:
    """A multi-index beta with positive integer components."""

    components: tuple[int, ...]

    def __post_init__(self) -> None:
        comps = tuple(int(c) for c in self.components)
        if not comps:
            raise GridIndexError("Multi-index must have at least one component")
        if min(comps) < 1:
            raise GridIndexError(f"Multi-index components must be positive, got {comps}")
        object.__setattr__(self, "components", comps)

    @property
    def d(self) -> int:
        return len(self.components)

    @property
    def norm_sq(self) -> int:
        return sum(c * c for c in self.components)

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def in_lattice(self, grid: GridSpec) -> bool:
        """Whether beta belongs to I^d_n."""
        return self.d == grid.d and max(self.components) <= grid.n - 1

    def position(self) -> tuple[int, ...]:
        """Array position of beta in an interior-shaped array."""
        return tuple(c - 1 for c in self.components)

    def __iter__(self) -> Iterator[int]:
        return iter(self.components)

    def __str__(self) -> str:
        return "(" + ",".join(str(c) for c in self.components) + ")"


IndexLike = Union[MultiIndex, Sequence[int]]


def as_multi_index(beta: IndexLike) -> MultiIndex:
    if isinstance(beta, MultiIndex):
        return beta
    return MultiIndex(tuple(beta))


def multi_indices(grid: GridSpec) -> Iterator[MultiIndex]:
    """Iterate over I^d_n in lexicographic order."""
    for comps in itertools.product(range(1, grid.n), repeat=grid.d):
        yield MultiIndex(comps)


def _check_point(x: Sequence[float], d: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != d:
        raise DomainError(f"Point has {arr.shape[0]} coordinates, expected {d}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"Point {arr.tolist()} is outside [0,1)^{d}")
    return arr


def _floor_cells(x: np.ndarray, n: int) -> np.ndarray:
    j = np.floor(x * n).astype(np.int64)
    # keep floor(n*x) consistent with the float grid points j/n
    j = np.where(x >= (j + 1) / n, j + 1, j)
    j = np.where(x < j / n, j - 1, j)
    return np.clip(j, 0, n - 1)


def kappa_n(x: Sequence[float], grid: GridSpec) -> tuple[int, ...]:
    """Index j of the cell D_j = prod [j_k/n, (j_k+1)/n) containing x."""
    arr = _check_point(x, grid.d)
    return tuple(int(v) for v in _floor_cells(arr, grid.n))


def kappa_points(points: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Vectorized kappa_n over an array of shape (P, d)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != grid.d:
        raise DomainError(f"Points have {pts.shape[1]} coordinates, expected {grid.d}")
    if not np.all(np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts >= 1.0):
        raise DomainError(f"Some points are outside [0,1)^{grid.d}")
    return _floor_cells(pts, grid.n)


def sine_basis(beta: IndexLike, x: Sequence[float]) -> float:
    """v_beta(x) = prod sin(beta_k pi x_k), exactly zero on the boundary."""
    b = as_multi_index(beta)
    arr = np.asarray(x, dtype=float).reshape(-1)
    if arr.shape[0] != b.d:
        raise DomainError(f"Point has {arr.shape[0]} coordinates, expected {b.d}")
    if np.any((arr == 0.0) | (arr == 1.0)):
        return 0.0
    return float(np.prod(np.sin(np.asarray(b.components) * np.pi * arr)))


def sine_basis_points(beta: IndexLike, points: np.ndarray) -> np.ndarray:
    b = as_multi_index(beta)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.prod(np.sin(np.asarray(b.components) * np.pi * pts), axis=1)
    on_boundary = np.any((pts == 0.0) | (pts == 1.0), axis=1)
    return np.where(on_boundary, 0.0, values)


@lru_cache(maxsize=64)
def sine_matrix(n: int) -> np.ndarray:
    """S[b-1, i-1] = sin(pi b i / n) for b, i in 1..n-1 (symmetric)."""
    idx = np.arange(1, n)
    mat = np.sin(np.pi * np.outer(idx, idx) / n)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def orthonormal_sine_matrix(n: int) -> np.ndarray:
    mat = math.sqrt(2.0 / n) * sine_matrix(n)
    mat.setflags(write=False)
    return mat


def c_factor(l: int, n: int) -> float:
    """c_l = sin^2(l pi / 2n) / (l pi / 2n)^2, which lies in [4/pi^2, 1]."""
    t = l * math.pi / (2 * n)
    return math.sin(t) ** 2 / t**2


def axis_eigenvalues(n: int) -> np.ndarray:
    """One-dimensional eigenvalues -4 n^2 sin^2(b pi / 2n), b = 1..n-1."""
    b = np.arange(1, n)
    return -4.0 * n * n * np.sin(b * np.pi / (2 * n)) ** 2


def eigenvalue(beta: IndexLike, grid: GridSpec) -> float:
    """lambda_beta of the difference operator A."""
    b = as_multi_index(beta)
    if not b.in_lattice(grid):
        raise GridIndexError(f"Multi-index {b} is outside I^{grid.d}_{grid.n}")
    n = grid.n
    return -sum(4.0 * n * n * math.sin(c * math.pi / (2 * n)) ** 2 for c in b.components)


def eigenvalues(grid: GridSpec) -> np.ndarray:
    """All lambda_beta as an interior-shaped array."""
    return broadcast_sum([axis_eigenvalues(grid.n)] * grid.d)


def beta_norm_sq(grid: GridSpec, n_modes: int | None = None) -> np.ndarray:
    """|beta|^2 over {1..n_modes-1}^d (defaults to the lattice set)."""
    m = grid.n if n_modes is None else n_modes
    b2 = np.arange(1, m, dtype=float) ** 2
    return broadcast_sum([b2] * grid.d)


def broadcast_sum(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.zeros(())
    for axis, vec in enumerate(vectors):
        shape = [1] * len(vectors)
        shape[axis] = vec.shape[0]
        out = out + vec.reshape(shape)
    return out


def broadcast_product(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(())
    for axis, vec in enumerate(vectors):
        shape = [1] * len(vectors)
        shape[axis] = vec.shape[0]
        out = out * vec.reshape(shape)
    return out


def apply_along_axes(array: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Apply ``matrix`` to every axis of ``array`` (separable transform)."""
    out = np.asarray(array, dtype=float)
    for axis in range(out.ndim):
        out = np.moveaxis(np.tensordot(matrix, out, axes=(1, axis)), 0, axis)
    return out


def contract_axes(array: np.ndarray, vectors: Sequence[np.ndarray]) -> float:
    """sum_beta array[beta] * prod_k vectors[k][beta_k]."""
    out = np.asarray(array, dtype=float)
    for vec in vectors:
        out = np.tensordot(vec, out, axes=(0, 0))
    return float(out)


@dataclass(frozen=True, eq=False)
class LatticeField:
    """Step function u(x) = u(kappa_n(x)) with zero boundary values."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.shape != self.grid.interior_shape:
            raise ConfigurationError(
                f"Field shape {arr.shape} does not match interior shape {self.grid.interior_shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "LatticeField":
        return cls(grid, np.zeros(grid.interior_shape))

    def evaluate(self, x: Sequence[float]) -> float:
        j = kappa_n(x, self.grid)
        if min(j) == 0:
            return 0.0
        return float(self.values[tuple(c - 1 for c in j)])

    def evaluate_points(self, points: np.ndarray) -> np.ndarray:
        j = kappa_points(points, self.grid)
        inside = np.all(j > 0, axis=1)
        out = np.zeros(j.shape[0])
        if np.any(inside):
            idx = tuple((j[inside] - 1).T)
            out[inside] = self.values[idx]
        return out

    def hs_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2)))

    def l2_norm(self) -> float:
        return self.grid.n ** (-self.grid.d / 2) * self.hs_norm()

    def lp_norm(self, p: float) -> float:
        if p < 1:
            raise ConfigurationError(f"Norm exponent must be >= 1, got {p}")
        if math.isinf(p):
            return self.sup_norm()
        return float((self.grid.cell_volume * np.sum(np.abs(self.values) ** p)) ** (1.0 / p))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_cells(self) -> np.ndarray:
        """Values on all n^d cells, zero on index-0 cells."""
        return np.pad(self.values, [(1, 0)] * self.grid.d)


@dataclass(frozen=True, eq=False)
class CellField:
    """Values on every cell D_j, j in {0..n-1}^d."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.shape != self.grid.cell_shape:
            raise ConfigurationError(
                f"Cell field shape {arr.shape} does not match cell shape {self.grid.cell_shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def interior(self) -> LatticeField:
        return LatticeField(self.grid, self.values[(slice(1, None),) * self.grid.d])

    def l2_norm(self) -> float:
        return self.lp_norm(2.0)

    def lp_norm(self, p: float) -> float:
        return float((self.grid.cell_volume * np.sum(np.abs(self.values) ** p)) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class SpectralCoeffs:
    """Coefficients in the orthonormal basis (2/n)^{d/2} U_beta.

    Parseval reads sum(values^2) == sum(coefficients^2); the L2(D) norm of the
    step field is n^{-d/2} times either side. Kernel coefficients, which are
    written against v_beta with ||v_beta||^2 = 2^{-d}, pick up a factor 2^{-d}
    when applied in this basis.
    """

    grid: GridSpec
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coefficients, dtype=float)
        if arr.shape != self.grid.interior_shape:
            raise ConfigurationError(
                f"Coefficient shape {arr.shape} does not match {self.grid.interior_shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "coefficients", arr)

    def hs_norm(self) -> float:
        return float(np.sqrt(np.sum(self.coefficients**2)))


def sine_transform(values: np.ndarray, n: int, method: str = "auto") -> np.ndarray:
    """Orthonormal type-I sine transform along every axis (an involution)."""
    if method not in TRANSFORM_METHODS:
        raise ConfigurationError(f"Unknown transform method: {method}. Must be one of: {', '.join(TRANSFORM_METHODS)}")
    if method == "auto":
        method = "direct" if n < DIRECT_THRESHOLD else "dst"
    if method == "dst":
        return sp_fft.dstn(np.asarray(values, dtype=float), type=1, norm="ortho")
    return apply_along_axes(values, orthonormal_sine_matrix(n))


def to_spectral(field: LatticeField, method: str = "auto") -> SpectralCoeffs:
    return SpectralCoeffs(field.grid, sine_transform(field.values, field.grid.n, method))


def from_spectral(coeffs: SpectralCoeffs, method: str = "auto") -> LatticeField:
    return LatticeField(coeffs.grid, sine_transform(coeffs.coefficients, coeffs.grid.n, method))


def apply_A(field: LatticeField) -> LatticeField:
    """(Au)_i = sum_k n^2 (u_{i-e_k} - 2 u_i + u_{i+e_k}) with zero boundary."""
    d, n = field.grid.d, field.grid.n
    padded = np.pad(field.values, 1)
    center = (slice(1, -1),) * d
    out = np.zeros(field.grid.interior_shape)
    for axis in range(d):
        lower = list(center)
        upper = list(center)
        lower[axis] = slice(0, -2)
        upper[axis] = slice(2, None)
        out += padded[tuple(lower)] - 2.0 * padded[center] + padded[tuple(upper)]
    return LatticeField(field.grid, n * n * out)


def sampled_basis(beta: IndexLike, grid: GridSpec) -> LatticeField:
    """U_beta: v_beta sampled at the interior lattice points i/n."""
    b = as_multi_index(beta)
    if not b.in_lattice(grid):
        raise GridIndexError(f"Multi-index {b} is outside I^{grid.d}_{grid.n}")
    i = np.arange(1, grid.n)
    factors = [np.sin(c * np.pi * i / grid.n) for c in b.components]
    return LatticeField(grid, broadcast_product(factors))


def worker_count(threads: Optional[int] = None) -> int:
    return threads or os.cpu_count() or 1


def thread_map(fn: Callable[[T], R], items: Iterable[T], threads: Optional[int] = None) -> list[R]:
    """Ordered map over a thread pool; one worker runs inline."""
    items = list(items)
    workers = min(worker_count(threads), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
