"""Run configuration: one document, dataclass sections, validated before any work."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .convergence_lab import ExperimentPlan
from .errors import ConfigurationError
from .lattice_core import GridSpec
from .mollifier import MollifierTable, build_psi
from .noise_field import BACKENDS, CorrelationModel
from .spde_solver import ArrayFn, DriftSpec, SolveConfig, make_source

logger = logging.getLogger(__name__)


@dataclass
class NoiseSection:
    kind: str = "gaussian"
    parameter: float = 0.1
    backend: str = "auto"
    scale: float = 1.0
    validation_samples: int = 200


@dataclass
class DriftSection:
    f1: str = "arctan"
    shift: float = 0.0
    f2_slope: float = 0.05
    f2_intercept: float = 0.0


@dataclass
class SourceSection:
    kind: str = "cosine_product"
    amplitude: float = 1.0


@dataclass
class SolverSection:
    theta: float = 12.0
    lam: float = 0.8
    alpha: float = 1.25
    tolerance: float = 1e-10
    max_iter: int = 200
    damping: float = 1.0
    eps: Optional[float] = None
    kernel_gate: bool = True


@dataclass
class MollifierSection:
    half_width: float = 1.0
    order: int = 256


@dataclass
class ExperimentSection:
    ladder: list[int] = field(default_factory=lambda: [4, 8, 16])
    n_ref: int = 32
    samples: int = 100
    p_values: list[float] = field(default_factory=lambda: [2.0])
    bootstrap: int = 1000


@dataclass
class KernelSection:
    ns: list[int] = field(default_factory=lambda: [4, 8, 16])
    theta: Optional[float] = None
    eps_factors: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0])
    n_points: int = 64
    n_ref: Optional[int] = None
    truncation_points: int = 8
    smoothing_eps: list[float] = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    smoothing_alpha: float = 1.2
    smoothing_lam: float = 0.5
    smoothing_samples: int = 100_000
    growth_threshold: float = 0.1


@dataclass
class HolderSection:
    n: Optional[int] = 16
    samples: int = 8
    lags: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5, 6, 8, 10])


SECTIONS = {
    "noise": NoiseSection,
    "drift": DriftSection,
    "source": SourceSection,
    "solver": SolverSection,
    "mollifier": MollifierSection,
    "experiment": ExperimentSection,
    "kernel": KernelSection,
    "holder": HolderSection,
}


@dataclass
class RunConfig:
    """Resolved configuration of one CLI run."""

    d: int = 4
    n: int = 8
    seed: int = 0
    threads: Optional[int] = None
    out: str = "results"
    noise: NoiseSection = field(default_factory=NoiseSection)
    drift: DriftSection = field(default_factory=DriftSection)
    source: SourceSection = field(default_factory=SourceSection)
    solver: SolverSection = field(default_factory=SolverSection)
    mollifier: MollifierSection = field(default_factory=MollifierSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    holder: HolderSection = field(default_factory=HolderSection)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "RunConfig":
        data = dict(data or {})
        top = {f.name for f in dataclasses.fields(cls)} - set(SECTIONS)
        unknown = set(data) - top - set(SECTIONS)
        if unknown:
            raise ConfigurationError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        kwargs: dict[str, Any] = {k: data[k] for k in top if k in data}
        for name, section in SECTIONS.items():
            raw = data.get(name) or {}
            if not isinstance(raw, dict):
                raise ConfigurationError(f"Config section '{name}' must be a mapping")
            allowed = {f.name for f in dataclasses.fields(section)}
            bad = set(raw) - allowed
            if bad:
                raise ConfigurationError(f"Unknown keys in '{name}': {', '.join(sorted(bad))}")
            kwargs[name] = section(**raw)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        threads: Optional[int] = None,
        out: Optional[Path] = None,
    ) -> "RunConfig":
        """Copy with command-line flags applied to the top-level keys."""
        changes: dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = seed
        if threads is not None:
            changes["threads"] = threads
        if out is not None:
            changes["out"] = str(out)
        return dataclasses.replace(self, **changes)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.d, self.n)

    @property
    def kernel_theta(self) -> float:
        return self.kernel.theta if self.kernel.theta is not None else self.solver.theta

    def build_model(self) -> CorrelationModel:
        return CorrelationModel(self.noise.kind, self.noise.parameter, self.d)

    def build_drift(self) -> DriftSpec:
        s = self.drift
        return DriftSpec.from_terms(s.f1, s.shift, s.f2_slope, s.f2_intercept)

    def build_source(self) -> ArrayFn:
        return make_source(self.source.kind, self.source.amplitude)

    def build_mollifier(self) -> MollifierTable:
        return build_psi(self.mollifier.half_width, self.mollifier.order)

    def build_solve_config(self) -> SolveConfig:
        s = self.solver
        return SolveConfig(
            theta=s.theta,
            lam=s.lam,
            alpha=s.alpha,
            tolerance=s.tolerance,
            max_iter=s.max_iter,
            damping=s.damping,
            eps=s.eps,
            kernel_gate=s.kernel_gate,
        )

    def build_plan(self) -> ExperimentPlan:
        e = self.experiment
        return ExperimentPlan(
            d=self.d,
            ladder=tuple(e.ladder),
            n_ref=e.n_ref,
            theta=self.solver.theta,
            lam=self.solver.lam,
            alpha=self.solver.alpha,
            samples=e.samples,
            seed=self.seed,
            drift=self.build_drift(),
            source=self.build_source(),
            model=self.build_model(),
            p_values=tuple(e.p_values),
            tolerance=self.solver.tolerance,
            max_iter=self.solver.max_iter,
            damping=self.solver.damping,
            kernel_gate=self.solver.kernel_gate,
            threads=self.threads,
            half_width=self.mollifier.half_width,
            backend=self.noise.backend,
            bootstrap=e.bootstrap,
            noise_scale=self.noise.scale,
        )

    def validate(self, command: Optional[str] = None) -> None:
        """Apply every gate the selected command depends on."""
        grid = self.grid
        if self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed}")
        if self.threads is not None and self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")
        if self.noise.backend not in BACKENDS:
            raise ConfigurationError(f"Unknown backend: {self.noise.backend}. Must be one of: {', '.join(BACKENDS)}")
        if self.noise.scale < 0:
            raise ConfigurationError(f"noise.scale must be >= 0, got {self.noise.scale}")
        if self.noise.validation_samples < 2:
            raise ConfigurationError(f"noise.validation_samples must be >= 2, got {self.noise.validation_samples}")
        self.build_model()
        self.build_source()
        self.build_mollifier()
        drift = self.build_drift()
        self.build_solve_config().validate(grid, drift)
        if command == "converge":
            self.build_plan()
        if command == "kernel":
            self._validate_kernel()
        if command == "holder":
            n = self.holder.n or self.n
            h = GridSpec(self.d, n)
            if self.holder.samples < 1:
                raise ConfigurationError("holder.samples must be >= 1")
            if len(self.holder.lags) < 3:
                raise ConfigurationError("holder.lags needs at least 3 lags")
            if max(self.holder.lags) >= h.n - 1 or min(self.holder.lags) < 1:
                raise ConfigurationError(f"holder.lags must lie in [1, n-2] for n={h.n}")

    def _validate_kernel(self) -> None:
        k = self.kernel
        if not k.ns:
            raise ConfigurationError("kernel.ns is empty")
        for n in k.ns:
            GridSpec(self.d, n)
        if self.kernel_theta <= 2 * self.d - 4:
            raise ConfigurationError(f"kernel theta={self.kernel_theta} must exceed 2d-4={2 * self.d - 4}")
        if k.n_ref is not None and k.n_ref < max(k.ns):
            raise ConfigurationError(f"Series truncation n_ref={k.n_ref} must be >= every n (max {max(k.ns)})")
        if any(f <= 0 for f in k.eps_factors):
            raise ConfigurationError("kernel.eps_factors must be positive")
        if k.smoothing_eps and len(k.smoothing_eps) < 3:
            raise ConfigurationError("kernel.smoothing_eps needs at least 3 values")


def load_config(path: Optional[Path] = None) -> RunConfig:
    """Read a JSON (or YAML) config document; no path gives the defaults."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigurationError(f"Config file not found: {path}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Could not parse config {path}: {e}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigurationError(f"Config {path} must contain a mapping at the top level")
    logger.debug("Loaded config from %s", path)
    return RunConfig.from_dict(data)
