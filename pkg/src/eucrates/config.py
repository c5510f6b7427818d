"""Experiment configuration stored as INI sections of ``key = value`` lines."""

from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError, UsageError
from .estimator import Template
from .solvers import N_MM_EXACT, N_TSP_EXACT, N_TSPSTAR_EXACT, Functional, Mode, Variant

DEFAULT_GRIDS = {
    "mst": (128, 256, 512, 1024, 2048),
    "mm": (64, 128, 256, 512),
    "tsp": (4, 6, 8, 10, 12),
}


def exact_limit(functional: str, variant: str) -> int | None:
    f, v = Functional(functional), Variant(variant)
    if f is Functional.MST:
        return None
    if f is Functional.MM:
        return N_MM_EXACT
    return N_TSPSTAR_EXACT if v is Variant.DUAL else N_TSP_EXACT


def _parse_grid(text: str) -> tuple[int, ...]:
    try:
        grid = tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad n_grid {text!r}") from exc
    return grid


@dataclass
class ExperimentConfig:
    functional: str = "mst"
    variant: str = "plain"
    d: int = 2
    p: float = 1.0
    sampler: str = "uniform"
    n_grid: tuple[int, ...] = field(default_factory=lambda: DEFAULT_GRIDS["mst"])
    trials: int = 400
    seed: int | None = None
    output: str = ""
    mode: str = "exact"
    boundary_factor: float | None = None

    def __post_init__(self):
        try:
            self.functional = Functional(str(self.functional).lower()).value
            self.variant = Variant({"boundary_dual": "dual"}.get(self.variant, self.variant)).value
            self.mode = Mode(self.mode).value
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.d = int(self.d)
        self.p = float(self.p)
        self.trials = int(self.trials)
        self.n_grid = tuple(int(n) for n in self.n_grid)
        if self.seed is not None:
            self.seed = int(self.seed)
        if self.boundary_factor is not None:
            self.boundary_factor = float(self.boundary_factor)
        self.validate()

    def validate(self) -> None:
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if not 0 < self.p:
            raise ConfigError("p must be positive")
        if self.trials < 2:
            raise ConfigError("trials must be >= 2")
        if not self.n_grid or any(n < 0 for n in self.n_grid):
            raise ConfigError("n_grid must list nonnegative sizes")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ConfigError("n_grid must be strictly increasing")
        if self.mode == Mode.BRUTE_ORACLE.value:
            raise ConfigError("experiments run in exact or heuristic mode")
        if self.boundary_factor is not None and not 0 < self.boundary_factor <= 1:
            raise ConfigError("boundary_factor must lie in (0, 1]")
        if self.mode == Mode.HEURISTIC.value and self.variant == "dual" and self.functional != "mst":
            raise ConfigError("dual mm/tsp are exact-only")
        limit = exact_limit(self.functional, self.variant)
        if self.mode == Mode.EXACT.value and limit is not None and max(self.n_grid) > limit:
            raise ConfigError(
                f"n={max(self.n_grid)} exceeds the exact {self.functional} limit {limit}; use mode = heuristic"
            )

    def template(self) -> Template:
        try:
            return Template(self.functional, self.variant, self.d, self.p, self.sampler, self.mode, self.boundary_factor)
        except UsageError as exc:
            raise ConfigError(str(exc)) from exc

    def to_section(self) -> dict[str, str]:
        out = {}
        for k, v in asdict(self).items():
            if v is None:
                continue
            out[k] = " ".join(str(n) for n in v) if k == "n_grid" else (repr(v) if isinstance(v, float) else str(v))
        return out

    @classmethod
    def from_section(cls, section) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(section) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kw = dict(section)
        if "n_grid" in kw:
            kw["n_grid"] = _parse_grid(kw["n_grid"])
        elif "functional" in kw:
            kw["n_grid"] = DEFAULT_GRIDS.get(kw["functional"].lower(), DEFAULT_GRIDS["mst"])
        for k in ("seed", "boundary_factor"):
            if kw.get(k, "").strip().lower() in ("none", ""):
                kw.pop(k, None)
        try:
            return cls(**kw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config: {exc}") from exc

    def override(self, **kw) -> ExperimentConfig:
        data = asdict(self)
        data.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentConfig(**data)


def dumps(configs: dict[str, ExperimentConfig]) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    for name, cfg in configs.items():
        cp[name] = cfg.to_section()
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def loads(text: str) -> dict[str, ExperimentConfig]:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse config: {exc}") from exc
    if not cp.sections():
        raise ConfigError("config has no sections")
    return {name: ExperimentConfig.from_section(cp[name]) for name in cp.sections()}


def load(path: str | Path, section: str | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    configs = loads(text)
    if section is None:
        return next(iter(configs.values()))
    if section not in configs:
        raise ConfigError(f"no section [{section}] in {path}")
    return configs[section]


def save(path: str | Path, configs: dict[str, ExperimentConfig]) -> None:
    Path(path).write_text(dumps(configs))
