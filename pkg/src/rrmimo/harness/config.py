"""Experiment configuration and the named presets."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..channel import ArrayGeometry, ClusterSpec
from ..errors import ConfigError, DomainError

EXPERIMENTS = ("mse_sweep", "spectrum_report", "mse_decomposition", "rank_tables",
               "beam_patterns", "multicluster")
BASES = ("klt", "dct2", "dft", "polynomial")
SNR_SWEEP_DB = [-10, -5, 0, 5, 10, 15, 20, 25, 30]


@dataclass
class Scenario:
    label: str
    # (mean AoA deg, half-width spread deg) per cluster; None = uncorrelated i.i.d. channel
    clusters: list | None

    def cluster_specs(self, num_subpaths: int, aoa_distribution: str) -> list[ClusterSpec] | None:
        if self.clusters is None:
            return None
        return [ClusterSpec.from_degrees(a, s, num_subpaths=num_subpaths,
                                         aoa_distribution=aoa_distribution)
                for a, s in self.clusters]

    @property
    def mean_aoa_deg(self) -> float | None:
        return None if not self.clusters else float(self.clusters[0][0])


@dataclass
class ExperimentConfig:
    name: str
    experiment: str
    scenarios: list
    bases: list = field(default_factory=lambda: ["dct2"])
    num_antennas: int = 100
    spacing_wavelengths: float = 0.5
    num_subpaths: int = 20
    aoa_distribution: str = "uniform"
    pilot_length: int = 16
    etas: list = field(default_factory=lambda: [0.99])
    etas_estimated: list = field(default_factory=list)
    alpha_db: list = field(default_factory=lambda: list(SNR_SWEEP_DB))
    orders: list = field(default_factory=list)
    num_blocks: list = field(default_factory=lambda: [10])
    trials: int = 1000
    known_beta: bool = True
    known_phi: bool = True
    lpm: bool = True
    grid_deg: float = 0.5
    imod_max_iters: int = 10
    seed: int = 0

    def __post_init__(self):
        self.scenarios = [s if isinstance(s, Scenario) else Scenario(**s) for s in self.scenarios]
        self.validate()

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.alpha_db:
            raise ConfigError("alpha_db must be nonempty")
        for b in self.bases:
            if b not in BASES:
                raise ConfigError(f"unknown basis {b!r}")
        for e in list(self.etas) + list(self.etas_estimated):
            if not 0 < e < 1:
                raise ConfigError(f"eta {e} outside (0, 1)")
        if self.pilot_length < 1:
            raise ConfigError("pilot_length must be >= 1")
        if any(j < 1 for j in self.num_blocks):
            raise ConfigError("num_blocks entries must be >= 1")
        if any(not 0 <= m <= self.num_antennas for m in self.orders):
            raise ConfigError("modeling orders must lie in [0, num_antennas]")
        try:
            self.geometry()
            for s in self.scenarios:
                s.cluster_specs(self.num_subpaths, self.aoa_distribution)
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.num_antennas, self.spacing_wavelengths)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def replace(self, **changes) -> "ExperimentConfig":
        d = self.to_dict()
        d.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**d)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**copy.deepcopy(d))
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


PRESET_FILE = Path(__file__).with_name("presets.json")
PRESETS: dict[str, dict] = json.loads(PRESET_FILE.read_text())


def load_config(name_or_path: str) -> ExperimentConfig:
    """A preset name or the path of a JSON config file."""
    if name_or_path in PRESETS:
        return ExperimentConfig(name=name_or_path, **copy.deepcopy(PRESETS[name_or_path]))
    path = Path(name_or_path)
    if not path.is_file():
        raise ConfigError(f"{name_or_path!r} is neither a preset ({', '.join(PRESETS)}) nor a file")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    data.setdefault("name", path.stem)
    return ExperimentConfig.from_dict(data)
