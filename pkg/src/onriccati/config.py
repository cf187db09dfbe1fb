"""
YAML configuration for experiments and runs.

One top-level section per concern: ``experiment``, ``system``, ``costs``,
``online`` and ``comparator``. Every field has a default, so an empty file is
a valid configuration. Precedence is defaults < file < command-line flags.
"""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from .errors import ConfigError

logger = logging.getLogger(__name__)

COST_KINDS = (
    "wishart",
    "diag_uniform",
    "diag_random_walk",
    "constant",
    "uniform_box",
    "custom",
)
SYSTEM_SOURCES = ("random_uniform", "explicit")
ALGORITHMS = ("online", "fll", "recent")
INITIAL_GAINS = ("bootstrap", "dare")

# --experiment presets
EXPERIMENT_KINDS = {
    "1": "wishart",
    "2": "diag_uniform",
    "3": "diag_random_walk",
    "constant": "constant",
}


@dataclass
class ExperimentSection:
    horizon: int = 10_000
    seed: int = 0
    trials: int = 1
    checkpoints: List[int] = field(default_factory=lambda: [100, 1000, 10_000])
    algorithms: List[str] = field(default_factory=lambda: list(ALGORITHMS))
    x1_scale: float = 0.0

    def validate(self):
        if self.horizon < 1:
            raise ConfigError(
                f"experiment.horizon must be at least 1, got {self.horizon}"
            )
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("experiment.seed must be an unsigned 64-bit value")
        if self.trials < 1:
            raise ConfigError("experiment.trials must be at least 1")
        if any(c < 1 for c in self.checkpoints):
            raise ConfigError("experiment.checkpoints must be positive")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown or "online" not in self.algorithms:
            raise ConfigError(
                f"experiment.algorithms must include 'online' and be among {ALGORITHMS}"
            )
        if self.x1_scale < 0.0:
            raise ConfigError("experiment.x1_scale must be nonnegative")


@dataclass
class SystemSection:
    source: str = "random_uniform"
    n: int = 4
    m: int = 3
    a_range: float = 3.0
    b_range: float = 2.0
    A: Optional[List[List[float]]] = None
    B: Optional[List[List[float]]] = None
    W: Optional[List[List[float]]] = None

    def validate(self):
        if self.source not in SYSTEM_SOURCES:
            raise ConfigError(
                f"system.source must be one of {SYSTEM_SOURCES}, got {self.source!r}"
            )
        if self.n < 1 or self.m < 1:
            raise ConfigError("system dimensions must be positive")
        if self.source == "explicit" and (self.A is None or self.B is None):
            raise ConfigError("explicit system needs both A and B")


@dataclass
class CostsSection:
    kind: str = "wishart"
    dof: int = 20
    r_low: float = 0.1
    r_high: float = 1.0
    walk_step: float = 0.1
    walk_prob: float = 0.1
    q_low: float = 0.5
    q_high: float = 1.5
    Q: Optional[List[List[float]]] = None
    R: Optional[List[List[float]]] = None

    def validate(self, n: int, m: int):
        if self.kind not in COST_KINDS:
            raise ConfigError(
                f"costs.kind must be one of {COST_KINDS}, got {self.kind!r}"
            )
        if self.kind == "wishart" and self.dof < max(n, m):
            raise ConfigError(
                f"wishart dof {self.dof} is below the dimension {max(n, m)}"
            )
        if not 0.0 < self.r_low <= self.r_high:
            raise ConfigError("costs need 0 < r_low <= r_high")
        if not 0.0 < self.q_low <= self.q_high:
            raise ConfigError("costs need 0 < q_low <= q_high")
        if not 0.0 <= 2.0 * self.walk_prob <= 1.0:
            raise ConfigError("costs.walk_prob must lie in [0, 0.5]")
        if self.kind == "custom" and (self.Q is None or self.R is None):
            raise ConfigError("custom costs need both Q and R")


@dataclass
class OnlineSection:
    mu: Optional[float] = None
    sigma: Optional[float] = None
    nu_estimate: Optional[float] = None
    t_star: Optional[int] = None
    initial_gain: str = "bootstrap"

    def validate(self):
        if self.mu is not None and self.mu <= 0.0:
            raise ConfigError("online.mu must be positive")
        if self.mu is not None and self.sigma is not None and self.sigma <= self.mu:
            raise ConfigError("online.sigma must exceed online.mu")
        if self.t_star is not None and self.t_star < 1:
            raise ConfigError("online.t_star must be at least 1")
        if self.initial_gain not in INITIAL_GAINS:
            raise ConfigError(f"online.initial_gain must be one of {INITIAL_GAINS}")


@dataclass
class ComparatorSection:
    search: bool = True
    max_iter: int = 200
    margin: float = 1e-6

    def validate(self):
        if self.max_iter < 0:
            raise ConfigError("comparator.max_iter must be nonnegative")
        if not 0.0 <= self.margin < 1.0:
            raise ConfigError("comparator.margin must lie in [0, 1)")


SECTIONS = {
    "experiment": ExperimentSection,
    "system": SystemSection,
    "costs": CostsSection,
    "online": OnlineSection,
    "comparator": ComparatorSection,
}


@dataclass
class ExperimentConfig:
    """Effective configuration of a run, bench or probe."""

    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    system: SystemSection = field(default_factory=SystemSection)
    costs: CostsSection = field(default_factory=CostsSection)
    online: OnlineSection = field(default_factory=OnlineSection)
    comparator: ComparatorSection = field(default_factory=ComparatorSection)

    def validate(self) -> "ExperimentConfig":
        self.experiment.validate()
        self.system.validate()
        self.costs.validate(self.system.n, self.system.m)
        self.online.validate()
        self.comparator.validate()
        return self

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "ExperimentConfig":
        """
        Build a configuration from parsed YAML.

        Raises:
            ConfigError: On unknown sections or keys, or invalid values.
        """
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping of sections")
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
        sections = {}
        for name, section_cls in SECTIONS.items():
            values = data.get(name) or {}
            if not isinstance(values, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            known = {f.name for f in dataclasses.fields(section_cls)}
            bad = set(values) - known
            if bad:
                raise ConfigError(f"unknown keys in {name!r}: {', '.join(sorted(bad))}")
            try:
                sections[name] = section_cls(**values)
            except TypeError as exc:
                raise ConfigError(f"invalid section {name!r}: {exc}") from exc
        return cls(**sections).validate()

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """
        Apply dotted overrides such as ``{"experiment.seed": 7}``.

        ``None`` values are skipped.
        """
        data = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            section, _, name = key.partition(".")
            if section not in data or name not in data[section]:
                raise ConfigError(f"unknown override {key!r}")
            data[section][name] = value
        return ExperimentConfig.from_dict(data)


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Load a YAML configuration file, or the defaults when ``path`` is None."""
    if path is None:
        return ExperimentConfig().validate()
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    logger.info("Loaded config from %s", path)
    return ExperimentConfig.from_dict(data)


def dump_config(config: ExperimentConfig) -> str:
    """Serialize the effective configuration so ``load_config`` reads it back."""
    return yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None)
