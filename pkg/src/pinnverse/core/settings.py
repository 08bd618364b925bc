"""Experiment configuration: flat YAML files plus command-line overrides."""

import logging
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pinnverse.core.models import (
    ChannelSet,
    TrainableMask,
    channel_preset,
    default_channels,
)
from pinnverse.core.pauli import ObservableBasis, PauliString
from pinnverse.error_handling import ConfigurationError

if TYPE_CHECKING:
    from pinnverse.training.pinnverse import FitConfig

logger = logging.getLogger(__name__)

Mode = Literal[
    "gen-data", "fit", "sweep-collocation", "sweep-noise", "crosstalk", "single-qubit"
]

VALID_MODES = [
    "gen-data",
    "fit",
    "sweep-collocation",
    "sweep-noise",
    "crosstalk",
    "single-qubit",
]

# Literature fit of the single-qubit device, used as the reference model
REFERENCE_J = (0.0, -1.57, 0.0)
REFERENCE_GAMMA = (0.128, 0.065, 1.33e-4)

# Values recovered for that device, used as synthetic ground truth
SINGLE_QUBIT_J = (0.024, -1.52, -0.0108)
SINGLE_QUBIT_GAMMA = (0.126, 0.0789, 4.39e-5)
SINGLE_QUBIT_FINAL_TIME = 10.0

MASK_KEYWORDS = ("all", "none", "local", "two-body")


class ExperimentConfig(BaseSettings):
    """pinnverse - Hamiltonian and decay-rate identification from observable data"""

    model_config = SettingsConfigDict(
        env_file=None,
        env_prefix="",
        case_sensitive=False,
        validate_default=True,
        extra="forbid",
    )

    mode: Mode = Field(default="fit", description="Experiment to run")

    out: Path = Field(default=Path("runs"), description="Output root directory")
    data: Optional[Path] = Field(
        default=None, description="Trajectory CSV (written by gen-data, read by fit)"
    )
    truth: Optional[Path] = Field(
        default=None, description="Ground-truth parameter JSON for error reporting"
    )

    seed: int = Field(default=0, ge=0, description="Base seed for every RNG")
    jobs: int = Field(default=1, ge=1, description="Worker processes for sweeps")
    realizations: int = Field(default=8, ge=1, description="Runs per grid point")

    n_qubits: int = Field(default=2, description="1 or 2 qubits")
    channels: Optional[str] = Field(
        default=None, description="Channel preset (default depends on n_qubits)"
    )
    final_time: Optional[float] = Field(
        default=None,
        gt=0,
        description="Evolution window T (1 for 2 qubits, 10 us for 1)",
    )
    n_samples: int = Field(
        default=201, ge=2, description="Samples of generated and reconstructed curves"
    )
    sigma: Optional[float] = Field(
        default=None,
        ge=0,
        description="Gaussian noise level (scenario default if unset)",
    )

    n_c_grid: List[int] = Field(default_factory=lambda: [5, 10, 20, 30, 40, 50])
    sigma_grid: List[float] = Field(
        default_factory=lambda: [0.0, 0.005, 0.01, 0.015, 0.02]
    )

    n_t: int = Field(default=200)
    n_c: int = Field(default=50)
    max_steps: int = Field(default=40000, ge=1)
    learning_rate: float = Field(default=2e-3, gt=0)
    lr_decay: float = Field(default=0.5, gt=0, le=1)
    lr_decay_every: int = Field(default=8000, ge=1)
    warmup_steps: int = Field(default=500, ge=0)
    phys_lr_scale: float = Field(default=5.0, gt=0)
    clip_norm: Optional[float] = Field(default=1.0, gt=0)
    loss_scale: Literal["normalized", "sum"] = "normalized"
    lambda_m: float = Field(default=1.0, ge=0)
    lambda_d: float = Field(default=1.0, ge=0)
    restarts: int = Field(default=4, ge=1)
    plateau_window: int = Field(default=2000, ge=1)
    plateau_tol: float = Field(default=1e-10, ge=0)
    hidden_layers: List[int] = Field(default_factory=lambda: [64, 64, 64, 64])
    activation: Literal["tanh", "sin"] = "tanh"
    initial_state: Literal["plus", "data"] = "plus"
    log_every: int = Field(default=500, ge=1)

    j_mask: Union[str, List[str]] = Field(
        default="all", description="all, none, local, two-body or a list of labels"
    )
    gamma_mask: Union[str, List[str]] = Field(
        default="all", description="all, none or a list of channel labels"
    )

    reconstruction_floor: float = Field(default=0.05, ge=0)
    record_timing: bool = Field(
        default=True, description="Write wall-clock times (off for bit-identical JSON)"
    )
    dump_generator: bool = Field(default=False, description="Write recovered (A, b)")
    reference_model: bool = Field(
        default=True, description="Compare against the literature single-qubit fit"
    )

    log_level: str = Field(default="INFO", description="Logging level")
    log_file: Optional[Path] = Field(default=None, description="Log file path")
    debug: bool = Field(
        default=False,
        description="Enable debug logging (equivalent to --log-level DEBUG)",
    )

    @field_validator("mode", mode="before")
    @classmethod
    def validate_mode(cls, v: Any) -> str:
        """Validate and normalize mode value."""
        if isinstance(v, str):
            v_lower = v.lower().replace("_", "-")
            if v_lower in VALID_MODES:
                return v_lower
            raise ValueError(
                f"Invalid mode: {v}. Must be one of: {', '.join(VALID_MODES)}"
            )
        return v

    @field_validator("n_qubits")
    @classmethod
    def validate_n_qubits(cls, v: int) -> int:
        if v not in (1, 2):
            raise ValueError(f"Invalid qubit count: {v}. Must be 1 or 2")
        return v

    @field_validator("n_c_grid")
    @classmethod
    def validate_n_c_grid(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("n_c_grid must not be empty")
        if any(n < 1 for n in v):
            raise ValueError(f"Every N_c must be at least 1, got {v}")
        return v

    @field_validator("sigma_grid")
    @classmethod
    def validate_sigma_grid(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("sigma_grid must not be empty")
        if any(s < 0 for s in v):
            raise ValueError(f"Noise levels must be nonnegative, got {v}")
        return v

    @field_validator("n_t")
    @classmethod
    def validate_n_t(cls, v: int) -> int:
        if v < 2:
            raise ValueError(f"n_t must be at least 2, got {v}")
        return v

    @field_validator("n_c")
    @classmethod
    def validate_n_c(cls, v: int) -> int:
        if v < 1:
            raise ValueError(f"n_c must be at least 1, got {v}")
        return v

    @field_validator("channels")
    @classmethod
    def validate_channels(cls, v: Optional[str]) -> Optional[str]:
        if v is not None:
            channel_preset(v)
        return v

    @field_validator("j_mask", "gamma_mask", mode="before")
    @classmethod
    def validate_mask(cls, v: Any) -> Any:
        if isinstance(v, str):
            v_lower = v.strip().lower().replace("_", "-")
            if v_lower in MASK_KEYWORDS:
                return v_lower
            return [label.strip() for label in v.split(",") if label.strip()]
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        v_upper = v.upper()
        if v_upper not in valid_levels:
            raise ValueError(f"Invalid log level: {v}")
        return v_upper

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Any,
        init_settings: Any,
        env_settings: Any,
        dotenv_settings: Any,
        file_secret_settings: Any,
    ) -> Tuple[Any, ...]:
        """Only explicit values: config file merged with flags by the caller."""
        _ = (
            settings_cls,
            env_settings,
            dotenv_settings,
            file_secret_settings,
        )
        return (init_settings,)

    @classmethod
    def load(
        cls,
        config_path: Optional[Path] = None,
        overrides: Optional[Dict[str, Any]] = None,
    ) -> "ExperimentConfig":
        """Build from a flat YAML file and flag overrides (flags win).

        Raises:
            ConfigurationError: unreadable or nested file, unknown keys, or
                invalid values
        """
        values: Dict[str, Any] = {}
        if config_path is not None:
            values.update(load_config_file(config_path))
        for key, value in (overrides or {}).items():
            if value is not None:
                values[key] = value
        try:
            config = cls(**values)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}"
                for err in e.errors()
            )
            raise ConfigurationError(f"Invalid configuration: {problems}") from e

        if config.debug:
            config.log_level = "DEBUG"
        if config.mode in ("fit", "single-qubit"):
            if config.data is not None and not config.data.exists():
                raise ConfigurationError(f"Data file not found: {config.data}")
            if config.truth is not None and not config.truth.exists():
                raise ConfigurationError(f"Ground-truth file not found: {config.truth}")
        return config

    def channel_set(self) -> ChannelSet:
        if self.channels is None:
            return default_channels(self.n_qubits)
        channels = channel_preset(self.channels)
        if channels.n_qubits != self.n_qubits:
            raise ConfigurationError(
                f"Channel preset {self.channels} acts on {channels.n_qubits} "
                f"qubit(s), configuration has {self.n_qubits}"
            )
        return channels

    def resolved_final_time(self) -> float:
        if self.final_time is not None:
            return self.final_time
        return 1.0 if self.n_qubits == 2 else SINGLE_QUBIT_FINAL_TIME

    def trainable_mask(self, channels: Optional[ChannelSet] = None) -> TrainableMask:
        channels = channels or self.channel_set()
        return build_mask(self.n_qubits, channels, self.j_mask, self.gamma_mask)

    def fit_config(self, **changes: Any) -> "FitConfig":
        """FitConfig carrying this configuration's training knobs."""
        from pinnverse.training.pinnverse import FitConfig

        values: Dict[str, Any] = {
            "n_t": self.n_t,
            "n_c": self.n_c,
            "final_time": self.final_time,
            "max_steps": self.max_steps,
            "learning_rate": self.learning_rate,
            "lr_decay": self.lr_decay,
            "lr_decay_every": self.lr_decay_every,
            "warmup_steps": self.warmup_steps,
            "phys_lr_scale": self.phys_lr_scale,
            "clip_norm": self.clip_norm,
            "loss_scale": self.loss_scale,
            "lambda_m": self.lambda_m,
            "lambda_d": self.lambda_d,
            "mask": self.trainable_mask(),
            "restarts": self.restarts,
            "seed": self.seed,
            "plateau_window": self.plateau_window,
            "plateau_tol": self.plateau_tol,
            "hidden_layers": tuple(self.hidden_layers),
            "activation": self.activation,
            "initial_state": self.initial_state,
            "log_every": self.log_every,
            "record_timing": self.record_timing,
        }
        values.update(changes)
        try:
            return FitConfig(**values)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid fit configuration: {e}") from e

    def snapshot(self, path: Path) -> Path:
        """Write the resolved configuration as flat YAML."""
        path.parent.mkdir(parents=True, exist_ok=True)
        data = self.model_dump(mode="json")
        with open(path, "w") as f:
            yaml.safe_dump(data, f, sort_keys=True, default_flow_style=None)
        logger.debug(f"Wrote configuration snapshot to {path}")
        return path


def load_config_file(path: Path) -> Dict[str, Any]:
    """Read a flat key/value YAML mapping."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Could not parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path} must hold a key/value mapping")
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigurationError(
                f"{path}: nested mapping under {key!r}; config files are flat"
            )
    normalized = {str(k).replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(normalized) - set(ExperimentConfig.model_fields))
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {', '.join(unknown)}")
    logger.debug(f"Loaded {len(normalized)} settings from {path}")
    return normalized


def build_mask(
    n_qubits: int,
    channels: ChannelSet,
    j_mask: Union[str, List[str]],
    gamma_mask: Union[str, List[str]],
) -> TrainableMask:
    """Resolve mask keywords or label lists into a TrainableMask.

    J keywords: ``all``, ``none``, ``local`` (one non-identity factor) and
    ``two-body`` (both factors non-identity). Explicit lists name
    observables (``S_1_3``, ``sx``) or J labels (``J_1_3``).
    """
    n_channels = len(channels)
    keep_gamma = _gamma_flags(channels, gamma_mask)

    if isinstance(j_mask, str):
        keywords = {
            "all": lambda s: True,
            "none": lambda s: False,
            "local": lambda s: not s.is_two_body,
            "two-body": lambda s: s.is_two_body,
        }
        if j_mask not in keywords:
            raise ConfigurationError(
                f"Invalid j_mask: {j_mask}. Must be one of: "
                f"{', '.join(keywords)} or a list of labels"
            )
        mask = TrainableMask.from_predicate(n_qubits, n_channels, keywords[j_mask])
    else:
        basis = ObservableBasis.for_qubits(n_qubits)
        wanted = set()
        for label in j_mask:
            name = "S_" + label[2:] if label.startswith("J_") else label
            try:
                s = PauliString.from_label(name)
            except ValueError as e:
                raise ConfigurationError(f"Invalid J label in j_mask: {label}") from e
            if s.n_qubits != n_qubits or s.is_identity:
                raise ConfigurationError(
                    f"{label} is not a non-identity {n_qubits}-qubit coefficient"
                )
            wanted.add(basis.position(s))
        mask = TrainableMask.from_predicate(
            n_qubits, n_channels, lambda s: basis.position(s) in wanted
        )
    return TrainableMask(mask.j, keep_gamma)


def _gamma_flags(channels: ChannelSet, gamma_mask: Union[str, List[str]]) -> List[bool]:
    if isinstance(gamma_mask, str):
        if gamma_mask == "all":
            return [True] * len(channels)
        if gamma_mask == "none":
            return [False] * len(channels)
        raise ConfigurationError(
            f"Invalid gamma_mask: {gamma_mask}. Must be all, none or a list of labels"
        )
    rate_labels = [f"gamma_{k + 1}" for k in range(len(channels))]
    flags = [False] * len(channels)
    for label in gamma_mask:
        if label in channels.labels:
            flags[channels.labels.index(label)] = True
        elif label in rate_labels:
            flags[rate_labels.index(label)] = True
        else:
            raise ConfigurationError(f"Unknown channel in gamma_mask: {label}")
    return flags
