import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional, Tuple

from weakident.constants import defaults, system_overrides
from weakident.exceptions import ConfigError
from weakident.models import dictionary_rules
from weakident.types import ConfigValues, DatasetPath
from weakident.utils import format_key_value, parse_key_value

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


@dataclass(frozen=True)
class RunConfig:
    """Settings of one identification run.

    Unset fields (``None``) are filled by :meth:`resolved` from the
    defaults of the problem kind and any benchmark overrides.
    """

    alpha_cap: Optional[int] = None
    beta_cap: Optional[int] = None
    dictionary_rule: Optional[str] = None
    subsample: Optional[Tuple[int, ...]] = None
    tau_hat: Optional[float] = None
    tau_decay: Optional[float] = None
    p_max: Optional[int] = None
    trim_threshold: Optional[float] = None
    max_sparsity: Optional[int] = None
    cv_lambda: Optional[float] = None
    cv_trials: Optional[int] = None
    seed: Optional[int] = None
    hist_bins: Optional[int] = None
    features_of_interest: Optional[Tuple[str, ...]] = None
    adaptive_subsample: Optional[bool] = None
    min_region_rows: Optional[int] = None
    max_subsample_retries: Optional[int] = None
    subsample_increment: Optional[int] = None

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if value is not None:
                object.__setattr__(self, f.name, _coerce(f.name, value))
        self._validate()

    def _validate(self) -> None:
        positive = (
            "beta_cap",
            "p_max",
            "max_sparsity",
            "cv_trials",
            "hist_bins",
            "min_region_rows",
            "tau_hat",
        )
        for key in positive:
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ConfigError(key, f"must be positive, got {value}")
        if self.alpha_cap is not None and self.alpha_cap < 0:
            raise ConfigError("alpha_cap", "must not be negative")
        if self.tau_decay is not None and not 0 < self.tau_decay < 1:
            raise ConfigError("tau_decay", "must lie in (0, 1)")
        if self.trim_threshold is not None and not (
            0 < self.trim_threshold < 1
        ):
            raise ConfigError("trim_threshold", "must lie in (0, 1)")
        if self.cv_lambda is not None and not 0 < self.cv_lambda < 1:
            raise ConfigError("cv_lambda", "must lie in (0, 1)")
        if self.subsample is not None and (
            not self.subsample or any(n < 1 for n in self.subsample)
        ):
            raise ConfigError("subsample", "targets must be positive")
        if (
            self.dictionary_rule is not None
            and self.dictionary_rule not in dictionary_rules[:2]
        ):
            raise ConfigError(
                "dictionary_rule", f"must be one of {dictionary_rules[:2]}"
            )

    @classmethod
    def from_dict(cls, values: ConfigValues) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        for key in values:
            if key not in known:
                raise ConfigError(key, "unknown key")
        return cls(**values)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        try:
            entries = parse_key_value(text)
        except ValueError as e:
            raise ConfigError("<file>", str(e)) from e
        return cls.from_dict(entries)

    @classmethod
    def from_file(cls, path: DatasetPath) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        logger.info(f"Read config from {path}")
        return cls.from_text(text)

    def to_dict(self) -> ConfigValues:
        return {k: v for k, v in sorted(asdict(self).items()) if v is not None}

    def to_text(self) -> str:
        entries = {}
        for key, value in self.to_dict().items():
            if isinstance(value, tuple):
                separator = ";" if key == "features_of_interest" else ","
                value = separator.join(str(v) for v in value)
            entries[key] = str(value).lower() if isinstance(
                value, bool
            ) else str(value)
        return format_key_value(entries)

    def to_file(self, path: DatasetPath) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def resolved(self, kind: str, system: Optional[str] = None) -> "RunConfig":
        """Fill unset fields for a problem kind (``pde`` or ``ode``).

        Explicit values win over benchmark overrides, which win over the
        kind defaults.
        """
        if kind not in ("pde", "ode"):
            raise ConfigError("kind", f"unknown problem kind {kind!r}")
        base = {**defaults["common"], **defaults[kind]}
        if system is not None:
            base.update(system_overrides.get(system, {}))
        filled = {
            f.name: (
                getattr(self, f.name)
                if getattr(self, f.name) is not None
                else base.get(f.name)
            )
            for f in fields(self)
        }
        return RunConfig(**filled)


_int_keys = {
    "alpha_cap",
    "beta_cap",
    "p_max",
    "max_sparsity",
    "cv_trials",
    "seed",
    "hist_bins",
    "min_region_rows",
    "max_subsample_retries",
    "subsample_increment",
}
_float_keys = {"tau_hat", "tau_decay", "trim_threshold", "cv_lambda"}


def _coerce(key: str, value):
    try:
        if key in _int_keys:
            if isinstance(value, bool) or (
                isinstance(value, float) and not value.is_integer()
            ):
                raise ValueError(value)
            return int(value)
        if key in _float_keys:
            return float(value)
        if key == "adaptive_subsample":
            if isinstance(value, bool):
                return value
            text = str(value).strip().lower()
            if text not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return text in ("true", "1", "yes")
        if key == "subsample":
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            elif isinstance(value, int):
                value = [value]
            return tuple(int(v) for v in value)
        if key == "features_of_interest":
            if isinstance(value, str):
                value = value.split(";")
            return tuple(v.strip() for v in value if v.strip())
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"invalid value {value!r}") from None


def apply_assignment(config: RunConfig, key: str, value: str) -> RunConfig:
    """Return ``config`` with one ``key = value`` text assignment applied."""
    if key not in {f.name for f in fields(RunConfig)}:
        raise ConfigError(key, "unknown key")
    return config.replace(**{key: _coerce(key, value)})
