"""Numeric knobs shared by the library and the config file loader of the CLI."""

import json
import logging
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, Optional

from .exceptions import ConfigurationError

log = logging.getLogger(__name__)

ZERO_THRESHOLD = 1e-12
DEGENERACY_TOL = 1e-9
ENUMERATION_CAP = 26
TERM_BUDGET = 5_000_000
SYMBOLIC_P_MAX = 6
SHIFT_ETA = 1.0


@dataclass(frozen=True)
class Settings:
    """Tolerances, caps and budgets.

    :param float zero_threshold: coefficients with smaller magnitude are dropped
    :param float degeneracy_tol: relative tolerance under which two values count as equal
    :param int enumeration_cap: largest n for exhaustive 2**n enumeration
    :param int term_budget: largest projected term count for symbolic powers
    :param int symbolic_p_max: above this p the spectra path evaluates numerically
    :param float shift_eta: margin of the joint nonnegativity shift
    """

    zero_threshold: float = ZERO_THRESHOLD
    degeneracy_tol: float = DEGENERACY_TOL
    enumeration_cap: int = ENUMERATION_CAP
    term_budget: int = TERM_BUDGET
    symbolic_p_max: int = SYMBOLIC_P_MAX
    shift_eta: float = SHIFT_ETA

    def __post_init__(self) -> None:
        if self.zero_threshold < 0:
            raise ConfigurationError("zero_threshold must be >= 0")
        if self.degeneracy_tol < 0:
            raise ConfigurationError("degeneracy_tol must be >= 0")
        if not 1 <= self.enumeration_cap <= 64:
            raise ConfigurationError("enumeration_cap must be in [1, 64]")
        if self.term_budget < 1:
            raise ConfigurationError("term_budget must be >= 1")
        if self.shift_eta <= 0:
            raise ConfigurationError("shift_eta must be > 0")

    def updated(self, **kwargs: Any) -> "Settings":
        """Return a copy with the given fields replaced (``None`` values are ignored)"""
        changes = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **changes)

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


class SettingsInstance(object):
    """Singelton for the shared Settings"""

    instance: Optional[Settings] = None


def set_shared_settings(instance: Settings) -> None:
    """Set shared settings"""
    SettingsInstance.instance = instance


def shared_settings() -> Settings:
    """Get shared settings"""
    if not SettingsInstance.instance:
        SettingsInstance.instance = Settings()
    return SettingsInstance.instance


def resolve(settings: Optional[Settings]) -> Settings:
    return settings if settings is not None else shared_settings()


def normalize_key(key: str) -> str:
    return key.strip().lstrip("-").replace("-", "_")


def load_config(path: str) -> Dict[str, Any]:
    """Read a JSON config file.

    Keys may be spelled like the CLI long flags (``p-max``) or with underscores
    (``p_max``); both come back underscored.

    :raises ConfigurationError: if the file is unreadable or not a JSON object
    """
    try:
        with open(path, "r") as f:
            payload = json.load(f)
    except (IOError, json.JSONDecodeError) as exc:
        raise ConfigurationError("Unable to read config %s: %s" % (path, exc)) from exc
    if not isinstance(payload, dict):
        raise ConfigurationError("Config %s must contain a JSON object" % path)
    config = {normalize_key(k): v for k, v in payload.items()}
    log.debug("loaded config %s: %s", path, config)
    return config


def settings_from_config(config: Dict[str, Any], base: Optional[Settings] = None) -> Settings:
    """Pick the Settings fields out of a resolved config dict"""
    known = {f.name for f in fields(Settings)}
    picked = {k: v for k, v in config.items() if k in known}
    if "eta" in config and "shift_eta" not in picked:
        picked["shift_eta"] = config["eta"]
    try:
        return resolve(base).updated(**picked)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
