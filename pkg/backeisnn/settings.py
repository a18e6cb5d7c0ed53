from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import yaml
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


DEFAULT_CONFIGFILE = ".backeisnn.yaml"
TRUE_WORDS = {"1", "true", "yes", "y", "on"}


class Settings(BaseSettings):
    """
    Process-level settings of the training harness (not run hyperparameters).

    Priority order:
      1) CLI flags (applied in build_context)
      2) Environment variables
      3) .env file
      4) User YAML (BACKEISNN_CONFIG_YAML, ./.backeisnn.yaml or ~/.backeisnn.yaml)
      5) Defaults
    """

    data_root: Optional[str] = Field(default=None, alias="BACKEISNN_DATA_ROOT")
    out_dir: str = Field(default="runs", alias="BACKEISNN_OUT")
    dtype: str = Field(default="float32", alias="BACKEISNN_DTYPE")
    debug: bool = Field(default=False, alias="BACKEISNN_DEBUG")

    config_yaml: Optional[str] = Field(default=None, alias="BACKEISNN_CONFIG_YAML")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    def load_user_yaml_if_needed(self) -> "Settings":
        """
        Fill fields that neither the environment nor .env provided from the user YAML.
        """
        cfg = self._read_yaml_config()
        if not isinstance(cfg, dict):
            return self
        fields_set = getattr(self, "__pydantic_fields_set__", set())

        def _set_if_missing(field: str, value: Any) -> None:
            if field in fields_set or value is None:
                return
            if field == "debug":
                if isinstance(value, str):
                    value = value.strip().lower() in TRUE_WORDS
                setattr(self, field, bool(value))
            else:
                setattr(self, field, str(value))

        for field in ("data_root", "out_dir", "dtype", "debug"):
            _set_if_missing(field, cfg.get(field))
        return self

    def _read_yaml_config(self) -> Optional[dict[str, Any]]:
        candidates: list[Path] = []
        if self.config_yaml:
            candidates.append(Path(self.config_yaml))
        candidates.append(Path.cwd() / DEFAULT_CONFIGFILE)
        candidates.append(Path.home() / DEFAULT_CONFIGFILE)

        for p in candidates:
            try:
                if p.exists() and p.is_file():
                    with p.open("r", encoding="utf-8") as f:
                        return yaml.safe_load(f)
            except (OSError, yaml.YAMLError):
                # A broken user file should not block runs that pass everything by flag.
                continue
        return None


def get_settings() -> Settings:
    return Settings().load_user_yaml_if_needed()
