"""
Run configuration: every hyperparameter of a training run as a named key.

A run config is assembled from, lowest priority first: a built-in preset, a
YAML file, command flags and global flags. It is validated before anything
runs and written verbatim into the run directory.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from backeisnn.data.cifar import DEFAULT_MEAN, DEFAULT_STD
from backeisnn.data.loader import DATASETS, dataset_info
from backeisnn.engine.functional import SpikeFnConfig
from backeisnn.optim import LrSchedule
from backeisnn.snn.neuron import LifParams
from backeisnn.snn.structure import NetworkSpec, parse_structure
from backeisnn.utils.errors import ConfigError


PRESET_PACKAGE = "backeisnn.presets"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: str = "mnist"
    structure: str = "15C5-P2-40C5-P2-300"
    time_steps: int = Field(default=20, ge=1)
    gate_kernel: int = Field(default=5, ge=1)
    sfbm: bool = True
    beim: bool = True
    gates_on_fc: bool = False
    reset_mode: Literal["literal", "magnitude"] = "magnitude"
    encoding: Literal["bernoulli", "direct", "event"] = "bernoulli"
    event_bins: int = Field(default=100, ge=1)

    batch_size: int = Field(default=100, ge=1)
    epochs: int = Field(default=200, ge=0)
    lr: float = Field(default=0.001, gt=0)
    lr_decay: float = Field(default=0.1, gt=0, le=1)
    lr_period: int = Field(default=40, ge=1)
    clip_grad_norm: Optional[float] = Field(default=None, gt=0)

    v_th: float = Field(default=0.5, gt=0)
    tau: float = Field(default=2.0, gt=1)
    window: float = Field(default=0.5, gt=0)
    spike_mode: Literal["hard", "relaxed"] = "hard"
    detach_reset: bool = False
    detach_feedback: bool = False

    pooling: Literal["avg", "max"] = "avg"
    conv_padding: Union[int, Literal["same"]] = 0
    dropout: float = Field(default=0.0, ge=0, lt=1)
    dropout_policy: Literal["window", "step"] = "window"
    augment: bool = False
    cifar_mean: tuple[float, float, float] = DEFAULT_MEAN
    cifar_std: tuple[float, float, float] = DEFAULT_STD

    train_limit: Optional[int] = Field(default=None, ge=1)
    test_limit: Optional[int] = Field(default=None, ge=1)
    micro_batches: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)
    prefetch: int = Field(default=2, ge=0)

    seed: int = 0
    dtype: Literal["float32", "float64"] = "float32"
    out_dir: str = "runs"

    sweep_kernels: list[int] = Field(default_factory=lambda: [1, 3, 5, 7])
    sweep_time_steps: list[int] = Field(default_factory=lambda: [10, 20, 30, 40])

    @field_validator("dataset")
    @classmethod
    def _known_dataset(cls, value: str) -> str:
        if value not in DATASETS:
            raise ValueError(f"unknown dataset {value!r}; expected one of {sorted(DATASETS)}")
        return value

    @field_validator("gate_kernel")
    @classmethod
    def _odd_gate_kernel(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("gate kernel must be odd so the gate keeps the layer shape")
        return value

    @field_validator("conv_padding")
    @classmethod
    def _non_negative_padding(cls, value):
        if isinstance(value, int) and value < 0:
            raise ValueError("conv_padding must be >= 0 or 'same'")
        return value

    @field_validator("cifar_std")
    @classmethod
    def _positive_std(cls, value):
        if any(s <= 0 for s in value):
            raise ValueError("cifar_std entries must be > 0")
        return value

    @field_validator("sweep_kernels")
    @classmethod
    def _odd_sweep_kernels(cls, value: list[int]) -> list[int]:
        if not value or any(k < 1 or k % 2 == 0 for k in value):
            raise ValueError("sweep kernels must be a non-empty list of odd sizes")
        return value

    @field_validator("sweep_time_steps")
    @classmethod
    def _positive_sweep_steps(cls, value: list[int]) -> list[int]:
        if not value or any(t < 1 for t in value):
            raise ValueError("sweep time steps must be a non-empty list of positive integers")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "RunConfig":
        info = dataset_info(self.dataset)
        if self.encoding not in info.encodings:
            raise ValueError(f"dataset {self.dataset!r} supports encodings {list(info.encodings)}, not {self.encoding!r}")
        if self.encoding == "event" and self.time_steps > self.event_bins:
            raise ValueError(f"time_steps ({self.time_steps}) exceeds event_bins ({self.event_bins})")
        if self.micro_batches > self.batch_size:
            raise ValueError(f"micro_batches ({self.micro_batches}) exceeds batch_size ({self.batch_size})")
        try:
            self.network_spec()
        except ConfigError as e:
            raise ValueError(str(e)) from None
        return self

    # derived objects

    def network_spec(self) -> NetworkSpec:
        info = dataset_info(self.dataset)
        return parse_structure(
            self.structure,
            classes=info.classes,
            dropout=self.dropout,
            input_shape=info.frame_shape,
            time_steps=self.time_steps,
            sfbm=self.sfbm,
            beim=self.beim,
            gate_kernel=self.gate_kernel,
            encoding=self.encoding,
            conv_padding=self.conv_padding,
            pooling=self.pooling,
            gates_on_fc=self.gates_on_fc,
        )

    def schedule(self) -> LrSchedule:
        return LrSchedule(base=self.lr, decay=self.lr_decay, period=self.lr_period)

    def lif_params(self) -> LifParams:
        return LifParams(tau=self.tau, v_th=self.v_th)

    def spike_cfg(self) -> SpikeFnConfig:
        return SpikeFnConfig(v_th=self.v_th, window=self.window, mode=self.spike_mode)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False, allow_unicode=True)


def _read_yaml_mapping(text: str, source: str) -> dict[str, Any]:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"{source} is not valid YAML: {e}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source} must hold a mapping of config keys")
    return data


def list_presets() -> list[str]:
    return sorted(
        p.name[: -len(".yaml")]
        for p in resources.files(PRESET_PACKAGE).iterdir()
        if p.name.endswith(".yaml")
    )


def load_preset(name: str) -> dict[str, Any]:
    resource = resources.files(PRESET_PACKAGE).joinpath(f"{name}.yaml")
    if not resource.is_file():
        raise ConfigError(f"Unknown preset {name!r}; available: {', '.join(list_presets())}")
    return _read_yaml_mapping(resource.read_text(encoding="utf-8"), f"preset {name}")


def load_config_file(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    return _read_yaml_mapping(path.read_text(encoding="utf-8"), str(path))


def resolve_run_config(
    preset: str | None = None,
    config_path: str | Path | None = None,
    overrides: dict[str, Any] | None = None,
    defaults: dict[str, Any] | None = None,
) -> RunConfig:
    """
    Merge defaults < preset < config file < overrides. ``defaults`` carries
    process settings such as the output directory from the environment. A
    config file may name its own preset under the ``preset`` key; an explicit
    ``preset`` argument wins.
    Override values of ``None`` are ignored.
    """
    file_values = load_config_file(config_path) if config_path else {}
    preset = preset or file_values.pop("preset", None)
    file_values.pop("preset", None)

    merged: dict[str, Any] = {k: v for k, v in (defaults or {}).items() if v is not None}
    merged.update(load_preset(preset) if preset else {})
    merged.update(file_values)
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig.model_validate(merged)


def load_run_config(path: str | Path) -> RunConfig:
    """Read back a ``config.yaml`` written into a run directory."""
    return RunConfig.model_validate(load_config_file(path))
