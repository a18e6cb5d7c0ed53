"""Architecture strings such as ``15C5-P2-40C5-P2-300`` and the parsed network description."""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Literal, Union

from backeisnn.utils.errors import ConfigError


@dataclass(frozen=True)
class Conv:
    channels: int
    kernel: int

    def __str__(self) -> str:
        return f"{self.channels}C{self.kernel}"


@dataclass(frozen=True)
class Pool2:
    def __str__(self) -> str:
        return "P2"


@dataclass(frozen=True)
class FC:
    units: int

    def __str__(self) -> str:
        return str(self.units)


@dataclass(frozen=True)
class Dropout:
    p: float

    def __str__(self) -> str:
        return f"D{self.p:g}"


LayerSpec = Union[Conv, Pool2, FC, Dropout]
Encoding = Literal["bernoulli", "direct", "event"]

_TOKEN = re.compile(
    r"""^(?:
        (?P<channels>\d+)[cC](?P<kernel>\d+)
      | (?P<pool>[pP]2)
      | [dD](?P<p>\d*\.?\d+)
      | (?P<units>\d+)
    )$""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, int, int] = (1, 28, 28)
    classes: int = 10
    time_steps: int = 20
    sfbm: bool = True
    beim: bool = True
    gate_kernel: int = 5
    encoding: Encoding = "bernoulli"
    conv_padding: int | Literal["same"] = 0
    pooling: Literal["avg", "max"] = "avg"
    gates_on_fc: bool = False

    @property
    def structure(self) -> str:
        return "-".join(str(layer) for layer in self.layers)

    def with_dropout(self, p: float) -> "NetworkSpec":
        return replace(self, layers=insert_dropout(self.layers, p))


def _parse_token(token: str) -> LayerSpec:
    match = _TOKEN.match(token)
    if match is None:
        raise ConfigError(f"malformed structure token {token!r}")
    if match.group("channels"):
        channels, kernel = int(match.group("channels")), int(match.group("kernel"))
        if channels < 1 or kernel < 1:
            raise ConfigError(f"structure token {token!r} needs positive channels and kernel")
        return Conv(channels, kernel)
    if match.group("pool"):
        return Pool2()
    if match.group("p") is not None:
        p = float(match.group("p"))
        if not 0 <= p < 1:
            raise ConfigError(f"dropout token {token!r} needs 0 <= p < 1")
        return Dropout(p)
    units = int(match.group("units"))
    if units < 1:
        raise ConfigError(f"structure token {token!r} needs a positive unit count")
    return FC(units)


def parse_layers(text: str, classes: int = 10) -> tuple[LayerSpec, ...]:
    tokens = [t.strip() for t in (text or "").split("-")]
    if not tokens or any(not t for t in tokens):
        raise ConfigError(f"structure {text!r} has an empty token")
    layers = [_parse_token(t) for t in tokens]

    seen_fc = False
    for token, layer in zip(tokens, layers):
        if isinstance(layer, FC):
            seen_fc = True
        elif seen_fc and isinstance(layer, (Conv, Pool2)):
            raise ConfigError(f"structure token {token!r} follows a fully connected layer")
    if not any(isinstance(layer, (Conv, FC)) for layer in layers):
        raise ConfigError(f"structure {text!r} has no spiking layer")

    last_fc = next((layer for layer in reversed(layers) if isinstance(layer, FC)), None)
    if not isinstance(layers[-1], FC) or last_fc.units != classes:
        layers.append(FC(classes))
    return tuple(layers)


def insert_dropout(layers: tuple[LayerSpec, ...], p: float) -> tuple[LayerSpec, ...]:
    """Dropout after every hidden spiking layer (not after the output layer)."""
    if p <= 0:
        return layers
    if p >= 1:
        raise ConfigError(f"dropout must be < 1, got {p}")
    out: list[LayerSpec] = []
    last_spiking = max(i for i, layer in enumerate(layers) if isinstance(layer, (Conv, FC)))
    for i, layer in enumerate(layers):
        out.append(layer)
        if isinstance(layer, (Conv, FC)) and i != last_spiking:
            nxt = layers[i + 1] if i + 1 < len(layers) else None
            if not isinstance(nxt, Dropout):
                out.append(Dropout(p))
    return tuple(out)


def parse_structure(text: str, *, classes: int = 10, dropout: float = 0.0, **fields) -> NetworkSpec:
    """
    Parse ``<int>C<int>`` conv, ``P2`` pool, ``D<p>`` dropout and bare-integer FC tokens.
    An output FC with ``classes`` units is appended when the string does not end with one.
    """
    if classes < 1:
        raise ConfigError(f"classes must be >= 1, got {classes}")
    layers = insert_dropout(parse_layers(text, classes), dropout)
    return NetworkSpec(layers=layers, classes=classes, **fields)
