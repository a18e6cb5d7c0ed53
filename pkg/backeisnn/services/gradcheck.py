"""
Finite-difference check of the BPTT gradients.

The network runs in relaxed mode and 64-bit, where the forward pass is the
piecewise-smooth function whose derivative the surrogate rules compute.
Sampled parameter entries are nudged by ``+-h``; an entry is skipped when
the nudge moves any ramp, absolute value or pooling winner onto another
piece, and a fresh entry is drawn in its place.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from backeisnn.engine.autograd import backward, region_signature
from backeisnn.run_config import RunConfig
from backeisnn.snn.network import RateTarget, SpikingNetwork, mse_rate_loss
from backeisnn.utils.errors import ConfigError


logger = logging.getLogger("backeisnn.gradcheck")

MAX_PARAMETERS = 50_000


@dataclass
class GradcheckEntry:
    parameter: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    error: float
    relative: bool

    @property
    def label(self) -> str:
        return f"{self.parameter}[{','.join(str(i) for i in self.index)}]"


@dataclass
class GradcheckReport:
    threshold: float
    abs_floor: float
    h: float
    parameter_count: int
    entries: list[GradcheckEntry] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)

    @property
    def relative_errors(self) -> list[float]:
        return [e.error for e in self.entries if e.relative]

    @property
    def max_rel_error(self) -> float:
        errors = self.relative_errors
        return max(errors) if errors else 0.0

    @property
    def median_rel_error(self) -> float:
        errors = self.relative_errors
        return float(np.median(errors)) if errors else 0.0

    def failures(self) -> list[GradcheckEntry]:
        return [
            e
            for e in self.entries
            if (e.relative and e.error > self.threshold) or (not e.relative and e.error > self.abs_floor)
        ]

    @property
    def passed(self) -> bool:
        return bool(self.entries) and not self.failures()

    def worst(self, n: int = 5) -> list[GradcheckEntry]:
        ranked = sorted(self.entries, key=lambda e: e.error / (self.threshold if e.relative else self.abs_floor))
        return list(reversed(ranked[-n:]))

    def summary(self) -> dict:
        return {
            "passed": self.passed,
            "threshold": self.threshold,
            "h": self.h,
            "parameters": self.parameter_count,
            "checked": len(self.entries),
            "skipped_kink": len(self.skipped),
            "compared_absolutely": sum(1 for e in self.entries if not e.relative),
            "max_rel_error": self.max_rel_error,
            "median_rel_error": self.median_rel_error,
            "failures": [
                {"parameter": e.label, "analytic": e.analytic, "numeric": e.numeric, "error": e.error}
                for e in self.failures()
            ],
        }


def gradcheck_network(config: RunConfig, input_size: int | None = None) -> SpikingNetwork:
    """The configured network in float64 relaxed mode, optionally on a smaller square input."""
    relaxed = config.model_copy(update={"dtype": "float64", "spike_mode": "relaxed"})
    spec = relaxed.network_spec()
    if input_size is not None:
        spec = replace(spec, input_shape=(spec.input_shape[0], input_size, input_size))
    network = SpikingNetwork(
        spec,
        lif=relaxed.lif_params(),
        reset_mode=relaxed.reset_mode,
        spike_cfg=relaxed.spike_cfg(),
        detach_reset=relaxed.detach_reset,
        detach_feedback=relaxed.detach_feedback,
        dtype="float64",
        rng=np.random.default_rng([config.seed, 0]),
    )
    if network.parameter_count() > MAX_PARAMETERS:
        raise ConfigError(
            f"gradcheck is limited to {MAX_PARAMETERS} parameters; {spec.structure} has {network.parameter_count()}"
        )
    return network


def run_gradcheck(
    config: RunConfig,
    *,
    samples: int = 50,
    h: float = 1e-4,
    threshold: float = 1e-5,
    abs_floor: float = 1e-8,
    input_size: int | None = 8,
    batch_size: int | None = None,
    network: SpikingNetwork | None = None,
) -> GradcheckReport:
    network = network or gradcheck_network(config, input_size)
    spec = network.spec
    batch = batch_size or config.batch_size
    rng = np.random.default_rng([config.seed, 3])
    inputs = (rng.random((spec.time_steps, batch, *spec.input_shape)) < 0.5).astype(np.float64)
    target = RateTarget.from_labels(rng.integers(0, spec.classes, size=batch), spec.classes, np.float64)

    def loss():
        return mse_rate_loss(network.rollout(inputs, training=False), target)

    base = loss()
    analytic = backward(base)
    base_signature = region_signature(base)

    params = network.named_parameters()
    names = list(params)
    sizes = np.array([params[n].value.size for n in names])
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    wanted = min(samples, int(offsets[-1]))

    report = GradcheckReport(threshold, abs_floor, h, int(offsets[-1]))
    for flat in rng.permutation(int(offsets[-1])):
        if len(report.entries) == wanted:
            break
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[which]
        p = params[name]
        local = int(flat - offsets[which])
        index = tuple(int(i) for i in np.unravel_index(local, p.value.shape))
        original = p.value[index]
        values = []
        crossed = False
        for step in (h, -h):
            p.value[index] = original + step
            perturbed = loss()
            crossed = crossed or region_signature(perturbed) != base_signature
            values.append(float(perturbed.value))
        p.value[index] = original
        entry_label = f"{name}[{','.join(str(i) for i in index)}]"
        if crossed:
            report.skipped.append(entry_label)
            continue
        numeric = (values[0] - values[1]) / (2 * h)
        a = float(analytic.get(name, np.zeros_like(p.value))[index])
        diff = abs(a - numeric)
        if abs(a) <= abs_floor:
            report.entries.append(GradcheckEntry(name, index, a, numeric, diff, relative=False))
        else:
            report.entries.append(GradcheckEntry(name, index, a, numeric, diff / max(abs(a), abs(numeric)), True))

    logger.info(
        "gradcheck checked=%d skipped=%d max_rel=%.3e passed=%s",
        len(report.entries),
        len(report.skipped),
        report.max_rel_error,
        report.passed,
    )
    return report
