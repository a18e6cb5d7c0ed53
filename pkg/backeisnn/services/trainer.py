"""
Training loop: epochs of Adam steps over micro-batched BPTT, per-epoch test
evaluation, metrics rows and checkpoints.

Random streams: parameter initialisation uses ``(seed, 0)``; the master
generator ``(seed, 1)`` draws one seed per training epoch, from which the
batch order, the input encoding and the dropout masks derive. Evaluation
streams depend on ``(seed, split, epoch)`` only. The master generator state
is checkpointed, so a resumed run continues the same trajectory.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from backeisnn.data.loader import BatchStream, Dataset, InputPipeline, load_split
from backeisnn.data.samples import SpikeBatch
from backeisnn.engine.autograd import backward, no_grad
from backeisnn.optim import Adam
from backeisnn.run_config import RunConfig
from backeisnn.services.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from backeisnn.services.factory import build_network
from backeisnn.services.runs import RunDirectory
from backeisnn.snn.metrics import SplitTally
from backeisnn.snn.network import LayerStats, RateTarget, SpikingNetwork, merge_stats, mse_rate_loss
from backeisnn.utils.errors import NumericError


logger = logging.getLogger("backeisnn.train")

_SPLIT_IDS = {"train": 0, "test": 1}


@dataclass
class EpochResult:
    epoch: int
    split: str
    loss: float
    accuracy: float
    lr: float | None
    wall_time: float
    matrix: np.ndarray
    layer_stats: dict[str, LayerStats] = field(default_factory=dict)

    def row(self) -> dict[str, Any]:
        row = {
            "epoch": self.epoch,
            "split": self.split,
            "loss": self.loss,
            "accuracy": self.accuracy,
            "lr": self.lr,
            "wall_time": round(self.wall_time, 3),
        }
        row.update({f"rate_{n}": s.spike_rate for n, s in self.layer_stats.items()})
        return row


@dataclass
class FitResult:
    rows: list[dict[str, Any]]
    best_accuracy: float
    final_test_accuracy: float
    train_stats: dict[str, LayerStats]
    run_path: Path | None = None

    def mechanism_summary(self) -> dict[str, dict]:
        return {name: stats.summary() for name, stats in self.train_stats.items()}


def _derived_seed(*key: int) -> int:
    return int(np.random.SeedSequence(list(key)).generate_state(1, dtype=np.uint64)[0])


class Trainer:
    def __init__(
        self,
        config: RunConfig,
        network: SpikingNetwork | None = None,
        *,
        data_root: str | Path | None = None,
        train_set: Dataset | None = None,
        test_set: Dataset | None = None,
        run: RunDirectory | None = None,
    ) -> None:
        self.config = config
        self.network = network or build_network(config)
        self.optimizer = Adam(self.network.named_parameters(), config.schedule(), config.clip_grad_norm)
        self.rng = np.random.default_rng([config.seed, 1])
        self.epoch = 0
        self.best_accuracy = -1.0
        self.data_root = data_root
        self.run = run
        self._data: dict[str, Dataset | None] = {"train": train_set, "test": test_set}
        self._pipes = {
            "train": InputPipeline(config.encoding, config.time_steps, config.event_bins, config.augment, config.dtype),
            "test": InputPipeline(config.encoding, config.time_steps, config.event_bins, False, config.dtype),
        }
        self._classes = self.network.spec.classes

    # data

    def dataset(self, split: str) -> Dataset:
        if self._data[split] is None:
            limit = self.config.train_limit if split == "train" else self.config.test_limit
            self._data[split] = load_split(
                self.config.dataset,
                split,
                self.data_root,
                limit=limit,
                cifar_mean=self.config.cifar_mean,
                cifar_std=self.config.cifar_std,
            )
        return self._data[split]

    # one batch

    def _slice_step(self, batch: SpikeBatch, idx: np.ndarray, rng: np.random.Generator, total: int):
        sub = batch.slice(idx)
        record = self.network.rollout(sub.data, training=True, rng=rng)
        target = RateTarget.from_labels(sub.labels, self._classes, self.network.dtype)
        loss = mse_rate_loss(record, target, batch_size=total)
        grads = backward(loss)
        return float(loss.value), record.rate.value, record.layer_stats, grads

    def train_batch(self, batch: SpikeBatch, epoch_seed: int, batch_index: int, pool: ThreadPoolExecutor | None = None):
        """
        Forward and backward over ``micro_batches`` fixed slices of the batch.
        The loss of every slice is normalised by the full batch size and the
        slice gradients are summed in slice order.
        """
        total = batch.batch_size
        slices = [s for s in np.array_split(np.arange(total), self.config.micro_batches) if s.size]
        rngs = [np.random.default_rng([epoch_seed, batch_index, 1, k]) for k in range(len(slices))]
        if pool is None:
            results = [self._slice_step(batch, s, r, total) for s, r in zip(slices, rngs)]
        else:
            results = list(pool.map(lambda sr: self._slice_step(batch, sr[0], sr[1], total), zip(slices, rngs)))

        grads: dict[str, np.ndarray] = {}
        stats: dict[str, LayerStats] = {}
        for _, _, slice_stats, slice_grads in results:
            for name, g in slice_grads.items():
                grads[name] = grads[name] + g if name in grads else g
            stats = merge_stats(stats, slice_stats)
        loss = sum(r[0] for r in results)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite loss {loss} at batch {batch_index}")
        rate = np.concatenate([r[1] for r in results])
        return loss, rate, stats, grads

    # epochs

    def train_epoch(self, epoch: int) -> EpochResult:
        start = time.perf_counter()
        lr = self.optimizer.set_epoch(epoch)
        epoch_seed = int(self.rng.integers(0, 2**63 - 1))
        stream = BatchStream(
            self.dataset("train"),
            self.config.batch_size,
            self._pipes["train"],
            epoch_seed,
            shuffle=True,
            prefetch=self.config.prefetch,
        )
        tally = SplitTally(self._classes)
        stats: dict[str, LayerStats] = {}
        pool = ThreadPoolExecutor(self.config.workers) if self.config.workers > 1 else None
        try:
            for index, batch in enumerate(stream):
                try:
                    loss, rate, batch_stats, grads = self.train_batch(batch, epoch_seed, index, pool)
                    norm = self.optimizer.step(grads)
                except NumericError as e:
                    self._write_diagnostic(epoch, index, e)
                    raise
                tally.add(rate, batch.labels, loss)
                stats = merge_stats(stats, batch_stats)
                logger.debug(
                    "batch_end epoch=%d batch=%d loss=%.6f grad_norm=%.6f", epoch + 1, index, loss, norm
                )
        finally:
            if pool is not None:
                pool.shutdown()
        return EpochResult(
            epoch + 1, "train", tally.loss, tally.accuracy, lr, time.perf_counter() - start, tally.matrix, stats
        )

    def evaluate(self, split: str = "test", epoch: int | None = None) -> EpochResult:
        start = time.perf_counter()
        epoch = self.epoch if epoch is None else epoch
        stream = BatchStream(
            self.dataset(split),
            self.config.batch_size,
            self._pipes["test"],
            _derived_seed(self.config.seed, 2, _SPLIT_IDS[split], epoch),
            shuffle=False,
            prefetch=self.config.prefetch,
        )
        tally = SplitTally(self._classes)
        stats: dict[str, LayerStats] = {}
        with no_grad():
            for batch in stream:
                record = self.network.rollout(batch.data, training=False)
                target = RateTarget.from_labels(batch.labels, self._classes, self.network.dtype)
                loss = float(mse_rate_loss(record, target).value)
                tally.add(record.rate.value, batch.labels, loss)
                stats = merge_stats(stats, record.layer_stats)
        return EpochResult(epoch, split, tally.loss, tally.accuracy, None, time.perf_counter() - start, tally.matrix, stats)

    def fit(self) -> FitResult:
        rows: list[dict[str, Any]] = []
        train_stats: dict[str, LayerStats] = {}
        test_result: EpochResult | None = None
        layer_names = [b.name for b in self.network.spiking_blocks]

        if self.config.epochs == 0 and self.epoch == 0:
            for split in ("train", "test"):
                result = self.evaluate(split, 0)
                rows.append(result.row())
                if self.run is not None:
                    self.run.append_metrics(result.row(), layer_names)
                test_result = result

        for epoch in range(self.epoch, self.config.epochs):
            train_result = self.train_epoch(epoch)
            test_result = self.evaluate("test", epoch + 1)
            self.epoch = epoch + 1
            train_stats = train_result.layer_stats
            for result in (train_result, test_result):
                rows.append(result.row())
                if self.run is not None:
                    self.run.append_metrics(result.row(), layer_names)
            logger.info(
                "epoch_end epoch=%d lr=%g train_loss=%.6f train_acc=%.4f test_loss=%.6f test_acc=%.4f",
                self.epoch,
                train_result.lr,
                train_result.loss,
                train_result.accuracy,
                test_result.loss,
                test_result.accuracy,
            )
            improved = test_result.accuracy > self.best_accuracy
            if improved:
                self.best_accuracy = test_result.accuracy
            if self.run is not None:
                if improved:
                    save_checkpoint(self.run.best_checkpoint, self.checkpoint())
                save_checkpoint(self.run.last_checkpoint, self.checkpoint())

        if test_result is None:
            test_result = self.evaluate("test", self.epoch)
        if self.run is not None:
            self.run.write_confusion("test", test_result.matrix)
            self.run.write_confusion("train", self.evaluate("train", self.epoch).matrix)

        return FitResult(
            rows=rows,
            best_accuracy=max(self.best_accuracy, 0.0) if self.config.epochs else test_result.accuracy,
            final_test_accuracy=test_result.accuracy,
            train_stats=train_stats,
            run_path=self.run.path if self.run is not None else None,
        )

    # persistence

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(
            config_yaml=self.config.to_yaml(),
            epoch=self.epoch,
            params=self.network.state_dict(),
            optimizer=self.optimizer.state_dict(),
            rng_state=self.rng.bit_generator.state,
            best_accuracy=self.best_accuracy,
        )

    def restore(self, ckpt: Checkpoint) -> None:
        ckpt.check_compatible(self.config)
        self.network.load_state_dict(ckpt.params)
        self.optimizer.load_state_dict(ckpt.optimizer)
        self.rng.bit_generator.state = ckpt.rng_state
        self.epoch = ckpt.epoch
        self.best_accuracy = ckpt.best_accuracy

    def resume_from(self, path: str | Path) -> None:
        self.restore(load_checkpoint(path))
        if self.run is not None:
            self.run.truncate_metrics(self.epoch)
        logger.info("resumed epoch=%d best_accuracy=%.4f", self.epoch, self.best_accuracy)

    def _write_diagnostic(self, epoch: int, batch_index: int, error: NumericError) -> None:
        params = {
            name: {
                "finite": bool(np.all(np.isfinite(p.value))),
                "norm": float(np.linalg.norm(p.value.astype(np.float64))),
            }
            for name, p in self.network.named_parameters().items()
        }
        payload = {
            "epoch": epoch + 1,
            "batch": batch_index,
            "error": str(error),
            "lr": self.optimizer.lr,
            "parameters": params,
        }
        error.details = {"epoch": epoch + 1, "batch": batch_index}
        logger.error("numeric_failure epoch=%d batch=%d error=%s", epoch + 1, batch_index, error)
        if self.run is not None:
            path = self.run.write_yaml("diagnostic.yaml", payload)
            error.details["diagnostic"] = str(path)
