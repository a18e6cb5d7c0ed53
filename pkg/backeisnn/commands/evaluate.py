"""eval command: score a checkpoint on the train and/or test split."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import typer

from backeisnn.services.checkpoint import load_checkpoint
from backeisnn.services.context import build_context
from backeisnn.services.runs import RunDirectory
from backeisnn.services.trainer import Trainer
from backeisnn.utils.command import run_and_render


def eval_command(
    checkpoint: str = typer.Argument(..., help="Checkpoint file or run directory (uses best.ckpt)."),
    split: str = typer.Option("test", "--split", help="train|test|both"),
    test_limit: Optional[int] = typer.Option(None, "--limit", help="Evaluate only the first N samples."),
    format: Optional[str] = typer.Option(None, "--format", help="yaml|json"),
    output: Optional[str] = None,
    debug: bool = False,
):
    """Evaluate a checkpoint; writes confusion_<split>.csv next to it."""
    ctx = build_context(format, debug)

    def body():
        path = Path(checkpoint)
        if path.is_dir():
            path = RunDirectory(path).best_checkpoint
        ckpt = load_checkpoint(path)
        config = ckpt.config
        if test_limit is not None:
            config = config.model_copy(update={"train_limit": test_limit, "test_limit": test_limit})
        trainer = Trainer(config, data_root=ctx.settings.data_root)
        trainer.restore(ckpt)
        splits = ("train", "test") if split == "both" else (split,)
        report = {"checkpoint": str(path), "epoch": ckpt.epoch}
        run = RunDirectory(path.parent)
        for name in splits:
            result = trainer.evaluate(name)
            run.write_confusion(name, result.matrix)
            report[name] = {
                "loss": result.loss,
                "accuracy": result.accuracy,
                "samples": int(result.matrix.sum()),
                "spike_rates": {n: s.spike_rate for n, s in result.layer_stats.items()},
            }
        return report

    run_and_render(ctx, body, output)
