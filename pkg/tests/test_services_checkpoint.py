import numpy as np
import pytest

from backeisnn.run_config import resolve_run_config
from backeisnn.services.checkpoint import (
    MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from backeisnn.services.trainer import Trainer
from backeisnn.utils.errors import ConfigError, DataError, DataFormatError, TruncatedDataError


def _trainer(**values):
    config = resolve_run_config(
        "synthetic",
        overrides={"structure": "4C3-P2-16", "time_steps": 3, "batch_size": 10, "train_limit": 20, "test_limit": 10,
                   "epochs": 1, "prefetch": 0, **values},
    )
    return Trainer(config)


def test_save_load_save_is_byte_identical(tmp_path):
    trainer = _trainer()
    trainer.fit()
    first = save_checkpoint(tmp_path / "a.ckpt", trainer.checkpoint())
    loaded = load_checkpoint(first)
    second = save_checkpoint(tmp_path / "b.ckpt", loaded)
    assert first.read_bytes()[: len(MAGIC)] == MAGIC
    assert first.read_bytes() == second.read_bytes()
    assert not (tmp_path / "a.ckpt.tmp").exists()


def test_restore_reproduces_state(tmp_path):
    trainer = _trainer()
    trainer.fit()
    path = save_checkpoint(tmp_path / "last.ckpt", trainer.checkpoint())

    fresh = _trainer()
    fresh.restore(load_checkpoint(path))
    assert fresh.epoch == 1
    assert fresh.best_accuracy == trainer.best_accuracy
    for name, value in trainer.network.state_dict().items():
        np.testing.assert_array_equal(fresh.network.state_dict()[name], value)
    assert fresh.rng.bit_generator.state == trainer.rng.bit_generator.state
    assert fresh.optimizer.state_dict()["t"] == trainer.optimizer.state_dict()["t"]


def test_architecture_mismatch_is_refused(tmp_path):
    trainer = _trainer()
    ckpt = decode_checkpoint(encode_checkpoint(trainer.checkpoint()))
    with pytest.raises(ConfigError, match="structure"):
        _trainer(structure="8C3-P2-16").restore(ckpt)
    with pytest.raises(ConfigError, match="gate settings"):
        _trainer(beim=False).restore(ckpt)


def test_missing_and_damaged_files(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_checkpoint(tmp_path / "none.ckpt")
    with pytest.raises(DataFormatError, match="magic"):
        decode_checkpoint(b"NOTACKPT" + bytes(8))
    raw = encode_checkpoint(_trainer().checkpoint())
    with pytest.raises(TruncatedDataError):
        decode_checkpoint(raw[:-3])
    with pytest.raises(DataFormatError, match="trailing"):
        decode_checkpoint(raw + b"\x00")
