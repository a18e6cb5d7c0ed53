import numpy as np
import pytest

from backeisnn.data import loader as loader_mod
from backeisnn.data.loader import (
    BatchStream,
    InputPipeline,
    dataset_info,
    load_split,
    make_batch,
    resolve_dataset_dir,
    synthetic_split,
)
from backeisnn.data.nmnist import encode_events
from backeisnn.data.samples import EventSet, EventStream
from backeisnn.utils.errors import ConfigError, DataError


def test_synthetic_split_sizes_and_range():
    train = synthetic_split("train")
    test = synthetic_split("test")
    assert len(train) == 1000
    assert len(test) == 200
    assert train.frame_shape == (1, 16, 16)
    assert train.images.min() >= 0 and train.images.max() <= 1
    np.testing.assert_array_equal(synthetic_split("test").images, test.images)


def test_load_split_limit_and_bad_split():
    data = load_split("synthetic", "test", limit=30)
    assert len(data) == 30
    with pytest.raises(ConfigError, match="split"):
        load_split("synthetic", "valid")
    with pytest.raises(ConfigError, match="Unknown dataset"):
        dataset_info("imagenet")


def test_dataset_dir_resolution(tmp_path):
    info = dataset_info("mnist")
    with pytest.raises(DataError, match="data root"):
        resolve_dataset_dir(info, None)
    with pytest.raises(DataError, match="does not exist"):
        resolve_dataset_dir(info, tmp_path / "missing")
    assert resolve_dataset_dir(info, tmp_path) == tmp_path
    (tmp_path / "mnist").mkdir()
    assert resolve_dataset_dir(info, tmp_path) == tmp_path / "mnist"


def test_make_batch_shapes():
    data = synthetic_split("test", size=10)
    pipe = InputPipeline("bernoulli", time_steps=4)
    batch = make_batch(data, np.array([0, 3, 5]), pipe, np.random.default_rng(0))
    assert batch.data.shape == (4, 3, 1, 16, 16)
    assert batch.data.dtype == np.float32
    np.testing.assert_array_equal(batch.labels, data.labels[[0, 3, 5]])

    direct = make_batch(data, np.array([1]), InputPipeline("direct", 2, dtype="float64"), np.random.default_rng(0))
    np.testing.assert_array_equal(direct.data[1, 0], data.images[1])


def test_make_batch_from_events():
    stream = EventStream(*(np.array([v], dtype=np.int64) for v in (1, 2, 1, 0)))
    data = EventSet([stream, EventStream.empty()], np.array([4, 7]))
    batch = make_batch(data, np.array([0, 1]), InputPipeline("event", 5, event_bins=10), np.random.default_rng(0))
    assert batch.data.shape == (5, 2, 2, 34, 34)
    assert batch.data[0, 0, 1, 2, 1] == 1
    assert batch.data.sum() == 1
    with pytest.raises(ConfigError):
        make_batch(data, np.array([0]), InputPipeline("bernoulli", 5), np.random.default_rng(0))


def test_event_set_reads_files(tmp_path):
    path = tmp_path / "00001.bin"
    path.write_bytes(encode_events(EventStream(*(np.array([v], dtype=np.int64) for v in (3, 4, 0, 9)))))
    data = EventSet([path], np.array([2]))
    assert int(data.stream(0).y[0]) == 4


def _collect(stream):
    return [(b.data.copy(), b.labels.copy()) for b in stream]


def test_stream_is_deterministic_with_and_without_prefetch():
    data = synthetic_split("test", size=25)
    pipe = InputPipeline("bernoulli", 3)
    eager = _collect(BatchStream(data, 10, pipe, epoch_seed=11, prefetch=0))
    fetched = _collect(BatchStream(data, 10, pipe, epoch_seed=11, prefetch=2))
    assert [len(labels) for _, labels in eager] == [10, 10, 5]
    for (a, la), (b, lb) in zip(eager, fetched):
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(la, lb)


def test_stream_order_depends_on_seed_only_when_shuffled():
    data = synthetic_split("test", size=20)
    pipe = InputPipeline("direct", 1)
    plain = BatchStream(data, 20, pipe, epoch_seed=1, shuffle=False, prefetch=0)
    np.testing.assert_array_equal(plain.batches[0], np.arange(20))
    a = BatchStream(data, 20, pipe, epoch_seed=1, prefetch=0).batches[0]
    b = BatchStream(data, 20, pipe, epoch_seed=2, prefetch=0).batches[0]
    assert sorted(a.tolist()) == list(range(20))
    assert a.tolist() != b.tolist()


def test_stream_forwards_producer_errors(monkeypatch):
    data = synthetic_split("test", size=30)
    calls = []

    def failing(data, indices, pipe, rng):
        calls.append(len(indices))
        if len(calls) == 2:
            raise DataError("broken sample")
        return make_batch(data, indices, pipe, rng)

    monkeypatch.setattr(loader_mod, "make_batch", failing)
    stream = BatchStream(data, 10, InputPipeline("direct", 1), epoch_seed=0, prefetch=1)
    seen = []
    with pytest.raises(DataError, match="broken sample"):
        for batch in stream:
            seen.append(batch)
    assert len(seen) == 1


def test_stream_rejects_empty_batches():
    with pytest.raises(ConfigError):
        BatchStream(synthetic_split("test", size=3), 0, InputPipeline("direct", 1), 0)
