import numpy as np

from backeisnn.utils.serialization import flatten, render_output, to_plain


class DummyModelDump:
    def model_dump(self, mode="python"):
        return {"a": 1, "b": None}


def test_to_plain_model_dump():
    assert to_plain(DummyModelDump()) == {"a": 1, "b": None}


def test_to_plain_numpy():
    assert to_plain({"m": np.eye(2, dtype=np.int64), "x": np.float32(0.5)}) == {
        "m": [[1, 0], [0, 1]],
        "x": 0.5,
    }


def test_to_plain_nested_list():
    assert to_plain([{"k": 1}, (2, 3)]) == [{"k": 1}, [2, 3]]


def test_render_output_json():
    rendered = render_output({"a": 1}, "json")
    assert '"a": 1' in rendered


def test_render_output_yaml():
    rendered = render_output({"a": 1}, "yaml")
    assert "a: 1" in rendered


def test_flatten_dotted_keys():
    assert flatten({"run": {"seed": 1, "lr": 0.001}, "debug": False}) == {
        "run.seed": 1,
        "run.lr": 0.001,
        "debug": False,
    }
