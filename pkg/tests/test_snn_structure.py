import pytest

from backeisnn.snn.structure import FC, Conv, Dropout, Pool2, insert_dropout, parse_layers, parse_structure
from backeisnn.utils.errors import ConfigError


def test_parse_mnist_structure():
    assert parse_layers("15C5-P2-40C5-P2-300") == (Conv(15, 5), Pool2(), Conv(40, 5), Pool2(), FC(300), FC(10))


def test_parse_nmnist_structure():
    assert parse_layers("12C5-P2-64C5-P2") == (Conv(12, 5), Pool2(), Conv(64, 5), Pool2(), FC(10))


def test_parse_single_fc():
    assert parse_layers("300") == (FC(300), FC(10))


def test_explicit_output_layer_is_kept():
    assert parse_layers("300-10") == (FC(300), FC(10))
    assert parse_layers("1-1", classes=1) == (FC(1), FC(1))


def test_parse_is_case_insensitive():
    assert parse_layers("8c3-p2") == (Conv(8, 3), Pool2(), FC(10))


@pytest.mark.parametrize("text, token", [("15X5-P2", "15X5"), ("15C5-P3", "P3"), ("15C5--300", ""), ("0C3", "0C3")])
def test_malformed_token_is_cited(text, token):
    with pytest.raises(ConfigError) as exc:
        parse_layers(text)
    assert token in str(exc.value)


def test_conv_after_fc_rejected():
    with pytest.raises(ConfigError, match="follows a fully connected"):
        parse_layers("300-15C5")


def test_structure_string_round_trip():
    spec = parse_structure("128C3-P2-256C3-P2-512C3-P2-1024", classes=10)
    assert spec.structure == "128C3-P2-256C3-P2-512C3-P2-1024-10"


def test_dropout_after_hidden_spiking_layers():
    layers = insert_dropout(parse_layers("8C3-P2-64"), 0.2)
    assert layers == (Conv(8, 3), Dropout(0.2), Pool2(), FC(64), Dropout(0.2), FC(10))


def test_dropout_token_in_string():
    assert parse_layers("64-D0.5") == (FC(64), Dropout(0.5), FC(10))


def test_spec_fields_pass_through():
    spec = parse_structure("4C3-P2", classes=10, input_shape=(1, 8, 8), time_steps=4, gate_kernel=3)
    assert spec.input_shape == (1, 8, 8)
    assert spec.time_steps == 4
    assert spec.gate_kernel == 3
