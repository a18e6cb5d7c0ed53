import numpy as np
import pytest
from scipy.special import expit

from backeisnn.engine import kernels as K
from backeisnn.engine.autograd import constant, parameter
from backeisnn.engine.functional import SpikeFnConfig
from backeisnn.snn.neuron import (
    GateParams,
    LifLayerState,
    LifParams,
    Switches,
    ei_gate,
    lif_step,
    sfb_gate,
)
from backeisnn.utils.errors import ConfigError, NumericError


OFF = Switches(sfbm=False, beim=False)


def _state(v, delta):
    return LifLayerState(v=constant(np.array([[v]], dtype=np.float64)), delta_prev=constant(np.array([[delta]], dtype=np.float64)))


def _current(i):
    return constant(np.array([[i]], dtype=np.float64))


def _conv_gates(channels, k, rng, *, sfb=True, ei=True, scale=1.0):
    shape = (channels, channels, k, k)
    gates = GateParams(kernel_size=k)
    if sfb:
        gates.sfb_weight = parameter(rng.normal(size=shape) * scale, "sfb_w")
        gates.sfb_bias = parameter(rng.normal(size=channels) * scale, "sfb_b")
    if ei:
        gates.ei_weight = parameter(rng.normal(size=shape) * scale, "ei_w")
        gates.ei_bias = parameter(rng.normal(size=channels) * scale, "ei_b")
    return gates


def test_leak_from_tau():
    assert LifParams(tau=2.0).leak == 0.5
    with pytest.raises(ConfigError):
        LifParams(tau=1.0)
    with pytest.raises(ConfigError):
        LifParams(v_th=0.0)


def test_lif_step_direct_substitution():
    state, delta = lif_step(_state(0.4, 0.0), _current(0.3), LifParams(tau=2.0), None, OFF)
    assert state.v.value[0, 0] == 0.5
    assert delta.value[0, 0] == 1.0


def test_positive_spike_resets_fully():
    state, _ = lif_step(_state(0.9, 1.0), _current(0.1), LifParams(tau=2.0), None, OFF)
    assert state.v.value[0, 0] == 0.1


def test_negative_spike_reset_modes():
    literal, _ = lif_step(_state(0.4, -1.0), _current(0.0), LifParams(tau=2.0), None, OFF, "literal")
    magnitude, _ = lif_step(_state(0.4, -1.0), _current(0.0), LifParams(tau=2.0), None, OFF, "magnitude")
    assert literal.v.value[0, 0] == 0.4
    assert magnitude.v.value[0, 0] == 0.0


def test_magnitude_reset_is_exact_for_any_membrane():
    rng = np.random.default_rng(0)
    v = rng.normal(size=(4, 6)) * 3
    delta = rng.choice([-1.0, 1.0], size=(4, 6))
    state = LifLayerState(v=constant(v), delta_prev=constant(delta))
    new, _ = lif_step(state, constant(np.zeros((4, 6))), LifParams(), None, OFF, "magnitude")
    assert not new.v.value.any()


def test_no_input_geometric_decay():
    params = LifParams(tau=4.0)
    state = _state(0.45, 0.0)
    for t in range(1, 30):
        state, delta = lif_step(state, _current(0.0), params, None, OFF)
        assert delta.value[0, 0] == 0.0
        assert state.v.value[0, 0] == pytest.approx(0.45 * params.leak**t, rel=1e-12)


def test_sfb_gate_examples():
    gates = GateParams(
        sfb_weight=parameter(np.ones((2, 2, 3, 3)), "w"), sfb_bias=parameter(np.zeros(2), "b"), kernel_size=3
    )
    out = sfb_gate(constant(np.zeros((1, 2, 4, 4))), gates)
    assert np.all(out.value == 0.5)

    gates = GateParams(
        sfb_weight=parameter(np.zeros((2, 2, 3, 3)), "w"), sfb_bias=parameter(np.array([1.5, -2.0]), "b"), kernel_size=3
    )
    out = sfb_gate(constant(np.ones((1, 2, 4, 4))), gates)
    np.testing.assert_array_equal(out.value[0, 0], np.full((4, 4), expit(1.5)))
    np.testing.assert_array_equal(out.value[0, 1], np.full((4, 4), expit(-2.0)))


def test_sfb_gate_is_sigmoid_of_same_conv():
    rng = np.random.default_rng(5)
    gates = _conv_gates(3, 5, rng, ei=False)
    delta = constant(rng.choice([-1.0, 0.0, 1.0], size=(2, 3, 6, 6)))
    expected = expit(
        K.conv2d(delta.value, gates.sfb_weight.value, gates.sfb_bias.value, K.Conv2dGeometry.same(3, 3, 5))
    )
    out = sfb_gate(delta, gates)
    np.testing.assert_array_equal(out.value, expected)
    assert np.all((out.value > 0) & (out.value < 1))


def test_ei_gate_examples():
    cfg = SpikeFnConfig()
    gates = GateParams(
        ei_weight=parameter(np.zeros((1, 1, 3, 3)), "w"), ei_bias=parameter(np.array([-1.0]), "b"), kernel_size=3
    )
    assert np.all(ei_gate(constant(np.ones((1, 1, 5, 5))), gates, cfg).value == -1.0)

    gates = GateParams(ei_weight=parameter(np.ones((1, 1)), "w"), ei_bias=parameter(np.zeros(1), "b"), dense=True)
    assert ei_gate(constant(np.array([[0.3]])), gates, cfg).value[0, 0] == 1.0
    assert ei_gate(constant(np.array([[-0.3]])), gates, cfg).value[0, 0] == -1.0


def test_spikes_are_ternary_with_beim():
    rng = np.random.default_rng(3)
    gates = _conv_gates(2, 3, rng)
    state = LifLayerState.initial((2, 2, 5, 5), np.float64)
    seen = set()
    for _ in range(6):
        current = constant(rng.normal(size=(2, 2, 5, 5)))
        state, delta = lif_step(state, current, LifParams(), gates, Switches())
        seen.update(np.unique(delta.value).tolist())
        assert state.sfb is not None and np.all((state.sfb > 0) & (state.sfb < 1))
    assert seen <= {-1.0, 0.0, 1.0}
    assert -1.0 in seen and 1.0 in seen


def test_spikes_are_binary_without_beim():
    rng = np.random.default_rng(4)
    gates = _conv_gates(2, 3, rng, ei=False)
    state = LifLayerState.initial((1, 2, 5, 5), np.float64)
    for _ in range(5):
        state, delta = lif_step(state, constant(rng.normal(size=(1, 2, 5, 5))), LifParams(), gates, Switches(beim=False))
        assert set(np.unique(delta.value).tolist()) <= {0.0, 1.0}


def _scalar_step(v, d, i, sfb_pre, ei_pre, leak, v_th, sfbm, beim, reset_mode):
    gated = expit(sfb_pre) * i if sfbm else i
    r = abs(d) if reset_mode == "magnitude" else d
    v_new = v * leak * (1.0 - r) + gated
    spike = 1.0 if v_new >= v_th else 0.0
    if beim:
        spike = (1.0 if ei_pre >= 0 else -1.0) * spike
    return v_new, spike


@pytest.mark.parametrize("reset_mode", ["literal", "magnitude"])
@pytest.mark.parametrize("sfbm, beim", [(False, False), (True, False), (False, True), (True, True)])
def test_lif_step_matches_scalar_loop(reset_mode, sfbm, beim):
    rng = np.random.default_rng([int(sfbm), int(beim), len(reset_mode)])
    params = LifParams(tau=3.0, v_th=0.5)
    gates = _conv_gates(2, 3, rng, sfb=sfbm, ei=beim) if (sfbm or beim) else None
    geom = K.Conv2dGeometry.same(2, 2, 3)
    shape = (2, 2, 4, 4)
    state = LifLayerState.initial(shape, np.float64)
    v_ref = np.zeros(shape)
    d_ref = np.zeros(shape)
    for _ in range(5):
        current = rng.normal(size=shape)
        sfb_pre = K.conv2d(d_ref, gates.sfb_weight.value, gates.sfb_bias.value, geom) if sfbm else None
        state, delta = lif_step(
            state, constant(current), params, gates, Switches(sfbm, beim), reset_mode, SpikeFnConfig(v_th=0.5)
        )
        v_next = np.empty(shape)
        d_next = np.empty(shape)
        for idx in np.ndindex(shape):
            v_next[idx], _ = _scalar_step(
                v_ref[idx], d_ref[idx], current[idx], sfb_pre[idx] if sfbm else 0.0, 0.0,
                params.leak, params.v_th, sfbm, False, reset_mode,
            )
        ei_pre = K.conv2d(v_next, gates.ei_weight.value, gates.ei_bias.value, geom) if beim else None
        for idx in np.ndindex(shape):
            spike = 1.0 if v_next[idx] >= params.v_th else 0.0
            if beim:
                spike *= 1.0 if ei_pre[idx] >= 0 else -1.0
            d_next[idx] = spike
        np.testing.assert_array_equal(state.v.value, v_next)
        np.testing.assert_array_equal(delta.value, d_next)
        v_ref, d_ref = v_next, d_next


def test_nan_membrane_names_layer_and_timestep():
    with pytest.raises(NumericError, match="layer 2 at timestep 3"):
        lif_step(_state(0.0, 0.0), _current(np.inf), LifParams(), None, OFF, layer=2, timestep=3)


def test_switch_without_gate_parameters():
    with pytest.raises(ConfigError, match="self-feedback"):
        lif_step(_state(0.0, 0.0), _current(0.1), LifParams(), None, Switches(sfbm=True, beim=False))
    with pytest.raises(ConfigError, match="E/I"):
        lif_step(_state(0.0, 0.0), _current(0.1), LifParams(), GateParams(), Switches(sfbm=False, beim=True))


def test_unknown_reset_mode():
    with pytest.raises(ConfigError):
        lif_step(_state(0.0, 0.0), _current(0.1), LifParams(), None, OFF, "soft")
