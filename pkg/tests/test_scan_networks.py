"""
Test Suite for the Network Engine
=================================

Tests for convolutions, activations, networks with skips, exact
gradients, the SPARK architectures and the ADAM optimizer.
"""

import pytest
import numpy as np
from tests import TEST_SEED


def small_network(activation='relu', seed=TEST_SEED):
    """Three-layer network with an input skip."""
    from scan_networks.layers import ConvLayer, Network

    rng = np.random.default_rng(seed)
    layers = [
        ConvLayer.initialize(2, 3, (3, 3, 1), rng),
        ConvLayer.initialize(3, 2, (3, 3, 1), rng),
        ConvLayer.initialize(2, 2, (1, 3, 1), rng),
    ]
    return Network(layers=layers, activations=[activation, activation, 'identity'], skips=[(0, 2)])


# ========================================
# ACTIVATION TESTS
# ========================================

@pytest.mark.parametrize("x,expected", [(0.5, 0.5), (3.0, 4.0), (-3.0, -2.0), (1.0, 1.0), (-1.0, -1.0)])
def test_custom_nl_values(x, expected):
    """Identity on [-1, 1], slope 3/2 above and 1/2 below."""
    from scan_networks.layers import custom_nl

    assert np.isclose(custom_nl(np.array(x)), expected)


def test_activation_gradients():
    """Analytic activation derivatives away from the kinks."""
    from scan_networks.layers import custom_nl_grad, relu_grad

    x = np.array([-2.0, -0.5, 0.5, 2.0])
    assert custom_nl_grad(x).tolist() == [0.5, 1.0, 1.0, 1.5]
    assert relu_grad(x).tolist() == [0.0, 0.0, 1.0, 1.0]


# ========================================
# CONVOLUTION TESTS
# ========================================

def test_same_convolution_matches_scipy():
    """'same' convolution is zero-padded cross-correlation summed over inputs."""
    from scipy.ndimage import correlate
    from scan_networks.layers import ConvLayer, conv_forward

    rng = np.random.default_rng(TEST_SEED)
    layer = ConvLayer.initialize(2, 1, (3, 3, 3), rng)
    x = rng.standard_normal((2, 6, 5, 4))
    expected = sum(correlate(x[i], layer.weights[0, i], mode='constant') for i in range(2))
    assert np.allclose(conv_forward(layer, x)[0], expected, atol=1e-12)


def test_valid_dilated_shape():
    """Valid convolutions shrink by the dilated reach."""
    from scan_networks.layers import ConvLayer, conv_forward

    rng = np.random.default_rng(TEST_SEED)
    layer = ConvLayer.initialize(1, 2, (3, 2, 1), rng, padding='valid', dilation=(1, 3, 1))
    assert layer.reach == (2, 3, 0)
    out = conv_forward(layer, rng.standard_normal((1, 9, 8, 2)))
    assert out.shape == (2, 7, 5, 2)


def test_same_padding_needs_odd_kernel():
    """Even kernels cannot keep the shape."""
    from scan_networks.layers import ConvLayer

    with pytest.raises(ValueError):
        ConvLayer(weights=np.zeros((1, 1, 2, 3, 1)))
    with pytest.raises(ValueError):
        ConvLayer(weights=np.zeros((1, 1, 3, 3, 1)), padding='reflect')


def test_conv_input_validation():
    """Wrong channel counts and inputs smaller than the kernel raise."""
    from scan_networks.layers import ConvLayer, conv_forward

    layer = ConvLayer(weights=np.ones((1, 2, 3, 3, 1)), padding='valid')
    with pytest.raises(ValueError):
        conv_forward(layer, np.ones((3, 5, 5, 1)))
    with pytest.raises(ValueError):
        conv_forward(layer, np.ones((2, 2, 5, 1)))


# ========================================
# NETWORK TESTS
# ========================================

@pytest.mark.parametrize("activation", ['relu', 'custom_nl'])
def test_backward_matches_finite_differences(activation):
    """Reverse-mode gradients agree with central differences."""
    from scan_networks.optim import gradient_check

    rng = np.random.default_rng(TEST_SEED)
    network = small_network(activation)
    before = network.flat_parameters()
    errors = gradient_check(network, rng.standard_normal((2, 5, 6, 1)), rng.standard_normal((2, 5, 6, 1)))
    assert len(errors) == 3
    assert max(errors) <= 1e-5
    assert np.array_equal(network.flat_parameters(), before)


def test_skip_adds_input():
    """A zero-weight network with an input skip returns its input."""
    from scan_networks.layers import ConvLayer, Network, net_forward

    layers = [ConvLayer(weights=np.zeros((2, 2, 3, 3, 1))), ConvLayer(weights=np.zeros((2, 2, 3, 3, 1)))]
    network = Network(layers=layers, activations=['relu', 'identity'], skips=[(0, 2)])
    x = np.random.default_rng(TEST_SEED).standard_normal((2, 4, 4, 1))
    assert np.array_equal(net_forward(network, x), x)


@pytest.mark.parametrize("activations,skips", [
    (['relu'], []),
    (['relu', 'tanh', 'identity'], []),
    (['relu', 'relu', 'identity'], [(0, 1)]),
    (['relu', 'relu', 'identity'], [(2, 1)]),
])
def test_network_validation(activations, skips):
    """Activation tags and skip channel counts are checked."""
    from scan_networks.layers import Network

    with pytest.raises(ValueError):
        Network(layers=small_network().layers, activations=activations, skips=skips)


def test_network_channel_mismatch():
    """Consecutive layers must agree on channels."""
    from scan_networks.layers import ConvLayer, Network

    layers = [ConvLayer(weights=np.zeros((3, 2, 1, 1, 1))), ConvLayer(weights=np.zeros((1, 2, 1, 1, 1)))]
    with pytest.raises(ValueError):
        Network(layers=layers, activations=['relu', 'identity'])


def test_flat_parameters_round_trip():
    """load_flat restores what flat_parameters wrote."""
    network = small_network()
    flat = network.flat_parameters()
    assert flat.size == network.n_parameters()

    other = small_network(seed=TEST_SEED + 1)
    other.load_flat(flat)
    assert np.array_equal(other.flat_parameters(), flat)
    with pytest.raises(ValueError):
        other.load_flat(flat[:-1])


# ========================================
# ARCHITECTURE TESTS
# ========================================

def test_net2d_layout():
    """Six 3x3 layers with one skip from the input."""
    from scan_networks.architectures import net2d

    network = net2d(2, hidden=4, seed=0)
    assert len(network.layers) == 6
    assert network.skips == [(0, 3)]
    assert network.in_channels == 4 and network.out_channels == 2
    assert network.receptive_radius() == (6, 6, 0)
    assert network.n_parameters() == 5 * 4 * 4 * 9 + 2 * 4 * 9
    assert network.activations[-1] == 'identity'


def test_net3d_layout():
    """Nine 3x3x3 layers with two skips and the custom nonlinearity."""
    from scan_networks.architectures import net3d

    network = net3d(2, hidden=4, seed=0)
    assert len(network.layers) == 9
    assert network.skips == [(0, 3), (3, 6)]
    assert network.receptive_radius() == (9, 9, 9)
    assert set(network.activations[:-1]) == {'custom_nl'}


def test_architectures_are_seeded():
    """Equal seeds give equal weights."""
    from scan_networks.architectures import build_network

    first = build_network('net2d', 2, 4, seed=7)
    second = build_network('net2d', 2, 4, seed=7)
    assert np.array_equal(first.flat_parameters(), second.flat_parameters())
    with pytest.raises(ValueError):
        build_network('unet', 2, 4)


# ========================================
# OPTIMIZER TESTS
# ========================================

def test_mse_loss_and_gradient():
    """Mean squared error with gradient 2·diff/n."""
    from scan_networks.optim import mse_loss

    loss, grad = mse_loss(np.array([1.0, 2.0]), np.zeros(2))
    assert loss == 2.5
    assert grad.tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        mse_loss(np.zeros(2), np.zeros(3))


def test_first_adam_step_is_sign_step():
    """Bias correction makes the first update lr·sign(g)."""
    from scan_networks.optim import AdamState, adam_step

    params = [np.array([1.0, -1.0, 0.5])]
    grads = [np.array([0.3, -2.0, 1e-3])]
    state = AdamState(lr=0.01)
    updated, state = adam_step(state, params, grads)
    assert state.t == 1
    assert np.allclose(params[0] - updated[0], 0.01 * np.sign(grads[0]), rtol=1e-4)


def test_adam_converges_on_quadratic():
    """200 steps reach the minimum of a separable quadratic."""
    from scan_networks.optim import AdamState, adam_step

    curvature = [np.array([1.0, 3.0]), np.array([[0.5]])]
    minimum = [np.array([1.5, -0.5]), np.array([[0.25]])]
    params = [np.zeros(2), np.zeros((1, 1))]
    state = AdamState(lr=0.05)
    for _ in range(200):
        grads = [a * (p - c) for a, p, c in zip(curvature, params, minimum)]
        params, state = adam_step(state, params, grads)
    assert state.t == 200
    for p, c in zip(params, minimum):
        assert np.allclose(p, c, atol=1e-2)


def test_adam_zero_gradient_keeps_parameters():
    """A zero gradient from fresh moments moves nothing."""
    from scan_networks.optim import AdamState, adam_step

    params = [np.array([1.0, -2.0, 0.5]), np.ones((2, 2))]
    state = AdamState(lr=0.1)
    updated, state = adam_step(state, params, [np.zeros(3), np.zeros((2, 2))])
    assert state.t == 1
    for before, after in zip(params, updated):
        assert np.array_equal(before, after)


def test_adam_validation():
    """Learning rates must be positive and shapes stable."""
    from scan_networks.optim import AdamState, adam_step

    with pytest.raises(ValueError):
        AdamState(lr=0.0)
    state = AdamState(lr=0.01)
    adam_step(state, [np.zeros(3)], [np.ones(3)])
    with pytest.raises(ValueError):
        adam_step(state, [np.zeros(4)], [np.ones(4)])


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
