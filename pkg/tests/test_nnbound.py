import numpy as np
import pytest

from lurecert import (DimensionError, FeedforwardNet, LayerInterval, SectorInterval,
                      gamma_search, nn_eval, preactivation_intervals, propagate_sector,
                      relax_activation)


def random_net(rng):
    """Small net with random shape, weights, and activation mix."""
    depth = int(rng.integers(1, 4))
    widths = [int(rng.integers(1, 3))] + [int(rng.integers(1, 9)) for _ in range(depth)]
    widths.append(int(rng.integers(1, 4)))
    weights = tuple(rng.normal(scale=1.2, size=(widths[i + 1], widths[i]))
                    for i in range(depth + 1))
    acts = tuple(rng.choice(["tanh", "relu", "identity"]) for _ in range(depth))
    return FeedforwardNet(weights, acts)


# --- single-interval relaxations --------------------------------------------------

def test_relax_tanh_positive_interval():
    iv = LayerInterval(lower=np.array([1.0]), upper=np.array([2.0]))
    d_low, d_up, crossing = relax_activation(iv, "tanh")
    assert np.isclose(d_low[0], np.tanh(2.0) / 2.0, rtol=0, atol=1e-15)
    assert np.isclose(d_up[0], np.tanh(1.0), rtol=0, atol=1e-15)
    assert np.isclose(d_low[0], 0.4820, atol=5e-5)
    assert np.isclose(d_up[0], 0.7616, atol=5e-5)
    assert not crossing[0]


def test_relax_tanh_interval_touching_zero():
    iv = LayerInterval(lower=np.array([0.0]), upper=np.array([1.0]))
    d_low, d_up, crossing = relax_activation(iv, "tanh")
    assert np.isclose(d_low[0], np.tanh(1.0), rtol=0, atol=1e-15)
    assert d_up[0] == 1.0  # chord limit at the origin
    assert not crossing[0]


def test_relax_tanh_crossing_interval():
    iv = LayerInterval(lower=np.array([-1.0]), upper=np.array([2.0]))
    d_low, d_up, crossing = relax_activation(iv, "tanh")
    assert (d_low[0], d_up[0]) == (-1.0, 1.0)
    assert crossing[0]


def test_relax_tanh_negative_interval():
    # negative side flips the endpoint roles: the near endpoint gives d_low
    iv = LayerInterval(lower=np.array([-2.0]), upper=np.array([-1.0]))
    d_low, d_up, crossing = relax_activation(iv, "tanh")
    assert np.isclose(d_low[0], np.tanh(1.0), rtol=0, atol=1e-15)
    assert np.isclose(d_up[0], np.tanh(2.0) / 2.0, rtol=0, atol=1e-15)
    assert not crossing[0]


def test_relax_relu_cases():
    iv = LayerInterval(lower=np.array([0.5, -2.0, -1.0, 0.0, -1.0]),
                       upper=np.array([2.0, -0.5, 1.0, 2.0, 0.0]))
    d_low, d_up, crossing = relax_activation(iv, "relu")
    assert (d_low[0], d_up[0]) == (1.0, 1.0)  # positive: identity
    assert (d_low[1], d_up[1]) == (0.0, 0.0)  # negative: clipped flat
    assert (d_low[2], d_up[2]) == (0.0, 1.0)  # crossing pair
    assert (d_low[3], d_up[3]) == (1.0, 1.0)  # [0, hi] counts as positive
    assert (d_low[4], d_up[4]) == (0.0, 0.0)  # [lo, 0] counts as negative
    assert list(crossing) == [False, False, True, False, False]


def test_relax_identity_exact():
    iv = LayerInterval(lower=np.array([-3.0, 1.0]), upper=np.array([4.0, 2.0]))
    d_low, d_up, crossing = relax_activation(iv, "identity")
    assert np.array_equal(d_low, [1.0, 1.0])
    assert np.array_equal(d_up, [1.0, 1.0])
    assert not crossing.any()


def test_relax_rejects_inverted_interval():
    iv = LayerInterval(lower=np.array([1.0]), upper=np.array([0.0]))
    with pytest.raises(ValueError):
        relax_activation(iv, "tanh")


def test_relax_soundness_randomized():
    # d_low v <= phi(v) <= d_up v must hold across each interval (v >= 0 for
    # crossing rows is guaranteed by how the caller uses them, so only
    # sign-definite rows are checked pointwise here)
    rng = np.random.default_rng(5)
    for name, fn in (("tanh", np.tanh), ("relu", lambda v: np.maximum(v, 0.0))):
        for _ in range(200):
            a, b = np.sort(rng.uniform(-4.0, 4.0, 2))
            iv = LayerInterval(lower=np.array([a]), upper=np.array([b]))
            d_low, d_up, crossing = relax_activation(iv, name)
            if crossing[0]:
                continue
            vs = np.linspace(a, b, 101)
            assert np.all(d_low[0] * vs <= fn(vs) + 1e-12)
            assert np.all(fn(vs) <= d_up[0] * vs + 1e-12)


# --- interval propagation ----------------------------------------------------------

def test_first_layer_intervals_signed():
    net = FeedforwardNet((np.array([[2.0], [-3.0]]), np.array([[1.0, 1.0]])), ("tanh",))
    ivs = preactivation_intervals(net, [1.0])
    assert np.array_equal(ivs[0].lower, [0.0, -3.0])
    assert np.array_equal(ivs[0].upper, [2.0, 0.0])


def test_intervals_enclose_random_forward_passes():
    rng = np.random.default_rng(17)
    for _ in range(40):
        net = random_net(rng)
        yu = rng.uniform(0.2, 3.0, net.input_width)
        ivs = preactivation_intervals(net, yu)
        ys = rng.uniform(0.0, 1.0, (300, net.input_width)) * yu
        h = ys
        from lurecert.model import get_activation
        for k, w in enumerate(net.weights):
            pre = h @ w.T
            assert np.all(pre >= ivs[k].lower - 1e-9)
            assert np.all(pre <= ivs[k].upper + 1e-9)
            if k < len(net.weights) - 1:
                h = get_activation(net.activations[k]).fn(pre)


def test_last_interval_bounds_network_output(toy_net):
    ivs = preactivation_intervals(toy_net, [1.0])
    ys = np.linspace(0.0, 1.0, 500)
    out = nn_eval(toy_net, ys[:, None])[:, 0]
    assert out.min() >= ivs[-1].lower[0] - 1e-12
    assert out.max() <= ivs[-1].upper[0] + 1e-12


# --- sector propagation -------------------------------------------------------------

def test_toy_net_sector_is_exact(toy_net):
    s = propagate_sector(toy_net, [1.0])
    assert s.gamma1[0, 0] == -2.0
    assert s.gamma2[0, 0] == -2.0 * np.tanh(1.0)


def test_identity_net_sector_collapses_to_product():
    rng = np.random.default_rng(2)
    ws = (rng.normal(size=(4, 2)), rng.normal(size=(3, 4)), rng.normal(size=(2, 3)))
    net = FeedforwardNet(ws, ("identity", "identity"))
    s = propagate_sector(net, [1.0, 2.0])
    assert np.array_equal(s.gamma1, s.gamma2)
    product = ws[2] @ ws[1] @ ws[0]
    assert np.allclose(s.gamma1, product, rtol=1e-12, atol=1e-14)


def test_sector_soundness_randomized():
    rng = np.random.default_rng(23)
    for _ in range(60):
        net = random_net(rng)
        yu = rng.uniform(0.2, 3.0, net.input_width)
        s = propagate_sector(net, yu)
        ys = rng.uniform(0.0, 1.0, (400, net.input_width)) * yu
        vals = nn_eval(net, ys)
        lo = ys @ s.gamma1.T
        hi = ys @ s.gamma2.T
        assert np.all(vals >= lo - 1e-9)
        assert np.all(vals <= hi + 1e-9)


def test_sector_grows_with_box(demo):
    # wider boxes can only loosen the certified sector
    heights = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]
    sectors = [propagate_sector(demo.net, [y]) for y in heights]
    g1 = [s.gamma1[0, 0] for s in sectors]
    g2 = [s.gamma2[0, 0] for s in sectors]
    assert all(a >= b - 1e-12 for a, b in zip(g1, g1[1:]))
    assert all(a <= b + 1e-12 for a, b in zip(g2, g2[1:]))


def test_sector_tightens_to_origin_gain(demo):
    s = propagate_sector(demo.net, [1e-8])
    assert np.isclose(s.gamma1[0, 0], -1.8, atol=1e-6)
    assert np.isclose(s.gamma2[0, 0], -1.8, atol=1e-6)


def test_propagate_trace_shapes(demo):
    s, trace = propagate_sector(demo.net, [1.0], with_trace=True)
    assert len(trace) == demo.net.hidden_layers
    for k, st in enumerate(trace):
        assert st.layer == k + 1  # numbered by the weight layer they follow
        assert st.d_low.shape == st.d_up.shape == st.crossing.shape
    assert s.gamma1.shape == (1, 1)


def test_propagate_rejects_bad_box(toy_net):
    with pytest.raises(ValueError):
        propagate_sector(toy_net, [-1.0])
    with pytest.raises(DimensionError):
        propagate_sector(toy_net, [1.0, 2.0])


# --- certified box search -----------------------------------------------------------

def test_gamma_search_toy_matches_chord_root(toy_net):
    target = SectorInterval(sigma1=[[-3.0]], sigma2=[[-1.276]], y_upper=[np.inf])

    # oracle: the chord -2 tanh(y)/y rises through -1.276 at a unique root
    def chord(y):
        return -2.0 * np.tanh(y) / y

    lo, hi = 1.0, 2.0
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if chord(mid) <= -1.276 else (lo, mid)
    root = 0.5 * (lo + hi)
    assert np.isclose(root, 1.3812339978898, atol=1e-10)

    found = gamma_search(toy_net, target)
    assert abs(found - root) <= 1e-3


def test_gamma_search_returns_zero_when_hopeless():
    # slope at the origin is -5, outside [-3, -1.276] from the start
    net = FeedforwardNet((np.array([[1.0]]), np.array([[-5.0]])), ("tanh",))
    target = SectorInterval(sigma1=[[-3.0]], sigma2=[[-1.276]], y_upper=[np.inf])
    assert gamma_search(net, target) == 0.0


def test_gamma_search_saturates_at_probe_max(demo):
    target = SectorInterval(sigma1=[[-30.0]], sigma2=[[30.0]], y_upper=[np.inf])
    assert gamma_search(demo.net, target, y_probe_max=5.0) == 5.0


def test_gamma_search_result_is_certified(demo):
    target = SectorInterval(sigma1=[[-3.0]], sigma2=[[-1.276]], y_upper=[np.inf])
    ybar = gamma_search(demo.net, target)
    assert ybar > 0.0
    s = propagate_sector(demo.net, [ybar])
    assert s.gamma1[0, 0] >= -3.0
    assert s.gamma2[0, 0] <= -1.276


def test_gamma_search_needs_scalar_input():
    rng = np.random.default_rng(1)
    net = FeedforwardNet((rng.normal(size=(3, 2)), rng.normal(size=(1, 3))), ("tanh",))
    target = SectorInterval(sigma1=[[-3.0, -3.0]], sigma2=[[3.0, 3.0]], y_upper=[1.0, 1.0])
    with pytest.raises(DimensionError):
        gamma_search(net, target)


def test_gamma_search_validates_parameters(toy_net):
    target = SectorInterval(sigma1=[[-3.0]], sigma2=[[-1.276]], y_upper=[np.inf])
    with pytest.raises(ValueError):
        gamma_search(toy_net, target, tol=0.0)
    with pytest.raises(ValueError):
        gamma_search(toy_net, target, y_probe_max=-1.0)
