import math

import numpy as np
import pytest

from gradcheck import check_layer, check_network, randomize
from infonet.grid import GridSpec
from infonet.infomap import mi_map, normalize_map
from infonet.io import FormatError, read_container, write_container
from infonet.neural import layers as L
from infonet.neural.losses import kl_logit_grad, kl_loss, mae_grad, mae_loss
from infonet.neural.nets import (build_coeff_net, build_map_net, coeff_net_for, load_weights,
                                 loss_and_grads, save_weights)
from infonet.neural.optim import Adam
from infonet.neural.train import (TrainConfig, TrainingError, _dihedral, dihedral_augmenter, diverging,
                                  split_indices, train, write_history_csv)
from infonet.sensors import BearingSensor, build_table
from infonet.spectral import SpectralBasis, decompose

G6 = GridSpec(n=6, heading_bins=8)
G7 = GridSpec(n=7, heading_bins=8)

LAYERS = {
    "conv": (lambda rng: L.Conv2D(2, 3, rng=rng), (2, 2, 5, 5)),
    "conv_stride2": (lambda rng: L.Conv2D(2, 3, stride=2, rng=rng), (2, 2, 6, 6)),
    "convT": (lambda rng: L.ConvTranspose2D(2, 3, k=3, stride=1, pad=1, rng=rng), (2, 2, 4, 4)),
    "convT_stride2": (lambda rng: L.ConvTranspose2D(3, 2, k=4, stride=2, pad=1, rng=rng), (2, 3, 3, 3)),
    "convT_stride2_odd": (lambda rng: L.ConvTranspose2D(3, 2, k=4, stride=2, pad=2, out_pad=1, rng=rng), (2, 3, 4, 4)),
    "dense": (lambda rng: L.Dense(7, 5, rng=rng), (3, 7)),
    "relu": (lambda rng: L.ReLU(), (3, 4, 5)),
    "flatten": (lambda rng: L.Flatten(), (2, 3, 4)),
    "reshape": (lambda rng: L.Reshape((3, 4)), (2, 12)),
    "softmax": (lambda rng: L.Softmax(), (3, 10)),
}


@pytest.mark.parametrize("name", list(LAYERS))
def test_layer_gradients(name):
    make, shape = LAYERS[name]
    for seed in range(10):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(shape)
        assert check_layer(make(rng), x, rng, points=10) < 1e-4


@pytest.mark.parametrize("arch,modality,grid", [
    ("map", "bearing", G6), ("map", "fov", G6), ("map", "fov", G7),
    ("coeff", "bearing", G6), ("coeff", "fov", G6),
])
def test_network_gradients(arch, modality, grid):
    for seed in range(3):
        rng = np.random.default_rng(seed)
        if arch == "map":
            net = randomize(build_map_net(grid, modality, seed=seed), rng)
            out_shape = (grid.n, grid.n) if modality == "bearing" else (grid.n, grid.n, grid.heading_bins)
            t = rng.random((2,) + out_shape)
            t /= t.reshape(2, -1).sum(axis=1).reshape((2,) + (1,) * len(out_shape))
            target = net.encode_targets(t).astype(np.float64)
        else:
            basis = SpectralBasis(grid, 2, modality)
            net = randomize(coeff_net_for(basis, seed=seed), rng)
            target = rng.standard_normal((2, len(basis)))
        b = rng.random((2, grid.n, grid.n))
        b /= b.sum(axis=(1, 2), keepdims=True)
        assert check_network(net, net.encode_inputs(b), target, rng, points=10) < 1e-4


def test_conv_identity_kernel():
    conv = L.Conv2D(1, 1)
    conv.params["W"][...] = 0
    conv.params["W"][0, 0, 1, 1] = 1
    x = np.random.default_rng(0).standard_normal((2, 1, 5, 5)).astype(np.float32)
    assert np.array_equal(conv.forward(x), x)


def test_convT_output_sizes():
    assert L.ConvTranspose2D(1, 1, k=4, stride=2, pad=1).output_size(14) == 28
    assert L.ConvTranspose2D(1, 1, k=4, stride=2, pad=2, out_pad=1).output_size(4) == 7
    with pytest.raises(ValueError):
        L.ConvTranspose2D(1, 1, stride=1, out_pad=1)


def test_convT_is_adjoint_of_conv():
    rng = np.random.default_rng(3)
    conv = L.Conv2D(2, 3, k=4, stride=2, pad=1, rng=rng, dtype=np.float64)
    convT = L.ConvTranspose2D(3, 2, k=4, stride=2, pad=1, rng=rng, dtype=np.float64)
    convT.params["W"] = conv.params["W"].copy()  # (out, in) of conv == (in, out) of convT
    conv.params["b"][:] = 0
    x = rng.standard_normal((1, 2, 8, 8))
    y = rng.standard_normal((1, 3, 4, 4))
    assert (conv.forward(x) * y).sum() == pytest.approx((x * convT.forward(y)).sum(), rel=1e-12)


def test_softmax_permutation_equivariant():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((2, 20))
    perm = rng.permutation(20)
    sm = L.Softmax()
    np.testing.assert_allclose(sm.forward(x[:, perm]), sm.forward(x)[:, perm], rtol=1e-14)


def test_map_net_outputs_distributions():
    rng = np.random.default_rng(1)
    for modality, shape in (("bearing", (6, 6)), ("fov", (6, 6, 8))):
        net = randomize(build_map_net(G6, modality, seed=0), rng, scale=1.0).astype(np.float32)
        b = rng.random((3, 6, 6))
        b /= b.sum(axis=(1, 2), keepdims=True)
        out = net.predict_batch(b)
        assert out.shape == (3,) + shape
        np.testing.assert_allclose(out.reshape(3, -1).sum(axis=1), 1.0, atol=1e-5)
        assert np.all((out > 0) & (out < 1))


def test_fresh_map_net_is_uniform():
    out = build_map_net(G6, "fov").predict(np.full((6, 6), 1 / 36))
    np.testing.assert_allclose(out, 1 / 288, rtol=1e-5)


def test_zero_final_layer_gives_zero_coeffs():
    net = build_coeff_net(G6, 9, "bearing")
    net.layers[-1].params["W"][...] = 0
    out = net.forward(net.encode_inputs(np.full((6, 6), 1 / 36)))
    assert np.array_equal(out, np.zeros((1, 9), dtype=np.float32))


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        build_map_net(G6).predict(np.ones((5, 5)) / 25)


def test_parameter_budget():
    net = build_map_net(GridSpec(), "bearing")
    assert net.num_parameters() < 10_000_000
    assert build_map_net(GridSpec(), "fov").num_parameters() < 10_000_000
    assert build_coeff_net(GridSpec(), 36).num_parameters() < 5_000_000
    assert build_coeff_net(GridSpec(), 18 ** 3, "fov").num_parameters() < 5_000_000


# losses

def test_kl_loss_examples():
    p = np.array([[0.2, 0.3, 0.5]])
    assert kl_loss(p, p) == 0.0
    assert kl_loss(np.full((1, 4), 0.25), np.full((1, 4), 0.25)) == 0.0
    assert kl_loss(np.array([0.5, 0.5]), np.array([1.0, 0.0])) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        kl_loss(np.array([0.5, 0.6]), np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        kl_loss(np.array([1.0, 0.0]), np.array([0.5, 0.5]))


def test_kl_grad_zero_at_target():
    p = np.array([[0.1, 0.2, 0.7]])
    np.testing.assert_allclose(kl_logit_grad(p, p.copy()), 0.0, atol=1e-17)


def test_mae_examples():
    assert mae_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    t = np.array([0.3, -2.0, 5.0])
    assert mae_loss(t + 1, t) == pytest.approx(1.0)
    assert mae_loss(np.array([0.0, 0.0]), np.array([1.0, -1.0])) == 1.0
    with pytest.raises(ValueError):
        mae_loss(np.zeros(3), np.zeros(4))
    g = mae_grad(np.array([[1.0, 2.0, 3.0]]), np.array([[0.0, 2.0, 4.0]]))
    assert set(np.round(g.ravel() * 3, 12)) <= {-1.0, 0.0, 1.0}


def test_kl_loss_needs_map_net():
    net = build_coeff_net(G6, 9)
    with pytest.raises(ValueError):
        loss_and_grads(net, np.zeros((1, 1, 6, 6), np.float32), np.full((1, 9), 1 / 9), "kl")


# optimizer and training

def test_adam_zero_lr_keeps_params():
    net = build_coeff_net(G6, 9)
    before = [p.copy() for _, _, p in net.parameters()]
    rng = np.random.default_rng(0)
    x = net.encode_inputs(rng.dirichlet(np.ones(36), 20).reshape(20, 6, 6))
    y = rng.standard_normal((20, 9)).astype(np.float32)
    train(net, x, y, TrainConfig(epochs=3, batch_size=4, lr=0.0))
    assert all(np.array_equal(a, p) for a, (_, _, p) in zip(before, net.parameters()))


def test_adam_step_direction():
    p = np.array([1.0, -1.0])
    Adam([p], lr=0.1).step([np.array([2.0, -3.0])])
    np.testing.assert_allclose(p, [0.9, -0.9], atol=1e-6)


def _toy_data(n_samples, seed=0):
    rng = np.random.default_rng(seed)
    b = rng.dirichlet(np.ones(36), n_samples).reshape(n_samples, 6, 6)
    m = rng.dirichlet(np.ones(36) * 5, n_samples).reshape(n_samples, 6, 6)
    return b, m


def test_memorize_single_sample():
    g = GridSpec(n=8)
    rng = np.random.default_rng(0)
    b = rng.random((8, 8))
    b /= b.sum()
    m = normalize_map(mi_map(b, build_table(BearingSensor(), g))).values
    net = build_map_net(g, "bearing", seed=0)
    x = net.encode_inputs(np.repeat(b[None], 100, axis=0))
    y = net.encode_targets(np.repeat(m[None], 100, axis=0))
    res = train(net, x, y, TrainConfig(epochs=200, batch_size=10, lr=1e-4, seed=0))
    assert min(h[1] for h in res.history) < 1e-3


def test_training_deterministic_and_split():
    b, m = _toy_data(25)
    hist = []
    for _ in range(2):
        net = build_map_net(G6, "bearing", seed=4)
        res = train(net, net.encode_inputs(b), net.encode_targets(m), TrainConfig(epochs=3, batch_size=8, seed=9))
        hist.append(res.history)
    assert hist[0] == hist[1]
    assert len(res.val_idx) == 2 and len(res.train_idx) == 23
    assert not set(res.val_idx) & set(res.train_idx)


def test_validation_samples_never_update():
    # corrupting validation targets must not change the trained parameters
    b, m = _toy_data(30)
    nets = []
    for corrupt in (False, True):
        net = build_map_net(G6, "bearing", seed=1)
        y = net.encode_targets(m).copy()
        _, val = split_indices(30, 0.1, np.random.default_rng(5))
        if corrupt:
            y[val] = np.roll(y[val], 3, axis=1)
        cfg = TrainConfig(epochs=2, batch_size=8, seed=5)
        res = train(net, net.encode_inputs(b), y, cfg)
        last = [p.copy() for _, _, p in net.parameters()]
        nets.append((res, last))
    assert [h[1] for h in nets[0][0].history] == [h[1] for h in nets[1][0].history]


def test_best_checkpoint_restored():
    b, m = _toy_data(30)
    net = build_map_net(G6, "bearing", seed=1)
    x, y = net.encode_inputs(b), net.encode_targets(m)
    res = train(net, x, y, TrainConfig(epochs=6, batch_size=8, seed=2, lr=3e-3))
    best_val = min(h[2] for h in res.history)
    assert res.history[res.best_epoch - 1][2] == best_val
    from infonet.neural.train import evaluate_loss
    assert evaluate_loss(net, x[res.val_idx], y[res.val_idx], 8, "kl") == pytest.approx(best_val, rel=1e-5)


def test_training_errors():
    net = build_coeff_net(G6, 9)
    with pytest.raises(TrainingError):
        train(net, np.zeros((0, 1, 6, 6), np.float32), np.zeros((0, 9), np.float32), TrainConfig())
    x = np.ones((10, 1, 6, 6), np.float32)
    with pytest.raises(TrainingError):
        train(net, x, np.full((10, 9), np.nan, np.float32), TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        TrainConfig(val_fraction=0.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_diverging_detector():
    assert diverging([(i, 1.0 / i, 0.5 + 0.01 * i) for i in range(1, 10)], window=5)
    assert not diverging([(i, 1.0 / i, 1.0 / i) for i in range(1, 10)], window=5)


def test_history_csv(tmp_path):
    write_history_csv(tmp_path / "h.csv", [(1, 0.5, 0.25), (2, 0.125, float("nan"))])
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,val_loss"
    assert lines[1] == "1,0.5,0.25"


# weight files

@pytest.mark.parametrize("modality", ["bearing", "fov"])
def test_weights_round_trip(tmp_path, modality):
    rng = np.random.default_rng(0)
    net = randomize(build_map_net(G7, modality, seed=3), rng).astype(np.float32)
    save_weights(net, tmp_path / "w.bin", {"epochs": 3})
    back = load_weights(tmp_path / "w.bin")
    b = rng.dirichlet(np.ones(49), 2).reshape(2, 7, 7)
    assert np.array_equal(back.predict_batch(b), net.predict_batch(b))
    assert back.training == {"epochs": 3} and back.arch_id == net.arch_id


def test_coeff_weights_round_trip(tmp_path):
    net = coeff_net_for(SpectralBasis(G6, 2), seed=1)
    save_weights(net, tmp_path / "c.bin")
    back = load_weights(tmp_path / "c.bin")
    assert back.meta == net.meta
    b = np.full((6, 6), 1 / 36)
    assert np.array_equal(back.predict(b), net.predict(b))


def test_weights_errors(tmp_path):
    net = build_coeff_net(G6, 9)
    path = tmp_path / "w.bin"
    save_weights(net, path)
    raw = path.read_bytes()
    (tmp_path / "trunc.bin").write_bytes(raw[:-100])
    with pytest.raises(FormatError):
        load_weights(tmp_path / "trunc.bin")
    manifest, arrays = read_container(path)
    for key, value in (("format_version", 2), ("arch_id", "map-r3")):
        bad = dict(manifest, **{key: value})
        bad.pop("arrays", None)
        write_container(tmp_path / "bad.bin", bad, arrays)
        with pytest.raises(FormatError, match="version|architecture"):
            load_weights(tmp_path / "bad.bin")
    bad = {k: v for k, v in manifest.items() if k != "arrays"}
    arrays = dict(arrays)
    arrays.pop("0.b")
    write_container(tmp_path / "missing.bin", bad, arrays)
    with pytest.raises(FormatError):
        load_weights(tmp_path / "missing.bin")


# augmentation

class _FixedRng:
    def __init__(self, g):
        self.g = g

    def integers(self, high, size):
        return np.full(size, self.g)


@pytest.mark.parametrize("g", range(8))
def test_dihedral_matches_recomputed_maps(g):
    grid = GridSpec(side_length=80.0, n=8)
    table = build_table(BearingSensor(), grid)
    basis = SpectralBasis(grid, 5, "bearing")
    b = np.random.default_rng(g).dirichlet(np.ones(64) * 0.3).reshape(8, 8)
    m = normalize_map(mi_map(b, table)).values
    m_g = normalize_map(mi_map(np.ascontiguousarray(_dihedral(b, g)), table)).values
    np.testing.assert_allclose(_dihedral(m, g), m_g, atol=1e-12)

    net = coeff_net_for(basis)
    x = net.encode_inputs(b)
    _, y = dihedral_augmenter(net)(x, net.encode_targets(decompose(m, basis).values[None]), _FixedRng(g))
    np.testing.assert_allclose(net.decode(y)[0], decompose(m_g, basis).values, atol=1e-6)

    mnet = build_map_net(grid)
    xa, ya = dihedral_augmenter(mnet)(mnet.encode_inputs(b), mnet.encode_targets(m[None]), _FixedRng(g))
    np.testing.assert_array_equal(xa[0, 0], mnet.encode_inputs(_dihedral(b, g))[0, 0])
    np.testing.assert_allclose(ya[0].reshape(8, 8), m_g, atol=1e-7)


def test_dihedral_rejects_fov():
    with pytest.raises(ValueError):
        dihedral_augmenter(build_map_net(GridSpec(n=6, heading_bins=4), "fov"))


def test_cosine_schedule():
    cfg = TrainConfig(epochs=10, lr=1e-3, schedule="cosine")
    assert cfg.lr_at(1) == pytest.approx(1e-3)
    assert cfg.lr_at(6) == pytest.approx(5e-4)
    assert all(cfg.lr_at(e) > cfg.lr_at(e + 1) for e in range(1, 10))
    assert TrainConfig(epochs=10, lr=1e-3).lr_at(7) == 1e-3
    with pytest.raises(ValueError):
        TrainConfig(schedule="step")
