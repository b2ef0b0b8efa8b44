import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import reference_net as R
from nirbench.foundation import NeuralConfig, RandomStream
from nirbench.neural import (ARCHITECTURES, Network, ShapeError, Tensor, TrainingError, attach_rte,
                             composite_loss, count_params, load_network, loss_beer_lambert, loss_conservation,
                             loss_data, loss_rte, make_batch, make_spec, reference_scattering, rte_terms,
                             save_network, series_conservation, train)
from nirbench.neural.losses import absorbances
from nirbench.neural.models import _layer_shapes
from nirbench.neural.train import InputScaler
from nirbench.pipeline import physics_context


@pytest.fixture(scope="module")
def setup(small_dataset):
    d = small_dataset
    tr = d.subset("train")
    scaler = InputScaler.fit(d.intensities(tr), [s.pmf_raw for s in tr])
    return d, tr, scaler, physics_context(d)


def _small_batch(setup, spec):
    d, tr, scaler, ctx = setup
    # two subjects, two measurements each, so conservation pairs exist
    b = make_batch(d, tr[:2] + tr[3:5], scaler)
    attach_rte(b, spec, ctx, NeuralConfig(), reference_scattering(d.wavelengths))
    return b


def _gradient_net(arch):
    net = Network.init(make_spec(arch), RandomStream(1, "init"))
    net.y_offset, net.y_scale = 120.0, 30.0
    rng = np.random.default_rng(0)
    for name in ("attn.w", "attn.b", "phys.offset"):
        if name in net.params:
            net.params[name].data = rng.normal(0, 0.5, net.params[name].data.shape)
    return net


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_gradients_match_finite_differences(setup, arch):
    net = _gradient_net(arch)
    b = _small_batch(setup, net.spec)
    ok, retried = R.check_gradients(net, b, setup[3], 1.0)
    assert retried <= 0.005 * ok.size
    assert ok.all(), np.flatnonzero(~ok)[:10]


def test_reference_loss_equals_engine(setup):
    _, _, _, ctx = setup
    for arch in ARCHITECTURES:
        spec = make_spec(arch)
        b = _small_batch(setup, spec)
        net = Network.init(spec, RandomStream(2, "init"))
        net.y_offset, net.y_scale = 110.0, 25.0
        total = float(composite_loss(net, b, ctx, 0.7)[0].data)
        ref = R.composite(spec, R.unflatten(_layer_shapes(spec), net.flat()[None]), b, ctx, 0.7, 110.0, 25.0)
        assert total == pytest.approx(ref[0], rel=1e-12)


def _grad_of(loss_fn, x):
    t = Tensor(np.asarray(x, dtype=float), requires_grad=True)
    loss_fn(t).backward()
    return t.grad


def _fd(loss_fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    for i in np.ndindex(x.shape):
        p, m = x.copy(), x.copy()
        p[i] += h
        m[i] -= h
        out[i] = (float(loss_fn(Tensor(p)).data) - float(loss_fn(Tensor(m)).data)) / (2 * h)
    return out


def test_loss_terms_individual_gradients():
    rng = np.random.default_rng(3)
    c = rng.normal(120, 20, 6)
    y = rng.normal(120, 20, 6)
    inten = rng.uniform(0.5, 4.0, (6, 4))
    i0 = np.full(4, 5.0)
    eps = np.array([1e-3, 2e-3, 3e-3, 4e-3])
    terms = rte_terms(absorbances(inten, i0), (2, 3), np.array([1.0, 1.0, 0.9, 0.8]))
    i, j, dt = np.array([0, 2, 3]), np.array([1, 3, 4]), np.array([5.0, 10.0, 2.5])
    fns = [
        lambda t: loss_data(t, y),
        lambda t: loss_beer_lambert(t, inten, i0, eps),
        lambda t: loss_rte(t.reshape(-1, 1) * eps[[2, 3]].reshape(1, -1), terms),
        lambda t: loss_conservation(t, i, j, dt),
    ]
    for fn in fns:
        assert np.allclose(_grad_of(fn, c), _fd(fn, c), rtol=1e-5, atol=1e-7)


def test_data_loss_examples():
    assert float(loss_data([3.0], [0.0]).data) == 9.0
    assert float(loss_data([1.0, -2.0], [1.0, 1.0]).data) == 4.5
    with pytest.raises(ValueError):
        loss_data([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        loss_data(np.zeros(0), np.zeros(0))


def test_beer_lambert_loss_examples():
    eps = np.array([1e-3, 2e-3, 3e-3, 4e-3])
    i0 = np.full(4, 2.0)
    c = np.array([100.0, 150.0])
    inten = i0 * np.exp(-c[:, None] * eps[None, :])
    assert float(loss_beer_lambert(c, inten, i0, eps).data) == pytest.approx(0.0, abs=1e-24)
    a = np.log(i0 / inten)
    assert float(loss_beer_lambert(c, inten, i0, np.zeros(4)).data) == pytest.approx(np.mean(a * a), rel=1e-14)
    off = np.array([0.1, -0.2, 0.3, 0.0])
    shifted = inten * np.exp(-off)
    assert float(loss_beer_lambert(c, shifted, i0, eps, off).data) == pytest.approx(0.0, abs=1e-24)


def test_conservation_examples():
    assert float(series_conservation([0.0, 1.0, 0.0]).data) == 1.0
    assert float(series_conservation([7.0, 7.0, 7.0, 7.0]).data) == 0.0
    with pytest.raises(ValueError):
        series_conservation([1.0, 2.0])
    with pytest.raises(ValueError):
        loss_conservation([1.0, 2.0], [0], [1], [0.0])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-300, 300), min_size=3, max_size=12), st.floats(-500, 500))
def test_conservation_shift_invariant(series, k):
    a = float(series_conservation(series).data)
    b = float(series_conservation([s + k for s in series]).data)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)
    assert a >= 0


def test_rte_loss_nonnegative_and_selective_ignores_short_channels(setup):
    d, _, _, ctx = setup
    spec = make_spec("selective_rte_pinn")
    assert spec.rte_wavelengths == (1050.0, 1150.0)
    b = _small_batch(setup, spec)
    net = Network.init(spec, RandomStream(4, "init"))
    net.y_offset, net.y_scale = 120.0, 30.0
    only_rte = dataclasses.replace(spec, physics_losses=("rte",))
    net.spec = only_rte
    base = float(composite_loss(net, b, ctx, 1.0)[2].data)
    assert base >= 0
    eps = ctx.eps.copy()
    eps[:2] *= 7.0
    moved = float(composite_loss(net, b, dataclasses.replace(ctx, eps=eps), 1.0)[2].data)
    assert moved == base


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5))
def test_rte_quadratic_nonnegative(a1, a2):
    inten = np.array([[2.0, 1.5, 1.0, 0.6]])
    terms = rte_terms(absorbances(inten, np.full(4, 5.0)), (2, 3), np.array([1.0, 1.0, 0.9, 0.8]))
    assert float(loss_rte(np.array([[a1, a2]]), terms).data) >= -1e-12


def test_attention_weights():
    spec = make_spec("optimized_pinn")
    net = Network.init(spec, RandomStream(5, "init"))
    rng = np.random.default_rng(1)
    net.params["attn.w"].data = rng.normal(size=4)
    net.params["attn.b"].data = rng.normal(size=4)
    w = net.attention(rng.normal(size=(9, 4))).data
    assert np.all(w > 0)
    assert np.allclose(w.sum(axis=1), 1.0, rtol=0, atol=1e-15)
    net.params["attn.w"].data = np.zeros(4)
    net.params["attn.b"].data = np.zeros(4)
    assert np.array_equal(net.attention(rng.normal(size=(3, 4))).data, np.full((3, 4), 0.25))


def test_residual_block_is_identity_when_inner_path_is_zero():
    spec = make_spec("optimized_pinn")
    net = Network.init(spec, RandomStream(6, "init"))
    for name in net.params:
        if name.startswith("nir.res.") or name.startswith("pmf.res."):
            net.params[name].data = np.zeros_like(net.params[name].data)
    x = Tensor(np.random.default_rng(2).normal(size=(5, 4)))
    h = net._dense("nir.in", x, 1, False).data
    assert np.array_equal(net._branch("nir", x, spec.nir_widths).data, h)


def test_zero_network_outputs_final_bias():
    for arch in ARCHITECTURES:
        spec = make_spec(arch)
        net = Network.zeros(spec)
        last = f"head.{len(spec.head_widths) - 2}.b"
        net.params[last].data = np.array([0.37])
        net.y_offset, net.y_scale = 100.0, 10.0
        out = net.predict(np.ones((3, 4)), np.ones((3, 12)))
        assert np.allclose(out, 103.7)


def test_parameter_counts():
    counts = {a: count_params(make_spec(a)) for a in ARCHITECTURES}
    assert counts["original_pinn"] == counts["full_rte_pinn"] == counts["selective_rte_pinn"] == 20229
    assert counts["optimized_pinn"] == 20237
    assert counts["sdnn"] == 7361
    for a in ARCHITECTURES:
        assert Network.init(make_spec(a), RandomStream(0, "x")).n_params == counts[a]


def test_shape_errors():
    net = Network.init(make_spec("sdnn"), RandomStream(0, "init"))
    with pytest.raises(ShapeError):
        net.forward(np.zeros((2, 3)), np.zeros((2, 12)))
    with pytest.raises(ShapeError):
        net.forward(np.zeros((2, 4)), np.zeros((3, 12)))
    with pytest.raises(ShapeError):
        net.set_flat(np.zeros(10))
    with pytest.raises(ValueError):
        make_spec("nope")


def _train_batches(setup, arch):
    d, tr, scaler, ctx = setup
    spec = make_spec(arch)
    tb = make_batch(d, tr, scaler)
    vb = make_batch(d, d.subset("val"), scaler)
    for b in (tb, vb):
        attach_rte(b, spec, ctx, NeuralConfig(), reference_scattering(d.wavelengths))
    return spec, tb, vb, ctx


def test_training_deterministic_and_descends(setup):
    spec, tb, vb, ctx = _train_batches(setup, "sdnn")
    cfg = NeuralConfig(max_epochs=60, patience=1000)
    a, sa = train(spec, tb, vb, ctx, cfg, RandomStream(7, "train/sdnn"))
    b, sb = train(spec, tb, vb, ctx, cfg, RandomStream(7, "train/sdnn"))
    assert sa.history == sb.history
    assert np.array_equal(a.flat(), b.flat())
    assert sa.history[-1][1] < sa.history[0][1]


def test_early_stopping_restores_best(setup):
    spec, tb, vb, ctx = _train_batches(setup, "original_pinn")
    cfg = NeuralConfig(max_epochs=400, patience=5, learning_rate=0.05)
    net, st_ = train(spec, tb, vb, ctx, cfg, RandomStream(8, "train"))
    assert st_.epoch - st_.best_epoch <= 5
    val = float(np.mean((net.predict(vb.nir, vb.pmf) - vb.y) ** 2))
    assert val == pytest.approx(st_.best_val, rel=1e-12)
    assert min(h[3] for h in st_.history) == st_.best_val


def test_non_finite_loss_raises(setup):
    spec, tb, vb, ctx = _train_batches(setup, "sdnn")
    bad = dataclasses.replace(tb, y=np.full_like(tb.y, np.nan))
    with pytest.raises(TrainingError) as e:
        train(spec, bad, vb, ctx, NeuralConfig(max_epochs=5), RandomStream(0, "t"))
    assert e.value.epoch == 1


def test_save_load_round_trip(tmp_path, setup):
    d, tr, scaler, _ = setup
    for arch in ("optimized_pinn", "sdnn"):
        net = Network.init(make_spec(arch), RandomStream(9, "init"))
        net.y_offset, net.y_scale = 111.0, 22.0
        save_network(net, tmp_path / f"{arch}.json", scaler)
        back, sc, doc = load_network(tmp_path / f"{arch}.json")
        assert back.spec == net.spec and doc["model"] == arch
        assert np.array_equal(back.flat(), net.flat())
        b = make_batch(d, tr[:5], sc)
        assert np.array_equal(back.predict(b.nir, b.pmf), net.predict(b.nir, b.pmf))
        assert math.isfinite(back.y_scale)
