import numpy as np
import pytest

from delconf import birnn
from delconf.birnn import (BiRnnConfig, TrainConfig, batch_loss,
                           finite_difference_gradients, forward, gradients,
                           init_model, load_model, max_relative_grad_error,
                           model_from_json, model_to_json, predict, save_model,
                           train)
from delconf.corpus import Targets

IN_DIM = 6


def make_batch(rng, n_utts=3, input_dim=IN_DIM, min_len=1, max_len=5):
    batch = []
    for _ in range(n_utts):
        T = int(rng.integers(min_len, max_len + 1))
        xs = rng.normal(size=(T, input_dim))
        tg = Targets(c_star=list(rng.integers(0, 2, T)),
                     d_star=list(rng.integers(0, 2, T)),
                     s_star=int(rng.integers(0, 2)))
        batch.append((xs, tg))
    return batch


@pytest.mark.parametrize("cell", ["lstm", "vanilla"])
@pytest.mark.parametrize("predict_deletions", [True, False])
def test_gradients_match_finite_differences(cell, predict_deletions):
    rng = np.random.default_rng(0)
    model = init_model(IN_DIM, hidden_dim=4, predict_deletions=predict_deletions,
                       seed=1, cell=cell)
    batch = make_batch(rng)
    analytic = gradients(model, batch, l2=1e-3)
    numeric = finite_difference_gradients(model, batch, l2=1e-3, step=1e-5)
    assert max_relative_grad_error(analytic, numeric) < 1e-4


def test_gradcheck_after_a_few_updates():
    # check away from the init point too, where activations are less symmetric
    rng = np.random.default_rng(4)
    model = init_model(IN_DIM, hidden_dim=4, seed=2)
    batch = make_batch(rng)
    train(model, batch, TrainConfig(learning_rate=0.1, epochs=3, seed=0))
    analytic = gradients(model, batch, l2=0.0)
    numeric = finite_difference_gradients(model, batch, l2=0.0)
    assert max_relative_grad_error(analytic, numeric) < 1e-4


def test_zero_weights_give_half():
    model = init_model(IN_DIM, hidden_dim=4, seed=0)
    for k in model.params:
        model.params[k] = np.zeros_like(model.params[k])
    pred = predict(model, np.ones((3, IN_DIM)))
    assert pred.c == [0.5, 0.5, 0.5]
    assert pred.d == [0.5, 0.5, 0.5]
    assert pred.s == 0.5


def test_single_timestep():
    model = init_model(IN_DIM, hidden_dim=4, seed=0)
    pred = predict(model, np.ones((1, IN_DIM)))
    assert len(pred.c) == len(pred.d) == 1
    assert 0.0 < pred.c[0] < 1.0 and 0.0 < pred.s < 1.0


def test_reversal_symmetry():
    # swapping the two directions' parameters and reversing the input reverses
    # the per-word confidences (heads symmetrized so the readout matches)
    model = init_model(IN_DIM, hidden_dim=4, seed=3, predict_deletions=False)
    h = model.config.hidden_dim
    w = model.params["head_c.w"]
    model.params["head_c.w"] = np.concatenate([w[:h], w[:h]])
    swapped = init_model(IN_DIM, hidden_dim=4, seed=3, predict_deletions=False)
    swapped.params["fwd.W"] = model.params["bwd.W"].copy()
    swapped.params["fwd.b"] = model.params["bwd.b"].copy()
    swapped.params["bwd.W"] = model.params["fwd.W"].copy()
    swapped.params["bwd.b"] = model.params["fwd.b"].copy()
    swapped.params["head_c.w"] = model.params["head_c.w"].copy()
    swapped.params["head_c.b"] = model.params["head_c.b"].copy()
    xs = np.random.default_rng(9).normal(size=(5, IN_DIM))
    a = predict(model, xs).c
    b = predict(swapped, xs[::-1]).c
    assert a == pytest.approx(b[::-1], abs=1e-12)


def test_past_future_factorization():
    # with the backward direction zeroed and its head weights cut, c_t depends
    # only on x_1..x_t
    model = init_model(IN_DIM, hidden_dim=4, seed=5, predict_deletions=False)
    h = model.config.hidden_dim
    model.params["bwd.W"] = np.zeros_like(model.params["bwd.W"])
    model.params["bwd.b"] = np.zeros_like(model.params["bwd.b"])
    model.params["head_c.w"][h:] = 0.0
    rng = np.random.default_rng(6)
    xs = rng.normal(size=(5, IN_DIM))
    base = predict(model, xs).c
    perturbed = xs.copy()
    perturbed[4] += 10.0  # future-only change
    assert predict(model, perturbed).c[:4] == pytest.approx(base[:4], abs=1e-12)
    assert predict(model, perturbed).c[4] != pytest.approx(base[4], abs=1e-6)


def test_loss_matches_direct_bce():
    rng = np.random.default_rng(7)
    model = init_model(IN_DIM, hidden_dim=4, seed=0)
    xs, tg = make_batch(rng, n_utts=1, min_len=4, max_len=4)[0]
    pred = predict(model, xs)
    l2 = 1e-3
    expected = 0.0
    for p, y in zip(pred.c, tg.c_star):
        expected += -(y * np.log(p) + (1 - y) * np.log(1 - p))
    for p, y in zip(pred.d, tg.d_star):
        expected += -(y * np.log(p) + (1 - y) * np.log(1 - p))
    expected += -(tg.s_star * np.log(pred.s) + (1 - tg.s_star) * np.log(1 - pred.s))
    expected += l2 * sum(float(np.sum(v * v)) for v in model.params.values())
    assert batch_loss(model, [(xs, tg)], l2) == pytest.approx(expected, rel=1e-12)


def test_training_reduces_loss_and_is_deterministic():
    rng = np.random.default_rng(8)
    batch = make_batch(rng, n_utts=20, min_len=2, max_len=6)
    runs = []
    for _ in range(2):
        model = init_model(IN_DIM, hidden_dim=8, seed=1)
        model, hist = train(model, batch,
                            TrainConfig(learning_rate=0.05, epochs=8, seed=3))
        runs.append((model, hist))
    m1, h1 = runs[0]
    m2, h2 = runs[1]
    assert h1 == h2
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])
    assert h1[-1] < h1[0]


def test_zero_learning_rate_is_noop():
    rng = np.random.default_rng(10)
    batch = make_batch(rng)
    model = init_model(IN_DIM, hidden_dim=4, seed=2)
    before = {k: v.copy() for k, v in model.params.items()}
    train(model, batch, TrainConfig(learning_rate=0.0, epochs=2, seed=0))
    for k in before:
        assert np.array_equal(model.params[k], before[k])


def test_init_determinism_and_forget_bias():
    m1 = init_model(IN_DIM, hidden_dim=4, seed=11)
    m2 = init_model(IN_DIM, hidden_dim=4, seed=11)
    for k in m1.params:
        assert np.array_equal(m1.params[k], m2.params[k])
    h = 4
    assert np.all(m1.params["fwd.b"][h:2 * h] == 1.0)
    assert np.all(m1.params["fwd.b"][:h] == 0.0)
    m3 = init_model(IN_DIM, hidden_dim=4, seed=12)
    assert not np.array_equal(m1.params["fwd.W"], m3.params["fwd.W"])


def test_confidence_only_model_has_no_deletion_heads():
    model = init_model(IN_DIM, hidden_dim=4, predict_deletions=False, seed=0)
    assert "head_d.w" not in model.params and "head_s.w" not in model.params
    pred = predict(model, np.ones((2, IN_DIM)))
    assert pred.d == [0.0, 0.0] and pred.s == 0.0


def test_bad_configs_rejected():
    with pytest.raises(ValueError):
        BiRnnConfig(input_dim=0, hidden_dim=4)
    with pytest.raises(ValueError):
        BiRnnConfig(input_dim=4, hidden_dim=4, cell="gru")
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        train(init_model(IN_DIM), [], TrainConfig())


def test_forward_input_validation():
    model = init_model(IN_DIM, hidden_dim=4, seed=0)
    with pytest.raises(ValueError):
        forward(model, np.ones((2, IN_DIM + 1)))
    with pytest.raises(ValueError):
        forward(model, np.zeros((0, IN_DIM)))


def test_checkpoint_roundtrip(tmp_path):
    rng = np.random.default_rng(13)
    model = init_model(IN_DIM, hidden_dim=5, seed=4, cell="vanilla")
    model.set_feature_stats(rng.normal(size=IN_DIM), rng.uniform(0.5, 2, IN_DIM))
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    xs = rng.normal(size=(4, IN_DIM))
    p1, p2 = predict(model, xs), predict(back, xs)
    assert p1.c == p2.c and p1.d == p2.d and p1.s == p2.s
    back2 = model_from_json(model_to_json(model))
    assert predict(back2, xs).c == p1.c


def test_standardization_applied_in_forward():
    model = init_model(IN_DIM, hidden_dim=4, seed=0)
    xs = np.random.default_rng(14).normal(size=(3, IN_DIM))
    raw = predict(model, xs).c
    model.set_feature_stats(np.full(IN_DIM, 2.0), np.full(IN_DIM, 3.0))
    shifted = predict(model, xs * 3.0 + 2.0).c
    assert shifted == pytest.approx(raw, abs=1e-12)
