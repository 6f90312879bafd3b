"""Bidirectional recurrent network predicting word confidence, next-gap deletion
and start deletion, trained from scratch with backpropagation through time.

Cells: LSTM (default, gates stacked [i; f; o; g] in one matrix) or the plain
sigmoid recurrence, kept for the gradient-check suite. Heads read the
concatenated forward/backward hidden state.
"""

import json
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from delconf.corpus import Predictions

EPS = 1e-12


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@dataclass
class BiRnnConfig:
    input_dim: int
    hidden_dim: int = 64
    predict_deletions: bool = True
    cell: str = "lstm"  # or "vanilla"

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("dims must be positive")
        if self.cell not in ("lstm", "vanilla"):
            raise ValueError(f"unknown cell type {self.cell}")


@dataclass
class TrainConfig:
    learning_rate: float = 0.02
    l2: float = 1e-3
    epochs: int = 10
    seed: int = 0
    gradient_clip: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0 or self.l2 < 0 or self.epochs < 0 \
                or self.gradient_clip <= 0:
            raise ValueError("bad training configuration")


@dataclass
class BiRnnModel:
    config: BiRnnConfig
    params: dict  # name -> ndarray
    feat_mean: np.ndarray = None
    feat_std: np.ndarray = None

    def param_names(self):
        return sorted(self.params)

    def set_feature_stats(self, mean, std):
        self.feat_mean = np.asarray(mean, float)
        self.feat_std = np.asarray(std, float)

    def _standardize(self, xs):
        xs = np.asarray(xs, float)
        if self.feat_mean is None:
            return xs
        return (xs - self.feat_mean) / self.feat_std


def init_model(input_dim, hidden_dim=64, predict_deletions=True, seed=0,
               cell="lstm") -> BiRnnModel:
    """Seeded uniform(-r, r) weights with r = 1/sqrt(input_dim + hidden_dim);
    zero biases except the forget gate at 1."""
    cfg = BiRnnConfig(input_dim=input_dim, hidden_dim=hidden_dim,
                      predict_deletions=predict_deletions, cell=cell)
    rng = np.random.default_rng(seed)
    r = 1.0 / math.sqrt(input_dim + hidden_dim)
    h, d = hidden_dim, input_dim
    params = {}
    gate_rows = 4 * h if cell == "lstm" else h
    for direction in ("fwd", "bwd"):
        params[f"{direction}.W"] = rng.uniform(-r, r, (gate_rows, d + h))
        b = np.zeros(gate_rows)
        if cell == "lstm":
            b[h:2 * h] = 1.0  # forget gate
        params[f"{direction}.b"] = b
    heads = ["c", "d", "s"] if predict_deletions else ["c"]
    for name in heads:
        params[f"head_{name}.w"] = rng.uniform(-r, r, 2 * h)
        params[f"head_{name}.b"] = np.zeros(())
    return BiRnnModel(config=cfg, params=params)


def _run_cell(cfg, W, b, xs, reverse):
    """Run one direction over the sequence; returns hidden states aligned to
    the input order plus the cache needed for BPTT."""
    T = xs.shape[0]
    h = cfg.hidden_dim
    order = range(T - 1, -1, -1) if reverse else range(T)
    hs = np.zeros((T, h))
    cache = {"z": np.zeros((T, W.shape[1])), "order": list(order)}
    if cfg.cell == "lstm":
        for k in ("i", "f", "o", "g", "cst", "tanh_c"):
            cache[k] = np.zeros((T, h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    for t in cache["order"]:
        z = np.concatenate([xs[t], h_prev])
        a = W @ z + b
        if cfg.cell == "lstm":
            i = _sigmoid(a[:h])
            f = _sigmoid(a[h:2 * h])
            o = _sigmoid(a[2 * h:3 * h])
            g = np.tanh(a[3 * h:])
            cst = f * c_prev + i * g
            tc = np.tanh(cst)
            ht = o * tc
            cache["i"][t], cache["f"][t], cache["o"][t] = i, f, o
            cache["g"][t], cache["cst"][t], cache["tanh_c"][t] = g, cst, tc
            c_prev = cst
        else:
            ht = _sigmoid(a)
        cache["z"][t] = z
        hs[t] = ht
        h_prev = ht
    return hs, cache


def _backward_cell(cfg, W, cache, dhs):
    """BPTT through one direction; dhs holds per-timestep head gradients."""
    h = cfg.hidden_dim
    d = W.shape[1] - h
    dW = np.zeros_like(W)
    db = np.zeros(W.shape[0])
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    order = cache["order"]
    for idx in range(len(order) - 1, -1, -1):
        t = order[idx]
        dh = dhs[t] + dh_next
        z = cache["z"][t]
        if cfg.cell == "lstm":
            i, f, o = cache["i"][t], cache["f"][t], cache["o"][t]
            g, tc = cache["g"][t], cache["tanh_c"][t]
            c_prev = cache["cst"][order[idx - 1]] if idx > 0 else np.zeros(h)
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            da = np.concatenate([di * i * (1 - i),
                                 df * f * (1 - f),
                                 do * o * (1 - o),
                                 dg * (1 - g * g)])
        else:
            hcur = cache["h"][t]
            da = dh * hcur * (1 - hcur)
        dW += np.outer(da, z)
        db += da
        dh_next = (W.T @ da)[d:]
    return dW, db


def forward(model: BiRnnModel, xs, with_cache=False):
    """Predictions for one utterance; optionally the activations for training."""
    cfg = model.config
    xs = model._standardize(xs)
    if xs.ndim != 2 or xs.shape[1] != cfg.input_dim:
        raise ValueError(f"expected features of width {cfg.input_dim}")
    if xs.shape[0] == 0:
        raise ValueError("empty input sequence")
    hf, cache_f = _run_cell(cfg, model.params["fwd.W"], model.params["fwd.b"],
                            xs, reverse=False)
    hb, cache_b = _run_cell(cfg, model.params["bwd.W"], model.params["bwd.b"],
                            xs, reverse=True)
    if cfg.cell == "vanilla":
        cache_f["h"], cache_b["h"] = hf, hb
    h2 = np.concatenate([hf, hb], axis=1)
    c = _sigmoid(h2 @ model.params["head_c.w"] + model.params["head_c.b"])
    if cfg.predict_deletions:
        dd = _sigmoid(h2 @ model.params["head_d.w"] + model.params["head_d.b"])
        s = float(_sigmoid(h2[0] @ model.params["head_s.w"]
                           + model.params["head_s.b"]))
    else:
        dd = np.zeros(len(c))
        s = 0.0
    pred = Predictions(c=list(c), d=list(dd), s=s)
    if not with_cache:
        return pred
    cache = {"xs": xs, "h2": h2, "f": cache_f, "b": cache_b,
             "c": c, "d": dd, "s": s}
    return pred, cache


def predict(model: BiRnnModel, xs) -> Predictions:
    return forward(model, xs, with_cache=False)


def _bce(p, y):
    p = np.clip(p, EPS, 1.0 - EPS)
    y = np.asarray(y, float)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def l2_penalty(model: BiRnnModel) -> float:
    return sum(float(np.sum(np.square(v))) for v in model.params.values())


def loss(pred: Predictions, targets, model: BiRnnModel, l2: float) -> float:
    """Full binary cross-entropy over all enabled heads plus l2 * ||theta||^2."""
    if len(pred.c) != len(targets.c_star):
        raise ValueError("prediction/target length mismatch")
    total = _bce(np.asarray(pred.c), targets.c_star)
    if model.config.predict_deletions:
        total += _bce(np.asarray(pred.d), targets.d_star)
        total += _bce(np.array([pred.s]), [targets.s_star])
    return total + l2 * l2_penalty(model)


def batch_ce(model: BiRnnModel, batch) -> float:
    """Summed cross-entropy over (features, targets) pairs, no l2 term."""
    total = 0.0
    for xs, tg in batch:
        pred = forward(model, xs)
        total += _bce(np.asarray(pred.c), tg.c_star)
        if model.config.predict_deletions:
            total += _bce(np.asarray(pred.d), tg.d_star)
            total += _bce(np.array([pred.s]), [tg.s_star])
    return total


def batch_loss(model: BiRnnModel, batch, l2: float) -> float:
    return batch_ce(model, batch) + l2 * l2_penalty(model)


def gradients(model: BiRnnModel, batch, l2: float = 0.0) -> dict:
    """Exact analytic gradients of batch_loss via BPTT."""
    cfg = model.config
    h = cfg.hidden_dim
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    for xs, tg in batch:
        _, cache = forward(model, xs, with_cache=True)
        h2 = cache["h2"]
        T = h2.shape[0]
        dh2 = np.zeros_like(h2)
        da_c = cache["c"] - np.asarray(tg.c_star, float)
        grads["head_c.w"] += h2.T @ da_c
        grads["head_c.b"] += da_c.sum()
        dh2 += np.outer(da_c, model.params["head_c.w"])
        if cfg.predict_deletions:
            da_d = cache["d"] - np.asarray(tg.d_star, float)
            grads["head_d.w"] += h2.T @ da_d
            grads["head_d.b"] += da_d.sum()
            dh2 += np.outer(da_d, model.params["head_d.w"])
            da_s = cache["s"] - float(tg.s_star)
            grads["head_s.w"] += da_s * h2[0]
            grads["head_s.b"] += da_s
            dh2[0] += da_s * model.params["head_s.w"]
        dW, db = _backward_cell(cfg, model.params["fwd.W"], cache["f"], dh2[:, :h])
        grads["fwd.W"] += dW
        grads["fwd.b"] += db
        dW, db = _backward_cell(cfg, model.params["bwd.W"], cache["b"], dh2[:, h:])
        grads["bwd.W"] += dW
        grads["bwd.b"] += db
    if l2 > 0.0:
        for k in grads:
            grads[k] = grads[k] + 2.0 * l2 * model.params[k]
    return grads


def finite_difference_gradients(model: BiRnnModel, batch, l2=0.0, step=1e-5):
    """Central-difference gradients of batch_loss, for checking BPTT."""
    grads = {}
    for name, arr in model.params.items():
        g = np.zeros_like(arr, dtype=float)
        flat = arr.reshape(-1) if arr.ndim else arr.reshape(1)
        gflat = g.reshape(-1) if g.ndim else g.reshape(1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            lp = batch_loss(model, batch, l2)
            flat[i] = orig - step
            lm = batch_loss(model, batch, l2)
            flat[i] = orig
            gflat[i] = (lp - lm) / (2 * step)
        grads[name] = g
    return grads


def max_relative_grad_error(analytic, numeric) -> float:
    # denominator floor 1e-5: central differences of a loss of magnitude ~10
    # with step 1e-5 carry ~1e-10 absolute rounding noise, which would dominate
    # the ratio on near-zero entries
    worst = 0.0
    for name in analytic:
        ga = np.asarray(analytic[name], float).ravel()
        gn = np.asarray(numeric[name], float).ravel()
        denom = np.maximum(1e-5, np.abs(ga) + np.abs(gn))
        worst = max(worst, float(np.max(np.abs(ga - gn) / denom)))
    return worst


def _grad_norm(grads):
    return math.sqrt(sum(float(np.sum(np.square(g))) for g in grads.values()))


def train(model: BiRnnModel, data, cfg: TrainConfig):
    """Plain per-utterance gradient descent with gradient-norm clipping.

    data: list of (feature rows, Targets). Deterministic given the seed; returns
    (model, per-epoch mean loss history).
    """
    if not data:
        raise ValueError("empty training data")
    rng = np.random.default_rng(cfg.seed)
    history = []
    for _ in range(cfg.epochs):
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        for idx in order:
            xs, tg = data[idx]
            epoch_loss += batch_loss(model, [(xs, tg)], cfg.l2)
            if cfg.learning_rate == 0.0:
                continue
            grads = gradients(model, [(xs, tg)], cfg.l2)
            norm = _grad_norm(grads)
            scale = cfg.learning_rate
            if norm > cfg.gradient_clip:
                scale *= cfg.gradient_clip / norm
            for k, g in grads.items():
                model.params[k] -= scale * g
        history.append(epoch_loss / len(data))
    return model, history


def model_to_json(model: BiRnnModel) -> dict:
    obj = {
        "version": 1,
        "config": {
            "input_dim": model.config.input_dim,
            "hidden_dim": model.config.hidden_dim,
            "predict_deletions": model.config.predict_deletions,
            "cell": model.config.cell,
        },
        "feat_mean": None if model.feat_mean is None else list(model.feat_mean),
        "feat_std": None if model.feat_std is None else list(model.feat_std),
        "params": {},
    }
    for name in model.param_names():
        arr = model.params[name]
        obj["params"][name] = {"shape": list(arr.shape),
                               "data": [float(v) for v in arr.reshape(-1)]}
    return obj


def model_from_json(obj) -> BiRnnModel:
    if obj.get("version") != 1:
        raise ValueError("unsupported checkpoint version")
    c = obj["config"]
    cfg = BiRnnConfig(input_dim=c["input_dim"], hidden_dim=c["hidden_dim"],
                      predict_deletions=c["predict_deletions"], cell=c["cell"])
    params = {}
    for name, p in obj["params"].items():
        params[name] = np.array(p["data"], float).reshape(p["shape"])
    model = BiRnnModel(config=cfg, params=params)
    if obj.get("feat_mean") is not None:
        model.set_feature_stats(obj["feat_mean"], obj["feat_std"])
    return model


def save_model(model: BiRnnModel, path):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(model_to_json(model), f, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> BiRnnModel:
    with open(path) as f:
        return model_from_json(json.load(f))
