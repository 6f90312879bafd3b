"""Glue between corpus records and the model-level modules: target derivation,
feature extraction, model bundles (network + LM + embeddings + calibration),
corpus-level prediction and evaluation."""

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from delconf import align, birnn, calibrate, features, metrics
from delconf.corpus import Predictions
from delconf.select import SelectionItem


def align_corpus(utts, weights=align.DEFAULT_WEIGHTS):
    """Fill targets in place; returns per-utterance ErrorCounts in order."""
    counts = []
    for lu in utts:
        ali = align.levenshtein_align([w.text for w in lu.utterance.words],
                                      lu.reference, weights)
        lu.targets = align.derive_targets(ali, len(lu.utterance))
        counts.append(align.error_counts(ali))
    return counts


@dataclass
class Bundle:
    """Everything needed to predict on a fresh corpus."""
    model: birnn.BiRnnModel
    lm: features.NgramLm
    embeddings: features.EmbeddingTable
    calibration: calibrate.PiecewiseMap = None  # None: raw posteriors as input


def baseline_confidence(lu, calibration):
    raw = [w.raw_posterior for w in lu.utterance.words]
    if calibration is None:
        return raw
    return [calibrate.apply_map(calibration, p) for p in raw]


def featurize_corpus(utts, bundle: Bundle):
    return [features.featurize(lu.utterance,
                               baseline_confidence(lu, bundle.calibration),
                               bundle.lm, bundle.embeddings)
            for lu in utts]


def fit_calibration(utts, n_bins=50) -> calibrate.PiecewiseMap:
    """Monotone map from raw posteriors to correctness fractions (needs targets)."""
    scores, labels = [], []
    for lu in utts:
        scores.extend(w.raw_posterior for w in lu.utterance.words)
        labels.extend(lu.targets.c_star)
    return calibrate.fit_monotone_map(
        metrics.ScoredSet(scores=np.array(scores), labels=np.array(labels)),
        n_bins=n_bins)


def train_bundle(utts, hidden_dim=64, predict_deletions=True, epochs=10,
                 learning_rate=0.02, l2=1e-3, seed=0, gradient_clip=1.0,
                 lm_order=3, lm_discount=0.5, emb_dim=50, emb_seed=0,
                 calibration=None, cell="lstm"):
    """Train LM, embeddings, standardizer and network on an aligned corpus.

    Returns (Bundle, per-epoch loss history).
    """
    hyp_texts = [[w.text for w in lu.utterance.words] for lu in utts]
    lm = features.train_ngram_lm(hyp_texts, order=lm_order, discount=lm_discount)
    emb = features.build_embeddings(lm.vocab, dim=emb_dim, seed=emb_seed)
    bundle = Bundle(model=None, lm=lm, embeddings=emb, calibration=calibration)
    rows = featurize_corpus(utts, bundle)
    mean, std = features.fit_standardizer(rows, emb_dim)
    model = birnn.init_model(input_dim=emb_dim + 7, hidden_dim=hidden_dim,
                             predict_deletions=predict_deletions, seed=seed,
                             cell=cell)
    model.set_feature_stats(mean, std)
    data = [(xs, lu.targets) for xs, lu in zip(rows, utts)]
    cfg = birnn.TrainConfig(learning_rate=learning_rate, l2=l2, epochs=epochs,
                            seed=seed, gradient_clip=gradient_clip)
    model, history = birnn.train(model, data, cfg)
    bundle.model = model
    return bundle, history


def predict_corpus(utts, bundle: Bundle):
    """Fill predictions in place using the bundled network."""
    for lu in utts:
        xs = features.featurize(lu.utterance,
                                baseline_confidence(lu, bundle.calibration),
                                bundle.lm, bundle.embeddings)
        lu.predictions = birnn.predict(bundle.model, xs)


def predict_baseline(utts, calibration=None):
    """Raw or calibrated posteriors as confidence; no deletion estimates."""
    for lu in utts:
        c = baseline_confidence(lu, calibration)
        lu.predictions = Predictions(c=c, d=[0.0] * len(c), s=0.0)


def pooled_sets(utts):
    """Pool (prediction, target) pairs corpus-wide for the three heads."""
    c_s, c_y, d_s, d_y, s_s, s_y = [], [], [], [], [], []
    for lu in utts:
        c_s.extend(lu.predictions.c)
        c_y.extend(lu.targets.c_star)
        d_s.extend(lu.predictions.d)
        d_y.extend(lu.targets.d_star)
        s_s.append(lu.predictions.s)
        s_y.append(lu.targets.s_star)
    mk = lambda s, y: metrics.ScoredSet(scores=np.array(s), labels=np.array(y))
    return mk(c_s, c_y), mk(d_s, d_y), mk(s_s, s_y)


def evaluate_report(utts) -> dict:
    """NCE and ROC AUC for the confidence head, ROC AUC for the deletion heads."""
    c_set, d_set, s_set = pooled_sets(utts)

    def safe(fn, s):
        try:
            return fn(s)
        except metrics.DegenerateLabelsError:
            return None

    return {
        "n_utterances": len(utts),
        "n_words": len(c_set.scores),
        "confidence": {"nce": safe(metrics.nce, c_set),
                       "roc_auc": safe(metrics.roc_auc, c_set)},
        "next_deletion": {"roc_auc": safe(metrics.roc_auc, d_set)},
        "start_deletion": {"roc_auc": safe(metrics.roc_auc, s_set)},
    }


def selection_items(utts, counts=None):
    """SelectionItem list; counts (per-utterance ErrorCounts) optional."""
    items = []
    for i, lu in enumerate(utts):
        if lu.predictions is None:
            raise ValueError(f"utterance {lu.utterance.id} has no predictions")
        items.append(SelectionItem(
            id=lu.utterance.id,
            duration=lu.utterance.duration,
            frames=[w.frames for w in lu.utterance.words],
            predictions=lu.predictions,
            true_counts=None if counts is None else counts[i]))
    return items


def bundle_to_json(bundle: Bundle) -> dict:
    return {
        "kind": "delconf-bundle",
        "model": birnn.model_to_json(bundle.model),
        "lm_arpa": features.write_arpa(bundle.lm),
        "embeddings": {"dim": bundle.embeddings.dim,
                       "seed": bundle.embeddings.seed,
                       "vocab": sorted(bundle.embeddings.vocab)},
        "calibration": (None if bundle.calibration is None
                        else calibrate.map_to_json(bundle.calibration)),
    }


def bundle_from_json(obj) -> Bundle:
    if obj.get("kind") != "delconf-bundle":
        raise ValueError("not a delconf model bundle")
    emb = obj["embeddings"]
    return Bundle(
        model=birnn.model_from_json(obj["model"]),
        lm=features.read_arpa(obj["lm_arpa"]),
        embeddings=features.EmbeddingTable(dim=emb["dim"], seed=emb["seed"],
                                           vocab=frozenset(emb["vocab"])),
        calibration=(None if obj["calibration"] is None
                     else calibrate.map_from_json(obj["calibration"])),
    )


def save_bundle(bundle: Bundle, path):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            json.dump(bundle_to_json(bundle), f, sort_keys=True)
            f.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_bundle(path) -> Bundle:
    with open(path) as f:
        return bundle_from_json(json.load(f))
