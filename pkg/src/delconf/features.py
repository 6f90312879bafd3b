"""Per-word input features: embeddings, n-gram LM statistics, durations, gaps.

Feature layout per word (length dim + 7):
  [frames, confidence, embedding(dim), lm_order, lm_logp, char_len,
   gap_before, gap_after]
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

UNK = "<unk>"


def scalar_feature_indices(dim: int):
    """Columns that get z-standardized (embedding and confidence pass through)."""
    return [0, dim + 2, dim + 3, dim + 4, dim + 5, dim + 6]


@dataclass
class EmbeddingTable:
    """Deterministic per-token vectors; same (token, seed) always maps the same."""
    dim: int
    seed: int
    vocab: frozenset
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("embedding dim must be >= 1")
        self.vocab = frozenset(self.vocab) | {UNK}

    def vector(self, token: str) -> np.ndarray:
        if token not in self.vocab:
            token = UNK
        v = self._cache.get(token)
        if v is None:
            h = hashlib.blake2b(f"{self.seed}:{token}".encode("utf-8"),
                                digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(h, "big"))
            v = rng.uniform(-1.0, 1.0, self.dim)
            self._cache[token] = v
        return v


def build_embeddings(vocab, dim: int = 50, seed: int = 0) -> EmbeddingTable:
    return EmbeddingTable(dim=dim, seed=seed, vocab=frozenset(vocab))


class NgramLm:
    """Backoff n-gram LM with absolute discounting.

    probs[k] maps k-gram tuples to probabilities (interpolated form); bows[k]
    maps k-gram contexts to their backoff mass. Probabilities over the full
    vocabulary (including the unknown token) sum to one for every context.
    """

    def __init__(self, order, probs, bows, vocab):
        self.order = order
        self.probs = probs  # {k: {ngram tuple: prob}}
        self.bows = bows    # {k: {context tuple: weight}}
        self.vocab = set(vocab)

    def _map(self, tok):
        return tok if tok in self.vocab else UNK

    def prob(self, word, history=()):
        w = self._map(word)
        h = tuple(self._map(t) for t in history)[-(self.order - 1):] if self.order > 1 else ()
        bow = 1.0
        while True:
            p = self.probs[len(h) + 1].get(h + (w,))
            if p is not None:
                return bow * p
            bow *= self.bows[len(h)].get(h, 1.0) if h else 1.0
            h = h[1:]

    def score(self, word, history=()):
        """(natural logp, highest explicit n-gram order; 0 for OOV words)."""
        logp = math.log(self.prob(word, history))
        if word not in self.vocab:
            return logp, 0
        w = word
        h = tuple(self._map(t) for t in history)[-(self.order - 1):] if self.order > 1 else ()
        order_used = 0
        for j in range(len(h) + 1):
            if h[len(h) - j:] + (w,) in self.probs[j + 1]:
                order_used = j + 1
        return logp, order_used


def train_ngram_lm(sequences, order: int = 3, discount: float = 0.5) -> NgramLm:
    """Absolute-discounting backoff LM from token sequences."""
    if not 0.0 < discount < 1.0:
        raise ValueError("discount must be in (0,1)")
    if order < 1:
        raise ValueError("order must be >= 1")
    counts = {k: {} for k in range(1, order + 1)}
    total = 0
    for seq in sequences:
        toks = tuple(seq)
        total += len(toks)
        for i, _ in enumerate(toks):
            for k in range(1, order + 1):
                if i + k <= len(toks):
                    g = toks[i:i + k]
                    counts[k][g] = counts[k].get(g, 0) + 1
    if total == 0:
        raise ValueError("empty training text")
    vocab = sorted({g[0] for g in counts[1]})
    v_full = len(vocab) + 1  # + unknown token

    probs = {k: {} for k in range(1, order + 1)}
    bows = {k: {} for k in range(0, order)}

    # unigrams: discounted counts, leftover mass spread uniformly over vocab+unk
    gamma1 = discount * len(counts[1]) / total
    for (w,), c in counts[1].items():
        probs[1][(w,)] = (c - discount) / total + gamma1 / v_full
    probs[1][(UNK,)] = gamma1 / v_full
    bows[0][()] = 1.0

    for k in range(2, order + 1):
        ctx_total = {}
        ctx_types = {}
        for g, c in counts[k].items():
            ctx = g[:-1]
            ctx_total[ctx] = ctx_total.get(ctx, 0) + c
            ctx_types[ctx] = ctx_types.get(ctx, 0) + 1
        for ctx, tot in ctx_total.items():
            bows[k - 1][ctx] = discount * ctx_types[ctx] / tot
        for g, c in counts[k].items():
            ctx = g[:-1]
            lower = probs[k - 1].get(g[1:])
            probs[k][g] = (c - discount) / ctx_total[ctx] + bows[k - 1][ctx] * lower
    return NgramLm(order=order, probs=probs, bows=bows, vocab=vocab)


def write_arpa(lm: NgramLm) -> str:
    """ARPA text form: log10 probabilities, backoff weight on context lines."""
    lines = ["\\data\\"]
    for k in range(1, lm.order + 1):
        lines.append(f"ngram {k}={len(lm.probs[k])}")
    for k in range(1, lm.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        for g in sorted(lm.probs[k]):
            lp = math.log10(lm.probs[k][g])
            row = f"{lp:.7f}\t{' '.join(g)}"
            if k < lm.order and g in lm.bows.get(k, {}):
                row += f"\t{math.log10(lm.bows[k][g]):.7f}"
            lines.append(row)
    lines.append("")
    lines.append("\\end\\")
    return "\n".join(lines) + "\n"


def read_arpa(text: str) -> NgramLm:
    lines = [ln.rstrip("\n") for ln in text.splitlines()]
    order = 0
    i = lines.index("\\data\\") + 1
    while i < len(lines) and lines[i].startswith("ngram "):
        order = int(lines[i].split()[1].split("=")[0])
        i += 1
    probs = {k: {} for k in range(1, order + 1)}
    bows = {k: {} for k in range(0, order)}
    bows[0][()] = 1.0
    k = 0
    for ln in lines[i:]:
        ln = ln.strip()
        if not ln or ln == "\\end\\":
            continue
        if ln.endswith("-grams:"):
            k = int(ln[1:].split("-")[0])
            continue
        parts = ln.split("\t") if "\t" in ln else ln.split()
        lp = float(parts[0])
        if len(parts) == 2:
            toks = tuple(parts[1].split())
            bow = None
        else:
            toks = tuple(parts[1].split())
            bow = float(parts[2])
        probs[k][toks] = 10.0 ** lp
        if bow is not None:
            bows[k][toks] = 10.0 ** bow
    vocab = sorted(g[0] for g in probs[1] if g[0] != UNK)
    return NgramLm(order=order, probs=probs, bows=bows, vocab=vocab)


def featurize(utt, baseline_conf, lm: NgramLm, emb: EmbeddingTable) -> np.ndarray:
    """One raw feature row per word, in word order. Standardization is applied
    later with statistics stored on the model."""
    words = utt.words
    if len(baseline_conf) != len(words):
        raise ValueError("baseline confidence length mismatch")
    rows = np.empty((len(words), emb.dim + 7))
    texts = [w.text for w in words]
    for t, w in enumerate(words):
        logp, order_used = lm.score(w.text, texts[:t])
        gap_before = max(0.0, w.start - words[t - 1].end) if t > 0 else 0.0
        gap_after = max(0.0, words[t + 1].start - w.end) if t + 1 < len(words) else 0.0
        rows[t, 0] = w.frames
        rows[t, 1] = baseline_conf[t]
        rows[t, 2:2 + emb.dim] = emb.vector(w.text)
        rows[t, 2 + emb.dim] = order_used
        rows[t, 3 + emb.dim] = logp
        rows[t, 4 + emb.dim] = len(w.text)
        rows[t, 5 + emb.dim] = gap_before
        rows[t, 6 + emb.dim] = gap_after
    return rows


def fit_standardizer(feature_rows, dim: int):
    """Mean/std over the scalar columns of stacked training features.

    Returns full-length (mean, std) vectors that are identity on pass-through
    columns.
    """
    stacked = np.concatenate(feature_rows, axis=0)
    mean = np.zeros(stacked.shape[1])
    std = np.ones(stacked.shape[1])
    idx = scalar_feature_indices(dim)
    mean[idx] = stacked[:, idx].mean(axis=0)
    s = stacked[:, idx].std(axis=0)
    std[idx] = np.where(s < 1e-12, 1.0, s)
    return mean, std


def standardize(rows: np.ndarray, mean, std) -> np.ndarray:
    return (rows - mean) / std
