"""Seeded synthetic recogniser simulator.

Word-level noisy channel over a Zipf-ish vocabulary: per reference word delete,
substitute or copy; independent insertions; class-conditional Beta posteriors
with an over-confidence shift toward 1. Deleted reference words leave their
duration behind as an enlarged inter-word gap, so deletions are (noisily)
visible in the timing features.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from delconf.corpus import FRAME_SEC, HypWord, LabeledUtterance, Utterance


@dataclass
class SimConfig:
    seed: int = 0
    vocab_size: int = 200
    n_utts: int = 500
    len_min: int = 5
    len_max: int = 15
    p_sub: float = 0.2
    p_del: float = 0.08
    p_ins: float = 0.03
    a_cor: float = 6.0
    b_cor: float = 2.0
    a_err: float = 2.2
    b_err: float = 2.8
    overconfidence: float = 0.25
    frames_min: int = 10
    frames_max: int = 50
    gap_prob: float = 0.3
    gap_min: float = 0.05
    gap_max: float = 0.3
    utts_per_recording: int = 10

    def __post_init__(self):
        for p in (self.p_sub, self.p_del, self.p_ins, self.gap_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0,1]")
        if self.p_sub + self.p_del > 1.0:
            raise ValueError("p_sub + p_del must be <= 1")
        if min(self.a_cor, self.b_cor, self.a_err, self.b_err) <= 0:
            raise ValueError("Beta parameters must be positive")
        if self.overconfidence < 0:
            raise ValueError("overconfidence shift must be >= 0")
        if self.len_min > self.len_max or self.len_min < 1:
            raise ValueError("bad utterance length range")
        if self.frames_min > self.frames_max or self.frames_min < 1:
            raise ValueError("bad duration range")
        if self.gap_min > self.gap_max or self.gap_min < 0:
            raise ValueError("bad gap range")
        if self.vocab_size < 2 or self.n_utts < 1:
            raise ValueError("need vocab_size >= 2 and n_utts >= 1")


def preset(name: str) -> SimConfig:
    """Error mixes mirroring matched narrow-band and mismatched wide-band
    recogniser behaviour (deletion-heavy)."""
    if name == "matched":
        return SimConfig(p_sub=0.24, p_del=0.08, p_ins=0.03)
    if name == "mismatched":
        return SimConfig(p_sub=0.23, p_del=0.19, p_ins=0.013)
    raise ValueError(f"unknown preset {name!r}")


def _vocab(size):
    return [f"w{i:04d}" for i in range(size)]


def _token_weights(size):
    w = 1.0 / np.arange(2.0, size + 2.0) ** 0.9
    return w / w.sum()


def generate(config: SimConfig):
    """Synthetic corpus of LabeledUtterance (references and raw posteriors set,
    targets unfilled). Deterministic given the seed."""
    rng = np.random.default_rng(config.seed)
    vocab = _vocab(config.vocab_size)
    weights = _token_weights(config.vocab_size)
    utts = []
    for u in range(config.n_utts):
        length = int(rng.integers(config.len_min, config.len_max + 1))
        ref_ids = rng.choice(config.vocab_size, size=length, p=weights)
        reference = [vocab[i] for i in ref_ids]
        words: list = []
        t_cursor = 0.0

        def emit(token, correct):
            nonlocal t_cursor
            if rng.random() < config.gap_prob:
                t_cursor += rng.uniform(config.gap_min, config.gap_max)
            frames = int(rng.integers(config.frames_min, config.frames_max + 1))
            dur = frames * FRAME_SEC
            a, b = ((config.a_cor, config.b_cor) if correct
                    else (config.a_err, config.b_err))
            post = min(1.0, rng.beta(a, b) + config.overconfidence)
            words.append(HypWord(text=token, start=round(t_cursor, 4),
                                 duration=round(dur, 4), raw_posterior=float(post)))
            t_cursor = round(t_cursor, 4) + round(dur, 4)

        def maybe_insert():
            if rng.random() < config.p_ins:
                emit(vocab[int(rng.integers(config.vocab_size))], correct=False)

        while True:
            for rid in ref_ids:
                roll = rng.random()
                if roll < config.p_del:
                    # deleted word still consumes audio time: widen the gap
                    frames = int(rng.integers(config.frames_min,
                                              config.frames_max + 1))
                    t_cursor += frames * FRAME_SEC
                elif roll < config.p_del + config.p_sub:
                    wrong = int(rng.integers(config.vocab_size - 1))
                    if wrong >= rid:
                        wrong += 1
                    emit(vocab[wrong], correct=False)
                else:
                    emit(vocab[rid], correct=True)
                maybe_insert()
            if words:
                break
            # everything deleted: rerun the channel so the hypothesis is usable
            t_cursor = 0.0
        utt = Utterance(
            id=f"utt{config.seed:04d}-{u:06d}",
            recording_id=f"rec{config.seed:04d}-{u // config.utts_per_recording:05d}",
            words=words)
        utts.append(LabeledUtterance(utterance=utt, reference=reference))
    return utts


def config_to_json(config: SimConfig) -> dict:
    return asdict(config)


def config_from_json(obj) -> SimConfig:
    return SimConfig(**obj)


def load_config(path) -> SimConfig:
    with open(path) as f:
        return config_from_json(json.load(f))
