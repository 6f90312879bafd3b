"""Data model for hypotheses, references, targets and predictions, with JSONL IO.

One record per line: {"id", "recording_id", "words": [{"w","start","dur","post"}],
"ref": [...], "targets": {...}?, "pred": {...}?}. Floats are written with
shortest round-trip decimals, so read(write(x)) is bit-exact.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field

FRAME_SEC = 0.01


class CorpusError(ValueError):
    """Invariant violation in a corpus value."""


class ParseError(CorpusError):
    """Malformed corpus file."""


@dataclass
class HypWord:
    text: str
    start: float
    duration: float
    raw_posterior: float
    frames: int = -1  # derived from duration when not given

    def __post_init__(self):
        if self.frames < 0:
            self.frames = round(self.duration / FRAME_SEC)
        if not self.text:
            raise CorpusError("empty word text")
        if self.start < 0:
            raise CorpusError(f"start {self.start} < 0")
        if self.duration <= 0:
            raise CorpusError(f"duration {self.duration} <= 0")
        if self.frames < 1 or self.frames != round(self.duration / FRAME_SEC):
            raise CorpusError(
                f"frames {self.frames} inconsistent with duration {self.duration}")
        if not 0.0 <= self.raw_posterior <= 1.0:
            raise CorpusError(f"raw_posterior {self.raw_posterior} outside [0,1]")

    @property
    def end(self):
        return self.start + self.duration


@dataclass
class Utterance:
    id: str
    recording_id: str
    words: list  # of HypWord, time ordered, non-overlapping

    def __post_init__(self):
        for prev, cur in zip(self.words, self.words[1:]):
            if cur.start < prev.end - 1e-9:
                raise CorpusError(
                    f"words overlap at {cur.start:.3f}s in utterance {self.id}")

    def __len__(self):
        return len(self.words)

    @property
    def duration(self):
        return sum(w.duration for w in self.words)


@dataclass
class Targets:
    """Binary correctness c*, next-gap deletion d* and start deletion s*."""
    c_star: list
    d_star: list
    s_star: int

    def __post_init__(self):
        if len(self.c_star) != len(self.d_star):
            raise CorpusError("c_star and d_star length mismatch")
        for v in [*self.c_star, *self.d_star, self.s_star]:
            if v not in (0, 1):
                raise CorpusError(f"target value {v} not binary")


@dataclass
class Predictions:
    """Estimated word confidences c, gap deletion probabilities d and start deletion s."""
    c: list
    d: list
    s: float

    def __post_init__(self):
        if len(self.c) != len(self.d):
            raise CorpusError("c and d length mismatch")
        for v in [*self.c, *self.d, self.s]:
            if not 0.0 <= v <= 1.0:
                raise CorpusError(f"prediction value {v} outside [0,1]")


@dataclass
class LabeledUtterance:
    utterance: Utterance
    reference: list  # reference token strings
    targets: Targets = None
    predictions: Predictions = None

    def __post_init__(self):
        n = len(self.utterance)
        if self.targets is not None and len(self.targets.c_star) != n:
            raise CorpusError(
                f"targets length {len(self.targets.c_star)} != {n} words "
                f"in utterance {self.utterance.id}")
        if self.predictions is not None and len(self.predictions.c) != n:
            raise CorpusError(
                f"predictions length {len(self.predictions.c)} != {n} words "
                f"in utterance {self.utterance.id}")


def _utt_to_record(lu: LabeledUtterance) -> dict:
    rec = {
        "id": lu.utterance.id,
        "recording_id": lu.utterance.recording_id,
        "words": [{"w": w.text, "start": w.start, "dur": w.duration,
                   "post": w.raw_posterior} for w in lu.utterance.words],
        "ref": list(lu.reference),
    }
    if lu.targets is not None:
        rec["targets"] = {"c": list(lu.targets.c_star),
                          "d": list(lu.targets.d_star),
                          "s": lu.targets.s_star}
    if lu.predictions is not None:
        rec["pred"] = {"c": list(lu.predictions.c),
                       "d": list(lu.predictions.d),
                       "s": lu.predictions.s}
    return rec


def _utt_from_record(rec: dict) -> LabeledUtterance:
    words = [HypWord(text=w["w"], start=w["start"], duration=w["dur"],
                     raw_posterior=w["post"]) for w in rec["words"]]
    utt = Utterance(id=rec["id"], recording_id=rec["recording_id"], words=words)
    targets = None
    if "targets" in rec:
        t = rec["targets"]
        targets = Targets(c_star=list(t["c"]), d_star=list(t["d"]), s_star=t["s"])
    pred = None
    if "pred" in rec:
        p = rec["pred"]
        pred = Predictions(c=list(p["c"]), d=list(p["d"]), s=p["s"])
    return LabeledUtterance(utterance=utt, reference=list(rec["ref"]),
                            targets=targets, predictions=pred)


def read_corpus(path) -> list:
    """Read a JSONL corpus; order preserved, invariants validated."""
    utts = []
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"{path}: line {lineno}: {e}") from e
            try:
                lu = _utt_from_record(rec)
            except (KeyError, TypeError) as e:
                raise ParseError(f"{path}: line {lineno}: missing field {e}") from e
            except CorpusError as e:
                raise CorpusError(
                    f"{path}: line {lineno} (utterance {rec.get('id')}): {e}") from e
            if lu.utterance.id in seen:
                raise CorpusError(f"duplicate utterance id {lu.utterance.id}")
            seen.add(lu.utterance.id)
            utts.append(lu)
    return utts


def write_corpus(utts, path):
    """Write JSONL atomically (temp file + rename)."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            for lu in utts:
                f.write(json.dumps(_utt_to_record(lu)) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
