#!/usr/bin/env python3
"""Compare the three selection schemes on a matched + deletion-heavy mix.

Trains calibration and the joint network on a matched-condition corpus, then
ranks a 50/50 mix of matched and deletion-heavy utterances with the
confidence, discount and threshold schemes. Writes the three curve CSVs and
prints deletion counts and subset WER at the 25% duration prefix.
"""

import argparse
import os

from delconf import pipeline, select, simgen


def stats_at_fraction(items, order, fraction):
    by_id = {it.id: it for it in items}
    total = sum(it.duration for it in items)
    acc = dels = errs = ref = 0
    for uid in order:
        tc = by_id[uid].true_counts
        acc += by_id[uid].duration
        dels += tc.deletions
        errs += tc.substitutions + tc.deletions + tc.insertions
        ref += tc.correct + tc.substitutions + tc.deletions
        if acc >= fraction * total:
            break
    return dels, errs / ref


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="curves-out")
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--train-utts", type=int, default=1500)
    ap.add_argument("--mix-utts", type=int, default=600, help="per condition")
    ap.add_argument("--fraction", type=float, default=0.25)
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    cfg = simgen.preset("matched")
    cfg.n_utts = args.train_utts
    cfg.seed = args.seed
    train = simgen.generate(cfg)
    pipeline.align_corpus(train)
    cal = pipeline.fit_calibration(train)
    print("training the network ...")
    bundle, history = pipeline.train_bundle(train, calibration=cal)
    print(f"loss {history[0]:.3f} -> {history[-1]:.3f}")

    m1 = simgen.preset("matched")
    m1.n_utts, m1.seed = args.mix_utts, args.seed + 1
    m2 = simgen.preset("mismatched")
    m2.n_utts, m2.seed = args.mix_utts, args.seed + 2
    mix = simgen.generate(m1) + simgen.generate(m2)
    counts = pipeline.align_corpus(mix)
    pipeline.predict_corpus(mix, bundle)
    items = pipeline.selection_items(mix, counts)

    dev = [(ec.wer, lu.predictions) for ec, lu in zip(counts, mix)]
    th = select.fit_thresholds(dev, {
        "theta_c": [round(0.1 * k, 3) for k in range(1, 10)],
        "theta_d": [round(0.1 * k, 3) for k in range(1, 10)],
        "theta_s": [round(0.1 * k, 3) for k in range(1, 10)],
        "theta_p": [0.25, 0.5, 0.75, 1.0]})
    dp = select.fit_discount(items, {
        "theta_d": [0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
        "theta_s": [0.0, 0.5, 1.0, 2.0, 5.0, 10.0]})
    print(f"fitted {th}")
    print(f"fitted {dp}")

    schemes = [("confidence", None), ("discount", dp), ("threshold", th)]
    print(f"\nat the {100 * args.fraction:.0f}% duration prefix:")
    for name, params in schemes:
        res = select.rank_and_curve(items, name, params)
        path = os.path.join(args.out_dir, f"curve_{name}.csv")
        select.write_curve_csv(res, path)
        dels, wer = stats_at_fraction(items, res.order, args.fraction)
        print(f"  {name:<11} deletions {dels:5d}  subset WER {wer:.4f}  -> {path}")


if __name__ == "__main__":
    main()
