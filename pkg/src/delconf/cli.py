"""Batch pipeline CLI.

Subcommands compose via files and exit 0 on success, 1 on validation errors,
2 on IO errors. Machine-readable outputs (JSON/CSV) go to the named paths;
human-readable summaries go to stderr. All randomness flows from --seed flags.
"""

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from delconf import align, birnn, calibrate, pipeline, select, simgen
from delconf.corpus import CorpusError, read_corpus, write_corpus


def _atomic_write_text(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path, obj):
    _atomic_write_text(path, json.dumps(obj, sort_keys=True) + "\n")


def _log(msg):
    print(msg, file=sys.stderr)


def cmd_simulate(args):
    if args.preset:
        cfg = simgen.preset(args.preset)
    elif args.config:
        cfg = simgen.load_config(args.config)
    else:
        cfg = simgen.SimConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    utts = simgen.generate(cfg)
    write_corpus(utts, args.out)
    _log(f"simulate: wrote {len(utts)} utterances to {args.out}")
    return 0


def cmd_align(args):
    utts = read_corpus(args.infile)
    weights = align.EditWeights(sub_cost=args.sub_cost, del_cost=args.del_cost,
                                ins_cost=args.ins_cost)
    counts = pipeline.align_corpus(utts, weights)
    write_corpus(utts, args.out)
    if args.summary:
        lines = ["id,cor,sub,del,ins,wer"]
        for lu, ec in zip(utts, counts):
            lines.append(f"{lu.utterance.id},{ec.correct},{ec.substitutions},"
                         f"{ec.deletions},{ec.insertions},{repr(ec.wer)}")
        _atomic_write_text(args.summary, "\n".join(lines) + "\n")
    tot = {"sub": sum(c.substitutions for c in counts),
           "del": sum(c.deletions for c in counts),
           "ins": sum(c.insertions for c in counts),
           "ref": sum(c.correct + c.substitutions + c.deletions for c in counts)}
    if tot["ref"]:
        _log(f"align: WER {(tot['sub'] + tot['del'] + tot['ins']) / tot['ref']:.4f} "
             f"(sub {tot['sub'] / tot['ref']:.4f} del {tot['del'] / tot['ref']:.4f} "
             f"ins {tot['ins'] / tot['ref']:.4f}) over {tot['ref']} reference words")
    return 0


def _require_targets(utts, path):
    for lu in utts:
        if lu.targets is None:
            raise CorpusError(f"{path}: utterance {lu.utterance.id} has no "
                              "targets (run `delconf align` first)")


def _require_predictions(utts, path):
    for lu in utts:
        if lu.predictions is None:
            raise CorpusError(f"{path}: utterance {lu.utterance.id} has no "
                              "predictions (run `delconf predict` first)")


def cmd_train_calib(args):
    utts = read_corpus(args.infile)
    _require_targets(utts, args.infile)
    pmap = pipeline.fit_calibration(utts, n_bins=args.bins)
    _write_json(args.out, calibrate.map_to_json(pmap))
    _log(f"train-calib: fitted {len(pmap.values)} cells from "
         f"{sum(len(u.utterance) for u in utts)} words")
    return 0


def cmd_train_birnn(args):
    utts = read_corpus(args.infile)
    _require_targets(utts, args.infile)
    calibration = calibrate.load_map(args.calib) if args.calib else None
    bundle, history = pipeline.train_bundle(
        utts,
        hidden_dim=args.hidden,
        predict_deletions=not args.no_deletion_heads,
        epochs=args.epochs, learning_rate=args.lr, l2=args.l2,
        seed=args.seed, gradient_clip=args.clip,
        lm_order=args.lm_order, emb_dim=args.emb_dim, emb_seed=args.emb_seed,
        calibration=calibration, cell=args.cell)
    pipeline.save_bundle(bundle, args.out)
    if args.history:
        _atomic_write_text(args.history, "epoch,mean_loss\n" + "".join(
            f"{i + 1},{repr(v)}\n" for i, v in enumerate(history)))
    _log(f"train-birnn: {args.epochs} epochs, loss "
         + " -> ".join(f"{v:.4f}" for v in history[:1] + history[-1:]))
    return 0


def cmd_predict(args):
    utts = read_corpus(args.infile)
    if args.model:
        bundle = pipeline.load_bundle(args.model)
        pipeline.predict_corpus(utts, bundle)
    else:
        calibration = calibrate.load_map(args.calib) if args.calib else None
        pipeline.predict_baseline(utts, calibration)
    write_corpus(utts, args.out)
    _log(f"predict: annotated {len(utts)} utterances")
    return 0


def cmd_evaluate(args):
    utts = read_corpus(args.infile)
    _require_targets(utts, args.infile)
    _require_predictions(utts, args.infile)
    report = pipeline.evaluate_report(utts)
    _write_json(args.out, report)
    _log(f"evaluate: {json.dumps(report['confidence'])}")
    return 0


def _load_grid(path, defaults):
    grid = dict(defaults)
    if path:
        with open(path) as f:
            grid.update(json.load(f))
    return grid


def cmd_fit_thresholds(args):
    utts = read_corpus(args.infile)
    _require_targets(utts, args.infile)
    _require_predictions(utts, args.infile)
    counts = pipeline.align_corpus(utts)  # recompute true WER per utterance
    dev = [(ec.wer, lu.predictions) for ec, lu in zip(counts, utts)]
    grid = _load_grid(args.grid, {
        "theta_c": [round(0.1 * k, 3) for k in range(1, 10)],
        "theta_d": [round(0.1 * k, 3) for k in range(1, 10)],
        "theta_s": [round(0.1 * k, 3) for k in range(1, 10)],
        "theta_p": [0.25, 0.5, 0.75, 1.0],
    })
    th = select.fit_thresholds(dev, grid)
    _write_json(args.out, {"theta_c": th.theta_c, "theta_d": th.theta_d,
                           "theta_s": th.theta_s, "theta_p": th.theta_p})
    _log(f"fit-thresholds: {th}")
    return 0


def cmd_fit_discount(args):
    utts = read_corpus(args.infile)
    _require_targets(utts, args.infile)
    _require_predictions(utts, args.infile)
    counts = pipeline.align_corpus(utts)
    items = pipeline.selection_items(utts, counts)
    grid = _load_grid(args.grid, {
        "theta_d": [0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
        "theta_s": [0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
    })
    params = select.fit_discount(items, grid, fraction=args.fraction,
                                 wer_slack=args.slack)
    _write_json(args.out, {"theta_d": params.theta_d, "theta_s": params.theta_s})
    _log(f"fit-discount: {params}")
    return 0


def cmd_select(args):
    utts = read_corpus(args.infile)
    _require_predictions(utts, args.infile)
    counts = None
    if all(lu.reference for lu in utts):
        counts = pipeline.align_corpus(utts)
    items = pipeline.selection_items(utts, counts)
    params = None
    if args.scheme in ("discount", "threshold") and not args.params:
        raise CorpusError(f"--params required for the {args.scheme} scheme")
    if args.scheme == "discount":
        with open(args.params) as f:
            p = json.load(f)
        params = select.DiscountParams(theta_d=p["theta_d"], theta_s=p["theta_s"])
    elif args.scheme == "threshold":
        with open(args.params) as f:
            p = json.load(f)
        params = select.Thresholds(theta_c=p["theta_c"], theta_d=p["theta_d"],
                                   theta_s=p["theta_s"], theta_p=p["theta_p"])
    result = select.rank_and_curve(items, args.scheme, params)
    d = os.path.dirname(os.path.abspath(args.out))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    os.close(fd)
    select.write_curve_csv(result, tmp)
    os.replace(tmp, args.out)
    if args.ranked_out:
        _atomic_write_text(args.ranked_out, "".join(f"{i}\n" for i in result.order))
    _log(f"select: ranked {len(result.order)} utterances with {args.scheme} scheme")
    return 0


def cmd_grad_check(args):
    rng = np.random.default_rng(args.seed)
    model = birnn.init_model(input_dim=args.input_dim, hidden_dim=args.hidden,
                             predict_deletions=True, seed=args.seed,
                             cell=args.cell)
    from delconf.corpus import Targets
    batch = []
    for n in (3, 5):
        xs = rng.normal(size=(n, args.input_dim))
        tg = Targets(c_star=list(rng.integers(0, 2, n)),
                     d_star=list(rng.integers(0, 2, n)),
                     s_star=int(rng.integers(0, 2)))
        batch.append((xs, tg))
    analytic = birnn.gradients(model, batch, l2=1e-4)
    numeric = birnn.finite_difference_gradients(model, batch, l2=1e-4, step=1e-5)
    err = birnn.max_relative_grad_error(analytic, numeric)
    _log(f"grad-check: max relative error {err:.3e} ({args.cell} cell)")
    return 0 if err < 1e-4 else 1


def build_parser():
    p = argparse.ArgumentParser(prog="delconf",
                                description="confidence and deletion prediction "
                                            "pipeline for ASR hypotheses")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic corpus")
    sp.add_argument("--config", help="SimConfig JSON file")
    sp.add_argument("--preset", choices=["matched", "mismatched"])
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("align", help="derive targets from references")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--summary", help="per-utterance error-count CSV")
    sp.add_argument("--sub-cost", type=int, default=10)
    sp.add_argument("--del-cost", type=int, default=7)
    sp.add_argument("--ins-cost", type=int, default=7)
    sp.set_defaults(func=cmd_align)

    sp = sub.add_parser("train-calib", help="fit the monotone confidence map")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--bins", type=int, default=50)
    sp.set_defaults(func=cmd_train_calib)

    sp = sub.add_parser("train-birnn", help="train the recurrent predictor")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--history", help="loss-history CSV")
    sp.add_argument("--calib", help="calibration map JSON for the input feature")
    sp.add_argument("--hidden", type=int, default=64)
    sp.add_argument("--epochs", type=int, default=10)
    sp.add_argument("--lr", type=float, default=0.02)
    sp.add_argument("--l2", type=float, default=1e-3)
    sp.add_argument("--clip", type=float, default=1.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--lm-order", type=int, default=3)
    sp.add_argument("--emb-dim", type=int, default=50)
    sp.add_argument("--emb-seed", type=int, default=0)
    sp.add_argument("--cell", choices=["lstm", "vanilla"], default="lstm")
    sp.add_argument("--no-deletion-heads", action="store_true")
    sp.set_defaults(func=cmd_train_birnn)

    sp = sub.add_parser("predict", help="annotate a corpus with predictions")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--model", help="trained bundle JSON")
    sp.add_argument("--calib", help="baseline: calibrated posteriors only")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("evaluate", help="metric report for stored predictions")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("fit-thresholds", help="grid-fit WER-estimate thresholds")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", help="JSON with per-parameter value lists")
    sp.set_defaults(func=cmd_fit_thresholds)

    sp = sub.add_parser("fit-discount", help="grid-fit discount coefficients")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--grid", help="JSON with per-parameter value lists")
    sp.add_argument("--fraction", type=float, default=0.25)
    sp.add_argument("--slack", type=float, default=0.02)
    sp.set_defaults(func=cmd_fit_discount)

    sp = sub.add_parser("select", help="rank utterances and emit the curve CSV")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--ranked-out", help="ranked utterance ids, best first")
    sp.add_argument("--scheme", required=True,
                    choices=["confidence", "discount", "threshold"])
    sp.add_argument("--params", help="parameter JSON for discount/threshold")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("grad-check", help="finite-difference gradient check")
    sp.add_argument("--hidden", type=int, default=4)
    sp.add_argument("--input-dim", type=int, default=6)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cell", choices=["lstm", "vanilla"], default="lstm")
    sp.set_defaults(func=cmd_grad_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ValueError, KeyError) as e:
        _log(f"error: {e}")
        return 1
    except OSError as e:
        _log(f"io error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
