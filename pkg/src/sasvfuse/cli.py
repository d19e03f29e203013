"""Command-line pipeline: synth, calibrate, fuse, train, eval, hist.

Exit codes: 0 on success, 2 for usage errors (argparse), 1 for data
errors (bad files, unresolved ids, degenerate inputs).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import formats
from .data import DataError, TrialClass
from .fusion import SYSTEM_NAMES, strategy_from_name, fuse_records
from .histogram import build_histogram, render_histogram, write_histogram
from .mapping import ConvergenceError, LINEAR, SIGMOID, fit_calibrator
from .metrics import evaluate
from .scoring import EMBEDDING_MEAN, SCORE_MEAN, cosine_score, enrollment_centroids, score_all
from .synth import SPLITS, WorldSpec, gen_world
from .trainer import DevData, TrainConfig, TrainData, train_finetune


def _fraction(x: float) -> str:
    return format(x, ".9g")


def _percent(x: float) -> str:
    return f"{100.0 * x:.2f}"


# ---------------------------------------------------------------------------
# synth

def cmd_synth(args, parser) -> int:
    spec = WorldSpec(seed=args.seed,
                     n_speakers=args.speakers,
                     utts_per_speaker=args.utts_per_speaker,
                     spoofs_per_speaker=args.spoofs_per_speaker,
                     asv_dim=args.asv_dim,
                     cm_dim=args.cm_dim,
                     asv_noise=args.asv_noise,
                     cm_margin=args.cm_margin,
                     spoof_asv_alpha=args.spoof_asv_alpha)
    world = gen_world(spec)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    formats.write_embeddings(out / "asv.emb", world.asv_embs, spec.asv_dim)
    formats.write_embeddings(out / "cm.emb", world.cm_embs, spec.cm_dim)
    formats.write_cm_head(out / "head_true.txt", world.true_head)
    for split in SPLITS:
        ws = world.splits[split]
        formats.write_protocol(out / f"protocol_{split}.txt", ws.trials)
        if ws.enrollment:
            formats.write_enrollment(out / f"enroll_{split}.txt", ws.enrollment)
    for split in SPLITS:
        ws = world.splits[split]
        print(f"{split}: {len(ws.speakers)} speakers, {len(ws.trials)} trials")
    print(f"wrote world to {out}")
    return 0


# ---------------------------------------------------------------------------
# calibrate

def _asv_scores(trials, enrollment, asv_embs, enroll_agg):
    """Speaker-side scores only (no countermeasure inputs needed)."""
    centroids = enrollment_centroids(enrollment, asv_embs)
    out = []
    for i, t in enumerate(trials):
        if t.speaker_id not in centroids:
            raise DataError(f"trial {i}: speaker {t.speaker_id!r} has no enrollment")
        if t.test_utt_id not in asv_embs:
            raise DataError(f"trial {i}: test utterance {t.test_utt_id!r} "
                            f"has no speaker embedding")
        if enroll_agg == EMBEDDING_MEAN:
            s = cosine_score(centroids[t.speaker_id], asv_embs[t.test_utt_id])
        else:
            s = float(np.mean([cosine_score(asv_embs[u], asv_embs[t.test_utt_id])
                               for u in enrollment[t.speaker_id]]))
        out.append(s)
    return out


def cmd_calibrate(args, parser) -> int:
    asv_embs = formats.load_embeddings(args.asv_emb)
    trials = formats.load_protocol(args.protocol)
    enrollment = formats.load_enrollment(args.enroll)

    bonafide = [t for t in trials
                if t.trial_class in (TrialClass.TARGET, TrialClass.NONTARGET)]
    if any(t.trial_class is None for t in trials):
        raise DataError(f"{args.protocol}: calibration needs labeled trials")
    if not bonafide:
        raise DataError(f"{args.protocol}: no bona fide (target/nontarget) trials")

    scores = _asv_scores(bonafide, enrollment, asv_embs, args.enroll_agg)
    labels = [1 if t.trial_class is TrialClass.TARGET else 0 for t in bonafide]
    params = fit_calibrator(scores, labels, l2=args.l2)
    formats.write_calibrator(args.out, params)
    print(f"calibrator a={params.a!r} b={params.b!r} "
          f"({len(bonafide)} bona fide trials, l2={args.l2})")
    return 0


# ---------------------------------------------------------------------------
# fuse

def cmd_fuse(args, parser) -> int:
    if args.strategy == "pr-c-i" and args.calibrator is None:
        parser.error("pr-c-i requires --calibrator")
    if args.strategy != "pr-c-i" and args.calibrator is not None:
        parser.error(f"{args.strategy} does not take --calibrator")

    calibrator = formats.load_calibrator(args.calibrator) if args.calibrator else None
    strategy = strategy_from_name(args.strategy, calibrator)

    asv_embs = formats.load_embeddings(args.asv_emb)
    cm_embs = formats.load_embeddings(args.cm_emb)
    trials = formats.load_protocol(args.protocol)
    enrollment = formats.load_enrollment(args.enroll)
    head = formats.load_cm_head(args.head)

    records = score_all(trials, enrollment, asv_embs, cm_embs, head,
                        enroll_agg=args.enroll_agg)
    fused = fuse_records(strategy, records)
    formats.write_scores(args.out, fused)
    print(f"{args.strategy}: scored {len(fused)} trials -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# train

def _pools_from_protocol(trials, path):
    """Per-speaker bona fide and spoof pools out of a labeled protocol."""
    bonafide: dict[str, list[str]] = {}
    spoofs: dict[str, list[str]] = {}
    for i, t in enumerate(trials):
        if t.trial_class is None:
            raise DataError(f"{path}: trial {i} is unlabeled; training needs labels")
        if t.trial_class is TrialClass.TARGET:
            pool = bonafide.setdefault(t.speaker_id, [])
            if t.test_utt_id not in pool:
                pool.append(t.test_utt_id)
        elif t.trial_class is TrialClass.SPOOF:
            pool = spoofs.setdefault(t.speaker_id, [])
            if t.test_utt_id not in pool:
                pool.append(t.test_utt_id)
    return bonafide, spoofs


def _parse_mix(text: str) -> tuple[int, int, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("pair mix must look like 1:1:1")
    mix = tuple(int(p) for p in parts)
    if any(m < 0 for m in mix) or sum(mix) == 0:
        raise ValueError("pair mix weights must be nonnegative, not all zero")
    return mix


def cmd_train(args, parser) -> int:
    try:
        mix = _parse_mix(args.pair_mix)
    except ValueError as exc:
        parser.error(str(exc))

    asv_embs = formats.load_embeddings(args.asv_emb)
    cm_embs = formats.load_embeddings(args.cm_emb)
    train_trials = formats.load_protocol(args.protocol)
    train_enroll = formats.load_enrollment(args.enroll)
    dev_trials = formats.load_protocol(args.dev_protocol)
    dev_enroll = formats.load_enrollment(args.dev_enroll)
    head = formats.load_cm_head(args.head)

    bonafide, spoofs = _pools_from_protocol(train_trials, args.protocol)
    config = TrainConfig(learning_rate=args.lr,
                         batch_size=args.batch_size,
                         epochs=args.epochs,
                         target_prior=args.prior,
                         seed=args.seed,
                         mapping=args.mapping,
                         pairs_per_epoch=args.pairs_per_epoch,
                         pair_mix=mix,
                         adam_beta1=args.adam_beta1,
                         adam_beta2=args.adam_beta2,
                         adam_eps=args.adam_eps)
    train_data = TrainData(enrollment=train_enroll, bonafide_utts=bonafide,
                           spoof_utts=spoofs, asv_embs=asv_embs, cm_embs=cm_embs)
    dev_data = DevData(trials=dev_trials, enrollment=dev_enroll,
                       asv_embs=asv_embs, cm_embs=cm_embs)

    result = train_finetune(config, train_data, dev_data, head)
    formats.write_cm_head(args.out_head, result.head)
    if args.history:
        with open(args.history, "w", encoding="utf-8") as f:
            f.write("epoch\tdev_sv_eer\tdev_spf_eer\tdev_sasv_eer\tloss\n")
            for rec in result.history:
                sv = _fraction(rec.suite.sv_eer.eer) if rec.suite.sv_eer else "-"
                spf = _fraction(rec.suite.spf_eer.eer) if rec.suite.spf_eer else "-"
                sasv = _fraction(rec.suite.sasv_eer.eer) if rec.suite.sasv_eer else "-"
                f.write(f"{rec.epoch}\t{sv}\t{spf}\t{sasv}\t{_fraction(rec.loss)}\n")

    best = result.history[result.best_epoch].suite.sasv_eer.eer
    print(f"best epoch {result.best_epoch}: dev SASV-EER {_percent(best)}% "
          f"-> {args.out_head}")
    return 0


# ---------------------------------------------------------------------------
# eval

def cmd_eval(args, parser) -> int:
    records = formats.load_scores(args.scores)
    labeled = [r for r in records if r.trial.trial_class is not None]
    if not labeled:
        raise DataError(f"{args.scores}: no labeled rows to evaluate")
    if len(labeled) != len(records):
        print(f"note: ignoring {len(records) - len(labeled)} unlabeled rows",
              file=sys.stderr)

    suite = evaluate(labeled, column=args.column)
    rows = (("SV-EER", suite.sv_eer), ("SPF-EER", suite.spf_eer),
            ("SASV-EER", suite.sasv_eer))
    if args.machine:
        parts = []
        for name, res in rows:
            key = name.lower().replace("-eer", "")
            if res is None:
                continue
            parts.append(f"{key}_eer={_fraction(res.eer)}")
            parts.append(f"{key}_threshold={_fraction(res.threshold)}")
        print(" ".join(parts))
    else:
        print(f"column: {args.column}")
        print(f"{'metric':<10}{'eer%':>8}  threshold")
        for name, res in rows:
            if res is None:
                print(f"{name:<10}{'n/a':>8}")
            else:
                print(f"{name:<10}{_percent(res.eer):>8}  {_fraction(res.threshold)}")
    return 0


# ---------------------------------------------------------------------------
# hist

def cmd_hist(args, parser) -> int:
    records = formats.load_scores(args.scores)
    if not records:
        raise DataError(f"{args.scores}: no score rows")
    by_class: dict[str, list[float]] = {}
    for i, r in enumerate(records):
        v = getattr(r, args.column)
        if v is None:
            raise DataError(f"{args.scores}: row {i} has no {args.column}")
        name = r.trial.trial_class.value if r.trial.trial_class else "unlabeled"
        by_class.setdefault(name, []).append(v)

    hist = build_histogram(by_class, args.bins, args.column)
    write_histogram(args.out, hist)
    msg = f"histogram of {args.column} ({args.bins} bins) -> {args.out}"
    if hist.degenerate:
        msg += " [degenerate: constant column]"
    if args.plot:
        render_histogram(hist, args.plot)
        msg += f", figure -> {args.plot}"
    print(msg)
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sasvfuse",
        description="Probabilistic fusion of speaker-verification and "
                    "anti-spoofing scores, with three-EER evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic embedding world")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--speakers", type=int, default=12)
    p.add_argument("--utts-per-speaker", type=int, default=12)
    p.add_argument("--spoofs-per-speaker", type=int, default=8)
    p.add_argument("--asv-dim", type=int, default=192)
    p.add_argument("--cm-dim", type=int, default=160)
    p.add_argument("--asv-noise", type=float, default=0.35)
    p.add_argument("--cm-margin", type=float, default=6.0)
    p.add_argument("--spoof-asv-alpha", type=float, default=0.9)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("calibrate",
                       help="fit the logistic score calibrator on bona fide trials")
    p.add_argument("--asv-emb", required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--enroll", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--enroll-agg", choices=[EMBEDDING_MEAN, SCORE_MEAN],
                   default=EMBEDDING_MEAN)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("fuse", help="score trials and fuse into decision scores")
    p.add_argument("--strategy", required=True, choices=list(SYSTEM_NAMES))
    p.add_argument("--asv-emb", required=True)
    p.add_argument("--cm-emb", required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--enroll", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--calibrator")
    p.add_argument("--out", required=True)
    p.add_argument("--enroll-agg", choices=[EMBEDDING_MEAN, SCORE_MEAN],
                   default=EMBEDDING_MEAN)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("train", help="fine-tune the countermeasure head")
    p.add_argument("--asv-emb", required=True)
    p.add_argument("--cm-emb", required=True)
    p.add_argument("--protocol", required=True, help="labeled training protocol")
    p.add_argument("--enroll", required=True)
    p.add_argument("--dev-protocol", required=True)
    p.add_argument("--dev-enroll", required=True)
    p.add_argument("--head", required=True, help="initial head file")
    p.add_argument("--out-head", required=True)
    p.add_argument("--history", help="per-epoch dev metrics TSV")
    p.add_argument("--mapping", choices=[LINEAR, SIGMOID], default=SIGMOID)
    p.add_argument("--lr", type=float, default=0.0003)
    p.add_argument("--batch-size", type=int, default=1024)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--prior", type=float, default=0.1)
    p.add_argument("--pairs-per-epoch", type=int, default=4096)
    p.add_argument("--pair-mix", default="1:1:1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--adam-beta1", type=float, default=0.9)
    p.add_argument("--adam-beta2", type=float, default=0.999)
    p.add_argument("--adam-eps", type=float, default=1e-8)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="three-EER metric table from a scores TSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--column", choices=["s_asv", "s_cm", "s_sasv"],
                   default="s_sasv")
    p.add_argument("--machine", action="store_true",
                   help="single-line key=value output")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("hist", help="per-class histogram data from a scores TSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--column", choices=["s_asv", "s_cm", "s_sasv"],
                   default="s_sasv")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", help="also render the histogram to this image file")
    p.set_defaults(func=cmd_hist)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (DataError, ConvergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
