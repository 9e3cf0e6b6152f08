"""Command-line front end: ``spontser <command> [options]``.

Exit status is 0 on success, 1 when a data or runtime error stops the run
and 2 for usage errors (argparse's own convention).
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from dataclasses import replace

import numpy as np

from .audio_ingest import parse_manifest
from .config import load_run_config, parse_ells
from .errors import BadConfig, LengthMismatch, SpontserError
from .harness import (
    ABLATION_MODES,
    ablate_csv_text,
    ablate_features,
    context_sweep,
    eval_csv_text,
    evaluate,
    split_corpus,
    sweep_csv_text,
    write_text,
)
from .lld import DESCRIPTOR_GROUPS, descriptor_names
from .models import predict_corpus, stack_dialogs, train_baseline, train_hierarchical, train_joint_emotion
from .persist import load_model, save_model
from .pipeline import corpus_dialogs, corpus_features
from .pooling import read_feature_cache, write_feature_cache
from .synth import gen_synth_corpus

MODEL_KINDS = ("baseline", "hierarchical", "joint")
PARTS = ("all", "train", "test")


class UsageError(Exception):
    pass


# -- shared helpers ----------------------------------------------------------


def run_config(args):
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.seeded(args.seed)
    return cfg


def select_part(corpus, cfg, part):
    if part == "all":
        return corpus
    train, test = split_corpus(corpus, cfg.split)
    return train if part == "train" else test


def load_features(path, corpus):
    """Feature rows keyed by utterance id; every utterance of ``corpus`` must be present."""
    ids, matrix, _k = read_feature_cache(path)
    features = dict(zip(ids, matrix))
    missing = [u.utterance_id for u in corpus if u.utterance_id not in features]
    if missing:
        raise LengthMismatch(f"{path}: no features for utterance {missing[0]!r} ({len(missing)} missing)")
    return features


def corpus_feature_map(args, corpus, cfg):
    if getattr(args, "features", None):
        return load_features(args.features, corpus)
    return corpus_features(corpus, cfg.frame, cfg.lld, cfg.pool)


def require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required for '{args.command}'")


def predictions_text(corpus, emotions, spont):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["utterance_id", "emotion", "spontaneity"])
    for utt, e, s in zip(corpus, emotions, spont):
        w.writerow([utt.utterance_id, int(e), "" if s < 0 else int(s)])
    return buf.getvalue()


def read_predictions(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if rows and not {"utterance_id", "emotion"} <= set(rows[0]):
        raise BadConfig(f"{path}: expected columns utterance_id,emotion,spontaneity")
    try:
        return [(r["utterance_id"], int(r["emotion"])) for r in rows]
    except ValueError as exc:
        raise BadConfig(f"{path}: {exc}") from None


# -- commands ----------------------------------------------------------------


def cmd_extract(args, cfg):
    require(args, "manifest", "out")
    corpus = parse_manifest(args.manifest)
    features = corpus_features(corpus, cfg.frame, cfg.lld, cfg.pool)
    ids = [u.utterance_id for u in corpus]
    k = len(descriptor_names(cfg.lld))
    matrix = np.vstack([features[uid] for uid in ids]) if ids else np.zeros((0, 24 * k))
    write_feature_cache(args.out, ids, matrix, k)
    print(f"d={matrix.shape[1]} k={k} utterances={len(ids)}")


def cmd_train(args, cfg):
    require(args, "manifest", "features", "out")
    corpus = select_part(parse_manifest(args.manifest), cfg, args.part)
    dialogs = corpus_dialogs(corpus, load_features(args.features, corpus))
    X, spont, emotions = stack_dialogs(dialogs)
    if args.kind == "baseline":
        model = train_baseline(X, emotions, cfg.emotion)
    elif args.kind == "hierarchical":
        model = train_hierarchical(dialogs, cfg.emotion, cfg.spont, cfg.ell)
    else:
        model = train_joint_emotion(X, spont, emotions, cfg.joint)
    save_model(model, args.out)
    pred_e, pred_s = predict_corpus(model, [d.features for d in dialogs])
    print(f"trained {args.kind} model on {X.shape[0]} utterances, d={X.shape[1]}")
    if args.kind == "joint":
        print(f"tuple training accuracy: {np.mean((pred_e == emotions) & (pred_s == spont)):.3f}")
    print(f"emotion training accuracy: {np.mean(pred_e == emotions):.3f}")


def cmd_predict(args, cfg):
    require(args, "manifest", "features", "model", "out")
    corpus = select_part(parse_manifest(args.manifest), cfg, args.part)
    model = load_model(args.model)
    dialogs = corpus_dialogs(corpus, load_features(args.features, corpus))
    emotions, spont = predict_corpus(model, [d.features for d in dialogs])
    ordered = [u for d in corpus.dialogs().values() for u in d]
    write_text(args.out, predictions_text(ordered, emotions, spont))
    print(f"wrote {len(ordered)} predictions to {args.out}")


def cmd_eval(args, cfg):
    require(args, "manifest", "predictions", "out")
    corpus = parse_manifest(args.manifest)
    by_id = {u.utterance_id: u for u in corpus}
    preds = read_predictions(args.predictions)
    unknown = [uid for uid, _ in preds if uid not in by_id]
    if unknown:
        raise LengthMismatch(f"prediction for utterance {unknown[0]!r} not in manifest")
    report = evaluate([e for _, e in preds], [by_id[uid] for uid, _ in preds])
    write_text(args.out, eval_csv_text(report))
    print(f"overall_accuracy={report.overall_accuracy:.6f} n_test={report.n_test}")


def _split_dialogs(args, cfg):
    corpus = parse_manifest(args.manifest)
    train, test = split_corpus(corpus, cfg.split)
    features = corpus_feature_map(args, corpus, cfg)
    return corpus_dialogs(train, features), corpus_dialogs(test, features)


def cmd_sweep(args, cfg):
    require(args, "manifest", "out")
    train, test = _split_dialogs(args, cfg)
    rows = context_sweep(train, test, cfg.ells, cfg.spont)
    write_text(args.out, sweep_csv_text(rows))
    for ell, acc in rows:
        print(f"ell={ell} accuracy={acc:.6f}")


def exclusion_sets(raw):
    """Each ``--exclude`` occurrence is one set; names inside it are split on ',' or '+'."""
    if not raw:
        return [()] + [(g,) for g in DESCRIPTOR_GROUPS]
    sets = []
    for item in raw:
        names = tuple(n for n in item.replace("+", ",").split(",") if n)
        if item.strip().lower() == "none":
            names = ()
        sets.append(names)
    return sets


def cmd_ablate(args, cfg):
    require(args, "manifest", "out")
    train, test = _split_dialogs(args, cfg)
    modes = ABLATION_MODES if cfg.ablate_mode == "all" else (cfg.ablate_mode,)
    rows = []
    for mode in modes:
        rows += ablate_features(
            train, test, descriptor_names(cfg.lld), exclusion_sets(args.exclude), mode, cfg.spont, cfg.ablate_ell
        )
    rows.sort(key=lambda r: (r[1], r[0]))
    write_text(args.out, ablate_csv_text(rows))
    for excluded, mode, dim, acc in rows:
        print(f"{mode} exclude={excluded} dim={dim} accuracy={acc:.6f}")


def cmd_synth(args, cfg):
    require(args, "out")
    corpus = gen_synth_corpus(cfg.synth, args.out)
    print(f"wrote {len(corpus)} utterances in {len(corpus.dialogs())} dialogs to {args.out}")


COMMANDS = {
    "extract": cmd_extract,
    "train": cmd_train,
    "predict": cmd_predict,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "ablate": cmd_ablate,
    "synth": cmd_synth,
}


# -- argument parsing --------------------------------------------------------


def _common(p):
    p.add_argument("--config", help="INI run configuration")
    p.add_argument("--seed", type=int, help="root seed (overrides the config file)")
    p.add_argument("--manifest", help="corpus manifest CSV")
    p.add_argument("--out", help="output file (directory for synth)")


def build_parser():
    parser = argparse.ArgumentParser(prog="spontser", description="Spontaneity-aware speech emotion recognition.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="WAV -> pooled feature cache")
    _common(p)

    for name, helptext in (("train", "fit an emotion model"), ("predict", "write utterance predictions")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--features", help="feature cache from 'extract'")
        p.add_argument("--part", choices=PARTS, default="all", help="restrict to one side of the configured split")
        if name == "train":
            p.add_argument("--kind", choices=MODEL_KINDS, default="hierarchical")
            p.add_argument("--ell", type=int, help="spontaneity context length for the hierarchical router")
        else:
            p.add_argument("--model", help="model file from 'train'")

    p = sub.add_parser("eval", help="score a predictions CSV")
    _common(p)
    p.add_argument("--predictions")

    p = sub.add_parser("sweep", help="spontaneity accuracy against context length")
    _common(p)
    p.add_argument("--features")
    p.add_argument("--ells", type=parse_ells, help="comma-separated context lengths")

    p = sub.add_parser("ablate", help="spontaneity accuracy with LLD groups removed")
    _common(p)
    p.add_argument("--features")
    p.add_argument("--exclude", action="append", help=f"groups to drop together, from {','.join(DESCRIPTOR_GROUPS)}")
    p.add_argument("--mode", choices=ABLATION_MODES + ("all",))
    p.add_argument("--ell", type=int, help="context length (default 1)")

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    _common(p)
    p.add_argument("--n-dialogs", type=int)
    p.add_argument("--utterances-per-dialog", type=int)
    p.add_argument("--noise-sigma", type=float)
    p.add_argument("--spont-fraction", type=float)
    p.add_argument("--centroid-separation", type=float)
    p.add_argument("--no-branch-divergence", action="store_true")
    return parser


def apply_flags(cfg, args):
    """Flag overrides on top of the file-derived configuration."""
    cmd = args.command
    if cmd == "train" and args.ell is not None:
        cfg = replace(cfg, ell=args.ell)
    elif cmd == "sweep" and args.ells is not None:
        cfg = replace(cfg, ells=args.ells)
    elif cmd == "ablate":
        if args.ell is not None:
            cfg = replace(cfg, ablate_ell=args.ell)
        if args.mode is not None:
            cfg = replace(cfg, ablate_mode=args.mode)
    elif cmd == "synth":
        changes = {
            "n_dialogs": args.n_dialogs,
            "utterances_per_dialog": args.utterances_per_dialog,
            "noise_sigma": args.noise_sigma,
            "spont_fraction": args.spont_fraction,
            "centroid_separation": args.centroid_separation,
        }
        changes = {k: v for k, v in changes.items() if v is not None}
        if args.no_branch_divergence:
            changes["branch_divergence"] = False
        cfg = replace(cfg, synth=replace(cfg.synth, **changes))
    return cfg.validate()


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = apply_flags(run_config(args), args)
        print(f"seed={cfg.seed}")
        COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"spontser: error: {exc}", file=sys.stderr)
        return 2
    except (SpontserError, OSError) as exc:
        print(f"spontser: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
