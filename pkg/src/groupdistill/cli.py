"""Command-line front end.

Subcommands mirror the pipeline: ``synth`` makes a corpus, ``score`` rates
its elements, ``distill`` trains the score regressor, ``aggregate`` pools
groups, ``eval`` measures verification quality from stored artifacts, and
``bench`` runs the whole strategy comparison in one go.

A ``--config`` file supplies ``key=value`` defaults for the chosen
subcommand; flags given explicitly on the command line win. Set the
``DDL_LOG`` environment variable (e.g. ``DDL_LOG=INFO``) for progress logs on
stderr. Outputs contain no timestamps: equal inputs and seeds give
byte-identical files.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import io as gio
from .aggregate import AggregationPolicy, STRATEGIES, represent_corpus
from .data import Corpus
from .distill import DiscriminabilityRegressor, load_model, save_model
from .exceptions import GroupDistillError, ValidationError
from .metrics import (
    compare_strategies,
    comparison_rows,
    format_comparison,
    protocol_from_labels,
    roc_points,
    tar_at_far,
    verification_accuracy,
)
from .scoring import score_corpus
from .synth import SynthConfig, generate

log = logging.getLogger("groupdistill")


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a comma-separated list of numbers"
        ) from None


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a comma-separated list of integers"
        ) from None


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="groupdistill",
        description="Discriminability-weighted group representations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value defaults file")
        p.add_argument("--seed", type=int, default=0, help="random seed")
        commands[name] = p
        return p

    p = command("synth", "generate a synthetic corpus")
    p.add_argument("--output", required=True, help="corpus file to write")
    p.add_argument("--format", choices=("csv", "binary"), default=None,
                   help="corpus format (default: by file suffix)")
    p.add_argument("--ground-truth", help="also write true noise levels here")
    p.add_argument("--k-classes", type=int, default=10)
    p.add_argument("--elements-per-class", type=int, default=200)
    p.add_argument("--groups-per-class", type=int, default=40)
    p.add_argument("--d-emb", type=int, default=16)
    p.add_argument("--d-raw", type=int, default=None)
    p.add_argument("--centroid-scale", type=float, default=2.0)
    p.add_argument("--noise-levels", type=_comma_floats, default=(0.1, 2.0))
    p.add_argument("--corruption-prob", type=float, default=0.4)

    p = command("score", "score every element of a labeled corpus")
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--output", required=True, help="score CSV to write")

    p = command("distill", "train the score regressor")
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--scores", required=True, help="score CSV with targets")
    p.add_argument("--model", required=True, help="model file to write")
    p.add_argument("--report", help="optional per-epoch loss CSV")
    p.add_argument("--hidden", type=_comma_ints, default=(32, 16),
                   help="hidden layer widths, e.g. 32,16")
    p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--init-scale", type=float, default=1.0)
    p.add_argument("--holdout", type=float, default=0.0,
                   help="fraction of elements excluded from training")

    p = command("aggregate", "pool element embeddings into group features")
    p.add_argument("--input", required=True, help="corpus file")
    p.add_argument("--output", required=True, help="group CSV to write")
    p.add_argument("--model", help="model file (required except for average)")
    p.add_argument("--strategy", choices=STRATEGIES, default="ddl")
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--min-survivors", type=int, default=1)

    p = command("eval", "verification metrics for stored group features")
    p.add_argument("--input", required=True, help="group CSV")
    p.add_argument("--pairs", required=True, help="pair CSV")
    p.add_argument("--far-levels", type=_comma_floats, default=(1e-2, 1e-3))
    p.add_argument("--output", help="report CSV to write")
    p.add_argument("--roc", help="ROC points CSV to write")

    p = command("bench", "compare all pooling strategies on one corpus")
    p.add_argument("--input", required=True, help="labeled corpus file")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--min-survivors", type=int, default=1)
    p.add_argument("--far-levels", type=_comma_floats, default=(1e-2, 1e-3))
    p.add_argument("--output", help="comparison CSV to write")

    return parser, commands


# -- config files -------------------------------------------------------------


def _config_tokens(path: str, subparser: argparse.ArgumentParser,
                   stage: str) -> list[str]:
    """Turn a key=value file into CLI tokens for ``subparser``."""
    options = {
        opt: action
        for action in subparser._actions
        for opt in action.option_strings
    }
    tokens: list[str] = []
    with open(path, "r") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValidationError(
                    f"config {path}: line {line_no}: expected key=value"
                )
            flag = "--" + key.strip().replace("_", "-")
            if flag == "--config" or flag not in options:
                raise ValidationError(
                    f"config {path}: line {line_no}: unknown key "
                    f"{key.strip()!r} for command {stage!r}"
                )
            value = value.strip()
            action = options[flag]
            if isinstance(action, (argparse._StoreTrueAction,
                                   argparse._StoreFalseAction)):
                if value.lower() in ("1", "true", "yes"):
                    tokens.append(flag)
                elif value.lower() not in ("0", "false", "no"):
                    raise ValidationError(
                        f"config {path}: line {line_no}: {key.strip()!r} "
                        f"must be a boolean, got {value!r}"
                    )
            else:
                tokens.extend([flag, value])
    return tokens


# -- commands ------------------------------------------------------------------


def _load_labeled_corpus(path) -> Corpus:
    corpus = gio.load_corpus(path)
    if not corpus.is_labeled:
        raise ValidationError(f"{path}: corpus must be fully labeled")
    return corpus


def cmd_synth(args) -> int:
    config = SynthConfig(
        k_classes=args.k_classes,
        elements_per_class=args.elements_per_class,
        groups_per_class=args.groups_per_class,
        d_emb=args.d_emb,
        d_raw=args.d_raw,
        centroid_scale=args.centroid_scale,
        noise_levels=tuple(args.noise_levels),
        corruption_prob=args.corruption_prob,
        seed=args.seed,
    )
    corpus, truth = generate(config)
    gio.save_corpus(corpus, args.output, format=args.format)
    log.info("wrote corpus to %s", args.output)
    if args.ground_truth:
        gio.save_ground_truth(truth, args.ground_truth)
        log.info("wrote ground truth to %s", args.ground_truth)
    print(f"synth: {corpus.size} elements, {corpus.k_classes} classes, "
          f"{len(corpus.groups())} groups -> {args.output}")
    return 0


def cmd_score(args) -> int:
    corpus = _load_labeled_corpus(args.input)
    records = score_corpus(corpus)
    gio.save_scores(records, args.output)
    scores = np.array([r.d_score for r in records])
    print(f"score: {len(records)} elements, mean d_score "
          f"{scores.mean():.6f} -> {args.output}")
    return 0


def cmd_distill(args) -> int:
    corpus = gio.load_corpus(args.input)
    records = gio.load_scores(args.scores)
    targets_by_id = {r.element_id: r.d_score for r in records}
    missing = [e for e in corpus.element_ids if e not in targets_by_id]
    if missing:
        raise ValidationError(
            f"{args.scores}: no score for element {missing[0]!r} "
            f"({len(missing)} missing in total)"
        )
    y = np.array([targets_by_id[e] for e in corpus.element_ids])
    X = corpus.raw_inputs

    if not 0.0 <= args.holdout < 1.0:
        raise ValidationError("holdout must lie in [0, 1)")
    holdout_idx = np.array([], dtype=np.int64)
    train_idx = np.arange(corpus.size)
    if args.holdout > 0.0:
        perm = np.random.default_rng(args.seed).permutation(corpus.size)
        n_hold = int(round(args.holdout * corpus.size))
        holdout_idx, train_idx = perm[:n_hold], perm[n_hold:]
        if train_idx.size == 0:
            raise ValidationError("holdout leaves no training elements")

    model = DiscriminabilityRegressor(
        hidden_layer_sizes=tuple(args.hidden),
        activation=args.activation,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
        init_scale=args.init_scale,
    )
    model.fit(X[train_idx], y[train_idx])
    save_model(model, args.model)
    log.info("wrote model to %s", args.model)
    if args.report:
        gio.write_table_csv(
            args.report, ["epoch", "mean_loss"],
            [{"epoch": i + 1, "mean_loss": loss}
             for i, loss in enumerate(model.loss_curve_)],
        )
    summary = (f"distill: {train_idx.size} train elements, "
               f"{model.n_steps_} steps, final loss {model.final_loss_:.6e}")
    if holdout_idx.size:
        from .distill import mse_loss
        held = mse_loss(model.predict(X[holdout_idx]), y[holdout_idx])
        summary += f", holdout loss {held:.6e} ({holdout_idx.size} elements)"
    print(summary + f" -> {args.model}")
    return 0


def cmd_aggregate(args) -> int:
    corpus = gio.load_corpus(args.input)
    policy = AggregationPolicy(
        strategy=args.strategy,
        threshold=args.threshold,
        min_survivors=args.min_survivors,
    )
    model = None
    if args.model:
        model = load_model(args.model)
    elif policy.strategy != "average":
        raise ValidationError(
            f"strategy {policy.strategy!r} requires --model"
        )
    reps = represent_corpus(corpus, model, policy)
    gio.save_groups(reps, args.output)
    used = sum(r.used_count for r in reps)
    total = sum(r.total_count for r in reps)
    print(f"aggregate: {len(reps)} groups, used {used}/{total} elements "
          f"({policy.strategy}, t={policy.threshold:g}) -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    groups = gio.load_groups(args.input)
    pairs = gio.load_pairs(args.pairs)
    features = {g.group_id: g.feature for g in groups}
    from .metrics import pair_scores
    genuine, impostor = pair_scores(features, pairs)
    if genuine.size == 0 or impostor.size == 0:
        raise ValidationError(
            "pairs must include at least one genuine and one impostor pair"
        )
    points = tar_at_far(genuine, impostor, args.far_levels)
    accuracy, threshold = verification_accuracy(genuine, impostor)

    print(f"eval: {genuine.size} genuine / {impostor.size} impostor pairs")
    print(f"  accuracy {accuracy:.4f} at threshold {threshold:.6f}")
    for far in sorted(points):
        p = points[far]
        note = "" if p.reachable else "  (target below 1/impostors)"
        print(f"  tar@far<={far:g}: {p.tar:.4f} at threshold "
              f"{p.threshold:.6f}, achieved far {p.far:.2e}{note}")

    if args.output:
        row = {
            "genuine": genuine.size, "impostor": impostor.size,
            "accuracy": accuracy, "threshold": threshold,
        }
        for far in sorted(points):
            row[f"tar_at_far_{far:g}"] = points[far].tar
        gio.write_table_csv(args.output, list(row), [row])
    if args.roc:
        roc = roc_points(genuine, impostor)
        gio.write_table_csv(
            args.roc, ["far", "tar"],
            [{"far": float(a), "tar": float(b)} for a, b in roc],
        )
    return 0


def cmd_bench(args) -> int:
    corpus = _load_labeled_corpus(args.input)
    model = load_model(args.model)
    protocol = protocol_from_labels(
        corpus.group_labels(), far_levels=args.far_levels
    )
    policies = [
        AggregationPolicy(strategy=s, threshold=args.threshold,
                          min_survivors=args.min_survivors)
        for s in ("average", "top1", "ddl_no_rescale", "ddl")
    ]
    comparisons = compare_strategies(corpus, model, policies, protocol)
    print(format_comparison(comparisons))
    if args.output:
        rows = comparison_rows(comparisons)
        gio.write_table_csv(args.output, list(rows[0]), rows)
        log.info("wrote comparison to %s", args.output)
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "score": cmd_score,
    "distill": cmd_distill,
    "aggregate": cmd_aggregate,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def _setup_logging() -> None:
    name = os.environ.get("DDL_LOG", "").strip().upper()
    level = getattr(logging, name, None) if name else logging.WARNING
    if not isinstance(level, int):
        level = logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    parser, commands = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    stage = args.command
    try:
        if getattr(args, "config", None):
            tokens = _config_tokens(args.config, commands[stage], stage)
            at = argv.index(stage) + 1
            args = parser.parse_args(argv[:at] + tokens + argv[at:])
        return _COMMANDS[stage](args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (GroupDistillError, OSError, ValueError) as exc:
        print(f"{stage}: {exc}", file=sys.stderr)
        log.debug("stage %s failed", stage, exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
