"""Command-line entry point: ``tifeed <subcommand> ...``.

Every subcommand reads its inputs from files and writes its outputs to files.
Each output embeds the tool version and the hash of the resolved run
configuration, so two runs can be matched to the settings that made them.
Exit codes: 0 success, 1 runtime error (message on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .charstats import (
    feed_summary,
    ioc_flow,
    pairwise_overlap,
    write_feed_summary_csv,
    write_flow_csv,
    write_overlap_csv,
)
from .classifiers import save_model, train
from .errors import ConfigError, IoFailure, TiFeedError, UnlabeledEvent
from .features import FeatureKind, embed_corpus, write_vectors_jsonl
from .harness import (
    ClassifierConfig,
    ExperimentConfig,
    FeatureConfig,
    config_hash,
    feature_ablation,
    make_featurizer,
    classifier_params,
    run_experiment,
    tool_header,
)
from .ingest import load_corpus
from .labeler import (
    MiningParams,
    RuleSet,
    attach_labels,
    label_corpus,
    mine_rules,
    read_labels_csv,
    write_labels_csv,
)
from .textprep import Source, build_docs
from .ti2vec import EmbeddingModel, Hyper, train_ti2vec

# keys of a config file that describe the run rather than the experiment
RUN_KEYS = ("input", "labels", "out")

_FC = FeatureConfig()
_CC = ClassifierConfig()
_MP = MiningParams()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _add_common(p: argparse.ArgumentParser, out_help: str) -> None:
    p.add_argument("--input", help="corpus directory of MISP event JSON files")
    p.add_argument("--out", help=out_help)
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--strict", action="store_true", help="fail on the first malformed event file")


def _add_embedding(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--dim", type=int, help=f"embedding dimension (default {_FC.dim})")
    p.add_argument("--epochs", type=int, help=f"training epochs (default {_FC.epochs})")
    p.add_argument("--infer-steps", type=int,
                   help=f"inference steps for unseen documents (default {_FC.infer_steps})")
    p.add_argument("--nondeterministic-embed", type=int, metavar="N",
                   help="train embeddings with N lock-free workers (results are not reproducible)")


def _add_experiment(p: argparse.ArgumentParser) -> None:
    _add_embedding(p)
    p.add_argument("--labels", help="event_id,label CSV")
    p.add_argument("--mode", choices=["equal", "aggregate"], help="training window (default equal)")
    p.add_argument("--omit-feed", help="feed held out of training and used alone for testing")
    p.add_argument("--classifier", choices=["gnb", "cart", "adaboost"],
                   help=f"classifier (default {_CC.kind})")
    p.add_argument("--features", choices=[k.value for k in FeatureKind],
                   help=f"feature set (default {_FC.kind})")
    p.add_argument("--vectors", help="external 768-dim vectors, JSON lines")
    p.add_argument("--max-depth", type=int,
                   help="tree depth (default 4 with embeddings, 10 with bag-of-words)")
    p.add_argument("--rounds", type=int, help=f"boosting rounds (default {_CC.rounds})")
    p.add_argument("--top-k", type=int, help=f"bag-of-words columns kept (default {_FC.top_k})")
    p.add_argument("--workers", type=int, help="parallel splits (default 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tifeed", description="Threat-intelligence feed characterization "
                     "and exploitation classification.")
    parser.add_argument("--version", action="version", version=f"tifeed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("characterize", help="feed statistics, overlap and IoC flow")
    _add_common(p, "output directory")

    p = sub.add_parser("mine-rules", help="mine tag rules from manually labeled events")
    _add_common(p, "rules file (JSON lines)")
    p.add_argument("--labels", help="manual event_id,label CSV")
    p.add_argument("--min-support", type=float, help=f"default {_MP.min_support}")
    p.add_argument("--min-confidence", type=float, help=f"default {_MP.min_confidence}")
    p.add_argument("--min-lift", type=float, help=f"default {_MP.min_lift}")
    p.add_argument("--max-antecedent", type=int, help=f"default {_MP.max_antecedent}")

    p = sub.add_parser("label", help="label a corpus from manual labels plus mined rules")
    _add_common(p, "labels CSV")
    p.add_argument("--labels", help="manual event_id,label CSV")
    p.add_argument("--rules", help="rules file from mine-rules")

    p = sub.add_parser("prep", help="tokenized documents, one JSON line per event")
    _add_common(p, "documents file (JSON lines)")
    p.add_argument("--category", help="keep only IoCs of this category")

    p = sub.add_parser("train-embed", help="train a TI2Vec model on the corpus")
    _add_common(p, "model file (.json or .npz)")
    _add_embedding(p)

    p = sub.add_parser("embed", help="per-event vectors from a trained TI2Vec model")
    _add_common(p, "vectors CSV")
    p.add_argument("--model", help="model file from train-embed")
    p.add_argument("--infer-steps", type=int, help="inference steps (default: the model's)")

    p = sub.add_parser("export-vectors", help="per-event vectors as JSON lines for plotting")
    _add_common(p, "vectors file (JSON lines)")
    p.add_argument("--model", help="model file from train-embed")
    p.add_argument("--infer-steps", type=int, help="inference steps (default: the model's)")

    p = sub.add_parser("train", help="fit features and a classifier on the whole corpus")
    _add_common(p, "classifier file (JSON)")
    _add_experiment(p)

    p = sub.add_parser("eval", help="temporal or temporal+spatial evaluation")
    _add_common(p, "output directory")
    _add_experiment(p)

    p = sub.add_parser("ablate", help="evaluation on text from one IoC category")
    _add_common(p, "output directory")
    _add_experiment(p)
    p.add_argument("--category", help="IoC category to keep")
    p.add_argument("--keep-info", action="store_true", help="also keep the event description")
    return parser


# -- configuration -------------------------------------------------------------

def _read_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return d


def _flag(args, name):
    return getattr(args, name, None)


def resolve_run(args) -> tuple[dict, ExperimentConfig]:
    """Merge config file and flags into (run settings, experiment config)."""
    raw = _read_config(args.config)
    run = {k: raw.pop(k, None) for k in RUN_KEYS}
    for k in RUN_KEYS:
        if _flag(args, k) is not None:
            run[k] = _flag(args, k)

    features = dict(raw.pop("features", {}))
    classifier = dict(raw.pop("classifier", {}))
    overrides = {"dim": "dim", "epochs": "epochs", "infer_steps": "infer_steps",
                 "features": "kind", "vectors": "vectors", "top_k": "top_k",
                 "nondeterministic_embed": "nondeterministic_workers"}
    for flag, key in overrides.items():
        if _flag(args, flag) is not None:
            features[key] = _flag(args, flag)
    for flag, key in {"classifier": "kind", "max_depth": "max_depth", "rounds": "rounds"}.items():
        if _flag(args, flag) is not None:
            classifier[key] = _flag(args, flag)
    for flag in ("seed", "mode", "omit_feed", "workers", "category"):
        if _flag(args, flag) is not None:
            raw[flag] = _flag(args, flag)
    raw["features"] = features
    raw["classifier"] = classifier
    return run, ExperimentConfig.from_dict(raw)


def _require(run: dict, key: str, what: str) -> str:
    if not run.get(key):
        raise ConfigError(f"missing {what} (--{key} or \"{key}\" in the config)")
    return run[key]


def _header(digest: str, config: Optional[dict] = None) -> list[str]:
    lines = tool_header(digest)
    if config is not None:
        lines.append("config=" + json.dumps(config, sort_keys=True))
    return lines


def _meta_line(digest: str, config: dict) -> str:
    return json.dumps({"meta": {"tool": f"tifeed {__version__}", "config_sha256": digest,
                                "config": config}}, sort_keys=True) + "\n"


def _load(run: dict, strict: bool):
    corpus = load_corpus(_require(run, "input", "corpus directory"), strict=strict)
    for f in corpus.failures:
        print(f"warning: skipped {f.path}: {f.reason}", file=sys.stderr)
    return corpus


def _labels(run: dict) -> dict:
    path = _require(run, "labels", "labels file")
    if not Path(path).is_file():
        raise IoFailure(f"labels file not found: {path}")
    return read_labels_csv(path)


def _out_dir(run: dict) -> Path:
    out = Path(_require(run, "out", "output directory"))
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- subcommands -------------------------------------------------------------

def cmd_characterize(args) -> None:
    run, _ = resolve_run(args)
    corpus = _load(run, args.strict)
    out = _out_dir(run)
    digest = config_hash({"command": "characterize"})
    header = _header(digest)
    write_feed_summary_csv(feed_summary(corpus), out / "feed_summary.csv", header)
    write_overlap_csv(pairwise_overlap(corpus), out / "overlap.csv", header)
    flow = ioc_flow(corpus)
    write_flow_csv(flow, out / "flow.csv", header)
    with open(out / "flow_simultaneous.csv", "w", encoding="utf-8") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write("feed_a,feed_b,count\n")
        for (a, b), c in flow.simultaneous.items():
            fh.write(f"{a},{b},{c}\n")


def _mining_params(args) -> MiningParams:
    d = {}
    for name in ("min_support", "min_confidence", "min_lift", "max_antecedent"):
        if _flag(args, name) is not None:
            d[name] = _flag(args, name)
    return replace(MiningParams(), **d)


def cmd_mine_rules(args) -> None:
    run, _ = resolve_run(args)
    corpus = _load(run, args.strict)
    manual = _labels(run)
    params = _mining_params(args)
    labeled = attach_labels(corpus, manual)
    rules = mine_rules([e for e in labeled.events if e.label is not None], params)
    cfg = {"command": "mine-rules", "mining": params.__dict__}
    digest = config_hash(cfg)
    Path(_require(run, "out", "output file")).write_text(
        _meta_line(digest, cfg) + rules.to_jsonl(), encoding="utf-8")
    print(f"{len(rules)} rules", file=sys.stderr)


def cmd_label(args) -> None:
    run, _ = resolve_run(args)
    corpus = _load(run, args.strict)
    manual = _labels(run) if run.get("labels") else {}
    rules_path = _require({"rules": args.rules}, "rules", "rules file")
    try:
        rules = RuleSet.from_jsonl(Path(rules_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read rules {rules_path}: {exc.strerror or exc}") from exc
    labeled, report = label_corpus(corpus, manual, rules)
    digest = config_hash({"command": "label", "rules": rules.to_jsonl()})
    out = _require(run, "out", "output file")
    write_labels_csv({e.event_id: e.label for e in labeled.events}, out, _header(digest))
    counts = ", ".join(f"{k}={v}" for k, v in report.counts.items())
    print(f"labeled {report.total} events: {counts}", file=sys.stderr)


def cmd_prep(args) -> None:
    run, config = resolve_run(args)
    corpus = _load(run, args.strict)
    docs = build_docs(corpus, sources=[Source(s) for s in config.sources],
                      category_filter=config.category)
    cfg = {"command": "prep", "sources": list(config.sources), "category": config.category}
    digest = config_hash(cfg)
    with open(_require(run, "out", "output file"), "w", encoding="utf-8") as fh:
        fh.write(_meta_line(digest, cfg))
        for d in docs:
            fh.write(json.dumps({"event_id": d.event_id, "tokens": list(d.tokens)}) + "\n")


def _hyper(config: ExperimentConfig) -> Hyper:
    fc = config.features
    return Hyper(dim=fc.dim, epochs=fc.epochs, initial_lr=fc.initial_lr, negative_k=fc.negative_k,
                 min_count=fc.min_count, seed=config.seed, infer_steps=fc.infer_steps)


def cmd_train_embed(args) -> None:
    run, config = resolve_run(args)
    corpus = _load(run, args.strict)
    docs = build_docs(corpus, sources=[Source(s) for s in config.sources])
    hyper = _hyper(config)
    model = train_ti2vec(docs, hyper, config.features.nondeterministic_workers)
    cfg = {"command": "train-embed", "hyper": hyper.__dict__, "sources": list(config.sources),
           "nondeterministic_workers": config.features.nondeterministic_workers}
    digest = config_hash(cfg)
    model.save(_require(run, "out", "output file"),
               extra={"tool": f"tifeed {__version__}", "config_sha256": digest})


def _embedded(args):
    run, _ = resolve_run(args)
    corpus = _load(run, args.strict)
    model_path = _require({"model": args.model}, "model", "model file")
    try:
        model = EmbeddingModel.load(model_path)
    except OSError as exc:
        raise IoFailure(f"cannot read model {model_path}: {exc.strerror or exc}") from exc
    docs = build_docs(corpus)
    matrix = embed_corpus(model, docs, args.infer_steps)
    cfg = {"command": "embed", "model_hyper": model.hyper.__dict__, "infer_steps": args.infer_steps}
    return run, matrix, config_hash(cfg), cfg


def cmd_embed(args) -> None:
    run, matrix, digest, _ = _embedded(args)
    matrix.to_csv(_require(run, "out", "output file"), _header(digest))


def cmd_export_vectors(args) -> None:
    run, matrix, digest, cfg = _embedded(args)
    out = _require(run, "out", "output file")
    write_vectors_jsonl(matrix, out)
    body = Path(out).read_text(encoding="utf-8")
    Path(out).write_text(_meta_line(digest, cfg) + body, encoding="utf-8")


def cmd_train(args) -> None:
    run, config = resolve_run(args)
    corpus = _load(run, args.strict)
    if run.get("labels"):
        corpus = attach_labels(corpus, _labels(run))
    missing = [e.event_id for e in corpus.events if e.label is None]
    if missing:
        raise UnlabeledEvent(f"{len(missing)} events have no label, e.g. {missing[0]!r}")
    docs = build_docs(corpus, sources=[Source(s) for s in config.sources],
                      category_filter=config.category)
    featurizer = make_featurizer(config).fit(docs)
    X = featurizer.transform(docs).rows
    y = np.array([e.label.as_int() for e in corpus.events], dtype=np.int64)
    model = train(config.classifier.kind, X, y, **classifier_params(config))
    save_model(model, _require(run, "out", "output file"),
               extra={"tool": f"tifeed {__version__}", "config_sha256": config.digest(),
                      "config": config.to_dict()})


def _write_report(run: dict, config: ExperimentConfig, report) -> None:
    out = _out_dir(run)
    digest = config.digest()
    (out / "report.csv").write_text(report.to_csv(_header(digest, config.to_dict())), encoding="utf-8")
    (out / "report.json").write_text(
        report.to_json({"tool": f"tifeed {__version__}", "config_sha256": digest}) + "\n",
        encoding="utf-8")
    avg = "NaN" if report.avg_f1 is None else f"{report.avg_f1:.4f}"
    print(f"average F1 {avg}", file=sys.stderr)


def cmd_eval(args) -> None:
    run, config = resolve_run(args)
    corpus = _load(run, args.strict)
    labels = _labels(run)
    _write_report(run, config, run_experiment(corpus, config, labels))


def cmd_ablate(args) -> None:
    run, config = resolve_run(args)
    if not config.category:
        raise ConfigError("ablate needs --category")
    corpus = _load(run, args.strict)
    labels = _labels(run)
    report = feature_ablation(corpus, config, config.category, labels, keep_info=args.keep_info)
    sources = config.sources if args.keep_info else tuple(
        s for s in config.sources if s != Source.INFO.value)
    _write_report(run, replace(config, sources=sources), report)


COMMANDS = {
    "characterize": cmd_characterize,
    "mine-rules": cmd_mine_rules,
    "label": cmd_label,
    "prep": cmd_prep,
    "train-embed": cmd_train_embed,
    "embed": cmd_embed,
    "export-vectors": cmd_export_vectors,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def execute(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except (TiFeedError, OSError, ValueError, KeyError) as exc:
        print(f"tifeed {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # last resort: report, do not crash with a traceback
        print(f"tifeed {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()
