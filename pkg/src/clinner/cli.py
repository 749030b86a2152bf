"""Command-line entry point: ``clinner <command> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__

log = logging.getLogger("clinner")


def _types(value):
    return tuple(t.strip() for t in value.split(",") if t.strip())


def _policy(args):
    policy = args.policy
    if policy == "rand":
        policy = f"rand:{args.seed}"
    return policy


def _load_dictionary(args, types):
    from .gazetteer import build_matcher, filter_common_terms, load_frequency, load_stopwords, load_terms, \
        top_n_threshold
    stop = load_stopwords(args.stopwords) if args.stopwords else frozenset()
    terms = load_terms(args.dict, types=types, stopwords=stop)
    if args.freq:
        freq = load_frequency(args.freq)
        terms = filter_common_terms(terms, freq, top_n_threshold(freq, args.top_n))
    return build_matcher(terms)


def _features(args, config):
    from .sections import load_heading_lexicon
    from .tagger import FeatureSource
    matcher = lexicon = None
    if config.use_gazetteer_feature:
        if not args.dict:
            raise SystemExit("error: the model uses the gazetteer feature; pass --dict")
        matcher = _load_dictionary(args, config.entity_types)
    if config.use_section_feature:
        if not args.headings:
            raise SystemExit("error: the model uses the section feature; pass --headings")
        lexicon = load_heading_lexicon(args.headings)
    return FeatureSource(matcher, lexicon, _policy(args))


def _add_dict_args(p, required=False):
    p.add_argument("--dict", required=required, help="term TSV: term<TAB>type[<TAB>source]")
    p.add_argument("--stopwords", help="stopword list, one per line")
    p.add_argument("--freq", help="token<TAB>count frequency list; common unigram terms are dropped")
    p.add_argument("--top-n", type=int, default=10000, help="frequency rank that counts as common (default 10000)")
    p.add_argument("--policy", default="det", help="overlap resolution: det, rand or rand:<seed>")


# -- commands -------------------------------------------------------------------


def cmd_tokenize(args):
    from .text import DEFAULT_ABBREVIATIONS, RawDocument, load_abbreviations, tokenize_document
    from .corpus import read_text
    abbrev = load_abbreviations(args.abbrev) if args.abbrev else DEFAULT_ABBREVIATIONS
    tdoc = tokenize_document(RawDocument(Path(args.input).stem, read_text(args.input)), abbrev)
    out = []
    for i, sent in enumerate(tdoc.sentences):
        if i:
            out.append("")
        out.extend(f"{t.surface}\t{t.start}\t{t.end}\t{t.norm}" for t in sent)
    sys.stdout.write("\n".join(out) + ("\n" if out else ""))
    return 0


def cmd_dict_annotate(args):
    from .annotation import DEFAULT_TYPES
    from .corpus import read_corpus, write_annotations
    from .gazetteer import annotate
    types = _types(args.types) if args.types else DEFAULT_TYPES
    matcher = _load_dictionary(args, types)
    docs = read_corpus(args.input, types, with_annotations=False)
    policy = _policy(args)
    write_annotations(args.out_brat, {d.id: annotate(matcher, d.tdoc, policy) for d in docs})
    log.info("annotated %d documents into %s", len(docs), args.out_brat)
    return 0


def cmd_synth(args):
    from .synth import SynthSpec, generate_corpus
    spec = SynthSpec(
        n_docs=args.n_docs, sentences_per_doc=tuple(args.sentences), plant_rate=args.plant_rate,
        noise_rate=args.noise, dict_coverage=args.coverage, seed=args.seed,
    )
    corpus = generate_corpus(spec)
    corpus.write(args.out)
    print(f"wrote {len(corpus.docs)} documents, "
          f"{sum(len(d.mentions) for d in corpus.docs)} mentions, {len(corpus.dictionary)} dictionary terms "
          f"to {args.out}")
    return 0


def _tagger_config(args):
    from .tagger import TaggerConfig, load_config
    cfg = load_config(args.config) if args.config else TaggerConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "hybrid", False):
        overrides.update(use_gazetteer_feature=True, use_section_feature=True)
    return cfg.replace(**overrides) if overrides else cfg


def cmd_train(args):
    from .corpus import read_corpus
    from .tagger import TaggerConfig, TaggerSystem, load_embeddings, save
    if args.print_defaults:
        print(json.dumps(TaggerConfig().to_dict(), indent=2, sort_keys=True))
        return 0
    if not args.train or not args.out:
        raise SystemExit("error: --train and --out are required")
    cfg = _tagger_config(args)
    features = _features(args, cfg)
    train_docs = read_corpus(args.train, cfg.entity_types)
    dev_docs = read_corpus(args.dev, cfg.entity_types) if args.dev else None
    emb = load_embeddings(args.embeddings) if args.embeddings else None

    def progress(epoch, loss, f):
        log.info("epoch %d loss %.4f dev F %s", epoch, loss, "-" if f is None else f"{f:.4f}")

    system = TaggerSystem(cfg, features, emb).fit(train_docs, dev_docs, fixed_epochs=args.epochs,
                                                  progress=progress)
    save(system.model, args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(system.report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"best epoch {system.report.best_epoch}, dev F {system.report.best_dev_f:.4f}; model saved to {args.out}")
    return 0


def cmd_predict(args):
    from .corpus import read_corpus, write_annotations
    from .tagger import load, predict
    model = load(args.model)
    features = _features(args, model.config)
    docs = read_corpus(args.input, model.config.entity_types, with_annotations=False)
    out = {}
    for d in docs:
        gaz, sec = features.for_model(model, d.tdoc)
        out[d.id] = predict(model, d.tdoc, gaz, sec)
    write_annotations(args.out_brat, out)
    log.info("tagged %d documents into %s", len(docs), args.out_brat)
    return 0


def _score_dirs(a_dir, b_dir, types, fn):
    from .corpus import read_annotations
    texts = next((d for d in (a_dir, b_dir) if any(Path(d).glob("*.txt"))), None)
    if texts is None:
        raise FileNotFoundError(f"no .txt files in {a_dir} or {b_dir}")
    return fn(read_annotations(a_dir, texts, types), read_annotations(b_dir, texts, types), types)


def _print_report(report, json_path=None):
    from .evaluation import MICRO, MODES, METRICS, report_json
    types = list(report.types) + [MICRO]
    width = max(len(t) for t in types)
    header = "type".ljust(width) + "".join(f"  {m}-{x.upper()}".rjust(11) for m in MODES for x in METRICS)
    lines = [header]
    for t in types:
        cells = [f"{100 * getattr(report, x)(m, t):.1f}".rjust(11) for m in MODES for x in
                 ("f", "precision", "recall")]
        lines.append(t.ljust(width) + "".join(cells))
    print("\n".join(lines))
    if json_path:
        Path(json_path).write_text(report_json(report.to_dict()), encoding="utf-8")


def cmd_evaluate(args):
    from .annotation import DEFAULT_TYPES
    from .evaluation import evaluate
    types = _types(args.types) if args.types else DEFAULT_TYPES
    _print_report(_score_dirs(args.gold, args.pred, types, evaluate), args.json)
    return 0


def cmd_agree(args):
    from .annotation import DEFAULT_TYPES
    from .evaluation import agreement
    types = _types(args.types) if args.types else DEFAULT_TYPES
    _print_report(_score_dirs(args.a, args.b, types, agreement), args.json)
    return 0


def cmd_crossval(args):
    from .experiment import ExperimentConfig, run_experiment
    raw = {
        "corpus": args.corpus, "output": args.out, "systems": args.systems, "seeds": args.seeds,
        "folds": args.k, "fold_seed": args.seed, "policy": args.policy,
    }
    for key, value in (("dictionary", args.dict), ("stopwords", args.stopwords), ("frequency", args.freq),
                       ("headings", args.headings), ("types", args.types)):
        if value:
            raw[key] = value
    if args.config:
        from .tagger import read_flat_config
        raw["tagger"] = read_flat_config(args.config)
    report = run_experiment(ExperimentConfig.from_dict(raw))
    sys.stdout.write(report["table"])
    return 0


def cmd_search(args):
    from .corpus import read_corpus
    from .evaluation import fold_lists, stratified_folds
    from .tagger import random_search
    base = _tagger_config(args)
    space = json.loads(Path(args.space).read_text(encoding="utf-8"))
    docs = read_corpus(args.corpus, base.entity_types)
    folds = fold_lists(docs, stratified_folds(docs, args.k, args.seed), args.k)
    features = _features(args, base)
    best, trials = random_search(space, folds, args.budget, args.seed, base, features)
    result = {"best": best.to_dict(), "trials": trials}
    text = json.dumps(result, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return 0


def cmd_gradcheck(args):
    from .diagnostics import gradient_suite
    ok = True
    for name, err, tol, secs in gradient_suite(args.seed):
        passed = err < tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name:<10} max rel err {err:.3e} (tol {tol:.0e}, {secs:.2f}s)")
    return 0 if ok else 1


def cmd_experiment(args):
    from .experiment import load_experiment_config, run_experiment
    report = run_experiment(load_experiment_config(args.config), args.out)
    sys.stdout.write(report["table"])
    return 0


# -- parser -----------------------------------------------------------------------


def _version_text():
    from .tagger.persist import FORMAT_VERSION
    return (f"clinner {__version__}\n"
            f"model container format {FORMAT_VERSION}\n"
            "annotations: BRAT standoff (T lines); token tables: 4-column CoNLL TSV\n")


class _VersionAction(argparse.Action):
    def __init__(self, option_strings, dest=argparse.SUPPRESS, **kw):
        super().__init__(option_strings, dest, nargs=0, help="print package and file-format versions", **kw)

    def __call__(self, parser, namespace, values, option_string=None):
        sys.stdout.write(_version_text())
        parser.exit()


def build_parser():
    p = argparse.ArgumentParser(prog="clinner", description="Clinical named-entity recognition toolkit.")
    p.add_argument("--version", action=_VersionAction)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("tokenize", help="print tokens (surface, start, end, norm), blank line between sentences")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--abbrev", help="abbreviation list, one per line")
    s.set_defaults(fn=cmd_tokenize)

    s = sub.add_parser("dict-annotate", help="terminology annotation of a directory of .txt files")
    _add_dict_args(s, required=True)
    s.add_argument("--in", dest="input", required=True, help="directory of <id>.txt files")
    s.add_argument("--out-brat", required=True)
    s.add_argument("--types", help="comma-separated entity types")
    s.add_argument("--seed", type=int, default=0, help="seed for --policy rand")
    s.set_defaults(fn=cmd_dict_annotate)

    s = sub.add_parser("synth", help="write a seeded synthetic corpus with dictionary and heading lexicon")
    s.add_argument("--out", required=True)
    s.add_argument("--n-docs", type=int, default=50)
    s.add_argument("--sentences", type=int, nargs=2, default=(4, 10), metavar=("LO", "HI"))
    s.add_argument("--plant-rate", type=float, default=0.3)
    s.add_argument("--noise", type=float, default=0.0, help="fraction of mentions with noisy surfaces")
    s.add_argument("--coverage", type=float, default=1.0, help="fraction of entity vocabulary in the dictionary")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_synth)

    def tagger_args(s):
        s.add_argument("--config", help="tagger config (JSON or key=value)")
        s.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        s.add_argument("--hybrid", action="store_true", help="enable gazetteer and section features")
        s.add_argument("--headings", help="heading lexicon TSV: heading<TAB>class")
        _add_dict_args(s)

    s = sub.add_parser("train", help="train a tagger and save the model container")
    s.add_argument("--train")
    s.add_argument("--dev", help="dev corpus for early stopping (required unless --epochs)")
    s.add_argument("--out", help="model file")
    s.add_argument("--epochs", type=int, default=None, help="train exactly this many epochs")
    s.add_argument("--embeddings", help="word embedding text file")
    s.add_argument("--report", help="write the training report JSON here")
    s.add_argument("--print-defaults", action="store_true", help="print every tagger config default and exit")
    tagger_args(s)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("predict", help="tag a directory of .txt files with a saved model")
    s.add_argument("--model", required=True)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out-brat", required=True)
    s.add_argument("--headings")
    s.add_argument("--seed", type=int, default=0, help="seed for --policy rand")
    _add_dict_args(s)
    s.set_defaults(fn=cmd_predict)

    for name, fn, a, b, help_ in (("evaluate", cmd_evaluate, "--gold", "--pred", "score predictions"),
                                  ("agree", cmd_agree, "--a", "--b", "inter-annotator agreement")):
        s = sub.add_parser(name, help=f"{help_} (exact and partial P/R/F)")
        s.add_argument(a, required=True, help="directory of .ann files (texts beside them or in the other dir)")
        s.add_argument(b, required=True)
        s.add_argument("--types", help="comma-separated entity types")
        s.add_argument("--json", help="write the full report with counts here")
        s.set_defaults(fn=fn)

    s = sub.add_parser("crossval", help="stratified k-fold cross-validation over seeds")
    s.add_argument("--corpus", required=True)
    s.add_argument("--k", type=int, default=6)
    s.add_argument("--seeds", type=int, default=5, help="number of seeds (0..n-1)")
    s.add_argument("--systems", default="pure", help="comma-separated: terminology, pure, hybrid")
    s.add_argument("--out", default="crossval-out")
    s.add_argument("--config", help="tagger config (JSON or key=value)")
    s.add_argument("--headings")
    s.add_argument("--types", help="comma-separated entity types")
    s.add_argument("--seed", type=int, default=0, help="fold assignment seed")
    _add_dict_args(s)
    s.set_defaults(fn=cmd_crossval)

    s = sub.add_parser("search", help="seeded random hyperparameter search scored by cross-validated F")
    s.add_argument("--corpus", required=True)
    s.add_argument("--space", required=True, help="JSON object: field -> list of choices or {low, high, log}")
    s.add_argument("--budget", type=int, default=10)
    s.add_argument("--k", type=int, default=3)
    s.add_argument("--out", help="write best config and trial log here")
    tagger_args(s)
    s.set_defaults(fn=cmd_search)

    s = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("experiment", help="run a comparison experiment from a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", help="output directory (overrides the config)")
    s.set_defaults(fn=cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .annotation import ParseError
    from .tagger import ConfigError
    try:
        return args.fn(args)
    except (ConfigError, ParseError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
