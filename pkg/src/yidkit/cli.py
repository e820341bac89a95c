"""Command-line interface.

Data goes to stdout (or the requested output files); logs go to stderr.
Exit codes: 0 on success, 1 on data errors, 2 on usage errors.  A --config
file holds flat key=value pairs matching long option names; values given on
the command line win over the file.
"""

from __future__ import annotations

import argparse
import functools
import json
import logging
import os
import sys

import numpy as np

from . import align as align_mod
from . import crf as crf_mod
from . import embeddings as emb_mod
from . import evaluation as eval_mod
from . import plots
from . import romanizer as rom_mod
from . import textpipe
from . import treebank as tb_mod
from .inventory import CharInventory, InventoryError, normalize_unicode

log = logging.getLogger("yidkit")


def _read_text(path: str | None) -> str:
    if path is None or path == "-":
        return sys.stdin.read()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _out_handle(path: str | None):
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8")


def _parse_config_value(raw: str):
    low = raw.strip()
    if low.lower() in ("true", "false"):
        return low.lower() == "true"
    for cast in (int, float):
        try:
            return cast(low)
        except ValueError:
            pass
    return low


def load_config_file(path: str) -> dict:
    """Flat key=value pairs; '#' starts a comment; keys use option spelling."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = _parse_config_value(val)
    return out


def _read_corpus_files(paths: list[str], inv: CharInventory, lossy: bool) -> dict[str, list]:
    docs = {}
    for path in paths:
        doc_id = os.path.splitext(os.path.basename(path))[0]
        docs[doc_id] = textpipe.read_corpus(path, inv, doc_id=doc_id, lossy=lossy,
                                            log=log.info if lossy else None)
    return docs


def _read_token_sentences(path: str | None) -> list[list[str]]:
    """One sentence per line, tokens whitespace-separated; blank lines skipped."""
    sents = []
    for line in _read_text(path).splitlines():
        toks = line.split()
        if toks:
            sents.append(toks)
    return sents


def _tagged_to_lists(sentences) -> tuple[list[list[str]], list[list[str]]]:
    toks = [[t.word for t in sent] for sent in sentences]
    tags = [[t.tag for t in sent] for sent in sentences]
    return toks, tags


def _embedding_provider(args, model: crf_mod.CrfModel | None = None):
    """Resolve the embedding source flags into a provider (None for lookup models)."""
    if model is not None and model.lookup_vocab is not None:
        return None
    if getattr(args, "vectors", None):
        table = emb_mod.EmbeddingTable.load(args.vectors, oov_policy=args.oov_policy)
        return crf_mod.StaticProvider(table)
    if getattr(args, "token_vectors", None):
        return crf_mod.TokenFileProvider(crf_mod.read_token_vectors(args.token_vectors))
    raise ValueError("an embedding source is required: --vectors or --token-vectors")


# -- subcommand implementations ----------------------------------------------


def cmd_normalize(args, inv):
    out = _out_handle(args.output)
    out.write(normalize_unicode(_read_text(args.file)))


def cmd_to_ascii(args, inv):
    out = _out_handle(args.output)
    for line in _read_text(args.file).splitlines():
        out.write(inv.encode(normalize_unicode(line)) + "\n")


def cmd_to_unicode(args, inv):
    out = _out_handle(args.output)
    for line in _read_text(args.file).splitlines():
        out.write(inv.decode(line) + "\n")


def cmd_tokenize(args, inv):
    punct = textpipe.load_split_punct()
    out = _out_handle(args.output)
    for line in _read_text(args.file).splitlines():
        text = inv.encode(normalize_unicode(line)) if args.unicode else line
        out.write(" ".join(textpipe.tokenize(text, punct)) + "\n")


def cmd_segment(args, inv):
    punct = textpipe.load_split_punct()
    docs = _read_corpus_files(args.files, inv, args.lossy)
    out = _out_handle(args.output)
    for doc_id in sorted(docs):
        for sent in textpipe.segment_sentences(docs[doc_id], punct):
            locs = ",".join(line.locator for line in sent.lines)
            out.write(" ".join(sent.tokens) + "\t" + f"{doc_id}:{locs}" + "\n")


def _count_doc_tokens(lines, punct):
    return textpipe.FrequencyTable.from_sentences(
        textpipe.segment_sentences(lines, punct))


def cmd_freq(args, inv):
    punct = textpipe.load_split_punct()
    docs = _read_corpus_files(args.files, inv, args.lossy)
    count_doc = functools.partial(_count_doc_tokens, punct=punct)
    tables = textpipe.map_documents(count_doc, docs, jobs=args.jobs)
    merged = textpipe.FrequencyTable()
    for key in sorted(tables):
        merged = merged.merge(tables[key])
    out = _out_handle(args.output)
    merged.write(out)


def cmd_qa(args, inv):
    docs = _read_corpus_files(args.files, inv, args.lossy)
    report = textpipe.qa_report(
        docs, inv,
        min_fused_count=args.min_fused_count,
        low_count=args.low_count,
        high_count=args.high_count,
        pointed_threshold=args.pointed_threshold,
    )
    out = _out_handle(args.output)
    out.write(report.render_text())


def cmd_convert(args, inv):
    det = rom_mod.Detransliterator(inventory=inv)
    out = _out_handle(args.output)
    failures = 0
    for lineno, raw in enumerate(_read_text(args.file).splitlines(), start=1):
        if not raw.strip():
            continue
        word, _, pos = raw.partition("\t")
        try:
            res = det.detransliterate(word.strip(), pos.strip())
        except rom_mod.RomanizerError as exc:
            failures += 1
            log.warning("line %d: %s", lineno, exc)
            if not args.lossy:
                raise
            continue
        script = inv.decode(res.script) if args.unicode else res.script
        out.write(f"{word.strip()}\t{pos.strip()}\t{script}\t{res.route}\n")
        for warning in res.warnings:
            log.info("line %d: %s", lineno, warning)
    if failures:
        log.warning("%d words failed to convert", failures)


def cmd_prep_treebank(args, inv):
    det = rom_mod.Detransliterator(inventory=inv)
    registry = tb_mod.TagSetRegistry.load_default() if args.check_tags else None
    trees = []
    for path in args.files:
        trees.extend(tb_mod.parse_trees(_read_text(path)))
    drop = frozenset(t for t in (args.drop_tags or "").split(",") if t)
    sentences = tb_mod.prepare_corpus(trees, det, registry=registry,
                                      strict=not args.lenient, log=log.warning,
                                      drop_tags=drop)
    out = _out_handle(args.output)
    tb_mod.write_tagged(out, sentences)
    log.info("prepared %d sentences, %d tokens", len(sentences),
             sum(len(s) for s in sentences))


def cmd_train_embed(args, inv):
    punct = textpipe.load_split_punct()
    docs = _read_corpus_files(args.files, inv, args.lossy)
    sentences = []
    for doc_id in sorted(docs):
        sentences.extend(s.tokens for s in textpipe.segment_sentences(docs[doc_id], punct))
    counts = emb_mod.count_cooccurrences(sentences, window=args.window,
                                         min_count=args.min_count)
    log.info("vocabulary %d, co-occurrence pairs %d", len(counts.vocab), len(counts.pairs))
    table, history = emb_mod.train_embeddings(
        counts, dim=args.dim, iterations=args.iterations, x_max=args.x_max,
        learning_rate=args.learning_rate, seed=args.seed)
    table.save(args.output)
    stem = os.path.splitext(args.output)[0]
    with open(stem + "_loss.tsv", "w", encoding="utf-8") as fh:
        fh.write("iteration\tloss\n")
        for i, loss in enumerate(history, start=1):
            fh.write(f"{i}\t{loss:.10e}\n")
    plots.plot_embedding_loss(history, stem + "_loss.png")
    log.info("final loss %.6e", history[-1])


def cmd_neighbors(args, inv):
    table = emb_mod.EmbeddingTable.load(args.vectors)
    freq = None
    if args.freq:
        freq = textpipe.FrequencyTable.read(args.freq)
    out = _out_handle(args.output)
    out.write("token\tcosine\tcount\n")
    for token, cos, count in emb_mod.nearest_neighbors(table, args.query, k=args.k,
                                                       freq=freq):
        out.write(f"{token}\t{cos:.6f}\t{'' if count is None else count}\n")


def cmd_variants(args, inv):
    table = emb_mod.EmbeddingTable.load(args.vectors)
    freq = textpipe.FrequencyTable.read(args.freq) if args.freq else None
    pairs = emb_mod.variant_candidates(table, inv, freq=freq,
                                       min_cosine=args.min_cosine,
                                       max_edit=args.max_edit)
    out = _out_handle(args.output)
    out.write("token_a\ttoken_b\tcosine\tdistance\tkind\tdetail\n")
    for p in pairs:
        out.write(f"{p.token_a}\t{p.token_b}\t{p.cosine:.6f}\t{p.distance}\t{p.kind}\t{p.detail}\n")


def _training_config(args) -> crf_mod.TrainingConfig:
    return crf_mod.TrainingConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        warmup_fraction=args.warmup_fraction,
        optimizer=args.optimizer,
        weight_decay=args.weight_decay,
        seed=args.seed,
    )


def cmd_train_tagger(args, inv):
    train_sents = tb_mod.read_tagged(args.train)
    val_sents = tb_mod.read_tagged(args.val)
    train_toks, train_tags = _tagged_to_lists(train_sents)
    val_toks, val_tags = _tagged_to_lists(val_sents)
    tags = sorted({t for sent in train_tags + val_tags for t in sent})

    lookup_vocab = None
    dim = args.dim
    source: dict[str, object]
    if args.trainable:
        lookup_vocab = crf_mod.build_lookup_vocab(train_toks)
        source = {"kind": "trainable-lookup", "vocab_size": len(lookup_vocab)}
    elif args.vectors:
        table = emb_mod.EmbeddingTable.load(args.vectors, oov_policy=args.oov_policy)
        dim = table.dim
        source = {"kind": "static-table", "path": os.path.basename(args.vectors),
                  "oov_policy": args.oov_policy}
    elif args.token_vectors and args.val_token_vectors:
        source = {"kind": "token-file"}
    else:
        raise ValueError("an embedding source is required: "
                         "--vectors, --trainable, or --token-vectors with --val-token-vectors")

    model = crf_mod.CrfModel.create(tags, dim, hidden=args.hidden,
                                    lookup_vocab=lookup_vocab, seed=args.seed)
    if args.trainable:
        train_insts = crf_mod.make_instances(model, train_toks, train_tags)
        val_insts = crf_mod.make_instances(model, val_toks, val_tags)
    elif args.vectors:
        provider = crf_mod.StaticProvider(table)
        train_insts = crf_mod.make_instances(model, train_toks, train_tags, provider)
        val_insts = crf_mod.make_instances(model, val_toks, val_tags, provider)
    else:
        tprov = crf_mod.TokenFileProvider(crf_mod.read_token_vectors(args.token_vectors))
        vprov = crf_mod.TokenFileProvider(crf_mod.read_token_vectors(args.val_token_vectors))
        dim = tprov.blocks[0][1].shape[1]
        model = crf_mod.CrfModel.create(tags, dim, hidden=args.hidden, seed=args.seed)
        train_insts = crf_mod.make_instances(model, train_toks, train_tags, tprov)
        val_insts = crf_mod.make_instances(model, val_toks, val_tags, vprov)

    history = crf_mod.train(model, train_insts, val_insts, _training_config(args))
    crf_mod.save_model(model, args.output, source, inv.checksum)
    stem = os.path.splitext(args.output)[0]
    with open(stem + "_history.tsv", "w", encoding="utf-8") as fh:
        fh.write("epoch\ttrain_nll\tval_accuracy\tlearning_rate\n")
        for row in history.rows:
            fh.write(f"{row['epoch']}\t{row['train_nll']:.8f}\t"
                     f"{row['val_accuracy']:.6f}\t{row['learning_rate']:.8e}\n")
    if history.rows:
        plots.plot_training_history(history.rows, stem + "_history.png")
    log.info("best epoch %d, validation accuracy %.4f",
             history.best_epoch, history.best_val_accuracy)


def cmd_tag(args, inv):
    expected = None if args.no_checksum else inv.checksum
    model, _header = crf_mod.load_model(args.model, inventory_checksum=expected)
    sents = _read_token_sentences(args.file)
    provider = _embedding_provider(args, model)
    out = _out_handle(args.output)
    tb_mod.write_tagged(out, crf_mod.tag(model, sents, provider))


def cmd_make_folds(args, inv):
    sources = [line.strip() for line in _read_text(args.file).splitlines() if line.strip()]
    buckets = eval_mod.assign_buckets(sources, seed=args.seed)
    out = _out_handle(args.output)
    out.write("sentence\tsource\tbucket\trole\n")
    for i, (src, bucket) in enumerate(zip(sources, buckets)):
        role = f"test@{bucket // 2}" if bucket % 2 == 0 else f"val@{bucket // 2}"
        out.write(f"{i}\t{src}\t{bucket}\t{role}\n")


def cmd_evaluate(args, inv):
    expected = None if args.no_checksum else inv.checksum
    model, _header = crf_mod.load_model(args.model, inventory_checksum=expected)
    test_sents = tb_mod.read_tagged(args.test)
    toks, gold = _tagged_to_lists(test_sents)
    provider = _embedding_provider(args, model)
    insts = crf_mod.make_instances(model, toks, provider=provider)
    pred = crf_mod.predict(model, insts)

    os.makedirs(args.out_dir, exist_ok=True)
    with open(os.path.join(args.out_dir, "predictions.tsv"), "w", encoding="utf-8") as fh:
        for i, sent in enumerate(toks):
            if i:
                fh.write("\n")
            for word, g, p in zip(sent, gold[i], pred[i]):
                fh.write(f"{word}\t{g}\t{p}\n")

    acc = eval_mod.token_accuracy(gold, pred)
    scores = eval_mod.per_tag_f1(gold, pred)
    with open(os.path.join(args.out_dir, "metrics.tsv"), "w", encoding="utf-8") as fh:
        fh.write(f"accuracy\t{acc:.4f}\n")
        fh.write(f"micro_f1\t{eval_mod.micro_f1(scores):.4f}\n")
        fh.write("tag\tgold\tpred\tcorrect\tprecision\trecall\tf1\n")
        for tag in sorted(scores, key=lambda t: (-scores[t].gold_count, t)):
            s = scores[tag]
            fmt = lambda v: "-" if v is None else f"{v:.4f}"
            fh.write(f"{tag}\t{s.gold_count}\t{s.pred_count}\t{s.correct}\t"
                     f"{fmt(s.precision)}\t{fmt(s.recall)}\t{fmt(s.f1)}\n")

    punct_tags = frozenset(t for t in args.punct_tags.split(",") if t)
    report = eval_mod.fold_report(0, gold, pred, punct_tags)
    with open(os.path.join(args.out_dir, "breakdown.tsv"), "w", encoding="utf-8") as fh:
        fh.write(eval_mod.aggregate_folds([report], max_tags=args.max_tags).render_tsv())
    plots.plot_tag_f1(scores, os.path.join(args.out_dir, "tag_f1.png"),
                      max_tags=args.max_tags or 30)
    print(f"accuracy\t{acc:.4f}")


def cmd_align(args, inv):
    a = _read_text(args.reference).split()
    b = _read_text(args.candidate).split()
    report = align_mod.smith_waterman(a, b, match=args.match, mismatch=args.mismatch,
                                      gap=args.gap, soft_threshold=args.soft_threshold)
    out = _out_handle(args.output)
    out.write(report.render_text())


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yidkit",
        description="Yiddish text toolkit: script conversion, corpus prep, "
                    "embeddings, CRF tagging, and quality reports.")
    parser.add_argument("--config", metavar="FILE",
                        help="key=value defaults; command-line flags win")
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(func=fn)
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")
        p.add_argument("--config", metavar="FILE", help=argparse.SUPPRESS)
        p.add_argument("--verbose", action="store_true", help=argparse.SUPPRESS)
        return p

    p = add("normalize", cmd_normalize, "canonicalize Yiddish script text")
    p.add_argument("file", nargs="?", help="input file (default stdin)")

    p = add("to-ascii", cmd_to_ascii, "Yiddish script to ASCII notation")
    p.add_argument("file", nargs="?")

    p = add("to-unicode", cmd_to_unicode, "ASCII notation to Yiddish script")
    p.add_argument("file", nargs="?")

    p = add("tokenize", cmd_tokenize, "split lines into tokens")
    p.add_argument("file", nargs="?")
    p.add_argument("--unicode", action="store_true",
                   help="input is Yiddish script rather than ASCII notation")

    p = add("segment", cmd_segment, "sentence-segment corpus files")
    p.add_argument("files", nargs="+")
    p.add_argument("--lossy", action="store_true", help="drop undecodable lines")

    p = add("freq", cmd_freq, "token frequency table over corpus files")
    p.add_argument("files", nargs="+")
    p.add_argument("--lossy", action="store_true")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker count")

    p = add("qa", cmd_qa, "corpus quality report")
    p.add_argument("files", nargs="+")
    p.add_argument("--lossy", action="store_true")
    p.add_argument("--min-fused-count", type=int, default=20)
    p.add_argument("--low-count", type=int, default=5)
    p.add_argument("--high-count", type=int, default=100)
    p.add_argument("--pointed-threshold", type=float, default=0.35)

    p = add("convert", cmd_convert, "romanized words to Yiddish script")
    p.add_argument("file", nargs="?", help="lines of word<TAB>pos (pos optional)")
    p.add_argument("--unicode", action="store_true", help="emit Yiddish script, not ASCII")
    p.add_argument("--lossy", action="store_true", help="skip unconvertible words")

    p = add("prep-treebank", cmd_prep_treebank, "parsed trees to tagged training TSV")
    p.add_argument("files", nargs="+")
    p.add_argument("--lenient", action="store_true", help="skip failing sentences")
    p.add_argument("--drop-tags", default="", help="comma-separated tags to drop")
    p.add_argument("--check-tags", action="store_true",
                   help="warn about tags missing from the packaged registry")

    p = add("train-embed", cmd_train_embed, "train word vectors on corpus files")
    p.add_argument("files", nargs="+")
    p.add_argument("--lossy", action="store_true")
    p.add_argument("--dim", type=int, default=300)
    p.add_argument("--window", type=int, default=10)
    p.add_argument("--min-count", type=int, default=5)
    p.add_argument("--iterations", type=int, default=25)
    p.add_argument("--x-max", type=float, default=10.0)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(output="vectors.txt")

    p = add("neighbors", cmd_neighbors, "nearest neighbors of a token")
    p.add_argument("query")
    p.add_argument("--vectors", required=True)
    p.add_argument("--freq", default=None, help="frequency TSV for count annotations")
    p.add_argument("-k", type=int, default=10)

    p = add("variants", cmd_variants, "spelling-variant and OCR-error candidates")
    p.add_argument("--vectors", required=True)
    p.add_argument("--freq", default=None)
    p.add_argument("--min-cosine", type=float, default=0.5)
    p.add_argument("--max-edit", type=int, default=2)

    p = add("train-tagger", cmd_train_tagger, "train the CRF tagger")
    p.add_argument("--train", required=True, help="tagged training TSV")
    p.add_argument("--val", required=True, help="tagged validation TSV")
    p.add_argument("--vectors", default=None, help="static vector table")
    p.add_argument("--oov-policy", choices=("mean-vector", "zero-vector"),
                   default="mean-vector")
    p.add_argument("--token-vectors", default=None, help="per-token vectors (training)")
    p.add_argument("--val-token-vectors", default=None, help="per-token vectors (validation)")
    p.add_argument("--trainable", action="store_true", help="trainable lookup embeddings")
    p.add_argument("--dim", type=int, default=300, help="dimension for trainable lookup")
    p.add_argument("--hidden", type=int, default=0,
                   help="bidirectional recurrent layer size (0 disables)")
    p.add_argument("--learning-rate", type=float, default=5e-5)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--warmup-fraction", type=float, default=0.1)
    p.add_argument("--optimizer", choices=("adaptive", "plain-sgd"), default="adaptive")
    p.add_argument("--weight-decay", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(output="model.bin")

    p = add("tag", cmd_tag, "tag sentences with a trained model")
    p.add_argument("file", nargs="?", help="one sentence per line, tokens space-separated")
    p.add_argument("--model", required=True)
    p.add_argument("--vectors", default=None)
    p.add_argument("--oov-policy", choices=("mean-vector", "zero-vector"),
                   default="mean-vector")
    p.add_argument("--token-vectors", default=None)
    p.add_argument("--no-checksum", action="store_true",
                   help="skip the inventory checksum comparison")

    p = add("make-folds", cmd_make_folds, "assign sentences to cross-validation folds")
    p.add_argument("file", nargs="?", help="one source label per sentence")
    p.add_argument("--seed", type=int, default=0)

    p = add("evaluate", cmd_evaluate, "score a model on a tagged test set")
    p.add_argument("--model", required=True)
    p.add_argument("--test", required=True, help="tagged test TSV")
    p.add_argument("--vectors", default=None)
    p.add_argument("--oov-policy", choices=("mean-vector", "zero-vector"),
                   default="mean-vector")
    p.add_argument("--token-vectors", default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--punct-tags", default="PUNC",
                   help="comma-separated tags counted as punctuation")
    p.add_argument("--max-tags", type=int, default=30)
    p.add_argument("--no-checksum", action="store_true")

    p = add("align", cmd_align, "align two token sequences")
    p.add_argument("reference")
    p.add_argument("candidate")
    p.add_argument("--match", type=float, default=2.0)
    p.add_argument("--mismatch", type=float, default=-1.0)
    p.add_argument("--gap", type=float, default=-1.0)
    p.add_argument("--soft-threshold", type=float, default=0.5)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()

    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            defaults = load_config_file(known.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        parser.set_defaults(**defaults)
        for action in parser._subparsers._group_actions:
            for sp in action.choices.values():
                sp.set_defaults(**defaults)

    args = parser.parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    try:
        inv = CharInventory.load_default()
        args.func(args, inv)
    except BrokenPipeError:
        return 0
    except (InventoryError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
