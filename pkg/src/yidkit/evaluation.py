"""Cross-validation folds, tagging metrics, and experiment reports.

All reported scores are percentages (0..100).

Fold plan: sentences from each source document are shuffled with a seeded
RNG and dealt round-robin into 20 buckets, so every bucket mirrors the
source mix.  Fold f (of 10) tests on bucket 2f, validates on the next
bucket 2f+1, and trains on the remaining 18, giving a 90/5/5 token split;
the 10 test sets are pairwise disjoint, and the test and validation buckets
together cover every sentence exactly once.
"""

from __future__ import annotations

import json
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import crf as crf_mod
from .crf import LengthMismatch

N_BUCKETS = 20
N_FOLDS = 10


class EvaluationError(ValueError):
    pass


class InsufficientData(EvaluationError):
    pass


# -- fold plan -----------------------------------------------------------


@dataclass
class FoldSplit:
    fold: int
    train: list[int]
    validation: list[int]
    test: list[int]


@dataclass
class FoldPlan:
    folds: list[FoldSplit]
    source_of: dict[int, str]
    seed: int


def assign_buckets(sources: list[str], seed: int = 0) -> np.ndarray:
    """Bucket id per sentence: per-source seeded shuffle, then round-robin."""
    rng = np.random.default_rng(seed)
    buckets = np.empty(len(sources), dtype=np.int64)
    by_source: dict[str, list[int]] = defaultdict(list)
    for i, src in enumerate(sources):
        by_source[src].append(i)
    for src in sorted(by_source):
        idx = np.array(by_source[src], dtype=np.int64)
        rng.shuffle(idx)
        for pos, sent in enumerate(idx):
            buckets[sent] = pos % N_BUCKETS
    return buckets


def make_folds(sentences, sources: list[str], seed: int = 0) -> FoldPlan:
    """The 10 train/validation/test splits; deterministic under seed."""
    if sentences is not None and len(sentences) != len(sources):
        raise LengthMismatch("one source label per sentence is required")
    if not sources:
        raise InsufficientData("no sentences to split")
    per_source = Counter(sources)
    for src, count in sorted(per_source.items()):
        if count < 10:
            raise InsufficientData(f"source {src!r} has {count} sentences; at least 10 needed")
    buckets = assign_buckets(sources, seed=seed)
    folds = []
    for f in range(N_FOLDS):
        test_b, val_b = 2 * f, 2 * f + 1
        test = [i for i in range(len(sources)) if buckets[i] == test_b]
        val = [i for i in range(len(sources)) if buckets[i] == val_b]
        train = [i for i in range(len(sources)) if buckets[i] not in (test_b, val_b)]
        folds.append(FoldSplit(f, train, val, test))
    return FoldPlan(folds, dict(enumerate(sources)), seed)


def fold_shares(plan: FoldPlan, sentences) -> list[dict[str, float]]:
    """Per-fold train/validation/test token shares, as percentages."""
    lengths = [len(s) for s in sentences]
    total = sum(lengths)
    shares = []
    for split in plan.folds:
        row = {}
        for section, idx in (("train", split.train), ("validation", split.validation),
                             ("test", split.test)):
            row[section] = 100.0 * sum(lengths[i] for i in idx) / total
        shares.append(row)
    return shares


def section_source_mix(plan: FoldPlan, sentences, indices: list[int]) -> dict[str, float]:
    """Token share per source within one section, as percentages."""
    lengths = [len(s) for s in sentences]
    total = sum(lengths[i] for i in indices)
    mix: dict[str, float] = defaultdict(float)
    for i in indices:
        mix[plan.source_of[i]] += lengths[i]
    return {src: 100.0 * tok / total for src, tok in mix.items()}


# -- metrics -------------------------------------------------------------


def token_accuracy(gold: list[list[str]], pred: list[list[str]]) -> float:
    """Percentage of tokens whose predicted tag matches gold exactly."""
    if len(gold) != len(pred):
        raise LengthMismatch("gold and predicted sentence counts differ")
    correct = total = 0
    for g, p in zip(gold, pred):
        if len(g) != len(p):
            raise LengthMismatch("gold and predicted sentence lengths differ")
        correct += sum(1 for a, b in zip(g, p) if a == b)
        total += len(g)
    if total == 0:
        raise EvaluationError("no tokens to score")
    return 100.0 * correct / total


@dataclass
class TagScore:
    tag: str
    gold_count: int
    pred_count: int
    correct: int

    @property
    def precision(self) -> float | None:
        return 100.0 * self.correct / self.pred_count if self.pred_count else None

    @property
    def recall(self) -> float | None:
        return 100.0 * self.correct / self.gold_count if self.gold_count else None

    @property
    def f1(self) -> float | None:
        p, r = self.precision, self.recall
        if p is None or r is None or p + r == 0:
            return None
        return 2 * p * r / (p + r)


def per_tag_f1(gold: list[list[str]], pred: list[list[str]],
               tagset=None) -> dict[str, TagScore]:
    """Per-tag precision/recall/F1 (percentages); undefined ratios stay None."""
    if len(gold) != len(pred):
        raise LengthMismatch("gold and predicted sentence counts differ")
    gold_c: Counter = Counter()
    pred_c: Counter = Counter()
    correct: Counter = Counter()
    for g, p in zip(gold, pred):
        if len(g) != len(p):
            raise LengthMismatch("gold and predicted sentence lengths differ")
        for a, b in zip(g, p):
            gold_c[a] += 1
            pred_c[b] += 1
            if a == b:
                correct[a] += 1
    tags = set(gold_c) | set(pred_c)
    if tagset is not None:
        tags |= set(tagset)
    return {t: TagScore(t, gold_c[t], pred_c[t], correct[t]) for t in sorted(tags)}


def micro_f1(scores: dict[str, TagScore]) -> float:
    """Micro-averaged F1 (percent); with one label per token this is accuracy."""
    correct = sum(s.correct for s in scores.values())
    gold = sum(s.gold_count for s in scores.values())
    pred = sum(s.pred_count for s in scores.values())
    if gold == 0 or pred == 0:
        raise EvaluationError("no tokens to score")
    p = correct / pred
    r = correct / gold
    return 100.0 * (2 * p * r / (p + r)) if p + r else 0.0


def subset_accuracy(gold: list[list[str]], pred: list[list[str]], keep) -> float | None:
    """Accuracy (percent) over tokens whose gold tag passes the keep predicate."""
    correct = total = 0
    for g, p in zip(gold, pred):
        for a, b in zip(g, p):
            if not keep(a):
                continue
            total += 1
            correct += int(a == b)
    return 100.0 * correct / total if total else None


def mean_std(values) -> tuple[float, float | None]:
    """Sample mean and ddof=1 standard deviation (None for a single value)."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise EvaluationError("no values to aggregate")
    if arr.size == 1:
        return float(arr[0]), None
    return float(arr.mean()), float(arr.std(ddof=1))


def format_mean_std(values, digits: int = 2) -> str:
    """Render percentage scores as e.g. '98.26 (0.23)'; bare mean for one fold."""
    mean, std = mean_std(values)
    if std is None:
        return f"{mean:.{digits}f}"
    return f"{mean:.{digits}f} ({std:.{digits}f})"


# -- per-fold reports and aggregation -------------------------------------


DEFAULT_PUNCT_TAGS = frozenset({"PUNC"})


@dataclass
class FoldReport:
    fold: int
    accuracy: float
    no_punc_accuracy: float | None
    tilde_accuracy: float | None
    tag_scores: dict[str, TagScore]
    val_accuracy: float | None = None


def fold_report(fold: int, gold: list[list[str]], pred: list[list[str]],
                punct_tags: frozenset[str] = DEFAULT_PUNCT_TAGS,
                val_accuracy: float | None = None) -> FoldReport:
    return FoldReport(
        fold=fold,
        accuracy=token_accuracy(gold, pred),
        no_punc_accuracy=subset_accuracy(gold, pred, lambda t: t not in punct_tags),
        tilde_accuracy=subset_accuracy(gold, pred, lambda t: "~" in t),
        tag_scores=per_tag_f1(gold, pred),
        val_accuracy=val_accuracy,
    )


@dataclass
class MetricsReport:
    """Aggregated rows: subgroup accuracies first, then per-tag F1 by mean count."""
    rows: list[dict] = field(default_factory=list)
    n_folds: int = 0

    def render_tsv(self) -> str:
        lines = ["row\tmean_count\tscore"]
        for row in self.rows:
            count = "" if row["mean_count"] is None else f"{row['mean_count']:.1f}"
            lines.append(f"{row['label']}\t{count}\t{row['score']}")
        return "\n".join(lines) + "\n"


def aggregate_folds(reports: list[FoldReport], max_tags: int | None = None) -> MetricsReport:
    """Cross-fold mean (std) table: Total, no-PUNC, multi-tag rows, then per-tag
    F1 ordered by descending mean gold count.  Tags absent from a fold's gold
    are averaged over the folds where they occur."""
    if not reports:
        raise EvaluationError("no fold reports to aggregate")
    out = MetricsReport(n_folds=len(reports))

    def add_row(label, values, mean_count=None):
        vals = [v for v in values if v is not None]
        if vals:
            out.rows.append({"label": label, "mean_count": mean_count,
                             "score": format_mean_std(vals),
                             "mean": mean_std(vals)[0], "std": mean_std(vals)[1]})

    add_row("TOTAL", [r.accuracy for r in reports])
    add_row("NO-PUNC", [r.no_punc_accuracy for r in reports])
    add_row("MULTI-TAG", [r.tilde_accuracy for r in reports])

    per_tag_counts: dict[str, list[int]] = defaultdict(list)
    per_tag_f1s: dict[str, list[float]] = defaultdict(list)
    for r in reports:
        for t, sc in r.tag_scores.items():
            if sc.gold_count == 0:
                continue
            per_tag_counts[t].append(sc.gold_count)
            if sc.f1 is not None:
                per_tag_f1s[t].append(sc.f1)
    order = sorted(per_tag_counts,
                   key=lambda t: (-(sum(per_tag_counts[t]) / len(per_tag_counts[t])), t))
    if max_tags is not None:
        order = order[:max_tags]
    for t in order:
        mean_count = sum(per_tag_counts[t]) / len(per_tag_counts[t])
        f1s = per_tag_f1s.get(t)
        if f1s:
            add_row(t, f1s, mean_count=mean_count)
        else:
            out.rows.append({"label": t, "mean_count": mean_count, "score": "-",
                             "mean": None, "std": None})
    return out


@dataclass
class FoldResult:
    fold: int
    val_accuracy: float
    test_accuracy: float
    gold: list[list[str]] = field(default_factory=list)
    pred: list[list[str]] = field(default_factory=list)


def config_matrix(results: dict[str, list[FoldResult]]) -> str:
    """One row per configuration: validation and test accuracy as mean (std)."""
    lines = ["configuration\tvalidation\ttest"]
    for name in sorted(results):
        rows = results[name]
        val = format_mean_std([r.val_accuracy for r in rows])
        test = format_mean_std([r.test_accuracy for r in rows])
        lines.append(f"{name}\t{val}\t{test}")
    return "\n".join(lines) + "\n"


# -- experiments -----------------------------------------------------------


def _build_model_and_instances(config: dict, corpus, train_idx, val_idx, test_idx,
                               tags: list[str], seed: int):
    kind = config.get("kind", "trainable-lookup")
    hidden = int(config.get("hidden", 0))
    token_sents = [c[0] for c in corpus]
    tag_sents = [c[1] for c in corpus]
    if kind == "trainable-lookup":
        vocab = crf_mod.build_lookup_vocab([token_sents[i] for i in train_idx])
        model = crf_mod.CrfModel.create(tags, int(config.get("dim", 16)), hidden=hidden,
                                        lookup_vocab=vocab, seed=seed)
        provider = None
    elif kind == "static-table":
        table = config["table"]
        model = crf_mod.CrfModel.create(tags, table.dim, hidden=hidden, seed=seed)
        provider = crf_mod.StaticProvider(table)
    else:
        raise EvaluationError(f"unknown embedding configuration kind {kind!r}")

    def insts(indices):
        return crf_mod.make_instances(model,
                                      [token_sents[i] for i in indices],
                                      [tag_sents[i] for i in indices],
                                      provider)

    return model, provider, insts(train_idx), insts(val_idx), insts(test_idx)


def _run_fold(name: str, config: dict, training_config, corpus, split: FoldSplit,
              tags: list[str], out_dir, inventory_checksum: str) -> FoldResult:
    model, provider, train_i, val_i, test_i = _build_model_and_instances(
        config, corpus, split.train, split.validation, split.test, tags,
        seed=training_config.seed + split.fold)
    history = crf_mod.train(model, train_i, val_i, training_config)
    gold = [[tags[i] for i in inst.tag_ids] for inst in test_i]
    pred = crf_mod.predict(model, test_i)
    val_gold = [[tags[i] for i in inst.tag_ids] for inst in val_i]
    val_pred = crf_mod.predict(model, val_i)
    result = FoldResult(split.fold, token_accuracy(val_gold, val_pred),
                        token_accuracy(gold, pred), gold, pred)
    if out_dir is not None:
        fold_dir = os.path.join(out_dir, name)
        os.makedirs(fold_dir, exist_ok=True)
        source = {k: v for k, v in config.items() if k != "table"}
        source["kind"] = config.get("kind", "trainable-lookup")
        crf_mod.save_model(model, os.path.join(fold_dir, f"fold{split.fold}.bin"),
                           source, inventory_checksum)
        with open(os.path.join(fold_dir, f"fold{split.fold}_history.tsv"),
                  "w", encoding="utf-8") as fh:
            fh.write("epoch\ttrain_nll\tval_accuracy\tlearning_rate\n")
            for row in history.rows:
                fh.write(f"{row['epoch']}\t{row['train_nll']:.8f}\t"
                         f"{row['val_accuracy']:.6f}\t{row['learning_rate']:.8e}\n")
    return result


def run_experiment(corpus, embedding_configs: dict, training_config,
                   seed: int = 0, out_dir=None, jobs: int = 1,
                   inventory_checksum: str = "",
                   punct_tags: frozenset[str] = DEFAULT_PUNCT_TAGS):
    """Train and score every embedding configuration over the 10 folds.

    corpus: list of (tokens, tags, source) triples.  Returns {config name:
    [FoldResult per fold]}.  When out_dir is set, writes per-fold models and
    histories, the configuration matrix, breakdown tables, and a manifest.
    """
    if not embedding_configs:
        raise EvaluationError("at least one embedding configuration is required")
    plan = make_folds([c[0] for c in corpus], [c[2] for c in corpus], seed=seed)
    tags = sorted({t for _, ts, _ in corpus for t in ts})
    work = [(name, split) for name in sorted(embedding_configs) for split in plan.folds]
    results: dict[str, list[FoldResult]] = {name: [] for name in sorted(embedding_configs)}
    if jobs > 1:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_fold, name, embedding_configs[name],
                                   training_config, corpus, split, tags, out_dir,
                                   inventory_checksum)
                       for name, split in work]
            for (name, _split), fut in zip(work, futures):
                results[name].append(fut.result())
    else:
        for name, split in work:
            results[name].append(_run_fold(name, embedding_configs[name],
                                           training_config, corpus, split, tags,
                                           out_dir, inventory_checksum))
    for rows in results.values():
        rows.sort(key=lambda r: r.fold)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "config_matrix.tsv"), "w", encoding="utf-8") as fh:
            fh.write(config_matrix(results))
        for name, rows in results.items():
            reports = [fold_report(r.fold, r.gold, r.pred, punct_tags) for r in rows]
            with open(os.path.join(out_dir, f"{name}_breakdown.tsv"), "w",
                      encoding="utf-8") as fh:
                fh.write(aggregate_folds(reports).render_tsv())
        manifest = {
            "seed": seed,
            "n_sentences": len(corpus),
            "training": _plain(vars(training_config)),
            "configs": {k: _plain({kk: vv for kk, vv in v.items() if kk != "table"})
                        for k, v in embedding_configs.items()},
            "inventory_checksum": inventory_checksum,
            "scores": {
                name: [{"fold": r.fold, "validation": r.val_accuracy,
                        "test": r.test_accuracy} for r in rows]
                for name, rows in results.items()
            },
        }
        with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, ensure_ascii=False, indent=2)
            fh.write("\n")
        from . import plots
        plots.plot_fold_accuracy(results, os.path.join(out_dir, "fold_accuracy.png"))
    return results


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj
