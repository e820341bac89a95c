"""Corpus pipeline: ingestion, tokenization, segmentation, frequencies, QA.

All functions operate on ASCII-notation ScriptText (see inventory module).
Corpus files carry one source line per text line with a page/line locator,
so every token stays traceable to its origin.
"""

from __future__ import annotations

import concurrent.futures
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .editdist import edit_distance
from .inventory import CharInventory, DecodeError, ScriptText, UnknownCharacter, normalize_unicode

# Punctuation detached into standalone tokens.  Apostrophes and hyphens are
# deliberately absent: they are word-internal in Yiddish orthography.
DEFAULT_SPLIT_PUNCT = frozenset('.,?!:;"()')
SENTENCE_TERMINATORS = frozenset({".", "?", "!"})

_LOCATOR_RE = re.compile(r"^p(\d+)\.l(\d+)$")


class CorpusFormatError(ValueError):
    def __init__(self, message: str, doc_id: str = "", lineno: int | None = None):
        self.doc_id = doc_id
        self.lineno = lineno
        where = f"{doc_id or '<input>'}" + (f":{lineno}" if lineno is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class CorpusLine:
    doc_id: str
    page: int
    line: int
    text: ScriptText

    @property
    def locator(self) -> str:
        return f"p{self.page}.l{self.line}"


@dataclass
class Sentence:
    tokens: list[str]
    lines: list[CorpusLine] = field(default_factory=list)


def load_split_punct() -> frozenset[str]:
    """Tokenizer punctuation set from the packaged config file."""
    text = resources.files("yidkit.data").joinpath("tokenize_punct.tsv").read_text("utf-8")
    marks = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    return frozenset(marks) if marks else DEFAULT_SPLIT_PUNCT


def tokenize(line: ScriptText, punct: frozenset[str] = DEFAULT_SPLIT_PUNCT) -> list[str]:
    """Split a line into tokens, detaching punctuation marks.

    Runs of two or more periods stay together as one ellipsis token.
    Idempotent over its own output: tokenize(" ".join(toks)) == toks.
    """
    tokens: list[str] = []
    for chunk in line.split():
        buf = []
        i = 0
        while i < len(chunk):
            ch = chunk[i]
            if ch in punct:
                if ch == "." and i + 1 < len(chunk) and chunk[i + 1] == ".":
                    j = i
                    while j < len(chunk) and chunk[j] == ".":
                        j += 1
                    if buf:
                        tokens.append("".join(buf))
                        buf = []
                    tokens.append(chunk[i:j])
                    i = j
                    continue
                if buf:
                    tokens.append("".join(buf))
                    buf = []
                tokens.append(ch)
            else:
                buf.append(ch)
            i += 1
        if buf:
            tokens.append("".join(buf))
    return tokens


def segment_sentences(lines: list[CorpusLine], punct: frozenset[str] = DEFAULT_SPLIT_PUNCT) -> list[Sentence]:
    """Group line tokens into sentences ending after ./?/! tokens.

    Ellipsis tokens do not terminate.  Trailing material forms a final
    sentence, and each sentence records the source lines it draws from.
    """
    sentences: list[Sentence] = []
    cur = Sentence([])
    for ln in lines:
        for tok in tokenize(ln.text, punct):
            cur.tokens.append(tok)
            if not cur.lines or cur.lines[-1] is not ln:
                cur.lines.append(ln)
            if tok in SENTENCE_TERMINATORS:
                sentences.append(cur)
                cur = Sentence([])
    if cur.tokens:
        sentences.append(cur)
    return sentences


# -- corpus files --------------------------------------------------------


def read_corpus(path, inventory: CharInventory, doc_id: str | None = None,
                lossy: bool = False, log=None) -> list[CorpusLine]:
    """Read one corpus file into ASCII-notation lines.

    The first line must declare the encoding (#enc=unicode or #enc=ascii).
    Unicode input is normalized and encoded; undecodable lines raise, or are
    dropped with a log message under lossy=True.
    """
    import os

    if doc_id is None:
        doc_id = os.path.splitext(os.path.basename(str(path)))[0]
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()
    if not raw_lines or not raw_lines[0].startswith("#enc="):
        raise CorpusFormatError("missing #enc=unicode|ascii header", doc_id, 1)
    enc = raw_lines[0][5:].strip()
    if enc not in ("unicode", "ascii"):
        raise CorpusFormatError(f"unknown encoding {enc!r}", doc_id, 1)
    out: list[CorpusLine] = []
    for lineno, raw in enumerate(raw_lines[1:], start=2):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("\t", 1)
        if len(parts) != 2 or not (m := _LOCATOR_RE.match(parts[0])):
            if lossy:
                if log:
                    log(f"{doc_id}:{lineno}: dropped malformed line")
                continue
            raise CorpusFormatError("expected 'p<page>.l<line>\\ttext'", doc_id, lineno)
        page, line_no = int(m.group(1)), int(m.group(2))
        text = parts[1]
        try:
            if enc == "unicode":
                text = inventory.encode(normalize_unicode(text))
            else:
                inventory.symbols(text)  # validation only
        except (UnknownCharacter, DecodeError) as exc:
            if lossy:
                if log:
                    log(f"{doc_id}:{lineno} ({parts[0]}): dropped: {exc}")
                continue
            raise CorpusFormatError(str(exc), doc_id, lineno) from exc
        out.append(CorpusLine(doc_id, page, line_no, text))
    return out


# -- frequency tables ----------------------------------------------------


class FrequencyTable:
    """Token counts with a deterministic iteration order."""

    def __init__(self, counts: dict[str, int] | None = None):
        self.counts: Counter[str] = Counter(counts or {})

    @classmethod
    def from_tokens(cls, tokens) -> "FrequencyTable":
        t = cls()
        t.counts.update(tokens)
        return t

    @classmethod
    def from_sentences(cls, sentences: list[Sentence]) -> "FrequencyTable":
        t = cls()
        for s in sentences:
            t.counts.update(s.tokens)
        return t

    def merge(self, other: "FrequencyTable") -> "FrequencyTable":
        merged = FrequencyTable(self.counts)
        merged.counts.update(other.counts)
        return merged

    def __getitem__(self, token: str) -> int:
        return self.counts.get(token, 0)

    def __contains__(self, token: str) -> bool:
        return token in self.counts

    @property
    def total_tokens(self) -> int:
        return sum(self.counts.values())

    @property
    def distinct_tokens(self) -> int:
        return len(self.counts)

    def items_sorted(self) -> list[tuple[str, int]]:
        """Descending count, ties broken lexicographically."""
        return sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))

    def write(self, path) -> None:
        if hasattr(path, "write"):
            for token, count in self.items_sorted():
                path.write(f"{token}\t{count}\n")
            return
        with open(path, "w", encoding="utf-8") as fh:
            for token, count in self.items_sorted():
                fh.write(f"{token}\t{count}\n")

    @classmethod
    def read(cls, path) -> "FrequencyTable":
        counts: dict[str, int] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise CorpusFormatError("expected 'token\\tcount'", str(path), lineno)
                counts[fields[0]] = counts.get(fields[0], 0) + int(fields[1])
        return cls(counts)


def map_documents(fn, docs: dict[str, object], jobs: int = 1) -> dict[str, object]:
    """Apply fn per document; results merged in sorted doc order for determinism."""
    keys = sorted(docs)
    if jobs <= 1:
        return {k: fn(docs[k]) for k in keys}
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(fn, [docs[k] for k in keys]))
    return dict(zip(keys, results))


# -- quality heuristics ---------------------------------------------------


@dataclass
class QAReport:
    final_form_hits: list[tuple[str, int, list[tuple[int, str]]]]
    final_form_singleton_share: float
    apostrophe_hits: list[tuple[str, str, str, int, int]]
    pointed_docs: list[tuple[str, float]]
    low_freq_hits: list[tuple[str, int, str, int]]
    params: dict

    def render_text(self) -> str:
        lines = ["== medial final forms =="]
        if self.final_form_hits:
            for token, count, violations in self.final_form_hits:
                spots = ", ".join(f"{name}@{off}" for off, name in violations)
                lines.append(f"{token}\tcount={count}\t{spots}")
            lines.append(f"share occurring once: {self.final_form_singleton_share:.3f}")
        else:
            lines.append("(none)")
        lines.append("")
        lines.append("== apostrophe read as comma ==")
        if self.apostrophe_hits:
            for left, right, fused, fused_count, triple_count in self.apostrophe_hits:
                lines.append(f"{left} , {right}\t-> {fused}\tattested={fused_count}\toccurrences={triple_count}")
        else:
            lines.append("(none)")
        lines.append("")
        lines.append("== pointed documents ==")
        if self.pointed_docs:
            for doc_id, rate in self.pointed_docs:
                lines.append(f"{doc_id}\tdiacritic rate={rate:.3f}")
        else:
            lines.append("(none)")
        lines.append("")
        lines.append("== low-frequency lookalikes ==")
        if self.low_freq_hits:
            for token, count, neighbor, ncount in self.low_freq_hits:
                lines.append(f"{token}\tcount={count}\tnear {neighbor}\tcount={ncount}")
        else:
            lines.append("(none)")
        return "\n".join(lines) + "\n"


def _letterish(inventory: CharInventory, token: str) -> bool:
    try:
        syms = inventory.symbols(token)
    except DecodeError:
        return False
    return any(inventory.by_ascii[s].cls in ("base-letter", "final-form", "diacritic-composed")
               for s in syms)


def qa_report(docs: dict[str, list[CorpusLine]], inventory: CharInventory,
              min_fused_count: int = 20, low_count: int = 5, high_count: int = 100,
              pointed_threshold: float = 0.35,
              punct: frozenset[str] = DEFAULT_SPLIT_PUNCT) -> QAReport:
    """Run the four corpus-quality checks over a set of documents.

    (a) final-form letters in medial position, (b) apostrophes OCR'd as
    ' , ' sequences, (c) documents with an unusually high share of
    diacritic-composed letters (pointed text), (d) rare tokens one edit away
    from a frequent token.
    """
    doc_tokens = {doc_id: [tok for ln in lines for tok in tokenize(ln.text, punct)]
                  for doc_id, lines in docs.items()}
    freq = FrequencyTable()
    for doc_id in sorted(doc_tokens):
        freq.counts.update(doc_tokens[doc_id])

    final_hits = []
    for token, count in freq.items_sorted():
        violations = inventory.find_medial_final_forms(token)
        if violations:
            final_hits.append((token, count, violations))
    singletons = sum(1 for _, count, _ in final_hits if count == 1)
    singleton_share = singletons / len(final_hits) if final_hits else 0.0

    triples: Counter[tuple[str, str]] = Counter()
    for doc_id in sorted(doc_tokens):
        toks = doc_tokens[doc_id]
        for i in range(len(toks) - 2):
            if toks[i + 1] == "," and toks[i] not in punct and toks[i + 2] not in punct:
                triples[(toks[i], toks[i + 2])] += 1
    apostrophe_hits = []
    for (left, right), n in sorted(triples.items(), key=lambda kv: (-kv[1], kv[0])):
        fused = f"{left}'{right}"
        if freq[fused] >= min_fused_count:
            apostrophe_hits.append((left, right, fused, freq[fused], n))

    pointed = []
    for doc_id in sorted(docs):
        counts: Counter[str] = Counter()
        for ln in docs[doc_id]:
            counts.update(inventory.letter_classes(ln.text))
        letters = counts["base-letter"] + counts["final-form"] + counts["diacritic-composed"]
        rate = counts["diacritic-composed"] / letters if letters else 0.0
        if rate > pointed_threshold:
            pointed.append((doc_id, rate))

    suspects = [(t, c) for t, c in freq.items_sorted()
                if c <= low_count and _letterish(inventory, t)]
    anchors = [(t, c) for t, c in freq.items_sorted()
               if c >= high_count and _letterish(inventory, t)]
    anchor_syms = [(t, c, inventory.symbols(t)) for t, c in anchors]
    low_hits = []
    for token, count in suspects:
        syms = inventory.symbols(token)
        for anchor, acount, asyms in anchor_syms:
            if anchor == token:
                continue
            if edit_distance(syms, asyms, limit=1) <= 1:
                low_hits.append((token, count, anchor, acount))
                break

    return QAReport(
        final_form_hits=final_hits,
        final_form_singleton_share=singleton_share,
        apostrophe_hits=apostrophe_hits,
        pointed_docs=pointed,
        low_freq_hits=low_hits,
        params={
            "min_fused_count": min_fused_count,
            "low_count": low_count,
            "high_count": high_count,
            "pointed_threshold": pointed_threshold,
        },
    )
