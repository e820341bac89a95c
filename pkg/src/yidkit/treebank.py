"""Bracketed-tree parsing and token preparation for tagger training.

The treebank annotates romanized text.  Multiword tokens carry @ markers
(one orthographic word split over several leaves) and _ joins (several
orthographic words annotated as one leaf).  Preparation undoes both:
@-chains merge into one token whose tags join with ~, and _-joined words
split into parts tagged <tag>_S0.._S<m>.  Each prepared token is then
respelled and converted to script.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources

from .romanizer import Detransliterator, RomanizerError


class TreeParseError(ValueError):
    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class DanglingMarker(ValueError):
    def __init__(self, index: int, word: str):
        self.index = index
        self.word = word
        super().__init__(f"unmatched @ marker on leaf {index} ({word!r})")


class EmptySegment(ValueError):
    def __init__(self, index: int, word: str):
        self.index = index
        self.word = word
        super().__init__(f"empty _ segment in token {index} ({word!r})")


class PrepareError(ValueError):
    def __init__(self, sentence: int, detail: str):
        self.sentence = sentence
        super().__init__(f"sentence {sentence}: {detail}")


@dataclass
class Tree:
    label: str
    children: list["Tree"] = field(default_factory=list)
    token: str | None = None

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def render(self) -> str:
        """S-expression text; parse_trees(render()) reproduces the structure."""
        if self.is_leaf:
            return f"({self.label} {self.token})"
        return "(" + self.label + " " + " ".join(c.render() for c in self.children) + ")"


_TOKEN_RE = re.compile(r"[()]|[^\s()]+")


def parse_trees(text: str) -> list[Tree]:
    """Parse whitespace-separated s-expression trees.

    Leaf tokens are kept verbatim (@, _, $, + included).  A top-level node
    may be an anonymous wrapper "( (X ...) ...)" as treebank files are laid
    out; everywhere else a missing label is an error.
    """
    toks = [(m.start(), m.group()) for m in _TOKEN_RE.finditer(text)]
    pos = 0

    def parse_node(i: int, top_level: bool) -> tuple[Tree, int]:
        open_off = toks[i][0]
        i += 1
        if i >= len(toks):
            raise TreeParseError("unbalanced parentheses", open_off)
        off, tok = toks[i]
        if tok == "(":
            if not top_level:
                raise TreeParseError("empty label", open_off)
            label = ""
        elif tok == ")":
            raise TreeParseError("empty label", open_off)
        else:
            label = tok
            i += 1
        node = Tree(label)
        while True:
            if i >= len(toks):
                raise TreeParseError("unbalanced parentheses", open_off)
            off, tok = toks[i]
            if tok == ")":
                i += 1
                break
            if tok == "(":
                if node.token is not None:
                    raise TreeParseError("mixed token and subtree under one label", off)
                child, i = parse_node(i, top_level=False)
                node.children.append(child)
            else:
                if node.children or node.token is not None:
                    raise TreeParseError("mixed token and subtree under one label", off)
                node.token = tok
                i += 1
        if node.token is None and not node.children:
            raise TreeParseError("empty label", open_off)
        if node.label == "" and node.token is not None:
            raise TreeParseError("empty label", open_off)
        return node, i

    trees = []
    while pos < len(toks):
        off, tok = toks[pos]
        if tok != "(":
            raise TreeParseError("unbalanced parentheses" if tok == ")" else f"stray token {tok!r}", off)
        node, pos = parse_node(pos, top_level=True)
        trees.append(node)
    return trees


def extract_leaves(tree: Tree) -> list[tuple[str, str]]:
    """(tag, word) pairs in document order."""
    out: list[tuple[str, str]] = []

    def walk(node: Tree) -> None:
        if node.is_leaf:
            out.append((node.label, node.token))
        for child in node.children:
            walk(child)

    walk(tree)
    return out


def recombine_split_words(leaves: list[tuple[str, str]]) -> list[tuple[str, str]]:
    """Merge @-marked leaf chains into single tokens with ~-joined tags."""
    out: list[tuple[str, str]] = []
    i = 0
    while i < len(leaves):
        tag, word = leaves[i]
        if word.startswith("@"):
            raise DanglingMarker(i, word)
        if not word.endswith("@"):
            out.append((tag, word))
            i += 1
            continue
        tags, parts = [tag], [word[:-1]]
        i += 1
        while True:
            if i >= len(leaves) or not leaves[i][1].startswith("@"):
                raise DanglingMarker(i - 1, leaves[i - 1][1])
            ntag, nword = leaves[i]
            tags.append(ntag)
            core = nword[1:]
            i += 1
            if core.endswith("@"):
                parts.append(core[:-1])
            else:
                parts.append(core)
                break
        out.append(("~".join(tags), "".join(parts)))
    return out


def split_joined_words(tokens: list[tuple[str, str]]) -> list[tuple[str, str]]:
    """Split _-joined tokens into parts tagged <tag>_S0.._S<m>."""
    out: list[tuple[str, str]] = []
    for idx, (tag, word) in enumerate(tokens):
        if "_" not in word:
            out.append((tag, word))
            continue
        parts = word.split("_")
        if any(not p for p in parts):
            raise EmptySegment(idx, word)
        out.extend((f"{tag}_S{k}", part) for k, part in enumerate(parts))
    return out


class TagSetRegistry:
    """Known tags with their training-corpus counts."""

    def __init__(self, counts: dict[str, int]):
        self.counts = dict(counts)

    @classmethod
    def load_default(cls) -> "TagSetRegistry":
        text = resources.files("yidkit.data").joinpath("tagset.tsv").read_text("utf-8")
        counts = {}
        for raw in text.splitlines():
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            tag, count = line.split("\t")
            counts[tag] = int(count)
        return cls(counts)

    def __contains__(self, tag: str) -> bool:
        return tag in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def tags(self) -> list[str]:
        return sorted(self.counts)


@dataclass(frozen=True)
class TaggedToken:
    word: str  # script, ASCII notation
    tag: str
    route: str


def prepare_corpus(trees, det: Detransliterator, registry: TagSetRegistry | None = None,
                   strict: bool = True, log=None,
                   drop_tags: frozenset[str] = frozenset()) -> list[list[TaggedToken]]:
    """Trees -> tagged script sentences: extract, recombine, split, respell, convert.

    strict=True raises on the first malformed sentence or novel tag;
    otherwise the offending sentence is logged and skipped.
    """
    sentences: list[list[TaggedToken]] = []
    for s_idx, tree in enumerate(trees):
        try:
            leaves = [(t, w) for t, w in extract_leaves(tree) if t not in drop_tags]
            tokens = split_joined_words(recombine_split_words(leaves))
            prepared: list[TaggedToken] = []
            for tag, word in tokens:
                if registry is not None and tag not in registry:
                    raise PrepareError(s_idx, f"novel tag {tag!r} on {word!r}")
                result = det.detransliterate(det.respell(word, tag), tag)
                prepared.append(TaggedToken(result.script, tag, result.route))
            sentences.append(prepared)
        except (DanglingMarker, EmptySegment, RomanizerError, PrepareError) as exc:
            if strict:
                if isinstance(exc, PrepareError):
                    raise
                raise PrepareError(s_idx, str(exc)) from exc
            if log:
                log(f"sentence {s_idx}: skipped: {exc}")
    return sentences


# -- tagged-sentence files -------------------------------------------------


def write_tagged(path, sentences: list[list[TaggedToken]]) -> None:
    """One token per line: word<TAB>tag<TAB>route, blank line between sentences."""
    if hasattr(path, "write"):
        _write_tagged_to(path, sentences)
        return
    with open(path, "w", encoding="utf-8") as fh:
        _write_tagged_to(fh, sentences)


def _write_tagged_to(fh, sentences: list[list[TaggedToken]]) -> None:
    for idx, sent in enumerate(sentences):
        if idx:
            fh.write("\n")
        for tok in sent:
            fh.write(f"{tok.word}\t{tok.tag}\t{tok.route}\n")


def read_tagged(path) -> list[list[TaggedToken]]:
    """Accepts two-column (word, tag) or three-column (word, tag, route) files."""
    sentences: list[list[TaggedToken]] = []
    cur: list[TaggedToken] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if cur:
                    sentences.append(cur)
                    cur = []
                continue
            fields = line.split("\t")
            if len(fields) == 2:
                cur.append(TaggedToken(fields[0], fields[1], ""))
            elif len(fields) == 3:
                cur.append(TaggedToken(*fields))
            else:
                raise ValueError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
    if cur:
        sentences.append(cur)
    return sentences
