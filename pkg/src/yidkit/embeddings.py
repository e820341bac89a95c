"""Co-occurrence counting, embedding training, and similarity analysis.

The trainer fits factorized log-co-occurrence vectors: for each counted pair
(i, j) it minimizes f(x_ij) * (w_i.wt_j + b_i + bt_j - log x_ij)^2 with the
weighting f(x) = min((x/x_max)^0.75, 1), using per-parameter adaptive
(AdaGrad) full-batch updates.  A word's final vector is the sum of its focus
and context vectors.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .editdist import edit_distance, edit_ops
from .inventory import CharInventory


class EmbeddingError(ValueError):
    pass


class DegenerateCounts(EmbeddingError):
    def __init__(self):
        super().__init__("all log co-occurrence counts are equal; nothing to fit")


class ZeroVector(EmbeddingError):
    def __init__(self):
        super().__init__("cosine of a zero vector is undefined")


@dataclass
class CooccurrenceCounts:
    vocab: list[str]
    pairs: dict[tuple[int, int], float]
    token_counts: dict[str, int]

    @property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.vocab)}


def count_cooccurrences(sentences: list[list[str]], window: int = 10,
                        min_count: int = 5) -> CooccurrenceCounts:
    """Symmetric 1/distance-weighted counts within each sentence.

    Tokens below min_count are pruned before windows are measured, so
    distances are over the kept token stream.
    """
    raw: Counter[str] = Counter()
    for sent in sentences:
        raw.update(sent)
    vocab = sorted((t for t, c in raw.items() if c >= min_count),
                   key=lambda t: (-raw[t], t))
    index = {t: i for i, t in enumerate(vocab)}
    pairs: dict[tuple[int, int], float] = {}
    for sent in sentences:
        ids = [index[t] for t in sent if t in index]
        for a in range(len(ids)):
            for b in range(a + 1, min(a + window + 1, len(ids))):
                w = 1.0 / (b - a)
                i, j = ids[a], ids[b]
                pairs[(i, j)] = pairs.get((i, j), 0.0) + w
                pairs[(j, i)] = pairs.get((j, i), 0.0) + w
    return CooccurrenceCounts(vocab, pairs, {t: raw[t] for t in vocab})


class EmbeddingTable:
    """Token vectors with an out-of-vocabulary policy (mean-vector or zero-vector)."""

    def __init__(self, tokens: list[str], vectors: np.ndarray, oov_policy: str = "mean-vector"):
        if len(tokens) != vectors.shape[0]:
            raise EmbeddingError("token/vector count mismatch")
        if len(set(tokens)) != len(tokens):
            raise EmbeddingError("duplicate tokens in vocabulary")
        if vectors.size and not np.all(np.isfinite(vectors)):
            raise EmbeddingError("non-finite vector components")
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise EmbeddingError("vectors must be a (vocab, dim>=1) matrix")
        if oov_policy not in ("mean-vector", "zero-vector"):
            raise EmbeddingError(f"unknown oov policy {oov_policy!r}")
        self.tokens = list(tokens)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.oov_policy = oov_policy
        self._oov = (self.vectors.mean(axis=0) if oov_policy == "mean-vector" and len(tokens)
                     else np.zeros(self.vectors.shape[1]))

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def lookup(self, token: str) -> np.ndarray:
        i = self.index.get(token)
        return self.vectors[i] if i is not None else self._oov

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self.tokens)} {self.dim}\n")
            for tok, vec in zip(self.tokens, self.vectors):
                fh.write(tok + " " + " ".join(f"{v:.10e}" for v in vec) + "\n")

    @classmethod
    def load(cls, path, oov_policy: str = "mean-vector") -> "EmbeddingTable":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise EmbeddingError(f"{path}: bad vector-file header")
            n, dim = int(header[0]), int(header[1])
            tokens, rows = [], []
            for lineno, raw in enumerate(fh, start=2):
                parts = raw.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise EmbeddingError(f"{path}:{lineno}: expected {dim + 1} fields")
                tokens.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        if len(tokens) != n:
            raise EmbeddingError(f"{path}: header says {n} rows, found {len(tokens)}")
        return cls(tokens, np.array(rows, dtype=np.float64), oov_policy)


def train_embeddings(cooc: CooccurrenceCounts, dim: int = 300, iterations: int = 25,
                     x_max: float = 10.0, learning_rate: float = 0.05,
                     seed: int = 0) -> tuple[EmbeddingTable, list[float]]:
    """Fit vectors to the counts; returns the table and per-iteration loss."""
    if not cooc.pairs:
        raise EmbeddingError("no co-occurrence pairs to train on")
    keys = sorted(cooc.pairs)
    ii = np.array([k[0] for k in keys], dtype=np.int64)
    jj = np.array([k[1] for k in keys], dtype=np.int64)
    xx = np.array([cooc.pairs[k] for k in keys], dtype=np.float64)
    logx = np.log(xx)
    # Counts are stored in both directions, so measure distinctness on
    # unordered pairs: a lone pair is trainable, a flat spectrum over two
    # or more pairs is not worth fitting.
    n_unordered = len({(min(i, j), max(i, j)) for i, j in keys})
    if n_unordered >= 2 and np.all(logx == logx[0]):
        raise DegenerateCounts()
    fw = np.minimum((xx / x_max) ** 0.75, 1.0)

    V = len(cooc.vocab)
    rng = np.random.default_rng(seed)
    scale = 0.5 / dim
    W = rng.uniform(-scale, scale, (V, dim))
    Wt = rng.uniform(-scale, scale, (V, dim))
    b = rng.uniform(-scale, scale, V)
    bt = rng.uniform(-scale, scale, V)
    accW = np.ones_like(W)
    accWt = np.ones_like(Wt)
    accb = np.ones_like(b)
    accbt = np.ones_like(bt)

    def residual() -> np.ndarray:
        return np.einsum("pd,pd->p", W[ii], Wt[jj]) + b[ii] + bt[jj] - logx

    history: list[float] = []
    for _ in range(iterations):
        r = residual()
        g = 2.0 * fw * r
        dW = np.zeros_like(W)
        dWt = np.zeros_like(Wt)
        db = np.zeros_like(b)
        dbt = np.zeros_like(bt)
        np.add.at(dW, ii, g[:, None] * Wt[jj])
        np.add.at(dWt, jj, g[:, None] * W[ii])
        np.add.at(db, ii, g)
        np.add.at(dbt, jj, g)
        accW += dW ** 2
        accWt += dWt ** 2
        accb += db ** 2
        accbt += dbt ** 2
        W -= learning_rate * dW / np.sqrt(accW)
        Wt -= learning_rate * dWt / np.sqrt(accWt)
        b -= learning_rate * db / np.sqrt(accb)
        bt -= learning_rate * dbt / np.sqrt(accbt)
        history.append(float(np.sum(fw * residual() ** 2)))
    return EmbeddingTable(cooc.vocab, W + Wt), history


# -- similarity ------------------------------------------------------------


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ZeroVector()
    return float(np.dot(u, v) / (nu * nv))


def nearest_neighbors(table: EmbeddingTable, query: str, k: int = 10,
                      freq=None) -> list[tuple[str, float, int]]:
    """Top-k in-vocabulary neighbors by cosine, annotated with corpus counts."""
    qv = table.lookup(query)
    if float(np.linalg.norm(qv)) == 0.0:
        raise ZeroVector()
    scored = []
    for tok, vec in zip(table.tokens, table.vectors):
        if tok == query or float(np.linalg.norm(vec)) == 0.0:
            continue
        scored.append((tok, cosine(qv, vec)))
    scored.sort(key=lambda tc: (-tc[1], tc[0]))
    return [(tok, cos, freq[tok] if freq is not None else 0) for tok, cos in scored[:k]]


@dataclass
class VariantPair:
    token_a: str
    token_b: str
    cosine: float
    distance: int
    kind: str  # spelling-variant | ocr-error
    detail: str = ""


# ASCII symbols acting as vowels; edits confined to these suggest a spelling
# variant rather than an OCR error.
VOWEL_SYMBOLS = frozenset({"A", "Va", "Vo", "e", "i", "Vi", "u", "Vu", "y", "Vy", "o"})


def load_confusions(inventory: CharInventory, path=None) -> set[frozenset[str]]:
    """OCR letter-confusion pairs as sets of ASCII symbols."""
    if path is None:
        text = resources.files("yidkit.data").joinpath("confusions.tsv").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    pairs = set()
    for raw in text.splitlines():
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue
        name_a, name_b = line.split("\t")
        pairs.add(frozenset({inventory.by_name[name_a].ascii_form,
                             inventory.by_name[name_b].ascii_form}))
    return pairs


def classify_pair(a: str, b: str, inventory: CharInventory,
                  confusions: set[frozenset[str]]) -> tuple[str, str]:
    """(kind, detail) for a candidate pair of script tokens."""
    if inventory.reduce(a, 1) == inventory.reduce(b, 1) or inventory.reduce(a, 2) == inventory.reduce(b, 2):
        return "spelling-variant", "equal after diacritic reduction"
    changed = [op for op in edit_ops(inventory.symbols(a), inventory.symbols(b))
               if op[0] != "equal"]
    notes = []
    all_variant_zone = True
    for op, sa, sb in changed:
        if op == "sub" and sa in VOWEL_SYMBOLS and sb in VOWEL_SYMBOLS:
            notes.append(f"vowel {sa}/{sb}")
        elif op in ("ins", "del") and (sa or sb) in VOWEL_SYMBOLS:
            notes.append(f"vowel {'+' if op == 'ins' else '-'}{sa or sb}")
        elif op in ("ins", "del") and (sa or sb) == "h":
            notes.append("silent h")
        else:
            all_variant_zone = False
            if op == "sub" and frozenset({sa, sb}) in confusions:
                notes.append(f"known confusion {sa}/{sb}")
            else:
                notes.append(f"{op} {sa or ''}{'/' if op == 'sub' else ''}{sb or ''}")
    if all_variant_zone and changed:
        return "spelling-variant", "; ".join(notes)
    return "ocr-error", "; ".join(notes)


def variant_candidates(table: EmbeddingTable, inventory: CharInventory, freq=None,
                       min_cosine: float = 0.5, max_edit: int = 2,
                       confusions: set[frozenset[str]] | None = None) -> list[VariantPair]:
    """All vocabulary pairs that are close both in vector space and in spelling."""
    if confusions is None:
        confusions = load_confusions(inventory)
    sym_cache = {}
    for tok in table.tokens:
        try:
            sym_cache[tok] = inventory.symbols(tok)
        except ValueError:
            continue
    tokens = [t for t in table.tokens if t in sym_cache]
    out: list[VariantPair] = []
    for i in range(len(tokens)):
        for j in range(i + 1, len(tokens)):
            a, b = tokens[i], tokens[j]
            d = edit_distance(sym_cache[a], sym_cache[b], limit=max_edit)
            if d > max_edit or d == 0:
                continue
            cos = cosine(table.lookup(a), table.lookup(b))
            if cos < min_cosine:
                continue
            kind, detail = classify_pair(a, b, inventory, confusions)
            out.append(VariantPair(a, b, cos, d, kind, detail))
    out.sort(key=lambda p: (-p.cosine, p.token_a, p.token_b))
    return out
