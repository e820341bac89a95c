"""Local alignment of token sequences (Smith-Waterman).

Tokens pair up when identical or when their normalized character edit
similarity clears a threshold, so OCR noise does not break the alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

from .editdist import edit_distance


def token_similarity(a: str, b: str) -> float:
    """1 - edit_distance/max_len over raw characters; 1.0 for two empty tokens."""
    if not a and not b:
        return 1.0
    return 1.0 - edit_distance(list(a), list(b)) / max(len(a), len(b))


@dataclass(frozen=True)
class AlignedPair:
    a_index: int | None
    b_index: int | None
    a_token: str | None
    b_token: str | None
    kind: str  # match | soft | mismatch | gap-a | gap-b


@dataclass
class AlignmentReport:
    score: float
    pairs: list[AlignedPair]

    @property
    def mismatches(self) -> list[AlignedPair]:
        return [p for p in self.pairs if p.kind == "mismatch"]

    def render_text(self) -> str:
        lines = [f"score {self.score:g}"]
        for p in self.pairs:
            a = p.a_token if p.a_token is not None else "-"
            b = p.b_token if p.b_token is not None else "-"
            lines.append(f"{p.kind:8s} {a}\t{b}")
        return "\n".join(lines) + "\n"


def smith_waterman(a: list[str], b: list[str], match: float = 2.0, mismatch: float = -1.0,
                   gap: float = -1.0, soft_threshold: float = 0.5) -> AlignmentReport:
    """Best local alignment of a against b.

    Identical tokens score `match`; near-identical tokens (similarity >=
    soft_threshold) also score `match` but are flagged "soft"; anything else
    scores `mismatch`.  Ties resolve toward the earliest cell and the
    diagonal, which keeps reports deterministic.
    """
    m, n = len(a), len(b)
    H = [[0.0] * (n + 1) for _ in range(m + 1)]
    best, best_cell = 0.0, (0, 0)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if a[i - 1] == b[j - 1]:
                sub = match
            elif token_similarity(a[i - 1], b[j - 1]) >= soft_threshold:
                sub = match
            else:
                sub = mismatch
            score = max(0.0,
                        H[i - 1][j - 1] + sub,
                        H[i - 1][j] + gap,
                        H[i][j - 1] + gap)
            H[i][j] = score
            if score > best:
                best, best_cell = score, (i, j)
    pairs: list[AlignedPair] = []
    i, j = best_cell
    while i > 0 and j > 0 and H[i][j] > 0:
        ai, bj = a[i - 1], b[j - 1]
        if ai == bj:
            sub, kind = match, "match"
        elif token_similarity(ai, bj) >= soft_threshold:
            sub, kind = match, "soft"
        else:
            sub, kind = mismatch, "mismatch"
        if H[i][j] == H[i - 1][j - 1] + sub:
            pairs.append(AlignedPair(i - 1, j - 1, ai, bj, kind))
            i, j = i - 1, j - 1
        elif H[i][j] == H[i - 1][j] + gap:
            pairs.append(AlignedPair(i - 1, None, ai, None, "gap-b"))
            i -= 1
        else:
            pairs.append(AlignedPair(None, j - 1, None, bj, "gap-a"))
            j -= 1
    pairs.reverse()
    return AlignmentReport(score=best, pairs=pairs)
