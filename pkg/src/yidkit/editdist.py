"""Levenshtein distance and edit scripts over symbol sequences.

Operates on lists of inventory symbols rather than raw characters, so a
two-character ASCII code counts as one edit unit.
"""

from __future__ import annotations


def edit_distance(a: list[str], b: list[str], limit: int | None = None) -> int:
    """Unit-cost edit distance; returns limit+1 early when a limit is given."""
    if limit is not None and abs(len(a) - len(b)) > limit:
        return limit + 1
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, sa in enumerate(a, start=1):
        cur = [i]
        best = i
        for j, sb in enumerate(b, start=1):
            cost = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (sa != sb))
            cur.append(cost)
            best = min(best, cost)
        if limit is not None and best > limit:
            return limit + 1
        prev = cur
    return prev[-1]


def edit_ops(a: list[str], b: list[str]) -> list[tuple[str, str | None, str | None]]:
    """Minimal edit script as (op, a_sym, b_sym) with op in equal/sub/ins/del."""
    m, n = len(a), len(b)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dist[i][0] = i
    for j in range(n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            dist[i][j] = min(dist[i - 1][j] + 1,
                             dist[i][j - 1] + 1,
                             dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    ops = []
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]):
            ops.append(("equal" if a[i - 1] == b[j - 1] else "sub", a[i - 1], b[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            ops.append(("del", a[i - 1], None))
            i -= 1
        else:
            ops.append(("ins", None, b[j - 1]))
            j -= 1
    ops.reverse()
    return ops
