"""Local token alignment: DP oracle, scoring laws, report rendering."""

from hypothesis import given, strategies as st

from yidkit.align import AlignmentReport, smith_waterman, token_similarity
from yidkit.editdist import edit_distance, edit_ops


# -- edit distance ------------------------------------------------------------


def test_edit_distance_basics():
    assert edit_distance(list("abc"), list("abc")) == 0
    assert edit_distance(list("abc"), list("axc")) == 1
    assert edit_distance(list("abc"), list("")) == 3
    assert edit_distance(list("groyse"), list("groyee")) == 1


def test_edit_distance_limit_short_circuits():
    assert edit_distance(list("aaaa"), list("bbbb"), limit=2) > 2


def test_edit_ops_reconstruct_distance():
    ops = edit_ops(list("kats"), list("katz"))
    assert [op for op, *_ in ops].count("sub") == 1
    assert edit_distance(list("kats"), list("katz")) == sum(
        1 for op, *_ in ops if op != "equal")


@given(st.text(max_size=8), st.text(max_size=8))
def test_edit_ops_cost_equals_distance(a, b):
    ops = edit_ops(list(a), list(b))
    assert sum(1 for op, *_ in ops if op != "equal") == edit_distance(list(a), list(b))


# -- token similarity ----------------------------------------------------------


def test_token_similarity_values():
    assert token_similarity("abc", "abc") == 1.0
    assert token_similarity("abc", "xyz") == 0.0
    assert token_similarity("kats", "katz") == 0.75
    assert token_similarity("", "") == 1.0


@given(st.text(max_size=8), st.text(max_size=8))
def test_token_similarity_symmetric_and_bounded(a, b):
    s = token_similarity(a, b)
    assert s == token_similarity(b, a)
    assert 0.0 <= s <= 1.0


# -- alignment ------------------------------------------------------------------


def _oracle_dp(a, b, match=2.0, mismatch=-1.0, gap=-1.0, soft=0.5):
    """Independent dense DP for the best local-alignment score."""
    H = [[0.0] * (len(b) + 1) for _ in range(len(a) + 1)]
    best = 0.0
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1] or token_similarity(a[i - 1], b[j - 1]) >= soft:
                sub = match
            else:
                sub = mismatch
            H[i][j] = max(0.0, H[i - 1][j - 1] + sub, H[i - 1][j] + gap, H[i][j - 1] + gap)
            best = max(best, H[i][j])
    return best


def test_identical_sequences_score_n_match():
    for n in (1, 2, 5):
        seq = [f"tok{i}" for i in range(n)]
        report = smith_waterman(seq, seq)
        assert report.score == 2.0 * n
        assert [p.kind for p in report.pairs] == ["match"] * n
        assert report.mismatches == []


def test_four_token_fixture_hand_table():
    # Hand DP over a=[di, alte, mayse, iz], b=[di, alte, mise, iz] with
    # match=2, gap=-1: "mayse"/"mise" has similarity 0.6 >= 0.5, so the
    # full diagonal scores 8; the pair is reported as a soft match.
    a = ["di", "alte", "mayse", "iz"]
    b = ["di", "alte", "mise", "iz"]
    report = smith_waterman(a, b)
    assert report.score == 8.0
    assert [p.kind for p in report.pairs] == ["match", "match", "soft", "match"]
    assert report.score == _oracle_dp(a, b)


def test_substitution_below_threshold_is_mismatch():
    a = ["aa", "bb", "cc", "dd"]
    b = ["aa", "bb", "xx", "dd"]
    report = smith_waterman(a, b)
    # hand DP: 2, 4, then max(0, 4-1, 3-1, 3-1)=3, then 5
    assert report.score == 5.0
    assert [(p.a_token, p.b_token, p.kind) for p in report.pairs] == [
        ("aa", "aa", "match"), ("bb", "bb", "match"),
        ("cc", "xx", "mismatch"), ("dd", "dd", "match")]
    assert [p.a_token for p in report.mismatches] == ["cc"]


def test_gap_recovery_after_dropped_token():
    a = ["aa", "bb", "cc"]
    b = ["aa", "cc"]
    report = smith_waterman(a, b)
    # aa matches (2), bb gaps (-1), cc matches (2) => 3
    assert report.score == 3.0
    assert [p.kind for p in report.pairs] == ["match", "gap-b", "match"]


def test_disjoint_sequences_align_empty():
    report = smith_waterman(["aa", "bb"], ["xx", "yy"])
    assert report.score == 0.0
    assert report.pairs == []


def test_alignment_indices_point_into_inputs():
    a = ["p", "q", "r"]
    b = ["q", "r"]
    report = smith_waterman(a, b)
    for pair in report.pairs:
        if pair.a_index is not None:
            assert a[pair.a_index] == pair.a_token
        if pair.b_index is not None:
            assert b[pair.b_index] == pair.b_token


@given(st.lists(st.sampled_from(["aa", "bb", "cc", "dd"]), max_size=6),
       st.lists(st.sampled_from(["aa", "bb", "cc", "dd"]), max_size=6))
def test_score_matches_dense_oracle(a, b):
    assert smith_waterman(a, b).score == _oracle_dp(a, b)


def test_render_text_format():
    text = smith_waterman(["aa"], ["aa"]).render_text()
    lines = text.splitlines()
    assert lines[0] == "score 2"
    assert lines[1].startswith("match")
    assert "aa\taa" in lines[1]
