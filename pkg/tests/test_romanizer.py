"""Romanized-to-script conversion: route order, rules, lexicon, verification."""

import pytest

from yidkit.inventory import CharInventory
from yidkit.romanizer import (
    Detransliterator,
    EmptyInput,
    LoshnKoydeshLexicon,
    PhoneticRuleSet,
    RespellTable,
    RuleGap,
)
from yidkit.textpipe import FrequencyTable

INV = CharInventory.load_default()
DET = Detransliterator(inventory=INV)


# -- route order -------------------------------------------------------------


def test_lexicon_word_bypasses_phonetic_rules():
    res = DET.detransliterate("rokhl")
    assert res.script == "rHl"
    assert res.route == "lexicon"
    # phonetic conversion would add a vowel letter and use khof
    assert DET._phonetic("rokhl") == "rVoxl"


def test_pos_override_switches_route():
    noun = DET.detransliterate("shem", "N")
    verb = DET.detransliterate("shem", "VBI")
    assert (noun.script, noun.route) == ("SJm", "lexicon")
    assert (verb.script, verb.route) == ("SeJm", "override")


def test_hyphen_components_route():
    res = DET.detransliterate("far-peysekh")
    assert res.route == "components"
    far = DET.detransliterate("far").script
    peysekh = DET.detransliterate("peysekh").script
    assert res.script == f"{far}-{peysekh}" == "VfVar-VpsH"


def test_strip_hyphen_lexicon_strategy():
    assert DET.detransliterate("eyn-hore").script == "eiJn-hre"
    assert DET.detransliterate("eynhore").script == "eiJn-hre"
    assert DET.detransliterate("eyn-hore").route == "lexicon"


def test_whole_word_lexicon_strategy():
    res = DET.detransliterate("beys-hamigdesh")
    assert (res.script, res.route) == ("biT-hmkdS", "lexicon")


def test_phonetic_fallback():
    res = DET.detransliterate("bukh")
    assert (res.script, res.route) == ("buJx", "phonetic")


def test_edge_punctuation_is_preserved():
    res = DET.detransliterate("rokhl:")
    assert res.script == "rHl:"
    assert res.route == "lexicon"


def test_apostrophe_contraction_stays_single_token():
    res = DET.detransliterate("emes'n")
    assert (res.script, res.route) == ("AmT'Jn", "lexicon")


def test_empty_input_rejected():
    with pytest.raises(EmptyInput):
        DET.detransliterate("")


def test_rule_gap_reports_position():
    with pytest.raises(RuleGap) as err:
        DET.detransliterate("buq")
    assert err.value.word == "buq"
    assert err.value.position == 2


# -- phonetic rule behavior ----------------------------------------------------


def test_longest_match_wins():
    # "tsh" must beat both "ts" and "t"
    assert DET._phonetic("tshaynik") == "tSVynik"


def test_initial_vowels_take_silent_alef():
    assert DET._phonetic("in") == "AiJn"
    assert DET._phonetic("un") == "AuJn"
    assert DET._phonetic("oyf") == "AoJf"


def test_initial_position_resets_after_hyphen_and_apostrophe():
    assert DET._phonetic("in-in") == "AiJn-AiJn"
    assert DET._phonetic("s'iz") == "s'Aiz"


def test_final_forms_applied_word_finally_and_prehyphen():
    assert DET._phonetic("shtern") == "SterJn"
    assert DET._phonetic("hersh-bern") == "herS-berJn"


def test_conversion_output_always_decodes():
    for word in ("bukh", "meynstu", "far-peysekh", "rokhl", "emes'n", "tshaynik"):
        res = DET.detransliterate(word)
        assert INV.is_decodable(res.script)


def test_final_form_law_on_outputs():
    for word in ("shtern", "bukh", "hersh-bern", "sakh", "eyn-hore"):
        res = DET.detransliterate(word)
        assert INV.find_medial_final_forms(res.script) == []


def test_determinism():
    a = DET.detransliterate("meynstu", "VBF~PRO")
    b = DET.detransliterate("meynstu", "VBF~PRO")
    assert (a.script, a.route) == (b.script, b.route)


# -- respelling ----------------------------------------------------------------


def test_respell_rewrites_listed_pair():
    assert DET.respell("maskim", "RP-H") == "maskem"


def test_respell_identity_on_unlisted():
    assert DET.respell("maskim", "N") == "maskim"
    assert DET.respell("gut", "RP-H") == "gut"


def test_respell_idempotent():
    once = DET.respell("maskim", "RP-H")
    assert DET.respell(once, "RP-H") == once


def test_respelled_word_reaches_lexicon():
    word = DET.respell("maskim", "RP-H")
    res = DET.detransliterate(word, "RP-H")
    assert (res.script, res.route) == ("msVkiJm", "lexicon")


# -- custom tables ---------------------------------------------------------------


def test_rule_set_from_text_longest_match():
    rs = PhoneticRuleSet._parse("ab\tX\tany\na\tY\tany\nb\tz\tany\n")
    assert rs.convert("ab") == "X"
    assert rs.convert("ba") == "zY"


def test_rule_set_position_initial_only_fires_at_start():
    rs = PhoneticRuleSet._parse("a\tI\tinitial\na\tM\tany\n")
    assert rs.convert("aa") == "IM"


def test_rule_set_position_final_only_fires_at_end():
    rs = PhoneticRuleSet._parse("a\tF\tfinal\na\tM\tany\n")
    assert rs.convert("aa") == "MF"


def test_lexicon_rejects_undecodable_script():
    entries = LoshnKoydeshLexicon.parse_entries("bad\tq#q\twhole-word\n")
    lex = LoshnKoydeshLexicon(entries)
    with pytest.raises(ValueError):
        lex.validate(INV)


# -- conversion verification ------------------------------------------------------


def test_existence_check_accepts_attested_and_reduced_forms():
    freq = FrequencyTable({"xyn": 5, "gut": 2})
    # xVyn reduces to attested xyn at level 1; gut attested directly
    missing = DET.existence_check(["xVyn", "gut", "bVux"], freq)
    assert [tok for tok, _ in missing] == ["bVux"]


def test_existence_check_empty_when_all_attested():
    freq = FrequencyTable({"gut": 1})
    assert DET.existence_check(["gut"], freq) == []


def test_verify_against_source_flags_substitution():
    report = DET.verify_against_source(
        ["iVo", "gut", "buJx"], ["iVo", "gVut", "buJx"])
    kinds = [p.kind for p in report.pairs]
    assert kinds == ["match", "soft", "match"]
    assert report.mismatches == []
