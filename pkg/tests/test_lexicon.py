from __future__ import annotations

import io
import logging
import string
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from termvar.errors import ParseError
from termvar.lexicon import (
    Entity,
    EntityKind,
    Lexicon,
    Provenance,
    Term,
    detect_entity_conflicts,
    fold_char,
    format_dictionary,
    load_dictionary,
    normalize,
    tokenize,
)

HEADER = "#entity\tCOVID-19\tdisease\n#entity\tSARS-CoV-2\tvirus\n"


@pytest.mark.parametrize(
    "surface, key",
    [
        ("SARS-CoV-2", "sarscov2"),
        ("  CoViD — 19 ", "covid19"),
        ("!!!", ""),
        ("", ""),
        ("COVID–19", "covid19"),
        ("Ünïcode Straße", "ünïcodestraße"),
    ],
)
def test_normalize_examples(surface, key):
    assert normalize(surface) == key


@given(st.text())
def test_normalize_idempotent(s):
    key = normalize(s)
    assert normalize(key) == key
    assert all(c.isalnum() for c in key)


separators = st.text(alphabet=" \t-–—_.,;:/()[]'\"!?", max_size=3)


@given(st.text(alphabet=string.ascii_letters + string.digits, min_size=1, max_size=20), st.data())
def test_normalize_ignores_separators_and_case(word, data):
    pieces = []
    for ch in word:
        pieces.append(data.draw(separators))
        pieces.append(ch.swapcase() if data.draw(st.booleans()) else ch)
    pieces.append(data.draw(separators))
    assert normalize("".join(pieces)) == normalize(word) == word.lower()


def test_fold_char_is_total_and_stable_over_unicode():
    for cp in range(sys.maxunicode + 1):
        ch = chr(cp)
        if not ch.isalnum():
            continue
        f = fold_char(ch)
        assert len(f) == 1 and f.isalnum() and fold_char(f) == f, hex(cp)


def test_token_pattern_agrees_with_isalnum():
    import re

    pat = re.compile(r"[^\W_]")
    for cp in range(0, 0x30000):
        ch = chr(cp)
        assert bool(pat.fullmatch(ch)) == ch.isalnum(), hex(cp)


def test_tokenize():
    assert tokenize("a-b-c") == ["a", "b", "c"]
    assert tokenize("COVID-19 update") == ["COVID", "19", "update"]


def test_term_validation():
    with pytest.raises(ValueError):
        Term("!!!", "COVID-19")
    with pytest.raises(ValueError):
        Term("a\tb", "COVID-19")
    t = Term("Covid-19", "COVID-19")
    assert t.normalized == "covid19"
    assert t.provenance is Provenance.BASE


def test_entity_ids_unique():
    with pytest.raises(ValueError):
        Lexicon([Entity("A"), Entity("A")])
    with pytest.raises(ValueError):
        Entity("")


def test_load_dictionary_basic():
    text = HEADER + "COVID-19\tCOVID-19\tbase\nCOVID-19\tcoronavirus disease 2019\tbase\n"
    lex = load_dictionary(io.StringIO(text))
    assert len(lex) == 2
    assert lex.keys("COVID-19") == {"covid19", "coronavirusdisease2019"}
    assert lex.counts() == {"COVID-19": 2, "SARS-CoV-2": 0}


def test_load_dictionary_single_entity():
    text = "#entity\tCOVID-19\tdisease\nCOVID-19\tCOVID-19\tbase\nCOVID-19\tcoronavirus disease 2019\tbase\n"
    lex = load_dictionary(io.StringIO(text))
    assert len(lex) == 2 and len(lex.entities) == 1


def test_unknown_entity_cites_line():
    text = HEADER + "COVID-19\tCOVID-19\tbase\nFLU\tinfluenza\tbase\n"
    with pytest.raises(ParseError) as err:
        load_dictionary(io.StringIO(text))
    assert err.value.lineno == 4
    assert "FLU" in str(err.value)


@pytest.mark.parametrize(
    "row",
    ["COVID-19\tCOVID-19", "COVID-19\t\tbase", "COVID-19\tCOVID-19\tinvented", "COVID-19\ta\tbase\tx\ty"],
)
def test_malformed_rows(row):
    with pytest.raises(ParseError) as err:
        load_dictionary(io.StringIO(HEADER + row + "\n"))
    assert err.value.lineno == 3


def test_duplicate_key_keeps_first(caplog):
    text = HEADER + "COVID-19\tCovid-19\tbase\nCOVID-19\tCOVID 19\tbase\n"
    with caplog.at_level(logging.WARNING):
        lex = load_dictionary(io.StringIO(text))
    assert len(lex) == 1
    assert list(lex.index) == ["covid19"]
    assert lex.terms[0].surface == "Covid-19"
    assert "duplicates" in caplog.text


def test_index_consistent(fixture_dict):
    for term in fixture_dict:
        assert term in fixture_dict.index[term.normalized]
    assert sum(len(v) for v in fixture_dict.index.values()) == len(fixture_dict)


def test_round_trip_bit_exact(data_dir):
    raw = (data_dir / "dict.tsv").read_text(encoding="utf-8")
    lex = load_dictionary(io.StringIO(raw))
    assert format_dictionary(lex) == raw
    assert load_dictionary(io.StringIO(format_dictionary(lex))) == lex


surfaces = st.text(alphabet=string.ascii_letters + string.digits + " -/().–é", min_size=1, max_size=15).filter(
    lambda s: normalize(s) and s == s.strip()
)


@given(st.lists(st.tuples(st.sampled_from(["COVID-19", "SARS-CoV-2"]), surfaces), max_size=20))
def test_round_trip_property(rows):
    ents = [Entity("COVID-19", EntityKind.DISEASE), Entity("SARS-CoV-2", EntityKind.VIRUS)]
    lex = Lexicon(ents, [Term(s, e, Provenance.GENERATED, ("r1", "r2")) for e, s in rows])
    text = format_dictionary(lex)
    again = load_dictionary(io.StringIO(text))
    assert again == lex
    assert format_dictionary(again) == text


def test_conflicts(two_entities):
    lex = Lexicon(two_entities, [Term("2019 nCoV infection", "COVID-19"), Term("2019-nCoV infection", "SARS-CoV-2")])
    assert detect_entity_conflicts(lex) == [("2019ncovinfection", ["COVID-19", "SARS-CoV-2"])]


def test_no_conflicts(fixture_dict):
    assert detect_entity_conflicts(fixture_dict) == []


def test_three_way_conflict():
    ents = [Entity("A"), Entity("B"), Entity("C")]
    lex = Lexicon(ents, [Term("x y", "C"), Term("X-Y", "A"), Term("xy", "B"), Term("z", "A")])
    # oracle: enumerate key -> entity map directly
    key_map: dict[str, set[str]] = {}
    for t in lex:
        key_map.setdefault(normalize(t.surface), set()).add(t.entity)
    expected = [(k, sorted(v)) for k, v in sorted(key_map.items()) if len(v) > 1]
    assert detect_entity_conflicts(lex) == expected == [("xy", ["A", "B", "C"])]


@given(st.lists(st.tuples(st.sampled_from("ABC"), st.sampled_from(["a", "b", "c-d", "C D", "e"])), max_size=12))
def test_conflicts_empty_iff_single_entity_per_key(rows):
    lex = Lexicon([Entity(x) for x in "ABC"], [Term(s, e) for e, s in rows])
    single = all(len({t.entity for t in terms}) == 1 for terms in lex.index.values())
    assert (detect_entity_conflicts(lex) == []) == single
