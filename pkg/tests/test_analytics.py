from __future__ import annotations

import logging
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import coverage_oracle
from termvar.analytics import (
    REGION_MEMBERSHIP,
    TermStats,
    canonical_share,
    common_term_article_share,
    compare_dictionaries,
    coverage_at,
    frequency_summary,
    non_redundant_terms,
    rank_frequency,
    term_frequencies,
    unique_terms_over_time,
    zipf_slope,
)
from termvar.corpus import DocumentRecord, week_start
from termvar.errors import ConsistencyError
from termvar.lexicon import Entity, Lexicon, Term
from termvar.tagger import Mention, MentionIndex, build_matcher, tag_corpus


def stats_of(counts: dict[str, int], entity="E") -> list[TermStats]:
    return [TermStats(entity, k, c, 1, 1) for k, c in counts.items()]


def mention(doc, key, entity="E"):
    return Mention(doc, "title", 0, len(key), key, key, entity)


def test_term_frequencies_counts_docs_and_weeks():
    weeks = {"a": 3, "b": 5, "c": 4}
    index = MentionIndex([mention("a", "x"), mention("a", "x"), mention("b", "x"), mention("c", "y"),
                          mention("c", "y", "F")])
    stats = term_frequencies(index, weeks)
    assert stats == [TermStats("E", "x", 3, 2, 3), TermStats("E", "y", 1, 1, 4), TermStats("F", "y", 1, 1, 4)]
    for s in stats:
        assert s.mention_count >= s.document_count >= 1


def test_term_frequencies_unknown_doc():
    with pytest.raises(ConsistencyError, match="ghost"):
        term_frequencies(MentionIndex([mention("ghost", "x")]), {"a": 1})


def test_term_frequencies_from_records():
    docs = [DocumentRecord("a", "2020-01-13", "t"), DocumentRecord("b", "2019-01-01", "t")]
    stats = term_frequencies(MentionIndex([mention("a", "x")]), docs)
    assert stats[0].first_week == 3


def test_summary_examples():
    (mean, median), = frequency_summary(stats_of({"a": 90, "b": 9, "c": 1})).values()
    assert mean == pytest.approx(33.33, abs=0.005) and median == 9
    assert frequency_summary(stats_of({"a": 7})) == {"E": (7, 7)}


def test_ties_ordered_by_key():
    index = MentionIndex([mention("d", k) for k in ("zeta", "alpha", "mid")])
    assert [s.term_key for s in term_frequencies(index, {"d": 1})] == ["alpha", "mid", "zeta"]


def test_canonical_share(caplog):
    assert canonical_share(stats_of({"covid19": 793, "other": 207}), "covid19") == pytest.approx(0.793)
    assert canonical_share(stats_of({"covid19": 5}), "COVID-19") == 1.0
    with caplog.at_level(logging.WARNING):
        assert canonical_share(stats_of({"other": 5}), "covid19") == 0.0
    assert "no mentions" in caplog.text
    with pytest.raises(ValueError):
        canonical_share([], "covid19")


def test_rank_frequency_examples():
    assert rank_frequency(stats_of({"c": 1, "a": 90, "b": 9})) == [(1, 90), (2, 9), (3, 1)]
    equal = stats_of({"q": 4, "p": 4, "r": 4})
    assert rank_frequency(equal) == [(1, 4), (2, 4), (3, 4)]
    with pytest.raises(ValueError):
        rank_frequency([])


def test_zipf_slope_exact_sample():
    series = [(i, round(10_000 / i)) for i in range(1, 101)]
    assert zipf_slope(series) == pytest.approx(-1.0, abs=0.1)


def test_zipf_slope_brute_force():
    series = [(i, 1 + 500 // i) for i in range(1, 30)]
    import math

    xs = [math.log(r) for r, _ in series]
    ys = [math.log(c) for _, c in series]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    expected = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)
    assert zipf_slope(series) == pytest.approx(expected)


@pytest.mark.parametrize("p, k", [(0.99, 2), (0.90, 1), (1.0, 3), (0.91, 2), (0.995, 3)])
def test_coverage_examples(p, k):
    assert coverage_at(stats_of({"a": 90, "b": 9, "c": 1}), p) == k


def test_coverage_bad_p():
    for p in (0, -0.1, 1.01):
        with pytest.raises(ValueError):
            coverage_at(stats_of({"a": 1}), p)


@given(st.lists(st.integers(1, 1000), min_size=1, max_size=40),
       st.lists(st.sampled_from(["0.5", "0.9", "0.95", "0.99", "0.995", "1", "0.3333", "0.75"]), min_size=2))
def test_coverage_oracle_and_monotone(counts, ps):
    stats = stats_of({f"k{i:03d}": c for i, c in enumerate(counts)})
    results = []
    for p in sorted(ps, key=float):
        got = coverage_at(stats, float(p))
        assert got == coverage_oracle(counts, p)
        results.append(got)
    assert results == sorted(results)


def test_redundancy_examples():
    assert non_redundant_terms(stats_of({"covid19": 100, "covid19pneumonia": 5})) == ["covid19"]
    assert non_redundant_terms(stats_of({"covid2019": 50, "covid19": 100})) == ["covid19", "covid2019"]
    assert non_redundant_terms(stats_of({"x": 1})) == ["x"]
    # equal frequency does not make a term redundant
    assert non_redundant_terms(stats_of({"covid19": 5, "covid19pneumonia": 5})) == ["covid19", "covid19pneumonia"]


@given(st.dictionaries(st.text(alphabet="abc", min_size=1, max_size=4), st.integers(1, 20), min_size=1))
def test_redundancy_properties(counts):
    stats = stats_of(counts)
    kept = non_redundant_terms(stats)
    assert set(kept) <= set(counts)
    assert rank_frequency(stats)[0][1] == max(counts.values())
    assert sorted(counts, key=lambda k: (-counts[k], k))[0] in kept
    for k in counts:
        redundant = any(counts[o] > counts[k] and o in k for o in counts)
        assert (k in kept) == (not redundant)


def test_unique_over_time_examples():
    weeks = {"a": 3, "b": 5, "c": 1, "d": 7}
    series = unique_terms_over_time(MentionIndex([mention("a", "x"), mention("b", "y")]), weeks)
    assert series == {"E": [(1, 0), (2, 0), (3, 1), (4, 1), (5, 2), (6, 2), (7, 2)]}
    only = unique_terms_over_time(MentionIndex([mention("a", "x"), mention("d", "x")]), weeks)
    assert only["E"][2:] == [(3, 1), (4, 1), (5, 1), (6, 1), (7, 1)]
    assert unique_terms_over_time(MentionIndex([]), weeks) == {}


def test_share_example_three_of_four():
    weeks = {f"d{i}": 2 for i in range(5)}
    mentions = [mention("d0", "top"), mention("d1", "top"), mention("d2", "top"), mention("d2", "rare"),
                mention("d3", "rare")]
    mentions += [mention(f"x{i}", "top") for i in range(5)]
    weeks.update({f"x{i}": 1 for i in range(5)})
    share = common_term_article_share(MentionIndex(mentions), weeks, k=1)
    assert share["E"] == [(1, 1.0), (2, 0.75)]
    # d4 mentions nothing: counts only under the "all" denominator
    assert common_term_article_share(MentionIndex(mentions), weeks, k=1, denominator="all")["E"] == [(1, 1.0), (2, 0.6)]
    assert common_term_article_share(MentionIndex(mentions), weeks, k=2)["E"] == [(1, 1.0), (2, 1.0)]


def test_share_bad_args():
    with pytest.raises(ValueError):
        common_term_article_share(MentionIndex([]), {}, k=0)
    with pytest.raises(ValueError):
        common_term_article_share(MentionIndex([]), {}, k=1, denominator="some")


@given(st.lists(st.tuples(st.integers(0, 30), st.sampled_from("pqrstu"), st.sampled_from("EF")), max_size=60),
       st.integers(1, 7))
def test_time_series_properties(rows, k):
    weeks = {f"d{i}": 1 + i % 9 for i in range(31)}
    index = MentionIndex([mention(f"d{d}", key, e) for d, key, e in rows])
    stats = term_frequencies(index, weeks)
    series = unique_terms_over_time(index, weeks)
    for entity, points in series.items():
        values = [v for _, v in points]
        assert values == sorted(values)
        assert values[-1] == sum(1 for s in stats if s.entity == entity)
    shares = common_term_article_share(index, weeks, k)
    n_terms = {e: sum(1 for s in stats if s.entity == e) for e in series}
    for entity, points in shares.items():
        for _, frac in points:
            assert 0.0 <= frac <= 1.0
            if k >= n_terms[entity]:
                assert frac == 1.0


def lex3(keys: dict[str, list[str]]) -> Lexicon:
    return Lexicon([Entity("E"), Entity("F")], [Term(k, e) for e, ks in keys.items() for k in ks])


def index_for(keys):
    return MentionIndex([mention("d", k, e) for e, ks in keys.items() for k in ks])


def test_venn_hand_example():
    dicts = {"A": lex3({"E": ["x", "y", "w"]}), "B": lex3({"E": ["y", "z"]}), "C": lex3({"E": ["y"]})}
    index = index_for({"E": ["x", "y", "z"]})  # w is unattested
    report = compare_dictionaries(dicts, index)
    regions = report.regions["E"]
    assert regions[(1, 0, 0)] == ["x"] and regions[(0, 1, 0)] == ["z"] and regions[(1, 1, 1)] == ["y"]
    assert sum(len(v) for v in regions.values()) == 3 == report.union_size("E")
    assert report.label((1, 0, 1)) == "A&C"
    assert report.union_size("F") == 0


def test_venn_identical_and_disjoint():
    same = lex3({"E": ["a", "b"]})
    rep = compare_dictionaries({"A": same, "B": same, "C": same}, index_for({"E": ["a", "b"]}))
    assert rep.counts("E") == {m: (2 if m == (1, 1, 1) else 0) for m in REGION_MEMBERSHIP}
    rep = compare_dictionaries({"A": lex3({"E": ["a"]}), "B": lex3({"E": ["b"]}), "C": lex3({"E": ["c"]})},
                               index_for({"E": ["a", "b", "c"]}))
    assert [rep.counts("E")[m] for m in REGION_MEMBERSHIP] == [1, 1, 1, 0, 0, 0, 0]


def test_venn_per_dictionary_indexes():
    dicts = {"A": lex3({"E": ["a"]}), "B": lex3({"E": ["a"]}), "C": lex3({"E": ["a"]})}
    indexes = {"A": index_for({"E": ["a"]}), "B": index_for({"E": []}), "C": index_for({"E": ["a"]})}
    assert compare_dictionaries(dicts, indexes).regions["E"][(1, 0, 1)] == ["a"]


def test_venn_errors():
    d = lex3({"E": ["a"]})
    with pytest.raises(ValueError):
        compare_dictionaries({"A": d, "B": d}, MentionIndex([]))
    bad = lex3({"E": ["a"], "F": ["A"]})
    with pytest.raises(ConsistencyError, match="conflict"):
        compare_dictionaries({"A": d, "B": bad, "C": d}, MentionIndex([]))


@pytest.mark.parametrize("seed", range(20))
def test_venn_random_partition(seed):
    rng = random.Random(seed)
    universe = [f"t{i}" for i in range(30)]
    dicts = {n: lex3({"E": rng.sample(universe, rng.randint(0, 20))}) for n in "ABC"}
    attested = set(rng.sample(universe, 20))
    report = compare_dictionaries(dicts, index_for({"E": sorted(attested)}))
    sets = [dicts[n].keys("E") & attested for n in "ABC"]
    union = set().union(*sets)
    placed = [k for m in REGION_MEMBERSHIP for k in report.regions["E"][m]]
    assert sorted(placed) == sorted(union)
    assert report.union_size("E") == len(union)
    for m in REGION_MEMBERSHIP:
        for k in report.regions["E"][m]:
            assert tuple(int(k in s) for s in sets) == m


def test_pipeline_on_dated_docs():
    lex = Lexicon([Entity("E")], [Term("alpha", "E"), Term("beta", "E")])
    docs = [DocumentRecord("a", week_start(3), "alpha news"), DocumentRecord("b", week_start(4), "beta and alpha")]
    index = tag_corpus(build_matcher(lex), docs)
    assert unique_terms_over_time(index, docs) == {"E": [(3, 1), (4, 2)]}
