"""Frequency, coverage, redundancy, time-series and dictionary comparison
statistics over tagged mentions.

Unless stated otherwise, functions taking ``stats`` expect the
:class:`TermStats` of a single entity; :func:`by_entity` splits a mixed
list.  Every ranking orders terms by descending mention count and breaks
ties by key, so results are reproducible.
"""

from __future__ import annotations

import logging
import math
import statistics
from collections import defaultdict
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

from termvar.corpus import DocumentRecord, week_of
from termvar.errors import ConsistencyError
from termvar.lexicon import Lexicon, detect_entity_conflicts, normalize
from termvar.tagger import MentionIndex

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TermStats:
    entity: str
    term_key: str
    mention_count: int
    document_count: int
    first_week: int


def _rank_key(s: TermStats) -> tuple:
    return (-s.mention_count, s.term_key, s.entity)


def doc_weeks(corpus: Iterable[DocumentRecord] | Mapping[str, int]) -> dict[str, int]:
    """doc_id -> week index.  Documents dated before the first analysis
    week are left out (with one warning)."""
    if isinstance(corpus, Mapping):
        return dict(corpus)
    weeks: dict[str, int] = {}
    early = 0
    for rec in corpus:
        try:
            weeks[rec.doc_id] = week_of(rec.date_added)
        except ValueError:
            early += 1
    if early:
        logger.warning("%d documents predate the first analysis week and are ignored", early)
    return weeks


def _week_for(weeks: Mapping[str, int], doc_id: str) -> int:
    try:
        return weeks[doc_id]
    except KeyError:
        raise ConsistencyError(f"mention references unknown document {doc_id!r}") from None


def term_frequencies(index: MentionIndex, corpus: Iterable[DocumentRecord] | Mapping[str, int]) -> list[TermStats]:
    """One :class:`TermStats` per attested (entity, key), most frequent first.

    Raises :class:`ConsistencyError` if a mention's document is not in
    ``corpus``.
    """
    weeks = doc_weeks(corpus)
    count: dict[tuple[str, str], int] = defaultdict(int)
    docs: dict[tuple[str, str], set[str]] = defaultdict(set)
    first: dict[tuple[str, str], int] = {}
    for m in index:
        week = _week_for(weeks, m.doc_id)
        ident = (m.entity, m.term_key)
        count[ident] += 1
        docs[ident].add(m.doc_id)
        if ident not in first or week < first[ident]:
            first[ident] = week
    stats = [TermStats(e, k, count[(e, k)], len(docs[(e, k)]), first[(e, k)]) for e, k in count]
    return sorted(stats, key=_rank_key)


def by_entity(stats: Iterable[TermStats]) -> dict[str, list[TermStats]]:
    out: dict[str, list[TermStats]] = defaultdict(list)
    for s in stats:
        out[s.entity].append(s)
    return {e: sorted(v, key=_rank_key) for e, v in sorted(out.items())}


def frequency_summary(stats: Iterable[TermStats]) -> dict[str, tuple[float, float]]:
    """(mean, median) mention count per entity."""
    return {
        entity: (statistics.fmean(s.mention_count for s in rows), statistics.median(s.mention_count for s in rows))
        for entity, rows in by_entity(stats).items()
    }


def canonical_share(stats: Sequence[TermStats], canonical_key: str) -> float:
    """Fraction of the entity's mentions that are the canonical term."""
    key = normalize(canonical_key)
    total = sum(s.mention_count for s in stats)
    if total == 0:
        raise ValueError("no mentions: canonical share undefined")
    hit = sum(s.mention_count for s in stats if s.term_key == key)
    if hit == 0:
        logger.warning("canonical term %r has no mentions", canonical_key)
    return hit / total


def rank_frequency(stats: Sequence[TermStats]) -> list[tuple[int, int]]:
    if not stats:
        raise ValueError("rank_frequency needs at least one term")
    ordered = sorted(stats, key=_rank_key)
    return [(rank, s.mention_count) for rank, s in enumerate(ordered, start=1)]


def zipf_slope(series: Sequence[tuple[int, int]]) -> float:
    """Least-squares slope of log(count) against log(rank).

    Zero counts are skipped.  A Zipfian distribution gives a slope near -1.
    """
    points = [(math.log(r), math.log(c)) for r, c in series if c > 0]
    if len(points) < 2:
        raise ValueError("need at least two nonzero counts to fit a slope")
    xs, ys = zip(*points)
    slope, _ = statistics.linear_regression(xs, ys)
    return slope


def coverage_at(stats: Sequence[TermStats], p: float) -> int:
    """Smallest k such that the k most frequent terms cover at least ``p``
    of all mentions."""
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    if not stats:
        raise ValueError("coverage_at needs at least one term")
    total = sum(s.mention_count for s in stats)
    if total == 0:
        raise ValueError("no mentions")
    cum = 0
    for k, s in enumerate(sorted(stats, key=_rank_key), start=1):
        cum += s.mention_count
        # cum / total is correctly rounded, so an exact ratio equal to a
        # decimal p compares equal to the float literal for p.
        if cum / total >= p:
            return k
    return len(stats)


def non_redundant_terms(stats: Sequence[TermStats]) -> list[str]:
    """Keys of terms that do not contain a strictly more frequent term.

    Containment is a contiguous substring test on normalized keys, so
    ``covid19pneumonia`` is redundant next to a more frequent ``covid19``
    while ``covid2019`` is not.
    """
    ordered = sorted(stats, key=_rank_key)
    out = []
    for s in ordered:
        redundant = any(
            o.mention_count > s.mention_count and o.term_key in s.term_key
            for o in ordered
            if o.mention_count > s.mention_count
        )
        if not redundant:
            out.append(s.term_key)
    return out


def _week_range(weeks: Mapping[str, int]) -> range:
    if not weeks:
        return range(0)
    values = weeks.values()
    return range(min(values), max(values) + 1)


def unique_terms_over_time(
    index: MentionIndex, corpus: Iterable[DocumentRecord] | Mapping[str, int]
) -> dict[str, list[tuple[int, int]]]:
    """Per entity, (week, number of distinct terms first seen by that week).

    The series covers every week from the earliest to the latest document
    in ``corpus``.
    """
    weeks = doc_weeks(corpus)
    stats = term_frequencies(index, weeks)
    if not stats:
        return {}
    span = _week_range(weeks)
    out = {}
    for entity, rows in by_entity(stats).items():
        new_per_week: dict[int, int] = defaultdict(int)
        for s in rows:
            new_per_week[s.first_week] += 1
        cum = 0
        series = []
        for w in span:
            cum += new_per_week.get(w, 0)
            series.append((w, cum))
        out[entity] = series
    return out


def top_terms(stats: Sequence[TermStats], k: int) -> list[str]:
    return [s.term_key for s in sorted(stats, key=_rank_key)[:k]]


def common_term_article_share(
    index: MentionIndex,
    corpus: Iterable[DocumentRecord] | Mapping[str, int],
    k: int,
    denominator: str = "entity",
) -> dict[str, list[tuple[int, float]]]:
    """Per entity and week, the share of articles using one of the entity's
    ``k`` globally most frequent terms.

    With ``denominator="entity"`` the share is taken over articles added that
    week that mention the entity at all; with ``"all"`` over every article
    added that week.  Weeks with an empty denominator are omitted.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if denominator not in ("entity", "all"):
        raise ValueError(f"denominator must be 'entity' or 'all', got {denominator!r}")
    weeks = doc_weeks(corpus)
    stats = term_frequencies(index, weeks)
    docs_per_week: dict[int, int] = defaultdict(int)
    for w in weeks.values():
        docs_per_week[w] += 1

    out = {}
    for entity, rows in by_entity(stats).items():
        top = set(top_terms(rows, k))
        any_docs: dict[int, set[str]] = defaultdict(set)
        top_docs: dict[int, set[str]] = defaultdict(set)
        for m in index:
            if m.entity != entity:
                continue
            w = weeks[m.doc_id]
            any_docs[w].add(m.doc_id)
            if m.term_key in top:
                top_docs[w].add(m.doc_id)
        if denominator == "entity":
            denom = {w: len(d) for w, d in any_docs.items()}
        else:
            denom = dict(docs_per_week)
        out[entity] = [(w, len(top_docs.get(w, ())) / denom[w]) for w in sorted(denom) if denom[w]]
    return out


REGION_MEMBERSHIP = ((1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1))


@dataclass
class VennReport:
    """Exclusive 3-set regions of attested keys, per entity.

    ``regions[entity][membership]`` lists the keys found in exactly the
    dictionaries flagged in ``membership`` (a 0/1 triple).
    """

    names: tuple[str, str, str]
    regions: dict[str, dict[tuple[int, int, int], list[str]]] = field(default_factory=dict)

    def label(self, membership: tuple[int, int, int]) -> str:
        return "&".join(n for n, flag in zip(self.names, membership) if flag)

    def counts(self, entity: str) -> dict[tuple[int, int, int], int]:
        return {m: len(self.regions[entity][m]) for m in REGION_MEMBERSHIP}

    def union_size(self, entity: str) -> int:
        return sum(self.counts(entity).values())


def attested_keys(lexicon: Lexicon, index: MentionIndex) -> dict[str, set[str]]:
    attested = index.attested()
    out: dict[str, set[str]] = {e: set() for e in lexicon.entity_ids}
    for t in lexicon:
        if (t.entity, t.normalized) in attested:
            out[t.entity].add(t.normalized)
    return out


def compare_dictionaries(
    dicts: Mapping[str, Lexicon],
    index: MentionIndex | Mapping[str, MentionIndex],
) -> VennReport:
    """Venn decomposition of three dictionaries' attested keys.

    ``index`` is either one mention index shared by all three dictionaries
    or a mapping from dictionary name to the index obtained by tagging with
    that dictionary alone.  Dictionaries with cross-entity key conflicts are
    rejected; resolving them is a curation decision.
    """
    if len(dicts) != 3:
        raise ValueError(f"exactly 3 dictionaries are required, got {len(dicts)}")
    names = tuple(dicts)
    for name, lex in dicts.items():
        conflicts = detect_entity_conflicts(lex)
        if conflicts:
            listing = ", ".join(f"{k} ({'/'.join(ents)})" for k, ents in conflicts)
            raise ConsistencyError(f"dictionary {name!r} has entity conflicts: {listing}")

    per_dict = []
    for name in names:
        idx = index[name] if isinstance(index, Mapping) else index
        per_dict.append(attested_keys(dicts[name], idx))

    entities: list[str] = []
    for name in names:
        for e in dicts[name].entity_ids:
            if e not in entities:
                entities.append(e)

    report = VennReport(names)  # type: ignore[arg-type]
    for entity in entities:
        sets = [d.get(entity, set()) for d in per_dict]
        regions: dict[tuple[int, int, int], list[str]] = {m: [] for m in REGION_MEMBERSHIP}
        for key in sorted(set().union(*sets)):
            membership = tuple(int(key in s) for s in sets)
            regions[membership].append(key)  # type: ignore[index]
        report.regions[entity] = regions
    return report
