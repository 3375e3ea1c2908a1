"""CSV serialization of the analytics results.

Each function returns the full file text, header row included.  Fractions
are written with four decimal places.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable, Mapping, Sequence

from termvar.analytics import (
    REGION_MEMBERSHIP,
    TermStats,
    VennReport,
    by_entity,
    coverage_at,
    non_redundant_terms,
)

REPORT_FILES = (
    "term_stats.csv",
    "rank_frequency.csv",
    "coverage.csv",
    "nonredundant.csv",
    "weekly_unique.csv",
    "weekly_share.csv",
    "venn.csv",
)


def fmt_fraction(x: float) -> str:
    return f"{x:.4f}"


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def term_stats_csv(stats: Iterable[TermStats]) -> str:
    rows = []
    for entity, group in by_entity(stats).items():
        for s in group:
            rows.append((entity, s.term_key, s.mention_count, s.document_count, s.first_week))
    return _csv(("entity", "term_key", "mention_count", "document_count", "first_week"), rows)


def rank_frequency_csv(stats: Iterable[TermStats]) -> str:
    rows = []
    for entity, group in by_entity(stats).items():
        for rank, s in enumerate(group, start=1):
            rows.append((entity, rank, s.term_key, s.mention_count))
    return _csv(("entity", "rank", "term_key", "mention_count"), rows)


def coverage_csv(stats: Iterable[TermStats], ps: Sequence[float]) -> str:
    rows = []
    for entity, group in by_entity(stats).items():
        for p in ps:
            rows.append((entity, fmt_fraction(p), coverage_at(group, p)))
    return _csv(("entity", "p", "terms_required"), rows)


def nonredundant_csv(stats: Iterable[TermStats]) -> str:
    rows = []
    for entity, group in by_entity(stats).items():
        counts = {s.term_key: s.mention_count for s in group}
        for rank, key in enumerate(non_redundant_terms(group), start=1):
            rows.append((entity, rank, key, counts[key]))
    return _csv(("entity", "rank", "term_key", "mention_count"), rows)


def weekly_unique_csv(series: Mapping[str, Sequence[tuple[int, int]]]) -> str:
    rows = [(entity, week, n) for entity in sorted(series) for week, n in series[entity]]
    return _csv(("entity", "week", "cumulative_unique_terms"), rows)


def weekly_share_csv(shares: Mapping[int, Mapping[str, Sequence[tuple[int, float]]]]) -> str:
    """``shares`` maps k to the per-entity share series for that k."""
    rows = []
    entities = sorted({e for per_k in shares.values() for e in per_k})
    for entity in entities:
        for k in sorted(shares):
            for week, frac in shares[k].get(entity, ()):
                rows.append((entity, k, week, fmt_fraction(frac)))
    return _csv(("entity", "k", "week", "share"), rows)


def venn_csv(report: VennReport | None) -> str:
    rows = []
    if report is not None:
        for entity, regions in report.regions.items():
            for membership in REGION_MEMBERSHIP:
                keys = regions[membership]
                rows.append((entity, report.label(membership), len(keys), "|".join(keys)))
    return _csv(("entity", "region", "count", "keys"), rows)
