"""Corpus ingestion, token counting and week bucketing.

The corpus is JSON Lines, one article per line::

    {"doc_id": "32000001", "date_added": "2020-02-11", "title": "...", "abstract": "..."}

``abstract`` is optional.  Weeks are numbered from Monday 2019-12-30
(week 1), so week 3 starts on 2020-01-13.
"""

from __future__ import annotations

import datetime as dt
import json
import logging
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from typing import TextIO

from termvar.lexicon import TOKEN_RE

logger = logging.getLogger(__name__)

WEEK_EPOCH = dt.date(2019, 12, 30)

FIELDS = ("title", "abstract")


def _count_runs(text: str) -> int:
    return len(TOKEN_RE.findall(text)) if text else 0


@dataclass(frozen=True)
class DocumentRecord:
    doc_id: str
    date_added: dt.date
    title: str
    abstract: str = ""
    token_count: int = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.doc_id, str) or not self.doc_id:
            raise ValueError("doc_id must be a non-empty string")
        if any(c in self.doc_id for c in "\t\r\n"):
            raise ValueError(f"doc_id may not contain tabs or newlines: {self.doc_id!r}")
        if isinstance(self.date_added, str):
            object.__setattr__(self, "date_added", dt.date.fromisoformat(self.date_added))
        object.__setattr__(self, "token_count", count_tokens(self))

    def field_text(self, name: str) -> str:
        if name not in FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    @property
    def week(self) -> int:
        return week_of(self.date_added)


def count_tokens(record: DocumentRecord) -> int:
    """Maximal alphanumeric runs in the title plus those in the abstract.

    Fields are counted separately, so a title ending in a letter and an
    abstract starting with one never merge into a single token.
    """
    return _count_runs(record.title) + _count_runs(record.abstract)


def week_of(date: dt.date | str) -> int:
    """1-based week index of ``date``; raises ValueError before 2019-12-30."""
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    days = (date - WEEK_EPOCH).days
    if days < 0:
        raise ValueError(f"{date.isoformat()} is before the first analysis week ({WEEK_EPOCH.isoformat()})")
    return 1 + days // 7


def week_start(week: int) -> dt.date:
    if week < 1:
        raise ValueError(f"week index must be >= 1, got {week}")
    return WEEK_EPOCH + dt.timedelta(days=7 * (week - 1))


@dataclass
class ReadStats:
    """Running counts filled in by :func:`read_corpus`."""

    records: int = 0
    errors: int = 0
    duplicates: int = 0


def _parse_record(line: str) -> DocumentRecord:
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    for name in ("doc_id", "date_added", "title"):
        if name not in obj:
            raise ValueError(f"missing required field {name!r}")
        if not isinstance(obj[name], str):
            raise ValueError(f"field {name!r} must be a string")
    abstract = obj.get("abstract")
    if abstract is None:
        abstract = ""
    elif not isinstance(abstract, str):
        raise ValueError("field 'abstract' must be a string")
    return DocumentRecord(obj["doc_id"], obj["date_added"], obj["title"], abstract)


def read_corpus(
    stream: TextIO | Iterable[str],
    stats: ReadStats | None = None,
    source: str | None = None,
) -> Iterator[DocumentRecord]:
    """Yield records in file order, skipping malformed lines and repeated ids.

    Problems are logged with their line number and counted in ``stats``.
    Only the set of seen ids is retained between records.
    """
    stats = stats if stats is not None else ReadStats()
    prefix = f"{source}:" if source else "line "
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            record = _parse_record(line)
        except (ValueError, TypeError) as exc:
            stats.errors += 1
            logger.warning("%s%d: skipping malformed record: %s", prefix, lineno, exc)
            continue
        if record.doc_id in seen:
            stats.duplicates += 1
            logger.warning("%s%d: duplicate doc_id %r skipped", prefix, lineno, record.doc_id)
            continue
        seen.add(record.doc_id)
        stats.records += 1
        yield record


def iter_corpus_file(path, stats: ReadStats | None = None) -> Iterator[DocumentRecord]:
    with open(path, encoding="utf-8") as fh:
        yield from read_corpus(fh, stats, source=str(path))


def record_to_json(record: DocumentRecord) -> str:
    obj = {"doc_id": record.doc_id, "date_added": record.date_added.isoformat(), "title": record.title}
    if record.abstract:
        obj["abstract"] = record.abstract
    return json.dumps(obj, ensure_ascii=False)
