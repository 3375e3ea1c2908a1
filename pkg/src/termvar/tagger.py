"""Normalization-insensitive dictionary tagging.

Terms are matched on the normalized character stream (case folded, with
whitespace and punctuation removed), so ``COVID-19``, ``covid 19`` and
``Covid19`` all match the key ``covid19``.  Two restrictions keep this
from producing substring noise:

* a match must start at the beginning and end at the end of a maximal
  alphanumeric run of the original text (``covid`` does not match inside
  ``covidiot``);
* among overlapping matches only the leftmost-longest survives, which in
  particular drops every mention embedded in a longer one.

Offsets are UTF-8 byte offsets into the original field text.

There are two matching routes.  :func:`raw_matches` runs an Aho-Corasick
automaton over an :class:`OffsetMap` and returns every candidate, nested
and overlapping ones included.  :func:`tag_document` and
:func:`tag_corpus` go straight to resolved mentions with a compiled trie
regex over a folded copy of the text; they produce the same result as
``resolve_spans(raw_matches(...))`` at a fraction of the cost.
"""

from __future__ import annotations

import logging
import random
import re
from collections import Counter, defaultdict, deque
from collections.abc import Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import TextIO

from termvar.corpus import FIELDS, DocumentRecord
from termvar.errors import ParseError
from termvar.lexicon import Lexicon, fold_blank, fold_char, normalize

logger = logging.getLogger(__name__)

SNIPPET_CONTEXT = 80
MARK_OPEN = "[["
MARK_CLOSE = "]]"

MENTION_COLUMNS = ("doc_id", "field", "start", "end", "surface", "term_key", "entity")
_FIELD_ORDER = {name: i for i, name in enumerate(FIELDS)}


def _utf8_len(ch: str) -> int:
    cp = ord(ch)
    if cp < 0x80:
        return 1
    if cp < 0x800:
        return 2
    if cp < 0x10000:
        return 3
    return 4


@dataclass(frozen=True)
class OffsetMap:
    """Normalized text of one field plus, per normalized character, the
    byte span of the original character it came from."""

    text: str
    normalized_text: str
    positions: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.normalized_text)

    @cached_property
    def run_starts(self) -> list[bool]:
        """run_starts[i]: normalized index i begins an alphanumeric run."""
        pos = self.positions
        return [i == 0 or pos[i - 1][1] != pos[i][0] for i in range(len(pos))]

    @cached_property
    def run_ends(self) -> list[bool]:
        """run_ends[j]: a match ending just before normalized index j ends a run."""
        pos = self.positions
        n = len(pos)
        return [j == n or (j > 0 and pos[j - 1][1] != pos[j][0]) for j in range(n + 1)]

    def byte_span(self, i: int, j: int) -> tuple[int, int]:
        """Original byte span of normalized slice [i, j)."""
        return self.positions[i][0], self.positions[j - 1][1]


def normalize_with_offsets(text: str) -> OffsetMap:
    chars: list[str] = []
    positions: list[tuple[int, int]] = []
    offset = 0
    for ch in text:
        width = _utf8_len(ch)
        if ch.isalnum():
            chars.append(fold_char(ch))
            positions.append((offset, offset + width))
        offset += width
    return OffsetMap(text, "".join(chars), tuple(positions))


class AhoCorasick:
    """Character-level Aho-Corasick automaton over a fixed set of keys."""

    def __init__(self, keys: Iterable[str]):
        self._goto: list[dict[str, int]] = [{}]
        self._out: list[tuple[str, ...]] = [()]
        for key in sorted(set(keys)):
            if not key:
                raise ValueError("empty key")
            node = 0
            for ch in key:
                nxt = self._goto[node].get(ch)
                if nxt is None:
                    nxt = len(self._goto)
                    self._goto[node][ch] = nxt
                    self._goto.append({})
                    self._out.append(())
                node = nxt
            self._out[node] = (key,)

        self._fail = [0] * len(self._goto)
        queue: deque[int] = deque(self._goto[0].values())
        while queue:
            node = queue.popleft()
            for ch, child in self._goto[node].items():
                queue.append(child)
                f = self._fail[node]
                while f and ch not in self._goto[f]:
                    f = self._fail[f]
                target = self._goto[f].get(ch, 0)
                self._fail[child] = target if target != child else 0
                self._out[child] = self._out[child] + self._out[self._fail[child]]

    def __len__(self) -> int:
        return len(self._goto)

    def iter_matches(self, text: str):
        """Yield (start, end, key) for every occurrence of every key."""
        goto, fail, out = self._goto, self._fail, self._out
        node = 0
        for i, ch in enumerate(text):
            while node and ch not in goto[node]:
                node = fail[node]
            node = goto[node].get(ch, 0)
            for key in out[node]:
                yield i + 1 - len(key), i + 1, key


@dataclass(frozen=True, order=True)
class Mention:
    doc_id: str
    field: str
    start: int
    end: int
    surface: str
    term_key: str
    entity: str

    def sort_key(self) -> tuple:
        return (self.doc_id, _FIELD_ORDER.get(self.field, len(FIELDS)), self.start, -self.end, self.term_key, self.entity)


class Matcher:
    """Immutable multi-pattern matcher built from a lexicon.

    ``key_to_entities`` maps each normalized key to the entity ids of the
    terms sharing it, in sorted order.
    """

    def __init__(self, key_to_entities: Mapping[str, Iterable[str]]):
        if not key_to_entities:
            raise ValueError("cannot build a matcher from an empty lexicon")
        self.key_to_entities: dict[str, tuple[str, ...]] = {
            k: tuple(sorted(set(v))) for k, v in sorted(key_to_entities.items())
        }
        if "" in self.key_to_entities:
            raise ValueError("empty key")

    @cached_property
    def automaton(self) -> AhoCorasick:
        return AhoCorasick(self.key_to_entities)

    @cached_property
    def regex(self) -> re.Pattern:
        return re.compile(_build_regex(self.key_to_entities))

    @property
    def keys(self) -> list[str]:
        return list(self.key_to_entities)

    def __reduce__(self):
        return (Matcher, (self.key_to_entities,))


def _build_regex(keys: Iterable[str]) -> str:
    root: dict = {}
    for key in keys:
        node = root
        for ch in key:
            node = node.setdefault(ch, {})
        node[""] = True

    built: dict[int, str] = {}
    stack: list[tuple[dict, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        children = sorted(k for k in node if k)
        if not expanded:
            stack.append((node, True))
            stack.extend((node[ch], False) for ch in children)
            continue
        sep = "" if node is root else " *"
        alts = [sep + re.escape(ch) + built.pop(id(node[ch])) for ch in children]
        if "" in node:
            # Longer continuations come first, so the first success is the
            # longest match from this start.
            alts.append("(?![^ ])")
        built[id(node)] = alts[0] if len(alts) == 1 else "(?:" + "|".join(alts) + ")"
    return "(?<![^ ])" + built[id(root)]


def build_matcher(lexicon: Lexicon) -> Matcher:
    mapping: dict[str, set[str]] = defaultdict(set)
    for term in lexicon:
        mapping[term.normalized].add(term.entity)
    return Matcher(mapping)


def raw_matches(matcher: Matcher, offmap: OffsetMap, doc_id: str = "", field: str = "title") -> list[Mention]:
    """Every run-aligned key occurrence, nested and overlapping ones included.

    One mention is produced per entity bound to the matched key.
    """
    starts, ends = offmap.run_starts, offmap.run_ends
    text_bytes = offmap.text.encode("utf-8")
    out = []
    for i, j, key in matcher.automaton.iter_matches(offmap.normalized_text):
        if not (starts[i] and ends[j]):
            continue
        b0, b1 = offmap.byte_span(i, j)
        surface = text_bytes[b0:b1].decode("utf-8")
        for entity in matcher.key_to_entities[key]:
            out.append(Mention(doc_id, field, b0, b1, surface, key, entity))
    out.sort(key=Mention.sort_key)
    return out


def resolve_spans(candidates: Iterable[Mention]) -> list[Mention]:
    """Drop embedded mentions and resolve overlaps leftmost-longest.

    Candidates must come from one field.  Scanning by start position, the
    longest candidate at the earliest uncovered position is kept and every
    candidate starting inside it is skipped.  All entity records of a kept
    span are kept.
    """
    ordered = sorted(candidates, key=lambda m: (m.start, -m.end, m.term_key, m.entity))
    kept: list[Mention] = []
    covered_to = -1
    span: tuple[int, int] | None = None
    for m in ordered:
        if span is not None and (m.start, m.end) == span and m.term_key == kept[-1].term_key:
            kept.append(m)
            continue
        if m.start < covered_to:
            continue
        kept.append(m)
        span = (m.start, m.end)
        covered_to = m.end
    return kept


def _tag_text(matcher: Matcher, text: str, doc_id: str, field: str) -> list[Mention]:
    if not text:
        return []
    folded = fold_blank(text)
    k2e = matcher.key_to_entities
    ascii_text = text.isascii()
    out: list[Mention] = []
    last_char = last_byte = 0
    for m in matcher.regex.finditer(folded):
        s, e = m.span()
        if ascii_text:
            b0, b1 = s, e
        else:
            b0 = last_byte + len(text[last_char:s].encode("utf-8"))
            b1 = b0 + len(text[s:e].encode("utf-8"))
            last_char, last_byte = e, b1
        key = folded[s:e].replace(" ", "")
        surface = text[s:e]
        for entity in k2e[key]:
            out.append(Mention(doc_id, field, b0, b1, surface, key, entity))
    return out


def tag_document(matcher: Matcher, record: DocumentRecord) -> list[Mention]:
    """Resolved mentions of one document, title first."""
    out: list[Mention] = []
    for name in FIELDS:
        out.extend(_tag_text(matcher, getattr(record, name), record.doc_id, name))
    return out


@dataclass
class MentionIndex:
    """Resolved mentions of a corpus, sorted by (doc_id, field, start)."""

    mentions: list[Mention] = field(default_factory=list)
    documents: int = 0
    skipped: int = 0

    def __post_init__(self) -> None:
        self.mentions = sorted(self.mentions, key=Mention.sort_key)

    def __len__(self) -> int:
        return len(self.mentions)

    def __iter__(self):
        return iter(self.mentions)

    @cached_property
    def term_counts(self) -> Counter:
        """Mention count per (entity, key)."""
        return Counter((m.entity, m.term_key) for m in self.mentions)

    @cached_property
    def term_documents(self) -> dict[tuple[str, str], set[str]]:
        out: dict[tuple[str, str], set[str]] = defaultdict(set)
        for m in self.mentions:
            out[(m.entity, m.term_key)].add(m.doc_id)
        return dict(out)

    @cached_property
    def by_doc(self) -> dict[str, list[Mention]]:
        out: dict[str, list[Mention]] = defaultdict(list)
        for m in self.mentions:
            out[m.doc_id].append(m)
        return dict(out)

    def for_key(self, term_key: str) -> list[Mention]:
        return [m for m in self.mentions if m.term_key == term_key]

    def attested(self) -> set[tuple[str, str]]:
        return set(self.term_counts)

    def entity_totals(self) -> Counter:
        return Counter(m.entity for m in self.mentions)


def _coerce_record(doc) -> DocumentRecord:
    if isinstance(doc, DocumentRecord):
        return doc
    if isinstance(doc, Mapping):
        return DocumentRecord(doc["doc_id"], doc["date_added"], doc["title"], doc.get("abstract") or "")
    raise TypeError(f"not a document record: {type(doc).__name__}")


_WORKER_MATCHER: Matcher | None = None


def _init_worker(matcher: Matcher) -> None:
    global _WORKER_MATCHER
    _WORKER_MATCHER = matcher


def _tag_batch(records: list[DocumentRecord]) -> list[Mention]:
    assert _WORKER_MATCHER is not None
    out: list[Mention] = []
    for rec in records:
        out.extend(tag_document(_WORKER_MATCHER, rec))
    return out


def _batches(records: Iterable[DocumentRecord], size: int):
    batch: list[DocumentRecord] = []
    for rec in records:
        batch.append(rec)
        if len(batch) >= size:
            yield batch
            batch = []
    if batch:
        yield batch


def tag_corpus(matcher: Matcher, corpus: Iterable, jobs: int = 1, batch_size: int = 512) -> MentionIndex:
    """Tag every document of ``corpus``.

    Items that are not valid document records are logged, counted in
    ``MentionIndex.skipped`` and otherwise ignored.  With ``jobs > 1``
    batches are tagged in worker processes; the result is the same as the
    single-process one.
    """
    stats = {"documents": 0, "skipped": 0}

    def valid_records():
        for n, doc in enumerate(corpus, start=1):
            try:
                rec = _coerce_record(doc)
            except (KeyError, TypeError, ValueError) as exc:
                stats["skipped"] += 1
                logger.warning("document #%d skipped: %s", n, exc)
                continue
            stats["documents"] += 1
            yield rec

    mentions: list[Mention] = []
    if jobs <= 1:
        for rec in valid_records():
            mentions.extend(tag_document(matcher, rec))
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(matcher,)) as pool:
            for part in pool.map(_tag_batch, _batches(valid_records(), batch_size)):
                mentions.extend(part)
    return MentionIndex(mentions, documents=stats["documents"], skipped=stats["skipped"])


def filter_unattested(candidates: Lexicon, index: MentionIndex) -> Lexicon:
    """Keep the terms with at least one resolved mention under their entity."""
    attested = index.attested()
    kept = candidates.restrict(lambda t: (t.entity, t.normalized) in attested)
    if not len(kept):
        logger.warning("no candidate term is attested in the corpus")
    return kept


def _clip_snippet(text: str, start: int, end: int, width: int) -> str:
    raw = text.encode("utf-8")
    lo = max(0, start - width)
    while lo < start and (raw[lo] & 0xC0) == 0x80:
        lo += 1
    hi = min(len(raw), end + width)
    while hi > end and hi < len(raw) and (raw[hi] & 0xC0) == 0x80:
        hi -= 1
    snippet = (
        raw[lo:start].decode("utf-8") + MARK_OPEN + raw[start:end].decode("utf-8")
        + MARK_CLOSE + raw[end:hi].decode("utf-8")
    )
    return " ".join(snippet.split())


def export_review_samples(
    index: MentionIndex,
    term_key: str,
    k: int,
    texts: Mapping[tuple[str, str], str],
    seed: int = 0,
    width: int = SNIPPET_CONTEXT,
) -> list[str]:
    """Up to ``k`` context snippets for ``term_key``.

    ``texts`` maps (doc_id, field) to the original field text.  Snippets
    show ``width`` bytes either side of the mention, cut back to whole
    characters, with the mention wrapped in ``[[ ]]``.  Selection depends
    only on ``seed``, the key and the mention list.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    mentions = index.for_key(normalize(term_key) or term_key)
    # one snippet per span even when the key is bound to several entities
    spans = sorted({(m.doc_id, m.field, m.start, m.end) for m in mentions},
                   key=lambda s: (s[0], _FIELD_ORDER.get(s[1], 9), s[2]))
    if not spans:
        logger.warning("no mentions for key %r", term_key)
        return []
    rng = random.Random(f"{seed}\x00{term_key}")
    chosen = sorted(rng.sample(range(len(spans)), min(k, len(spans))))
    out = []
    for i in chosen:
        doc_id, fld, start, end = spans[i]
        text = texts.get((doc_id, fld))
        if text is None:
            logger.warning("no text for %s/%s; snippet skipped", doc_id, fld)
            continue
        out.append(_clip_snippet(text, start, end, width))
    return out


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")


_UNESCAPE_RE = re.compile(r"\\(.)")
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}


def _unescape(value: str) -> str:
    return _UNESCAPE_RE.sub(lambda m: _UNESCAPES.get(m.group(1), m.group(1)), value)


def write_mentions(index: MentionIndex | Iterable[Mention], stream: TextIO) -> None:
    """Mention TSV with a header row; tabs and newlines inside surfaces
    are backslash-escaped."""
    stream.write("\t".join(MENTION_COLUMNS) + "\n")
    for m in index:
        stream.write(f"{m.doc_id}\t{m.field}\t{m.start}\t{m.end}\t{_escape(m.surface)}\t{m.term_key}\t{m.entity}\n")


def read_mentions(stream: TextIO | Iterable[str], source: str | None = None) -> MentionIndex:
    mentions = []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line:
            continue
        cols = line.split("\t")
        if lineno == 1 and tuple(cols) == MENTION_COLUMNS:
            continue
        if len(cols) != len(MENTION_COLUMNS):
            raise ParseError(f"expected {len(MENTION_COLUMNS)} columns, got {len(cols)}", lineno, source)
        doc_id, fld, start, end, surface, key, entity = cols
        if fld not in _FIELD_ORDER:
            raise ParseError(f"unknown field {fld!r}", lineno, source)
        try:
            b0, b1 = int(start), int(end)
        except ValueError:
            raise ParseError("start/end must be integers", lineno, source) from None
        if not 0 <= b0 < b1:
            raise ParseError(f"bad span {b0}..{b1}", lineno, source)
        mentions.append(Mention(doc_id, fld, b0, b1, _unescape(surface), key, entity))
    return MentionIndex(mentions, documents=len({m.doc_id for m in mentions}))


def read_mentions_file(path) -> MentionIndex:
    with open(path, encoding="utf-8", newline="") as fh:
        return read_mentions(fh, source=str(path))
