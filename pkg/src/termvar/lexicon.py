"""Entities, terms, normalization and the TSV dictionary format.

A *normalized key* is what the tagger actually matches on: every
alphanumeric character of a surface string, case folded, with everything
else (whitespace, hyphens, dashes, brackets, ...) removed.  Two surfaces
with the same key are the same term as far as matching is concerned.

Dictionary files are UTF-8 TSV::

    #entity	COVID-19	disease
    #entity	SARS-CoV-2	virus
    COVID-19	coronavirus disease 2019	base
    COVID-19	COVID-19 disease	generated	e2

Lines starting with ``#`` other than ``#entity`` declarations are comments.
Entities must be declared before they are used.
"""

from __future__ import annotations

import enum
import io
import logging
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TextIO

from termvar.errors import ParseError

logger = logging.getLogger(__name__)

# A token is a maximal run of alphanumeric characters.  For str patterns
# ``[^\W_]`` is exactly the set of characters for which str.isalnum() holds.
TOKEN_RE = re.compile(r"[^\W_]+")

DERIVATION_SEP = ","


class EntityKind(str, enum.Enum):
    DISEASE = "disease"
    VIRUS = "virus"
    OTHER = "other"


class Provenance(str, enum.Enum):
    BASE = "base"
    GENERATED = "generated"
    EXTERNAL = "external"


def fold_char(ch: str) -> str:
    """Case fold a single alphanumeric character to a single character.

    Uses the full Unicode case fold when it is one character long (which is
    then identical to the simple fold).  Characters whose full fold expands
    (``ß``, ``İ``, ligatures) fall back to ``str.lower`` if that is a single
    character, and otherwise to the first alphanumeric character of the
    fold.  Keeping the mapping one-to-one lets normalized positions map
    straight back to original characters.
    """
    folded = ch.casefold()
    if len(folded) == 1:
        return folded
    lowered = ch.lower()
    if len(lowered) == 1:
        return lowered
    for c in folded:
        if c.isalnum():
            return c
    return ch


class _FoldTable(dict):
    """str.translate table, filled lazily per code point."""

    def __init__(self, replacement: str | None):
        super().__init__()
        self._replacement = replacement

    def __missing__(self, cp: int) -> str | None:
        ch = chr(cp)
        value = fold_char(ch) if ch.isalnum() else self._replacement
        self[cp] = value
        return value


_DELETE_TABLE = _FoldTable(None)
_BLANK_TABLE = _FoldTable(" ")


def normalize(surface: str) -> str:
    """Return the normalized key of ``surface``.

    >>> normalize("SARS-CoV-2")
    'sarscov2'
    >>> normalize("!!!")
    ''
    """
    return surface.translate(_DELETE_TABLE)


def fold_blank(text: str) -> str:
    """Fold alphanumerics and replace every other character with a space.

    The result has the same length as ``text``, character for character,
    which is what the tagger's fast path relies on.
    """
    return text.translate(_BLANK_TABLE)


def tokenize(text: str) -> list[str]:
    """Return the maximal alphanumeric runs of ``text``."""
    return TOKEN_RE.findall(text)


def token_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in TOKEN_RE.finditer(text)]


@dataclass(frozen=True)
class Entity:
    id: str
    kind: EntityKind = EntityKind.OTHER

    def __post_init__(self) -> None:
        if not self.id or self.id != self.id.strip() or "\t" in self.id:
            raise ValueError(f"invalid entity id {self.id!r}")
        object.__setattr__(self, "kind", EntityKind(self.kind))


@dataclass(frozen=True)
class Term:
    surface: str
    entity: str
    provenance: Provenance = Provenance.BASE
    derivation: tuple[str, ...] = ()
    normalized: str = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if any(c in self.surface for c in "\t\r\n"):
            raise ValueError(f"term surface may not contain tabs or newlines: {self.surface!r}")
        key = normalize(self.surface)
        if not key:
            raise ValueError(f"term surface has no alphanumeric characters: {self.surface!r}")
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(self, "derivation", tuple(self.derivation))
        object.__setattr__(self, "normalized", key)

    @property
    def n_tokens(self) -> int:
        return len(TOKEN_RE.findall(self.surface))


class Lexicon:
    """An immutable set of terms grouped by entity.

    Within an entity normalized keys are unique: when two terms collapse to
    the same key the first one added wins and the collision is logged.  The
    same key under two *different* entities is kept (see
    :func:`detect_entity_conflicts`).
    """

    def __init__(
        self,
        entities: Iterable[Entity],
        terms: Iterable[Term] = (),
        *,
        lines: Mapping[tuple[str, str], int] | None = None,
    ):
        self.entities: tuple[Entity, ...] = tuple(entities)
        ids = [e.id for e in self.entities]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate entity ids: {ids}")
        self._entity_by_id = {e.id: e for e in self.entities}

        kept: list[Term] = []
        seen: dict[tuple[str, str], Term] = {}
        for term in terms:
            if term.entity not in self._entity_by_id:
                raise ValueError(f"term {term.surface!r} names unknown entity {term.entity!r}")
            ident = (term.entity, term.normalized)
            if ident in seen:
                logger.warning(
                    "duplicate key %r for %s: keeping %r, dropping %r",
                    term.normalized, term.entity, seen[ident].surface, term.surface,
                )
                continue
            seen[ident] = term
            kept.append(term)
        self.terms: tuple[Term, ...] = tuple(kept)

        index: dict[str, list[Term]] = {}
        for term in self.terms:
            index.setdefault(term.normalized, []).append(term)
        self.index: Mapping[str, tuple[Term, ...]] = MappingProxyType(
            {k: tuple(v) for k, v in index.items()}
        )
        self.lines: Mapping[tuple[str, str], int] = MappingProxyType(dict(lines or {}))

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[Term]:
        return iter(self.terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Lexicon):
            return NotImplemented
        return self.entities == other.entities and self.terms == other.terms

    def __repr__(self) -> str:
        return f"Lexicon({len(self.entities)} entities, {len(self.terms)} terms)"

    def entity(self, entity_id: str) -> Entity:
        return self._entity_by_id[entity_id]

    @property
    def entity_ids(self) -> list[str]:
        return [e.id for e in self.entities]

    def has_entity(self, entity_id: str) -> bool:
        return entity_id in self._entity_by_id

    def terms_for(self, entity_id: str) -> list[Term]:
        return [t for t in self.terms if t.entity == entity_id]

    def keys(self, entity_id: str | None = None) -> set[str]:
        if entity_id is None:
            return set(self.index)
        return {t.normalized for t in self.terms if t.entity == entity_id}

    def lookup(self, surface_or_key: str) -> tuple[Term, ...]:
        return self.index.get(normalize(surface_or_key), ())

    def counts(self) -> dict[str, int]:
        """Number of terms per entity, in declaration order."""
        out = {e.id: 0 for e in self.entities}
        for t in self.terms:
            out[t.entity] += 1
        return out

    def restrict(self, predicate) -> Lexicon:
        """A new lexicon with the same entities and only the terms passing ``predicate``."""
        return Lexicon(self.entities, [t for t in self.terms if predicate(t)])


def load_dictionary(stream: TextIO | Iterable[str], source: str | None = None) -> Lexicon:
    """Parse a TSV dictionary.

    Raises :class:`ParseError` naming the line for a wrong column count,
    an undeclared entity, a bad provenance or an empty surface.  Repeated
    (entity, key) pairs are logged and the first occurrence kept.
    """
    entities: dict[str, Entity] = {}
    terms: list[Term] = []
    lines: dict[tuple[str, str], int] = {}

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            cols = line.split("\t")
            if cols[0] == "#entity":
                if len(cols) != 3:
                    raise ParseError("entity declaration needs 3 columns: #entity, id, kind", lineno, source)
                if cols[1] in entities:
                    raise ParseError(f"entity {cols[1]!r} declared twice", lineno, source)
                try:
                    entities[cols[1]] = Entity(cols[1], EntityKind(cols[2]))
                except ValueError as exc:
                    raise ParseError(str(exc), lineno, source) from None
            continue

        cols = line.split("\t")
        if len(cols) not in (3, 4):
            raise ParseError(f"expected 3 or 4 tab-separated columns, got {len(cols)}", lineno, source)
        entity_id, surface, prov = cols[:3]
        if entity_id not in entities:
            raise ParseError(f"unknown entity id {entity_id!r}", lineno, source)
        if not surface.strip():
            raise ParseError("empty surface", lineno, source)
        derivation: tuple[str, ...] = ()
        if len(cols) == 4 and cols[3]:
            derivation = tuple(cols[3].split(DERIVATION_SEP))
        try:
            term = Term(surface, entity_id, Provenance(prov), derivation)
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None

        ident = (entity_id, term.normalized)
        if ident in lines:
            logger.warning(
                "%sline %d: %r duplicates key %r of line %d for %s; keeping the first",
                f"{source}: " if source else "", lineno, surface, term.normalized, lines[ident], entity_id,
            )
            continue
        lines[ident] = lineno
        terms.append(term)

    return Lexicon(entities.values(), terms, lines=lines)


def read_dictionary(path) -> Lexicon:
    with open(path, encoding="utf-8", newline="") as fh:
        return load_dictionary(fh, source=str(path))


def dump_dictionary(lexicon: Lexicon, stream: TextIO) -> None:
    for entity in lexicon.entities:
        stream.write(f"#entity\t{entity.id}\t{entity.kind.value}\n")
    for term in lexicon.terms:
        row = [term.entity, term.surface, term.provenance.value]
        if term.derivation:
            row.append(DERIVATION_SEP.join(term.derivation))
        stream.write("\t".join(row) + "\n")


def format_dictionary(lexicon: Lexicon) -> str:
    buf = io.StringIO()
    dump_dictionary(lexicon, buf)
    return buf.getvalue()


def detect_entity_conflicts(lexicon: Lexicon) -> list[tuple[str, list[str]]]:
    """Keys bound to terms of two or more entities, sorted by key."""
    conflicts = []
    for key in sorted(lexicon.index):
        ents = sorted({t.entity for t in lexicon.index[key]})
        if len(ents) >= 2:
            conflicts.append((key, ents))
    return conflicts
