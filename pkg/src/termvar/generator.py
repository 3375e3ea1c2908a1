"""Rule-based expansion of a seed lexicon into candidate terms.

Three kinds of rule are supported:

* substitutions swap one phrase for another inside a term
  (``novel`` -> ``new``, ``2019`` -> ``19``, ``coronavirus`` -> ``virus``);
* cross-entity expansions attach an affix and move the term to another
  entity (virus term + ``infection`` -> disease term);
* same-entity expansions attach an affix and keep the entity
  (disease term + ``disease`` -> disease term).

Rules are applied breadth first until nothing new appears.  Termination is
guaranteed by capping how many times a single rule may occur along one
derivation (default once), by a maximum term length in tokens, and by a
hard ceiling on the number of candidates.

Rules file (UTF-8 TSV)::

    sub	s1	novel	new	synonym	bidir
    exp	e1	infection	suffix	SARS-CoV-2	COVID-19
    limit	max_term_tokens	10
"""

from __future__ import annotations

import enum
import logging
from collections import Counter, deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, fields, replace
from typing import TextIO

from termvar.errors import CapacityError, ParseError
from termvar.lexicon import TOKEN_RE, Lexicon, Provenance, Term, normalize, tokenize

logger = logging.getLogger(__name__)


class Relation(str, enum.Enum):
    SYNONYM = "synonym"
    NEAR_SYNONYM = "near_synonym"
    HYPERNYM = "hypernym"


class Position(str, enum.Enum):
    PREFIX = "prefix"
    SUFFIX = "suffix"


def _check_rule_id(rule_id: str) -> None:
    if not rule_id or any(c.isspace() or c == "," for c in rule_id):
        raise ValueError(f"invalid rule id {rule_id!r}")


def _folded_tokens(text: str) -> tuple[str, ...]:
    return tuple(normalize(tok) for tok in tokenize(text))


@dataclass(frozen=True)
class SubstitutionRule:
    id: str
    lhs: str
    rhs: str
    relation: Relation = Relation.SYNONYM
    bidirectional: bool = False

    def __post_init__(self) -> None:
        _check_rule_id(self.id)
        object.__setattr__(self, "relation", Relation(self.relation))
        if not normalize(self.lhs) or not normalize(self.rhs):
            raise ValueError(f"rule {self.id}: both sides need alphanumeric content")
        if normalize(self.lhs) == normalize(self.rhs):
            raise ValueError(f"rule {self.id}: lhs and rhs normalize to the same key")


@dataclass(frozen=True)
class ExpansionRule:
    id: str
    affix: str
    position: Position
    source_entity: str
    target_entity: str

    def __post_init__(self) -> None:
        _check_rule_id(self.id)
        object.__setattr__(self, "position", Position(self.position))
        if not normalize(self.affix):
            raise ValueError(f"rule {self.id}: affix needs alphanumeric content")

    @property
    def cross_entity(self) -> bool:
        return self.source_entity != self.target_entity


@dataclass(frozen=True)
class GenerationLimits:
    max_rule_applications_per_derivation: int = 1
    max_term_tokens: int = 12
    max_candidates: int = 500_000

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ValueError(f"limit {f.name} must be a positive integer, got {value!r}")


@dataclass(frozen=True)
class RuleSet:
    substitutions: tuple[SubstitutionRule, ...] = ()
    expansions: tuple[ExpansionRule, ...] = ()
    limits: GenerationLimits = field(default_factory=GenerationLimits)

    def __post_init__(self) -> None:
        object.__setattr__(self, "substitutions", tuple(self.substitutions))
        object.__setattr__(self, "expansions", tuple(self.expansions))
        seen: set[str] = set()
        for rule in self:
            if rule.id in seen:
                raise ValueError(f"duplicate rule id {rule.id!r}")
            seen.add(rule.id)

    def __iter__(self) -> Iterator[SubstitutionRule | ExpansionRule]:
        yield from self.substitutions
        yield from self.expansions

    def __len__(self) -> int:
        return len(self.substitutions) + len(self.expansions)

    def with_limits(self, **overrides: int) -> RuleSet:
        known = {f.name for f in fields(GenerationLimits)}
        unknown = sorted(set(overrides) - known)
        if unknown:
            raise ValueError(f"unknown limit {unknown[0]!r}; expected one of {', '.join(sorted(known))}")
        return replace(self, limits=replace(self.limits, **overrides))

    def check_entities(self, entity_ids: Iterable[str]) -> None:
        known = set(entity_ids)
        for rule in self.expansions:
            for ent in (rule.source_entity, rule.target_entity):
                if ent not in known:
                    raise ValueError(f"rule {rule.id}: unknown entity {ent!r}")


_LIMIT_NAMES = {f.name for f in fields(GenerationLimits)}


def parse_ruleset(
    stream: TextIO | Iterable[str],
    entities: Iterable[str] | None = None,
    source: str | None = None,
) -> RuleSet:
    """Parse a rules TSV.  If ``entities`` is given, expansion rules naming
    any other entity are rejected."""
    known = set(entities) if entities is not None else None
    subs: list[SubstitutionRule] = []
    exps: list[ExpansionRule] = []
    limits: dict[str, int] = {}
    ids: set[str] = set()

    for lineno, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        kind = cols[0]
        try:
            if kind == "sub":
                if len(cols) != 6:
                    raise ParseError(f"sub line needs 6 columns, got {len(cols)}", lineno, source)
                _, rid, lhs, rhs, relation, direction = cols
                if direction not in ("bidir", "uni"):
                    raise ParseError(f"direction must be bidir or uni, got {direction!r}", lineno, source)
                rule = SubstitutionRule(rid, lhs, rhs, Relation(relation), direction == "bidir")
                subs.append(rule)
            elif kind == "exp":
                if len(cols) != 6:
                    raise ParseError(f"exp line needs 6 columns, got {len(cols)}", lineno, source)
                _, rid, affix, position, src, tgt = cols
                if known is not None:
                    for ent in (src, tgt):
                        if ent not in known:
                            raise ParseError(f"unknown entity id {ent!r}", lineno, source)
                rule = ExpansionRule(rid, affix, Position(position), src, tgt)
                exps.append(rule)
            elif kind == "limit":
                if len(cols) != 3:
                    raise ParseError(f"limit line needs 3 columns, got {len(cols)}", lineno, source)
                if cols[1] not in _LIMIT_NAMES:
                    raise ParseError(f"unknown limit {cols[1]!r}", lineno, source)
                limits[cols[1]] = int(cols[2])
                continue
            else:
                raise ParseError(f"unknown line type {kind!r}", lineno, source)
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        if rule.id in ids:
            raise ParseError(f"duplicate rule id {rule.id!r}", lineno, source)
        ids.add(rule.id)

    try:
        return RuleSet(tuple(subs), tuple(exps), GenerationLimits(**limits))
    except ValueError as exc:
        raise ParseError(str(exc), source=source) from None


def read_ruleset(path, entities: Iterable[str] | None = None) -> RuleSet:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_ruleset(fh, entities, source=str(path))


def format_ruleset(rules: RuleSet) -> str:
    lines = []
    for r in rules.substitutions:
        direction = "bidir" if r.bidirectional else "uni"
        lines.append(f"sub\t{r.id}\t{r.lhs}\t{r.rhs}\t{r.relation.value}\t{direction}")
    for e in rules.expansions:
        lines.append(f"exp\t{e.id}\t{e.affix}\t{e.position.value}\t{e.source_entity}\t{e.target_entity}")
    for f in fields(GenerationLimits):
        value = getattr(rules.limits, f.name)
        if value != f.default:
            lines.append(f"limit\t{f.name}\t{value}")
    return "".join(line + "\n" for line in lines)


def _substitution_sites(term: Term, rule: SubstitutionRule) -> list[Term]:
    spans = [m.span() for m in TOKEN_RE.finditer(term.surface)]
    toks = [normalize(term.surface[s:e]) for s, e in spans]
    directions = [(rule.lhs, rule.rhs)]
    if rule.bidirectional:
        directions.append((rule.rhs, rule.lhs))

    out: list[Term] = []
    for find, put in directions:
        pattern = list(_folded_tokens(find))
        n = len(pattern)
        for i in range(len(toks) - n + 1):
            if toks[i:i + n] == pattern:
                start, end = spans[i][0], spans[i + n - 1][1]
                surface = term.surface[:start] + put + term.surface[end:]
                out.append(Term(surface, term.entity, Provenance.GENERATED, term.derivation + (rule.id,)))
    return out


def apply_substitution(term: Term, rule: SubstitutionRule) -> set[Term]:
    """All terms obtained by rewriting one occurrence of the rule's phrase.

    Matching is case-insensitive and token aligned, so ``new`` never
    rewrites inside ``newer``.  Each occurrence yields its own output;
    bidirectional rules also rewrite occurrences of the right-hand side.
    """
    return set(_substitution_sites(term, rule))


def apply_expansion(term: Term, rule: ExpansionRule) -> Term | None:
    """Attach the rule's affix to ``term``; None if the rule does not apply
    to the term's entity."""
    if term.entity != rule.source_entity:
        return None
    if rule.position is Position.PREFIX:
        surface = f"{rule.affix} {term.surface}"
    else:
        surface = f"{term.surface} {rule.affix}"
    return Term(surface, rule.target_entity, Provenance.GENERATED, term.derivation + (rule.id,))


def expand_fixpoint(seed: Lexicon, rules: RuleSet) -> Lexicon:
    """Breadth-first closure of ``seed`` under ``rules``.

    Output keys are unique per entity; the representative surface for a key
    is the first one reached (seed terms always win).  Raises
    :class:`CapacityError` once the candidate count passes
    ``rules.limits.max_candidates``.
    """
    rules.check_entities(seed.entity_ids)
    limits = rules.limits
    cap = limits.max_rule_applications_per_derivation

    out: dict[tuple[str, str], Term] = {}
    # A term's future only depends on its entity, its folded token sequence
    # and how often each rule has been used so far.  A state is skipped when
    # an already explored state with the same tokens used no rule more often.
    explored: dict[tuple[str, tuple[str, ...]], list[Counter]] = {}
    queue: deque[tuple[Term, Counter]] = deque()

    def admit(term: Term, usage: Counter) -> None:
        state = (term.entity, _folded_tokens(term.surface))
        seen = explored.setdefault(state, [])
        for prev in seen:
            if all(n <= usage[r] for r, n in prev.items()):
                return
        seen.append(usage)
        ident = (term.entity, term.normalized)
        if ident not in out:
            out[ident] = term
            if len(out) > limits.max_candidates:
                raise CapacityError("max_candidates", limits.max_candidates)
        queue.append((term, usage))

    for term in seed:
        admit(term, Counter())

    while queue:
        term, usage = queue.popleft()
        for rule in rules.substitutions:
            if usage[rule.id] >= cap:
                continue
            for new in _substitution_sites(term, rule):
                if new.n_tokens <= limits.max_term_tokens:
                    admit(new, usage + Counter({rule.id: 1}))
        for exp in rules.expansions:
            if usage[exp.id] >= cap:
                continue
            new = apply_expansion(term, exp)
            if new is not None and new.n_tokens <= limits.max_term_tokens:
                admit(new, usage + Counter({exp.id: 1}))

    # seed terms keep their file order; generated ones follow, sorted by key
    order = {eid: i for i, eid in enumerate(seed.entity_ids)}
    seed_pos = {(t.entity, t.normalized): i for i, t in enumerate(seed)}

    def placement(t: Term) -> tuple:
        pos = seed_pos.get((t.entity, t.normalized))
        return (order[t.entity], 0, pos, "") if pos is not None else (order[t.entity], 1, 0, t.normalized)

    terms = sorted(out.values(), key=placement)
    logger.info("expanded %d seed terms to %d candidates", len(seed), len(terms))
    return Lexicon(seed.entities, terms)
