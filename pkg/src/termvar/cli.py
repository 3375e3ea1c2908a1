"""Command-line interface: ``termvar expand|tag|analyze|compare|review``.

The curation loop is a shell loop around these commands: expand the seed
lexicon, tag the corpus, review the newly attested terms, edit the rules,
repeat.  Outputs are staged in a hidden directory under ``--out`` and only
moved into place once every file of the step has been written.

Exit status: 0 on success, 1 on I/O or validation errors, 2 when candidate
generation exceeds a capacity limit.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import shutil
import sys
import tempfile
from collections.abc import Mapping, Sequence
from pathlib import Path

from termvar import analytics, report
from termvar.corpus import ReadStats, iter_corpus_file
from termvar.errors import CapacityError, TermVarError
from termvar.generator import expand_fixpoint, read_ruleset
from termvar.lexicon import Lexicon, Provenance, detect_entity_conflicts, format_dictionary, normalize, read_dictionary
from termvar.tagger import (
    MentionIndex,
    build_matcher,
    export_review_samples,
    filter_unattested,
    read_mentions_file,
    tag_corpus,
    write_mentions,
)

logger = logging.getLogger("termvar")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CAPACITY = 2


class UsageError(TermVarError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit 2, which is reserved for capacity errors
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def publish(out_dir: Path, files: Mapping[str, str]) -> None:
    """Write ``files`` into ``out_dir`` all-or-nothing (write, then rename)."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
    try:
        for name, text in files.items():
            with open(staging / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        for name in files:
            os.replace(staging / name, out_dir / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _require(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise UsageError(f"input file not found: {p}")


def _parse_ps(text: str) -> list[float]:
    try:
        ps = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of fractions: {text!r}") from None
    if not ps or any(not 0 < p <= 1 for p in ps):
        raise argparse.ArgumentTypeError("fractions must lie in (0, 1]")
    return ps


def _parse_limit(text: str) -> tuple[str, int]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name, int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"limit value must be an integer: {text!r}") from None


def _dict_names(paths: Sequence[str]) -> list[str]:
    names: list[str] = []
    for p in paths:
        base = Path(p).stem
        name, n = base, 1
        while name in names:
            n += 1
            name = f"{base}#{n}"
        names.append(name)
    return names


def _mentions_path(args) -> Path:
    return Path(args.mentions) if args.mentions else Path(args.out) / "mentions.tsv"


def _index_summary(index: MentionIndex, lexicon: Lexicon | None = None) -> None:
    totals = index.entity_totals()
    uniques: dict[str, int] = {}
    for entity, _ in index.term_counts:
        uniques[entity] = uniques.get(entity, 0) + 1
    entities = lexicon.entity_ids if lexicon is not None else sorted(totals)
    for e in entities:
        print(f"{e}\tmentions={totals.get(e, 0)}\tunique_terms={uniques.get(e, 0)}")


def cmd_expand(args) -> int:
    _require(args.dict, args.rules)
    seed = read_dictionary(args.dict)
    rules = read_ruleset(args.rules, seed.entity_ids)
    if args.limit:
        rules = rules.with_limits(**dict(args.limit))
    conflicts = detect_entity_conflicts(seed)
    if conflicts:
        logger.warning("seed lexicon has %d cross-entity key conflicts", len(conflicts))
    candidates = expand_fixpoint(seed, rules)
    publish(Path(args.out), {"candidates.tsv": format_dictionary(candidates)})
    for entity, n in candidates.counts().items():
        print(f"{entity}\tcandidates={n}")
    for key, ents in detect_entity_conflicts(candidates):
        logger.warning("conflict: %s is generated for %s", key, ", ".join(ents))
    return EXIT_OK


def cmd_tag(args) -> int:
    _require(args.dict, args.corpus)
    lexicon = read_dictionary(args.dict)
    matcher = build_matcher(lexicon)
    stats = ReadStats()
    index = tag_corpus(matcher, iter_corpus_file(args.corpus, stats), jobs=args.jobs)
    if stats.errors or stats.duplicates:
        logger.warning("corpus: %d malformed and %d duplicate records skipped", stats.errors, stats.duplicates)
    if not len(index):
        logger.warning("no mentions found")
    attested = filter_unattested(lexicon, index)

    buf = io.StringIO()
    write_mentions(index, buf)
    publish(Path(args.out), {"mentions.tsv": buf.getvalue(), "attested.tsv": format_dictionary(attested)})
    print(f"documents={index.documents}\tskipped={stats.errors + stats.duplicates + index.skipped}")
    _index_summary(index, lexicon)
    return EXIT_OK


def _canonical_map(items: Sequence[str]) -> dict[str, str]:
    out = {}
    for item in items or ():
        entity, sep, surface = item.partition("=")
        if not sep:
            raise UsageError(f"--canonical expects ENTITY=TERM, got {item!r}")
        out[entity] = surface
    return out


def cmd_analyze(args) -> int:
    mentions_path = _mentions_path(args)
    _require(args.corpus, mentions_path, *(args.dict or ()))
    if args.dict and len(args.dict) != 3:
        raise UsageError(f"analyze takes either no --dict or exactly 3 (for venn.csv), got {len(args.dict)}")
    canonical = _canonical_map(args.canonical)

    index = read_mentions_file(mentions_path)
    weeks = analytics.doc_weeks(iter_corpus_file(args.corpus))
    stats = analytics.term_frequencies(index, weeks)

    ks = sorted({1, args.k})
    shares = {k: analytics.common_term_article_share(index, weeks, k, args.denominator) for k in ks}
    venn = None
    if args.dict:
        lexicons = {n: read_dictionary(p) for n, p in zip(_dict_names(args.dict), args.dict)}
        venn = analytics.compare_dictionaries(lexicons, index)
    else:
        logger.info("no dictionaries given; venn.csv is written with a header only")

    files = {
        "term_stats.csv": report.term_stats_csv(stats),
        "rank_frequency.csv": report.rank_frequency_csv(stats),
        "coverage.csv": report.coverage_csv(stats, args.p),
        "nonredundant.csv": report.nonredundant_csv(stats),
        "weekly_unique.csv": report.weekly_unique_csv(analytics.unique_terms_over_time(index, weeks)),
        "weekly_share.csv": report.weekly_share_csv(shares),
        "venn.csv": report.venn_csv(venn),
    }
    publish(Path(args.out), files)

    summary = analytics.frequency_summary(stats)
    for entity, rows in analytics.by_entity(stats).items():
        mean, median = summary[entity]
        total = sum(s.mention_count for s in rows)
        parts = [f"{entity}", f"terms={len(rows)}", f"mentions={total}", f"mean={mean:.2f}", f"median={median:g}"]
        parts += [f"coverage@{p:g}={analytics.coverage_at(rows, p)}" for p in args.p]
        parts.append(f"nonredundant={len(analytics.non_redundant_terms(rows))}")
        if len(rows) >= 2:
            parts.append(f"zipf_slope={analytics.zipf_slope(analytics.rank_frequency(rows)):.3f}")
        if entity in canonical:
            parts.append(f"canonical_share={analytics.canonical_share(rows, canonical[entity]):.4f}")
        print("\t".join(parts))
        print(f"{entity}\ttop{args.k}=" + ",".join(analytics.top_terms(rows, args.k)))
    return EXIT_OK


def cmd_compare(args) -> int:
    if not args.dict or len(args.dict) != 3:
        raise UsageError(f"compare needs exactly 3 --dict paths, got {len(args.dict or ())}")
    mention_paths = args.mentions_list or [str(Path(args.out) / "mentions.tsv")]
    if len(mention_paths) not in (1, 3):
        raise UsageError("give either one --mentions file or one per dictionary")
    _require(*args.dict, *mention_paths)

    names = _dict_names(args.dict)
    lexicons = {n: read_dictionary(p) for n, p in zip(names, args.dict)}
    if len(mention_paths) == 1:
        index: MentionIndex | dict[str, MentionIndex] = read_mentions_file(mention_paths[0])
    else:
        index = {n: read_mentions_file(p) for n, p in zip(names, mention_paths)}
    venn = analytics.compare_dictionaries(lexicons, index)
    publish(Path(args.out), {"venn.csv": report.venn_csv(venn)})
    for entity in venn.regions:
        counts = venn.counts(entity)
        print(entity + "\t" + "\t".join(f"{venn.label(m)}={n}" for m, n in counts.items()))
    return EXIT_OK


def cmd_review(args) -> int:
    mentions_path = _mentions_path(args)
    _require(args.dict, args.corpus, mentions_path)
    lexicon = read_dictionary(args.dict)
    index = read_mentions_file(mentions_path)
    counts = index.term_counts

    wanted = {normalize(t) for t in args.term} if args.term else None
    terms = [
        t for t in lexicon
        if t.provenance is Provenance.GENERATED
        and counts.get((t.entity, t.normalized), 0) > 0
        and (wanted is None or t.normalized in wanted)
    ]
    if not terms:
        logger.warning("no generated attested terms to review")
    terms.sort(key=lambda t: (counts[(t.entity, t.normalized)], t.normalized, t.entity))

    needed = {(m.doc_id, m.field) for t in terms for m in index.for_key(t.normalized)}
    texts = {}
    for rec in iter_corpus_file(args.corpus):
        for name in ("title", "abstract"):
            if (rec.doc_id, name) in needed:
                texts[(rec.doc_id, name)] = getattr(rec, name)

    lines = []
    for t in terms:
        n = counts[(t.entity, t.normalized)]
        derivation = ",".join(t.derivation) or "-"
        lines.append(f"# {t.entity}\t{t.surface}\t{t.normalized}\tmentions={n}\tderivation={derivation}")
        for snippet in export_review_samples(index, t.normalized, args.k, texts, seed=args.seed):
            lines.append("\t" + snippet)
        lines.append("")
    publish(Path(args.out), {"review.txt": "\n".join(lines) + ("\n" if lines else "")})
    print(f"terms_for_review={len(terms)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="termvar", description="Lexicon expansion, dictionary tagging and term-variation analytics.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("expand", help="generate candidate terms from a seed dictionary and rules")
    p.add_argument("--dict", required=True, help="seed dictionary TSV")
    p.add_argument("--rules", required=True, help="rules TSV")
    p.add_argument("--out", required=True, help="output directory (candidates.tsv)")
    p.add_argument("--limit", action="append", type=_parse_limit, metavar="NAME=VALUE",
                   help="override a generation limit")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("tag", help="tag a corpus and keep attested terms")
    p.add_argument("--dict", required=True)
    p.add_argument("--corpus", required=True, help="JSON Lines corpus")
    p.add_argument("--out", required=True, help="output directory (mentions.tsv, attested.tsv)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="worker processes (default: all cores)")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("analyze", help="frequency, coverage, redundancy and weekly statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mentions", help="mentions TSV (default: OUT/mentions.tsv)")
    p.add_argument("--out", required=True)
    p.add_argument("--p", type=_parse_ps, default=[0.99, 0.995], help="coverage fractions, comma separated")
    p.add_argument("--k", type=int, default=5, help="top-k terms for the weekly share series")
    p.add_argument("--denominator", choices=("entity", "all"), default="entity")
    p.add_argument("--dict", action="append", help="three dictionaries for venn.csv (optional)")
    p.add_argument("--canonical", action="append", metavar="ENTITY=TERM", help="report the share of this term")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="Venn comparison of three dictionaries")
    p.add_argument("--dict", action="append", help="dictionary TSV; give exactly three")
    p.add_argument("--mentions", dest="mentions_list", action="append",
                   help="mentions TSV, once for all dictionaries or once per dictionary")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("review", help="context samples for newly attested generated terms")
    p.add_argument("--dict", required=True, help="dictionary with provenance, e.g. attested.tsv")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mentions", help="mentions TSV (default: OUT/mentions.tsv)")
    p.add_argument("--out", required=True, help="output directory (review.txt)")
    p.add_argument("--k", type=int, default=5, help="snippets per term")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--term", action="append", help="only review this term (repeatable)")
    p.set_defaults(func=cmd_review)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "k", 1) < 1:
        print("termvar: error: --k must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"termvar: error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (TermVarError, OSError, ValueError) as exc:
        print(f"termvar: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
