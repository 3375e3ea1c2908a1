"""Term-variant generation, dictionary tagging and corpus analytics."""

from termvar.analytics import (
    TermStats,
    VennReport,
    canonical_share,
    common_term_article_share,
    compare_dictionaries,
    coverage_at,
    non_redundant_terms,
    rank_frequency,
    term_frequencies,
    unique_terms_over_time,
    zipf_slope,
)
from termvar.corpus import DocumentRecord, count_tokens, iter_corpus_file, read_corpus, week_of
from termvar.errors import CapacityError, ConsistencyError, ParseError, TermVarError
from termvar.generator import (
    ExpansionRule,
    GenerationLimits,
    RuleSet,
    SubstitutionRule,
    apply_expansion,
    apply_substitution,
    expand_fixpoint,
    parse_ruleset,
    read_ruleset,
)
from termvar.lexicon import (
    Entity,
    EntityKind,
    Lexicon,
    Provenance,
    Term,
    detect_entity_conflicts,
    dump_dictionary,
    format_dictionary,
    load_dictionary,
    normalize,
    read_dictionary,
)
from termvar.tagger import (
    Matcher,
    Mention,
    MentionIndex,
    OffsetMap,
    build_matcher,
    export_review_samples,
    filter_unattested,
    normalize_with_offsets,
    raw_matches,
    read_mentions,
    read_mentions_file,
    resolve_spans,
    tag_corpus,
    tag_document,
    write_mentions,
)

__version__ = "0.1.0"
