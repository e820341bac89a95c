"""Toolkit for historical Yiddish text: script conversion between Unicode
and a round-trip-safe ASCII notation, romanized-text detransliteration,
treebank preparation, word embeddings, a linear-chain CRF tagger, and
corpus-quality reports."""

from .align import AlignedPair, AlignmentReport, smith_waterman, token_similarity
from .crf import (
    ChecksumMismatch,
    CrfError,
    CrfModel,
    Instance,
    LengthMismatch,
    StaticProvider,
    TokenFileProvider,
    TokenVectorMisalignment,
    TrainingConfig,
    UnknownTag,
    build_lookup_vocab,
    emission_scores,
    load_model,
    log_partition,
    make_instances,
    marginals,
    nll_and_gradient,
    nll_and_parameter_gradients,
    predict,
    read_token_vectors,
    save_model,
    score_sentence,
    train,
    viterbi,
    write_token_vectors,
)
from .editdist import edit_distance, edit_ops
from .embeddings import (
    CooccurrenceCounts,
    DegenerateCounts,
    EmbeddingError,
    EmbeddingTable,
    VariantPair,
    ZeroVector,
    classify_pair,
    cosine,
    count_cooccurrences,
    nearest_neighbors,
    train_embeddings,
    variant_candidates,
)
from .evaluation import (
    EvaluationError,
    FoldPlan,
    FoldReport,
    FoldResult,
    FoldSplit,
    InsufficientData,
    MetricsReport,
    TagScore,
    aggregate_folds,
    assign_buckets,
    config_matrix,
    fold_report,
    format_mean_std,
    make_folds,
    mean_std,
    micro_f1,
    per_tag_f1,
    run_experiment,
    token_accuracy,
)
from .inventory import (
    CharInventory,
    DecodeError,
    InventoryError,
    ScriptText,
    UnknownCharacter,
    normalize_unicode,
)
from .romanizer import (
    ConversionResult,
    Detransliterator,
    EmptyInput,
    LoshnKoydeshLexicon,
    PhoneticRuleSet,
    RespellTable,
    RomanizerError,
    RuleGap,
)
from .textpipe import (
    CorpusFormatError,
    CorpusLine,
    FrequencyTable,
    Sentence,
    qa_report,
    read_corpus,
    segment_sentences,
    tokenize,
)
from .treebank import (
    DanglingMarker,
    EmptySegment,
    PrepareError,
    TaggedToken,
    TagSetRegistry,
    Tree,
    TreeParseError,
    extract_leaves,
    parse_trees,
    prepare_corpus,
    read_tagged,
    recombine_split_words,
    split_joined_words,
    write_tagged,
)

__version__ = "0.1.0"
