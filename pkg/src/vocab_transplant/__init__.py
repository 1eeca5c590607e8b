"""Domain adaptation of subword vocabularies and embedding matrices."""

from .analysis import (
    TransplantReport,
    build_report,
    emit_report,
    load_report,
    mean_subword_count,
    subword_histogram,
    validate_report,
)
from .corpus import (
    EmojiMap,
    TweetRecord,
    dedup_stream,
    normalize_tweet,
    read_jsonl,
    read_plain,
    split_holdout,
)
from .errors import (
    FitError,
    FormatError,
    ReconciliationError,
    TrainingError,
    ValidationError,
    VocabTransplantError,
)
from .tokenizer import (
    TokenizationResult,
    Vocabulary,
    load_vocab,
    save_vocab,
    tokenize_text,
    tokenize_word,
    train_wordpiece,
)
from .transplant import (
    STRATEGIES,
    DistributionFit,
    EmbeddingMatrix,
    ProjectionModel,
    VocabAlignment,
    align_vocabs,
    fit_distribution,
    fit_projection,
    init_normal,
    init_projection,
    init_subword_average,
    init_uniform,
    initialize_embeddings,
    load_embedding_binary,
    load_embedding_text,
    reconcile_size,
    save_embedding_binary,
    save_embedding_text,
)
from .vectors import WordVectors, load_text, save_text, train_skipgram

__version__ = "0.1.0"
