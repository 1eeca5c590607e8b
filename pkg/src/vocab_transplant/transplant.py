"""Vocabulary alignment and embedding-matrix initialization strategies.

Shared types always receive bit-exact copies of their source rows; the four
strategies differ only in how rows for new types are produced.  Special
tokens are present in both vocabularies and therefore always land in the
shared partition.  Rows of unused placeholder tokens are zero-initialized.
"""

import json
import logging
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Set

import numpy as np
import scipy.linalg

from . import rng
from .errors import FitError, FormatError, ReconciliationError
from .tokenizer import Vocabulary, tokenize_word
from .vectors import WordVectors

logger = logging.getLogger(__name__)

STRATEGIES = ("uniform", "normal", "fasttext-projection", "subword-average")


class EmbeddingMatrix:
    """Dense row-per-token matrix aligned with a Vocabulary."""

    def __init__(self, vocab: Vocabulary, rows: np.ndarray):
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != len(vocab):
            raise ValueError(
                f"rows must be a {len(vocab)} x dim matrix, got shape {rows.shape}"
            )
        if not np.all(np.isfinite(rows)):
            raise ValueError("embedding values must be finite")
        self.vocab = vocab
        self.rows = rows
        self.dim = rows.shape[1]

    def __len__(self):
        return len(self.vocab)

    def row_for(self, token: str) -> np.ndarray:
        return self.rows[self.vocab.id_of[token]]


@dataclass
class VocabAlignment:
    shared: Set[str]
    new: Set[str]
    src_id: dict
    tgt_id: dict
    target_vocab: Vocabulary

    def __post_init__(self):
        if self.shared & self.new:
            raise ValueError("shared and new token sets must be disjoint")

    @property
    def effective_size(self) -> int:
        return len(self.shared) + len(self.new)


@dataclass
class DistributionFit:
    mu: np.ndarray
    sigma: np.ndarray


@dataclass
class ProjectionModel:
    W: np.ndarray
    residual: float
    ridge: float
    n_fit: int = 0
    n_skipped: int = 0


def align_vocabs(src: Vocabulary, tgt: Vocabulary) -> VocabAlignment:
    """Partition target tokens into source-shared and new by exact string match.

    Unused placeholders never participate, whichever vocabulary they occur in.
    """
    shared = set()
    new = set()
    for tok in tgt.tokens:
        if tgt.is_unused(tok) or src.is_unused(tok):
            continue
        if tok in src:
            shared.add(tok)
        else:
            new.add(tok)
    src_id = {t: src.id_of[t] for t in shared}
    tgt_id = {t: tgt.id_of[t] for t in shared | new}
    return VocabAlignment(shared, new, src_id, tgt_id, tgt)


def _unused_index(token: str, prefix: str) -> Optional[int]:
    m = re.fullmatch(re.escape(prefix) + r"-(\d+)\]", token)
    return int(m.group(1)) if m else None


def reconcile_size(src: Vocabulary, tgt: Vocabulary) -> Vocabulary:
    """Resize the target vocabulary to exactly the source size.

    A larger target drops its unused placeholders highest-index-first; a
    smaller one is padded with fresh [unused-x] tokens.  IDs are reassigned
    contiguously preserving relative order.
    """
    if len(tgt) == len(src):
        return tgt
    if len(tgt) > len(src):
        excess = len(tgt) - len(src)
        unused_positions = [i for i, t in enumerate(tgt.tokens) if tgt.is_unused(t)]
        if len(unused_positions) < excess:
            shortfall = excess - len(unused_positions)
            raise ReconciliationError(
                f"target exceeds source by {excess} tokens but only "
                f"{len(unused_positions)} unused placeholders are available "
                f"(shortfall {shortfall})",
                shortfall=shortfall,
            )
        drop = set(unused_positions[len(unused_positions) - excess:])
        tokens = [t for i, t in enumerate(tgt.tokens) if i not in drop]
    else:
        tokens = list(tgt.tokens)
        taken = set(tokens)
        indices = [
            idx for t in tokens
            if (idx := _unused_index(t, tgt.unused_prefix)) is not None
        ]
        next_index = max(indices, default=-1) + 1
        while len(tokens) < len(src):
            candidate = f"{tgt.unused_prefix}-{next_index}]"
            next_index += 1
            if candidate in taken:
                continue
            tokens.append(candidate)
            taken.add(candidate)
    return Vocabulary(
        tokens,
        specials=tgt.specials,
        continuation_prefix=tgt.continuation_prefix,
        unused_prefix=tgt.unused_prefix,
    )


def _base_rows(align: VocabAlignment, src_emb: EmbeddingMatrix) -> np.ndarray:
    """Zero matrix over the target vocabulary with shared rows copied."""
    rows = np.zeros((len(align.target_vocab), src_emb.dim))
    for tok in align.shared:
        rows[align.tgt_id[tok]] = src_emb.rows[align.src_id[tok]]
    return rows


def _new_tokens_by_row(align: VocabAlignment):
    """New types in ascending target-row order (the sampling order)."""
    return sorted(align.new, key=lambda t: align.tgt_id[t])


def init_uniform(
    align: VocabAlignment,
    src_emb: EmbeddingMatrix,
    seed: int,
    lo: float = -1.0,
    hi: float = 1.0,
) -> EmbeddingMatrix:
    """Copy shared rows; sample new rows i.i.d. uniform in [lo, hi)."""
    if not lo < hi:
        raise ValueError(f"need lo < hi, got lo={lo}, hi={hi}")
    rows = _base_rows(align, src_emb)
    new_tokens = _new_tokens_by_row(align)
    if new_tokens:
        samples = rng.uniform_matrix(seed, 0, (len(new_tokens), src_emb.dim), lo, hi)
        for k, tok in enumerate(new_tokens):
            rows[align.tgt_id[tok]] = samples[k]
    return EmbeddingMatrix(align.target_vocab, rows)


def fit_distribution(src_emb) -> DistributionFit:
    """Per-dimension mean and population standard deviation of source rows.

    Accepts an EmbeddingMatrix or a plain row matrix.
    """
    rows = src_emb.rows if isinstance(src_emb, EmbeddingMatrix) else np.asarray(src_emb, dtype=np.float64)
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 source rows to fit a distribution")
    mu = rows.mean(axis=0)
    sigma = np.sqrt(((rows - mu) ** 2).mean(axis=0))
    return DistributionFit(mu, sigma)


def init_normal(align: VocabAlignment, src_emb: EmbeddingMatrix, seed: int) -> EmbeddingMatrix:
    """Copy shared rows; sample new-row entries from N(mu_d, sigma_d)."""
    dist = fit_distribution(src_emb)
    rows = _base_rows(align, src_emb)
    new_tokens = _new_tokens_by_row(align)
    if new_tokens:
        z = rng.normal_matrix(seed, 0, (len(new_tokens), src_emb.dim))
        samples = dist.mu + z * dist.sigma
        for k, tok in enumerate(new_tokens):
            rows[align.tgt_id[tok]] = samples[k]
    return EmbeddingMatrix(align.target_vocab, rows)


def fit_projection(
    ft: WordVectors,
    src_emb: EmbeddingMatrix,
    shared: Iterable[str],
    ridge: float = 1e-8,
) -> ProjectionModel:
    """Least-squares linear map from skipgram space into the source space.

    Solves (F'F + ridge*I) W = F'B over the shared types that have skipgram
    vectors; types missing from the skipgram vocabulary are skipped and
    counted.
    """
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    shared = set(shared)
    missing_src = [t for t in shared if t not in src_emb.vocab.id_of]
    if missing_src:
        raise ValueError(f"fit tokens missing from source embeddings: {sorted(missing_src)[:5]}")
    fit_tokens = sorted(t for t in shared if t in ft)
    n_skipped = len(shared) - len(fit_tokens)
    if not fit_tokens:
        raise FitError("no shared type has a skipgram vector; cannot fit projection")
    if len(fit_tokens) < ft.dim:
        logger.warning(
            "projection fit set (%d) smaller than skipgram dimension (%d); "
            "system may be underdetermined", len(fit_tokens), ft.dim,
        )
    F = np.stack([ft.word_vector(t) for t in fit_tokens])
    B = np.stack([src_emb.row_for(t) for t in fit_tokens])
    gram = F.T @ F
    if ridge:
        gram = gram + ridge * np.eye(F.shape[1])
    try:
        W = scipy.linalg.solve(gram, F.T @ B, assume_a="pos")
    except np.linalg.LinAlgError as exc:
        raise FitError(
            f"normal equations are singular at ridge={ridge}; retry with a small "
            f"positive ridge (e.g. 1e-8)"
        ) from exc
    residual = float(np.sum((F @ W - B) ** 2))
    return ProjectionModel(W, residual, ridge, n_fit=len(fit_tokens), n_skipped=n_skipped)


def _average_row(token: str, src_emb: EmbeddingMatrix, src_vocab: Vocabulary):
    """Subword-average rule; returns (row, provenance kind)."""
    result = tokenize_word(token, src_vocab)
    if result.is_unk:
        unk_row = src_emb.rows[src_vocab.id_of["[UNK]"]]
        return unk_row.copy(), "unk-fallback"
    piece_rows = src_emb.rows[[src_vocab.id_of[p] for p in result.pieces]]
    return piece_rows.mean(axis=0), "averaged"


def init_projection(
    align: VocabAlignment,
    src_emb: EmbeddingMatrix,
    ft: WordVectors,
    model: ProjectionModel,
) -> EmbeddingMatrix:
    """Copy shared rows; map new types through the fitted projection.

    New types without a skipgram vector fall back to the subword-average
    rule against the source vocabulary (reported as fallbacks).
    """
    if model.W.shape != (ft.dim, src_emb.dim):
        raise ValueError(
            f"projection is {model.W.shape}, expected ({ft.dim}, {src_emb.dim})"
        )
    rows = _base_rows(align, src_emb)
    for tok in _new_tokens_by_row(align):
        if tok in ft:
            rows[align.tgt_id[tok]] = ft.word_vector(tok) @ model.W
        else:
            rows[align.tgt_id[tok]] = _average_row(tok, src_emb, src_emb.vocab)[0]
    return EmbeddingMatrix(align.target_vocab, rows)


def init_subword_average(
    align: VocabAlignment,
    src_emb: EmbeddingMatrix,
    src_vocab: Vocabulary,
) -> EmbeddingMatrix:
    """Copy shared rows; average source-piece rows for each new type.

    New types are tokenized as literal strings by the source tokenizer, so a
    continuation-prefixed type resolves to continuation pieces.  Types that
    tokenize to [UNK] receive the source [UNK] row.
    """
    if len(src_vocab) != len(src_emb):
        raise ValueError("source embeddings are not aligned with the source vocabulary")
    rows = _base_rows(align, src_emb)
    for tok in _new_tokens_by_row(align):
        rows[align.tgt_id[tok]] = _average_row(tok, src_emb, src_vocab)[0]
    return EmbeddingMatrix(align.target_vocab, rows)


def provenance_map(
    strategy: str,
    align: VocabAlignment,
    src_emb: EmbeddingMatrix,
    ft: Optional[WordVectors] = None,
) -> dict:
    """Per-token provenance of the output rows for a strategy."""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    prov = {t: "copied" for t in align.shared}
    for tok in align.new:
        if strategy in ("uniform", "normal"):
            prov[tok] = "sampled"
        elif strategy == "fasttext-projection" and ft is not None and tok in ft:
            prov[tok] = "projected"
        else:
            prov[tok] = _average_row(tok, src_emb, src_emb.vocab)[1]
    return prov


def initialize_embeddings(
    strategy: str,
    align: VocabAlignment,
    src_emb: EmbeddingMatrix,
    seed: int = 0,
    ft: Optional[WordVectors] = None,
    ridge: float = 1e-8,
    lo: float = -1.0,
    hi: float = 1.0,
):
    """Dispatch to a strategy; returns (matrix, fitted model or None)."""
    if strategy == "uniform":
        return init_uniform(align, src_emb, seed, lo, hi), None
    if strategy == "normal":
        return init_normal(align, src_emb, seed), None
    if strategy == "fasttext-projection":
        if ft is None:
            raise ValueError("fasttext-projection requires skipgram vectors")
        model = fit_projection(ft, src_emb, align.shared, ridge)
        return init_projection(align, src_emb, ft, model), model
    if strategy == "subword-average":
        return init_subword_average(align, src_emb, src_emb.vocab), None
    raise ValueError(f"unknown strategy {strategy!r}; choose one of {STRATEGIES}")


# ---------------------------------------------------------------------------
# embedding matrix I/O
# ---------------------------------------------------------------------------


def save_embedding_text(emb: EmbeddingMatrix, path) -> None:
    """word2vec text format in vocabulary order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(emb)} {emb.dim}\n")
        for tok, row in zip(emb.vocab.tokens, emb.rows):
            fh.write(tok)
            for x in row:
                fh.write(f" {x:.9g}")
            fh.write("\n")


def load_embedding_text(path, vocab: Vocabulary) -> EmbeddingMatrix:
    """Read a matrix whose word order must equal the vocabulary order."""
    from .vectors import load_text

    loaded = load_text(path)
    if loaded.vocab != vocab.tokens:
        for i, (got, want) in enumerate(zip(loaded.vocab, vocab.tokens)):
            if got != want:
                raise FormatError(
                    f"{path}: word {i} is {got!r} but vocabulary has {want!r}"
                )
        raise FormatError(
            f"{path}: {len(loaded.vocab)} words do not match vocabulary size {len(vocab)}"
        )
    return EmbeddingMatrix(vocab, loaded.rows)


def save_embedding_binary(emb: EmbeddingMatrix, path, vocab_file: str = "") -> None:
    """Raw little-endian float32 rows plus a JSON sidecar at <path>.json."""
    emb.rows.astype("<f4").tofile(path)
    sidecar = {"rows": len(emb), "dim": emb.dim, "vocab_file": vocab_file}
    with open(f"{path}.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def load_embedding_binary(path, vocab: Vocabulary) -> EmbeddingMatrix:
    sidecar_path = f"{path}.json"
    try:
        with open(sidecar_path, encoding="utf-8") as fh:
            sidecar = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{sidecar_path}: invalid JSON sidecar: {exc.msg}") from exc
    try:
        n_rows, dim = int(sidecar["rows"]), int(sidecar["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{sidecar_path}: sidecar must carry integer 'rows' and 'dim'") from exc
    if n_rows != len(vocab):
        raise FormatError(
            f"{path}: sidecar promises {n_rows} rows but vocabulary has {len(vocab)}"
        )
    data = np.fromfile(path, dtype="<f4")
    if data.size != n_rows * dim:
        raise FormatError(
            f"{path}: expected {n_rows * dim} float32 values, found {data.size}"
        )
    return EmbeddingMatrix(vocab, data.reshape(n_rows, dim).astype(np.float64))
