"""Skipgram word vectors with hashed character n-gram features.

The input representation of a word during training (and the vector written
by save_text) is the mean of its word row and its character n-gram rows,
with the word padded by '<' and '>'.  Negative samples follow the unigram
distribution raised to 3/4.
"""

import logging
from collections import Counter
from typing import Iterable, List, Optional, Sequence

import numpy as np

from . import rng
from .errors import FormatError, TrainingError
from .skipgram_kernels import active_backend, run_training

logger = logging.getLogger(__name__)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def ngram_ids(word: str, ngram_min: int, ngram_max: int, buckets: int) -> List[int]:
    """Hashed ids of the character n-grams of '<word>', shortest first.

    Duplicate ids are kept; hash collisions share a bucket by design.
    """
    padded = f"<{word}>"
    ids = []
    for n in range(ngram_min, ngram_max + 1):
        if n > len(padded):
            break
        for i in range(len(padded) - n + 1):
            ids.append(fnv1a64(padded[i: i + n].encode("utf-8")) % buckets)
    return ids


class WordVectors:
    """Word rows plus optional hashed n-gram rows sharing one dimension."""

    def __init__(
        self,
        vocab: Sequence[str],
        rows: np.ndarray,
        ngram_buckets: int = 0,
        ngram_rows: Optional[np.ndarray] = None,
        ngram_min: int = 3,
        ngram_max: int = 6,
    ):
        vocab = list(vocab)
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] != len(vocab):
            raise ValueError("rows must be a |vocab| x dim matrix")
        if ngram_rows is None:
            ngram_rows = np.zeros((0, rows.shape[1]))
        ngram_rows = np.asarray(ngram_rows, dtype=np.float64)
        if ngram_rows.shape != (ngram_buckets, rows.shape[1]):
            raise ValueError("ngram_rows must be a buckets x dim matrix")
        if not np.all(np.isfinite(rows)) or not np.all(np.isfinite(ngram_rows)):
            raise ValueError("vector values must be finite")
        self.vocab = vocab
        self.word_id = {w: i for i, w in enumerate(vocab)}
        if len(self.word_id) != len(vocab):
            raise ValueError("vocabulary words must be distinct")
        self.dim = rows.shape[1]
        self.rows = rows
        self.ngram_buckets = ngram_buckets
        self.ngram_rows = ngram_rows
        self.ngram_min = ngram_min
        self.ngram_max = ngram_max

    def __len__(self):
        return len(self.vocab)

    def __contains__(self, word):
        return word in self.word_id

    def word_vector(self, word: str) -> np.ndarray:
        """Composed vector: mean of the word row and its n-gram rows."""
        idx = self.word_id[word]
        if self.ngram_buckets == 0:
            return self.rows[idx].copy()
        ids = ngram_ids(word, self.ngram_min, self.ngram_max, self.ngram_buckets)
        if not ids:
            return self.rows[idx].copy()
        return (self.rows[idx] + self.ngram_rows[ids].sum(axis=0)) / (1.0 + len(ids))

    def all_vectors(self) -> np.ndarray:
        return np.stack([self.word_vector(w) for w in self.vocab])


def _encode_corpus(lines, word_id):
    tokens = []
    offsets = [0]
    for line in lines:
        kept = [word_id[w] for w in line if w in word_id]
        tokens.extend(kept)
        offsets.append(len(tokens))
    return (
        np.asarray(tokens, dtype=np.int32),
        np.asarray(offsets, dtype=np.int64),
    )


def _ngram_table(words, ngram_min, ngram_max, buckets):
    flat = []
    offsets = [0]
    for w in words:
        flat.extend(ngram_ids(w, ngram_min, ngram_max, buckets))
        offsets.append(len(flat))
    return (
        np.asarray(flat, dtype=np.int32),
        np.asarray(offsets, dtype=np.int64),
    )


def _negative_cdf(counts: np.ndarray) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    cum = np.cumsum(weights / weights.sum())
    cum[-1] = 1.0
    return cum


def train_skipgram(
    corpus: Iterable[str],
    dim: int = 50,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    min_count: int = 2,
    ngram_min: int = 3,
    ngram_max: int = 6,
    buckets: int = 1 << 17,
    lr: float = 0.05,
    seed: int = 1,
    workers: int = 1,
) -> WordVectors:
    """Train skipgram-with-negative-sampling vectors over token lines.

    ``corpus`` holds pre-tokenized lines (tokens separated by whitespace).
    With ``workers=1`` training is deterministic for a fixed seed; with more
    workers, threads update shared parameters without locks (lost updates
    are tolerated) and results vary run to run.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if window < 1:
        raise ValueError("window must be >= 1")
    if negatives < 1:
        raise ValueError("negatives must be >= 1")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not 1 <= ngram_min <= ngram_max:
        raise ValueError("need 1 <= ngram_min <= ngram_max")
    if buckets < 1:
        raise ValueError("buckets must be >= 1")
    if lr <= 0:
        raise ValueError("lr must be positive")
    if workers < 1:
        raise ValueError("workers must be >= 1")

    lines = [line.split() for line in corpus]
    freq = Counter()
    for line in lines:
        freq.update(line)
    words = sorted((w for w, c in freq.items() if c >= min_count), key=lambda w: (-freq[w], w))
    if not words:
        raise TrainingError(f"no word reaches min_count={min_count}")
    word_id = {w: i for i, w in enumerate(words)}
    counts = np.asarray([freq[w] for w in words], dtype=np.int64)

    tokens, line_offsets = _encode_corpus(lines, word_id)
    if tokens.shape[0] == 0:
        raise TrainingError("corpus is empty after min_count filtering")
    ngram_flat, ngram_offsets = _ngram_table(words, ngram_min, ngram_max, buckets)
    neg_cum = _negative_cdf(counts)

    bound = 1.0 / dim
    w_in = rng.uniform_matrix(rng.derive_seed(seed, "init-words"), 0, (len(words), dim), -bound, bound)
    grams = rng.uniform_matrix(rng.derive_seed(seed, "init-ngrams"), 0, (buckets, dim), -bound, bound)
    w_out = np.zeros((len(words), dim))

    backend = active_backend()
    logger.info(
        "training skipgram: %d words, %d tokens, dim=%d, backend=%s, workers=%d",
        len(words), tokens.shape[0], dim, backend, workers,
    )
    train_seed = rng.derive_seed(seed, "train")
    if workers == 1:
        run_training(
            backend, w_in, w_out, grams, tokens, line_offsets, ngram_flat,
            ngram_offsets, neg_cum, window, negatives, epochs, float(lr),
            np.uint64(train_seed),
        )
    else:
        _train_sharded(
            backend, workers, w_in, w_out, grams, tokens, line_offsets,
            ngram_flat, ngram_offsets, neg_cum, window, negatives, epochs,
            float(lr), train_seed,
        )

    return WordVectors(words, w_in, buckets, grams, ngram_min, ngram_max)


def _train_sharded(
    backend, workers, w_in, w_out, grams, tokens, line_offsets,
    ngram_flat, ngram_offsets, neg_cum, window, negatives, epochs, lr, seed,
):
    """Hogwild-style: each worker trains a round-robin shard of the lines."""
    from concurrent.futures import ThreadPoolExecutor

    n_lines = line_offsets.shape[0] - 1
    shards = []
    for w in range(workers):
        shard_tokens = []
        shard_offsets = [0]
        for li in range(w, n_lines, workers):
            shard_tokens.extend(tokens[line_offsets[li]: line_offsets[li + 1]])
            shard_offsets.append(len(shard_tokens))
        if len(shard_offsets) > 1:
            shards.append(
                (
                    np.asarray(shard_tokens, dtype=np.int32),
                    np.asarray(shard_offsets, dtype=np.int64),
                    np.uint64(rng.derive_seed(seed, f"worker-{w}")),
                )
            )
    with ThreadPoolExecutor(max_workers=len(shards)) as pool:
        futures = [
            pool.submit(
                run_training, backend, w_in, w_out, grams, s_tokens, s_offsets,
                ngram_flat, ngram_offsets, neg_cum, window, negatives, epochs,
                lr, s_seed,
            )
            for s_tokens, s_offsets, s_seed in shards
        ]
        for fut in futures:
            fut.result()


# ---------------------------------------------------------------------------
# negative-sampling loss (analytic form used by gradient checks)
# ---------------------------------------------------------------------------


def _log_sigmoid(x: float) -> float:
    return -np.logaddexp(0.0, -x)


def sgns_loss(input_rows: np.ndarray, out_pos: np.ndarray, out_negs: np.ndarray) -> float:
    """Loss of one (center, context, negatives) step.

    ``input_rows`` stacks the word row and its n-gram rows; the input vector
    is their mean.
    """
    v = input_rows.mean(axis=0)
    loss = -_log_sigmoid(float(v @ out_pos))
    for k in range(out_negs.shape[0]):
        loss -= _log_sigmoid(-float(v @ out_negs[k]))
    return float(loss)


def sgns_gradients(input_rows: np.ndarray, out_pos: np.ndarray, out_negs: np.ndarray):
    """Analytic gradients of sgns_loss w.r.t. every parameter block."""
    k_comp = input_rows.shape[0]
    v = input_rows.mean(axis=0)

    def _sigmoid(x):
        if x >= 0:
            return 1.0 / (1.0 + np.exp(-x))
        e = np.exp(x)
        return e / (1.0 + e)

    g_pos = _sigmoid(float(v @ out_pos)) - 1.0
    grad_pos = g_pos * v
    gacc = g_pos * out_pos
    grad_negs = np.empty_like(out_negs)
    for k in range(out_negs.shape[0]):
        g_n = _sigmoid(float(v @ out_negs[k]))
        grad_negs[k] = g_n * v
        gacc = gacc + g_n * out_negs[k]
    grad_inputs = np.tile(gacc / k_comp, (k_comp, 1))
    return grad_inputs, grad_pos, grad_negs


# ---------------------------------------------------------------------------
# word2vec text format
# ---------------------------------------------------------------------------


def save_text(vectors: WordVectors, path) -> None:
    """Write the composed word vectors in word2vec text format (%.9g)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(vectors)} {vectors.dim}\n")
        for word in vectors.vocab:
            if any(c.isspace() for c in word):
                raise FormatError(f"word {word!r} contains whitespace; not representable")
            vec = vectors.word_vector(word)
            fh.write(word)
            for x in vec:
                fh.write(f" {x:.9g}")
            fh.write("\n")


def load_text(path) -> WordVectors:
    """Read word2vec text format; returns word rows only (no n-grams)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise FormatError(f"{path}:1: empty vectors file")
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"{path}:1: header must be 'count dim'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise FormatError(f"{path}:1: header must be 'count dim'") from exc
        if count < 0 or dim < 1:
            raise FormatError(f"{path}:1: invalid header values {count} {dim}")
        words = []
        rows = np.empty((count, dim))
        n_read = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            if n_read >= count:
                raise FormatError(f"{path}:{lineno}: more vector lines than header count {count}")
            fields = line.split()
            if len(fields) != dim + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected word + {dim} values, got {len(fields)} fields"
                )
            words.append(fields[0])
            try:
                rows[n_read] = [float(x) for x in fields[1:]]
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: non-numeric vector value") from exc
            n_read += 1
        if n_read != count:
            raise FormatError(f"{path}: header promises {count} vector lines, found {n_read}")
    if len(set(words)) != len(words):
        raise FormatError(f"{path}: duplicate words in vectors file")
    return WordVectors(words, rows)
