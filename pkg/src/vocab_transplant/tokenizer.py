"""WordPiece vocabulary training and greedy longest-match-first tokenization.

Training follows the pair-scoring objective: at each step the merge with the
highest ``freq(pair) / (freq(left) * freq(right))`` wins, ties broken by the
lexicographically smallest merged string.  The starting alphabet holds every
character seen in the corpus in bare form, plus a continuation-prefixed form
for characters that occur word-internally.
"""

import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import FormatError, TrainingError

DEFAULT_SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
UNK_TOKEN = "[UNK]"
MAX_WORD_CHARS = 100

# '@' and '#' are exempt so mention and hashtag tokens survive intact
_KEPT_PUNCT = {"@", "#"}


def is_punctuation(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S") and ch not in _KEPT_PUNCT


class Vocabulary:
    """Ordered subword vocabulary with contiguous ids from 0.

    Tokens must be distinct, non-empty, and whitespace-free (the one-token-
    per-line file format and the vectors text format both depend on that).
    """

    def __init__(
        self,
        tokens: Sequence[str],
        specials: Optional[Sequence[str]] = None,
        continuation_prefix: str = "##",
        unused_prefix: str = "[unused",
    ):
        specials = list(DEFAULT_SPECIALS if specials is None else specials)
        for required in DEFAULT_SPECIALS:
            if required not in specials:
                raise ValueError(f"specials must include {required}")
        tokens = list(tokens)
        seen = set()
        for tok in tokens:
            if not tok:
                raise ValueError("vocabulary tokens must be non-empty")
            if any(c.isspace() for c in tok):
                raise ValueError(f"vocabulary token contains whitespace: {tok!r}")
            if tok in seen:
                raise ValueError(f"duplicate vocabulary token: {tok!r}")
            seen.add(tok)
        missing = [s for s in specials if s not in seen]
        if missing:
            raise ValueError(f"special tokens missing from vocabulary: {missing}")
        self.tokens = tokens
        self.id_of = {tok: i for i, tok in enumerate(tokens)}
        self.specials = specials
        self.continuation_prefix = continuation_prefix
        self.unused_prefix = unused_prefix

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.id_of

    def __eq__(self, other):
        return (
            isinstance(other, Vocabulary)
            and self.tokens == other.tokens
            and self.specials == other.specials
            and self.continuation_prefix == other.continuation_prefix
            and self.unused_prefix == other.unused_prefix
        )

    def is_unused(self, token: str) -> bool:
        return token.startswith(self.unused_prefix)

    def unused_tokens(self):
        return [t for t in self.tokens if self.is_unused(t)]

    def effective_tokens(self):
        """Tokens that are not unused placeholders."""
        return [t for t in self.tokens if not self.is_unused(t)]


@dataclass
class TokenizationResult:
    pieces: list
    is_unk: bool


def pre_tokenize(line: str) -> list:
    """Whitespace split, then split punctuation into standalone words."""
    words = []
    for chunk in line.split():
        buf = []
        for ch in chunk:
            if is_punctuation(ch):
                if buf:
                    words.append("".join(buf))
                    buf = []
                words.append(ch)
            else:
                buf.append(ch)
        if buf:
            words.append("".join(buf))
    return words


def _initial_units(word: str, prefix: str) -> tuple:
    return tuple(ch if i == 0 else prefix + ch for i, ch in enumerate(word))


def _merge_units(units: tuple, left: str, right: str, merged: str) -> tuple:
    out = []
    i = 0
    n = len(units)
    while i < n:
        if i + 1 < n and units[i] == left and units[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(units[i])
            i += 1
    return tuple(out)


def _strip_prefix(unit: str, prefix: str) -> str:
    return unit[len(prefix):] if unit.startswith(prefix) else unit


def train_wordpiece(
    corpus: Iterable[str],
    target_size: int,
    min_pair_freq: int = 2,
    specials: Optional[Sequence[str]] = None,
    n_unused: int = 0,
) -> Vocabulary:
    """Train a WordPiece vocabulary of exactly ``target_size`` tokens.

    Layout: specials, [unused-0..n_unused-1], the sorted alphabet, then the
    merged pieces in merge order.  If merging stops early (no adjacent pair
    reaches ``min_pair_freq``), the vocabulary is padded with further
    [unused-x] tokens up to ``target_size``.
    """
    if min_pair_freq < 1:
        raise ValueError("min_pair_freq must be >= 1")
    if n_unused < 0:
        raise ValueError("n_unused must be >= 0")
    specials = list(DEFAULT_SPECIALS if specials is None else specials)
    prefix = "##"

    word_freq = Counter()
    for line in corpus:
        word_freq.update(pre_tokenize(line))
    if not word_freq:
        raise TrainingError("training corpus contains no words")

    alphabet = set()
    for word in word_freq:
        alphabet.add(word[0])
        for ch in word[1:]:
            alphabet.add(ch)
            alphabet.add(prefix + ch)
    alphabet = sorted(alphabet)

    base = len(specials) + n_unused + len(alphabet)
    if target_size <= base:
        raise ValueError(
            f"target_size {target_size} too small: specials + unused + alphabet already need {base}"
        )

    decomp = {w: _initial_units(w, prefix) for w in word_freq}
    unit_freq = Counter()
    pair_freq = Counter()
    pair_words = defaultdict(set)
    for word, units in decomp.items():
        f = word_freq[word]
        for u in units:
            unit_freq[u] += f
        for a, b in zip(units, units[1:]):
            pair_freq[(a, b)] += f
            pair_words[(a, b)].add(word)

    existing = set(specials)
    existing.update(f"[unused-{i}]" for i in range(n_unused))
    existing.update(alphabet)
    merges = []
    room = target_size - base

    while len(merges) < room:
        best_pair = None
        best_key = None
        for pair, f in pair_freq.items():
            if f < min_pair_freq:
                continue
            score = f / (unit_freq[pair[0]] * unit_freq[pair[1]])
            merged = pair[0] + _strip_prefix(pair[1], prefix)
            key = (-score, merged)
            if best_key is None or key < best_key:
                best_key = key
                best_pair = pair
        if best_pair is None:
            break

        left, right = best_pair
        merged = left + _strip_prefix(right, prefix)
        for word in list(pair_words[best_pair]):
            old_units = decomp[word]
            f = word_freq[word]
            for u in old_units:
                unit_freq[u] -= f
            for p in zip(old_units, old_units[1:]):
                pair_freq[p] -= f
                if pair_freq[p] <= 0:
                    del pair_freq[p]
                pair_words[p].discard(word)
            new_units = _merge_units(old_units, left, right, merged)
            decomp[word] = new_units
            for u in new_units:
                unit_freq[u] += f
            for p in zip(new_units, new_units[1:]):
                pair_freq[p] += f
                pair_words[p].add(word)
        if merged not in existing:
            existing.add(merged)
            merges.append(merged)

    tokens = list(specials)
    tokens.extend(f"[unused-{i}]" for i in range(n_unused))
    tokens.extend(alphabet)
    tokens.extend(merges)
    pad_index = n_unused
    while len(tokens) < target_size:
        candidate = f"[unused-{pad_index}]"
        pad_index += 1
        if candidate in existing:
            continue
        existing.add(candidate)
        tokens.append(candidate)
    return Vocabulary(tokens, specials=specials)


def tokenize_word(word: str, vocab: Vocabulary) -> TokenizationResult:
    """Greedy longest-match-first segmentation of a single word.

    Returns [UNK] when some suffix has no vocabulary prefix, or when the
    word exceeds 100 characters.
    """
    if not word:
        raise ValueError("cannot tokenize an empty word")
    if any(c.isspace() for c in word):
        raise ValueError(f"word must not contain whitespace: {word!r}")
    if len(word) > MAX_WORD_CHARS:
        return TokenizationResult([UNK_TOKEN], True)

    prefix = vocab.continuation_prefix
    pieces = []
    start = 0
    n = len(word)
    while start < n:
        end = n
        match = None
        while start < end:
            candidate = word[start:end]
            if start > 0:
                candidate = prefix + candidate
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            return TokenizationResult([UNK_TOKEN], True)
        pieces.append(match)
        start = end
    return TokenizationResult(pieces, False)


def tokenize_text(line: str, vocab: Vocabulary) -> list:
    """Pre-tokenize a line and concatenate the word-level pieces."""
    pieces = []
    for word in pre_tokenize(line):
        pieces.extend(tokenize_word(word, vocab).pieces)
    return pieces


def detokenize(pieces: Sequence[str], vocab: Vocabulary) -> str:
    """Inverse of tokenize_word for non-UNK results."""
    if not pieces:
        return ""
    prefix = vocab.continuation_prefix
    return pieces[0] + "".join(_strip_prefix(p, prefix) for p in pieces[1:])


def save_vocab(vocab: Vocabulary, path) -> None:
    """One token per line; the line number (0-based) is the token id."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for tok in vocab.tokens:
            fh.write(tok)
            fh.write("\n")


def load_vocab(
    path,
    specials: Optional[Sequence[str]] = None,
    continuation_prefix: str = "##",
    unused_prefix: str = "[unused",
) -> Vocabulary:
    tokens = []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            tok = line.rstrip("\r\n")
            if not tok:
                raise FormatError(f"{path}:{lineno}: empty vocabulary line")
            if tok in seen:
                raise FormatError(
                    f"{path}:{lineno}: duplicate token {tok!r} (first seen on line {seen[tok]})"
                )
            seen[tok] = lineno
            tokens.append(tok)
    if not tokens:
        raise FormatError(f"{path}: vocabulary file is empty")
    try:
        return Vocabulary(
            tokens,
            specials=specials,
            continuation_prefix=continuation_prefix,
            unused_prefix=unused_prefix,
        )
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
