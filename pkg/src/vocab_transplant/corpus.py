"""Tweet ingestion and normalization.

The normalization contract, in order: URL masking, mention masking, emoji
aliasing, sentinel-preserving lower-casing, whitespace collapsing.  A URL
runs to the next whitespace, so an emoji glued to the end of a URL is
consumed by the URL mask rather than aliased.
"""

import json
import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Iterator, Sequence

from . import rng
from .errors import FormatError

URL_SENTINEL = "HTTPURL"
MENTION_SENTINEL = "@USER"

# scheme- or www.-prefixed, terminated by whitespace
_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
# @ + word characters, not preceded by a word character (bare @ untouched)
_MENTION_RE = re.compile(r"(?<!\w)@\w+")
_WS_RE = re.compile(r"\s+")

# private-use placeholders shield the sentinels from case folding
_USER_HOLD = ""
_URL_HOLD = ""


@dataclass(frozen=True)
class TweetRecord:
    id: str
    text: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("tweet id must be non-empty")


class EmojiMap:
    """Mapping from emoji codepoint sequences to textual aliases.

    Matching is longest-key-first, so multi-codepoint sequences (flags,
    variation selectors) win over their prefixes.
    """

    def __init__(self, entries: dict):
        for key, alias in entries.items():
            if not key:
                raise ValueError("emoji key must be a non-empty codepoint sequence")
            if not alias or _WS_RE.search(alias):
                raise ValueError(f"alias for {key!r} must be non-empty and contain no whitespace")
        self.entries = dict(entries)
        self._pattern = None
        if self.entries:
            alternation = "|".join(
                re.escape(k) for k in sorted(self.entries, key=len, reverse=True)
            )
            self._pattern = re.compile(alternation)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, key):
        return key in self.entries

    def replace(self, text: str) -> str:
        """Replace every known emoji sequence with its space-padded alias."""
        if self._pattern is None:
            return text
        return self._pattern.sub(lambda m: f" {self.entries[m.group(0)]} ", text)

    @classmethod
    def from_tsv(cls, path) -> "EmojiMap":
        """Load a two-column TSV: emoji literal, alias.

        Blank lines and lines starting with '#' are ignored.  Duplicate keys
        are format errors (longest-first matching must be unambiguous).
        """
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) < 2:
                    raise FormatError(f"{path}:{lineno}: expected 2 tab-separated columns")
                key, alias = parts[0], parts[1]
                if not key:
                    raise FormatError(f"{path}:{lineno}: empty emoji column")
                if not alias or _WS_RE.search(alias):
                    raise FormatError(f"{path}:{lineno}: alias must be non-empty without whitespace")
                if key in entries:
                    raise FormatError(f"{path}:{lineno}: duplicate emoji key {key!r}")
                entries[key] = alias
        return cls(entries)

    @classmethod
    def default(cls) -> "EmojiMap":
        """The emoji table shipped with the package."""
        data = resources.files("vocab_transplant").joinpath("data/emoji_map.tsv")
        with resources.as_file(data) as path:
            return cls.from_tsv(path)


def normalize_tweet(raw: str, emoji_map: EmojiMap) -> str:
    """Normalize one tweet: mask URLs and mentions, alias emoji, lower-case.

    The sentinels @USER and HTTPURL stay upper-case; everything else is
    lower-cased with str.lower (simple case mapping).  Whitespace runs
    collapse to single spaces and the result is trimmed.  Idempotent.
    """
    text = _URL_RE.sub(URL_SENTINEL, raw)
    text = _MENTION_RE.sub(MENTION_SENTINEL, text)
    text = emoji_map.replace(text)
    text = text.replace(MENTION_SENTINEL, _USER_HOLD).replace(URL_SENTINEL, _URL_HOLD)
    text = text.lower()
    text = text.replace(_USER_HOLD, MENTION_SENTINEL).replace(_URL_HOLD, URL_SENTINEL)
    return _WS_RE.sub(" ", text).strip()


def dedup_stream(records: Iterable[TweetRecord]) -> Iterator[TweetRecord]:
    """Keep the first record per id, preserving order of survivors."""
    seen = set()
    for record in records:
        if record.id in seen:
            continue
        seen.add(record.id)
        yield record


def split_holdout(records: Sequence[TweetRecord], holdout_fraction: float, seed: int):
    """Deterministic seeded split into (train, dev); |dev| = round(fraction * n).

    Both halves keep the input's relative order.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise ValueError(f"holdout_fraction must be in (0, 1), got {holdout_fraction}")
    records = list(records)
    n_dev = round(holdout_fraction * len(records))
    order = rng.permutation(seed, len(records))
    dev_idx = set(int(i) for i in order[:n_dev])
    train = [r for i, r in enumerate(records) if i not in dev_idx]
    dev = [r for i, r in enumerate(records) if i in dev_idx]
    return train, dev


def read_jsonl(path) -> Iterator[TweetRecord]:
    """Read records from JSON-lines with 'id' and 'text' fields."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
                raise FormatError(f"{path}:{lineno}: expected object with 'id' and 'text'")
            if not isinstance(obj["text"], str):
                raise FormatError(f"{path}:{lineno}: 'text' must be a string")
            tweet_id = str(obj["id"])
            if not tweet_id:
                raise FormatError(f"{path}:{lineno}: empty 'id'")
            yield TweetRecord(tweet_id, obj["text"])


def read_plain(path) -> Iterator[TweetRecord]:
    """Read one tweet per line; ids are 1-based line numbers."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            yield TweetRecord(str(lineno), line.rstrip("\n"))


def write_lines(lines: Iterable[str], path) -> int:
    """Write lines with \\n endings; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
            count += 1
    return count
