"""Command-line front end.

Subcommands mirror the pipeline: preprocess -> train-vocab ->
train-vectors (optional) -> transplant -> analyze, plus run-all driven by a
flat key = value config file.  Set VT_LOG=DEBUG|INFO|WARNING|ERROR to
control diagnostics; primary results go to stdout.
"""

import argparse
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import analysis, corpus, rng, tokenizer, transplant, vectors
from .errors import FormatError, VocabTransplantError
from .transplant import STRATEGIES

logger = logging.getLogger(__name__)


def _configure_logging():
    level_name = os.environ.get("VT_LOG", "WARNING").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# pipeline config
# ---------------------------------------------------------------------------

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _BOOL_TRUE:
        return True
    if v in _BOOL_FALSE:
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


@dataclass
class PipelineConfig:
    corpus: str = ""
    corpus_format: str = "jsonl"
    emoji_map: str = ""
    holdout_fraction: float = 0.0
    output_dir: str = ""
    seed: int = 0
    strategy: str = "subword-average"
    source_vocab: str = ""
    source_embeddings: str = ""
    embeddings_format: str = "auto"
    vectors: str = ""
    target_size: int = 0
    min_pair_freq: int = 2
    n_unused: int = 10
    dim: int = 50
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 2
    ngram_min: int = 3
    ngram_max: int = 6
    buckets: int = 1 << 17
    lr: float = 0.05
    workers: int = 1
    ridge: float = 1e-8
    report_format: str = "json"
    output_format: str = "text"
    provenance: bool = False

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        raw = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                s = line.strip()
                if not s or s.startswith("#"):
                    continue
                if "=" not in s:
                    raise FormatError(f"{path}:{lineno}: expected 'key = value'")
                key, value = s.split("=", 1)
                raw[key.strip()] = value.strip()
        cfg = cls()
        known = {f.name: f.type for f in fields(cls)}
        for key, value in raw.items():
            if key not in known:
                raise FormatError(f"{path}: unknown config key {key!r}")
            current = getattr(cfg, key)
            try:
                if isinstance(current, bool):
                    setattr(cfg, key, _parse_bool(value))
                elif isinstance(current, int):
                    setattr(cfg, key, int(value))
                elif isinstance(current, float):
                    setattr(cfg, key, float(value))
                else:
                    setattr(cfg, key, value)
            except ValueError as exc:
                raise FormatError(f"{path}: bad value for {key!r}: {exc}") from exc
        return cfg

    def validate(self):
        for name in ("corpus", "output_dir", "source_vocab", "source_embeddings"):
            if not getattr(self, name):
                raise ValueError(f"config key {name!r} is required")
        for name in ("corpus", "source_vocab", "source_embeddings", "vectors", "emoji_map"):
            path = getattr(self, name)
            if path and not Path(path).exists():
                raise ValueError(f"config key {name!r} points to a missing file: {path}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not 0 <= self.seed < 1 << 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.corpus_format not in ("jsonl", "text"):
            raise ValueError("corpus_format must be 'jsonl' or 'text'")
        if self.target_size <= 0:
            raise ValueError("target_size must be a positive integer")
        if self.holdout_fraction and not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _read_records(path, fmt):
    if fmt == "jsonl":
        return corpus.read_jsonl(path)
    return corpus.read_plain(path)


def _emoji_map(path):
    return corpus.EmojiMap.from_tsv(path) if path else corpus.EmojiMap.default()


def _load_source_embeddings(path, fmt, vocab):
    path = str(path)
    if fmt == "auto":
        fmt = "binary" if Path(f"{path}.json").exists() or path.endswith(".bin") else "text"
    if fmt == "binary":
        return transplant.load_embedding_binary(path, vocab)
    return transplant.load_embedding_text(path, vocab)


def _write_adapted(emb, path, fmt, vocab_file):
    if fmt == "binary":
        transplant.save_embedding_binary(emb, path, vocab_file=vocab_file)
    else:
        transplant.save_embedding_text(emb, path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_preprocess(args) -> int:
    emoji_map = _emoji_map(args.emoji_map)
    records = list(_read_records(args.input, args.format))
    kept = list(corpus.dedup_stream(records))
    print(f"read {len(records)} records, {len(kept)} after dedup")
    if args.holdout_fraction is not None:
        if not args.dev_output:
            raise ValueError("--dev-output is required with --holdout-fraction")
        split_seed = rng.derive_seed(args.seed, "split")
        train, dev = corpus.split_holdout(kept, args.holdout_fraction, split_seed)
        n = corpus.write_lines(
            (corpus.normalize_tweet(r.text, emoji_map) for r in train), args.output
        )
        m = corpus.write_lines(
            (corpus.normalize_tweet(r.text, emoji_map) for r in dev), args.dev_output
        )
        print(f"wrote {n} train lines to {args.output}")
        print(f"wrote {m} dev lines to {args.dev_output}")
    else:
        n = corpus.write_lines(
            (corpus.normalize_tweet(r.text, emoji_map) for r in kept), args.output
        )
        print(f"wrote {n} lines to {args.output}")
    return 0


def _read_text_lines(path):
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def cmd_train_vocab(args) -> int:
    lines = _read_text_lines(args.input)
    vocab = tokenizer.train_wordpiece(
        lines,
        target_size=args.target_size,
        min_pair_freq=args.min_pair_freq,
        n_unused=args.n_unused,
    )
    tokenizer.save_vocab(vocab, args.output)
    print(f"trained vocabulary of {len(vocab)} tokens -> {args.output}")
    return 0


def cmd_train_vectors(args) -> int:
    lines = _read_text_lines(args.input)
    if args.vocab:
        vocab = tokenizer.load_vocab(args.vocab)
        lines = [" ".join(tokenizer.tokenize_text(line, vocab)) for line in lines]
    trained = vectors.train_skipgram(
        lines,
        dim=args.dim,
        window=args.window,
        negatives=args.negatives,
        epochs=args.epochs,
        min_count=args.min_count,
        ngram_min=args.ngram_min,
        ngram_max=args.ngram_max,
        buckets=args.buckets,
        lr=args.lr,
        seed=rng.derive_seed(args.seed, "vectors"),
        workers=args.workers,
    )
    vectors.save_text(trained, args.output)
    print(f"trained {len(trained)} vectors of dim {trained.dim} -> {args.output}")
    return 0


def _transplant_pipeline(
    source_vocab_path,
    source_embeddings_path,
    embeddings_format,
    target_vocab_path,
    strategy,
    vectors_path,
    seed,
    ridge,
    output_path,
    output_format,
    report_path,
    report_format,
    include_provenance,
) -> int:
    src_vocab = tokenizer.load_vocab(source_vocab_path)
    tgt_vocab = tokenizer.load_vocab(target_vocab_path)
    src_emb = _load_source_embeddings(source_embeddings_path, embeddings_format, src_vocab)

    tgt_vocab = transplant.reconcile_size(src_vocab, tgt_vocab)
    align = transplant.align_vocabs(src_vocab, tgt_vocab)
    ft = vectors.load_text(vectors_path) if vectors_path else None
    adapted, model = transplant.initialize_embeddings(
        strategy,
        align,
        src_emb,
        seed=rng.derive_seed(seed, "transplant"),
        ft=ft,
        ridge=ridge,
    )
    provenance = transplant.provenance_map(strategy, align, src_emb, ft)
    report = analysis.build_report(
        align, strategy, src_vocab, provenance, include_provenance=include_provenance
    )

    vocab_out = Path(f"{output_path}.vocab.txt")
    tokenizer.save_vocab(tgt_vocab, vocab_out)
    _write_adapted(adapted, output_path, output_format, vocab_file=vocab_out.name)
    written = analysis.emit_report(report, report_path, report_format)

    print(f"strategy {strategy}: {report.n_shared} shared, {report.n_new} new "
          f"({report.pct_new:.1f}% new), {report.fallback_count} projection fallbacks")
    if model is not None:
        print(f"projection residual {model.residual:.6g} over {model.n_fit} types "
              f"({model.n_skipped} skipped)")
    print(f"wrote adapted matrix to {output_path} (vocab {vocab_out})")
    for p in written:
        print(f"wrote report to {p}")
    return 0


def cmd_transplant(args) -> int:
    report_path = args.report or f"{args.output}.report.{args.report_format}"
    return _transplant_pipeline(
        args.source_vocab,
        args.source_embeddings,
        args.embeddings_format,
        args.target_vocab,
        args.strategy,
        args.vectors,
        args.seed,
        args.ridge,
        args.output,
        args.output_format,
        report_path,
        args.report_format,
        args.provenance,
    )


def cmd_analyze(args) -> int:
    src_vocab = tokenizer.load_vocab(args.source_vocab)
    tgt_vocab = tokenizer.load_vocab(args.target_vocab)
    align = transplant.align_vocabs(src_vocab, tgt_vocab)
    report = analysis.build_report(align, "analysis", src_vocab)
    written = analysis.emit_report(report, args.output, args.format)
    print(f"{report.n_shared} shared, {report.n_new} new ({report.pct_new:.1f}% new), "
          f"mean subwords {report.mean_subwords:.4g}")
    for p in written:
        print(f"wrote report to {p}")
    return 0


def cmd_run_all(args) -> int:
    cfg = PipelineConfig.from_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.strategy:
        cfg.strategy = args.strategy
    if args.output_dir:
        cfg.output_dir = args.output_dir
    if args.vectors:
        cfg.vectors = args.vectors
    cfg.validate()

    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    emoji_map = _emoji_map(cfg.emoji_map)

    # preprocess
    records = list(_read_records(cfg.corpus, cfg.corpus_format))
    kept = list(corpus.dedup_stream(records))
    if cfg.holdout_fraction:
        train, dev = corpus.split_holdout(
            kept, cfg.holdout_fraction, rng.derive_seed(cfg.seed, "split")
        )
        corpus.write_lines(
            (corpus.normalize_tweet(r.text, emoji_map) for r in dev), out / "corpus.dev.txt"
        )
    else:
        train = kept
    normalized = [corpus.normalize_tweet(r.text, emoji_map) for r in train]
    corpus.write_lines(normalized, out / "corpus.txt")
    print(f"preprocess: {len(records)} records -> {len(normalized)} normalized lines")

    # train-vocab
    tgt_vocab = tokenizer.train_wordpiece(
        normalized,
        target_size=cfg.target_size,
        min_pair_freq=cfg.min_pair_freq,
        n_unused=cfg.n_unused,
    )
    tokenizer.save_vocab(tgt_vocab, out / "target_vocab.txt")
    print(f"train-vocab: {len(tgt_vocab)} tokens")

    # train-vectors (only when the strategy needs them and none are supplied)
    vectors_path = cfg.vectors
    if cfg.strategy == "fasttext-projection" and not vectors_path:
        tokenized = [" ".join(tokenizer.tokenize_text(line, tgt_vocab)) for line in normalized]
        corpus.write_lines(tokenized, out / "corpus.tokenized.txt")
        trained = vectors.train_skipgram(
            tokenized,
            dim=cfg.dim,
            window=cfg.window,
            negatives=cfg.negatives,
            epochs=cfg.epochs,
            min_count=cfg.min_count,
            ngram_min=cfg.ngram_min,
            ngram_max=cfg.ngram_max,
            buckets=cfg.buckets,
            lr=cfg.lr,
            seed=rng.derive_seed(cfg.seed, "vectors"),
            workers=cfg.workers,
        )
        vectors_path = out / "vectors.vec"
        vectors.save_text(trained, vectors_path)
        print(f"train-vectors: {len(trained)} vectors of dim {trained.dim}")

    # transplant
    suffix = "bin" if cfg.output_format == "binary" else "vec"
    status = _transplant_pipeline(
        cfg.source_vocab,
        cfg.source_embeddings,
        cfg.embeddings_format,
        out / "target_vocab.txt",
        cfg.strategy,
        vectors_path,
        cfg.seed,
        cfg.ridge,
        out / f"adapted.{suffix}",
        cfg.output_format,
        out / f"report.{cfg.report_format}",
        cfg.report_format,
        cfg.provenance,
    )
    if status:
        return status

    # analyze (standalone overlap report, source vs trained target vocabulary)
    src_vocab = tokenizer.load_vocab(cfg.source_vocab)
    align = transplant.align_vocabs(src_vocab, tokenizer.load_vocab(out / "target_vocab.txt"))
    report = analysis.build_report(align, "analysis", src_vocab)
    analysis.emit_report(report, out / "analysis.json", "json")
    analysis.emit_report(report, out / "analysis.csv", "csv")
    print(f"analyze: histogram over {report.n_new} new types "
          f"(mean subwords {report.mean_subwords:.4g})")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vocab-transplant",
        description="Adapt a pretrained subword vocabulary and embedding matrix to a new domain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="dedup and normalize a tweet corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("jsonl", "text"), default="jsonl")
    p.add_argument("--output", required=True)
    p.add_argument("--emoji-map", default="", help="TSV emoji->alias table (default: bundled)")
    p.add_argument("--holdout-fraction", type=float, default=None)
    p.add_argument("--dev-output", default="")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train-vocab", help="train a WordPiece vocabulary")
    p.add_argument("--input", required=True, help="normalized corpus, one line per tweet")
    p.add_argument("--output", required=True)
    p.add_argument("--target-size", type=int, required=True)
    p.add_argument("--min-pair-freq", type=int, default=2)
    p.add_argument("--n-unused", type=int, default=10)
    p.set_defaults(func=cmd_train_vocab)

    p = sub.add_parser("train-vectors", help="train skipgram vectors with char n-grams")
    p.add_argument("--input", required=True, help="token lines (or raw lines with --vocab)")
    p.add_argument("--output", required=True)
    p.add_argument("--vocab", default="", help="tokenize input lines with this vocabulary first")
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--min-count", type=int, default=2)
    p.add_argument("--ngram-min", type=int, default=3)
    p.add_argument("--ngram-max", type=int, default=6)
    p.add_argument("--buckets", type=int, default=1 << 17)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_vectors)

    p = sub.add_parser("transplant", help="initialize an adapted embedding matrix")
    p.add_argument("--source-vocab", required=True)
    p.add_argument("--source-embeddings", required=True)
    p.add_argument("--embeddings-format", choices=("auto", "text", "binary"), default="auto")
    p.add_argument("--target-vocab", required=True)
    p.add_argument("--strategy", choices=STRATEGIES, required=True)
    p.add_argument("--vectors", default="", help="skipgram vectors (word2vec text format)")
    p.add_argument("--output", required=True)
    p.add_argument("--output-format", choices=("text", "binary"), default="text")
    p.add_argument("--report", default="")
    p.add_argument("--report-format", choices=("json", "csv"), default="json")
    p.add_argument("--provenance", action="store_true", help="include per-token provenance")
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_transplant)

    p = sub.add_parser("analyze", help="overlap statistics and subword-count histogram")
    p.add_argument("--source-vocab", required=True)
    p.add_argument("--target-vocab", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("run-all", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--strategy", choices=STRATEGIES, default="")
    p.add_argument("--output-dir", default="")
    p.add_argument("--vectors", default="")
    p.set_defaults(func=cmd_run_all)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging()
    if getattr(args, "func", None) is cmd_transplant:
        if args.strategy == "fasttext-projection" and not args.vectors:
            parser.error("--vectors is required with --strategy fasttext-projection")
    try:
        return args.func(args)
    except (VocabTransplantError, ValueError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
