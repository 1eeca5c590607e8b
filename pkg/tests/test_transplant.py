import logging
import math

import numpy as np
import pytest

from vocab_transplant import rng
from vocab_transplant.errors import FitError, FormatError, ReconciliationError
from vocab_transplant.tokenizer import DEFAULT_SPECIALS, Vocabulary, tokenize_word
from vocab_transplant.transplant import (
    STRATEGIES,
    EmbeddingMatrix,
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
    provenance_map,
    reconcile_size,
    save_embedding_binary,
    save_embedding_text,
)
from vocab_transplant.vectors import WordVectors


# ---------------------------------------------------------------------------
# alignment
# ---------------------------------------------------------------------------


def test_align_identical_vocabs(src_vocab):
    align = align_vocabs(src_vocab, src_vocab)
    assert align.new == set()
    assert align.shared == set(src_vocab.effective_tokens())


def test_align_disjoint_beyond_specials(src_vocab):
    tgt = Vocabulary(DEFAULT_SPECIALS + ["zz", "yy", "xx"])
    align = align_vocabs(src_vocab, tgt)
    assert align.new == {"zz", "yy", "xx"}
    assert align.shared == set(DEFAULT_SPECIALS)


def test_align_fixture_against_set_oracle(src_vocab, tgt_vocab, alignment):
    src_set = {t for t in src_vocab.tokens if not t.startswith("[unused")}
    tgt_set = {t for t in tgt_vocab.tokens if not t.startswith("[unused")}
    assert alignment.shared == src_set & tgt_set
    assert alignment.new == tgt_set - src_set
    assert len(alignment.new) == 25


def test_align_excludes_unused_and_conserves(src_vocab, tgt_vocab, alignment):
    assert not any(t.startswith("[unused") for t in alignment.shared | alignment.new)
    n_unused = sum(1 for t in tgt_vocab.tokens if t.startswith("[unused"))
    assert alignment.effective_size == len(tgt_vocab) - n_unused


def test_align_id_maps(src_vocab, tgt_vocab, alignment):
    for t in alignment.shared:
        assert src_vocab.tokens[alignment.src_id[t]] == t
        assert tgt_vocab.tokens[alignment.tgt_id[t]] == t
    for t in alignment.new:
        assert tgt_vocab.tokens[alignment.tgt_id[t]] == t


# ---------------------------------------------------------------------------
# size reconciliation
# ---------------------------------------------------------------------------


def _vocab_with(extra, n_unused):
    tokens = list(DEFAULT_SPECIALS)
    tokens += [f"[unused-{i}]" for i in range(n_unused)]
    tokens += [f"tok{i}" for i in range(extra)]
    return Vocabulary(tokens)


def test_reconcile_equal_sizes_unchanged(src_vocab):
    assert reconcile_size(src_vocab, src_vocab) is src_vocab


def test_reconcile_drops_unused_highest_first(src_vocab):
    tgt = _vocab_with(extra=len(src_vocab) - 5 - 5 + 3, n_unused=5)  # 3 surplus
    assert len(tgt) == len(src_vocab) + 3
    out = reconcile_size(src_vocab, tgt)
    assert len(out) == len(src_vocab)
    assert out.unused_tokens() == ["[unused-0]", "[unused-1]"]
    survivors = [t for t in tgt.tokens if not t.startswith("[unused")]
    assert [t for t in out.tokens if not t.startswith("[unused")] == survivors


def test_reconcile_insufficient_unused_reports_shortfall(src_vocab):
    tgt = _vocab_with(extra=len(src_vocab) - 5 + 2, n_unused=0)  # 2 surplus, 0 unused
    with pytest.raises(ReconciliationError) as err:
        reconcile_size(src_vocab, tgt)
    assert err.value.shortfall == 2
    assert "shortfall 2" in str(err.value)


def test_reconcile_pads_smaller_target(src_vocab):
    tgt = _vocab_with(extra=10, n_unused=2)
    out = reconcile_size(src_vocab, tgt)
    assert len(out) == len(src_vocab)
    assert out.tokens[: len(tgt)] == tgt.tokens
    added = out.tokens[len(tgt):]
    assert all(t.startswith("[unused-") for t in added)
    assert len(set(out.tokens)) == len(out.tokens)
    # numbering continues after the existing placeholders
    assert added[0] == "[unused-2]"


# ---------------------------------------------------------------------------
# uniform / normal initialization
# ---------------------------------------------------------------------------


def _shared_rows_bit_identical(emb, align, src_emb):
    return all(
        np.array_equal(emb.rows[align.tgt_id[t]], src_emb.rows[align.src_id[t]])
        for t in align.shared
    )


def test_uniform_copies_shared_rows(alignment, src_emb):
    emb = init_uniform(alignment, src_emb, seed=5)
    assert _shared_rows_bit_identical(emb, alignment, src_emb)


def test_uniform_bounds_and_determinism(alignment, src_emb):
    emb1 = init_uniform(alignment, src_emb, seed=5)
    emb2 = init_uniform(alignment, src_emb, seed=5)
    assert np.array_equal(emb1.rows, emb2.rows)
    new_rows = np.stack([emb1.rows[alignment.tgt_id[t]] for t in alignment.new])
    assert np.all(new_rows >= -1.0) and np.all(new_rows < 1.0)
    emb3 = init_uniform(alignment, src_emb, seed=6)
    assert not np.array_equal(emb1.rows, emb3.rows)


def test_uniform_custom_range_and_validation(alignment, src_emb):
    emb = init_uniform(alignment, src_emb, seed=5, lo=2.0, hi=3.0)
    new_rows = np.stack([emb.rows[alignment.tgt_id[t]] for t in alignment.new])
    assert np.all(new_rows >= 2.0) and np.all(new_rows < 3.0)
    with pytest.raises(ValueError):
        init_uniform(alignment, src_emb, seed=5, lo=1.0, hi=1.0)


def test_fit_distribution_identical_rows(src_vocab):
    rows = np.tile(np.arange(8.0), (len(src_vocab), 1))
    fit = fit_distribution(EmbeddingMatrix(src_vocab, rows))
    assert np.array_equal(fit.mu, np.arange(8.0))
    assert np.array_equal(fit.sigma, np.zeros(8))


def test_fit_distribution_hand_arithmetic():
    fit = fit_distribution(np.array([[0.0], [2.0]]))
    assert np.array_equal(fit.mu, [1.0])
    assert np.array_equal(fit.sigma, [1.0])


def _two_pass_oracle(rows):
    n, d = rows.shape
    mu = [math.fsum(rows[i, j] for i in range(n)) / n for j in range(d)]
    sigma = [
        math.sqrt(math.fsum((rows[i, j] - mu[j]) ** 2 for i in range(n)) / n)
        for j in range(d)
    ]
    return mu, sigma


def test_fit_distribution_matches_two_pass_oracle():
    rows = rng.normal_matrix(21, 0, (100, 8)) * 3.0 + 0.5
    vocab = Vocabulary(DEFAULT_SPECIALS + [f"w{i}" for i in range(95)])
    fit = fit_distribution(EmbeddingMatrix(vocab, rows))
    mu, sigma = _two_pass_oracle(rows)
    assert np.max(np.abs(fit.mu - np.array(mu))) <= 1e-12
    assert np.max(np.abs(fit.sigma - np.array(sigma))) <= 1e-12


def test_fit_distribution_requires_two_rows():
    with pytest.raises(ValueError):
        fit_distribution(np.zeros((1, 3)))


def test_normal_copies_shared_and_degenerate_source(alignment, src_vocab):
    constant = np.tile(np.linspace(-1, 1, 8), (len(src_vocab), 1))
    src = EmbeddingMatrix(src_vocab, constant)
    emb = init_normal(alignment, src, seed=3)
    assert _shared_rows_bit_identical(emb, alignment, src)
    fit = fit_distribution(src)
    assert np.array_equal(fit.sigma, np.zeros(8))
    for t in alignment.new:
        assert np.array_equal(emb.rows[alignment.tgt_id[t]], fit.mu)


def test_normal_sample_statistics(src_vocab, src_emb):
    # many new rows; per-dimension sample mean within 4 sigma / sqrt(n) of mu
    n_new = 1250  # 1250 rows x 8 dims = 10,000 entries per... per-dim count is 1250
    tgt = Vocabulary(DEFAULT_SPECIALS + [f"n{i}" for i in range(n_new)])
    align = align_vocabs(src_vocab, tgt)
    emb = init_normal(align, src_emb, seed=17)
    fit = fit_distribution(src_emb)
    new_rows = np.stack([emb.rows[align.tgt_id[t]] for t in align.new])
    bound = 4.0 * fit.sigma / np.sqrt(len(align.new))
    assert np.all(np.abs(new_rows.mean(axis=0) - fit.mu) <= bound)


def test_normal_deterministic(alignment, src_emb):
    a = init_normal(alignment, src_emb, seed=3)
    b = init_normal(alignment, src_emb, seed=3)
    assert np.array_equal(a.rows, b.rows)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------


def _system(n=50, d_in=4, d_out=6, seed=2):
    F = rng.normal_matrix(seed, 0, (n, d_in))
    W_star = rng.normal_matrix(seed + 1, 0, (d_in, d_out))
    tokens = [f"w{i}" for i in range(n)]
    ft = WordVectors(tokens, F)
    vocab = Vocabulary(DEFAULT_SPECIALS + tokens)
    rows = np.zeros((len(vocab), d_out))
    rows[5:] = F @ W_star
    return ft, EmbeddingMatrix(vocab, rows), set(tokens), W_star, F


def test_projection_identity_self_map():
    F = rng.normal_matrix(31, 0, (4, 4))
    tokens = [f"w{i}" for i in range(4)]
    ft = WordVectors(tokens, F)
    vocab = Vocabulary(DEFAULT_SPECIALS + tokens)
    rows = np.zeros((9, 4))
    rows[5:] = F
    model = fit_projection(ft, EmbeddingMatrix(vocab, rows), set(tokens), ridge=0.0)
    assert np.max(np.abs(model.W - np.eye(4))) < 1e-8


def test_projection_recovers_exact_map():
    ft, emb, shared, W_star, F = _system()
    model = fit_projection(ft, emb, shared, ridge=0.0)
    assert np.max(np.abs(model.W - W_star)) < 1e-6
    assert model.residual < 1e-18
    assert model.n_fit == 50 and model.n_skipped == 0


def test_projection_local_optimality():
    ft, emb, shared, _, F = _system(n=60, d_in=5, d_out=7, seed=8)
    # make the system inconsistent so the residual is non-trivial
    emb.rows[5:] += rng.normal_matrix(99, 0, (60, 7)) * 0.1
    model = fit_projection(ft, emb, shared, ridge=0.0)
    B = emb.rows[5:]
    base = float(np.sum((F @ model.W - B) ** 2))
    for k in range(100):
        delta = rng.normal_matrix(1000 + k, 0, model.W.shape)
        delta *= 1e-3 / np.linalg.norm(delta)
        perturbed = float(np.sum((F @ (model.W + delta) - B) ** 2))
        assert base <= perturbed


def test_projection_skips_missing_and_warns(caplog):
    ft, emb, shared, _, _ = _system()
    small = WordVectors(ft.vocab[:3], ft.rows[:3])
    with caplog.at_level(logging.WARNING):
        model = fit_projection(small, emb, shared, ridge=1e-8)
    assert model.n_fit == 3 and model.n_skipped == 47
    assert any("underdetermined" in r.message for r in caplog.records)


def test_projection_empty_fit_set():
    ft, emb, shared, _, _ = _system()
    other = WordVectors(["zzz"], np.ones((1, 4)))
    with pytest.raises(FitError, match="no shared type"):
        fit_projection(other, emb, shared)


def test_projection_singular_suggests_ridge():
    tokens = [f"w{i}" for i in range(10)]
    F = np.zeros((10, 3))
    F[:, 0] = np.arange(10.0)  # rank 1
    ft = WordVectors(tokens, F)
    vocab = Vocabulary(DEFAULT_SPECIALS + tokens)
    rows = np.zeros((15, 2))
    emb = EmbeddingMatrix(vocab, rows)
    with pytest.raises(FitError, match="ridge"):
        fit_projection(ft, emb, set(tokens), ridge=0.0)
    model = fit_projection(ft, emb, set(tokens), ridge=1e-8)
    assert np.all(np.isfinite(model.W))


def test_projection_rejects_tokens_missing_from_source():
    ft, emb, shared, _, _ = _system()
    with pytest.raises(ValueError, match="missing from source"):
        fit_projection(ft, emb, shared | {"notthere"}, ridge=0.0)


def test_init_projection_rows(alignment, src_emb, ft_vectors):
    model = fit_projection(ft_vectors, src_emb, alignment.shared, ridge=1e-8)
    emb = init_projection(alignment, src_emb, ft_vectors, model)
    assert _shared_rows_bit_identical(emb, alignment, src_emb)
    for t in sorted(alignment.new):
        got = emb.rows[alignment.tgt_id[t]]
        if t in ft_vectors:
            vec = ft_vectors.word_vector(t)
            naive = np.array(
                [math.fsum(vec[i] * model.W[i, j] for i in range(len(vec))) for j in range(8)]
            )
            assert np.max(np.abs(got - naive)) <= 1e-10
        else:
            # fallback: subword average (or the [UNK] row)
            result = tokenize_word(t, src_emb.vocab)
            if result.is_unk:
                assert np.array_equal(got, src_emb.row_for("[UNK]"))
            else:
                mean = np.mean([src_emb.row_for(p) for p in result.pieces], axis=0)
                assert np.max(np.abs(got - mean)) <= 1e-12


def test_init_projection_zero_vector_maps_to_zero(alignment, src_emb, ft_vectors):
    rows = ft_vectors.rows.copy()
    covered = [w for w in sorted(alignment.new) if w in ft_vectors]
    rows[ft_vectors.word_id[covered[0]]] = 0.0
    zeroed = WordVectors(ft_vectors.vocab, rows)
    model = fit_projection(zeroed, src_emb, alignment.shared, ridge=1e-8)
    emb = init_projection(alignment, src_emb, zeroed, model)
    assert np.array_equal(emb.rows[alignment.tgt_id[covered[0]]], np.zeros(8))


def test_init_projection_dimension_mismatch(alignment, src_emb, ft_vectors):
    model = fit_projection(ft_vectors, src_emb, alignment.shared, ridge=1e-8)
    bad = WordVectors(ft_vectors.vocab, np.zeros((len(ft_vectors), 3)))
    with pytest.raises(ValueError, match="projection"):
        init_projection(alignment, src_emb, bad, model)


# ---------------------------------------------------------------------------
# subword averaging
# ---------------------------------------------------------------------------


def test_average_single_piece_is_exact_copy():
    # a type that tokenizes to exactly one source piece must get that row;
    # exact-string alignment never classifies such a type as new, so build
    # the alignment by hand to exercise the rule in isolation
    from vocab_transplant.transplant import VocabAlignment

    src = Vocabulary(DEFAULT_SPECIALS + ["abcd", "x"])
    emb = EmbeddingMatrix(src, rng.uniform_matrix(3, 0, (7, 4)))
    tgt = Vocabulary(DEFAULT_SPECIALS + ["abcd"])
    align = VocabAlignment(
        shared=set(DEFAULT_SPECIALS),
        new={"abcd"},
        src_id={t: src.id_of[t] for t in DEFAULT_SPECIALS},
        tgt_id={t: tgt.id_of[t] for t in tgt.tokens},
        target_vocab=tgt,
    )
    out = init_subword_average(align, emb, src)
    assert np.array_equal(out.rows[tgt.id_of["abcd"]], emb.row_for("abcd"))


def test_average_two_piece_mean():
    src = Vocabulary(DEFAULT_SPECIALS + ["p", "##q"])
    rows = np.zeros((7, 2))
    rows[5] = [1.0, 0.0]  # 'p'
    rows[6] = [0.0, 1.0]  # '##q'
    emb = EmbeddingMatrix(src, rows)
    tgt = Vocabulary(DEFAULT_SPECIALS + ["pq"])
    align = align_vocabs(src, tgt)
    out = init_subword_average(align, emb, src)
    assert np.array_equal(out.rows[align.tgt_id["pq"]], np.array([0.5, 0.5]))


def test_average_unk_type_gets_unk_row(src_vocab, src_emb, alignment):
    out = init_subword_average(alignment, src_emb, src_vocab)
    for t in ["qq", "zz", "qqq", "xyz", "abq"]:
        assert tokenize_word(t, src_vocab).is_unk
        assert np.array_equal(out.rows[alignment.tgt_id[t]], src_emb.row_for("[UNK]"))


def test_average_matches_independent_oracle(src_vocab, src_emb, alignment):
    out = init_subword_average(alignment, src_emb, src_vocab)
    assert _shared_rows_bit_identical(out, alignment, src_emb)
    for t in alignment.new:
        result = tokenize_word(t, src_vocab)
        if result.is_unk:
            expect = src_emb.row_for("[UNK]")
        else:
            dim = src_emb.dim
            expect = np.array(
                [
                    math.fsum(src_emb.row_for(p)[d] for p in result.pieces)
                    / len(result.pieces)
                    for d in range(dim)
                ]
            )
        assert np.max(np.abs(out.rows[alignment.tgt_id[t]] - expect)) <= 1e-12


def test_continuation_prefixed_new_types_resolve_to_continuations(src_vocab, src_emb, alignment):
    result = tokenize_word("##abab", src_vocab)
    assert result.pieces == ["##ab", "##ab"]


# ---------------------------------------------------------------------------
# cross-strategy invariants
# ---------------------------------------------------------------------------


def test_all_strategies_shared_rows_and_finiteness(alignment, src_emb, ft_vectors):
    for strategy in STRATEGIES:
        emb, _ = initialize_embeddings(
            strategy, alignment, src_emb, seed=4, ft=ft_vectors
        )
        assert _shared_rows_bit_identical(emb, alignment, src_emb)
        assert np.all(np.isfinite(emb.rows))
        assert emb.rows.shape == (len(alignment.target_vocab), src_emb.dim)


def test_specials_always_copied(alignment, src_emb, ft_vectors):
    for strategy in STRATEGIES:
        emb, _ = initialize_embeddings(strategy, alignment, src_emb, seed=4, ft=ft_vectors)
        for s in DEFAULT_SPECIALS:
            assert np.array_equal(
                emb.rows[alignment.tgt_id[s]], src_emb.rows[alignment.src_id[s]]
            )


def test_projection_strategy_requires_vectors(alignment, src_emb):
    with pytest.raises(ValueError, match="requires"):
        initialize_embeddings("fasttext-projection", alignment, src_emb)


def test_unknown_strategy(alignment, src_emb):
    with pytest.raises(ValueError, match="unknown strategy"):
        initialize_embeddings("magic", alignment, src_emb)


def test_provenance_map(alignment, src_emb, ft_vectors):
    prov = provenance_map("fasttext-projection", alignment, src_emb, ft_vectors)
    assert all(prov[t] == "copied" for t in alignment.shared)
    assert prov["abab"] == "projected"
    assert prov["qqq"] == "unk-fallback"  # absent from ft and unsegmentable
    assert prov["xyz"] == "unk-fallback"
    prov_u = provenance_map("uniform", alignment, src_emb)
    assert all(prov_u[t] == "sampled" for t in alignment.new)
    prov_a = provenance_map("subword-average", alignment, src_emb)
    assert prov_a["abab"] == "averaged"
    assert prov_a["qq"] == "unk-fallback"


# ---------------------------------------------------------------------------
# matrix I/O
# ---------------------------------------------------------------------------


def test_embedding_text_round_trip(tmp_path, alignment, src_emb):
    emb = init_uniform(alignment, src_emb, seed=5)
    path = tmp_path / "emb.vec"
    save_embedding_text(emb, path)
    loaded = load_embedding_text(path, alignment.target_vocab)
    assert np.allclose(loaded.rows, emb.rows, rtol=1e-8, atol=1e-12)


def test_embedding_text_vocab_mismatch(tmp_path, alignment, src_emb, src_vocab):
    emb = init_uniform(alignment, src_emb, seed=5)
    path = tmp_path / "emb.vec"
    save_embedding_text(emb, path)
    with pytest.raises(FormatError):
        load_embedding_text(path, src_vocab)


def test_embedding_binary_round_trip(tmp_path, alignment, src_emb):
    emb = init_uniform(alignment, src_emb, seed=5)
    path = tmp_path / "emb.bin"
    save_embedding_binary(emb, path, vocab_file="target_vocab.txt")
    loaded = load_embedding_binary(path, alignment.target_vocab)
    assert np.array_equal(loaded.rows, emb.rows.astype("<f4").astype(np.float64))
    import json

    sidecar = json.loads((tmp_path / "emb.bin.json").read_text())
    assert sidecar == {
        "rows": len(emb),
        "dim": emb.dim,
        "vocab_file": "target_vocab.txt",
    }


def test_embedding_binary_size_mismatch(tmp_path, alignment, src_emb, src_vocab):
    emb = init_uniform(alignment, src_emb, seed=5)
    path = tmp_path / "emb.bin"
    save_embedding_binary(emb, path)
    with pytest.raises(FormatError, match="rows"):
        load_embedding_binary(path, src_vocab)


def test_embedding_binary_truncated_payload(tmp_path, alignment, src_emb):
    emb = init_uniform(alignment, src_emb, seed=5)
    path = tmp_path / "emb.bin"
    save_embedding_binary(emb, path)
    data = path.read_bytes()
    path.write_bytes(data[:-8])
    with pytest.raises(FormatError, match="float32"):
        load_embedding_binary(path, alignment.target_vocab)
