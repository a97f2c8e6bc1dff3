# SPDX-License-Identifier: LGPL-3.0-only

import numpy as np
import pytest

from metaemb import (
    METHODS,
    AlignedEmbeddingSet,
    ContractError,
    EmbeddingTable,
    LossKind,
    MetaMethod,
    MetaModel,
    MethodRegistry,
    TrainConfig,
    UnknownWordError,
    align,
    avg,
    conc,
    embed,
    get_parent_registry,
    load_model,
    one_ton,
    one_ton_reconstruction,
    reconstruction_error,
    save_model,
    split_hidden,
    svd_factors,
    svd_meta,
    train_ae,
    train_mte,
    train_tae,
)

SMALL = TrainConfig(hidden_dim = 12, epochs = 2, dropout_rate = 0.0)
LEARNABLE = [
    MetaMethod.CAEME,
    MetaMethod.DAEME,
    MetaMethod.AAEME,
    MetaMethod.TAE,
    MetaMethod.MTE,
]


def identity_set(*names):
    words = [f"w{i}" for i in range(8)]
    sources = tuple(EmbeddingTable(name, words, np.eye(8)) for name in names)
    return AlignedEmbeddingSet(sources, tuple(words), normalized = True)


class TestBaselines:
    def test_conc_dot_is_sum_of_source_dots(self, make_aligned):
        aligned = make_aligned(words = 15, dims = (4, 6, 5))
        meta = conc(aligned).matrix
        expected = sum(matrix @ matrix.T for matrix in aligned.matrices)
        np.testing.assert_allclose(meta @ meta.T, expected, rtol = 1e-12, atol = 1e-12)

    def test_conc(self, make_aligned):
        aligned = make_aligned(words = 10, dims = (2, 3))
        table = conc(aligned)
        assert table.dim == 5
        assert table.vocab == aligned.shared_vocab
        np.testing.assert_array_equal(table.matrix, np.hstack(aligned.matrices))

    def test_avg_pads_shorter_sources(self, make_aligned):
        aligned = make_aligned(words = 10, dims = (2, 3))
        first, second = aligned.matrices
        table = avg(aligned)
        assert table.dim == 3
        np.testing.assert_allclose(table.matrix[:, :2], (first + second[:, :2]) / 2)
        np.testing.assert_allclose(table.matrix[:, 2], second[:, 2] / 2)

    def test_avg_of_single_source_is_identity(self):
        aligned = identity_set("only")
        np.testing.assert_array_equal(avg(aligned).matrix, np.eye(8))

    def test_unnormalized_rejected(self):
        tables = [EmbeddingTable(name, ["a", "b"], np.ones((2, 2))) for name in "xy"]
        with pytest.raises(ContractError):
            conc(align(tables))


class TestSVD:
    @staticmethod
    def gram_oracle(matrix, k):
        eigenvalues = np.sort(np.linalg.eigvalsh(matrix.T @ matrix))[::-1]
        return float(np.sqrt(max(eigenvalues[k:].sum(), 0.0)))

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_gram_oracle(self, seed):
        matrix = np.random.default_rng(seed).normal(size = (50, 20))
        errors = []
        for k in (1, 5, 20):
            error = reconstruction_error(matrix, k)
            assert abs(error - self.gram_oracle(matrix, k)) < 1e-6
            errors.append(error)
        assert errors[0] >= errors[1] >= errors[2]
        assert errors[2] < 1e-6

    def test_sign_convention(self):
        matrix = np.random.default_rng(0).normal(size = (30, 10))
        _, _, vt = svd_factors(matrix, 4)
        pivots = np.argmax(np.abs(vt), axis = 1)
        assert np.all(vt[np.arange(4), pivots] > 0)

        _, _, flipped = svd_factors(-matrix, 4)
        np.testing.assert_allclose(flipped, vt, atol = 1e-10)

    def test_meta_rows_are_scaled_left_vectors(self, aligned):
        table = svd_meta(aligned, 5)
        assert table.dim == 5
        u, s, _ = np.linalg.svd(aligned.concatenated(), full_matrices = False)
        np.testing.assert_allclose(np.abs(table.matrix), np.abs(u[:, :5] * s[:5]), atol = 1e-10)

    def test_model_embeds_like_table(self, aligned):
        model = METHODS.build(MetaMethod.SVD, aligned, rank = 7)
        expected = svd_meta(aligned, 7).matrix
        np.testing.assert_allclose(model.embed_all(aligned), expected, atol = 1e-10)

    @pytest.mark.parametrize("k", [0, 51])
    def test_rank_out_of_range(self, aligned, k):
        with pytest.raises(ContractError):
            svd_meta(aligned, k)


class TestOneTon:
    def test_fits_identity(self):
        config = TrainConfig(batch_size = 8, epochs = 5000, learning_rate = 0.5)
        model = one_ton(identity_set("only"), config, dim = 8)
        assert model.meta_dim == 8
        assert len(model.trace) == 5000
        assert model.trace[-1] < 1e-3
        assert model.trace[-1] < model.trace[0]

    def test_identical_sources_agree(self):
        config = TrainConfig(batch_size = 8, epochs = 5000, learning_rate = 0.5)
        model = one_ton(identity_set("x", "y"), config, dim = 8)
        first, second = one_ton_reconstruction(model, [8, 8])
        assert np.sqrt(np.mean((first - second) ** 2)) < 1e-2

    def test_zero_learning_rate_keeps_init(self):
        aligned = identity_set("x", "y")
        config = TrainConfig(batch_size = 3, epochs = 3, learning_rate = 0.0)
        untrained = one_ton(aligned, TrainConfig(epochs = 1, learning_rate = 0.0), dim = 4)
        model = one_ton(aligned, config, dim = 4)
        np.testing.assert_array_equal(model.arrays["meta"], untrained.arrays["meta"])

    def test_unknown_word(self):
        aligned = identity_set("x", "y")
        model = one_ton(aligned, TrainConfig(epochs = 1), dim = 4)
        with pytest.raises(UnknownWordError):
            model.embed_rows(["nope"], [np.ones((1, 8)), np.ones((1, 8))])


class TestAutoencoders:
    @pytest.mark.parametrize("kind", list(LossKind))
    @pytest.mark.parametrize("method", LEARNABLE)
    def test_learnable(self, aligned, method, kind):
        config = TrainConfig()
        model = METHODS.build(method, aligned, loss = kind, config = config, target_index = 0)
        assert len(model.trace) == config.epochs
        assert all(np.isfinite(model.trace))
        assert model.trace[-1] <= 0.5 * model.trace[0]

    def test_caeme_overfits_tiny_set(self, make_aligned):
        aligned = make_aligned(words = 10, dims = (5, 5))
        model = train_ae(MetaMethod.CAEME, aligned, LossKind.MSE, TrainConfig(epochs = 500))
        data = aligned.concatenated()
        reconstruction = LossKind.MSE.forward(model.nets[0](data), data)
        assert reconstruction < 0.05 * model.trace[0]

    def test_deterministic(self, aligned):
        config = TrainConfig(hidden_dim = 16, epochs = 5, seed = 3, shuffle_seed = 4)
        first = train_ae(MetaMethod.DAEME, aligned, LossKind.SCP, config).table(aligned)
        second = train_ae(MetaMethod.DAEME, aligned, LossKind.SCP, config).table(aligned)
        np.testing.assert_array_equal(first.matrix, second.matrix)

    def test_seed_matters(self, aligned):
        first = train_ae(MetaMethod.CAEME, aligned, "mse", SMALL).table(aligned)
        other = TrainConfig(hidden_dim = 12, epochs = 2, dropout_rate = 0.0, seed = 1)
        second = train_ae(MetaMethod.CAEME, aligned, "mse", other).table(aligned)
        assert not np.array_equal(first.matrix, second.matrix)

    def test_not_an_autoencoder(self, aligned):
        with pytest.raises(ContractError):
            train_ae(MetaMethod.SVD, aligned)

    def test_split_hidden(self):
        assert split_hidden(200, 3) == [67, 67, 66]
        assert split_hidden(12, 4) == [3, 3, 3, 3]
        assert split_hidden(200, 2) == [100, 100]

    def test_daeme_splits_default_hidden_evenly(self, make_aligned):
        aligned = make_aligned(words = 10, dims = (5, 6))
        model = train_ae(MetaMethod.DAEME, aligned, LossKind.MSE, TrainConfig(epochs = 1))
        assert [net.dims[1] for net in model.nets] == [100, 100]
        assert model.meta_dim == 200
        assert model.embed_all(aligned).shape == (10, 200)

    def test_daeme_needs_enough_units(self, aligned):
        with pytest.raises(ContractError):
            train_ae(MetaMethod.DAEME, aligned, config = TrainConfig(hidden_dim = 2, epochs = 1))

    def test_kl_decoder_is_log_softmax(self, aligned):
        model = train_ae(MetaMethod.AAEME, aligned, LossKind.KL, SMALL)
        out = model.nets[0](np.hstack(aligned.matrices)[:, :20])
        np.testing.assert_allclose(np.exp(out).sum(axis = 1), 1.0, atol = 1e-10)


class TestTargets:
    def test_tae_plus_y_appends_target(self, aligned):
        tae = train_tae(aligned, 1, "mse", SMALL)
        plus = train_tae(aligned, 1, "mse", SMALL, concat_y = True)
        meta = plus.embed_all(aligned)
        np.testing.assert_array_equal(meta[:, :12], tae.embed_all(aligned))
        np.testing.assert_array_equal(meta[:, 12:], aligned.matrices[1])
        assert plus.label == "tae+y-mse@1"

    def test_with_target_appended_only_for_tae(self, aligned):
        model = train_ae(MetaMethod.CAEME, aligned, "mse", SMALL)
        with pytest.raises(ContractError):
            model.with_target_appended()

    @pytest.mark.parametrize("target", [-1, 3])
    def test_target_out_of_range(self, aligned, target):
        with pytest.raises(ContractError):
            train_tae(aligned, target, "mse", SMALL)

    def test_tae_learns_copy_of_target(self, make_aligned):
        source = make_aligned(words = 60, dims = (5,)).sources[0]
        duplicate = EmbeddingTable("copy", source.vocab, source.matrix.copy())
        aligned = AlignedEmbeddingSet((source, duplicate), source.vocab, normalized = True)
        config = TrainConfig(
            hidden_dim = 100, dropout_rate = 0.0, init_std = 0.2, batch_size = 10, epochs = 600,
        )
        model = train_tae(aligned, 0, LossKind.MSE, config)
        assert model.trace[-1] < 1e-3

    def test_mte_identical_inputs_give_identical_hiddens(self, make_aligned):
        base = make_aligned(words = 20, dims = (6, 8))
        target, other = base.sources
        twin = EmbeddingTable("twin", other.vocab, other.matrix.copy())
        aligned = AlignedEmbeddingSet((target, other, twin), base.shared_vocab, normalized = True)
        model = train_mte(aligned, 0, "mse", TrainConfig(hidden_dim = 12, epochs = 3))
        meta = model.embed_all(aligned)
        np.testing.assert_array_equal(meta, model.nets[0].hidden(other.matrix))
        np.testing.assert_array_equal(meta, model.nets[1].hidden(twin.matrix))

    def test_mte_with_one_input_is_that_hidden(self, make_aligned):
        aligned = make_aligned(words = 20, dims = (6, 8))
        model = train_mte(aligned, 0, "kl", SMALL)
        assert len(model.nets) == 1
        np.testing.assert_array_equal(
            model.embed_all(aligned),
            model.nets[0].hidden(aligned.matrices[1]),
        )

    def test_needs_two_sources(self):
        with pytest.raises(ContractError):
            train_mte(identity_set("only"), 0, "mse", SMALL)

    def test_mte_averages_hiddens(self, aligned):
        model = train_mte(aligned, 0, "mse", SMALL)
        assert len(model.nets) == 2
        expected = (
            model.nets[0].hidden(aligned.matrices[1]) + model.nets[1].hidden(aligned.matrices[2])
        ) / 2
        np.testing.assert_allclose(model.embed_all(aligned), expected)


class TestDimensions:
    @pytest.mark.parametrize(
        ("method", "options", "expected"),
        [
            (MetaMethod.CONC, {}, 21),
            (MetaMethod.AV, {}, 9),
            (MetaMethod.SVD, { "rank": 6 }, 6),
            (MetaMethod.ONE_TON, { "dim": 10 }, 10),
            (MetaMethod.CAEME, {}, 12),
            (MetaMethod.DAEME, {}, 12),
            (MetaMethod.AAEME, {}, 12),
            (MetaMethod.TAE, { "target_index": 2 }, 12),
            (MetaMethod.TAE_PLUS_Y, { "target_index": 2 }, 21),
            (MetaMethod.MTE, { "target_index": 2 }, 12),
        ],
    )
    def test_meta_dim(self, make_aligned, method, options, expected):
        aligned = make_aligned(words = 30, dims = (5, 7, 9))
        model = METHODS.build(method, aligned, config = SMALL, **options)
        assert model.meta_dim == expected
        assert model.table(aligned).matrix.shape == (30, expected)

    def test_embed_single_word(self, aligned):
        model = train_ae(MetaMethod.CAEME, aligned, "scp", SMALL)
        word = aligned.shared_vocab[7]
        np.testing.assert_allclose(embed(model, aligned, word), model.embed_all(aligned)[7])
        with pytest.raises(UnknownWordError):
            embed(model, aligned, "missing")


class TestCheckpoints:
    @pytest.mark.parametrize(
        ("method", "options"),
        [
            (MetaMethod.SVD, { "rank": 4 }),
            (MetaMethod.ONE_TON, { "dim": 4 }),
            (MetaMethod.DAEME, { "loss": LossKind.KL }),
            (MetaMethod.TAE_PLUS_Y, { "target_index": 1 }),
        ],
    )
    def test_round_trip(self, aligned, tmp_path, method, options):
        model = METHODS.build(method, aligned, config = SMALL, **options)
        save_model(model, tmp_path / "model.npz")
        loaded = load_model(tmp_path / "model.npz")

        assert loaded.label == model.label
        assert loaded.meta_dim == model.meta_dim
        assert loaded.trace == model.trace
        np.testing.assert_array_equal(loaded.embed_all(aligned), model.embed_all(aligned))


class TestRegistry:
    def test_every_method_registered(self):
        assert set(METHODS.methods) == set(MetaMethod)
        assert METHODS.get(MetaMethod.TAE).needs_target
        assert METHODS.get(MetaMethod.CAEME).family == "autoencoder"
        assert not METHODS.get(MetaMethod.CONC).trainable
        assert get_parent_registry(METHODS.get(MetaMethod.SVD)) is METHODS

    def test_duplicate_builder(self):
        registry = MethodRegistry(name = "test")
        registry.builder(MetaMethod.CONC)(lambda aligned, **_: MetaModel(MetaMethod.CONC, 1))
        with pytest.raises(TypeError):
            registry.builder(MetaMethod.CONC)(lambda aligned, **_: MetaModel(MetaMethod.CONC, 1))

    def test_unknown_method(self, aligned):
        registry = MethodRegistry(name = "empty")
        with pytest.raises(LookupError):
            registry.build(MetaMethod.AV, aligned)

    def test_missing_encoder(self, aligned):
        registry = MethodRegistry(name = "test")
        registry.builder(MetaMethod.AV)(lambda aligned, **_: MetaModel(MetaMethod.AV, 1))
        model = registry.build(MetaMethod.AV, aligned)
        with pytest.raises(LookupError):
            registry.encode(model, [], [])

    def test_hooks(self, aligned):
        seen = []

        @METHODS.build_hook()
        def before(spec, options):
            seen.append(("pre", spec.method, options.get("rank")))

        @METHODS.build_hook(post = True)
        def after(spec, model):
            seen.append(("post", spec.method, model.meta_dim))

        try:
            METHODS.build(MetaMethod.SVD, aligned, rank = 3)
        finally:
            METHODS.remove_hook(before)
            METHODS.remove_hook(after)

        METHODS.build(MetaMethod.CONC, aligned)
        assert seen == [("pre", MetaMethod.SVD, 3), ("post", MetaMethod.SVD, 3)]

    def test_custom_logger(self, caplog, aligned):
        registry = MethodRegistry(name = "test", logger = "metaemb.tests")
        registry.builder(MetaMethod.AV)(lambda aligned, **_: MetaModel(MetaMethod.AV, 1))
        with caplog.at_level("INFO", logger = "metaemb.tests"):
            registry.build(MetaMethod.AV, aligned)
        assert "Built av" in caplog.text
