"""Config parsing, Adam, training-loop, and checkpoint round-trip tests."""

from collections import Counter

import numpy as np
import pytest

from revdict.corpus import DefinitionPair
from revdict.embeddings import PretrainedTable
from revdict.errors import ConfigError, DataError, NonFiniteLossError
from revdict.evaluator import evaluate
from revdict.tokenizer import build_word_vocab, learn_bpe
from revdict.trainer import (
    AdamState,
    TrainConfig,
    adam_update,
    encode_pairs,
    load_checkpoint,
    read_config,
    save_checkpoint,
    train,
)


def toy_world(seed=0, n_pairs=12, n_heads=10, out_dim=6, epochs=2, **config_kw):
    rng = np.random.default_rng(seed)
    heads = [f"w{i}" for i in range(n_heads)]
    table = PretrainedTable.from_arrays(heads, rng.normal(size=(n_heads, out_dim)))
    tokens = [f"tok{i}" for i in range(8)]
    pairs = []
    for i in range(n_pairs):
        size = int(rng.integers(2, 5))
        gloss = tuple(tokens[int(j)] for j in rng.integers(0, len(tokens), size=size))
        pairs.append(DefinitionPair(head=heads[i % n_heads], gloss=gloss))
    vocab = build_word_vocab(Counter(t for p in pairs for t in p.gloss), cap=100)
    defaults = dict(
        learning_rate=0.01,
        epochs=epochs,
        minibatch=4,
        bucket=8,
        seed=3,
        embed_dim=6,
        hidden_size=5,
        encoder_mode="average",
    )
    defaults.update(config_kw)
    return pairs, table, vocab, TrainConfig(**defaults)


class TestTrainConfig:
    def test_defaults_are_valid(self):
        cfg = TrainConfig()
        assert cfg.validate() is cfg
        assert cfg.learning_rate == 0.0001
        assert cfg.epochs == 10 and cfg.minibatch == 16 and cfg.bucket == 4096

    @pytest.mark.parametrize(
        "bad",
        [
            dict(learning_rate=0.0),
            dict(optimizer="sgd"),
            dict(epochs=-1),
            dict(minibatch=0),
            dict(minibatch=17),
            dict(bucket=10, minibatch=3),
            dict(loss_kind="l2"),
            dict(encoder_mode="attention"),
            dict(segmentation="chars"),
            dict(dataset="wiki"),
            dict(hidden_size=0),
        ],
    )
    def test_bad_values_rejected(self, bad):
        with pytest.raises(ConfigError):
            TrainConfig(**bad).validate()

    def test_override_skips_none(self):
        cfg = TrainConfig().override(epochs=3, seed=None, loss_kind="rank")
        assert cfg.epochs == 3 and cfg.seed == 42 and cfg.loss_kind == "rank"


class TestReadConfig:
    def test_parse_types_paths_and_comments(self, tmp_path):
        path = tmp_path / "train.cfg"
        path.write_text(
            "# toy run\n"
            "learning_rate = 0.001\n"
            "epochs = 4  # short\n"
            "loss_kind = rank\n"
            "train = data/train.tsv\n"
            "embeddings = data/vecs.txt\n"
            "\n"
        )
        cfg, paths = read_config(path)
        assert cfg.learning_rate == 0.001
        assert cfg.epochs == 4
        assert cfg.loss_kind == "rank"
        assert paths == {"train": "data/train.tsv", "embeddings": "data/vecs.txt"}

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("momentum = 0.9\n")
        with pytest.raises(ConfigError):
            read_config(path)

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("epochs\n")
        with pytest.raises(ConfigError):
            read_config(path)

    def test_bad_int_rejected(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("epochs = soon\n")
        with pytest.raises(ConfigError):
            read_config(path)


class TestAdam:
    def test_zero_gradient_leaves_params_unchanged(self):
        params = {"w": np.array([1.0, -2.0])}
        state = AdamState.for_params(params)
        adam_update(params, {"w": np.zeros(2)}, state, lr=0.1)
        np.testing.assert_array_equal(params["w"], [1.0, -2.0])
        assert state.t == 1

    def test_first_step_magnitude_is_learning_rate(self):
        # bias correction makes the first step almost exactly lr * sign(g)
        params = {"w": np.array([0.0])}
        state = AdamState.for_params(params)
        adam_update(params, {"w": np.array([1.0])}, state, lr=0.05)
        assert params["w"][0] == pytest.approx(-0.05, rel=1e-6)

    def test_step_size_bounded_by_lr(self):
        rng = np.random.default_rng(0)
        params = {"w": rng.normal(size=4)}
        state = AdamState.for_params(params)
        for _ in range(10):
            before = params["w"].copy()
            adam_update(params, {"w": rng.normal(size=4)}, state, lr=0.01)
            assert np.all(np.abs(params["w"] - before) <= 0.01 * (1 + 1e-6))


class TestTrainLoop:
    def test_deterministic_across_runs(self):
        pairs, table, vocab, cfg = toy_world()
        ckpt_a, curve_a = train(cfg, pairs, pairs[:6], table, vocab)
        ckpt_b, curve_b = train(cfg, pairs, pairs[:6], table, vocab)
        assert curve_a == curve_b
        for name, arr in ckpt_a.model.param_dict().items():
            np.testing.assert_array_equal(arr, ckpt_b.model.param_dict()[name])

    def test_zero_epochs_returns_initialization(self):
        pairs, table, vocab, cfg = toy_world(epochs=0)
        ckpt, curve = train(cfg, pairs, pairs[:4], table, vocab)
        assert curve == []
        assert ckpt.epoch == 0
        from revdict.encoder import DefinitionModel

        fresh = DefinitionModel.create(
            len(vocab), vocab.pad_id, cfg.encoder_mode, cfg.embed_dim, cfg.hidden_size,
            table.dimension, seed=cfg.seed,
        )
        for name, arr in ckpt.model.param_dict().items():
            np.testing.assert_array_equal(arr, fresh.param_dict()[name])

    def test_best_checkpoint_is_first_minimum(self):
        pairs, table, vocab, cfg = toy_world(epochs=4)
        ckpt, curve = train(cfg, pairs, pairs[:6], table, vocab)
        assert len(curve) == 4
        assert ckpt.dev_median_rank == min(curve)
        assert ckpt.epoch == curve.index(min(curve)) + 1

    def test_rank_loss_runs_and_is_deterministic(self):
        pairs, table, vocab, cfg = toy_world(loss_kind="rank", epochs=2)
        _, curve_a = train(cfg, pairs, pairs[:4], table, vocab)
        _, curve_b = train(cfg, pairs, pairs[:4], table, vocab)
        assert curve_a == curve_b

    def test_training_improves_dev_on_train(self):
        pairs, table, vocab, cfg = toy_world(epochs=25, n_pairs=8, seed=1)
        ckpt0, _ = train(cfg.override(epochs=0), pairs, pairs, table, vocab)
        ckpt, _ = train(cfg, pairs, pairs, table, vocab)
        assert ckpt.dev_median_rank <= ckpt0.dev_median_rank

    def test_non_finite_loss_names_the_batch(self):
        pairs, table, vocab, cfg = toy_world()
        table.matrix[:, :] = np.inf
        with pytest.raises(NonFiniteLossError, match=r"epoch 1 batch 0"):
            train(cfg, pairs, pairs[:4], table, vocab)

    def test_empty_sets_rejected(self):
        pairs, table, vocab, cfg = toy_world()
        with pytest.raises(DataError):
            train(cfg, [], pairs, table, vocab)
        with pytest.raises(DataError):
            train(cfg, pairs, [], table, vocab)

    def test_unknown_head_rejected(self):
        pairs, table, vocab, _ = toy_world()
        bad = [DefinitionPair(head="nosuch", gloss=("tok1",))]
        with pytest.raises(DataError):
            encode_pairs(bad, vocab, table)


class TestCheckpointIO:
    def make_checkpoint(self, segmentation="word"):
        merges = None
        if segmentation == "bpe":
            merges = learn_bpe({"tok1": 5, "tok2": 5}, num_merges=3)
        pairs, table, vocab, cfg = toy_world(epochs=1, segmentation=segmentation)
        ckpt, _ = train(cfg, pairs, pairs[:4], table, vocab, merges=merges)
        return ckpt, pairs

    def test_round_trip_identity(self, tmp_path):
        ckpt, _ = self.make_checkpoint()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, ckpt)
        loaded = load_checkpoint(path)
        for name, arr in ckpt.model.param_dict().items():
            np.testing.assert_array_equal(arr, loaded.model.param_dict()[name])
        assert loaded.config == ckpt.config
        assert loaded.vocab.token_to_id == ckpt.vocab.token_to_id
        assert loaded.vocab.pad_id == ckpt.vocab.pad_id
        assert loaded.merges is None
        assert loaded.pretrained.words == ckpt.pretrained.words
        np.testing.assert_array_equal(loaded.pretrained.matrix, ckpt.pretrained.matrix)
        assert loaded.epoch == ckpt.epoch
        assert loaded.dev_median_rank == ckpt.dev_median_rank

    def test_round_trip_keeps_merges(self, tmp_path):
        ckpt, _ = self.make_checkpoint(segmentation="bpe")
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, ckpt)
        loaded = load_checkpoint(path)
        assert loaded.merges.merges == ckpt.merges.merges
        assert loaded.config.segmentation == "bpe"

    def test_bytes_are_content_deterministic(self, tmp_path):
        ckpt, _ = self.make_checkpoint()
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, ckpt)
        save_checkpoint(b, ckpt)
        assert a.read_bytes() == b.read_bytes()
        loaded = load_checkpoint(a)
        c = tmp_path / "c.ckpt"
        save_checkpoint(c, loaded)
        assert c.read_bytes() == a.read_bytes()

    def test_reloaded_model_reproduces_dev_metric(self, tmp_path):
        ckpt, pairs = self.make_checkpoint()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, ckpt)
        loaded = load_checkpoint(path)
        report, _ = evaluate(loaded, pairs[:4], mode="definitions")
        assert report.median_rank == ckpt.dev_median_rank

    def test_truncated_file_rejected(self, tmp_path):
        ckpt, _ = self.make_checkpoint()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, ckpt)
        clipped = tmp_path / "clipped.ckpt"
        clipped.write_bytes(path.read_bytes()[: path.stat().st_size // 2])
        with pytest.raises(DataError):
            load_checkpoint(clipped)

    def test_non_checkpoint_zip_rejected(self, tmp_path):
        import zipfile

        path = tmp_path / "other.zip"
        with zipfile.ZipFile(path, "w") as zf:
            zf.writestr("meta.json", "{}")
        with pytest.raises(DataError):
            load_checkpoint(path)
