"""Training loop: Adam over bucketed minibatches, best-dev checkpointing.

Every epoch reshuffles the buckets with an epoch-varied seed, draws fresh
negatives for the rank loss, applies Adam updates batch by batch, then
measures median rank on the dev set.  The checkpoint kept is the earliest
epoch with the lowest dev median rank, which guards against overtraining.

Checkpoints are zip archives with zeroed timestamps so that identical runs
produce bitwise-identical files.
"""

from __future__ import annotations

import copy
import io
import json
import zipfile
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .corpus import DefinitionPair, EncodedPair, MINIBATCH_SIZE, bucket_and_batch
from .embeddings import LearnedTable, PretrainedTable
from .encoder import DefinitionModel, EncoderMode, LSTMParams, Projection
from .errors import ConfigError, DataError, NonFiniteLossError
from .evaluator import median_rank, rank_of_correct
from .objective import LossKind, backward, sample_negative
from .tokenizer import MergeTable, WordVocab, encode_gloss

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8

CHECKPOINT_FORMAT = "revdict-checkpoint"
CHECKPOINT_VERSION = 1

# config-file keys that name input files rather than hyperparameters
CONFIG_PATH_KEYS = ("train", "dev", "embeddings", "merges", "crosswords")


@dataclass
class TrainConfig:
    learning_rate: float = 0.0001
    optimizer: str = "adam"
    epochs: int = 10
    minibatch: int = 16
    bucket: int = 4096
    seed: int = 42
    loss_kind: str = "cosine"
    encoder_mode: str = "final"
    segmentation: str = "word"
    dataset: str = "definitions"
    embed_dim: int = 500
    hidden_size: int = 512

    def validate(self) -> "TrainConfig":
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.optimizer != "adam":
            raise ConfigError(f"unsupported optimizer {self.optimizer!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be nonnegative")
        if not 1 <= self.minibatch <= MINIBATCH_SIZE:
            raise ConfigError(f"minibatch must be in [1, {MINIBATCH_SIZE}]")
        if self.bucket < 1 or self.bucket % self.minibatch != 0:
            raise ConfigError("minibatch must divide bucket")
        if self.embed_dim < 1 or self.hidden_size < 1:
            raise ConfigError("embed_dim and hidden_size must be positive")
        try:
            LossKind(self.loss_kind)
            EncoderMode(self.encoder_mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.segmentation not in ("word", "bpe"):
            raise ConfigError(f"segmentation must be word or bpe, got {self.segmentation!r}")
        if self.dataset not in ("definitions", "full"):
            raise ConfigError(f"dataset must be definitions or full, got {self.dataset!r}")
        return self

    def override(self, **updates) -> "TrainConfig":
        """Copy with non-None updates applied (CLI flags beat config file)."""
        live = {k: v for k, v in updates.items() if v is not None}
        return replace(self, **live)


def read_config(path: str | Path) -> tuple[TrainConfig, dict[str, str]]:
    """Parse a ``key = value`` config file.

    Returns the validated TrainConfig plus any input-file paths (keys in
    CONFIG_PATH_KEYS).  Unknown keys are an error.
    """
    field_types = {f.name: f.type for f in fields(TrainConfig)}
    values: dict = {}
    paths: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key or not value:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            if key in CONFIG_PATH_KEYS:
                paths[key] = value
            elif key in field_types:
                kind = field_types[key]
                try:
                    if kind == "int" or kind is int:
                        values[key] = int(value)
                    elif kind == "float" or kind is float:
                        values[key] = float(value)
                    else:
                        values[key] = value
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
            else:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
    return TrainConfig(**values).validate(), paths


@dataclass
class AdamState:
    """Per-parameter moment accumulators and the shared timestep."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One bias-corrected Adam step, updating ``params`` in place."""
    state.t += 1
    bias1 = 1.0 - BETA1**state.t
    bias2 = 1.0 - BETA2**state.t
    for name, param in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * g * g
        param -= lr * (m / bias1) / (np.sqrt(v / bias2) + EPSILON)


@dataclass
class Checkpoint:
    """Everything needed to evaluate or resume: parameters plus data tables."""

    model: DefinitionModel
    config: TrainConfig
    vocab: WordVocab
    merges: MergeTable | None
    pretrained: PretrainedTable
    epoch: int
    dev_median_rank: float


def encode_pairs(
    pairs: list[DefinitionPair],
    vocab: WordVocab,
    pretrained: PretrainedTable,
    merges: MergeTable | None = None,
    segmentation: str = "word",
) -> list[EncodedPair]:
    """Vocabulary-encode glosses and map heads to pretrained rows."""
    encoded = []
    for pair in pairs:
        row = pretrained.word_to_row.get(pair.head)
        if row is None:
            raise DataError(f"head {pair.head!r} has no pretrained vector")
        ids = encode_gloss(pair.gloss, vocab, merges, segmentation)
        encoded.append(EncodedPair(head_id=row, gloss_ids=tuple(ids)))
    return encoded


def _dev_median(model: DefinitionModel, dev: list[EncodedPair], pretrained: PretrainedTable) -> float:
    ranks = []
    for pair in dev:
        y = model.encode_ids(
            np.asarray(pair.gloss_ids, dtype=np.int64), np.array([len(pair.gloss_ids)])
        )
        rec = rank_of_correct(y, pretrained, pretrained.words[pair.head_id])
        ranks.append(rec.rank)
    return median_rank(ranks)


def train(
    config: TrainConfig,
    train_pairs: list[DefinitionPair],
    dev_pairs: list[DefinitionPair],
    pretrained: PretrainedTable,
    vocab: WordVocab,
    merges: MergeTable | None = None,
) -> tuple[Checkpoint, list[float]]:
    """Optimize a fresh model; returns the best-dev checkpoint and the curve.

    The curve holds one dev median rank per completed epoch.  Ties in dev
    median keep the earlier epoch.  With epochs=0 the initialized model is
    returned, its dev median measured once, and the curve is empty.
    """
    config.validate()
    if not train_pairs:
        raise DataError("training set is empty")
    if not dev_pairs:
        raise DataError("dev set is empty")
    if config.segmentation == "bpe" and merges is None:
        raise ConfigError("segmentation=bpe needs a merge table")

    encoded_train = encode_pairs(train_pairs, vocab, pretrained, merges, config.segmentation)
    encoded_dev = encode_pairs(dev_pairs, vocab, pretrained, merges, config.segmentation)

    model = DefinitionModel.create(
        vocab_size=len(vocab),
        pad_id=vocab.pad_id,
        mode=config.encoder_mode,
        embed_dim=config.embed_dim,
        hidden=config.hidden_size,
        output_dim=pretrained.dimension,
        seed=config.seed,
    )
    params = model.param_dict()
    adam = AdamState.for_params(params)
    loss_kind = LossKind(config.loss_kind)

    def snapshot(epoch: int, dev_median: float) -> Checkpoint:
        return Checkpoint(
            model=copy.deepcopy(model),
            config=config,
            vocab=vocab,
            merges=merges,
            pretrained=pretrained,
            epoch=epoch,
            dev_median_rank=dev_median,
        )

    if config.epochs == 0:
        return snapshot(0, _dev_median(model, encoded_dev, pretrained)), []

    best: Checkpoint | None = None
    curve: list[float] = []
    for epoch in range(1, config.epochs + 1):
        batches = bucket_and_batch(
            encoded_train,
            pad_id=vocab.pad_id,
            bucket_size=config.bucket,
            minibatch=config.minibatch,
            shuffle_seed=config.seed + epoch,
        )
        neg_rng = np.random.default_rng([config.seed, epoch, 1])
        for index, batch in enumerate(batches):
            targets = pretrained.matrix[batch.head_ids]
            negatives = None
            if loss_kind is LossKind.RANK:
                neg_rows = [
                    sample_negative(len(pretrained), int(h), neg_rng) for h in batch.head_ids
                ]
                negatives = pretrained.matrix[neg_rows]
            try:
                _, grads = backward(
                    model, batch.token_ids, batch.lengths, targets, loss_kind, negatives
                )
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(f"epoch {epoch} batch {index}: {exc}") from exc
            adam_update(params, grads.as_dict(), adam, config.learning_rate)
        dev_median = _dev_median(model, encoded_dev, pretrained)
        curve.append(dev_median)
        if best is None or dev_median < best.dev_median_rank:
            best = snapshot(epoch, dev_median)
    return best, curve


def _npy_bytes(array: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    np.save(buffer, array, allow_pickle=False)
    return buffer.getvalue()


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    """Write a checkpoint archive whose bytes depend only on its contents."""
    meta = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": asdict(ckpt.config),
        "epoch": ckpt.epoch,
        "dev_median_rank": ckpt.dev_median_rank,
        "mode": ckpt.model.mode.value,
        "pad_id": ckpt.model.embeddings.pad_id,
        "vocab": ckpt.vocab.id_to_token,
        "vocab_cap": ckpt.vocab.cap,
        "unk_id": ckpt.vocab.unk_id,
        "merges": [list(m) for m in ckpt.merges.merges] if ckpt.merges else None,
        "pretrained_words": ckpt.pretrained.words,
    }
    arrays = {f"param/{k}": v for k, v in ckpt.model.param_dict().items()}
    arrays["pretrained"] = ckpt.pretrained.matrix
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        members = [("meta.json", json.dumps(meta, sort_keys=True).encode("utf-8"))]
        members += [(f"{name}.npy", _npy_bytes(arr)) for name, arr in sorted(arrays.items())]
        for name, data in members:
            # fixed timestamp: identical runs must yield identical bytes
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = zipfile.ZIP_STORED
            info.external_attr = 0o644 << 16
            zf.writestr(info, data)


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        with zipfile.ZipFile(path) as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise DataError(f"{path}: not a checkpoint archive")
            arrays = {}
            for name in zf.namelist():
                if name.endswith(".npy"):
                    arrays[name[: -len(".npy")]] = np.load(
                        io.BytesIO(zf.read(name)), allow_pickle=False
                    )
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, OSError) as exc:
        raise DataError(f"{path}: unreadable checkpoint ({exc})") from exc

    config = TrainConfig(**meta["config"])
    mode = EncoderMode(meta["mode"])
    params = {k[len("param/") :]: v for k, v in arrays.items() if k.startswith("param/")}
    lstm = LSTMParams(**{n: params[f"fwd.{n}"] for n in LSTMParams.FIELDS})
    lstm_back = None
    if mode is EncoderMode.BIDIRECTIONAL:
        lstm_back = LSTMParams(**{n: params[f"bwd.{n}"] for n in LSTMParams.FIELDS})
    model = DefinitionModel(
        embeddings=LearnedTable(matrix=params["emb"], pad_id=int(meta["pad_id"])),
        lstm=lstm,
        lstm_back=lstm_back,
        projection=Projection(weight=params["proj.w"], bias=params["proj.b"]),
        mode=mode,
    )
    id_to_token = list(meta["vocab"])
    vocab = WordVocab(
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        id_to_token=id_to_token,
        unk_id=int(meta["unk_id"]),
        pad_id=int(meta["pad_id"]),
        cap=int(meta["vocab_cap"]),
    )
    merges = None
    if meta["merges"] is not None:
        merges = MergeTable(merges=[tuple(m) for m in meta["merges"]])
    pretrained = PretrainedTable.from_arrays(meta["pretrained_words"], arrays["pretrained"])
    return Checkpoint(
        model=model,
        config=config,
        vocab=vocab,
        merges=merges,
        pretrained=pretrained,
        epoch=int(meta["epoch"]),
        dev_median_rank=float(meta["dev_median_rank"]),
    )
