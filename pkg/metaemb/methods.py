# SPDX-License-Identifier: LGPL-3.0-only

"""Meta-embedding methods: baselines and autoencoder variants.

Every method is registered on :data:`METHODS` with a builder (training or fitting a
:class:`MetaModel` over an :class:`~metaemb.embeddings.AlignedEmbeddingSet`) and an
encoder (turning aligned source rows into meta vectors with that model).
"""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import os
import pathlib
import typing as t

import numpy as np
from scipy import linalg

from .embeddings import AlignedEmbeddingSet, EmbeddingTable
from .errors import ArtifactError, ContractError, DivergenceError, UnknownWordError
from .losses import LossKind
from .nn import (
    Activation,
    DenseNet,
    TrainConfig,
    check_divergence,
    init_net,
    minibatches,
    net_from_arrays,
    net_to_arrays,
    train,
)
from .registry import MethodRegistry

__all__ = (
    "METHODS",
    "MetaMethod",
    "MetaModel",
    "conc",
    "avg",
    "svd_meta",
    "svd_factors",
    "reconstruction_error",
    "one_ton",
    "one_ton_reconstruction",
    "train_ae",
    "train_tae",
    "train_mte",
    "embed",
    "split_hidden",
    "save_model",
    "load_model",
)

LOGGER = logging.getLogger(__name__)

Words = t.Sequence[str]
Rows = t.Sequence[np.ndarray]

DEFAULT_META_DIM: t.Final[int] = 200
MODEL_FORMAT_VERSION: t.Final[int] = 1


class MetaMethod(str, enum.Enum):
    CONC = "conc"
    AV = "av"
    SVD = "svd"
    ONE_TON = "1ton"
    CAEME = "caeme"
    DAEME = "daeme"
    AAEME = "aaeme"
    TAE = "tae"
    TAE_PLUS_Y = "tae+y"
    MTE = "mte"


AE_VARIANTS: t.Final[t.FrozenSet[MetaMethod]] = frozenset(
    { MetaMethod.CAEME, MetaMethod.DAEME, MetaMethod.AAEME },
)

METHODS = MethodRegistry(name = "meta-methods")
"""The registry every built-in method is registered on."""


@dataclasses.dataclass(frozen = True, eq = False)
class MetaModel:
    """A fitted meta-embedding producer.

    Parameters
    ----------
    method: :class:`MetaMethod`
        The method that produced the model.
    meta_dim: :class:`int`
        Length of every meta vector.
    loss: Optional[:class:`~metaemb.losses.LossKind`]
        Training objective; ``None`` for the closed-form baselines.
    target_index: Optional[:class:`int`]
        Index of the target source for the target-autoencoder family.
    nets: Tuple[:class:`~metaemb.nn.DenseNet`, ...]
        Trained networks, frozen.
    arrays: Mapping[:class:`str`, :class:`numpy.ndarray`]
        Other learned state (SVD components, 1TON vectors and projections).
    vocab: Tuple[:class:`str`, ...]
        Row order of vocabulary-indexed arrays (1TON only).
    trace: Tuple[:class:`float`, ...]
        Mean loss of every training epoch.
    """

    method: MetaMethod
    meta_dim: int
    loss: t.Optional[LossKind] = None
    target_index: t.Optional[int] = None
    nets: t.Tuple[DenseNet, ...] = ()
    arrays: t.Mapping[str, np.ndarray] = dataclasses.field(default_factory = dict)
    vocab: t.Tuple[str, ...] = ()
    trace: t.Tuple[float, ...] = ()

    @property
    def label(self) -> str:
        """Method and loss, e.g. ``caeme-scp`` or ``tae-mse@2``."""
        label = self.method.value
        if self.loss is not None:
            label += f"-{self.loss.value}"
        if self.target_index is not None:
            label += f"@{self.target_index}"
        return label

    def embed_rows(self, words: Words, rows: Rows) -> np.ndarray:
        meta = METHODS.encode(self, words, rows)
        if meta.shape != (len(words), self.meta_dim):
            raise ContractError(
                f"{self.label} produced shape {meta.shape}, "
                f"expected ({len(words)}, {self.meta_dim})",
            )
        return meta

    def embed_all(self, aligned: AlignedEmbeddingSet) -> np.ndarray:
        return self.embed_rows(aligned.shared_vocab, aligned.matrices)

    def table(self, aligned: AlignedEmbeddingSet, name: t.Optional[str] = None) -> EmbeddingTable:
        """Materialise the meta-embedding of every shared word."""
        return EmbeddingTable(name or self.label, aligned.shared_vocab, self.embed_all(aligned))

    def with_target_appended(self) -> MetaModel:
        """Turn a trained :attr:`MetaMethod.TAE` model into its TAE+Y counterpart."""
        if self.method is not MetaMethod.TAE:
            raise ContractError(f"only a TAE model can have its target appended, not {self.label}")
        target_dim = int(self.nets[0].output_dim)
        return dataclasses.replace(
            self,
            method = MetaMethod.TAE_PLUS_Y,
            meta_dim = self.meta_dim + target_dim,
        )


def embed(model: MetaModel, aligned: AlignedEmbeddingSet, word: str) -> np.ndarray:
    """Return the meta vector of ``word``.

    Raises
    ------
    UnknownWordError
        ``word`` is not in the shared vocabulary.
    """
    i = aligned.index(word)
    return model.embed_rows([word], [matrix[i:i + 1] for matrix in aligned.matrices])[0]


# Helpers


def _require_normalized(aligned: AlignedEmbeddingSet) -> None:
    if not aligned.normalized:
        raise ContractError("meta-embedding methods expect an l2-normalized aligned set")


def _pad(matrix: np.ndarray, width: int) -> np.ndarray:
    return np.pad(matrix, ((0, 0), (0, width - matrix.shape[1])))


def _average(rows: t.Sequence[np.ndarray]) -> np.ndarray:
    width = max(matrix.shape[1] for matrix in rows)
    return np.mean([_pad(matrix, width) for matrix in rows], axis = 0)


def _check_target(aligned: AlignedEmbeddingSet, target_index: int) -> None:
    if len(aligned.sources) < 2:
        raise ContractError("target methods need at least 2 sources")
    if not 0 <= target_index < len(aligned.sources):
        raise ContractError(
            f"target index {target_index} out of range for {len(aligned.sources)} sources",
        )


def _others(count: int, target_index: int) -> t.List[int]:
    return [i for i in range(count) if i != target_index]


def split_hidden(total: int, parts: int) -> t.List[int]:
    """Divide ``total`` units over ``parts`` as evenly as possible, remainder first."""
    base, remainder = divmod(total, parts)
    return [base + (1 if i < remainder else 0) for i in range(parts)]


def _autoencoder(
    in_dim: int,
    out_dim: int,
    loss: LossKind,
    config: TrainConfig,
    *,
    hidden: t.Optional[int] = None,
    seed: t.Optional[int] = None,
) -> DenseNet:
    return init_net(
        [in_dim, config.hidden_dim if hidden is None else hidden, out_dim],
        [Activation.TANH, loss.output_activation],
        dropout_rate = config.dropout_rate,
        seed = config.seed if seed is None else seed,
        init_std = config.init_std,
        init_scaled = config.init_scaled,
    )


# Baselines


@METHODS.builder(MetaMethod.CONC)
def _build_conc(aligned: AlignedEmbeddingSet, **_: t.Any) -> MetaModel:
    _require_normalized(aligned)
    return MetaModel(MetaMethod.CONC, sum(aligned.dims))


@METHODS.builder(MetaMethod.AV)
def _build_av(aligned: AlignedEmbeddingSet, **_: t.Any) -> MetaModel:
    _require_normalized(aligned)
    return MetaModel(MetaMethod.AV, max(aligned.dims))


@METHODS.encoder(MetaMethod.CONC)
def _encode_conc(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    return np.hstack(rows)


@METHODS.encoder(MetaMethod.AV)
def _encode_av(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    return _average(rows)


def conc(aligned: AlignedEmbeddingSet) -> EmbeddingTable:
    """Concatenate every word's source vectors, in source order."""
    return METHODS.build(MetaMethod.CONC, aligned).table(aligned)


def avg(aligned: AlignedEmbeddingSet) -> EmbeddingTable:
    """Average every word's source vectors, right-padding shorter ones with zeros."""
    return METHODS.build(MetaMethod.AV, aligned).table(aligned)


def svd_factors(
    matrix: np.ndarray,
    k: int,
) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rank-``k`` truncated SVD of ``matrix`` with a deterministic sign convention.

    The largest-magnitude entry of every right singular vector is made positive.

    Returns
    -------
    Tuple[:class:`numpy.ndarray`, :class:`numpy.ndarray`, :class:`numpy.ndarray`]
        ``U_k`` (``m x k``), singular values (``k``), ``V_k^T`` (``k x n``).

    Raises
    ------
    ContractError
        ``k`` is not in ``[1, min(matrix.shape)]``.
    """
    if not 1 <= k <= min(matrix.shape):
        raise ContractError(
            f"rank {k} must be in [1, {min(matrix.shape)}] for shape {matrix.shape}",
        )

    u, s, vt = linalg.svd(matrix, full_matrices = False)
    u, s, vt = u[:, :k], s[:k], vt[:k]

    pivots = np.argmax(np.abs(vt), axis = 1)
    signs = np.sign(vt[np.arange(k), pivots])
    signs[signs == 0.0] = 1.0
    return u * signs, s, vt * signs[:, None]


def reconstruction_error(matrix: np.ndarray, k: int) -> float:
    """Frobenius norm of ``matrix - U_k S_k V_k^T``."""
    u, s, vt = svd_factors(matrix, k)
    return float(np.linalg.norm(matrix - (u * s) @ vt))


@METHODS.builder(MetaMethod.SVD)
def _build_svd(
    aligned: AlignedEmbeddingSet,
    *,
    rank: int = DEFAULT_META_DIM,
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    _, s, vt = svd_factors(aligned.concatenated(), rank)
    return MetaModel(
        MetaMethod.SVD,
        rank,
        arrays = { "components": vt, "singular_values": s },
    )


@METHODS.encoder(MetaMethod.SVD)
def _encode_svd(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    return np.hstack(rows) @ model.arrays["components"].T


def svd_meta(aligned: AlignedEmbeddingSet, k: int = DEFAULT_META_DIM) -> EmbeddingTable:
    """Rows of ``U_k S_k`` for the concatenation of the sources.

    Raises
    ------
    ContractError
        ``k`` exceeds ``min(|vocab|, sum of source dims)``.
    """
    _require_normalized(aligned)
    u, s, _ = svd_factors(aligned.concatenated(), k)
    return EmbeddingTable(f"svd{k}", aligned.shared_vocab, u * s)


# 1TON


@METHODS.builder(MetaMethod.ONE_TON, family = "linear", trainable = True)
def _build_one_ton(
    aligned: AlignedEmbeddingSet,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    *,
    dim: int = DEFAULT_META_DIM,
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    n = len(aligned)
    target = aligned.concatenated()
    lr = config.rate_for(LossKind.MSE)

    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(2)[0])
    meta = rng.normal(0.0, config.init_std, size = (n, dim))
    # Stacked per-source projections, one row block per source.
    projection = rng.normal(0.0, config.init_std / np.sqrt(dim), size = (target.shape[1], dim))

    shuffle = np.random.default_rng(config.shuffle_seed)
    trace: t.List[float] = []
    for epoch in range(config.epochs):
        total = 0.0
        for batch in minibatches(n, config.batch_size, shuffle):
            out = meta[batch] @ projection.T
            loss = LossKind.MSE.forward(out, target[batch])
            if not np.isfinite(loss):
                raise DivergenceError(epoch)

            grad = LossKind.MSE.backward(out, target[batch])
            grad_projection = grad.T @ meta[batch]
            meta[batch] -= lr * (grad @ projection)
            projection -= lr * grad_projection
            total += loss * len(batch)

        if not (np.all(np.isfinite(meta)) and np.all(np.isfinite(projection))):
            raise DivergenceError(epoch, "non-finite parameter")
        trace.append(total / n)
        LOGGER.debug("1ton epoch %d/%d loss %.6g", epoch + 1, config.epochs, trace[-1])
        check_divergence(trace, epoch)

    return MetaModel(
        MetaMethod.ONE_TON,
        dim,
        loss = LossKind.MSE,
        arrays = { "meta": meta, "projection": projection },
        vocab = aligned.shared_vocab,
        trace = tuple(trace),
    )


def one_ton(
    aligned: AlignedEmbeddingSet,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    *,
    dim: int = DEFAULT_META_DIM,
) -> MetaModel:
    """Learn a meta vector per word and a linear projection per source.

    Minimises the mean squared error between every projection of a word's meta
    vector and that word's source vector, with minibatch SGD over words.

    Raises
    ------
    DivergenceError
        The loss or the parameters became non-finite, or the loss blew up.
    """
    return METHODS.build(MetaMethod.ONE_TON, aligned, config = config, dim = dim)


@METHODS.encoder(MetaMethod.ONE_TON)
def _encode_one_ton(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    index = { word: i for i, word in enumerate(model.vocab) }
    missing = [word for word in words if word not in index]
    if missing:
        raise UnknownWordError(f"1TON has no meta vector for {missing[0]!r}")
    return model.arrays["meta"][[index[word] for word in words]]


def one_ton_reconstruction(model: MetaModel, source_dims: t.Sequence[int]) -> t.List[np.ndarray]:
    """Per-source reconstructions ``P_s m_w`` of every vocabulary word."""
    out = model.arrays["meta"] @ model.arrays["projection"].T
    bounds = np.cumsum([0, *source_dims])
    return [out[:, start:stop] for start, stop in zip(bounds[:-1], bounds[1:])]


# Autoencoders


@METHODS.builder(MetaMethod.CAEME, family = "autoencoder", trainable = True)
def _build_caeme(
    aligned: AlignedEmbeddingSet,
    loss: LossKind = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    data = aligned.concatenated()
    net = _autoencoder(data.shape[1], data.shape[1], loss, config)
    result = train(net, data, data, loss, config)
    return MetaModel(
        MetaMethod.CAEME,
        config.hidden_dim,
        loss = loss,
        nets = (result.net,),
        trace = result.trace,
    )


@METHODS.builder(MetaMethod.DAEME, family = "autoencoder", trainable = True)
def _build_daeme(
    aligned: AlignedEmbeddingSet,
    loss: LossKind = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    sizes = split_hidden(config.hidden_dim, len(aligned.sources))
    if min(sizes) < 1:
        raise ContractError(
            f"{config.hidden_dim} hidden units cannot be split over {len(sizes)} sources",
        )

    nets: t.List[DenseNet] = []
    trace = np.zeros(config.epochs)
    for i, (matrix, size) in enumerate(zip(aligned.matrices, sizes)):
        net = _autoencoder(
            matrix.shape[1],
            matrix.shape[1],
            loss,
            config,
            hidden = size,
            seed = config.seed + i,
        )
        result = train(net, matrix, matrix, loss, config)
        nets.append(result.net)
        trace += result.trace

    return MetaModel(
        MetaMethod.DAEME,
        sum(sizes),
        loss = loss,
        nets = tuple(nets),
        trace = tuple(float(value) for value in trace),
    )


@METHODS.builder(MetaMethod.AAEME, family = "autoencoder", trainable = True)
def _build_aaeme(
    aligned: AlignedEmbeddingSet,
    loss: LossKind = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    inputs = _average(aligned.matrices)
    targets = aligned.concatenated()
    net = _autoencoder(inputs.shape[1], targets.shape[1], loss, config)
    result = train(net, inputs, targets, loss, config)
    return MetaModel(
        MetaMethod.AAEME,
        config.hidden_dim,
        loss = loss,
        nets = (result.net,),
        trace = result.trace,
    )


@METHODS.encoder(MetaMethod.CAEME)
def _encode_caeme(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    return model.nets[0].hidden(np.hstack(rows))


@METHODS.encoder(MetaMethod.DAEME)
def _encode_daeme(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    return np.hstack([net.hidden(matrix) for net, matrix in zip(model.nets, rows)])


@METHODS.encoder(MetaMethod.AAEME)
def _encode_aaeme(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    return model.nets[0].hidden(_average(rows))


def train_ae(
    variant: t.Union[MetaMethod, str],
    aligned: AlignedEmbeddingSet,
    loss: t.Union[LossKind, str] = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
) -> MetaModel:
    """Train a concatenated, decoupled or averaged autoencoder meta-embedding.

    Parameters
    ----------
    variant: :class:`MetaMethod`
        One of :attr:`~MetaMethod.CAEME`, :attr:`~MetaMethod.DAEME`,
        :attr:`~MetaMethod.AAEME`.
    aligned: :class:`~metaemb.embeddings.AlignedEmbeddingSet`
        Normalized sources.
    loss: :class:`~metaemb.losses.LossKind`
        Reconstruction objective.
    config: :class:`~metaemb.nn.TrainConfig`
        Optimisation settings; ``hidden_dim`` is the meta dimensionality.

    Raises
    ------
    ContractError
        ``variant`` is not an autoencoder variant or the set is not normalized.
    DivergenceError
        Training diverged.
    """
    variant = MetaMethod(variant)
    if variant not in AE_VARIANTS:
        raise ContractError(f"{variant.value} is not an autoencoder variant")
    return METHODS.build(variant, aligned, loss = LossKind(loss), config = config)


# Target autoencoders


@METHODS.builder(MetaMethod.TAE, family = "target", trainable = True, needs_target = True)
def _build_tae(
    aligned: AlignedEmbeddingSet,
    loss: LossKind = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    *,
    target_index: int = 0,
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    _check_target(aligned, target_index)
    inputs = np.hstack([aligned.matrices[i] for i in _others(len(aligned.sources), target_index)])
    targets = aligned.matrices[target_index]
    net = _autoencoder(inputs.shape[1], targets.shape[1], loss, config)
    result = train(net, inputs, targets, loss, config)
    return MetaModel(
        MetaMethod.TAE,
        config.hidden_dim,
        loss = loss,
        target_index = target_index,
        nets = (result.net,),
        trace = result.trace,
    )


@METHODS.builder(MetaMethod.TAE_PLUS_Y, family = "target", trainable = True, needs_target = True)
def _build_tae_plus_y(
    aligned: AlignedEmbeddingSet,
    loss: LossKind = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    *,
    target_index: int = 0,
    **_: t.Any,
) -> MetaModel:
    return _build_tae(aligned, loss, config, target_index = target_index).with_target_appended()


@METHODS.encoder(MetaMethod.TAE)
def _encode_tae(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    assert model.target_index is not None
    inputs = [rows[i] for i in _others(len(rows), model.target_index)]
    return model.nets[0].hidden(np.hstack(inputs))


@METHODS.encoder(MetaMethod.TAE_PLUS_Y)
def _encode_tae_plus_y(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    assert model.target_index is not None
    return np.hstack([_encode_tae(model, words, rows), rows[model.target_index]])


def train_tae(
    aligned: AlignedEmbeddingSet,
    target_index: int,
    loss: t.Union[LossKind, str] = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    concat_y: bool = False,
) -> MetaModel:
    """Train a net predicting source ``target_index`` from all other sources.

    The meta vector is the tanh hidden layer, followed by the target vector itself
    when ``concat_y`` is true.

    Raises
    ------
    ContractError
        ``target_index`` is out of range or the set has fewer than two sources.
    """
    method = MetaMethod.TAE_PLUS_Y if concat_y else MetaMethod.TAE
    return METHODS.build(
        method,
        aligned,
        loss = LossKind(loss),
        config = config,
        target_index = target_index,
    )


@METHODS.builder(MetaMethod.MTE, family = "target", trainable = True, needs_target = True)
def _build_mte(
    aligned: AlignedEmbeddingSet,
    loss: LossKind = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
    *,
    target_index: int = 0,
    **_: t.Any,
) -> MetaModel:
    _require_normalized(aligned)
    _check_target(aligned, target_index)
    targets = aligned.matrices[target_index]

    nets: t.List[DenseNet] = []
    traces: t.List[t.Tuple[float, ...]] = []
    for i in _others(len(aligned.sources), target_index):
        matrix = aligned.matrices[i]
        net = _autoencoder(matrix.shape[1], targets.shape[1], loss, config)
        result = train(net, matrix, targets, loss, config)
        nets.append(result.net)
        traces.append(result.trace)

    return MetaModel(
        MetaMethod.MTE,
        config.hidden_dim,
        loss = loss,
        target_index = target_index,
        nets = tuple(nets),
        trace = tuple(float(value) for value in np.mean(traces, axis = 0)),
    )


@METHODS.encoder(MetaMethod.MTE)
def _encode_mte(model: MetaModel, words: Words, rows: Rows) -> np.ndarray:
    assert model.target_index is not None
    inputs = [rows[i] for i in _others(len(rows), model.target_index)]
    return np.mean([net.hidden(matrix) for net, matrix in zip(model.nets, inputs)], axis = 0)


def train_mte(
    aligned: AlignedEmbeddingSet,
    target_index: int,
    loss: t.Union[LossKind, str] = LossKind.MSE,
    config: TrainConfig = TrainConfig(),  # noqa: B008
) -> MetaModel:
    """Train one net per non-target source towards the target and average their hiddens."""
    return METHODS.build(
        MetaMethod.MTE,
        aligned,
        loss = LossKind(loss),
        config = config,
        target_index = target_index,
    )


# Checkpoints


def save_model(model: MetaModel, path: t.Union[str, "os.PathLike[str]"]) -> None:
    """Write ``model`` as an ``.npz`` archive with a JSON method descriptor."""
    descriptor = {
        "version": MODEL_FORMAT_VERSION,
        "method": model.method.value,
        "meta_dim": model.meta_dim,
        "loss": model.loss.value if model.loss is not None else None,
        "target_index": model.target_index,
        "nets": len(model.nets),
        "arrays": sorted(model.arrays),
        "trace": list(model.trace),
    }
    arrays: t.Dict[str, np.ndarray] = { "descriptor": np.array(json.dumps(descriptor)) }
    for i, net in enumerate(model.nets):
        arrays.update(net_to_arrays(net, prefix = f"net{i}."))
    for key, value in model.arrays.items():
        arrays[f"array.{key}"] = value
    if model.vocab:
        arrays["vocab"] = np.array(model.vocab, dtype = str)

    try:
        with pathlib.Path(path).open("wb") as f:
            np.savez(f, **arrays)
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc


def load_model(path: t.Union[str, "os.PathLike[str]"]) -> MetaModel:
    """Read a model written by :func:`save_model`."""
    try:
        with np.load(path) as archive:
            contents = dict(archive)
        descriptor = json.loads(str(contents["descriptor"]))
    except (OSError, KeyError, ValueError) as exc:
        raise ArtifactError(path, f"not a readable model checkpoint ({exc})") from exc

    if descriptor["version"] != MODEL_FORMAT_VERSION:
        raise ArtifactError(path, f"unsupported model format version {descriptor['version']}")

    return MetaModel(
        MetaMethod(descriptor["method"]),
        int(descriptor["meta_dim"]),
        loss = LossKind(descriptor["loss"]) if descriptor["loss"] is not None else None,
        target_index = descriptor["target_index"],
        nets = tuple(net_from_arrays(contents, f"net{i}.") for i in range(descriptor["nets"])),
        arrays = { key: contents[f"array.{key}"] for key in descriptor["arrays"] },
        vocab = tuple(str(word) for word in contents.get("vocab", ())),
        trace = tuple(descriptor["trace"]),
    )
