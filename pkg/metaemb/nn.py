# SPDX-License-Identifier: LGPL-3.0-only

"""A small dense network engine: forward and backward passes, SGD, gradient checks."""

from __future__ import annotations

import copy
import dataclasses
import enum
import json
import logging
import os
import pathlib
import sys
import typing as t

import numpy as np
from scipy import special

from .errors import ArtifactError, ConstructionError, DimensionError, DivergenceError, NumericError
from .losses import LossKind

if sys.version_info < (3, 11):
    from typing_extensions import Self
else:
    from typing import Self

__all__ = (
    "Activation",
    "Mode",
    "DenseLayer",
    "Tape",
    "DenseNet",
    "TrainConfig",
    "TrainResult",
    "init_net",
    "minibatches",
    "check_divergence",
    "train",
    "grad_check",
    "net_to_arrays",
    "net_from_arrays",
    "save_net",
    "load_net",
)

LOGGER = logging.getLogger(__name__)

CHECKPOINT_VERSION: t.Final[int] = 1
GRAD_CHECK_FLOOR: t.Final[float] = 1e-3
"""Gradients smaller than this are compared in absolute rather than relative terms."""
DIVERGENCE_FACTOR: t.Final[float] = 1e6
"""An epoch loss this many times the first epoch's counts as divergence."""


class Activation(str, enum.Enum):
    TANH = "tanh"
    LINEAR = "linear"
    LOG_SOFTMAX = "log_softmax"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.LOG_SOFTMAX:
            return special.log_softmax(z, axis = 1)
        return z

    def backward(self, grad: np.ndarray, out: np.ndarray) -> np.ndarray:
        """Map a gradient w.r.t. the activation output ``out`` to the pre-activation."""
        if self is Activation.TANH:
            return grad * (1.0 - out**2)
        if self is Activation.LOG_SOFTMAX:
            return grad - np.exp(out) * np.sum(grad, axis = 1, keepdims = True)
        return grad


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


@dataclasses.dataclass
class DenseLayer:
    """``activation(x @ weight.T + bias)``."""

    weight: np.ndarray
    """``out x in`` weight matrix."""
    bias: np.ndarray
    activation: Activation

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclasses.dataclass
class Tape:
    """Intermediates of one forward pass, consumed by :meth:`DenseNet.backward`."""

    inputs: t.List[np.ndarray]
    """Input of every layer, after dropout."""
    outputs: t.List[np.ndarray]
    """Activation output of every layer, before dropout."""
    masks: t.List[t.Optional[np.ndarray]]
    """Scaled dropout mask applied to each layer's output, if any."""
    single: bool


class DenseNet:
    """A feed-forward stack of :class:`DenseLayer`.

    Dropout (inverted: survivors are scaled by ``1 / (1 - p)``) is applied to the
    output of every layer but the last, and only in :attr:`Mode.TRAIN`.

    Parameters
    ----------
    layers: Sequence[:class:`DenseLayer`]
        Layers in application order; adjacent shapes must chain.
    dropout_rate: :class:`float`
        Dropout probability in ``[0, 1)``.
    rng_seed: :class:`int`
        Seed of the dropout mask stream.
    """

    __slots__ = ("layers", "dropout_rate", "rng_seed", "_rng")

    def __init__(
        self: Self,
        layers: t.Sequence[DenseLayer],
        *,
        dropout_rate: float = 0.0,
        rng_seed: int = 0,
    ) -> None:
        if not layers:
            raise ConstructionError("a network needs at least one layer")
        if not 0.0 <= dropout_rate < 1.0:
            raise ConstructionError(f"dropout rate must be in [0, 1), got {dropout_rate}")

        for i, layer in enumerate(layers):
            if layer.weight.ndim != 2 or layer.bias.shape != (layer.out_dim,):
                raise ConstructionError(f"layer {i} has inconsistent weight/bias shapes")
            if i and layers[i - 1].out_dim != layer.in_dim:
                raise ConstructionError(
                    f"layer {i} expects {layer.in_dim} inputs but layer {i - 1} "
                    f"produces {layers[i - 1].out_dim}",
                )

        self.layers: t.List[DenseLayer] = list(layers)
        self.dropout_rate = float(dropout_rate)
        self.rng_seed = int(rng_seed)
        self._rng = np.random.default_rng(np.random.SeedSequence(rng_seed).spawn(2)[1])

    @property
    def input_dim(self: Self) -> int:
        return self.layers[0].in_dim

    @property
    def output_dim(self: Self) -> int:
        return self.layers[-1].out_dim

    @property
    def dims(self: Self) -> t.List[int]:
        return [self.input_dim, *(layer.out_dim for layer in self.layers)]

    @property
    def activations(self: Self) -> t.List[Activation]:
        return [layer.activation for layer in self.layers]

    def parameters(self: Self) -> t.List[np.ndarray]:
        """Weight and bias arrays in layer order; updates to them update the net."""
        params: t.List[np.ndarray] = []
        for layer in self.layers:
            params.extend((layer.weight, layer.bias))
        return params

    def copy(self: Self) -> DenseNet:
        return copy.deepcopy(self)

    def _check_input(self: Self, x: np.ndarray) -> t.Tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype = np.float64)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.input_dim:
            raise DimensionError(
                f"network expects inputs of width {self.input_dim}, got shape {x.shape}",
            )
        if not np.all(np.isfinite(batch)):
            raise NumericError("network input holds non-finite values")
        return batch, single

    def forward(self: Self, x: np.ndarray, mode: Mode = Mode.EVAL) -> t.Tuple[np.ndarray, Tape]:
        """Run the network on a vector or a batch.

        Returns
        -------
        Tuple[:class:`numpy.ndarray`, :class:`Tape`]
            The output (same rank as ``x``) and the intermediates for backprop.

        Raises
        ------
        DimensionError
            ``x`` has the wrong width.
        """
        h, single = self._check_input(x)
        tape = Tape([], [], [], single)
        drop = mode is Mode.TRAIN and self.dropout_rate > 0.0
        last = len(self.layers) - 1

        for i, layer in enumerate(self.layers):
            tape.inputs.append(h)
            out = layer.activation.apply(h @ layer.weight.T + layer.bias)
            tape.outputs.append(out)

            mask: t.Optional[np.ndarray] = None
            if drop and i != last:
                keep = 1.0 - self.dropout_rate
                mask = (self._rng.random(out.shape) < keep) / keep
                out = out * mask
            tape.masks.append(mask)
            h = out

        return (h[0] if single else h), tape

    def __call__(self: Self, x: np.ndarray) -> np.ndarray:
        return self.forward(x, Mode.EVAL)[0]

    def hidden(self: Self, x: np.ndarray, layer: int = 0) -> np.ndarray:
        """Eval-mode activation of layer ``layer`` (the first hidden layer by default)."""
        _, tape = self.forward(x, Mode.EVAL)
        out = tape.outputs[layer]
        return out[0] if tape.single else out

    def backward(self: Self, tape: Tape, grad_output: np.ndarray) -> t.List[np.ndarray]:
        """Backpropagate ``grad_output`` (gradient w.r.t. the forward output).

        Returns
        -------
        List[:class:`numpy.ndarray`]
            Gradients aligned with :meth:`parameters`.
        """
        grad = np.asarray(grad_output, dtype = np.float64)
        if tape.single:
            grad = grad[None, :]

        grads: t.List[np.ndarray] = []
        for i in reversed(range(len(self.layers))):
            layer = self.layers[i]
            mask = tape.masks[i]
            if mask is not None:
                grad = grad * mask
            grad = layer.activation.backward(grad, tape.outputs[i])
            grads.append(grad.sum(axis = 0))
            grads.append(grad.T @ tape.inputs[i])
            grad = grad @ layer.weight

        grads.reverse()
        return grads


def init_net(
    dims: t.Sequence[int],
    activations: t.Sequence[t.Union[Activation, str]],
    *,
    dropout_rate: float = 0.0,
    seed: int = 0,
    init_std: float = 1.0,
    init_scaled: bool = False,
) -> DenseNet:
    """Create a network with ``Normal(0, init_std**2)`` weights and zero biases.

    Parameters
    ----------
    dims: Sequence[:class:`int`]
        Layer widths, input first; ``len(dims) - 1`` layers are created.
    activations: Sequence[:class:`Activation`]
        One activation per layer.
    init_scaled: :class:`bool`
        Use ``1 / sqrt(fan_in)`` as the standard deviation instead of ``init_std``.

    Raises
    ------
    ConstructionError
        Fewer than two widths, a non-positive width, or a wrong number of activations.
    """
    if len(dims) < 2 or any(int(dim) < 1 for dim in dims):
        raise ConstructionError(f"need at least two positive layer widths, got {list(dims)}")
    if len(activations) != len(dims) - 1:
        raise ConstructionError(
            f"{len(dims) - 1} layer(s) need as many activations, got {len(activations)}",
        )
    if init_std < 0.0:
        raise ConstructionError(f"init_std must be non-negative, got {init_std}")

    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(2)[0])
    layers: t.List[DenseLayer] = []
    for fan_in, fan_out, activation in zip(dims[:-1], dims[1:], activations):
        std = 1.0 / np.sqrt(fan_in) if init_scaled else init_std
        layers.append(
            DenseLayer(
                weight = rng.normal(0.0, std, size = (int(fan_out), int(fan_in))),
                bias = np.zeros(int(fan_out)),
                activation = Activation(activation),
            ),
        )
    return DenseNet(layers, dropout_rate = dropout_rate, rng_seed = seed)


# Training


@dataclasses.dataclass(frozen = True)
class TrainConfig:
    """Optimisation settings shared by every trainable method."""

    batch_size: int = 32
    epochs: int = 50
    learning_rate: t.Optional[float] = None
    """``None`` selects :attr:`LossKind.default_learning_rate`."""
    init_std: float = 1.0
    init_scaled: bool = False
    shuffle_seed: int = 0
    seed: int = 0
    """Seeds weight initialisation and dropout masks."""
    hidden_dim: int = 200
    dropout_rate: float = 0.2

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.epochs < 1 or self.hidden_dim < 1:
            raise ValueError("batch_size, epochs and hidden_dim must be positive")
        if self.learning_rate is not None and self.learning_rate < 0.0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")

    def rate_for(self, kind: LossKind) -> float:
        if self.learning_rate is not None:
            return self.learning_rate
        return kind.default_learning_rate


@dataclasses.dataclass(frozen = True)
class TrainResult:
    net: DenseNet
    trace: t.Tuple[float, ...]
    """Mean training loss of every epoch."""


def minibatches(
    n: int,
    batch_size: int,
    rng: np.random.Generator,
) -> t.Iterator[np.ndarray]:
    """Yield shuffled index batches covering ``range(n)``; the last may be short."""
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def check_divergence(trace: t.Sequence[float], epoch: int) -> None:
    """Raise if the latest epoch loss is non-finite or has blown up against the first.

    Raises
    ------
    DivergenceError
        ``trace[-1]`` is not finite, or exceeds :data:`DIVERGENCE_FACTOR` times
        ``trace[0]``.
    """
    latest = trace[-1]
    if not np.isfinite(latest):
        raise DivergenceError(epoch)
    if trace[0] > 0.0 and latest > DIVERGENCE_FACTOR * trace[0]:
        raise DivergenceError(epoch, f"loss grew from {trace[0]:.6g} to {latest:.6g}")


def train(
    net: DenseNet,
    inputs: np.ndarray,
    targets: np.ndarray,
    kind: LossKind,
    config: TrainConfig,
) -> TrainResult:
    """Fit a copy of ``net`` to ``(inputs, targets)`` with plain minibatch SGD.

    The input network is left untouched.

    Raises
    ------
    ContractError
        The dataset is empty.
    DimensionError
        Shapes do not match the network.
    DivergenceError
        A loss or parameter became non-finite, or the epoch loss grew past
        :data:`DIVERGENCE_FACTOR` times the first epoch's.
    """
    inputs = np.asarray(inputs, dtype = np.float64)
    targets = np.asarray(targets, dtype = np.float64)
    if inputs.ndim != 2 or inputs.shape[0] == 0:
        raise DimensionError("training inputs must be a non-empty batch")
    if targets.shape != (inputs.shape[0], net.output_dim):
        raise DimensionError(
            f"targets of shape {targets.shape} do not match "
            f"{inputs.shape[0]} samples x {net.output_dim} outputs",
        )

    net = net.copy()
    lr = config.rate_for(kind)
    rng = np.random.default_rng(config.shuffle_seed)
    n = inputs.shape[0]
    trace: t.List[float] = []

    for epoch in range(config.epochs):
        total = 0.0
        for batch in minibatches(n, config.batch_size, rng):
            out, tape = net.forward(inputs[batch], Mode.TRAIN)
            try:
                loss = kind.forward(out, targets[batch])
                grad_output = kind.backward(out, targets[batch])
            except NumericError as exc:
                raise DivergenceError(epoch, str(exc)) from exc
            if not np.isfinite(loss):
                raise DivergenceError(epoch)

            grads = net.backward(tape, grad_output)
            for param, grad in zip(net.parameters(), grads):
                param -= lr * grad
            total += loss * len(batch)

        if not all(np.all(np.isfinite(param)) for param in net.parameters()):
            raise DivergenceError(epoch, "non-finite parameter")

        trace.append(total / n)
        LOGGER.debug("epoch %d/%d %s loss %.6g", epoch + 1, config.epochs, kind.value, trace[-1])
        check_divergence(trace, epoch)

    return TrainResult(net, tuple(trace))


def grad_check(
    net: DenseNet,
    kind: LossKind,
    inputs: np.ndarray,
    targets: np.ndarray,
    *,
    step: float = 1e-5,
) -> float:
    """Compare backprop gradients against central differences.

    The check runs in eval mode. Each parameter's discrepancy is
    ``|analytic - numeric| / max(|analytic|, |numeric|, GRAD_CHECK_FLOOR)``.

    Returns
    -------
    :class:`float`
        The largest discrepancy over all parameters.
    """
    net = net.copy()
    out, tape = net.forward(inputs, Mode.EVAL)
    analytic = net.backward(tape, kind.backward(out, targets))

    def loss() -> float:
        return kind.forward(net.forward(inputs, Mode.EVAL)[0], targets)

    worst = 0.0
    for param, grad in zip(net.parameters(), analytic):
        flat = param.reshape(-1)
        flat_grad = grad.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            upper = loss()
            flat[i] = original - step
            lower = loss()
            flat[i] = original

            numeric = (upper - lower) / (2.0 * step)
            scale = max(abs(flat_grad[i]), abs(numeric), GRAD_CHECK_FLOOR)
            worst = max(worst, abs(flat_grad[i] - numeric) / scale)

    return worst


# Checkpoints


def net_to_arrays(net: DenseNet, prefix: str = "") -> t.Dict[str, np.ndarray]:
    """Flatten ``net`` into named arrays, every key starting with ``prefix``."""
    header = {
        "version": CHECKPOINT_VERSION,
        "dims": net.dims,
        "activations": [activation.value for activation in net.activations],
        "dropout_rate": net.dropout_rate,
        "rng_seed": net.rng_seed,
    }
    arrays = { f"{prefix}header": np.array(json.dumps(header)) }
    for i, layer in enumerate(net.layers):
        arrays[f"{prefix}layer{i}.weight"] = layer.weight
        arrays[f"{prefix}layer{i}.bias"] = layer.bias
    return arrays


def net_from_arrays(arrays: t.Mapping[str, np.ndarray], prefix: str = "") -> DenseNet:
    header = json.loads(str(arrays[f"{prefix}header"]))
    if header["version"] != CHECKPOINT_VERSION:
        raise ConstructionError(f"unsupported checkpoint version {header['version']}")

    layers = [
        DenseLayer(
            weight = np.array(arrays[f"{prefix}layer{i}.weight"], dtype = np.float64),
            bias = np.array(arrays[f"{prefix}layer{i}.bias"], dtype = np.float64),
            activation = Activation(activation),
        ) for i, activation in enumerate(header["activations"])
    ]
    return DenseNet(layers, dropout_rate = header["dropout_rate"], rng_seed = header["rng_seed"])


def save_net(net: DenseNet, path: t.Union[str, "os.PathLike[str]"]) -> None:
    try:
        with pathlib.Path(path).open("wb") as f:
            np.savez(f, **net_to_arrays(net))
    except OSError as exc:
        raise ArtifactError(path, exc.strerror or str(exc)) from exc


def load_net(path: t.Union[str, "os.PathLike[str]"]) -> DenseNet:
    try:
        with np.load(path) as archive:
            return net_from_arrays(dict(archive))
    except (OSError, KeyError, ValueError) as exc:
        raise ArtifactError(path, f"not a readable network checkpoint ({exc})") from exc
