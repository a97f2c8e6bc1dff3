# SPDX-License-Identifier: LGPL-3.0-only

"""Reconstruction objectives and their gradients.

All losses take a prediction ``y_hat`` and a target ``y`` of equal shape, either a
single vector or a ``batch x dim`` matrix, and return a scalar. Batched values are
means: over every element for :attr:`LossKind.MSE` and :attr:`LossKind.MAE`, over
samples for :attr:`LossKind.KL` and :attr:`LossKind.SCP`.
"""

from __future__ import annotations

import enum
import typing as t

import numpy as np
from scipy import special

from .errors import DimensionError, NumericError, UndefinedCosineError

if t.TYPE_CHECKING:
    from .nn import Activation

__all__ = ("LossKind", "cosine_rows")

DEFAULT_LEARNING_RATES: t.Final[t.Mapping[str, float]] = {
    "mse": 0.05,
    "mae": 4.0,
    "kl": 0.5,
    "scp": 10.0,
}


def _as_batch(y_hat: np.ndarray, y: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray, bool]:
    y_hat = np.asarray(y_hat, dtype = np.float64)
    y = np.asarray(y, dtype = np.float64)
    if y_hat.shape != y.shape:
        raise DimensionError(f"prediction shape {y_hat.shape} != target shape {y.shape}")
    if y_hat.ndim == 1:
        return y_hat[None, :], y[None, :], True
    if y_hat.ndim != 2:
        raise DimensionError(f"expected a vector or a batch of vectors, got {y_hat.ndim}-D")
    return y_hat, y, False


def cosine_rows(a: np.ndarray, b: np.ndarray) -> t.Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row-wise cosine similarity.

    Returns
    -------
    Tuple[:class:`numpy.ndarray`, :class:`numpy.ndarray`, :class:`numpy.ndarray`]
        Cosines, norms of ``a`` rows, norms of ``b`` rows.

    Raises
    ------
    UndefinedCosineError
        Some row of either argument is all zeros.
    """
    norm_a = np.linalg.norm(a, axis = 1)
    norm_b = np.linalg.norm(b, axis = 1)
    if np.any(norm_a == 0.0) or np.any(norm_b == 0.0):
        raise UndefinedCosineError("cosine is undefined for a zero vector")
    cos = np.einsum("ij,ij->i", a, b) / (norm_a * norm_b)
    return np.clip(cos, -1.0, 1.0), norm_a, norm_b


class LossKind(str, enum.Enum):
    """The four reconstruction objectives.

    :attr:`KL` expects ``y_hat`` to already be log-probabilities (the output of a
    ``log_softmax`` layer); the target is turned into a distribution with a softmax.
    """

    MSE = "mse"
    """Mean squared error."""
    MAE = "mae"
    """Mean absolute error."""
    KL = "kl"
    """KL divergence between ``softmax(y)`` and ``exp(y_hat)``."""
    SCP = "scp"
    """Squared cosine proximity, ``(1 - cos(y_hat, y))**2``."""

    @property
    def output_activation(self) -> Activation:
        """The decoder activation this loss is paired with."""
        from .nn import Activation

        return Activation.LOG_SOFTMAX if self is LossKind.KL else Activation.LINEAR

    @property
    def default_learning_rate(self) -> float:
        return DEFAULT_LEARNING_RATES[self.value]

    def forward(self, y_hat: np.ndarray, y: np.ndarray) -> float:
        """Return the loss of ``y_hat`` against ``y``.

        Raises
        ------
        DimensionError
            The arguments differ in shape.
        UndefinedCosineError
            :attr:`SCP` was given a zero vector.
        NumericError
            :attr:`KL` produced a non-finite value.
        """
        pred, target, _ = _as_batch(y_hat, y)

        if self is LossKind.MSE:
            return float(np.mean((pred - target) ** 2))

        if self is LossKind.MAE:
            return float(np.mean(np.abs(pred - target)))

        if self is LossKind.KL:
            log_p = special.log_softmax(target, axis = 1)
            value = float(np.mean(np.sum(np.exp(log_p) * (log_p - pred), axis = 1)))
            if not np.isfinite(value):
                raise NumericError("KL divergence is not finite")
            return value

        cos, _, _ = cosine_rows(pred, target)
        return float(np.mean((1.0 - cos) ** 2))

    def backward(self, y_hat: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Return the gradient of :meth:`forward` with respect to ``y_hat``.

        The result has the shape of ``y_hat``.
        """
        pred, target, single = _as_batch(y_hat, y)
        n = pred.shape[0]

        if self is LossKind.MSE:
            grad = 2.0 * (pred - target) / pred.size

        elif self is LossKind.MAE:
            grad = np.sign(pred - target) / pred.size

        elif self is LossKind.KL:
            grad = -special.softmax(target, axis = 1) / n
            if not np.all(np.isfinite(pred)):
                raise NumericError("KL divergence is not finite")

        else:
            cos, norm_pred, norm_target = cosine_rows(pred, target)
            dcos = (
                target / (norm_pred * norm_target)[:, None]
                - cos[:, None] * pred / (norm_pred**2)[:, None]
            )
            grad = (-2.0 * (1.0 - cos) / n)[:, None] * dcos

        return grad[0] if single else grad
