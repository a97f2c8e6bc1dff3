# SPDX-License-Identifier: LGPL-3.0-only

from __future__ import annotations

import dataclasses
import logging
import sys
import typing as t

if sys.version_info < (3, 11):
    from typing_extensions import Self
else:
    from typing import Self

if t.TYPE_CHECKING:
    import numpy as np

    from .embeddings import AlignedEmbeddingSet
    from .methods import MetaMethod, MetaModel

__all__ = ("MethodRegistry", "MethodMetadata", "MethodSpec", "get_parent_registry")

LOGGER = logging.getLogger(__name__)

Builder = t.Callable[..., "MetaModel"]
Encoder = t.Callable[["MetaModel", t.Sequence[str], t.Sequence["np.ndarray"]], "np.ndarray"]
BuildHook = t.Callable[["MethodSpec", t.Mapping[str, t.Any]], None]
PostBuildHook = t.Callable[["MethodSpec", "MetaModel"], None]

BuilderT = t.TypeVar("BuilderT", bound = Builder)
EncoderT = t.TypeVar("EncoderT", bound = Encoder)


@dataclasses.dataclass
class MethodMetadata:
    """Represents metadata for a :class:`MethodRegistry`.

    Parameters
    ----------
    name: :class:`str`
        Registry name.
    extras: Dict[:class:`str`, Any]
        A dict of extra metadata for the registry.
    """

    name: str
    """Registry name."""
    extras: t.Dict[str, t.Any]
    """A dict of extra metadata for the registry."""


@dataclasses.dataclass
class MethodSpec:
    """A registered meta-embedding method."""

    method: MetaMethod
    builder: Builder
    encoder: t.Optional[Encoder] = None
    extras: t.Dict[str, t.Any] = dataclasses.field(default_factory = dict)
    """Free-form flags such as ``family``, ``trainable`` and ``needs_target``."""

    @property
    def family(self) -> str:
        return self.extras.get("family", "baseline")

    @property
    def trainable(self) -> bool:
        return bool(self.extras.get("trainable", False))

    @property
    def needs_target(self) -> bool:
        return bool(self.extras.get("needs_target", False))


class ExtrasAware(t.Protocol):
    extras: t.Dict[str, t.Any]


def get_parent_registry(obj: ExtrasAware) -> MethodRegistry:
    """Get the registry to which the provided spec is registered.

    Raises
    ------
    LookupError
        The object is not registered to any registry.
    """
    if registry := obj.extras.get("registry"):
        return registry

    raise LookupError(f"Object {type(obj).__name__!r} does not belong to a MethodRegistry.")


class MethodRegistry:
    """A collection of meta-embedding methods, keyed by :class:`MetaMethod`.

    Methods are registered with the :meth:`builder` and :meth:`encoder` decorators,
    then built by name through :meth:`build`.

    Parameters
    ----------
    name: :class:`str`
        The name of the registry.
    logger: Optional[Union[:class:`logging.Logger`, :class:`str`]]
        The logger or its name to use when logging builds.
        If not specified, defaults to ``metaemb.registry``.
    **extras: Dict[:class:`str`, Any]
        A dict of extra metadata for this registry.
    """

    __slots__ = ("metadata", "logger", "_specs", "_pre_build_hooks", "_post_build_hooks")

    metadata: MethodMetadata
    """The metadata assigned to the registry."""

    logger: logging.Logger
    """The logger associated with this registry."""

    def __init__(
        self: Self,
        *,
        name: str = "methods",
        logger: t.Union[logging.Logger, str, None] = None,
        **extras: t.Any,
    ) -> None:
        self.metadata = MethodMetadata(name = name, extras = extras)

        if logger is not None:
            if isinstance(logger, str):
                logger = logging.getLogger(logger)

        else:
            logger = LOGGER

        self.logger = logger

        self._specs: t.Dict[MetaMethod, MethodSpec] = {}
        self._pre_build_hooks: t.List[BuildHook] = []
        self._post_build_hooks: t.List[PostBuildHook] = []

    @property
    def name(self: Self) -> str:
        """The name of this registry."""
        return self.metadata.name

    @property
    def methods(self: Self) -> t.Sequence[MetaMethod]:
        """All registered methods, in registration order."""
        return tuple(self._specs)

    def __contains__(self: Self, method: object) -> bool:
        return method in self._specs

    def get(self: Self, method: MetaMethod) -> MethodSpec:
        try:
            return self._specs[method]
        except KeyError:
            raise LookupError(f"{method!s} is not registered in {self.name!r}") from None

    # Registration

    def builder(
        self: Self,
        method: MetaMethod,
        **extras: t.Any,
    ) -> t.Callable[[BuilderT], BuilderT]:
        """Register the function that produces a :class:`MetaModel` for ``method``.

        Parameters
        ----------
        method: :class:`MetaMethod`
            The method being registered.
        **extras: Any
            Metadata stored on the :class:`MethodSpec`.
        """

        def decorator(callback: BuilderT) -> BuilderT:
            if method in self._specs:
                raise TypeError(f"A builder for {method!s} is already registered.")

            spec = MethodSpec(method, callback, extras = dict(extras))
            spec.extras.setdefault("registry", self)
            self._specs[method] = spec
            return callback

        return decorator

    def encoder(self: Self, *methods: MetaMethod) -> t.Callable[[EncoderT], EncoderT]:
        """Register the function mapping source rows to meta vectors for ``methods``.

        The builder of each method must already be registered.
        """

        def decorator(callback: EncoderT) -> EncoderT:
            for method in methods:
                self.get(method).encoder = callback
            return callback

        return decorator

    def build_hook(self: Self, post: bool = False) -> t.Callable[[t.Any], t.Any]:
        """Mark a function as a pre-build or post-build hook.

        Pre-build hooks receive the spec and the build options; post-build hooks
        receive the spec and the finished model.
        """
        hooks: t.List[t.Any] = self._post_build_hooks if post else self._pre_build_hooks

        def wrapper(callback: t.Any) -> t.Any:
            hooks.append(callback)
            return callback

        return wrapper

    def remove_hook(self: Self, callback: t.Any) -> None:
        for hooks in (self._pre_build_hooks, self._post_build_hooks):
            if callback in hooks:
                hooks.remove(callback)

    # Use

    def build(
        self: Self,
        method: MetaMethod,
        aligned: AlignedEmbeddingSet,
        **options: t.Any,
    ) -> MetaModel:
        """Build ``method`` over ``aligned``, running the registered hooks around it."""
        spec = self.get(method)

        for hook in self._pre_build_hooks:
            hook(spec, options)

        model = spec.builder(aligned, **options)

        for hook in self._post_build_hooks:
            hook(spec, model)

        self.logger.info(f"Built {model.label} ({model.meta_dim}d) over {len(aligned)} words")
        return model

    def encode(
        self: Self,
        model: MetaModel,
        words: t.Sequence[str],
        rows: t.Sequence[np.ndarray],
    ) -> np.ndarray:
        """Map aligned source rows of ``words`` to meta vectors with ``model``."""
        encoder = self.get(model.method).encoder
        if encoder is None:
            raise LookupError(f"{model.method!s} has no registered encoder")
        return encoder(model, words, rows)
