"""Input validation and seeding helpers shared across the package."""

from __future__ import annotations

import numbers
import secrets
import zlib

import numpy as np


class InvalidInputError(ValueError):
    """Raised when caller-supplied data or parameters violate a precondition."""


class DisconnectedGraphError(InvalidInputError):
    """Raised when a graph metric is requested on a disconnected graph."""

    def __init__(self, u: int, v: int):
        super().__init__(f"graph is disconnected: no path between {u} and {v}")
        self.pair = (u, v)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_positive_float(value, name: str, allow_zero: bool = False) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be a real number, got {value!r}") from None
    if not np.isfinite(x) or x < 0 or (x == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidInputError(f"{name} must be finite and {bound}, got {value!r}")
    return x


def check_k(k, n: int) -> int:
    k = check_positive_int(k, "k")
    if k > n:
        raise InvalidInputError(f"k={k} exceeds the number of available points ({n})")
    return k


def check_point_ids(ids, n: int, name: str = "points") -> np.ndarray:
    arr = np.asarray(ids)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise InvalidInputError(f"{name} must contain integer point ids")
    arr = arr.astype(np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        bad = arr[(arr < 0) | (arr >= n)][0]
        raise InvalidInputError(f"{name} contains id {int(bad)} outside [0, {n})")
    return arr


def _tag(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key)


def make_rng(seed, *keys) -> np.random.Generator:
    """Return a Generator keyed by ``seed`` and any number of integer/str tags.

    ``seed=None`` draws fresh OS entropy (the non-reproducible secure path).
    An existing Generator is returned as is (keys are ignored): the caller
    owns that stream.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        seed = secrets.randbits(128)
    entropy = [int(seed)] + [_tag(k) for k in keys]
    return np.random.default_rng(entropy)
