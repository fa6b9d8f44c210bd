"""Miscellaneous utility functions."""

import typing

import numpy as np

from .base import config

# pylint: disable=invalid-name


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Get a reproducible random stream for a seed and optional stream keys.

    Streams use the counter-based :py:class:`numpy.random.Philox` bit
    generator keyed by a :py:class:`numpy.random.SeedSequence` over
    ``[seed, *keys]``, so the same ``(seed, keys)`` yields the same draws on
    every platform and distinct keys yield independent streams.

    :param seed: Experiment seed.
    :param keys: Stream keys such as the episode index.

    :returns: :py:class:`numpy.random.Generator`.

    """
    entropy = [int(seed), *(int(key) for key in keys)]
    if any(value < 0 for value in entropy):
        raise ValueError(f"seeds and stream keys must be non-negative: {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def format_float(value: float) -> str:
    """Format a float with the configured number of significant digits."""
    precision = config.getint("output", "precision")
    return f"{float(value):.{precision}g}"


def argmax_lowest(values: np.ndarray) -> np.ndarray:
    """Row-wise argmax over the last axis, breaking ties toward the lowest index."""
    return np.argmax(values, axis=-1)


def readonly(array: typing.Any, dtype=float) -> np.ndarray:
    """Copy ``array`` into a new read-only numpy array."""
    result = np.array(array, dtype=dtype, copy=True)
    result.setflags(write=False)
    return result


def is_simplex(p: np.ndarray, tol: typing.Optional[float] = None) -> bool:
    """Check that the last axis of ``p`` holds probability vectors."""
    if tol is None:
        tol = config.getfloat("tolerance", "probability")
    p = np.asarray(p, dtype=float)
    if p.size == 0 or not np.all(np.isfinite(p)):
        return False
    return bool(np.all(p >= 0.0) and np.all(np.abs(p.sum(axis=-1) - 1.0) <= tol))
