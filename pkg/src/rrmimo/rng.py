"""Seed handling.

Every randomized routine takes a ``seed`` that may be an int, a
:class:`numpy.random.SeedSequence` or an existing Generator.  Integers and
seed sequences are turned into a counter-based Philox generator, so that a
Monte Carlo trial can derive its own stream from ``(master_seed, *keys)``
without touching any shared state.
"""
from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator, None]


def make_rng(seed: SeedLike = None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def derive_seed(master: int, *keys: int) -> np.random.SeedSequence:
    """Independent child seed for the stream identified by ``keys``.

    The result depends only on ``master`` and ``keys``; the order in which
    streams are requested is irrelevant.
    """
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))


def trial_rng(master: int, *keys: int) -> np.random.Generator:
    return make_rng(derive_seed(master, *keys))


def complex_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Circularly-symmetric CN(0, 1) samples."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)
