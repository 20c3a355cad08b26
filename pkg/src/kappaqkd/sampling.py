"""Reproducible random streams and quantum-equilibrium initial states.

Every (master seed, stream label, round index) triple maps to its own Philox
stream.  The Philox key is derived from the seed and the label; the round
index is written into the top word of the 256-bit counter.  No stream depends
on any other having been consumed first, so rounds can be generated in any
order or in parallel with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dynamics import HiddenState, PhysicalParams

GENERATOR_NAME = "Philox4x64-10"

_SEED_MASK = (1 << 64) - 1


class StreamLabel(Enum):
    SCHEDULE = 0
    KEY_PHYSICS = 1
    TEST_SAMPLING = 2
    BOB_KAPPA = 3
    EVE = 4


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_label: StreamLabel = StreamLabel.KEY_PHYSICS

    def __post_init__(self):
        if not isinstance(self.master_seed, (int, np.integer)) or isinstance(self.master_seed, bool):
            raise TypeError("master_seed must be an integer")
        if not 0 <= self.master_seed <= _SEED_MASK:
            raise ValueError("master_seed must fit in 64 unsigned bits")

    def with_label(self, label: StreamLabel) -> "SeedSpec":
        return SeedSpec(self.master_seed, label)

    def key(self) -> np.ndarray:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(self.stream_label.value,))
        return ss.generate_state(2, dtype=np.uint64)


class StreamFactory:
    """Caches the Philox key of one (seed, label) pair and hands out per-round streams."""

    def __init__(self, seed: SeedSpec):
        self.seed = seed
        self._key = seed.key()

    def __call__(self, round_index: int) -> np.random.Generator:
        if round_index < 0:
            raise ValueError("round_index must be >= 0")
        counter = np.array([0, 0, 0, round_index], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=self._key, counter=counter))


def substream(seed: SeedSpec, round_index: int) -> np.random.Generator:
    """Independent generator for one round of one stream."""
    return StreamFactory(seed)(round_index)


def draw_state(rng: np.random.Generator, params: PhysicalParams, std_per_halfwidth: float = 1.0) -> HiddenState:
    z1, z2 = rng.standard_normal(2) * (params.halfwidth * std_per_halfwidth)
    return HiddenState(float(z1), float(z2))


def sample_equilibrium(
    n: int,
    params: PhysicalParams,
    seed: SeedSpec,
    std_per_halfwidth: float = 1.0,
) -> list[HiddenState]:
    """Draw ``n`` initial pairs from the equilibrium density.

    z1 and z2 are independent centred Gaussians with standard deviation
    ``halfwidth * std_per_halfwidth``.  State ``i`` is drawn from round
    stream ``i`` of ``seed``.  Use ``std_per_halfwidth = 1/sqrt(2)`` if the
    halfwidth is meant as the 1/e point of the density instead.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    streams = StreamFactory(seed)
    return [draw_state(streams(i), params, std_per_halfwidth) for i in range(n)]


def sample_equilibrium_array(n: int, params: PhysicalParams, seed: SeedSpec, std_per_halfwidth: float = 1.0) -> np.ndarray:
    """Same draws as :func:`sample_equilibrium`, as an ``(n, 2)`` array."""
    states = sample_equilibrium(n, params, seed, std_per_halfwidth)
    return np.array([(s.z1, s.z2) for s in states], dtype=np.float64)


def generator_metadata() -> dict:
    return {
        "bit_generator": GENERATOR_NAME,
        "stream_derivation": "SeedSequence(master_seed, spawn_key=(label,)) -> Philox key; counter[3] = round_index",
        "numpy": np.__version__,
    }
