"""Counter-based random streams.

A :class:`Stream` is identified by a master seed plus an integer scenario
path.  Draws for a given ``(round, purpose)`` come from a Philox generator
whose key encodes the scenario and whose counter encodes round and purpose,
so any round can be regenerated in isolation and parallel workers never
share or reorder draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np


class Purpose(IntEnum):
    CONTEXT = 0
    OBSERVATION_NOISE = 1
    REWARD_NOISE = 2
    INSTANCE = 3
    VERIFY = 4
    ESTIMATOR = 5


@dataclass(frozen=True)
class Stream:
    master_seed: int
    scenario: tuple[int, ...] = ()
    _key: np.ndarray = field(init=False, repr=False, compare=False)
    _scratch: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        scenario = tuple(int(s) for s in self.scenario)
        object.__setattr__(self, "scenario", scenario)
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=scenario)
        object.__setattr__(self, "_key", ss.generate_state(2, dtype=np.uint64))

    def child(self, *ids: int) -> "Stream":
        return Stream(self.master_seed, self.scenario + tuple(ids))

    def _counter(self, round: int, purpose: int) -> np.ndarray:
        # counter words 0-1 advance with each block drawn; 2-3 carry the address
        return np.array([0, 0, int(round), int(purpose)], dtype=np.uint64)

    def generator(self, round: int = 0, purpose: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self._key, counter=self._counter(round, purpose)))

    def standard_normal(self, round: int, purpose: int, shape) -> np.ndarray:
        """Same values as ``generator(round, purpose).standard_normal(shape)``.

        Reuses one bit generator per stream and rewinds its state, which is
        several times cheaper than building a fresh Philox each call.  Not
        safe to share a stream between threads.
        """
        if self._scratch is None:
            object.__setattr__(self, "_scratch", np.random.Generator(np.random.Philox(key=self._key)))
        self._scratch.bit_generator.state = {
            "bit_generator": "Philox",
            "state": {"counter": self._counter(round, purpose), "key": self._key},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self._scratch.standard_normal(shape)
