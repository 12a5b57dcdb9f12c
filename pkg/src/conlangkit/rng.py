"""Labelled, seeded random streams.

Each stream is a pure function of ``(seed, stream_label)``: the label is
hashed into the numpy ``SeedSequence`` entropy, so streams with different
labels are independent and adding draws to one never shifts another.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

__all__ = ["SeededRng", "ChecklistSelection", "draw_selection", "N_FEATURES", "N_OPTIONS"]

N_FEATURES = 10
N_OPTIONS = 5


@dataclass(frozen=True)
class SeededRng:
    seed: int
    stream_label: str

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def entropy(self) -> list[int]:
        digest = hashlib.sha256(self.stream_label.encode("utf-8")).digest()
        label_words = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
        return [self.seed & 0xFFFFFFFF, self.seed >> 32, *label_words]

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of the stream."""
        return np.random.default_rng(np.random.SeedSequence(self.entropy()))


@dataclass(frozen=True)
class ChecklistSelection:
    choices: tuple[int, ...]

    def __post_init__(self):
        choices = tuple(int(c) for c in self.choices)
        if len(choices) != N_FEATURES or any(not 1 <= c <= N_OPTIONS for c in choices):
            raise ValueError(f"selection must be {N_FEATURES} integers in 1..{N_OPTIONS}, got {choices}")
        object.__setattr__(self, "choices", choices)


def draw_selection(rng: SeededRng) -> ChecklistSelection:
    """Ten independent uniform draws from 1..5, the first draws of the stream."""
    values = rng.generator().integers(1, N_OPTIONS + 1, size=N_FEATURES)
    return ChecklistSelection(tuple(values.tolist()))
