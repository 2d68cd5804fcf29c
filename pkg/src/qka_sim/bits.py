"""Fixed-length bit vectors with XOR algebra.

Serialized as "01"-strings, most significant index first (index 0 is the
leftmost character).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np


@dataclass(frozen=True)
class BitString:
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"non-binary content: {self.bits!r}")

    @classmethod
    def from_string(cls, text: str) -> "BitString":
        if any(c not in "01" for c in text):
            raise ValueError(f"not a 01-string: {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls((0,) * n)

    @classmethod
    def random(cls, rng: np.random.Generator, n: int) -> "BitString":
        return cls(tuple(int(b) for b in rng.integers(0, 2, size=n)))

    def __xor__(self, other: "BitString") -> "BitString":
        if len(self) != len(other):
            raise ValueError(f"length mismatch: {len(self)} vs {len(other)}")
        return BitString(tuple(a ^ b for a, b in zip(self.bits, other.bits)))

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, i: int) -> int:
        return self.bits[i]

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)
