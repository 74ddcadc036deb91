"""Fixed-point encoding of real inputs into Z_{2^32}.

encode(x) = floor((x + C) * 2^12), decode(w) = w / 2^12 - C.  A sum of k
encodings decodes with ``decode_sum(w, k)``, which removes the k*C offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

WORD_BITS = 32


@dataclass(frozen=True)
class FixedPointCodec:
    offset: float = float(1 << 10)  # C
    frac_bits: int = 12  # scale 2^12

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def lo(self) -> float:
        return -self.offset

    @property
    def hi(self) -> float:
        """Exclusive upper end of the representable range."""
        return (1 << WORD_BITS) / self.scale - self.offset

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    def max_summands(self, bound: float) -> int:
        """How many encodings of values below ``bound`` fit in one word without wrapping."""
        per = (bound + self.offset) * self.scale
        return int(((1 << WORD_BITS) - 1) // per) if per > 0 else 0

    def encode(self, x) -> np.ndarray:
        a = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise ValueError("input must be finite")
        if np.any(a < self.lo) or np.any(a >= self.hi):
            raise ValueError(f"input outside [{self.lo}, {self.hi})")
        w = np.floor((a + self.offset) * self.scale)
        return np.minimum(w, (1 << WORD_BITS) - 1).astype(np.uint32)

    def decode(self, w) -> np.ndarray:
        return np.asarray(w, dtype=np.uint32).astype(np.float64) / self.scale - self.offset

    def decode_sum(self, w, k: int) -> np.ndarray:
        """Decode the mod-2^32 sum of ``k`` encodings."""
        if k < 0:
            raise ValueError("k must be non-negative")
        return np.asarray(w, dtype=np.uint32).astype(np.float64) / self.scale - k * self.offset

    def encode_scalar(self, x: float) -> int:
        return int(self.encode([x])[0])

    def decode_scalar(self, w: int) -> float:
        return float(self.decode([w])[0])
