"""Plaintext, non-private baseline: the server simply adds what it receives.

It serves as the correctness oracle for the secure rounds and as the
comparison point for cost measurements.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np


def plaintext_sum(inputs: Mapping[int, np.ndarray], cohort: Iterable[int], d: int | None = None) -> np.ndarray:
    """sum_{i in cohort} x_i mod 2^32."""
    cohort = sorted(cohort)
    if d is None:
        if not cohort:
            raise ValueError("need d for an empty cohort")
        d = len(inputs[cohort[0]])
    acc = np.zeros(d, dtype=np.uint32)
    for i in cohort:
        acc += np.asarray(inputs[i], dtype=np.uint32)
    return acc


def plaintext_bytes(n_reports: int, d: int) -> int:
    """Upload volume of the baseline round: one id and one vector per client."""
    return n_reports * (4 + 4 * d)
