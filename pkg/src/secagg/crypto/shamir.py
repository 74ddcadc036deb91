"""Shamir secret sharing over a prime field (Z_q of P-256 by default)."""

from __future__ import annotations

import secrets
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .group import ORDER, random_scalar


class InsufficientShares(ValueError):
    pass


class DuplicateIndex(ValueError):
    pass


@dataclass(frozen=True)
class Share:
    index: int
    value: int

    def to_bytes(self) -> bytes:
        return self.index.to_bytes(4, "big") + self.value.to_bytes(32, "big")

    @classmethod
    def from_bytes(cls, data: bytes) -> "Share":
        if len(data) != 36:
            raise ValueError("share encoding is 36 bytes")
        return cls(int.from_bytes(data[:4], "big"), int.from_bytes(data[4:], "big"))


def eval_poly(coeffs: Sequence[int], x: int, modulus: int = ORDER) -> int:
    """Horner evaluation; ``coeffs[0]`` is the constant term."""
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % modulus
    return acc


def random_poly(secret: int, degree: int, rng=None, modulus: int = ORDER) -> list[int]:
    if modulus == ORDER:
        rest = [random_scalar(rng) for _ in range(degree)]
    else:
        rest = [rng.randrange(modulus) if rng else secrets.randbelow(modulus) for _ in range(degree)]
    return [secret % modulus] + rest


def share(
    secret: int,
    threshold: int,
    count: int,
    rng=None,
    modulus: int = ORDER,
    coeffs: Sequence[int] | None = None,
) -> list[Share]:
    """Split ``secret`` so that any ``threshold + 1`` of ``count`` shares recover it.

    ``coeffs`` fixes the non-constant coefficients (for tests); otherwise
    they are sampled uniformly.
    """
    if threshold >= count:
        raise ValueError("threshold must be smaller than the share count")
    if count >= modulus:
        raise ValueError("share count must be below the field size")
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    if coeffs is None:
        poly = random_poly(secret, threshold, rng, modulus)
    else:
        if len(coeffs) != threshold:
            raise ValueError("need exactly `threshold` non-constant coefficients")
        poly = [secret % modulus] + [c % modulus for c in coeffs]
    return [Share(j, eval_poly(poly, j, modulus)) for j in range(1, count + 1)]


def lagrange_coefficients(indices: Iterable[int], modulus: int = ORDER, at: int = 0) -> dict[int, int]:
    """beta_u for interpolation at ``at`` over the given x-coordinates."""
    xs = list(indices)
    if len(set(xs)) != len(xs):
        raise DuplicateIndex("duplicate share index")
    out = {}
    for i in xs:
        num, den = 1, 1
        for j in xs:
            if j != i:
                num = num * (at - j) % modulus
                den = den * (i - j) % modulus
        out[i] = num * pow(den, -1, modulus) % modulus
    return out


def reconstruct(shares: Iterable[Share] | Mapping[int, int], threshold: int, modulus: int = ORDER) -> int:
    """Lagrange interpolation at 0; needs at least ``threshold + 1`` shares."""
    pairs = list(shares.items()) if isinstance(shares, Mapping) else [(s.index, s.value) for s in shares]
    idx = [i for i, _ in pairs]
    if len(set(idx)) != len(idx):
        raise DuplicateIndex("duplicate share index")
    if len(pairs) < threshold + 1:
        raise InsufficientShares(f"need {threshold + 1} shares, got {len(pairs)}")
    beta = lagrange_coefficients(idx, modulus)
    return sum(beta[i] * v for i, v in pairs) % modulus


def interpolate_coefficients(points: Mapping[int, int], modulus: int = ORDER) -> list[int]:
    """Recover all coefficients of the unique polynomial of degree < len(points)."""
    xs = list(points)
    n = len(xs)
    coeffs = [0] * n
    for i in xs:
        # basis polynomial prod_{j != i} (X - x_j) / (x_i - x_j)
        basis = [1]
        den = 1
        for j in xs:
            if j == i:
                continue
            basis = [(a - j * b) % modulus for a, b in zip([0] + basis, basis + [0])]
            den = den * (i - j) % modulus
        scale = points[i] * pow(den, -1, modulus) % modulus
        for k in range(n):
            coeffs[k] = (coeffs[k] + scale * basis[k]) % modulus
    return coeffs
