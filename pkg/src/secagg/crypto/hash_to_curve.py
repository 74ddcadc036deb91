"""Hash-to-group for P-256 (RFC 9380 suites P256_XMD:SHA-256_SSWU_RO_ / _NU_).

``hash_to_group`` maps arbitrary bytes to a curve point (random-oracle
variant, two field elements); ``encode_to_group`` is the single-map
non-uniform variant at half the cost.  ``group_to_seed`` goes back to a
lambda-bit seed by hashing the compressed encoding.  Clients use the
pipeline to turn a PRF output into something ElGamal can encrypt, and the
server applies the same ``group_to_seed`` after decryption.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

import gmpy2

from .group import A, B, P, Point

DEFAULT_DST = b"SECAGG-V01-CS02-with-P256_XMD:SHA-256_SSWU_RO_"
ENCODE_DST = b"SECAGG-V01-CS02-with-P256_XMD:SHA-256_SSWU_NU_"

_Z = P - 10  # Z = -10 for P-256
_L = 48  # ceil((ceil(log2(p)) + 128) / 8)


def expand_message_xmd(msg: bytes, dst: bytes, len_in_bytes: int) -> bytes:
    b_in_bytes, r_in_bytes = 32, 64
    ell = -(-len_in_bytes // b_in_bytes)
    if ell > 255 or len(dst) > 255 or len_in_bytes > 65535:
        raise ValueError("expand_message_xmd: requested length too large")
    dst_prime = dst + bytes([len(dst)])
    msg_prime = bytes(r_in_bytes) + msg + len_in_bytes.to_bytes(2, "big") + b"\x00" + dst_prime
    b0 = hashlib.sha256(msg_prime).digest()
    b = [hashlib.sha256(b0 + b"\x01" + dst_prime).digest()]
    b0_int = int.from_bytes(b0, "big")
    for i in range(2, ell + 1):
        prev = (b0_int ^ int.from_bytes(b[-1], "big")).to_bytes(32, "big")
        b.append(hashlib.sha256(prev + bytes([i]) + dst_prime).digest())
    return b"".join(b)[:len_in_bytes]


def hash_to_field(msg: bytes, count: int, dst: bytes) -> list[int]:
    uniform = expand_message_xmd(msg, dst, count * _L)
    return [int.from_bytes(uniform[i * _L : (i + 1) * _L], "big") % P for i in range(count)]


_PM = gmpy2.mpz(P)
_AM = gmpy2.mpz(A)
_BM = gmpy2.mpz(B)
_ZM = gmpy2.mpz(_Z)
_C1 = gmpy2.mpz((P - 3) // 4)
_C2 = gmpy2.powmod(P - _Z, (P + 1) // 4, P)  # sqrt(-Z)


def _sqrt_ratio(u, v) -> tuple[bool, int]:
    # RFC 9380 F.2.1.2, the q = 3 (mod 4) variant
    tv1 = v * v % _PM
    tv2 = u * v % _PM
    tv1 = tv1 * tv2 % _PM
    y1 = gmpy2.powmod(tv1, _C1, _PM) * tv2 % _PM
    if y1 * y1 * v % _PM == u:
        return True, y1
    return False, y1 * _C2 % _PM


def map_to_curve_sswu(u: int) -> tuple[int, int]:
    """Simplified SWU map, straight-line form of RFC 9380 F.2 (not constant time)."""
    u = gmpy2.mpz(u)
    tv1 = _ZM * u * u % _PM
    tv2 = (tv1 * tv1 + tv1) % _PM
    tv3 = _BM * (tv2 + 1) % _PM
    tv4 = _AM * (_ZM if tv2 == 0 else _PM - tv2) % _PM
    tv6 = tv4 * tv4 % _PM
    num = (tv3 * tv3 + _AM * tv6) * tv3 % _PM
    tv6 = tv6 * tv4 % _PM
    num = (num + _BM * tv6) % _PM
    is_sq, y1 = _sqrt_ratio(num, tv6)
    if is_sq:
        x, y = tv3, y1
    else:
        x, y = tv1 * tv3 % _PM, tv1 * u % _PM * y1 % _PM
    if (u & 1) != (y & 1):
        y = _PM - y
    x = x * gmpy2.invert(tv4, _PM) % _PM
    return int(x), int(y)


@lru_cache(maxsize=1 << 16)
def hash_to_group(msg: bytes, dst: bytes = DEFAULT_DST) -> Point:
    """Deterministic random-oracle map from bytes to a P-256 point.

    Cached: the function is pure and the protocol hashes the same PRF output
    on both endpoints of a pair.
    """
    u0, u1 = hash_to_field(bytes(msg), 2, dst)
    q0 = Point.from_affine(*map_to_curve_sswu(u0))
    q1 = Point.from_affine(*map_to_curve_sswu(u1))
    return q0 + q1  # cofactor is 1


@lru_cache(maxsize=1 << 16)
def encode_to_group(msg: bytes, dst: bytes = ENCODE_DST) -> Point:
    """Single-map encoding (NU suite).  Not uniform over the group, which is
    fine when ``msg`` is already pseudorandom and only unpredictability of
    the point matters."""
    (u,) = hash_to_field(bytes(msg), 1, dst)
    return Point.from_affine(*map_to_curve_sswu(u))


def group_to_seed(point: Point, nbytes: int = 16) -> bytes:
    """SHA-256 of the compressed encoding, truncated to ``nbytes`` (lambda/8)."""
    return hashlib.sha256(point.to_bytes()).digest()[:nbytes]
