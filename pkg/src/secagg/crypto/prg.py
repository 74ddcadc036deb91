"""PRG and PRF.

PRG: AES in counter mode keyed by the seed (AES-128 for 16-byte seeds,
AES-256 for 32-byte ones) with an all-zero initial counter block.  The
keystream is read as little-endian unsigned 32-bit words.

PRF: HMAC-SHA256 truncated to the key length, so a lambda-bit key gives a
lambda-bit output that can itself be used as a seed.
"""

from __future__ import annotations

import ctypes
import hashlib
import hmac
import threading

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from ._native import libcrypto

LAMBDA_BYTES = 16
_ZERO_IV = bytes(16)


def _ctr_cryptography(seed: bytes, nbytes: int) -> bytes:
    enc = Cipher(algorithms.AES(seed), modes.CTR(_ZERO_IV)).encryptor()
    return enc.update(bytes(nbytes))


class _EvpCtr:
    """AES-CTR through libcrypto's EVP interface.

    Same keystream as ``_ctr_cryptography`` without constructing a cipher
    object per call, which dominates the cost for kilobyte outputs.
    """

    def __init__(self, lib):
        vp = ctypes.c_void_p
        for name, res, args in (
            ("EVP_CIPHER_CTX_new", vp, []),
            ("EVP_aes_128_ctr", vp, []),
            ("EVP_aes_256_ctr", vp, []),
            ("EVP_EncryptInit_ex", ctypes.c_int, [vp, vp, vp, ctypes.c_char_p, ctypes.c_char_p]),
            (
                "EVP_EncryptUpdate",
                ctypes.c_int,
                [vp, ctypes.c_char_p, ctypes.POINTER(ctypes.c_int), ctypes.c_char_p, ctypes.c_int],
            ),
        ):
            fn = getattr(lib, name)
            fn.restype = res
            fn.argtypes = args
        self._lib = lib
        self._ciphers = {16: lib.EVP_aes_128_ctr(), 32: lib.EVP_aes_256_ctr()}
        self._local = threading.local()

    def __call__(self, seed: bytes, nbytes: int) -> bytes:
        loc = self._local
        ctx = getattr(loc, "ctx", None)
        if ctx is None:
            ctx = loc.ctx = self._lib.EVP_CIPHER_CTX_new()
            loc.zeros = b""
        if len(loc.zeros) < nbytes:
            loc.zeros = bytes(nbytes)
        out = ctypes.create_string_buffer(nbytes)
        outl = ctypes.c_int(0)
        if not self._lib.EVP_EncryptInit_ex(ctx, self._ciphers[len(seed)], None, seed, _ZERO_IV):
            raise RuntimeError("EVP_EncryptInit_ex failed")
        self._lib.EVP_EncryptUpdate(ctx, out, ctypes.byref(outl), loc.zeros, nbytes)
        return out.raw


def _select_ctr():
    lib = libcrypto()
    if lib is None:
        return _ctr_cryptography
    try:
        evp = _EvpCtr(lib)
        probe = bytes(range(16))
        if evp(probe, 100) == _ctr_cryptography(probe, 100):
            return evp
    except (AttributeError, OSError, RuntimeError):
        pass
    return _ctr_cryptography


_ctr = _select_ctr()


def check_seed(seed: bytes, nbytes: int = LAMBDA_BYTES) -> bytes:
    if not isinstance(seed, (bytes, bytearray)) or len(seed) != nbytes:
        raise ValueError(f"seed must be exactly {nbytes} bytes")
    return bytes(seed)


def prg_bytes(seed: bytes, nbytes: int) -> bytes:
    if len(seed) not in (16, 32):
        raise ValueError("seed must be 16 or 32 bytes")
    if nbytes <= 0:
        return b""
    return _ctr(bytes(seed), nbytes)


def prg(seed: bytes, out_len: int) -> np.ndarray:
    """Expand ``seed`` to ``out_len`` words of Z_{2^32}."""
    return np.frombuffer(prg_bytes(seed, 4 * out_len), dtype="<u4").astype(np.uint32)


def prf(key: bytes, data: bytes) -> bytes:
    return hmac.digest(key, data, "sha256")[: len(key)]


def round_tag(t: int) -> bytes:
    """Canonical 8-byte big-endian round tag."""
    return int(t).to_bytes(8, "big")


def seed_with_model(seed: bytes, model_hash: bytes | None) -> bytes:
    """Bind a PRG seed to a model digest: H(seed || Hash(M)) cut to the seed length.

    ``model_hash=None`` returns the seed unchanged.
    """
    if model_hash is None:
        return seed
    return hashlib.sha256(seed + model_hash).digest()[: len(seed)]
