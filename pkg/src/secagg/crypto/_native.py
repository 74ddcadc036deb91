"""Locate the system libcrypto for the ctypes fast paths."""

from __future__ import annotations

import ctypes
import ctypes.util
from functools import lru_cache


@lru_cache(maxsize=None)
def libcrypto() -> ctypes.CDLL | None:
    for cand in (ctypes.util.find_library("crypto"), "libcrypto.so.3", "libcrypto.so"):
        if not cand:
            continue
        try:
            return ctypes.CDLL(cand)
        except OSError:
            continue
    return None
