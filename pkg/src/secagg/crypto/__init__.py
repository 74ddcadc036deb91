"""Cryptographic building blocks."""

from .aead import AuthenticationError, RoundMismatch, open_sealed, seal
from .elgamal import (
    Ciphertext,
    DegenerateValue,
    decrypt,
    encrypt,
    keygen,
    partial_decrypt,
    threshold_combine,
)
from .group import GENERATOR, IDENTITY, ORDER, Point, base_mul, multi_mul, random_scalar
from .hash_to_curve import encode_to_group, group_to_seed, hash_to_group
from .keys import ClientKeys, Directory, PublicKeys
from .prg import prf, prg, round_tag
from .shamir import DuplicateIndex, InsufficientShares, Share, lagrange_coefficients, reconstruct, share
from .signing import SigningKey, VerifyKey

# operation-name aliases
shamir_share = share
shamir_recon = reconstruct
elgamal_keygen = keygen
elgamal_encrypt = encrypt
elgamal_decrypt = decrypt
aead_encrypt = seal
aead_decrypt = open_sealed
