"""Simulated population: long-term keys (the PKI oracle) and per-session state."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from ..crypto.group import FixedBase, Point
from ..crypto.keys import ClientKeys, Directory, share_memos
from ..params import ProtocolConfig, check
from .network import DelayModel


@dataclass
class World:
    """N clients with registered keys.  Sessions on one world share the PKI."""

    cfg: ProtocolConfig
    keys: dict[int, ClientKeys] = field(repr=False)
    directory: Directory = field(repr=False)
    delay: DelayModel = DelayModel()
    seed: int = 0
    rounds_used: int = 0  # global round counter, so sessions never reuse a round tag

    @classmethod
    def build(cls, cfg: ProtocolConfig, seed: int = 0, delay: DelayModel | None = None) -> "World":
        cfg = check(cfg)
        rng = random.Random(f"secagg/world/{seed}")
        keys = {i: ClientKeys.generate(i, rng) for i in range(1, cfg.N + 1)}
        share_memos(keys.values())
        directory = Directory(k.public for k in keys.values())
        return cls(cfg, keys, directory, delay or DelayModel(), seed)


@dataclass
class Session:
    """Setup output plus the mutable state carried from round to round."""

    world: World = field(repr=False)
    seed: int
    v: bytes
    decryptors: tuple[int, ...]
    shares: dict[int, int] = field(repr=False)  # decryptor -> share of SK
    verification_keys: dict[int, Point] = field(repr=False)
    public_key: Point
    round_offset: int = 0
    epoch: int = 0
    clock_us: int = 0
    model_hash: bytes | None = None
    keep_trace: bool = True
    rng: random.Random = field(default=None, repr=False)  # protocol randomness
    net_rng: random.Random = field(default=None, repr=False)  # delays
    inputs: np.random.Generator = field(default=None, repr=False)
    pk_table: FixedBase = field(default=None, repr=False)
    last_collect: object = field(default=None, repr=False)  # previous round's CollectResult
    logs: list = field(default_factory=list, repr=False)  # per-round audit records
    trace: list = field(default_factory=list, repr=False)  # SimEvents of all rounds

    def __post_init__(self):
        if self.rng is None:
            self.rng = random.Random(f"secagg/session/{self.seed}/protocol")
        if self.net_rng is None:
            self.net_rng = random.Random(f"secagg/session/{self.seed}/network")
        if self.inputs is None:
            self.inputs = np.random.default_rng([self.seed, 0x5EC])
        if self.pk_table is None:
            self.pk_table = FixedBase(self.public_key)

    @property
    def cfg(self) -> ProtocolConfig:
        return self.world.cfg

    def global_round(self, t: int) -> int:
        return self.round_offset + t
