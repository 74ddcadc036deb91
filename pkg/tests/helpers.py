"""Shared fixtures-as-functions for the test modules."""

from __future__ import annotations

import random
from dataclasses import dataclass

from secagg.crypto.group import GENERATOR, IDENTITY, base_mul
from secagg.crypto.keys import ClientKeys, Directory, share_memos
from secagg.crypto.shamir import reconstruct
from secagg.dkg import Fault, Phase, Proxy, Stage, run_dkg
from secagg.params import ProtocolConfig

SMALL = ProtocolConfig(N=40, n=12, d=16, L=4, ell=1, rho=1, T=3, R=2, delta=0.1)


def make_keys(ids, seed: int = 0):
    rng = random.Random(f"tests/keys/{seed}")
    keys = {i: ClientKeys.generate(i, rng) for i in ids}
    share_memos(keys.values())
    return keys, Directory(k.public for k in keys.values())


class StarvingProxy(Proxy):
    """Withholds chosen (phase, sender) broadcasts from chosen receivers."""

    def __init__(self, plan: dict):
        super().__init__()
        self.plan = plan  # (phase, sender) -> frozenset of starved receivers

    def route(self, step, env, parties):
        out = super().route(step, env, parties)
        starved = self.plan.get((env.phase, env.sender))
        return [p for p in out if p not in starved] if starved else out


@dataclass
class DkgTrial:
    L: int
    ell: int
    corrupt: frozenset
    finishers: dict  # honest party -> state
    aborted: dict  # honest party -> abort reason
    secrets: dict  # dealer -> dealt secret

    @property
    def outcome(self) -> str:
        if not self.finishers:
            return "all-abort"
        return "all-finish" if not self.aborted else "mixed"


def random_dkg_trial(keys, directory, seed: int) -> DkgTrial:
    """One DKG run with up to ell faulty dealers and a randomly starving proxy."""
    rng = random.Random(f"tests/dkg-trial/{seed}")
    L = rng.choice((4, 7, 10))
    ell = (L - 1) // 3
    parties = sorted(rng.sample(sorted(keys), L))
    corrupt = frozenset(rng.sample(parties, rng.randint(0, ell)))
    faults = {}
    for d in corrupt:
        kind = rng.choice(("bad-share", "refuse", "feldman", "silent", "bad-share+refuse"))
        victims = frozenset(rng.sample(parties, rng.randint(1, L - 1)))
        faults[d] = Fault(
            bad_share_to=victims if kind.startswith("bad-share") else frozenset(),
            refuse_reveal=kind.endswith("refuse"),
            bad_feldman=kind == "feldman",
            silent=kind == "silent",
        )
    plan = {}
    if rng.random() < 0.7:
        for _ in range(rng.randint(1, 3)):
            phase = rng.choice(list(Phase))
            sender = rng.choice(parties)
            plan[(phase, sender)] = frozenset(rng.sample(parties, rng.randint(1, L // 2)))
    res = run_dkg(keys, directory, parties, ell, 0.1, rng, StarvingProxy(plan), faults)
    honest = [p for p in parties if p not in corrupt]
    fin = {p: res.states[p] for p in honest if res.states[p].stage == Stage.DONE}
    ab = {p: res.states[p].abort for p in honest if res.states[p].stage != Stage.DONE}
    secrets = {p: s.dealing.poly[0] for p, s in res.states.items() if s.dealing is not None}
    return DkgTrial(L, ell, corrupt, fin, ab, secrets)


def check_dkg_trial(trial: DkgTrial) -> list[str]:
    """Agreement properties of one trial; returns the violated ones."""
    bad = []
    fin = trial.finishers
    if not fin:
        return bad
    quals = {s.qual for s in fin.values()}
    pks = {s.public_key for s in fin.values()}
    if len(quals) != 1:
        bad.append("finishers disagree on QUAL")
    if len(pks) != 1:
        bad.append("finishers disagree on PK")
    if bad:
        return bad
    (qual,) = quals
    (pk,) = pks
    expected = IDENTITY
    for d in qual:
        expected = expected + base_mul(trial.secrets[d])
    if pk != expected:
        bad.append("PK != g^(sum of QUAL secrets)")
    if len(qual) < trial.ell + 1:
        bad.append("QUAL smaller than ell + 1")
    # any ell + 1 finisher shares define the key behind PK
    pos = {p: s.position for p, s in fin.items()}
    ids = sorted(fin)
    if len(ids) >= trial.ell + 1:
        pts = {pos[p]: fin[p].share for p in ids[: trial.ell + 1]}
        if base_mul(reconstruct(pts, trial.ell)) != pk:
            bad.append("finisher shares do not reconstruct SK")
    for p, s in fin.items():
        if s.verification_keys.get(p) != GENERATOR * s.share:
            bad.append(f"verification key of {p} does not match its share")
            break
    return bad
