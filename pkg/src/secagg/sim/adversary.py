"""Adversary scripts.  They act only through three hooks:

on_send     a corrupted client alters one of its own outgoing messages
on_route    the server alters what it computes or forwards in a step
on_deliver  the server discards a message addressed to it

plus ``dkg_proxy`` for the routing of the setup messages.  The corrupted
client set is fixed once per session, before the first round.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace
from typing import Sequence

from ..crypto.group import GENERATOR, ORDER
from ..dkg import Envelope, Phase, Proxy
from ..protocol.messages import DecryptionRequest, DecryptorResponse, MaskedVector, RequestBundle
from ..protocol.server import build_bundles

SERVER_BEHAVIORS = ("honest", "equivocate-labels", "replay-cross-round", "split-qual", "drop-messages")
CLIENT_BEHAVIORS = ("honest", "bad-shares", "bad-partials")


@dataclass
class RoundView:
    """What the server holds while a round is running."""

    t: int
    graph: object
    decryptors: tuple[int, ...]
    robust: bool
    ell: int
    previous: object = None  # CollectResult of the previous round


class AdversaryScript:
    name = "honest"
    server_behavior = "honest"
    client_behavior = "honest"
    corrupt_decryptors = 0  # how many of the initial decryptors the script corrupts
    needs_robust = False  # the expected outcome assumes robust mode

    def __init__(self, corrupted: Sequence[int] | None = None, seed: int = 0):
        self._fixed = None if corrupted is None else frozenset(corrupted)
        self.corrupted: frozenset = self._fixed or frozenset()
        self.rng = random.Random(f"secagg/adversary/{self.name}/{seed}")

    @property
    def malicious_server(self) -> bool:
        return self.server_behavior != "honest"

    def bind(self, world, decryptors: Sequence[int]) -> None:
        """Pick 𝒞 (|𝒞| <= floor(eta*N)) unless it was given explicitly."""
        if self._fixed is not None:
            self.corrupted = self._fixed
            return
        if self.client_behavior == "honest":
            self.corrupted = frozenset()
            return
        cfg = world.cfg
        budget = max(1, int(cfg.eta * cfg.N))
        chosen = set(sorted(decryptors)[: min(self.corrupt_decryptors, budget)])
        rest = [i for i in range(1, cfg.N + 1) if i not in chosen]
        chosen.update(self.rng.sample(rest, budget - len(chosen)))
        self.corrupted = frozenset(chosen)

    # hooks -----------------------------------------------------------------

    def on_send(self, kind: str, sender: int, receiver: int, payload, view: RoundView):
        """Returns (payload, tampered)."""
        return payload, False

    def on_route(self, step: str, data, view: RoundView):
        return data

    def on_deliver(self, kind: str, sender: int, payload, view: RoundView) -> bool:
        return True

    def dkg_proxy(self, parties: Sequence[int]) -> Proxy:
        return Proxy()


class Honest(AdversaryScript):
    pass


class EquivocateLabels(AdversaryScript):
    """Tell half of the decryptors that an online client went offline.

    The half that sees it offline would partially decrypt that client's
    pairwise seeds while the other half hands out shares of its individual
    mask: together they would unmask the client's input.
    """

    name = server_behavior = "equivocate-labels"

    def on_route(self, step, data, view):
        if step != "bundles":
            return data
        collect = data
        req = collect.request
        online = sorted(req.online())
        victims = [i for i in online if view.graph.neighbors(i) & req.online()]
        if not victims:
            return collect.bundles
        victim = victims[0]
        other = DecryptionRequest.build(req.t, view.graph.members, set(online) - {victim}, req.server)
        forged = build_bundles(other, collect.reports, view.graph, view.decryptors, view.robust)
        dec = view.decryptors
        out = dict(collect.bundles)
        for u in dec[len(dec) // 2 :]:
            out[u] = forged[u]
        return out


class ReplayCrossRound(AdversaryScript):
    """Slip last round's ciphertexts into this round's bundles, ahead of the fresh ones."""

    name = server_behavior = "replay-cross-round"

    def on_route(self, step, data, view):
        if step != "bundles":
            return data
        collect = data
        prev = view.previous
        if prev is None:
            return collect.bundles
        dec = view.decryptors
        out = {}
        for pos, u in enumerate(dec):
            atts = []
            for att in collect.bundles[u].attachments:
                i = att.client
                stale_cts = tuple(p for r in prev.reports.values() for p in r.pairs if p.peer == i)
                old = prev.reports.get(i)
                if att.ciphertexts and stale_cts:
                    att = replace(att, ciphertexts=stale_cts + att.ciphertexts)
                if old is not None and pos < view.ell:
                    if att.share and old.shares:
                        att = replace(att, share=old.shares[pos])
                    elif old.mask is not None and att.ciphertexts:
                        att = replace(att, ciphertexts=(old.mask,) + att.ciphertexts)
                atts.append(att)
            out[u] = RequestBundle(collect.bundles[u].request, tuple(atts))
        return out


class SplitQualProxy(Proxy):
    """Withhold one dealer's commitments from half of the parties."""

    def __init__(self, victim: int, starved: frozenset):
        super().__init__()
        self.victim = victim
        self.starved = starved

    def route(self, step: int, env: Envelope, parties):
        out = super().route(step, env, parties)
        if env.phase == Phase.COMMIT and env.sender == self.victim:
            out = [p for p in out if p not in self.starved]
        return out


class SplitQual(AdversaryScript):
    name = server_behavior = "split-qual"

    def dkg_proxy(self, parties):
        ps = sorted(parties)
        victim = ps[0]
        return SplitQualProxy(victim, frozenset(ps[len(ps) // 2 :]))


class DropMessages(AdversaryScript):
    """Discard some reports (within the dropout budget) and the first response."""

    name = server_behavior = "drop-messages"

    def __init__(self, corrupted=None, seed: int = 0, reports: int = 1, responses: int = 1):
        super().__init__(corrupted, seed)
        self.reports = reports
        self.responses = responses
        self._seen: dict = {}

    def on_deliver(self, kind, sender, payload, view):
        key = (view.t, kind)
        n = self._seen.get(key, 0)
        limit = {"report": self.reports, "response": self.responses}.get(kind, 0)
        if n < limit:
            self._seen[key] = n + 1
            return False
        return True


class BadShares(AdversaryScript):
    """Corrupted clients send garbage share ciphertexts to ell decryptors."""

    name = client_behavior = "bad-shares"

    def on_send(self, kind, sender, receiver, payload, view):
        if kind != "report" or sender not in self.corrupted or not isinstance(payload, MaskedVector):
            return payload, False
        ell = view.ell
        shares = tuple(
            bytes(self.rng.getrandbits(8) for _ in range(len(s))) if pos < ell else s
            for pos, s in enumerate(payload.shares)
        )
        return replace(payload, shares=shares), True


class BadPartials(AdversaryScript):
    """Corrupted decryptors shift every partial decryption (and share) they return."""

    name = client_behavior = "bad-partials"
    corrupt_decryptors = 1
    needs_robust = True

    def on_send(self, kind, sender, receiver, payload, view):
        if kind != "response" or sender not in self.corrupted or not isinstance(payload, DecryptorResponse):
            return payload, False
        bad = DecryptorResponse(payload.decryptor, payload.t)
        bad.shares = {i: (v + 1) % ORDER for i, v in payload.shares.items()}
        bad.partials = {k: p + GENERATOR for k, p in payload.partials.items()}
        bad.proofs = dict(payload.proofs)
        return bad, True


SCRIPTS: dict[str, type[AdversaryScript]] = {
    cls.name: cls for cls in (Honest, EquivocateLabels, ReplayCrossRound, SplitQual, DropMessages, BadShares, BadPartials)
}

# the outcome each script is expected to produce
EXPECTED = {
    "honest": "sum-ok",
    "equivocate-labels": "abort:quorum",
    "replay-cross-round": "sum-ok",
    "split-qual": "setup-abort",
    "drop-messages": "sum-ok",
    "bad-shares": "sum-ok",
    "bad-partials": "sum-ok",  # robust mode; without proofs the sum is wrong
}


def make_script(name: str, corrupted=None, seed: int = 0) -> AdversaryScript:
    try:
        cls = SCRIPTS[name]
    except KeyError:
        raise ValueError(f"unknown script {name!r}; choose from {', '.join(SCRIPTS)}") from None
    return cls(corrupted, seed)

