"""Transcript audit: can the adversary unmask an honest client's input?

For every honest client i that reported in round t the audit asks two
questions about the adversary's view (everything routed through the
server plus the state of the corrupted clients):

* is m_{i,t} recoverable?  Yes when ell + 1 distinct decryptors either
  revealed their genuine share of it (robust mode: a genuine partial
  decryption of its ciphertext) or are corrupted;
* is h_{i,j,t} recoverable for every neighbour j?  Yes when j is corrupted
  or when ell + 1 decryptors (revealing or corrupted) are available for one
  of the two ciphertexts of P_{i,j,t}.

A client for which both hold is a violation.  Genuineness is judged
against ground truth that only the simulator has (the clients' secrets
and the decryptors' key shares).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto.group import Point
from ..graph import RoundGraph
from ..protocol.client import MASK_PEER, ReportSecrets
from ..protocol.messages import DecryptorResponse, MaskedVector


@dataclass
class RoundLog:
    t: int
    graph: RoundGraph = field(repr=False)
    decryptors: tuple[int, ...]
    shares: dict[int, int] = field(repr=False)  # decryptor -> key share in this round
    ell: int
    robust: bool
    secrets: dict[int, ReportSecrets] = field(default_factory=dict, repr=False)
    sent: dict[int, MaskedVector] = field(default_factory=dict, repr=False)  # as sent by the client
    responses: list[DecryptorResponse] = field(default_factory=list, repr=False)  # all sent to the server


@dataclass
class AuditResult:
    checked: int = 0  # (client, round) pairs examined
    m_recoverable: int = 0
    violations: list[tuple[int, int]] = field(default_factory=list)  # (client, round)

    @property
    def ok(self) -> bool:
        return not self.violations


def _genuine_partial(partial: Point, c0: Point, share: int | None) -> bool:
    return share is not None and partial == c0 * share


class _Revealed:
    """Index of the partial decryptions and shares handed to the server."""

    def __init__(self, logs):
        self.partials: dict[tuple[int, int], list[tuple[int, Point, int | None]]] = {}
        self.shares: dict[int, list[tuple[int, int]]] = {}
        for log in logs:
            for resp in log.responses:
                s_u = log.shares.get(resp.decryptor)
                for key, p in resp.partials.items():
                    self.partials.setdefault(key, []).append((resp.decryptor, p, s_u))
                for i, v in resp.shares.items():
                    self.shares.setdefault(i, []).append((resp.decryptor, v))

    def decryptors_on(self, keys, c0: Point) -> set:
        who = set()
        for key in keys:
            for u, p, s_u in self.partials.get(key, ()):
                if u not in who and _genuine_partial(p, c0, s_u):
                    who.add(u)
        return who


def audit(logs, corrupted) -> AuditResult:
    corrupted = frozenset(corrupted)
    rev = _Revealed(logs)
    out = AuditResult()
    for log in logs:
        bad_dec = corrupted & set(log.decryptors)
        for i, sec in sorted(log.secrets.items()):
            if i in corrupted:
                continue
            out.checked += 1
            if log.robust:
                mv = log.sent.get(i)
                ct = mv.mask.ct if mv is not None and mv.mask is not None else None
                who = rev.decryptors_on([(i, MASK_PEER)], ct.c0) if ct is not None else set()
            else:
                who = {u for u, v in rev.shares.get(i, ()) if sec.m_shares.get(u) == v}
            if len(who | bad_dec) < log.ell + 1:
                continue
            out.m_recoverable += 1
            if all(_pair_recoverable(log, rev, i, j, corrupted, bad_dec) for j in sorted(sec.neighbors)):
                out.violations.append((i, log.t))
    return out


def _pair_recoverable(log: RoundLog, rev: _Revealed, i: int, j: int, corrupted, bad_dec) -> bool:
    if j in corrupted:
        return True
    # P_{i,j,t} travels in two ciphertexts: i's (peer j) and j's (peer i)
    for owner, peer in ((i, j), (j, i)):
        mv = log.sent.get(owner)
        if mv is None:
            continue
        for sc in mv.pairs:
            if sc.peer == peer and sc.t == log.t:
                who = rev.decryptors_on([(i, j), (j, i)], sc.ct.c0)
                if len(who | bad_dec) >= log.ell + 1:
                    return True
    return False
