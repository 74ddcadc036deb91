"""Verifiable secret sharing, proxy-routed DKG and proactive share transfer.

The DKG is GJKR-style: every dealer Pedersen-shares a random secret, parties
complain about bad shares, dealers answer complaints in public, and the set
QUAL of surviving dealers must be confirmed by 2*ell + 1 identical signed
copies before anyone keeps a share.  Only then are Feldman commitments
revealed so PK = g^{sum of QUAL secrets} can be computed; a dealer whose
Feldman commitments do not match its Pedersen-committed shares is
reconstructed from the other parties' shares.

All traffic goes through an untrusted proxy (the server).  Point-to-point
shares are AES-GCM encrypted under the DH channel key and every message is
signed, so the proxy can drop, delay, reorder and selectively deliver but
cannot forge.

``dkg_step(state, inbox) -> (state', outbox)`` is a pure transition: all
randomness is drawn when the state is created.  The same state machine runs
share transfer, where old decryptors re-share their shares of SK to a new
decryptor set and new shares are Lagrange-combined.
"""

from __future__ import annotations

import copy
import enum
import hashlib
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

from .crypto import aead
from .crypto.group import GENERATOR, IDENTITY, ORDER, Point, base_mul, multi_mul, random_scalar
from .crypto.hash_to_curve import hash_to_group
from .crypto.keys import ClientKeys, Directory
from .crypto.shamir import eval_poly, interpolate_coefficients, lagrange_coefficients, random_poly

PEDERSEN_H = hash_to_group(b"secagg/pedersen-h")

# ---------------------------------------------------------------------------
# Feldman / Pedersen VSS
# ---------------------------------------------------------------------------


def _powers(j: int, count: int) -> list[int]:
    out, acc = [], 1
    for _ in range(count):
        out.append(acc)
        acc = acc * j % ORDER
    return out


def commit_eval(commitments: Sequence[Point], j: int) -> Point:
    """prod_k C_k^{j^k}."""
    return _commit_eval(tuple(commitments), j)


@lru_cache(maxsize=1 << 14)
def _commit_eval(commitments: tuple, j: int) -> Point:
    # pure in public values; every party evaluates the same commitments
    return multi_mul(zip(_powers(j, len(commitments)), commitments))


def fshare(secret: int, ell: int, L: int, rng=None, poly: Sequence[int] | None = None):
    """Feldman VSS: shares {j: p(j)} and commitments A_k = g^{a_k}."""
    if ell >= L:
        raise ValueError("threshold must be smaller than the share count")
    p = list(poly) if poly is not None else random_poly(secret, ell, rng)
    shares = {j: eval_poly(p, j) for j in range(1, L + 1)}
    return shares, [base_mul(a) for a in p]


def fverify(j: int, s_j: int, commitments: Sequence[Point]) -> bool:
    try:
        return base_mul(s_j) == commit_eval(commitments, j)
    except (TypeError, ValueError):
        return False


def pshare(secret: int, ell: int, L: int, rng=None, poly=None, aux_poly=None):
    """Pedersen VSS: shares, auxiliary shares and C_k = g^{a_k} h^{b_k}."""
    if ell >= L:
        raise ValueError("threshold must be smaller than the share count")
    p = list(poly) if poly is not None else random_poly(secret, ell, rng)
    q = list(aux_poly) if aux_poly is not None else random_poly(random_scalar(rng), ell, rng)
    shares = {j: eval_poly(p, j) for j in range(1, L + 1)}
    aux = {j: eval_poly(q, j) for j in range(1, L + 1)}
    comms = [multi_mul([(a, GENERATOR), (b, PEDERSEN_H)]) for a, b in zip(p, q)]
    return shares, aux, comms


def pverify(j: int, s_j: int, aux_j: int, commitments: Sequence[Point]) -> bool:
    try:
        lhs = multi_mul([(s_j, GENERATOR), (aux_j, PEDERSEN_H)])
        return lhs == commit_eval(commitments, j)
    except (TypeError, ValueError):
        return False


@dataclass(frozen=True)
class VssDealing:
    dealer: int
    shares: Mapping[int, int]
    aux_shares: Mapping[int, int]
    pedersen: tuple[Point, ...]
    feldman: tuple[Point, ...]
    poly: tuple[int, ...] = field(repr=False)

    @classmethod
    def create(cls, dealer: int, secret: int, ell: int, receivers: int, rng=None) -> "VssDealing":
        p = random_poly(secret, ell, rng)
        shares, aux, comms = pshare(secret, ell, receivers, rng, poly=p)
        feld = [base_mul(a) for a in p]
        return cls(dealer, shares, aux, tuple(comms), tuple(feld), tuple(p))


# ---------------------------------------------------------------------------
# messages
# ---------------------------------------------------------------------------


class Phase(enum.IntEnum):
    DEAL = 1
    COMMIT = 2
    COMPLAINT = 3
    REVEAL = 4
    QUAL = 5
    FELDMAN = 6
    FCOMPLAINT = 7
    RECON = 8
    PK = 9


BROADCAST = 0


@dataclass(frozen=True)
class Envelope:
    """A signed message routed by the proxy. receiver 0 means broadcast."""

    session: bytes
    phase: Phase
    sender: int
    receiver: int
    payload: bytes
    sig: bytes = b""

    def signed_bytes(self) -> bytes:
        return (
            b"secagg/dkg"
            + self.session
            + bytes([int(self.phase)])
            + self.sender.to_bytes(4, "big")
            + self.receiver.to_bytes(4, "big")
            + len(self.payload).to_bytes(4, "big")
            + self.payload
        )

    def to_bytes(self) -> bytes:
        return self.signed_bytes() + self.sig

    def digest(self) -> bytes:
        return hashlib.sha256(self.to_bytes()).digest()


def _pts(data: bytes) -> list[Point]:
    if len(data) % 33:
        raise ValueError("bad point list")
    return [Point.from_bytes(data[i : i + 33]) for i in range(0, len(data), 33)]


def _enc_pts(points: Iterable[Point]) -> bytes:
    return b"".join(p.to_bytes() for p in points)


def _enc_ids(ids: Iterable[int]) -> bytes:
    return b"".join(i.to_bytes(4, "big") for i in ids)


def _dec_ids(data: bytes) -> tuple[int, ...]:
    if len(data) % 4:
        raise ValueError("bad id list")
    return tuple(int.from_bytes(data[i : i + 4], "big") for i in range(0, len(data), 4))


def _sc(x: int) -> bytes:
    return (x % ORDER).to_bytes(32, "big")


def _unsc(data: bytes) -> int:
    return int.from_bytes(data, "big")


# ---------------------------------------------------------------------------
# party state
# ---------------------------------------------------------------------------


class Stage(enum.IntEnum):
    START = 0
    VERIFY = 1
    AGAINST = 2
    DISQUALIFY = 3
    CROSS_CHECK = 4
    FELDMAN_CHECK = 5
    RECONSTRUCT = 6
    PUBLIC_KEY = 7
    DONE = 8
    ABORTED = 9


class Abort(str, enum.Enum):
    INSUFFICIENT_SHARES = "insufficient-shares"
    QUAL_DISAGREEMENT = "qual-disagreement"
    MISSING_SHARE = "missing-share"
    RECONSTRUCTION = "reconstruction"
    INSUFFICIENT_DEALERS = "insufficient-dealers"
    PK_MISMATCH = "pk-mismatch"


@dataclass
class Fault:
    """Misbehaviour of a corrupted dealer (tests and attack scripts)."""

    bad_share_to: frozenset = frozenset()  # receivers that get share + 1
    refuse_reveal: bool = False
    bad_feldman: bool = False  # publishes Feldman commitments of another poly
    silent: bool = False  # never deals


@dataclass
class DkgPartyState:
    me: int
    keys: ClientKeys = field(repr=False)
    directory: Directory = field(repr=False)
    dealers: tuple[int, ...]
    receivers: tuple[int, ...]
    ell: int
    delta_D: float
    epoch: int = 0
    transfer: bool = False
    # transfer-only inputs
    old_index: Mapping[int, int] = field(default_factory=dict)  # dealer -> old x-coordinate
    old_vks: Mapping[int, Point] = field(default_factory=dict)  # dealer -> g^{s_u}
    old_ell: int = 0
    expected_pk: Point | None = None
    # own dealing
    dealing: VssDealing | None = field(default=None, repr=False)
    fault: Fault | None = None
    sealed: dict = field(default_factory=dict, repr=False)  # receiver -> AEAD blob
    # receiver view
    stage: Stage = Stage.START
    commits: dict = field(default_factory=dict, repr=False)  # dealer -> [C_k]
    feldman: dict = field(default_factory=dict, repr=False)  # dealer -> [A_k]
    shares: dict = field(default_factory=dict, repr=False)  # dealer -> (s, s') verified
    complaints: dict = field(default_factory=dict)  # dealer -> set(complainers)
    revealed: dict = field(default_factory=dict, repr=False)  # (dealer, complainer) -> (s, s')
    qual: tuple[int, ...] | None = None
    qual_votes: dict = field(default_factory=dict)  # sender -> qual tuple
    bad_feldman: set = field(default_factory=set)
    share: int | None = None
    public_key: Point | None = None
    verification_keys: dict = field(default_factory=dict, repr=False)
    abort: Abort | None = None

    # ---- construction -------------------------------------------------

    @classmethod
    def create(
        cls,
        keys: ClientKeys,
        directory: Directory,
        dealers: Sequence[int],
        receivers: Sequence[int],
        ell: int,
        delta_D: float,
        rng=None,
        secret: int | None = None,
        epoch: int = 0,
        fault: Fault | None = None,
        **transfer_args,
    ) -> "DkgPartyState":
        st = cls(
            me=keys.client,
            keys=keys,
            directory=directory,
            dealers=tuple(sorted(dealers)),
            receivers=tuple(sorted(receivers)),
            ell=ell,
            delta_D=delta_D,
            epoch=epoch,
            fault=fault,
            **transfer_args,
        )
        if st.me in st.dealers and not (fault and fault.silent):
            s = secret if secret is not None else random_scalar(rng)
            st.dealing = VssDealing.create(st.me, s, ell, len(st.receivers), rng)
            for pos, r in enumerate(st.receivers, 1):
                s_j, a_j = st.dealing.shares[pos], st.dealing.aux_shares[pos]
                if fault and r in fault.bad_share_to:
                    s_j = (s_j + 1) % ORDER
                if r == st.me:
                    continue
                key = keys.channel_key(directory[r])
                st.sealed[r] = aead.seal(key, _sc(s_j) + _sc(a_j), epoch, rng)
        return st

    # ---- helpers ------------------------------------------------------

    @property
    def session(self) -> bytes:
        return (b"T" if self.transfer else b"D") + self.epoch.to_bytes(8, "big")

    @property
    def is_dealer(self) -> bool:
        return self.me in self.dealers

    @property
    def is_receiver(self) -> bool:
        return self.me in self.receivers

    @property
    def position(self) -> int:
        return self.receivers.index(self.me) + 1

    @property
    def quorum(self) -> int:
        return 2 * self.ell + 1

    @property
    def finished(self) -> bool:
        return self.stage in (Stage.DONE, Stage.ABORTED)

    def fork(self) -> "DkgPartyState":
        new = copy.copy(self)
        for name in ("commits", "feldman", "shares", "revealed", "qual_votes", "verification_keys"):
            setattr(new, name, dict(getattr(self, name)))
        new.complaints = {k: set(v) for k, v in self.complaints.items()}
        new.bad_feldman = set(self.bad_feldman)
        return new

    def _env(self, phase: Phase, receiver: int, payload: bytes) -> Envelope:
        env = Envelope(self.session, phase, self.me, receiver, payload)
        return Envelope(env.session, phase, self.me, receiver, payload, self.keys.sign(env.signed_bytes()))

    def _accept(self, env: Envelope, phase: Phase, senders: Sequence[int]) -> bool:
        return (
            env.phase == phase
            and env.session == self.session
            and env.sender in senders
            and env.sender != self.me
            and env.receiver in (BROADCAST, self.me)
            and self.directory.verify(env.sender, env.signed_bytes(), env.sig)
        )

    def _abort(self, reason: Abort) -> None:
        self.stage = Stage.ABORTED
        self.abort = reason
        self.share = None

    def _share_for(self, dealer: int) -> tuple[int, int] | None:
        return self.shares.get(dealer)

    def _pos_of(self, receiver: int) -> int:
        return self.receivers.index(receiver) + 1

    def _check_share(self, dealer: int, s: int, a: int, pos: int | None = None) -> bool:
        pos = self.position if pos is None else pos
        comms = self.commits.get(dealer)
        if comms is None or len(comms) != self.ell + 1 or not pverify(pos, s, a, comms):
            return False
        if self.transfer:
            feld = self.feldman.get(dealer)
            if feld is None or not fverify(pos, s, feld):
                return False
        return True


# ---------------------------------------------------------------------------
# transition function
# ---------------------------------------------------------------------------


def dkg_step(state: DkgPartyState, inbox: Iterable[Envelope]) -> tuple[DkgPartyState, list[Envelope]]:
    """Advance one synchronous step.  Returns the new state and its outbox."""
    st = state.fork()
    if st.finished:
        return st, []
    inbox = list(inbox)
    out: list[Envelope] = []
    handler = _HANDLERS[st.stage]
    handler(st, inbox, out)
    return st, out


def _start(st: DkgPartyState, inbox, out) -> None:
    if st.dealing is not None:
        fault = st.fault
        for r, blob in st.sealed.items():
            out.append(st._env(Phase.DEAL, r, blob))
        comm_payload = _enc_pts(st.dealing.pedersen)
        if st.transfer:
            comm_payload += _enc_pts(_published_feldman(st.dealing, fault))
        out.append(st._env(Phase.COMMIT, BROADCAST, comm_payload))
        if st.is_receiver:
            st.commits[st.me] = list(st.dealing.pedersen)
            if st.transfer:
                st.feldman[st.me] = list(_published_feldman(st.dealing, fault))
            pos = st.position
            s = st.dealing.shares[pos]
            if fault and st.me in fault.bad_share_to:
                s = (s + 1) % ORDER
            if st._check_share(st.me, s, st.dealing.aux_shares[pos]):
                st.shares[st.me] = (s, st.dealing.aux_shares[pos])
    st.stage = Stage.VERIFY


def _published_feldman(dealing: VssDealing, fault: Fault | None) -> tuple[Point, ...]:
    if fault and fault.bad_feldman:
        return tuple(c + GENERATOR for c in dealing.feldman)
    return dealing.feldman


def _verify(st: DkgPartyState, inbox, out) -> None:
    if not st.is_receiver:
        st.stage = Stage.AGAINST  # a pure dealer only waits for complaints
        return
    n_comm = st.ell + 1
    for env in inbox:
        if st._accept(env, Phase.COMMIT, st.dealers):
            try:
                pts = _pts(env.payload)
            except ValueError:
                continue
            if st.transfer:
                if len(pts) != 2 * n_comm:
                    continue
                st.commits[env.sender], st.feldman[env.sender] = pts[:n_comm], pts[n_comm:]
            elif len(pts) == n_comm:
                st.commits[env.sender] = pts
    got = 1 if st.me in st.shares else 0
    for env in inbox:
        if not st._accept(env, Phase.DEAL, st.dealers) or env.receiver != st.me:
            continue
        if env.sender in st.shares:
            continue
        try:
            key = st.keys.channel_key(st.directory[env.sender])
            pt = aead.open_sealed(key, env.payload, st.epoch)
        except (aead.AuthenticationError, aead.RoundMismatch):
            continue
        if len(pt) != 64:
            continue
        got += 1  # a valid signed share, whether or not it verifies
        s, a = _unsc(pt[:32]), _unsc(pt[32:])
        if st._check_share(env.sender, s, a):
            st.shares[env.sender] = (s, a)
    need = math.ceil((1 - st.delta_D) * len(st.dealers) - 1e-9)
    if got < need:
        st._abort(Abort.INSUFFICIENT_SHARES)
        return
    for dealer in st.dealers:
        if dealer in st.commits and dealer not in st.shares:
            st.complaints.setdefault(dealer, set()).add(st.me)
            out.append(st._env(Phase.COMPLAINT, BROADCAST, dealer.to_bytes(4, "big")))
    st.stage = Stage.AGAINST


def _against(st: DkgPartyState, inbox, out) -> None:
    for env in inbox:
        if st._accept(env, Phase.COMPLAINT, st.receivers) and len(env.payload) == 4:
            dealer = int.from_bytes(env.payload, "big")
            if dealer in st.dealers:
                st.complaints.setdefault(dealer, set()).add(env.sender)
    if st.dealing is not None and not (st.fault and st.fault.refuse_reveal):
        for complainer in sorted(st.complaints.get(st.me, ())):
            if complainer not in st.receivers:
                continue
            pos = st._pos_of(complainer)
            payload = complainer.to_bytes(4, "big") + _sc(st.dealing.shares[pos]) + _sc(st.dealing.aux_shares[pos])
            out.append(st._env(Phase.REVEAL, BROADCAST, payload))
            st.revealed[(st.me, complainer)] = (st.dealing.shares[pos], st.dealing.aux_shares[pos])
    st.stage = Stage.DISQUALIFY if st.is_receiver else Stage.DONE


def _disqualify(st: DkgPartyState, inbox, out) -> None:
    for env in inbox:
        if st._accept(env, Phase.REVEAL, st.dealers) and len(env.payload) == 68:
            complainer = int.from_bytes(env.payload[:4], "big")
            if complainer in st.receivers:
                st.revealed[(env.sender, complainer)] = (_unsc(env.payload[4:36]), _unsc(env.payload[36:]))
    qual = []
    for dealer in st.dealers:
        if dealer not in st.commits:
            continue
        who = st.complaints.get(dealer, set())
        if len(who) >= 2 * st.ell + 1:
            continue
        ok = True
        for c in who:
            rv = st.revealed.get((dealer, c))
            if rv is None or not st._check_share(dealer, rv[0], rv[1], pos=st._pos_of(c)):
                ok = False
                break
            if c == st.me:
                st.shares[dealer] = rv
        if not ok:
            continue
        if st.transfer and st.feldman[dealer][0] != st.old_vks.get(dealer):
            continue  # re-shared something other than its share of SK
        qual.append(dealer)
    st.qual = tuple(qual)
    st.qual_votes[st.me] = st.qual
    out.append(st._env(Phase.QUAL, BROADCAST, _enc_ids(st.qual)))
    st.stage = Stage.CROSS_CHECK


def _cross_check(st: DkgPartyState, inbox, out) -> None:
    for env in inbox:
        if st._accept(env, Phase.QUAL, st.receivers) and env.sender not in st.qual_votes:
            try:
                st.qual_votes[env.sender] = _dec_ids(env.payload)
            except ValueError:
                continue
    tally: dict[tuple, int] = {}
    for q in st.qual_votes.values():
        tally[q] = tally.get(q, 0) + 1
    agreed = [q for q, c in tally.items() if c >= st.quorum]
    if not agreed:
        st._abort(Abort.QUAL_DISAGREEMENT)
        return
    qual = agreed[0]
    if any(d not in st.shares for d in qual):
        st._abort(Abort.MISSING_SHARE)
        return
    st.qual = qual
    if st.transfer:
        _finish_transfer(st, out)
        return
    st.share = sum(st.shares[d][0] for d in qual) % ORDER
    if st.dealing is not None and st.me in qual:
        out.append(st._env(Phase.FELDMAN, BROADCAST, _enc_pts(_published_feldman(st.dealing, st.fault))))
        st.feldman[st.me] = list(_published_feldman(st.dealing, st.fault))
    st.stage = Stage.FELDMAN_CHECK


def _feldman_check(st: DkgPartyState, inbox, out) -> None:
    for env in inbox:
        if st._accept(env, Phase.FELDMAN, st.qual or ()) and env.sender not in st.feldman:
            try:
                pts = _pts(env.payload)
            except ValueError:
                continue
            if len(pts) == st.ell + 1:
                st.feldman[env.sender] = pts
    if any(d not in st.feldman for d in st.qual):
        st._abort(Abort.RECONSTRUCTION)
        return
    pos = st.position
    for d in st.qual:
        s, a = st.shares[d]
        if not fverify(pos, s, st.feldman[d]):
            st.bad_feldman.add(d)
            payload = d.to_bytes(4, "big") + _sc(s) + _sc(a)
            out.append(st._env(Phase.FCOMPLAINT, BROADCAST, payload))
    st.stage = Stage.RECONSTRUCT


def _reconstruct(st: DkgPartyState, inbox, out) -> None:
    for env in inbox:
        if not (st._accept(env, Phase.FCOMPLAINT, st.receivers) and len(env.payload) == 68):
            continue
        d = int.from_bytes(env.payload[:4], "big")
        if d not in st.qual or d in st.bad_feldman:
            continue
        s, a = _unsc(env.payload[4:36]), _unsc(env.payload[36:])
        pos = st._pos_of(env.sender)
        # valid complaint: the share is Pedersen-correct but Feldman-wrong
        if pverify(pos, s, a, st.commits[d]) and not fverify(pos, s, st.feldman[d]):
            st.bad_feldman.add(d)
    for d in sorted(st.bad_feldman):
        s, a = st.shares[d]
        out.append(st._env(Phase.RECON, BROADCAST, d.to_bytes(4, "big") + _sc(s) + _sc(a)))
    st.stage = Stage.PUBLIC_KEY


def _public_key(st: DkgPartyState, inbox, out) -> None:
    pooled: dict[int, dict[int, int]] = {d: {st.position: st.shares[d][0]} for d in st.bad_feldman}
    for env in inbox:
        if not (st._accept(env, Phase.RECON, st.receivers) and len(env.payload) == 68):
            continue
        d = int.from_bytes(env.payload[:4], "big")
        if d not in pooled:
            continue
        s, a = _unsc(env.payload[4:36]), _unsc(env.payload[36:])
        pos = st._pos_of(env.sender)
        if pverify(pos, s, a, st.commits[d]):
            pooled[d][pos] = s
    for d, pts in pooled.items():
        if len(pts) < st.ell + 1:
            st._abort(Abort.RECONSTRUCTION)
            return
        chosen = dict(sorted(pts.items())[: st.ell + 1])
        coeffs = interpolate_coefficients(chosen)
        st.feldman[d] = [base_mul(c) for c in coeffs]
    # commitments to the sum polynomial: coefficient-wise products over QUAL
    total = [_sum_points(st.feldman[d][k] for d in st.qual) for k in range(st.ell + 1)]
    st.public_key = total[0]
    st.verification_keys = {r: commit_eval(total, pos) for pos, r in enumerate(st.receivers, 1)}
    out.append(st._env(Phase.PK, BROADCAST, st.public_key.to_bytes()))
    st.stage = Stage.DONE


def _finish_transfer(st: DkgPartyState, out) -> None:
    if len(st.qual) < st.old_ell + 1:
        st._abort(Abort.INSUFFICIENT_DEALERS)
        return
    beta = lagrange_coefficients([st.old_index[d] for d in st.qual])
    b = {d: beta[st.old_index[d]] for d in st.qual}
    pk = multi_mul((b[d], st.feldman[d][0]) for d in st.qual)
    if st.expected_pk is not None and pk != st.expected_pk:
        st._abort(Abort.PK_MISMATCH)
        return
    st.share = sum(b[d] * st.shares[d][0] for d in st.qual) % ORDER
    st.public_key = pk
    total = [multi_mul((b[d], st.feldman[d][k]) for d in st.qual) for k in range(st.ell + 1)]
    st.verification_keys = {r: commit_eval(total, pos) for pos, r in enumerate(st.receivers, 1)}
    out.append(st._env(Phase.PK, BROADCAST, pk.to_bytes()))
    st.stage = Stage.DONE


def _sum_points(points: Iterable[Point]) -> Point:
    acc = IDENTITY
    for p in points:
        acc = acc + p
    return acc


_HANDLERS = {
    Stage.START: _start,
    Stage.VERIFY: _verify,
    Stage.AGAINST: _against,
    Stage.DISQUALIFY: _disqualify,
    Stage.CROSS_CHECK: _cross_check,
    Stage.FELDMAN_CHECK: _feldman_check,
    Stage.RECONSTRUCT: _reconstruct,
    Stage.PUBLIC_KEY: _public_key,
}


# ---------------------------------------------------------------------------
# proxy and driver
# ---------------------------------------------------------------------------


@dataclass
class TranscriptEntry:
    sender: int
    receiver: int
    phase: Phase
    digest: bytes


class Proxy:
    """Honest routing.  Subclasses override ``route`` to misbehave."""

    def __init__(self):
        self.transcript: list[TranscriptEntry] = []

    def route(self, step: int, env: Envelope, parties: Sequence[int]) -> list[int]:
        if env.receiver == BROADCAST:
            return [p for p in parties if p != env.sender]
        return [env.receiver] if env.receiver in parties else []

    def deliver(self, step: int, outboxes: Mapping[int, list[Envelope]], parties: Sequence[int]):
        inboxes: dict[int, list[Envelope]] = {p: [] for p in parties}
        for sender in sorted(outboxes):
            for env in outboxes[sender]:
                for r in self.route(step, env, parties):
                    inboxes[r].append(env)
                    self.transcript.append(TranscriptEntry(env.sender, r, env.phase, env.digest()))
        return inboxes


MAX_STEPS = len(_HANDLERS) + 1


def run_parties(states: Mapping[int, DkgPartyState], proxy: Proxy | None = None):
    """Drive all parties in lock-step until every one is finished."""
    proxy = proxy or Proxy()
    states = dict(states)
    parties = sorted(states)
    inboxes: dict[int, list[Envelope]] = {p: [] for p in parties}
    for step in range(MAX_STEPS):
        outboxes = {}
        for p in parties:
            states[p], outboxes[p] = dkg_step(states[p], inboxes[p])
        inboxes = proxy.deliver(step, outboxes, parties)
        if all(s.finished for s in states.values()):
            break
    return states, proxy


@dataclass
class DkgResult:
    states: dict
    proxy: Proxy

    def finishers(self, honest: Iterable[int] | None = None) -> dict:
        ids = set(self.states) if honest is None else set(honest)
        return {p: s for p, s in self.states.items() if p in ids and s.stage == Stage.DONE and s.share is not None}

    @property
    def shares(self) -> dict[int, int]:
        return {p: s.share for p, s in self.finishers().items()}


def run_dkg(
    keys: Mapping[int, ClientKeys],
    directory: Directory,
    parties: Sequence[int],
    ell: int,
    delta_D: float,
    rng=None,
    proxy: Proxy | None = None,
    faults: Mapping[int, Fault] | None = None,
) -> DkgResult:
    faults = faults or {}
    states = {
        p: DkgPartyState.create(keys[p], directory, parties, parties, ell, delta_D, rng, fault=faults.get(p))
        for p in sorted(parties)
    }
    states, proxy = run_parties(states, proxy)
    return DkgResult(states, proxy)


def transfer_shares(
    keys: Mapping[int, ClientKeys],
    directory: Directory,
    old_shares: Mapping[int, int],
    old_set: Sequence[int],
    new_set: Sequence[int],
    old_ell: int,
    new_ell: int,
    delta_D: float,
    public_key: Point,
    old_vks: Mapping[int, Point],
    epoch: int,
    rng=None,
    proxy: Proxy | None = None,
    faults: Mapping[int, Fault] | None = None,
) -> DkgResult:
    """Re-share SK from the decryptors ``old_set`` to ``new_set``.

    Only old decryptors with a share (``old_shares``) deal.  Old x-coordinates
    are positions in the sorted ``old_set``.
    """
    faults = faults or {}
    old_sorted = tuple(sorted(old_set))
    dealers = tuple(d for d in old_sorted if d in old_shares)
    old_index = {d: old_sorted.index(d) + 1 for d in dealers}
    participants = sorted(set(dealers) | set(new_set))
    states = {}
    for p in participants:
        states[p] = DkgPartyState.create(
            keys[p],
            directory,
            dealers,
            new_set,
            new_ell,
            delta_D,
            rng,
            secret=old_shares.get(p),
            epoch=epoch,
            fault=faults.get(p),
            transfer=True,
            old_index=old_index,
            old_vks={d: old_vks[d] for d in dealers},
            old_ell=old_ell,
            expected_pk=public_key,
        )
    states, proxy = run_parties(states, proxy)
    return DkgResult(states, proxy)


def collect_public_key(pk_messages: Iterable[Envelope], directory: Directory, signers: Sequence[int], ell: int):
    """Client-side check of the signed PK broadcast.

    Returns the PK backed by at least 2*ell + 1 valid signatures from
    distinct decryptors, or None (the client aborts).
    """
    votes: dict[bytes, set] = {}
    for env in pk_messages:
        if env.phase != Phase.PK or env.sender not in signers:
            continue
        if not directory.verify(env.sender, env.signed_bytes(), env.sig):
            continue
        votes.setdefault(env.payload, set()).add(env.sender)
    for payload, who in votes.items():
        if len(who) >= 2 * ell + 1:
            return Point.from_bytes(payload)
    return None
