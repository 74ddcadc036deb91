"""Setup, collection rounds and sessions on the discrete-event loop.

A round is three client-server round trips, each closed by a timeout:

1. report:          server -> S_t "notify";        client -> server "report"
2. cross-check:     server -> D   "bundle";        decryptor -> server "signed"
3. reconstruction:  server -> D   "forward";       decryptor -> server "response"

The server only looks at its message pool when a step's timeout fires, and
anything that arrives later is dropped on the floor for that step.
"""

from __future__ import annotations

import io
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Collection, Mapping

import numpy as np

from ..dkg import Phase, Proxy, collect_public_key, run_dkg, transfer_shares
from ..graph import RoundContext, choose_set, gen_graph
from ..protocol.client import build_report
from ..protocol.decryptor import (
    CheckFailure,
    decryptor_cross_check,
    decryptor_reconstruct,
    decryptor_sign_request,
    new_state,
)
from ..protocol.server import server_collect, server_finalize, tau
from .adversary import AdversaryScript, Honest, RoundView
from .audit import AuditResult, RoundLog, audit
from .baseline import plaintext_sum
from .network import SERVER, EventQueue, sample_delay
from .world import Session, World

STEPS = ("report", "check", "recon")
CSV_COLUMNS = (
    "t",
    "tau",
    "outcome",
    "rt_count",
    "bytes_server_in",
    "bytes_server_out",
    "bytes_client_max",
    "ms_report",
    "ms_check",
    "ms_recon",
)
NOTIFY_SIZE = 12  # server id u32 || t u64


# ---------------------------------------------------------------------------
# schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoundDrops:
    report: frozenset = frozenset()  # clients that never send their report
    late: frozenset = frozenset()  # clients whose report misses the deadline
    check: frozenset = frozenset()  # decryptors silent in the cross-check step
    recon: frozenset = frozenset()  # decryptors silent in the reconstruction step


@dataclass(frozen=True)
class Schedule:
    """Dropout schedule, by round.  Explicit sets plus optional random draws.

    ``report_count`` clients of S_t and ``recon_count`` decryptors are drawn
    per round from a stream keyed by ``seed`` and t.
    """

    report: Mapping[int, Collection[int]] = field(default_factory=dict)
    late: Mapping[int, Collection[int]] = field(default_factory=dict)
    check: Mapping[int, Collection[int]] = field(default_factory=dict)
    recon: Mapping[int, Collection[int]] = field(default_factory=dict)
    report_count: int = 0
    recon_count: int = 0
    seed: int = 0

    def for_round(self, t: int, members, decryptors) -> RoundDrops:
        report = set(self.report.get(t, ()))
        recon = set(self.recon.get(t, ()))
        if self.report_count or self.recon_count:
            rng = random.Random(f"secagg/schedule/{self.seed}/{t}")
            report.update(rng.sample(sorted(members), min(self.report_count, len(members))))
            recon.update(rng.sample(sorted(decryptors), min(self.recon_count, len(decryptors))))
        return RoundDrops(
            frozenset(report), frozenset(self.late.get(t, ())), frozenset(self.check.get(t, ())), frozenset(recon)
        )


NO_DROPS = Schedule()


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass
class RoundMetrics:
    t: int
    tau: float
    outcome: str  # "sum-ok", "wrong-sum" or "abort:<reason>"
    rt_count: int
    bytes_server_in: int
    bytes_server_out: int
    bytes_client_max: int
    ms_report: float
    ms_check: float
    ms_recon: float
    online: int = 0
    cohort: int = 0
    skipped: int = 0  # items the decryptors ignored
    excluded: tuple = ()  # decryptors dropped for failing proofs
    late: int = 0  # messages that missed their deadline
    client_messages: dict = field(default_factory=dict, repr=False)  # client -> messages sent
    total: np.ndarray | None = field(default=None, repr=False)
    expected: np.ndarray | None = field(default=None, repr=False)  # plaintext sum over the server's online set
    inputs: dict = field(default_factory=dict, repr=False)  # client -> x_{i,t}
    members: tuple = ()  # S_t
    survivors: tuple = ()  # clients whose input is in the sum (the server's online set)

    @property
    def ok(self) -> bool:
        return self.outcome == "sum-ok"

    def csv_row(self) -> str:
        vals = [getattr(self, c) for c in CSV_COLUMNS]
        return ",".join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in vals)


@dataclass
class TransferRecord:
    after_round: int
    old: tuple[int, ...]
    new: tuple[int, ...]
    ok: bool
    reason: str | None = None


@dataclass
class SessionReport:
    seed: int
    setup_abort: str | None = None
    rounds: list[RoundMetrics] = field(default_factory=list)
    transfers: list[TransferRecord] = field(default_factory=list)
    audit: AuditResult | None = None
    session: Session | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.setup_abort is None and all(r.ok for r in self.rounds) and all(x.ok for x in self.transfers)

    def outcomes(self) -> list[str]:
        if self.setup_abort is not None:
            return [f"setup-abort:{self.setup_abort}"]
        return [r.outcome for r in self.rounds]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(CSV_COLUMNS) + "\n")
        for r in self.rounds:
            buf.write(r.csv_row() + "\n")
        return buf.getvalue()


class _Meter:
    def __init__(self):
        self.server_in = 0
        self.server_out = 0
        self.client: Counter = Counter()

    def count(self, sender: int, receiver: int, size: int) -> None:
        if sender == SERVER:
            self.server_out += size
        else:
            self.client[sender] += size
        if receiver == SERVER:
            self.server_in += size
        else:
            self.client[receiver] += size


# ---------------------------------------------------------------------------
# setup
# ---------------------------------------------------------------------------


class _RecordingProxy(Proxy):
    """Wraps a (possibly adversarial) proxy and keeps the PK broadcasts."""

    def __init__(self, inner: Proxy):
        super().__init__()
        self.inner = inner
        self.pk_messages = []
        self.bytes = 0

    def route(self, step, env, parties):
        out = self.inner.route(step, env, parties)
        if env.phase == Phase.PK and env not in self.pk_messages:
            self.pk_messages.append(env)
        self.bytes += len(env.to_bytes()) * len(out)
        return out


def _abort_reason(states) -> str:
    reasons = Counter(s.abort.value for s in states.values() if s.abort is not None)
    return reasons.most_common(1)[0][0] if reasons else "no-finisher"


def setup_session(
    world: World, seed: int, adversary: AdversaryScript | None = None, keep_trace: bool = True
) -> Session | str:
    """Randomness beacon, decryptor election, DKG and signed PK distribution.

    Returns the session, or the abort reason as a string.
    """
    cfg = world.cfg
    adversary = adversary or Honest()
    rng = random.Random(f"secagg/session/{seed}/setup")
    v = rng.randbytes(cfg.seed_bytes)
    decryptors = choose_set(v, 0, cfg.L, cfg.N)
    proxy = _RecordingProxy(adversary.dkg_proxy(decryptors))
    res = run_dkg(world.keys, world.directory, decryptors, cfg.ell, cfg.delta_D, rng, proxy)
    done = res.finishers()
    if not done:
        return _abort_reason(res.states)
    # every client accepts PK only with 2*ell + 1 valid signatures from D
    pk = collect_public_key(proxy.pk_messages, world.directory, decryptors, cfg.ell)
    if pk is None:
        return "pk-signatures"
    first = done[min(done)]
    session = Session(
        world,
        seed,
        v,
        decryptors,
        {u: s.share for u, s in done.items()},
        dict(first.verification_keys),
        pk,
        round_offset=world.rounds_used,
        keep_trace=keep_trace,
    )
    adversary.bind(world, decryptors)
    return session


def transfer(session: Session, after_round: int, adversary: AdversaryScript | None = None) -> TransferRecord:
    """Move the key shares to ChooseSet(v, after_round / R, L, N)."""
    cfg = session.cfg
    world = session.world
    epoch = after_round // cfg.R
    new = choose_set(session.v, epoch, cfg.L, cfg.N)
    old = session.decryptors
    proxy = (adversary or Honest()).dkg_proxy(sorted(set(old) | set(new)))
    # the epoch tag keeps transfers of different sessions on one PKI apart
    tag = session.round_offset * 1_000_000 + epoch
    res = transfer_shares(
        world.keys,
        world.directory,
        session.shares,
        old,
        new,
        cfg.ell,
        cfg.ell,
        cfg.delta_D,
        session.public_key,
        session.verification_keys,
        tag,
        session.rng,
        proxy,
    )
    done = res.finishers(new)
    if len(done) < cfg.ell + 1:
        return TransferRecord(after_round, old, new, False, _abort_reason(res.states))
    session.decryptors = tuple(new)
    session.shares = {u: s.share for u, s in done.items()}
    session.verification_keys = dict(done[min(done)].verification_keys)
    session.epoch = epoch
    return TransferRecord(after_round, old, new, True)


# ---------------------------------------------------------------------------
# one round
# ---------------------------------------------------------------------------


def round_inputs(session: Session, members) -> dict[int, np.ndarray]:
    xs = session.inputs.integers(0, 1 << 32, size=(len(members), session.cfg.d), dtype=np.uint32)
    return dict(zip(members, xs))


def run_round(
    session: Session,
    t: int,
    drops: RoundDrops | None = None,
    adversary: AdversaryScript | None = None,
    inputs: Mapping[int, np.ndarray] | None = None,
    audit_log: bool = False,
) -> RoundMetrics:
    """One collection round; aborts are reported in ``outcome``, never raised."""
    world, cfg = session.world, session.cfg
    adversary = adversary or Honest()
    drops = drops or RoundDrops()
    tg = session.global_round(t)
    ctx = RoundContext(session.v, tg, cfg.n, cfg.N, cfg.rho)
    members = choose_set(session.v, tg, cfg.n, cfg.N)
    graph = gen_graph(session.v, tg, members, cfg.rho)
    dec = tuple(sorted(session.decryptors))
    xs = dict(inputs) if inputs is not None else round_inputs(session, members)
    view = RoundView(tg, graph, dec, cfg.robust, cfg.ell, session.last_collect)
    keys, directory = world.keys, world.directory
    rng, net = session.rng, session.net_rng

    q = EventQueue(session.clock_us, keep_trace=session.keep_trace)
    meter = _Meter()
    sent_by: Counter = Counter()
    replied_steps: set = set()
    log = RoundLog(tg, graph, dec, dict(session.shares), cfg.ell, cfg.robust) if audit_log else None

    def send(sender, receiver, kind, payload, step, extra_us=0):
        tampered = False
        if sender != SERVER:
            payload, tampered = adversary.on_send(kind, sender, receiver, payload, view)
            sent_by[sender] += 1
            replied_steps.add(step)
        size = NOTIFY_SIZE if kind == "notify" else _size(payload)
        meter.count(sender, receiver, size)
        ev = q.push(q.now + sample_delay(world.delay, net) + extra_us, sender, receiver, kind, payload, size, step)
        ev.tampered = tampered
        return ev

    def accept(ev, step) -> bool:
        """Server side: in time for this step and not discarded by the server."""
        if ev.step != step:
            late[0] += 1
            return False
        if not adversary.on_deliver(ev.kind, ev.sender, ev.payload, view):
            ev.dropped = True
            return False
        return True

    late = [0]
    last_arrival = {}

    # ---- step 1: report ----------------------------------------------------
    start = q.now
    deadline = start + cfg.timeout_report_ms * 1000
    for i in members:
        send(SERVER, i, "notify", tg, 1)
    pool = []
    for ev in q.until(deadline):
        if ev.receiver == SERVER:
            if accept(ev, 1):
                pool.append(ev.payload)
                last_arrival[1] = ev.time_us
            continue
        i = ev.receiver
        if i in drops.report:
            continue
        out = build_report(
            keys[i], ctx, xs[i], session.pk_table, dec, directory, cfg.ell, session.model_hash, rng, cfg.robust, cfg.d
        )
        if out is None:
            continue
        mv, secrets = out
        sent = send(i, SERVER, "report", mv, 1, extra_us=(deadline - q.now + 1) if i in drops.late else 0)
        if log is not None:
            log.secrets[i] = secrets
            log.sent[i] = sent.payload
    pool = adversary.on_route("pool", pool, view)
    collect = server_collect(pool, graph, tg, dec, cfg.d, cfg.robust)
    bundles = adversary.on_route("bundles", collect, view)
    if bundles is collect:
        bundles = collect.bundles

    # ---- step 2: cross-check -------------------------------------------------
    start2 = q.now
    deadline2 = start2 + cfg.timeout_check_ms * 1000
    states = {u: new_state(u, tg, dec, cfg.ell) for u in dec}
    for u in dec:
        send(SERVER, u, "bundle", bundles[u], 2)
    signed = []
    for ev in q.until(deadline2):
        if ev.receiver == SERVER:
            if accept(ev, 2):
                signed.append(ev.payload)
                last_arrival[2] = ev.time_us
            continue
        u = ev.receiver
        if ev.kind != "bundle" or u in drops.check:
            continue
        sr = decryptor_sign_request(states[u], keys[u], ev.payload)
        if sr is not None:
            send(u, SERVER, "signed", sr, 2)
    signed = adversary.on_route("forward", signed, view)

    # ---- step 3: reconstruction ---------------------------------------------
    start3 = q.now
    deadline3 = start3 + cfg.timeout_recon_ms * 1000
    for u in dec:
        send(SERVER, u, "forward", _Forward(tuple(signed)), 3)
    responses = []
    for ev in q.until(deadline3):
        if ev.receiver == SERVER:
            if log is not None and ev.kind == "response":
                log.responses.append(ev.payload)
            if accept(ev, 3):
                responses.append(ev.payload)
                last_arrival[3] = ev.time_us
            continue
        u = ev.receiver
        if ev.kind != "forward" or u in drops.recon:
            continue
        if u not in session.shares:
            continue
        res = decryptor_cross_check(states[u], ev.payload.copies, graph, directory, cfg.n, cfg.delta, cfg.k)
        if isinstance(res, CheckFailure):
            continue
        resp = decryptor_reconstruct(states[u], keys[u], session.shares[u], directory, graph, cfg.robust, rng)
        if resp is not None:
            send(u, SERVER, "response", resp, 3)
    late[0] += len(q.drain())
    session.clock_us = q.now
    fin = server_finalize(
        collect,
        responses,
        graph,
        dec,
        cfg.ell,
        cfg.robust,
        session.model_hash,
        session.verification_keys,
    )

    # ---- outcome -------------------------------------------------------------
    expected = plaintext_sum(xs, collect.online, cfg.d)
    if fin.ok:
        outcome = "sum-ok" if np.array_equal(fin.total, expected) else "wrong-sum"
    else:
        fails = Counter(s.abort.value for s in states.values() if s.abort is not None)
        reason = fails.most_common(1)[0][0] if fails and not responses else fin.abort
        outcome = f"abort:{reason}"
    if session.keep_trace:
        session.trace.extend(q.trace)
    if log is not None:
        session.logs.append(log)
    session.last_collect = collect
    starts = {1: start, 2: start2, 3: start3}
    ms = {s: (last_arrival[s] - starts[s]) / 1000 if s in last_arrival else 0.0 for s in starts}
    return RoundMetrics(
        t=tg,
        tau=tau(collect.request),
        outcome=outcome,
        rt_count=len(replied_steps),
        bytes_server_in=meter.server_in,
        bytes_server_out=meter.server_out,
        bytes_client_max=max(meter.client.values(), default=0),
        ms_report=ms[1],
        ms_check=ms[2],
        ms_recon=ms[3],
        online=len(collect.online),
        cohort=len(members),
        skipped=sum(len(s.skipped) for s in states.values()),
        excluded=fin.excluded,
        late=late[0],
        client_messages=dict(sent_by),
        total=fin.total,
        expected=expected,
        inputs=xs,
        members=tuple(members),
        survivors=tuple(sorted(collect.online)),
    )


@dataclass(frozen=True)
class _Forward:
    """Step-3 message: every signed request the server received."""

    copies: tuple

    def to_bytes(self) -> bytes:
        return b"".join(len(b).to_bytes(4, "big") + b for b in (c.to_bytes() for c in self.copies))

    def wire_size(self) -> int:
        return sum(4 + c.wire_size() for c in self.copies)


def _size(payload) -> int:
    return payload.wire_size()


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------


def run_session(
    world: World,
    seed: int,
    T: int | None = None,
    R: int | None = None,
    schedule: Schedule | None = None,
    adversary: AdversaryScript | None = None,
    audit_rounds: bool = False,
    keep_trace: bool = True,
    model_hash: bytes | None = None,
    workload=None,
) -> SessionReport:
    """Setup, then T rounds with a share transfer after every R-th round.

    ``workload(session, members)`` may supply the round inputs; by default
    they are uniform random words.
    """
    cfg = world.cfg
    T = cfg.T if T is None else T
    R = cfg.R if R is None else R
    if T < 1:
        raise ValueError("T must be at least 1")
    schedule = schedule or NO_DROPS
    adversary = adversary or Honest()
    report = SessionReport(seed)
    session = setup_session(world, seed, adversary, keep_trace)
    if isinstance(session, str):
        report.setup_abort = session
        return report
    session.model_hash = model_hash
    report.session = session
    world.rounds_used += T
    for t in range(1, T + 1):
        tg = session.global_round(t)
        members = choose_set(session.v, tg, cfg.n, cfg.N)
        drops = schedule.for_round(t, members, session.decryptors)
        xs = workload(session, members) if workload is not None else None
        report.rounds.append(run_round(session, t, drops, adversary, xs, audit_log=audit_rounds))
        if R and t % R == 0 and t < T:
            rec = transfer(session, t)
            report.transfers.append(rec)
            if not rec.ok:
                break
    if audit_rounds:
        report.audit = audit(session.logs, adversary.corrupted)
    return report
