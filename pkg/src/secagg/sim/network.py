"""Event queue, delay model and the binary trace format.

Time is kept in integer microseconds.  Events pop in (time, sequence) order,
so the loop is deterministic for a fixed seed.
"""

from __future__ import annotations

import hashlib
import heapq
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

SERVER = 0


@dataclass(frozen=True)
class DelayModel:
    """Base delay drawn uniformly from [lo_us, hi_us] plus bounded Pareto jitter."""

    lo_us: int = 21
    hi_us: int = 53_000
    jitter_shape: float = 2.0
    jitter_scale_us: int = 500
    jitter_max_us: int = 20_000

    def __post_init__(self):
        if not 0 <= self.lo_us <= self.hi_us:
            raise ValueError("need 0 <= lo_us <= hi_us")
        if self.jitter_shape <= 0 or self.jitter_scale_us < 0 or self.jitter_max_us < 0:
            raise ValueError("bad jitter parameters")

    @property
    def max_us(self) -> int:
        return self.hi_us + self.jitter_max_us


def sample_delay(model: DelayModel, rng) -> int:
    """One message delay in microseconds, within [lo_us, hi_us + jitter_max_us]."""
    base = rng.randint(model.lo_us, model.hi_us)
    jitter = model.jitter_scale_us * (rng.paretovariate(model.jitter_shape) - 1.0)
    return base + min(int(jitter), model.jitter_max_us)


@dataclass
class SimEvent:
    time_us: int
    seq: int
    sender: int
    receiver: int
    kind: str
    payload: Any = field(repr=False)
    size: int = 0
    step: int = 0
    dropped: bool = False
    tampered: bool = False

    def sort_key(self) -> tuple[int, int]:
        return (self.time_us, self.seq)


class EventQueue:
    """Priority queue of pending deliveries; also keeps the full trace."""

    def __init__(self, start_us: int = 0, keep_trace: bool = True):
        self._heap: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.now = start_us
        self.keep_trace = keep_trace
        self.trace: list[SimEvent] = []

    def push(self, at_us: int, sender: int, receiver: int, kind: str, payload, size: int, step: int) -> SimEvent:
        if at_us < self.now:
            raise ValueError("cannot schedule into the past")
        ev = SimEvent(at_us, self._seq, sender, receiver, kind, payload, size, step)
        self._seq += 1
        heapq.heappush(self._heap, (at_us, ev.seq, ev))
        if self.keep_trace:
            self.trace.append(ev)
        return ev

    def advance(self) -> SimEvent | None:
        """Pop the next event and move the clock to it."""
        if not self._heap:
            return None
        _, _, ev = heapq.heappop(self._heap)
        self.now = ev.time_us
        return ev

    def until(self, deadline_us: int) -> Iterator[SimEvent]:
        """Pop every event due at or before ``deadline_us``, then set the clock to it.

        Events pushed by the consumer while iterating are included if due in time.
        """
        while self._heap and self._heap[0][0] <= deadline_us:
            yield self.advance()
        self.now = max(self.now, deadline_us)

    def drain(self) -> list[SimEvent]:
        """Discard what is still in flight (late messages) and return it."""
        late = [e for _, _, e in sorted(self._heap)]
        self._heap.clear()
        return late

    def __len__(self) -> int:
        return len(self._heap)


# ---------------------------------------------------------------------------
# trace dump: u32 record length || record, record = fixed header || kind
# ---------------------------------------------------------------------------

_HEADER = struct.Struct(">QQIIIBB")  # time, seq, sender, receiver, size, step, flags


def encode_event(ev: SimEvent) -> bytes:
    flags = (1 if ev.dropped else 0) | (2 if ev.tampered else 0)
    kind = ev.kind.encode()
    return _HEADER.pack(ev.time_us, ev.seq, ev.sender, ev.receiver, ev.size, ev.step, flags) + kind


def decode_event(data: bytes) -> SimEvent:
    t, seq, snd, rcv, size, step, flags = _HEADER.unpack_from(data)
    kind = data[_HEADER.size :].decode()
    return SimEvent(t, seq, snd, rcv, kind, None, size, step, bool(flags & 1), bool(flags & 2))


def dump_trace(events, path: str | Path | None = None) -> bytes:
    out = bytearray()
    for ev in events:
        rec = encode_event(ev)
        out += len(rec).to_bytes(4, "big") + rec
    if path is not None:
        Path(path).write_bytes(bytes(out))
    return bytes(out)


def load_trace(data: bytes) -> list[SimEvent]:
    events, pos = [], 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise ValueError("truncated trace")
        n = int.from_bytes(data[pos : pos + 4], "big")
        if pos + 4 + n > len(data):
            raise ValueError("truncated trace")
        events.append(decode_event(data[pos + 4 : pos + 4 + n]))
        pos += 4 + n
    return events


def trace_digest(events) -> str:
    return hashlib.sha256(dump_trace(events)).hexdigest()
