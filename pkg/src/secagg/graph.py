"""Per-round cohort selection, sparse random graphs and connectivity math.

All generation functions are pure in (v, t, n_t, N, rho):

* ``choose_set`` derives v*_t = PRF(v, t) and parses ceil(log2 N)-bit
  chunks of PRG(v*_t) as client ids, skipping duplicates (and values >= N
  when N is not a power of two).  Client ids are 1..N.
* an ordered pair (i, j) is *proposed* iff the first rho bits of
  PRF(v, i || j) are zero; the adjacency is the symmetric closure, so the
  effective edge probability is 1 - (1 - 2^-rho)^2.
* rho = 0 means every pair is proposed (the complete graph).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np
from scipy.special import gammaln, logsumexp

from .crypto.prg import prf, prg_bytes, round_tag

_SEGMENT = 4096  # PRG bytes consumed before re-keying the ChooseSet stream


@dataclass(frozen=True)
class RoundContext:
    v: bytes
    t: int
    n_t: int
    N: int
    rho: int

    def __post_init__(self):
        if not 0 < self.n_t <= self.N:
            raise ValueError("need 0 < n_t <= N")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")

    @property
    def epsilon(self) -> float:
        return 2.0 ** -self.rho


@dataclass(frozen=True)
class RoundGraph:
    members: tuple[int, ...]
    adjacency: Mapping[int, frozenset] = field(repr=False)

    def neighbors(self, i: int) -> frozenset:
        return self.adjacency[i]

    def edges(self) -> list[tuple[int, int]]:
        return sorted((i, j) for i in self.members for j in self.adjacency[i] if i < j)

    def to_adjacency_lists(self) -> dict[int, list[int]]:
        """Sorted adjacency lists, for debugging dumps."""
        return {i: sorted(self.adjacency[i]) for i in self.members}

    def degree(self, i: int, within: Iterable[int] | None = None) -> int:
        nb = self.adjacency[i]
        return len(nb) if within is None else len(nb & frozenset(within))


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------


def _id_bits(N: int) -> int:
    return (N - 1).bit_length()


def _stream(v_star: bytes):
    """PRG(v*) in segments; later segments re-key with PRF(v*, counter)."""
    seed = v_star
    counter = 0
    while True:
        yield prg_bytes(seed, _SEGMENT)
        counter += 1
        seed = prf(v_star, counter.to_bytes(8, "big"))


@lru_cache(maxsize=256)
def choose_set(v: bytes, t: int, n_t: int, N: int) -> tuple[int, ...]:
    """S_t: ``n_t`` distinct client ids in [1, N], sorted."""
    if n_t > N:
        raise ValueError("n_t exceeds N")
    if n_t <= 0:
        return ()
    b = _id_bits(N)
    if b == 0:
        return (1,)
    chosen: set[int] = set()
    acc = nbits = 0
    mask_all = (1 << b) - 1
    for segment in _stream(prf(v, round_tag(t))):
        for byte in segment:
            acc = (acc << 8) | byte
            nbits += 8
            while nbits >= b:
                nbits -= b
                val = (acc >> nbits) & mask_all
                acc &= (1 << nbits) - 1
                if val < N:
                    chosen.add(val + 1)
                    if len(chosen) == n_t:
                        return tuple(sorted(chosen))
    raise AssertionError("unreachable")  # pragma: no cover


def pair_input(i: int, j: int) -> bytes:
    return i.to_bytes(8, "big") + j.to_bytes(8, "big")


@lru_cache(maxsize=1 << 18)
def edge_proposed(v: bytes, i: int, j: int, rho: int) -> bool:
    """True iff the first rho bits of PRF(v, (i, j)) are all zero."""
    if rho == 0:
        return True
    out = prf(v, pair_input(i, j))
    nbits = 8 * len(out)
    if rho > nbits:
        return False
    return int.from_bytes(out, "big") >> (nbits - rho) == 0


def gen_graph(v: bytes, t: int, members: Iterable[int], rho: int) -> RoundGraph:
    """G_t over S_t.  (The round enters only through the member set.)"""
    return _gen_graph(v, tuple(sorted(members)), rho)


@lru_cache(maxsize=64)
def _gen_graph(v: bytes, mem: tuple, rho: int) -> RoundGraph:
    adj: dict[int, set] = {i: set() for i in mem}
    nbits = 8 * len(v)  # PRF output length
    if rho <= nbits:
        # same test as edge_proposed, inlined: the top rho bits of PRF(v, (i, j)) are zero
        limit = 1 << (nbits - rho)
        ids = [(i, i.to_bytes(8, "big")) for i in mem]
        for i, bi in ids:
            row = adj[i]
            for j, bj in ids:
                if i != j and int.from_bytes(prf(v, bi + bj), "big") < limit:
                    row.add(j)
                    adj[j].add(i)
    return RoundGraph(mem, {i: frozenset(s) for i, s in adj.items()})


def find_neighbors(v: bytes, members: Iterable[int], i: int, rho: int) -> frozenset:
    """A_t(i).

    A client only needs the O(n) scan of ``local_neighbors``; the graph is
    public, so when the whole of G_t has already been built (as happens in
    a simulation where all parties share one process) its row is reused.
    """
    mem = tuple(sorted(members))
    if i not in mem:
        raise ValueError(f"client {i} is not in S_t")
    return _gen_graph(v, mem, rho).adjacency[i]


def local_neighbors(v: bytes, members: Iterable[int], i: int, rho: int) -> frozenset:
    """A_t(i) from the 2(n - 1) PRF evaluations that involve i."""
    mem = set(members)
    if i not in mem:
        raise ValueError(f"client {i} is not in S_t")
    out = set()
    for j in mem:
        if j != i and (edge_proposed(v, i, j, rho) or edge_proposed(v, j, i, rho)):
            out.add(j)
    return frozenset(out)


# ---------------------------------------------------------------------------
# connectivity checks
# ---------------------------------------------------------------------------


def induced_connected(graph: RoundGraph, nodes: Iterable[int]) -> bool:
    """Is the subgraph induced by ``nodes`` connected?  (Empty counts as connected.)"""
    nodes = set(nodes)
    if not nodes:
        return True
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    adj = graph.adjacency
    while stack:
        fresh = (adj[stack.pop()] & nodes) - seen
        seen |= fresh
        stack.extend(fresh)
    return len(seen) == len(nodes)


# ---------------------------------------------------------------------------
# Gilbert's recursion for G(n, eps)
# ---------------------------------------------------------------------------


def _log_disconnection_table(n: int, eps: float) -> np.ndarray:
    """log P[G(m, eps) disconnected] for m = 1..n (index m-1); -inf at m=1.

    P_disc(m) = sum_{i=1}^{m-1} C(m-1, i-1) * P_conn(i) * (1-eps)^{i(m-i)},
    i.e. the component containing a fixed vertex has exactly i vertices.
    """
    out = np.full(n, -np.inf)
    if n <= 1:
        return out
    if eps >= 1.0:
        return out  # complete graph
    if eps <= 0.0:
        out[1:] = 0.0
        return out
    log_q = math.log1p(-eps)
    log_conn = np.zeros(n)  # log P_conn(m), index m-1
    for m in range(2, n + 1):
        i = np.arange(1, m)
        log_binom = gammaln(m) - gammaln(i) - gammaln(m - i + 1)
        terms = log_binom + log_conn[: m - 1] + i * (m - i) * log_q
        ld = float(logsumexp(terms))
        ld = min(ld, 0.0)
        out[m - 1] = ld
        log_conn[m - 1] = math.log(-math.expm1(ld)) if ld < 0.0 else -745.0
    return out


def disconnection_prob(n: int, eps: float) -> float:
    """P[G(n, eps) is disconnected], evaluated in the log domain."""
    if n <= 1:
        return 0.0
    return math.exp(_log_disconnection_table(n, eps)[-1])


def connectivity_prob(n: int, eps: float) -> float:
    """Gilbert's g(n, eps): probability that G(n, eps) is connected (g(1) = 1)."""
    return 1.0 - disconnection_prob(n, eps)


def min_epsilon(n: int, target: float, tol: float = 1e-6) -> float:
    """Smallest eps (to within ``tol`` relative) with P_disc(n, eps) <= target."""
    if target <= 0:
        raise ValueError("target probability must be positive")
    if n <= 1 or target >= 1:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol * hi:
        mid = (lo + hi) / 2
        if disconnection_prob(n, mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class EpsilonChoice:
    exact: float  # bisection result for the post-removal graph
    tabulated: float  # exact rounded to two decimals, the table's precision
    epsilon: float  # per-direction proposal probability 2^-rho
    rho: int
    neighbors: int  # ceil((tabulated + delta + eta) * n)
    nodes: int  # post-removal size ceil((1 - delta - eta) * n)
    target: float


def edge_probability(rho: int) -> float:
    """Probability that GenGraph connects a given pair: either side proposes."""
    e = 2.0**-rho
    return 1 - (1 - e) ** 2


def required_epsilon(
    n: int,
    kappa: float | None = None,
    delta: float = 0.0,
    eta: float = 0.0,
    target: float | None = None,
) -> EpsilonChoice:
    """Edge probability keeping the honest, online part of G_t connected.

    The failure budget is ``target`` if given, else 2^-kappa.  The graph that
    must stay connected has the ceil((1 - delta - eta) n) vertices that
    remain after dropouts and corrupted clients are removed.
    """
    if target is None:
        if kappa is None:
            raise ValueError("give kappa or target")
        target = 2.0 ** -kappa
    if not 0 < target < 1:
        raise ValueError("infeasible: failure target must lie in (0, 1)")
    if delta < 0 or eta < 0 or delta + eta >= 1:
        raise ValueError("infeasible: need delta + eta < 1")
    m = math.ceil((1 - delta - eta) * n - 1e-9)
    if m < 2:
        raise ValueError("infeasible: fewer than two vertices survive removal")
    exact = min_epsilon(m, target)
    if exact > 1.0:
        raise ValueError("infeasible: epsilon would exceed 1")
    tab = max(round(exact, 2), 0.01)
    # an edge exists when either endpoint proposes it, so the realized edge
    # probability is 1 - (1 - 2^-rho)^2; take the sparsest rho that still
    # reaches the required probability
    rho = 0
    while exact > 0 and edge_probability(rho + 1) >= exact:
        rho += 1
    eps = 2.0 ** -rho
    neighbors = math.ceil((tab + delta + eta) * n - 1e-9)
    return EpsilonChoice(exact, tab, eps, rho, neighbors, m, target)
