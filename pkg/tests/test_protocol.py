import random
from dataclasses import replace

import numpy as np
import pytest

from secagg.crypto.group import GENERATOR
from secagg.dkg import run_dkg
from secagg.graph import RoundContext, RoundGraph, choose_set, gen_graph
from secagg.protocol import (
    MASK_PEER,
    OFFLINE,
    ONLINE,
    Attachment,
    CheckFailure,
    DecryptionRequest,
    DecryptorResponse,
    MaskedVector,
    RequestBundle,
    SignedCiphertext,
    SignedRequest,
    build_report,
    check_labels,
    decryptor_cross_check,
    decryptor_reconstruct,
    decryptor_sign_request,
    min_online,
    new_state,
    pair_sign,
    server_collect,
    server_finalize,
    tau,
)
from secagg.protocol.client import apply_mask, individual_seed
from secagg.protocol.wire import WireError
from secagg.sim.baseline import plaintext_sum

from .helpers import make_keys

KEYS, DIRECTORY = make_keys(range(1, 13), seed=21)


class Round:
    """One collection round driven directly through the role functions."""

    def __init__(self, n=8, L=4, ell=1, rho=0, d=8, robust=False, delta=0.25, k=1, seed=0):
        self.N, self.n, self.L, self.ell, self.rho, self.d = 12, n, L, ell, rho, d
        self.robust, self.delta, self.k = robust, delta, k
        self.rng = random.Random(f"round/{seed}")
        self.v = self.rng.randbytes(16)
        self.dec = tuple(range(9, 9 + L))
        res = run_dkg(KEYS, DIRECTORY, self.dec, ell, 0.3, self.rng)
        fin = res.finishers()
        self.shares = {u: s.share for u, s in fin.items()}
        self.vks = dict(fin[min(fin)].verification_keys)
        self.pk = fin[min(fin)].public_key

    def members(self, t):
        return choose_set(self.v, t, self.n, self.N)

    def graph(self, t):
        return gen_graph(self.v, t, self.members(t), self.rho)

    def reports(self, t, xs, model_hash=None):
        ctx = RoundContext(self.v, t, self.n, self.N, self.rho)
        out = {}
        for i in self.members(t):
            mv, sec = build_report(
                KEYS[i], ctx, xs[i], self.pk, self.dec, DIRECTORY, self.ell, model_hash, self.rng, self.robust, self.d
            )
            out[i] = (mv, sec)
        return out

    def inputs(self, t):
        g = np.random.default_rng(t)
        return {i: g.integers(0, 1 << 32, self.d, dtype=np.uint32) for i in self.members(t)}

    def collect(self, t, reps, drop=()):
        pool = [mv for i, (mv, _) in reps.items() if i not in drop]
        return server_collect(pool, self.graph(t), t, self.dec, self.d, self.robust)

    def cross_check(self, t, bundles, silent=()):
        states = {u: new_state(u, t, self.dec, self.ell) for u in self.dec}
        signed = []
        for u in self.dec:
            if u in silent:
                continue
            sr = decryptor_sign_request(states[u], KEYS[u], bundles[u])
            if sr is not None:
                signed.append(sr)
        results = {
            u: decryptor_cross_check(states[u], signed, self.graph(t), DIRECTORY, self.n, self.delta, self.k)
            for u in self.dec
        }
        return states, results

    def respond(self, t, states, skip=()):
        out = []
        for u in self.dec:
            if u in skip:
                continue
            r = decryptor_reconstruct(states[u], KEYS[u], self.shares[u], DIRECTORY, self.graph(t), self.robust, self.rng)
            if r is not None:
                out.append(r)
        return out

    def run(self, t, drop=(), dec_drop=(), model_hash=None):
        xs = self.inputs(t)
        reps = self.reports(t, xs, model_hash)
        col = self.collect(t, reps, drop)
        states, _ = self.cross_check(t, col.bundles)
        resp = self.respond(t, states, dec_drop)
        fin = server_finalize(col, resp, self.graph(t), self.dec, self.ell, self.robust, model_hash, self.vks)
        return fin, plaintext_sum(xs, col.online, self.d), states


# ---------------------------------------------------------------------------
# client report
# ---------------------------------------------------------------------------


def test_pairwise_terms_cancel():
    r = Round(rho=1)
    t = 1
    reps = r.reports(t, r.inputs(t))
    g = r.graph(t)
    i = r.members(t)[0]
    for j in g.neighbors(i):
        hi, hj = reps[i][1].pair_seeds[j], reps[j][1].pair_seeds[i]
        assert hi == hj
        a = np.zeros(r.d, np.uint32)
        apply_mask(a, hi, pair_sign(i, j))
        apply_mask(a, hj, pair_sign(j, i))
        assert not a.any()


@pytest.mark.parametrize("robust", [False, True])
def test_full_cohort_telescopes(robust):
    r = Round(robust=robust, rho=1)
    t = 2
    xs = r.inputs(t)
    reps = r.reports(t, xs)
    z = np.zeros(r.d, np.uint32)
    for mv, sec in reps.values():
        z += mv.vec
        apply_mask(z, individual_seed(sec.m), -1)
    assert np.array_equal(z, plaintext_sum(xs, xs))


def test_pair_seeds_change_every_round():
    r = Round(n=12)  # everyone takes part in both rounds
    a = r.reports(1, r.inputs(1))
    b = r.reports(2, r.inputs(2))
    i = r.members(1)[0]
    j = next(iter(a[i][1].pair_seeds))
    assert a[i][1].pair_seeds[j] != b[i][1].pair_seeds[j]


def test_report_preconditions():
    r = Round(n=6)
    ctx = RoundContext(r.v, 1, r.n, r.N, r.rho)
    outsider = next(i for i in range(1, 13) if i not in r.members(1))
    assert build_report(KEYS[outsider], ctx, np.zeros(8, np.uint32), r.pk, r.dec, DIRECTORY, r.ell, rng=r.rng) is None
    member = r.members(1)[0]
    with pytest.raises(ValueError):
        build_report(KEYS[member], ctx, np.zeros(5, np.uint32), r.pk, r.dec, DIRECTORY, r.ell, rng=r.rng, d=8)


# ---------------------------------------------------------------------------
# server collect
# ---------------------------------------------------------------------------


def test_collect_without_dropouts_carries_only_shares():
    r = Round()
    reps = r.reports(1, r.inputs(1))
    col = r.collect(1, reps)
    assert not col.request.offline()
    assert tau(col.request) == 1.0
    for b in col.bundles.values():
        assert all(a.share and not a.ciphertexts for a in b.attachments)


def test_collect_with_one_dropout_attaches_neighbour_ciphertexts():
    r = Round(rho=1)
    reps = r.reports(1, r.inputs(1))
    gone = r.members(1)[2]
    col = r.collect(1, reps, drop={gone})
    assert col.request.offline() == {gone}
    live = r.graph(1).neighbors(gone) & col.online
    for b in col.bundles.values():
        att = b.by_client()[gone]
        assert {sc.client for sc in att.ciphertexts} == live
        assert all(sc.peer == gone for sc in att.ciphertexts)


# ---------------------------------------------------------------------------
# full rounds
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("robust", [False, True])
@pytest.mark.parametrize("drop", [(), (1,), (1, 2)])
def test_round_sums_match_oracle(robust, drop):
    r = Round(robust=robust, rho=1, seed=3)
    members = r.members(1)
    fin, expected, _ = r.run(1, drop={members[k] for k in drop}, dec_drop={r.dec[0]})
    assert fin.ok, fin.abort
    assert np.array_equal(fin.total, expected)


def test_model_hash_round():
    r = Round(rho=1, seed=4)
    fin, expected, _ = r.run(1, drop={r.members(1)[0]}, model_hash=b"h" * 32)
    assert fin.ok and np.array_equal(fin.total, expected)


def test_too_few_responses():
    r = Round()
    fin, _, _ = r.run(1, dec_drop=set(r.dec[:3]))
    assert not fin.ok and fin.abort == "insufficient-responses"


# ---------------------------------------------------------------------------
# cross-check
# ---------------------------------------------------------------------------


def test_split_requests_fail_quorum():
    r = Round()
    reps = r.reports(1, r.inputs(1))
    members = r.members(1)
    col_a = r.collect(1, reps, drop={members[0]})
    col_b = r.collect(1, reps, drop={members[1]})
    bundles = {u: (col_a if k % 2 == 0 else col_b).bundles[u] for k, u in enumerate(r.dec)}
    states, results = r.cross_check(1, bundles)
    assert all(res == CheckFailure.QUORUM for res in results.values())
    assert r.respond(1, states) == []


def test_quorum_counts_own_vote_and_tolerates_ell_silent():
    r = Round()
    reps = r.reports(1, r.inputs(1))
    col = r.collect(1, reps)
    _, results = r.cross_check(1, col.bundles, silent={r.dec[0]})
    assert all(isinstance(res, DecryptionRequest) for u, res in results.items() if u != r.dec[0])
    _, results = r.cross_check(1, col.bundles, silent=set(r.dec[:2]))
    assert all(res == CheckFailure.QUORUM for res in results.values())


def test_size_boundary():
    r = Round(delta=0.25)  # n = 8 needs 6 online
    assert min_online(8, 0.25) == 6
    reps = r.reports(1, r.inputs(1))
    m = r.members(1)
    col = r.collect(1, reps, drop=set(m[:2]))
    _, results = r.cross_check(1, col.bundles)
    assert all(isinstance(res, DecryptionRequest) for res in results.values())
    col = r.collect(1, reps, drop=set(m[:3]))
    _, results = r.cross_check(1, col.bundles)
    assert all(res == CheckFailure.SIZE for res in results.values())


def test_check_labels_failures():
    members = (1, 2, 3, 4)
    path = RoundGraph(members, {1: frozenset({2}), 2: frozenset({1, 3}), 3: frozenset({2, 4}), 4: frozenset({3})})
    ok = DecryptionRequest.build(1, members, members)
    assert check_labels(ok, path, 4, 0.0, 1) is None
    dup = DecryptionRequest(1, ((1, ONLINE), (1, OFFLINE), (2, ONLINE), (3, ONLINE), (4, ONLINE)))
    assert check_labels(dup, path, 4, 0.5, 1) == CheckFailure.LABELS
    missing = DecryptionRequest(1, ((1, ONLINE), (2, ONLINE), (3, ONLINE)))
    assert check_labels(missing, path, 4, 0.5, 1) == CheckFailure.LABELS
    split = DecryptionRequest.build(1, members, {1, 3, 4})
    assert check_labels(split, path, 4, 0.5, 1) == CheckFailure.CONNECTIVITY
    assert check_labels(ok, path, 4, 0.0, 2) == CheckFailure.NEIGHBORS


def test_request_for_other_round_aborts():
    r = Round()
    col = r.collect(1, r.reports(1, r.inputs(1)))
    st = new_state(r.dec[0], 2, r.dec, r.ell)
    assert decryptor_sign_request(st, KEYS[r.dec[0]], col.bundles[r.dec[0]]) is None
    assert st.abort == CheckFailure.ROUND


def test_forged_signature_does_not_count():
    r = Round()
    col = r.collect(1, r.reports(1, r.inputs(1)))
    states = {u: new_state(u, 1, r.dec, r.ell) for u in r.dec}
    signed = [decryptor_sign_request(states[u], KEYS[u], col.bundles[u]) for u in r.dec]
    forged = [replace(s, sig=bytes(64)) for s in signed[1:]]
    res = decryptor_cross_check(states[r.dec[0]], forged, r.graph(1), DIRECTORY, r.n, r.delta, r.k)
    assert res == CheckFailure.QUORUM


# ---------------------------------------------------------------------------
# reconstruction
# ---------------------------------------------------------------------------


def test_cross_round_ciphertext_is_ignored():
    r = Round(n=12, rho=1, delta=0.2, seed=5)
    old = r.reports(1, r.inputs(1))
    xs = r.inputs(2)
    new = r.reports(2, xs)
    gone = r.members(2)[0]
    col = r.collect(2, new, drop={gone})
    # replace the offline client's round-2 ciphertexts by the round-1 ones
    stale = tuple(p for i in col.online for p in old[i][0].pairs if p.peer == gone)
    bundles = {}
    for u, b in col.bundles.items():
        atts = tuple(Attachment(a.client, a.share, stale) if a.client == gone else a for a in b.attachments)
        bundles[u] = RequestBundle(b.request, atts)
    states, _ = r.cross_check(2, bundles)
    resp = r.respond(2, states)
    assert all(("round" in why or "signature" in why) for s in states.values() for *_, why in s.skipped)
    assert all(not any(k[0] == gone for k in x.partials) for x in resp)
    fin = server_finalize(col, resp, r.graph(2), r.dec, r.ell)
    assert not fin.ok  # the pairwise masks of the dropped client cannot be removed


def test_robust_bad_partial_is_excluded():
    r = Round(robust=True, rho=1, seed=6)
    xs = r.inputs(1)
    reps = r.reports(1, xs)
    col = r.collect(1, reps, drop={r.members(1)[1]})
    states, _ = r.cross_check(1, col.bundles)
    resp = r.respond(1, states)
    bad = resp[0]
    key = next(iter(bad.partials))
    bad.partials[key] = bad.partials[key] + GENERATOR
    fin = server_finalize(col, resp, r.graph(1), r.dec, r.ell, True, None, r.vks)
    assert fin.ok
    assert bad.decryptor in fin.excluded
    assert np.array_equal(fin.total, plaintext_sum(xs, col.online))


def test_non_robust_bad_partial_corrupts_sum():
    # without proofs the server cannot tell; this is what the robust mode is for
    r = Round(rho=1, seed=6)
    xs = r.inputs(1)
    reps = r.reports(1, xs)
    col = r.collect(1, reps, drop={r.members(1)[1]})
    states, _ = r.cross_check(1, col.bundles)
    resp = r.respond(1, states)
    victim = next(x for x in resp if x.partials)
    key = next(iter(victim.partials))
    victim.partials[key] = victim.partials[key] + GENERATOR
    order = [victim] + [x for x in resp if x is not victim]
    fin = server_finalize(col, order, r.graph(1), r.dec, r.ell)
    assert not (fin.ok and np.array_equal(fin.total, plaintext_sum(xs, col.online)))


# ---------------------------------------------------------------------------
# wire format
# ---------------------------------------------------------------------------


def test_wire_roundtrip():
    r = Round(robust=True, rho=1, seed=7)
    reps = r.reports(1, r.inputs(1))
    col = r.collect(1, reps, drop={r.members(1)[0]})
    states, _ = r.cross_check(1, col.bundles)
    resp = r.respond(1, states)
    mv = next(iter(reps.values()))[0]
    objs = [mv, mv.pairs[0], mv.mask, col.request, col.bundles[r.dec[0]], states[r.dec[0]].own, resp[0]]
    objs += list(col.bundles[r.dec[0]].attachments)
    for obj in objs:
        data = obj.to_bytes()
        assert obj.wire_size() == len(data)
        back = type(obj).from_bytes(data)
        assert back.to_bytes() == data
    back = MaskedVector.from_bytes(mv.to_bytes())
    assert np.array_equal(back.vec, mv.vec) and back.pairs == mv.pairs


def test_wire_rejects_garbage():
    for cls in (MaskedVector, DecryptionRequest, SignedRequest, DecryptorResponse, SignedCiphertext):
        with pytest.raises((WireError, ValueError)):
            cls.from_bytes(b"\x00\x01junk")
    req = DecryptionRequest.build(1, (1, 2), (1,))
    with pytest.raises((WireError, ValueError)):
        DecryptionRequest.from_bytes(req.to_bytes() + b"x")


def test_non_robust_response_has_no_mask_partials():
    r = Round(seed=8)
    _, _, states = r.run(1)
    resp = r.respond(1, states)
    assert all(not any(k[1] == MASK_PEER for k in x.partials) for x in resp)
    assert all(x.shares for x in resp)
