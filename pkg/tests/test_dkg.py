import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secagg.crypto.group import GENERATOR, ORDER, base_mul
from secagg.crypto.shamir import reconstruct
from secagg.dkg import (
    Abort,
    Fault,
    Phase,
    Stage,
    commit_eval,
    fshare,
    fverify,
    pshare,
    pverify,
    run_dkg,
    transfer_shares,
)

from .helpers import StarvingProxy, check_dkg_trial, make_keys, random_dkg_trial

KEYS, DIRECTORY = make_keys(range(1, 21), seed=11)


def _sk(states, ell):
    fin = sorted(states.items())[: ell + 1]
    return reconstruct({s.position: s.share for _, s in fin}, ell)


# ---------------------------------------------------------------------------
# VSS
# ---------------------------------------------------------------------------


@settings(max_examples=10, deadline=None)
@given(st.integers(0, ORDER - 1), st.integers(0, 3), st.randoms())
def test_feldman_shares_verify(secret, ell, rnd):
    L = 3 * ell + 1
    shares, commits = fshare(secret, ell, L, rnd)[:2]
    assert len(commits) == ell + 1
    assert commits[0] == base_mul(secret)
    for j in range(1, L + 1):
        assert fverify(j, shares[j], commits)
        assert not fverify(j, (shares[j] + 1) % ORDER, commits)
        assert commit_eval(commits, j) == base_mul(shares[j])


def test_pedersen_shares_verify_and_hide():
    rng = random.Random(12)
    shares, aux, commits = pshare(5, 2, 7, rng)[:3]
    for j in range(1, 8):
        assert pverify(j, shares[j], aux[j], commits)
        assert not pverify(j, shares[j], (aux[j] + 1) % ORDER, commits)
    # the constant commitment is not g^secret
    assert commits[0] != base_mul(5)


# ---------------------------------------------------------------------------
# DKG runs
# ---------------------------------------------------------------------------


def test_honest_dkg():
    parties = [1, 2, 3, 4, 5, 6, 7]
    rng = random.Random(13)
    res = run_dkg(KEYS, DIRECTORY, parties, 2, 0.01, rng)
    fin = res.finishers()
    assert sorted(fin) == parties
    (qual,) = {s.qual for s in fin.values()}
    assert qual == tuple(parties)
    pk = fin[1].public_key
    secrets = sum(s.dealing.poly[0] for s in res.states.values()) % ORDER
    assert pk == base_mul(secrets)
    for subset in itertools.combinations(parties, 3):
        assert base_mul(reconstruct({fin[p].position: fin[p].share for p in subset}, 2)) == pk
    for p, s in fin.items():
        assert s.verification_keys[p] == GENERATOR * s.share


@pytest.mark.parametrize(
    "fault,in_qual",
    [
        (Fault(bad_share_to=frozenset({2, 3})), True),  # answers complaints in public
        (Fault(bad_share_to=frozenset({2}), refuse_reveal=True), False),
        (Fault(bad_feldman=True), True),  # reconstructed from the others' shares
        (Fault(silent=True), False),
    ],
)
def test_single_bad_dealer(fault, in_qual):
    parties = [1, 2, 3, 4, 5, 6, 7]
    rng = random.Random(14)
    # delta_D = 0.15 tolerates one missing dealing out of seven
    res = run_dkg(KEYS, DIRECTORY, parties, 2, 0.15, rng, faults={7: fault})
    honest = parties[:-1]
    fin = res.finishers(honest)
    assert sorted(fin) == honest
    (qual,) = {s.qual for s in fin.values()}
    assert (7 in qual) == in_qual
    pk = fin[1].public_key
    expected = sum(res.states[d].dealing.poly[0] for d in qual) % ORDER
    assert pk == base_mul(expected)
    assert base_mul(_sk(fin, 2)) == pk


def test_withheld_cross_check_quorum_aborts():
    parties = [1, 2, 3, 4]
    # party 1 never hears anyone's QUAL vote, so it cannot reach 2*ell + 1 copies
    plan = {(Phase.QUAL, p): frozenset({1}) for p in parties}
    res = run_dkg(KEYS, DIRECTORY, parties, 1, 0.01, random.Random(15), StarvingProxy(plan))
    assert res.states[1].stage == Stage.ABORTED
    assert res.states[1].abort is not None
    assert res.states[1].share is None


def test_missing_dealing_beyond_delta_D_aborts_everyone():
    parties = [1, 2, 3, 4, 5, 6, 7]
    res = run_dkg(KEYS, DIRECTORY, parties, 2, 0.01, random.Random(14), faults={7: Fault(silent=True)})
    assert all(res.states[p].abort == Abort.INSUFFICIENT_SHARES for p in parties[:-1])


def test_too_many_silent_dealers_abort():
    parties = [1, 2, 3, 4]
    faults = {p: Fault(silent=True) for p in (2, 3, 4)}
    res = run_dkg(KEYS, DIRECTORY, parties, 1, 0.01, random.Random(16), faults=faults)
    assert res.states[1].stage == Stage.ABORTED
    assert isinstance(res.states[1].abort, Abort)


def test_random_trials_keep_agreement():
    outcomes = set()
    for seed in range(60):
        trial = random_dkg_trial(KEYS, DIRECTORY, seed)
        assert check_dkg_trial(trial) == [], seed
        outcomes.add(trial.outcome)
    assert "all-finish" in outcomes


# ---------------------------------------------------------------------------
# share transfer
# ---------------------------------------------------------------------------


def _setup(parties, ell, seed):
    res = run_dkg(KEYS, DIRECTORY, parties, ell, 0.01, random.Random(seed))
    fin = res.finishers()
    first = fin[min(fin)]
    return {p: s.share for p, s in fin.items()}, first.public_key, dict(first.verification_keys)


def test_transfer_preserves_secret():
    old = [1, 2, 3, 4]
    shares, pk, vks = _setup(old, 1, 17)
    new = [5, 6, 7, 8, 9, 10, 11]
    res = transfer_shares(KEYS, DIRECTORY, shares, old, new, 1, 2, 0.01, pk, vks, 1, random.Random(18))
    fin = res.finishers(new)
    assert sorted(fin) == new
    for subset in itertools.combinations(new, 3):
        pts = {fin[p].position: fin[p].share for p in subset}
        assert base_mul(reconstruct(pts, 2)) == pk
    for p, s in fin.items():
        assert s.public_key == pk
        assert s.verification_keys[p] == base_mul(s.share)


def test_transfer_with_overlap_and_bad_dealer():
    old = [1, 2, 3, 4]
    shares, pk, vks = _setup(old, 1, 19)
    new = [3, 4, 5, 6]
    faults = {2: Fault(bad_share_to=frozenset({5}), refuse_reveal=True)}
    res = transfer_shares(KEYS, DIRECTORY, shares, old, new, 1, 1, 0.01, pk, vks, 2, random.Random(20), faults=faults)
    fin = res.finishers(new)
    assert sorted(fin) == new
    assert 2 not in fin[3].qual
    assert base_mul(_sk(fin, 1)) == pk


def test_transfer_rejects_dealer_with_wrong_share():
    old = [1, 2, 3, 4]
    shares, pk, vks = _setup(old, 1, 21)
    forged = dict(shares)
    forged[4] = (forged[4] + 1) % ORDER  # its dealing no longer matches g^{s_4}
    new = [5, 6, 7, 8]
    res = transfer_shares(KEYS, DIRECTORY, forged, old, new, 1, 1, 0.01, pk, vks, 3, random.Random(22))
    fin = res.finishers(new)
    assert fin, "three honest old dealers suffice"
    assert all(4 not in s.qual for s in fin.values())
    assert base_mul(_sk(fin, 1)) == pk
