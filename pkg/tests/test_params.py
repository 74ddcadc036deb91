import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from secagg.graph import edge_probability
from secagg.params import (
    ConfigError,
    ProtocolConfig,
    check,
    chernoff_bound,
    load_config,
    min_decryptors,
    min_neighbors,
    parse_config,
    plan,
    validate,
)

BIG = ProtocolConfig(N=10_000, n=1024, L=60, ell=19, delta=0.01, delta_D=0.01, eta=0.01, eta_D=0.01, kappa=20, k=4)


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def test_validate_examples():
    assert validate(BIG) == []
    bad = validate(BIG.replace(delta_D=0.16, eta_D=0.02))  # 2 delta_D + eta_D = 0.34
    assert "2*delta_D + eta_D < 1/3" in bad
    assert "ell = floor((L-1)/3)" in validate(BIG.replace(L=61))
    assert "eta^k < 2^-kappa" in validate(BIG.replace(k=3))
    assert "0 < n <= N" in validate(BIG.replace(n=20_000))
    assert validate(ProtocolConfig()) == []


def test_check_raises_with_named_violations():
    with pytest.raises(ConfigError, match="delta \\+ eta < 1"):
        check(BIG.replace(delta=0.995, eta=0.006, k=5))


def test_parse_config_roundtrip(tmp_path):
    text = BIG.to_text()
    assert parse_config(text) == BIG
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nN = 40\nn = 12 # trailing\nrobust = yes\n")
    cfg = load_config(p)
    assert (cfg.N, cfg.n, cfg.robust) == (40, 12, True)
    for bad in ("N 40", "nope = 1", "N = forty", "robust = maybe"):
        with pytest.raises(ConfigError):
            parse_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_min_neighbors():
    assert min_neighbors(20, 0.01) == 4  # 0.01^4 = 2^-26.6 < 2^-20, 0.01^3 = 2^-19.9 is not
    for kappa in (6, 20, 40):
        for eta in (0.01, 0.1, 0.3):
            k = min_neighbors(kappa, eta)
            assert eta**k < 2.0**-kappa
            assert k == 1 or eta ** (k - 1) >= 2.0**-kappa


# ---------------------------------------------------------------------------
# min_decryptors
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("target", [1e-3, 1e-6, 1e-9, 1e-12])
def test_min_decryptors_minimal(target):
    L = min_decryptors(None, 0.01, 0.01, target)
    assert (L - 1) % 3 == 0
    assert chernoff_bound(L, 0.01, 0.01) <= target
    assert L == 1 or chernoff_bound(L - 3, 0.01, 0.01) > target


def test_min_decryptors_reference_values():
    # the smallest 3*ell + 1 meeting the Chernoff bound
    assert min_decryptors(None, 0.01, 0.01, 1e-6) == 76
    assert min_decryptors(None, 0.01, 0.01, 1e-12) == 151
    # the commonly quoted L = 60 / 120 sit within a factor 4/3 and double with the exponent
    assert 60 <= 76 <= 60 * 4 / 3 and 120 <= 151 <= 120 * 4 / 3
    assert chernoff_bound(60, 0.01, 0.01) < 1e-4
    assert chernoff_bound(120, 0.01, 0.01) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.25), st.floats(0.0, 0.04), st.floats(1e-15, 0.5))
def test_min_decryptors_monotone_in_eta(eta, delta_D, target):
    if eta + 0.02 >= 1 / 3 - 2 * delta_D:
        return
    assert min_decryptors(None, eta, delta_D, target) <= min_decryptors(None, eta + 0.02, delta_D, target)


def test_min_decryptors_infeasible():
    with pytest.raises(ConfigError, match="infeasible"):
        min_decryptors(None, 1 / 3 - 0.02, 0.01, 1e-6)
    with pytest.raises(ConfigError, match="infeasible"):
        min_decryptors(50, 0.01, 0.01, 1e-6)
    with pytest.raises(ConfigError):
        min_decryptors(None, 0.01, 0.01, 0.0)


@pytest.mark.parametrize(
    "N,eta,delta_D,target",
    [(1000, 0.01, 0.01, 1e-6), (1000, 0.2, 0.02, 1e-2), (1000, 0.15, 0.05, 1e-2), (1000, 0.25, 0.0, 5e-2)],
)
def test_chernoff_bound_holds_for_hypergeometric_sampling(N, eta, delta_D, target):
    L = min_decryptors(N, eta, delta_D, target)
    corrupted = int(eta * N)
    rng = np.random.default_rng([N, L, corrupted])
    draws = rng.hypergeometric(corrupted, N - corrupted, L, size=100_000)
    freq = np.mean(draws > (1 / 3 - 2 * delta_D) * L)
    assert freq <= chernoff_bound(L, eta, delta_D)


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def test_plan_reference_point():
    cfg = plan(N=10_000, n=1024, delta=0.01, delta_D=0.01, eta=0.01, kappa=20, target_prob=1e-6)
    assert cfg.L == 76 and cfg.ell == 25
    assert cfg.k == 4
    assert edge_probability(cfg.rho) >= 0.02
    assert validate(cfg) == []


@pytest.mark.parametrize("N,n", [(500, 100), (2000, 256)])
@pytest.mark.parametrize("eta", [0.01, 0.05, 0.1])
@pytest.mark.parametrize("kappa", [10, 20])
def test_plan_closure(N, n, eta, kappa):
    cfg = plan(N=N, n=n, delta=0.05, delta_D=0.05, eta=eta, kappa=kappa)
    assert validate(cfg) == []
    assert cfg.L == min_decryptors(N, eta, 0.05, 2.0**-kappa)
    try:
        worse = plan(N=N, n=n, delta=0.05, delta_D=0.05, eta=eta + 0.05, kappa=kappa)
    except ConfigError as e:
        assert "infeasible" in str(e)  # more corruption may need more decryptors than N
    else:
        assert worse.L >= cfg.L


def test_plan_infeasible_names_the_bound():
    with pytest.raises(ConfigError, match="infeasible"):
        plan(N=100, n=50, delta=0.01, delta_D=0.01, eta=0.01, kappa=40)
    with pytest.raises(ConfigError, match="infeasible"):
        plan(N=10_000, n=100, delta=0.01, delta_D=0.15, eta=0.05, kappa=20)
