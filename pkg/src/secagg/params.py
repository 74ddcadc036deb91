"""Protocol parameters: the config record, validation and parameter planning."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .graph import required_epsilon


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolConfig:
    N: int = 256  # total clients
    T: int = 5  # rounds
    n: int = 64  # per-round cohort size n_t
    d: int = 256  # vector length
    delta: float = 0.05  # client dropout fraction
    delta_D: float = 0.1  # decryptor dropout fraction
    eta: float = 0.01  # corrupted fraction of all clients
    eta_D: float = 0.1  # corrupted fraction among decryptors
    L: int = 10  # decryptors
    ell: int = 3  # Shamir threshold, floor((L-1)/3)
    rho: int = 3  # edge probability eps = 2^-rho
    R: int = 5  # share transfer period (rounds)
    kappa: int = 6  # statistical security parameter
    lam: int = 128  # computational security parameter (bits)
    k: int = 1  # min online neighbours per online client
    timeout_report_ms: int = 1000
    timeout_check_ms: int = 1000
    timeout_recon_ms: int = 1000
    robust: bool = False

    @property
    def epsilon(self) -> float:
        return 2.0 ** -self.rho

    @property
    def seed_bytes(self) -> int:
        return self.lam // 8

    def replace(self, **kw) -> "ProtocolConfig":
        return replace(self, **kw)

    def to_text(self) -> str:
        lines = [f"{k} = {_fmt(v)}" for k, v in asdict(self).items()]
        lines.append(f"# derived: epsilon = {self.epsilon}, quorum = {2 * self.ell + 1}")
        return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(name: str, typ, raw: str):
    raw = raw.strip()
    try:
        if typ in (bool, "bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    raise ConfigError(f"{name}: unsupported type")  # pragma: no cover


def parse_config(text: str, base: ProtocolConfig | None = None) -> ProtocolConfig:
    """Parse flat ``key = value`` lines; '#' starts a comment."""
    types = {f.name: f.type for f in fields(ProtocolConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], raw)
    return replace(base or ProtocolConfig(), **values)


def load_config(path: str | Path) -> ProtocolConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    return parse_config(text)


def min_neighbors(kappa: float, eta: float) -> int:
    """Smallest k with eta^k < 2^-kappa."""
    if eta <= 0:
        return 1
    if eta >= 1:
        raise ConfigError("eta must be below 1")
    return max(1, math.floor(kappa / math.log2(1 / eta)) + 1)


def validate(cfg: ProtocolConfig) -> list[str]:
    """Return the list of violated constraints (empty when the config is usable)."""
    bad = []
    if cfg.N < 1:
        bad.append("N >= 1")
    if not 0 < cfg.n <= cfg.N:
        bad.append("0 < n <= N")
    if cfg.T < 1:
        bad.append("T >= 1")
    if cfg.d < 1:
        bad.append("d >= 1")
    if not 1 <= cfg.L <= cfg.N:
        bad.append("1 <= L <= N")
    if cfg.ell != (cfg.L - 1) // 3:
        bad.append("ell = floor((L-1)/3)")
    if 3 * cfg.ell + 1 > cfg.L:
        bad.append("3*ell + 1 <= L")
    for name in ("delta", "delta_D", "eta", "eta_D"):
        if not 0 <= getattr(cfg, name) < 1:
            bad.append(f"0 <= {name} < 1")
    if not cfg.delta_D + cfg.eta_D < 1 / 3:
        bad.append("delta_D + eta_D < 1/3")
    if not 2 * cfg.delta_D + cfg.eta_D < 1 / 3:
        bad.append("2*delta_D + eta_D < 1/3")
    if not cfg.delta + cfg.eta < 1:
        bad.append("delta + eta < 1")
    if cfg.k < 1 or not cfg.eta ** cfg.k < 2.0 ** -cfg.kappa:
        bad.append("eta^k < 2^-kappa")
    if cfg.rho < 0:
        bad.append("rho >= 0")
    if cfg.R < 1:
        bad.append("R >= 1")
    if cfg.lam not in (128, 256):
        bad.append("lam in {128, 256}")
    if cfg.kappa < 1:
        bad.append("kappa >= 1")
    for name in ("timeout_report_ms", "timeout_check_ms", "timeout_recon_ms"):
        if getattr(cfg, name) <= 0:
            bad.append(f"{name} > 0")
    return bad


def check(cfg: ProtocolConfig) -> ProtocolConfig:
    bad = validate(cfg)
    if bad:
        raise ConfigError("violated: " + "; ".join(bad))
    return cfg


def chernoff_bound(L: int, eta: float, delta_D: float) -> float:
    """exp(-2 L (1/3 - eta - 2 delta_D)^2)."""
    c = 1 / 3 - eta - 2 * delta_D
    return math.exp(-2 * L * c * c)


def min_decryptors(N: int | None, eta: float, delta_D: float, target_prob: float) -> int:
    """Smallest L = 3*ell + 1 whose Chernoff bound is at most ``target_prob``.

    ``N`` only caps the answer (L <= N).
    """
    c = 1 / 3 - eta - 2 * delta_D
    if c <= 1e-9:  # the boundary itself is infeasible, whatever the float rounding says
        raise ConfigError("infeasible: need eta < 1/3 - 2*delta_D")
    if not 0 < target_prob < 1:
        raise ConfigError("infeasible: target probability must lie in (0, 1)")
    need = math.log(1 / target_prob) / (2 * c * c)
    ell = max(0, math.ceil((need - 1) / 3 - 1e-12))
    L = 3 * ell + 1
    while chernoff_bound(L, eta, delta_D) > target_prob:  # guard against rounding
        L += 3
    if N is not None and L > N:
        raise ConfigError(f"infeasible: need L = {L} decryptors but N = {N}")
    return L


def plan(
    N: int,
    n: int,
    delta: float,
    delta_D: float,
    eta: float,
    kappa: int,
    d: int = 256,
    T: int = 10,
    R: int = 5,
    target_prob: float | None = None,
) -> ProtocolConfig:
    """Derive a validated configuration from the threat-model parameters."""
    target = 2.0 ** -kappa if target_prob is None else target_prob
    L = min_decryptors(N, eta, delta_D, target)
    choice = required_epsilon(n, delta=delta, eta=eta, target=target)
    # largest corrupted-decryptor fraction the Chernoff step certifies
    eta_D = (math.ceil((1 / 3 - 2 * delta_D) * L) - 1) / L
    cfg = ProtocolConfig(
        N=N,
        T=T,
        n=n,
        d=d,
        delta=delta,
        delta_D=delta_D,
        eta=eta,
        eta_D=eta_D,
        L=L,
        ell=(L - 1) // 3,
        rho=choice.rho,
        R=R,
        kappa=kappa,
        k=min_neighbors(kappa, eta),
    )
    bad = validate(cfg)
    if bad:
        raise ConfigError("infeasible: " + "; ".join(bad))
    return cfg
