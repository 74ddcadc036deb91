"""Command-line front end: plan, run, attack, bench.

Exit codes: 0 ok, 1 config error, 2 session abort in an honest run,
3 attack audit failure.
"""

from __future__ import annotations

import argparse
import random
import sys
import time
from pathlib import Path

import numpy as np

from .codec import FixedPointCodec
from .graph import edge_probability, required_epsilon
from .params import ConfigError, ProtocolConfig, chernoff_bound, check, load_config, plan
from .sim import EXPECTED, SCRIPTS, Schedule, World, dump_trace, make_script, run_session

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_AUDIT = 0, 1, 2, 3


def _echo(cfg: ProtocolConfig, out) -> None:
    out.write(cfg.to_text())
    out.write(f"# derived: ell = {cfg.ell}, rho = {cfg.rho}, k = {cfg.k}\n")


def _config(args) -> ProtocolConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ProtocolConfig()
    over = {}
    if getattr(args, "rounds", None) is not None:
        over["T"] = args.rounds
    if getattr(args, "robust", False):
        over["robust"] = True
    return check(cfg.replace(**over)) if over else check(cfg)


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def cmd_plan(args) -> int:
    if args.config and args.n is None:
        cfg = check(load_config(args.config))
        _echo(cfg, sys.stdout)
        return EXIT_OK
    base = load_config(args.config) if args.config else ProtocolConfig()
    n = args.n if args.n is not None else base.n
    N = args.N if args.N is not None else max(base.N, n)
    cfg = plan(
        N=N,
        n=n,
        delta=args.delta,
        delta_D=args.delta_D,
        eta=args.eta,
        kappa=args.kappa,
        d=args.d if args.d is not None else base.d,
        T=args.T if args.T is not None else base.T,
        R=args.R if args.R is not None else base.R,
    )
    eps = required_epsilon(n, delta=args.delta, eta=args.eta, target=2.0**-args.kappa)
    _echo(cfg, sys.stdout)
    print(f"# decryptors: L = {cfg.L}, Chernoff bound {chernoff_bound(cfg.L, args.eta, args.delta_D):.3g}")
    print(
        f"# graph: epsilon = {eps.tabulated:.2f} (exact {eps.exact:.4f}), neighbors = {eps.neighbors}, "
        f"rho = {eps.rho} (edge probability {edge_probability(eps.rho):.4f})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _float_workload(codec: FixedPointCodec, seed: int, log: list):
    def make(session, members):
        rng = np.random.default_rng([seed, len(log)])
        floats = {i: rng.uniform(-codec.offset, codec.offset, session.cfg.d) for i in members}
        log.append(floats)
        return {i: codec.encode(x) for i, x in floats.items()}

    return make


def cmd_run(args) -> int:
    cfg = _config(args)
    _echo(cfg, sys.stderr)
    world = World.build(cfg, seed=args.seed)
    schedule = Schedule(report_count=args.drops, seed=args.seed)
    floats: list = []
    codec = FixedPointCodec()
    workload = _float_workload(codec, args.seed, floats) if args.workload == "float" else None
    rep = run_session(world, args.seed, schedule=schedule, keep_trace=bool(args.trace), workload=workload)
    csv = rep.to_csv()
    if args.out:
        Path(args.out).write_text(csv)
    else:
        sys.stdout.write(csv)
    if args.trace and rep.session is not None:
        dump_trace(rep.session.trace, args.trace)
    if rep.setup_abort is not None:
        print(f"setup aborted: {rep.setup_abort}", file=sys.stderr)
        return EXIT_ABORT
    if workload is not None:
        for r, xs in zip(rep.rounds, floats):
            if r.ok:
                k = len(r.survivors)
                err = np.max(np.abs(codec.decode_sum(r.total, k) - sum(xs[i] for i in r.survivors)))
                print(f"round {r.t}: float sum error {err:.3g} (bound {k * codec.resolution:.3g})", file=sys.stderr)
    bad = [r for r in rep.rounds if not r.ok] + [x for x in rep.transfers if not x.ok]
    if bad:
        print(f"{len(bad)} round(s) or transfer(s) failed", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


# ---------------------------------------------------------------------------
# attack
# ---------------------------------------------------------------------------


def _run_attack(name: str, cfg: ProtocolConfig, seed: int, T: int) -> tuple[bool, str]:
    script = make_script(name, seed=seed)
    if script.needs_robust and not cfg.robust:
        cfg = cfg.replace(robust=True)
    world = World.build(cfg, seed=seed)
    R = max(1, T - 1)  # one share transfer inside the run
    rep = run_session(world, seed, T=T, R=R, adversary=script, audit_rounds=True, keep_trace=False)
    outcomes = rep.outcomes()
    expected = EXPECTED[name]
    as_expected = all(o.startswith(expected) for o in outcomes)
    audit_ok = rep.audit is None or rep.audit.ok
    detail = f"outcomes={','.join(outcomes)} expected={expected}"
    if rep.audit is not None:
        detail += f" audited={rep.audit.checked} violations={len(rep.audit.violations)}"
    return as_expected and audit_ok, detail


def cmd_attack(args) -> int:
    cfg = _config(args)
    names = sorted(SCRIPTS) if args.script == "all" else [args.script]
    failed = False
    for name in names:
        if name not in SCRIPTS:
            print(f"unknown script {name!r}; choose from {', '.join(sorted(SCRIPTS))} or all", file=sys.stderr)
            return EXIT_CONFIG
        ok, detail = _run_attack(name, cfg, args.seed, cfg.T)
        print(f"{name}: {'PASS' if ok else 'FAIL'} {detail}")
        failed |= not ok
    return EXIT_AUDIT if failed else EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _timeit(fn, repeat: int) -> float:
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat * 1000


def cmd_bench(args) -> int:
    from .crypto.elgamal import encrypt, keygen
    from .crypto.group import FixedBase, base_mul, random_scalar
    from .crypto.hash_to_curve import encode_to_group
    from .crypto.prg import prg
    from .crypto.signing import SigningKey
    from .sim.runner import run_round, setup_session

    cfg = _config(args)
    rng = random.Random(args.seed)
    rep = args.repeat
    sk, pk = keygen(rng)
    table = FixedBase(pk)
    h = base_mul(random_scalar(rng))
    signer = SigningKey.generate(rng)
    counter = iter(range(1 << 30))
    rows = [
        ("elgamal encrypt (fixed base)", _timeit(lambda: encrypt(table, h, rng), rep)),
        ("partial decryption c0^s", _timeit(lambda: h * sk, rep)),
        ("ecdsa sign", _timeit(lambda: signer.sign(b"x" * 100), rep)),
        ("encode to group", _timeit(lambda: encode_to_group(next(counter).to_bytes(16, "big")), rep)),
        (f"prg expand d={cfg.d}", _timeit(lambda: prg(b"k" * 16, cfg.d), rep)),
    ]
    world = World.build(cfg, seed=args.seed)
    t0 = time.perf_counter()
    session = setup_session(world, args.seed, keep_trace=False)
    rows.append(("setup (dkg + pk distribution)", (time.perf_counter() - t0) * 1000))
    if isinstance(session, str):
        print(f"setup aborted: {session}", file=sys.stderr)
        return EXIT_ABORT
    world.rounds_used += cfg.T
    t0 = time.perf_counter()
    m = run_round(session, 1)
    rows.append((f"collection round (n={cfg.n}, all roles)", (time.perf_counter() - t0) * 1000))
    print(f"# single-threaded measurements on this machine; N={cfg.N} n={cfg.n} d={cfg.d} L={cfg.L}")
    for label, ms in rows:
        print(f"{label:40s} {ms:10.3f} ms")
    print(f"# round outcome {m.outcome}, server in {m.bytes_server_in} B, out {m.bytes_server_out} B")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="secagg", description="Multi-round secure aggregation simulator")
    sub = p.add_subparsers(dest="cmd", required=True)

    pl = sub.add_parser("plan", help="derive and validate a configuration")
    pl.add_argument("--config", help="validate and echo this file (or use it as the base)")
    pl.add_argument("--N", type=int, default=None, help="total clients")
    pl.add_argument("--n", type=int, default=None, help="clients per round")
    pl.add_argument("--delta", type=float, default=0.01)
    pl.add_argument("--delta-D", dest="delta_D", type=float, default=0.01)
    pl.add_argument("--eta", type=float, default=0.01)
    pl.add_argument("--kappa", type=int, default=20)
    pl.add_argument("--d", type=int, default=None)
    pl.add_argument("--T", type=int, default=None)
    pl.add_argument("--R", type=int, default=None)
    pl.set_defaults(func=cmd_plan)

    for name, func, hlp in (
        ("run", cmd_run, "run one session and write the per-round CSV"),
        ("attack", cmd_attack, "run an adversary script and audit the transcript"),
        ("bench", cmd_bench, "time crypto micro-operations and one round"),
    ):
        sp = sub.add_parser(name, help=hlp)
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--rounds", type=int, default=None, help="T")
        sp.add_argument("--robust", action="store_true", help="DLEQ-checked reconstruction")
        sp.set_defaults(func=func)
        if name == "run":
            sp.add_argument("--out", help="CSV path (default stdout)")
            sp.add_argument("--trace", help="write the binary event trace here")
            sp.add_argument("--drops", type=int, default=0, help="random report dropouts per round")
            sp.add_argument("--workload", choices=("u32", "float"), default="u32")
        elif name == "attack":
            sp.add_argument("--script", default="all", help=f"one of {', '.join(sorted(SCRIPTS))} or all")
        else:
            sp.add_argument("--repeat", type=int, default=200)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
