"""Command-line front end.

Subcommands: rate, scan-n, scan-noise, simulate, witness, verify.
Exit codes: 0 success, 1 verification failure, 2 bad arguments,
3 simulation failure, 4 inconclusive witness.  CSV output uses '.' decimals,
'\\n' line endings, a header row, and 9 significant digits, so identical
flags (and seed) reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import keyrate, protocol, witness as witness_mod
from .errors import CapacityError, CkasimError, EstimationError, ValidationError
from .qstate import DensityMatrix
from .states import (
    GhzMixtureSpec,
    Partition,
    all_partitions,
    random_separable_spec,
)

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_BAD_ARGS = 2
EXIT_SIMULATION = 3
EXIT_INCONCLUSIVE = 4


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def _write_lines(lines: list[str], path: str | None) -> None:
    text = "\n".join(lines) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _cmd_rate(args) -> int:
    report = keyrate.rate_nbb84(args.n, args.k, args.p)
    payload = {
        "n": args.n,
        "k": args.k,
        "p": args.p,
        "r_infinity": report.r_infinity,
        "r_unclamped": report.r_unclamped,
        "h_x_given_e": report.h_x_given_e,
        "leak_terms": list(report.leak_terms),
        "worst_bob": report.worst_bob,
        "method": report.method,
    }
    print(json.dumps(payload))
    return EXIT_OK


def _cmd_scan_n(args) -> int:
    if (args.k is None) == (args.k_offset is None):
        raise ValidationError("provide exactly one of --k or --k-offset")
    if args.n_min > args.n_max:
        raise ValidationError("empty range: --n-min exceeds --n-max")
    lines = ["n,k,r_nbb84,r_bipartite,biseparable"]
    emitted = 0
    for n in range(args.n_min, args.n_max + 1):
        k = args.k if args.k is not None else n - args.k_offset
        if k < 2 or k > n:
            continue
        r = keyrate.rate_nbb84(n, k, 0.0).r_infinity
        rb = keyrate.rate_bipartite_concat(n, 0.0)
        flag = "true" if k <= n - 1 else "false"
        lines.append(f"{n},{k},{_fmt(r)},{_fmt(rb)},{flag}")
        emitted += 1
    if emitted == 0:
        raise ValidationError("no valid (n, k) rows in the requested range")
    _write_lines(lines, args.output)
    return EXIT_OK


def _cmd_scan_noise(args) -> int:
    ks = [int(tok) for tok in args.k_list.split(",") if tok]
    if not ks or args.steps < 2 or not 0 <= args.p_min < args.p_max <= 1:
        raise ValidationError("empty or invalid noise grid")
    for k in ks:
        if k < 2 or k > args.n:
            raise ValidationError(f"k={k} invalid for n={args.n}")
    ps = np.linspace(args.p_min, args.p_max, args.steps)
    header = "p," + ",".join(f"r_k{k}" for k in ks) + ",r_bipartite"
    lines = [header]
    rates = {k: [] for k in ks}
    for p in ps:
        cells = [_fmt(p)]
        for k in ks:
            r = keyrate.rate_nbb84(args.n, k, float(p)).r_infinity
            rates[k].append(r)
            cells.append(_fmt(r))
        cells.append(_fmt(keyrate.rate_bipartite_concat(args.n, float(p))))
        lines.append(",".join(cells))
    for k in ks:
        try:
            p_star = keyrate.noise_threshold(args.n, k)
            lines.append(f"# p_star k={k}: {_fmt(p_star)}")
        except CkasimError as exc:
            lines.append(f"# p_star k={k}: none ({exc})")
    for k in ks:
        crossing = None
        for p, r in zip(ps, rates[k]):
            if keyrate.rate_bipartite_concat(args.n, float(p)) > r:
                crossing = float(p)
                break
        lines.append(
            f"# crossing k={k}: " + (_fmt(crossing) if crossing is not None else "none")
        )
    _write_lines(lines, args.output)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    spec = GhzMixtureSpec(args.n, args.k, noise_p=args.p)
    cfg = protocol.ProtocolConfig(spec, args.rounds, args.test_fraction, args.seed)
    report = protocol.run_protocol(cfg)
    params = keyrate.closed_form_params(args.n, args.k, args.p)
    r_closed = max(
        0.0,
        1.0
        - keyrate.binary_entropy(params.q_x)
        - max(keyrate.binary_entropy(q) for q in params.q_ab),
    )
    if args.format == "json":
        payload = dataclasses.asdict(report)
        payload.update({"n": args.n, "k": args.k, "p": args.p, "r_closed": r_closed})
        print(json.dumps(payload))
    else:
        z_vals = [protocol._z_score(report.q_x_hat, params.q_x, report.round_counts[0])]
        z_vals += [
            protocol._z_score(est, truth, report.round_counts[1])
            for est, truth in zip(report.q_ab_hat, params.q_ab)
        ]
        lines = [
            "n,k,p,rounds,q_x_hat,q_ab_hat_max,r_hat,r_closed,z_max",
            ",".join(
                [str(args.n), str(args.k), _fmt(args.p), str(args.rounds),
                 _fmt(report.q_x_hat), _fmt(max(report.q_ab_hat)), _fmt(report.r_hat),
                 _fmt(r_closed), _fmt(max(abs(z) for z in z_vals))]
            ),
        ]
        _write_lines(lines, args.output)
    return EXIT_OK


def _load_target_table(args, meas):
    if args.state_file:
        with open(args.state_file) as fh:
            rho = DensityMatrix.from_debug_json(fh.read())
        if rho.qubit_count != args.n:
            raise ValidationError(
                f"--state-file has {rho.qubit_count} qubits, expected {args.n}"
            )
        return witness_mod.statistics_of(rho, meas)
    from .states import build_ghz_mixture

    spec = GhzMixtureSpec(args.n, args.k, noise_p=args.p)
    if args.k > args.n - 1:
        print("warning: k = N gives a single GHZ term; biseparability needs k <= N-1",
              file=sys.stderr)
    return witness_mod.statistics_of(build_ghz_mixture(spec), meas)


def _cmd_witness(args) -> int:
    meas = witness_mod.nbb84_measurements(args.n)
    target = _load_target_table(args, meas)
    if args.partition == "all":
        partitions = all_partitions(args.n)
    else:
        partitions = [Partition.from_string(args.partition, args.n)]
    opts = witness_mod.FindWitnessOptions(
        max_cuts=args.max_cuts, tol=args.tol, restarts=args.restarts, seed=args.seed
    )
    certificates = []
    any_inconclusive = False
    for part in partitions:
        cert = witness_mod.find_witness(target, part, meas, opts)
        if cert.status == "separated" and args.n <= 3:
            grid_min = witness_mod.grid_product_minimum(cert.witness, meas)
            cert = dataclasses.replace(cert, grid_min=grid_min, oracle="grid")
        certificates.append(cert)
        if cert.status == "inconclusive":
            any_inconclusive = True
    docs = [json.loads(c.to_json()) for c in certificates]
    payload = docs[0] if len(docs) == 1 else docs
    text = json.dumps(payload)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_INCONCLUSIVE if any_inconclusive else EXIT_OK


def _verify_appendix(lines: list[str]) -> str | None:
    grid = [(n, k) for n in range(2, 6) for k in range(2, n + 1)]
    for n, k in grid:
        report = keyrate.rate_entropy_numeric(GhzMixtureSpec(n, k))
        err = abs(report.h_x_given_e - 1.0)
        ok = err <= 1e-9
        lines.append(
            f"{'PASS' if ok else 'FAIL'} eve-blind N={n} k={k} p=0 "
            f"|H(X|E)-1|={err:.3e} (tol 1e-9)"
        )
        if not ok:
            return f"eve-blind N={n} k={k}"
    for n, k in grid:
        gap = abs(
            keyrate.rate_entropy_numeric(GhzMixtureSpec(n, k)).r_infinity
            - keyrate.rate_nbb84(n, k, 0.0).r_infinity
        )
        ok = gap <= 1e-8
        lines.append(
            f"{'PASS' if ok else 'FAIL'} cross-method N={n} k={k} p=0 "
            f"|entropy-closed|={gap:.3e} (tol 1e-8)"
        )
        if not ok:
            return f"cross-method N={n} k={k}"
    for n, k in [(2, 2), (3, 2), (3, 3), (4, 3)]:
        for p in (0.05, 0.1):
            diff = (
                keyrate.rate_entropy_numeric(GhzMixtureSpec(n, k, noise_p=p)).r_unclamped
                - keyrate.rate_nbb84(n, k, p).r_unclamped
            )
            ok = diff >= -1e-9
            lines.append(
                f"{'PASS' if ok else 'FAIL'} noisy-dominance N={n} k={k} p={p} "
                f"entropy-closed={diff:.3e} (tol -1e-9)"
            )
            if not ok:
                return f"noisy-dominance N={n} k={k} p={p}"
    return None


def _verify_theorem1(lines: list[str], seed: int) -> str | None:
    rng = np.random.default_rng(seed)
    partitions = all_partitions(3)
    for trial in range(100):
        part = partitions[trial % len(partitions)]
        spec = random_separable_spec(part, term_count=2 + trial % 4, rng=rng)
        report = keyrate.verify_no_key_separable(spec)
        ok = report.chain_holds and report.passes
        lines.append(
            f"{'PASS' if ok else 'FAIL'} no-key-separable trial={trial} "
            f"partition={part.label()} min_leak={report.min_leak:.6f} "
            f"H(X|E_tot)={report.h_x_given_e_total:.6f} rate={report.implied_rate:.3e} "
            f"(tol 1e-9)"
        )
        if not ok:
            return f"no-key-separable trial={trial}"
    return None


def _cmd_verify(args) -> int:
    lines: list[str] = []
    failed: str | None = None
    if args.suite in ("appendix", "all"):
        failed = failed or _verify_appendix(lines)
    if args.suite in ("theorem1", "all"):
        failed = failed or _verify_theorem1(lines, args.seed)
    print("\n".join(lines))
    if failed:
        print(f"FAILED: {failed}")
        return EXIT_VERIFY_FAIL
    print("all checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckasim",
        description="Conference key rates, protocol simulation, and partition witnesses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_rate = sub.add_parser("rate", help="closed-form key rate for one (N, k, p)")
    p_rate.add_argument("--n", type=int, required=True)
    p_rate.add_argument("--k", type=int, required=True)
    p_rate.add_argument("--p", type=float, default=0.0)
    p_rate.set_defaults(func=_cmd_rate)

    p_scan = sub.add_parser("scan-n", help="rate vs party count (CSV)")
    p_scan.add_argument("--k", type=int)
    p_scan.add_argument("--k-offset", type=int)
    p_scan.add_argument("--n-min", type=int, required=True)
    p_scan.add_argument("--n-max", type=int, required=True)
    p_scan.add_argument("--output")
    p_scan.set_defaults(func=_cmd_scan_n)

    p_noise = sub.add_parser("scan-noise", help="rate vs depolarizing noise (CSV)")
    p_noise.add_argument("--n", type=int, required=True)
    p_noise.add_argument("--k-list", required=True)
    p_noise.add_argument("--p-min", type=float, default=0.0)
    p_noise.add_argument("--p-max", type=float, default=0.3)
    p_noise.add_argument("--steps", type=int, default=200)
    p_noise.add_argument("--output")
    p_noise.set_defaults(func=_cmd_scan_noise)

    p_sim = sub.add_parser("simulate", help="Monte Carlo protocol run")
    p_sim.add_argument("--n", type=int, required=True)
    p_sim.add_argument("--k", type=int, required=True)
    p_sim.add_argument("--p", type=float, default=0.0)
    p_sim.add_argument("--rounds", type=int, required=True)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--test-fraction", type=float, default=0.1)
    p_sim.add_argument("--format", choices=("csv", "json"), default="csv")
    p_sim.add_argument("--output")
    p_sim.set_defaults(func=_cmd_simulate)

    p_wit = sub.add_parser("witness", help="cutting-plane witness search")
    p_wit.add_argument("--n", type=int, required=True)
    p_wit.add_argument("--k", type=int)
    p_wit.add_argument("--p", type=float, default=0.0)
    p_wit.add_argument("--partition", required=True,
                       help='e.g. "A|B1B2", or "all" for every bipartition')
    p_wit.add_argument("--max-cuts", type=int, default=200)
    p_wit.add_argument("--tol", type=float, default=1e-6)
    p_wit.add_argument("--restarts", type=int, default=20)
    p_wit.add_argument("--seed", type=int, default=2024)
    p_wit.add_argument("--state-file", help="target state as debug JSON instead of the family")
    p_wit.add_argument("--output")
    p_wit.set_defaults(func=_cmd_witness)

    p_ver = sub.add_parser("verify", help="numerical verification suites")
    p_ver.add_argument("--suite", choices=("appendix", "theorem1", "all"), required=True)
    p_ver.add_argument("--seed", type=int, default=7)
    p_ver.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "witness" and args.state_file is None and args.k is None:
        parser.error("witness needs --k unless --state-file is given")
    try:
        return args.func(args)
    except EstimationError as exc:
        print(f"simulation failure: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except (ValidationError, CapacityError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS


if __name__ == "__main__":
    sys.exit(main())
