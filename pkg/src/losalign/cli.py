"""Batch experiment runner.

Subcommands: solve, ir, check3, gap, converse, ofdm-precode, ofdm-schedule,
ofdm-rank.  Every run embeds its fully-resolved configuration (seed
included) in the output, writes atomically, and is byte-reproducible from
that echo.  Exit codes: 0 ok, 2 config/domain error, 3 size or feasibility
error, 4 internal assertion.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from fractions import Fraction

import numpy as np

from . import converse, dp, gap, numtheory, ofdm
from .channel import ChannelInstance, normalize, sample_channel
from .errors import DomainError, SizeError
from .graph import brute_force_optimum, build_graph, is_feasible, rate_report

BRUTE_CHECK_CAP = 24


def _parse_channel(spec: str, seed: int) -> ChannelInstance:
    if spec is None:
        raise DomainError("a --channel source is required")
    spec = spec.strip()
    if spec.startswith("{"):
        return ChannelInstance.from_json_dict(json.loads(spec))
    if spec.startswith("random:"):
        params = {}
        for part in spec[len("random:"):].split(","):
            if not part:
                continue
            key, _, val = part.partition("=")
            params[key.strip()] = val.strip()
        try:
            k = int(params["K"])
            big_l = int(params["L"])
        except KeyError as exc:
            raise DomainError(f"random channel spec needs {exc}") from exc
        ch_seed = int(params.get("seed", seed))
        return sample_channel(k, big_l, rng=ch_seed,
                              psd_over_n0=float(params.get("psd", 1.0)))
    if not os.path.exists(spec):
        raise DomainError(f"channel file not found: {spec}")
    return ChannelInstance.from_json(spec)


def _atomic_write(path: str | None, text: str):
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _emit(args, config: dict, result: dict, csv_rows: list | None = None):
    if args.format == "csv":
        if csv_rows is None:
            raise DomainError("this command has no CSV form; use --format json")
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow([f"# config {json.dumps(config, sort_keys=True)}"])
        for row in csv_rows:
            writer.writerow(row)
        _atomic_write(args.out, buf.getvalue())
    else:
        doc = {"config": config, "result": result}
        _atomic_write(args.out, json.dumps(doc, indent=2, sort_keys=True))


def _config_echo(args, **extra) -> dict:
    cfg = {"command": args.command, "seed": args.seed, "format": args.format}
    if getattr(args, "channel", None) is not None:
        cfg["channel"] = args.channel
    cfg.update(extra)
    return cfg


def _frac(x) -> str:
    return str(x) if isinstance(x, Fraction) else repr(float(x))


def cmd_solve(args) -> int:
    ch = _parse_channel(args.channel, args.seed)
    nc = normalize(ch)
    res = dp.solve_finite(nc, args.T, boundary=args.boundary,
                          detect_period=True)
    g = build_graph(nc, args.T)
    feasible = is_feasible(res.pattern, g)
    report = rate_report(res.pattern, nc)
    check = "skipped"
    if nc.K * args.T <= BRUTE_CHECK_CAP:
        bf = brute_force_optimum(g, nc.r)
        check = "ok" if abs(bf.objective - res.objective) < 1e-9 else "MISMATCH"
    result = {
        "objective": res.objective,
        "pattern": res.pattern.to_json_dict(),
        "feasible": feasible,
        "per_user_counts": list(report.counts),
        "per_user_bits": list(report.per_user_bits),
        "per_slot_rate": report.per_slot_rate,
        "period": res.period,
        "brute_force_check": check,
    }
    if args.state_stats:
        ss = dp.enumerate_states(nc)
        rows = [list(ss.stats().keys()), list(ss.stats().values())]
        buf = io.StringIO()
        w = csv.writer(buf)
        for row in rows:
            w.writerow(row)
        _atomic_write(args.state_stats, buf.getvalue())
    _emit(args, _config_echo(args, T=args.T, boundary=args.boundary), result)
    return 0


def cmd_ir(args) -> int:
    ch = _parse_channel(args.channel, args.seed)
    nc = normalize(ch)
    res = dp.independence_rate(nc, weights=args.weights)
    result = {
        "independence_rate": _frac(res.value),
        "independence_rate_float": res.value_float,
        "n_states": res.n_states,
        "period": res.pattern.period if res.pattern else None,
        "periodic_pattern": res.pattern.to_json_dict() if res.pattern else None,
    }
    _emit(args, _config_echo(args, weights=args.weights), result)
    return 0


def cmd_check3(args) -> int:
    ch = _parse_channel(args.channel, args.seed)
    nc = normalize(ch)
    verdict = numtheory.theorem3_check(nc)
    result = {
        "achievable": verdict.achievable,
        "sums": {
            "l": verdict.sums.l, "l1": verdict.sums.l1,
            "l2": verdict.sums.l2, "l3": verdict.sums.l3,
        },
        "gammas": [str(verdict.sums.gamma1), str(verdict.sums.gamma2),
                   str(verdict.sums.gamma3), str(verdict.sums.gamma)],
        "pattern_count": verdict.pattern_count,
        "witness": verdict.witness.to_json_dict() if verdict.witness else None,
    }
    if args.enumerate_witnesses and verdict.achievable:
        pats = numtheory.enumerate_half_rate_patterns(nc)
        result["all_patterns"] = [p.to_json_dict() for p in pats]
    _emit(args, _config_echo(args), result)
    return 0


def cmd_gap(args) -> int:
    if args.theorem1:
        l_rule = {"kind": "theorem1"}
    elif args.L is not None:
        l_rule = {"kind": "explicit", "L": args.L}
    else:
        raise DomainError("gap needs --theorem1 or --L")
    rep = gap.monte_carlo_rate(args.K, args.epsilon, l_rule,
                               trials=args.trials, seed=args.seed)
    result = {
        "K": rep.K, "N": rep.N, "epsilon": rep.epsilon, "L": rep.L, "A": rep.A,
        "trials": rep.trials,
        "mean_clean_fraction": rep.mean_clean,
        "stderr": rep.stderr_clean,
        "ci95": list(rep.ci95_clean),
        "mean_density": rep.mean_density,
        "analytic_target": rep.analytic_target,
        "limit": rep.limit,
    }
    cfg = _config_echo(args, K=args.K, epsilon=args.epsilon,
                       trials=args.trials, L_rule=l_rule)
    _emit(args, cfg, result, csv_rows=rep.csv_rows())
    return 0


def cmd_converse(args) -> int:
    k_list = [int(x) for x in args.K_list.split(",") if x]
    if args.L_rule == "square":
        l_of_k = lambda k: k * k    # noqa: E731
        l_desc = "K^2"
    else:
        l_of_k = args.L
        l_desc = args.L
        if args.L is None:
            raise DomainError("converse needs --L or --L-rule square")
    rows = converse.scaling_curve(k_list, l_of_k, trials=args.trials,
                                  seed=args.seed)
    result = {
        "rows": [
            {
                "K": r.K, "L": r.L, "mean_alpha": r.mean_alpha,
                "std_alpha": r.std_alpha, "analytic_ref": r.analytic_ref,
                "bound_L": r.bound_l, "alpha_over_logK": r.ratio_log_k,
            }
            for r in rows
        ]
    }
    csv_rows = [converse.SCALING_CSV_HEADER] + [r.csv_row() for r in rows]
    cfg = _config_echo(args, K_list=k_list, L=l_desc, trials=args.trials)
    _emit(args, cfg, result, csv_rows=csv_rows)
    return 0


def _build_ps(args):
    ch = _parse_channel(args.channel, args.seed)
    m = args.M
    if m is None:
        m = ofdm.smallest_valid_prime(2 * int(ch.l.max()) + 1, ch.l)
    return ch, ofdm.build_precoders(ch, m)


def cmd_ofdm_precode(args) -> int:
    ch, ps = _build_ps(args)
    perm = ofdm.permutation_check(ps)
    orth = ofdm.orthogonality_check(ch, ps)
    result = {
        "M": ps.M, "n": ps.n, "l": ps.l, "d": list(ps.d),
        "cp_len": ps.cp_len,
        "t_closed_form_error": ps.t_closed_form_error(),
        "permutation_ok": perm.ok,
        "permutation_map": list(perm.mapping) if perm.mapping else None,
        "orthogonal": orth,
        "required_direct_delays": list(ofdm.direct_delay_congruences(ps)),
    }
    if args.matrices_out:
        os.makedirs(args.matrices_out, exist_ok=True)
        ofdm.export_matrix_csv(ps.f, os.path.join(args.matrices_out, "F.csv"))
        ofdm.export_matrix_csv(ps.v, os.path.join(args.matrices_out, "V.csv"))
        for j in range(3):
            ofdm.export_matrix_csv(
                ps.v_user[j], os.path.join(args.matrices_out, f"V{j + 1}.csv")
            )
    _emit(args, _config_echo(args, M=ps.M), result)
    return 0


def cmd_ofdm_schedule(args) -> int:
    ch, ps = _build_ps(args)
    sched = ofdm.build_schedule(ps)
    _emit(args, _config_echo(args, M=ps.M), sched.to_json_dict())
    return 0


def cmd_ofdm_rank(args) -> int:
    rows = []
    for s in range(args.seeds):
        r = ofdm.dof_rank_experiment(
            args.K, args.n, args.L_taps, args.M, seed=args.seed + s,
            single_path_delays=args.single_path,
        )
        rows.append(r)
    result = {
        "bound": rows[0].bound,
        "columns_total": rows[0].n_columns_total,
        "columns_used": rows[0].n_columns_used,
        "ranks": [r.rank for r in rows],
        "max_rank_ratio": max(r.rank_ratio for r in rows),
        "violations": sum(1 for r in rows
                          if not args.single_path and r.rank > r.bound),
        "distinct_exponents": [r.distinct_exponents for r in rows]
        if args.single_path else None,
    }
    csv_rows = [["seed", "rank", "bound", "columns_used", "rank_ratio"]] + [
        [r.seed, r.rank, r.bound, r.n_columns_used, f"{r.rank_ratio:.6g}"]
        for r in rows
    ]
    cfg = _config_echo(args, K=args.K, n=args.n, L_taps=args.L_taps,
                       M=args.M, seeds=args.seeds, single_path=args.single_path)
    _emit(args, cfg, result, csv_rows=csv_rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="losalign",
        description="Interference-alignment experiments on LOS channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, channel=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        if channel:
            p.add_argument(
                "--channel",
                help="JSON file path, inline JSON, or random:K=..,L=..[,seed=..]",
            )

    p = sub.add_parser("solve", help="optimal transmit pattern over a finite horizon")
    common(p)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--boundary", choices=("exact", "paper"), default="exact")
    p.add_argument("--state-stats", default=None, help="write state-space stats CSV")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("ir", help="exact asymptotic independence rate")
    common(p)
    p.add_argument("--weights", choices=("uniform", "r"), default="uniform")
    p.set_defaults(func=cmd_ir)

    p = sub.add_parser("check3", help="half-rate feasibility test for K=3")
    common(p)
    p.add_argument("--enumerate-witnesses", action="store_true")
    p.set_defaults(func=cmd_check3)

    p = sub.add_parser("gap", help="progression-schedule Monte Carlo")
    common(p, channel=False)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--theorem1", action="store_true",
                   help="use L = ceil((2N)^(N+epsilon))")
    p.set_defaults(func=cmd_gap)

    p = sub.add_parser("converse", help="per-column independence scaling curve")
    common(p, channel=False)
    p.add_argument("--K-list", required=True, help="comma-separated user counts")
    p.add_argument("--L", type=int, default=None)
    p.add_argument("--L-rule", choices=("const", "square"), default="const")
    p.add_argument("--trials", type=int, default=200)
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("ofdm-precode", help="build and validate 3-user precoders")
    common(p)
    p.add_argument("--M", type=int, default=None,
                   help="odd block length; smallest valid prime if omitted")
    p.add_argument("--matrices-out", default=None, help="directory for matrix CSVs")
    p.set_defaults(func=cmd_ofdm_precode)

    p = sub.add_parser("ofdm-schedule", help="integer slot schedule of the precoders")
    common(p)
    p.add_argument("--M", type=int, default=None)
    p.set_defaults(func=cmd_ofdm_schedule)

    p = sub.add_parser("ofdm-rank", help="rank collapse of the K>3 column family")
    common(p, channel=False)
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--L-taps", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--single-path", action="store_true")
    p.set_defaults(func=cmd_ofdm_rank)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SizeError as exc:
        print(f"size error: {exc}", file=sys.stderr)
        return 3
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
