"""Command-line front end: reproducible batch jobs with CSV/JSON outputs.

Subcommands mirror the library: ``synth`` builds estimator tables,
``profile`` evaluates one, ``pareto`` and ``study`` run the report sweeps,
``simulate`` plays the alignment game.  Every output embeds its job
configuration; report paths also render a PNG figure next to the CSV
unless --no-figures is given.  Exit code 0 means every post-solve
certification passed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import figures, reports
from .aqp import default_epsilons, pareto_trace, solve_aqp
from .estimators import (
    PolynomialReward,
    TableFormatError,
    load_table,
    plugin_log_table,
    save_table,
    taylor_bt_table,
    u_statistic_table,
)
from .exact import (
    DomainError,
    EstimatorTable,
    bias_profile,
    build_grid,
)
from .game import load_game_spec, run_game_grpo, run_mirror_descent, save_game_spec
from .presets import PRESETS
from .minimax import (
    CertificationError,
    DEFAULT_CERT_SIZE,
    DEFAULT_GRID_SIZE,
    scaling_study,
    solve_minimax,
)
from .qsolve import InfeasibleError, QspError
from .splitting import split_estimator_stats, taylor_uniform_failure

OUT_ENV = "POLYREWARD_OUT"


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _job(args, **extra) -> dict:
    job = {"command": args.command}
    if getattr(args, "subcommand", None):
        job["subcommand"] = args.subcommand
    job.update(extra)
    return job


def _scaled_table(table: EstimatorTable, beta: float) -> EstimatorTable:
    if beta == 1.0:
        return table
    return EstimatorTable(
        K=table.K,
        beta=beta,
        coeffs=table.coeffs * beta,
        method=table.method,
        meta=dict(table.meta),
    )


def _write_table(table: EstimatorTable, path: Path, job: dict) -> None:
    meta = dict(table.meta)
    meta["job"] = job
    save_table(
        EstimatorTable(
            K=table.K,
            beta=table.beta,
            coeffs=table.coeffs,
            method=table.method,
            meta=meta,
        ),
        path,
    )


def _cmd_synth_minimax(args) -> int:
    out = _out_dir(args)
    job = _job(args, K=args.K, M=args.M, beta=args.beta, cert_M=args.cert_M)
    grid = build_grid(args.K, args.M, "boundary")
    res = solve_minimax(args.K, grid, cert_size=args.cert_M)
    table = _scaled_table(res.table, args.beta)
    table_path = out / f"minimax_K{args.K}.json"
    _write_table(table, table_path, job)
    report_path = out / f"minimax_K{args.K}_eps.csv"
    reports.write_csv(
        report_path,
        ["K", "epsilon", "epsilon_table", "epsilon_certified"],
        [
            {
                "K": args.K,
                "epsilon": res.epsilon_lp,
                "epsilon_table": res.epsilon,
                "epsilon_certified": res.epsilon_certified,
            }
        ],
        job,
    )
    if not args.no_figures:
        prof = bias_profile(res.table, grid)
        figures.render_profile(
            prof, out / f"minimax_K{args.K}.png", f"minimax K={args.K}"
        )
    print(
        f"minimax K={args.K}: epsilon*={res.epsilon_lp:.6e} "
        f"table bias={res.epsilon:.6e} -> {table_path}"
    )
    return 0


def _cmd_synth_aqp(args) -> int:
    out = _out_dir(args)
    job = _job(args, K=args.K, epsilon=args.epsilon, beta=args.beta)
    reference = solve_minimax(args.K)
    if args.epsilon == "auto":
        points = pareto_trace(args.K, reference=reference)
    else:
        points = [
            solve_aqp(args.K, epsilon=float(args.epsilon), reference=reference)
        ]
    rows = []
    for point in points:
        table = _scaled_table(point.table, args.beta)
        path = out / f"aqp_K{args.K}_eps{point.epsilon:.6e}.json"
        _write_table(table, path, job)
        rows.append({"epsilon": point.epsilon, "v": point.v})
    csv_path = out / f"aqp_K{args.K}_pareto.csv"
    reports.write_csv(csv_path, ["epsilon", "v"], rows, job)
    if not args.no_figures and len(rows) > 1:
        figures.render_pareto(rows, out / f"aqp_K{args.K}_pareto.png")
    print(f"aqp K={args.K}: {len(points)} table(s), frontier -> {csv_path}")
    return 0


def _cmd_synth_ustat(args) -> int:
    out = _out_dir(args)
    coeffs = tuple(float(v) for v in args.coeffs.split(","))
    job = _job(
        args, K=args.K, degree=args.degree, coeffs=list(coeffs), sign=args.sign,
        beta=args.beta,
    )
    if len(coeffs) != args.degree:
        raise DomainError("need exactly --degree coefficients")
    reward = PolynomialReward(coeffs=coeffs, sign=args.sign, beta=args.beta)
    table = u_statistic_table(reward, args.K)
    path = out / f"ustat_K{args.K}_d{args.degree}.json"
    _write_table(table, path, job)
    print(f"u-statistic K={args.K} degree={args.degree} -> {path}")
    return 0


def _cmd_synth_closed_form(args) -> int:
    out = _out_dir(args)
    job = _job(
        args, K=args.K, method=args.method, beta=args.beta, alpha=args.alpha,
        z_size=args.z_size, c0=args.c0,
    )
    if args.method == "plugin_log":
        table = plugin_log_table(
            args.K, args.beta, args.alpha, args.z_size, clamp=args.clamp
        )
    else:
        if args.c0 == "minimax":
            c0 = float(solve_minimax(args.K).table.coeffs[0])
        elif args.c0 is None:
            c0 = None
        else:
            c0 = float(args.c0)
        table = taylor_bt_table(args.K, args.beta, c0)
    path = out / f"{args.method}_K{args.K}.json"
    _write_table(table, path, job)
    print(f"{args.method} K={args.K} -> {path}")
    return 0


def _cmd_profile(args) -> int:
    out = _out_dir(args)
    table = load_table(args.table)
    job = _job(args, table=str(args.table), grid=args.grid)
    grid = build_grid(table.K, args.grid, "boundary")
    prof = bias_profile(table, grid)
    rows = [
        {
            "p": prof.grid.points[i],
            "weighted_bias": prof.weighted_bias[i],
            "second_moment": prof.second_moment[i],
        }
        for i in range(len(prof.grid))
    ]
    stem = Path(args.table).stem
    csv_path = out / f"{stem}_profile.csv"
    reports.write_csv(
        csv_path, ["p", "weighted_bias", "second_moment"], rows, job
    )
    if not args.no_figures:
        figures.render_profile(prof, out / f"{stem}_profile.png", stem)
    print(
        f"profile {stem}: sup bias={prof.sup_bias:.6e} "
        f"sup S={prof.sup_second_moment:.6e} -> {csv_path}"
    )
    return 0


def _parse_eps_grid(spec_text: str, anchor: float) -> list[float]:
    if spec_text == "auto":
        return default_epsilons(anchor)
    if spec_text.startswith("x"):
        return [anchor * float(v) for v in spec_text[1:].split(",")]
    return [float(v) for v in spec_text.split(",")]


def _cmd_pareto(args) -> int:
    out = _out_dir(args)
    job = _job(args, K=args.K, eps_grid=args.eps_grid)
    reference = solve_minimax(args.K)
    epsilons = _parse_eps_grid(args.eps_grid, reference.epsilon)
    points = pareto_trace(args.K, epsilons=epsilons, reference=reference)
    rows = [{"epsilon": p.epsilon, "v": p.v} for p in points]
    csv_path = out / f"pareto_K{args.K}.csv"
    reports.write_csv(csv_path, ["epsilon", "v"], rows, job)
    for point in points:
        _write_table(
            point.table, out / f"pareto_K{args.K}_eps{point.epsilon:.6e}.json", job
        )
    if not args.no_figures:
        figures.render_pareto(rows, out / f"pareto_K{args.K}.png")
    print(f"pareto K={args.K}: {len(points)} points -> {csv_path}")
    return 0


def _cmd_study_scaling(args) -> int:
    out = _out_dir(args)
    Ks = [int(v) for v in args.Ks.split(",")] if args.Ks else []
    job = _job(args, Ks=Ks, M=args.M)
    rows = scaling_study(Ks, args.M)
    csv_path = out / "scaling.csv"
    reports.write_csv(
        csv_path,
        ["K", "epsilon", "ratio_to_prev", "epsilon_table", "epsilon_certified"],
        rows,
        job,
    )
    if not args.no_figures and rows:
        figures.render_scaling(rows, out / "scaling.png")
    print(f"scaling study over K={Ks} -> {csv_path}")
    return 0


def _cmd_study_split(args) -> int:
    out = _out_dir(args)
    ps = [float(v) for v in args.p.split(",")]
    job = _job(args, K=args.K, K1=args.K1, p=ps)
    rows = []
    for p in ps:
        rep = split_estimator_stats(args.K, args.K1, p)
        rows.append(
            {
                "K": rep.K,
                "K1": rep.K1,
                "K2": rep.K2,
                "p": rep.p,
                "gamma": rep.gamma,
                "var_split": rep.var_split,
                "var_full": rep.var_full,
                "bias_split": rep.bias_split,
                "bias_full": rep.bias_full,
            }
        )
    csv_path = out / f"split_K{args.K}_K1_{args.K1}.csv"
    reports.write_csv(
        csv_path,
        ["K", "K1", "K2", "p", "gamma", "var_split", "var_full",
         "bias_split", "bias_full"],
        rows,
        job,
    )
    if not args.no_figures:
        figures.render_split(rows, out / f"split_K{args.K}_K1_{args.K1}.png")
    print(f"split study K={args.K} K1={args.K1} -> {csv_path}")
    return 0


def _cmd_study_taylor(args) -> int:
    out = _out_dir(args)
    Ks = [int(v) for v in args.Ks.split(",")]
    job = _job(args, Ks=Ks)
    c0_values = None
    if args.c0_rule == "minimax":
        c0_values = {K: float(solve_minimax(K).table.coeffs[0]) for K in Ks}
    rows = taylor_uniform_failure(Ks, c0_values)
    csv_path = out / "taylor_failure.csv"
    reports.write_csv(
        csv_path,
        ["K", "sup_bias", "sup_bias_times_K", "pointwise_bias_half_times_K2",
         "worst_p", "ratio_to_prev"],
        rows,
        job,
    )
    if not args.no_figures:
        figures.render_taylor(rows, out / "taylor_failure.png")
    print(f"taylor failure study over K={Ks} -> {csv_path}")
    return 0


def _cmd_preset(args) -> int:
    out = _out_dir(args)
    spec = PRESETS[args.name](K=args.K, beta=args.beta)
    path = out / f"{args.name.replace('-', '_')}_K{args.K}.json"
    save_game_spec(spec, path, seed=args.seed)
    print(f"preset {args.name} K={args.K} -> {path}")
    return 0


def _cmd_simulate(args) -> int:
    out = _out_dir(args)
    spec, spec_seed = load_game_spec(args.spec)
    seed = args.seed if args.seed is not None else (spec_seed or 0)
    table = load_table(args.table)
    job = _job(
        args, spec=str(args.spec), table=str(args.table), T=args.T,
        seed=seed, mode=args.mode, lr=args.lr,
    )
    if args.mode == "grpo":
        trace = run_game_grpo(spec, table, args.T, args.lr, seed)
    else:
        if table.method not in ("u_statistic", "euclid", "quadratic"):
            raise DomainError(
                "mirror mode needs a falling-factorial table "
                "(methods u_statistic, euclid, quadratic)"
            )
        reward = PolynomialReward(
            coeffs=tuple(table.meta["reward_coeffs"]),
            sign=int(table.meta["sign"]),
            beta=table.beta,
        )
        trace = run_mirror_descent(spec, reward, args.T, seed=seed)
    stem = f"trace_{Path(args.spec).stem}_{table.method}_{args.mode}_T{args.T}_s{seed}"
    csv_path = out / f"{stem}.csv"
    reports.write_trace(trace, spec, csv_path, job)
    if not args.no_figures:
        figures.render_trace(trace, out / f"{stem}.png")
    print(
        f"simulate {args.mode}: T={args.T} seed={seed} "
        f"final gap={trace.gap[-1]:.6e} l1={trace.l1_error[-1]:.6e} "
        f"-> {csv_path}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyreward",
        description="Reward-estimator synthesis and alignment-game studies.",
    )
    parser.add_argument("--out", "-o", help=f"output directory (or ${OUT_ENV})")
    parser.add_argument("--verbose", action="store_true")
    parser.add_argument(
        "--no-figures", action="store_true", help="skip PNG rendering"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="build estimator tables")
    synth_sub = synth.add_subparsers(dest="subcommand", required=True)

    p = synth_sub.add_parser("minimax")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--M", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--cert-M", type=int, default=DEFAULT_CERT_SIZE)
    p.set_defaults(func=_cmd_synth_minimax)

    p = synth_sub.add_parser("aqp")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--epsilon", required=True, help="bias budget or 'auto'")
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=_cmd_synth_aqp)

    p = synth_sub.add_parser("ustat")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--coeffs", required=True, help="c1,...,cd")
    p.add_argument("--sign", type=int, choices=(-1, 1), required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.set_defaults(func=_cmd_synth_ustat)

    p = synth_sub.add_parser("closed-form")
    p.add_argument(
        "--method", choices=("plugin_log", "taylor_bt"), required=True
    )
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--z-size", type=int, default=2)
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--c0", default=None, help="float or 'minimax'")
    p.set_defaults(func=_cmd_synth_closed_form)

    p = sub.add_parser("profile", help="bias/second-moment profile of a table")
    p.add_argument("--table", required=True)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID_SIZE)
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("pareto", help="trace the bias-variance frontier")
    p.add_argument("--K", type=int, required=True)
    p.add_argument(
        "--eps-grid",
        default="auto",
        help="'auto', 'x1,2,4' (multiples of the anchor), or absolute values",
    )
    p.set_defaults(func=_cmd_pareto)

    study = sub.add_parser("study", help="batch studies")
    study_sub = study.add_subparsers(dest="subcommand", required=True)

    p = study_sub.add_parser("scaling")
    p.add_argument("--Ks", required=True, help="comma-separated group sizes")
    p.add_argument("--M", type=int, default=DEFAULT_GRID_SIZE)
    p.set_defaults(func=_cmd_study_scaling)

    p = study_sub.add_parser("split")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--K1", type=int, required=True)
    p.add_argument("--p", required=True, help="comma-separated probabilities")
    p.set_defaults(func=_cmd_study_split)

    p = study_sub.add_parser("taylor")
    p.add_argument("--Ks", required=True)
    p.add_argument(
        "--c0-rule", choices=("minimax", "fallback"), default="fallback"
    )
    p.set_defaults(func=_cmd_study_taylor)

    p = sub.add_parser("preset", help="write a built-in game spec file")
    p.add_argument("--name", choices=sorted(PRESETS), required=True)
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_preset)

    p = sub.add_parser("simulate", help="run the alignment game")
    p.add_argument("--spec", required=True)
    p.add_argument("--table", required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", choices=("grpo", "mirror"), default="grpo")
    p.add_argument("--lr", type=float, default=0.05)
    p.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, TableFormatError, InfeasibleError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CertificationError, QspError) as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
