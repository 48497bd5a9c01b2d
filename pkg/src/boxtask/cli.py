"""Operator command line: batch simulation (including scripted replays),
the fitting/comparison pipeline, and the live session server."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from .agents import (
    LLM_VARIANTS,
    LlmAgentParams,
    SocAgentParams,
    run_llm_ps_episode,
    run_react_episode,
    run_soc_episode,
)
from .backends import BackendError, backend_from_spec
from .fitting import (
    EPSILON,
    aic_summary,
    best_variant_counts,
    build_tables,
    fit_cohort,
    load_tables,
    pairwise_comparisons,
    save_tables,
    SOC_VARIANTS,
)
from .reports import summarize_runs
from .soc import DEFAULT_P_T
from .task import (
    Deterministic,
    EnvConfig,
    EMPIRICAL_RELIABILITY,
    TaskSetup,
    load_task_config,
)
from .trajectories import (
    TrajectoryFormatError,
    read_trajectories,
    write_trajectories,
)

ALL_VARIANTS = SOC_VARIANTS + LLM_VARIANTS + ("react",)


def _default_setup(variant: str) -> TaskSetup:
    """Matched-condition defaults: soc simulations and llm-ps-p run the
    in-person condition (partial, unreliable); llm-ps and react run
    reliable/fully-observable."""
    if variant in ("llm-ps", "react"):
        return TaskSetup(EnvConfig(reliability=Deterministic(), observability="full"))
    if variant == "llm-ps-s":
        return TaskSetup(EnvConfig(reliability=EMPIRICAL_RELIABILITY, observability="full"))
    if variant == "llm-ps-p":
        return TaskSetup(EnvConfig(reliability=EMPIRICAL_RELIABILITY, observability="partial"))
    return TaskSetup(EnvConfig(reliability=EMPIRICAL_RELIABILITY, observability="partial"))


def _load_setup(args, variant: str) -> TaskSetup:
    if getattr(args, "config", None):
        return load_task_config(args.config)
    return _default_setup(variant)


def cmd_simulate(args) -> int:
    setup = _load_setup(args, args.variant)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs_dir = out_dir / "runlogs"
    runs_dir.mkdir(exist_ok=True)

    trajectories = []
    for i in range(args.runs):
        seed = args.seed + i
        subject = f"{args.variant}-{i:03d}"
        if args.variant in SOC_VARIANTS:
            params = SocAgentParams(
                variant=args.variant,
                n_particles=args.particles or 100,
                p_gen=args.p_gen,
                rho_prior=(args.rho_alpha, args.rho_beta),
                p_t=args.p_t,
            )
            traj = run_soc_episode(params, setup, seed, subject_id=subject)
        elif args.variant in LLM_VARIANTS:
            if not args.backend:
                print("llm variants need --backend", file=sys.stderr)
                return 2
            backend = backend_from_spec(args.backend, model=args.model)
            params = LlmAgentParams(
                variant=args.variant,
                n_particles=args.particles or 1,
                rho_subjective=args.rho_subjective,
            )
            traj = run_llm_ps_episode(params, setup, backend, seed=seed, subject_id=subject)
        else:  # react
            if not args.backend:
                print("react needs --backend", file=sys.stderr)
                return 2
            backend = backend_from_spec(args.backend, model=args.model)
            traj = run_react_episode(setup, backend, seed=seed, subject_id=subject)
        trajectories.append(traj)
        (runs_dir / f"{subject}.log").write_text("\n".join(traj.log) + "\n")

    write_trajectories(out_dir / "trajectories.csv", trajectories)
    summary = summarize_runs(trajectories, setup)
    summary["variant"] = args.variant
    summary["seed"] = args.seed
    with open(out_dir / "summary.json", "w") as f:
        json.dump(summary, f, indent=2)
    print(
        f"{args.runs} runs of {args.variant}: completion rate "
        f"{summary['completion_rate']:.2f}; wrote {out_dir}/trajectories.csv"
    )
    return 0


def cmd_fit(args) -> int:
    setup = _load_setup(args, "soc-full")
    try:
        trajectories = read_trajectories(args.trajectories, boxes=setup.boxes, keys=setup.keys)
    except FileNotFoundError:
        print(f"no such trajectory file: {args.trajectories}", file=sys.stderr)
        return 2
    except TrajectoryFormatError as exc:
        print(f"malformed trajectory file: {exc}", file=sys.stderr)
        return 2
    if not trajectories:
        print("trajectory file holds no subjects", file=sys.stderr)
        return 2

    variants = args.variants
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    tables = None
    if args.tables_dir:
        tables_dir = Path(args.tables_dir)
        try:
            tables = load_tables(tables_dir, variants)
        except Exception:
            tables = None
        if tables is not None and any(
            t.n_sims != args.n_sims for settings in tables.values() for t in settings.values()
        ):
            print("cached tables were built with a different n_sims; rebuilding")
            tables = None
        elif tables is not None:
            print(f"loaded cached tables from {tables_dir}")
    if tables is None:
        print(
            f"building probability tables ({args.n_sims} sims per setting, "
            f"jobs={args.jobs}) ..."
        )
        tables = build_tables(
            variants,
            setup,
            n_sims=args.n_sims,
            seed=args.seed,
            n_particles=args.particles,
            p_t=args.p_t,
            jobs=args.jobs,
        )
        if args.tables_dir:
            save_tables(args.tables_dir, tables)

    results = fit_cohort(trajectories, variants, tables, eps=args.epsilon, p_t=args.p_t)

    with open(out_dir / "fits.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["subject_id", "variant", "rho_alpha", "rho_beta", "p_gen", "p_t", "ll", "aic", "ties"]
        )
        for r in results:
            for variant in variants:
                o = r.outcomes[variant]
                writer.writerow(
                    [
                        r.subject_id,
                        variant,
                        o.theta.rho_alpha,
                        o.theta.rho_beta,
                        o.theta.p_gen,
                        o.theta.p_t,
                        f"{o.ll:.6f}",
                        f"{r.aic(variant):.6f}",
                        o.ties,
                    ]
                )

    aic_rows = aic_summary(results, variants)
    with open(out_dir / "aic_table.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(aic_rows[0].keys()))
        writer.writeheader()
        writer.writerows(aic_rows)

    if "soc-full" in variants and len(variants) > 1 and len(results) >= 2:
        rows = pairwise_comparisons(results, variants, baseline="soc-full")
        with open(out_dir / "comparisons.csv", "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)

    report = {
        "subjects": len(results),
        "variants": list(variants),
        "epsilon": args.epsilon,
        "aic_table": aic_rows,
        "best_variant_counts": best_variant_counts(results),
    }
    with open(out_dir / "report.json", "w") as f:
        json.dump(report, f, indent=2)

    for row in aic_rows:
        print(
            f"{row['variant']:>8}: mean NLL {row['mean_nll']:8.2f}  "
            f"mean AIC {row['mean_aic']:8.2f} (k={row['k']})"
        )
    print(f"wrote {out_dir}/fits.csv, aic_table.csv, report.json")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    setup = load_task_config(args.config) if args.config else None
    app = create_app(setup=setup, time_limit=args.time_limit, log_path=args.log)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxtask", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded episodes and write trajectories")
    sim.add_argument("--variant", choices=ALL_VARIANTS, required=True)
    sim.add_argument("--runs", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--config", help="task config JSON (defaults per variant)")
    sim.add_argument("--out", default="out/simulate")
    sim.add_argument(
        "--particles", type=int, default=None, help="particle count (100 for soc, 1 for llm)"
    )
    sim.add_argument("--p-gen", dest="p_gen", type=float, default=0.5)
    sim.add_argument("--rho-alpha", dest="rho_alpha", type=float, default=4.0)
    sim.add_argument("--rho-beta", dest="rho_beta", type=float, default=1.0)
    sim.add_argument("--p-t", dest="p_t", type=float, default=DEFAULT_P_T)
    sim.add_argument("--rho-subjective", dest="rho_subjective", type=float, default=None)
    sim.add_argument("--backend", help="mock:<script> or an http(s) endpoint")
    sim.add_argument("--model", default="", help="model name for live backends")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit variants to trajectories by grid search")
    fit.add_argument("--trajectories", required=True)
    fit.add_argument(
        "--variants",
        nargs="+",
        choices=SOC_VARIANTS,
        default=list(SOC_VARIANTS),
    )
    fit.add_argument("--epsilon", type=float, default=EPSILON)
    fit.add_argument("--n-sims", dest="n_sims", type=int, default=100)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--particles", type=int, default=100)
    fit.add_argument("--p-t", dest="p_t", type=float, default=DEFAULT_P_T)
    fit.add_argument("--jobs", type=int, default=1)
    fit.add_argument("--tables-dir", dest="tables_dir", help="cache directory for tables")
    fit.add_argument("--config", help="task config JSON for simulations")
    fit.add_argument("--out", default="out/fit")
    fit.set_defaults(func=cmd_fit)

    serve = sub.add_parser("serve", help="serve live sessions over HTTP")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument(
        "--port", type=int, default=int(os.environ.get("BOXTASK_PORT", "8715"))
    )
    serve.add_argument("--config", help="task config JSON")
    serve.add_argument("--time-limit", dest="time_limit", type=float, default=300.0)
    serve.add_argument("--log", help="append-only session log (JSONL)")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, BackendError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
