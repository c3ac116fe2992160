"""Command-line front end.

Subcommands:

    offline  build and persist a reduced model per configured epsilon
    online   solve every sample with a persisted model, emit online.csv
    sweep    full offline + online per epsilon, emit sweep.csv and
             convergence.csv
    report   render figures from an existing sweep.csv

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, build_problem, load_config
from .linalg import DegenerateMatrixError
from .model_io import ModelFormatError, load_model, save_model
from .offline import PipelineError, ReducedModel, Thresholds, run_offline
from .online import batch_evaluate
from .oracle import SolveFailure

SWEEP_HEADER = [
    "epsilon",
    "s",
    "n_rb",
    "t_offline",
    "t_online",
    "t_fine",
    "speedup",
    "mean_rel_l2",
]

_NUMERICAL_ERRORS = (
    PipelineError,
    SolveFailure,
    DegenerateMatrixError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _model_path(out: Path, epsilons: list[float], eps: float) -> Path:
    if len(epsilons) == 1:
        return out / "model.rbm"
    return out / f"model_eps{eps:g}.rbm"


def _run_one_offline(cfg: RunConfig, problem, eps: float) -> ReducedModel:
    return run_offline(
        problem,
        Thresholds(epsilon=eps, eta=cfg.eta),
        enrich=cfg.enrich,
        append_solutions=cfg.append_solutions,
        operator_columns=cfg.operator_columns,
        seed=cfg.seed,
        jobs=cfg.jobs,
    )


def cmd_offline(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for eps in cfg.epsilons:
        model = _run_one_offline(cfg, problem, eps)
        path = _model_path(cfg.out, cfg.epsilons, eps)
        save_model(model, path)
        print(
            f"epsilon={eps:g} s={model.n_skeletons} n_rb={model.n_rb} "
            f"t_offline={model.timings['t_offline']:.3f}s "
            f"(coarse sweep {model.timings['t_coarse_sweep']:.3f}s) -> {path}"
        )
    return 0


def cmd_online(cfg: RunConfig, model_path: Path, with_reference: bool) -> int:
    problem = build_problem(cfg)
    try:
        model = load_model(model_path)
    except (OSError, ModelFormatError) as exc:
        raise ConfigError(f"cannot load model {model_path}: {exc}") from exc
    if model.problem_name != problem.name:
        raise ConfigError(
            f"model was built for problem {model.problem_name!r}, "
            f"config selects {problem.name!r}"
        )
    omega = problem.sample_space()
    if model.n_samples != omega.size:
        raise ConfigError(
            f"model covers {model.n_samples} samples, config defines {omega.size}"
        )
    report = batch_evaluate(
        model, problem, omega, with_reference=with_reference, jobs=cfg.jobs
    )
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / "online.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if with_reference:
            writer.writerow(["index", "rel_l2_error", "t_solve"])
            for i in range(omega.size):
                writer.writerow(
                    [i, _fmt(report.errors[i]), f"{report.solve_times[i]:.6f}"]
                )
            writer.writerow(
                ["summary", _fmt(report.mean_error), f"{report.t_online:.6f}"]
            )
        else:
            writer.writerow(["index", "t_solve"])
            for i in range(omega.size):
                writer.writerow([i, f"{report.solve_times[i]:.6f}"])
            writer.writerow(["summary", f"{report.t_online:.6f}"])
    failed = len(report.failures)
    mean_txt = (
        f" mean_rel_l2={report.mean_error:.3e}" if report.mean_error is not None else ""
    )
    print(
        f"solved {omega.size - failed}/{omega.size} samples "
        f"t_online={report.t_online:.3f}s{mean_txt} -> {path}"
    )
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    if len(cfg.epsilons) < 2:
        raise ConfigError("sweep requires at least two epsilon values")
    problem = build_problem(cfg)
    omega = problem.sample_space()
    cfg.out.mkdir(parents=True, exist_ok=True)

    # Fine reference solutions are identical across epsilon values; solve
    # and time them once.
    import time

    t0 = time.perf_counter()
    if cfg.jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            ref_solutions = list(pool.map(problem.fine_solve, omega.samples))
    else:
        ref_solutions = [problem.fine_solve(s) for s in omega.samples]
    reference = np.column_stack([r.solution for r in ref_solutions])
    t_fine = time.perf_counter() - t0

    rows: list[list[str]] = []
    conv_rows: list[list[str]] = []
    any_ok = False
    for eps in sorted(cfg.epsilons, reverse=True):
        try:
            model = _run_one_offline(cfg, problem, eps)
            report = batch_evaluate(
                model,
                problem,
                omega,
                with_reference=True,
                reference=reference,
                t_fine=t_fine,
            )
            t_off = model.timings["t_offline"]
            speedup = t_fine / (t_off + report.t_online)
            rows.append(
                [
                    _fmt(eps),
                    str(model.n_skeletons),
                    str(model.n_rb),
                    f"{t_off:.3f}",
                    f"{report.t_online:.3f}",
                    f"{t_fine:.3f}",
                    f"{speedup:.3f}",
                    _fmt(report.mean_error),
                ]
            )
            conv_rows.append(
                [_fmt(np.log10(eps)), _fmt(np.log10(report.mean_error))]
            )
            any_ok = True
            print(
                f"epsilon={eps:g} s={model.n_skeletons} n_rb={model.n_rb} "
                f"mean_rel_l2={report.mean_error:.3e} speedup={speedup:.1f}x"
            )
        except _NUMERICAL_ERRORS as exc:
            rows.append([_fmt(eps), "", "", "", "", "", "", f"error: {exc}"])
            print(f"epsilon={eps:g} failed: {exc}", file=sys.stderr)

    with open(cfg.out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    with open(cfg.out / "convergence.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["log10_epsilon", "log10_mean_rel_l2"])
        writer.writerows(conv_rows)
    print(f"wrote {cfg.out / 'sweep.csv'} and {cfg.out / 'convergence.csv'}")
    return 0 if any_ok else 2


def cmd_report(out: Path) -> int:
    from .report import render_sweep_figures

    sweep_csv = out / "sweep.csv"
    if not sweep_csv.is_file():
        raise ConfigError(f"no sweep.csv found in {out}")
    for path in render_sweep_figures(sweep_csv, out):
        print(f"wrote {path}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxyrb",
        description="Coarse-proxy reduced basis solver for parameterized "
        "dense integral equations",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, required=True, help="run config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="override the output directory")
        p.add_argument("--jobs", type=int, help="per-sample parallelism")

    p_off = sub.add_parser("offline", help="build and persist reduced models")
    common(p_off)

    p_on = sub.add_parser("online", help="solve all samples with a saved model")
    common(p_on)
    p_on.add_argument("--model", type=Path, required=True, help="model file")
    p_on.add_argument(
        "--with-reference",
        action="store_true",
        help="also run fine solves and report per-sample errors",
    )

    p_sw = sub.add_parser("sweep", help="offline + online over an epsilon list")
    common(p_sw)

    p_rep = sub.add_parser("report", help="render figures from sweep output")
    p_rep.add_argument(
        "--out", type=Path, required=True, help="directory holding sweep.csv"
    )
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.out)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.jobs is not None:
            cfg.jobs = args.jobs
        if args.command == "offline":
            return cmd_offline(cfg)
        if args.command == "online":
            return cmd_online(cfg, args.model, args.with_reference)
        return cmd_sweep(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
