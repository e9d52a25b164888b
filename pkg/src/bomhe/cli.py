"""Command-line experiment runner.

    bomhe simulate <config.toml> [--seed S] [--out DIR]
    bomhe run <config.toml> --algorithm {mhe-true,bomhe} [--seed S] [--out DIR]
    bomhe report <run-dir> [<run-dir> ...] [--out DIR]

Every command is deterministic given the config and seed; all emitted CSV
and JSON files are byte-identical across repeated runs. Floats are written
with 17 significant digits so parse/serialize round trips are exact.

Exit codes: 0 success, 1 usage, 2 config, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    BomheError,
    ConfigError,
    IllConditionedKernelError,
    InvalidArgumentError,
    NumericDivergenceError,
    SingularInnovationError,
    SingularWindowError,
)
from .experiment import (
    ExperimentConfig,
    build_bomhe_config,
    build_mhe_config,
    build_system,
    build_template,
    load_config,
    true_model,
)
from .loop import mae, optimize
from .mhe import run_trajectory
from .systems import simulate

ALGORITHMS = ("mhe-true", "bomhe")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def fmt(value) -> str:
    """17-significant-digit float formatting; exact round trip through text."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([cell if isinstance(cell, str) else fmt(cell) for cell in row])


def read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise OSError(f"{path} is empty")
    return rows[0], rows[1:]


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tool_block() -> dict:
    return {"name": "bomhe", "version": __version__}


def _trajectory_rows(traj):
    T = traj.horizon
    n_u = traj.inputs.shape[1]
    for k in range(T + 1):
        row = [k, *traj.states[k], *traj.measurements[k]]
        if n_u:
            row += list(traj.inputs[k]) if k < T else [None] * n_u
        yield row


def _write_trajectory(out: Path, cfg: ExperimentConfig, traj) -> None:
    n_x = traj.states.shape[1]
    n_y = traj.measurements.shape[1]
    n_u = traj.inputs.shape[1]
    header = (
        ["k"]
        + [f"x_{i + 1}" for i in range(n_x)]
        + [f"y_{i + 1}" for i in range(n_y)]
        + [f"u_{i + 1}" for i in range(n_u)]
    )
    write_csv(out / "trajectory.csv", header, _trajectory_rows(traj))
    write_json(
        out / "meta.json",
        {
            "tool": _tool_block(),
            "seed": cfg.seed,
            "config": cfg.resolved(),
            "n_x": n_x,
            "n_y": n_y,
            "n_u": n_u,
            "T": traj.horizon,
        },
    )


def cmd_simulate(cfg: ExperimentConfig, out: Path) -> None:
    sys_sim = build_system(cfg)
    traj = simulate(sys_sim, cfg.system["T"], cfg.seed)
    out.mkdir(parents=True, exist_ok=True)
    _write_trajectory(out, cfg, traj)


def cmd_run(cfg: ExperimentConfig, algorithm: str, out: Path) -> None:
    if algorithm not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {algorithm!r}")
    sys_sim = build_system(cfg)
    traj = simulate(sys_sim, cfg.system["T"], cfg.seed)
    mhe_cfg = build_mhe_config(cfg)
    monitored = cfg.monitored_indices

    out.mkdir(parents=True, exist_ok=True)
    _write_trajectory(out, cfg, traj)

    summary = {
        "tool": _tool_block(),
        "seed": cfg.seed,
        "algorithm": algorithm,
        "config": cfg.resolved(),
        "monitored": list(cfg.monitored),
        "mae": {},
    }

    if algorithm == "mhe-true":
        model = true_model(cfg, sys_sim)
        estimates, total_cost = run_trajectory(
            model, traj.measurements, traj.inputs, mhe_cfg
        )
        summary["J_total"] = total_cost
        summary["mae"][algorithm] = mae(traj.states, estimates, monitored)
    else:
        template = build_template(cfg)
        bomhe_cfg = build_bomhe_config(cfg)
        result = optimize(
            traj.measurements,
            traj.inputs,
            template,
            mhe_cfg,
            bomhe_cfg,
            true_states=traj.states,
            monitored_components=monitored,
        )
        estimates = result.best_estimates
        summary["best_J"] = result.best_J
        summary["best_theta"] = [float(v) for v in result.best_theta.values]
        summary["mae"][algorithm] = mae(traj.states, estimates, monitored)
        summary["convergence"] = {
            "iteration": [r.iteration for r in result.records],
            "J": [r.J for r in result.records],
            "best_so_far": [r.best_so_far_J for r in result.records],
            "mae": [r.mae for r in result.records],
        }
        write_csv(
            out / "convergence.csv",
            ["i", "J", "best_so_far", "mae"],
            ([r.iteration, r.J, r.best_so_far_J, r.mae] for r in result.records),
        )

    n_x = estimates.shape[1]
    write_csv(
        out / f"estimates_{algorithm}.csv",
        ["k"] + [f"xhat_{i + 1}" for i in range(n_x)],
        ([k, *estimates[k]] for k in range(estimates.shape[0])),
    )
    write_json(out / "summary.json", summary)


def _load_run_dir(run_dir: Path) -> dict:
    summary_path = run_dir / "summary.json"
    if not summary_path.exists():
        if (run_dir / "report_table.csv").exists():
            raise OSError(f"{run_dir} looks like a report directory, not a run directory")
        raise OSError(f"{run_dir} has no summary.json")
    with open(summary_path) as fh:
        summary = json.load(fh)
    data = {"dir": run_dir, "summary": summary}
    algorithm = summary.get("algorithm", "?")
    est_path = run_dir / f"estimates_{algorithm}.csv"
    if est_path.exists():
        _, rows = read_csv(est_path)
        data["estimates"] = np.array([[float(c) for c in row[1:]] for row in rows])
    traj_path = run_dir / "trajectory.csv"
    if traj_path.exists():
        header, rows = read_csv(traj_path)
        n_x = sum(1 for h in header if h.startswith("x_"))
        data["states"] = np.array([[float(c) for c in row[1 : 1 + n_x]] for row in rows])
    return data


def cmd_report(run_dirs: list[Path], out: Path) -> None:
    if not run_dirs:
        raise UsageError("report needs at least one run directory")
    runs, offenders = [], []
    for run_dir in run_dirs:
        try:
            runs.append(_load_run_dir(run_dir))
        except (OSError, json.JSONDecodeError, ValueError) as exc:
            offenders.append(f"{run_dir}: {exc}")
    if offenders:
        raise OSError("cannot report on: " + "; ".join(offenders))

    out.mkdir(parents=True, exist_ok=True)
    table_rows = []
    for run in runs:
        algorithm = run["summary"].get("algorithm", "?")
        for alg, value in sorted(run["summary"].get("mae", {}).items()):
            table_rows.append([str(run["dir"]), alg if alg else algorithm, value])
    write_csv(out / "report_table.csv", ["run", "algorithm", "mae"], table_rows)

    lines = ["ALGORITHM          MAE        RUN"]
    for run_name, alg, value in table_rows:
        lines.append(f"{alg:<18} {value:<10.4f} {run_name}")
    (out / "report.txt").write_text("\n".join(lines) + "\n")

    series_rows = []
    for run in runs:
        name = str(run["dir"])
        alg = run["summary"].get("algorithm", "?")
        states = run.get("states")
        estimates = run.get("estimates")
        if estimates is not None:
            for k in range(estimates.shape[0]):
                for j in range(estimates.shape[1]):
                    series_rows.append([name, alg, "xhat", k, j + 1, estimates[k, j]])
        if states is not None and estimates is not None:
            for k in range(estimates.shape[0]):
                for j in range(estimates.shape[1]):
                    series_rows.append(
                        [name, alg, "error", k, j + 1, estimates[k, j] - states[k, j]]
                    )
        conv = run["summary"].get("convergence")
        if conv:
            for field in ("J", "best_so_far", "mae"):
                for i, value in enumerate(conv[field]):
                    if value is not None:
                        series_rows.append([name, alg, field, i, "", value])
    write_csv(
        out / "series_long.csv",
        ["run", "algorithm", "series", "step", "component", "value"],
        series_rows,
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="bomhe", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulate a trajectory and write it to disk")
    p_sim.add_argument("config", help="experiment config (TOML)")
    p_sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_sim.add_argument("--out", default=None, help="override the output directory")

    p_run = sub.add_parser("run", help="run an estimator over a simulated record")
    p_run.add_argument("config")
    p_run.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_rep = sub.add_parser("report", help="merge run directories into one report")
    p_rep.add_argument("dirs", nargs="+", help="run directories containing summary.json")
    p_rep.add_argument("--out", default="report")
    return parser


def _resolve(args) -> tuple[ExperimentConfig, Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise UsageError("--seed must be nonnegative")
        cfg = replace(cfg, seed=args.seed)
    out = Path(args.out) if args.out is not None else Path(cfg.output_dir)
    if args.out is not None:
        cfg = replace(cfg, output_dir=str(out))
    return cfg, out


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate":
            cfg, out = _resolve(args)
            cmd_simulate(cfg, out)
        elif args.command == "run":
            cfg, out = _resolve(args)
            cmd_run(cfg, args.algorithm, out)
        elif args.command == "report":
            cmd_report([Path(d) for d in args.dirs], Path(args.out))
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, InvalidArgumentError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (
        NumericDivergenceError,
        IllConditionedKernelError,
        SingularWindowError,
        SingularInnovationError,
    ) as exc:
        print(f"numeric error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except BomheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
