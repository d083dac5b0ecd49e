"""Command-line interface: run bundled studies and one-off solves.

Every command reads an optional flat key=value config file (--config) and
writes CSV files into --out (or the config's out_dir).  Written paths are
printed one per line; errors go to stderr with exit code 2.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .control import FixedPointError, fixed_point_optimize
from .fem1d import FemOperators, Mesh1D, l2_norm_discrete
from .harness import (
    OracleConsistencyError,
    StudyConfig,
    parse_config,
    run_example,
    tracking_problem,
    write_kernel_csv,
    write_rows_csv,
)
from .kernels import build_tables, default_g_rule
from .marching import ForcingPlan, solve_state
from .special import ConvergenceError

__all__ = ["main"]

_SIXTH = -1.0 / 6.0

# Per-command defaults; a config file overrides field by field.
_DEFAULTS: dict[str, dict[str, object]] = {
    "example1": dict(
        alpha0=0.4, alpha_slope=_SIXTH, T=0.5,
        N_list=(128, 256, 512, 1024), M_list=(8, 16, 32, 64),
    ),
    "example2": dict(
        alpha0=0.2, alpha_slope=_SIXTH, T=1.0, kappa=7.0 / 8.0,
        N_list=(4, 8, 16, 32), M_list=(4, 8, 16, 32),
    ),
    "example3": dict(
        alpha0=0.8, alpha_slope=_SIXTH, T=1.0, kappa=1.0,
        N_list=(80,), M_list=(32,),
    ),
    "solve-state": dict(
        alpha0=0.4, alpha_slope=_SIXTH, T=0.5, N_list=(128,), M_list=(32,),
    ),
    "solve-control": dict(
        alpha0=0.2, alpha_slope=_SIXTH, T=1.0, kappa=7.0 / 8.0,
        N_list=(32,), M_list=(32,),
    ),
    "kernels": dict(
        alpha0=0.4, alpha_slope=_SIXTH, T=0.5, N_list=(128,), M_list=(32,),
    ),
}

_HELP: dict[str, str] = {
    "example1": "two-mesh state convergence study (constant forcing)",
    "example2": "two-mesh optimality-system study (quadratic tracking target)",
    "example3": "manufactured control problem vs. its exact fields",
    "solve-state": "single state solve; writes the final profile and norms",
    "solve-control": "single optimization run; writes residuals and profiles",
    "kernels": "dump discretization kernel tables for one (N, exponent) pair",
}


def _build_config(command: str, config_path: Path | None, out: Path | None) -> StudyConfig:
    values: dict[str, object] = dict(_DEFAULTS[command])
    if config_path is not None:
        overrides = parse_config(config_path.read_text(encoding="utf-8"))
        declared = overrides.pop("example", None)
        if declared is not None and declared != command:
            raise ValueError(
                f"config declares example={declared!r} but the "
                f"{command!r} command was invoked"
            )
        values.update(overrides)
    if out is not None:
        values["out_dir"] = str(out)
    return StudyConfig(example=command, **values)  # type: ignore[arg-type]


def _run_solve_state(config: StudyConfig, out_dir: Path) -> list[Path]:
    spec = config.spec()
    N, M = config.N_list[0], config.M_list[0]
    fem = FemOperators.build(Mesh1D(M))
    tables = build_tables(spec, N, default_g_rule(spec, config.quad_nodes))
    plan = ForcingPlan.nodal_history(
        np.ones((N, fem.mesh.interior_count)), np.ones((N, 2))
    )
    U = solve_state(tables, fem, plan)
    profile = out_dir / "solve_state_profile.csv"
    write_rows_csv(profile, ("x", "u_final"), zip(fem.mesh.interior_nodes(), U[N]))
    norms = out_dir / "solve_state_norms.csv"
    write_rows_csv(
        norms,
        ("n", "t_n", "l2_norm"),
        (
            (n, n * tables.tau, l2_norm_discrete(U[n], fem.mesh.h))
            for n in range(N + 1)
        ),
    )
    return [profile, norms]


def _run_solve_control(config: StudyConfig, out_dir: Path) -> list[Path]:
    spec = config.spec()
    N, M = config.N_list[0], config.M_list[0]
    problem = tracking_problem(
        spec, config.kappa, N, M, config.tol, config.max_iters, config.quad_nodes
    )
    history: list[tuple[int, float]] = []
    result = fixed_point_optimize(problem, on_iteration=lambda i, r: history.append((i, r)))
    residuals = out_dir / "solve_control_residuals.csv"
    write_rows_csv(residuals, ("iteration", "residual"), history)
    summary = out_dir / "solve_control_summary.csv"
    write_rows_csv(
        summary,
        ("iterations", "residual", "objective"),
        [(result.iterations, result.residual, result.objective)],
    )
    profiles = out_dir / "solve_control_profiles.csv"
    xs = Mesh1D(M).interior_nodes()
    write_rows_csv(
        profiles,
        ("x", "u_final", "z_initial", "c_last"),
        zip(xs, result.U[N], result.Z[0], result.C[N - 1]),
    )
    return [residuals, summary, profiles]


def _run_kernels(config: StudyConfig, out_dir: Path) -> list[Path]:
    spec = config.spec()
    N = config.N_list[0]
    tables = build_tables(spec, N, default_g_rule(spec, config.quad_nodes))
    path = out_dir / "kernels.csv"
    write_kernel_csv(tables, path)
    return [path]


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vesd",
        description="Solvers and studies for time-varying-order subdiffusion "
        "and its tracking-control problem.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in _HELP.items():
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None,
                         help="flat key=value config file")
        cmd.add_argument("--out", type=Path, default=None,
                         help="output directory (overrides config out_dir)")

    args = parser.parse_args(argv)
    try:
        config = _build_config(args.command, args.config, args.out)
        out_dir = Path(config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command in ("example1", "example2", "example3"):
            _, paths = run_example(config)
        elif args.command == "solve-state":
            paths = _run_solve_state(config, out_dir)
        elif args.command == "solve-control":
            paths = _run_solve_control(config, out_dir)
        else:
            paths = _run_kernels(config, out_dir)
    except (ValueError, OSError, ConvergenceError, FixedPointError,
            OracleConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
