"""Command-line entry point: ingest, fit, simulate, optimize, report.

Each subcommand reads one merged configuration (preset, config file,
SEIRCTL_* environment variables, CLI flags, in rising precedence) and
writes plain CSV/text outputs into the configured output directory, so a
full case study is reproducible as a short sequence of commands.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 non-convergence, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys

import numpy as np

from . import __version__
from .config import RunConfig, build_config, env_overrides, load_preset, merge_sources, parse_kv_file
from .control import hamiltonian, solve_fbsm, write_solution_csv
from .dataio import ObservedSeries, aggregate_national, parse_regional_csv, read_series_csv, write_series_csv
from .errors import ConfigError, DataFormatError, InvalidStateError, NonFiniteStateError
from .fit import VAR_NAMES, FitProblem, fit
from .integrate import TimeGrid, Trajectory, read_csv, write_csv
from .metrics import build_table, render_text, write_table_csv
from .model import PARAM_NAMES, ModelParams, PopulationConstant, StateVec, simulate

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CONVERGENCE = 4
EXIT_NUMERICAL = 5

STATE_COLUMNS = list(StateVec._fields)

TRAJECTORY_FILE = "trajectory.csv"
SOLUTION_FILE = "solution.csv"
SERIES_FILE = "national.csv"
FIT_FILE = "fit.txt"
FBSM_LOG_FILE = "fbsm_log.txt"
REPORT_FILE = "report.txt"


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--preset", metavar="NAME", help="built-in scenario preset")
    common.add_argument("--out", metavar="DIR", help="output directory override")
    common.add_argument("--step", metavar="H", type=float, help="integration step override")
    common.add_argument(
        "--seed",
        metavar="S",
        type=int,
        default=0,
        help="seed for the optimality random-sampling self-test",
    )

    parser = argparse.ArgumentParser(
        prog="seirctl",
        description="Simulate, calibrate, and optimally control a seven-compartment epidemic model.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("ingest", parents=[common], help="normalize a regional feed CSV into a national series")
    p.add_argument("input", nargs="?", help="regional CSV path ('-' for stdin; default: config data_path)")

    sub.add_parser("fit", parents=[common], help="calibrate model parameters to the ingested series")

    p = sub.add_parser("simulate", parents=[common], help="integrate the uncontrolled model over the window")
    p.add_argument("--params", metavar="FILE", help="key = value parameter source (e.g. a fit output)")

    p = sub.add_parser("optimize", parents=[common], help="solve the optimal-control problem over the window")
    p.add_argument("--params", metavar="FILE", help="key = value parameter source (e.g. a fit output)")

    sub.add_parser("report", parents=[common], help="render observed-vs-simulated comparison tables")
    return parser


def _resolve_config(args) -> RunConfig:
    sources = []
    if args.preset:
        sources.append(load_preset(args.preset))
    if args.config:
        sources.append(parse_kv_file(args.config))
    if not sources:
        raise ConfigError("no configuration given: pass --preset and/or --config")
    sources.append(env_overrides())
    overrides = {}
    if args.step is not None:
        overrides["step"] = repr(args.step)
    if args.out is not None:
        overrides["out_dir"] = args.out
    sources.append(overrides)
    return build_config(merge_sources(*sources))


def _out_path(cfg: RunConfig, name: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    return os.path.join(cfg.out_dir, name)


def _series_file(cfg: RunConfig) -> str:
    return cfg.series_path or os.path.join(cfg.out_dir, SERIES_FILE)


def _grid(cfg: RunConfig) -> TimeGrid:
    try:
        return TimeGrid(0.0, cfg.horizon_days, cfg.step)
    except ValueError as exc:
        raise ConfigError(f"window/step mismatch: {exc}") from exc


def _loose_kv_file(path) -> dict:
    """Key = value parser without a key whitelist, for parameter files."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def _resolve_inputs(cfg: RunConfig, params_path) -> tuple[ModelParams, StateVec]:
    """Merge the parameter source over the config and assemble the state at t0."""
    values = {name: getattr(cfg.params, name) for name in PARAM_NAMES}
    e0, i0 = cfg.e0, cfg.i0
    if params_path:
        raw = _loose_kv_file(params_path)
        for name in PARAM_NAMES:
            if name in raw:
                try:
                    values[name] = float(raw[name])
                except ValueError as exc:
                    raise ConfigError(f"{params_path}: {name}: {exc}") from exc
        if "e0" in raw:
            e0 = float(raw["e0"])
        if "i0" in raw:
            i0 = float(raw["i0"])
    try:
        params = ModelParams(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if cfg.q0 is not None and cfg.r0 is not None and cfg.d0 is not None:
        q0, r0, d0 = cfg.q0, cfg.r0, cfg.d0
    else:
        series = read_series_csv(_series_file(cfg))
        if series.dates[0] != cfg.start_date:
            raise DataFormatError(
                f"series starts {series.dates[0]}, expected {cfg.start_date}; "
                "run ingest for the configured window first"
            )
        q0, r0, d0 = float(series.q[0]), float(series.r[0]), float(series.d[0])

    s0 = cfg.n_population - e0 - i0 - q0 - r0 - d0 - cfg.p0
    if s0 < 0:
        raise InvalidStateError(f"initial susceptibles negative: {s0}")
    return params, StateVec(s0, e0, i0, q0, r0, d0, cfg.p0)


def _slice_series(series: ObservedSeries, start: _dt.date, end: _dt.date) -> ObservedSeries:
    keep = [i for i, day in enumerate(series.dates) if start <= day <= end]
    if not keep:
        raise DataFormatError(f"series has no days within [{start}, {end}]")
    lo, hi = keep[0], keep[-1] + 1
    return ObservedSeries(
        dates=series.dates[lo:hi], q=series.q[lo:hi], r=series.r[lo:hi], d=series.d[lo:hi]
    )


def cmd_ingest(args, cfg: RunConfig) -> int:
    source = args.input or cfg.data_path
    if source is None:
        raise ConfigError("no input: pass a CSV path or set data_path")
    records = parse_regional_csv(sys.stdin if source == "-" else source)
    series = aggregate_national(records, cfg.data_window)
    path = _out_path(cfg, SERIES_FILE) if cfg.series_path is None else cfg.series_path
    write_series_csv(series, path)
    print(f"wrote {len(series.dates)} days ({series.dates[0]}..{series.dates[-1]}) to {path}")
    return EXIT_OK


def cmd_fit(args, cfg: RunConfig) -> int:
    if cfg.fit_guess is None:
        raise ConfigError("fit requires a full fit_guess_* block in the configuration")
    observed = _slice_series(read_series_csv(_series_file(cfg)), cfg.start_date, cfg.data_end)
    problem = FitProblem(
        observed=observed,
        n=PopulationConstant(cfg.n_population),
        p0=cfg.p0,
        h=cfg.step,
        lower=cfg.fit_lower,
        upper=cfg.fit_upper,
    )
    result = fit(problem, cfg.fit_guess, cfg.fit_options)
    path = _out_path(cfg, FIT_FILE)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(result.to_key_value_text())
    rmse = "  ".join(f"rmse_{k}={v:.4g}" for k, v in result.rmse.items())
    print(f"converged = {'true' if result.converged else 'false'} ({result.message})")
    print(f"iterations = {result.iterations}  residual_norm = {result.residual_norm:.6g}")
    print(rmse)
    print(f"wrote {path}")
    return EXIT_OK if result.converged else EXIT_CONVERGENCE


def _write_single_row(path: str, x0: StateVec) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(["t"] + STATE_COLUMNS) + "\n")
        fh.write(",".join([repr(0.0)] + [repr(float(v)) for v in x0]) + "\n")


def cmd_simulate(args, cfg: RunConfig) -> int:
    params, x0 = _resolve_inputs(cfg, getattr(args, "params", None))
    path = _out_path(cfg, TRAJECTORY_FILE)
    if cfg.horizon_days == 0:
        _write_single_row(path, x0)
        print(f"zero-horizon window: wrote the initial state to {path}")
        return EXIT_OK
    grid = _grid(cfg)
    traj = simulate(params, x0, PopulationConstant(cfg.n_population), grid)
    write_csv(traj, path, STATE_COLUMNS)
    final = traj.values[-1]
    print(
        f"simulated {grid.n_steps} steps over {cfg.horizon_days:g} days; "
        f"Q(end)={final[3]:.1f} R(end)={final[4]:.1f} D(end)={final[5]:.1f}"
    )
    print(f"wrote {path}")
    return EXIT_OK


def _selfcheck(sol, params, cfg: RunConfig, seed: int, nodes: int = 20, samples: int = 50):
    """Random-sampling check that the returned control minimizes H nodewise."""
    rng = np.random.default_rng(seed)
    n = PopulationConstant(cfg.n_population)
    ts = sol.states.grid.nodes()
    idx = rng.choice(ts.size, size=min(nodes, ts.size), replace=False)
    lo = np.array(cfg.bounds.lower, dtype=float)
    hi = np.array(cfg.bounds.upper, dtype=float)
    worst = -np.inf
    for i in idx:
        x = sol.states.values[i]
        psi = sol.adjoints.values[i]
        h_star = hamiltonian(x, sol.controls.values[i], psi, ts[i], params, cfg.weights, n)
        slack = 1e-8 * (1.0 + abs(h_star))
        for _ in range(samples):
            u = lo + rng.random(3) * (hi - lo)
            worst = max(worst, h_star - hamiltonian(x, u, psi, ts[i], params, cfg.weights, n))
        if worst > slack:
            return False, worst
    return True, worst


def cmd_optimize(args, cfg: RunConfig) -> int:
    params, x0 = _resolve_inputs(cfg, getattr(args, "params", None))
    grid = _grid(cfg)
    sol = solve_fbsm(
        params, x0, cfg.weights, cfg.bounds, grid, cfg.fbsm, PopulationConstant(cfg.n_population)
    )
    path = _out_path(cfg, SOLUTION_FILE)
    write_solution_csv(sol, path)
    ok, worst = _selfcheck(sol, params, cfg, args.seed)
    log_lines = [
        f"converged = {'true' if sol.converged else 'false'}",
        f"iterations = {sol.iterations}",
        f"cost = {sol.cost!r}",
        f"adjoint_form = {cfg.fbsm.adjoint_form}",
        f"selfcheck = {'pass' if ok else 'FAIL'} (worst Hamiltonian slack {worst!r}, seed {args.seed})",
    ]
    log_path = _out_path(cfg, FBSM_LOG_FILE)
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(log_lines) + "\n")
    for line in log_lines:
        print(line)
    print(f"wrote {path}")
    if not sol.converged:
        return EXIT_CONVERGENCE
    return EXIT_OK


def _read_state_block(path: str, expected: list[str]) -> Trajectory:
    names, traj = read_csv(path)
    if names[: len(expected)] != expected:
        raise DataFormatError(f"{path}: expected leading columns {expected}, got {names[:len(expected)]}")
    if len(names) > len(expected):
        return Trajectory(traj.grid, traj.values[:, : len(expected)])
    return traj


def cmd_report(args, cfg: RunConfig) -> int:
    series = read_series_csv(_series_file(cfg))
    uncontrolled = _read_state_block(os.path.join(cfg.out_dir, TRAJECTORY_FILE), STATE_COLUMNS)
    controlled = _read_state_block(os.path.join(cfg.out_dir, SOLUTION_FILE), STATE_COLUMNS)
    dates = cfg.report_dates or series.dates
    months = []
    for day in dates:
        key = (day.year, day.month)
        if key not in months:
            months.append(key)
    blocks = []
    for name in ("R", "D", "Q"):
        for year, month in months:
            sample = [d for d in dates if (d.year, d.month) == (year, month)]
            try:
                table = build_table(name, series, uncontrolled, controlled, sample)
            except ValueError as exc:
                raise DataFormatError(f"report sampling failed: {exc}") from exc
            csv_path = _out_path(cfg, f"table_{name}_{year:04d}-{month:02d}.csv")
            write_table_csv(table, csv_path)
            blocks.append(f"series {name}, {year:04d}-{month:02d}\n{render_text(table)}")
    text = "\n".join(blocks)
    report_path = _out_path(cfg, REPORT_FILE)
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(text, end="")
    print(f"wrote {report_path}")
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"seirctl: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"seirctl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"seirctl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteStateError, InvalidStateError) as exc:
        print(f"seirctl: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
