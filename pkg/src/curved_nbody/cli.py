"""Command-line front end.

    curved-nbody simulate --config run.json --out traj.csv
    curved-nbody find-eq  --config run.json --seed 7
    curved-nbody verify   --config run.json
    curved-nbody scan     --config run.json --format json
    curved-nbody diagnose --config run.json --out probe.csv

Exit codes: 0 success, 1 internal error, 2 config error, 3 singularity,
4 non-convergence (including a failed orbit verification).
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import reports
from .bound_probe import scan_bound, shrink_family_probe
from .dynamics import BodySystem, PhaseState, integrate, tangent_velocity
from .equilibria import REProblem, dedup, solution_record, solve_re, verify_orbit
from .errors import ConfigError, InvalidArgumentError, SingularityError, StiffnessError
from .bound_probe import random_start, start_rng
from .geometry import RotationSpec

COMMANDS = ("simulate", "find-eq", "verify", "scan", "diagnose")

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_SINGULAR, EXIT_NOCONV = 0, 1, 2, 3, 4

DEFAULT_TOL = {
    "simulate": 1e-9,
    "find-eq": 1e-10,
    "verify": 1e-12,
    "scan": 1e-13,
    "diagnose": 1e-10,
}
DEFAULT_FORMAT = {
    "simulate": "csv",
    "find-eq": "json",
    "verify": "json",
    "scan": "json",
    "diagnose": "csv",
}


class NonConvergence(Exception):
    pass


@dataclass
class RunConfig:
    k: int
    masses: list
    rates: list
    sigma: int = 1
    command: str | None = None
    positions: list | None = None
    velocities: list | None = None
    t_end: float | None = None
    tol: float | None = None
    int_tol: float = 1e-9
    max_iter: int = 200
    starts: int | None = None
    seed: int = 0
    match_tol: float = 1e-6
    periods: float = 1.0
    tol_dyn: float = 1e-6
    d_values: list = field(default_factory=lambda: [1e-1, 1e-2, 1e-3])
    cluster: list = field(default_factory=lambda: [0, 1])
    workers: int = 1
    out: str | None = None
    format: str | None = None

    @property
    def n(self):
        return len(self.masses)

    def spec(self) -> RotationSpec:
        return RotationSpec(tuple(self.rates), self.k)

    def problem(self) -> REProblem:
        return REProblem(tuple(self.masses), self.spec())


_FIELDS = {f.name for f in fields(RunConfig)}
_REQUIRED = ("k", "masses", "rates")


def _num(name, value, kind=float):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if kind is int:
        if float(value) != int(value):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return int(value)
    if not np.isfinite(value):
        raise ConfigError(name, "must be finite")
    return float(value)


def _vec_list(name, value, n, k):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(name, "expected an n x k array of numbers") from None
    if arr.shape != (n, k):
        raise ConfigError(name, f"expected shape ({n}, {k}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(name, "entries must be finite")
    return arr.tolist()


def validate(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = sorted(set(raw) - _FIELDS)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    for name in _REQUIRED:
        if name not in raw:
            raise ConfigError(name, "missing required field")
    c = dict(raw)
    c["k"] = _num("k", c["k"], int)
    if c["k"] < 2:
        raise ConfigError("k", "must be >= 2")
    sigma = _num("sigma", c.get("sigma", 1), int)
    if sigma not in (1, -1):
        raise ConfigError("sigma", "must be +1 or -1")
    c["sigma"] = sigma
    if not isinstance(c["masses"], list) or not c["masses"]:
        raise ConfigError("masses", "need a nonempty list of masses")
    c["masses"] = [_num("masses", m) for m in c["masses"]]
    if any(m <= 0 for m in c["masses"]):
        raise ConfigError("masses", "masses must be positive")
    if not isinstance(c["rates"], list):
        raise ConfigError("rates", "expected a list")
    c["rates"] = [_num("rates", a) for a in c["rates"]]
    if len(c["rates"]) != c["k"] // 2:
        raise ConfigError("rates", f"k={c['k']} needs {c['k'] // 2} rates, got {len(c['rates'])}")
    command = c.get("command")
    if command is not None and command not in COMMANDS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
    n, k = len(c["masses"]), c["k"]
    for name in ("positions", "velocities"):
        if c.get(name) is not None:
            c[name] = _vec_list(name, c[name], n, k)
    for name in ("t_end", "tol", "int_tol", "match_tol", "periods", "tol_dyn"):
        if c.get(name) is not None:
            c[name] = _num(name, c[name])
            if c[name] <= 0:
                raise ConfigError(name, "must be positive")
    for name in ("max_iter", "starts", "seed", "workers"):
        if c.get(name) is not None:
            c[name] = _num(name, c[name], int)
            if name != "seed" and c[name] < 1:
                raise ConfigError(name, "must be >= 1")
    if not 1e-13 <= c.get("int_tol", 1e-9) <= 1e-3:
        raise ConfigError("int_tol", "must lie in [1e-13, 1e-3]")
    if "d_values" in c:
        if not isinstance(c["d_values"], list) or not c["d_values"]:
            raise ConfigError("d_values", "need a nonempty list")
        c["d_values"] = [_num("d_values", d) for d in c["d_values"]]
        if any(d <= 0 for d in c["d_values"]) or any(
            b >= a for a, b in zip(c["d_values"], c["d_values"][1:])
        ):
            raise ConfigError("d_values", "must be positive and strictly decreasing")
    if "cluster" in c:
        if not isinstance(c["cluster"], list):
            raise ConfigError("cluster", "expected a list of body indices")
        c["cluster"] = [_num("cluster", i, int) for i in c["cluster"]]
        if 0 not in c["cluster"] or any(i < 0 for i in c["cluster"]):
            raise ConfigError("cluster", "indices must be non-negative and include 0")
    if c.get("format") is not None and c["format"] not in ("csv", "json"):
        raise ConfigError("format", "must be csv or json")
    if c.get("out") is not None and not isinstance(c["out"], str):
        raise ConfigError("out", "expected a path string")
    cfg = RunConfig(**c)
    if cfg.command is not None:
        check_for_command(cfg, cfg.command)
    return cfg


def check_for_command(cfg: RunConfig, command: str):
    """Command-specific requirements, checked once the command is known."""
    tol = cfg.tol if cfg.tol is not None else DEFAULT_TOL[command]
    if command == "simulate":
        if not 1e-13 <= tol <= 1e-3:
            raise ConfigError("tol", "integration tol must lie in [1e-13, 1e-3]")
        if cfg.positions is None:
            raise ConfigError("positions", "simulate needs initial positions")
    else:
        if cfg.sigma != 1:
            raise ConfigError("sigma", f"{command} is only defined on the sphere (sigma=1)")
        if not 1e-14 <= tol <= 1e-4:
            raise ConfigError("tol", "solver tol must lie in [1e-14, 1e-4]")
    if command in ("verify", "diagnose") and cfg.positions is None:
        raise ConfigError("positions", f"{command} needs a configuration")
    if command == "diagnose":
        if cfg.n < 2:
            raise ConfigError("masses", "diagnose needs at least two bodies")
        if any(i >= cfg.n for i in cfg.cluster):
            raise ConfigError("cluster", f"indices must lie in [0, {cfg.n})")


def parse_config(text: str) -> RunConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    return validate(raw)


def serialize_config(cfg: RunConfig) -> str:
    return reports.dumps(asdict(cfg))


def _initial_state(cfg: RunConfig) -> PhaseState:
    system = BodySystem(cfg.masses, cfg.positions, cfg.sigma)
    if cfg.velocities is not None:
        return PhaseState(system, np.array(cfg.velocities))
    if cfg.sigma == 1:
        return PhaseState(system, tangent_velocity(system, cfg.spec()))
    return PhaseState(system, np.zeros((cfg.n, cfg.k)))


def _simulate(cfg, fmt):
    spec = cfg.spec()
    t_end = cfg.t_end
    if t_end is None:
        period = spec.period()
        t_end = period if period is not None else 1.0
    traj = integrate(_initial_state(cfg), t_end, tol=cfg.tol or DEFAULT_TOL["simulate"], spec=spec)
    return reports.trajectory_csv(traj) if fmt == "csv" else reports.trajectory_json(traj)


def _find_eq(cfg, fmt):
    problem = cfg.problem()
    tol = cfg.tol or DEFAULT_TOL["find-eq"]
    if cfg.positions is not None:
        sols = [solve_re(problem, cfg.positions, tol=tol, max_iter=cfg.max_iter)]
        attempted = 1
    else:
        attempted = cfg.starts or 10
        sols = [
            solve_re(problem, random_start(problem, start_rng(cfg.seed, i)), tol=tol, max_iter=cfg.max_iter)
            for i in range(attempted)
        ]
    converged = dedup([s for s in sols if s.converged], problem, cfg.match_tol)
    if not converged:
        raise NonConvergence(f"no start converged to tol {tol:g}")
    if fmt == "csv":
        return reports.solutions_csv(converged, problem)
    return reports.dumps({
        "problem": reports.problem_record(problem),
        "starts": attempted,
        "converged": sum(s.converged for s in sols),
        "solutions": [solution_record(s, problem) for s in converged],
    })


def _verify(cfg, fmt):
    problem = cfg.problem()
    tol = cfg.tol or DEFAULT_TOL["verify"]
    sol = solve_re(problem, cfg.positions, tol=tol, max_iter=cfg.max_iter)
    if not sol.converged:
        raise NonConvergence(f"configuration did not converge (residual {sol.residual_norm:.3e})")
    report = verify_orbit(sol, problem, cfg.periods, cfg.tol_dyn, cfg.int_tol)
    rec = {
        "solution": solution_record(sol, problem),
        "periods": cfg.periods,
        "t_end": report.t_end,
        "max_deviation": report.max_deviation,
        "max_drift": report.max_drift,
        "tol_dyn": cfg.tol_dyn,
        "passed": report.passed,
    }
    if fmt == "csv":
        cols = ["periods", "t_end", "max_deviation", "max_drift", "tol_dyn", "passed"]
        text = ",".join(cols) + "\n" + ",".join(
            str(rec[c]).lower() if isinstance(rec[c], bool) else repr(float(rec[c])) for c in cols
        ) + "\n"
    else:
        text = reports.dumps(rec)
    return text, report.passed


def _scan(cfg, fmt):
    result = scan_bound(
        cfg.problem(), cfg.starts or 100, cfg.seed, tol=cfg.tol or DEFAULT_TOL["scan"],
        max_iter=cfg.max_iter, match_tol=cfg.match_tol, workers=cfg.workers,
    )
    return reports.scan_csv(result) if fmt == "csv" else reports.dumps(reports.scan_record(result))


def _diagnose(cfg, fmt):
    base = BodySystem(cfg.masses, cfg.positions, 1)
    table = shrink_family_probe(cfg.problem(), base, cfg.cluster, cfg.d_values)
    return reports.probe_csv(table) if fmt == "csv" else reports.dumps(reports.probe_record(table))


def run(command: str, cfg: RunConfig, stdout=None) -> int:
    """Execute one command; returns the process exit code."""
    stdout = stdout or sys.stdout
    try:
        if command not in COMMANDS:
            raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}")
        check_for_command(cfg, command)
        fmt = cfg.format or DEFAULT_FORMAT[command]
        ok = True
        if command == "simulate":
            text = _simulate(cfg, fmt)
        elif command == "find-eq":
            text = _find_eq(cfg, fmt)
        elif command == "verify":
            text, ok = _verify(cfg, fmt)
        elif command == "scan":
            text = _scan(cfg, fmt)
        else:
            text = _diagnose(cfg, fmt)
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            stdout.write(text)
        if not ok:
            _error_record("verification", "orbit deviated beyond tol_dyn", EXIT_NOCONV)
            return EXIT_NOCONV
        return EXIT_OK
    except ConfigError as exc:
        return _error_record("config", str(exc), EXIT_CONFIG, field=exc.field)
    except InvalidArgumentError as exc:
        return _error_record("config", str(exc), EXIT_CONFIG)
    except SingularityError as exc:
        return _error_record("singularity", str(exc), EXIT_SINGULAR, pair=list(exc.pair))
    except (NonConvergence, StiffnessError) as exc:
        return _error_record("non-convergence", str(exc), EXIT_NOCONV)
    except Exception as exc:  # noqa: BLE001 - reported as an internal error record
        return _error_record("internal", f"{type(exc).__name__}: {exc}", EXIT_INTERNAL)


def _error_record(kind, message, code, **extra):
    rec = {"error": kind, "message": message, "exit_code": code, **extra}
    sys.stderr.write(json.dumps(rec) + "\n")
    return code


def build_parser():
    ap = argparse.ArgumentParser(prog="curved-nbody", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="flat JSON run configuration")
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--format", choices=("csv", "json"), help="output format")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        return _error_record("config", f"cannot read config: {exc}", EXIT_CONFIG, field="--config")
    except json.JSONDecodeError as exc:
        return _error_record("config", f"invalid JSON: {exc}", EXIT_CONFIG, field="<document>")
    if isinstance(raw, dict):
        raw = dict(raw)
        for name in ("out", "seed", "format"):
            if getattr(args, name) is not None:
                raw[name] = getattr(args, name)
        raw["command"] = args.command
    try:
        cfg = validate(raw)
    except ConfigError as exc:
        return _error_record("config", str(exc), EXIT_CONFIG, field=exc.field)
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
