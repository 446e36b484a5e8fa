"""CSV/JSON writers for trajectories, solutions, scans and probes.

Floats are written with ``repr``, the shortest string that round-trips.
"""
from __future__ import annotations

import csv
import io
import json

from .equilibria import REProblem, solution_record


def _f(x):
    return repr(float(x))


def trajectory_csv(traj) -> str:
    k = traj.positions.shape[2]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "body"] + [f"x{i + 1}" for i in range(k)] + [f"v{i + 1}" for i in range(k)])
    for t, Q, V in zip(traj.times, traj.positions, traj.velocities):
        for b in range(Q.shape[0]):
            w.writerow([_f(t), b] + [_f(x) for x in Q[b]] + [_f(v) for v in V[b]])
    return buf.getvalue()


def trajectory_json(traj) -> str:
    doc = {
        "sigma": traj.sigma,
        "masses": traj.masses.tolist(),
        "max_drift": float(traj.drift.max()),
        "rejected_steps": traj.rejected,
        "samples": [
            {"t": float(t), "positions": Q.tolist(), "velocities": V.tolist()}
            for t, Q, V in zip(traj.times, traj.positions, traj.velocities)
        ],
    }
    return dumps(doc)


def problem_record(problem: REProblem) -> dict:
    return {"masses": list(problem.masses), "rates": list(problem.spec.rates), "k": problem.k}


def solutions_csv(solutions, problem: REProblem) -> str:
    k = problem.k
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["solution", "body"] + [f"x{i + 1}" for i in range(k)]
               + ["residual_norm", "classification", "min_distance"])
    for s_idx, sol in enumerate(solutions):
        md = sol.min_distance()
        for b, q in enumerate(sol.configuration.positions):
            w.writerow([s_idx, b] + [_f(x) for x in q]
                       + [_f(sol.residual_norm), sol.classification, "" if md is None else _f(md)])
    return buf.getvalue()


def scan_record(result) -> dict:
    return {
        "problem": problem_record(result.problem),
        "seed": result.seed,
        "starts": result.n_starts,
        "converged": result.n_converged,
        "empirical_c": result.empirical_c,
        "empirical_c_by_label": dict(sorted(result.empirical_c_by_label.items())),
        "flagged": result.flagged,
        "solutions": [solution_record(s, result.problem) for s in result.solutions],
    }


def scan_csv(result) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["solution", "classification", "min_distance", "residual_norm"])
    for i, (s, d) in enumerate(zip(result.solutions, result.min_distances)):
        w.writerow([i, s.classification, "" if d is None else _f(d), _f(s.residual_norm)])
    return buf.getvalue()


PROBE_COLUMNS = ["d", "lhs_value", "rhs_value", "rhs_lower_half", "min_cos_alpha"]


def probe_csv(table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROBE_COLUMNS)
    for r in table.rows:
        w.writerow([_f(getattr(r, c)) for c in PROBE_COLUMNS])
    return buf.getvalue()


def probe_record(table) -> dict:
    return {
        "w_bound": table.w_bound,
        "loglog_slope": table.loglog_slope() if len(table.rows) > 1 else None,
        "rows": [
            {**{c: getattr(r, c) for c in PROBE_COLUMNS}, "w_norm": r.w_norm} for r in table.rows
        ],
    }


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"
