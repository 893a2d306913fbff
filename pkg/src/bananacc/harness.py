"""Batch workflows behind the CLI: propagate, contour, optimize, validate.

Each ``cmd_*`` function returns its in-memory result and, when ``out`` is
given, writes CSV/JSON artifacts into that directory. Nothing is plotted.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from .chance_opt import (
    AXIS_NAMES,
    ConstraintEvaluation,
    Method,
    SolveReport,
    evaluate_constraints,
    solve,
)
from .contour import contour_parameters
from .dynamics import (
    STATUS_OK,
    angular_momentum,
    apply_impulse,
    propagate_many,
    propagate_trajectory,
    specific_energy,
    status_text,
)
from .moment_propagation import gauss_hermite_rule, linear_covariance, propagate_moments
from .scenario import ScenarioConfig, scenario_to_dict
from .tensor_stats import MomentSet


@dataclass
class ValidationReport:
    per_constraint: dict[str, float]
    joint: float
    n_samples: int
    n_excluded: int
    seed: int
    method: str
    u: list[float]
    excluded_reasons: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        fracs = list(self.per_constraint.values()) + [self.joint]
        if any(not 0.0 <= f <= 1.0 for f in fracs):
            raise ValueError("satisfaction fractions must lie in [0, 1]")
        if self.per_constraint and self.joint > min(self.per_constraint.values()):
            raise ValueError("joint satisfaction exceeds a per-constraint fraction")

    def to_dict(self) -> dict:
        return {
            "per_constraint": self.per_constraint,
            "joint": self.joint,
            "n_samples": self.n_samples,
            "n_excluded": self.n_excluded,
            "excluded_reasons": self.excluded_reasons,
            "seed": self.seed,
            "method": self.method,
            "u": self.u,
        }


def _out_dir(out: str | Path | None) -> Path | None:
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=False) + "\n")


def sample_final_states(scenario: ScenarioConfig, u: ArrayLike, n_samples: int, seed: int):
    """Seeded draws from N(x0, P0), impulse applied, propagated to ``t1``."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, 6))
    x0 = scenario.mean0 + z * np.asarray(scenario.sigma0)
    x0[:, 3:] += np.asarray(u, dtype=float)
    return propagate_many(x0, scenario.t0, scenario.t1, scenario.mu, scenario.propagation)


def cmd_validate(
    scenario: ScenarioConfig,
    u: ArrayLike,
    n_samples: int | None = None,
    seed: int | None = None,
    method: str = "",
    out: str | Path | None = None,
) -> ValidationReport:
    """Monte Carlo check of the box chance constraints for impulse ``u``.

    Samples that hit the collision guard count as violating every
    constraint and are reported in ``n_excluded``.
    """
    n_samples = scenario.monte_carlo.n_samples if n_samples is None else int(n_samples)
    seed = scenario.monte_carlo.seed if seed is None else int(seed)
    if n_samples < 100:
        raise ValueError(f"n_samples must be at least 100, got {n_samples}")
    final, status = sample_final_states(scenario, u, n_samples, seed)
    ok = status == STATUS_OK

    per: dict[str, float] = {}
    all_ok = ok.copy()
    for c in scenario.target_box.constraints:
        sat = c.satisfied(final) & ok
        per[c.label] = float(np.count_nonzero(sat)) / n_samples
        all_ok &= sat
    reasons = {
        status_text(int(code)): int(np.count_nonzero(status == code))
        for code in np.unique(status[~ok])
    }
    report = ValidationReport(
        per_constraint=per,
        joint=float(np.count_nonzero(all_ok)) / n_samples,
        n_samples=n_samples,
        n_excluded=int(np.count_nonzero(~ok)),
        seed=seed,
        method=method,
        u=[float(v) for v in u],
        excluded_reasons=reasons,
    )
    path = _out_dir(out)
    if path is not None:
        _write_csv(
            path / "mc_samples.csv",
            ["x", "y", "z", "ok"],
            ((r[0], r[1], r[2], a) for r, a in zip(final, all_ok)),
        )
        write_json(path / "report.json", {"validation": report.to_dict()})
    return report


def _contour_rows(ev: ConstraintEvaluation, n_points: int):
    """Per slice: rows (slice, t, c1, c2) of the contour at the tightest k."""
    ts = contour_parameters(n_points)
    for sc in ev.slices:
        k = max(sc.contours)
        pts = sc.contours[k].evaluate(ts)
        yield sc.label, [(sc.label, t, p[0], p[1]) for t, p in zip(ts, pts)]


def write_contours(path: Path, ev: ConstraintEvaluation, n_points: int) -> list[Path]:
    files = []
    for label, rows in _contour_rows(ev, n_points):
        f = path / f"contour_{label}.csv"
        _write_csv(f, ["slice", "t", "c1", "c2"], rows)
        files.append(f)
    return files


def slice_summary(ev: ConstraintEvaluation) -> dict:
    out = {}
    for sc in ev.slices:
        out[sc.label] = {
            "indices": list(sc.spec.indices),
            "mean": [float(v) for v in sc.moments.mean2],
            "covariance": sc.moments.cov2.tolist(),
            "lambda1": sc.frame.lambda1,
            "lambda2": sc.frame.lambda2,
            "theta": sc.frame.theta,
            "alpha": sc.alpha,
            "contours": [
                {"k": k, "c_k": c.c_k} for k, c in sorted(sc.contours.items())
            ],
        }
    return out


def cmd_contour(
    scenario: ScenarioConfig,
    u: ArrayLike,
    method: Method | str,
    out: str | Path | None = None,
    *,
    force_gaussian: bool = False,
) -> ConstraintEvaluation:
    method = Method(method)
    ev = evaluate_constraints(u, scenario, method, force_gaussian=force_gaussian)
    path = _out_dir(out)
    if path is not None:
        write_contours(path, ev, scenario.optimizer.contour_points_per_slice)
        write_json(
            path / "report.json",
            {
                "method": method.value,
                "u": [float(v) for v in u],
                "slices": slice_summary(ev),
                "pair_margins": ev.pair_minimums(),
            },
        )
    return ev


def cmd_optimize(
    scenario: ScenarioConfig,
    method: Method | str,
    out: str | Path | None = None,
    *,
    warm_start: bool = True,
) -> SolveReport:
    """Solve for the minimum-norm impulse and write the report and contours.

    Banana solves start from the ellipse optimum when ``warm_start`` is set:
    the two answers are close, and the linear stage is ~1000x cheaper.
    """
    method = Method(method)
    stages = []
    u_guess = None
    if method is Method.BANANA and warm_start:
        first = solve(scenario, Method.ELLIPSE)
        stages.append(first.to_dict())
        if first.converged:
            u_guess = first.u_star
    report = solve(scenario, method, u_guess=u_guess)
    path = _out_dir(out)
    if path is not None:
        ev = evaluate_constraints(report.u_star, scenario, method)
        write_contours(path, ev, scenario.optimizer.contour_points_per_slice)
        write_json(
            path / "report.json",
            {
                "scenario": scenario.name,
                "t1_seconds": scenario.t1,
                "t1_hours": scenario.t1 / 3600.0,
                "solve": report.to_dict(),
                "warm_start_stages": stages,
                "slices": slice_summary(ev),
            },
        )
    return report


def moment_rows(ms: MomentSet):
    """Flattened tensors as (tensor, index, value) rows."""
    for name, tensor in (("mean", ms.mean), ("cov", ms.cov), ("skew", ms.skew), ("kurt", ms.kurt)):
        for idx in itertools.product(range(ms.dim), repeat=tensor.ndim):
            yield name, "".join(map(str, idx)), float(tensor[idx])


def read_moment_rows(path: str | Path) -> MomentSet:
    data: dict[str, dict[tuple[int, ...], float]] = {}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            data.setdefault(row["tensor"], {})[tuple(int(c) for c in row["index"])] = float(row["value"])
    dim = len(data["mean"])
    arrays = {}
    for name, order in (("mean", 1), ("cov", 2), ("skew", 3), ("kurt", 4)):
        arr = np.empty((dim,) * order)
        for idx, v in data[name].items():
            arr[idx] = v
        arrays[name] = arr
    return MomentSet(**arrays)


def cmd_propagate(
    scenario: ScenarioConfig,
    u: ArrayLike,
    out: str | Path | None = None,
    n_nodes: int = 400,
) -> tuple[np.ndarray, np.ndarray, MomentSet]:
    """Nominal trajectory plus the cubature MomentSet at ``t1``."""
    x_start = apply_impulse(scenario.mean0, u)
    times, states = propagate_trajectory(
        x_start, scenario.t0, scenario.t1, scenario.mu, n_nodes, scenario.propagation
    )
    rule = gauss_hermite_rule(scenario.cubature_order, 6)
    ms = propagate_moments(
        scenario.mean0, scenario.cov0, u, scenario.t0, scenario.t1, scenario.mu, rule,
        scenario.propagation,
    )
    path = _out_dir(out)
    if path is not None:
        e0 = specific_energy(states[0], scenario.mu)
        rows = []
        for t, x in zip(times, states):
            e = specific_energy(x, scenario.mu)
            rows.append((t, *x, e, (e - e0) / abs(e0), *angular_momentum(x)))
        _write_csv(
            path / "trajectory.csv",
            ["t", *AXIS_NAMES, "energy", "energy_rel_drift", "hx", "hy", "hz"],
            rows,
        )
        _write_csv(path / "moments.csv", ["tensor", "index", "value"], moment_rows(ms))
        lin = linear_covariance(
            scenario.mean0, scenario.cov0, u, scenario.t0, scenario.t1, scenario.mu,
            scenario.propagation,
        )
        write_json(
            path / "report.json",
            {
                "scenario": scenario_to_dict(scenario),
                "u": [float(v) for v in u],
                "t1_hours": scenario.t1 / 3600.0,
                "nominal_final": states[-1].tolist(),
                "mean_final": ms.mean.tolist(),
                "cov_final": ms.cov.tolist(),
                "cov_linear": lin.cov_lin.tolist(),
                "max_energy_rel_drift": max(abs(r[8]) for r in rows),
            },
        )
    return times, states, ms


def is_finite_csv(path: str | Path) -> bool:
    """Strict parse: header, fixed column count, finite numerics where numeric."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return False
    width = len(rows[0])
    for row in rows[1:]:
        if len(row) != width:
            return False
        for cell in row:
            try:
                if not math.isfinite(float(cell)):
                    return False
            except ValueError:
                if not cell.isidentifier():
                    return False
    return True
