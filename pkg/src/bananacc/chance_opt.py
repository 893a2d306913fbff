"""Chance constraints enforced on sampled confidence contours.

Each half-space chance constraint ``Pr[h.x <= g] >= 1 - delta`` is replaced by
the deterministic requirement that every sampled boundary point of the
``k(1 - delta)`` contour satisfies ``h.x <= g``, on every configured slice
that contains the constraint axis. The minimum-norm impulse is then found by
SLSQP with central-difference constraint Jacobians, recomputing the contours
at every iterate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import TYPE_CHECKING, Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import minimize

from .contour import (
    BananaContour,
    ConfidenceSpec,
    build_contour,
    bend_coefficient,
    cf_shift,
    confidence_scale,
    contour_parameters,
    sample_contour,
)
from .errors import BananaError, SolveError
from .moment_propagation import gauss_hermite_rule, linear_covariance, propagate_moments
from .tensor_stats import (
    SliceMoments,
    SliceSpec,
    WhitenedFrame,
    gaussian_moment_set,
    slice_moments,
    whiten,
)

if TYPE_CHECKING:
    from .scenario import ScenarioConfig

log = logging.getLogger(__name__)

AXIS_NAMES = ("x", "y", "z", "vx", "vy", "vz")
U_SCALE = 1e-3  # optimizer variable unit [m/s]


class Method(str, Enum):
    ELLIPSE = "ellipse"
    BANANA = "banana"


@dataclass(frozen=True)
class HalfSpaceConstraint:
    """Feasible set ``{x : normal . x <= bound}`` with violation risk ``delta``.

    ``normal`` must be a signed unit coordinate axis over position.
    """

    normal: tuple[float, ...]
    bound: float
    delta: float
    label: str = ""

    def __post_init__(self) -> None:
        h = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "normal", tuple(float(v) for v in h))
        if not math.isclose(float(np.linalg.norm(h)), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError(f"constraint normal must be unit length, got {self.normal}")
        nz = np.flatnonzero(h)
        if nz.size != 1 or nz[0] > 2:
            raise ValueError("constraint normal must be a position coordinate axis")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"risk delta must lie in (0, 1), got {self.delta}")
        if not self.label:
            op = "<=" if self.sign > 0 else ">="
            object.__setattr__(self, "label", f"{AXIS_NAMES[self.axis]}{op}{self.sign * self.bound:g}")

    @property
    def axis(self) -> int:
        return int(np.flatnonzero(self.normal)[0])

    @property
    def sign(self) -> float:
        return float(self.normal[self.axis])

    def satisfied(self, states: ArrayLike) -> NDArray[np.bool_]:
        x = np.asarray(states, dtype=float)
        return self.sign * x[..., self.axis] <= self.bound


@dataclass(frozen=True)
class TargetBox:
    constraints: tuple[HalfSpaceConstraint, ...]

    def __post_init__(self) -> None:
        lo, hi = self.lower, self.upper
        for ax in range(3):
            if not lo[ax] < hi[ax]:
                raise ValueError(
                    f"box axis {AXIS_NAMES[ax]}: lower {lo[ax]} must be below upper {hi[ax]}"
                )

    @property
    def lower(self) -> list[float]:
        lo = [-math.inf] * 3
        for c in self.constraints:
            if c.sign < 0:
                lo[c.axis] = max(lo[c.axis], -c.bound)
        return lo

    @property
    def upper(self) -> list[float]:
        hi = [math.inf] * 3
        for c in self.constraints:
            if c.sign > 0:
                hi[c.axis] = min(hi[c.axis], c.bound)
        return hi


def box_constraints(
    lower: ArrayLike, upper: ArrayLike, delta: float | ArrayLike, dim: int = 6
) -> TargetBox:
    """Six half-spaces ``lower <= position <= upper``, ordered x>=, x<=, y>=, ..."""
    deltas = np.broadcast_to(np.asarray(delta, dtype=float), (6,))
    out = []
    for ax in range(3):
        for side, (sign, bound) in enumerate(((-1.0, -float(lower[ax])), (1.0, float(upper[ax])))):
            h = np.zeros(dim)
            h[ax] = sign
            out.append(HalfSpaceConstraint(tuple(h), bound, float(deltas[2 * ax + side])))
    return TargetBox(tuple(out))


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 100
    constraint_tolerance: float = 1e-3  # m
    step_tolerance: float = 1e-9  # m/s
    finite_difference_step: float = 1e-5  # m/s
    contour_points_per_slice: int = 64

    def __post_init__(self) -> None:
        for name in (
            "max_iterations",
            "constraint_tolerance",
            "step_tolerance",
            "finite_difference_step",
            "contour_points_per_slice",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class SliceContour:
    """Everything computed for one slice at one iterate."""

    spec: SliceSpec
    label: str
    moments: SliceMoments
    frame: WhitenedFrame
    alpha: float
    contours: dict[float, BananaContour]  # keyed by confidence scaling k


@dataclass
class ConstraintEvaluation:
    u0: NDArray[np.float64]
    method: Method
    slices: list[SliceContour]
    pair_margins: dict[tuple[str, str], NDArray[np.float64]]  # (constraint, slice) -> per-sample
    min_margins: NDArray[np.float64]  # per constraint, in box order
    constraint_labels: list[str]

    @property
    def vector(self) -> NDArray[np.float64]:
        """All per-sample margins concatenated in (constraint, slice) order."""
        return np.concatenate(list(self.pair_margins.values()))

    def pair_minimums(self) -> dict[str, float]:
        return {f"{c}|{s}": float(m.min()) for (c, s), m in self.pair_margins.items()}


@dataclass
class SolveReport:
    u_star: NDArray[np.float64]
    objective: float
    iterations: int
    margins: dict[str, float]
    min_margins: dict[str, float]
    converged: bool
    method: Method
    message: str = ""
    n_evaluations: int = 0
    history: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "u_star": [float(v) for v in self.u_star],
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "margins": self.margins,
            "min_margins": self.min_margins,
            "converged": bool(self.converged),
            "method": self.method.value,
            "message": self.message,
            "n_evaluations": int(self.n_evaluations),
            "history": self.history,
        }


def slice_label(spec: SliceSpec) -> str:
    return AXIS_NAMES[spec.i] + AXIS_NAMES[spec.j]


def margin(point2: ArrayLike, constraint: HalfSpaceConstraint, spec: SliceSpec) -> float:
    """Signed distance of a slice point inside the half-space (>= 0 is feasible)."""
    if constraint.axis not in spec.indices:
        raise ValueError(
            f"constraint axis {AXIS_NAMES[constraint.axis]} is not in slice {slice_label(spec)}"
        )
    p = np.asarray(point2, dtype=float)
    pos = spec.indices.index(constraint.axis)
    return float(constraint.bound - constraint.sign * p[..., pos])


def _margins(points: NDArray[np.float64], constraint: HalfSpaceConstraint, spec: SliceSpec):
    pos = spec.indices.index(constraint.axis)
    return constraint.bound - constraint.sign * points[:, pos]


@lru_cache(maxsize=8)
def _rule(order: int, dim: int):
    return gauss_hermite_rule(order, dim)


def evaluate_constraints(
    u0: ArrayLike,
    scenario: ScenarioConfig,
    method: Method | str,
    *,
    force_gaussian: bool = False,
    n_points: int | None = None,
) -> ConstraintEvaluation:
    """Contour margins of every constraint on every slice containing its axis.

    With ``force_gaussian`` the banana pipeline is fed zero skew and
    Isserlis-consistent kurtosis about the nominal, which must reproduce the
    ellipse margins.
    """
    method = Method(method)
    u0 = np.asarray(u0, dtype=float)
    n_points = n_points or scenario.optimizer.contour_points_per_slice
    ts = contour_parameters(n_points)
    mean0, cov0 = scenario.mean0, scenario.cov0

    try:
        lin = linear_covariance(
            mean0, cov0, u0, scenario.t0, scenario.t1, scenario.mu, scenario.propagation
        )
        if method is Method.BANANA:
            if force_gaussian:
                full = gaussian_moment_set(lin.nominal, lin.cov_lin)
            else:
                full = propagate_moments(
                    mean0,
                    cov0,
                    u0,
                    scenario.t0,
                    scenario.t1,
                    scenario.mu,
                    _rule(scenario.cubature_order, len(mean0)),
                    scenario.propagation,
                )
    except BananaError as exc:
        raise SolveError(f"moment pipeline failed: {exc}", u0) from exc

    slices: list[SliceContour] = []
    pair_margins: dict[tuple[str, str], NDArray[np.float64]] = {}
    constraints = scenario.target_box.constraints
    for spec in scenario.slices:
        label = slice_label(spec)
        idx = list(spec.indices)
        cov2 = lin.cov_lin[np.ix_(idx, idx)]
        try:
            frame = whiten(cov2)
        except ValueError as exc:
            raise SolveError(f"slice {label}: {exc}", u0) from exc
        if method is Method.ELLIPSE:
            sm = SliceMoments(
                mean2=lin.nominal[idx],
                cov2=cov2,
                skew2=np.zeros((2, 2, 2)),
                kurt2=np.zeros((2, 2, 2, 2)),
            )
            alpha = 0.0
        else:
            sm = slice_moments(full, spec)
            try:
                alpha = bend_coefficient(sm, frame, label)
            except BananaError as exc:
                raise SolveError(str(exc), u0) from exc

        contours: dict[float, BananaContour] = {}
        for c in constraints:
            if c.axis not in spec.indices:
                continue
            k = scenario.confidence_scale(c.delta)
            if k not in contours:
                c_k = 0.0 if method is Method.ELLIPSE else cf_shift(sm, frame, k)
                contours[k] = build_contour(sm.mean2, frame, k, alpha, c_k)
            pts = contours[k].evaluate(ts)
            pair_margins[(c.label, label)] = _margins(pts, c, spec)
        slices.append(SliceContour(spec, label, sm, frame, alpha, contours))

    min_margins = np.full(len(constraints), np.inf)
    for ci, c in enumerate(constraints):
        for (cl, _), m in pair_margins.items():
            if cl == c.label:
                min_margins[ci] = min(min_margins[ci], float(m.min()))
    return ConstraintEvaluation(
        u0=u0,
        method=method,
        slices=slices,
        pair_margins=pair_margins,
        min_margins=min_margins,
        constraint_labels=[c.label for c in constraints],
    )


def _central_jacobian(fn: Callable, u: NDArray[np.float64], h: float) -> NDArray[np.float64]:
    cols = []
    for j in range(u.size):
        e = np.zeros_like(u)
        e[j] = h
        cols.append((fn(u + e) - fn(u - e)) / (2.0 * h))
    return np.stack(cols, axis=1)


def solve(
    scenario: ScenarioConfig,
    method: Method | str,
    settings: OptimizerSettings | None = None,
    *,
    force_gaussian: bool = False,
    u_guess: ArrayLike | None = None,
) -> SolveReport:
    """Minimum-norm impulse whose contour points satisfy every constraint.

    The smooth surrogate ``0.5 * |u|^2`` is minimized (same minimizer as
    ``|u|``, differentiable at zero); the reported objective is ``|u|``.
    """
    method = Method(method)
    settings = settings or scenario.optimizer
    if settings != scenario.optimizer:
        scenario = scenario.with_optimizer(settings)
    u_start = np.asarray(scenario.u_guess if u_guess is None else u_guess, dtype=float)

    cache: dict[bytes, NDArray[np.float64]] = {}

    def margins_at(u: NDArray[np.float64]) -> NDArray[np.float64]:
        key = np.asarray(u, dtype=float).tobytes()
        if key not in cache:
            ev = evaluate_constraints(u, scenario, method, force_gaussian=force_gaussian)
            cache[key] = ev.min_margins
        return cache[key]

    history: list[dict] = []

    def record(u: NDArray[np.float64]) -> None:
        m = margins_at(u)
        history.append(
            {
                "u": [float(v) for v in u],
                "objective": float(np.linalg.norm(u)),
                "worst_margin": float(m.min()),
            }
        )
        log.info("iter %d |u|=%.9g worst margin=%.4g", len(history), np.linalg.norm(u), m.min())

    # SLSQP works in mm/s: margin sensitivities are ~1e5 m per m/s, which
    # leaves the unscaled problem badly conditioned against the objective.
    scale = U_SCALE
    h = settings.finite_difference_step

    def con(z):
        return margins_at(z * scale)

    def con_jac(z):
        return _central_jacobian(margins_at, z * scale, h) * scale

    record(u_start)
    result = minimize(
        lambda z: 0.5 * float(z @ z),
        u_start / scale,
        jac=lambda z: np.asarray(z, dtype=float),
        method="SLSQP",
        constraints=[{"type": "ineq", "fun": con, "jac": con_jac}],
        callback=lambda z: record(z * scale),
        options={
            "maxiter": settings.max_iterations,
            "ftol": settings.step_tolerance / scale * max(float(np.linalg.norm(u_start)) / scale, 1.0),
        },
    )
    u_star = np.asarray(result.x, dtype=float) * scale
    final = evaluate_constraints(u_star, scenario, method, force_gaussian=force_gaussian)
    worst = float(final.min_margins.min())
    feasible = worst >= -settings.constraint_tolerance
    converged = bool(result.success) and feasible
    message = str(result.message)
    if not feasible:
        message += f"; infeasible, worst margin {worst:.6g} m"
    return SolveReport(
        u_star=u_star,
        objective=float(np.linalg.norm(u_star)),
        iterations=int(result.nit),
        margins=final.pair_minimums(),
        min_margins=dict(zip(final.constraint_labels, map(float, final.min_margins))),
        converged=converged,
        method=method,
        message=message,
        n_evaluations=len(cache),
        history=history,
    )
