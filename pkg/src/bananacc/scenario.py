"""Scenario configuration: loading, validation and serialization.

Scenarios are YAML documents. Vector quantities are stored as tuples so
configs compare by value and survive a dump/load round trip unchanged.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .chance_opt import AXIS_NAMES, OptimizerSettings, TargetBox, box_constraints
from .contour import ConfidenceMode, ConfidenceSpec, confidence_scale
from .dynamics import PropagationSettings, apply_impulse, orbit_period
from .errors import ScenarioError
from .moment_propagation import SUPPORTED_ORDERS
from .tensor_stats import SliceSpec

DEFAULT_SLICES = (SliceSpec(0, 1), SliceSpec(0, 2), SliceSpec(1, 2))


@dataclass(frozen=True)
class MonteCarloSettings:
    n_samples: int = 5000
    seed: int = 20240917


@dataclass(frozen=True)
class ScenarioConfig:
    mu: float
    x0_nominal: tuple[float, ...]
    sigma0: tuple[float, ...]
    epsilon_velocity_sigma: float
    t0: float
    t1: float
    target_box: TargetBox
    u_guess: tuple[float, ...]
    confidence_mode: ConfidenceMode = ConfidenceMode.ONE_DIM
    one_sided: bool = True
    cubature_order: int = 5
    slices: tuple[SliceSpec, ...] = DEFAULT_SLICES
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    propagation: PropagationSettings = field(default_factory=PropagationSettings)
    monte_carlo: MonteCarloSettings = field(default_factory=MonteCarloSettings)
    t1_revolutions: float | None = None
    name: str = "scenario"

    @property
    def mean0(self) -> np.ndarray:
        return np.array(self.x0_nominal, dtype=float)

    @property
    def cov0(self) -> np.ndarray:
        return np.diag(np.square(self.sigma0))

    def confidence_spec(self, delta: float) -> ConfidenceSpec:
        return ConfidenceSpec(1.0 - delta, self.confidence_mode, self.one_sided)

    def confidence_scale(self, delta: float) -> float:
        return confidence_scale(self.confidence_spec(delta))

    def replace(self, **changes: Any) -> ScenarioConfig:
        return dataclasses.replace(self, **changes)

    def with_optimizer(self, settings: OptimizerSettings) -> ScenarioConfig:
        return dataclasses.replace(self, optimizer=settings)

    def with_box(self, lower, upper) -> ScenarioConfig:
        deltas = [c.delta for c in self.target_box.constraints]
        return dataclasses.replace(self, target_box=box_constraints(lower, upper, deltas))


def revolutions_to_seconds(x0, u, mu: float, revolutions: float) -> float:
    """Duration of ``revolutions`` periods of the orbit after the impulse."""
    return revolutions * orbit_period(apply_impulse(x0, u), mu)


def _slice_from(raw: Any) -> SliceSpec:
    if isinstance(raw, str):
        return SliceSpec(AXIS_NAMES.index(raw[0]), AXIS_NAMES.index(raw[1]))
    i, j = raw
    return SliceSpec(int(i), int(j))


def _slice_to(spec: SliceSpec) -> str:
    return AXIS_NAMES[spec.i] + AXIS_NAMES[spec.j]


def _settings_from(cls, raw: Any, name: str, problems: list[str]):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        problems.append(f"{name}: expected a mapping")
        return cls()
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        problems.append(f"{name}: unknown keys {unknown}")
    try:
        return cls(**{k: v for k, v in raw.items() if k in known})
    except (TypeError, ValueError) as exc:
        problems.append(f"{name}: {exc}")
        return cls()


def _vector(raw: Any, name: str, size: int, problems: list[str], subs=None):
    if raw is None:
        problems.append(f"{name}: missing required field")
        return None
    if not isinstance(raw, (list, tuple)) or len(raw) != size:
        problems.append(f"{name}: expected a list of {size} numbers")
        return None
    out = []
    for k, v in enumerate(raw):
        if subs and isinstance(v, str) and v in subs:
            v = subs[v]
        try:
            f = float(v)
        except (TypeError, ValueError):
            problems.append(f"{name}[{k}]: not a number ({v!r})")
            return None
        if not math.isfinite(f):
            problems.append(f"{name}[{k}]: not finite")
            return None
        out.append(f)
    return tuple(out)


def _number(raw: Any, name: str, problems: list[str], default=None):
    if raw is None:
        if default is None:
            problems.append(f"{name}: missing required field")
        return default
    try:
        return float(raw)
    except (TypeError, ValueError):
        problems.append(f"{name}: not a number ({raw!r})")
        return default


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    """Validate a parsed scenario document, collecting every problem."""
    if not isinstance(doc, dict):
        raise ScenarioError("top level must be a mapping")
    problems: list[str] = []
    known = {
        "name", "mu", "x0_nominal", "sigma0", "epsilon_velocity_sigma", "t0", "t1",
        "t1_revolutions", "target_box", "risk_delta", "confidence", "u_guess",
        "cubature_order", "slices", "optimizer", "propagation", "monte_carlo",
    }
    unknown = sorted(set(doc) - known)
    if unknown:
        problems.append(f"unknown top-level keys {unknown}")

    mu = _number(doc.get("mu"), "mu", problems)
    if mu is not None and mu < 0:
        problems.append("mu: must be non-negative")
    eps = _number(doc.get("epsilon_velocity_sigma"), "epsilon_velocity_sigma", problems, 7e-5)
    x0 = _vector(doc.get("x0_nominal"), "x0_nominal", 6, problems)
    sigma0 = _vector(doc.get("sigma0"), "sigma0", 6, problems, subs={"epsilon": eps})
    if sigma0 is not None and any(s <= 0 for s in sigma0):
        problems.append("sigma0: all entries must be positive")
    u_guess = _vector(doc.get("u_guess", [0.0, 0.0, 0.0]), "u_guess", 3, problems)
    t0 = _number(doc.get("t0"), "t0", problems, 0.0)

    raw_t1 = doc.get("t1")
    t1 = None
    revolutions = doc.get("t1_revolutions")
    if isinstance(raw_t1, dict):
        if set(raw_t1) != {"revolutions"}:
            problems.append("t1: mapping form must be {revolutions: <number>}")
        else:
            revolutions = _number(raw_t1["revolutions"], "t1.revolutions", problems)
            if None not in (revolutions, x0, u_guess, mu, t0):
                try:
                    t1 = t0 + revolutions_to_seconds(x0, u_guess, mu, revolutions)
                except ValueError as exc:
                    problems.append(f"t1: cannot resolve revolutions: {exc}")
    else:
        t1 = _number(raw_t1, "t1", problems)
    if t1 is not None and t0 is not None and not t1 > t0:
        problems.append(f"t1: must be after t0 (t0={t0}, t1={t1})")

    box = doc.get("target_box")
    target_box = None
    deltas = doc.get("risk_delta", 0.01)
    if not isinstance(box, dict) or set(box) != {"x", "y", "z"}:
        problems.append("target_box: expected a mapping with x, y, z bounds")
    else:
        try:
            lower = [float(box[a][0]) for a in "xyz"]
            upper = [float(box[a][1]) for a in "xyz"]
            target_box = box_constraints(lower, upper, deltas)
        except (TypeError, ValueError, IndexError, KeyError) as exc:
            problems.append(f"target_box / risk_delta: {exc}")

    conf = doc.get("confidence") or {}
    try:
        mode = ConfidenceMode(conf.get("mode", ConfidenceMode.ONE_DIM.value))
    except ValueError:
        problems.append(f"confidence.mode: unknown mode {conf.get('mode')!r}")
        mode = ConfidenceMode.ONE_DIM
    one_sided = bool(conf.get("one_sided", True))

    order = doc.get("cubature_order", 5)
    if order not in SUPPORTED_ORDERS:
        problems.append(f"cubature_order: must be one of {SUPPORTED_ORDERS}")

    try:
        slices = tuple(_slice_from(s) for s in doc.get("slices", [_slice_to(s) for s in DEFAULT_SLICES]))
        for s in slices:
            s.check(6)
    except (ValueError, TypeError, IndexError) as exc:
        problems.append(f"slices: {exc}")
        slices = DEFAULT_SLICES

    optimizer = _settings_from(OptimizerSettings, doc.get("optimizer"), "optimizer", problems)
    propagation = _settings_from(PropagationSettings, doc.get("propagation"), "propagation", problems)
    mc = _settings_from(MonteCarloSettings, doc.get("monte_carlo"), "monte_carlo", problems)

    if problems:
        raise ScenarioError(problems)
    return ScenarioConfig(
        mu=mu,
        x0_nominal=x0,
        sigma0=sigma0,
        epsilon_velocity_sigma=eps,
        t0=t0,
        t1=t1,
        target_box=target_box,
        u_guess=u_guess,
        confidence_mode=mode,
        one_sided=one_sided,
        cubature_order=int(order),
        slices=slices,
        optimizer=optimizer,
        propagation=propagation,
        monte_carlo=mc,
        t1_revolutions=None if revolutions is None else float(revolutions),
        name=str(doc.get("name", "scenario")),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read and validate a YAML scenario file.

    Raises:
        ScenarioError: On YAML syntax errors (with line/column) or on any
            invariant violation; all violations are listed together.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioError(f"{path}: YAML parse error{where}: {exc}") from exc
    return scenario_from_dict(doc)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    box = cfg.target_box
    doc = {
        "name": cfg.name,
        "mu": cfg.mu,
        "x0_nominal": list(cfg.x0_nominal),
        "epsilon_velocity_sigma": cfg.epsilon_velocity_sigma,
        "sigma0": list(cfg.sigma0),
        "t0": cfg.t0,
        "t1": cfg.t1,
        "target_box": {a: [box.lower[i], box.upper[i]] for i, a in enumerate("xyz")},
        "risk_delta": [c.delta for c in box.constraints],
        "confidence": {"mode": cfg.confidence_mode.value, "one_sided": cfg.one_sided},
        "u_guess": list(cfg.u_guess),
        "cubature_order": cfg.cubature_order,
        "slices": [_slice_to(s) for s in cfg.slices],
        "optimizer": dataclasses.asdict(cfg.optimizer),
        "propagation": dataclasses.asdict(cfg.propagation),
        "monte_carlo": dataclasses.asdict(cfg.monte_carlo),
    }
    if cfg.t1_revolutions is not None:
        doc["t1_revolutions"] = cfg.t1_revolutions
    return doc


def save_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(cfg), sort_keys=False))
