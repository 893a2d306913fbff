"""Two-body point-mass dynamics and the impulsive discrete flow.

States are 6-vectors ``[x, y, z, vx, vy, vz]`` in raw SI units. The flow map
is integrated with an adaptive Dormand-Prince 5(4) scheme compiled with
numba; every state in a batch gets its own step-size sequence, so batch
results are identical to one-at-a-time propagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import CollisionError, PropagationError, StepUnderflowError

R_MIN = 1.0  # collision guard radius [m]

STATUS_OK = 0
STATUS_COLLISION = 1
STATUS_UNDERFLOW = 2
STATUS_MAX_STEPS = 3

_STATUS_TEXT = {
    STATUS_COLLISION: f"radius fell below collision guard r_min = {R_MIN} m",
    STATUS_UNDERFLOW: "step size underflow",
    STATUS_MAX_STEPS: "maximum step count exceeded",
}

# Dormand-Prince 5(4) tableau (FSAL)
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
# difference between 5th- and embedded 4th-order weights
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


@dataclass(frozen=True)
class PropagationSettings:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-12
    max_step: float = 3600.0
    initial_step: float = 10.0
    max_steps: int = 1_000_000

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "max_step", "initial_step", "max_steps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


DEFAULT_SETTINGS = PropagationSettings()


@numba.njit(cache=True)
def _accel_into(x, mu, out):
    r = math.sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
    c = -mu / (r * r * r)
    out[0] = x[3]
    out[1] = x[4]
    out[2] = x[5]
    out[3] = c * x[0]
    out[4] = c * x[1]
    out[5] = c * x[2]
    return r


@numba.njit(cache=True)
def _dopri_one(x0, t0, t1, mu, rtol, atol, h0, hmax, rmin, max_steps, A, E, out):
    span = t1 - t0
    direction = 1.0 if span >= 0.0 else -1.0
    total = abs(span)
    x = x0.copy()
    K = np.zeros((7, 6))
    xs = np.zeros(6)
    if total == 0.0:
        out[:] = x
        return 0
    if _accel_into(x, mu, K[0]) < rmin:
        out[:] = x
        return 1

    done = 0.0
    h = min(h0, hmax, total)
    nsteps = 0
    while done < total:
        if nsteps >= max_steps:
            out[:] = x
            return 3
        last = False
        if h >= total - done:
            h = total - done
            last = True
        if h <= 4.0 * 2.220446049250313e-16 * max(abs(t0) + done, 1.0):
            out[:] = x
            return 2
        hs = direction * h
        for s in range(1, 7):
            for i in range(6):
                acc = 0.0
                for j in range(s):
                    acc += A[s, j] * K[j, i]
                xs[i] = x[i] + hs * acc
            if _accel_into(xs, mu, K[s]) < rmin:
                out[:] = xs
                return 1
        err = 0.0
        for i in range(6):
            e = 0.0
            for j in range(7):
                e += E[j] * K[j, i]
            e *= hs
            scale = atol + rtol * max(abs(x[i]), abs(xs[i]))
            err += (e / scale) ** 2
        err = math.sqrt(err / 6.0)
        nsteps += 1
        if err <= 1.0:
            done = total if last else done + h
            for i in range(6):
                x[i] = xs[i]
                K[0, i] = K[6, i]
            if err == 0.0:
                fac = 5.0
            else:
                fac = min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = min(h * fac, hmax)
        else:
            h *= max(0.2, 0.9 * err ** -0.2)
    out[:] = x
    return 0


@numba.njit(cache=True)
def _dopri_batch(X0, t0, t1, mu, rtol, atol, h0, hmax, rmin, max_steps, A, E):
    n = X0.shape[0]
    out = np.empty_like(X0)
    status = np.zeros(n, dtype=np.int64)
    row = np.empty(6)
    for p in range(n):
        status[p] = _dopri_one(
            X0[p], t0, t1, mu, rtol, atol, h0, hmax, rmin, max_steps, A, E, row
        )
        out[p, :] = row
    return out, status


def _as_state(x: ArrayLike) -> NDArray[np.float64]:
    s = np.asarray(x, dtype=float)
    if s.shape != (6,):
        raise ValueError(f"state must be a 6-vector, got shape {s.shape}")
    return s


def two_body_derivative(x: ArrayLike, mu: float) -> NDArray[np.float64]:
    """Time derivative of a two-body state."""
    s = _as_state(x)
    r = float(np.linalg.norm(s[:3]))
    if r == 0.0:
        raise CollisionError("two-body acceleration is singular at zero radius")
    return np.concatenate([s[3:], -mu * s[:3] / r**3])


def propagate_many(
    states: ArrayLike,
    t0: float,
    t1: float,
    mu: float,
    settings: PropagationSettings = DEFAULT_SETTINGS,
) -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    """Propagate a batch of states; failures are flagged, not raised.

    Returns ``(final_states, status)`` where ``status`` is ``STATUS_OK`` or
    one of the failure codes per row.
    """
    X = np.ascontiguousarray(states, dtype=float)
    if X.ndim != 2 or X.shape[1] != 6:
        raise ValueError(f"states must have shape (N, 6), got {X.shape}")
    return _dopri_batch(
        X,
        float(t0),
        float(t1),
        float(mu),
        settings.rel_tol,
        settings.abs_tol,
        settings.initial_step,
        settings.max_step,
        R_MIN,
        settings.max_steps,
        _A,
        _E,
    )


def raise_for_status(code: int, context: str = "") -> None:
    if code == STATUS_OK:
        return
    msg = _STATUS_TEXT.get(int(code), f"status {code}")
    if context:
        msg = f"{context}: {msg}"
    if code == STATUS_COLLISION:
        raise CollisionError(msg)
    if code == STATUS_UNDERFLOW:
        raise StepUnderflowError(msg)
    raise PropagationError(msg)


def status_text(code: int) -> str:
    return "ok" if code == STATUS_OK else _STATUS_TEXT.get(int(code), f"status {code}")


def propagate(
    x0: ArrayLike,
    t0: float,
    t1: float,
    mu: float,
    settings: PropagationSettings = DEFAULT_SETTINGS,
) -> NDArray[np.float64]:
    """Flow map from ``t0`` to ``t1`` (backward propagation allowed).

    Raises:
        CollisionError: If the radius drops below ``R_MIN``.
        StepUnderflowError: If the adaptive step collapses.
    """
    s = _as_state(x0)
    if t1 == t0:
        return s.copy()
    out, status = propagate_many(s[None, :], t0, t1, mu, settings)
    raise_for_status(int(status[0]))
    return out[0]


def propagate_trajectory(
    x0: ArrayLike,
    t0: float,
    t1: float,
    mu: float,
    n_nodes: int = 200,
    settings: PropagationSettings = DEFAULT_SETTINGS,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """States at ``n_nodes`` evenly spaced times in ``[t0, t1]``."""
    if n_nodes < 2:
        raise ValueError("n_nodes must be at least 2")
    times = np.linspace(t0, t1, n_nodes)
    states = np.empty((n_nodes, 6))
    states[0] = _as_state(x0)
    for m in range(1, n_nodes):
        states[m] = propagate(states[m - 1], times[m - 1], times[m], mu, settings)
    return times, states


def apply_impulse(x: ArrayLike, u: ArrayLike) -> NDArray[np.float64]:
    """Add an impulsive velocity change; position is untouched."""
    s = _as_state(x)
    dv = np.asarray(u, dtype=float)
    if dv.shape != (3,):
        raise ValueError(f"impulse must be a 3-vector, got shape {dv.shape}")
    if not np.all(np.isfinite(dv)):
        raise ValueError("impulse has non-finite entries")
    out = s.copy()
    out[3:] += dv
    return out


def specific_energy(x: ArrayLike, mu: float) -> float:
    s = _as_state(x)
    r = float(np.linalg.norm(s[:3]))
    if r == 0.0:
        raise CollisionError("specific energy is singular at zero radius")
    return 0.5 * float(s[3:] @ s[3:]) - mu / r


def angular_momentum(x: ArrayLike) -> NDArray[np.float64]:
    s = _as_state(x)
    return np.cross(s[:3], s[3:])


def orbit_period(x: ArrayLike, mu: float) -> float:
    """Keplerian period of the osculating orbit through ``x``."""
    energy = specific_energy(x, mu)
    if energy >= 0.0:
        raise ValueError("state is not on a bound orbit")
    sma = -mu / (2.0 * energy)
    return 2.0 * math.pi * math.sqrt(sma**3 / mu)
