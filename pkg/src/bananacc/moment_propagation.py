"""Pushing an initial Gaussian through impulse + two-body flow.

Three estimates of the target-time statistics are provided:

* ``propagate_moments``: deterministic product Gauss-Hermite cubature,
* ``monte_carlo_moments``: seeded sampling, used as an independent oracle,
* ``linear_covariance``: finite-difference state transition matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.typing import ArrayLike, NDArray

from .dynamics import (
    DEFAULT_SETTINGS,
    STATUS_OK,
    PropagationSettings,
    propagate_many,
    raise_for_status,
    status_text,
)
from .errors import MomentPropagationError
from .tensor_stats import MomentSet, moments_from_points

MAX_CUBATURE_POINTS = 1_000_000
SUPPORTED_ORDERS = (3, 5, 7)

# central-difference steps for the STM columns
FD_STEP_POSITION = 1e-3  # m
FD_STEP_VELOCITY = 1e-7  # m/s


@dataclass(frozen=True)
class CubatureRule:
    """Points and weights integrating against N(0, I)."""

    points: NDArray[np.float64]
    weights: NDArray[np.float64]
    exactness_degree: int

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    def expect(self, fn) -> float:
        """Integrate ``fn`` (vectorized over rows of ``points``) against N(0, I)."""
        return float(self.weights @ fn(self.points))


@dataclass(frozen=True)
class LinearCovariance:
    stm: NDArray[np.float64]
    cov_lin: NDArray[np.float64]
    nominal: NDArray[np.float64]  # impulse-applied nominal propagated to t1


@dataclass(frozen=True)
class MonteCarloMoments:
    moments: MomentSet
    samples: NDArray[np.float64]  # successfully propagated final states
    n_requested: int
    n_excluded: int
    excluded_reasons: dict[str, int]
    seed: int


def gauss_hermite_rule(order: int, dim: int) -> CubatureRule:
    """Tensor-product Gauss-Hermite rule for the standard normal in ``dim`` dims.

    Exact for every monomial whose per-coordinate degree is at most
    ``2 * order - 1``.
    """
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"order must be one of {SUPPORTED_ORDERS}, got {order}")
    if not 1 <= dim <= 6:
        raise ValueError(f"dim must be in 1..6, got {dim}")
    if order**dim > MAX_CUBATURE_POINTS:
        raise ValueError(f"{order}**{dim} points exceeds {MAX_CUBATURE_POINTS}")

    nodes, w = hermegauss(order)
    w = w / w.sum()
    points = np.array(list(itertools.product(nodes, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return CubatureRule(points=points, weights=weights, exactness_degree=2 * order - 1)


def _initial_states(mean0, cov0, u0, z):
    mean0 = np.asarray(mean0, dtype=float)
    L = np.linalg.cholesky(np.asarray(cov0, dtype=float))
    x = mean0 + z @ L.T
    x[:, 3:] += np.asarray(u0, dtype=float)
    return x


def propagate_moments(
    mean0: ArrayLike,
    cov0: ArrayLike,
    u0: ArrayLike,
    t0: float,
    t1: float,
    mu: float,
    rule: CubatureRule,
    settings: PropagationSettings = DEFAULT_SETTINGS,
) -> MomentSet:
    """Cubature estimate of the first four moments at ``t1``.

    Raises:
        MomentPropagationError: If any cubature point fails to propagate.
        numpy.linalg.LinAlgError: If ``cov0`` is not positive definite.
    """
    x0 = _initial_states(mean0, cov0, u0, rule.points)
    x1, status = propagate_many(x0, t0, t1, mu, settings)
    bad = np.flatnonzero(status != STATUS_OK)
    if bad.size:
        idx = int(bad[0])
        raise MomentPropagationError(idx, status_text(int(status[idx])))
    return moments_from_points(x1, rule.weights)


def monte_carlo_moments(
    mean0: ArrayLike,
    cov0: ArrayLike,
    u0: ArrayLike,
    t0: float,
    t1: float,
    mu: float,
    n_samples: int,
    seed: int,
    settings: PropagationSettings = DEFAULT_SETTINGS,
) -> MonteCarloMoments:
    """Seeded Monte Carlo estimate of the moments at ``t1``.

    Samples that fail to propagate are excluded and counted.
    """
    if n_samples < 100:
        raise ValueError(f"n_samples must be at least 100, got {n_samples}")
    dim = np.asarray(mean0).shape[0]
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_samples, dim))
    x0 = _initial_states(mean0, cov0, u0, z)
    x1, status = propagate_many(x0, t0, t1, mu, settings)
    ok = status == STATUS_OK
    reasons: dict[str, int] = {}
    for code in np.unique(status[~ok]):
        reasons[status_text(int(code))] = int(np.count_nonzero(status == code))
    good = x1[ok]
    n_ok = good.shape[0]
    if n_ok < 2:
        raise MomentPropagationError(-1, "fewer than two Monte Carlo samples survived")
    moments = moments_from_points(good, np.full(n_ok, 1.0 / n_ok))
    return MonteCarloMoments(
        moments=moments,
        samples=good,
        n_requested=n_samples,
        n_excluded=n_samples - n_ok,
        excluded_reasons=reasons,
        seed=seed,
    )


def linear_covariance(
    mean0: ArrayLike,
    cov0: ArrayLike,
    u0: ArrayLike,
    t0: float,
    t1: float,
    mu: float,
    settings: PropagationSettings = DEFAULT_SETTINGS,
) -> LinearCovariance:
    """Linearly predicted covariance from a central-difference STM."""
    mean0 = np.asarray(mean0, dtype=float)
    cov0 = np.asarray(cov0, dtype=float)
    nominal0 = mean0.copy()
    nominal0[3:] += np.asarray(u0, dtype=float)
    n = nominal0.shape[0]
    steps = np.array([FD_STEP_POSITION] * 3 + [FD_STEP_VELOCITY] * 3)

    batch = np.empty((2 * n + 1, n))
    batch[0] = nominal0
    for j in range(n):
        batch[1 + 2 * j] = nominal0
        batch[1 + 2 * j, j] += steps[j]
        batch[2 + 2 * j] = nominal0
        batch[2 + 2 * j, j] -= steps[j]
    out, status = propagate_many(batch, t0, t1, mu, settings)
    for row, code in enumerate(status):
        raise_for_status(int(code), f"linear covariance, perturbed nominal {row}")

    stm = np.empty((n, n))
    for j in range(n):
        stm[:, j] = (out[1 + 2 * j] - out[2 + 2 * j]) / (2.0 * steps[j])
    if t1 == t0:
        stm = np.eye(n)
    cov_lin = stm @ cov0 @ stm.T
    return LinearCovariance(stm=stm, cov_lin=0.5 * (cov_lin + cov_lin.T), nominal=out[0])
