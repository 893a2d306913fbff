"""Central-moment tensors, 2D slicing and whitening frames.

All tensors are stored dense and explicitly symmetrized, which is cheap for
the state dimensions used here (at most 6**4 = 1296 kurtosis entries).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

WEIGHT_SUM_TOL = 1e-12
SPD_REL_TOL = 1e-14


def symmetrize(tensor: ArrayLike) -> NDArray[np.float64]:
    """Average a square tensor over all permutations of its axes.

    Every entry is then copied from its sorted-index representative, so the
    result is exactly (bitwise) permutation invariant.
    """
    t = np.asarray(tensor, dtype=float)
    if t.ndim < 2:
        return t.copy()
    perms = list(itertools.permutations(range(t.ndim)))
    avg = np.zeros_like(t)
    for p in perms:
        avg += np.transpose(t, p)
    avg /= len(perms)
    canon = np.sort(np.indices(t.shape).reshape(t.ndim, -1), axis=0)
    return avg[tuple(canon)].reshape(t.shape)


@dataclass(frozen=True)
class MomentSet:
    """Mean, covariance and third/fourth central moment tensors of a state."""

    mean: NDArray[np.float64]
    cov: NDArray[np.float64]
    skew: NDArray[np.float64]
    kurt: NDArray[np.float64]

    def __post_init__(self) -> None:
        n = np.shape(self.mean)[0]
        for name, ndim in (("cov", 2), ("skew", 3), ("kurt", 4)):
            shape = np.shape(getattr(self, name))
            if shape != (n,) * ndim:
                raise ValueError(f"{name} has shape {shape}, expected {(n,) * ndim}")

    @property
    def dim(self) -> int:
        return int(np.shape(self.mean)[0])


@dataclass(frozen=True)
class SliceSpec:
    """Pair of state indices selecting a two-state marginal."""

    i: int
    j: int

    def __post_init__(self) -> None:
        if self.i == self.j:
            raise ValueError(f"slice indices must differ, got ({self.i}, {self.j})")

    @property
    def indices(self) -> tuple[int, int]:
        return (self.i, self.j)

    def check(self, dim: int) -> None:
        for idx in self.indices:
            if not 0 <= idx < dim:
                raise IndexError(f"slice index {idx} out of range for dimension {dim}")


@dataclass(frozen=True)
class SliceMoments:
    mean2: NDArray[np.float64]
    cov2: NDArray[np.float64]
    skew2: NDArray[np.float64]
    kurt2: NDArray[np.float64]


@dataclass(frozen=True)
class WhitenedFrame:
    """Principal frame of a 2x2 covariance and its whitening map.

    ``W = diag(lambda1, lambda2)**-0.5 @ R.T`` so that ``W @ cov2 @ W.T = I``;
    ``a`` and ``b`` are the rows of ``W`` (``W.T @ e1`` and ``W.T @ e2``).
    """

    lambda1: float
    lambda2: float
    theta: float
    R: NDArray[np.float64]
    W: NDArray[np.float64]
    a: NDArray[np.float64]
    b: NDArray[np.float64]


def moments_from_points(points: ArrayLike, weights: ArrayLike) -> MomentSet:
    """Weighted central moments (orders 1-4) of a point set.

    Args:
        points: ``(N, n)`` array of states.
        weights: ``(N,)`` weights summing to one.

    Raises:
        ValueError: On weight-sum violation, fewer than two points, or
            inconsistent shapes.
    """
    try:
        x = np.asarray(points, dtype=float)
    except ValueError as exc:
        raise ValueError(f"points have inconsistent dimensions: {exc}") from None
    w = np.asarray(weights, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"points must be a 2D array, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 points, got {x.shape[0]}")
    if w.shape != (x.shape[0],):
        raise ValueError(f"weights shape {w.shape} does not match {x.shape[0]} points")
    wsum = math.fsum(w)
    if abs(wsum - 1.0) > WEIGHT_SUM_TOL:
        raise ValueError(f"weights must sum to 1, got {wsum!r}")

    mean = w @ x
    d = x - mean
    wd = w[:, None] * d
    cov = wd.T @ d
    # (N, n, n) outer products reused for both higher tensors
    dd = np.einsum("pi,pj->pij", d, d)
    skew = np.einsum("pi,pjk->ijk", wd, dd)
    wdd = w[:, None, None] * dd
    kurt = np.tensordot(wdd, dd, axes=([0], [0]))
    return MomentSet(
        mean=mean,
        cov=symmetrize(cov),
        skew=symmetrize(skew),
        kurt=symmetrize(kurt),
    )


def slice_moments(ms: MomentSet, spec: SliceSpec) -> SliceMoments:
    """Restrict every tensor of ``ms`` to the indices ``(spec.i, spec.j)``."""
    spec.check(ms.dim)
    idx = list(spec.indices)
    return SliceMoments(
        mean2=ms.mean[idx].copy(),
        cov2=ms.cov[np.ix_(idx, idx)].copy(),
        skew2=ms.skew[np.ix_(idx, idx, idx)].copy(),
        kurt2=ms.kurt[np.ix_(idx, idx, idx, idx)].copy(),
    )


def whiten(cov2: ArrayLike) -> WhitenedFrame:
    """Eigen-frame and whitening map of a 2x2 SPD covariance.

    The major-axis angle is ``0.5 * atan2(2 Sxy, Sxx - Syy)`` in
    (-pi/2, pi/2]; an isotropic input gets ``theta = 0``.
    """
    s = np.asarray(cov2, dtype=float)
    if s.shape != (2, 2):
        raise ValueError(f"expected a 2x2 covariance, got shape {s.shape}")
    if not np.allclose(s, s.T, rtol=1e-12, atol=0.0):
        raise ValueError("covariance is not symmetric")
    sxx, syy = s[0, 0], s[1, 1]
    sxy = 0.5 * (s[0, 1] + s[1, 0])

    if sxy == 0.0 and sxx == syy:
        theta = 0.0
    else:
        theta = 0.5 * math.atan2(2.0 * sxy, sxx - syy)
    c, sn = math.cos(theta), math.sin(theta)
    lam1 = c * c * sxx + 2.0 * c * sn * sxy + sn * sn * syy
    lam2 = sn * sn * sxx - 2.0 * c * sn * sxy + c * c * syy

    floor = SPD_REL_TOL * (sxx + syy)
    if not (lam2 > floor and lam1 > floor):
        raise ValueError(
            f"covariance is not positive definite (eigenvalues {lam1:.3e}, {lam2:.3e})"
        )

    R = np.array([[c, -sn], [sn, c]])
    W = np.diag([lam1**-0.5, lam2**-0.5]) @ R.T
    return WhitenedFrame(
        lambda1=float(lam1),
        lambda2=float(lam2),
        theta=float(theta),
        R=R,
        W=W,
        a=W[0].copy(),
        b=W[1].copy(),
    )


def gaussian_fourth_moment(cov: ArrayLike) -> NDArray[np.float64]:
    """Fourth central moment tensor of a zero-mean Gaussian (Isserlis)."""
    s = np.asarray(cov, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"covariance must be square, got shape {s.shape}")
    return (
        np.einsum("ij,kl->ijkl", s, s)
        + np.einsum("ik,jl->ijkl", s, s)
        + np.einsum("il,jk->ijkl", s, s)
    )


def excess_cumulant(kurt: ArrayLike, cov: ArrayLike) -> NDArray[np.float64]:
    """Fourth-order cumulant: ``kurt`` minus its Gaussian prediction from ``cov``."""
    k = np.asarray(kurt, dtype=float)
    s = np.asarray(cov, dtype=float)
    n = s.shape[0]
    if k.shape != (n,) * 4:
        raise ValueError(f"kurt shape {k.shape} inconsistent with covariance {s.shape}")
    return k - gaussian_fourth_moment(s)


def gaussian_moment_set(mean: ArrayLike, cov: ArrayLike) -> MomentSet:
    """MomentSet of a Gaussian: zero skew, Isserlis fourth moments."""
    m = np.asarray(mean, dtype=float)
    s = np.asarray(cov, dtype=float)
    n = m.shape[0]
    return MomentSet(
        mean=m.copy(),
        cov=s.copy(),
        skew=np.zeros((n, n, n)),
        kurt=gaussian_fourth_moment(s),
    )


def central_moment_standard_errors(
    samples: ArrayLike, spec: SliceSpec
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Standard errors of the sliced third/fourth sample central moments.

    Uses the influence function of each central moment, which includes the
    contribution from estimating the mean. Returns ``(skew_se, kurt_se)``
    shaped ``(2, 2, 2)`` and ``(2, 2, 2, 2)``.
    """
    x = np.asarray(samples, dtype=float)[:, list(spec.indices)]
    n = x.shape[0]
    d = x - x.mean(axis=0)
    cov = d.T @ d / n
    m3 = np.einsum("pi,pj,pk->ijk", d, d, d) / n

    skew_se = np.empty((2, 2, 2))
    for i, j, k in itertools.product(range(2), repeat=3):
        psi = (
            d[:, i] * d[:, j] * d[:, k]
            - cov[j, k] * d[:, i]
            - cov[i, k] * d[:, j]
            - cov[i, j] * d[:, k]
        )
        skew_se[i, j, k] = psi.std() / math.sqrt(n)

    kurt_se = np.empty((2, 2, 2, 2))
    for i, j, k, l in itertools.product(range(2), repeat=4):
        psi = (
            d[:, i] * d[:, j] * d[:, k] * d[:, l]
            - m3[j, k, l] * d[:, i]
            - m3[i, k, l] * d[:, j]
            - m3[i, j, l] * d[:, k]
            - m3[i, j, k] * d[:, l]
        )
        kurt_se[i, j, k, l] = psi.std() / math.sqrt(n)
    return skew_se, kurt_se
