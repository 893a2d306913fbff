"""Gaussian confidence ellipses and moment-corrected banana contours.

In normalized principal coordinates the Gaussian boundary is
``(u_hat, v_hat) = (k cos t, k sin t)``. Two first-order corrections are
added from the sliced skew and kurtosis tensors:

* a quadratic bend of the short axis, ``v_hat += alpha (u_hat**2 - 1)``,
  with ``alpha`` the least-squares coefficient of ``v_hat`` on ``u_hat**2``;
* a long-axis Cornish-Fisher shift, ``u_hat += c(k) cos(t)**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.stats import norm

from .errors import ContourError
from .tensor_stats import SliceMoments, WhitenedFrame

DENOMINATOR_GUARD = 1e-8


class ConfidenceMode(str, Enum):
    TWO_DIM = "two-dim-mahalanobis"
    ONE_DIM = "one-dim-quantile"


@dataclass(frozen=True)
class ConfidenceSpec:
    """Confidence level and the convention mapping it to a scaling ``k``.

    ``one_sided`` only matters in one-dim mode: ``k = Phi^-1(P)`` when set,
    ``Phi^-1((1 + P) / 2)`` otherwise.
    """

    level: float
    mode: ConfidenceMode = ConfidenceMode.TWO_DIM
    one_sided: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ConfidenceMode(self.mode))
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"confidence level must lie in (0, 1), got {self.level}")


def confidence_scale(spec: ConfidenceSpec) -> float:
    if spec.mode is ConfidenceMode.TWO_DIM:
        # chi-square(2) quantile: P = 1 - exp(-k^2 / 2)
        return math.sqrt(-2.0 * math.log1p(-spec.level))
    p = spec.level if spec.one_sided else 0.5 * (1.0 + spec.level)
    k = float(norm.ppf(p))
    if not k > 0.0:
        raise ValueError(f"confidence level {spec.level} gives non-positive k = {k}")
    return k


@dataclass(frozen=True)
class GaussianEllipse:
    mean2: NDArray[np.float64]
    frame: WhitenedFrame
    k: float

    @property
    def semi_major(self) -> float:
        return self.k * math.sqrt(self.frame.lambda1)

    @property
    def semi_minor(self) -> float:
        return self.k * math.sqrt(self.frame.lambda2)


@dataclass(frozen=True)
class BananaContour:
    """Closed 2D boundary ``r(t) = mean2 + R @ (u(t), v(t))``, 2*pi-periodic."""

    ellipse: GaussianEllipse
    alpha: float
    c_k: float

    def long_axis_shift(self, t: ArrayLike) -> NDArray[np.float64]:
        """Normalized long-axis correction ``c(k) cos^2 t``."""
        c = np.cos(np.asarray(t, dtype=float))
        return self.c_k * c * c

    def principal(self, t: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """``(u(t), v(t))`` in unnormalized principal coordinates."""
        t = np.asarray(t, dtype=float)
        e = self.ellipse
        s1 = math.sqrt(e.frame.lambda1)
        s2 = math.sqrt(e.frame.lambda2)
        c2 = np.cos(t) ** 2
        u = e.semi_major * np.cos(t) + self.c_k * s1 * c2
        v = e.semi_minor * np.sin(t) + self.alpha * s2 * (e.k**2 * c2 - 1.0)
        return u, v

    def evaluate(self, t: ArrayLike) -> NDArray[np.float64]:
        """Boundary points; shape ``(2,)`` for scalar ``t``, else ``(len(t), 2)``."""
        u, v = self.principal(t)
        uv = np.stack([u, v], axis=-1)
        return self.ellipse.mean2 + uv @ self.ellipse.frame.R.T


def _whitened_skew_terms(sm: SliceMoments, frame: WhitenedFrame) -> tuple[float, float]:
    a, b = frame.a, frame.b
    uuu = float(np.einsum("i,j,k,ijk->", a, a, a, sm.skew2))
    vuu = float(np.einsum("i,j,k,ijk->", b, a, a, sm.skew2))
    return uuu, vuu


def bend_coefficient(sm: SliceMoments, frame: WhitenedFrame, label: str = "") -> float:
    """Least-squares bend ``alpha`` of ``v_hat`` on ``u_hat**2`` (``beta = -alpha``).

    ``frame`` must whiten the covariance the coefficients are defined
    against; the pipeline passes the linearly predicted slice covariance.

    Raises:
        ContourError: If the whitened ``E[u^4] - 1`` is within
            ``DENOMINATOR_GUARD`` of zero.
    """
    _, numerator = _whitened_skew_terms(sm, frame)
    a = frame.a
    denominator = float(np.einsum("i,j,k,l,ijkl->", a, a, a, a, sm.kurt2)) - 1.0
    if abs(denominator) <= DENOMINATOR_GUARD:
        where = f" for slice {label}" if label else ""
        raise ContourError(
            f"bend coefficient denominator {denominator:.3e} is degenerate{where}"
        )
    return numerator / denominator


def cf_shift(sm: SliceMoments, frame: WhitenedFrame, k: float) -> float:
    """Cornish-Fisher long-axis shift ``c(k) = (k^2 - 1)/6 * E[u_hat^3]``."""
    gamma1, _ = _whitened_skew_terms(sm, frame)
    return (k * k - 1.0) / 6.0 * gamma1


def build_contour(
    mean2: ArrayLike, frame: WhitenedFrame, k: float, alpha: float = 0.0, c_k: float = 0.0
) -> BananaContour:
    if not k > 0.0:
        raise ValueError(f"confidence scaling must be positive, got {k}")
    ellipse = GaussianEllipse(mean2=np.asarray(mean2, dtype=float), frame=frame, k=float(k))
    return BananaContour(ellipse=ellipse, alpha=float(alpha), c_k=float(c_k))


def contour_parameters(n_points: int) -> NDArray[np.float64]:
    if n_points < 4:
        raise ValueError(f"need at least 4 contour points, got {n_points}")
    return 2.0 * np.pi * np.arange(n_points) / n_points


def sample_contour(contour: BananaContour, n_points: int) -> NDArray[np.float64]:
    """Evaluate the contour at ``t_m = 2 pi m / n_points``; shape ``(n_points, 2)``."""
    return contour.evaluate(contour_parameters(n_points))
