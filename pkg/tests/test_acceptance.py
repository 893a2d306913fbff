"""Acceptance criteria 1-8, one recorded PASS/FAIL line each.

Criteria 6-8 run the shipped asteroid scenario end to end and are marked
``slow``; ``pytest -m "not slow"`` skips them.
"""

import itertools
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bananacc.chance_opt import Method, evaluate_constraints
from bananacc.contour import (
    ConfidenceMode,
    bend_coefficient,
    build_contour,
    cf_shift,
    sample_contour,
)
from bananacc.dynamics import angular_momentum, propagate, specific_energy
from bananacc.harness import cmd_optimize, cmd_validate
from bananacc.moment_propagation import (
    gauss_hermite_rule,
    linear_covariance,
    monte_carlo_moments,
    propagate_moments,
)
from bananacc.scenario import load_scenario
from bananacc.tensor_stats import (
    SliceMoments,
    central_moment_standard_errors,
    excess_cumulant,
    gaussian_fourth_moment,
    gaussian_moment_set,
    moments_from_points,
    slice_moments,
    whiten,
)
from conftest import record_acceptance

SCENARIO = Path(__file__).resolve().parents[1] / "scenarios" / "asteroid_recon.yaml"


def check(criterion: str, passed: bool, detail: str = "") -> None:
    record_acceptance(criterion, bool(passed), detail)
    assert passed, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def scenario():
    return load_scenario(SCENARIO)


# -- 1 ---------------------------------------------------------------------


def _isserlis_by_pairings(cov):
    n = cov.shape[0]
    out = np.empty((n,) * 4)
    for i, j, k, l in itertools.product(range(n), repeat=4):
        out[i, j, k, l] = cov[i, j] * cov[k, l] + cov[i, k] * cov[j, l] + cov[i, l] * cov[j, k]
    return out


_worst_1 = {"isserlis": 0.0, "cumulant": 0.0}


@settings(max_examples=100, deadline=None, derandomize=True)
@given(seed=st.integers(0, 2**32 - 1), log_scale=st.floats(-3, 3))
def _random_spd_identities(seed, log_scale):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6))
    cov = (a @ a.T + 0.05 * np.eye(6)) * 10.0**log_scale
    g = gaussian_fourth_moment(cov)
    ref = _isserlis_by_pairings(cov)
    scale = np.abs(ref).max()
    _worst_1["isserlis"] = max(_worst_1["isserlis"], np.abs(g - ref).max() / scale)
    _worst_1["cumulant"] = max(_worst_1["cumulant"], np.abs(excess_cumulant(g, cov)).max() / scale)


def test_criterion_1_moment_identities():
    _random_spd_identities()
    # free drift (mu = 0) is an affine flow, so the pushforward stays Gaussian
    rng = np.random.default_rng(1)
    rule = gauss_hermite_rule(3, 6)
    worst_skew = 0.0
    for _ in range(5):
        a = np.diag([1, 1, 1, 1e-2, 1e-2, 1e-2]) @ rng.normal(size=(6, 6))
        cov0 = a @ a.T + 1e-6 * np.eye(6)
        mean0 = rng.normal(size=6) * [100, 100, 100, 0.1, 0.1, 0.1]
        ms = propagate_moments(mean0, cov0, rng.normal(size=3) * 0.01, 0.0, 500.0, 0.0, rule)
        worst_skew = max(worst_skew, np.abs(ms.skew).max())
    ok = _worst_1["isserlis"] <= 1e-15 and _worst_1["cumulant"] <= 1e-12 and worst_skew <= 1e-9
    check(
        "1 moment identities",
        ok,
        f"isserlis rel err {_worst_1['isserlis']:.1e}, cumulant rel {_worst_1['cumulant']:.1e}, "
        f"affine skew {worst_skew:.1e}",
    )


# -- 2 ---------------------------------------------------------------------


def test_criterion_2_contour_degeneracy(scenario):
    lin = linear_covariance(
        scenario.mean0, scenario.cov0, scenario.u_guess, scenario.t0, scenario.t1, scenario.mu
    )
    full = gaussian_moment_set(lin.nominal, lin.cov_lin)
    k = scenario.confidence_scale(0.01)
    worst, exact = 0.0, True
    for spec in scenario.slices:
        sm = slice_moments(full, spec)
        frame = whiten(sm.cov2)
        alpha, c_k = bend_coefficient(sm, frame), cf_shift(sm, frame, k)
        exact &= alpha == 0.0 and c_k == 0.0
        banana = sample_contour(build_contour(sm.mean2, frame, k, alpha, c_k), 256)
        ellipse = sample_contour(build_contour(sm.mean2, frame, k), 256)
        worst = max(worst, np.abs(banana - ellipse).max())
    check("2 contour degeneracy", exact and worst <= 1e-10, f"max pointwise gap {worst:.1e} m, alpha=c=0 exact: {exact}")


# -- 3 ---------------------------------------------------------------------


def test_criterion_3_alpha_recovery():
    gamma, sigma, n = 0.1, 0.05, 1_000_000
    rng = np.random.default_rng(3)
    x = rng.standard_normal(n)
    pts = np.column_stack([x, gamma * x**2 + sigma * rng.standard_normal(n)])

    # brute force: whiten the samples, regress v on u^2 with an intercept
    d = pts - pts.mean(axis=0)
    f = whiten(np.cov(d, rowvar=False, bias=True))
    uv = d @ f.W.T
    design = np.column_stack([np.ones(n), uv[:, 0] ** 2])
    (_, alpha_ls), *_ = np.linalg.lstsq(design, uv[:, 1], rcond=None)

    ms = moments_from_points(pts, np.full(n, 1.0 / n))
    sm = SliceMoments(ms.mean, ms.cov, ms.skew, ms.kurt)
    alpha_sample = bend_coefficient(sm, whiten(sm.cov2))

    g, s2 = gamma, sigma**2
    skew = np.zeros((2, 2, 2))
    for idx in set(itertools.permutations((0, 0, 1))):
        skew[idx] = 2 * g
    skew[1, 1, 1] = 8 * g**3
    kurt = np.zeros((2, 2, 2, 2))
    kurt[0, 0, 0, 0] = 3.0
    for idx in set(itertools.permutations((0, 0, 1, 1))):
        kurt[idx] = 10 * g * g + s2
    kurt[1, 1, 1, 1] = 60 * g**4 + 12 * g * g * s2 + 3 * s2 * s2
    cov = np.diag([1.0, 2 * g * g + s2])
    exact = SliceMoments(np.array([0.0, g]), cov, skew, kurt)
    alpha_exact = bend_coefficient(exact, whiten(cov))

    err = max(abs(alpha_exact - alpha_ls), abs(alpha_sample - alpha_ls))
    check(
        "3 alpha recovery",
        err < 1e-2,
        f"alpha analytic {alpha_exact:.4f}, sampled {alpha_sample:.4f}, regression {alpha_ls:.4f}",
    )


# -- 4 ---------------------------------------------------------------------


def test_criterion_4_endpoint_conditions():
    c_k = 0.83
    contour = build_contour([0.0, 0.0], whiten([[9.0, 2.0], [2.0, 3.0]]), 3.0, 0.4, c_k)
    h = 1e-6
    errs = []
    for t, target in ((0.0, c_k), (math.pi, c_k), (math.pi / 2, 0.0), (3 * math.pi / 2, 0.0)):
        errs.append(abs(contour.long_axis_shift(t) - target))
        errs.append(abs((contour.long_axis_shift(t + h) - contour.long_axis_shift(t - h)) / (2 * h)))
    check("4 endpoint conditions", max(errs) < 1e-8, f"max error {max(errs):.1e}")


# -- 5 ---------------------------------------------------------------------


def test_criterion_5_dynamics_fidelity():
    mu, r = 5.2, 1000.0
    x0 = np.array([-r, 0.0, 0.0, 0.0, 0.0, -math.sqrt(mu / r)])
    period = 2 * math.pi * math.sqrt(r**3 / mu)
    closure = float(np.linalg.norm(propagate(x0, 0.0, period, mu)[:3] - x0[:3]))
    x1 = propagate(x0, 0.0, 1.5 * period, mu)
    e0 = specific_energy(x0, mu)
    de = abs(specific_energy(x1, mu) - e0) / abs(e0)
    h0 = angular_momentum(x0)
    dh = float(np.linalg.norm(angular_momentum(x1) - h0) / np.linalg.norm(h0))
    check(
        "5 dynamics fidelity",
        closure <= 1e-6 and de <= 1e-9 and dh <= 1e-9,
        f"closure {closure:.1e} m, energy {de:.1e}, ang. mom. {dh:.1e}",
    )


# -- 6 ---------------------------------------------------------------------


@pytest.mark.slow
def test_criterion_6_cubature_vs_monte_carlo(scenario):
    args = (scenario.mean0, scenario.cov0, scenario.u_guess, scenario.t0, scenario.t1, scenario.mu)
    cub = propagate_moments(*args, gauss_hermite_rule(scenario.cubature_order, 6), scenario.propagation)
    mc = monte_carlo_moments(*args, 100_000, seed=scenario.monte_carlo.seed, settings=scenario.propagation)
    assert mc.n_excluded == 0
    worst = 0.0
    for spec in scenario.slices:
        c, m = slice_moments(cub, spec), slice_moments(mc.moments, spec)
        skew_se, kurt_se = central_moment_standard_errors(mc.samples, spec)
        worst = max(
            worst,
            float(np.max(np.abs(c.skew2 - m.skew2) / skew_se)),
            float(np.max(np.abs(c.kurt2 - m.kurt2) / kurt_se)),
        )
    check("6 cubature vs Monte Carlo", worst <= 5.0, f"worst |cubature - MC| = {worst:.2f} SE over 3 slices")


# -- 7 and 8 ---------------------------------------------------------------


@pytest.fixture(scope="module")
def solutions(scenario):
    return cmd_optimize(scenario, Method.ELLIPSE), cmd_optimize(scenario, Method.BANANA)


@pytest.mark.slow
def test_criterion_7_end_to_end_reproduction(scenario, solutions):
    ellipse, banana = solutions
    n, seed = scenario.monte_carlo.n_samples, scenario.monte_carlo.seed
    ve = cmd_validate(scenario, ellipse.u_star, n, seed, "ellipse")
    vb = cmd_validate(scenario, banana.u_star, n, seed, "banana")
    worst_single = min(vb.per_constraint.values())
    conditions = {
        "converged": ellipse.converged and banana.converged,
        "ellipse band": 0.88 <= ve.joint <= 0.96,
        "banana band": 0.968 <= vb.joint <= 0.998,
        "gap >= 3pp": vb.joint - ve.joint >= 0.03,
        "each banana constraint >= 98%": worst_single >= 0.98,
    }
    failed = [k for k, ok in conditions.items() if not ok]
    check(
        "7 end-to-end reproduction",
        not failed,
        f"[{scenario.confidence_mode.value}] ellipse joint {ve.joint:.2%}, banana joint {vb.joint:.2%}, "
        f"worst banana constraint {worst_single:.2%}, |u| {ellipse.objective:.5f}/{banana.objective:.5f} m/s"
        + (f"; failed: {', '.join(failed)}" if failed else ""),
    )


@pytest.mark.slow
def test_criterion_7_other_confidence_mode(scenario):
    """Informational: the same workflow under the other k(P) convention."""
    other = (
        ConfidenceMode.TWO_DIM
        if scenario.confidence_mode is ConfidenceMode.ONE_DIM
        else ConfidenceMode.ONE_DIM
    )
    alt = scenario.replace(confidence_mode=other)
    ellipse = cmd_optimize(alt, Method.ELLIPSE)
    n, seed = alt.monte_carlo.n_samples, alt.monte_carlo.seed
    ve = cmd_validate(alt, ellipse.u_star, n, seed, "ellipse")
    detail = f"[{other.value}] ellipse converged={ellipse.converged} joint {ve.joint:.2%}"
    if ellipse.converged:
        banana = cmd_optimize(alt, Method.BANANA)
        vb = cmd_validate(alt, banana.u_star, n, seed, "banana")
        detail += f", banana converged={banana.converged} joint {vb.joint:.2%}"
    record_acceptance("7 (other k mode)", None, detail)


@pytest.mark.slow
def test_criterion_8_sampling_density(scenario, solutions):
    _, banana = solutions
    m64 = evaluate_constraints(banana.u_star, scenario, Method.BANANA, n_points=64)
    m128 = evaluate_constraints(banana.u_star, scenario, Method.BANANA, n_points=128)
    diffs = [abs(m64.pair_minimums()[k] - v) for k, v in m128.pair_minimums().items()]
    check("8 sampling density", max(diffs) < 0.1, f"max margin change 64 -> 128 points: {max(diffs):.2e} m")
