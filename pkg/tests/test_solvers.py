import itertools
import math

import numpy as np
import pytest

from conetest.cones import FullSpace, KSparse, LassoCone
from conetest.errors import SubsetBudgetError
from conetest.solvers import (
    SolveOutcome,
    SolverOptions,
    bss_exhaustive,
    bss_heuristic,
    lasso_cone_solve,
    lasso_constrained,
    nonneg_quadratic,
    quad_objective,
    regression_solve,
    subset_total,
)
from conetest.statistic import conic_statistic
from conetest.estimators import sample_covariance, sample_mean


# --- independent oracles (written before the solvers they check) -----------

def brute_force_bss(m, s, k):
    """Reference minimizer of 1 - 2m'b + b'Sb over ||b||_0 <= k.

    Enumerates every support as a bitmask and solves each block with an
    explicit inverse; near-singular blocks are discarded by conditioning.
    """
    p = len(m)
    best_obj, best_beta = 1.0, np.zeros(p)
    for mask in range(1, 1 << p):
        idx = [j for j in range(p) if mask >> j & 1]
        if len(idx) > k:
            continue
        block = s[np.ix_(idx, idx)]
        w = np.linalg.eigvalsh(block)
        if w[0] <= 1e-9 * max(w[-1], 1e-12):
            continue
        beta_j = np.linalg.inv(block) @ m[idx]
        obj = 1.0 - 2.0 * m[idx] @ beta_j + beta_j @ block @ beta_j
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_beta = np.zeros(p)
            best_beta[idx] = beta_j
    return best_beta, best_obj


def grid_oracle_l1_sphere(m, t, grid=400001):
    """Max of m'lam over the unit sphere intersected with the l1 ball (p=2)."""
    theta = np.linspace(0.0, 2.0 * np.pi, grid)
    lam = np.column_stack([np.cos(theta), np.sin(theta)])
    ok = np.abs(lam).sum(axis=1) <= t + 1e-12
    vals = lam[ok] @ m
    return max(float(vals.max(initial=0.0)), 0.0)


def random_psd(rng, p, singular=False):
    a = rng.standard_normal((p + 2, p))
    s = a.T @ a / (p + 2)
    if singular:
        u = rng.standard_normal(p)
        u /= np.linalg.norm(u)
        s = s - np.outer(s @ u, s @ u) / (u @ s @ u)
        s = (s + s.T) / 2
    return s


# --- exhaustive ------------------------------------------------------------

def test_bss_exhaustive_examples():
    m = np.array([3.0, -4.0, 1.0])
    out = bss_exhaustive(m, np.eye(3), 2)
    assert np.allclose(out.beta, [3.0, -4.0, 0.0], atol=1e-12)
    assert out.objective == pytest.approx(-24.0, abs=1e-12)
    assert out.certificate == "exact_exhaustive"

    zero = bss_exhaustive(np.zeros(3), np.eye(3), 2)
    assert np.array_equal(zero.beta, np.zeros(3))
    assert zero.objective == pytest.approx(1.0)


def test_bss_exhaustive_matches_brute_force_p10():
    rng = np.random.default_rng(31)
    m = rng.standard_normal(10)
    s = random_psd(rng, 10)
    assert subset_total(10, 3) == 175
    out = bss_exhaustive(m, s, 3)
    beta_ref, obj_ref = brute_force_bss(m, s, 3)
    assert out.support == tuple(np.flatnonzero(beta_ref))
    assert out.objective == pytest.approx(obj_ref, abs=1e-12)


def test_bss_exhaustive_200_random_instances():
    rng = np.random.default_rng(32)
    for trial in range(200):
        p = int(rng.integers(2, 13))
        k = int(rng.integers(1, min(4, p) + 1))
        m = rng.standard_normal(p) * rng.uniform(0.2, 3)
        s = random_psd(rng, p)
        out = bss_exhaustive(m, s, k)
        beta_ref, obj_ref = brute_force_bss(m, s, k)
        assert out.support == tuple(np.flatnonzero(beta_ref)), trial
        assert abs(out.objective - obj_ref) <= 1e-12 * max(1.0, abs(obj_ref))


def test_bss_exhaustive_budget_error():
    with pytest.raises(SubsetBudgetError):
        bss_exhaustive(np.ones(30), np.eye(30), 10, SolverOptions(exhaustive_limit=1000))


def test_bss_exhaustive_skips_singular_supports():
    # duplicated coordinates make every {0,1} block singular
    s = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    out = bss_exhaustive(np.array([0.5, 0.5, 1.0]), s, 2)
    assert out.skipped_supports >= 1
    assert 2 in out.support


# --- heuristic -------------------------------------------------------------

def test_bss_heuristic_examples():
    m = np.array([3.0, -4.0, 1.0])
    out = bss_heuristic(m, np.eye(3), 2)
    assert np.allclose(out.beta, [3.0, -4.0, 0.0], atol=1e-12)
    assert out.certificate == "heuristic_local_opt"

    s = random_psd(np.random.default_rng(33), 5)
    full = bss_heuristic(np.arange(1.0, 6.0), s, 5)
    assert np.allclose(full.beta, np.linalg.solve(s, np.arange(1.0, 6.0)), atol=1e-8)


def test_bss_heuristic_never_beats_exhaustive_and_matches_frequently():
    rng = np.random.default_rng(34)
    matches = 0
    total = 200
    for trial in range(total):
        p = int(rng.integers(4, 13))
        k = int(rng.integers(1, min(4, p) + 1))
        m = rng.standard_normal(p) * rng.uniform(0.2, 3)
        s = random_psd(rng, p)
        exact = bss_exhaustive(m, s, k)
        heur = bss_heuristic(m, s, k, SolverOptions(seed=trial))
        assert heur.objective >= exact.objective - 1e-12
        if heur.objective <= exact.objective + 1e-9:
            matches += 1
    assert matches >= 0.95 * total, f"heuristic matched only {matches}/{total}"


def test_heuristic_determinism():
    rng = np.random.default_rng(35)
    m = rng.standard_normal(8)
    s = random_psd(rng, 8)
    a = bss_heuristic(m, s, 3, SolverOptions(seed=7))
    b = bss_heuristic(m, s, 3, SolverOptions(seed=7))
    assert np.array_equal(a.beta, b.beta)
    assert a.objective == b.objective


# --- nonnegative orthant ---------------------------------------------------

def test_nonneg_quadratic_matches_projected_solution():
    out = nonneg_quadratic(np.array([1.4, -0.2]), np.array([[1.0, 1.0], [1.0, 1.0]]))
    assert np.allclose(out.beta, [1.4, 0.0], atol=1e-10)


def test_nonneg_quadratic_interior():
    rng = np.random.default_rng(36)
    s = random_psd(rng, 4)
    beta_true = np.abs(rng.standard_normal(4)) + 0.1
    m = s @ beta_true
    out = nonneg_quadratic(m, s)
    assert np.allclose(out.beta, beta_true, atol=1e-8)


# --- constrained lasso -----------------------------------------------------

def test_lasso_constrained_examples():
    out = lasso_constrained(np.array([3.0, 4.0]), np.eye(2), 1.0)
    assert np.allclose(out.beta, [0.0, 1.0], atol=1e-8)
    assert out.objective == pytest.approx(-6.0, abs=1e-7)

    free = lasso_constrained(np.array([3.0, 4.0]), np.eye(2), 8.0)
    assert np.allclose(free.beta, [3.0, 4.0], atol=1e-10)

    zero = lasso_constrained(np.zeros(3), np.eye(3), 1.0)
    assert np.array_equal(zero.beta, np.zeros(3))


def test_lasso_constrained_kkt_on_random_instances():
    rng = np.random.default_rng(37)
    for trial in range(40):
        p = int(rng.integers(2, 7))
        m = rng.standard_normal(p) * rng.uniform(0.3, 3)
        s = random_psd(rng, p, singular=bool(trial % 5 == 0))
        radius = float(rng.uniform(0.1, 4.0))
        out = lasso_constrained(m, s, radius)
        assert np.sum(np.abs(out.beta)) <= radius + 1e-6 * (1 + radius)
        # objective no worse than a dense scan over the l1 sphere + interior
        probe = rng.standard_normal((4000, p))
        probe = probe / np.abs(probe).sum(axis=1, keepdims=True) * radius
        vals = 1 - 2 * probe @ m + np.einsum("ij,jk,ik->i", probe, s, probe)
        assert out.objective <= vals.min() + 1e-6


def test_lasso_objective_nonincreasing_in_radius():
    rng = np.random.default_rng(38)
    m = rng.standard_normal(4)
    s = random_psd(rng, 4)
    radii = [0.2, 0.5, 1.0, 2.0, 5.0, 50.0]
    objs = [lasso_constrained(m, s, r).objective for r in radii]
    assert all(a >= b - 1e-9 for a, b in zip(objs, objs[1:]))
    assert objs[-1] == pytest.approx(quad_objective(m, s, np.linalg.solve(s, m)), abs=1e-7)


# --- lasso cone fixed point ------------------------------------------------

def test_lasso_cone_limits_with_grid_oracle():
    m = np.array([3.0, 4.0])
    t1 = lasso_cone_solve(m, np.eye(2), 1.0)
    stat1 = float(m @ t1.beta) / math.sqrt(float(t1.beta @ t1.beta))
    assert stat1 == pytest.approx(grid_oracle_l1_sphere(m, 1.0), abs=1e-4)
    assert stat1 == pytest.approx(4.0, abs=1e-6)

    t2 = lasso_cone_solve(m, np.eye(2), math.sqrt(2.0))
    stat2 = float(m @ t2.beta) / math.sqrt(float(t2.beta @ t2.beta))
    assert stat2 == pytest.approx(5.0, abs=1e-6)
    assert t2.certificate == "fixed_point"

    zero = lasso_cone_solve(np.zeros(2), np.eye(2), 1.0)
    assert np.array_equal(zero.beta, np.zeros(2))


# --- regression route ------------------------------------------------------

def test_regression_solve_orthonormal_design():
    rng = np.random.default_rng(39)
    q, _ = np.linalg.qr(rng.standard_normal((20, 4)))
    x = q * math.sqrt(20)  # gram = I
    m = sample_mean(x)
    out = regression_solve(x, FullSpace(4))
    assert np.allclose(out.beta, m, atol=1e-10)


def test_regression_solve_perfect_fit():
    x = np.ones((5, 1))
    out = regression_solve(x, FullSpace(1))
    assert out.beta[0] == pytest.approx(1.0, abs=1e-12)
    assert out.objective == pytest.approx(0.0, abs=1e-12)


def test_regression_matches_quadratic_form_route():
    rng = np.random.default_rng(40)
    x = rng.standard_normal((20, 6)) + 0.3
    m = sample_mean(x)
    cov = sample_covariance(x)
    reg = regression_solve(x, KSparse(2, 6))
    quad = conic_statistic(m, cov, KSparse(2, 6), path="quadratic_form")
    lam_reg = reg.beta / math.sqrt(float(reg.beta @ cov.matrix @ reg.beta))
    assert np.allclose(lam_reg, quad.maximizer, atol=1e-8)


def test_regression_objective_is_mean_squared_residual():
    rng = np.random.default_rng(41)
    x = rng.standard_normal((15, 3))
    out = regression_solve(x, KSparse(2, 3))
    resid = np.ones(15) - x @ out.beta
    assert out.objective == pytest.approx(float(resid @ resid) / 15, abs=1e-10)


def test_regression_lasso_cone_constant_response():
    # the motivating failure mode: constant dependent variable must work
    rng = np.random.default_rng(42)
    x = rng.standard_normal((25, 3)) + 0.5
    out = regression_solve(x, LassoCone(1.0, 3))
    assert isinstance(out, SolveOutcome)
    assert np.isfinite(out.objective)
