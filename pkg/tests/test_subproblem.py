import math

import numpy as np
import pytest

from bundlekit import (Bundle, Policy, Tolerances, make_composite, make_cut,
                       solve, verify_kkt)
from bundlekit.subproblem import MAX_DUAL_ITERS

from conftest import (COMPOSITE_KINDS, grid_min_subproblem, random_bundle,
                      random_composite)


def abs_model(policy="keep_all"):
    cuts = [make_cut([1.0], 1.0, [1.0], 0),
            make_cut([-2.0], 2.0, [-1.0], 1)]
    return Bundle(cuts=cuts, policy=Policy.parse(policy))


def test_single_cut_closed_form():
    b = Bundle(cuts=[make_cut([0.0, 0.0], 0.0, [1.0, 0.0], 0)])
    sol = solve(b, make_composite("zero"), [0.0, 0.0], 0.5)
    assert sol.x == pytest.approx([-0.5, 0.0])
    # m = <g, x> + ||x||^2 / (2 lam) = -0.5 + 0.25
    assert sol.m == pytest.approx(-0.25)
    assert sol.gap <= 1e-12


def test_abs_model_unconstrained():
    sol = solve(abs_model(), make_composite("zero"), [1.0], 1.0)
    assert sol.x == pytest.approx([0.0], abs=1e-8)
    assert sol.m == pytest.approx(0.5, abs=1e-9)
    assert sol.weights.sum() == pytest.approx(1.0)
    assert np.all(sol.weights >= 0)


def test_abs_model_with_box():
    h = make_composite("box", lower=[0.3], upper=[2.0])
    sol = solve(abs_model(), h, [1.0], 1.0)
    assert sol.x == pytest.approx([0.3], abs=1e-8)
    assert sol.m == pytest.approx(0.545, abs=1e-9)


def test_kkt_residual_small_on_exact_solutions():
    b = Bundle(cuts=[make_cut([0.0, 0.0], 0.0, [1.0, 0.0], 0)])
    h = make_composite("zero")
    sol = solve(b, h, [0.0, 0.0], 0.5)
    assert verify_kkt(sol, b, h, [0.0, 0.0], 0.5) <= 1e-12

    sol2 = solve(abs_model(), h, [1.0], 1.0)
    assert verify_kkt(sol2, abs_model(), h, [1.0], 1.0) <= 1e-9


def test_kkt_detects_perturbation():
    b = abs_model()
    h = make_composite("zero")
    sol = solve(b, h, [1.0], 1.0)
    from bundlekit import SubproblemSolution
    bad = SubproblemSolution(x=sol.x + 1e-3, m=sol.m,
                             weights=sol.weights, gap=sol.gap,
                             iterations=sol.iterations)
    assert verify_kkt(bad, b, h, [1.0], 1.0) >= 1e-4


def test_dual_never_exceeds_primal(rng):
    for _ in range(30):
        dim = int(rng.integers(1, 3))
        b = random_bundle(rng, dim, int(rng.integers(1, 6)))
        h = random_composite(rng, dim, COMPOSITE_KINDS[int(rng.integers(0, 5))])
        lam = float(rng.uniform(0.1, 2.0))
        x_c = np.asarray(h.prox(1.0, rng.uniform(-1, 1, size=dim)))
        sol = solve(b, h, x_c, lam)
        assert sol.gap >= -1e-12
        assert sol.gap <= 1e-10 * 10  # certified


def test_m_minorizes_regularized_objective(rng):
    # the subproblem value never exceeds phi-model + prox at sampled points
    b = random_bundle(rng, 2, 5)
    h = make_composite("quadratic", mu=0.5, center=np.zeros(2))
    lam = 0.7
    x_c = np.array([0.3, -0.2])
    sol = solve(b, h, x_c, lam)
    G, bb = b.arrays()
    for _ in range(1000):
        u = rng.uniform(-2, 2, size=2)
        d = u - x_c
        val = float(np.max(G @ u + bb)) + h.eval(u) + float(d @ d) / (2 * lam)
        assert sol.m <= val + 1e-9


def test_strong_convexity_growth(rng):
    b = random_bundle(rng, 2, 4)
    mu = 1.0
    h = make_composite("quadratic", mu=mu, center=np.zeros(2))
    lam = 0.5
    lam_tilde = lam / (1 + lam * mu)
    x_c = np.array([0.1, 0.4])
    sol = solve(b, h, x_c, lam)
    G, bb = b.arrays()
    for _ in range(500):
        u = rng.uniform(-1.5, 1.5, size=2)
        d = u - x_c
        val = float(np.max(G @ u + bb)) + h.eval(u) + float(d @ d) / (2 * lam)
        grow = float(np.dot(u - sol.x, u - sol.x)) / (2 * lam_tilde)
        assert val >= sol.m + grow - 1e-8


def test_agreement_with_grid_oracle(rng):
    for trial in range(60):
        dim = 1 if trial % 2 == 0 else 2
        kind = COMPOSITE_KINDS[trial % 5]
        b = random_bundle(rng, dim, int(rng.integers(1, 9)))
        h = random_composite(rng, dim, kind)
        lam = float(rng.uniform(0.1, 2.0))
        x_c = np.asarray(h.prox(1.0, rng.uniform(-1, 1, size=dim)))
        sol = solve(b, h, x_c, lam)
        x_grid, psi_grid = grid_min_subproblem(b, h, x_c, lam)
        assert np.linalg.norm(sol.x - x_grid) <= 1e-3, (trial, kind)
        assert abs(sol.m - psi_grid) <= 1e-6, (trial, kind)


def test_warm_start_used(rng):
    b = random_bundle(rng, 2, 6)
    h = make_composite("zero")
    x_c = np.zeros(2)
    cold = solve(b, h, x_c, 1.0)
    warm = solve(b, h, x_c, 1.0,
                 warm_start=dict(zip(b.ids, cold.weights)))
    assert warm.iterations <= cold.iterations
    assert np.allclose(warm.x, cold.x, atol=1e-8)


def test_rejects_bad_inputs():
    with pytest.raises(ValueError):
        solve(Bundle(cuts=[]), make_composite("zero"), [0.0], 1.0)
    b = abs_model()
    with pytest.raises(ValueError):
        solve(b, make_composite("zero"), [0.0], -1.0)
