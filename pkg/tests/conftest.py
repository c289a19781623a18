"""Shared test helpers: a brute-force grid oracle for prox subproblems and
generators for random cut collections and composite terms."""

import math

import numpy as np
import pytest

from bundlekit import Bundle, Cut, Policy, make_composite, make_cut


def h_eval_vec(kind, params, U):
    """Vectorized composite-term values on an (N, d) array of points."""
    if kind == "zero":
        return np.zeros(U.shape[0])
    if kind == "quadratic":
        c = np.asarray(params["center"], dtype=float)
        d = U - c
        return 0.5 * params["mu"] * np.sum(d * d, axis=1)
    if kind == "box":
        lower, upper = params["lower"], params["upper"]
        ok = np.all((U >= lower - 1e-12) & (U <= upper + 1e-12), axis=1)
        return np.where(ok, 0.0, np.inf)
    if kind == "ball":
        c, r = params["center"], params["radius"]
        ok = np.linalg.norm(U - c, axis=1) <= r + 1e-12
        return np.where(ok, 0.0, np.inf)
    if kind == "l1":
        return params["weight"] * np.sum(np.abs(U), axis=1)
    raise ValueError(kind)


def _psi_vec(U, G, b, kind, params, x_c, lam):
    model = np.max(U @ G.T + b, axis=1)
    d = U - x_c
    return model + h_eval_vec(kind, params, U) \
        + np.sum(d * d, axis=1) / (2 * lam)


def _domain_projection(h):
    """Map arbitrary points into dom h (identity for full-domain kinds)."""
    kind, params = h.kind, h.params
    if kind == "box":
        lo, hi = params["lower"], params["upper"]
        return lambda v: np.clip(v, lo, hi)
    if kind == "ball":
        c, r = params["center"], params["radius"]

        def proj(v):
            d = v - c
            nd = np.linalg.norm(d)
            return v if nd <= r else c + (r / nd) * d

        return proj
    return lambda v: v


def grid_min_subproblem(bundle, h, x_c, lam):
    """Brute-force minimizer of the prox bundle subproblem.

    A base grid at step 1e-4 (coarser first in 2-D) is refined around its
    argmin; the refinement window at each level accounts for how far the
    grid argmin of a (1/lam)-strongly-convex function can sit from the true
    minimizer.  A derivative-free polish on the domain-projected objective
    finishes the job.  Only 1-D and 2-D subproblems are supported."""
    from scipy.optimize import minimize

    G, b = bundle.arrays()
    x_c = np.asarray(x_c, dtype=float)
    dim = x_c.size
    if dim > 2:
        raise ValueError("grid oracle only covers 1-D and 2-D")
    kind, params = h.kind, h.params

    center = np.asarray(h.prox(lam, x_c), dtype=float)
    max_g = float(np.max(np.linalg.norm(G, axis=1)))
    radius = lam * max_g + 0.05
    # local slope bound for psi near its minimizer, used to size windows
    h_slope = 0.0
    if kind == "l1":
        h_slope = params["weight"] * math.sqrt(dim)
    elif kind == "quadratic":
        h_slope = params["mu"] * (radius + float(np.linalg.norm(
            center - np.asarray(params["center"], dtype=float))) + 1.0)
    slope = max_g + h_slope + 2 * radius / lam

    per_axis_cap = 120_000 if dim == 1 else 900

    def run_grid(c, rad, step):
        step = max(step, 2 * rad / per_axis_cap)
        if dim == 1:
            U = np.arange(c[0] - rad, c[0] + rad + step, step)[:, None]
        else:
            ax0 = np.arange(c[0] - rad, c[0] + rad + step, step)
            ax1 = np.arange(c[1] - rad, c[1] + rad + step, step)
            XX, YY = np.meshgrid(ax0, ax1, indexing="ij")
            U = np.column_stack([XX.ravel(), YY.ravel()])
        vals = _psi_vec(U, G, b, kind, params, x_c, lam)
        i = int(np.argmin(vals))
        return U[i].copy(), float(vals[i])

    if dim == 1:
        steps = [1e-4, 1e-6, 1e-8]
    else:
        steps = [max(radius / 250.0, 1e-4), 1e-4, 1e-6]
    best_x, best_v = run_grid(center, radius, steps[0])
    for prev, step in zip(steps, steps[1:]):
        # a grid at pitch s overshoots the min by at most slope*s, and strong
        # convexity 1/lam turns that into a distance bound for the argmin
        window = math.sqrt(2 * lam * slope * prev) + 2 * prev
        x, v = run_grid(best_x, min(window, radius), step)
        if v < best_v:
            best_x, best_v = x, v

    # polish: Nelder-Mead on psi composed with the domain projection
    proj = _domain_projection(h)

    def psi_scalar(v):
        u = np.atleast_2d(proj(np.asarray(v, dtype=float)))
        return float(_psi_vec(u, G, b, kind, params, x_c, lam)[0])

    res = minimize(psi_scalar, best_x, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14,
                            "maxiter": 20000, "maxfev": 20000})
    if res.fun < best_v:
        best_x = np.atleast_1d(proj(np.asarray(res.x, dtype=float)))
        best_v = float(res.fun)
    return best_x, best_v


def random_bundle(rng, dim, n_cuts, slope_scale=1.0):
    """Random cut collection from a sampled max-affine function."""
    cuts = []
    for i in range(n_cuts):
        x = rng.uniform(-1, 1, size=dim)
        g = slope_scale * rng.uniform(-1, 1, size=dim)
        fx = float(rng.uniform(-0.5, 0.5))
        cuts.append(make_cut(x, fx, g, i))
    return Bundle(cuts=cuts, policy=Policy("keep_all"))


def random_composite(rng, dim, kind):
    """A randomly parameterized composite term of the given kind."""
    if kind == "zero":
        return make_composite("zero")
    if kind == "quadratic":
        return make_composite("quadratic", mu=float(rng.uniform(0.2, 2.0)),
                              center=rng.uniform(-0.5, 0.5, size=dim))
    if kind == "box":
        lo = rng.uniform(-1.0, -0.1, size=dim)
        hi = rng.uniform(0.1, 1.0, size=dim)
        return make_composite("box", lower=lo, upper=hi)
    if kind == "ball":
        return make_composite("ball", center=rng.uniform(-0.3, 0.3, size=dim),
                              radius=float(rng.uniform(0.3, 1.5)))
    if kind == "l1":
        return make_composite("l1", weight=float(rng.uniform(0.1, 1.0)),
                              dim=dim)
    raise ValueError(kind)


COMPOSITE_KINDS = ["zero", "quadratic", "box", "ball", "l1"]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
