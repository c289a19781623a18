"""Built-in problem families: max-affine oracles, a catalog of prox-friendly
composite terms, and the hard max-coordinate-plus-huberized-norm instance with
known optimum."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import CompositeTerm, ProblemInstance, SubgradientOracle, as_vector


def _floor_tol(x: float) -> int:
    """Floor with a tiny relative slack so values sitting on an integer up to
    rounding noise are not pushed down a step."""
    return math.floor(x + 1e-9 * (1 + abs(x)))


# ---------------------------------------------------------------------------
# Huberized norm p_R
# ---------------------------------------------------------------------------

def p_r_value(R: float, x) -> float:
    """Huberized squared norm: ||x||^2/2 inside the ball of radius R,
    linear growth R(||x|| - R/2) outside."""
    if R <= 0:
        raise ValueError("R must be positive")
    nx = float(np.linalg.norm(as_vector(x)))
    if nx <= R:
        return 0.5 * nx * nx
    return R * (nx - 0.5 * R)


def p_r_grad(R: float, x) -> np.ndarray:
    """Gradient of the huberized squared norm; bounded by R in norm."""
    if R <= 0:
        raise ValueError("R must be positive")
    x = as_vector(x)
    nx = float(np.linalg.norm(x))
    if nx <= R:
        return x.copy()
    return (R / nx) * x


# ---------------------------------------------------------------------------
# Max-affine oracles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MaxAffineSpec:
    """f(x) = max_i (<a_i, x> + b_i); subgradient picks the smallest
    maximizing row."""

    slopes: np.ndarray
    intercepts: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.atleast_1d(np.asarray(self.intercepts, dtype=float))
        if A.shape[0] == 0:
            raise ValueError("need at least one affine piece")
        if A.shape[0] != b.size:
            raise ValueError("slopes and intercepts disagree on piece count")
        object.__setattr__(self, "slopes", A)
        object.__setattr__(self, "intercepts", b)

    @property
    def lipschitz_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.slopes, axis=1)))


def make_max_affine(spec: MaxAffineSpec) -> SubgradientOracle:
    """Oracle for a max of affine pieces with smallest-index tie-breaking."""
    A, b = spec.slopes, spec.intercepts

    def value(x):
        return float(np.max(A @ as_vector(x) + b))

    def subgrad(x):
        vals = A @ as_vector(x) + b
        return A[int(np.argmax(vals))].copy()

    return SubgradientOracle(eval=value, subgrad=subgrad,
                             lipschitz_bound=spec.lipschitz_bound)


def make_abs_oracle() -> SubgradientOracle:
    """1-D |x| as a two-piece max-affine oracle."""
    return make_max_affine(MaxAffineSpec(slopes=[[1.0], [-1.0]],
                                         intercepts=[0.0, 0.0]))


# ---------------------------------------------------------------------------
# Composite-term catalog
# ---------------------------------------------------------------------------

def make_composite(kind: str, **params) -> CompositeTerm:
    """Build a composite term with a closed-form prox.

    kinds:
      zero                      h = 0
      quadratic(mu, center)     h = (mu/2) ||x - c||^2
      box(lower, upper)         indicator of [l, u]
      ball(center, radius)      indicator of B(c, r)
      l1(weight, dim)           h = w ||x||_1   (M_h = w sqrt(dim))
    """
    if kind == "zero":
        return CompositeTerm(
            eval=lambda x: 0.0,
            prox=lambda alpha, z: as_vector(z).copy(),
            in_domain=lambda x: True,
            modulus=0.0, lipschitz=0.0, kind="zero", params={})

    if kind == "quadratic":
        mu = float(params.get("mu", 1.0))
        center = params.get("center", 0.0)
        if mu < 0:
            raise ValueError("mu must be nonnegative")

        def qeval(x, center=center, mu=mu):
            d = as_vector(x) - center
            return 0.5 * mu * float(d @ d)

        def qprox(alpha, z, center=center, mu=mu):
            # argmin (mu/2)||u-c||^2 + ||u-z||^2/(2 alpha)
            return (as_vector(z) + alpha * mu * np.asarray(center, dtype=float)) \
                / (1.0 + alpha * mu)

        return CompositeTerm(eval=qeval, prox=qprox, in_domain=lambda x: True,
                             modulus=mu, lipschitz=math.inf,
                             kind="quadratic", params={"mu": mu, "center": center})

    if kind == "box":
        lower = np.atleast_1d(np.asarray(params["lower"], dtype=float))
        upper = np.atleast_1d(np.asarray(params["upper"], dtype=float))
        if np.any(lower > upper):
            raise ValueError("box has lower > upper")

        def beval(x):
            x = as_vector(x)
            inside = np.all(x >= lower - 1e-12) and np.all(x <= upper + 1e-12)
            return 0.0 if inside else math.inf

        return CompositeTerm(
            eval=beval,
            prox=lambda alpha, z: np.clip(as_vector(z), lower, upper),
            in_domain=lambda x: bool(np.all(as_vector(x) >= lower - 1e-12)
                                     and np.all(as_vector(x) <= upper + 1e-12)),
            modulus=0.0, lipschitz=0.0,
            kind="box", params={"lower": lower, "upper": upper})

    if kind == "ball":
        center = np.atleast_1d(np.asarray(params["center"], dtype=float))
        radius = float(params["radius"])
        if radius <= 0:
            raise ValueError("radius must be positive")

        def project(z):
            d = as_vector(z) - center
            nd = np.linalg.norm(d)
            if nd <= radius:
                return as_vector(z).copy()
            return center + (radius / nd) * d

        return CompositeTerm(
            eval=lambda x: 0.0 if np.linalg.norm(as_vector(x) - center) <= radius + 1e-12
            else math.inf,
            prox=lambda alpha, z: project(z),
            in_domain=lambda x: bool(np.linalg.norm(as_vector(x) - center)
                                     <= radius + 1e-12),
            modulus=0.0, lipschitz=0.0,
            kind="ball", params={"center": center, "radius": radius})

    if kind == "l1":
        weight = float(params.get("weight", 1.0))
        dim = params.get("dim")
        if weight < 0:
            raise ValueError("weight must be nonnegative")
        m_h = weight * math.sqrt(dim) if dim is not None else math.inf

        def soft(alpha, z, w=weight):
            z = as_vector(z)
            return np.sign(z) * np.maximum(np.abs(z) - alpha * w, 0.0)

        return CompositeTerm(
            eval=lambda x: weight * float(np.sum(np.abs(as_vector(x)))),
            prox=soft, in_domain=lambda x: True,
            modulus=0.0, lipschitz=m_h,
            kind="l1", params={"weight": weight, "dim": dim})

    raise ValueError(f"unknown composite kind {kind!r}")


# ---------------------------------------------------------------------------
# Hard instance with known optimum
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorstCaseParams:
    """Parameters of the hard instance family.

    The derived quantities (case tag, k0, gamma, tau, R) follow the
    four-way dispatch on (m_f, mu, r0, eps_bar).
    """

    m_f: float
    mu: float
    r0: float
    eps_bar: float
    n: int

    def __post_init__(self):
        if self.m_f < 0 or self.mu < 0:
            raise ValueError("m_f and mu must be nonnegative")
        if self.r0 <= 0 or self.eps_bar <= 0:
            raise ValueError("r0 and eps_bar must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")

    def resolve(self):
        """Return (case, k0, gamma, tau, R)."""
        m_f, mu, r0, eps = self.m_f, self.mu, self.r0, self.eps_bar
        if mu * r0 ** 2 <= 8 * eps:
            if m_f * r0 / eps < 8:
                return ("a1", self.n, 0.0, m_f / r0, r0)
            k0 = _floor_tol(m_f ** 2 * r0 ** 2 / (64 * eps ** 2))
            s = math.sqrt(k0)
            gamma = s / (1 + s) * (m_f + mu * r0)
            tau = (m_f / r0 - mu * s) / (1 + s)
            return ("a2", k0, gamma, tau, r0)
        if m_f ** 2 / (mu * eps) < 8:
            return ("b1", self.n, 0.0, 0.0, r0)
        k0 = _floor_tol(m_f ** 2 / (4 * mu * eps))
        return ("b2", k0, m_f, 0.0, r0)


def make_worst_case(params: WorstCaseParams) -> ProblemInstance:
    """Hard instance: f = gamma * max_{i<=k0} x_i + tau * p_R, h = (mu/2)||x||^2,
    x0 = 0, with the exact optimum attached.

    The subgradient picks the smallest maximizing coordinate, which makes the
    iterates of span-respecting methods grow support one coordinate per step.
    """
    case, k0, gamma, tau, R = params.resolve()
    n, mu = params.n, params.mu
    if n < k0:
        raise ValueError(f"dimension too small: n={n} < k0={k0}")

    x0 = np.zeros(n)

    if case == "b1":
        f = SubgradientOracle(eval=lambda x: 0.0,
                              subgrad=lambda x: np.zeros(n),
                              lipschitz_bound=0.0)
        h = make_composite("quadratic", mu=mu, center=np.zeros(n))
        return ProblemInstance(f=f, h=h, x0=x0, known_x_star=np.zeros(n),
                               known_phi_star=0.0, known_d0_bound=params.r0)

    def value(x, gamma=gamma, tau=tau, k0=k0, R=R):
        x = as_vector(x)
        return gamma * float(np.max(x[:k0])) + tau * p_r_value(R, x)

    def subgrad(x, gamma=gamma, tau=tau, k0=k0, R=R):
        x = as_vector(x)
        g = tau * p_r_grad(R, x)
        i_star = int(np.argmax(x[:k0]))  # smallest maximizing index
        g[i_star] += gamma
        return g

    f = SubgradientOracle(eval=value, subgrad=subgrad,
                          lipschitz_bound=gamma + tau * R)
    h = make_composite("quadratic", mu=mu, center=np.zeros(n)) if mu > 0 \
        else make_composite("zero")

    if case == "a1":
        x_star = np.zeros(n)
        phi_star = 0.0
    else:
        # symmetric minimizer: first k0 coordinates equal -gamma/((tau+mu) k0)
        t = gamma / ((tau + mu) * k0)
        x_star = np.zeros(n)
        x_star[:k0] = -t
        phi_star = -gamma ** 2 / (2 * (tau + mu) * k0)

    return ProblemInstance(f=f, h=h, x0=x0, known_x_star=x_star,
                           known_phi_star=phi_star, known_d0_bound=params.r0)


def make_random_max_affine(n: int, pieces: int, seed: int,
                           m_f: float = 1.0,
                           intercept_scale: float = 0.1) -> MaxAffineSpec:
    """Seeded random max-affine spec with max row norm exactly m_f."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((pieces, n))
    A *= m_f / np.max(np.linalg.norm(A, axis=1))
    b = intercept_scale * rng.standard_normal(pieces)
    return MaxAffineSpec(slopes=A, intercepts=b)
