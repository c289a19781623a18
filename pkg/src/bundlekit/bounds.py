"""Solution certificates (epsilon-subgradient triples and pairs) and the
full set of iteration-complexity bound calculators used for bound-versus-
observed comparisons.

All O(.) bounds are reported as raw formula values with O-constant 1 plus
the explicit constants of the source results; comparisons against observed
counts should only assert inequalities whose constants are exact."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import ProblemInstance, as_vector, evaluate_phi

# the rate constant 16^(4/3)
RATE_C = 2.0 ** (16.0 / 3.0)


# ---------------------------------------------------------------------------
# Bounding sets for solution pairs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box given by center and per-coordinate half-widths."""

    center: np.ndarray
    half_widths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        object.__setattr__(self, "half_widths", as_vector(self.half_widths))
        if np.any(self.half_widths < 0) or not np.all(np.isfinite(self.half_widths)):
            raise ValueError("half-widths must be finite and nonnegative")

    def support(self, v) -> float:
        """Support function sup{<v, x> : x in the box}."""
        v = as_vector(v)
        return float(v @ self.center) + float(np.abs(v) @ self.half_widths)

    @property
    def diameter(self) -> float:
        return 2.0 * float(np.linalg.norm(self.half_widths))


@dataclass(frozen=True)
class BoundingBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_vector(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError("radius must be finite and positive")

    def support(self, v) -> float:
        v = as_vector(v)
        return float(v @ self.center) + self.radius * float(np.linalg.norm(v))

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolutionTriple:
    """(z, v, eps) with v an eps-subgradient of phi at z."""

    z: np.ndarray
    v: np.ndarray
    eps: float
    k: int


@dataclass(frozen=True)
class SolutionPair:
    z: np.ndarray
    eta: float
    k: int


def certificate_triple(trace, k: int, lam: float,
                       modulus: float = 0.0) -> SolutionTriple:
    """Certificate after k serious steps: the averaged displacement
    v = (z_0 - z_k)/(lam k) is an eps-subgradient of phi at the incumbent,
    with eps built from the per-step residuals delta_i.

    Only valid when the composite term has no strong convexity (the residual
    algebra does not extend to modulus > 0, so that case is refused)."""
    if modulus > 0:
        raise ValueError("certificates require a composite term with modulus 0")
    if k < 1 or k > len(trace.serious_j) - 1:
        raise ValueError(f"k={k} out of range for {len(trace.serious_j) - 1} "
                         "serious steps")
    z0 = trace.serious_z[0]
    zk = trace.serious_z[k]
    zhat = trace.serious_zhat[k]
    v = (z0 - zk) / (lam * k)
    quad = (float(np.dot(zhat - z0, zhat - z0))
            - float(np.dot(zhat - zk, zhat - zk))) / (2 * lam * k)
    eps = float(np.mean(trace.serious_delta[:k])) + quad
    return SolutionTriple(z=zhat.copy(), v=v, eps=eps, k=k)


def certificate_pair(triple: SolutionTriple, bounding_set) -> SolutionPair:
    """Turn a triple into (z, eta) with 0 an eta-subgradient of phi + the
    indicator of the bounding set; eta = eps + sup over S of <v, z - x>."""
    v, z = triple.v, triple.z
    # sup over S of <v, z - x> = <v, z> + (support function of S at -v)
    eta = triple.eps + float(v @ z) + bounding_set.support(-v)
    return SolutionPair(z=z.copy(), eta=eta, k=triple.k)


@dataclass
class SubgradientCheck:
    passed: bool
    worst_margin: float
    samples: int


def check_eps_subgradient(instance: ProblemInstance, triple: SolutionTriple,
                          samples: int = 1000, seed: int = 0,
                          slack: float = 1e-9) -> SubgradientCheck:
    """Sample u in dom h and verify phi(u) >= phi(z) + <v, u-z> - eps - slack."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = instance.dim
    z, v, eps = triple.z, triple.v, triple.eps
    phi_z = evaluate_phi(instance, z)
    spread = 1.0 + float(np.linalg.norm(instance.x0 - z))
    worst = math.inf
    for _ in range(samples):
        u = instance.h.prox(1.0, z + spread * rng.standard_normal(n))
        margin = evaluate_phi(instance, u) - phi_z - float(v @ (u - z)) + eps
        worst = min(worst, margin)
    return SubgradientCheck(passed=worst >= -slack, worst_margin=worst,
                            samples=samples)


def triple_residual_bounds(d0: float, lam: float, delta: float, k: int):
    """Guaranteed ceilings for (||v||, eps) of the k-th certificate."""
    if k < 1:
        raise ValueError("k must be >= 1")
    v_bound = 2 * d0 / (lam * k) + math.sqrt(2 * delta / (lam * k))
    eps_bound = (2.5 * delta) * (1 + 1 / math.sqrt(k) + 2 / (5 * k)) \
        + 15 * d0 ** 2 / (4 * lam * k)
    return v_bound, eps_bound


# ---------------------------------------------------------------------------
# Recurrence threshold and iteration bounds
# ---------------------------------------------------------------------------

def easyrecur_threshold(theta: float, delta: float, alpha0: float) -> float:
    """Index after which the recursion alpha_{j+1} <= alpha_j - delta -
    (1 - 1/theta) alpha_j drops below delta, starting from alpha0."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if alpha0 < 0:
        raise ValueError("alpha0 must be nonnegative")
    first = alpha0 / delta
    if theta == 1:
        return first
    second = theta / (theta - 1) * math.log(alpha0 * (theta - 1) / delta + 1)
    return min(first, second)


def _lam_tilde(lam: float, mu: float) -> float:
    return lam / (1 + lam * mu)


def _floor_tol(x: float) -> int:
    """Floor with a tiny relative slack so that values sitting on an integer
    up to rounding noise are not pushed down a step."""
    return math.floor(x + 1e-9 * (1 + abs(x)))


def bound_serious(d0: float, lam: float, mu: float, eps_bar: float) -> float:
    """Ceiling on the number of serious iterations to an eps_bar-solution."""
    _require_positive(lam=lam, eps_bar=eps_bar, d0=d0)
    first = d0 ** 2 / (lam * eps_bar)
    if mu == 0:
        return first + 1
    second = math.log(mu * d0 ** 2 / eps_bar + 1) / (_lam_tilde(lam, mu) * mu)
    return min(first, second) + 1


def bound_null(lam: float, m_f: float, m_h: float, mu: float,
               d0: Optional[float], eps_bar: float) -> float:
    """Ceiling on the length of any null cycle run with delta = eps_bar.

    Two branches: one needs a finite Lipschitz constant for the composite
    term, the other needs a distance-to-optimum bound; the smaller available
    branch is used."""
    _require_positive(lam=lam, eps_bar=eps_bar)
    branches = []
    if math.isfinite(m_h):
        branches.append(2 * RATE_C * lam * (m_f + m_h) * m_f)
    if d0 is not None:
        branches.append(2 * RATE_C * _lam_tilde(lam, mu) * m_f ** 2
                        + 40 * math.sqrt(2) * m_f * d0)
    if not branches:
        raise ValueError("need a finite composite Lipschitz constant or a "
                         "distance bound d0")
    return min(branches) / eps_bar + 1


def bound_total(lam: float, m_f: float, m_h: float, mu: float,
                d0: Optional[float], eps_bar: float) -> float:
    """Ceiling on the total iteration count: per-cycle cap times the serious
    bound."""
    _require_positive(lam=lam, eps_bar=eps_bar)
    branches = []
    if math.isfinite(m_h):
        branches.append(lam * (m_f + m_h))
    if d0 is not None:
        branches.append(_lam_tilde(lam, mu) * m_f + d0)
    if not branches:
        raise ValueError("need a finite composite Lipschitz constant or a "
                         "distance bound d0")
    if d0 is None:
        raise ValueError("the serious factor needs a distance bound d0")
    per_cycle = 2 * RATE_C * m_f * min(branches) / eps_bar + 1
    return per_cycle * bound_serious(d0, lam, mu, eps_bar)


def rate_bound(lam: float, m_f: float, m_h: float) -> float:
    """Ceiling on t_j (j - ell0) inside any null cycle, finite-M_h branch."""
    if not math.isfinite(m_h):
        raise ValueError("rate bound needs a finite composite Lipschitz constant")
    return RATE_C * lam * (m_f + m_h) * m_f


def bound_cscs(d0: float, lam: float, mu: float, m_f: float,
               eps_bar: float) -> int:
    """Iteration ceiling for the constant-stepsize subgradient method; the
    formula is valid for lam <= eps_bar / (4 M_f^2)."""
    _require_positive(lam=lam, eps_bar=eps_bar, d0=d0)
    first = d0 ** 2 / (lam * eps_bar)
    if mu == 0:
        return _floor_tol(first) + 1
    second = (1 + lam * mu) / (lam * mu) * math.log(mu * d0 ** 2 / eps_bar + 1)
    return _floor_tol(min(first, second)) + 1


def cscs_lambda_valid(lam: float, m_f: float, eps_bar: float) -> bool:
    return lam <= eps_bar / (4 * m_f ** 2)


@dataclass(frozen=True)
class LambdaRange:
    lo: float
    hi: float
    valid: bool
    note: Optional[str] = None

    def contains(self, lam: float) -> bool:
        return self.valid and self.lo <= lam <= self.hi

    def geometric_mid(self) -> float:
        return math.sqrt(self.lo * self.hi)


def lambda_ranges(kind: str, m_f: float, eps_bar: float,
                  d0: Optional[float] = None, m_h: float = 0.0,
                  mu: float = 0.0, diameter: Optional[float] = None,
                  c_big: float = 1.0, c_small: float = 1.0) -> LambdaRange:
    """Stepsize intervals on which the headline complexity bounds hold.

    kinds: ``strong`` (strongly convex composite), ``convex`` (mu = 0,
    finite m_h), ``pair`` (bounded domain with the given diameter)."""
    _require_positive(m_f=m_f, eps_bar=eps_bar)
    if kind == "strong":
        if d0 is None:
            raise ValueError("strong range needs d0")
        if c_big * m_f * d0 / eps_bar < 1:
            return LambdaRange(math.nan, math.nan, False,
                               f"requires C M_f d0/eps >= 1, got "
                               f"{c_big * m_f * d0 / eps_bar:.3g}")
        if mu > c_small * m_f / d0:
            return LambdaRange(math.nan, math.nan, False,
                               "requires mu <= C' M_f / d0")
        return LambdaRange(d0 / m_f, c_big * d0 ** 2 / eps_bar, True)
    if kind == "convex":
        if d0 is None:
            raise ValueError("convex range needs d0")
        if c_big * m_f * d0 / eps_bar < 1:
            return LambdaRange(math.nan, math.nan, False,
                               "requires C M_f d0/eps >= 1")
        if mu != 0:
            return LambdaRange(math.nan, math.nan, False, "requires mu = 0")
        if m_h > c_small * m_f:
            return LambdaRange(math.nan, math.nan, False,
                               "requires M_h <= C' M_f")
        return LambdaRange(eps_bar / (c_big * m_f ** 2),
                           c_big * d0 ** 2 / eps_bar, True)
    if kind == "pair":
        if diameter is None:
            raise ValueError("pair range needs the bounding-set diameter")
        if not math.isfinite(m_h):
            return LambdaRange(math.nan, math.nan, False,
                               "requires a finite composite Lipschitz constant")
        m = m_f + m_h
        return LambdaRange(eps_bar / (c_big * m * m_f),
                           c_big * diameter ** 2 / eps_bar, True)
    raise ValueError(f"unknown range kind {kind!r}")


def lower_bound(m_f: float, mu: float, r0: float, eps_bar: float) -> int:
    """Iteration floor that some instance with these constants forces on any
    method whose iterates stay in the span of observed subgradients."""
    _require_positive(r0=r0, eps_bar=eps_bar)
    if m_f < 0 or mu < 0:
        raise ValueError("m_f and mu must be nonnegative")
    first = m_f ** 2 * r0 ** 2 / (128 * eps_bar ** 2)
    second = m_f ** 2 / (8 * mu * eps_bar) if mu > 0 else math.inf
    return _floor_tol(min(first, second)) + 1


def _log1p_floor(t: float) -> float:
    """max{log t, 1}."""
    return max(math.log(t), 1.0) if t > 0 else 1.0


def comparator_convex(lam: float, m_f: float, d0: float,
                      eps_bar: float) -> float:
    """Classical descent-rule bundle bound for mu = 0 (raw formula value)."""
    _require_positive(lam=lam, eps_bar=eps_bar, d0=d0, m_f=m_f)
    return m_f ** 2 * (d0 + lam * m_f) ** 4 / (lam * eps_bar ** 3)


def comparator_strong(lam: float, m_f: float, mu: float, d0: float,
                      eps_bar: float, phi0_gap: float,
                      c_dprime: float = math.sqrt(2)) -> float:
    """Classical descent-rule bundle bound for mu > 0; needs the initial
    objective gap phi(x0) - phi* and 2 C'' lam mu <= 1."""
    _require_positive(lam=lam, eps_bar=eps_bar, d0=d0, m_f=m_f)
    if mu <= 0:
        raise ValueError("comparator_strong needs mu > 0")
    if 2 * c_dprime * lam * mu > 1:
        raise ValueError("comparator_strong requires 2 C'' lam mu <= 1")
    lead = m_f ** 2 / (lam * mu ** 2 * eps_bar) + d0 ** 2 / (lam * eps_bar)
    return lead * _log1p_floor(1 / (lam * mu)) \
        * _log1p_floor(phi0_gap / (lam * mu * eps_bar))


def bound_triple(lam: float, m_f: float, m_h: float, d0: float,
                 rho_hat: float, eps_hat: float) -> float:
    """Iteration ceiling to a certified (rho_hat, eps_hat)-solution triple
    when run with delta = eps_hat / 3 (raw formula value, O-constant 1)."""
    _require_positive(lam=lam, d0=d0, rho_hat=rho_hat, eps_hat=eps_hat)
    if not math.isfinite(m_h):
        raise ValueError("triple bound needs a finite composite Lipschitz "
                         "constant")
    m = m_f + m_h
    return max(m * m_f / rho_hat ** 2, m * m_f * d0 ** 2 / eps_hat ** 2) \
        + max(eps_hat / (lam * rho_hat ** 2), d0 ** 2 / (lam * eps_hat)) \
        + lam * m * m_f / eps_hat


@dataclass
class BoundReport:
    """Named bound values with the inputs used, for the run summary."""

    inputs: dict
    values: dict

    def as_dict(self) -> dict:
        return {"inputs": self.inputs, "values": self.values}


def bound_report(lam: float, m_f: float, m_h: float, mu: float,
                 d0: Optional[float], eps_bar: float) -> BoundReport:
    values = {}
    if d0 is not None:
        values["serious"] = bound_serious(d0, lam, mu, eps_bar)
        values["total"] = bound_total(lam, m_f, m_h, mu, d0, eps_bar)
        values["cscs"] = bound_cscs(d0, lam, mu, m_f, eps_bar)
        values["lower"] = lower_bound(m_f, mu, d0, eps_bar)
        if mu == 0:
            values["comparator_convex"] = comparator_convex(lam, m_f, d0, eps_bar)
    try:
        values["null_cycle"] = bound_null(lam, m_f, m_h, mu, d0, eps_bar)
    except ValueError:
        pass
    if math.isfinite(m_h):
        values["rate"] = rate_bound(lam, m_f, m_h)
    inputs = {"lam": lam, "m_f": m_f, "m_h": m_h, "mu": mu,
              "d0": d0, "eps_bar": eps_bar}
    return BoundReport(inputs=inputs, values=values)


def _require_positive(**named):
    for name, value in named.items():
        if not (value > 0):
            raise ValueError(f"{name} must be positive, got {value!r}")
