"""Problem abstraction: first-order oracles, prox-capable composite terms,
tolerances, and sampling-based instance validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


def as_vector(x) -> np.ndarray:
    """Coerce to a finite 1-D float array."""
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D point, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("point has non-finite entries")
    return v


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances; relative ones are scaled by 1 + |reference value|."""

    subproblem_gap: float = 1e-10
    active_set_rel: float = 1e-9
    certificate_slack: float = 1e-9

    def __post_init__(self):
        for name in ("subproblem_gap", "active_set_rel", "certificate_slack"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class SubgradientOracle:
    """Value/subgradient oracle for a convex function with bounded subgradients.

    ``subgrad(x)`` must return one element of the subdifferential at ``x``,
    deterministically, with norm at most ``lipschitz_bound``.
    """

    eval: Callable[[np.ndarray], float]
    subgrad: Callable[[np.ndarray], np.ndarray]
    lipschitz_bound: float


@dataclass(frozen=True)
class CompositeTerm:
    """Prox-friendly convex term, possibly +inf outside its domain.

    ``prox(alpha, z)`` returns argmin_u { h(u) + ||u - z||^2 / (2 alpha) } and
    must land in the domain.  ``modulus`` is the strong-convexity constant,
    ``lipschitz`` the Lipschitz constant on the domain (may be ``inf``).
    ``kind``/``params`` identify closed-form structure for KKT residuals.
    """

    eval: Callable[[np.ndarray], float]
    prox: Callable[[float, np.ndarray], np.ndarray]
    in_domain: Callable[[np.ndarray], bool]
    modulus: float = 0.0
    lipschitz: float = math.inf
    kind: str = "custom"
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ProblemInstance:
    """A composite problem min f(x) + h(x) with starting point x0 in dom h."""

    f: SubgradientOracle
    h: CompositeTerm
    x0: np.ndarray
    known_x_star: Optional[np.ndarray] = None
    known_phi_star: Optional[float] = None
    known_d0_bound: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "x0", as_vector(self.x0))
        if not self.h.in_domain(self.x0):
            raise ValueError("x0 is outside dom h")
        if self.known_x_star is not None:
            object.__setattr__(self, "known_x_star", as_vector(self.known_x_star))
            if self.known_phi_star is not None:
                val = evaluate_phi(self, self.known_x_star)
                if abs(val - self.known_phi_star) > 1e-10 * (1 + abs(val)):
                    raise ValueError(
                        "known optimum is inconsistent: "
                        f"phi(x*)={val!r} vs declared {self.known_phi_star!r}"
                    )
        if self.known_d0_bound is not None and self.known_d0_bound <= 0:
            raise ValueError("known_d0_bound must be positive")

    @property
    def dim(self) -> int:
        return self.x0.size

    def scale(self) -> float:
        """Problem scale used for relative tolerances: 1 + |phi(x0)|."""
        return 1.0 + abs(evaluate_phi(self, self.x0))


def evaluate_phi(instance: ProblemInstance, x) -> float:
    """Objective f(x) + h(x); +inf outside dom h."""
    x = as_vector(x)
    if x.size != instance.dim:
        raise ValueError(f"dimension mismatch: {x.size} vs {instance.dim}")
    if not instance.h.in_domain(x):
        return math.inf
    return float(instance.f.eval(x)) + float(instance.h.eval(x))


@dataclass
class ValidationReport:
    passed: bool
    samples: int
    checks: dict
    first_violation: Optional[str] = None

    def __bool__(self):
        return self.passed


def validate_instance(instance: ProblemInstance, samples: int = 100,
                      seed: int = 0) -> ValidationReport:
    """Spot-check the instance against its declared constants.

    Draws sample points in dom h (prox images of Gaussian points around x0),
    then checks the subgradient norm bound, the subgradient inequality,
    mu-convexity of h, and Lipschitz continuity of h on sampled pairs.
    Violations are recorded, not raised.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    n = instance.dim
    f, h = instance.f, instance.h
    spread = 1.0 + np.linalg.norm(instance.x0)

    pts = [instance.x0]
    for _ in range(samples):
        z = instance.x0 + spread * rng.standard_normal(n)
        pts.append(h.prox(1.0, z))
    pts = np.asarray(pts)

    checks = {}
    first = None

    def fail(name, msg):
        nonlocal first
        checks[name] = False
        if first is None:
            first = f"{name}: {msg}"

    # subgradient norm bound
    checks["subgrad_norm"] = True
    for x in pts:
        g = f.subgrad(x)
        if np.linalg.norm(g) > f.lipschitz_bound + 1e-12:
            fail("subgrad_norm",
                 f"||f'(x)||={np.linalg.norm(g):.6g} > M_f={f.lipschitz_bound:.6g} at x={x}")
            break

    # subgradient inequality f(u) >= f(x) + <f'(x), u - x>
    checks["subgrad_inequality"] = True
    for _ in range(samples):
        i, j = rng.integers(0, len(pts), size=2)
        x, u = pts[i], pts[j]
        fx = f.eval(x)
        lhs = f.eval(u)
        rhs = fx + float(f.subgrad(x) @ (u - x))
        if lhs < rhs - 1e-12 * (1 + abs(fx)):
            fail("subgrad_inequality", f"violated by {rhs - lhs:.3g} at pair ({i},{j})")
            break

    # mu-convexity of h via the midpoint inequality
    checks["h_strong_convexity"] = True
    mu = h.modulus
    for _ in range(samples):
        i, j = rng.integers(0, len(pts), size=2)
        u, v = pts[i], pts[j]
        mid = 0.5 * (u + v)
        if not h.in_domain(mid):
            continue
        lhs = h.eval(mid)
        rhs = 0.5 * h.eval(u) + 0.5 * h.eval(v) - (mu / 8.0) * float(np.dot(u - v, u - v))
        if lhs > rhs + 1e-10 * (1 + abs(rhs)):
            fail("h_strong_convexity", f"midpoint inequality violated by {lhs - rhs:.3g}")
            break

    # Lipschitz continuity of h on sampled pairs
    checks["h_lipschitz"] = True
    if math.isfinite(h.lipschitz):
        for _ in range(samples):
            i, j = rng.integers(0, len(pts), size=2)
            u, v = pts[i], pts[j]
            gap = abs(h.eval(u) - h.eval(v))
            lim = h.lipschitz * np.linalg.norm(u - v)
            if gap > lim + 1e-10 * (1 + lim):
                fail("h_lipschitz", f"|h(u)-h(v)|={gap:.6g} > M_h||u-v||={lim:.6g}")
                break

    return ValidationReport(passed=all(checks.values()), samples=samples,
                            checks=checks, first_violation=first)
