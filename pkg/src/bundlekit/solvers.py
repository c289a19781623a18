"""Outer loops: the relaxed prox bundle method, the constant-stepsize
composite subgradient baseline, and the descent-rule serious/null variant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bundle import Bundle, Policy, active_set, make_cut, update_null, update_serious
from .problem import ProblemInstance, Tolerances, as_vector, evaluate_phi
from . import subproblem
from . import bounds as _bounds


@dataclass(frozen=True)
class Termination:
    """Stopping rule checked at serious steps.

    kinds:
      eps_solution(eps_bar)        phi(zhat) - phi* <= eps_bar (needs known phi*)
      triple(rho_hat, eps_hat)     certified (rho_hat, eps_hat)-solution triple
      pair(eps_bar, bounding_set)  certified eps_bar-solution pair over a set
      max_iterations               run to the iteration cap only
    """

    kind: str
    eps_bar: Optional[float] = None
    rho_hat: Optional[float] = None
    eps_hat: Optional[float] = None
    bounding_set: Optional[object] = None

    def __post_init__(self):
        if self.kind not in ("eps_solution", "triple", "pair", "max_iterations"):
            raise ValueError(f"unknown termination kind {self.kind!r}")
        if self.kind == "eps_solution" and (self.eps_bar is None or self.eps_bar <= 0):
            raise ValueError("eps_solution needs eps_bar > 0")
        if self.kind == "triple" and (not self.rho_hat or not self.eps_hat
                                      or self.rho_hat <= 0 or self.eps_hat <= 0):
            raise ValueError("triple needs rho_hat > 0 and eps_hat > 0")
        if self.kind == "pair" and (self.eps_bar is None or self.eps_bar <= 0
                                    or self.bounding_set is None):
            raise ValueError("pair needs eps_bar > 0 and a bounding set")


@dataclass(frozen=True)
class RpbConfig:
    lam: float
    delta: float
    policy: Policy = field(default_factory=lambda: Policy("lean"))
    termination: Termination = field(
        default_factory=lambda: Termination("max_iterations"))
    max_iterations: int = 1000
    serious_rule: str = "rpb_tj"  # or "descent"
    descent_gamma: float = 0.5
    descent_alpha: float = 0.0
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        if self.lam <= 0 or self.delta <= 0:
            raise ValueError("lam and delta must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.serious_rule not in ("rpb_tj", "descent"):
            raise ValueError(f"unknown serious rule {self.serious_rule!r}")
        if self.serious_rule == "descent":
            if not (0 < self.descent_gamma < 1):
                raise ValueError("descent gamma must be in (0, 1)")
            if not (0 <= self.descent_alpha <= 2):
                raise ValueError("descent alpha must be in [0, 2]")


@dataclass
class IterationRecord:
    j: int
    kind: str  # "serious" | "null"
    x_j: np.ndarray
    x_tilde: np.ndarray
    t_j: float
    m_j: float
    phi_xj: float
    phi_xtilde: float
    phi_zhat: float
    bundle_size: int
    subproblem_gap: float
    subproblem_iters: int
    serious_count: int
    center_id: int
    oracle_f_calls: int
    oracle_g_calls: int


@dataclass
class RunTrace:
    """Complete record of one solver run."""

    records: list = field(default_factory=list)
    serious_j: list = field(default_factory=list)      # j_k for k = 0, 1, ...
    serious_z: list = field(default_factory=list)      # z_k = x_{j_k}
    serious_ztilde: list = field(default_factory=list)  # z~_k
    serious_zhat: list = field(default_factory=list)   # zhat_k
    serious_delta: list = field(default_factory=list)  # delta_k, k >= 1
    oracle_f_calls: int = 0
    oracle_g_calls: int = 0
    subproblem_solves: int = 0
    converged: bool = False
    termination_reason: str = "max_iterations"
    lam: float = 0.0
    delta: float = math.nan
    solver: str = "rpb"

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def serious_count(self) -> int:
        return len(self.serious_j) - 1  # j = 0 not counted as an iteration

    def best_point(self) -> np.ndarray:
        return self.serious_zhat[-1]

    def null_cycles(self):
        """Lengths of the null runs between consecutive serious indices,
        as (ell0, ell1) pairs of iteration indices (ell1 may be the cap)."""
        out = []
        js = self.serious_j + ([self.records[-1].j]
                               if self.records and self.records[-1].kind == "null"
                               else [])
        for a, b in zip(js, js[1:]):
            out.append((a, b))
        return out


def _phi_prox(phi_val: float, u, center, lam: float) -> float:
    d = as_vector(u) - center
    return phi_val + float(d @ d) / (2 * lam)


def _check_termination(term: Termination, instance: ProblemInstance,
                       trace: RunTrace) -> Optional[str]:
    k = trace.serious_count
    if term.kind == "eps_solution":
        if instance.known_phi_star is None:
            raise ValueError("eps_solution termination needs a known optimum")
        zhat = trace.serious_zhat[-1]
        if evaluate_phi(instance, zhat) - instance.known_phi_star <= term.eps_bar:
            return "eps_solution"
        return None
    if term.kind in ("triple", "pair") and k >= 1:
        triple = _bounds.certificate_triple(trace, k, trace.lam)
        if term.kind == "triple":
            if (np.linalg.norm(triple.v) <= term.rho_hat
                    and triple.eps <= term.eps_hat):
                return "triple"
            return None
        pair = _bounds.certificate_pair(triple, term.bounding_set)
        if pair.eta <= term.eps_bar:
            return "pair"
        return None
    return None


def serious_test(config: RpbConfig, t_j: float, phi_center: float,
                 phi_xj: float, f_xj: float, model_xj: float,
                 step_sq: float) -> bool:
    """Serious/null decision: threshold on t_j, or the descent condition."""
    if config.serious_rule == "rpb_tj":
        return t_j <= config.delta
    g = config.descent_gamma
    rhs = (g / (1 - g)) * (f_xj - model_xj
                           - (config.descent_alpha / (2 * config.lam)) * step_sq)
    return phi_center - phi_xj >= rhs


def rpb_run(instance: ProblemInstance, config: RpbConfig) -> RunTrace:
    """Run the relaxed prox bundle method and return the full trace.

    Iteration j solves the prox bundle subproblem at the current center,
    keeps the better of the new point and the previous incumbent under the
    prox-regularized objective, and moves the center when the relaxed gap
    t_j falls below delta (or the descent condition fires)."""
    lam = config.lam
    f, h = instance.f, instance.h
    x0 = instance.x0
    scale = instance.scale()

    trace = RunTrace(lam=lam, delta=config.delta, solver="rpb")

    center = x0.copy()
    center_id = 0
    phi_center = evaluate_phi(instance, center)

    x_tilde = x0.copy()
    phi_xtilde = phi_center  # phi(x_tilde), quadratic term tracked separately
    zhat = x0.copy()
    phi_zhat = phi_center

    trace.serious_j.append(0)
    trace.serious_z.append(x0.copy())
    trace.serious_ztilde.append(x0.copy())
    trace.serious_zhat.append(zhat.copy())

    next_cut_id = 0
    f_x0 = float(f.eval(x0))
    bundle = Bundle(cuts=[make_cut(x0, f_x0, f.subgrad(x0), next_cut_id)],
                    policy=config.policy)
    next_cut_id += 1
    warm = None

    for j in range(1, config.max_iterations + 1):
        cycle_center_id = center_id
        sol = subproblem.solve(bundle, h, center, lam,
                               tol=config.tolerances, warm_start=warm,
                               scale=scale)
        trace.subproblem_solves += 1
        x_j = sol.x
        m_j = sol.m
        warm = dict(zip(bundle.ids, sol.weights))

        f_xj = float(f.eval(x_j))
        phi_xj = f_xj + float(h.eval(x_j))
        # nominal oracle accounting: two zeroth-order calls and one
        # subgradient call per iteration
        trace.oracle_f_calls += 2
        trace.oracle_g_calls += 1

        cand_new = _phi_prox(phi_xj, x_j, center, lam)
        cand_old = _phi_prox(phi_xtilde, x_tilde, center, lam)
        if cand_new <= cand_old:
            x_tilde, phi_xtilde, phi_prox_tilde = x_j, phi_xj, cand_new
        else:
            phi_prox_tilde = cand_old
        t_j = phi_prox_tilde - m_j

        step_sq = float(np.dot(x_j - center, x_j - center))
        g_xj = f.subgrad(x_j)
        model_xj = float(np.max(bundle.arrays()[0] @ x_j + bundle.arrays()[1]))
        is_serious = serious_test(config, t_j, phi_center, phi_xj,
                                  f_xj, model_xj, step_sq)

        new_cut = make_cut(x_j, f_xj, g_xj, next_cut_id)
        next_cut_id += 1

        if is_serious:
            k = trace.serious_count + 1
            trace.serious_j.append(j)
            trace.serious_z.append(x_j.copy())
            trace.serious_ztilde.append(x_tilde.copy())
            # delta_k = phi(z~_k) - m_{j_k}; the subproblem value already
            # contains the model value at z_k plus the prox term
            trace.serious_delta.append(phi_xtilde - m_j)
            if phi_xtilde < phi_zhat:
                zhat, phi_zhat = x_tilde.copy(), phi_xtilde
            trace.serious_zhat.append(zhat.copy())
            bundle = update_serious(bundle, new_cut)
            center = x_j.copy()
            center_id = j
            phi_center = phi_xj
            warm = {new_cut.id: 1.0}
            kind = "serious"
        else:
            act = active_set(bundle, x_j, model_xj, config.tolerances)
            bundle = update_null(bundle, act, new_cut)
            kind = "null"

        trace.records.append(IterationRecord(
            j=j, kind=kind, x_j=x_j.copy(), x_tilde=x_tilde.copy(),
            t_j=t_j, m_j=m_j, phi_xj=phi_xj, phi_xtilde=phi_xtilde,
            phi_zhat=phi_zhat, bundle_size=len(bundle),
            subproblem_gap=sol.gap, subproblem_iters=sol.iterations,
            serious_count=trace.serious_count, center_id=cycle_center_id,
            oracle_f_calls=trace.oracle_f_calls,
            oracle_g_calls=trace.oracle_g_calls))

        if is_serious:
            reason = _check_termination(config.termination, instance, trace)
            if reason is not None:
                trace.converged = True
                trace.termination_reason = reason
                return trace

    trace.termination_reason = "max_iterations"
    trace.converged = config.termination.kind == "max_iterations"
    return trace


def cscs_run(instance: ProblemInstance, lam: float,
             termination: Termination = Termination("max_iterations"),
             max_iterations: int = 1000) -> RunTrace:
    """Constant-stepsize composite subgradient method.

    Each step takes the prox of a single-linearization model; every iteration
    counts as serious, the incumbent is the running best under phi."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    f, h = instance.f, instance.h

    trace = RunTrace(lam=lam, solver="cscs")
    x = instance.x0.copy()
    phi_x = evaluate_phi(instance, x)
    zhat, phi_zhat = x.copy(), phi_x

    trace.serious_j.append(0)
    trace.serious_z.append(x.copy())
    trace.serious_ztilde.append(x.copy())
    trace.serious_zhat.append(zhat.copy())

    for j in range(1, max_iterations + 1):
        f_x = float(f.eval(x))
        g = f.subgrad(x)
        x_prev = x
        x = as_vector(h.prox(lam, x - lam * g))
        # subproblem value of the single-cut model at the new point
        step = x - x_prev
        m_j = f_x + float(g @ step) + float(h.eval(x)) \
            + float(step @ step) / (2 * lam)
        phi_x = evaluate_phi(instance, x)
        t_j = _phi_prox(phi_x, x, x_prev, lam) - m_j

        trace.oracle_f_calls += 2
        trace.oracle_g_calls += 1

        trace.serious_j.append(j)
        trace.serious_z.append(x.copy())
        trace.serious_ztilde.append(x.copy())
        trace.serious_delta.append(phi_x - m_j)
        if phi_x < phi_zhat:
            zhat, phi_zhat = x.copy(), phi_x
        trace.serious_zhat.append(zhat.copy())

        trace.records.append(IterationRecord(
            j=j, kind="serious", x_j=x.copy(), x_tilde=x.copy(),
            t_j=t_j, m_j=m_j, phi_xj=phi_x, phi_xtilde=phi_x,
            phi_zhat=phi_zhat, bundle_size=1, subproblem_gap=0.0,
            subproblem_iters=0, serious_count=j, center_id=j - 1,
            oracle_f_calls=trace.oracle_f_calls,
            oracle_g_calls=trace.oracle_g_calls))

        reason = _check_termination(termination, instance, trace)
        if reason is not None:
            trace.converged = True
            trace.termination_reason = reason
            return trace

    trace.termination_reason = "max_iterations"
    trace.converged = termination.kind == "max_iterations"
    return trace


def reduction_check(instance: ProblemInstance, lam: float, delta: float):
    """True when lam <= delta / (2 (M_f + M_h) M_f), which forces every
    iteration to be serious; with the lean policy the bundle method then
    coincides with the composite subgradient method."""
    m_f = instance.f.lipschitz_bound
    m_h = instance.h.lipschitz
    if not math.isfinite(m_h):
        return False, "M_h is infinite, condition unverifiable"
    m = m_f + m_h
    if m * m_f == 0:
        return True, "M * M_f = 0, condition holds vacuously"
    return lam <= delta / (2 * m * m_f), None
