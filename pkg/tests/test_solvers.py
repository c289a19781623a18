import math

import numpy as np
import pytest

from bundlekit import (MaxAffineSpec, Policy, ProblemInstance, RpbConfig,
                       Termination, WorstCaseParams, cscs_run, evaluate_phi,
                       make_abs_oracle, make_composite, make_max_affine,
                       make_worst_case, rate_bound, reduction_check, rpb_run)


def abs_instance(x0, h=None, phi_star=0.0, x_star=0.0):
    if x_star is None:
        return ProblemInstance(f=make_abs_oracle(),
                               h=h or make_composite("zero"), x0=[x0])
    return ProblemInstance(f=make_abs_oracle(), h=h or make_composite("zero"),
                           x0=[x0], known_x_star=[x_star],
                           known_phi_star=phi_star)


def test_rpb_hand_trace_serious_first_step():
    tr = rpb_run(abs_instance(1.0), RpbConfig(lam=0.25, delta=0.05,
                                              max_iterations=1))
    r = tr.records[0]
    assert r.kind == "serious"
    assert r.x_j == pytest.approx([0.75])
    assert r.m_j == pytest.approx(0.875)
    assert r.x_tilde == pytest.approx([0.75])
    assert r.t_j == pytest.approx(0.0, abs=1e-12)


def test_rpb_hand_trace_null_then_serious():
    tr = rpb_run(abs_instance(0.2), RpbConfig(lam=1.0, delta=0.05,
                                              max_iterations=2))
    r1, r2 = tr.records
    assert r1.kind == "null"
    assert r1.x_j == pytest.approx([-0.8])
    assert r1.m_j == pytest.approx(-0.3)
    assert r1.x_tilde == pytest.approx([0.2])
    assert r1.t_j == pytest.approx(0.5)
    assert r2.kind == "serious"
    assert r2.x_j == pytest.approx([0.0], abs=1e-12)
    assert r2.m_j == pytest.approx(0.02)
    assert r2.t_j == pytest.approx(0.0, abs=1e-12)


def test_eps_solution_termination_and_exit():
    term = Termination("eps_solution", eps_bar=1e-3)
    tr = rpb_run(abs_instance(0.2),
                 RpbConfig(lam=1.0, delta=0.05, termination=term,
                           max_iterations=50))
    assert tr.converged and tr.termination_reason == "eps_solution"
    assert tr.iterations == 2


def test_worst_case_needs_at_least_k0_iterations():
    p = WorstCaseParams(m_f=1, mu=0, r0=1, eps_bar=1 / 16, n=8)
    inst = make_worst_case(p)
    term = Termination("eps_solution", eps_bar=p.eps_bar)
    tr = rpb_run(inst, RpbConfig(lam=1.0, delta=p.eps_bar / 2,
                                 termination=term, max_iterations=100))
    assert tr.converged
    assert tr.iterations >= 4  # k0 for this parameter set


def test_cscs_hand_steps():
    tr = cscs_run(abs_instance(1.0), 0.25, max_iterations=1)
    assert tr.records[0].x_j == pytest.approx([0.75])

    tr = cscs_run(abs_instance(0.1), 0.25, max_iterations=1)
    assert tr.records[0].x_j == pytest.approx([-0.15])


def test_cscs_prox_of_quadratic():
    f_zero = make_abs_oracle()
    # f = 0 via a single zero slope; simplest is a max-affine with zero rows
    from bundlekit import SubgradientOracle
    f0 = SubgradientOracle(eval=lambda x: 0.0,
                           subgrad=lambda x: np.zeros(1), lipschitz_bound=0.0)
    inst = ProblemInstance(f=f0, h=make_composite("quadratic", mu=1.0,
                                                  center=0.0), x0=[1.0])
    tr = cscs_run(inst, 1.0, max_iterations=1)
    assert tr.records[0].x_j == pytest.approx([0.5])


def test_serious_iff_tj_below_delta():
    tr = rpb_run(abs_instance(0.2), RpbConfig(lam=1.0, delta=0.05,
                                              max_iterations=20))
    for r in tr.records:
        assert (r.kind == "serious") == (r.t_j <= 0.05)


def test_descent_rule_variant_runs():
    cfg = RpbConfig(lam=0.5, delta=0.05, serious_rule="descent",
                    descent_gamma=0.5, descent_alpha=0.0,
                    max_iterations=30,
                    termination=Termination("eps_solution", eps_bar=1e-3))
    tr = rpb_run(abs_instance(1.0), cfg)
    assert tr.converged
    assert evaluate_phi(abs_instance(1.0), tr.best_point()) <= 1e-3


def test_reduction_check_formula():
    inst = abs_instance(1.0)  # M_f = 1, M_h = 0
    assert reduction_check(inst, 0.05, 0.1)[0]
    assert not reduction_check(inst, 0.06, 0.1)[0]
    inst_q = abs_instance(1.0, h=make_composite("quadratic", mu=1.0,
                                                center=0.0),
                          phi_star=None, x_star=None)
    ok, note = reduction_check(inst_q, 0.01, 0.1)
    assert not ok and "infinite" in note


def test_reduction_rpb_equals_cscs():
    spec = MaxAffineSpec(slopes=[[1.0, 0.2], [-0.5, 0.8], [0.1, -1.0]],
                         intercepts=[0.0, 0.1, -0.2])
    f = make_max_affine(spec)
    inst = ProblemInstance(f=f, h=make_composite("zero"),
                           x0=[1.0, -0.5])
    delta = 0.1
    m = f.lipschitz_bound
    lam = 0.9 * delta / (2 * m * m)
    assert reduction_check(inst, lam, delta)[0]
    cfg = RpbConfig(lam=lam, delta=delta, policy=Policy("lean"),
                    max_iterations=50)
    tr_rpb = rpb_run(inst, cfg)
    tr_cs = cscs_run(inst, lam, max_iterations=50)
    assert all(r.kind == "serious" for r in tr_rpb.records)
    for a, b in zip(tr_rpb.records, tr_cs.records):
        assert np.linalg.norm(a.x_j - b.x_j) \
            <= 1e-9 * (1 + np.linalg.norm(a.x_j))


def _cycles(trace):
    """Group records by prox-center id (one group per null cycle)."""
    groups = {}
    for r in trace.records:
        groups.setdefault(r.center_id, []).append(r)
    return groups


def test_null_cycle_monotonicity_and_rate():
    spec = MaxAffineSpec(slopes=[[0.9, 0.1], [-0.4, 0.7], [0.2, -0.8],
                                 [0.5, 0.5]],
                         intercepts=[0.0, 0.15, -0.1, 0.05])
    f = make_max_affine(spec)
    inst = ProblemInstance(f=f, h=make_composite("zero"), x0=[1.5, -1.0])
    lam, delta = 1.0, 1e-3
    tr = rpb_run(inst, RpbConfig(lam=lam, delta=delta, max_iterations=200))
    m_f = f.lipschitz_bound
    cap = rate_bound(lam, m_f, 0.0)
    lam_tilde = lam
    for ell0, recs in _cycles(tr).items():
        prev = None
        for r in recs:
            assert r.t_j >= -1e-12
            assert r.t_j * (r.j - ell0) <= cap + 1e-6
            if prev is not None:
                assert r.t_j <= prev.t_j + 1e-9
                assert r.m_j >= prev.m_j - 1e-9
                step = np.linalg.norm(r.x_j - prev.x_j)
                assert r.m_j - prev.m_j >= step ** 2 / (2 * lam_tilde) - 1e-9
            prev = r


def test_tj_bounded_by_step_to_previous():
    inst = abs_instance(1.3)
    tr = rpb_run(inst, RpbConfig(lam=0.7, delta=1e-4, max_iterations=60))
    m_f = 1.0
    prev_x = inst.x0
    for r in tr.records:
        assert r.t_j <= 2 * m_f * np.linalg.norm(r.x_j - prev_x) + 1e-9
        prev_x = r.x_j


def test_serious_history_invariants():
    inst = abs_instance(1.3)
    delta = 0.02
    lam = 0.5
    tr = rpb_run(inst, RpbConfig(lam=lam, delta=delta, max_iterations=80))
    assert tr.serious_j[0] == 0
    phis = [evaluate_phi(inst, z) for z in tr.serious_ztilde]
    for k in range(1, len(tr.serious_j)):
        # zhat is the best auxiliary iterate seen so far
        assert evaluate_phi(inst, tr.serious_zhat[k]) \
            == pytest.approx(min(phis[:k + 1]), abs=1e-12)
        # delta_k plus the displacement term stays below delta
        zt, zprev = tr.serious_ztilde[k], tr.serious_z[k - 1]
        disp = float(np.dot(zt - zprev, zt - zprev)) / (2 * lam)
        assert tr.serious_delta[k - 1] + disp <= delta + 1e-9
        assert tr.serious_delta[k - 1] <= delta + 1e-9
        # ||z~_k - z_k||^2 <= 2 lam delta
        d = tr.serious_ztilde[k] - tr.serious_z[k]
        assert float(np.dot(d, d)) <= 2 * lam * delta + 1e-9


def test_phi_prox_of_incumbent_nonincreasing_within_cycle():
    inst = abs_instance(1.3)
    lam = 1.0
    tr = rpb_run(inst, RpbConfig(lam=lam, delta=1e-4, max_iterations=60))
    centers = {r.j: r.x_j for r in tr.records}
    centers[0] = inst.x0
    for ell0, recs in _cycles(tr).items():
        center = centers[ell0]
        prev = None
        for r in recs:
            d = r.x_tilde - center
            val = r.phi_xtilde + float(np.dot(d, d)) / (2 * lam)
            if prev is not None:
                assert val <= prev + 1e-9
            prev = val


def test_oracle_accounting():
    tr = rpb_run(abs_instance(1.0), RpbConfig(lam=0.25, delta=0.05,
                                              max_iterations=7))
    assert tr.oracle_f_calls == 2 * tr.iterations
    assert tr.oracle_g_calls == tr.iterations
    assert tr.subproblem_solves == tr.iterations


def test_bundle_policies_reach_same_answer():
    spec = MaxAffineSpec(slopes=[[1.0, 0.0], [0.0, 1.0], [-0.7, -0.7]],
                         intercepts=[0.0, 0.0, 0.0])
    inst = ProblemInstance(f=make_max_affine(spec), h=make_composite("zero"),
                           x0=[2.0, 1.0])
    finals = []
    for policy in ("lean", "keep_all", "cap(3)"):
        cfg = RpbConfig(lam=1.0, delta=1e-4, policy=Policy.parse(policy),
                        max_iterations=300)
        tr = rpb_run(inst, cfg)
        finals.append(evaluate_phi(inst, tr.best_point()))
    best = min(finals)
    for v in finals:
        assert v <= best + 1e-3


def test_max_iterations_flagging():
    term = Termination("eps_solution", eps_bar=1e-12)
    tr = rpb_run(abs_instance(1.0), RpbConfig(lam=0.25, delta=0.05,
                                              termination=term,
                                              max_iterations=3))
    assert not tr.converged
    assert tr.termination_reason == "max_iterations"


def test_config_validation():
    with pytest.raises(ValueError):
        RpbConfig(lam=-1.0, delta=0.1)
    with pytest.raises(ValueError):
        RpbConfig(lam=1.0, delta=0.1, serious_rule="descent",
                  descent_gamma=1.5)
    with pytest.raises(ValueError):
        Termination("eps_solution")
