import numpy as np
import pytest
from scipy.linalg import expm

from oracle_rk4 import random_system, rk4_relay_oracle
from relaydelay.core import GridFunction, HistoryFunction, validate_params
from relaydelay.integrator import (BranchFlow, flow_psi, hit_time, integrate,
                                   step_fixed_branch)

T = float(np.log(3.0))


def s1():
    return validate_params(N=1, A=[[0.0]], B=[[1.0]], k=[2.0], M=[1.0],
                           alpha=-1.0, beta=1.0, T=T, p=1.5, s=0.5, sigma=T / 3)


def s1_history():
    phi = GridFunction.from_callable(
        lambda th: np.where(th < -T, 2.0 - 3.0 * np.exp(-(th + 2 * T)),
                            -2.0 + 3.0 * np.exp(-(th + T)))[:, None],
        -2 * T, 0.0, breakpoints=[-T])
    return HistoryFunction(phi, np.array([-1.0]))


def test_step_s1_closed_form():
    p = s1()
    sol = step_fixed_branch(BranchFlow(p, +1),
                            HistoryFunction.constant([-1.0], p.delay),
                            [-1.0], T)
    exact = 2.0 - 3.0 * np.exp(-sol.ts)
    assert np.max(np.abs(sol.vals[:, 0] - exact)) < 1e-12
    assert sol(T)[0] == pytest.approx(1.0, abs=1e-12)
    assert sol(0.31)[0] == pytest.approx(2.0 - 3.0 * np.exp(-0.31), abs=1e-12)


def test_step_homogeneous_matches_expm():
    p = validate_params(N=2, A=np.zeros((2, 2)), B=[[1.0, 0.3], [-0.2, 0.5]],
                        k=[0, 0], M=[1.0, 0.0], alpha=-1, beta=1, T=1.0,
                        p=1.5, s=0.5, sigma=1 / 3)
    x0 = np.array([0.5, 0.7])
    sol = BranchFlow(p, +1).solve(HistoryFunction.constant([0, 0], 2.0), x0, 1.7)
    exact = np.stack([expm(-np.asarray(p.B) * t) @ x0 for t in sol.ts])
    assert np.max(np.abs(sol.vals - exact)) < 1e-12


def test_step_pure_integration():
    p = validate_params(N=2, A=np.zeros((2, 2)), B=np.zeros((2, 2)),
                        k=[1.0, -2.0], M=[1.0, 0.0], alpha=-10, beta=10,
                        T=1.0, p=1.5, s=0.5, sigma=1 / 3)
    sol = BranchFlow(p, +1).solve(HistoryFunction.constant([0, 0], 2.0),
                                  [0, 0], 2.0)
    assert np.max(np.abs(sol.vals - np.outer(sol.ts, [1.0, -2.0]))) < 1e-13


def test_step_rejects_bad_horizon():
    p = s1()
    fl = BranchFlow(p, +1)
    h = HistoryFunction.constant([0.0], p.delay)
    with pytest.raises(ValueError):
        fl.solve(h, [0.0], 2 * p.delay)
    with pytest.raises(ValueError):
        step_fixed_branch(fl, h, [0.0], 0.0)


def test_step_consistency_semigroup():
    # step to t2 equals step to t1 then a rebased step to t2 - t1
    rng = np.random.default_rng(5)
    p = random_system(rng, validate_params)
    hist = HistoryFunction(
        GridFunction.from_callable(
            lambda t: np.stack([np.sin(3 * t)] * p.N, axis=1),
            -p.delay, 0.0),
        rng.normal(size=p.N))
    fl = BranchFlow(p, +1)
    t1, t2 = 0.6 * p.T, 1.5 * p.T
    sol_direct = fl.solve(hist, hist.x_right, t2)
    mid = flow_psi(fl, hist, hist.x_right, t1)
    sol_chain = fl.solve(mid, mid.x_right, t2 - t1)
    assert np.max(np.abs(sol_direct(t2) - sol_chain(t2 - t1))) < 1e-9


def test_flow_psi_s1_reaches_beta_section():
    p = s1()
    hb = flow_psi(BranchFlow(p, +1), s1_history(), [-1.0], T)
    assert float(p.M @ hb.x_right) == pytest.approx(1.0, abs=1e-10)
    # shifted part agrees with phi_beta(theta) = u_per(theta + 3T)
    th = np.linspace(-2 * T + 1e-6, -1e-6, 37)
    u_per = lambda t: np.where(np.mod(t, 2 * T) < T,
                               2.0 - 3.0 * np.exp(-np.mod(t, 2 * T)),
                               -2.0 + 3.0 * np.exp(-(np.mod(t, 2 * T) - T)))
    assert np.max(np.abs(hb.phi(th)[:, 0] - u_per(th + 3 * T))) < 1e-9


def test_flow_psi_zero_fixed_point():
    p = validate_params(N=1, A=[[0.3]], B=[[1.0]], k=[0.0], M=[1.0],
                        alpha=-1, beta=1, T=1.0, p=1.5, s=0.5, sigma=1 / 3)
    h = HistoryFunction.constant([0.0], 2.0)
    out = flow_psi(BranchFlow(p, +1), h, [0.0], 0.7)
    th = np.linspace(-1.9, -0.01, 23)
    assert np.max(np.abs(out.phi(th))) < 1e-13
    assert np.max(np.abs(out.x_right)) < 1e-13


def test_flow_psi_shift_property():
    p = s1()
    hist = s1_history()
    t = 0.4
    out = flow_psi(BranchFlow(p, +1), hist, [-1.0], t)
    th = np.linspace(-2 * T + 1e-9, -t - 1e-9, 29)
    assert np.max(np.abs(out.phi(th) - hist.phi(th + t))) < 1e-10


def test_integrate_s1_two_switchings():
    p = s1()
    traj = integrate(p, s1_history(), horizon=2 * T)
    assert len(traj.switching_times) == 2
    assert traj.switching_times[0] == pytest.approx(T, abs=1e-10)
    assert traj.switching_times[1] == pytest.approx(2 * T, abs=1e-10)
    assert traj.pieces[-1].relay == -1
    assert not traj.grazing and not traj.accumulation_suspected


def test_integrate_decay_no_switchings():
    p = validate_params(N=1, A=[[0.0]], B=[[1.0]], k=[0.0], M=[1.0],
                        alpha=-1, beta=1, T=1.0, p=1.5, s=0.5, sigma=1 / 3)
    traj = integrate(p, HistoryFunction.constant([0.0], 2.0), horizon=10.0)
    assert traj.switching_times == ()
    ts, vals, relay = traj.sample()
    assert np.max(np.abs(vals)) < 1e-12
    assert np.all(relay == 1)


def test_integrate_s1_from_zero_first_switch_ln2():
    p = s1()
    traj = integrate(p, HistoryFunction.constant([0.0], p.delay), horizon=2.0)
    assert traj.switching_times[0] == pytest.approx(np.log(2.0), abs=1e-10)


def test_hit_time_s1_both_sides():
    p = s1()
    h = s1_history()
    t_beta = hit_time(BranchFlow(p, +1), h, [-1.0], "beta")
    assert t_beta == pytest.approx(T, abs=1e-11)
    # mirrored: from (phi_beta, 1) the minus branch hits alpha after T
    hb = flow_psi(BranchFlow(p, +1), h, [-1.0], T)
    t_alpha = hit_time(BranchFlow(p, -1), hb, hb.x_right, "alpha")
    assert t_alpha == pytest.approx(T, abs=1e-10)


def test_hit_time_infinite_in_dead_band():
    p = validate_params(N=1, A=[[0.0]], B=[[1.0]], k=[0.0], M=[1.0],
                        alpha=-1, beta=1, T=1.0, p=1.5, s=0.5, sigma=1 / 3)
    t = hit_time(BranchFlow(p, +1), HistoryFunction.constant([0.5], 2.0),
                 [0.5], "beta")
    assert np.isinf(t)


def test_hit_time_precondition():
    p = s1()
    h = HistoryFunction.constant([2.0], p.delay)
    with pytest.raises(ValueError):
        hit_time(BranchFlow(p, +1), h, [2.0], "beta")   # M x >= beta
    with pytest.raises(ValueError):
        hit_time(BranchFlow(p, -1), h, [-2.0], "alpha")  # M x <= alpha


def test_oracle_equivalence_small_sample():
    rng = np.random.default_rng(99)
    for _ in range(4):
        p = random_system(rng, validate_params)
        c = rng.normal(size=(2, p.N))
        hist_fn = lambda t: c[0] * np.sin(t) + c[1] * np.cos(2 * t) + 0.1
        x0 = rng.normal(size=p.N)
        phi = GridFunction.from_callable(
            lambda t: np.stack([hist_fn(ti) for ti in np.atleast_1d(t)]),
            -p.delay, 0.0)
        traj = integrate(p, HistoryFunction(phi, x0), horizon=4 * p.T)
        dense, sw_o = rk4_relay_oracle(p, hist_fn, x0, 4 * p.T)
        assert len(traj.switching_times) == len(sw_o)
        for piece in traj.pieces:
            for t, v in zip(piece.ts[::8], piece.vals[::8]):
                assert np.max(np.abs(v - dense(min(t, 4 * p.T)))) < 1e-6


def test_lipschitz_dependence_on_initial_data():
    rng = np.random.default_rng(11)
    p = random_system(rng, validate_params)
    base_fn = lambda t: np.stack([np.sin(t)] * p.N, axis=1)
    phi = GridFunction.from_callable(base_fn, -p.delay, 0.0)
    x0 = rng.normal(size=p.N)
    fl = BranchFlow(p, +1)
    t_grid = np.linspace(0.05, 1.4 * p.T, 12)
    base = fl.solve(HistoryFunction(phi, x0), x0, 1.5 * p.T)
    ratios = []
    for _ in range(6):
        c = rng.normal(size=p.N)
        size = rng.uniform(1e-4, 1e-3)
        nu = GridFunction.from_callable(
            lambda t: np.stack([np.cos(2 * t)] * p.N, axis=1) * c, -p.delay, 0.0)
        y = rng.normal(size=p.N) * size
        pert = fl.solve(HistoryFunction(phi + size * nu, x0 + y), x0 + y,
                        1.5 * p.T)
        num = max(np.max(np.abs(pert(t) - base(t))) for t in t_grid)
        den = size * (np.max(np.abs(c)) + 1.0) + np.max(np.abs(y))
        ratios.append(num / den)
    assert max(ratios) < 50.0  # an empirically bounded Lipschitz constant


def test_switching_separation():
    p = s1()
    traj = integrate(p, s1_history(), horizon=6 * T)
    sw = np.asarray(traj.switching_times)
    assert np.all(np.diff(sw) > 1e-6)
