import numpy as np
import pytest

import relaydelay.norms as N
from relaydelay.core import GridFunction
from relaydelay.norms import (LinComb, appendix_probe, estimate_order,
                              fractional_norm, fractional_seminorm, lp_norm,
                              w1p_norm)

P, S = 1.5, 0.5


def test_lp_constant_and_linear():
    assert lp_norm(lambda t: 0 * t + 3.0, (0, 1), P) == pytest.approx(3.0)
    # ||t||_{L_1.5(0,1)} = (1/(p+1))^{1/p}
    assert lp_norm(lambda t: t, (0, 1), P) == pytest.approx(
        (1.0 / 2.5) ** (1 / 1.5), abs=1e-7)
    # vector constant: |c| * length^{1/p}
    g = GridFunction.constant([2.0, 0.0, 0.0], 0.0, 2.0)
    assert lp_norm(g, (0, 2), P) == pytest.approx(2.0 * 2.0 ** (1 / 1.5),
                                                  abs=1e-10)


def test_w1p_norm():
    g = GridFunction.from_callable(lambda t: np.sin(t)[:, None], 0.0, 1.0)
    expect = lp_norm(np.sin, (0, 1), P) + lp_norm(np.cos, (0, 1), P)
    assert w1p_norm(g, (0, 1), P) == pytest.approx(expect, abs=1e-6)


def test_fractional_norm_linear_closed_form():
    # seminorm^p = 2/((p-sp)(p-sp+1)) for f(t) = t on (0, 1)
    exact = (32.0 / 21.0) ** (1 / P) + (1.0 / 2.5) ** (1 / P)
    val = fractional_norm(lambda t: t, (0.0, 1.0), P, S)
    assert val == pytest.approx(exact, abs=1e-6)


def test_fractional_constant_has_zero_seminorm():
    assert fractional_seminorm(lambda t: 0 * t + 4.0, (0, 1), P, S) == 0.0
    assert fractional_norm(lambda t: 0 * t + 4.0, (0, 1), P, S) == \
        pytest.approx(4.0)


def test_fractional_step_function_finite_and_stable():
    step = lambda t: np.where(t < 0.5, 0.0, 1.0)
    # closed form: J^p = 2 [ int_0^{1/2} u^{-3/4} du + int_{1/2}^1 (1-u) u^{-7/4} du ]
    exact = 3.75365281999547
    vals = [fractional_seminorm(step, (0, 1), P, S, breakpoints=[0.5],
                                n_cells=nc) for nc in (48, 96, 192)]
    assert np.max(np.abs(np.asarray(vals) - exact)) < 1e-6
    assert np.max(np.abs(np.diff(vals))) < 1e-9


def test_fractional_requires_ps_below_one():
    with pytest.raises(ValueError):
        fractional_seminorm(lambda t: t, (0, 1), 2.5, 0.5)


def test_triangle_inequality_and_homogeneity():
    rng = np.random.default_rng(4)
    for _ in range(4):
        c = rng.normal(size=(2, 3))
        f = GridFunction.from_callable(
            lambda t: (c[0, 0] * np.sin(t) + c[0, 1] * t + c[0, 2])[:, None],
            0.0, 1.0)
        g = GridFunction.from_callable(
            lambda t: (c[1, 0] * np.cos(2 * t) + c[1, 1])[:, None], 0.0, 1.0)
        for norm in (lambda u: lp_norm(u, (0, 1), P),
                     lambda u: fractional_norm(u, (0, 1), P, S)):
            nf, ng = norm(f), norm(g)
            nsum = norm(LinComb([(1.0, f), (1.0, g)]))
            assert nsum <= nf + ng + 1e-10
            assert norm(LinComb([(-2.5, f)])) == pytest.approx(2.5 * nf,
                                                               rel=1e-10)


def test_restriction_monotonicity():
    rng = np.random.default_rng(9)
    for _ in range(4):
        c = rng.normal(size=3)
        f = lambda t: c[0] * np.sin(3 * t) + c[1] * t + c[2]
        a, b = -1.0, 1.0
        inner = sorted(rng.uniform(a, b, size=2))
        big = fractional_norm(f, (a, b), P, S)
        small = fractional_norm(f, tuple(inner), P, S)
        assert small <= big + 1e-8


def test_splitting_bound_stable_constant():
    f = lambda t: np.sin(2 * t) + 0.3 * t
    a, b, c = 0.0, 0.6, 1.0
    whole = fractional_norm(f, (a, c), P, S)
    parts = fractional_norm(f, (a, b), P, S) + fractional_norm(f, (b, c), P, S)
    C1 = whole / parts
    whole2 = fractional_norm(f, (a, c), P, S, n_cells=192)
    parts2 = (fractional_norm(f, (a, b), P, S, n_cells=192)
              + fractional_norm(f, (b, c), P, S, n_cells=192))
    C2 = whole2 / parts2
    assert C1 == pytest.approx(C2, rel=1e-6)
    assert C1 < 2.0


def test_embedding_into_higher_lebesgue():
    # W_p^s(a,b) embeds into L_{p/(1-sp)}: ratio stays bounded under refinement
    q = P / (1.0 - S * P)
    f = lambda t: np.abs(t) ** 0.4
    ratios = []
    for nc in (96, 192):
        lq = lp_norm(f, (-1, 1), q, breakpoints=[0.0], n_cells=nc)
        ws = fractional_norm(f, (-1, 1), P, S, breakpoints=[0.0], n_cells=nc)
        ratios.append(lq / ws)
    assert ratios[0] == pytest.approx(ratios[1], rel=2e-3)
    assert ratios[0] < 10.0


def test_estimate_order_basics():
    eps = [1e-2, 1e-3, 1e-4, 1e-5]
    fit = estimate_order(eps, [e ** 2 for e in eps])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    fit = estimate_order(eps, [3 * e ** (7 / 6) for e in eps])
    assert fit.slope == pytest.approx(7 / 6, abs=1e-12)
    rng = np.random.default_rng(0)
    noisy = [e ** 1.5 * np.exp(0.05 * rng.normal()) for e in eps]
    fit = estimate_order(eps, noisy)
    assert 0.9 < fit.r_squared <= 1.0


def test_estimate_order_filters_and_errors():
    with pytest.raises(ValueError):
        estimate_order([1e-2, 1e-3], [1.0, 1.0])  # too few samples
    with pytest.raises(ValueError):
        estimate_order([1e-2, 1e-3, 1e-4, 1e-5], [0.0, -1.0, 0.0, 1.0])


def test_appendix_A1_sharp_order_inner_kink():
    # |t| has a derivative kink: the shift-Taylor residual is exactly O(d^{1+1/p})
    f = lambda t: np.abs(t)
    fp = lambda t: np.sign(t)
    fit, lhs = appendix_probe("A1", f, (-0.5, 0.5),
                              [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], P, S,
                              fprime=fp, breakpoints=[0.0])
    assert fit.slope == pytest.approx(1.0 + 1.0 / P, abs=0.02)


def test_appendix_A1_smooth_is_better():
    fit, _ = appendix_probe("A1", np.sin, (0.0, 1.0),
                            [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], P, S,
                            fprime=np.cos)
    assert fit.slope >= 1.0 + 1.0 / P - 0.05


def test_appendix_A2_orders():
    fit, _ = appendix_probe("A2", lambda t: np.abs(t) ** 0.6, (-0.5, 0.5),
                            [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], P, S,
                            breakpoints=[0.0])
    assert fit.slope >= S - 0.05
    # a jump gives the sharp 1/p order, still above s - 0.05 for defaults
    step = lambda t: np.where(t < 0.0, 0.0, 1.0)
    fit2, _ = appendix_probe("A2", step, (-0.5, 0.5),
                             [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], P, S,
                             breakpoints=[0.0])
    assert fit2.slope == pytest.approx(1.0 / P, abs=0.02)


def test_appendix_A2_constant_zero():
    fit, lhs = appendix_probe("A2", lambda t: 0 * t + 1.0, (0, 1),
                              [1e-2, 1e-3, 1e-4, 1e-5], P, S)
    assert np.all(lhs < 1e-14)
    assert np.isinf(fit.slope)


def test_appendix_A6_order():
    fit, _ = appendix_probe("A6", lambda t: np.abs(1.0 - t) ** 0.1, (0.0, 1.0),
                            [1e-2, 3e-3, 1e-3, 3e-4, 1e-4], P, S)
    assert fit.slope >= S - 0.05
