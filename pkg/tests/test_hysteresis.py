import numpy as np
import pytest

from relaydelay.hysteresis import RelayState, relay_advance, relay_init


def test_init_cases():
    assert relay_init(0.0, -1.0, 1.0).value == 1      # g(0) < beta
    assert relay_init(1.0, -1.0, 1.0).value == -1     # g(0) >= beta
    assert relay_init(-5.0, -1.0, 1.0).value == 1
    with pytest.raises(ValueError):
        relay_init(0.0, 1.0, -1.0)


def test_upcrossing_flips_to_minus():
    ts = np.linspace(0.0, 2.0, 201)
    gs = 2.0 * ts - 1.0  # rises through beta = 1 at t = 1
    st, flips = relay_advance(relay_init(gs[0], -1, 1), ts, gs, -1.0, 1.0,
                              g_eval=lambda t: 2.0 * t - 1.0)
    assert st.value == -1
    assert len(flips) == 1
    assert flips[0] == pytest.approx(1.0, abs=1e-12)


def test_dip_to_alpha_does_not_flip_plus_state():
    # signal dips to alpha = -1 and returns while the relay sits at +1
    f = lambda t: -1.0 + (t - 1.0) ** 2 - 1e-6
    ts = np.linspace(0.0, 2.0, 401)
    st, flips = relay_advance(relay_init(f(0.0), -1, 1), ts, f(ts), -1.0, 1.0,
                              g_eval=f)
    assert st.value == 1
    assert flips == []
    assert st.last_crossing is not None  # the alpha crossing was recorded


def test_downcrossing_flips_minus_to_plus():
    f = lambda t: 1.5 - 2.0 * t  # falls through alpha = -1 at t = 1.25
    ts = np.linspace(0.0, 2.0, 201)
    st, flips = relay_advance(RelayState(value=-1), ts, f(ts), -1.0, 1.0,
                              g_eval=f)
    assert st.value == 1
    assert flips[0] == pytest.approx(1.25, abs=1e-12)


def test_monostable_in_dead_band():
    f = lambda t: 0.5 * np.sin(7 * t)
    ts = np.linspace(0.0, 5.0, 801)
    st, flips = relay_advance(relay_init(0.0, -1, 1), ts, f(ts), -1.0, 1.0,
                              g_eval=f)
    assert st.value == 1 and flips == []


def test_determinism_and_refinement_stability():
    f = lambda t: 1.3 * np.sin(t)
    alpha, beta = -1.0, 1.0
    out = []
    for n in (401, 801):
        ts = np.linspace(0.0, 12.0, n)
        st, flips = relay_advance(relay_init(f(0.0), alpha, beta), ts, f(ts),
                                  alpha, beta, g_eval=f)
        out.append((st.value, tuple(flips)))
    assert out[0][0] == out[1][0]
    assert len(out[0][1]) == len(out[1][1])
    assert np.allclose(out[0][1], out[1][1], atol=1e-10)


def test_grazing_touch_is_flagged_not_flipped():
    # touches beta = 1 tangentially from below
    f = lambda t: 1.0 - (t - 1.0) ** 2
    ts = np.linspace(0.0, 2.0, 1001)
    st, flips = relay_advance(relay_init(f(0.0), -1, 1), ts, f(ts), -1.0, 1.0)
    assert flips == []
    assert st.grazing


def test_nonmonotone_times_rejected():
    with pytest.raises(ValueError):
        relay_advance(RelayState(1), np.array([0.0, 0.5, 0.4]),
                      np.zeros(3), -1.0, 1.0)
