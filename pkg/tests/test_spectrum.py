import numpy as np
import pytest

from conftest import smooth_direction
from relaydelay.core import GridFunction
from relaydelay.linearization import LinearizedMaps
from relaydelay.norms import NormSettings, composite_norm
from relaydelay.spectrum import (ProductVector, apply_V, build_pencil,
                                 dense_eigenvalues, eigenpair_residual,
                                 find_eigenvalues, pencil_det, pencil_matrix,
                                 resolve_calV, stability_verdict, u_inverse,
                                 u_transform, volterra_inverse)
from relaydelay.systems import delayed_s1_params, orbit_guess
from relaydelay.periodic import find_periodic_orbit

T = float(np.log(3.0))


def test_u_transform_and_inverse():
    nu = GridFunction.from_callable(lambda t: t[:, None], -2 * T, 0.0)
    pv = u_transform(nu, T)
    th = np.linspace(-T + 1e-6, -1e-6, 17)
    assert np.max(np.abs(pv.f1(th)[:, 0] - (th - T))) < 1e-12
    assert np.max(np.abs(pv.f2(th)[:, 0] - th)) < 1e-12
    back = u_inverse(pv.f1, pv.f2, T)
    tq = np.linspace(-2 * T + 1e-6, -1e-6, 33)
    assert np.max(np.abs(back(tq) - nu(tq))) < 1e-13


def test_u_transform_s1_phi_prime_pair(s1_orbit):
    lin = LinearizedMaps(s1_orbit)
    pair = build_pencil(lin).generators[0]
    th = np.linspace(-T + 1e-6, -1e-6, 17)
    # anti-symmetric pair: (3 e^{-(th+T)}, -3 e^{-(th+T)}) in (f2, f1) order
    assert np.max(np.abs(pair.f2(th)[:, 0] - 3 * np.exp(-(th + T)))) < 1e-9
    assert np.max(np.abs(pair.f1(th)[:, 0] + 3 * np.exp(-(th + T)))) < 1e-9


def test_apply_V_closed_forms():
    th = np.linspace(-T + 1e-6, -1e-6, 21)
    # A = 0 gives zero
    p0 = delayed_s1_params(0.0)
    one = GridFunction.constant([1.0], -T, 0.0)
    assert np.max(np.abs(apply_V(one, p0)(th))) == 0.0
    # B = 0, A = I: plain integral of 1 is theta + T
    from relaydelay.core import validate_params
    pB0 = validate_params(N=1, A=[[1.0]], B=[[0.0]], k=[1.0], M=[1.0],
                          alpha=-1, beta=1, T=T, p=1.5, s=0.5, sigma=T / 3)
    out = apply_V(one, pB0)
    assert np.max(np.abs(out(th)[:, 0] - (th + T))) < 1e-12
    # scalar delayed variant: a (1 - e^{-B(th+T)}) / B with B = 1 + a
    pa = delayed_s1_params(0.7)
    out2 = apply_V(one, pa)
    exact = 0.7 / 1.7 * (1.0 - np.exp(-1.7 * (th + T)))
    assert np.max(np.abs(out2(th)[:, 0] - exact)) < 1e-11


def test_volterra_inverse_A0_is_scaling():
    p0 = delayed_s1_params(0.0)
    rho = GridFunction.from_callable(lambda t: np.cos(t)[:, None], -T, 0.0)
    w = volterra_inverse(2.5, rho, p0)
    th = np.linspace(-T + 1e-6, -1e-6, 15)
    assert np.max(np.abs(w(th) - rho(th) / 2.5)) < 1e-10


def test_volterra_inverse_round_trip():
    pa = delayed_s1_params(0.6)
    rng = np.random.default_rng(2)
    c = rng.normal(size=3)
    rho = GridFunction.from_callable(
        lambda t: (c[0] + c[1] * np.sin(3 * t) + c[2] * t)[:, None], -T, 0.0)
    th = np.linspace(-T + 1e-6, -1e-6, 33)
    scale = np.max(np.abs(rho(th)))
    for mu in (0.8 + 0.3j, -1.4, 0.15j, 5.0):
        w = volterra_inverse(mu, rho, pa)
        resid = mu * w(th) - apply_V(w, pa)(th) - rho(th)
        assert np.max(np.abs(resid)) / scale < 1e-8


def test_volterra_inverse_large_mu_decay():
    pa = delayed_s1_params(0.6)
    rho = GridFunction.from_callable(lambda t: np.cos(t)[:, None], -T, 0.0)
    th = np.linspace(-T + 1e-6, -1e-6, 15)
    for mu in (1e2, 1e4):
        w = volterra_inverse(mu, rho, pa)
        assert np.max(np.abs(w(th))) < 1.5 * np.max(np.abs(rho(th))) / mu


def test_volterra_inverse_rejects_zero():
    pa = delayed_s1_params(0.6)
    rho = GridFunction.constant([1.0], -T, 0.0)
    with pytest.raises(ValueError):
        volterra_inverse(0.0, rho, pa)


def test_resolve_calV_identities():
    pa = delayed_s1_params(0.6)
    rng = np.random.default_rng(4)
    c = rng.normal(size=4)
    rho1 = GridFunction.from_callable(
        lambda t: (c[0] + c[1] * np.sin(2 * t))[:, None], -T, 0.0)
    rho2 = GridFunction.from_callable(
        lambda t: (c[2] * np.cos(t) + c[3])[:, None], -T, 0.0)
    lam = 0.6 + 0.4j
    nu1, nu2, z = resolve_calV(lam, rho1, rho2, np.zeros(0), pa)
    th = np.linspace(-T + 1e-6, -1e-6, 25)
    # (lam I - calV) applied forward: rows (lam nu1 - nu2, -V nu1 + lam nu2)
    r1 = lam * nu1(th) - nu2(th) - rho1(th)
    r2 = -apply_V(nu1, pa)(th) + lam * nu2(th) - rho2(th)
    assert np.max(np.abs(r1)) < 1e-8
    assert np.max(np.abs(r2)) < 1e-8
    # trivial q slot
    _, _, z2 = resolve_calV(2.0, rho1, rho2, np.array([3.0]),
                            delayed_s1_params(0.6))
    assert z2[0] == pytest.approx(1.5)
    with pytest.raises(ValueError):
        resolve_calV(0.0, rho1, rho2, np.zeros(0), pa)


def test_pencil_probe_identity(delayed_lin):
    """The decomposition F + V reproduces U L_Pi U^{-1} on random probes."""
    model = build_pencil(delayed_lin)
    rng = np.random.default_rng(6)
    th = np.linspace(-delayed_lin.T + 1e-6, -1e-6, 29)
    for _ in range(5):
        c = rng.normal(size=(2, 3))
        f1 = GridFunction.from_callable(
            lambda t: (c[0, 0] + c[0, 1] * np.sin(2 * t)
                       + c[0, 2] * t ** 2)[:, None], -delayed_lin.T, 0.0)
        f2 = GridFunction.from_callable(
            lambda t: (c[1, 0] + c[1, 1] * np.cos(t))[:, None],
            -delayed_lin.T, 0.0)
        x = ProductVector(f1, f2, np.zeros(0))
        lhs = model.apply_transformed(x)
        F = model.apply_F(x)
        V = model.apply_calV(x)
        assert np.max(np.abs(lhs.f1(th) - F.f1(th) - V.f1(th))) < 1e-8
        assert np.max(np.abs(lhs.f2(th) - F.f2(th) - V.f2(th))) < 1e-8
        assert np.allclose(lhs.z, F.z + V.z, atol=1e-8)


def test_pencil_matrix_s1_is_identity(s1_lin):
    model = build_pencil(s1_lin)
    assert model.dim == 1
    for lam in (0.3, 1.0 + 0.5j, 8.0):
        Mm = pencil_matrix(model, lam)
        assert np.linalg.norm(Mm - np.eye(1)) < 1e-12


def test_pencil_matrix_resolvent_decay(delayed_lin):
    model = build_pencil(delayed_lin)
    dists = []
    for lam in (4.0, 8.0, 16.0):
        Mm = pencil_matrix(model, lam)
        dists.append(np.linalg.norm(Mm - np.eye(model.dim)))
    assert dists[1] < dists[0] and dists[2] < dists[1]
    assert dists[2] < 2.0 * dists[1]  # roughly 1/|lambda| decay


def test_pencil_rejects_zero(delayed_lin):
    model = build_pencil(delayed_lin)
    with pytest.raises(ValueError):
        pencil_matrix(model, 0.0)


def test_pencil_det_vanishes_at_dense_eigenvalue(delayed_lin):
    dev = dense_eigenvalues(delayed_lin, g=96, lambda_min=0.05)
    model = build_pencil(delayed_lin)
    top = dev[0]
    assert abs(pencil_det(model, top)) < 1e-4
    assert abs(pencil_det(model, top + 0.05)) > 1e-3


def test_find_eigenvalues_s1_empty(s1_lin):
    model = build_pencil(s1_lin)
    pairs, total = find_eigenvalues(model, lambda_min=0.05, radius=1.5)
    assert pairs == []
    assert total == 0
    v = stability_verdict(model, pairs)
    assert v.kind == "asymptotically_stable"
    assert v.spectral_radius == pytest.approx(0.05)


def test_find_eigenvalues_matches_dense(delayed_lin):
    model = build_pencil(delayed_lin)
    pairs, total = find_eigenvalues(model, lambda_min=0.05)
    dev = dense_eigenvalues(delayed_lin, g=128, lambda_min=0.05)
    assert sum(p.multiplicity for p in pairs) == total == len(dev)
    for p in pairs:
        assert min(abs(p.lam - z) for z in dev) < 1e-6
        assert eigenpair_residual(model, p) < 1e-6


def test_dense_count_stabilizes(delayed_lin):
    counts = [len(dense_eigenvalues(delayed_lin, g=g, lambda_min=0.05))
              for g in (96, 160, 224)]
    assert counts[0] == counts[1] == counts[2]


def test_spectrum_invariance_under_transform(delayed_lin):
    """Pencil eigenvalues equal the dense ones computed pre-transform."""
    model = build_pencil(delayed_lin)
    pairs, _ = find_eigenvalues(model, lambda_min=0.05,
                                with_eigenfunctions=False)
    dev = dense_eigenvalues(delayed_lin, g=160, lambda_min=0.05)
    for p in pairs:
        assert min(abs(p.lam - z) for z in dev) < 1e-6


def test_verdict_margins(delayed_lin):
    model = build_pencil(delayed_lin)

    class FakePair:
        def __init__(self, lam):
            self.lam = lam
            self.multiplicity = 1

    v = stability_verdict(model, [FakePair(1.3 + 0j)])
    assert v.kind == "unstable"
    v = stability_verdict(model, [FakePair(1.01 + 0j)])
    assert v.kind == "marginal"
    v = stability_verdict(model, [FakePair(0.5 + 0j)])
    assert v.kind == "asymptotically_stable"
