from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourfold_rmt.control_params import (
    GammaEvaluator,
    GammaValues,
    domain_condition,
    eta_grid,
    eta_threshold,
    fit_gamma_r_constant,
    gamma_r_bound,
    gamma_values,
    kappa_theta,
    r_matrix,
    scan_eta,
    spectral_domain,
    stability_norm,
)
from fourfold_rmt.ensembles import DIST_KINDS, VarianceProfile, band, wigner
from fourfold_rmt.semicircle import m_semicircle

ETA_E_WIGNER_256 = 0.05876950363632811  # frozen at first verified run


@pytest.mark.parametrize("n, dim", [(5, 4), (6, 4), (1, 0), (2, 0), (7, 6)])
def test_r_dimension(n, dim):
    assert r_matrix(wigner(n), "real-gaussian").dim == dim


def test_r_real_is_restricted_s():
    p = wigner(8)
    R = r_matrix(p, "real-gaussian")
    keep = [1, 2, 3, 5, 6, 7]
    assert list(R.indices) == keep
    np.testing.assert_array_equal(R.r, p.s[np.ix_(keep, keep)])


def test_r_complex_off_diagonal_vanishes():
    p = band(11, 3)
    R = r_matrix(p, "complex-gaussian")
    off = R.r - np.diag(np.diag(R.r))
    assert np.all(off == 0)
    # h_xx is real, so E h_xx^2 = s_xx survives
    np.testing.assert_array_equal(np.diag(R.r), np.diag(p.s)[R.indices])


def _wigner_gamma_s(n, z):
    m2 = m_semicircle(z) ** 2
    c = m2 / (n * (1 - m2))
    return abs(1 + c) + (n - 1) * abs(c)


@pytest.mark.parametrize("n", [8, 64, 512])
def test_gamma_s_wigner_rank_one_oracle(n):
    gv = gamma_values(2j, wigner(n), r_matrix(wigner(n), "real-gaussian"))
    assert gv.gamma_s == pytest.approx(_wigner_gamma_s(n, 2j), rel=1e-12)


def test_gamma_s_wigner_limit():
    m2 = m_semicircle(2j) ** 2
    assert m2.real == pytest.approx(-0.17157, abs=1e-5)
    limit = 1 + abs(m2 / (1 - m2))
    assert limit == pytest.approx(1.1464, abs=1e-4)
    errs = [abs(gamma_values(2j, wigner(n), np.zeros((0, 0))).gamma_s - limit) for n in (8, 64, 512)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_gamma_r_complex_is_one_up_to_diagonal():
    for n in (8, 64, 512):
        gv = gamma_values(2j, wigner(n), r_matrix(wigner(n), "complex-gaussian"))
        assert abs(gv.gamma_r - 1) <= 2 / n


def test_gamma_r_zero_matrix_is_one():
    assert gamma_values(1 + 1j, wigner(4), np.zeros((3, 3))).gamma_r == 1.0


def test_gamma_is_max():
    gv = GammaValues(1j, 2.0, 3.0)
    assert gv.gamma == 3.0 and not gv.singular
    assert GammaValues(1j, math.inf, 1.0).singular


def test_singular_reported():
    # 1 - m^2 a = 0 for a = 1/m^2
    m2 = m_semicircle(1j) ** 2
    a = np.array([[1 / m2]]).real
    if abs(1 - m2 * a[0, 0]) == 0:
        assert stability_norm(m2, a) == math.inf
    assert stability_norm(1.0, np.eye(2)) == math.inf


@given(st.floats(-10, 10), st.floats(0.01, 10))
def test_gamma_s_lower_bound(E, eta):
    z = complex(E, eta)
    p = band(24, 4)
    gv = gamma_values(z, p, r_matrix(p, "real-gaussian"))
    assert gv.gamma_s >= 1 / abs(1 - m_semicircle(z) ** 2) * (1 - 1e-12)


@pytest.mark.parametrize("prof", [wigner(32), band(40, 6), band(33, 5)])
@pytest.mark.parametrize("kind", ["real-gaussian", "complex-gaussian"])
def test_evaluator_matches_dense(prof, kind):
    R = r_matrix(prof, kind)
    ev = GammaEvaluator(prof, R)
    for z in (2j, 0.3 + 0.01j, -1.9 + 0.1j, 5 + 3j):
        a, b = ev(z), gamma_values(z, prof, R)
        assert a.gamma_s == pytest.approx(b.gamma_s, rel=1e-10)
        assert a.gamma_r == pytest.approx(b.gamma_r, rel=1e-10)


def test_evaluator_non_circulant_profile():
    rng = np.random.default_rng(0)
    a = rng.uniform(size=(10, 10))
    s = a + a.T + (a + a.T)[::-1, ::-1]
    idx = (-np.arange(10)) % 10
    s = s + s[np.ix_(idx, idx)]
    s /= s.sum(axis=1, keepdims=True)
    s = (s + s.T) / 2
    ev = GammaEvaluator(s, np.zeros((0, 0)))
    assert ev(0.5 + 0.2j).gamma_s == pytest.approx(stability_norm(m_semicircle(0.5 + 0.2j) ** 2, s), rel=1e-10)


def test_strip_lower_bound_and_complex_ratio():
    p = band(64, 8)
    Es = np.linspace(-10, 10, 21)
    etas = np.geomspace(1 / p.M, 10, 12)
    evs = {k: GammaEvaluator(p, r_matrix(p, k)) for k in ("real-gaussian", "complex-gaussian")}
    gam = np.array([[evs["real-gaussian"](complex(E, e)).gamma for e in etas] for E in Es])
    assert gam.min() >= 0.01
    cg = [evs["complex-gaussian"](complex(E, e)) for E in Es for e in etas]
    C = max(g.gamma_r / g.gamma_s for g in cg)
    assert C <= 10


def test_gamma_lipschitz_on_grid():
    p = wigner(64)
    ev = GammaEvaluator(p, r_matrix(p, "real-gaussian"))
    Es = np.linspace(-3, 3, 61)
    for eta in (0.5, 1.0, 2.0):
        g = np.array([ev(complex(E, eta)).gamma for E in Es])
        L = np.max(np.abs(np.diff(g)) / np.diff(Es))
        assert L < 10 / eta**2


def test_gamma_rejects_real_axis():
    with pytest.raises(ValueError):
        gamma_values(1.0, wigner(4), np.zeros((3, 3)))


# ---------------------------------------------------------------- eta_E


def test_eta_grid_shape():
    g = eta_grid(100.0)
    assert g[0] == 10 and g[-1] == pytest.approx(0.01)
    assert np.all(np.diff(g) < 0)
    assert len(g) == 3 * 32 + 1
    with pytest.raises(ValueError):
        eta_grid(0.05)


def _stub(z):
    return GammaValues(z, 1.0, 1.0)


@pytest.mark.parametrize("gamma", [0.05, 0.1, 0.2, 0.3])
@pytest.mark.parametrize("E", [0.0, 1.5, 5.0])
def test_eta_threshold_stub_oracle(gamma, E):
    p = wigner(1024)
    M = p.M
    grid = eta_grid(M)
    eta_E = eta_threshold(E, gamma, p, "real-gaussian", gamma_fn=_stub, R=r_matrix(wigner(4), "real-gaussian"))
    im_m = np.array([m_semicircle(complex(E, e)).imag for e in grid])
    ok = 1 / (M * grid) <= np.minimum(M**-gamma, M ** (-2 * gamma) / im_m)
    first_bad = np.argmin(ok) if not ok.all() else len(ok)
    assert eta_E == grid[first_bad - 1]
    assert M ** (gamma - 1) <= eta_E * (1 + 1e-12)
    step = grid[0] / grid[1]
    assert eta_E <= M ** (2 * gamma - 1) * step


def test_eta_threshold_small_gamma_reaches_bottom():
    p = wigner(1024)
    eta_E = eta_threshold(0.0, 0.005, p, "real-gaussian", gamma_fn=_stub, R=r_matrix(wigner(4), "real-gaussian"))
    assert eta_E <= 1.2 / p.M


def test_eta_threshold_degenerate():
    huge = lambda z: GammaValues(z, 1e6, 1e6)
    sc = scan_eta(0.0, 0.1, wigner(64), "real-gaussian", gamma_fn=huge)
    assert sc.degenerate and sc.eta_E == 10.0


def test_eta_threshold_validation():
    with pytest.raises(ValueError):
        eta_threshold(0.0, 0.5, wigner(16), "real-gaussian")
    with pytest.raises(ValueError):
        eta_threshold(0.0, 0.1, wigner(16), "real-gaussian", etas=[])


def test_eta_threshold_regression_baseline():
    assert eta_threshold(0.0, 0.1, wigner(256), "real-gaussian") == pytest.approx(ETA_E_WIGNER_256, rel=1e-12)


def test_eta_threshold_monotone_in_gamma():
    p = wigner(256)
    vals = [eta_threshold(0.5, g, p, "real-gaussian") for g in (0.05, 0.1, 0.2, 0.3)]
    assert vals == sorted(vals)


def test_scan_stops_at_first_failure():
    sc = scan_eta(0.0, 0.1, wigner(256), "real-gaussian")
    assert sc.condition[:-1].all() and not sc.condition[-1]
    assert sc.eta_E == sc.etas[-2]


# ---------------------------------------------------------------- spectral domain


@pytest.fixture(scope="module")
def domains():
    p = wigner(128)
    E = np.linspace(-10, 10, 21)
    return p, {g: spectral_domain(g, p, "real-gaussian", E_grid=E) for g in (0.1, 0.2)}


def test_domain_points_valid(domains):
    p, doms = domains
    R = r_matrix(p, "real-gaussian")
    for g, dom in doms.items():
        assert dom.points
        for E, eta in dom.points:
            assert eta >= 1 / p.M
            assert domain_condition(eta, gamma_values(complex(E, eta), p, R), p.M, g)
        assert dom.contains(complex(*dom.points[0]))
        assert "note" in dom.metadata


def test_domain_grows_as_gamma_decreases(domains):
    _, doms = domains
    assert set(doms[0.2].points) <= set(doms[0.1].points)
    assert np.all(doms[0.1].eta_E <= doms[0.2].eta_E)


def test_domain_symmetric_in_E(domains):
    _, doms = domains
    for dom in doms.values():
        np.testing.assert_allclose(dom.eta_E, dom.eta_E[::-1])
        pts = {(round(E, 12), eta) for E, eta in dom.points}
        assert pts == {(round(-E, 12) + 0.0, eta) for E, eta in dom.points}


def test_domain_rejects_wide_E():
    with pytest.raises(ValueError):
        spectral_domain(0.1, wigner(16), "real-gaussian", E_grid=[11.0])


# ---------------------------------------------------------------- Gamma_R bound


def test_kappa_theta_cases():
    assert kappa_theta(2 + 0.01j) == pytest.approx((0.0, 0.1))
    k, t = kappa_theta(1 + 0.5j)
    assert (k, t) == pytest.approx((1.0, 1 + 0.5 / math.sqrt(1.5)))
    k, t = kappa_theta(3 + 0.5j)
    assert (k, t) == pytest.approx((1.0, math.sqrt(1.5)))


def test_gamma_r_bound_and_fit():
    p = band(128, 16)
    R = r_matrix(p, "real-gaussian")
    ev = GammaEvaluator(p, R)
    zs = [complex(E, eta) for E in np.linspace(-10, 10, 21) for eta in (1 / p.M, 0.1, 1.0, 10.0)]
    gr = np.array([ev(z).gamma_r for z in zs])
    C = fit_gamma_r_constant(zs, p.n, gr)
    assert 0 < C < np.inf
    assert all(g <= gamma_r_bound(z, p.n, C) * (1 + 1e-12) for z, g in zip(zs, gr))
    assert gamma_r_bound(1j, 100, 2.0) == pytest.approx(2 * math.log(100) / min(1.0, kappa_theta(1j)[1]))
