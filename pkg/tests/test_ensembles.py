from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fourfold_rmt.ensembles import (
    DIST_KINDS,
    EntryDistribution,
    VarianceProfile,
    band,
    fourier_goe_check,
    fourier_goe_expectations,
    fourier_transform,
    make_rng,
    orbit_representatives,
    pseudo_variance_matrix,
    rebuild_with,
    resample_orbits,
    resampled_rows,
    sample_flip_model,
    sample_fourfold,
    sample_goe,
    sample_goe_batch,
    self_paired,
    validate_fourfold,
    wigner,
)
from fourfold_rmt.semicircle import rho

profiles = st.one_of(
    st.integers(1, 24).map(wigner),
    st.integers(3, 24).flatmap(lambda n: st.integers(1, n).map(lambda w: band(n, w))),
)


# ---------------------------------------------------------------- orbits


def test_self_paired_indices():
    assert list(self_paired(4)) == [0, 2]
    assert list(self_paired(5)) == [0]
    for n in (4, 5):
        x = np.arange(n)
        assert set(x[x == (-x) % n]) == set(self_paired(n))


def _constraint_rank_dimension(n: int) -> int:
    """Dimension of the real solution space of the fourfold relations, by brute-force rank."""
    # unknowns: Re h_xy, Im h_xy for all (x, y), as 2 n^2 reals
    idx = lambda x, y: 2 * (x * n + y)
    rows = []
    for x in range(n):
        for y in range(n):
            a = idx(x, y)
            for b, sign_im in ((idx(y, x), -1), (idx((-y) % n, (-x) % n), 1), (idx((-x) % n, (-y) % n), -1)):
                re = np.zeros(2 * n * n)
                im = np.zeros(2 * n * n)
                re[a] += 1
                re[b] -= 1
                im[a + 1] += 1
                im[b + 1] -= sign_im
                rows += [re, im]
    rank = np.linalg.matrix_rank(np.array(rows))
    return 2 * n * n - rank


@pytest.mark.parametrize("n", [1, 2, 3, 5, 6, 8])
def test_free_parameter_count_matches_constraint_rank(n):
    table = orbit_representatives(n)
    assert table.free_real_parameters == _constraint_rank_dimension(n)
    assert table.free_real_parameters == n * (n + 1) // 2


@given(st.integers(1, 40))
def test_orbit_table_structure(n):
    table = orbit_representatives(n)
    assert set(np.unique(table.sizes)) <= {1, 2, 4}
    assert table.sizes.sum() == n * n
    for o in table:
        x, y = o.x, o.y
        images = {(x, y), (y, x), ((-y) % n, (-x) % n), ((-x) % n, (-y) % n)}
        assert len(images) == o.size
        assert o.forced_real == (x == y or (x == (-x) % n and y == (-y) % n))
        assert all(table.orbit_of[i, j] == table.orbit_of[x, y] for i, j in images)


def test_counterdiagonal_entry_is_free_complex():
    table = orbit_representatives(6)
    o = table.orbit_of[1, 5]
    assert not table.forced_real[o]
    assert table.sizes[o] == 2


@given(st.integers(1, 30), st.integers(0, 2**32))
def test_expand_is_fourfold(n, seed):
    table = orbit_representatives(n)
    r = np.random.default_rng(seed)
    vals = r.standard_normal(len(table)) + 1j * r.standard_normal(len(table))
    vals = np.where(table.forced_real, vals.real, vals)
    assert validate_fourfold(table.expand(vals)) == []


# ---------------------------------------------------------------- sampling


@given(profiles, st.sampled_from(DIST_KINDS), st.integers(0, 2**63))
def test_samples_are_exactly_fourfold(profile, kind, seed):
    h = sample_fourfold(profile, kind, seed).h
    n = h.shape[0]
    flip = (-np.arange(n)) % n
    assert np.array_equal(h, h.conj().T)
    assert np.array_equal(h, h[np.ix_(flip, flip)].T)
    assert np.all(h.diagonal().imag == 0)
    assert validate_fourfold(h) == []


@pytest.mark.parametrize("kind", DIST_KINDS)
def test_sampling_reproducible(kind):
    a = sample_fourfold(band(31, 5), kind, 123456789).h
    b = sample_fourfold(band(31, 5), kind, 123456789).h
    c = sample_fourfold(band(31, 5), kind, 123456788).h
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_n1_sample_is_real_with_variance_s00():
    vals = np.array([sample_fourfold(wigner(1), "complex-gaussian", s).h[0, 0] for s in range(4000)])
    assert np.all(vals.imag == 0)
    assert abs(np.var(vals.real) - 1.0) < 4 * np.sqrt(2 / 4000)


def test_wigner_entry_variance_monte_carlo():
    n, count = 64, 10_000
    table = orbit_representatives(n)
    spots = [(0, 0), (1, 2), (3, 61), (5, 59), (0, 32), (10, 20)]
    acc = np.zeros(len(spots))
    for s in range(count):
        h = sample_fourfold(wigner(n), "real-gaussian", s).h
        acc += np.abs(np.array([h[i, j] for i, j in spots])) ** 2
    var = acc / count
    assert np.all(np.abs(var * n - 1) < 0.05), var * n
    assert table is orbit_representatives(n)


@pytest.mark.parametrize("kind", DIST_KINDS)
def test_entry_moments(kind):
    dist = EntryDistribution(kind)
    rng = make_rng(77)
    forced = np.zeros(100_000, dtype=bool)
    z = dist.draw(rng, forced)
    a2 = np.abs(z) ** 2
    assert abs(a2.mean() - 1) <= 3 * a2.std() / np.sqrt(z.size)
    z2 = z * z
    pv = dist.pseudo_variance(forced)[0]
    assert abs(z2.mean() - pv) <= 3 * np.sqrt(np.mean(np.abs(z2 - z2.mean()) ** 2) / z.size)
    assert abs(np.mean(a2**2) - dist.moment(4)) < 0.05 * dist.moment(4)


def test_forced_real_entries_stay_real():
    dist = EntryDistribution("complex-gaussian")
    z = dist.draw(make_rng(1), np.array([True, False]), size=1000)
    assert np.all(z[:, 0].imag == 0)
    assert np.any(z[:, 1].imag != 0)


def test_unknown_distribution_rejected():
    with pytest.raises(ValueError):
        EntryDistribution("cauchy")


def test_independence_across_orbits():
    n, count = 12, 20_000
    h = np.array([sample_fourfold(wigner(n), "complex-gaussian", s).h for s in range(count)])
    pairs = [((1, 2), (2, 3)), ((1, 11), (2, 10)), ((0, 6), (1, 3)), ((4, 4), (4, 8))]
    for a, b in pairs:
        u, v = h[:, a[0], a[1]], h[:, b[0], b[1]]
        for prod in (u * v.conj(), u * v):
            se = np.abs(prod - prod.mean()).std() / np.sqrt(count)
            assert abs(prod.mean()) < 3 * np.sqrt(2) * se


# ---------------------------------------------------------------- profiles


def test_profile_constructors():
    assert wigner(100).M == pytest.approx(100)
    assert np.array_equal(band(40, 40).s, wigner(40).s)
    assert np.max(np.abs(band(64, 8).s.sum(axis=1) - 1)) < 1e-12
    assert band(64, 8).M == pytest.approx(17)


def test_band_width_validated():
    with pytest.raises(ValueError):
        band(10, 0)
    with pytest.raises(ValueError):
        band(10, 11)


@given(profiles)
def test_profiles_satisfy_invariants(profile):
    assert profile.violations() == []
    assert profile.n ** profile.delta <= profile.M * (1 + 1e-12) <= profile.n * (1 + 1e-12)


def test_invalid_profiles_reported():
    s = np.full((4, 4), 0.25)
    s[0, 1] = s[1, 0] = 0.3
    bad = VarianceProfile(s, delta=0.5)
    assert bad.violations()
    with pytest.raises(ValueError):
        sample_fourfold(bad, "real-gaussian", 0)
    too_large_delta = VarianceProfile(band(32, 2).s, delta=0.9)
    assert any("N^delta" in v for v in too_large_delta.violations())


def test_profile_is_not_aliased():
    s = np.full((3, 3), 1 / 3)
    prof = VarianceProfile(s, delta=1.0)
    s[0, 0] = 5
    assert prof.s[0, 0] == pytest.approx(1 / 3)


@pytest.mark.parametrize("prof", [wigner(9), band(20, 3), VarianceProfile(band(12, 2).s, delta=0.3)])
def test_profile_json_roundtrip(prof):
    back = VarianceProfile.from_json(json.loads(json.dumps(prof.to_json())))
    assert np.array_equal(back.s, prof.s)
    assert back.delta == prof.delta


def test_pseudo_variance_matrix():
    prof = wigner(6)
    assert np.array_equal(pseudo_variance_matrix(prof, "real-gaussian"), prof.s)
    r = pseudo_variance_matrix(prof, "complex-gaussian")
    table = orbit_representatives(6)
    assert np.array_equal(r != 0, table.forced_real[table.orbit_of])


# ---------------------------------------------------------------- validation


def test_validate_detects_perturbation():
    h = sample_fourfold(wigner(8), "real-gaussian", 5).h.copy()
    h[1, 2] += 1e-6
    viol = validate_fourfold(h)
    table = orbit_representatives(8)
    o = table.orbit_of[1, 2]
    assert viol
    assert {v.orbit for v in viol} == {(int(table.rep_rows[o]), int(table.rep_cols[o]))}


def test_gue_is_not_fourfold():
    r = np.random.default_rng(0)
    a = r.standard_normal((8, 8)) + 1j * r.standard_normal((8, 8))
    assert validate_fourfold((a + a.conj().T) / 2)


# ---------------------------------------------------------------- resampling


@given(st.integers(2, 20), st.integers(0, 19), st.sampled_from(DIST_KINDS), st.integers(0, 2**32))
def test_resampled_rows_match_rebuild(n, x, kind, seed):
    x %= n
    smp = sample_fourfold(wigner(n), kind, seed)
    ids, vals = resample_orbits(smp, x, make_rng(seed, 1), 3)
    rows = resampled_rows(smp, x, make_rng(seed, 1), 3)
    xm = (-x) % n
    keep = np.setdiff1d(np.arange(n), [x, xm])
    for k in range(3):
        full = rebuild_with(smp, ids, vals[k])
        assert validate_fourfold(full) == []
        assert np.array_equal(full[[x, xm]], rows[k])
        assert np.array_equal(full[np.ix_(keep, keep)], smp.h[np.ix_(keep, keep)])


# ---------------------------------------------------------------- GOE and Fourier


def test_goe_n1_variance():
    vals = sample_goe_batch(1, 20_000, 3)[:, 0, 0]
    assert abs(vals.var() - 2) < 4 * 2 * np.sqrt(2 / 20_000)
    assert sample_goe(1, 0).shape == (1, 1)


def test_goe_diagonal_to_offdiagonal_ratio():
    h = sample_goe_batch(8, 10_000, 4)
    diag = np.mean(h[:, np.arange(8), np.arange(8)] ** 2)
    iu = np.triu_indices(8, 1)
    off = np.mean(h[:, iu[0], iu[1]] ** 2)
    assert abs(diag / off - 2) < 0.2


def test_goe_spectrum_semicircle():
    lam = np.linalg.eigvalsh(sample_goe(512, 9))
    edges = np.linspace(-2, 2, 41)
    hist, _ = np.histogram(lam, bins=edges, density=False)
    mid = (edges[1:] + edges[:-1]) / 2
    w = edges[1] - edges[0]
    l1 = np.sum(np.abs(hist / (512 * w) - rho(mid))) * w
    assert l1 < 0.1


def _fourier_oracle(h):
    n = h.shape[0]
    out = np.zeros((n, n), dtype=complex)
    for p in range(n):
        for q in range(n):
            out[p, q] = sum(
                h[x, y] * np.exp(-2j * np.pi * (p * x - q * y) / n) for x in range(n) for y in range(n)
            ) / n
    return out


def test_fourier_identity():
    f = fourier_transform(np.eye(4))
    np.testing.assert_allclose(f, _fourier_oracle(np.eye(4).astype(complex)), atol=1e-14)
    np.testing.assert_allclose(np.diag(f), np.ones(4), atol=1e-14)
    np.testing.assert_allclose(f, np.eye(4), atol=1e-14)


@given(st.integers(2, 9), st.integers(0, 2**32))
def test_fourier_methods_agree_with_oracle(n, seed):
    h = sample_goe(n, seed)
    ref = _fourier_oracle(h)
    np.testing.assert_allclose(fourier_transform(h), ref, atol=1e-12)
    np.testing.assert_allclose(fourier_transform(h, method="fft"), ref, atol=1e-12)


@given(st.integers(2, 32), st.integers(0, 2**32))
def test_fourier_of_real_symmetric_is_fourfold(n, seed):
    assert validate_fourfold(fourier_transform(sample_goe(n, seed)), tol=1e-10) == []


@pytest.mark.parametrize("n", [5, 8])
def test_fourier_goe_expectations_exact(n):
    # vec(hat H) = L vec(H) with L the Kronecker product of the two DFT factors
    k = np.arange(n)
    F = np.exp(-2j * np.pi * np.outer(k, k) / n)
    L = np.kron(F, F.conj()) / n
    eye = np.eye(n)
    C = (np.einsum("ac,bd->abcd", eye, eye) + np.einsum("ad,bc->abcd", eye, eye)).reshape(n * n, n * n) / n
    herm = np.diag(L @ C @ L.conj().T).real.reshape(n, n)
    plain = np.diag(L @ C @ L.T).reshape(n, n)
    var, pseudo = fourier_goe_expectations(n)
    np.testing.assert_allclose(herm, var, atol=1e-13)
    np.testing.assert_allclose(plain, pseudo, atol=1e-13)


def test_fourier_goe_coincident_entries():
    var, pseudo = fourier_goe_expectations(16)
    assert var[3, 13] == pytest.approx(2 / 16)
    assert var[3, 12] == pytest.approx(1 / 16)
    assert pseudo[0, 8] == pytest.approx(1 / 16)
    assert pseudo[1, 15] == 0


def test_fourier_goe_check_small():
    rep = fourier_goe_check(8, 4000, seed=2)
    assert rep.fourfold_max_dev < 1e-12
    assert rep.checks["fourfold"] and rep.checks["pseudo_variance"] and rep.checks["cross_orbit"]
    assert rep.anti_diagonal_mean == pytest.approx(2.0, rel=0.05)
    assert rep.variance_max_rel_err < 0.1


# ---------------------------------------------------------------- flip model


def test_flip_model():
    smp = sample_flip_model(16)
    assert np.all(smp.h.diagonal() == 0)
    assert validate_fourfold(smp.h) == []
    big = sample_flip_model(128, diagonal_value=0.37, seed=4)
    assert np.all(big.h.diagonal() == 0.37)
    assert abs(np.trace(big.h).real - 128 * 0.37) < 1e-12
    assert validate_fourfold(big.h) == []
