import io

import numpy as np
import pytest
from helpers import constant_posterior, random_stable
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from finres.connectedness import (
    connectedness_table,
    dynamic_connectedness,
    gfevd,
    normalize_gfevd,
    static_connectedness,
    static_connectedness_ols,
    table_from_var,
    vma_coefficients,
    write_dynamic_csv,
    write_npdc_csv,
    write_static_csv,
)
from finres.errors import ValidationError
from finres.irf import companion_matrix
from finres.tvpvar import McmcConfig, TvpVarSpec, simulate_dgp


def brute_gfevd(lams, omega, H):
    """Expand the generalized FEVD term by term with explicit selection vectors."""
    k = omega.shape[0]
    out = np.zeros((k, k))
    for j in range(k):
        ej = np.eye(k)[j]
        den = 0.0
        for h in range(H):
            den += ej @ lams[h] @ omega @ lams[h].T @ ej
        for m in range(k):
            em = np.eye(k)[m]
            num = 0.0
            for h in range(H):
                num += (ej @ lams[h] @ omega @ em) ** 2
            out[j, m] = num / omega[m, m] / den
    return out


def random_psd(rng, k):
    M = rng.standard_normal((k, k))
    return M @ M.T + 0.05 * np.eye(k)


def check_identities(tab):
    S = tab.shares
    np.testing.assert_allclose(S.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert abs(tab.net_idx.sum()) < 1e-10
    assert np.array_equal(tab.npdc, -tab.npdc.T)
    assert np.all(np.diag(tab.npdc) == 0)
    assert 0 <= tab.tci <= 100
    assert tab.tci == pytest.approx(tab.from_idx.mean(), abs=1e-10)
    assert tab.tci == pytest.approx(tab.to_idx.mean(), abs=1e-10)


# ---- VMA ------------------------------------------------------------------

def test_vma_zero_and_scalar():
    lam = vma_coefficients(np.zeros((2, 2)), 4)
    np.testing.assert_array_equal(lam[0], np.eye(2))
    np.testing.assert_array_equal(lam[1:], 0)
    np.testing.assert_allclose(vma_coefficients([[0.5]], 4)[:, 0, 0], [1, 0.5, 0.25, 0.125], atol=0)


def test_vma_matches_companion_powers():
    rng = np.random.default_rng(0)
    B = random_stable(rng, 2, lags=2)
    F = companion_matrix(B)
    lam = vma_coefficients(B, 8)
    for h in range(8):
        np.testing.assert_allclose(lam[h], np.linalg.matrix_power(F, h)[:2, :2], atol=1e-12)


def test_vma_errors():
    with pytest.raises(ValidationError):
        vma_coefficients(np.zeros((2, 3)), 3)
    with pytest.raises(ValidationError):
        vma_coefficients(np.zeros((2, 2)), 0)


# ---- GFEVD ---------------------------------------------------------------

def test_gfevd_white_noise_identity():
    np.testing.assert_array_equal(gfevd(np.eye(2)[None], np.eye(2), 1), np.eye(2))
    np.testing.assert_array_equal(gfevd(np.eye(3)[None], np.diag([1.0, 4.0, 0.5]), 1), np.eye(3))


def test_gfevd_hand_case():
    phi = gfevd(np.eye(2)[None], np.array([[1, 0.5], [0.5, 1]]), 1)
    np.testing.assert_allclose(phi, [[1, 0.25], [0.25, 1]], atol=1e-15)


def test_gfevd_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(30):
        B = random_stable(rng, 2)
        om = random_psd(rng, 2)
        for H in (1, 2, 3):
            lam = vma_coefficients(B, H)
            np.testing.assert_allclose(gfevd(lam, om, H), brute_gfevd(lam, om, H), rtol=0, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.permutations(range(3)))
def test_gfevd_permutation_equivariance(seed, perm):
    rng = np.random.default_rng(seed)
    B = random_stable(rng, 3)
    om = random_psd(rng, 3)
    p = list(perm)
    lam = vma_coefficients(B, 4)
    base = gfevd(lam, om, 4)
    lam_p = lam[:, p][:, :, p]
    got = gfevd(lam_p, om[np.ix_(p, p)], 4)
    inv = np.argsort(p)
    np.testing.assert_allclose(got[np.ix_(inv, inv)], base, atol=1e-12)


def test_gfevd_errors():
    lam = np.eye(2)[None]
    with pytest.raises(ValidationError, match="nonpositive"):
        gfevd(lam, np.diag([1.0, 0.0]), 1)
    with pytest.raises(ValidationError, match="semidefinite"):
        gfevd(lam, np.array([[1.0, 2.0], [2.0, 1.0]]), 1)
    with pytest.raises(ValidationError):
        gfevd(lam, np.eye(2), 2)


# ---- normalization and aggregates ------------------------------------------

def test_normalize_examples():
    np.testing.assert_array_equal(normalize_gfevd(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(normalize_gfevd([[1, 0.25], [0.25, 1]]), [[0.8, 0.2], [0.2, 0.8]], atol=1e-15)
    with pytest.raises(ValidationError, match="sums to zero"):
        normalize_gfevd([[1.0, 0.0], [0.0, 0.0]])


@given(arrays(float, st.tuples(st.integers(1, 6), st.just(6)), elements=st.floats(0, 1e6)))
def test_normalized_rows_sum_to_one(phi):
    phi = phi[:, : phi.shape[0]] + np.eye(phi.shape[0])
    np.testing.assert_allclose(normalize_gfevd(phi).sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_table_identity_and_symmetric():
    tab = connectedness_table(np.eye(3))
    assert tab.tci == 0
    for v in (tab.from_idx, tab.to_idx, tab.net_idx, tab.npdc):
        assert np.all(v == 0)
    tab = connectedness_table(np.array([[0.8, 0.2], [0.2, 0.8]]))
    assert tab.tci == pytest.approx(20.0, abs=1e-12)
    np.testing.assert_allclose(tab.net_idx, 0, atol=1e-12)
    np.testing.assert_allclose(tab.npdc, 0, atol=1e-12)


def test_table_asymmetric_hand_case():
    tab = connectedness_table(np.array([[0.9, 0.1], [0.4, 0.6]]))
    np.testing.assert_allclose(tab.from_idx, [10, 40])
    np.testing.assert_allclose(tab.to_idx, [40, 10])
    np.testing.assert_allclose(tab.net_idx, [30, -30])
    assert tab.npdc[0, 1] == pytest.approx(30.0)
    assert tab.tci == pytest.approx(25.0)


def test_ratio_aggregation_uses_column_sums():
    S = np.array([[0.9, 0.1], [0.4, 0.6]])
    tab = connectedness_table(S, aggregation="ratio")
    np.testing.assert_allclose(tab.from_idx, [10, 40])
    np.testing.assert_allclose(tab.to_idx, [100 * 0.4 / 1.3, 100 * 0.1 / 0.7])
    with pytest.raises(ValidationError):
        connectedness_table(S, aggregation="bogus")
    with pytest.raises(ValidationError):
        connectedness_table(np.ones((2, 3)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 1_000_000), st.integers(2, 6), st.integers(1, 15))
def test_identities_on_random_systems(seed, k, H):
    rng = np.random.default_rng(seed)
    check_identities(table_from_var(random_stable(rng, k), random_psd(rng, k), H))


# ---- dynamic / static -------------------------------------------------------

def test_static_of_constant_sequence_equals_element():
    post = constant_posterior([[0.5, 0.2], [0.1, 0.3]], alpha=[0.4], h=[0.1, -0.3], n=5)
    dyn = dynamic_connectedness(None, posterior=post)
    st_ = static_connectedness(dyn)
    np.testing.assert_allclose(st_.shares, dyn[0].shares, atol=1e-14)
    assert st_.tci == pytest.approx(dyn[0].tci, abs=1e-12)
    for tab in dyn:
        check_identities(tab)
    with pytest.raises(ValidationError):
        static_connectedness([])


def test_static_is_aggregate_of_averaged_shares():
    rng = np.random.default_rng(4)
    tables = [table_from_var(random_stable(rng, 3), random_psd(rng, 3)) for _ in range(7)]
    st_ = static_connectedness(tables)
    ref = connectedness_table(normalize_gfevd(np.mean([t.shares for t in tables], axis=0)))
    np.testing.assert_allclose(st_.shares, ref.shares, atol=0)
    np.testing.assert_allclose(st_.net_idx, ref.net_idx, atol=0)


def test_static_ols_alternative():
    sim = simulate_dgp(2, 400, beta=[0, 0.5, 0.0, 0, 0.4, 0.3], seed=3)
    tab = static_connectedness_ols(sim.panel)
    check_identities(tab)
    assert tab.net_idx[0] > 0


@pytest.fixture(scope="module")
def constant_truth_dynamic():
    sim = simulate_dgp(2, 300, beta=[0, 0.5, 0.1, 0, 0.1, 0.3], alpha=[0.3], seed=21)
    spec = TvpVarSpec(k=2, mcmc=McmcConfig(draws=3000, burn_in=500, seed=5))
    return sim, spec, dynamic_connectedness(sim.panel, spec)


def test_constant_truth_is_stable(constant_truth_dynamic):
    _, _, dyn = constant_truth_dynamic
    tci = np.array([t.tci for t in dyn])
    assert tci.std() < 5
    for tab in dyn:
        check_identities(tab)


def test_dynamic_is_deterministic(constant_truth_dynamic):
    sim, spec, dyn = constant_truth_dynamic
    again = dynamic_connectedness(sim.panel, spec)
    assert all(np.array_equal(a.shares, b.shares) for a, b in zip(dyn, again))


def test_csv_layouts(constant_truth_dynamic):
    _, _, dyn = constant_truth_dynamic
    buf = io.StringIO()
    write_static_csv(static_connectedness(dyn), buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",y1,y2,From"
    assert lines[3].startswith("To,") and lines[4].startswith("Net,")
    buf = io.StringIO()
    write_dynamic_csv(dyn, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "date,index_type,market,value"
    assert len(lines) == 1 + len(dyn) * 7
    buf = io.StringIO()
    write_npdc_csv(dyn, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "date,from,to,npdc" and len(lines) == 1 + len(dyn)
    first = lines[1].split(",")
    assert first[1:3] == ["y1", "y2"] and float(first[3]) == dyn[0].npdc[0, 1]
