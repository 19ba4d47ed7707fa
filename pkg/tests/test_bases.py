import numpy as np
import pytest
import scipy.fft
from hypothesis import given, settings
from hypothesis import strategies as st

from rrmimo.bases import (basis_dct2, basis_dft, basis_klt, basis_polynomial, coding_gain,
                          klt_eig, make_basis, read_basis_csv, transform_variances, truncate,
                          write_basis_csv)
from rrmimo.channel import ArrayGeometry, ClusterSpec, correlation_analytic, steering_vector
from rrmimo.errors import DomainError
from rrmimo.rng import complex_normal, make_rng


@pytest.fixture(scope="module")
def loaded_corr():
    # diagonal loading keeps every transformed variance positive
    P = correlation_analytic(ArrayGeometry(32), ClusterSpec.from_degrees(20.0, 10.0)).phi
    return (P + 0.01 * np.eye(32)) / 1.01


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 100), st.sampled_from(["dct2", "dft", "polynomial"]))
def test_fixed_bases_are_unitary(M, kind):
    assert make_basis(kind, M).unitarity_error() < 1e-8


def test_dct_matches_scipy():
    M = 17
    # scipy's orthonormal DCT-II applied to the identity gives Q^T
    D = scipy.fft.dct(np.eye(M), type=2, norm="ortho", axis=0)
    np.testing.assert_allclose(basis_dct2(M).q, D.T, atol=1e-14)
    np.testing.assert_allclose(basis_dct2(M).q[:, 0], np.sqrt(1 / M))


def test_dft_columns():
    q = basis_dft(4).q
    np.testing.assert_allclose(q[:, 1], np.array([1, -1j, -1, 1j]) / 2, atol=1e-15)
    x = complex_normal(make_rng(0), 9)
    np.testing.assert_allclose(basis_dft(9).q.T @ x, np.fft.fft(x) / 3, atol=1e-12)


def test_polynomial_columns_have_increasing_degree():
    M = 12
    Q = basis_polynomial(M).q
    np.testing.assert_allclose(Q[:, 0], 1 / np.sqrt(M))
    assert np.all(np.diff(Q[:, 1]) > 0)
    assert abs(Q[:, 1].sum()) < 1e-12
    i = np.arange(M)
    for j in range(6):
        coef = np.polynomial.polynomial.polyfit(i, Q[:, j], j)
        fit = np.polynomial.polynomial.polyval(i, coef)
        assert np.max(np.abs(fit - Q[:, j])) < 1e-10
        if j > 0:   # not representable with one degree less
            coef = np.polynomial.polynomial.polyfit(i, Q[:, j], j - 1)
            assert np.max(np.abs(np.polynomial.polynomial.polyval(i, coef) - Q[:, j])) > 1e-3


def test_polynomial_basis_at_desk_scale():
    assert basis_polynomial(100).unitarity_error() < 1e-8


def test_klt_of_point_source():
    geom = ArrayGeometry(16)
    a = steering_vector(geom, np.radians(25.0))
    ev, V = klt_eig(np.outer(a, a.conj()))
    assert np.isclose(ev[0], 16.0)
    assert np.isclose(abs(np.vdot(V[:, 0], a)) / 4.0, 1.0)
    np.testing.assert_allclose(ev[1:], 0.0, atol=1e-12)


def test_klt_ordering_and_phase(loaded_corr):
    ev, V = klt_eig(loaded_corr)
    assert np.all(np.diff(ev) <= 1e-12)
    for k in range(V.shape[1]):
        lead = V[np.flatnonzero(np.abs(V[:, k]) > 1e-10)[0], k]
        assert abs(lead.imag) < 1e-12 and lead.real > 0
    B = basis_klt(loaded_corr)
    np.testing.assert_allclose(transform_variances(B, loaded_corr), ev, atol=1e-12)


def test_klt_rejects_non_hermitian():
    with pytest.raises(DomainError):
        basis_klt(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(DomainError):
        make_basis("klt", 4)


def test_coding_gain_order(loaded_corr):
    g = {k: coding_gain(make_basis(k, 32, loaded_corr), loaded_corr)
         for k in ("klt", "dct2", "polynomial")}
    assert g["klt"] >= g["dct2"] >= 1.0
    assert g["klt"] >= g["polynomial"] >= 1.0


def test_coding_gain_is_one_for_white_input():
    assert np.isclose(coding_gain(basis_dct2(8), np.eye(8)), 1.0)


def test_coding_gain_rejects_rank_deficient_input():
    P = correlation_analytic(ArrayGeometry(100), ClusterSpec.from_degrees(60.0, 7.2)).phi
    with pytest.raises(DomainError):
        coding_gain(basis_klt(P), P)     # trailing eigenvalues are numerically <= 0


@given(st.permutations(list(range(32))))
def test_coding_gain_ignores_column_order(loaded_corr, perm):
    B = basis_dct2(32)
    Bp = type(B)(B.q[:, perm], B.kind)
    assert np.isclose(coding_gain(B, loaded_corr), coding_gain(Bp, loaded_corr))


def test_truncation():
    B = basis_dct2(8)
    t = truncate(B, [3, 0, 5])
    assert t.m == 3
    np.testing.assert_array_equal(t.q_m, B.q[:, [3, 0, 5]])
    P = t.projector()
    np.testing.assert_allclose(P @ P, P, atol=1e-14)
    with pytest.raises(DomainError):
        truncate(B, [1, 1])
    with pytest.raises(DomainError):
        truncate(B, [8])


def test_basis_csv_round_trip(tmp_path):
    B = basis_dft(5)
    write_basis_csv(B, tmp_path / "q.csv")
    np.testing.assert_array_equal(read_basis_csv(tmp_path / "q.csv").q, B.q)
