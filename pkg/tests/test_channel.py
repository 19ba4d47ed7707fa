import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from rrmimo.channel import (ArrayGeometry, ClusterSpec, LargeScaleFading, PilotBlock,
                            beta_for_snr, correlation_analytic, draw_channel, draw_channels,
                            make_pilot, pilot_snr, project_psd, steering_vector, subpath_angles,
                            synthesize_rx)
from rrmimo.errors import DomainError
from rrmimo.rng import complex_normal, derive_seed, make_rng, trial_rng


def test_steering_vector_quarter_turns():
    # sin(30 deg) = 1/2 gives a phase step of -pi/2
    a = steering_vector(ArrayGeometry(4), np.radians(30.0))
    np.testing.assert_allclose(a, [1, -1j, -1, 1j], atol=1e-15)


def test_steering_vector_broadside_is_all_ones():
    np.testing.assert_array_equal(steering_vector(ArrayGeometry(6), 0.0), np.ones(6))


@given(st.floats(-1.5, 1.5), st.integers(2, 40))
def test_steering_vector_unit_modulus(phi, M):
    a = steering_vector(ArrayGeometry(M), phi)
    np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-12)


def test_steering_vector_batch_shape():
    A = steering_vector(ArrayGeometry(5), np.radians([-10.0, 0.0, 20.0]))
    assert A.shape == (5, 3)
    np.testing.assert_allclose(A[:, 2], steering_vector(ArrayGeometry(5), np.radians(20.0)))


def test_steering_vector_rejects_endfire():
    with pytest.raises(DomainError):
        steering_vector(ArrayGeometry(4), np.pi / 2 + 0.1)


@pytest.mark.parametrize("M,xi", [(1, 0.5), (4, 0.0), (4, -1.0), (2.5, 0.5)])
def test_geometry_validation(M, xi):
    with pytest.raises(DomainError):
        ArrayGeometry(M, xi)


@pytest.mark.parametrize("phi,delta", [(80.0, 15.0), (-85.0, 7.2), (0.0, 0.0), (0.0, -1.0)])
def test_cluster_must_stay_inside_the_half_plane(phi, delta):
    with pytest.raises(DomainError):
        ClusterSpec.from_degrees(phi, delta)


def test_cluster_rejects_bad_law():
    with pytest.raises(DomainError):
        ClusterSpec.from_degrees(0.0, 5.0, aoa_distribution="laplacian")


def test_fixed_offset_subpaths_are_cell_midpoints():
    cl = ClusterSpec.from_degrees(10.0, 4.0, num_subpaths=4, aoa_distribution="fixed-offset")
    ang = np.degrees(subpath_angles(cl, make_rng(0)))
    np.testing.assert_allclose(ang, [7.0, 9.0, 11.0, 13.0])


def test_uniform_subpaths_stay_inside_the_cluster():
    cl = ClusterSpec.from_degrees(60.0, 7.2)
    ang = np.degrees(subpath_angles(cl, make_rng(3), batch=500))
    assert ang.min() >= 52.8 and ang.max() <= 67.2


def _quad_entry(k, phi0, delta, xi=0.5):
    """Independent oracle: E{exp(-j 2 pi xi k sin(theta))}, theta ~ U[phi0-delta, phi0+delta]."""
    f = lambda t, part: part(np.exp(-2j * np.pi * xi * k * np.sin(t))) / (2 * delta)
    lo, hi = phi0 - delta, phi0 + delta
    re = quad(f, lo, hi, args=(np.real,), limit=200, epsabs=1e-13)[0]
    im = quad(f, lo, hi, args=(np.imag,), limit=200, epsabs=1e-13)[0]
    return re + 1j * im


@pytest.mark.parametrize("phi_deg,delta_deg", [(60.0, 7.2), (0.0, 15.0), (-30.0, 3.0)])
def test_analytic_correlation_matches_adaptive_quadrature(phi_deg, delta_deg):
    geom = ArrayGeometry(100)
    P = correlation_analytic(geom, ClusterSpec.from_degrees(phi_deg, delta_deg)).phi
    phi0, delta = np.radians(phi_deg), np.radians(delta_deg)
    for k in (1, 7, 50, 99):
        assert abs(P[k, 0] - _quad_entry(k, phi0, delta)) < 1e-9


def test_analytic_correlation_structure():
    P = correlation_analytic(ArrayGeometry(100), ClusterSpec.from_degrees(60.0, 7.2)).phi
    np.testing.assert_allclose(np.diag(P), 1.0, atol=1e-12)
    np.testing.assert_allclose(P, P.conj().T, atol=1e-14)
    np.testing.assert_allclose(P[1:, 1:], P[:-1, :-1], atol=1e-14)   # Toeplitz
    assert np.linalg.eigvalsh(P).min() > -1e-9


def test_narrow_cluster_tends_to_a_point_source():
    geom = ArrayGeometry(16)
    P = correlation_analytic(geom, ClusterSpec.from_degrees(20.0, 1e-4)).phi
    a = steering_vector(geom, np.radians(20.0))
    np.testing.assert_allclose(P, np.outer(a, a.conj()), atol=1e-6)


def test_symmetric_broadside_cluster_is_real():
    P = correlation_analytic(ArrayGeometry(32), ClusterSpec.from_degrees(0.0, 15.0)).phi
    assert np.max(np.abs(P.imag)) < 1e-12


def test_multicluster_correlation_is_the_mixture():
    geom = ArrayGeometry(20)
    c1, c2 = ClusterSpec.from_degrees(60.0, 7.2), ClusterSpec.from_degrees(15.0, 15.0)
    P = correlation_analytic(geom, [c1, c2]).phi
    P1 = correlation_analytic(geom, c1).phi
    P2 = correlation_analytic(geom, c2).phi
    np.testing.assert_allclose(P, (P1 + P2) / 2, atol=1e-12)


def test_ensemble_correlation_matches_quadrature_within_3se():
    # [Phi]_12 from 1e5 draws of the subpath model against the quadrature value
    geom = ArrayGeometry(8)
    cl = ClusterSpec.from_degrees(0.0, 15.0)
    H = draw_channels(geom, cl, 100_000, seed=11)
    x = H[0] * H[1].conj()
    se = np.std(x) / np.sqrt(x.size)
    ref = correlation_analytic(geom, cl).phi[0, 1]
    assert abs(x.mean() - ref) < 3 * se


def test_channel_draws_have_unit_average_power():
    geom = ArrayGeometry(50)
    H = draw_channels(geom, ClusterSpec.from_degrees(60.0, 7.2), 4000, seed=5)
    p = np.mean(np.abs(H) ** 2)
    assert abs(p - 1.0) < 0.05
    iid = draw_channels(geom, None, 4000, seed=5)
    assert abs(np.mean(np.abs(iid) ** 2) - 1.0) < 0.01


def test_single_draw_is_deterministic():
    geom = ArrayGeometry(10)
    cl = ClusterSpec.from_degrees(30.0, 5.0)
    np.testing.assert_array_equal(draw_channel(geom, cl, 42).h, draw_channel(geom, cl, 42).h)


def test_trial_streams_are_order_independent():
    a = [trial_rng(7, 0, t, 1).standard_normal() for t in range(5)]
    b = [trial_rng(7, 0, t, 1).standard_normal() for t in reversed(range(5))][::-1]
    assert a == b
    assert derive_seed(7, 1, 2).spawn_key == (1, 2)
    assert trial_rng(7, 0, 0, 0).standard_normal() != trial_rng(7, 0, 0, 1).standard_normal()


def test_complex_normal_moments():
    z = complex_normal(make_rng(0), 200_000)
    assert abs(np.mean(np.abs(z) ** 2) - 1.0) < 0.01
    assert abs(np.mean(z ** 2)) < 0.01     # circular


@pytest.mark.parametrize("T,K", [(16, 1), (16, 4), (10, 10)])
def test_pilots_are_orthogonal_with_energy_T(T, K):
    P = np.stack([p.pilot for p in make_pilot(T, K)])
    np.testing.assert_allclose(P.conj() @ P.T, T * np.eye(K), atol=1e-10)
    np.testing.assert_allclose(np.abs(P), 1.0)


def test_pilot_validation():
    with pytest.raises(DomainError):
        make_pilot(4, 5)
    with pytest.raises(DomainError):
        PilotBlock(np.zeros(3))


@given(st.floats(1e-3, 1e3), st.integers(1, 64))
def test_snr_and_beta_are_inverse(alpha, T):
    p = make_pilot(T)[0]
    assert np.isclose(pilot_snr(beta_for_snr(alpha, p), p), alpha)
    assert np.isclose(beta_for_snr(alpha, p), alpha)      # ||p||^2 = T for DFT rows


def test_noiseless_received_block():
    h = complex_normal(make_rng(1), 6)
    p = make_pilot(8)[0]
    Y = synthesize_rx(h, 2.0, p, noise_std=0)
    np.testing.assert_allclose(Y, np.sqrt(2.0) * np.outer(h, p.pilot.conj()))
    np.testing.assert_allclose(Y @ p.pilot, np.sqrt(2.0) * 8 * h)


def test_multiuser_block_separates_with_orthogonal_pilots():
    rng = make_rng(2)
    hs = [complex_normal(rng, 5) for _ in range(3)]
    ps = make_pilot(8, 3)
    Y = synthesize_rx(hs, [1.0, 2.0, 0.5], ps, noise_std=0)
    for h, b, p in zip(hs, [1.0, 2.0, 0.5], ps):
        np.testing.assert_allclose(Y @ p.pilot, np.sqrt(b) * 8 * h, atol=1e-12)


def test_lsfc_sampling():
    f = LargeScaleFading.sample(100.0, 3.5, 0.0, seed=0)
    assert np.isclose(f.beta, 100.0 ** -3.5)
    with pytest.raises(DomainError):
        LargeScaleFading.sample(100.0, 2.0, 8.0)
    with pytest.raises(DomainError):
        LargeScaleFading(beta=0.0)


@settings(max_examples=30)
@given(st.integers(2, 12), st.integers(0, 2**31))
def test_psd_projection(M, seed):
    rng = make_rng(seed)
    A = complex_normal(rng, (M, M))
    H = A + A.conj().T
    P = project_psd(H)
    assert np.linalg.eigvalsh(P).min() > -1e-10
    G = A @ A.conj().T
    np.testing.assert_allclose(project_psd(G), G, atol=1e-9)
