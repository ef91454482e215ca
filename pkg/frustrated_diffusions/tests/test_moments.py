import numpy as np
import pytest

from frustrated_diffusions.core.errors import DivergenceError, NoSignChangeError, ParameterError
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.services.moments import (
    MomentState,
    find_sigma_c,
    hopf_eigenvalues,
    hopf_eigenvalues_closed_form,
    hopf_equilibrium,
    hopf_equilibrium_closed_form,
    hopf_scan,
    integrate_moments,
    moment_jacobian,
    moment_rhs,
    quadrature_moment_rhs,
    simulate_tilde,
    tilde_error,
    write_hopf_csv,
)
from frustrated_diffusions.services.rhythm import count_returns, poincare_periods
from frustrated_diffusions.services.zero_noise import integrate_planar
from frustrated_diffusions.tests.helpers import reference_params


def test_closure_drift_matches_gaussian_quadrature():
    p = reference_params(2.0, 2.5, 0.5)
    rng = np.random.default_rng(3)
    for _ in range(100):
        m1, m2 = rng.uniform(-2.0, 2.0, 2)
        v1, v2 = rng.uniform(0.0, 2.0, 2)
        s = MomentState(m1, m2, v1, v2)
        np.testing.assert_allclose(
            moment_rhs(s, p).as_array(), quadrature_moment_rhs(s, p).as_array(), rtol=1e-12, atol=1e-10
        )


def test_symmetric_equilibrium_closed_form():
    for A, B, _ in [(2.0, 2.5, 0.5), (2.0, 4.0, 0.1), (2.0, 7.0, 0.6)]:
        p = reference_params(A, B, 0.0)
        for sigma in (0.0, 0.7, 2.0, 3.9):
            assert hopf_equilibrium(p, sigma) == pytest.approx(hopf_equilibrium_closed_form(A, B, sigma), abs=1e-12)
            v1, v2 = hopf_equilibrium(p, sigma)
            rates = moment_rhs(MomentState(0.0, 0.0, v1, v2), p.updated(sigma=sigma)).as_array()
            assert np.max(np.abs(rates)) < 1e-10


@pytest.mark.parametrize("A,B", [(2.0, 2.5), (2.0, 4.0), (2.0, 7.0)])
def test_closed_form_spectrum_matches_jacobian(A, B):
    p = reference_params(A, B, 0.0)
    for sigma in np.linspace(0.0, 4.0, 50):
        v1, v2 = hopf_equilibrium(p, sigma)
        numeric = np.linalg.eigvals(moment_jacobian(MomentState(0.0, 0.0, v1, v2), p))
        closed = hopf_eigenvalues_closed_form(A, B, sigma)
        assert max(np.min(np.abs(numeric - c)) for c in closed) < 1e-8
        lams = hopf_eigenvalues(p, sigma)
        assert lams[2].real < 0 and lams[3].real < 0


@pytest.mark.parametrize("A,B,expected", [(2.0, 2.5, 1.65), (2.0, 4.0, 2.00), (2.0, 7.0, 2.45)])
def test_hopf_noise_levels(A, B, expected):
    p = reference_params(A, B, 0.0)
    sigma_c = find_sigma_c(p, 0.5, 4.0)
    assert sigma_c == pytest.approx(expected, abs=0.05)
    below, above = hopf_eigenvalues(p, sigma_c - 0.1), hopf_eigenvalues(p, sigma_c + 0.1)
    assert below[0].real > 0 > above[0].real
    assert abs(below[0].imag) > 0


def test_sigma_c_needs_a_sign_change():
    with pytest.raises(NoSignChangeError):
        find_sigma_c(reference_params(2.0, 4.0, 0.0), 3.0, 4.0)


def test_hopf_scan_table(tmp_path):
    report = hopf_scan(reference_params(2.0, 4.0, 0.0), np.linspace(0.0, 4.0, 41))
    assert report.eigen_table.shape == (41, 4)
    assert report.sigma_c == pytest.approx(2.0, abs=1e-5)
    write_hopf_csv(tmp_path / "hopf.csv", report)
    lines = (tmp_path / "hopf.csv").read_text().splitlines()
    assert lines[0] == "sigma,re_l1,im_l1,re_l2,im_l2,l3,l4"
    assert len(lines) == 42


def test_noiseless_closure_reduces_to_planar_system():
    for A, B in [(2.0, 2.5), (2.0, 4.0), (2.0, 7.0)]:
        p = reference_params(A, B, 0.0)
        traj = integrate_moments(MomentState(0.8, 0.3, 0.0, 0.0), p, 10.0, dt_ode=0.01, sample_stride=1)
        end = integrate_planar(np.array([[0.8, 0.3]]), A, B, 10.0, dt=0.01)[0]
        assert abs(traj.m1[-1] - end[0]) < 1e-10
        assert abs(traj.m2[-1] - end[1]) < 1e-10
        assert np.all(traj.v1 == 0.0) and np.all(traj.v2 == 0.0)


def test_noiseless_closure_settles_on_diagonal_equilibrium():
    traj = integrate_moments(MomentState(0.8, 0.8, 0.0, 0.0), reference_params(2.0, 2.5, 0.0), 20.0, sample_stride=1000)
    assert traj.m1[-1] == pytest.approx(1.0, abs=1e-6)
    assert traj.m2[-1] == pytest.approx(1.0, abs=1e-6)
    assert len(traj) == 21


def test_large_noise_damps_the_means():
    traj = integrate_moments(MomentState(0.8, 0.8, 0.0, 0.0), reference_params(2.0, 2.5, 5.0), 50.0, sample_stride=1000)
    assert abs(traj.m1[-1]) < 1e-3 and abs(traj.m2[-1]) < 1e-3
    assert traj.v1[-1] > 0 and traj.v2[-1] > 0


def test_divergence_is_reported():
    with pytest.raises(DivergenceError) as info:
        integrate_moments(MomentState(100.0, 0.0, 0.0, 0.0), reference_params(2.0, 2.5, 0.5), 10.0, dt_ode=0.1)
    assert info.value.step is not None


def test_invalid_integration_inputs():
    p = reference_params(2.0, 2.5, 0.5)
    with pytest.raises(ParameterError):
        integrate_moments(MomentState(0.8, 0.8, 0.0, 0.0), p, 1.0, dt_ode=0.0)
    with pytest.raises(ParameterError):
        integrate_moments(MomentState(0.8, 0.8, -1.0, 0.0), p, 1.0)


def test_tilde_paths_need_variances():
    p = reference_params(2.0, 2.5, 0.1, dt=0.01, steps=10)
    bare = MeanTrajectory(t0=0.0, dt_sample=0.01, m1=np.zeros(11), m2=np.zeros(11))
    with pytest.raises(ParameterError):
        simulate_tilde(p, bare)


def test_tilde_paths_centre_on_the_moments():
    p = reference_params(2.0, 2.5, 0.1, dt=0.01, steps=100)
    moments = integrate_moments(MomentState(0.8, 0.8, 0.0, 0.0), p, 1.0, dt_ode=0.01, sample_stride=1, method="euler")
    path = simulate_tilde(p, moments, n_paths=4)
    assert path.xt.shape == (101, 4)
    assert np.allclose(path.xt[0], 0.8) and np.allclose(path.yt[0], 0.8)
    with pytest.raises(ParameterError):
        simulate_tilde(p, moments, steps=1000)


def test_small_tilde_error_run():
    p = reference_params(2.0, 2.5, 0.1, dt=0.01)
    report = tilde_error(p, sigmas=(0.05, 0.1), replicas=20, T=0.5, mc_copies=2000, picard_tol=1e-5)
    assert report.replicas == 20
    assert len(report.errors) == 2
    assert all(e >= 0 for e in report.errors)


@pytest.mark.slow
@pytest.mark.parametrize("A,B,sigma", [(2.0, 2.5, 0.5), (2.0, 4.0, 0.1), (2.0, 7.0, 0.6)])
def test_closure_oscillates_below_the_hopf_level(A, B, sigma):
    traj = integrate_moments(MomentState(0.8, 0.8, 0.0, 0.0), reference_params(A, B, sigma), 500.0, dt_ode=0.002, sample_stride=10)
    assert count_returns(traj, 100.0) >= 10
    est = poincare_periods(traj, 100.0)
    assert est.std_period / est.mean_period < 0.05
    assert np.ptp(traj.after(100.0).m2) > 1e-3


@pytest.mark.slow
def test_tilde_error_scales_quadratically():
    report = tilde_error(reference_params(2.0, 2.5, 0.1, dt=0.001), replicas=1000, T=1.0)
    assert report.fitted_slope == pytest.approx(2.0, abs=0.3)


def test_tilde_path_without_noise_is_the_moment_path():
    p = reference_params(2.0, 2.5, 0.1, dt=0.01, steps=100)
    moments = integrate_moments(MomentState(0.8, 0.3, 0.0, 0.0), p, 1.0, dt_ode=0.01, sample_stride=1, method="euler")
    path = simulate_tilde(p, moments, n_paths=3, dw=np.zeros((100, 6)))
    assert np.all(path.z1 == 0.0) and np.all(path.z2 == 0.0)
    assert np.array_equal(path.xt[:, 0], moments.m1)
    assert np.array_equal(path.yt[:, 2], moments.m2)


def test_tilde_replica_variance_follows_the_closure():
    sigma, paths = 0.1, 10_000
    p = reference_params(2.0, 2.5, sigma, dt=0.001, steps=1000)
    moments = integrate_moments(MomentState(0.8, 0.8, 0.0, 0.0), p, 1.0, dt_ode=0.001, sample_stride=1, method="euler")
    path = simulate_tilde(p, moments, n_paths=paths)
    for z, v in ((path.z1[-1], moments.v1[-1]), (path.z2[-1], moments.v2[-1])):
        V = v / sigma**2
        assert abs(np.var(z, ddof=1) - V) < 3.0 * V * np.sqrt(2.0 / (paths - 1))
