import numpy as np
import pytest

from frustrated_diffusions.core.errors import AnalysisError, ConvergenceError, ParameterError
from frustrated_diffusions.core.rng import INCREMENTS, brownian_increments, derive_stream
from frustrated_diffusions.core.series import MeanTrajectory
from frustrated_diffusions.schemas import InitialCondition, ModelParams
from frustrated_diffusions.services.limiting import (
    MeanFunctions,
    chaos_error,
    means_from_trajectory,
    picard_means,
    simulate_limiting_pair,
)
from frustrated_diffusions.services.particle_sim import drift_x, drift_y, simulate_particles
from frustrated_diffusions.tests.helpers import reference_params


def _weak(**fields):
    base = {"theta11": 1.0, "theta12": 0.5, "theta21": -0.5, "theta22": 1.0, "sigma": 0.3, "dt": 0.01, "steps": 100}
    base.update(fields)
    return ModelParams(**base)


def test_noiseless_picard_reproduces_the_euler_path():
    p = reference_params(2.0, 2.5, 0.0, dt=0.01, steps=100)
    means = picard_means(p, InitialCondition.uniform_value(0.8, 0.3), tol=1e-12, T=1.0, max_iter=200)
    x, y = 0.8, 0.3
    for k in range(100):
        x, y = x + p.dt * (-(x * x * x) + x - p.A * (x - y)), y + p.dt * (-(y * y * y) + y - p.B * (x - y))
    assert means.mx[-1] == pytest.approx(x, abs=1e-10)
    assert means.my[-1] == pytest.approx(y, abs=1e-10)
    assert means.horizon == pytest.approx(1.0)


def test_picard_residuals_decrease_under_weak_coupling():
    means = picard_means(_weak(), InitialCondition.iid_uniform(0.7, 0.9), tol=1e-9, mc_copies=2000, T=1.0)
    r = means.residuals
    assert len(r) >= 3
    assert all(b < a for a, b in zip(r, r[1:]))
    assert r[-1] < 1e-9


def test_picard_is_deterministic_for_a_seed():
    a = picard_means(_weak(), tol=1e-8, mc_copies=500, T=0.5)
    b = picard_means(_weak(), tol=1e-8, mc_copies=500, T=0.5)
    assert np.array_equal(a.mx, b.mx)


def test_picard_reports_non_convergence():
    with pytest.raises(ConvergenceError) as exc:
        picard_means(_weak(), tol=1e-14, mc_copies=100, T=1.0, max_iter=2)
    assert exc.value.exit_code == 4


def test_picard_rejects_horizons_off_the_grid():
    with pytest.raises(ParameterError):
        picard_means(_weak(), T=0.015)


def test_limiting_pair_reads_means_at_step_times():
    p = _weak(sigma=0.0)
    grid = np.linspace(0.0, 1.0, 11)
    means = MeanFunctions(grid=grid, mx=np.zeros(11), my=np.zeros(11))
    paths = simulate_limiting_pair(p, means, x0=[0.5], y0=[-0.5], steps=100)
    assert paths.x.shape == (101, 1)
    # decoupled from zero means: each coordinate is a damped cubic
    x = 0.5
    for _ in range(100):
        x = x + p.dt * (-(x * x * x) + x - p.alpha * p.theta11 * x - (1 - p.alpha) * p.theta12 * x)
    assert paths.x[-1, 0] == pytest.approx(x, abs=1e-12)


def test_limiting_pair_uses_injected_increments():
    p = _weak()
    means = MeanFunctions(grid=[0.0, 1.0], mx=[0.0, 0.0], my=[0.0, 0.0])
    dw = np.full((100, 2), 0.01)
    a = simulate_limiting_pair(p, means, x0=[0.0], y0=[0.0], dw=dw, steps=100)
    b = simulate_limiting_pair(p, means, x0=[0.0], y0=[0.0], dw=dw, steps=100)
    assert np.array_equal(a.x, b.x)
    assert a.x[1, 0] == pytest.approx(p.sigma * 0.01)


def test_limiting_pair_validation():
    p = _weak()
    means = MeanFunctions(grid=[0.0, 0.5], mx=[0.0, 0.0], my=[0.0, 0.0])
    with pytest.raises(ParameterError):
        simulate_limiting_pair(p, means, x0=[0.0], y0=[0.0], steps=100)
    with pytest.raises(ParameterError):
        simulate_limiting_pair(p, means, x0=[0.0], y0=[0.0], dw=np.zeros((10, 3)), steps=10)
    with pytest.raises(ParameterError):
        MeanFunctions(grid=[0.0, 0.0], mx=[0.0, 0.0], my=[0.0, 0.0])


def test_means_from_trajectory():
    traj = MeanTrajectory(t0=0.0, dt_sample=0.5, m1=[0.0, 1.0, 2.0], m2=[1.0, 1.0, 1.0])
    means = means_from_trajectory(traj)
    mx, my = means.at(0.75)
    assert mx == pytest.approx(1.5)
    assert my == pytest.approx(1.0)


def test_chaos_report_shape():
    p = reference_params(2.0, 2.5, 0.5, dt=0.01)
    report = chaos_error(p, n_values=(10, 40), replicas=4, T=0.2, picard_tol=1e-6, mc_copies=2000)
    assert report.n_values == [10, 40]
    assert all(e > 0 for e in report.errors)
    assert len(report.stderrs) == 2


def test_chaos_rejects_odd_sizes():
    with pytest.raises(ParameterError):
        chaos_error(reference_params(2.0, 2.5, 0.5), n_values=(11,), replicas=1)


@pytest.mark.slow
def test_propagation_of_chaos_rate():
    p = reference_params(2.0, 2.5, 0.5)
    report = chaos_error(p, replicas=200, T=1.0)
    assert report.fitted_slope == pytest.approx(-0.5, abs=0.15)


def test_chaos_error_vanishing_at_the_equilibrium_is_an_analysis_error():
    p = reference_params(2.0, 2.5, 0.0, dt=0.01)
    pinned = MeanFunctions(grid=[0.0, 1.0], mx=[1.0, 1.0], my=[1.0, 1.0])
    with pytest.raises(AnalysisError) as exc:
        chaos_error(p, n_values=(10, 20), replicas=2, T=0.2, ic=InitialCondition.uniform_value(1.0, 1.0), means=pinned)
    assert exc.value.exit_code == 4


def test_limiting_copies_average_to_the_picard_means():
    p = reference_params(2.0, 2.5, 0.5, dt=0.01)
    ic = InitialCondition.uniform_value(0.8, 0.8)
    means = picard_means(p, ic, tol=1e-6, mc_copies=20_000, T=1.0)
    copies = 10_000
    paths = simulate_limiting_pair(p, means, x0=np.full(copies, 0.8), y0=np.full(copies, 0.8), steps=100)
    for end, target in ((paths.x[-1], means.mx[-1]), (paths.y[-1], means.my[-1])):
        stderr = np.std(end, ddof=1) / np.sqrt(copies)
        # both sides are Monte Carlo estimates
        assert abs(np.mean(end) - target) < 3.0 * np.sqrt(2.0) * stderr


def test_chaos_reruns_are_bit_identical():
    p = reference_params(2.0, 2.5, 0.5, dt=0.01)
    means = picard_means(p, tol=1e-6, mc_copies=2000, T=0.2)
    a = chaos_error(p, n_values=(10, 40), replicas=3, T=0.2, means=means)
    b = chaos_error(p, n_values=(10, 40), replicas=3, T=0.2, means=means)
    assert a.errors == b.errors
    assert a.stderrs == b.stderrs


def test_particles_and_limiting_copies_consume_the_same_increments():
    p = reference_params(2.0, 2.5, 0.5, n1=10, n2=10, steps=50, dt=0.01)
    run = simulate_particles(p, sample_stride=1, track=(0, 10))
    traj = run.trajectory
    dw = brownian_increments(derive_stream(p.seed, INCREMENTS, 0), p.steps, p.dt, (0, 10))
    x, y = run.tracked[:, 0], run.tracked[:, 1]
    for k in range(p.steps):
        implied_x = (x[k + 1] - x[k] - p.dt * drift_x(x[k], traj.m1[k], traj.m2[k], p)) / p.sigma
        implied_y = (y[k + 1] - y[k] - p.dt * drift_y(y[k], traj.m1[k], traj.m2[k], p)) / p.sigma
        assert implied_x == pytest.approx(dw[k, 0], abs=1e-12)
        assert implied_y == pytest.approx(dw[k, 1], abs=1e-12)
    narrow = brownian_increments(derive_stream(p.seed, INCREMENTS, 0), p.steps, p.dt, (0,))
    assert np.array_equal(narrow[:, 0], dw[:, 0])
