import numpy as np
import pytest

from frustrated_diffusions.core.errors import ParameterError, SeriesFormatError
from frustrated_diffusions.core.series import MeanTrajectory, read_series, write_series


def _traj(n=11, with_var=False):
    t = np.arange(n)
    return MeanTrajectory(
        t0=0.5,
        dt_sample=0.1,
        m1=np.sin(t / 3.0),
        m2=np.cos(t / 7.0) / 3.0,
        v1=np.full(n, 0.25) if with_var else None,
        v2=np.linspace(0, 1, n) if with_var else None,
    )


def test_series_file_is_exact(tmp_path):
    traj = _traj(with_var=True)
    path = tmp_path / "out" / "series.csv"
    write_series(path, traj)
    text = path.read_text()
    assert text.splitlines()[1] == "t,m1,m2,v1,v2"
    assert "\r" not in text
    back = read_series(path)
    assert back.t0 == traj.t0 and back.dt_sample == traj.dt_sample
    assert np.array_equal(back.m1, traj.m1)
    assert np.array_equal(back.v2, traj.v2)


def test_time_base_inferred_without_metadata(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("t,m1,m2\n1.0,0.1,0.2\n1.5,0.3,0.4\n2.0,0.5,0.6\n")
    traj = read_series(path)
    assert traj.t0 == 1.0
    assert traj.dt_sample == pytest.approx(0.5)
    assert not traj.has_variances


@pytest.mark.parametrize(
    "content",
    [
        "time,a,b\n0,1,2\n",
        "t,m1,m2\n0,1\n",
        "t,m1,m2\n0,1,x\n1,2,3\n",
        "",
    ],
)
def test_malformed_series(tmp_path, content):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(SeriesFormatError):
        read_series(path)


def test_after_and_thinned():
    traj = _traj(n=21)
    tail = traj.after(1.0)
    assert tail.t0 == pytest.approx(1.0)
    assert len(tail) == 16
    thin = traj.thinned(5)
    assert len(thin) == 5
    assert thin.dt_sample == pytest.approx(0.5)
    assert np.array_equal(thin.m1, traj.m1[::5])


def test_trajectory_validation():
    with pytest.raises(ParameterError):
        MeanTrajectory(t0=0.0, dt_sample=0.1, m1=np.zeros(3), m2=np.zeros(4))
    with pytest.raises(ParameterError):
        MeanTrajectory(t0=0.0, dt_sample=0.0, m1=np.zeros(3), m2=np.zeros(3))
    with pytest.raises(ParameterError):
        MeanTrajectory(t0=0.0, dt_sample=0.1, m1=np.zeros(3), m2=np.zeros(3), v1=np.zeros(3))
