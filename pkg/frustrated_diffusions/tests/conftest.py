# frustrated_diffusions/tests/conftest.py
import pytest

from frustrated_diffusions.core.settings import settings
from frustrated_diffusions.tests.helpers import reference_params


@pytest.fixture(autouse=True)
def isolated_output_root(tmp_path, monkeypatch):
    """
    Keep every run under tmp_path, whether code reads the env var
    or the already-built settings object.
    """
    root = tmp_path / "runs"
    monkeypatch.setenv("FD_OUTPUT_ROOT", str(root))
    monkeypatch.setattr(settings, "output_root", str(root), raising=True)
    monkeypatch.setattr(settings, "threads", 1, raising=True)
    yield root


@pytest.fixture
def row1_params():
    return reference_params(2.0, 2.5, 0.5)


@pytest.fixture
def small_params():
    return reference_params(2.0, 2.5, 0.5, n1=20, n2=20, steps=200, seed=7)
