# frustrated_diffusions/tests/helpers.py
from frustrated_diffusions.schemas import ModelParams


def reference_params(A: float, B: float, sigma: float, **fields) -> ModelParams:
    """alpha = 1/2, theta11 = theta22 = 8, N = 1000 unless overridden."""
    base = {"n1": 500, "n2": 500, "theta11": 8.0, "theta22": 8.0, "dt": 0.005, "steps": 1000}
    base.update(fields)
    return ModelParams.from_coupling(A, B, 0.5, sigma=sigma, **base)
