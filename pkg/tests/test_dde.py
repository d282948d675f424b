import math

import numpy as np
import pytest

from wgfeedback.dde import NonFiniteStateError, StepSizeError, integrate_dde
from wgfeedback.network import DelaySystem, NetworkError


def scalar_system(a=-1.0, b=0.5, d=1.0):
    return DelaySystem(1, [[a]], ((d, [[b]]),))


def steps_solution(t, a=-1.0, b=0.5, d=1.0):
    """Method-of-steps series for x' = a x + b x(t - d), x(0) = 1, zero history."""
    out = 0.0
    k = 0
    while t - k * d >= 0:
        s = t - k * d
        out += b**k * s**k / math.factorial(k) * math.exp(a * s)
        k += 1
    return out


def test_matches_method_of_steps():
    traj = integrate_dde(scalar_system(), [1.0], 5.0, 0.01)
    exact = np.array([steps_solution(t) for t in traj.times])
    assert np.max(np.abs(traj.states[:, 0] - exact)) < 1e-8


def test_fourth_order_convergence():
    errs = []
    for dt in (0.1, 0.05):
        traj = integrate_dde(scalar_system(), [1.0], 4.0, dt)
        exact = np.array([steps_solution(t) for t in traj.times])
        errs.append(np.max(np.abs(traj.states[:, 0] - exact)))
    assert 10 < errs[0] / errs[1] < 24


def test_pure_ode_against_exponential():
    traj = integrate_dde(DelaySystem(1, [[-0.3 + 1j]]), [1.0], 2.0, 0.01)
    assert np.allclose(traj.states[:, 0], np.exp((-0.3 + 1j) * traj.times), atol=1e-10)


def test_linearity():
    sys = DelaySystem(2, [[-0.2, 0.1], [0.0, -0.3]], ((0.7, [[0.0, 0.2], [0.1, 0.0]]),))
    x1 = integrate_dde(sys, [1.0, 0.0], 3.0, 0.01).states
    x2 = integrate_dde(sys, [0.0, 1.0], 3.0, 0.01).states
    x3 = integrate_dde(sys, [2.0, -1j], 3.0, 0.01).states
    assert np.allclose(x3, 2 * x1 - 1j * x2, atol=1e-13)


def test_deterministic():
    a = integrate_dde(scalar_system(), [1.0], 3.0, 0.02).states
    b = integrate_dde(scalar_system(), [1.0], 3.0, 0.02).states
    assert np.array_equal(a, b)


def test_trailing_axes_batch():
    sys = scalar_system()
    batch = integrate_dde(sys, np.array([[1.0, 2.0]]), 2.0, 0.01).states
    single = integrate_dde(sys, [1.0], 2.0, 0.01).states
    assert np.allclose(batch[:, 0, 1], 2 * single[:, 0])


def test_interpolation_between_records():
    traj = integrate_dde(scalar_system(), [1.0], 3.0, 0.01)
    for t in (0.333, 1.5, 2.777):
        assert traj.at(t)[0] == pytest.approx(steps_solution(t), abs=1e-7)
    with pytest.raises(ValueError):
        traj.at(5.0)


def test_bad_step_sizes():
    with pytest.raises((StepSizeError, ValueError)):
        integrate_dde(scalar_system(), [1.0], 1.0, 0.0)
    with pytest.raises((StepSizeError, ValueError)):
        integrate_dde(scalar_system(), [1.0], 1.0, 2.0)


def test_delayed_terms_validated():
    with pytest.raises(NetworkError):
        DelaySystem(1, [[0.0]], ((0.0, [[1.0]]),))
    with pytest.raises(NetworkError):
        DelaySystem(1, [[float("inf")]])


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nonfinite_state_detected():
    with pytest.raises(NonFiniteStateError):
        integrate_dde(DelaySystem(1, [[1e3]]), [1.0], 5.0, 0.01)
