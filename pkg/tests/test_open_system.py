import math

import numpy as np
import pytest
from scipy.linalg import expm

from wgfeedback.open_system import (
    EXCITED,
    GROUND,
    BlochVector,
    DensityMatrixError,
    DriveParams,
    FeedbackParams,
    TrappedRegimeError,
    bloch_drift,
    bloch_to_density,
    bloch_trajectory,
    char_poly_bloch,
    check_density,
    compensation_rabi,
    density_to_bloch,
    feedback_drift,
    feedback_time_constant,
    lindblad_generator,
    lindblad_rhs,
    lindblad_step,
    steady_sigma_z,
    steady_sigma_z_decay,
    steady_sigma_z_feedback,
    steady_sigma_z_feedback_approx,
)


def test_param_validation():
    with pytest.raises(ValueError):
        DriveParams(rabi=-1.0)
    with pytest.raises(ValueError):
        DriveParams(gamma_eff=float("nan"))
    with pytest.raises(ValueError):
        FeedbackParams(g_f=-1.0)
    with pytest.raises(NotImplementedError):
        FeedbackParams(1.0, 0.5, eta=0.5)


def test_bloch_vector_helpers():
    g = BlochVector.ground()
    assert g.is_physical() and g.purity_radius() == 1.0
    assert not BlochVector(0.6, 0.6, 0.5).is_physical()
    assert BlochVector.from_array(g.as_array()) == g


def test_bloch_drift_matches_lindblad():
    p = DriveParams(0.7, 0.3, 0.4)
    A, B = bloch_drift(p)
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = rng.normal(size=3)
        v *= 0.9 / np.linalg.norm(v)
        b = BlochVector((v[0] + 1j * v[1]) / 2, (v[0] - 1j * v[1]) / 2, v[2])
        rho = bloch_to_density(b)
        drho = lindblad_rhs(rho, p)
        lhs = np.array([drho[1, 0], drho[0, 1], drho[0, 0] - drho[1, 1]])
        assert np.allclose(lhs, A @ b.as_array() - B, atol=1e-14)


def test_density_bloch_roundtrip():
    b = BlochVector(0.1 + 0.2j, 0.1 - 0.2j, 0.3)
    assert np.allclose(density_to_bloch(bloch_to_density(b)).as_array(), b.as_array(), atol=1e-15)


def test_char_poly_roots_are_eigenvalues():
    p = DriveParams(0.9, 0.4, 0.3)
    A, _ = bloch_drift(p)
    for lam in np.linalg.eigvals(A):
        assert abs(char_poly_bloch(lam, p)) < 1e-10


@pytest.mark.parametrize("G,Y,W", [(0.3, 0.0, 0.0), (0.1, 0.5, 1.2), (1.0, -0.8, 0.4)])
def test_steady_state_formula(G, Y, W):
    p = DriveParams(W, Y, G)
    A, B = bloch_drift(p)
    x = bloch_trajectory(A, B, [0, 0, -1], [60 / G])[-1]
    assert x[2].real == pytest.approx(steady_sigma_z(p), abs=1e-10)


def test_undriven_decays_to_ground():
    assert steady_sigma_z(DriveParams(0, 0.3, 0.5)) == -1.0


def test_trapped_regime_raises():
    with pytest.raises(TrappedRegimeError):
        steady_sigma_z(DriveParams(0.5, 0.0, 0.0))


def test_compensation_drive():
    W = compensation_rabi(0.5, 0.6)
    assert W == pytest.approx(0.8)
    assert steady_sigma_z_decay(DriveParams(W, 0.0, 0.6, 0.5)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        compensation_rabi(0.1, 0.6)


def test_bloch_trajectory_matches_expm():
    p = DriveParams(0.5, 0.2, 0.3)
    A, B = bloch_drift(p)
    t = np.linspace(0, 4, 9)
    x = bloch_trajectory(A, B, [0, 0, -1], t)
    x_inf = np.linalg.solve(A, B)
    ref = np.array([x_inf + expm(A * s) @ (np.array([0, 0, -1]) - x_inf) for s in t])
    assert np.allclose(x, ref, atol=1e-12)


def test_lindblad_step_trace_and_positivity():
    p = DriveParams(1.0, 0.3, 0.5)
    rho = GROUND.copy()
    for _ in range(1600):
        rho = lindblad_step(rho, p, 0.05)
        check_density(rho)
    z = (rho[0, 0] - rho[1, 1]).real
    assert z == pytest.approx(steady_sigma_z(p), abs=1e-6)


def test_lindblad_generator_consistent():
    p = DriveParams(0.6, -0.2, 0.4)
    rho = bloch_to_density(BlochVector(0.1, 0.1, 0.2))
    assert np.allclose((lindblad_generator(p) @ rho.reshape(-1)).reshape(2, 2), lindblad_rhs(rho, p))


def test_lossless_excited_invariant():
    p = DriveParams(0.0, 0.7, 0.0)
    rho = EXCITED.copy()
    for _ in range(500):
        rho = lindblad_step(rho, p, 0.02)
    assert np.max(np.abs(rho - EXCITED)) < 1e-12


def test_lindblad_refuses_environment_loss():
    with pytest.raises(ValueError):
        lindblad_step(GROUND, DriveParams(0.0, 0.0, 0.1, 0.2), 0.01)


def test_check_density_errors():
    with pytest.raises(DensityMatrixError):
        check_density(np.diag([1.5, -0.5]))
    with pytest.raises(DensityMatrixError):
        check_density(np.array([[0.5, 0.1], [0.2, 0.5]]))


def test_feedback_steady_state_no_drive():
    drive, fb = DriveParams(0.0, 0.0, 0.01), FeedbackParams(math.sqrt(3.0), 0.5)
    assert steady_sigma_z_feedback(drive, fb) == pytest.approx(-1 / 601)


def test_feedback_steady_state_with_drive_matches_flow():
    drive, fb = DriveParams(0.8, 0.1, 0.2), FeedbackParams(0.7, 0.4)
    A = feedback_drift(drive, fb)
    B = np.array([0, 0, drive.gamma_eff])
    x = bloch_trajectory(A, B, [0, 0, -1], [400.0])[-1]
    assert x[2].real == pytest.approx(steady_sigma_z_feedback(drive, fb), abs=1e-9)


def test_feedback_approx_close_for_strong_feedback():
    drive, fb = DriveParams(0.5, 0.0, 0.01), FeedbackParams(math.sqrt(3.0), 0.5)
    exact = steady_sigma_z_feedback(drive, fb)
    assert steady_sigma_z_feedback_approx(drive, fb) == pytest.approx(exact, rel=1e-2)


def test_record_coupling_flag():
    drive, fb = DriveParams(0.5, 0.0, 0.1), FeedbackParams(0.5, 0.5)
    a, b = feedback_drift(drive, fb), feedback_drift(drive, fb, include_record_coupling=True)
    assert a[0, 1] != b[0, 1] and a[2, 2] == b[2, 2]


def test_time_constant():
    drive, fb = DriveParams(0.0, 0.0, 0.01), FeedbackParams(math.sqrt(0.1), 0.5)
    assert feedback_time_constant(drive, fb) == pytest.approx(1 / 0.21)
