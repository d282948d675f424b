"""Single driven atom in front of the mirror, traced over the waveguide.

Bloch vector ordering is (<s+>, <s->, <sz>) and the mean equations read
``x' = A x - B`` with ``B = (0, 0, Gamma_eff)``.  Basis for density
matrices: index 0 is the excited state, index 1 the ground state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .laplace import limit_at_zero

SIGMA_P = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_M = SIGMA_P.T.copy()
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
EXCITED = np.diag([1.0, 0.0]).astype(complex)
GROUND = np.diag([0.0, 1.0]).astype(complex)


class TrappedRegimeError(ValueError):
    """Steady state undefined: no dissipation (Gamma_eff = 0)."""


class DensityMatrixError(ValueError):
    pass


class SteadyStateMismatch(ArithmeticError):
    pass


@dataclass(frozen=True)
class BlochVector:
    sp: complex
    sm: complex
    sz: complex

    def as_array(self) -> np.ndarray:
        return np.array([self.sp, self.sm, self.sz], dtype=complex)

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        return cls(complex(v[0]), complex(v[1]), complex(v[2]))

    @classmethod
    def ground(cls) -> "BlochVector":
        return cls(0j, 0j, -1 + 0j)

    @classmethod
    def excited(cls) -> "BlochVector":
        return cls(0j, 0j, 1 + 0j)

    @property
    def x(self) -> complex:
        return self.sp + self.sm

    def purity_radius(self) -> float:
        """Re(sz)^2 + 4 |s+|^2; at most 1 for a physical state."""
        return self.sz.real**2 + 4 * abs(self.sp) ** 2

    def is_physical(self, tol: float = 1e-6) -> bool:
        return (
            abs(self.sm - self.sp.conjugate()) < 1e-9
            and abs(self.sz.real) <= 1 + 1e-9
            and self.purity_radius() <= 1 + tol
        )


@dataclass(frozen=True)
class DriveParams:
    rabi: float = 0.0
    detuning_Y: float = 0.0
    gamma_eff: float = 0.0
    gamma_env: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rabi", "detuning_Y", "gamma_eff", "gamma_env"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.rabi < 0 or self.gamma_eff < 0 or self.gamma_env < 0:
            raise ValueError("rabi, gamma_eff and gamma_env must be >= 0")

    @property
    def y_complex(self) -> complex:
        """Y' = Y + i gamma_0 (environment loss folded into the detuning)."""
        return complex(self.detuning_Y, self.gamma_env)


@dataclass(frozen=True)
class FeedbackParams:
    g_f: float = 0.0
    gamma_1R: float = 0.0
    eta: float = 1.0
    meas_strength: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.g_f) and self.g_f >= 0):
            raise ValueError("g_f must be finite and >= 0")
        if not (math.isfinite(self.gamma_1R) and self.gamma_1R >= 0):
            raise ValueError("gamma_1R must be finite and >= 0")
        if not (0 < self.eta <= 1 and 0 < self.meas_strength <= 1):
            raise ValueError("eta and meas_strength must lie in (0, 1]")
        if self.eta != 1 or self.meas_strength != 1:
            raise NotImplementedError("only unit detection efficiency and measurement strength are supported")


def bloch_drift(p: DriveParams) -> tuple[np.ndarray, np.ndarray]:
    y = p.y_complex
    G, W = p.gamma_eff, p.rabi
    A = np.array(
        [
            [-1j * y - G / 2, 0, -0.5j * W],
            [0, 1j * y - G / 2, 0.5j * W],
            [-1j * W, 1j * W, -G],
        ],
        dtype=complex,
    )
    return A, np.array([0, 0, G], dtype=complex)


def char_poly_bloch(s: complex, p: DriveParams) -> complex:
    G, W, y = p.gamma_eff, p.rabi, p.y_complex
    return ((s + G / 2) ** 2 + y * y) * (s + G) + W * W * (s + G / 2)


def affine_propagator(A: np.ndarray, B: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """(Phi, c) with x(t) = Phi x(0) + c for x' = A x - B."""
    n = A.shape[0]
    aug = np.zeros((n + 1, n + 1), dtype=complex)
    aug[:n, :n] = A
    aug[:n, n] = -B
    E = expm(aug * t)
    return E[:n, :n], E[:n, n]


def bloch_trajectory(A, B, x0, times) -> np.ndarray:
    """Exact affine flow sampled at ``times`` (uniform spacing uses one propagator)."""
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times), len(x0)), dtype=complex)
    x = np.asarray(x0, dtype=complex)
    t_prev = 0.0
    cache: dict[float, tuple] = {}
    for i, t in enumerate(times):
        h = round(t - t_prev, 12)
        if h not in cache:
            cache[h] = affine_propagator(A, B, t - t_prev)
        Phi, c = cache[h]
        x = Phi @ x + c
        out[i] = x
        t_prev = t
    return out


def steady_sigma_z(p: DriveParams) -> float:
    if p.gamma_eff == 0:
        raise TrappedRegimeError("no dissipation: steady state depends on the initial state")
    if p.gamma_env != 0:
        return steady_sigma_z_decay(p)
    G2, Y2 = p.gamma_eff**2, 4 * p.detuning_Y**2
    return -(G2 + Y2) / (G2 + Y2 + 2 * p.rabi**2)


def steady_sigma_z_decay(p: DriveParams) -> float:
    """Steady <sz> with environment loss, zero detuning, using Y' = i gamma_0.

    The loss enters with the sign that makes it compete with the waveguide
    decay, so a large enough drive can hold the atom excited.
    """
    if p.detuning_Y != 0:
        raise ValueError("closed form needs Y = 0")
    g0, G, W = p.gamma_env, p.gamma_eff, p.rabi
    den = 2 * W * W - 4 * g0 * g0 + G * G
    if abs(den) < 1e-14:
        raise ZeroDivisionError("denominator vanishes for these parameters")
    return (4 * g0 * g0 - G * G) / den


def compensation_rabi(gamma_env: float, gamma_eff: float) -> float:
    """Drive for which the decay formula gives <sz> = +1."""
    v = 4 * gamma_env**2 - gamma_eff**2
    if v < 0:
        raise ValueError("loss too weak to compensate: 4 gamma_0^2 < Gamma'^2")
    return math.sqrt(v)


def feedback_drift(drive: DriveParams, fb: FeedbackParams, include_record_coupling: bool = False) -> np.ndarray:
    """Drift of the mean equations under homodyne feedback with F = X.

    The default reproduces the reduced matrix with only g_f^2 off-diagonal
    couplings.  ``include_record_coupling`` adds the +-i g_f gamma_1R terms
    that the full conditional equations carry on the off-diagonal as well.
    """
    u = 1j * (drive.detuning_Y - fb.g_f * fb.gamma_1R) - drive.gamma_env
    G, W, g2 = drive.gamma_eff, drive.rabi, fb.g_f**2
    A = np.array(
        [
            [-u - G / 2 - g2, g2, -0.5j * W],
            [g2, u - G / 2 - g2, 0.5j * W],
            [-1j * W, 1j * W, -G - 2 * g2],
        ],
        dtype=complex,
    )
    if include_record_coupling:
        c = 1j * fb.g_f * fb.gamma_1R
        A[0, 1] += c
        A[1, 0] -= c
    return A


def _feedback_sz_closed(drive: DriveParams, fb: FeedbackParams, approx: bool = False) -> complex:
    G, W, g2 = drive.gamma_eff, drive.rabi, fb.g_f**2
    if approx:
        det = (G / 2) * (G / 2 + 2 * g2) + g2 * fb.gamma_1R**2
    else:
        u = 1j * (drive.detuning_Y - fb.g_f * fb.gamma_1R) - drive.gamma_env
        det = (G / 2) * (G / 2 + 2 * g2) - u * u
    if W == 0:
        return complex(-G / (G + 2 * g2))
    return -G / ((G + 2 * g2) + W * W * (G / 2) / det)


def feedback_sz_transform(s: complex, drive: DriveParams, fb: FeedbackParams, z0: float = -1.0) -> complex:
    """Laplace transform of <sz> under the feedback drift, from X(0) = (0, 0, z0)."""
    A = feedback_drift(drive, fb)
    B = np.array([0, 0, drive.gamma_eff], dtype=complex)
    rhs = np.array([0, 0, z0], dtype=complex) - B / s
    return complex(np.linalg.solve(s * np.eye(3) - A, rhs)[2])


def steady_sigma_z_feedback(drive: DriveParams, fb: FeedbackParams, check_tol: float = 1e-8) -> float:
    """lim_{s->0} s Z(s) in closed form, cross-checked against numeric extrapolation."""
    if drive.gamma_eff == 0:
        raise TrappedRegimeError("no dissipation: steady state depends on the initial state")
    closed = _feedback_sz_closed(drive, fb)
    numeric, _ = limit_at_zero(lambda s: np.array([s * feedback_sz_transform(s, drive, fb)]), start=1e-3, decades=5)
    if abs(numeric[0] - closed) > check_tol * max(1.0, abs(closed)):
        raise SteadyStateMismatch(f"closed form {closed} vs extrapolated {numeric[0]}")
    return float(closed.real)


def steady_sigma_z_feedback_approx(drive: DriveParams, fb: FeedbackParams) -> float:
    """Large-feedback approximation: the detuning and loss are dropped next to g_f gamma_1R."""
    if drive.gamma_eff == 0:
        raise TrappedRegimeError("no dissipation")
    return float(_feedback_sz_closed(drive, fb, approx=True).real)


def feedback_time_constant(drive: DriveParams, fb: FeedbackParams) -> float:
    """1 / (Gamma_eff + 2 g_f^2): relaxation time of <sz> without drive."""
    return 1.0 / (drive.gamma_eff + 2 * fb.g_f**2)


# density-matrix side


def hamiltonian(p: DriveParams) -> np.ndarray:
    return -p.detuning_Y * EXCITED + 0.5 * p.rabi * (SIGMA_P + SIGMA_M)


def dissipator(L: np.ndarray, rho: np.ndarray) -> np.ndarray:
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def lindblad_rhs(rho: np.ndarray, p: DriveParams) -> np.ndarray:
    H = hamiltonian(p)
    return -1j * (H @ rho - rho @ H) + p.gamma_eff * dissipator(SIGMA_M, rho)


def check_density(rho: np.ndarray, tol: float = 1e-9) -> None:
    rho = np.asarray(rho)
    if rho.shape != (2, 2):
        raise DensityMatrixError("density matrix must be 2x2")
    if not np.all(np.isfinite(rho)):
        raise DensityMatrixError("density matrix has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise DensityMatrixError("density matrix not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise DensityMatrixError("trace differs from one")
    if np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) < -tol:
        raise DensityMatrixError("density matrix not positive semidefinite")


def lindblad_step(rho: np.ndarray, p: DriveParams, dt: float) -> np.ndarray:
    """One RK4 step of the master equation with Hermitian H and decay Gamma_eff."""
    if p.gamma_env != 0:
        raise ValueError("environment loss has no trace-preserving form here; use the Bloch flow")
    if not dt > 0:
        raise ValueError("dt must be > 0")
    rho = np.asarray(rho, dtype=complex)
    check_density(rho)
    k1 = lindblad_rhs(rho, p)
    k2 = lindblad_rhs(rho + 0.5 * dt * k1, p)
    k3 = lindblad_rhs(rho + 0.5 * dt * k2, p)
    k4 = lindblad_rhs(rho + dt * k3, p)
    return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def lindblad_generator(p: DriveParams) -> np.ndarray:
    """Superoperator on row-major vec(rho)."""
    I = np.eye(2)
    H = hamiltonian(p)
    L = SIGMA_M
    LdL = L.conj().T @ L
    return (
        -1j * (np.kron(H, I) - np.kron(I, H.T))
        + p.gamma_eff * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, I) - 0.5 * np.kron(I, LdL.T))
    )


def density_to_bloch(rho: np.ndarray) -> BlochVector:
    return BlochVector(complex(rho[1, 0]), complex(rho[0, 1]), complex(rho[0, 0] - rho[1, 1]))


def bloch_to_density(b: BlochVector) -> np.ndarray:
    return np.array(
        [[(1 + b.sz) / 2, b.sm], [b.sp, (1 - b.sz) / 2]],
        dtype=complex,
    )
