"""Brute-force check of the delay kernels: atoms plus a discretized waveguide.

Field amplitudes are kept in the frame rotating at each mode frequency,
a(k) = c(k) exp(-i (w_k - w_a) t), so the couplings are time independent:

    c_j' = -i sum_k conj(h_j(k)) a(k) dk / sqrt(2 pi)
    a'   = -i (w_k - w_a) a - i sum_j h_j(k) c_j / sqrt(2 pi)

with h_j(k) = i (gR_j exp(-i w_k z_j) - gL_j exp(i w_k z_j)).  The
1/sqrt(2 pi) makes the continuum limit reproduce the delay kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dde import AmplitudeTrajectory
from .network import NetworkSpec
from .one_excitation import simulate_one_excitation
from .two_excitation import MODE_NORM, AliasingError

MIN_POINTS = 256


@dataclass(frozen=True)
class KGrid:
    k: np.ndarray

    def __post_init__(self) -> None:
        k = np.asarray(self.k, dtype=float)
        object.__setattr__(self, "k", k)
        if len(k) < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} modes")
        d = np.diff(k)
        if np.any(d <= 0) or np.ptp(d) > 1e-9 * d.mean():
            raise ValueError("k grid must be uniform and increasing")
        if k[0] < 0:
            raise ValueError("k grid must stay at k >= 0")

    @classmethod
    def band(cls, omega_a: float, half_width: float, points: int, light_speed: float = 1.0) -> "KGrid":
        """``points`` modes spaced evenly over [w_a - half_width, w_a + half_width)."""
        dw = 2 * half_width / points
        w = omega_a - half_width + dw * (np.arange(points) + 0.5)
        return cls(w / light_speed)

    @property
    def dk(self) -> float:
        return float(self.k[1] - self.k[0])

    @property
    def count(self) -> int:
        return len(self.k)

    def check_covers(self, net: NetworkSpec, factor: float = 10.0) -> None:
        ybar = max(a.emission_rate for a in net.atoms)
        w = self.k * net.light_speed
        lo, hi = net.omega_a - w[0], w[-1] - net.omega_a
        if min(lo, hi) < factor * ybar:
            raise ValueError(f"band must reach {factor} x the largest emission rate on each side")


@dataclass
class OracleRun:
    times: np.ndarray
    atoms: np.ndarray  # (T, N)
    field_final: np.ndarray  # rotating-frame a(k) at the last time
    norm: np.ndarray  # total norm per recorded time

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.atoms) ** 2


def _mode_couplings(net: NetworkSpec, k: np.ndarray) -> np.ndarray:
    wk = k * net.light_speed
    z = net.positions[:, None] / net.light_speed
    gr = net.gamma_right[:, None]
    gl = net.gamma_left[:, None]
    return 1j * (gr * np.exp(-1j * wk[None, :] * z) - gl * np.exp(1j * wk[None, :] * z)) * MODE_NORM


def schrodinger_one_excitation(
    net: NetworkSpec, grid: KGrid, init, t_end: float, dt: float, record_every: int = 1
) -> OracleRun:
    k = grid.k
    dk = grid.dk
    detune = k * net.light_speed - net.omega_a
    if dt * np.max(np.abs(detune)) > 0.1 + 1e-12:
        raise ValueError("dt too large for the band edge phase: need dt * max|w_k - w_a| <= 0.1")
    if dk * t_end * net.light_speed > math.pi:
        raise AliasingError(f"dk * t_end = {dk * t_end:.3g} > pi; revivals from the finite grid would appear")
    H = _mode_couplings(net, k)  # (N, M)
    Hc = H.conj() * dk
    c = np.asarray(init, dtype=complex).copy()
    a = np.zeros(len(k), dtype=complex)

    def rhs(c, a):
        return -1j * (Hc @ a), -1j * detune * a - 1j * (c @ H)

    n_steps = int(round(t_end / dt)) if abs(t_end / dt - round(t_end / dt)) < 1e-9 else math.ceil(t_end / dt)
    times, atoms, norms = [0.0], [c.copy()], [float(np.sum(abs(c) ** 2) + dk * np.sum(abs(a) ** 2))]
    for n in range(n_steps):
        k1c, k1a = rhs(c, a)
        k2c, k2a = rhs(c + 0.5 * dt * k1c, a + 0.5 * dt * k1a)
        k3c, k3a = rhs(c + 0.5 * dt * k2c, a + 0.5 * dt * k2a)
        k4c, k4a = rhs(c + dt * k3c, a + dt * k3a)
        c = c + dt / 6 * (k1c + 2 * k2c + 2 * k3c + k4c)
        a = a + dt / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
        if (n + 1) % record_every == 0 or n == n_steps - 1:
            times.append((n + 1) * dt)
            atoms.append(c.copy())
            norms.append(float(np.sum(abs(c) ** 2) + dk * np.sum(abs(a) ** 2)))
    return OracleRun(np.array(times), np.array(atoms), a, np.array(norms))


def relative_linf(reference: np.ndarray, other: np.ndarray) -> float:
    """max |other - reference| / max |reference| (0 when both vanish)."""
    scale = float(np.max(np.abs(reference)))
    diff = float(np.max(np.abs(other - reference)))
    if scale == 0:
        return 0.0 if diff == 0 else math.inf
    return diff / scale


def compare_with_trajectory(oracle: OracleRun, traj: AmplitudeTrajectory) -> float:
    """Relative L-infinity population error of a delay trajectory against the oracle."""
    keep = oracle.times <= traj.times[-1]
    dde_pops = np.array([np.abs(traj.at(float(t))) ** 2 for t in oracle.times[keep]])
    return relative_linf(oracle.populations[keep], dde_pops)


def compare_oracle_dde(net: NetworkSpec, grid: KGrid, init, t_end: float, dt: float, dde_dt: float | None = None) -> float:
    init = np.asarray(init, dtype=complex)
    orc = schrodinger_one_excitation(net, grid, init, t_end, dt, record_every=max(1, int(round(0.02 / dt))))
    if dde_dt is None:
        delays = [d for d in (2 * z for z in net.positions) if d > 0]
        dde_dt = min(delays) / 400 if delays else 0.01
    run = simulate_one_excitation(net, init, t_end, dde_dt)
    return compare_with_trajectory(orc, run.trajectory)


@dataclass(frozen=True)
class RefinementStudy:
    points: tuple
    errors: tuple

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


def refinement_study(
    net: NetworkSpec,
    init,
    t_end: float,
    ladder=(512, 1024, 2048, 4096),
    dk: float = 100.0 / 4096,
    safety: float = 0.1,
) -> RefinementStudy:
    """Oracle error against the delay solution as the band grows at fixed spacing.

    At fixed dk the revival time 2 pi / dk is unchanged while each doubling
    of M doubles the band, so truncation error is what the ladder probes.
    """
    errs = []
    delays = [2 * z for z in net.positions if z > 0]
    run = simulate_one_excitation(net, np.asarray(init, complex), t_end, min(delays) / 400)
    for m in ladder:
        half = 0.5 * m * dk
        if half > net.omega_a:
            raise ValueError("band would reach negative frequencies")
        grid = KGrid.band(net.omega_a, half, m, net.light_speed)
        dt = safety / half
        orc = schrodinger_one_excitation(net, grid, init, t_end, dt, record_every=max(1, int(round(0.02 / dt))))
        errs.append(compare_with_trajectory(orc, run.trajectory))
    return RefinementStudy(tuple(ladder), tuple(errs))
