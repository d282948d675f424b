"""Single-excitation dynamics: atoms share one quantum, the rest is a photon."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dde import AmplitudeTrajectory, integrate_dde
from .io import write_csv
from .laplace import LimitError, euler_inverse, limit_at_zero, talbot_inverse
from .network import NetworkSpec, build_one_excitation_system, build_single_delay_matrices

NORM_TOL = 1e-9


class SingularMatrixError(np.linalg.LinAlgError):
    pass


@dataclass
class OneExcitationRun:
    network: NetworkSpec
    trajectory: AmplitudeTrajectory
    photon_probability: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times

    @property
    def amplitudes(self) -> np.ndarray:
        return self.trajectory.states

    @property
    def populations(self) -> np.ndarray:
        return self.trajectory.populations

    def to_csv(self, path: str | Path) -> None:
        write_amplitude_csv(path, self.times, self.amplitudes, self.photon_probability)


def simulate_one_excitation(
    net: NetworkSpec, init, t_end: float, dt: float, record_every: int = 1
) -> OneExcitationRun:
    x0 = np.asarray(init, dtype=complex).reshape(-1)
    if x0.shape[0] != net.n_atoms:
        raise ValueError(f"init has {x0.shape[0]} entries for {net.n_atoms} atoms")
    if np.linalg.norm(x0) > 1 + NORM_TOL:
        raise ValueError("initial amplitudes must have norm <= 1")
    system = build_one_excitation_system(net)
    traj = integrate_dde(system, x0, t_end, dt, record_every=record_every)
    photon = 1.0 - traj.populations.sum(axis=1)
    return OneExcitationRun(net, traj, photon)


def write_amplitude_csv(path, times, amps, photon=None) -> None:
    n = amps.shape[1]
    header = ["t"]
    for j in range(1, n + 1):
        header += [f"re_c{j}", f"im_c{j}", f"pop_c{j}"]
    if photon is not None:
        header.append("photon_probability")
    pops = np.abs(amps) ** 2
    rows = []
    for i, t in enumerate(times):
        row = [t]
        for c, p in zip(amps[i], pops[i]):
            row += [c.real, c.imag, p]
        if photon is not None:
            row.append(photon[i])
        rows.append(row)
    write_csv(path, header, rows)


def segment_one_analytic(N: int, g: float, t):
    """Closed-form amplitudes before the first echo returns.

    Atom 1 starts excited, atoms 2..N couple with g in both directions and
    atom 1 with (N-1) g.  Returns (c1, cj) for any j >= 2.
    """
    if N < 2:
        raise ValueError("need N >= 2")
    if not g > 0:
        raise ValueError("g must be > 0")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    eps = np.exp(-N * (N - 1) * g * g * t)
    c1 = 1.0 / N + (N - 1) / N * eps
    cj = -1.0 / N + eps / N
    return c1, cj


def colocated_network(N: int, g: float, omega_a: float = 50.0, n_wavelengths: int = 40) -> NetworkSpec:
    """Co-located nonchiral atoms, atom 1 coupled (N-1) times as strongly as the others.

    With this choice A0 = -B0 has rank one and segment one is given by
    :func:`segment_one_analytic`.  Position ``n_wavelengths * pi / omega_a``
    makes the round-trip phase a multiple of 2 pi.
    """
    from .network import uniform_network

    g1 = (N - 1) * g
    gammas = [(g1, g1)] + [(g, g)] * (N - 1)
    return uniform_network(N, n_wavelengths * math.pi / omega_a, gammas, omega_a)


def characteristic_matrix(s: complex, A0, B0, tau: float, omega_a: float) -> np.ndarray:
    A0 = np.asarray(A0, dtype=complex)
    B0 = np.asarray(B0, dtype=complex)
    if A0.shape != B0.shape or A0.shape[0] != A0.shape[1]:
        raise ValueError("A0 and B0 must be square with the same shape")
    n = A0.shape[0]
    return s * np.eye(n) - A0 - np.exp(1j * omega_a * tau) * B0 * np.exp(-s * tau)


def _scaled_matrix(s: complex, A0, B0, tau, omega_a):
    # e^{s tau} M(s): finite for Re s << 0, where e^{-s tau} alone overflows
    n = A0.shape[0]
    if (s * tau).real < -600:
        return None
    w = np.exp(s * tau)
    return w * (s * np.eye(n) - A0) - np.exp(1j * omega_a * tau) * B0, w


def laplace_amplitudes(s: complex, A0, B0, tau, omega_a, x0) -> np.ndarray:
    """X(s) = M(s)^{-1} x0."""
    A0 = np.asarray(A0, dtype=complex)
    B0 = np.asarray(B0, dtype=complex)
    if (s * tau).real > 600:
        M = s * np.eye(A0.shape[0]) - A0
        scale = 1.0
    else:
        M, scale = _scaled_matrix(s, A0, B0, tau, omega_a)
    try:
        return scale * np.linalg.solve(M, np.asarray(x0, dtype=complex))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(f"characteristic matrix singular at s={s}") from exc


def transfer_entry(s: complex, A0, B0, tau, omega_a, j: int) -> complex:
    """C_j(s) = cofactor_{j1}(M) / det M: response of atom j to atom 1 starting excited.

    The cofactor is taken of the (1, j) entry (adjugate element (j, 1)), so
    that C_j(s) equals [M^{-1}]_{j1}.
    """
    M = characteristic_matrix(s, A0, B0, tau, omega_a)
    det = np.linalg.det(M)
    if det == 0 or not np.isfinite(det):
        raise SingularMatrixError(f"det M vanishes at s={s}")
    n = M.shape[0]
    if n == 1:
        return complex(1.0 / det)
    minor = np.delete(np.delete(M, 0, axis=0), j, axis=1)
    return complex((-1) ** j * np.linalg.det(minor) / det)


def inverse_laplace_amplitudes(
    times, A0, B0, tau, omega_a, x0, method: str = "euler", **kw
) -> np.ndarray:
    """Time-domain amplitudes from the Laplace representation."""
    def F(s):
        return laplace_amplitudes(s, A0, B0, tau, omega_a, x0)

    inv = {"euler": euler_inverse, "talbot": talbot_inverse}.get(method)
    if inv is None:
        raise ValueError(f"unknown inversion method {method!r}")
    return np.array([inv(F, float(t), **kw) for t in times])


def real_form_matrices(A0, B0, tau: float, omega_a: float) -> tuple[np.ndarray, np.ndarray]:
    """Real 2N representation acting on (Re c_1, Im c_1, Re c_2, ...).

    Only meaningful for real A0, B0 (true for every network built here).
    The delayed coupling picks up the round-trip phase through G.
    """
    A0 = np.asarray(A0)
    B0 = np.asarray(B0)
    if np.iscomplexobj(A0) and np.any(A0.imag != 0) or np.iscomplexobj(B0) and np.any(B0.imag != 0):
        raise ValueError("real form needs real A0, B0")
    ph = omega_a * tau
    G = np.array([[-math.cos(ph), math.sin(ph)], [-math.sin(ph), -math.cos(ph)]])
    return np.kron(A0.real, np.eye(2)), np.kron(B0.real, G)


def real_form_system(A0, B0, tau, omega_a):
    from .network import DelaySystem

    Ar, Br = real_form_matrices(A0, B0, tau, omega_a)
    # G carries the phase with an extra sign, so the delayed input is x' = ... - Br x(t - tau)
    return DelaySystem(Ar.shape[0], Ar.astype(complex), ((tau, -Br.astype(complex)),))


@dataclass(frozen=True)
class ConsensusCheck:
    residual: float
    error_estimate: float
    rank_a0: int
    rank_b0: int


def final_value_consensus_check(A0, B0, x0, start: float = 1e-2, decades: int = 7) -> ConsensusCheck:
    """|| lim_{s->0+} s (sI - A0)^{-1} B0 x0 || with ranks of A0 and B0.

    Raises :class:`LimitError` when the extrapolation does not settle.
    """
    A0 = np.asarray(A0, dtype=complex)
    B0 = np.asarray(B0, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)
    n = A0.shape[0]
    v = B0 @ x0
    ra = int(np.linalg.matrix_rank(A0))
    rb = int(np.linalg.matrix_rank(B0))
    if not np.any(v):
        return ConsensusCheck(0.0, 0.0, ra, rb)

    def g(s):
        return s * np.linalg.solve(s * np.eye(n) - A0, v)

    val, err = limit_at_zero(g, start=start, decades=decades)
    return ConsensusCheck(float(np.linalg.norm(val)), err, ra, rb)


def final_value(A0, B0, tau, omega_a, x0, start: float = 1e-2, decades: int = 7) -> np.ndarray:
    """Long-time amplitudes lim_{s->0+} s X(s) (nonzero only for trapped states)."""
    def g(s):
        return s * laplace_amplitudes(s, A0, B0, tau, omega_a, x0)

    val, _ = limit_at_zero(g, start=start, decades=decades)
    return val


def bound_state_amplitudes(A0, B0, tau, omega_a, x0) -> np.ndarray:
    """Trapped amplitudes when the round-trip phase is 2 pi n.

    If M(0) = -(A0 + B0) is singular, the residue at s = 0 of M(s)^{-1} is
    P = V (W^H M'(0) V)^{-1} W^H with V, W spanning the right/left null spaces
    and M'(0) = I + tau B0.
    """
    A0 = np.asarray(A0, dtype=complex)
    B0 = np.asarray(B0, dtype=complex)
    n = A0.shape[0]
    M0 = characteristic_matrix(0.0, A0, B0, tau, omega_a)
    dM = np.eye(n) + tau * np.exp(1j * omega_a * tau) * B0
    u, sv, vh = np.linalg.svd(M0)
    null = sv < 1e-10 * max(1.0, sv[0])
    if not np.any(null):
        return np.zeros(n, dtype=complex)
    V = vh.conj().T[:, null]
    W = u[:, null]
    core = W.conj().T @ dM @ V
    return V @ np.linalg.solve(core, W.conj().T @ np.asarray(x0, dtype=complex))


def plateau_population(run: OneExcitationRun, tau: float | None = None) -> np.ndarray:
    """Per-atom population averaged over the last round trip of the run."""
    if tau is None:
        tau = run.network.round_trip(0)
    t = run.times
    sel = t >= t[-1] - tau
    if sel.sum() < 2:
        raise ValueError("run shorter than one round trip")
    pops = run.populations[sel]
    return np.trapezoid(pops, t[sel], axis=0) / (t[sel][-1] - t[sel][0])


def detect_kinks(
    times,
    values,
    max_order: int = 6,
    threshold: float = 30.0,
    window: int = 25,
) -> np.ndarray:
    """Locate jump discontinuities in some derivative of a sampled curve.

    For each order m the (m+1)-th finite difference is compared with the
    median magnitude in a sliding window; a jump in the m-th derivative
    shows up as an isolated spike cluster ``threshold`` times above that
    background.  The location is the excess-weighted cluster centroid shifted
    by half the stencil width.  Hits closer than the widest stencil are
    merged, keeping the lowest order.  Needs a uniform grid.
    """
    from numpy.lib.stride_tricks import sliding_window_view

    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(t) != len(y) or len(t) < 2 * window + max_order + 2:
        raise ValueError("need aligned arrays with enough samples")
    h = t[1] - t[0]
    if np.max(np.abs(np.diff(t) - h)) > 1e-9 * max(1.0, abs(h)):
        raise ValueError("detect_kinks needs a uniform grid")
    hits: list[tuple[float, int]] = []
    for m in range(1, max_order + 1):
        mag = np.abs(np.diff(y, n=m + 1))
        floor = np.finfo(float).eps * 64 * np.max(np.abs(y)) * 2 ** (m + 1)
        bg = np.median(sliding_window_view(np.pad(mag, window, mode="edge"), 2 * window + 1), axis=1)
        bg = np.maximum(bg, floor)
        idx = np.flatnonzero(mag > threshold * bg)
        if idx.size == 0:
            continue
        for cluster in np.split(idx, np.flatnonzero(np.diff(idx) > m + 2) + 1):
            w = mag[cluster] - bg[cluster]
            centre = float(np.sum(w * cluster) / np.sum(w))
            hits.append((t[0] + (centre + 0.5 * (m + 1)) * h, m))
    hits.sort()
    merged: list[tuple[float, int]] = []
    for tk, m in hits:
        if merged and tk - merged[-1][0] <= (max_order + 2) * h:
            if m < merged[-1][1]:
                merged[-1] = (tk, m)
            continue
        merged.append((tk, m))
    return np.array([tk for tk, _ in merged])


__all__ = [
    "ConsensusCheck",
    "LimitError",
    "OneExcitationRun",
    "SingularMatrixError",
    "bound_state_amplitudes",
    "build_single_delay_matrices",
    "characteristic_matrix",
    "detect_kinks",
    "final_value",
    "final_value_consensus_check",
    "inverse_laplace_amplitudes",
    "laplace_amplitudes",
    "plateau_population",
    "real_form_matrices",
    "real_form_system",
    "segment_one_analytic",
    "simulate_one_excitation",
    "colocated_network",
    "transfer_entry",
    "write_amplitude_csv",
]
