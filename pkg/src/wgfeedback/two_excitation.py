"""Two-excitation dynamics: doubly excited pairs and one atom plus one photon.

The pair amplitudes c_jl form a closed delay system.  The one-photon sector
c_j(t, k) is driven by the pairs and is integrated on a wavenumber grid, one
column per k, all columns sharing the same delay kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dde import AmplitudeTrajectory, integrate_dde
from .io import write_csv
from .network import (
    DelaySystem,
    NetworkError,
    NetworkSpec,
    build_one_excitation_system,
    build_two_excitation_pair_system,
    coupling_array,
    pair_index,
)

MODE_NORM = 1.0 / math.sqrt(2.0 * math.pi)
NORM_TOL = 1e-9


class AliasingError(ValueError):
    """The k-grid is too coarse for the requested time span."""


@dataclass
class PairState:
    """Doubly-excited amplitudes in lexicographic (j, l), j < l order."""

    pairs: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        self.pairs = np.asarray(self.pairs, dtype=complex).reshape(-1)
        n = n_atoms_for_pairs(len(self.pairs))
        self.n_atoms = n
        if np.sum(np.abs(self.pairs) ** 2) > 1 + NORM_TOL:
            raise ValueError("pair amplitudes must have total weight <= 1")

    @classmethod
    def excited(cls, n_atoms: int, j: int, l: int, amplitude: complex = 1.0) -> "PairState":
        """Single pair (0-based j != l) carrying ``amplitude``."""
        if j == l:
            raise ValueError("pair needs two different atoms")
        v = np.zeros(n_atoms * (n_atoms - 1) // 2, dtype=complex)
        v[pair_index(n_atoms).index(tuple(sorted((j, l))))] = amplitude
        return cls(v)

    def amplitude(self, j: int, l: int) -> complex:
        if j == l:
            return 0j
        return complex(self.pairs[pair_index(self.n_atoms).index(tuple(sorted((j, l))))])


def n_atoms_for_pairs(n_pairs: int) -> int:
    n = int(round((1 + math.sqrt(1 + 8 * n_pairs)) / 2))
    if n < 2 or n * (n - 1) // 2 != n_pairs:
        raise ValueError(f"{n_pairs} is not a pair count")
    return n


def pair_matrix(states: np.ndarray, n_atoms: int) -> np.ndarray:
    """Symmetric (..., N, N) array of c_jl with zero diagonal."""
    states = np.asarray(states)
    out = np.zeros(states.shape[:-1] + (n_atoms, n_atoms), dtype=complex)
    for i, (j, l) in enumerate(pair_index(n_atoms)):
        out[..., j, l] = states[..., i]
        out[..., l, j] = states[..., i]
    return out


def simulate_pair_amplitudes(net: NetworkSpec, init, t_end: float, dt: float, record_every: int = 1) -> AmplitudeTrajectory:
    if net.n_atoms < 2:
        raise NetworkError("two-excitation dynamics needs at least two atoms")
    state = init if isinstance(init, PairState) else PairState(init)
    if state.n_atoms != net.n_atoms:
        raise ValueError("pair state does not match the network size")
    system = build_two_excitation_pair_system(net)
    return integrate_dde(system, state.pairs, t_end, dt, record_every=record_every)


def default_kgrid(net: NetworkSpec, points: int = 2048, width: float = 20.0) -> np.ndarray:
    """Uniform grid over w_a +- width * (largest emission rate), in wavenumber."""
    ybar = max(a.emission_rate for a in net.atoms)
    if ybar <= 0:
        raise ValueError("all atoms decoupled; no line to resolve")
    wa = net.omega_a
    lo = max(wa - width * ybar, 0.0)
    return np.linspace(lo, wa + width * ybar, points) / net.light_speed


@dataclass
class SinglePhotonField:
    kgrid: np.ndarray
    times: np.ndarray
    amplitudes: np.ndarray  # (T, N, M)

    @property
    def dk(self) -> float:
        return float(self.kgrid[1] - self.kgrid[0])

    def vertex_probabilities(self) -> np.ndarray:
        """p_j(t) = integral |c_j(t, k)|^2 dk by the trapezoid rule, shape (T, N)."""
        return np.trapezoid(np.abs(self.amplitudes) ** 2, self.kgrid, axis=-1)


def simulate_single_photon_component(
    net: NetworkSpec,
    pair_traj: AmplitudeTrajectory,
    kgrid,
    t_end: float,
    dt: float,
    record_every: int | None = None,
    max_records: int = 200,
) -> SinglePhotonField:
    """Integrate the one-atom-one-photon amplitudes driven by the pair trajectory.

    Every k column obeys the one-excitation delay kernel; the pair amplitudes
    feed in through ``-i sum_l c_jl(t) g_l(k, t)``.  Photon-photon terms
    that do not reduce to delay kernels are dropped.
    """
    k = np.asarray(kgrid, dtype=float)
    if k.ndim != 1 or len(k) < 2 or np.any(np.diff(k) <= 0):
        raise ValueError("kgrid must be increasing with at least two points")
    dk = float(np.max(np.diff(k)))
    if dk * t_end * net.light_speed > math.pi:
        raise AliasingError(f"dk * t_end = {dk * t_end:.3g} > pi; refine the k-grid or shorten the run")
    if pair_traj.times[-1] < t_end * (1 - 1e-12):
        raise ValueError("pair trajectory does not cover [0, t_end]")
    n = net.n_atoms
    system = build_one_excitation_system(net)
    if record_every is None:
        record_every = max(1, math.ceil(t_end / dt / max_records))

    def forcing(t: float) -> np.ndarray:
        c = pair_matrix(pair_traj.at(t), n)  # (N, N)
        g = coupling_array(net, k, t) * MODE_NORM  # (N, M)
        return -1j * (c @ g)

    traj = integrate_dde(
        system, np.zeros((n, len(k)), dtype=complex), t_end, dt, forcing=forcing, record_every=record_every
    )
    return SinglePhotonField(k, traj.times, traj.states)


def large_delay_generator(net: NetworkSpec, t_end: float) -> tuple[np.ndarray, np.ndarray]:
    """Delay-free generators (pair matrix, photon matrix) valid before the first echo."""
    z = net.positions
    if np.ptp(z) > 1e-12 * max(1.0, z.max()):
        raise NetworkError("large-delay form needs all atoms at one position")
    tau = net.round_trip(0)
    if t_end >= tau:
        raise ValueError(f"t_end={t_end} must be below the round trip {tau}")
    pair_sys = build_two_excitation_pair_system(net)
    photon_sys = build_one_excitation_system(net)
    return pair_sys.instantaneous.copy(), photon_sys.instantaneous.copy()


def simulate_large_delay_pairs(net: NetworkSpec, init, t_end: float, dt: float) -> AmplitudeTrajectory:
    P, _ = large_delay_generator(net, t_end)
    state = init if isinstance(init, PairState) else PairState(init)
    return integrate_dde(DelaySystem(P.shape[0], P, ()), state.pairs, t_end, dt)


def write_two_excitation_csv(path, pair_traj: AmplitudeTrajectory, n_atoms: int, field: SinglePhotonField | None = None) -> None:
    pairs = pair_index(n_atoms)
    header = ["t"] + [f"p{j + 1}{l + 1}" for j, l in pairs]
    vp = None
    if field is not None:
        header += [f"p{j + 1}" for j in range(n_atoms)]
        vp = field.vertex_probabilities()
    times = pair_traj.times if field is None else field.times
    rows = []
    for i, t in enumerate(times):
        st = pair_traj.at(float(t)) if field is not None else pair_traj.states[i]
        row = [t] + [abs(c) ** 2 for c in st]
        if vp is not None:
            row += list(vp[i])
        rows.append(row)
    write_csv(path, header, rows)
