"""Atom-waveguide network description and delay-equation coefficient assembly.

Geometry: a semi-infinite waveguide with a perfect mirror at ``z = 0`` and
two-level atoms at positions ``z_j > 0``.  Units are chosen so that the
speed of light is 1; positions and times share a unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LIGHT_SPEED = 1.0
DELAY_RTOL = 1e-12


class NetworkError(ValueError):
    """Raised for physically invalid or unsupported network descriptions."""


@dataclass(frozen=True)
class AtomSpec:
    position: float
    gamma_right: float
    gamma_left: float
    omega_a: float
    gamma_env: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.position, self.gamma_right, self.gamma_left, self.omega_a, self.gamma_env)
        if not all(math.isfinite(v) for v in vals):
            raise NetworkError(f"non-finite atom parameter in {self!r}")
        if self.position <= 0:
            raise NetworkError(f"atom position must be > 0, got {self.position}")
        if self.gamma_right < 0 or self.gamma_left < 0 or self.gamma_env < 0:
            raise NetworkError("coupling and decay rates must be non-negative")
        if self.omega_a <= 0:
            raise NetworkError(f"resonant frequency must be > 0, got {self.omega_a}")

    @property
    def emission_rate(self) -> float:
        """Amplitude decay rate into the waveguide, (gR^2 + gL^2) / 2."""
        return 0.5 * (self.gamma_right**2 + self.gamma_left**2)


@dataclass(frozen=True)
class NetworkSpec:
    atoms: tuple[AtomSpec, ...]
    waveguide_loss: float = 0.0
    light_speed: float = field(default=LIGHT_SPEED)

    def __post_init__(self) -> None:
        object.__setattr__(self, "atoms", tuple(self.atoms))
        if not self.atoms:
            raise NetworkError("network needs at least one atom")
        if self.light_speed != LIGHT_SPEED:
            raise NetworkError("light_speed is fixed to 1 (time and length share units)")
        if not math.isfinite(self.waveguide_loss) or self.waveguide_loss < 0:
            raise NetworkError("waveguide_loss must be finite and >= 0")
        z = [a.position for a in self.atoms]
        # equal positions are allowed; their zero delay folds into the instantaneous part
        if any(z2 < z1 for z1, z2 in zip(z, z[1:])):
            raise NetworkError(f"atom positions must be sorted (non-decreasing), got {z}")

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def positions(self) -> np.ndarray:
        return np.array([a.position for a in self.atoms])

    @property
    def gamma_right(self) -> np.ndarray:
        return np.array([a.gamma_right for a in self.atoms])

    @property
    def gamma_left(self) -> np.ndarray:
        return np.array([a.gamma_left for a in self.atoms])

    @property
    def omega_a(self) -> float:
        """Common resonant frequency; raises unless all atoms share it."""
        w = [a.omega_a for a in self.atoms]
        if any(abs(x - w[0]) > 1e-12 * abs(w[0]) for x in w):
            raise NetworkError(f"atoms must share one resonant frequency, got {w}")
        return w[0]

    def round_trip(self, j: int = 0) -> float:
        return 2.0 * self.atoms[j].position / self.light_speed


def uniform_network(
    n: int,
    position: float,
    gammas: Sequence[float] | Sequence[tuple[float, float]],
    omega_a: float,
    waveguide_loss: float = 0.0,
) -> NetworkSpec:
    """Atoms at a common position; ``gammas`` holds a rate or an (R, L) pair per atom."""
    if len(gammas) != n:
        raise NetworkError(f"expected {n} coupling entries, got {len(gammas)}")
    atoms = []
    for g in gammas:
        gr, gl = (g, g) if np.isscalar(g) else g
        atoms.append(AtomSpec(position, float(gr), float(gl), omega_a))
    return NetworkSpec(tuple(atoms), waveguide_loss)


@dataclass(frozen=True)
class DelaySystem:
    """Linear complex DDE  x'(t) = A x(t) + sum_k B_k x(t - d_k),  x(t<0) = 0."""

    dim: int
    instantaneous: np.ndarray
    delayed_terms: tuple[tuple[float, np.ndarray], ...] = ()
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        a = np.asarray(self.instantaneous, dtype=complex)
        if a.shape != (self.dim, self.dim) or not np.all(np.isfinite(a)):
            raise NetworkError("instantaneous matrix must be finite with shape (dim, dim)")
        a.setflags(write=False)
        object.__setattr__(self, "instantaneous", a)
        terms = []
        for d, m in self.delayed_terms:
            m = np.asarray(m, dtype=complex)
            if not (math.isfinite(d) and d > 0):
                raise NetworkError(f"delays must be finite and > 0, got {d}")
            if m.shape != (self.dim, self.dim) or not np.all(np.isfinite(m)):
                raise NetworkError("delayed matrix must be finite with shape (dim, dim)")
            if not np.any(m):
                raise NetworkError(f"delayed term at {d} has an all-zero matrix")
            m.setflags(write=False)
            terms.append((float(d), m))
        object.__setattr__(self, "delayed_terms", tuple(sorted(terms, key=lambda t: t[0])))
        if self.labels and len(self.labels) != self.dim:
            raise NetworkError("labels must name every state index")
        object.__setattr__(self, "labels", tuple(self.labels))

    @property
    def delays(self) -> tuple[float, ...]:
        return tuple(d for d, _ in self.delayed_terms)


@dataclass(frozen=True)
class DerivedRates:
    y_gamma: float
    Y: float
    gamma_eff: float


def coupling_coefficient(atom: AtomSpec, k: float, t: float, light_speed: float = LIGHT_SPEED) -> complex:
    """Atom-mode coupling g(k, t) in the interaction picture.

    ``i gR exp(i[(w_k - w_a) t - w_k z]) - i gL exp(i[(w_k - w_a) t + w_k z])`` with
    ``w_k = k c``.  For ``gR = gL = g`` this is ``2 g sin(k z) exp(i (w_k - w_a) t)``.
    """
    if not (math.isfinite(k) and math.isfinite(t)):
        raise ValueError("k and t must be finite")
    if k < 0 or t < 0:
        raise ValueError(f"need k >= 0 and t >= 0, got k={k}, t={t}")
    wk = k * light_speed
    z = atom.position / light_speed
    rot = (wk - atom.omega_a) * t
    return 1j * atom.gamma_right * np.exp(1j * (rot - wk * z)) - 1j * atom.gamma_left * np.exp(
        1j * (rot + wk * z)
    )


def coupling_array(net: NetworkSpec, k: np.ndarray, t: float) -> np.ndarray:
    """Vectorized coupling for all atoms, shape (N, len(k))."""
    wk = np.asarray(k, dtype=float)[None, :] * net.light_speed
    z = net.positions[:, None] / net.light_speed
    rot = np.exp(1j * (wk - net.omega_a) * t)
    return 1j * (net.gamma_right[:, None] * np.exp(-1j * wk * z) - net.gamma_left[:, None] * np.exp(1j * wk * z)) * rot


def one_excitation_kernel(net: NetworkSpec) -> list[tuple[int, int, float, complex]]:
    """Delta-kernel terms ``(receiver j, source p, delay, coefficient)``.

    Coefficients already carry the propagation phase ``exp(i w_a delay)``.
    Zero-delay entries (self decay, co-located atoms) have delay 0.
    """
    wa = net.omega_a
    c = net.light_speed
    z = net.positions
    gr, gl = net.gamma_right, net.gamma_left
    n = net.n_atoms
    terms: list[tuple[int, int, float, complex]] = []
    for j in range(n):
        terms.append((j, j, 0.0, complex(-0.5 * (gr[j] ** 2 + gl[j] ** 2))))
        for p in range(n):
            if p < j:
                d = (z[j] - z[p]) / c
                terms.append((j, p, d, -gr[j] * gr[p] * np.exp(1j * wa * d)))
            elif p > j:
                d = (z[p] - z[j]) / c
                terms.append((j, p, d, -gl[j] * gl[p] * np.exp(1j * wa * d)))
            d = (z[j] + z[p]) / c
            terms.append((j, p, d, gr[j] * gl[p] * np.exp(1j * wa * d)))
    return terms


def _assemble(dim: int, entries, labels=()) -> DelaySystem:
    """Group (row, col, delay, coef) entries by delay; near-zero delays go instantaneous."""
    inst = np.zeros((dim, dim), dtype=complex)
    groups: list[tuple[float, np.ndarray]] = []
    scale = max((abs(e[2]) for e in entries), default=0.0)
    for row, col, d, coef in entries:
        if coef == 0:
            continue
        if d <= DELAY_RTOL * scale:
            inst[row, col] += coef
            continue
        for gd, mat in groups:
            if abs(gd - d) <= DELAY_RTOL * max(gd, d):
                mat[row, col] += coef
                break
        else:
            mat = np.zeros((dim, dim), dtype=complex)
            mat[row, col] += coef
            groups.append((d, mat))
    terms = tuple((d, m) for d, m in groups if np.any(m))
    return DelaySystem(dim, inst, terms, tuple(labels))


def build_one_excitation_system(net: NetworkSpec) -> DelaySystem:
    """Delay system for the single-excitation atomic amplitudes c_j(t)."""
    net.omega_a  # validates the common frequency
    labels = [f"c{j + 1}" for j in range(net.n_atoms)]
    return _assemble(net.n_atoms, one_excitation_kernel(net), labels)


def build_single_delay_matrices(net: NetworkSpec) -> tuple[np.ndarray, np.ndarray, float]:
    """``(A0, B0, tau)`` for co-located atoms: x' = A0 x + exp(i wa tau) B0 x(t - tau)."""
    z = net.positions
    if np.ptp(z) > DELAY_RTOL * z.max():
        raise NetworkError("single-delay form needs all atoms at one position")
    net.omega_a
    gr, gl = net.gamma_right, net.gamma_left
    a0 = -np.tril(np.outer(gr, gr), -1) - np.triu(np.outer(gl, gl), 1)
    a0 = a0 + np.diag(-0.5 * (gr**2 + gl**2))
    b0 = np.outer(gr, gl)
    return a0.astype(complex), b0.astype(complex), 2.0 * z[0] / net.light_speed


def pair_index(n: int) -> list[tuple[int, int]]:
    """Lexicographic list of atom pairs (j, l), j < l."""
    return [(j, l) for j in range(n) for l in range(j + 1, n)]


def build_two_excitation_pair_system(net: NetworkSpec) -> DelaySystem:
    """Delay system for the doubly-excited amplitudes c_jl(t), j < l.

    Each excited atom of the pair relaxes and is re-excited through the same
    one-excitation kernel while its partner stays excited.  A source atom can
    never be the partner itself, so the mirror and exchange sums run over the
    remaining atoms and act on the pair that contains the source.
    """
    n = net.n_atoms
    if n < 2:
        raise NetworkError("two-excitation dynamics needs at least two atoms")
    pairs = pair_index(n)
    index = {p: i for i, p in enumerate(pairs)}
    by_receiver: dict[int, list[tuple[int, float, complex]]] = {j: [] for j in range(n)}
    for j, p, d, coef in one_excitation_kernel(net):
        by_receiver[j].append((p, d, coef))
    entries = []
    for row, (a, b) in enumerate(pairs):
        for receiver, partner in ((a, b), (b, a)):
            for source, d, coef in by_receiver[receiver]:
                if source == partner:
                    continue
                if source == receiver:
                    col = row
                else:
                    col = index[tuple(sorted((partner, source)))]
                entries.append((row, col, d, coef))
    labels = [f"c{j + 1}{l + 1}" for j, l in pairs]
    return _assemble(len(pairs), entries, labels)


def effective_rates(atom: AtomSpec, waveguide_loss: float = 0.0, delta: float = 0.0) -> DerivedRates:
    """Waveguide-mediated decay and frequency shift for a single atom in front of the mirror."""
    if not (math.isfinite(waveguide_loss) and waveguide_loss >= 0 and math.isfinite(delta)):
        raise ValueError("waveguide_loss must be finite and >= 0, delta finite")
    phase = 2.0 * atom.omega_a * atom.position / LIGHT_SPEED
    gr, gl = atom.gamma_right, atom.gamma_left
    # (gR - gL)^2/2 + gR gL (1 - cos): clip the round-off below zero
    y_gamma = max(0.5 * (gr**2 + gl**2) - gl * gr * math.cos(phase), 0.0)
    Y = delta + gl * gr * math.sin(phase)
    return DerivedRates(y_gamma, Y, y_gamma + waveguide_loss)
