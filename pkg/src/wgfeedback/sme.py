"""Homodyne-measurement feedback trajectories (Ito, Euler-Maruyama).

Conditional Bloch means evolve as

    d s+ = [-i Y' s+ - G/2 s+ - i W/2 sz + i g gR X + g^2 (s- - s+)] dt
           + [gR ((1 + sz)/2 - X s+) - i g sz] dW
    d s- = complex conjugate structure
    d sz = [-i W (s+ - s-) - G (sz + 1) - 2 g^2 sz] dt
           + [-gR X (1 + sz) - 2 i g (s+ - s-)] dW

with X = s+ + s-, g the feedback strength and gR the monitored coupling.
When gR^2 exceeds the decay rate the scheme can leave the Bloch ball; such
steps are projected back radially and counted.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .open_system import BlochVector, DriveParams, FeedbackParams

MAX_DT = 0.05
BLOWUP = 10.0
PURITY_TOL = 1e-3
MAX_VIOLATION_RATE = 1e-3
NOISE_BLOCK = 1024


class TrajectoryBlowup(FloatingPointError):
    pass


class ViolationRateError(RuntimeError):
    pass


class NotConvergedError(ValueError):
    pass


def derive_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Independent child seed for trajectory ``index`` (splittable, order-free)."""
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


class NoiseStream:
    """Wiener increments with variance dt, addressable by (seed, counter).

    Increments come in fixed blocks; block b is drawn from its own child
    seed, so any position can be regenerated without replaying the stream.
    """

    def __init__(self, seed, dt: float, block: int = NOISE_BLOCK):
        if not dt > 0:
            raise ValueError("dt must be > 0")
        self.seed = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        self.dt = dt
        self.block = block
        self.counter = 0
        self._cache: tuple[int, np.ndarray] | None = None

    def _block(self, b: int) -> np.ndarray:
        if self._cache is None or self._cache[0] != b:
            ss = np.random.SeedSequence(self.seed.entropy, spawn_key=tuple(self.seed.spawn_key) + (b,))
            z = np.random.Generator(np.random.PCG64(ss)).standard_normal(self.block)
            self._cache = (b, z)
        return self._cache[1]

    def draw(self, n: int) -> np.ndarray:
        out = np.empty(n)
        i = 0
        sq = math.sqrt(self.dt)
        while i < n:
            b, off = divmod(self.counter, self.block)
            take = min(n - i, self.block - off)
            out[i : i + take] = self._block(b)[off : off + take] * sq
            i += take
            self.counter += take
        return out

    def seek(self, counter: int) -> None:
        self.counter = int(counter)


def homodyne_record(state: BlochVector, fb: FeedbackParams, dW: float, dt: float) -> float:
    """I_c = gamma_1R <X> + dW / dt."""
    if not dt > 0:
        raise ValueError("dt must be > 0")
    return float(fb.gamma_1R * state.x.real + dW / dt)


def _coefficients(sp, sm, sz, drive: DriveParams, fb: FeedbackParams):
    y = drive.y_complex
    G, W = drive.gamma_eff, drive.rabi
    g, gR = fb.g_f, fb.gamma_1R
    g2 = g * g
    X = sp + sm
    a_p = -1j * y * sp - 0.5 * G * sp - 0.5j * W * sz + 1j * g * gR * X + g2 * (sm - sp)
    a_m = 1j * y * sm - 0.5 * G * sm + 0.5j * W * sz - 1j * g * gR * X + g2 * (sp - sm)
    a_z = -1j * W * (sp - sm) - G * (sz + 1) - 2 * g2 * sz
    b_p = gR * (0.5 * (1 + sz) - X * sp) - 1j * g * sz
    b_m = gR * (0.5 * (1 + sz) - X * sm) + 1j * g * sz
    b_z = -gR * X * (1 + sz) - 2j * g * (sp - sm)
    return (a_p, a_m, a_z), (b_p, b_m, b_z)


def _project(sp, sm, sz):
    """Radial projection onto the Bloch ball; returns new state and a violation mask."""
    r = sz.real**2 + 4 * np.abs(sp) ** 2
    bad = r > 1 + PURITY_TOL
    scale = np.where(r > 1, 1 / np.sqrt(np.maximum(r, 1)), 1.0)
    return sp * scale, sm * scale, sz * scale, bad


@dataclass
class TrajectoryState:
    bloch: BlochVector
    t: float = 0.0
    record: list = field(default_factory=list)
    violations: int = 0


def sme_step(state: TrajectoryState, drive: DriveParams, fb: FeedbackParams, dW: float, dt: float, project: bool = True) -> TrajectoryState:
    if not 0 < dt <= MAX_DT + 1e-15:
        raise ValueError(f"dt must lie in (0, {MAX_DT}]")
    if not math.isfinite(dW):
        raise ValueError("dW must be finite")
    b = state.bloch
    (ap, am, az), (bp, bm, bz) = _coefficients(b.sp, b.sm, b.sz, drive, fb)
    sp = b.sp + ap * dt + bp * dW
    sm = b.sm + am * dt + bm * dW
    sz = b.sz + az * dt + bz * dW
    viol = state.violations
    if project:
        sp, sm, sz, bad = _project(np.asarray(sp), np.asarray(sm), np.asarray(sz))
        viol += int(bad)
    new = BlochVector(complex(sp), complex(sm), complex(sz))
    if not np.all(np.isfinite(new.as_array())) or np.max(np.abs(new.as_array())) > BLOWUP:
        raise TrajectoryBlowup(f"state left the bounded region at t={state.t + dt:.6g}: {new}")
    rec = state.record + [homodyne_record(b, fb, dW, dt)]
    return TrajectoryState(new, state.t + dt, rec, viol)


@dataclass
class TrajectoryResult:
    times: np.ndarray
    states: np.ndarray  # (T, 3): s+, s-, sz
    record: np.ndarray  # homodyne sample per step
    dW: np.ndarray
    violations: int
    steps: int

    @property
    def violation_rate(self) -> float:
        return self.violations / max(self.steps, 1)


def _n_steps(t_end: float, dt: float) -> int:
    n = t_end / dt
    return int(round(n)) if abs(n - round(n)) < 1e-9 else math.ceil(n)


def _simulate_batch(drive, fb, init, n_steps, dt, noise: np.ndarray | None, project: bool, record_every: int, keep_noise: bool):
    """Vectorized EM over a batch; ``noise`` is (batch, n_steps) or None for the noiseless limit."""
    batch = 1 if noise is None else noise.shape[0]
    x0 = np.asarray(init.as_array() if isinstance(init, BlochVector) else init, dtype=complex)
    sp = np.full(batch, x0[0])
    sm = np.full(batch, x0[1])
    sz = np.full(batch, x0[2])
    n_rec = n_steps // record_every + 1
    out = np.empty((n_rec, 3, batch), dtype=complex)
    out[0] = sp, sm, sz
    record = np.empty((batch, n_steps)) if keep_noise else None
    viol = np.zeros(batch, dtype=np.int64)
    zero = np.zeros(batch)
    for n in range(n_steps):
        dW = zero if noise is None else noise[:, n]
        (ap, am, az), (bp, bm, bz) = _coefficients(sp, sm, sz, drive, fb)
        if record is not None:
            record[:, n] = fb.gamma_1R * (sp + sm).real + dW / dt
        sp = sp + ap * dt + bp * dW
        sm = sm + am * dt + bm * dW
        sz = sz + az * dt + bz * dW
        if project:
            sp, sm, sz, bad = _project(sp, sm, sz)
            viol += bad
        if not (np.all(np.isfinite(sz)) and np.max(np.abs(sz)) <= BLOWUP and np.max(np.abs(sp)) <= BLOWUP):
            raise TrajectoryBlowup(f"state left the bounded region at t={(n + 1) * dt:.6g}")
        if (n + 1) % record_every == 0:
            out[(n + 1) // record_every] = sp, sm, sz
    return out, record, viol


def run_trajectory(
    drive: DriveParams,
    fb: FeedbackParams,
    init: BlochVector,
    t_end: float,
    dt: float,
    seed=None,
    project: bool = True,
    max_violation_rate: float | None = MAX_VIOLATION_RATE,
) -> TrajectoryResult:
    """One trajectory; ``seed=None`` runs the noiseless (dW = 0) limit."""
    if not 0 < dt <= MAX_DT + 1e-15:
        raise ValueError(f"dt must lie in (0, {MAX_DT}]")
    n = _n_steps(t_end, dt)
    noise = None if seed is None else NoiseStream(seed, dt).draw(n)[None, :]
    out, record, viol = _simulate_batch(drive, fb, init, n, dt, noise, project, 1, True)
    v = int(viol[0])
    if max_violation_rate is not None and v > max_violation_rate * n:
        raise ViolationRateError(f"{v} of {n} steps left the Bloch ball")
    dW = np.zeros(n) if noise is None else noise[0]
    return TrajectoryResult(np.arange(n + 1) * dt, out[:, :, 0], record[0], dW, v, n)


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean_sz: np.ndarray
    var_sz: np.ndarray
    n_traj: int
    master_seed: int
    chunk_size: int
    violations: int = 0
    steps: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def stderr_sz(self) -> np.ndarray:
        return np.sqrt(self.var_sz / self.n_traj)

    @property
    def violation_rate(self) -> float:
        return self.violations / max(self.steps, 1)

    def seed_manifest(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "derivation": "SeedSequence(master_seed, spawn_key=(trajectory_index,))",
            "n_traj": self.n_traj,
            "chunk_size": self.chunk_size,
        }


def _chunk_job(args):
    drive, fb, init, n_steps, dt, master_seed, start, stop, project, record_every, burn_steps = args
    noise = np.stack([NoiseStream(derive_seed(master_seed, i), dt).draw(n_steps) for i in range(start, stop)])
    out, _, viol = _simulate_batch(drive, fb, init, n_steps, dt, noise, project, record_every, False)
    sz = out[:, 2, :].real  # (T, batch)
    mean = sz.mean(axis=1)
    m2 = ((sz - mean[:, None]) ** 2).sum(axis=1)
    # stationary spread per trajectory over the tail
    tail = sz[burn_steps // record_every :, :]
    tail_std = tail.std(axis=0)
    return stop - start, mean, m2, int(viol.sum()), tail_std


def _merge(a, b):
    """Chan et al. pairwise merge of (count, mean, M2)."""
    na, ma, qa = a
    nb, mb, qb = b
    n = na + nb
    delta = mb - ma
    return n, ma + delta * (nb / n), qa + qb + delta**2 * (na * nb / n)


def run_ensemble(
    drive: DriveParams,
    fb: FeedbackParams,
    init: BlochVector,
    t_end: float,
    dt: float,
    n_traj: int,
    master_seed: int,
    chunk_size: int = 100,
    workers: int = 1,
    project: bool = True,
    max_violation_rate: float | None = MAX_VIOLATION_RATE,
    record_every: int = 1,
    burn_in: float | None = None,
) -> EnsembleStats:
    """Ensemble statistics of <sz>; results do not depend on ``workers``.

    Trajectories are grouped into fixed chunks of ``chunk_size`` by index and
    merged in chunk order, so any process schedule produces the same bits.
    ``burn_in`` (default half the run) sets the window for the per-trajectory
    stationary spread reported in ``extra['tail_std']``.
    """
    if n_traj < 2:
        raise ValueError("need at least two trajectories")
    if not 0 < dt <= MAX_DT + 1e-15:
        raise ValueError(f"dt must lie in (0, {MAX_DT}]")
    n_steps = _n_steps(t_end, dt)
    burn_steps = int(round((0.5 * t_end if burn_in is None else burn_in) / dt))
    jobs = [
        (drive, fb, init, n_steps, dt, master_seed, s, min(s + chunk_size, n_traj), project, record_every, burn_steps)
        for s in range(0, n_traj, chunk_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs), os.cpu_count() or 1)) as ex:
            results = list(ex.map(_chunk_job, jobs))
    else:
        results = [_chunk_job(j) for j in jobs]
    acc = None
    viol = 0
    tails = []
    for cnt, mean, m2, v, tail_std in results:
        acc = (cnt, mean, m2) if acc is None else _merge(acc, (cnt, mean, m2))
        viol += v
        tails.append(tail_std)
    n, mean, m2 = acc
    steps = n_steps * n_traj
    if max_violation_rate is not None and viol > max_violation_rate * steps:
        raise ViolationRateError(f"{viol} of {steps} steps left the Bloch ball (rate {viol / steps:.3g})")
    times = np.arange(n_steps // record_every + 1) * dt * record_every
    return EnsembleStats(
        times, mean, m2 / (n - 1), n, master_seed, chunk_size, viol, steps, {"tail_std": np.concatenate(tails)}
    )


def deterministic_limit(drive, fb, init, t_end, dt, project: bool = True) -> TrajectoryResult:
    return run_trajectory(drive, fb, init, t_end, dt, seed=None, project=project, max_violation_rate=None)


def predicted_fluctuation(V: float, gamma_eff: float) -> float:
    """2 sqrt(V Gamma_eff) / (1 + 2V): noise coefficient of Im(s+ - s-) at the fixed point."""
    if not (V > 0 and gamma_eff > 0):
        raise ValueError("V and gamma_eff must be > 0")
    return 2 * math.sqrt(V * gamma_eff) / (1 + 2 * V)


@dataclass(frozen=True)
class Regression:
    slope: float
    stderr: float
    n: int


def increment_regression(
    drive, fb, init, t_end, dt, n_traj, master_seed, burn_in: float, project: bool = True, chunk_size: int = 100
) -> Regression:
    """Least-squares slope of d Im(s+ - s-) on dW over the stationary window.

    Slopes are computed per trajectory and combined as mean +- standard error
    across trajectories, which keeps serial correlation out of the error bar.
    """
    if n_traj < 2:
        raise ValueError("need at least two trajectories")
    n_steps = _n_steps(t_end, dt)
    b0 = int(round(burn_in / dt))
    if b0 >= n_steps - 1:
        raise ValueError("burn-in leaves no stationary window")
    slopes = []
    for start in range(0, n_traj, chunk_size):
        idx = range(start, min(start + chunk_size, n_traj))
        dW = np.stack([NoiseStream(derive_seed(master_seed, i), dt).draw(n_steps) for i in idx])
        out, _, _ = _simulate_batch(drive, fb, init, n_steps, dt, dW, project, 1, False)
        y = (out[:, 0, :] - out[:, 1, :]).imag  # (T, batch)
        dy = np.diff(y, axis=0)[b0:].T
        w = dW[:, b0:]
        slopes.append(np.sum(w * dy, axis=1) / np.sum(w * w, axis=1))
    s = np.concatenate(slopes)
    return Regression(float(s.mean()), float(s.std(ddof=1) / math.sqrt(len(s))), len(s))


def convergence_time(times, series, level: float = 1 / math.e, tail: float = 0.1, drift_tol: float = 1e-3) -> float:
    """First time after which |f - f_final| stays within level * |f(0) - f_final|.

    ``f_final`` is the mean over the last ``tail`` fraction of the record; the
    series counts as converged when that window spans less than ``drift_tol``.
    The crossing is located by linear interpolation.
    """
    t = np.asarray(times, dtype=float)
    f = np.asarray(series, dtype=float)
    if len(t) != len(f) or len(t) < 2:
        raise ValueError("need aligned series with at least two samples")
    k = max(2, int(math.ceil(tail * len(f))))
    window = f[-k:]
    if np.ptp(window) >= drift_tol:
        raise NotConvergedError(f"series still drifting by {np.ptp(window):.3g} over the last {tail:.0%}")
    final = float(window.mean())
    amp = abs(f[0] - final)
    if amp == 0:
        return 0.0
    dev = np.abs(f - final) - level * amp
    outside = np.flatnonzero(dev > 0)
    if outside.size == 0:
        return float(t[0])
    i = outside[-1]
    if i == len(f) - 1:
        raise NotConvergedError("series never settles inside the band")
    d0, d1 = dev[i], dev[i + 1]
    return float(t[i] + (t[i + 1] - t[i]) * d0 / (d0 - d1))
