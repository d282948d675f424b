"""Fixed-step RK4 method of steps for linear complex delay systems.

The state before ``t = 0`` is identically zero and the initial vector applies
at ``t = 0`` only, so the delayed input switches on with a jump at every
delay.  Steps are snapped so that each delay is a whole number of steps when
the delays are commensurate; the jump then always falls on a grid point and
the scheme keeps its fourth order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .network import DelaySystem

Forcing = Callable[[float], np.ndarray]


class StepSizeError(ValueError):
    pass


class NonFiniteStateError(FloatingPointError):
    def __init__(self, t: float):
        super().__init__(f"state became non-finite at t={t:.6g}")
        self.t = t


def _hermite(x0, d0, x1, d1, u: float, h: float):
    u2 = u * u
    u3 = u2 * u
    return (
        (2 * u3 - 3 * u2 + 1) * x0
        + (u3 - 2 * u2 + u) * h * d0
        + (-2 * u3 + 3 * u2) * x1
        + (u3 - u2) * h * d1
    )


class HistoryBuffer:
    """Ring buffer of grid samples with one-sided derivatives for Hermite lookup.

    ``d_left`` / ``d_right`` differ only where the delayed input jumps; each
    segment ``[t_m, t_m+1]`` is interpolated with ``d_right[m]`` and
    ``d_left[m+1]``.
    """

    def __init__(self, dt: float, capacity: int, shape: tuple[int, ...], t0: float = 0.0):
        if dt <= 0:
            raise StepSizeError("dt must be > 0")
        self.t0 = t0
        self.dt = dt
        self.capacity = capacity
        self.samples = np.zeros((capacity, *shape), dtype=complex)
        self.d_right = np.zeros_like(self.samples)
        self.d_left = np.zeros_like(self.samples)
        self.current = -1

    @property
    def t_current(self) -> float:
        return self.t0 + self.current * self.dt

    def push(self, x: np.ndarray, d_left: np.ndarray) -> None:
        self.current += 1
        slot = self.current % self.capacity
        self.samples[slot] = x
        self.d_left[slot] = d_left
        self.d_right[slot] = d_left

    def set_right(self, index: int, d: np.ndarray) -> None:
        self.d_right[index % self.capacity] = d

    def segment(self, m: int, u: float) -> np.ndarray:
        """Value at ``t_m + u*dt`` from segment m; zero for segments before t0."""
        if m < 0:
            return np.zeros(self.samples.shape[1:], dtype=complex)
        if m + 1 > self.current or m <= self.current - self.capacity:
            if m == self.current and u == 0.0:
                return self.samples[m % self.capacity].copy()
            raise IndexError(f"segment {m} not held in history (current={self.current})")
        a, b = m % self.capacity, (m + 1) % self.capacity
        if u == 0.0:
            return self.samples[a].copy()
        if u == 1.0:
            return self.samples[b].copy()
        return _hermite(self.samples[a], self.d_right[a], self.samples[b], self.d_left[b], u, self.dt)


def sample_history(buffer: HistoryBuffer, t: float) -> np.ndarray:
    """History lookup: zero before t0, exact at grid points, cubic Hermite between."""
    if t < buffer.t0:
        return np.zeros(buffer.samples.shape[1:], dtype=complex)
    tc = buffer.t_current
    if t > tc + 1e-12 * max(1.0, abs(tc)):
        raise ValueError(f"cannot sample history at t={t} beyond current time {tc}")
    off = (t - buffer.t0) / buffer.dt
    m = int(math.floor(off))
    u = off - m
    if m >= buffer.current:
        return buffer.segment(buffer.current, 0.0)
    return buffer.segment(m, u)


@dataclass
class AmplitudeTrajectory:
    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...] = ()
    derivs: np.ndarray | None = None
    derivs_left: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states)
        if self.times.ndim != 1 or len(self.times) != len(self.states):
            raise ValueError("times and states must align")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.states) ** 2

    def at(self, t: float) -> np.ndarray:
        """State at arbitrary t inside the record (Hermite when derivatives exist)."""
        ts = self.times
        if t < ts[0] - 1e-12 or t > ts[-1] + 1e-9 * max(1.0, abs(ts[-1])):
            raise ValueError(f"t={t} outside trajectory [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = min(max(i, 0), len(ts) - 2) if len(ts) > 1 else 0
        if len(ts) == 1:
            return self.states[0].copy()
        h = ts[i + 1] - ts[i]
        u = (t - ts[i]) / h
        if u <= 0:
            return self.states[i].copy()
        if u >= 1:
            return self.states[i + 1].copy()
        if self.derivs is None:
            return (1 - u) * self.states[i] + u * self.states[i + 1]
        d1 = self.derivs[i + 1] if self.derivs_left is None else self.derivs_left[i + 1]
        return _hermite(self.states[i], self.derivs[i], self.states[i + 1], d1, u, h)


def snap_step(delays: Sequence[float], dt: float, max_refine: int = 64) -> float:
    """Largest step <= dt that divides every delay, if one exists within the search range."""
    if not delays:
        return dt
    dmin = min(delays)
    n0 = max(1, math.ceil(dmin / dt - 1e-9))
    for n in range(n0, n0 * max_refine + 1):
        h = dmin / n
        if all(abs(d / h - round(d / h)) < 1e-7 for d in delays):
            return h
    return dmin / n0


def integrate_dde(
    system: DelaySystem,
    init: np.ndarray,
    t_end: float,
    dt: float,
    forcing: Forcing | None = None,
    record_every: int = 1,
    snap: bool = True,
) -> AmplitudeTrajectory:
    """Integrate ``x' = A x + sum B_k x(t - d_k) + forcing(t)`` on ``[0, t_end]``.

    ``init`` may carry trailing axes (e.g. one column per wavenumber); the
    matrices act on the leading axis.  The last grid time is the first step
    boundary at or beyond ``t_end``.
    """
    if not (t_end > 0 and math.isfinite(t_end)):
        raise ValueError("t_end must be finite and > 0")
    if not dt > 0:
        raise StepSizeError("dt must be > 0")
    delays = system.delays
    if delays and dt > min(delays) / 4 * (1 + 1e-12):
        raise StepSizeError(f"dt={dt} exceeds min(delay)/4 = {min(delays) / 4}")
    if snap:
        dt = snap_step(delays, dt)
    x = np.array(init, dtype=complex)
    if x.shape[0] != system.dim:
        raise ValueError(f"initial state has leading size {x.shape[0]}, system dim {system.dim}")

    A = system.instantaneous
    mats = [m for _, m in system.delayed_terms]
    offsets = [d / dt for d in delays]
    aligned = [abs(o - round(o)) < 1e-7 for o in offsets]
    kmax = max(offsets, default=0.0)
    buf = HistoryBuffer(dt, int(math.ceil(kmax)) + 3, x.shape)

    def matvec(m, v):
        return m @ v if v.ndim == 1 else np.tensordot(m, v, axes=(1, 0))

    def delayed(n: int, c: float) -> np.ndarray:
        total = np.zeros_like(x)
        for mat, off, al in zip(mats, offsets, aligned):
            o = n + c - (round(off) if al else off)
            # c == 0 is the right limit at t_n, otherwise the limit from inside the step
            m = math.floor(o) if c == 0.0 else math.ceil(o) - 1
            if m < -1 or (m == -1 and c == 0.0):
                continue
            total += matvec(mat, buf.segment(m, o - m))
        return total

    def force(t: float):
        return 0.0 if forcing is None else forcing(t)

    n_steps = max(1, int(round(t_end / dt)) if abs(t_end / dt - round(t_end / dt)) < 1e-9 else math.ceil(t_end / dt))
    d0 = matvec(A, x) + force(0.0)
    buf.push(x, d0)
    times, states, derivs, derivs_left = [0.0], [x.copy()], [], [d0]
    for n in range(n_steps):
        t = n * dt
        k1 = matvec(A, x) + delayed(n, 0.0) + force(t)
        buf.set_right(n, k1)
        if n % record_every == 0:
            derivs.append(k1)
        dh = delayed(n, 0.5) + force(t + 0.5 * dt)
        k2 = matvec(A, x + 0.5 * dt * k1) + dh
        k3 = matvec(A, x + 0.5 * dt * k2) + dh
        d1 = delayed(n, 1.0) + force(t + dt)
        k4 = matvec(A, x + dt * k3) + d1
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(t + dt)
        d_left = matvec(A, x) + d1
        buf.push(x, d_left)
        if (n + 1) % record_every == 0:
            times.append((n + 1) * dt)
            states.append(x.copy())
            derivs_left.append(d_left)
    if n_steps % record_every == 0:
        derivs.append(matvec(A, x) + delayed(n_steps, 0.0) + force(n_steps * dt))
    return AmplitudeTrajectory(
        np.array(times), np.array(states), system.labels, np.array(derivs), np.array(derivs_left)
    )
