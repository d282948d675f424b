"""Numerical inverse Laplace transforms and s -> 0 limits."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

Transform = Callable[[complex], np.ndarray]


class LimitError(ArithmeticError):
    """The s -> 0 extrapolation did not settle."""


def talbot_inverse(F: Transform, t: float, nodes: int = 32) -> np.ndarray:
    """Fixed Talbot contour inversion for complex-valued f(t).

    Accurate for transforms whose singularities lie in a left sector (plain
    ODE resolvents).  Delay transforms carry pole chains running to
    infinity along the imaginary direction and are not enclosed; use
    :func:`euler_inverse` for those.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    r = 2.0 * nodes / (5.0 * t)
    total = 0.5 * np.exp(r * t) * np.asarray(F(complex(r)))
    for k in range(1, nodes):
        th = k * math.pi / nodes
        cot = 1.0 / math.tan(th)
        sigma = th + (th * cot - 1.0) * cot
        for sgn in (1.0, -1.0):
            s = r * th * cot + 1j * sgn * r * th
            w = np.exp(t * s)
            if abs(w) < 1e-300:
                continue
            total = total + 0.5 * w * np.asarray(F(s)) * (1 + 1j * sgn * sigma)
    return r / nodes * total


def euler_inverse(F: Transform, t: float, terms: int = 400, euler_order: int = 20, A: float = 18.4) -> np.ndarray:
    """Bromwich-line inversion with Euler summation (Fourier-series method).

    The line sits at Re s = A / (2t); discretization error is about exp(-A).
    Works for complex-valued f by summing both halves of the line.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    a = A / (2.0 * t)
    h = math.pi / t
    n_max = terms + euler_order
    vals = [np.asarray(F(complex(a)), dtype=complex)]
    for k in range(1, n_max + 1):
        vals.append((-1) ** k * (np.asarray(F(complex(a, k * h))) + np.asarray(F(complex(a, -k * h)))))
    partial = np.cumsum(np.array(vals), axis=0)
    weights = np.array([math.comb(euler_order, j) for j in range(euler_order + 1)]) / 2.0**euler_order
    acc = np.tensordot(weights, partial[terms : terms + euler_order + 1], axes=(0, 0))
    return np.exp(A / 2.0) / (2.0 * t) * acc


def limit_at_zero(
    g: Callable[[float], np.ndarray],
    start: float = 1e-2,
    decades: int = 7,
    tol: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Richardson-extrapolated ``lim_{s->0+} g(s)`` over s = start, start/10, ...

    Assumes ``g`` is analytic at 0 from the right.  Returns the estimate and
    an error estimate; raises :class:`LimitError` if the table does not settle
    to ``tol`` relative to the value scale.
    """
    s_vals = start * 10.0 ** -np.arange(decades)
    table = [np.asarray(g(float(s)), dtype=complex) for s in s_vals]
    best, best_err = table[-1], np.inf
    level = table
    for order in range(1, decades):
        fac = 10.0**order
        level = [(fac * level[i + 1] - level[i]) / (fac - 1.0) for i in range(len(level) - 1)]
        if len(level) >= 2:
            err = float(np.max(np.abs(level[-1] - level[-2])))
            if err < best_err:
                best, best_err = level[-1], err
    scale = max(1.0, float(np.max(np.abs(best))))
    if not np.all(np.isfinite(best)) or best_err > tol * scale:
        raise LimitError(f"s->0 limit did not converge (error estimate {best_err:.3g})")
    return best, best_err
