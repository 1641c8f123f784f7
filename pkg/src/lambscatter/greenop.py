"""Bounded solutions of ``y' = B y + f`` on the half line via the dichotomy kernel."""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.signal import lfilter

from .grid import GridFunction, cell_polynomials
from .spectral import HyperbolicSplit, matexp


def phi_blocks(T: np.ndarray, h: float, degree: int = 1):
    """``e^{Th}`` and ``int_0^h e^{T(h - s)} s^j / j! ds`` for ``j <= degree``, from one exponential."""
    k = T.shape[0]
    b = degree + 2
    M = np.zeros((b * k, b * k))
    M[:k, :k] = T
    for i in range(b - 1):
        M[i * k : (i + 1) * k, (i + 1) * k : (i + 2) * k] = np.eye(k)
    E = matexp(M * h)
    return E[:k, :k], [E[:k, (j + 1) * k : (j + 2) * k] for j in range(degree + 1)]


def linear_recurrence(G: np.ndarray, c: np.ndarray, z0: np.ndarray) -> np.ndarray:
    """Return ``z`` with ``z[0] = z0`` and ``z[j+1] = G z[j] + c[j]``."""
    steps, k = c.shape
    z = np.empty((steps + 1, k))
    z[0] = z0
    if steps == 0:
        return z
    if np.all(np.tril(G, -1) == 0.0):
        # triangular propagator: one scalar IIR filter per component, bottom up
        for i in range(k - 1, -1, -1):
            drive = c[:, i] + z[:-1, i + 1 :] @ G[i, i + 1 :]
            g = G[i, i]
            z[1:, i] = lfilter([1.0], [1.0, -g], drive, zi=[g * z0[i]])[0]
        return z
    for j in range(steps):
        z[j + 1] = G @ z[j] + c[j]
    return z


def apply_R(
    split: HyperbolicSplit, f: GridFunction, tail_tol: float | None = 1e-8, order: int = 3, breaks=None
) -> GridFunction:
    """``y = E * f`` for ``f`` extended by zero outside its window.

    On each cell ``f`` is replaced by a polynomial (``order`` 1: linear between
    the one-sided end values; ``order`` 3: the jump-aware four-point cubic of
    :func:`cell_polynomials`) and the convolution with ``e^{Bt}`` is integrated
    exactly: the stable part by a forward recursion from the left end, the
    unstable part by a backward recursion from the right end.  ``breaks``
    marks kink nodes for the cubic stencils.
    """
    if f.n != split.n:
        raise ValueError(f"forcing has dimension {f.n}, operator {split.n}")
    if order not in (1, 3):
        raise ValueError(f"order must be 1 or 3, got {order}")
    h = f.h
    if order == 3:
        coef = cell_polynomials(f, breaks)
    else:
        coef = np.stack([f.samples[:-1], f.lower[1:] - f.samples[:-1]], axis=1)
    y = np.zeros_like(f.samples)

    if tail_tol is not None and f.size > 20:
        tail = f.window(f.t[-max(2, f.size // 20)], f.t_end).l2_norm()
        if tail > tail_tol * (1.0 + f.l2_norm()):
            warnings.warn(f"forcing has not decayed at the window end (tail L2 {tail:.2e})", stacklevel=2)

    if split.Ts.size:
        G, blocks = phi_blocks(split.Ts, h, order)
        # int_0^h e^{Ts (h - s)} (s / h)^j ds
        moments = [math.factorial(j) * blocks[j] / h**j for j in range(order + 1)]
        c = sum((coef[:, j] @ split.Ws.T) @ moments[j].T for j in range(order + 1))
        z = linear_recurrence(G, c, np.zeros(G.shape[0]))
        y += z @ split.Vs.T

    if split.Tu.size:
        G, blocks = phi_blocks(-split.Tu, h, order)
        # int_0^h e^{-Tu s} (s / h)^j ds, expanding (s / h)^j in powers of (h - s) / h
        moments = [
            sum(math.comb(j, i) * (-1) ** i * math.factorial(i) * blocks[i] / h**i for i in range(j + 1))
            for j in range(order + 1)
        ]
        c = -sum((coef[:, j] @ split.Wu.T) @ moments[j].T for j in range(order + 1))
        z = linear_recurrence(G, c[::-1], np.zeros(G.shape[0]))[::-1]
        y += z @ split.Vu.T

    return f.like(y)
