"""Hyperbolic splitting of a real matrix and the exponential-dichotomy Green kernel."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotHyperbolic

# Higham (2005) Pade coefficients and 1-norm thresholds.
_PADE = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (
        17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0,
    ),
    13: (
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ),
}
_THETA = {3: 1.495585217958292e-2, 5: 2.539398330063230e-1, 7: 9.504178996162932e-1,
          9: 2.097847961257068, 13: 5.371920351148152}


def _pade_uv(A: np.ndarray, m: int):
    b = _PADE[m]
    ident = np.eye(A.shape[0])
    A2 = A @ A
    if m < 13:
        powers = [ident, A2]
        while len(powers) < (m + 1) // 2:
            powers.append(powers[-1] @ A2)
        U = A @ sum(b[2 * j + 1] * P for j, P in enumerate(powers))
        V = sum(b[2 * j] * P for j, P in enumerate(powers))
        return U, V
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    return U, V


def matexp(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a diagonal Pade approximant."""
    A = np.array(M, dtype=float, ndmin=2)
    if A.shape[0] != A.shape[1]:
        raise ValueError("matexp needs a square matrix")
    if A.size == 0:
        return A.copy()
    norm = np.linalg.norm(A, 1)
    if not math.isfinite(norm):
        raise ValueError("matexp needs finite entries")
    for m in (3, 5, 7, 9):
        if norm <= _THETA[m]:
            U, V = _pade_uv(A, m)
            return np.linalg.solve(V - U, V + U)
    s = max(0, int(math.ceil(math.log2(norm / _THETA[13]))))
    U, V = _pade_uv(A / 2.0**s, 13)
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


@dataclass(frozen=True, eq=False)
class HyperbolicSplit:
    """Stable/unstable decomposition of ``B`` with dichotomy constants.

    Besides the projectors, the split keeps the block factorisation
    ``B P_minus = Vs Ts Ws`` and ``B P_plus = Vu Tu Wu`` so that decaying
    exponentials are evaluated on each invariant block separately.
    """

    B: np.ndarray
    P_plus: np.ndarray
    P_minus: np.ndarray
    eps: float
    C: float
    eigenvalues: np.ndarray
    Vs: np.ndarray
    Ts: np.ndarray
    Ws: np.ndarray
    Vu: np.ndarray
    Tu: np.ndarray
    Wu: np.ndarray

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def A_minus(self) -> np.ndarray:
        return self.B @ self.P_minus

    @property
    def A_plus(self) -> np.ndarray:
        return self.B @ self.P_plus

    def projector_defects(self) -> dict:
        I = np.eye(self.n)
        Pp, Pm, B = self.P_plus, self.P_minus, self.B
        return {
            "sum": float(np.max(np.abs(Pp + Pm - I))),
            "product": float(np.max(np.abs(Pp @ Pm))),
            "idempotent_plus": float(np.max(np.abs(Pp @ Pp - Pp))),
            "idempotent_minus": float(np.max(np.abs(Pm @ Pm - Pm))),
            "commute_plus": float(np.max(np.abs(B @ Pp - Pp @ B))),
            "commute_minus": float(np.max(np.abs(B @ Pm - Pm @ B))),
        }


def _kernel_norm(split_parts, t: float) -> float:
    Vs, Ts, Ws, Vu, Tu, Wu = split_parts
    if t > 0:
        return float(np.linalg.norm(Vs @ matexp(Ts * t) @ Ws, 2)) if Ts.size else 0.0
    return float(np.linalg.norm(Vu @ matexp(Tu * t) @ Wu, 2)) if Tu.size else 0.0


def hyperbolic_split(B, tol: float = 1e-9, margin: float = 1.1) -> HyperbolicSplit:
    """Split ``B`` along the imaginary axis via the ordered real Schur form.

    ``eps`` is ``0.9 * min |Re lambda|``; ``C`` is ``margin`` times the largest
    sampled value of ``|E(t)| exp(eps |t|)`` on a log-spaced grid.
    """
    B = np.array(B, dtype=float, ndmin=2)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise ValueError("B must be square")
    if not np.all(np.isfinite(B)):
        raise ValueError("B must have finite entries")
    n = B.shape[0]
    eig = np.linalg.eigvals(B)
    gap = float(np.min(np.abs(eig.real)))
    if gap <= tol:
        raise NotHyperbolic(f"eigenvalue with |Re| = {gap:.3e} on the imaginary axis")
    T, Q, k = scipy.linalg.schur(B, output="real", sort="lhp")
    Q1, Q2 = Q[:, :k], Q[:, k:]
    T11, T12, T22 = T[:k, :k], T[:k, k:], T[k:, k:]
    if 0 < k < n:
        # block-diagonalising similarity [[I, Y], [0, I]]
        Y = scipy.linalg.solve_sylvester(T11, -T22, -T12)
    else:
        Y = np.zeros((k, n - k))
    Vs, Ws = Q1, Q1.T - Y @ Q2.T
    Vu, Wu = Q1 @ Y + Q2, Q2.T
    P_minus = Vs @ Ws
    P_plus = Vu @ Wu
    eps = 0.9 * gap
    parts = (Vs, T11, Ws, Vu, T22, Wu)
    ts = np.logspace(-6, math.log10(50.0 / eps), 240)
    worst = max(float(np.linalg.norm(P_minus, 2)), float(np.linalg.norm(P_plus, 2)))
    for t in ts:
        worst = max(worst, _kernel_norm(parts, t) * math.exp(eps * t), _kernel_norm(parts, -t) * math.exp(eps * t))
    return HyperbolicSplit(B, P_plus, P_minus, eps, margin * worst, eig, Vs, T11, Ws, Vu, T22, Wu)


def fundamental_solution(split: HyperbolicSplit, t: float) -> np.ndarray:
    """Green kernel ``E(t)``: ``e^{Bt} P_minus`` for t > 0, ``-e^{Bt} P_plus`` for t < 0.

    ``E(0)`` is taken as the right limit ``P_minus``.
    """
    if t >= 0:
        if split.Ts.size == 0:
            return np.zeros((split.n, split.n))
        return split.Vs @ matexp(split.Ts * t) @ split.Ws if t > 0 else split.P_minus.copy()
    if split.Tu.size == 0:
        return np.zeros((split.n, split.n))
    return -(split.Vu @ matexp(split.Tu * t) @ split.Wu)
