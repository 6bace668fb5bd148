"""Dense kernels for finite-horizon LTI analysis.

Matrix exponential, controllability Gramians (continuous and grid-sampled),
and exact propagation of piecewise-linear inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import InvalidArgumentError, UncontrollableError
from .signals import Signal, trapezoid_weights

RCOND_MIN = 1e-12


@dataclass(frozen=True, eq=False)
class LtiSystem:
    """dx/dt = A x + B u with A (n, n) and B (n, m)."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise InvalidArgumentError(f"A must be square n x n, got shape {A.shape}")
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise InvalidArgumentError(
                f"B must be n x m with n={A.shape[0]}, got shape {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise InvalidArgumentError("A and B must have finite entries")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


# ---------------------------------------------------------------------------
# Matrix exponential: scaling and squaring around a diagonal Pade approximant.
# Degree selection and theta thresholds follow Higham (2005).

_PADE_THETA = ((3, 1.495585217958292e-2), (5, 2.539398330063230e-1),
               (7, 9.504178996162932e-1), (9, 2.097847961257068e0))
_THETA_13 = 5.371920351148152

_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}


def _pade_low(M, deg):
    b = _PADE_B[deg]
    ident = np.eye(M.shape[0])
    M2 = M @ M
    powers = [ident, M2]
    for _ in range(deg // 2 - 1):
        powers.append(powers[-1] @ M2)
    U = M @ sum(b[2 * k + 1] * powers[k] for k in range(len(powers)))
    V = sum(b[2 * k] * powers[k] for k in range(len(powers)))
    return U, V


def _pade13(M):
    b = _PADE_B[13]
    ident = np.eye(M.shape[0])
    M2 = M @ M
    M4 = M2 @ M2
    M6 = M4 @ M2
    U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
             + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
         + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
    return U, V


def expm(M) -> np.ndarray:
    """Matrix exponential of a real square matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgumentError("expm input must be finite")
    if M.shape[0] == 0:
        return np.zeros((0, 0))
    norm1 = np.linalg.norm(M, 1)
    if norm1 == 0.0:
        return np.eye(M.shape[0])
    for deg, theta in _PADE_THETA:
        if norm1 <= theta:
            U, V = _pade_low(M, deg)
            return np.linalg.solve(V - U, V + U)
    s = max(0, math.ceil(math.log2(norm1 / _THETA_13)))
    U, V = _pade13(M / 2.0**s)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    return R


# ---------------------------------------------------------------------------
# Gramians

@dataclass(frozen=True, eq=False)
class Gramian:
    """Symmetric positive definite W with its Cholesky factor.

    ``rcond`` is the LAPACK 1-norm reciprocal condition estimate of W; below
    1e-12 the Gramian is treated as singular. ``rcond_scaled`` is the same
    estimate after symmetric scaling to unit diagonal, reported because
    Cholesky accuracy on graded matrices depends on it rather than on rcond.
    """

    W: np.ndarray
    T: float
    factor: np.ndarray = field(repr=False)
    rcond: float
    rcond_scaled: float

    @classmethod
    def from_matrix(cls, W, T: float) -> "Gramian":
        W = np.array(W, dtype=float)
        W = 0.5 * (W + W.T)
        try:
            L = np.linalg.cholesky(W)
        except np.linalg.LinAlgError:
            raise UncontrollableError(
                "uncontrollable-at-horizon: Gramian is not positive definite", 0.0)
        rcond = _pocon(L, np.linalg.norm(W, 1))
        d = np.sqrt(np.diag(W))
        Ls = L / d[:, None]
        rcond_scaled = _pocon(Ls, np.linalg.norm(W / np.outer(d, d), 1))
        if not rcond >= RCOND_MIN:
            raise UncontrollableError(
                f"uncontrollable-at-horizon: rcond={rcond:.3e} < {RCOND_MIN:g}", rcond)
        for a in (W, L):
            a.setflags(write=False)
        return cls(W, float(T), L, rcond, rcond_scaled)

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def solve(self, b) -> np.ndarray:
        return solve_spd(self, b)


def _pocon(L, anorm):
    rc, info = lapack.dpocon(np.asfortranarray(L.T), anorm, uplo="U")
    if info != 0:
        return 0.0
    return float(rc)


def solve_spd(G: Gramian, b) -> np.ndarray:
    """z with G.W z = b, by forward then backward triangular solves."""
    b = np.asarray(b, dtype=float)
    y = sla.solve_triangular(G.factor, b, lower=True, check_finite=False)
    return sla.solve_triangular(G.factor.T, y, lower=False, check_finite=False)


def _check_horizon(T):
    T = float(T)
    if not (np.isfinite(T) and T > 0):
        raise InvalidArgumentError(f"horizon T must be positive, got {T}")
    return T


def gramian_vanloan(sys: LtiSystem, T: float) -> np.ndarray:
    """int_0^T e^{A(T-t)} B B' e^{A'(T-t)} dt from one 2n x 2n exponential."""
    n = sys.n
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -sys.A
    M[:n, n:] = sys.B @ sys.B.T
    M[n:, n:] = sys.A.T
    E = expm(M * T)
    # E[:n, n:] = e^{-AT} W, E[n:, n:] = e^{A'T}
    W = E[n:, n:].T @ E[:n, n:]
    return 0.5 * (W + W.T)


def gramian_simpson(sys: LtiSystem, T: float, panels: int = 1000) -> np.ndarray:
    """Composite Simpson quadrature of the Gramian integrand (cross-check path)."""
    if panels < 2 or panels % 2:
        raise InvalidArgumentError("Simpson needs an even number of panels >= 2")
    h = T / panels
    step = expm(sys.A * h)
    E = np.eye(sys.n)
    BBt = sys.B @ sys.B.T
    W = np.zeros((sys.n, sys.n))
    for k in range(panels + 1):
        c = 1.0 if k in (0, panels) else (4.0 if k % 2 else 2.0)
        W += c * (E @ BBt @ E.T)
        E = step @ E
    W *= h / 3.0
    return 0.5 * (W + W.T)


def gramian(sys: LtiSystem, T: float, method: str = "vanloan", panels: int = 1000) -> Gramian:
    """Controllability Gramian W_c(T), factored.

    Raises UncontrollableError if W_c(T) is not numerically positive definite.
    """
    T = _check_horizon(T)
    if method == "vanloan":
        W = gramian_vanloan(sys, T)
    elif method == "simpson":
        W = gramian_simpson(sys, T, panels)
    else:
        raise InvalidArgumentError(f"unknown Gramian method {method!r}")
    return Gramian.from_matrix(W, T)


# ---------------------------------------------------------------------------
# Exact propagation of piecewise-linear inputs

def _lyapunov_sum(P, X, count):
    """sum_{j=0}^{count-1} P^j X P'^j by binary doubling."""
    total = np.zeros_like(X)
    offset = np.eye(P.shape[0])
    block, Pb = X.copy(), P.copy()
    while count:
        if count & 1:
            total += offset @ block @ offset.T
            offset = offset @ Pb
        count >>= 1
        if count:
            block = block + Pb @ block @ Pb.T
            Pb = Pb @ Pb
    return total


class GridOperator:
    """Linear map from input samples on a uniform grid to the state at T.

    The input is linear between samples (first-order hold) and each step is
    integrated exactly through the exponential of an augmented matrix, so

        x_{k+1} = Phi x_k + G_lo u_k + G_hi u_{k+1}.

    With trapezoid weights q_k defining the input inner product, ``adjoint``
    and ``gramian`` are the matching adjoint map and the sampled Gramian
    W_N = sum_k K_k K_k' / q_k, where K_k is the weight of sample k in x(T).
    W_N tends to the continuous Gramian at rate O(h^2).
    """

    def __init__(self, sys: LtiSystem, T: float, N: int):
        T = _check_horizon(T)
        if N < 2:
            raise InvalidArgumentError(f"grid needs N >= 2 intervals, got {N}")
        self.sys, self.T, self.N = sys, T, int(N)
        self.h = T / N
        self.q = trapezoid_weights(self.N, T)
        n, m = sys.n, sys.m
        M = np.zeros((n + 2 * m, n + 2 * m))
        M[:n, :n] = sys.A * self.h
        M[:n, n:n + m] = sys.B * self.h
        M[n:n + m, n + m:] = np.eye(m)
        E = expm(M)
        self.phi = E[:n, :n]
        self.g_hi = E[:n, n + m:]
        self.g_lo = E[:n, n:n + m] - self.g_hi
        # weight of an interior sample, up to the factor Phi^(N-1-k)
        self.g_mid = self.g_lo + self.phi @ self.g_hi

    def _samples(self, u):
        U = u.samples if isinstance(u, Signal) else np.asarray(u, dtype=float)
        if U.shape != (self.sys.m, self.N + 1):
            raise InvalidArgumentError(
                f"input shape {U.shape} does not match (m={self.sys.m}, N+1={self.N + 1})")
        return U

    def trajectory(self, u, x0=None) -> np.ndarray:
        """States at every grid point, shape (n, N+1)."""
        U = self._samples(u)
        n = self.sys.n
        x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).reshape(n)
        drive = self.g_lo @ U[:, :-1] + self.g_hi @ U[:, 1:]
        X = np.empty((n, self.N + 1))
        X[:, 0] = x
        for k in range(self.N):
            x = self.phi @ x + drive[:, k]
            X[:, k + 1] = x
        return X

    def forward(self, u, x0=None) -> np.ndarray:
        return self.trajectory(u, x0)[:, -1]

    def adjoint(self, z) -> np.ndarray:
        """Samples Q^{-1} K' z, shape (m, N+1).

        This is the grid counterpart of t -> B' e^{A'(T-t)} z.
        """
        z = np.asarray(z, dtype=float)
        N = self.N
        # a_j = (Phi')^j z for j = 0..N-1, built backward from t = T
        a = np.empty((self.sys.n, N))
        a[:, 0] = z
        phiT = self.phi.T
        for j in range(1, N):
            a[:, j] = phiT @ a[:, j - 1]
        out = np.empty((self.sys.m, N + 1))
        out[:, N] = self.g_hi.T @ z
        # sample k = N - j for j = 1..N-1
        out[:, 1:N] = (self.g_mid.T @ a[:, :N - 1])[:, ::-1]
        out[:, 0] = self.g_lo.T @ a[:, N - 1]
        return out / self.q

    def gramian_matrix(self) -> np.ndarray:
        first = np.linalg.matrix_power(self.phi, self.N - 1) @ self.g_lo
        W = _lyapunov_sum(self.phi, self.g_mid @ self.g_mid.T, self.N - 1) / self.h
        W += (first @ first.T) / self.q[0] + (self.g_hi @ self.g_hi.T) / self.q[-1]
        return 0.5 * (W + W.T)

    def gramian(self) -> Gramian:
        return Gramian.from_matrix(self.gramian_matrix(), self.T)


def sampled_gramian(sys: LtiSystem, T: float, N: int) -> Gramian:
    return GridOperator(sys, T, N).gramian()


def _operator_for(sys: LtiSystem, u: Signal, T=None) -> GridOperator:
    if u.m != sys.m:
        raise InvalidArgumentError(f"input has m={u.m} rows, system has m={sys.m}")
    if T is not None and abs(float(T) - u.T) > 1e-12 * max(abs(float(T)), u.T):
        raise InvalidArgumentError(f"horizon T={T} does not match signal grid T={u.T}")
    return GridOperator(sys, u.T, u.N)


def simulate(sys: LtiSystem, x0, u: Signal) -> np.ndarray:
    """State trajectory x(t_k), shape (n, N+1), under input ``u``."""
    x0 = _state(sys, x0)
    return _operator_for(sys, u).trajectory(u, x0)


def propagate(sys: LtiSystem, x0, u: Signal, T: float) -> np.ndarray:
    """x(T) = e^{AT} x0 + int_0^T e^{A(T-t)} B u(t) dt for piecewise-linear u."""
    x0 = _state(sys, x0)
    return _operator_for(sys, u, T).forward(u, x0)


def _state(sys, x0):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.shape != (sys.n,):
        raise InvalidArgumentError(f"state must have length n={sys.n}, got {x0.shape[0]}")
    return x0
