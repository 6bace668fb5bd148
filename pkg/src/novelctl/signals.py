"""Vector-valued inputs sampled on a uniform grid over [0, T].

All integrals are trapezoidal sums with the same weights, so the identity
``euclid_novelty(v, u) == avg_energy(v) + avg_energy(u) - 2 novelty(v, u)``
holds to rounding error rather than only asymptotically.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError

DEFAULT_GRID = 1000


def trapezoid_weights(N: int, T: float) -> np.ndarray:
    """Weights q_k with sum(q_k f(t_k)) the trapezoid rule on N intervals."""
    w = np.full(N + 1, T / N)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@dataclass(frozen=True, eq=False)
class Signal:
    """Samples of an m-dimensional input at t_k = k T / N, k = 0..N.

    ``samples`` has shape (m, N + 1); column k is the value at t_k. Between
    grid points the signal is the linear interpolant of the samples.

    A prior input v(t - T) is stored already shifted onto [0, T], i.e.
    column k holds v(t_k - T).
    """

    samples: np.ndarray
    T: float

    def __post_init__(self):
        x = np.array(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2:
            raise InvalidArgumentError(f"samples must be 2-D (m, N+1), got ndim={x.ndim}")
        if x.shape[0] < 1 or x.shape[1] < 3:
            raise InvalidArgumentError(
                f"need m >= 1 and N >= 2 intervals, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidArgumentError("signal samples must be finite")
        T = float(self.T)
        if not (np.isfinite(T) and T > 0):
            raise InvalidArgumentError(f"horizon T must be positive, got {self.T}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "T", T)

    @property
    def m(self) -> int:
        return self.samples.shape[0]

    @property
    def N(self) -> int:
        return self.samples.shape[1] - 1

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.N, self.T)

    @classmethod
    def constant(cls, value, T: float, N: int = DEFAULT_GRID) -> "Signal":
        c = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.repeat(c[:, None], N + 1, axis=1), T)

    @classmethod
    def from_function(cls, f: Callable, T: float, N: int = DEFAULT_GRID) -> "Signal":
        """Sample ``f`` at the grid points; ``f(t)`` may return a scalar or an m-vector."""
        t = np.linspace(0.0, T, N + 1)
        cols = [np.atleast_1d(np.asarray(f(tk), dtype=float)) for tk in t]
        return cls(np.stack(cols, axis=1), T)

    def __call__(self, t):
        """Linear interpolation between samples; ``t`` scalar or array."""
        grid = self.t
        return np.stack([np.interp(t, grid, row) for row in self.samples])

    def scaled(self, alpha: float) -> "Signal":
        return Signal(alpha * self.samples, self.T)

    def same_grid(self, other: "Signal") -> bool:
        return (self.m == other.m and self.N == other.N
                and abs(self.T - other.T) <= 1e-12 * max(self.T, other.T))


def _check_grid(v: Signal, u: Signal):
    if not v.same_grid(u):
        raise InvalidArgumentError(
            f"grid mismatch: (m={v.m}, N={v.N}, T={v.T}) vs (m={u.m}, N={u.N}, T={u.T})")


def avg_energy(s: Signal) -> float:
    """(1/T) * trapezoid integral of ||s(t)||^2 over [0, T]."""
    return float(s.weights @ np.sum(s.samples**2, axis=0)) / s.T


def novelty(v: Signal, u: Signal) -> float:
    """Time-averaged inner product (1/T) int v(t-T)' u(t) dt.

    For unit-average-energy inputs the value lies in [-1, 1]; 1 means u
    repeats the prior exactly (no novelty).
    """
    _check_grid(v, u)
    return float(v.weights @ np.sum(v.samples * u.samples, axis=0)) / v.T


def euclid_novelty(v: Signal, u: Signal) -> float:
    """Mean squared distance (1/T) int ||v(t-T) - u(t)||^2 dt."""
    _check_grid(v, u)
    d = v.samples - u.samples
    return float(v.weights @ np.sum(d * d, axis=0)) / v.T


def normalize_energy(s: Signal) -> Signal:
    e = avg_energy(s)
    if not e > 0.0:
        raise DegenerateInputError("cannot normalize a zero signal")
    return s.scaled(1.0 / np.sqrt(e))


def write_signal_csv(path, s: Signal) -> None:
    """Write ``t,u1,...,um`` rows, one per grid point, with round-trip precision."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"u{i + 1}" for i in range(s.m)])
        for tk, col in zip(s.t, s.samples.T):
            w.writerow([repr(float(tk))] + [repr(float(x)) for x in col])


def read_signal_csv(path) -> Signal:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InvalidArgumentError(f"cannot read signal file {path}: {exc}") from exc
    if not rows:
        raise InvalidArgumentError(f"{path}: empty signal file")
    header = [c.strip() for c in rows[0]]
    if header and header[0] == "t":
        rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise InvalidArgumentError(f"{path}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] < 2 or data.shape[0] < 3:
        raise InvalidArgumentError(f"{path}: expected >= 3 rows of t,u1..um")
    t = data[:, 0]
    T = t[-1]
    if abs(t[0]) > 1e-12 * max(abs(T), 1.0):
        raise InvalidArgumentError(f"{path}: grid must start at t=0")
    N = len(t) - 1
    if np.max(np.abs(t - np.linspace(0.0, T, N + 1))) > 1e-9 * abs(T):
        raise InvalidArgumentError(f"{path}: grid is not uniform")
    return Signal(data[:, 1:].T, T)
