"""Minimally novel inputs for linear systems, in closed form.

Given a prior input v (unit average energy on [0, T]) and endpoints x0, xT,
the minimally novel input maximizes the averaged inner product with v among
unit-average-energy inputs that steer x0 to xT. With

    s   = int e^{A(T-t)} B v(t-T) dt      (where v alone would drive the state)
    r   = xT - e^{AT} x0                  (required displacement)
    es  = s' W^{-1} s,  er = r' W^{-1} r  (minimum energies for s and r)

a solution exists iff T > max(es, er), and then

    mu   = 1/2 sqrt((T - es) / (T - er))
    u(t) = (v(t-T) - w_s(t)) / (2 mu) + w_r(t),   w_z(t) = B' e^{A'(T-t)} W^{-1} z
    J    = s' W^{-1} r / T + (1 - es / T) / (2 mu).

Discretization
--------------
All of this is evaluated on the signal grid: inputs are piecewise linear,
energies and inner products are trapezoid sums, W is the matching sampled
Gramian and w_z is the matching adjoint (see ``lti.GridOperator``). The
returned input is then the exact optimum over grid signals, so the endpoint
and energy constraints hold to rounding error instead of O(h^2).

The computation runs in a real Schur basis of A with the unstable modes
ordered first. For strongly unstable networks W is graded (entries ~e^{2
lambda T} along growing modes, O(1) elsewhere); the triangular structure
keeps the small entries free of cancellation and Cholesky is accurate on
graded matrices, where working in the original basis loses ~cond(W) * eps
in the endpoint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import InfeasibleError, InvalidArgumentError
from .lti import Gramian, GridOperator, LtiSystem, expm, propagate
from .signals import Signal, avg_energy, euclid_novelty, normalize_energy, novelty

log = logging.getLogger(__name__)

UNIT_TOL = 1e-9
PRIOR_ENERGY_RTOL = 1e-3
EXIST_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class Problem:
    sys: LtiSystem
    T: float
    v: Signal
    x0: np.ndarray
    xT: np.ndarray

    def __post_init__(self):
        T = float(self.T)
        if not (np.isfinite(T) and T > 0):
            raise InvalidArgumentError(f"horizon T must be positive, got {self.T}")
        if self.v.m != self.sys.m:
            raise InvalidArgumentError(f"prior input has m={self.v.m}, system has m={self.sys.m}")
        if abs(self.v.T - T) > 1e-12 * T:
            raise InvalidArgumentError(f"prior input horizon {self.v.T} differs from T={T}")
        e = avg_energy(self.v)
        if abs(e - 1.0) > PRIOR_ENERGY_RTOL:
            raise InvalidArgumentError(
                f"prior input must have unit average energy, got {e!r}")
        if abs(e - 1.0) > UNIT_TOL:
            # typically trapezoid error of a nominally unit-energy prior;
            # the solution's energy residual carries it
            log.warning("prior input has average energy %.15g, not 1", e)
        ends = []
        for name in ("x0", "xT"):
            x = np.array(getattr(self, name), dtype=float).reshape(-1)
            if x.shape != (self.sys.n,) or not np.all(np.isfinite(x)):
                raise InvalidArgumentError(f"{name} must be a finite vector of length {self.sys.n}")
            if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
                log.warning("%s has norm %.12g; unit-norm endpoints are the usual convention",
                            name, np.linalg.norm(x))
            x.setflags(write=False)
            ends.append(x)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "x0", ends[0])
        object.__setattr__(self, "xT", ends[1])

    @property
    def N(self) -> int:
        return self.v.N


@dataclass(frozen=True, eq=False)
class Geometry:
    """Reachability quantities of a Problem.

    ``s`` and ``r`` are in the original state coordinates. ``gramian`` is the
    sampled Gramian expressed in the orthonormal Schur ``basis`` Q, i.e. the
    Gramian in original coordinates is ``Q @ gramian.W @ Q.T``; es and er
    are invariant under this change of basis.
    """

    s: np.ndarray
    r: np.ndarray
    gramian: Gramian
    basis: np.ndarray
    es: float
    er: float
    T: float
    _op: GridOperator = field(repr=False)
    _zs: np.ndarray = field(repr=False)
    _zr: np.ndarray = field(repr=False)

    @property
    def sr(self) -> float:
        """s' W^{-1} r."""
        return float(self.s @ (self.basis @ self._zr))

    def control(self, z) -> Signal:
        """Grid samples of B' e^{A'(T-t)} z for z given in Schur coordinates.

        The samples live in input space, so no change of basis is needed.
        """
        return Signal(self._op.adjoint(z), self.T)


@dataclass(frozen=True)
class ExistenceReport:
    feasible: bool
    T: float
    margin_s: float
    margin_r: float
    tol: float

    def __bool__(self):
        return self.feasible

    def as_dict(self) -> dict:
        return {"T_minus_es": self.margin_s, "T_minus_er": self.margin_r, "tol": self.tol}


@dataclass(frozen=True, eq=False)
class NoveltySolution:
    u: Signal
    mu: float
    J: float
    J1: float
    endpoint_residual: float
    energy_residual: float
    es: float
    er: float


@dataclass(frozen=True, eq=False)
class MinEnergySolution:
    u: Signal
    avg_energy: float
    er: float
    endpoint_residual: float


def _schur_system(sys: LtiSystem):
    At, Q, _ = sla.schur(sys.A, output="real", sort="rhp")
    return Q, LtiSystem(At, Q.T @ sys.B)


def geometry(p: Problem, refine: int = 1) -> Geometry:
    """Compute s, r, the sampled Gramian and the quadratic forms es, er.

    ``refine`` steps of iterative refinement are applied to W^{-1} s and
    W^{-1} r, with residuals evaluated through the grid operator itself.
    """
    Q, tsys = _schur_system(p.sys)
    op = GridOperator(tsys, p.T, p.N)
    G = op.gramian()
    s_t = op.forward(p.v.samples)
    r_t = Q.T @ p.xT - expm(tsys.A * p.T) @ (Q.T @ p.x0)
    zs, zr = G.solve(s_t), G.solve(r_t)
    for _ in range(refine):
        zs = zs + G.solve(s_t - op.forward(op.adjoint(zs)))
        zr = zr + G.solve(r_t - op.forward(op.adjoint(zr)))
    es = float(s_t @ zs)
    er = float(r_t @ zr)
    return Geometry(s=Q @ s_t, r=Q @ r_t, gramian=G, basis=Q, es=es, er=er, T=p.T,
                    _op=op, _zs=zs, _zr=zr)


def existence_check(g: Geometry, T: float | None = None) -> ExistenceReport:
    """Strict test T > max(es, er), with a relative margin of 1e-9 T.

    The other real-multiplier regime T < min(es, er) is not admitted: es and
    er are minimum energies, so a unit-average budget below them cannot
    reach either point.
    """
    T = g.T if T is None else float(T)
    tol = EXIST_RTOL * T
    ok = T > max(g.es, g.er) + tol
    return ExistenceReport(bool(ok), T, T - g.es, T - g.er, tol)


def _require_feasible(g: Geometry) -> ExistenceReport:
    rep = existence_check(g)
    if not rep:
        raise InfeasibleError(
            f"no unit-energy input reaches the target: T - es = {rep.margin_s:.6g}, "
            f"T - er = {rep.margin_r:.6g} (need both > {rep.tol:.3g})", rep)
    return rep


def _measure(p: Problem, u: Signal):
    resid = float(np.linalg.norm(propagate(p.sys, p.x0, u, p.T) - p.xT))
    return resid, abs(avg_energy(u) - 1.0)


def _ratio(g: Geometry) -> float:
    return float(np.sqrt((g.T - g.es) / (g.T - g.er)))


def solve_min_novelty(p: Problem, geom: Geometry | None = None) -> NoveltySolution:
    g = geometry(p) if geom is None else geom
    _require_feasible(g)
    mu = 0.5 * _ratio(g)
    ws = g._op.adjoint(g._zs)
    wr = g._op.adjoint(g._zr)
    u = Signal((p.v.samples - ws) / (2 * mu) + wr, p.T)
    J = g.sr / p.T + (1.0 - g.es / p.T) / (2 * mu)
    resid, eres = _measure(p, u)
    return NoveltySolution(u=u, mu=mu, J=J, J1=euclid_novelty(p.v, u),
                           endpoint_residual=resid, energy_residual=eres, es=g.es, er=g.er)


def solve_min_euclid(p: Problem, geom: Geometry | None = None) -> NoveltySolution:
    """Minimize (1/T) int ||v(t-T) - u(t)||^2 at unit average energy.

    Uses the multiplier of the squared-distance cost, mu_e = -1 + sqrt(...);
    the resulting input coincides with ``solve_min_novelty``.
    """
    g = geometry(p) if geom is None else geom
    _require_feasible(g)
    mu_e = -1.0 + _ratio(g)
    k = 1.0 / (1.0 + mu_e)
    ws = g._op.adjoint(g._zs)
    wr = g._op.adjoint(g._zr)
    u = Signal(k * (p.v.samples - ws) + wr, p.T)
    J1 = 2.0 * (1.0 - g.sr / p.T) + 2.0 * k * (g.es / p.T - 1.0)
    resid, eres = _measure(p, u)
    return NoveltySolution(u=u, mu=mu_e, J=novelty(p.v, u), J1=J1,
                           endpoint_residual=resid, energy_residual=eres, es=g.es, er=g.er)


def solve_min_energy(p: Problem, geom: Geometry | None = None) -> MinEnergySolution:
    """Classical minimum-energy input B' e^{A'(T-t)} W^{-1} r.

    Its total energy is er, so the average energy is er / T.
    """
    g = geometry(p) if geom is None else geom
    u = g.control(g._zr)
    resid = float(np.linalg.norm(propagate(p.sys, p.x0, u, p.T) - p.xT))
    return MinEnergySolution(u=u, avg_energy=avg_energy(u), er=g.er, endpoint_residual=resid)


def novelty_of(p: Problem, u: Signal, normalize: bool = True) -> float:
    """Novelty of an arbitrary candidate input relative to the prior.

    With ``normalize`` the candidate is first scaled to unit average energy,
    so the result is an angle-like score in [-1, 1].
    """
    if normalize:
        u = normalize_energy(u)
    return novelty(p.v, u)
