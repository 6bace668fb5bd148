"""Seeded recurrent firing-rate networks and the min-novelty vs min-energy ensemble.

Linearized rate dynamics ``S dx/dt = -x + W x + B u`` become the LTI system
``A = S^{-1}(-I + W)``. Every ``inhibitory_period``-th neuron (1-based) is
inhibitory and its row of W is drawn from ``w_inh_range``; the others from
``w_exc_range``. Time constants are in ms, so A is in 1/ms.

Random streams
--------------
NumPy's PCG64 generator. Realization k of an ensemble uses the seed
``base_seed ^ k`` and draws, in this order: time constants (n), weights
(n x n, row-major), x0 (n normals), the orthogonal direction (n normals,
redrawn on degeneracy), then the prior direction (m uniforms) unless the
prior is fixed, in which case it is drawn once from the separate stream
``PCG64([base_seed, 1])``.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields, replace

import numpy as np

from .errors import InfeasibleError, InvalidArgumentError, UncontrollableError
from .lti import LtiSystem
from .signals import Signal
from .solver import Problem, existence_check, geometry, novelty_of, solve_min_energy, solve_min_novelty

MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class NetworkSpec:
    n: int = 100
    inhibitory_period: int = 5
    tau_range: tuple = (5.0, 10.0)
    w_exc_range: tuple = (0.0, 1.0)
    w_inh_range: tuple = (-1.0, 0.0)
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError(f"need n >= 2 neurons, got {self.n}")
        if self.inhibitory_period < 2:
            raise InvalidArgumentError("inhibitory_period must be >= 2")
        lo, hi = self.tau_range
        if not (0 < lo <= hi):
            raise InvalidArgumentError(f"bad tau_range {self.tau_range}")
        for name in ("w_exc_range", "w_inh_range"):
            a, b = getattr(self, name)
            if a > b:
                raise InvalidArgumentError(f"bad {name} {(a, b)}")

    @property
    def inhibitory(self) -> np.ndarray:
        """Boolean mask of inhibitory neurons."""
        return (np.arange(1, self.n + 1) % self.inhibitory_period) == 0


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


def network_matrices(spec: NetworkSpec, rng: np.random.Generator | None = None):
    """Draw (S diagonal, W) for ``spec``; W[i, j] is the weight from neuron i to j."""
    rng = rng_for(spec.seed) if rng is None else rng
    n = spec.n
    tau = rng.uniform(*spec.tau_range, size=n)
    W = np.empty((n, n))
    inh = spec.inhibitory
    raw = rng.random((n, n))
    lo_e, hi_e = spec.w_exc_range
    lo_i, hi_i = spec.w_inh_range
    W[~inh] = lo_e + (hi_e - lo_e) * raw[~inh]
    W[inh] = lo_i + (hi_i - lo_i) * raw[inh]
    np.fill_diagonal(W, 0.0)
    return np.diag(tau), W


def build_network(spec: NetworkSpec, rng: np.random.Generator | None = None) -> LtiSystem:
    S, W = network_matrices(spec, rng)
    tau = np.diag(S)
    A = (W - np.eye(spec.n)) / tau[:, None]
    return LtiSystem(A, np.eye(spec.n))


def sample_endpoints(n: int, gamma: float, rng: np.random.Generator):
    """Unit vectors x0, xT with x0 . xT = gamma; x0 uniform on the sphere."""
    if not abs(gamma) < 1:
        raise InvalidArgumentError(f"need |gamma| < 1, got {gamma}")
    x0 = rng.standard_normal(n)
    x0 /= np.linalg.norm(x0)
    while True:
        w = rng.standard_normal(n)
        w -= (w @ x0) * x0
        nw = np.linalg.norm(w)
        if nw > 1e-8:
            break
    w /= nw
    xT = gamma * x0 + np.sqrt(1.0 - gamma * gamma) * w
    return x0, xT


def constant_prior(m: int, T: float, N: int, rng: np.random.Generator) -> Signal:
    """Constant prior with a nonnegative unit-norm direction."""
    if m < 1:
        raise InvalidArgumentError("m must be >= 1")
    c = rng.random(m)
    c /= np.linalg.norm(c)
    return Signal.constant(c, T, N)


@dataclass(frozen=True)
class EnsembleRecord:
    idx: int
    seed: int
    J_nov: float
    J_me_norm: float
    J_me_raw: float
    mu: float
    es: float
    er: float
    endpoint_resid: float
    energy_resid: float
    feasible: bool


CSV_HEADER = [f.name for f in fields(EnsembleRecord)]


def run_realization(spec: NetworkSpec, T: float, gamma: float, N: int, idx: int,
                    base_seed: int, fixed_prior: Signal | None = None) -> EnsembleRecord:
    seed = (int(base_seed) ^ int(idx)) & MASK64
    rng = rng_for(seed)
    sys = build_network(replace(spec, seed=seed), rng)
    x0, xT = sample_endpoints(spec.n, gamma, rng)
    v = fixed_prior if fixed_prior is not None else constant_prior(sys.m, T, N, rng)
    p = Problem(sys, T, v, x0, xT)
    nan = float("nan")
    try:
        g = geometry(p)
    except UncontrollableError:
        return EnsembleRecord(idx, seed, nan, nan, nan, nan, nan, nan, nan, nan, False)
    me = solve_min_energy(p, g)
    J_me_raw = novelty_of(p, me.u, normalize=False)
    try:
        J_me_norm = novelty_of(p, me.u, normalize=True)
    except ValueError:
        J_me_norm = nan
    if not existence_check(g):
        return EnsembleRecord(idx, seed, nan, J_me_norm, J_me_raw, nan, g.es, g.er,
                              nan, nan, False)
    try:
        sol = solve_min_novelty(p, g)
    except InfeasibleError:
        return EnsembleRecord(idx, seed, nan, J_me_norm, J_me_raw, nan, g.es, g.er,
                              nan, nan, False)
    return EnsembleRecord(idx, seed, sol.J, J_me_norm, J_me_raw, sol.mu, sol.es, sol.er,
                          sol.endpoint_residual, sol.energy_residual, True)


def _run_one(args):
    return run_realization(*args)


def run_ensemble(spec: NetworkSpec = NetworkSpec(), T: float = 3.0, gamma: float = 0.7645,
                 realizations: int = 1000, N: int = 1000, base_seed: int = 0,
                 fixed_prior: bool = False, workers: int = 1) -> list[EnsembleRecord]:
    """Solve min-novelty and min-energy on independently drawn networks.

    Infeasible realizations are kept with ``feasible=False``. Output order is
    by realization index regardless of ``workers``.
    """
    if realizations < 1:
        raise InvalidArgumentError("realizations must be >= 1")
    prior = None
    if fixed_prior:
        prior_rng = np.random.Generator(np.random.PCG64([int(base_seed) & MASK64, 1]))
        prior = constant_prior(spec.n, T, N, prior_rng)
    jobs = [(spec, T, gamma, N, k, base_seed, prior) for k in range(realizations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs, chunksize=max(1, realizations // (4 * workers))))
    return [_run_one(j) for j in jobs]


def _fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow([_fmt(x) for x in astuple(rec)])
    return buf.getvalue()


def write_records_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def read_records_csv(path) -> list[EnsembleRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(EnsembleRecord(
                idx=int(row["idx"]), seed=int(row["seed"]),
                **{k: float(row[k]) for k in CSV_HEADER[2:-1]},
                feasible=row["feasible"] == "1"))
    return out


def summarize(records, normalized: bool = True, tol: float = 1e-9) -> dict:
    """Counts and ranges of the two novelty columns over feasible records."""
    feas = [r for r in records if r.feasible]
    jn = np.array([r.J_nov for r in feas])
    jm = np.array([r.J_me_norm if normalized else r.J_me_raw for r in feas])
    out = {"realizations": len(records), "feasible": len(feas),
           "baseline": "normalized" if normalized else "raw"}
    if feas:
        out.update({
            "J_nov": {"min": float(jn.min()), "mean": float(jn.mean()), "max": float(jn.max())},
            "J_me": {"min": float(np.nanmin(jm)), "mean": float(np.nanmean(jm)),
                     "max": float(np.nanmax(jm))},
            "frac_nov_ge_me": float(np.mean(jn >= jm - tol)),
            "max_endpoint_resid": float(max(r.endpoint_resid for r in feas)),
        })
    return out
