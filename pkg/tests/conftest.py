import numpy as np
import pytest

from novelctl import LtiSystem, Problem, Signal, UncontrollableError, normalize_energy
from novelctl.solver import existence_check, geometry

SQ3 = np.sqrt(3.0)


def random_stable(rng, n, m, norm=2.0):
    """Random A with spectral abscissa < 0 and ||A||_1 <= norm."""
    G = rng.standard_normal((n, n))
    A = G - (np.max(np.linalg.eigvals(G).real) + rng.uniform(0.1, 1.0)) * np.eye(n)
    A *= min(1.0, norm / np.linalg.norm(A, 1))
    B = rng.standard_normal((n, m))
    return LtiSystem(A, B)


def unit(rng, n):
    x = rng.standard_normal(n)
    return x / np.linalg.norm(x)


def smooth_prior(rng, m, T, N):
    """Random sum of low-frequency sinusoids, unit average energy."""
    coef = rng.standard_normal((m, 4))
    phase = rng.uniform(0, 2 * np.pi, (m, 4))
    k = np.arange(1, 5)

    def f(t):
        return np.sum(coef * np.sin(2 * np.pi * k * t / T + phase), axis=1)

    return normalize_energy(Signal.from_function(f, T, N))


def random_feasible_problem(rng, n, m=None, N=1000, T=None):
    m = n if m is None else m
    for _ in range(200):
        sys = random_stable(rng, n, m)
        sys = LtiSystem(sys.A, 2.0 * sys.B)
        TT = rng.uniform(1.0, 3.0) if T is None else T
        p = Problem(sys, TT, smooth_prior(rng, m, TT, N), unit(rng, n), unit(rng, n))
        try:
            g = geometry(p)
        except UncontrollableError:
            continue
        if existence_check(g) and max(g.es, g.er) < 0.95 * TT:
            return p, g
    raise RuntimeError(f"no feasible well-conditioned draw for n={n}, m={m}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def integrator():
    return LtiSystem([[0.0]], [[1.0]])


@pytest.fixture
def scalar_problem(integrator):
    """A=0, B=1, T=2, v = (sqrt(3)/2) t, x0 = xT = 1."""
    v = Signal.from_function(lambda t: SQ3 / 2 * t, 2.0, 1000)
    return Problem(integrator, 2.0, v, [1.0], [1.0])


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
