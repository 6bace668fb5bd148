"""Minimally novel control of linear time-invariant systems."""
from .errors import (DegenerateInputError, InfeasibleError, InvalidArgumentError, NoveltyError,
                     UncontrollableError)
from .lti import GridOperator, Gramian, LtiSystem, expm, gramian, propagate, simulate, solve_spd
from .netgen import NetworkSpec, build_network, run_ensemble, sample_endpoints, constant_prior
from .signals import Signal, avg_energy, euclid_novelty, normalize_energy, novelty
from .solver import (Problem, existence_check, geometry, novelty_of, solve_min_energy,
                     solve_min_euclid, solve_min_novelty)

__version__ = "0.1.0"
