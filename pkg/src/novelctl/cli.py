"""Command-line front end.

    novelctl solve      --config cfg.yaml [--out DIR] [--grid N] [--seed S]
    novelctl min-energy --config cfg.yaml
    novelctl gramian    --config cfg.yaml
    novelctl simulate   --config cfg.yaml
    novelctl ensemble   [--config cfg.yaml] [--realizations K] [--seed S] [--fixed-prior]

Exit codes: 0 success, 1 usage or input error, 2 mathematical infeasibility
(existence test failed, or Gramian not positive definite).

Config files are YAML (JSON is accepted as well). Relative file paths inside
a config resolve against the config file's directory. Keys:

    system:    {A: <csv path | nested list>, B: <csv path | nested list>}
    network:   {n, inhibitory_period, tau_range, w_exc_range, w_inh_range, seed}
    T:         horizon
    grid:      number of intervals N (default 1000)
    prior:     {file: <signal csv>} | {constant: [..]} | {random_constant: true}
               optional normalize: true rescales to unit average energy
    endpoints: {x0: <vector | csv>, xT: <vector | csv>} | {gamma: g}
    input:     same forms as prior (simulate only)
    s, r:      vectors whose energies s' W^-1 s, r' W^-1 r the gramian command reports
    gramian:   {method: vanloan | simpson, panels: 1000}
    ensemble:  {realizations, gamma, fixed_prior, workers}
    out:       output directory (default "out")
    seed:      integer seed for random draws
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import yaml

from . import lti, netgen
from .errors import InfeasibleError, InvalidArgumentError, NoveltyError, UncontrollableError
from .io import read_matrix_csv, write_matrix_csv, write_report, write_trajectory_csv
from .signals import DEFAULT_GRID, Signal, normalize_energy, read_signal_csv, write_signal_csv
from .solver import (Problem, existence_check, geometry, novelty_of, solve_min_energy,
                     solve_min_novelty)

log = logging.getLogger("novelctl")

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2


class ConfigError(InvalidArgumentError):
    pass


class RunConfig:
    """Parsed config plus command-line overrides."""

    def __init__(self, data: dict, base: Path, args):
        self.data = data or {}
        self.base = base
        self.args = args

    def get(self, key, default=None):
        return self.data.get(key, default)

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    @property
    def seed(self) -> int:
        s = getattr(self.args, "seed", None)
        return int(self.get("seed", 0) if s is None else s)

    @property
    def out(self) -> Path:
        d = getattr(self.args, "out", None) or self.get("out", "out")
        d = Path(d) if getattr(self.args, "out", None) else self.path(d)
        d.mkdir(parents=True, exist_ok=True)
        return d

    @property
    def T(self) -> float:
        if "T" not in self.data:
            raise ConfigError("config is missing the horizon T")
        try:
            return float(self.data["T"])
        except (TypeError, ValueError):
            raise ConfigError(f"T must be a number, got {self.data['T']!r}")

    @property
    def grid(self) -> int:
        g = getattr(self.args, "grid", None)
        return int(self.get("grid", DEFAULT_GRID) if g is None else g)

    def matrix(self, spec, name):
        if isinstance(spec, (str, Path)):
            return read_matrix_csv(self.path(spec))
        try:
            M = np.array(spec, dtype=float)
        except (TypeError, ValueError):
            raise ConfigError(f"{name}: expected a CSV path or a numeric array")
        return M

    def vector(self, spec, name):
        return self.matrix(spec, name).reshape(-1)

    def network_spec(self) -> netgen.NetworkSpec:
        net = dict(self.get("network") or {})
        for key in ("tau_range", "w_exc_range", "w_inh_range"):
            if key in net:
                net[key] = tuple(float(x) for x in net[key])
        net.setdefault("seed", self.seed)
        try:
            return netgen.NetworkSpec(**net)
        except TypeError as exc:
            raise ConfigError(f"network: {exc}")

    def system(self) -> lti.LtiSystem:
        has_sys, has_net = "system" in self.data, "network" in self.data
        if has_sys == has_net:
            raise ConfigError("specify exactly one of 'system' or 'network'")
        if has_net:
            return netgen.build_network(self.network_spec())
        s = self.data["system"] or {}
        if "A" not in s or "B" not in s:
            raise ConfigError("system needs both A and B")
        return lti.LtiSystem(self.matrix(s["A"], "A"), self.matrix(s["B"], "B"))

    def signal(self, key, m, T):
        spec = self.get(key)
        if not isinstance(spec, dict):
            raise ConfigError(f"config is missing '{key}'")
        sources = [k for k in ("file", "constant", "random_constant") if k in spec]
        if len(sources) != 1:
            raise ConfigError(f"{key}: specify exactly one of file, constant, random_constant")
        if "file" in spec:
            sig = read_signal_csv(self.path(spec["file"]))
            if abs(sig.T - T) > 1e-9 * T:
                raise ConfigError(f"{key}: file horizon {sig.T} differs from T={T}")
            g = getattr(self.args, "grid", None)
            if g is not None and int(g) != sig.N:
                raise ConfigError(f"{key}: file has N={sig.N}, --grid asks for {g}")
            sig = Signal(sig.samples, T)
        elif "constant" in spec:
            sig = Signal.constant(self.vector(spec["constant"], key), T, self.grid)
        else:
            sig = netgen.constant_prior(m, T, self.grid, netgen.rng_for(self.seed))
        if sig.m != m:
            raise ConfigError(f"{key}: has {sig.m} components, system has m={m}")
        if spec.get("normalize", False):
            sig = normalize_energy(sig)
        return sig

    def endpoints(self, n):
        ep = self.get("endpoints")
        if not isinstance(ep, dict):
            raise ConfigError("config is missing 'endpoints'")
        explicit = "x0" in ep or "xT" in ep
        if explicit == ("gamma" in ep):
            raise ConfigError("endpoints: give either x0/xT or gamma, not both or neither")
        if "gamma" in ep:
            rng = netgen.rng_for(self.seed ^ 0x5EED)
            return netgen.sample_endpoints(n, float(ep["gamma"]), rng)
        if "x0" not in ep or "xT" not in ep:
            raise ConfigError("endpoints: need both x0 and xT")
        return self.vector(ep["x0"], "x0"), self.vector(ep["xT"], "xT")

    def problem(self, prior_required=True) -> Problem:
        sys_ = self.system()
        T = self.T
        if prior_required or "prior" in self.data:
            v = self.signal("prior", sys_.m, T)
        else:
            v = Signal.constant(np.eye(sys_.m)[0], T, self.grid)
        x0, xT = self.endpoints(sys_.n)
        return Problem(sys_, T, v, x0, xT)


def load_config(args) -> RunConfig:
    if args.config is None:
        return RunConfig({}, Path.cwd(), args)
    path = Path(args.config)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}")
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return RunConfig(data, path.parent, args)


# ---------------------------------------------------------------------------

def _blank_report(p, g):
    rep = existence_check(g)
    return {"T": p.T, "N": p.N, "es": g.es, "er": g.er, "margins": rep.as_dict(),
            "feasible": rep.feasible, "J": None, "J1": None, "mu": None,
            "endpoint_resid": None, "energy_resid": None}


def cmd_solve(cfg: RunConfig) -> int:
    p = cfg.problem()
    g = geometry(p)
    report = _blank_report(p, g)
    out = cfg.out
    try:
        sol = solve_min_novelty(p, g)
    except InfeasibleError as exc:
        write_report(out / "report.json", report)
        print(f"infeasible: {exc}", file=sys.stderr)
        print(json.dumps(exc.report.as_dict()))
        return EXIT_INFEASIBLE
    report.update(J=sol.J, J1=sol.J1, mu=sol.mu, endpoint_resid=sol.endpoint_residual,
                  energy_resid=sol.energy_residual)
    write_signal_csv(out / "solution.csv", sol.u)
    write_report(out / "report.json", report)
    print(f"J = {sol.J:.12g}  J1 = {sol.J1:.12g}  mu = {sol.mu:.12g}  "
          f"endpoint_resid = {sol.endpoint_residual:.3e}  energy_resid = {sol.energy_residual:.3e}")
    return EXIT_OK


def cmd_min_energy(cfg: RunConfig) -> int:
    p = cfg.problem(prior_required=False)
    g = geometry(p)
    me = solve_min_energy(p, g)
    report = {"T": p.T, "N": p.N, "er": g.er, "avg_energy": me.avg_energy,
              "endpoint_resid": me.endpoint_residual, "feasible": True}
    if "prior" in cfg.data:
        report["J_me_raw"] = novelty_of(p, me.u, normalize=False)
        report["J_me_norm"] = (novelty_of(p, me.u, normalize=True)
                               if me.avg_energy > 0 else None)
        report["es"] = g.es
    out = cfg.out
    write_signal_csv(out / "min_energy.csv", me.u)
    write_report(out / "report.json", report)
    print(f"er = {g.er:.12g}  avg_energy = {me.avg_energy:.12g}  "
          f"endpoint_resid = {me.endpoint_residual:.3e}")
    return EXIT_OK


def cmd_gramian(cfg: RunConfig) -> int:
    sys_ = cfg.system()
    opts = cfg.get("gramian") or {}
    G = lti.gramian(sys_, cfg.T, method=opts.get("method", "vanloan"),
                    panels=int(opts.get("panels", 1000)))
    report = {"T": G.T, "method": opts.get("method", "vanloan"), "rcond": G.rcond,
              "rcond_scaled": G.rcond_scaled}
    for key, label in (("s", "es"), ("r", "er")):
        if key in cfg.data:
            b = cfg.vector(cfg.data[key], key)
            if b.shape != (sys_.n,):
                raise ConfigError(f"{key} must have length n={sys_.n}")
            report[label] = float(b @ G.solve(b))
    out = cfg.out
    write_matrix_csv(out / "gramian.csv", G.W)
    write_report(out / "gramian.json", report)
    print(f"rcond = {G.rcond:.3e}" + "".join(
        f"  {k} = {report[k]:.12g}" for k in ("es", "er") if k in report))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    sys_ = cfg.system()
    T = cfg.T
    u = cfg.signal("input", sys_.m, T)
    ep = cfg.get("endpoints") or {}
    x0 = cfg.get("x0", ep.get("x0"))
    if x0 is None:
        raise ConfigError("simulate needs x0 (top level or under endpoints)")
    X = lti.simulate(sys_, cfg.vector(x0, "x0"), u)
    write_trajectory_csv(cfg.out / "trajectory.csv", u.t, X)
    print("x(T) = " + " ".join(f"{x:.12g}" for x in X[:, -1]))
    return EXIT_OK


def cmd_ensemble(cfg: RunConfig) -> int:
    args = cfg.args
    ens = cfg.get("ensemble") or {}
    spec = cfg.network_spec()
    k = args.realizations if args.realizations is not None else int(ens.get("realizations", 1000))
    fixed = bool(args.fixed_prior or ens.get("fixed_prior", False))
    workers = args.workers if args.workers is not None else int(ens.get("workers", 1))
    records = netgen.run_ensemble(
        spec, T=float(cfg.get("T", 3.0)), gamma=float(ens.get("gamma", 0.7645)),
        realizations=k, N=cfg.grid, base_seed=cfg.seed, fixed_prior=fixed, workers=workers)
    out = cfg.out
    netgen.write_records_csv(out / "ensemble.csv", records)
    summary = netgen.summarize(records, normalized=not args.no_normalize_baseline)
    write_report(out / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "min-energy": cmd_min_energy, "gramian": cmd_gramian,
            "simulate": cmd_simulate, "ensemble": cmd_ensemble}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="novelctl", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "ensemble")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid", type=int)
        sp.add_argument("--out")
        if name == "ensemble":
            sp.add_argument("--realizations", type=int)
            sp.add_argument("--fixed-prior", action="store_true")
            sp.add_argument("--no-normalize-baseline", action="store_true")
            sp.add_argument("--workers", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        return COMMANDS[args.command](cfg)
    except (InfeasibleError, UncontrollableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NoveltyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
