"""Command-line entry point: every capability behind one executable.

Subcommands: simulate (N-particle ensembles), boltzmann (mean-field sampler
and grid solver), hierarchy (constants, horizons, coefficient sweeps), chaos
(size-sweep convergence report), laws-check (energy/involution/symmetry
validation of the collision laws).  Runs are described by a JSON config file
plus dotted overrides; every subcommand is deterministic given the config
and seed, writes a manifest before any result file, and uses the exit-code
convention 0 = success, 1 = acceptance-threshold failure, 2 = configuration
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import __version__
from .chaos import run_chaos_sweep
from .config import ConfigError, RunConfig, load_config, parse_config
from .hierarchy import coeff_leading, hierarchy_constants
from .laws import (
    BinaryMaxwell,
    CollisionLaw,
    KacToy,
    SymmetricK,
    SymmetricKMomentum,
    check_h2_involution,
    check_h3_symmetry,
    h1_max_error,
)
from .meanfield import meanfield_run
from .picard import (
    gaussian_grid_density,
    picard_solve_toy,
    uniform_grid_density,
)
from .runio import (
    chaos_summary,
    run_result_header,
    run_result_rows,
    write_chaos_csv,
    write_csv,
    write_density_csv,
    write_hierarchy_constants_csv,
    write_hierarchy_horizon_csv,
    write_hierarchy_sweep_csv,
    write_json,
    write_manifest,
)
from .simulator import (
    GaussianInitial,
    MomentObserver,
    ObservableObserver,
    SimConfig,
    UniformBoxInitial,
    replica_rng,
    run,
)

H1_TOLERANCE = 1e-10

BUILTIN_LAWS: Tuple[CollisionLaw, ...] = (
    BinaryMaxwell(d=1),
    BinaryMaxwell(d=3),
    KacToy(kernel="uniform"),
    KacToy(kernel="raised_cosine"),
    SymmetricK(k=1, d=1),
    SymmetricK(k=2, d=1),
    SymmetricK(k=3, d=3),
    SymmetricKMomentum(k=2, d=3),
    SymmetricKMomentum(k=3, d=1),
)


def _resolve_workers(flag: Optional[int]) -> int:
    if flag is None:
        env = os.environ.get("KAC_WORKERS")
        if env is not None:
            try:
                flag = int(env)
            except ValueError:
                raise ConfigError(f"KAC_WORKERS must be an integer, got {env!r}") from None
        else:
            flag = os.cpu_count() or 1
    if flag < 1:
        raise ConfigError(f"workers must be >= 1, got {flag}")
    return flag


def _load(args) -> RunConfig:
    overrides: List[str] = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.output_dir is not None:
        overrides.append(f"output_dir={json.dumps(args.output_dir)}")
    if args.config is None:
        return parse_config("{}", overrides)
    return load_config(args.config, overrides)


def _out_dir(cfg: RunConfig) -> Path:
    path = Path(cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(cfg: RunConfig, workers: int) -> int:
    mixture = cfg.require("mixture")
    sim = cfg.require("sim")
    initial = cfg.initial if cfg.initial is not None else GaussianInitial()
    observers = [MomentObserver(sim.times)]
    if cfg.observables:
        observers.append(ObservableObserver(sim.times, cfg.observables, mode=sim.estimator))
    config = SimConfig(
        N=sim.N,
        mixture=mixture,
        t_end=sim.t_end,
        seed=cfg.seed,
        replicas=sim.replicas,
        initial=initial,
    )
    result = run(config, observers, workers=workers)
    rows = list(run_result_rows(result))
    out = _out_dir(cfg)
    write_manifest(
        out / "manifest.json",
        command="simulate",
        version=__version__,
        seed=cfg.seed,
        config=cfg.raw,
        row_counts={"simulate.csv": len(rows)},
    )
    write_csv(out / "simulate.csv", run_result_header(), rows)
    return 0


def _pure_toy_kernel(cfg: RunConfig) -> str:
    """The toy grid solver covers exactly the single-law order-2 toy mixture."""
    mixture = cfg.require("mixture")
    for i, (law, beta) in enumerate(zip(mixture.laws, mixture.beta)):
        if isinstance(law, KacToy) and beta == 1.0:
            return law.kernel
        if beta != 0.0:
            break
    raise ConfigError(
        "picard solver requires a mixture with all weight on one toy rotation law"
    )


def _picard_initial(cfg: RunConfig, grid) -> "object":
    initial = cfg.initial if cfg.initial is not None else GaussianInitial()
    if isinstance(initial, GaussianInitial):
        return gaussian_grid_density(L=grid.L, n_v=grid.n_v)
    if isinstance(initial, UniformBoxInitial):
        return uniform_grid_density(initial.a, L=grid.L, n_v=grid.n_v)
    raise ConfigError(
        "picard solver supports gaussian or uniform initial data, "
        f"got {getattr(initial, 'tag', type(initial).__name__)!r}"
    )


def cmd_boltzmann(cfg: RunConfig, workers: int) -> int:
    mixture = cfg.require("mixture")
    mf = cfg.require("meanfield")
    initial = cfg.initial if cfg.initial is not None else GaussianInitial()
    rows: List[tuple] = []
    density = None

    if mf.solver in ("meanfield", "both"):
        result = meanfield_run(
            mixture,
            initial,
            n=mf.n,
            t_end=mf.t_end,
            seed=cfg.seed,
            replicas=mf.replicas,
            observers=[MomentObserver(mf.times)],
            workers=workers,
        )
        rows.extend(run_result_rows(result, include_solver=True))

    if mf.solver in ("picard", "both"):
        kernel = _pure_toy_kernel(cfg)
        f = _picard_initial(cfg, mf.grid)
        # The fixed-point sweep only contracts on a short horizon, so longer
        # requests are integrated as repeated short solves, each restarting
        # from the previous density.
        guard = 0.125
        remaining = float(mf.t_end)
        while remaining > 0.0:
            dt = min(remaining, 0.8 * guard)
            res = picard_solve_toy(
                kernel,
                f,
                t_end=dt,
                n_iter=mf.grid.n_iter,
                n_theta=mf.grid.n_theta,
                n_time=mf.grid.n_time,
                t_guard=guard,
            )
            f = res.density
            remaining -= dt
        density = f
        for name, value in (
            ("mass", density.mass()),
            ("m2", density.moment(2)),
            ("m4", density.moment(4)),
        ):
            rows.append((mf.t_end, name, value, 0.0, mf.grid.n_v, 1, cfg.seed, "picard"))

    out = _out_dir(cfg)
    counts = {"boltzmann.csv": len(rows)}
    if density is not None:
        counts["boltzmann_density.csv"] = density.n_v
    write_manifest(
        out / "manifest.json",
        command="boltzmann",
        version=__version__,
        seed=cfg.seed,
        config=cfg.raw,
        row_counts=counts,
    )
    write_csv(out / "boltzmann.csv", run_result_header(include_solver=True), rows)
    if density is not None:
        write_density_csv(out / "boltzmann_density.csv", density)
    return 0


def cmd_hierarchy(cfg: RunConfig, workers: int) -> int:
    mixture = cfg.require("mixture")
    hier = cfg.require("hierarchy")
    hc = hierarchy_constants(
        M=mixture.m, betas=mixture.beta, epsilon=hier.epsilon, T=hier.T
    )
    k_list = hier.k_list if hier.k_list is not None else tuple(range(mixture.m))
    sweep = [
        (n, s, k, coeff_leading(n, s, k), abs(coeff_leading(n, s, k) - 1.0))
        for n in hier.N_grid
        for s in hier.s_list
        for k in k_list
        if s <= n
    ]
    out = _out_dir(cfg)
    write_manifest(
        out / "manifest.json",
        command="hierarchy",
        version=__version__,
        seed=cfg.seed,
        config=cfg.raw,
        row_counts={
            "hierarchy_constants.csv": hc.M,
            "hierarchy_horizon.csv": 1,
            "hierarchy_sweep.csv": len(sweep),
        },
    )
    write_hierarchy_constants_csv(out / "hierarchy_constants.csv", hc)
    write_hierarchy_horizon_csv(out / "hierarchy_horizon.csv", hc)
    write_hierarchy_sweep_csv(out / "hierarchy_sweep.csv", sweep)
    return 0


def cmd_chaos(cfg: RunConfig, workers: int) -> int:
    mixture = cfg.require("mixture")
    chaos = cfg.require("chaos")
    initial = cfg.initial if cfg.initial is not None else GaussianInitial()
    report = run_chaos_sweep(
        mixture,
        initial,
        N_grid=chaos.N_grid,
        s_list=chaos.s_list,
        t_list=chaos.t_list,
        factors=chaos.factors,
        budget=chaos.budget,
        seed=cfg.seed,
        workers=workers,
        mode=chaos.estimator,
    )
    out = _out_dir(cfg)
    write_manifest(
        out / "manifest.json",
        command="chaos",
        version=__version__,
        seed=cfg.seed,
        config=cfg.raw,
        row_counts={"chaos.csv": len(report.rows), "chaos_summary.json": 1},
    )
    write_chaos_csv(out / "chaos.csv", report)
    write_json(out / "chaos_summary.json", chaos_summary(report))
    if report.pass_fraction < chaos.pass_threshold:
        print(
            f"chaos: pass fraction {report.pass_fraction:.4f} below threshold "
            f"{chaos.pass_threshold}",
            file=sys.stderr,
        )
        return 1
    return 0


def laws_check_rows(laws: Sequence[CollisionLaw], seed: int, n_samples: int = 10**5):
    """H1/H2/H3 validation rows: (law, test, value, stderr, n_samples, result)."""
    rows = []
    for i, law in enumerate(laws):
        rng = replica_rng(seed, 3 * i)
        err = h1_max_error(law, n_samples=10**4, rng=rng)
        rows.append(
            (law.describe, "H1", err, 0.0, 10**4, "PASS" if err <= H1_TOLERANCE else "FAIL")
        )
        rep2 = check_h2_involution(law, n_samples=n_samples, rng=replica_rng(seed, 3 * i + 1))
        rows.append(
            (
                law.tag,
                "H2",
                rep2.difference,
                rep2.combined_stderr,
                rep2.n_samples,
                "PASS" if rep2.passed else "FAIL",
            )
        )
        rep3 = check_h3_symmetry(law, n_samples=n_samples, rng=replica_rng(seed, 3 * i + 2))
        rows.append(
            (
                law.tag,
                "H3",
                rep3.difference,
                rep3.combined_stderr,
                rep3.n_samples,
                "PASS" if rep3.passed else "FAIL",
            )
        )
    return rows


def cmd_laws_check(cfg: RunConfig, workers: int) -> int:
    laws = cfg.mixture.laws if cfg.mixture is not None else BUILTIN_LAWS
    rows = laws_check_rows(laws, seed=cfg.seed)
    out = _out_dir(cfg)
    write_manifest(
        out / "manifest.json",
        command="laws-check",
        version=__version__,
        seed=cfg.seed,
        config=cfg.raw,
        row_counts={"laws_check.csv": len(rows)},
    )
    write_csv(
        out / "laws_check.csv",
        ["law", "test", "value", "stderr", "n_samples", "result"],
        rows,
    )
    failures = [r for r in rows if r[5] == "FAIL"]
    for law_tag, test, value, stderr, _, _ in failures:
        print(
            f"laws-check: {law_tag} {test} failed (value {value:.3e}, stderr {stderr:.3e})",
            file=sys.stderr,
        )
    return 1 if failures else 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "boltzmann": cmd_boltzmann,
    "hierarchy": cmd_hierarchy,
    "chaos": cmd_chaos,
    "laws-check": cmd_laws_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kacmix",
        description="Simulation and verification toolkit for multi-particle collision processes.",
    )
    parser.add_argument("--version", action="version", version=f"kacmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run N-particle collision ensembles"),
        ("boltzmann", "run the mean-field sampler and/or the toy grid solver"),
        ("hierarchy", "emit marginal-hierarchy constants, horizons, and coefficient sweeps"),
        ("chaos", "sweep system sizes against the mean-field reference"),
        ("laws-check", "validate collision laws (energy, involution, slot symmetry)"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON run configuration file")
        p.add_argument(
            "--set",
            action="append",
            metavar="KEY=VALUE",
            help="dotted config override, e.g. --set sim.N=200 (repeatable)",
        )
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--workers", type=int, help="worker processes (default: KAC_WORKERS or CPU count)")
        p.add_argument("--output-dir", help="override the config output directory")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        workers = _resolve_workers(args.workers)
        cfg = _load(args)
        return _COMMANDS[args.command](cfg, workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
