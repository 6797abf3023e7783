"""Command line front-end.

Subcommands:

* ``run``           -- integrate a single trajectory, print diagnostics and
                       optionally dump the final field (binary field format).
* ``converge``      -- full coupled-path ladder study, CSV + metadata sidecar.
* ``identity-test`` -- Monte Carlo check of the iterated-integral closed form.
* ``count``         -- random-variable accounting table for a ladder.

Every subcommand reads the flat ``key = value`` experiment file given with
--config; --seed, --out and --threads override the file.
"""

import argparse
import json
import sys

from . import __version__
from .backend import resolve_backend
from .harness import (
    emit_csv,
    estimate_rms_error,
    experiment_from_mapping,
    fit_slopes,
    parse_config,
)
from .noise import RNG_ALGORITHM, MasterPath, count_random_variables
from .problems import preset
from .schemes import Integrator, SchemeConfig, iterated_integral_oracle
from .basis import save_field


def _load_mapping(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _metadata(seed, threads=None):
    meta = {
        "package": f"spdeint {__version__}",
        "rng": RNG_ALGORITHM,
        "backend": resolve_backend(),
        "seed": seed,
    }
    if threads is not None:
        meta["threads"] = threads
    return meta


def _cmd_run(args):
    mapping = _load_mapping(args.config)
    for required in ("problem", "n"):
        if required not in mapping:
            raise ValueError(f"run needs the {required!r} key in the experiment file")
    problem = preset(mapping["problem"])
    scheme = mapping.get("scheme", "milstein")
    n = int(mapping["n"])
    m = int(mapping.get("m", problem.steps_for(scheme, n)))
    k = int(mapping.get("k", problem.modes_for(n)))
    seed = args.seed if args.seed is not None else int(mapping.get("seed", 0))
    out = args.out if args.out is not None else mapping.get("out")
    spec = problem.noise_spec(k)
    path = MasterPath(seed=seed, steps=m, n_modes=spec.n_active, horizon=problem.horizon)
    result = Integrator(SchemeConfig(scheme, problem, n, m, k, path)).run()
    meta = _metadata(seed)
    print(f"problem={problem.name} scheme={scheme} N={n} M={m} K={k}")
    print(f"final H-norm: {result.final.h_norm():.12e}")
    print(f"random variables: {result.random_variables} (drawn: {path.draws})")
    print(f"rng={meta['rng']} backend={result.backend} seed={seed}")
    if out:
        save_field(result.final, out)
        print(f"final field written to {out}")
    return 0


def _cmd_converge(args):
    mapping = _load_mapping(args.config)
    cfg = experiment_from_mapping(mapping)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out = args.out
    if args.threads is not None:
        cfg.threads = args.threads
    report = estimate_rms_error(cfg)
    slopes = fit_slopes(report)
    print(f"problem={report.problem} metric={report.metric} paths={report.paths} seed={report.seed}")
    print(f"{'scheme':<18}{'N':>5}{'M':>8}{'K':>5}{'randoms':>14}{'rms_error':>14}{'stderr':>12}{'failed':>7}")
    for r in report.rows:
        print(
            f"{r.scheme:<18}{r.n:>5}{r.m:>8}{r.k:>5}{r.random_variables:>14}"
            f"{r.rms_error:>14.6e}{r.stderr:>12.2e}{r.failed_paths:>7}"
        )
    for scheme, fit in slopes.items():
        print(
            f"slope[{scheme}]: vs N = {fit.vs_n:+.3f}, "
            f"vs randoms = {fit.vs_random_variables:+.3f} ({fit.points_used} points)"
        )
    if cfg.out:
        emit_csv(report, cfg.out)
        meta = _metadata(cfg.seed, cfg.threads)
        meta["problem"] = report.problem
        meta["paths"] = report.paths
        prob = cfg.problem_spec()
        _, ref, _, master_m, master_k = cfg.resolved()
        meta["reference"] = {"scheme": ref[0], "n": ref[1], "m": ref[2], "k": ref[3]}
        meta["master"] = {"m": master_m, "k": master_k}
        meta["noise"] = prob.noise_spec(master_k).describe()
        with open(cfg.out + ".meta.json", "w", encoding="ascii") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
        print(f"csv written to {cfg.out} (+ .meta.json)")
    return 0


def _cmd_identity_test(args):
    mapping = _load_mapping(args.config) if args.config else {}
    problem = preset(mapping.get("problem", "reacdiff1d"))
    n = int(mapping.get("n", 16))
    k = int(mapping.get("k", 3))
    substeps = int(mapping.get("substeps", 1000))
    samples = int(mapping.get("samples", 10000))
    h = float(mapping.get("h", 0.05))
    seed = args.seed if args.seed is not None else int(mapping.get("seed", 0))
    basis = problem.basis(n)
    report = iterated_integral_oracle(
        v=problem.initial_field(basis),
        pair=problem.pair,
        spec=problem.noise_spec(k),
        basis=basis,
        h=h,
        substeps=substeps,
        samples=samples,
        seed=seed,
    )
    print(f"problem={problem.name} N={n} K={k} h={h} substeps={substeps} samples={samples}")
    print(f"max |mean difference| / stderr : {report.max_mean_over_stderr:.3f}")
    print(f"max second-moment rel. error   : {report.max_second_moment_rel_error:.4f}")
    print(f"max |difference| over samples  : {report.max_abs_difference:.3e}")
    return 0


def _cmd_count(args):
    mapping = _load_mapping(args.config)
    cfg = experiment_from_mapping(mapping)
    prob = cfg.problem_spec()
    print(f"problem={prob.name}")
    print(f"{'scheme':<18}{'N':>5}{'M':>10}{'K':>5}{'random_variables':>18}")
    for scheme in cfg.schemes:
        for n in sorted(cfg.ladder):
            m = prob.steps_for(scheme, n)
            k = prob.modes_for(n)
            rv = count_random_variables(m, prob.noise_spec(k))
            print(f"{scheme:<18}{n:>5}{m:>10}{k:>5}{rv:>18}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spdeint",
        description="Spectral-Galerkin SPDE integration experiments",
    )
    parser.add_argument("--version", action="version", version=f"spdeint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in (
        ("run", _cmd_run, True),
        ("converge", _cmd_converge, True),
        ("identity-test", _cmd_identity_test, False),
        ("count", _cmd_count, True),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=needs_config, help="experiment file (key = value)")
        p.add_argument("--seed", type=int, default=None, help="override the file's seed")
        p.add_argument("--out", default=None, help="override the file's output path")
        p.add_argument("--threads", type=int, default=None, help="worker threads for Monte Carlo paths")
        p.set_defaults(fn=fn)
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
