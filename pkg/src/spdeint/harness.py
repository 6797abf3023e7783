"""Coupled-path Monte Carlo error estimation, slope fitting and CSV output.

The strong error of a run is measured against a reference trajectory (the
second-order scheme at the finest configured resolution) computed on the
same master path, so every resolution sees the same Brownian motion.  Per
path the reference and every ladder entry are run, the H-norm of the
spectral difference is taken with the coarse solution zero-padded into the
reference mode set, and the root mean square over paths is reported with a
delta-method standard error.

The experiment file format is flat ``key = value`` text; see KNOWN_KEYS.
"""

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np

from .noise import MasterPath, count_random_variables
from .problems import ProblemSpec, preset
from .schemes import DivergenceError, Integrator, SchemeConfig

#: every key the experiment file may contain (converge + run + identity-test)
KNOWN_KEYS = (
    "problem",
    "schemes",
    "ladder",
    "ref_n",
    "ref_m",
    "ref_k",
    "paths",
    "seed",
    "out",
    "metric",
    "master_m",
    "master_k",
    "threads",
    "scheme",
    "n",
    "m",
    "k",
    "substeps",
    "samples",
    "h",
)


@dataclass
class ExperimentConfig:
    """A ladder study: schemes x resolutions against a common reference."""

    problem: Union[str, ProblemSpec]
    schemes: List[str]
    ladder: List[int]
    ref_n: int
    ref_m: Optional[int] = None
    ref_k: Optional[int] = None
    paths: int = 100
    seed: int = 0
    metric: str = "rms"  # "rms" or "pathwise" (single-path studies)
    out: Optional[str] = None
    master_m: Optional[int] = None
    master_k: Optional[int] = None
    threads: int = 1

    def problem_spec(self) -> ProblemSpec:
        return preset(self.problem) if isinstance(self.problem, str) else self.problem

    def resolved(self):
        """(problem, reference tuple, run tuples, master_m, master_k).

        Runs are (scheme, n, m, k) with the problem's recommended coupling;
        the master path must be divisible by every run, reference included.
        """
        prob = self.problem_spec()
        if self.metric not in ("rms", "pathwise"):
            raise ValueError(f"unknown metric {self.metric!r}")
        ref_m = self.ref_m if self.ref_m is not None else prob.steps_for("milstein", self.ref_n)
        ref_k = self.ref_k if self.ref_k is not None else prob.modes_for(self.ref_n)
        runs = []
        for scheme in self.schemes:
            for n in sorted(self.ladder):
                if n > self.ref_n:
                    raise ValueError(f"ladder point n={n} exceeds the reference ref_n={self.ref_n}")
                runs.append((scheme, n, prob.steps_for(scheme, n), prob.modes_for(n)))
        all_m = [ref_m] + [m for (_, _, m, _) in runs]
        master_m = self.master_m if self.master_m is not None else math.lcm(*all_m)
        for m in all_m:
            if master_m % m:
                raise ValueError(f"master_m={master_m} is not divisible by run steps m={m}")
        all_k = [ref_k] + [k for (_, _, _, k) in runs]
        master_k = self.master_k if self.master_k is not None else max(all_k)
        if master_k < max(all_k):
            raise ValueError(f"master_k={master_k} is below the largest run truncation")
        return prob, ("milstein", self.ref_n, ref_m, ref_k), runs, master_m, master_k


@dataclass
class ReportRow:
    scheme: str
    n: int
    m: int
    k: int
    random_variables: int
    rms_error: float
    stderr: float
    failed_paths: int
    wall_seconds: float


@dataclass
class ConvergenceReport:
    problem: str
    metric: str
    paths: int
    seed: int
    rows: List[ReportRow] = field(default_factory=list)
    #: resolution floor: reference self-distance (identically zero for the
    #: coupled protocol); rows with error below 10x this are left out of fits
    floor: float = 0.0


def _zero_padded_error(ref_coeffs: np.ndarray, coeffs: np.ndarray) -> float:
    """H-norm of (reference - coarse) with the coarse coefficients zero-padded
    into the reference mode set (spatial truncation error included)."""
    diff = ref_coeffs.copy()
    sl = tuple(slice(0, s) for s in coeffs.shape)
    diff[sl] -= coeffs
    return float(np.sqrt(np.sum(diff**2)))


def estimate_rms_error(config: ExperimentConfig, backend=None) -> ConvergenceReport:
    """Run the ladder study and return per-(scheme, n) error estimates.

    Per path p the master path is seeded with (config.seed, p); the
    reference and all runs share it.  Diverged trajectories are excluded
    from the estimate and surface in the failed_paths column (a diverged
    reference fails every row of that path).
    """
    prob, ref, runs, master_m, master_k = config.resolved()
    n_modes = prob.noise_spec(master_k).n_active

    def one_path(p):
        path = MasterPath(seed=[config.seed, p], steps=master_m, n_modes=n_modes, horizon=prob.horizon)
        out = []
        try:
            ref_run = Integrator(
                SchemeConfig(ref[0], prob, ref[1], ref[2], ref[3], path)
            ).run(backend=backend)
        except DivergenceError:
            return [(None, 0.0)] * len(runs)
        ref_coeffs = ref_run.final.spectral
        for scheme, n, m, k in runs:
            t0 = time.perf_counter()
            try:
                res = Integrator(SchemeConfig(scheme, prob, n, m, k, path)).run(backend=backend)
                err = _zero_padded_error(ref_coeffs, res.final.spectral)
            except DivergenceError:
                err = None
            out.append((err, time.perf_counter() - t0))
        return out

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            per_path = list(pool.map(one_path, range(config.paths)))
    else:
        per_path = [one_path(p) for p in range(config.paths)]

    report = ConvergenceReport(
        problem=prob.name, metric=config.metric, paths=config.paths, seed=config.seed
    )
    for i, (scheme, n, m, k) in enumerate(runs):
        sq = [res[i][0] ** 2 for res in per_path if res[i][0] is not None]
        wall = sum(res[i][1] for res in per_path)
        failed = config.paths - len(sq)
        if sq:
            mean_sq = float(np.mean(sq))
            rms = math.sqrt(mean_sq)
            if len(sq) > 1 and rms > 0.0:
                se_mean_sq = float(np.std(sq, ddof=1)) / math.sqrt(len(sq))
                stderr = se_mean_sq / (2.0 * rms)
            else:
                stderr = 0.0
        else:
            rms, stderr = float("nan"), float("nan")
        report.rows.append(
            ReportRow(
                scheme=scheme,
                n=n,
                m=m,
                k=k,
                random_variables=count_random_variables(m, prob.noise_spec(k)),
                rms_error=rms,
                stderr=stderr,
                failed_paths=failed,
                wall_seconds=wall,
            )
        )
    return report


@dataclass
class SlopeFit:
    vs_n: float
    vs_random_variables: float
    points_used: int


def fit_slopes(report: ConvergenceReport) -> dict:
    """Least-squares log-log slopes per scheme, vs n and vs random variables.

    Rows whose error sits at or below 10x the report's resolution floor
    (or is not a positive finite number) are excluded from the fit.
    """
    out = {}
    schemes = []
    for row in report.rows:
        if row.scheme not in schemes:
            schemes.append(row.scheme)
    for scheme in schemes:
        pts = [
            (row.n, row.random_variables, row.rms_error)
            for row in report.rows
            if row.scheme == scheme
            and np.isfinite(row.rms_error)
            and row.rms_error > 0.0
            and row.rms_error > 10.0 * report.floor
        ]
        if len(pts) < 2:
            out[scheme] = SlopeFit(float("nan"), float("nan"), len(pts))
            continue
        log_err = np.log([e for (_, _, e) in pts])
        slope_n = np.polyfit(np.log([n for (n, _, _) in pts]), log_err, 1)[0]
        slope_rv = np.polyfit(np.log([r for (_, r, _) in pts]), log_err, 1)[0]
        out[scheme] = SlopeFit(float(slope_n), float(slope_rv), len(pts))
    return out


CSV_HEADER = "scheme,N,M,K,random_variables,rms_error,stderr,failed_paths,wall_seconds"


def emit_csv(report: ConvergenceReport, path) -> None:
    """Write the report rows in deterministic order (one header row always)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in report.rows:
            fh.write(
                f"{r.scheme},{r.n},{r.m},{r.k},{r.random_variables},"
                f"{r.rms_error!r},{r.stderr!r},{r.failed_paths},{r.wall_seconds:.6f}\n"
            )


def parse_config(text: str) -> dict:
    """Parse the flat key = value experiment format into a string mapping."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()
        if key not in KNOWN_KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in mapping:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def _int_list(value: str):
    return [int(tok) for tok in value.replace(",", " ").split()]


def experiment_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed experiment file mapping."""
    for required in ("problem", "schemes", "ladder", "ref_n"):
        if required not in mapping:
            raise ValueError(f"experiment file is missing the {required!r} key")
    cfg = ExperimentConfig(
        problem=mapping["problem"],
        schemes=[tok.strip() for tok in mapping["schemes"].split(",") if tok.strip()],
        ladder=_int_list(mapping["ladder"]),
        ref_n=int(mapping["ref_n"]),
    )
    if "ref_m" in mapping:
        cfg.ref_m = int(mapping["ref_m"])
    if "ref_k" in mapping:
        cfg.ref_k = int(mapping["ref_k"])
    if "paths" in mapping:
        cfg.paths = int(mapping["paths"])
    if "seed" in mapping:
        cfg.seed = int(mapping["seed"])
    if "metric" in mapping:
        cfg.metric = mapping["metric"]
    if "out" in mapping:
        cfg.out = mapping["out"]
    if "master_m" in mapping:
        cfg.master_m = int(mapping["master_m"])
    if "master_k" in mapping:
        cfg.master_k = int(mapping["master_k"])
    if "threads" in mapping:
        cfg.threads = int(mapping["threads"])
    return cfg
