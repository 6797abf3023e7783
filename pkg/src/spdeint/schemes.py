"""One-step maps and trajectory drivers for the four time-stepping schemes.

All schemes share the same skeleton per step: synthesize grid values of the
current spectral iterate, form the grid-side update, transform back, then
apply the diagonal linear propagator.

* ``milstein``          -- exponential propagator; drift, noise and the
                           second-order correction
                           0.5 * b_y(.,Y) b(.,Y) (dW^2 - quad).
* ``implicit_euler``    -- resolvent propagator 1/(1 + lam h); drift and
                           noise only.
* ``exponential_euler`` -- exponential propagator; drift and noise only
                           (identical to milstein with the correction
                           dropped).
* ``splitting``         -- exponential propagator applied to the exact flow
                           exp(dW - quad/2) * Y of the multiplicative-noise
                           subequation; valid only for linear multiplicative
                           problems (b(x,y) = y, zero drift).

Every trajectory is driven by a :class:`spdeint.noise.MasterPath`, so runs
at different resolutions on the same path are strongly coupled.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .backend import resolve_backend
from .basis import SQRT2, Field, SpectralBasis
from .noise import MasterPath, count_random_variables
from .problems import ProblemSpec

SCHEME_KINDS = ("milstein", "implicit_euler", "exponential_euler", "splitting")
_SCHEME_IDS = {name: i for i, name in enumerate(SCHEME_KINDS)}


class DivergenceError(RuntimeError):
    """A trajectory produced a non-finite state."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state after step {step}")
        self.step = step


@dataclass(frozen=True)
class SchemeConfig:
    """A scheme bound to a problem, resolutions and a master path."""

    scheme: str
    problem: ProblemSpec
    n: int  # spatial modes per axis
    m: int  # time steps
    k: int  # noise modes per axis
    path: MasterPath
    noise_amplitude: float = 1.0

    def __post_init__(self):
        if self.scheme not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEME_KINDS}")
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.m < 0:
            raise ValueError(f"m must be nonnegative, got {self.m}")
        if self.m > 0 and self.path.steps % self.m:
            raise ValueError(
                f"m={self.m} does not divide the master path resolution {self.path.steps}"
            )
        if self.path.horizon != self.problem.horizon:
            raise ValueError(
                f"master path horizon {self.path.horizon} differs from the "
                f"problem horizon {self.problem.horizon}"
            )
        spec = self.problem.noise_spec(self.k, self.noise_amplitude)
        if spec.n_active > self.path.n_modes:
            raise ValueError(
                f"k={self.k} needs {spec.n_active} modes but the master path "
                f"holds {self.path.n_modes}"
            )
        if self.scheme == "splitting" and not self.problem.linear_multiplicative:
            raise ValueError(
                "the splitting scheme requires a linear multiplicative problem "
                "(b(x,y) = y, zero drift)"
            )


@dataclass
class RunResult:
    final: Field
    steps: int
    random_variables: int
    backend: str
    snapshots: Optional[list] = None


class Integrator:
    """Step maps and the trajectory loop for one SchemeConfig."""

    def __init__(self, config: SchemeConfig):
        self.config = config
        problem = config.problem
        self.basis = problem.basis(config.n)
        self.spec = problem.noise_spec(config.k, config.noise_amplitude)
        self.h = problem.horizon / config.m if config.m else 0.0
        self._coords = self.basis.grid_coords()
        self._semigroup = np.exp(-self.basis.eigenvalues * self.h)
        self._resolvent = 1.0 + self.basis.eigenvalues * self.h
        self._quad = self.h * self.spec.quadrature_sum(self.basis)
        self._sqrt_mu = np.sqrt(self.spec.eigenvalues())
        self._scheme_id = _SCHEME_IDS[config.scheme]

    # -- building blocks ------------------------------------------------

    def initial(self) -> Field:
        return self.config.problem.initial_field(self.basis)

    def noise_increment(self, m: int) -> Field:
        rows = self.config.path.increments(self.config.m)
        coeffs = self._sqrt_mu * rows[m, : self.spec.n_active]
        return Field(self.basis, grid=self.spec.synthesize(self.basis, coeffs))

    def quadrature(self) -> Field:
        return Field(self.basis, grid=self._quad)

    def _noise_grid_all(self) -> np.ndarray:
        rows = self.config.path.increments(self.config.m)[:, : self.spec.n_active]
        return self.spec.synthesize_many(self.basis, self._sqrt_mu * rows)

    # -- single steps ----------------------------------------------------

    def _advance(self, coeffs: np.ndarray, dw: np.ndarray, scheme_id: int) -> np.ndarray:
        """One step of the given scheme on raw spectral coefficients."""
        basis = self.basis
        pair = self.config.problem.pair
        v = basis.synthesize(coeffs)
        if scheme_id == kernels.SPLITTING:
            u = np.exp(dw - 0.5 * self._quad) * v
        else:
            if self.config.problem.burgers_drift:
                vx = SQRT2 * (basis.derivative_matrix @ coeffs)
                drift = -(v * vx)
            else:
                drift = np.asarray(pair.drift(self._coords, v), dtype=np.float64)
            bfac = np.asarray(pair.diffusion(self._coords, v), dtype=np.float64)
            u = v + self.h * drift + bfac * dw
            if scheme_id == kernels.MILSTEIN:
                by = np.asarray(pair.diffusion_dy(self._coords, v), dtype=np.float64)
                u = u + (0.5 * by) * bfac * (dw * dw - self._quad)
        out = basis.analyze(u)
        if scheme_id == kernels.IMPLICIT_EULER:
            return out / self._resolvent
        return self._semigroup * out

    def _step_field(self, y: Field, m: int, scheme_id: int) -> Field:
        dw = self.noise_increment(m).grid
        return Field(self.basis, spectral=self._advance(y.spectral, dw, scheme_id))

    def milstein_step(self, y: Field, m: int) -> Field:
        return self._step_field(y, m, kernels.MILSTEIN)

    def implicit_euler_step(self, y: Field, m: int) -> Field:
        return self._step_field(y, m, kernels.IMPLICIT_EULER)

    def exponential_euler_step(self, y: Field, m: int) -> Field:
        return self._step_field(y, m, kernels.EXPONENTIAL_EULER)

    def splitting_step(self, y: Field, m: int) -> Field:
        if not self.config.problem.linear_multiplicative:
            raise ValueError("splitting_step requires a linear multiplicative problem")
        return self._step_field(y, m, kernels.SPLITTING)

    def step(self, y: Field, m: int) -> Field:
        return self._step_field(y, m, self._scheme_id)

    # -- trajectories ----------------------------------------------------

    def run(self, backend: Optional[str] = None, snapshot_every: Optional[int] = None) -> RunResult:
        """Iterate the configured scheme m times from the projected start value.

        Deterministic given (config, master path seed).  Raises
        DivergenceError naming the step index if the state leaves the
        finite range.  Snapshots force the numpy loop.
        """
        cfg = self.config
        y0 = self.initial()
        rv = count_random_variables(cfg.m, self.spec)
        chosen = resolve_backend(backend)
        if cfg.m == 0:
            snaps = [(0, y0)] if snapshot_every else None
            return RunResult(y0, 0, 0, chosen, snaps)
        dw = self._noise_grid_all()
        if snapshot_every is None and chosen == "numba":
            kernel = kernels.trajectory_kernel(cfg.problem.pair, self.basis.dimension)
            if self.basis.dimension == 1:
                c, fail = kernel(
                    y0.spectral,
                    dw,
                    self._quad,
                    self._semigroup,
                    self._resolvent,
                    self.basis.sine_matrix,
                    self.basis.derivative_matrix,
                    self.basis.grid_1d,
                    self.h,
                    self._scheme_id,
                    cfg.problem.burgers_drift,
                )
            else:
                x1g, x2g = self._coords
                c, fail = kernel(
                    y0.spectral,
                    dw,
                    self._quad,
                    self._semigroup,
                    self._resolvent,
                    self.basis.sine_matrix,
                    x1g,
                    x2g,
                    self.h,
                    self._scheme_id,
                )
            if fail >= 0:
                raise DivergenceError(fail)
            return RunResult(Field(self.basis, spectral=c), cfg.m, rv, chosen)
        # pure-numpy loop; mirrors the kernel arithmetic step for step
        snaps = [(0, y0)] if snapshot_every else None
        c = y0.spectral
        with np.errstate(over="ignore", invalid="ignore"):  # divergence checked below
            for m in range(cfg.m):
                c = self._advance(c, dw[m], self._scheme_id)
                if not np.all(np.isfinite(c)):
                    raise DivergenceError(m)
                if snapshot_every and (m + 1) % snapshot_every == 0:
                    snaps.append((m + 1, Field(self.basis, spectral=c.copy())))
        return RunResult(Field(self.basis, spectral=c), cfg.m, rv, "numpy", snaps)


def run_scheme(config: SchemeConfig, backend=None, snapshot_every=None) -> RunResult:
    """Build an Integrator for `config` and run the full trajectory."""
    return Integrator(config).run(backend=backend, snapshot_every=snapshot_every)


# -- iterated integral oracle ---------------------------------------------


@dataclass
class IdentityReport:
    """Monte Carlo comparison of the simulated iterated noise integral
    against its closed form, nodewise over the collocation grid."""

    samples: int
    substeps: int
    mean_difference: np.ndarray
    stderr_difference: np.ndarray
    second_moment_simulated: np.ndarray
    second_moment_closed: np.ndarray
    max_abs_difference: float

    @property
    def max_mean_over_stderr(self) -> float:
        ratio = np.zeros_like(self.mean_difference)
        nz = self.stderr_difference > 0.0
        ratio[nz] = np.abs(self.mean_difference[nz]) / self.stderr_difference[nz]
        ratio[~nz & (np.abs(self.mean_difference) > 0.0)] = np.inf
        return float(np.max(ratio)) if ratio.size else 0.0

    @property
    def max_second_moment_rel_error(self) -> float:
        diff = np.abs(self.second_moment_simulated - self.second_moment_closed)
        denom = self.second_moment_closed
        rel = np.zeros_like(diff)
        nz = denom > 0.0
        rel[nz] = diff[nz] / denom[nz]
        rel[~nz & (diff > 0.0)] = np.inf
        return float(np.max(rel)) if rel.size else 0.0


def iterated_integral_oracle(
    v: Field,
    pair,
    spec,
    basis: SpectralBasis,
    h: float,
    substeps: int,
    samples: int,
    seed: int = 0,
    chunk: int = 2000,
) -> IdentityReport:
    """Validate the closed form of the iterated noise integral at state v.

    Per sample, each sampled mode's Brownian motion is refined into
    `substeps` sub-increments.  Cross-mode double integrals are simulated
    as left-point double Riemann-Ito sums over the sub-grid; same-mode
    double integrals are a pathwise-exact function of the mode's total
    increment, 0.5 * (dbeta^2 - h * mu_j).  The result is compared nodewise
    with 0.5 * b_y(.,v) b(.,v) * (dW^2 - quad) built from the same path's
    total increment; with a single sampled mode there are no cross terms
    and the two sides agree to rounding.
    """
    if substeps < 2:
        raise ValueError(f"substeps must be at least 2, got {substeps}")
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    mu = spec.eigenvalues()
    nj = mu.shape[0]
    sqrt_mu = np.sqrt(mu)
    g = spec.eigenfunction_values(basis).reshape(nj, -1)
    vals = v.grid
    b = np.broadcast_to(np.asarray(pair.diffusion(basis.grid_coords(), vals), float), basis.shape)
    by = np.broadcast_to(
        np.asarray(pair.diffusion_dy(basis.grid_coords(), vals), float), basis.shape
    )
    bb = (by * b).ravel()
    quad = (h * spec.quadrature_sum(basis)).ravel()
    nx = bb.shape[0]

    rng = np.random.default_rng(seed)
    sum_d = np.zeros(nx)
    sum_d2 = np.zeros(nx)
    sum_i2 = np.zeros(nx)
    sum_c2 = np.zeros(nx)
    max_abs = 0.0
    done = 0
    while done < samples:
        c = min(chunk, samples - done)
        delta = math.sqrt(h / substeps) * rng.standard_normal((c, substeps, nj))
        tot = delta.sum(axis=1)
        part = np.cumsum(delta, axis=1)
        excl = np.concatenate([np.zeros((c, 1, nj)), part[:, :-1, :]], axis=1)
        cross = np.einsum("csk,csj->cjk", excl, delta)
        a = cross * (sqrt_mu[:, None] * sqrt_mu[None, :])
        diag = 0.5 * (tot**2 - h)
        a[:, np.arange(nj), np.arange(nj)] = mu * diag
        sim = bb * np.einsum("jx,cjk,kx->cx", g, a, g)
        dw = (sqrt_mu * tot) @ g
        closed = (0.5 * bb) * (dw * dw - quad)
        d = sim - closed
        sum_d += d.sum(axis=0)
        sum_d2 += (d * d).sum(axis=0)
        sum_i2 += (sim * sim).sum(axis=0)
        sum_c2 += (closed * closed).sum(axis=0)
        if d.size:
            max_abs = max(max_abs, float(np.max(np.abs(d))))
        done += c

    mean = sum_d / samples
    var = np.maximum(sum_d2 / samples - mean**2, 0.0)
    stderr = np.sqrt(var / samples)
    return IdentityReport(
        samples=samples,
        substeps=substeps,
        mean_difference=mean,
        stderr_difference=stderr,
        second_moment_simulated=sum_i2 / samples,
        second_moment_closed=sum_c2 / samples,
        max_abs_difference=max_abs,
    )
