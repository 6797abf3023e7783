"""Truncated Q-Wiener process sampling and multi-resolution path coupling.

The covariance operator is diagonal in a fixed eigenfunction family with a
power-law eigenvalue rule:

* ``sine``        g_j(x) = sqrt(2) sin(j pi x),   mu_j = j^-decay,  j = 1..K
* ``cosine``      g_0 = 1 with mu_0 = 0 (never sampled), and
                  g_j(x) = sqrt(2) cos(j pi x),   mu_j = j^-decay,  j = 1..K
* ``tensor_sine`` g_(j1,j2) = 2 sin(j1 pi x1) sin(j2 pi x2),
                  mu_(j1,j2) = (j1+j2)^-decay,    j1,j2 = 1..K  (d = 2)

Modes with zero eigenvalue are representable but never consume random
numbers.  Sampled modes are ordered by increasing max index component, ties
lexicographic, so that the mode set of a coarser truncation K' < K is a
prefix of the finer one -- the anchor of the coupling used for strong-error
comparisons.

A MasterPath holds one array of standard normals at the finest resolution
(steps of the generator: step-major, mode-minor).  Every coarser increment
is a sum of the fine ones covering its window, so trajectories computed at
different (M, K) from the same master path see the same Brownian motion.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .basis import SQRT2, Field, SpectralBasis

FAMILIES = ("sine", "cosine", "tensor_sine")

#: Generator behind every master path; recorded in experiment metadata.
RNG_ALGORITHM = "numpy-pcg64"


@dataclass(frozen=True)
class QWienerSpec:
    """Covariance eigenpairs (mu_j, g_j) truncated at K modes per axis.

    ``amplitude`` scales sqrt(mu_j); it exists so experiments can shrink or
    switch off the noise without changing the eigenvalue rule (amplitude 0
    makes every mode silent).
    """

    family: str
    decay: float
    modes_per_axis: int
    amplitude: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.modes_per_axis < 0:
            raise ValueError(f"modes_per_axis must be nonnegative, got {self.modes_per_axis}")
        if self.amplitude < 0.0:
            raise ValueError(f"amplitude must be nonnegative, got {self.amplitude}")

    @property
    def dimension(self) -> int:
        return 2 if self.family == "tensor_sine" else 1

    @property
    def rule_name(self) -> str:
        return "sum_power" if self.family == "tensor_sine" else "inverse_power"

    def describe(self) -> dict:
        """Serializable description: family tag, eigenvalue rule + exponent, K."""
        out = {
            "family": self.family,
            "rule": self.rule_name,
            "exponent": self.decay,
            "k": self.modes_per_axis,
        }
        if self.amplitude != 1.0:
            out["amplitude"] = self.amplitude
        return out

    def mode_indices(self) -> np.ndarray:
        """Sampled (mu != 0) multi-indices, shape (n_active, d), coupling order."""
        k = self.modes_per_axis if self.amplitude > 0.0 else 0
        if self.dimension == 1:
            # both 1d families sample j = 1..K; the cosine constant mode j=0
            # carries mu_0 = 0 and is skipped
            return np.arange(1, k + 1, dtype=np.int64)[:, None]
        pairs = [(j1, j2) for j1 in range(1, k + 1) for j2 in range(1, k + 1)]
        pairs.sort(key=lambda p: (max(p), p))
        return np.array(pairs, dtype=np.int64).reshape(-1, 2)

    @property
    def n_active(self) -> int:
        """Number of sampled modes; amplitude 0 silences every mode."""
        if self.amplitude == 0.0:
            return 0
        return self.modes_per_axis ** self.dimension

    def eigenvalues(self) -> np.ndarray:
        """mu over the sampled modes, in mode_indices order (amplitude applied)."""
        idx = self.mode_indices()
        if self.family == "tensor_sine":
            mu = (idx[:, 0] + idx[:, 1]).astype(np.float64) ** (-self.decay)
        else:
            mu = idx[:, 0].astype(np.float64) ** (-self.decay)
        return self.amplitude**2 * mu

    def trace(self) -> float:
        return float(np.sum(self.eigenvalues()))

    def eigenfunction_values(self, basis: SpectralBasis) -> np.ndarray:
        """g_j at the collocation nodes: (n_active, n) for d=1, else (n_active, n, n)."""
        self._check_basis(basis)
        idx = self.mode_indices()
        x = basis.grid_1d
        if self.family == "sine":
            return SQRT2 * np.sin(np.pi * idx[:, :1] * x[None, :])
        if self.family == "cosine":
            return SQRT2 * np.cos(np.pi * idx[:, :1] * x[None, :])
        a = np.sin(np.pi * idx[:, 0:1] * x[None, :])
        b = np.sin(np.pi * idx[:, 1:2] * x[None, :])
        return 2.0 * a[:, :, None] * b[:, None, :]

    def _check_basis(self, basis):
        if basis.dimension != self.dimension:
            raise ValueError(
                f"noise family {self.family!r} lives in d={self.dimension}, "
                f"basis has d={basis.dimension}"
            )

    def synthesize(self, basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
        """Grid values of sum_j coeffs_j g_j for per-mode coefficients."""
        return self.synthesize_many(basis, np.asarray(coeffs)[None, :])[0]

    def synthesize_many(self, basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
        """Batched synthesis: coeffs (m, n_active) -> grid values (m, n[, n])."""
        self._check_basis(basis)
        k = self.modes_per_axis
        idx = self.mode_indices()
        x = basis.grid_1d
        if self.dimension == 1:
            if self.family == "sine":
                g = SQRT2 * np.sin(np.pi * idx[:, 0:1] * x[None, :])
            else:
                g = SQRT2 * np.cos(np.pi * idx[:, 0:1] * x[None, :])
            return coeffs @ g
        # separable tensor synthesis: 2 * S^T A S with A the (K, K) mode array
        s = np.sin(np.pi * np.arange(1, k + 1, dtype=np.float64)[:, None] * x[None, :])
        flat = (idx[:, 0] - 1) * k + (idx[:, 1] - 1)
        a = np.zeros((coeffs.shape[0], k * k))
        a[:, flat] = coeffs
        a = a.reshape(coeffs.shape[0], k, k)
        return 2.0 * (s.T @ (a @ s))

    def quadrature_sum(self, basis: SpectralBasis) -> np.ndarray:
        """Grid values of sum_j mu_j g_j(x)^2, accumulated mode by mode."""
        self._check_basis(basis)
        mu = self.eigenvalues()
        g = self.eigenfunction_values(basis)
        out = np.zeros(basis.shape)
        for j in range(mu.shape[0]):
            if mu[j] != 0.0:
                out += mu[j] * (g[j] * g[j])
        return out


@dataclass
class MasterPath:
    """Finest-resolution standard normals driving every coupled trajectory.

    One master path realizes a truncated Q-Wiener process on [0, horizon]
    with ``steps`` uniform intervals and ``n_modes`` sampled modes.  The
    normal array is a deterministic function of the seed (PCG64, generated
    in a single step-major, mode-minor block) and is materialized lazily;
    ``draws`` reports how many normals have actually been generated.

    Coarse increments at a resolution m | steps are sums of fine increments.
    The reduction halves the array pairwise while the ratio stays even, so
    for power-of-two step ratios the telescoping identity
    ``increments(m)[i] == increments(2m)[2i] + increments(2m)[2i+1]``
    holds bitwise.
    """

    seed: object
    steps: int
    n_modes: int
    horizon: float = 1.0
    _normals: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"steps must be nonnegative, got {self.steps}")
        if self.n_modes < 0:
            raise ValueError(f"n_modes must be nonnegative, got {self.n_modes}")
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    def normals(self) -> np.ndarray:
        if self._normals is None:
            rng = np.random.default_rng(self.seed)
            arr = rng.standard_normal((self.steps, self.n_modes))
            arr.setflags(write=False)
            self._normals = arr
        return self._normals

    @property
    def draws(self) -> int:
        """Number of standard normals generated so far (0 or steps * n_modes)."""
        return 0 if self._normals is None else self.steps * self.n_modes

    def increments(self, m: int) -> np.ndarray:
        """Coupled Brownian increments at resolution m: array (m, n_modes).

        Column j holds the increments of the standard Brownian motion of
        mode j over the windows [i*T/m, (i+1)*T/m); each has variance T/m.
        """
        if m < 1 or self.steps % m:
            raise ValueError(f"resolution {m} does not divide the master resolution {self.steps}")
        arr = self.normals() * math.sqrt(self.horizon / self.steps)
        while arr.shape[0] > m:
            rows = arr.shape[0]
            if rows % 2 == 0 and (rows // 2) % m == 0:
                arr = arr[0::2] + arr[1::2]
            else:
                arr = arr.reshape(m, rows // m, self.n_modes).sum(axis=1)
        return arr


def sample_increment(
    path: MasterPath, spec: QWienerSpec, basis: SpectralBasis, m: int, steps: int
) -> Field:
    """Grid values of the truncated noise increment over step m of `steps`.

    Returns sum over sampled modes of sqrt(mu_j) * dbeta_j * g_j where
    dbeta_j ~ N(0, T/steps) is the coupled coarse increment of mode j.
    """
    if spec.n_active > path.n_modes:
        raise ValueError(
            f"spec needs {spec.n_active} modes but the master path holds {path.n_modes}"
        )
    if not 0 <= m < steps:
        raise ValueError(f"step index {m} outside range({steps})")
    rows = path.increments(steps)  # validates divisibility
    coeffs = np.sqrt(spec.eigenvalues()) * rows[m, : spec.n_active]
    return Field(basis, grid=spec.synthesize(basis, coeffs))


def quadrature_field(spec: QWienerSpec, basis: SpectralBasis, h: float) -> Field:
    """Grid values of h * sum_j mu_j g_j(x)^2 (the step-size-scaled quadratic
    variation density of the truncated noise)."""
    return Field(basis, grid=h * spec.quadrature_sum(basis))


def count_random_variables(steps: int, spec: QWienerSpec) -> int:
    """Standard normals needed for `steps` increments of the truncated noise."""
    return steps * spec.n_active
