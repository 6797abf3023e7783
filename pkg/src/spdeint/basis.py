"""Sine eigenbasis of the Dirichlet Laplacian on (0,1)^d and field algebra.

The operator is ``kappa * Laplace`` with homogeneous Dirichlet boundary
conditions on the unit interval (d=1) or unit square (d=2).  Its eigenpairs
are

    eigenvalue   lam_i = kappa * pi^2 * (i_1^2 + ... + i_d^2),
    eigenfunction e_i(x) = 2^(d/2) * sin(i_1 pi x_1) * ... * sin(i_d pi x_d),

for multi-indices i in {1..n}^d.  Fields are represented dually as spectral
coefficients over those modes and as values on the interior collocation grid
x_k = k/(n+1), k = 1..n (per axis); the boundary values are identically zero
and are not stored.

Transforms are plain sine-matrix products.  At the resolutions this package
targets (n <= 128 per axis) that is fast, exactly mirrors the analysis
convention, and keeps the numba kernels trivial; a fast DST could be swapped
in behind the same interface without touching callers.
"""

import io
import struct

import numpy as np

SQRT2 = float(np.sqrt(2.0))

# Serialized field header: dimension, modes per axis, representation tag,
# all little-endian uint32, followed by n^d little-endian float64 payload
# values in C order (lexicographic over multi-indices / grid nodes).
_HEADER = struct.Struct("<III")
REP_SPECTRAL = 0
REP_GRID = 1


class SpectralBasis:
    """Dirichlet-Laplacian eigensystem at a fixed per-axis resolution."""

    def __init__(self, dimension: int, modes_per_axis: int, kappa: float):
        if dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {dimension}")
        if modes_per_axis < 1:
            raise ValueError(f"modes_per_axis must be positive, got {modes_per_axis}")
        if not kappa > 0.0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        self.dimension = dimension
        self.modes_per_axis = modes_per_axis
        self.kappa = float(kappa)

        n = modes_per_axis
        idx = np.arange(1, n + 1, dtype=np.float64)
        self.grid_1d = idx / (n + 1)
        if dimension == 1:
            self.eigenvalues = kappa * np.pi**2 * idx**2
        else:
            self.eigenvalues = kappa * np.pi**2 * (idx[:, None] ** 2 + idx[None, :] ** 2)
        # sine_matrix[i-1, k-1] = sin(i pi x_k); symmetric because x_k = k/(n+1)
        self.sine_matrix = np.sin(np.pi * np.outer(idx, self.grid_1d))
        # cosine synthesis for the 1d spatial derivative of a sine series:
        # derivative_matrix[k-1, i-1] = i pi cos(i pi x_k)
        self.derivative_matrix = (idx * np.pi) * np.cos(np.pi * np.outer(self.grid_1d, idx))
        for arr in (self.eigenvalues, self.sine_matrix, self.derivative_matrix, self.grid_1d):
            arr.setflags(write=False)

    @property
    def shape(self):
        return (self.modes_per_axis,) * self.dimension

    def grid_coords(self):
        """Coordinate arrays broadcast to the grid shape, one per axis."""
        if self.dimension == 1:
            return (self.grid_1d,)
        x1, x2 = np.meshgrid(self.grid_1d, self.grid_1d, indexing="ij")
        return (x1, x2)

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid values of a coefficient array (inverse transform)."""
        if self.dimension == 1:
            return SQRT2 * (self.sine_matrix @ coeffs)
        return 2.0 * (self.sine_matrix @ coeffs @ self.sine_matrix)

    def analyze(self, values: np.ndarray) -> np.ndarray:
        """Coefficients of grid values (forward transform)."""
        n1 = self.modes_per_axis + 1.0
        if self.dimension == 1:
            return (SQRT2 / n1) * (self.sine_matrix @ values)
        return (2.0 / n1**2) * (self.sine_matrix @ values @ self.sine_matrix)

    def grid_norm(self, values: np.ndarray) -> float:
        """Discrete L2 norm of grid values, boundary extended by zero.

        Trapezoidal quadrature with node weight 1/(n+1) per axis; by discrete
        orthogonality it coincides with the coefficient 2-norm (Parseval).
        """
        w = (self.modes_per_axis + 1.0) ** self.dimension
        return float(np.sqrt(np.sum(np.asarray(values) ** 2) / w))

    def __eq__(self, other):
        return (
            isinstance(other, SpectralBasis)
            and self.dimension == other.dimension
            and self.modes_per_axis == other.modes_per_axis
            and self.kappa == other.kappa
        )

    def __repr__(self):
        return (
            f"SpectralBasis(dimension={self.dimension}, "
            f"modes_per_axis={self.modes_per_axis}, kappa={self.kappa})"
        )


class Field:
    """A function on (0,1)^d held as spectral coefficients and/or grid values.

    Fields are immutable: the stored arrays are marked read-only and the
    missing representation, once computed, is cached (the computation is
    deterministic, so concurrent lazy evaluation is benign).
    """

    __slots__ = ("basis", "_spectral", "_grid")

    def __init__(self, basis: SpectralBasis, spectral=None, grid=None):
        if spectral is None and grid is None:
            raise ValueError("Field needs a spectral or a grid representation")
        self.basis = basis
        self._spectral = self._check(basis, spectral)
        self._grid = self._check(basis, grid)

    @staticmethod
    def _check(basis, arr):
        if arr is None:
            return None
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        if arr.shape != basis.shape:
            raise ValueError(f"array shape {arr.shape} does not match basis shape {basis.shape}")
        arr.setflags(write=False)
        return arr

    @property
    def spectral(self) -> np.ndarray:
        if self._spectral is None:
            c = self.basis.analyze(self._grid)
            c.setflags(write=False)
            self._spectral = c
        return self._spectral

    @property
    def grid(self) -> np.ndarray:
        if self._grid is None:
            v = self.basis.synthesize(self._spectral)
            v.setflags(write=False)
            self._grid = v
        return self._grid

    def h_norm(self) -> float:
        """L2((0,1)^d) norm, computed as the coefficient 2-norm."""
        return float(np.sqrt(np.sum(self.spectral**2)))

    def __repr__(self):
        reps = [r for r, a in (("spectral", self._spectral), ("grid", self._grid)) if a is not None]
        return f"Field({self.basis!r}, reps={'+'.join(reps)})"


def field_from_spectral(basis, coeffs) -> Field:
    return Field(basis, spectral=coeffs)


def field_from_grid(basis, values) -> Field:
    return Field(basis, grid=values)


def to_spectral(field: Field) -> Field:
    """Coefficient representation of a grid field; inverse of to_grid."""
    return Field(field.basis, spectral=field.basis.analyze(field.grid))


def to_grid(field: Field) -> Field:
    """Collocation values of a spectral field; inverse of to_spectral."""
    return Field(field.basis, grid=field.basis.synthesize(field.spectral))


def apply_semigroup(field: Field, h: float) -> Field:
    """Heat semigroup action: coefficient i is damped by exp(-lam_i h)."""
    if h < 0.0:
        raise ValueError(f"semigroup time must be nonnegative, got {h}")
    return Field(field.basis, spectral=np.exp(-field.basis.eigenvalues * h) * field.spectral)


def apply_resolvent(field: Field, h: float) -> Field:
    """Backward-Euler resolvent: coefficient i is divided by (1 + lam_i h)."""
    if h < 0.0:
        raise ValueError(f"resolvent time must be nonnegative, got {h}")
    return Field(field.basis, spectral=field.spectral / (1.0 + field.basis.eigenvalues * h))


def project(field: Field, n_keep: int) -> Field:
    """Zero every coefficient with any index component above n_keep."""
    if n_keep < 0:
        raise ValueError(f"n_keep must be nonnegative, got {n_keep}")
    n = field.basis.modes_per_axis
    if n_keep >= n:
        return Field(field.basis, spectral=field.spectral)
    c = field.spectral.copy()
    c[n_keep:] = 0.0
    if field.basis.dimension == 2:
        c[:, n_keep:] = 0.0
    return Field(field.basis, spectral=c)


def spectral_derivative_1d(field: Field) -> Field:
    """Grid values of d/dx of a 1d sine series, by direct cosine synthesis."""
    if field.basis.dimension != 1:
        raise ValueError("spectral_derivative_1d is defined for d=1 only")
    return Field(field.basis, grid=SQRT2 * (field.basis.derivative_matrix @ field.spectral))


def fractional_norm(field: Field, order: float) -> float:
    """Diagnostic norm (sum_i lam_i^(2r) c_i^2)^(1/2) of fractional smoothness r."""
    lam = field.basis.eigenvalues
    return float(np.sqrt(np.sum(lam ** (2.0 * order) * field.spectral**2)))


def save_field(field: Field, file) -> None:
    """Write a field: header (d, n, representation tag) then float64 payload.

    All values little-endian; payload in C order, i.e. lexicographic over
    multi-indices (spectral) or grid nodes.  The representation written is
    the one the field was constructed with (spectral preferred if both).
    """
    if field._spectral is not None:
        rep, payload = REP_SPECTRAL, field.spectral
    else:
        rep, payload = REP_GRID, field.grid
    own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, "wb") if own else file
    try:
        fh.write(_HEADER.pack(field.basis.dimension, field.basis.modes_per_axis, rep))
        fh.write(np.ascontiguousarray(payload, dtype="<f8").tobytes())
    finally:
        if own:
            fh.close()


def load_field(file, basis: SpectralBasis) -> Field:
    """Read a field written by save_field; the basis must match the header."""
    own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, "rb") if own else file
    try:
        d, n, rep = _HEADER.unpack(fh.read(_HEADER.size))
        if (d, n) != (basis.dimension, basis.modes_per_axis):
            raise ValueError(
                f"file holds a d={d}, n={n} field; basis expects "
                f"d={basis.dimension}, n={basis.modes_per_axis}"
            )
        count = n**d
        payload = np.frombuffer(fh.read(8 * count), dtype="<f8", count=count)
        arr = payload.astype(np.float64).reshape((n,) * d)
    finally:
        if own:
            fh.close()
    if rep == REP_SPECTRAL:
        return Field(basis, spectral=arr)
    if rep == REP_GRID:
        return Field(basis, grid=arr)
    raise ValueError(f"unknown representation tag {rep}")


def field_to_bytes(field: Field) -> bytes:
    buf = io.BytesIO()
    save_field(field, buf)
    return buf.getvalue()
