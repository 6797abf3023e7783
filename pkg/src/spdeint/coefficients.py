"""Pointwise drift/diffusion coefficients and the Milstein correction term.

Drift and diffusion act as composition operators: a scalar integrand
phi(x, y) is applied nodewise as phi(x_k, v(x_k)).  Diffusion is the
multiplication operator u -> b(., v) * u, so a scheme only ever needs the
scalar factor b(., v) and, for the correction term, its partial derivative
in y (supplied analytically; see `derivative_mismatch` for the finite
difference guard against transcription slips).

Integrand signature: ``phi(x, y)`` with x a tuple of coordinate arrays (one
per axis) and y the field values.  Writing integrands with plain arithmetic
keeps one definition usable both vectorized on numpy arrays and scalar
inside the numba kernels.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .basis import Field


@dataclass(frozen=True)
class NemytskiiPair:
    """Scalar integrands (drift, diffusion factor, its y-derivative)."""

    drift: Callable
    diffusion: Callable
    diffusion_dy: Callable

    def evaluate(self, which, basis, values):
        fn = getattr(self, which)
        out = fn(basis.grid_coords(), values)
        return np.broadcast_to(np.asarray(out, dtype=np.float64), basis.shape)


def eval_drift(pair: NemytskiiPair, v: Field) -> Field:
    """Nodewise drift f(x_k, v(x_k))."""
    return Field(v.basis, grid=pair.evaluate("drift", v.basis, v.grid))


def eval_diffusion_factor(pair: NemytskiiPair, v: Field) -> Field:
    """Nodewise multiplication factor b(x_k, v(x_k)); the caller multiplies
    it by a noise increment field."""
    return Field(v.basis, grid=pair.evaluate("diffusion", v.basis, v.grid))


def eval_milstein_correction(pair: NemytskiiPair, v: Field, dw: Field, quad: Field) -> Field:
    """Second-order noise term 0.5 * b_y(.,v) * b(.,v) * (dW^2 - quad), nodewise."""
    basis = v.basis
    if dw.basis.shape != basis.shape or quad.basis.shape != basis.shape:
        raise ValueError("field shapes do not match")
    vals = v.grid
    b = pair.evaluate("diffusion", basis, vals)
    by = pair.evaluate("diffusion_dy", basis, vals)
    w = dw.grid
    return Field(basis, grid=(0.5 * by) * b * (w * w - quad.grid))


def derivative_mismatch(pair: NemytskiiPair, xs, ys, step: float = 1e-6) -> float:
    """Max relative error of the analytic diffusion_dy against a central
    finite difference of the diffusion factor, over sample points (xs, ys)."""
    xs = tuple(np.asarray(a, dtype=np.float64) for a in xs)
    ys = np.asarray(ys, dtype=np.float64)
    exact = np.asarray(pair.diffusion_dy(xs, ys), dtype=np.float64)
    approx = (pair.diffusion(xs, ys + step) - pair.diffusion(xs, ys - step)) / (2.0 * step)
    scale = np.maximum(np.abs(exact), 1.0)
    return float(np.max(np.abs(exact - approx) / scale))
