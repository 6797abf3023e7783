"""Numba-compiled trajectory kernels.

One kernel per spatial dimension runs the whole time loop in nopython mode:
per step it synthesizes grid values, evaluates the pointwise coefficients,
combines drift, noise and (for the second-order scheme) the correction
term, transforms back and applies the diagonal linear propagator.  The
noise grid increments and all diagonal factor arrays are precomputed by the
caller, so the kernels see exactly the same inputs as the pure-numpy loop
in :mod:`spdeint.schemes` and mirror its arithmetic order.

Kernels are built per coefficient pair (the scalar integrands are jitted
and closed over), cached on the pair's function objects, and compiled with
``nogil`` so Monte Carlo paths can run on a thread pool.
"""

import numpy as np
from numba import njit

MILSTEIN, IMPLICIT_EULER, EXPONENTIAL_EULER, SPLITTING = 0, 1, 2, 3

_jitted = {}
_kernels = {}


def _jit_scalar(fn):
    if fn not in _jitted:
        _jitted[fn] = njit(fn)
    return _jitted[fn]


def trajectory_kernel(pair, dimension):
    """Compiled trajectory loop specialized to a coefficient pair."""
    key = (pair.drift, pair.diffusion, pair.diffusion_dy, dimension)
    if key not in _kernels:
        f = _jit_scalar(pair.drift)
        b = _jit_scalar(pair.diffusion)
        by = _jit_scalar(pair.diffusion_dy)
        builder = _build_1d if dimension == 1 else _build_2d
        _kernels[key] = builder(f, b, by)
    return _kernels[key]


def _build_1d(f, b, by):
    @njit(nogil=True)
    def run(c0, dw, quad, semi, resol, smat, dermat, x1, h, scheme, burgers):
        n = c0.shape[0]
        steps = dw.shape[0]
        sq2 = np.sqrt(2.0)
        fwd = sq2 / (n + 1.0)
        c = c0.copy()
        u = np.empty(n)
        for m in range(steps):
            v = sq2 * np.dot(smat, c)
            dwm = dw[m]
            if scheme == SPLITTING:
                for k in range(n):
                    u[k] = np.exp(dwm[k] - 0.5 * quad[k]) * v[k]
            elif burgers:
                vx = sq2 * np.dot(dermat, c)
                for k in range(n):
                    y = v[k]
                    bv = b((x1[k],), y)
                    acc = y + h * -(y * vx[k]) + bv * dwm[k]
                    if scheme == MILSTEIN:
                        acc = acc + (0.5 * by((x1[k],), y)) * bv * (dwm[k] * dwm[k] - quad[k])
                    u[k] = acc
            else:
                for k in range(n):
                    y = v[k]
                    bv = b((x1[k],), y)
                    acc = y + h * f((x1[k],), y) + bv * dwm[k]
                    if scheme == MILSTEIN:
                        acc = acc + (0.5 * by((x1[k],), y)) * bv * (dwm[k] * dwm[k] - quad[k])
                    u[k] = acc
            c = fwd * np.dot(smat, u)
            if scheme == IMPLICIT_EULER:
                c = c / resol
            else:
                c = semi * c
            for k in range(n):
                if not np.isfinite(c[k]):
                    return c, m
        return c, -1

    return run


def _build_2d(f, b, by):
    @njit(nogil=True)
    def run(c0, dw, quad, semi, resol, smat, x1g, x2g, h, scheme):
        n = c0.shape[0]
        steps = dw.shape[0]
        fwd = 2.0 / (n + 1.0) ** 2
        c = c0.copy()
        u = np.empty((n, n))
        for m in range(steps):
            v = 2.0 * np.dot(np.dot(smat, c), smat)
            dwm = dw[m]
            if scheme == SPLITTING:
                for k1 in range(n):
                    for k2 in range(n):
                        u[k1, k2] = np.exp(dwm[k1, k2] - 0.5 * quad[k1, k2]) * v[k1, k2]
            else:
                for k1 in range(n):
                    for k2 in range(n):
                        y = v[k1, k2]
                        x = (x1g[k1, k2], x2g[k1, k2])
                        bv = b(x, y)
                        acc = y + h * f(x, y) + bv * dwm[k1, k2]
                        if scheme == MILSTEIN:
                            w = dwm[k1, k2]
                            acc = acc + (0.5 * by(x, y)) * bv * (w * w - quad[k1, k2])
                        u[k1, k2] = acc
            c = fwd * np.dot(np.dot(smat, u), smat)
            if scheme == IMPLICIT_EULER:
                c = c / resol
            else:
                c = semi * c
            ok = True
            for k1 in range(n):
                for k2 in range(n):
                    if not np.isfinite(c[k1, k2]):
                        ok = False
            if not ok:
                return c, m
        return c, -1

    return run
