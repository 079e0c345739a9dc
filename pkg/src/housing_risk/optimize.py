"""Derivative-free minimisation (Nelder-Mead).

:func:`nelder_mead` runs in Python for any callable. When ``fun`` is a
numba-compiled function the same algorithm runs compiled through
:func:`nelder_mead_jit`, with extra positional arguments in ``args``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numba
import numpy as np


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    evaluations: int
    iterations: int
    converged: bool
    diameter: float


def _coefficients(dim: int, adaptive: bool):
    # Gao & Han (2012) dimension-adapted coefficients behave better above ~5 dims
    if adaptive and dim > 1:
        return 1.0, 1.0 + 2.0 / dim, 0.75 - 1.0 / (2.0 * dim), 1.0 - 1.0 / dim
    return 1.0, 2.0, 0.5, 0.5


def _initial_simplex(x0, step):
    dim = x0.size
    sim = np.empty((dim + 1, dim))
    sim[0] = x0
    for k in range(dim):
        sim[k + 1] = x0
        sim[k + 1, k] += step[k] if step[k] != 0 else 0.00025
    return sim


def nelder_mead(fun, x0, step=0.1, xtol=1e-8, max_evals=20000, adaptive=True) -> SimplexResult:
    """Minimise ``fun`` from ``x0``.

    Stops when the largest vertex distance from the best vertex falls below
    ``xtol`` or after ``max_evals`` function evaluations. The returned point
    is never worse than ``x0``.
    """
    x0 = np.asarray(x0, float)
    dim = x0.size
    step = np.broadcast_to(np.asarray(step, float), (dim,))
    rho, chi, psi, sigma = _coefficients(dim, adaptive)
    sim = _initial_simplex(x0, step)
    fs = np.array([fun(v) for v in sim])
    evals = dim + 1
    iters = 0
    converged = False

    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diameter = float(np.max(np.linalg.norm(sim[1:] - sim[0], axis=1)))
        if diameter < xtol:
            converged = True
            break
        if evals >= max_evals:
            break
        iters += 1
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + rho * (centroid - sim[-1])
        fr = fun(xr)
        evals += 1
        if fr < fs[0]:
            xe = centroid + chi * (xr - centroid)
            fe = fun(xe)
            evals += 1
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            xc = centroid + psi * (xr - centroid)
            fc = fun(xc)
            evals += 1
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid - psi * (centroid - sim[-1])
            fc = fun(xc)
            evals += 1
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        sim[1:] = sim[0] + sigma * (sim[1:] - sim[0])
        fs[1:] = [fun(v) for v in sim[1:]]
        evals += dim

    return SimplexResult(sim[0].copy(), float(fs[0]), evals, iters, converged, diameter)


@functools.lru_cache(maxsize=None)
def compiled_nelder_mead(fun):
    """Compiled simplex loop specialised to the numba function ``fun``.

    Compiled once per process and objective (a few seconds); the on-disk
    numba cache cannot hold code that closes over another dispatcher.
    """

    @numba.njit(nogil=True)
    def _nm_core(args, sim, xtol, max_evals, rho, chi, psi, sigma):
        npts, dim = sim.shape
        fs = np.empty(npts)
        for k in range(npts):
            fs[k] = fun(sim[k], *args)
        evals = npts
        iters = 0
        converged = False
        diameter = np.inf
        while True:
            order = np.argsort(fs, kind="mergesort")
            sim = sim[order]
            fs = fs[order]
            diameter = 0.0
            for k in range(1, npts):
                d = np.sqrt(np.sum((sim[k] - sim[0]) ** 2))
                if d > diameter:
                    diameter = d
            if diameter < xtol:
                converged = True
                break
            if evals >= max_evals:
                break
            iters += 1
            centroid = np.zeros(dim)
            for k in range(npts - 1):
                centroid += sim[k]
            centroid /= npts - 1
            xr = centroid + rho * (centroid - sim[-1])
            fr = fun(xr, *args)
            evals += 1
            if fr < fs[0]:
                xe = centroid + chi * (xr - centroid)
                fe = fun(xe, *args)
                evals += 1
                if fe < fr:
                    sim[-1] = xe
                    fs[-1] = fe
                else:
                    sim[-1] = xr
                    fs[-1] = fr
                continue
            if fr < fs[-2]:
                sim[-1] = xr
                fs[-1] = fr
                continue
            if fr < fs[-1]:
                xc = centroid + psi * (xr - centroid)
                fc = fun(xc, *args)
                evals += 1
                if fc <= fr:
                    sim[-1] = xc
                    fs[-1] = fc
                    continue
            else:
                xc = centroid - psi * (centroid - sim[-1])
                fc = fun(xc, *args)
                evals += 1
                if fc < fs[-1]:
                    sim[-1] = xc
                    fs[-1] = fc
                    continue
            for k in range(1, npts):
                sim[k] = sim[0] + sigma * (sim[k] - sim[0])
                fs[k] = fun(sim[k], *args)
            evals += dim
        return sim[0].copy(), fs[0], evals, iters, converged, diameter

    return _nm_core


def nelder_mead_jit(fun, x0, args=(), step=0.1, xtol=1e-8, max_evals=20000, adaptive=True) -> SimplexResult:
    """Compiled Nelder-Mead for a numba function ``fun(x, *args)``."""
    x0 = np.asarray(x0, float)
    step = np.ascontiguousarray(np.broadcast_to(np.asarray(step, float), (x0.size,)))
    sim = _initial_simplex(x0, step)
    core = compiled_nelder_mead(fun)
    x, f, evals, iters, conv, diam = core(tuple(args), sim, float(xtol), int(max_evals),
                                          *_coefficients(x0.size, adaptive))
    return SimplexResult(x, float(f), int(evals), int(iters), bool(conv), float(diam))
