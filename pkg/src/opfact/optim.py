"""Shared derivative-free minimization for small convex objectives."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


def pattern_polish(f, x0, scale, tol=1e-12, max_sweeps=120):
    """Coordinate + random-direction pattern search with shrinking steps.

    On a convex objective this polishes a Nelder-Mead result down to the
    requested step tolerance.
    """
    x = np.asarray(x0, dtype=float).copy()
    fx = f(x)
    n = x.size
    delta = scale
    rng = np.random.default_rng(0)
    sweeps = 0
    while delta > tol and sweeps < max_sweeps:
        improved = False
        dirs = list(np.eye(n))
        for _ in range(max(2, n // 2)):
            v = rng.standard_normal(n)
            dirs.append(v / np.linalg.norm(v))
        for dvec in dirs:
            for sgn in (1.0, -1.0):
                cand = x + sgn * delta * dvec
                fc = f(cand)
                if fc < fx - 1e-15:
                    x, fx = cand, fc
                    improved = True
        delta *= 1.0 if improved else 0.5
        sweeps += 1
    return x, fx


def convex_min(f, dim, scale, restarts=3, seed=0, budget="precise"):
    """Multistart Nelder-Mead plus pattern polish."""
    rng = np.random.default_rng(seed)
    best_x, best_f = np.zeros(dim), f(np.zeros(dim))
    starts = [np.zeros(dim)]
    if budget == "precise":
        for _ in range(restarts - 1):
            starts.append(0.5 * scale * rng.standard_normal(dim))
        nm_iters, sweeps = 600 * dim, 120
    else:
        nm_iters, sweeps = 80 * dim, 25
    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead",
                       options=dict(xatol=1e-12, fatol=1e-13,
                                    maxiter=nm_iters, maxfev=nm_iters))
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
    best_x, best_f = pattern_polish(f, best_x, max(scale * 0.1, 1e-3),
                                    max_sweeps=sweeps)
    return best_x, best_f
