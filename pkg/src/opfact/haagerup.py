"""Haagerup tensor norm on elements of M_{n,m}(X (x) Y) as a certified interval.

Upper bounds come from explicit two-factor witnesses optimized over an
invertible gauge on the inner index; the lower bound is the exact minimal
tensor norm.  All factorizations of a tensor with linearly independent factor
entries differ by such a gauge, so the gauge is the only search variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import (
    ConcreteOperatorSpace,
    InputError,
    MatrixElement,
    matrix_norm,
    min_tensor_norm,
    random_element,
    tensor_element,
)

RANK_RTOL = 1e-8


@dataclass
class HaagerupFactorization:
    """left (n x r over X) paired with right (r x m over Y)."""

    left: MatrixElement
    right: MatrixElement

    @property
    def inner_dim(self) -> int:
        return self.left.shape[1]

    def value(self) -> float:
        if self.inner_dim == 0:
            return 0.0
        return matrix_norm(self.left) * matrix_norm(self.right)

    def product_tensor(self) -> np.ndarray:
        """Coefficient tensor of the pairing sum_l x_il (x) y_lj."""
        return np.einsum("ilg,ljh->ijgh", self.left.coeffs, self.right.coeffs)


@dataclass
class GaugeOpts:
    restarts: int = 8
    iters: int = 500
    seed: int = 0


def initial_factorization(z, X, Y) -> HaagerupFactorization:
    """Canonical factorization with inner dimension = rank of the flattening."""
    z = np.asarray(z, dtype=complex)
    if z.ndim == 2:
        z = z[None, None]
    n, m = z.shape[:2]
    gx, gy = X.dim, Y.dim
    flat = z.transpose(0, 2, 1, 3).reshape(n * gx, m * gy)
    if not flat.any():
        left = MatrixElement(X, np.zeros((n, 0, gx)))
        right = MatrixElement(Y, np.zeros((0, m, gy)))
        return HaagerupFactorization(left, right)
    u, s, vh = np.linalg.svd(flat, full_matrices=False)
    r = int(np.sum(s > RANK_RTOL * s[0]))
    root = np.sqrt(s[:r])
    p = u[:, :r] * root
    q = root[:, None] * vh[:r]
    left = MatrixElement(X, p.reshape(n, gx, r).transpose(0, 2, 1))
    right = MatrixElement(Y, q.reshape(r, m, gy))
    return HaagerupFactorization(left, right)


def apply_gauge(fac: HaagerupFactorization, gauge: np.ndarray) -> HaagerupFactorization:
    ginv = np.linalg.inv(gauge)
    left = MatrixElement(fac.left.space, np.einsum("ilg,lm->img", fac.left.coeffs, gauge))
    right = MatrixElement(fac.right.space, np.einsum("lm,mjh->ljh", ginv, fac.right.coeffs))
    return HaagerupFactorization(left, right)


def optimize_gauge(norm_left, norm_right, k, rng, iters=500, eps0=0.25,
                   gauge0=None):
    """Minimize norm_left(G) * norm_right(inv(G)) over invertible k x k G.

    Multiplicative updates G <- G(I + eps Delta) with random finite-difference
    directions; the incumbent never increases.  Returns (best value, G).
    """
    g = np.eye(k, dtype=complex) if gauge0 is None else np.asarray(gauge0, dtype=complex)
    ginv = np.linalg.inv(g)
    best = norm_left(g) * norm_right(ginv)
    eps = eps0
    for _ in range(iters):
        if eps < 1e-9:
            break
        delta = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
        delta /= max(np.linalg.norm(delta), 1e-30)
        improved = False
        for sign in (1.0, -1.0):
            step = np.eye(k) + sign * eps * delta
            try:
                step_inv = np.linalg.inv(step)
            except np.linalg.LinAlgError:
                continue
            g_new = g @ step
            ginv_new = step_inv @ ginv
            val = norm_left(g_new) * norm_right(ginv_new)
            if val < best * (1 - 1e-12):
                g, ginv, best = g_new, ginv_new, val
                improved = True
                break
        eps *= 1.05 if improved else 0.85
    return best, g


@dataclass
class HaagerupResult:
    lower: float
    upper: float
    witness: HaagerupFactorization


def haagerup_norm(z, X, Y, opts: GaugeOpts | None = None) -> HaagerupResult:
    """Certified interval for the Haagerup norm of z over X (x) Y."""
    opts = opts or GaugeOpts()
    z = np.asarray(z, dtype=complex)
    if z.ndim == 2:
        z = z[None, None]
    fac = initial_factorization(z, X, Y)
    k = fac.inner_dim
    if k == 0:
        return HaagerupResult(0.0, 0.0, fac)

    rng = np.random.default_rng(opts.seed)

    def norm_left(g):
        return matrix_norm(MatrixElement(X, np.einsum("ilg,lm->img", fac.left.coeffs, g)))

    def norm_right(ginv):
        return matrix_norm(MatrixElement(Y, np.einsum("lm,mjh->ljh", ginv, fac.right.coeffs)))

    best_val = fac.value()
    best_gauge = np.eye(k, dtype=complex)
    for restart in range(max(opts.restarts, 1)):
        if restart == 0:
            g0 = np.eye(k, dtype=complex)
        else:
            g0 = np.eye(k) + 0.3 * (rng.standard_normal((k, k))
                                    + 1j * rng.standard_normal((k, k)))
        val, gauge = optimize_gauge(norm_left, norm_right, k, rng,
                                    iters=opts.iters, gauge0=g0)
        if val < best_val:
            best_val, best_gauge = val, gauge

    witness = apply_gauge(fac, best_gauge)
    nl, nr = matrix_norm(witness.left), matrix_norm(witness.right)
    if nl > 1e-300 and nr > 1e-300:
        s = np.sqrt(nr / nl)
        witness = apply_gauge(witness, s * np.eye(k))
    upper = witness.value()
    lower = min(min_tensor_norm(z, X, Y), upper)
    return HaagerupResult(lower, upper, witness)


# ---------------------------------------------------------------------------
# injectivity probe


def pad_embedding(space: ConcreteOperatorSpace, new_d: int) -> ConcreteOperatorSpace:
    """Embed a space into a larger ambient dimension via B -> B (+) 0."""
    if new_d < space.d:
        raise InputError("padded dimension must not shrink")
    basis = np.zeros((space.dim, new_d, new_d), dtype=complex)
    basis[:, : space.d, : space.d] = space.basis
    return ConcreteOperatorSpace(basis, unit_index=space.unit_index, is_system=False)


@dataclass
class ProbeReport:
    small: tuple[float, float]
    big: tuple[float, float]
    upper_gap: float
    overlap: bool


def injectivity_probe(X, Y, z, X_big, Y_big, opts: GaugeOpts | None = None,
                      tol: float = 1e-4) -> ProbeReport:
    """Compare the Haagerup interval computed in X, Y with the one computed in
    completely isometric superspaces.  The two intervals must overlap and the
    upper bounds must agree within `tol`."""
    opts = opts or GaugeOpts()
    rng = np.random.default_rng(opts.seed + 17)
    for small, big in ((X, X_big), (Y, Y_big)):
        if small.dim != big.dim:
            raise InputError("embedding must preserve the coefficient space")
        for trial in range(small.dim + 3):
            if trial < small.dim:
                c = np.zeros(small.dim, dtype=complex)
                c[trial] = 1.0
            else:
                c = rng.standard_normal(small.dim) + 1j * rng.standard_normal(small.dim)
            a = matrix_norm(MatrixElement(small, c[None, None]))
            b = matrix_norm(MatrixElement(big, c[None, None]))
            if abs(a - b) > 1e-9 * max(a, 1.0):
                raise InputError("embedding is not isometric on the sampled element")

    res_small = haagerup_norm(z, X, Y, opts)
    res_big = haagerup_norm(z, X_big, Y_big, opts)
    lo = max(res_small.lower, res_big.lower)
    hi = min(res_small.upper, res_big.upper)
    return ProbeReport(
        small=(res_small.lower, res_small.upper),
        big=(res_big.lower, res_big.upper),
        upper_gap=abs(res_small.upper - res_big.upper),
        overlap=lo <= hi + 1e-9,
    )
