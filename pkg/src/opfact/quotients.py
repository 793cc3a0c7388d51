"""Quotient norms: exact operator-space quotient by convex minimization over
the kernel coset, lower bounds for the system/unital quotients via ucp maps
killing the kernel (parametrized by Choi matrices on a spectrahedron), and
product-quotient upper bounds through the factorization engine.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .spaces import (
    InputError,
    MatrixElement,
    element,
    matrix_norm,
    realize,
    spectral_norm,
)
from .products import PartialProduct, ProductBlock, partial_product
from .factnorm import EngineOpts, FactorizationWitness, NormInterval, fact_norm_upper
from .optim import convex_min

CERT_TOL = 1e-9


class OsyKernelError(ValueError):
    """No ucp map at the requested output dimension annihilates the span."""


# ---------------------------------------------------------------------------
# Choi-matrix maps: phi(X) = Tr_A[ C (X^T (x) I_d) ]


@dataclass
class ChoiMap:
    d: int
    choi: np.ndarray     # (damb*d, damb*d)

    def as4(self, damb):
        return self.choi.reshape(damb, self.d, damb, self.d)


def apply_choi(choi: np.ndarray, x_mat: np.ndarray, d: int) -> np.ndarray:
    damb = x_mat.shape[0]
    c4 = choi.reshape(damb, d, damb, d)
    return np.einsum("akcl,ac->kl", c4, x_mat)


def apply_choi_element(choi: np.ndarray, x: MatrixElement, d: int) -> np.ndarray:
    """Entrywise application, returning an (n d, k d) block matrix."""
    n, k = x.shape
    damb = x.space.d
    out = np.zeros((n * d, k * d), dtype=complex)
    for i in range(n):
        for j in range(k):
            ent = np.einsum("g,gab->ab", x.coeffs[i, j], x.space.basis)
            out[i * d:(i + 1) * d, j * d:(j + 1) * d] = apply_choi(choi, ent, d)
    return out


def identity_choi(damb: int) -> np.ndarray:
    """|Omega><Omega| with Omega = sum_i e_i (x) e_i realizes phi = id."""
    om = np.zeros((damb * damb,), dtype=complex)
    for i in range(damb):
        om[i * damb + i] = 1.0
    return np.outer(om, om.conj())


def depolarizing_choi(damb: int, d: int) -> np.ndarray:
    """phi(X) = tr(X)/damb * I_d; always ucp."""
    return np.kron(np.eye(damb), np.eye(d)) / damb


@dataclass
class KernelSubspace:
    space: object
    span: np.ndarray                      # (r, dim) coefficient vectors
    certificate: ChoiMap | None = None
    is_product_certificate: bool = False

    def __post_init__(self):
        self.span = np.asarray(self.span, dtype=complex)
        if self.span.ndim != 2 or self.span.shape[1] != self.space.dim:
            raise InputError("kernel span must be (r, dim) coefficients")
        if self.certificate is not None:
            _check_certificate(self)

    @property
    def rank(self) -> int:
        if self.span.shape[0] == 0:
            return 0
        sv = np.linalg.svd(self.span, compute_uv=False)
        return int(np.sum(sv > 1e-10 * max(sv[0], 1e-300)))


def _check_certificate(kernel: KernelSubspace):
    cert = kernel.certificate
    damb = kernel.space.d
    c = cert.choi
    ev = np.linalg.eigvalsh(0.5 * (c + c.conj().T))
    if ev[0] < -CERT_TOL * max(abs(ev[-1]), 1.0):
        raise InputError("certificate Choi matrix is not PSD")
    pt = np.einsum("akal->kl", c.reshape(damb, cert.d, damb, cert.d))
    if np.linalg.norm(pt - np.eye(cert.d)) > 1e-8:
        raise InputError("certificate is not unital")
    for j in kernel.span:
        img = apply_choi(c, realize(element(kernel.space, j)), cert.d)
        if np.linalg.norm(img) > CERT_TOL * max(np.linalg.norm(j), 1.0):
            raise InputError("certificate does not annihilate the kernel span")


# ---------------------------------------------------------------------------
# convex minimization helpers (multistart Nelder-Mead + pattern polish)


def osp_quotient_norm(x: MatrixElement, kernel: KernelSubspace,
                      restarts: int = 3, seed: int = 0,
                      budget: str = "precise") -> float:
    """inf over j in M_n(J) of ||x + j||, exact up to the solver tolerance.

    The objective is the largest singular value of an affine matrix family,
    hence convex in the coset coefficients.
    """
    span = kernel.span
    r = span.shape[0]
    if r == 0:
        return matrix_norm(x)
    n, k = x.shape
    dim = 2 * n * k * r

    def f(v):
        c = (v[: n * k * r] + 1j * v[n * k * r:]).reshape(n, k, r)
        coeffs = x.coeffs + np.einsum("ijr,rg->ijg", c, span)
        return matrix_norm(MatrixElement(x.space, coeffs))

    scale = max(matrix_norm(x), 1.0)
    _, best = convex_min(f, dim, scale, restarts=restarts, seed=seed,
                         budget=budget)
    return float(best)


def frobenius_coset_norm(x: MatrixElement, span: np.ndarray) -> float:
    """Norm of the Frobenius-minimal coset representative; a cheap surrogate
    for the operator-space quotient norm used to steer refinements."""
    span = np.asarray(span, dtype=complex)
    if span.shape[0] == 0:
        return matrix_norm(x)
    n, k = x.shape
    flat = x.coeffs.reshape(n * k, -1)
    c, *_ = np.linalg.lstsq(span.T, flat.T, rcond=None)
    red = flat - (span.T @ c).T
    return matrix_norm(MatrixElement(x.space, red.reshape(x.coeffs.shape)))


# ---------------------------------------------------------------------------
# ucp lower bounds on a Choi spectrahedron


def _herm_vec(h):
    """Real coordinates of a Hermitian matrix (orthonormal basis)."""
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    return np.concatenate([np.diag(h).real,
                           np.sqrt(2.0) * h[iu].real,
                           np.sqrt(2.0) * h[iu].imag])


def _herm_unvec(v, n):
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = v[:n]
    h[iu] = (v[n:n + m] + 1j * v[n + m:]) / np.sqrt(2.0)
    h = h + np.triu(h, 1).conj().T
    return h


class _ChoiFeasible:
    """Affine slice {C hermitian: unital, kills the span} with PSD projection."""

    def __init__(self, space, span, d):
        self.space = space
        self.d = d
        self.damb = space.d
        self.D = self.damb * d
        dim = self.D ** 2
        rows = []
        rhs = []
        basis_idx = np.eye(dim)
        # evaluate each constraint on the hermitian basis
        herm_basis = [_herm_unvec(basis_idx[i], self.D) for i in range(dim)]
        pt_maps = [np.einsum("akal->kl", h.reshape(self.damb, d, self.damb, d))
                   for h in herm_basis]
        for k in range(d):
            for l in range(d):
                rows.append([pt_maps[i][k, l].real for i in range(dim)])
                rhs.append(1.0 if k == l else 0.0)
                rows.append([pt_maps[i][k, l].imag for i in range(dim)])
                rhs.append(0.0)
        for j in np.asarray(span, dtype=complex):
            xj = realize(element(space, j))
            imgs = [apply_choi(h, xj, d) for h in herm_basis]
            for k in range(d):
                for l in range(d):
                    rows.append([imgs[i][k, l].real for i in range(dim)])
                    rhs.append(0.0)
                    rows.append([imgs[i][k, l].imag for i in range(dim)])
                    rhs.append(0.0)
        amat = np.asarray(rows)
        b = np.asarray(rhs)
        self.v0, *_ = np.linalg.lstsq(amat, b, rcond=None)
        self.affine_resid = float(np.linalg.norm(amat @ self.v0 - b))
        u, s, vh = np.linalg.svd(amat, full_matrices=True)
        rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
        self.null = vh[rank:].T       # (dim, nullity)

    def project_affine(self, v):
        return self.v0 + self.null @ (self.null.T @ (v - self.v0))

    def project_psd(self, v):
        c = _herm_unvec(v, self.D)
        w, q = np.linalg.eigh(c)
        w = np.clip(w, 0.0, None)
        return _herm_vec((q * w) @ q.conj().T)

    def feasible_point(self, v, iters=500, tol=1e-11):
        for _ in range(iters):
            v = self.project_affine(v)
            vp = self.project_psd(v)
            if np.linalg.norm(vp - v) < tol:
                return self.project_affine(vp), 0.0
            v = vp
        va = self.project_affine(v)
        gap = np.linalg.norm(self.project_psd(va) - va)
        return va, float(gap)


def _choi_value_grad(cmat, x: MatrixElement, d: int):
    big = apply_choi_element(cmat, x, d)
    u, s, vh = np.linalg.svd(big)
    val = float(s[0]) if s.size else 0.0
    if val <= 0:
        return 0.0, np.zeros_like(cmat)
    uv = u[:, 0].reshape(x.shape[0], d)
    wv = vh[0].conj().reshape(x.shape[1], d)
    damb = x.space.d
    grad = np.zeros((damb, d, damb, d), dtype=complex)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            ent = np.einsum("g,gab->ab", x.coeffs[i, j], x.space.basis)
            grad += np.einsum("k,l,ac->akcl", uv[i].conj(), wv[j], ent)
    g = grad.reshape(cmat.shape)
    return val, 0.5 * (g + g.conj().T)


def ucp_quotient_lower(x: MatrixElement, kernel: KernelSubspace, d: int,
                       restarts: int = 4, seed: int = 0,
                       ascent_iters: int = 200) -> float:
    """max ||phi(x)|| over sampled ucp phi: V -> M_d with J in ker(phi).

    Every reported value comes from a Choi matrix polished to feasibility
    within 1e-9, so it is a certified lower bound for the osy quotient norm.
    """
    if not x.space.is_system:
        raise InputError("ucp lower bounds need an operator system")
    if d < 1:
        raise InputError("output dimension must be >= 1")
    feas = _ChoiFeasible(x.space, kernel.span, d)
    D = feas.D
    rng = np.random.default_rng(seed)

    starts = []
    if d == x.space.d:
        starts.append(_herm_vec(identity_choi(x.space.d)))
    starts.append(_herm_vec(depolarizing_choi(x.space.d, d)))
    if kernel.certificate is not None and kernel.certificate.d == d:
        starts.append(_herm_vec(kernel.certificate.choi))
    for _ in range(restarts):
        h = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
        starts.append(_herm_vec(h @ h.conj().T / D))

    best = -1.0
    any_feasible = False
    for v_start in starts:
        v, gap = feas.feasible_point(v_start)
        if gap > 1e-7:
            continue
        any_feasible = True
        step = 0.3
        cur, _ = _choi_value_grad(_herm_unvec(v, D), x, d)
        for _ in range(ascent_iters):
            if step < 1e-9:
                break
            val, grad = _choi_value_grad(_herm_unvec(v, D), x, d)
            gv = feas.null @ (feas.null.T @ _herm_vec(grad))
            nrm = np.linalg.norm(gv)
            if nrm < 1e-14:
                break
            cand, gap = feas.feasible_point(v + step * gv / nrm, iters=200)
            if gap <= 1e-9:
                cval, _ = _choi_value_grad(_herm_unvec(cand, D), x, d)
                if cval > cur + 1e-13:
                    v, cur = cand, cval
                    step *= 1.1
                    continue
            step *= 0.6
        v, gap = feas.feasible_point(v)
        if gap <= 1e-9:
            val, _ = _choi_value_grad(_herm_unvec(v, D), x, d)
            best = max(best, val)
    if not any_feasible:
        raise OsyKernelError(f"not an osy kernel at dimension {d}")
    return float(best)


# ---------------------------------------------------------------------------
# product quotients


def _check_product_certificate(kernel: KernelSubspace, m: PartialProduct):
    cert = kernel.certificate
    if cert is None or not kernel.is_product_certificate:
        raise InputError("kernel has no product certificate")
    d = cert.d
    space = kernel.space
    for bi, blk in enumerate(m.blocks):
        for a in range(blk.left.shape[0]):
            pa = apply_choi(cert.choi, realize(element(space, blk.left[a])), d)
            for b in range(blk.right.shape[0]):
                pb = apply_choi(cert.choi, realize(element(space, blk.right[b])), d)
                pm = apply_choi(cert.choi, realize(element(space, blk.table[a, b])), d)
                err = np.linalg.norm(pa @ pb - pm)
                if err > 1e-8 * max(np.linalg.norm(pm), 1.0):
                    raise InputError(
                        f"certificate is not a product map on block {bi}, pair ({a},{b})")


def quotient_product(m: PartialProduct, kernel: KernelSubspace) -> PartialProduct:
    """Induced product on coset representatives: every domain block (the unit
    blocks included) is enlarged by the kernel span, kernel directions
    multiply to zero, and all values are reduced to the canonical
    kernel-complement representative.  The reduction keeps the table
    consistent on the (now linearly dependent) spanning families, which is
    exactly the ideal-like condition a product kernel satisfies.  The result
    is unital only modulo the kernel, so it bypasses the standard builder and
    is validated against the coset."""
    span = np.asarray(kernel.span, dtype=complex)
    r = span.shape[0]
    if r == 0:
        return m
    g = m.space.dim
    q, _ = np.linalg.qr(span.conj().T)     # orthonormal basis of the span

    def proj(v):
        return v - q @ (q.conj().T @ v)

    new_blocks = []
    for blk in m.blocks:
        nl, nr = blk.left.shape[0], blk.right.shape[0]
        left = np.vstack([blk.left, span])
        right = np.vstack([blk.right, span])
        table = np.zeros((nl + r, nr + r, g), dtype=complex)
        for a in range(nl):
            for b in range(nr):
                table[a, b] = proj(blk.table[a, b])
        new_blocks.append(ProductBlock(left, right, table))
    mq = PartialProduct(m.space, new_blocks)
    _validate_quotient_product(mq, proj)
    return mq


def _validate_quotient_product(mq: PartialProduct, proj, samples=6, seed=0):
    rng = np.random.default_rng(seed)
    g = mq.dim
    e = np.zeros(g, dtype=complex)
    e[mq.space.unit_index] = 1.0
    for _ in range(samples):
        x = rng.standard_normal(g) + 1j * rng.standard_normal(g)
        for got in (mq.pair_value(e, x), mq.pair_value(x, e)):
            if got is None or np.linalg.norm(proj(got - x)) > 1e-9 * max(
                    np.linalg.norm(x), 1.0):
                raise InputError("quotient product is not unital modulo the kernel")
    for blk in mq.blocks:
        nl, nr = blk.left.shape[0], blk.right.shape[0]
        cy = rng.standard_normal(nr) + 1j * rng.standard_normal(nr)
        ca, cb = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        y = blk.right.T @ cy
        a_ = blk.left[rng.integers(nl)]
        b_ = blk.left[rng.integers(nl)]
        lhs = mq.pair_value(ca * a_ + cb * b_, y)
        va, vb = mq.pair_value(a_, y), mq.pair_value(b_, y)
        if lhs is None or va is None or vb is None:
            raise InputError("quotient product domain lost a sampled pair")
        rhs = ca * va + cb * vb
        if np.linalg.norm(proj(lhs - rhs)) > 1e-9 * max(np.linalg.norm(rhs), 1.0):
            raise InputError("quotient product is not bilinear modulo the kernel")


def product_quotient_upper(x: MatrixElement, kernel: KernelSubspace,
                           m: PartialProduct, L: int = 6,
                           opts: EngineOpts | None = None) -> NormInterval:
    """Upper bound for the product-quotient norm of x + K via the
    factorization engine with the induced quotient product and the exact
    operator-space quotient norm as the factor base norm; lower bound from
    the product certificate."""
    opts = opts or EngineOpts()
    _check_product_certificate(kernel, m)
    mq = quotient_product(m, kernel)

    def base(y: MatrixElement) -> float:
        return osp_quotient_norm(y, kernel, restarts=2, seed=opts.seed,
                                 budget="fast")

    def steer(y: MatrixElement) -> float:
        return frobenius_coset_norm(y, kernel.span)

    eng = replace(opts, mod_span=kernel.span, fast_norm=steer)
    witness = fact_norm_upper(x, mq, base, L, eng)
    # recompute the chosen witness value at full precision
    precise = [osp_quotient_norm(f, kernel, restarts=3, seed=opts.seed)
               for f in witness.factors]
    witness = FactorizationWitness(witness.factors, float(np.prod(precise)),
                                   witness.target)
    upper = witness.value
    cert = kernel.certificate
    lower = float(spectral_norm(apply_choi_element(cert.choi, x, cert.d)))
    lower = min(lower, upper)
    return NormInterval(lower, upper, witness,
                        {"kind": "product-certificate", "d": cert.d})
