"""Factorization-norm engine: certified upper bounds from bounded-length
permissible factorizations, lower bounds from explicit product
representations, and the unital / commuting specializations.

The searcher seeds factorizations structurally (block-bilinear splits of a
factor, including the unit blocks, plus detection of block-diagonal targets)
and refines the free inner index between adjacent factors with the same
invertible-gauge descent used for the Haagerup norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .haagerup import optimize_gauge
from .spaces import (
    InputError,
    MatrixElement,
    element,
    matrix_norm,
    min_tensor_norm,
    realize,
    tensor_element,
    tensor_space,
    unit_element,
)
from .products import (
    PartialProduct,
    ProductBlock,
    commuting_product,
    is_permissible,
    is_valid_pair,
    odot,
    trivial_product,
)

SPLIT_RTOL = 1e-9
WITNESS_TOL = 1e-8


@dataclass
class FactorizationWitness:
    factors: list[MatrixElement]
    value: float
    target: MatrixElement

    def __post_init__(self):
        self.value = float(self.value)


@dataclass
class NormInterval:
    lower: float
    upper: float
    upper_witness: FactorizationWitness | None = None
    lower_witness: dict | None = None

    def __post_init__(self):
        if self.lower > self.upper + 1e-9:
            raise InputError("certified interval is inverted")


@dataclass
class EngineOpts:
    beam_width: int = 6
    refine_iters: int = 400
    refine_restarts: int = 2
    seed: int = 0
    factor_filter: callable = None     # per-factor admissibility predicate
    fast_norm: callable = None         # cheap surrogate used inside refinement
    hints: tuple = ()                  # extra candidate factor tuples
    validate: bool = True
    mod_span: np.ndarray | None = None  # quotient search: equality modulo span


def _chain_value(factors, base_norm) -> float:
    return float(np.prod([base_norm(f) for f in factors])) if factors else 0.0


def _chain_admissible(factors, flt) -> bool:
    return flt is None or all(flt(f) for f in factors)


def _block_split(x: MatrixElement, blk: ProductBlock, mod_span=None):
    """Factor x = B (.) C through one domain block, or None.

    Solves the per-entry bilinear system on the block table, then takes a
    rank-revealing factorization of the flattened solution; the inner
    dimension is the detected rank.  With `mod_span` the split may reproduce
    the target only modulo that subspace (quotient searches).
    """
    n, k = x.shape
    nl, nr = blk.left.shape[0], blk.right.shape[0]
    g = x.coeffs.shape[2]
    t2 = blk.table.reshape(nl * nr, g)
    scale = max(np.linalg.norm(x.coeffs), 1.0)
    lhs = t2.T
    if mod_span is not None and len(mod_span):
        lhs = np.hstack([t2.T, np.asarray(mod_span, dtype=complex).T])
    sol_full, *_ = np.linalg.lstsq(lhs, x.coeffs.reshape(n * k, g).T, rcond=None)
    resid = np.linalg.norm(lhs @ sol_full - x.coeffs.reshape(n * k, g).T)
    if resid > 1e-8 * scale:
        return None
    sol = sol_full[: nl * nr]
    m_full = sol.T.reshape(n, k, nl, nr)
    flat = m_full.transpose(0, 2, 1, 3).reshape(n * nl, k * nr)
    if not flat.any():
        left = MatrixElement(x.space, np.zeros((n, 0, g)))
        right = MatrixElement(x.space, np.zeros((0, k, g)))
        return left, right
    u, s, vh = np.linalg.svd(flat, full_matrices=False)
    r = int(np.sum(s > SPLIT_RTOL * s[0]))
    root = np.sqrt(s[:r])
    p = (u[:, :r] * root).reshape(n, nl, r)
    q = (root[:, None] * vh[:r]).reshape(r, k, nr)
    left = MatrixElement(x.space, np.einsum("iay,ag->iyg", p, blk.left))
    right = MatrixElement(x.space, np.einsum("yjb,bg->yjg", q, blk.right))
    return left, right


def _refine_pair(left, right, norm_fn, rng, iters, restarts):
    """Gauge-refine an adjacent factor pair; mixing stays inside the split's
    block spans so validity is preserved structurally."""
    k = left.shape[1]
    if k == 0:
        return left, right

    def norm_left(g):
        return norm_fn(MatrixElement(left.space,
                                     np.einsum("ilg,lm->img", left.coeffs, g)))

    def norm_right(ginv):
        return norm_fn(MatrixElement(right.space,
                                     np.einsum("lm,mjh->ljh", ginv, right.coeffs)))

    best_val = norm_left(np.eye(k)) * norm_right(np.eye(k))
    best_g = np.eye(k, dtype=complex)
    for restart in range(max(restarts, 1)):
        g0 = np.eye(k, dtype=complex)
        if restart:
            g0 = g0 + 0.3 * (rng.standard_normal((k, k))
                             + 1j * rng.standard_normal((k, k)))
        val, gg = optimize_gauge(norm_left, norm_right, k, rng,
                                 iters=iters, gauge0=g0)
        if val < best_val:
            best_val, best_g = val, gg
    ginv = np.linalg.inv(best_g)
    new_left = MatrixElement(left.space,
                             np.einsum("ilg,lm->img", left.coeffs, best_g))
    new_right = MatrixElement(right.space,
                              np.einsum("lm,mjh->ljh", ginv, right.coeffs))
    nl_, nr_ = norm_fn(new_left), norm_fn(new_right)
    if nl_ > 1e-300 and nr_ > 1e-300:
        s = math.sqrt(nr_ / nl_)
        new_left = MatrixElement(left.space, new_left.coeffs * s)
        new_right = MatrixElement(right.space, new_right.coeffs / s)
    return new_left, new_right


def _support_components(x: MatrixElement, tol=1e-12):
    """Connected components of the row/column support graph."""
    n, k = x.shape
    mags = np.linalg.norm(x.coeffs, axis=2)
    parent = list(range(n + k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        parent[find(i)] = find(j)

    scale = max(mags.max(initial=0.0), 1.0)
    for i in range(n):
        for j in range(k):
            if mags[i, j] > tol * scale:
                union(i, n + j)
    groups = {}
    for i in range(n + k):
        groups.setdefault(find(i), []).append(i)
    comps = []
    for members in groups.values():
        rows = [i for i in members if i < n]
        cols = [i - n for i in members if i >= n]
        if rows or cols:
            comps.append((sorted(rows), sorted(cols)))
    return [c for c in comps if c[0] and c[1]]


def _pad_factors(factors, space, length):
    """Append unit factors so the chain has `length` factors."""
    out = list(factors)
    while len(out) < length:
        k = out[-1].shape[1] if out else 1
        out.append(unit_element(space, k))
    return out


def combine_direct_sum(factors_a, factors_b, space, base_norm):
    """diag-combine two chains after padding and per-factor renormalization,
    realizing max(value a, value b) for the direct sum of the targets."""
    n = max(len(factors_a), len(factors_b), 1)
    fa = _pad_factors(factors_a, space, n)
    fb = _pad_factors(factors_b, space, n)

    def renorm(fs):
        vals = [base_norm(f) for f in fs]
        total = float(np.prod(vals))
        if total <= 0:
            return fs
        target = total ** (1.0 / n)
        out = []
        for f, v in zip(fs, vals):
            if v <= 0:
                out.append(f)
            else:
                out.append(MatrixElement(space, f.coeffs * (target / v)))
        return out

    fa, fb = renorm(fa), renorm(fb)
    combined = []
    for a, b in zip(fa, fb):
        na, ka = a.shape
        nb, kb = b.shape
        c = np.zeros((na + nb, ka + kb, space.dim), dtype=complex)
        c[:na, :ka] = a.coeffs
        c[na:, ka:] = b.coeffs
        combined.append(MatrixElement(space, c))
    return combined


def _validate_witness(factors, target, m, mod_span=None) -> bool:
    res = is_permissible(factors, m)
    if not res.permissible:
        return False
    scale = max(np.linalg.norm(target.coeffs), 1.0)
    diff = (res.product.coeffs - target.coeffs).reshape(-1)
    if mod_span is not None and len(mod_span):
        n, k = target.shape
        span = np.asarray(mod_span, dtype=complex)
        big = np.kron(np.eye(n * k), span.T)        # columns span M_{n,k}(K)
        c, *_ = np.linalg.lstsq(big, diff, rcond=None)
        diff = diff - big @ c
    return np.linalg.norm(diff) <= WITNESS_TOL * scale


def fact_norm_upper(A: MatrixElement, m: PartialProduct, base_norm=None,
                    L: int = 6, opts: EngineOpts | None = None) -> FactorizationWitness:
    """Best found permissible factorization of length <= L.

    The value is monotone nonincreasing in L for a fixed seed because the
    candidate pool only grows with the length budget.
    """
    if L < 1:
        raise InputError("L must be >= 1")
    opts = opts or EngineOpts()
    base_norm = base_norm or matrix_norm
    refine_norm = opts.fast_norm or base_norm

    candidates: list[tuple[float, list[MatrixElement]]] = []

    def record(factors):
        if len(factors) > L:
            return
        if not _chain_admissible(factors, opts.factor_filter):
            return
        candidates.append((_chain_value(factors, base_norm), list(factors)))

    record([A])
    for hint in opts.hints:
        record(list(hint))

    # block-diagonal targets: combine per-component witnesses
    comps = _support_components(A)
    if len(comps) > 1:
        sub_wit = []
        for rows, cols in comps:
            sub = MatrixElement(m.space, A.coeffs[np.ix_(rows, cols)])
            w = fact_norm_upper(sub, m, base_norm, L,
                                replace(opts, hints=(), validate=False))
            sub_wit.append((rows, cols, w))
        all_rows = [r for rows, _, _ in sub_wit for r in rows]
        all_cols = [c for _, cols, _ in sub_wit for c in cols]
        n, k = A.shape
        if sorted(all_rows) == list(range(n)) and sorted(all_cols) == list(range(k)):
            chain = sub_wit[0][2].factors
            for _, _, w in sub_wit[1:]:
                chain = combine_direct_sum(chain, w.factors, m.space, base_norm)
            # the combined chain produces A in concatenated component order;
            # permute the outer indices of the end factors back
            chain[0] = MatrixElement(
                m.space, np.take(chain[0].coeffs, np.argsort(all_rows), axis=0))
            chain[-1] = MatrixElement(
                m.space, np.take(chain[-1].coeffs, np.argsort(all_cols), axis=1))
            record(chain)

    frontier = [[A]]
    for length in range(2, L + 1):
        expansions = []
        for ci, factors in enumerate(frontier):
            for idx, fac in enumerate(factors):
                for bi, blk in enumerate(m.blocks):
                    split = _block_split(fac, blk, opts.mod_span)
                    if split is None:
                        continue
                    rng = np.random.default_rng(
                        [opts.seed, length, ci, idx, bi])
                    left, right = _refine_pair(split[0], split[1], refine_norm,
                                               rng, opts.refine_iters,
                                               opts.refine_restarts)
                    chain = factors[:idx] + [left, right] + factors[idx + 1:]
                    record(chain)
                    expansions.append((_chain_value(chain, base_norm), chain))
        expansions.sort(key=lambda t: t[0])
        frontier = [chain for _, chain in expansions[: opts.beam_width]]
        if not frontier:
            break

    candidates.sort(key=lambda t: t[0])
    for value, factors in candidates:
        if not opts.validate or _validate_witness(factors, A, m, opts.mod_span):
            return FactorizationWitness(factors, value, A)
    # documented fallback: the target itself as a length-1 witness
    return FactorizationWitness([A], base_norm(A), A)


def concat_witnesses(wa: FactorizationWitness, wb: FactorizationWitness,
                     m: PartialProduct, base_norm=None) -> FactorizationWitness:
    """Witness for A (.) B from witnesses of A and B of a valid pair."""
    base_norm = base_norm or matrix_norm
    if not is_valid_pair(wa.target, wb.target, m):
        raise InputError("targets do not form a valid pair")
    target = odot(wa.target, wb.target, m)
    factors = list(wa.factors) + list(wb.factors)
    return FactorizationWitness(factors, _chain_value(factors, base_norm), target)


# ---------------------------------------------------------------------------
# unital norm


def unital_norm(A: MatrixElement, L: int = 6,
                opts: EngineOpts | None = None) -> NormInterval:
    """Factorization norm for the trivial product on a space with designated
    unit: upper by search, lower from the ambient norm whenever the unit is
    realized by the ambient identity."""
    space = A.space
    m = trivial_product(space)
    witness = fact_norm_upper(A, m, matrix_norm, L, opts)
    upper = witness.value
    lower = 0.0
    descriptor = {"kind": "none"}
    e_mat = realize(unit_element(space, 1))
    if np.linalg.norm(e_mat - np.eye(space.d)) <= 1e-9:
        lower = matrix_norm(A)
        descriptor = {"kind": "ambient-inclusion"}
    lower = min(lower, upper)
    return NormInterval(lower, upper, witness, descriptor)


# ---------------------------------------------------------------------------
# commuting tensor norm


def _commuting_filter(gs, gt, us, ut, tol=1e-9):
    """Every entry individually in S (x) Ce_T or Ce_S (x) T."""

    def ok(f: MatrixElement) -> bool:
        n, k = f.shape
        v = f.coeffs.reshape(n, k, gs, gt)
        scale = max(np.linalg.norm(v), 1.0)
        for i in range(n):
            for j in range(k):
                ent = v[i, j]
                off_s = ent.copy()
                off_s[:, ut] = 0.0
                off_t = ent.copy()
                off_t[us, :] = 0.0
                if min(np.linalg.norm(off_s), np.linalg.norm(off_t)) > tol * scale:
                    return False
        return True

    return ok


def _route_value_grad(zz, c_gauge, basis_s, basis_t):
    """Value and Wirtinger gradients of one routed part of a mixed length-2
    factorization of sum_l e_l (x) t_l (canonical frame, gauge Gram C C*)."""
    gram = np.einsum("lab,mcb->lmac", basis_s, basis_s.conj())
    p = c_gauge @ c_gauge.conj().T
    pinv = np.linalg.inv(p)
    a_mat = np.einsum("lm,lmac->ac", p, gram)
    t = np.einsum("lh,hab->lab", zz, basis_t)
    tt = np.einsum("lba,mbc->lmac", t.conj(), t)
    b_mat = np.einsum("lm,lmac->ac", pinv, tt)
    wa, va = np.linalg.eigh(a_mat)
    wb, vb = np.linalg.eigh(b_mat)
    la, u = max(wa[-1].real, 1e-300), va[:, -1]
    lb, w = max(wb[-1].real, 0.0), vb[:, -1]
    val = np.sqrt(la * lb)
    if val < 1e-150:
        return 0.0, np.zeros_like(zz), np.zeros_like(c_gauge), (la, lb)
    da = np.einsum("a,lmac,c->lm", u.conj(), gram, u)
    db = np.einsum("a,lmac,c->lm", w.conj(), tt, w)
    dpb = -(pinv @ db.T @ pinv).T
    dp = (lb * da + la * dpb) / (2.0 * val)
    grad_c = 2.0 * (dp.conj() @ c_gauge)
    vtl = np.einsum("lab,b->la", t, w)
    bw = np.einsum("hab,b->ha", basis_t, w)
    dz = np.einsum("lm,la,ha->mh", pinv, vtl.conj(), bw)
    grad_z = (la / val) * dz.conj()
    return val, grad_z, grad_c, (la, lb)


def _mixed_split_descent(z, S, T, seed, iters=1200, lr=0.03):
    """Minimize h_st(z1) + h_ts(z - z1) over the split by Adam descent with
    analytic gradients; returns (z1, gauge1, gauge2)."""
    gs, gt = S.dim, T.dim
    zmat = np.asarray(z, dtype=complex).reshape(gs, gt)
    rng = np.random.default_rng(seed)
    best = (np.inf, None)
    starts = [zmat.copy(), np.zeros_like(zmat), 0.5 * zmat,
              0.5 * zmat + 0.2 * np.linalg.norm(zmat) / max(gs, 1)
              * (rng.standard_normal((gs, gt)) + 1j * rng.standard_normal((gs, gt)))]
    for z1_0 in starts:
        params = [z1_0.copy(),
                  np.eye(gs, dtype=complex),
                  np.eye(gt, dtype=complex)]
        mom = [np.zeros_like(p) for p in params]
        sq = [np.zeros(p.shape) for p in params]
        b1, b2, eps_ = 0.9, 0.999, 1e-8
        for t_ in range(1, iters + 1):
            z1, c1, c2 = params
            v1, gz1, gc1, _ = _route_value_grad(z1, c1, S.basis, T.basis)
            v2, gz2, gc2, _ = _route_value_grad((zmat - z1).T, c2, T.basis, S.basis)
            grads = [gz1 - gz2.T, gc1, gc2]
            for k in range(3):
                mom[k] = b1 * mom[k] + (1 - b1) * grads[k]
                sq[k] = b2 * sq[k] + (1 - b2) * np.abs(grads[k]) ** 2
                step = lr * (mom[k] / (1 - b1 ** t_)) / (
                    np.sqrt(sq[k] / (1 - b2 ** t_)) + eps_)
                params[k] = params[k] - step
        z1, c1, c2 = params
        v1 = _route_value_grad(z1, c1, S.basis, T.basis)[0]
        v2 = _route_value_grad((zmat - z1).T, c2, T.basis, S.basis)[0]
        if v1 + v2 < best[0]:
            best = (v1 + v2, (z1.copy(), c1.copy(), c2.copy()))
    return best[1]


def _route_factors(zz, c_gauge, basis_s_dim, basis_t_dim, embed_entry_s,
                   embed_entry_t):
    """Explicit row/column coefficient lists for one routed part."""
    k = c_gauge.shape[0]
    cinv = np.linalg.inv(c_gauge)
    row_entries = []
    for m_ in range(k):
        row_entries.append(embed_entry_s(c_gauge[:, m_]))
    tcoef = cinv @ zz
    col_entries = [embed_entry_t(tcoef[m_]) for m_ in range(k)]
    return row_entries, col_entries


def _mixed_witness(z, S, T, V, split) -> tuple | None:
    """Build the mixed length-2 factor pair from an optimized split."""
    gs, gt = S.dim, T.dim
    us, ut = S.unit_index, T.unit_index
    zmat = np.asarray(z, dtype=complex).reshape(gs, gt)
    z1, c1, c2 = split

    def embed_s(svec):
        out = np.zeros((gs, gt), dtype=complex)
        out[:, ut] = svec
        return out.reshape(-1)

    def embed_t(tvec):
        out = np.zeros((gs, gt), dtype=complex)
        out[us, :] = tvec
        return out.reshape(-1)

    try:
        r1, co1 = _route_factors(z1, c1, gs, gt, embed_s, embed_t)
        r2, co2 = _route_factors((zmat - z1).T, c2, gt, gs, embed_t, embed_s)
    except np.linalg.LinAlgError:
        return None

    def stack_pair(rows, cols):
        x = MatrixElement(V, np.stack(rows)[None, :, :])
        y = MatrixElement(V, np.stack(cols)[:, None, :])
        return x, y

    x1, y1 = stack_pair(r1, co1)
    x2, y2 = stack_pair(r2, co2)
    # per-part balance, then concatenate along the inner index
    parts = []
    for x, y in ((x1, y1), (x2, y2)):
        nx, ny = matrix_norm(x), matrix_norm(y)
        if nx < 1e-14 or ny < 1e-14:
            scale = 1.0
        else:
            scale = math.sqrt(ny / nx)
        parts.append((MatrixElement(V, x.coeffs * scale),
                      MatrixElement(V, y.coeffs / scale)))
    (x1, y1), (x2, y2) = parts
    x = MatrixElement(V, np.concatenate([x1.coeffs, x2.coeffs], axis=1))
    y = MatrixElement(V, np.concatenate([y1.coeffs, y2.coeffs], axis=0))
    return x, y


def _sample_commuting_rep_value(z, S, T, rng, samples=4) -> float:
    """sup ||(phi . psi)(z)|| over sampled ucp pairs with commuting ranges."""
    gs, gt = S.dim, T.dim
    flat = np.asarray(z, dtype=complex).reshape(gs, gt)
    best = 0.0
    for _ in range(samples):
        # unitary-conjugated joint diagonal compressions commute
        ds, dt = S.d, T.d
        qs = np.linalg.qr(rng.standard_normal((ds, ds))
                          + 1j * rng.standard_normal((ds, ds)))[0]
        qt = np.linalg.qr(rng.standard_normal((dt, dt))
                          + 1j * rng.standard_normal((dt, dt)))[0]
        phis = np.stack([np.diag(np.diag(qs.conj().T @ b @ qs)) for b in S.basis])
        psis = np.stack([np.diag(np.diag(qt.conj().T @ b @ qt)) for b in T.basis])
        val = np.zeros((ds * dt, ds * dt), dtype=complex)
        for a in range(gs):
            for b in range(gt):
                if abs(flat[a, b]) > 0:
                    val += flat[a, b] * np.kron(phis[a], psis[b])
        sv = np.linalg.svd(val, compute_uv=False)
        best = max(best, float(sv[0]) if sv.size else 0.0)
    return best


def commuting_norm(z, S, T, L: int = 8,
                   opts: EngineOpts | None = None) -> NormInterval:
    """Certified interval for the commuting tensor norm of z over S (x) T.

    Upper bounds search permissible factorizations whose factor entries lie
    per-entry in S (x) Ce_T or Ce_S (x) T; beyond the block splits of the
    engine, Schmidt components are also routed through the two product
    orders with independent gauges.
    """
    opts = opts or EngineOpts()
    if not (S.is_system and T.is_system):
        raise InputError("commuting norm needs operator systems")
    z = np.asarray(z, dtype=complex)
    if z.ndim == 2:
        z = z[None, None]
    m, V = commuting_product(S, T)
    target = tensor_element(z, S, T, space=V)
    flt = _commuting_filter(S.dim, T.dim, S.unit_index, T.unit_index)

    hints = []
    if z.shape[0] == 1 and z.shape[1] == 1 and np.linalg.norm(z) > 1e-13:
        split = _mixed_split_descent(z[0, 0], S, T, opts.seed + 101)
        if split is not None:
            pair = _mixed_witness(z[0, 0], S, T, V, split)
            if pair is not None:
                hints.append(pair)

    eng_opts = replace(opts, factor_filter=flt, hints=tuple(hints))
    witness = fact_norm_upper(target, m, matrix_norm, L, eng_opts)
    upper = witness.value

    rng = np.random.default_rng(opts.seed + 7)
    lower = min_tensor_norm(z, S, T)
    if z.shape[0] == 1 and z.shape[1] == 1:
        lower = max(lower, _sample_commuting_rep_value(z[0, 0], S, T, rng))
    lower = min(lower, upper)
    return NormInterval(lower, upper, witness,
                        {"kind": "min-tensor+sampled-commuting-reps"})


# ---------------------------------------------------------------------------
# representation lower bounds


@dataclass
class RepLowerResult:
    value: float
    feasible: bool
    product_residual: float
    contractivity_violation: float


def _rep_apply(pis, coeffs):
    return np.einsum("ijg,gab->iajb", coeffs, pis).reshape(
        coeffs.shape[0] * pis.shape[1], coeffs.shape[1] * pis.shape[1])


def _rep_penalties(pis, m: PartialProduct, base_norm, probes):
    resid = 0.0
    for blk in m.blocks:
        for a in range(blk.left.shape[0]):
            pa = np.einsum("g,gab->ab", blk.left[a], pis)
            for b in range(blk.right.shape[0]):
                pb = np.einsum("g,gab->ab", blk.right[b], pis)
                pm = np.einsum("g,gab->ab", blk.table[a, b], pis)
                resid += np.linalg.norm(pa @ pb - pm) ** 2
    cviol = 0.0
    for x in probes:
        img = _rep_apply(pis, x.coeffs)
        sv = np.linalg.svd(img, compute_uv=False)
        cviol = max(cviol, float(sv[0]) - base_norm(x))
    return float(resid), max(cviol, 0.0)


def rep_lower_bound(A: MatrixElement, m: PartialProduct, d: int,
                    restarts: int = 4, seed: int = 0, base_norm=None,
                    iters: int = 250, seeds=()) -> RepLowerResult:
    """Lower bound ||pi(A)|| over sampled unital product maps pi: V -> M_d.

    A candidate is feasible when its product-relation residual and sampled
    contractivity violation are both within 1e-6; infeasible searches return
    value 0 with the flag down.
    """
    if d < 1:
        raise InputError("representation dimension must be >= 1")
    base_norm = base_norm or matrix_norm
    space = m.space
    g = space.dim
    rng = np.random.default_rng(seed)
    probes = [MatrixElement(space, rng.standard_normal((n, n, g))
                            + 1j * rng.standard_normal((n, n, g)))
              for n in (1, 1, 2, 2, 2, 1)]

    unit_idx = space.unit_index

    def project_unit(pis):
        pis = pis.copy()
        pis[unit_idx] = np.eye(d)
        return pis

    starts = [project_unit(np.asarray(s, dtype=complex)) for s in seeds]
    if d == space.d:
        starts.append(project_unit(space.basis.copy()))
    while len(starts) < max(restarts, 1) + len(seeds):
        s = 0.5 * (rng.standard_normal((g, d, d)) + 1j * rng.standard_normal((g, d, d)))
        starts.append(project_unit(s))

    mu = 1e3
    best = RepLowerResult(0.0, False, np.inf, np.inf)
    for pis0 in starts:
        pis = pis0.copy()
        resid, cviol = _rep_penalties(pis, m, base_norm, probes)
        img = _rep_apply(pis, A.coeffs)
        val = float(np.linalg.svd(img, compute_uv=False)[0]) if img.size else 0.0
        score = val - mu * (max(resid - 1e-8, 0.0) + cviol)
        eps = 0.2
        for _ in range(iters):
            if eps < 1e-8:
                break
            delta = rng.standard_normal((g, d, d)) + 1j * rng.standard_normal((g, d, d))
            delta[unit_idx] = 0.0
            delta /= max(np.linalg.norm(delta), 1e-30)
            cand = pis + eps * delta
            r2, c2 = _rep_penalties(cand, m, base_norm, probes)
            img2 = _rep_apply(cand, A.coeffs)
            v2 = float(np.linalg.svd(img2, compute_uv=False)[0]) if img2.size else 0.0
            s2 = v2 - mu * (max(r2 - 1e-8, 0.0) + c2)
            if s2 > score + 1e-12:
                pis, resid, cviol, val, score = cand, r2, c2, v2, s2
                eps *= 1.05
            else:
                eps *= 0.9
        if resid <= 1e-6 and cviol <= 1e-6 and (not best.feasible or val > best.value):
            best = RepLowerResult(val, True, resid, cviol)
    return best
