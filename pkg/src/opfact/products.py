"""Partial products on concrete spaces.

A product is stored as a finite union of domain blocks: pairs of subspaces
(given by spanning coefficient vectors) together with a bilinear table on the
spanning pairs.  The two mandatory blocks Ce x V and V x Ce are always
installed by the builder.  Free-algebra words over the basis symbols are
reduced leftmost-first; degeneracy detection separately enumerates the
one-step branches (local confluence, which suffices because reduction
shortens words).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import (
    ConcreteOperatorSpace,
    InputError,
    MatrixElement,
    matrix_norm,
    element,
    realize,
    tensor_space,
)

MEMBER_RTOL = 1e-8
REDUCE_PRUNE = 1e-13


class InvalidPairError(ValueError):
    """Raised by odot when an entry pair is outside the domain."""

    def __init__(self, indices):
        self.indices = indices
        super().__init__(f"entry pair outside the product domain at {indices}")


@dataclass
class ProductBlock:
    left: np.ndarray    # (nl, g) spanning coefficient vectors of the left subspace
    right: np.ndarray   # (nr, g)
    table: np.ndarray   # (nl, nr, g) coefficients of m(l_a, r_b)

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=complex)
        self.right = np.asarray(self.right, dtype=complex)
        self.table = np.asarray(self.table, dtype=complex)
        if self.table.shape[:2] != (self.left.shape[0], self.right.shape[0]):
            raise InputError("table shape does not match block spans")


def _member(span: np.ndarray, vec: np.ndarray):
    """Coefficients of vec in the rows of span, or None."""
    if span.shape[0] == 0:
        return None
    c, *_ = np.linalg.lstsq(span.T, vec, rcond=None)
    resid = np.linalg.norm(span.T @ c - vec)
    if resid <= MEMBER_RTOL * max(np.linalg.norm(vec), 1.0):
        return c
    return None


@dataclass
class PartialProduct:
    space: ConcreteOperatorSpace
    blocks: list[ProductBlock]
    unital: bool = True
    _pair_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.space.dim

    # -- pair evaluation ---------------------------------------------------

    def pair_value(self, xvec, yvec):
        """m(x, y) as a coefficient vector, or None when (x, y) is not in D."""
        xvec = np.asarray(xvec, dtype=complex)
        yvec = np.asarray(yvec, dtype=complex)
        for blk in self.blocks:
            cx = _member(blk.left, xvec)
            if cx is None:
                continue
            cy = _member(blk.right, yvec)
            if cy is None:
                continue
            return np.einsum("a,b,abg->g", cx, cy, blk.table)
        return None

    def pair_in_domain(self, xvec, yvec) -> bool:
        return self.pair_value(xvec, yvec) is not None

    def symbol_pair(self, g: int, h: int):
        """Cached m(basis_g, basis_h) coefficient vector (None if outside D)."""
        key = (g, h)
        if key not in self._pair_cache:
            eg = np.zeros(self.dim, dtype=complex)
            eh = np.zeros(self.dim, dtype=complex)
            eg[g] = 1.0
            eh[h] = 1.0
            self._pair_cache[key] = self.pair_value(eg, eh)
        return self._pair_cache[key]


def _unit_blocks(space: ConcreteOperatorSpace) -> list[ProductBlock]:
    g = space.dim
    if space.unit_index is None:
        raise InputError("a partial product needs a designated unit")
    e = np.zeros((1, g), dtype=complex)
    e[0, space.unit_index] = 1.0
    full = np.eye(g, dtype=complex)
    ident = np.eye(g, dtype=complex)
    # m(e, v_b) = v_b and m(v_a, e) = v_a
    return [
        ProductBlock(e, full, ident[None, :, :]),
        ProductBlock(full, e, ident[:, None, :]),
    ]


def _adjoint_vec(space: ConcreteOperatorSpace, vec: np.ndarray) -> np.ndarray:
    mat = realize(element(space, vec))
    c, resid = space.coeffs_of(mat.conj().T)
    if resid > MEMBER_RTOL * max(np.linalg.norm(mat), 1.0):
        raise InputError("span is not closed under adjoints")
    return c


def partial_product(space, blocks=(), adjoint_closure=None) -> PartialProduct:
    """Build a partial product from domain blocks.

    The mandatory unit blocks are always installed.  For operator systems the
    domain is extended with the adjoint block (b*, a*) -> m(a, b)* unless
    adjoint_closure=False.
    """
    all_blocks = _unit_blocks(space)
    user = [ProductBlock(b.left, b.right, b.table) if isinstance(b, ProductBlock)
            else ProductBlock(*b) for b in blocks]
    close = space.is_system if adjoint_closure is None else adjoint_closure
    extra = []
    if close:
        for blk in user:
            left = np.array([_adjoint_vec(space, v) for v in blk.right])
            right = np.array([_adjoint_vec(space, v) for v in blk.left])
            table = np.empty((len(left), len(right), space.dim), dtype=complex)
            for b in range(len(left)):
                for a in range(len(right)):
                    table[b, a] = _adjoint_vec(space, blk.table[a, b])
            dup = any(
                o.left.shape == left.shape and np.allclose(o.left, left)
                and o.right.shape == right.shape and np.allclose(o.right, right)
                and np.allclose(o.table, table)
                for o in user + extra
            )
            if not dup:
                extra.append(ProductBlock(left, right, table))
    prod = PartialProduct(space, all_blocks + user + extra)
    _validate_product(prod)
    return prod


def _validate_product(m: PartialProduct, samples: int = 8, seed: int = 0):
    """Sampled unitality and bilinearity checks."""
    rng = np.random.default_rng(seed)
    g = m.dim
    e = np.zeros(g, dtype=complex)
    e[m.space.unit_index] = 1.0
    for _ in range(samples):
        x = rng.standard_normal(g) + 1j * rng.standard_normal(g)
        for got in (m.pair_value(e, x), m.pair_value(x, e)):
            if got is None or np.linalg.norm(got - x) > 1e-10 * max(np.linalg.norm(x), 1.0):
                raise InputError("product is not unital on a sampled element")
    for blk in m.blocks:
        nl, nr = blk.left.shape[0], blk.right.shape[0]
        if nl == 0 or nr == 0:
            continue
        cy = rng.standard_normal(nr) + 1j * rng.standard_normal(nr)
        ca, cb = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        y = blk.right.T @ cy
        a_ = blk.left[rng.integers(nl)]
        b_ = blk.left[rng.integers(nl)]
        lhs = m.pair_value(ca * a_ + cb * b_, y)
        rhs = ca * m.pair_value(a_, y) + cb * m.pair_value(b_, y)
        if lhs is None or np.linalg.norm(lhs - rhs) > 1e-10 * max(np.linalg.norm(rhs), 1.0):
            raise InputError("product is not bilinear on a sampled block member")


# ---------------------------------------------------------------------------
# matrix-level products


def is_valid_pair(A: MatrixElement, B: MatrixElement, m: PartialProduct) -> bool:
    n, k = A.shape
    k2, mm = B.shape
    if k != k2:
        raise InputError("inner dimensions do not match")
    for y in range(k):
        for x in range(n):
            for z in range(mm):
                if not m.pair_in_domain(A.coeffs[x, y], B.coeffs[y, z]):
                    return False
    return True


def odot(A: MatrixElement, B: MatrixElement, m: PartialProduct) -> MatrixElement:
    n, k = A.shape
    k2, mm = B.shape
    if k != k2:
        raise InputError("inner dimensions do not match")
    out = np.zeros((n, mm, m.dim), dtype=complex)
    for x in range(n):
        for z in range(mm):
            acc = np.zeros(m.dim, dtype=complex)
            for y in range(k):
                val = m.pair_value(A.coeffs[x, y], B.coeffs[y, z])
                if val is None:
                    raise InvalidPairError((x, y, z))
                acc += val
            out[x, z] = acc
    return MatrixElement(m.space, out)


# ---------------------------------------------------------------------------
# free elements and reduction


class FreeElement:
    """Finitely supported linear combination of words of basis indices."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = dict(terms or {})

    @classmethod
    def from_vector(cls, vec) -> "FreeElement":
        vec = np.asarray(vec, dtype=complex)
        return cls({(g,): c for g, c in enumerate(vec) if abs(c) > 0})

    def to_vector(self, dim) -> np.ndarray:
        """Coefficient vector, assuming support on length-1 words."""
        out = np.zeros(dim, dtype=complex)
        for w, c in self.terms.items():
            if len(w) != 1:
                raise InputError("free element does not lie in the base space")
            out[w[0]] += c
        return out

    def max_word_length(self) -> int:
        return max((len(w) for w in self.terms), default=0)

    def prune(self, tol=REDUCE_PRUNE) -> "FreeElement":
        scale = max((abs(c) for c in self.terms.values()), default=0.0)
        if scale == 0.0:
            return FreeElement()
        return FreeElement({w: c for w, c in self.terms.items() if abs(c) > tol * scale})

    def __add__(self, other):
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out.get(w, 0.0) + c
        return FreeElement(out)

    def __mul__(self, scalar):
        return FreeElement({w: c * scalar for w, c in self.terms.items()})

    __rmul__ = __mul__

    def concat(self, other) -> "FreeElement":
        out = {}
        for w1, c1 in self.terms.items():
            for w2, c2 in other.terms.items():
                w = w1 + w2
                out[w] = out.get(w, 0.0) + c1 * c2
        return FreeElement(out)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.terms.values())))

    def distance(self, other) -> float:
        return (self + (-1.0) * other).norm()


def _reduce_word_once(word, m: PartialProduct, position):
    """Replace the adjacent pair at `position` by its m-value (a FreeElement)."""
    val = m.symbol_pair(word[position], word[position + 1])
    if val is None:
        return None
    out = {}
    head, tail = word[:position], word[position + 2:]
    for g, c in enumerate(val):
        if abs(c) > 0:
            out[head + (g,) + tail] = c
    return FreeElement(out)


def _reducible_positions(word, m: PartialProduct):
    return [i for i in range(len(word) - 1)
            if m.symbol_pair(word[i], word[i + 1]) is not None]


def reduce_free(x: FreeElement, m: PartialProduct) -> FreeElement:
    """Leftmost-first reduction until no adjacent pair lies in the domain."""
    out = {}
    stack = list(x.terms.items())
    while stack:
        word, coeff = stack.pop()
        if abs(coeff) == 0.0:
            continue
        pos = _reducible_positions(word, m)
        if not pos:
            out[word] = out.get(word, 0.0) + coeff
            continue
        step = _reduce_word_once(word, m, pos[0])
        for w, c in step.terms.items():
            stack.append((w, coeff * c))
    return FreeElement(out).prune()


@dataclass
class PermissibleResult:
    permissible: bool
    product: MatrixElement | None
    reduced: list  # reduced FreeElement per entry, row-major


def is_permissible(factors, m: PartialProduct) -> PermissibleResult:
    """Form the entrywise free product of the tuple, reduce, and test whether
    every entry lands back in the space."""
    factors = list(factors)
    if not factors:
        raise InputError("empty tuple")
    for f, g in zip(factors, factors[1:]):
        if f.shape[1] != g.shape[0]:
            raise InputError("chain shapes do not compose")
    rows, _ = factors[0].shape
    current = [[FreeElement.from_vector(factors[0].coeffs[i, j])
                for j in range(factors[0].shape[1])] for i in range(rows)]
    for f in factors[1:]:
        k, cols = f.shape
        nxt = []
        for i in range(rows):
            row = []
            for j in range(cols):
                acc = FreeElement()
                for y in range(k):
                    acc = acc + current[i][y].concat(
                        FreeElement.from_vector(f.coeffs[y, j]))
                row.append(acc.prune())
            nxt.append(row)
        current = nxt
    reduced = [[reduce_free(c, m) for c in row] for row in current]
    ok = all(r.max_word_length() <= 1 for row in reduced for r in row)
    product = None
    if ok:
        cols = factors[-1].shape[1]
        coeffs = np.zeros((rows, cols, m.dim), dtype=complex)
        for i in range(rows):
            for j in range(cols):
                coeffs[i, j] = reduced[i][j].to_vector(m.dim)
        product = MatrixElement(m.space, coeffs)
    flat = [r for row in reduced for r in row]
    return PermissibleResult(ok, product, flat)


# ---------------------------------------------------------------------------
# contractivity and degeneracy checks


@dataclass
class ContractivityReport:
    max_gap: float
    witness: tuple[MatrixElement, MatrixElement] | None
    samples: int


def check_complete_contractivity(m: PartialProduct, base_norm=None, n_max=3,
                                 samples=40, seed=0, tol=1e-8) -> ContractivityReport:
    """Sample valid pairs blockwise and report max ||A o B|| - ||A|| ||B||."""
    if base_norm is None:
        base_norm = matrix_norm
    rng = np.random.default_rng(seed)
    worst = 0.0
    witness = None
    nblocks = len(m.blocks)
    for _ in range(samples):
        n, k, mm = rng.integers(1, n_max + 1, size=3)
        a = np.zeros((n, k, m.dim), dtype=complex)
        b = np.zeros((k, mm, m.dim), dtype=complex)
        for y in range(k):
            blk = m.blocks[rng.integers(nblocks)]
            nl, nr = blk.left.shape[0], blk.right.shape[0]
            ca = rng.standard_normal((n, nl)) + 1j * rng.standard_normal((n, nl))
            cb = rng.standard_normal((mm, nr)) + 1j * rng.standard_normal((mm, nr))
            a[:, y, :] = ca @ blk.left
            b[y, :, :] = cb @ blk.right
        A = MatrixElement(m.space, a)
        B = MatrixElement(m.space, b)
        gap = base_norm(odot(A, B, m)) - base_norm(A) * base_norm(B)
        if gap > worst:
            worst = gap
            if gap > tol:
                witness = (A, B)
    return ContractivityReport(worst, witness, samples)


@dataclass
class DegeneracyReport:
    degenerate: bool
    witness: tuple | None  # (word, reduction at p, reduction at q)


def detect_degeneracy(m: PartialProduct, depth: int, tol=1e-9) -> DegeneracyReport:
    """Search words up to `depth` for reduction-order-dependent results.

    Checks local confluence of the one-step branches; because each reduction
    strictly shortens words, a locally confluent system is confluent, so a
    clean report certifies order-independence up to the tested depth.
    """
    if depth < 3:
        raise InputError("degeneracy search needs depth >= 3")
    g = m.dim
    words = [(i,) for i in range(g)]
    for length in range(2, depth + 1):
        words = [w + (i,) for w in words for i in range(g)] if length > 2 else \
                [(i, j) for i in range(g) for j in range(g)]
        if length < 3:
            continue
        for w in words:
            pos = _reducible_positions(w, m)
            if len(pos) < 2:
                continue
            branches = []
            for p in pos:
                stepped = _reduce_word_once(w, m, p)
                branches.append((p, reduce_free(stepped, m)))
            base_p, base_r = branches[0]
            for p, r in branches[1:]:
                if base_r.distance(r) > tol * max(base_r.norm(), 1.0):
                    return DegeneracyReport(True, (w, (base_p, base_r), (p, r)))
    return DegeneracyReport(False, None)


# ---------------------------------------------------------------------------
# stock constructions


def trivial_product(space) -> PartialProduct:
    """Only the mandatory unit blocks."""
    return partial_product(space, (), adjoint_closure=False)


def ambient_product(space) -> PartialProduct:
    """Full multiplication table; requires the span be closed under products."""
    g = space.dim
    table = np.empty((g, g, g), dtype=complex)
    for a in range(g):
        for b in range(g):
            prod = space.basis[a] @ space.basis[b]
            c, resid = space.coeffs_of(prod)
            if resid > MEMBER_RTOL * max(np.linalg.norm(prod), 1.0):
                raise InputError("span is not closed under multiplication")
            table[a, b] = c
    full = np.eye(g, dtype=complex)
    return partial_product(space, [ProductBlock(full, full, table)],
                           adjoint_closure=False)


def anticommutator_product(space) -> PartialProduct:
    """m(x, y) = (xy + yx) / 2 on all of V x V; degenerate on M_2 and beyond."""
    g = space.dim
    table = np.empty((g, g, g), dtype=complex)
    for a in range(g):
        for b in range(g):
            prod = 0.5 * (space.basis[a] @ space.basis[b]
                          + space.basis[b] @ space.basis[a])
            c, resid = space.coeffs_of(prod)
            if resid > MEMBER_RTOL * max(np.linalg.norm(prod), 1.0):
                raise InputError("span is not closed under anticommutators")
            table[a, b] = c
    full = np.eye(g, dtype=complex)
    return partial_product(space, [ProductBlock(full, full, table)],
                           adjoint_closure=False)


def haagerup_product(S, T, V=None):
    """The product m(s (x) e, e (x) t) = s (x) t on the tensor space of S, T."""
    if S.unit_index is None or T.unit_index is None:
        raise InputError("both factors must be unital")
    if V is None:
        V = tensor_space(S, T)
    gs, gt = S.dim, T.dim
    left = np.zeros((gs, gs * gt), dtype=complex)
    for a in range(gs):
        left[a, a * gt + T.unit_index] = 1.0
    right = np.zeros((gt, gs * gt), dtype=complex)
    for b in range(gt):
        right[b, S.unit_index * gt + b] = 1.0
    table = np.zeros((gs, gt, gs * gt), dtype=complex)
    for a in range(gs):
        for b in range(gt):
            table[a, b, a * gt + b] = 1.0
    return partial_product(V, [ProductBlock(left, right, table)],
                           adjoint_closure=False), V


def commuting_product(S, T, V=None):
    """Haagerup block plus the commuted block m(e (x) t, s (x) e) = s (x) t."""
    m0, V = haagerup_product(S, T, V)
    blk = m0.blocks[2]  # the S x T block installed above
    table_rev = blk.table.transpose(1, 0, 2)
    return partial_product(
        V,
        [ProductBlock(blk.left, blk.right, blk.table),
         ProductBlock(blk.right, blk.left, table_rev)],
        adjoint_closure=False,
    ), V


def free_unitary_system(n: int):
    """Span of {e, u_1..u_n, u_1*..u_n*} with m(u_i, u_i*) = m(u_i*, u_i) = e.

    Concretely the u_i are realized as powers of a cyclic diagonal unitary,
    which keeps the basis independent and the span self-adjoint; only the
    relation table matters to the product machinery.
    """
    if n < 1:
        raise InputError("need at least one generator")
    dim = 2 * n + 1
    omega = np.exp(2j * np.pi / dim)
    z = np.diag(omega ** np.arange(dim))
    mats = [np.eye(dim)]
    mats += [np.linalg.matrix_power(z, j) for j in range(1, n + 1)]
    mats += [np.linalg.matrix_power(z, dim - j) for j in range(1, n + 1)]
    space = ConcreteOperatorSpace(np.array(mats), unit_index=0, is_system=True)
    g = space.dim
    blocks = []
    e = np.zeros(g, dtype=complex)
    e[0] = 1.0
    for i in range(1, n + 1):
        ui = np.zeros(g, dtype=complex)
        ui[i] = 1.0
        ust = np.zeros(g, dtype=complex)
        ust[n + i] = 1.0
        for lft, rgt in ((ui, ust), (ust, ui)):
            left = np.stack([e, lft])
            right = np.stack([e, rgt])
            table = np.zeros((2, 2, g), dtype=complex)
            table[0, 0] = e
            table[0, 1] = rgt
            table[1, 0] = lft
            table[1, 1] = e
            blocks.append(ProductBlock(left, right, table))
    return partial_product(space, blocks, adjoint_closure=False), space


def cuntz_system(n: int):
    """Span of {e, s_i, s_i*, p_1..p_{n-1}} with m(s_i*, s_i) = e and
    m(s_i, s_i*) = p_i, where p_n = e - sum p_i.

    The concrete matrices are a faithful linear stand-in (matrix units in
    M_{n+1}); the defining relations live entirely in the product table.
    """
    if n < 2:
        raise InputError("the Cuntz system needs n >= 2")
    d = n + 1
    mats = [np.eye(d)]
    for i in range(1, n + 1):       # s_i
        m_ = np.zeros((d, d))
        m_[0, i] = 1.0
        mats.append(m_)
    for i in range(1, n + 1):       # s_i*
        m_ = np.zeros((d, d))
        m_[i, 0] = 1.0
        mats.append(m_)
    for i in range(1, n):           # p_1 .. p_{n-1}
        m_ = np.zeros((d, d))
        m_[i, i] = 1.0
        mats.append(m_)
    space = ConcreteOperatorSpace(np.array(mats), unit_index=0, is_system=True)
    g = space.dim
    e = np.zeros(g, dtype=complex)
    e[0] = 1.0

    def p_vec(i):
        v = np.zeros(g, dtype=complex)
        if i < n:
            v[2 * n + i] = 1.0
        else:
            v[0] = 1.0
            v[2 * n + 1: 2 * n + n] = -1.0
        return v

    blocks = []
    for i in range(1, n + 1):
        s = np.zeros(g, dtype=complex)
        s[i] = 1.0
        st = np.zeros(g, dtype=complex)
        st[n + i] = 1.0
        # (s_i*, s_i) -> e
        left = np.stack([e, st])
        right = np.stack([e, s])
        table = np.zeros((2, 2, g), dtype=complex)
        table[0, 0] = e
        table[0, 1] = s
        table[1, 0] = st
        table[1, 1] = e
        blocks.append(ProductBlock(left, right, table))
        # (s_i, s_i*) -> p_i
        left = np.stack([e, s])
        right = np.stack([e, st])
        table = np.zeros((2, 2, g), dtype=complex)
        table[0, 0] = e
        table[0, 1] = st
        table[1, 0] = s
        table[1, 1] = p_vec(i)
        blocks.append(ProductBlock(left, right, table))
    return partial_product(space, blocks, adjoint_closure=False), space
