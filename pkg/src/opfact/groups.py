"""Finitely presented groups with short relations.

Presentations use relations a_i^x a_j^y = a_k^z with exponents in {-1, 0, 1};
coset enumeration over the trivial subgroup produces the full multiplication
table when the group is finite.  Exact matrix norms on the symbol span come
from the left regular representation (full = reduced C*-algebra norms for
finite groups); the factorization norm pairs those exact lower bounds with
upper bounds searched over the relation-induced partial product, using the
coset-minimized sum of coefficient-matrix norms as the factor base norm.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

import numpy as np

from .spaces import ConcreteOperatorSpace, InputError, MatrixElement, spectral_norm
from .products import PartialProduct, ProductBlock, partial_product
from .factnorm import EngineOpts, FactorizationWitness, NormInterval, fact_norm_upper
from .optim import convex_min


class EnumerationExceeded(RuntimeError):
    """Coset enumeration hit the bound: the group may be infinite."""


@dataclass(frozen=True)
class GroupPresentation:
    n: int
    relations: tuple   # of ((i, x), (j, y), (k, z)), exponents in {-1, 0, 1}

    def __post_init__(self):
        for rel in self.relations:
            if len(rel) != 3:
                raise InputError("relations must have exactly three symbols")
            for idx, ex in rel:
                if ex not in (-1, 0, 1):
                    raise InputError("exponent outside {-1, 0, 1}")
                if ex != 0 and not 1 <= idx <= self.n:
                    raise InputError("generator index out of range")


_SYM_RE = re.compile(r"^(e|a(\d+)(\^-1)?)$")


def _parse_symbol(tok: str, n: int):
    m = _SYM_RE.match(tok)
    if not m:
        raise InputError(f"bad symbol {tok!r}")
    if tok == "e":
        return (0, 0)
    idx = int(m.group(2))
    if not 1 <= idx <= n:
        raise InputError(f"generator index out of range in {tok!r}")
    return (idx, -1 if m.group(3) else 1)


def parse_presentation(text: str) -> GroupPresentation:
    """Grammar: a `gens <n>` line followed by `rel <sym> <sym> = <sym>` lines,
    where <sym> is `e`, `a<i>`, or `a<i>^-1`.  Longer words must be rewritten
    with auxiliary generators before parsing."""
    n = None
    rels = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#")[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "gens":
            if len(parts) != 2 or not parts[1].isdigit():
                raise InputError(f"line {ln}: bad gens line")
            n = int(parts[1])
        elif parts[0] == "rel":
            if n is None:
                raise InputError(f"line {ln}: rel before gens")
            if len(parts) != 5 or parts[3] != "=":
                raise InputError(f"line {ln}: relations have the form "
                                 "'rel <sym> <sym> = <sym>'")
            a = _parse_symbol(parts[1], n)
            b = _parse_symbol(parts[2], n)
            c = _parse_symbol(parts[4], n)
            rels.append((a, b, c))
        else:
            raise InputError(f"line {ln}: unknown directive {parts[0]!r}")
    if n is None:
        raise InputError("missing gens line")
    return GroupPresentation(n, tuple(rels))


# ---------------------------------------------------------------------------
# Todd-Coxeter coset enumeration over the trivial subgroup


def _gen_index(i: int, ex: int) -> int:
    # generator a_i -> 2(i-1), inverse -> 2(i-1)+1
    return 2 * (i - 1) + (0 if ex == 1 else 1)


def _relator_words(p: GroupPresentation):
    words = []
    for (i, x), (j, y), (k, z) in p.relations:
        w = []
        if x:
            w.append(_gen_index(i, x))
        if y:
            w.append(_gen_index(j, y))
        if z:
            w.append(_gen_index(k, -z))
        if w:
            words.append(tuple(w))
    return words


class _Schreier:
    """Union-find coset graph in the style of classical HLT enumeration."""

    def __init__(self, ngens):
        self.ngens = ngens
        self.labels = []
        self.neighbors = []

    def add_coset(self) -> int:
        self.labels.append(len(self.labels))
        self.neighbors.append([None] * self.ngens)
        return self.labels[-1]

    def find(self, c: int) -> int:
        while self.labels[c] != c:
            self.labels[c] = self.labels[self.labels[c]]
            c = self.labels[c]
        return c

    def unify(self, c1: int, c2: int):
        stack = [(c1, c2)]
        while stack:
            a, b = stack.pop()
            a, b = self.find(a), self.find(b)
            if a == b:
                continue
            a, b = min(a, b), max(a, b)
            self.labels[b] = a
            for g in range(self.ngens):
                nb = self.neighbors[b][g]
                if nb is None:
                    continue
                na = self.neighbors[a][g]
                if na is None:
                    self.neighbors[a][g] = nb
                else:
                    stack.append((na, nb))

    def follow(self, c: int, g: int) -> int:
        c = self.find(c)
        inv = g ^ 1
        if self.neighbors[c][g] is None:
            new = self.add_coset()
            self.neighbors[c][g] = new
            self.neighbors[new][inv] = c
        return self.find(self.neighbors[c][g])

    def alive(self):
        return [c for c in range(len(self.labels)) if self.find(c) == c]


@dataclass
class FiniteGroupTable:
    order: int
    mult: np.ndarray            # (order, order) int
    inverse: np.ndarray         # (order,) int
    generator_images: tuple     # element id of a_1..a_n
    identity: int = 0

    def __post_init__(self):
        n = self.order
        for axis in (0, 1):
            for r in range(n):
                row = self.mult[r] if axis == 0 else self.mult[:, r]
                if sorted(row.tolist()) != list(range(n)):
                    raise InputError("multiplication table rows/columns must be permutations")
        rng = np.random.default_rng(0)
        for _ in range(min(32, n * n)):
            a, b, c = rng.integers(n, size=3)
            if self.mult[self.mult[a, b], c] != self.mult[a, self.mult[b, c]]:
                raise InputError("multiplication table is not associative")


def enumerate_group(p: GroupPresentation, max_cosets: int = 10000) -> FiniteGroupTable:
    """HLT-style coset enumeration over the trivial subgroup."""
    if max_cosets < 1:
        raise InputError("max_cosets must be >= 1")
    ngens = 2 * p.n
    graph = _Schreier(ngens)
    relators = _relator_words(p)
    # trivial subgroup: every generator also fixes no extra structure; scan
    # relator words at every live coset until the graph closes
    graph.add_coset()
    visited = 0
    while True:
        live = graph.alive()
        if len(live) > max_cosets:
            raise EnumerationExceeded(
                f"enumeration exceeded {max_cosets} cosets; the group may be infinite")
        if visited >= len(graph.labels):
            break
        c = visited
        visited += 1
        if graph.find(c) != c:
            continue
        for word in relators:
            cur = c
            for g in word:
                cur = graph.follow(cur, g)
            graph.unify(cur, c)
        # fill all generator edges so the scan terminates only when closed
        for g in range(ngens):
            graph.follow(c, g)

    live = sorted(graph.alive())
    index = {c: i for i, c in enumerate(live)}
    order = len(live)
    perms = []
    for g in range(ngens):
        perms.append(np.array([index[graph.find(graph.neighbors[c][g])]
                               for c in live], dtype=int))

    # coset words from a BFS tree rooted at the identity coset
    words = {0: ()}
    queue = [0]
    while queue:
        c = queue.pop(0)
        for g in range(ngens):
            nxt = int(perms[g][c])
            if nxt not in words:
                words[nxt] = words[c] + (g,)
                queue.append(nxt)
    if len(words) != order:
        raise InputError("coset graph is not connected")

    mult = np.zeros((order, order), dtype=int)
    for c2 in range(order):
        targets = np.arange(order)
        for g in words[c2]:
            targets = perms[g][targets]
        mult[:, c2] = targets
    inverse = np.zeros(order, dtype=int)
    for a in range(order):
        inverse[a] = int(np.where(mult[a] == 0)[0][0])
    gen_images = tuple(int(perms[_gen_index(i, 1)][0]) for i in range(1, p.n + 1))
    return FiniteGroupTable(order, mult, inverse, gen_images)


# ---------------------------------------------------------------------------
# symbol span and the regular representation


def symbol_images(p: GroupPresentation, table: FiniteGroupTable):
    """Element ids of the 2n+1 span symbols e, a_1..a_n, a_1^-1..a_n^-1."""
    imgs = [table.identity]
    imgs += [table.generator_images[i] for i in range(p.n)]
    imgs += [int(table.inverse[table.generator_images[i]]) for i in range(p.n)]
    return imgs


def left_regular_matrix(table: FiniteGroupTable, h: int) -> np.ndarray:
    mat = np.zeros((table.order, table.order))
    for g in range(table.order):
        mat[table.mult[h, g], g] = 1.0
    return mat


def regular_rep_norm(sym_coeffs, p: GroupPresentation,
                     table: FiniteGroupTable) -> float:
    """Exact C*(G) norm (finite G) of a matrix of span elements given by
    (n, k, 2n+1) symbol coefficients."""
    c = np.asarray(sym_coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[None, None, :]
    if c.shape[2] != 2 * p.n + 1:
        raise InputError("expected 2n+1 symbol coefficients")
    imgs = symbol_images(p, table)
    n, k = c.shape[:2]
    big = np.zeros((n * table.order, k * table.order), dtype=complex)
    for s, h in enumerate(imgs):
        lh = left_regular_matrix(table, h)
        big += np.kron(c[:, :, s], lh)
    return spectral_norm(big)


def symbol_kernel(p: GroupPresentation, table: FiniteGroupTable) -> np.ndarray:
    """Null space (rows) of the symbol -> group-algebra map."""
    imgs = symbol_images(p, table)
    nsym = 2 * p.n + 1
    m = np.zeros((nsym, table.order))
    for s, h in enumerate(imgs):
        m[s, h] = 1.0
    u, sv, _ = np.linalg.svd(m, full_matrices=True)
    rank = int(np.sum(sv > 1e-10 * max(sv[0] if sv.size else 0.0, 1e-300)))
    return u[:, rank:].T.conj()


def intermediate_norm_upper(sym_coeffs, p: GroupPresentation,
                            table: FiniteGroupTable, budget="precise") -> float:
    """Coset-minimized sum of per-symbol coefficient-matrix norms: an upper
    bound for the quotient of the maximal ell-1 structure that still
    dominates the C*(G) norm."""
    c = np.asarray(sym_coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[None, None, :]
    null = symbol_kernel(p, table)
    r = null.shape[0]
    n, k = c.shape[:2]

    def total(coeffs):
        return float(sum(spectral_norm(coeffs[:, :, s]) for s in range(c.shape[2])))

    if r == 0:
        return total(c)

    dim = 2 * n * k * r

    def f(v):
        w = (v[: n * k * r] + 1j * v[n * k * r:]).reshape(n, k, r)
        return total(c + np.einsum("ijr,rg->ijg", w, null))

    scale = max(total(c), 1.0)
    _, best = convex_min(f, dim, scale, budget=budget)
    return float(best)


# ---------------------------------------------------------------------------
# the reduced concrete span and the relation product


@dataclass
class GroupSystem:
    presentation: GroupPresentation
    table: FiniteGroupTable
    space: ConcreteOperatorSpace       # span of the distinct symbol images
    product: PartialProduct
    distinct: list                     # element ids, one per basis vector
    sym_to_basis: np.ndarray           # (2n+1, dim) coefficient projection


def _sym_vec(nsym, s):
    v = np.zeros(nsym, dtype=complex)
    v[s] = 1.0
    return v


def group_system(p: GroupPresentation, max_cosets: int = 10000) -> GroupSystem:
    table = enumerate_group(p, max_cosets)
    imgs = symbol_images(p, table)
    nsym = 2 * p.n + 1
    distinct = sorted(set(imgs))
    # identity first
    distinct.remove(table.identity)
    distinct.insert(0, table.identity)
    basis = np.array([left_regular_matrix(table, h) for h in distinct],
                     dtype=complex)
    space = ConcreteOperatorSpace(basis, unit_index=0, is_system=True)
    pos = {h: i for i, h in enumerate(distinct)}
    sym_to_basis = np.zeros((nsym, len(distinct)), dtype=complex)
    for s, h in enumerate(imgs):
        sym_to_basis[s, pos[h]] = 1.0

    def bvec(h):
        v = np.zeros(len(distinct), dtype=complex)
        v[pos[h]] = 1.0
        return v

    e = bvec(table.identity)
    pair_map = {}
    for (i, x), (j, y), (k, z) in p.relations:
        if x == 0 or y == 0:
            continue   # degenerate relation rows reduce to unit facts
        lh = imgs[_sym_pos(p, i, x)]
        rh = imgs[_sym_pos(p, j, y)]
        val = table.identity if z == 0 else imgs[_sym_pos(p, k, z)]
        pair_map[(lh, rh)] = val
    for i in range(1, p.n + 1):
        g = imgs[_sym_pos(p, i, 1)]
        gi = imgs[_sym_pos(p, i, -1)]
        pair_map.setdefault((g, gi), table.identity)
        pair_map.setdefault((gi, g), table.identity)

    blocks = []
    seen = set()
    for (lh, rh), val in pair_map.items():
        key = (lh, rh)
        if key in seen:
            continue
        seen.add(key)
        left = np.stack([e, bvec(lh)])
        right = np.stack([e, bvec(rh)])
        tab = np.zeros((2, 2, len(distinct)), dtype=complex)
        tab[0, 0] = e
        tab[0, 1] = bvec(rh)
        tab[1, 0] = bvec(lh)
        tab[1, 1] = bvec(val)
        blocks.append(ProductBlock(left, right, tab))
    product = partial_product(space, blocks, adjoint_closure=False)
    return GroupSystem(p, table, space, product, distinct, sym_to_basis)


def _sym_pos(p: GroupPresentation, i: int, ex: int) -> int:
    if ex == 0:
        return 0
    return i if ex == 1 else p.n + i


def reduced_from_symbols(gs: GroupSystem, sym_coeffs) -> MatrixElement:
    c = np.asarray(sym_coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[None, None, :]
    red = np.einsum("ijs,sg->ijg", c, gs.sym_to_basis)
    return MatrixElement(gs.space, red)


def symbols_from_reduced(gs: GroupSystem, x: MatrixElement) -> np.ndarray:
    """Canonical symbol lift: the first symbol mapping to each basis element."""
    nsym = gs.sym_to_basis.shape[0]
    lift = np.zeros((gs.space.dim, nsym), dtype=complex)
    taken = set()
    for s in range(nsym):
        col = np.argmax(np.abs(gs.sym_to_basis[s]))
        if gs.sym_to_basis[s, col] != 0 and col not in taken:
            lift[col, s] = 1.0
            taken.add(col)
    return np.einsum("ijg,gs->ijs", x.coeffs, lift)


def group_fact_norm(sym_coeffs, p: GroupPresentation, L: int = 6,
                    opts: EngineOpts | None = None,
                    max_cosets: int = 10000) -> NormInterval:
    """Certified interval for the symbol-span norm of a finitely presented
    group: lower = exact regular-representation norm, upper = factorization
    search over the relation product with the coset-minimized sum of
    coefficient norms as base."""
    opts = opts or EngineOpts()
    gs = group_system(p, max_cosets)
    c = np.asarray(sym_coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[None, None, :]

    def base(x: MatrixElement) -> float:
        return intermediate_norm_upper(symbols_from_reduced(gs, x), p, gs.table,
                                       budget="fast")

    def steer(x: MatrixElement) -> float:
        sym = symbols_from_reduced(gs, x)
        return float(sum(spectral_norm(sym[:, :, s]) for s in range(sym.shape[2])))

    target = reduced_from_symbols(gs, c)
    eng = replace(opts, fast_norm=steer)
    witness = fact_norm_upper(target, gs.product, base, L, eng)
    precise = [intermediate_norm_upper(symbols_from_reduced(gs, f), p, gs.table)
               for f in witness.factors]
    upper = float(np.prod(precise))
    witness = FactorizationWitness(witness.factors, upper, target)
    lower = regular_rep_norm(c, p, gs.table)
    lower = min(lower, upper)
    return NormInterval(lower, upper, witness, {"kind": "left-regular-representation"})
