"""Concrete finite-dimensional operator spaces and exact matrix-level norms.

A space is a linearly independent family of complex d x d matrices, optionally
with a designated unit.  Elements are stored as coefficient tensors; all norms
are computed exactly by realizing the element as an nd x kd block matrix and
taking its largest singular value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RANK_RTOL = 1e-8      # relative threshold for rank / membership decisions
UNIT_NORM_TOL = 1e-9


class InputError(ValueError):
    """Bad numerical input (non-finite entries, shape mismatch, ...)."""


def _as_complex(a) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if not (np.all(np.isfinite(arr.real)) and np.all(np.isfinite(arr.imag))):
        raise InputError("non-finite entries")
    return arr


def spectral_norm(a) -> float:
    """Largest singular value of a complex matrix.

    Computed from a dense Hermitian eigen-solve of A*A (and AA* for wide
    matrices), which keeps the relative error well below 1e-10 at the sizes
    this package handles.
    """
    arr = _as_complex(a)
    if arr.ndim != 2:
        raise InputError("expected a matrix")
    if arr.size == 0:
        return 0.0
    n, m = arr.shape
    gram = arr.conj().T @ arr if n >= m else arr @ arr.conj().T
    ev = np.linalg.eigvalsh(gram)
    return float(np.sqrt(max(ev[-1], 0.0)))


@dataclass
class ConcreteOperatorSpace:
    """Span of linearly independent d x d matrices, with optional unit."""

    basis: np.ndarray                 # (g, d, d) complex
    unit_index: int | None = None
    is_system: bool = False

    def __post_init__(self):
        self.basis = _as_complex(self.basis)
        if self.basis.ndim != 3 or (self.basis.size and self.basis.shape[1] != self.basis.shape[2]):
            raise InputError("basis must be a stack of square matrices")
        self.basis.flags.writeable = False
        if self.dim:
            flat = self.basis.reshape(self.dim, -1)
            sv = np.linalg.svd(flat, compute_uv=False)
            if sv[-1] <= RANK_RTOL * sv[0]:
                raise InputError("basis is not linearly independent")
        if self.unit_index is not None:
            if not 0 <= self.unit_index < self.dim:
                raise InputError("unit_index out of range")
            if abs(spectral_norm(self.basis[self.unit_index]) - 1.0) > UNIT_NORM_TOL:
                raise InputError("designated unit does not have norm 1")
        if self.is_system:
            for b in self.basis:
                if not self.contains(b.conj().T):
                    raise InputError("span is not closed under conjugate transpose")
            if self.dim and not self.contains(np.eye(self.d)):
                raise InputError("operator system must contain the identity")

    @property
    def d(self) -> int:
        return self.basis.shape[1] if self.basis.ndim == 3 else 0

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coeffs_of(self, mat) -> tuple[np.ndarray, float]:
        """Least-squares coefficients of a matrix in this basis, with residual."""
        mat = _as_complex(mat)
        flat = self.basis.reshape(self.dim, -1).T
        c, *_ = np.linalg.lstsq(flat, mat.reshape(-1), rcond=None)
        resid = np.linalg.norm(flat @ c - mat.reshape(-1))
        return c, float(resid)

    def contains(self, mat) -> bool:
        mat = _as_complex(mat)
        scale = max(np.linalg.norm(mat), 1.0)
        _, resid = self.coeffs_of(mat)
        return resid <= RANK_RTOL * scale

    @property
    def unit(self) -> np.ndarray:
        if self.unit_index is None:
            raise InputError("space has no designated unit")
        return self.basis[self.unit_index]


@dataclass
class MatrixElement:
    """An n x k matrix over a space, stored as an (n, k, dim) coefficient tensor."""

    space: ConcreteOperatorSpace
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = _as_complex(self.coeffs)
        if self.coeffs.ndim != 3 or self.coeffs.shape[2] != self.space.dim:
            raise InputError("coefficient tensor must have shape (n, k, dim)")
        self.coeffs.flags.writeable = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.coeffs.shape[:2]


def element(space: ConcreteOperatorSpace, coeffs) -> MatrixElement:
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.ndim == 1:
        coeffs = coeffs[None, None, :]
    return MatrixElement(space, coeffs)


def unit_element(space: ConcreteOperatorSpace, n: int = 1) -> MatrixElement:
    """I_n tensor e as a matrix element."""
    c = np.zeros((n, n, space.dim), dtype=complex)
    if space.unit_index is None:
        raise InputError("space has no designated unit")
    for i in range(n):
        c[i, i, space.unit_index] = 1.0
    return MatrixElement(space, c)


def realize(x: MatrixElement) -> np.ndarray:
    """Block realization sum_g C_g (x) B_g, shape (n d, k d)."""
    n, k = x.shape
    d = x.space.d
    if x.space.dim == 0:
        return np.zeros((n * d, k * d), dtype=complex)
    out = np.einsum("ijg,grc->irjc", x.coeffs, x.space.basis)
    return out.reshape(n * d, k * d)


def matrix_norm(x: MatrixElement) -> float:
    return spectral_norm(realize(x))


def scale(alpha, x: MatrixElement, beta) -> MatrixElement:
    """alpha @ x @ beta for scalar matrices alpha, beta."""
    alpha = _as_complex(alpha)
    beta = _as_complex(beta)
    c = np.einsum("pi,ijg,jq->pqg", alpha, x.coeffs, beta)
    return MatrixElement(x.space, c)


def direct_sum(x: MatrixElement, y: MatrixElement) -> MatrixElement:
    if x.space is not y.space:
        raise InputError("direct sum requires elements over the same space")
    n, k = x.shape
    m, l = y.shape
    c = np.zeros((n + m, k + l, x.space.dim), dtype=complex)
    c[:n, :k] = x.coeffs
    c[n:, k:] = y.coeffs
    return MatrixElement(x.space, c)


def hconcat(x: MatrixElement, y: MatrixElement) -> MatrixElement:
    return MatrixElement(x.space, np.concatenate([x.coeffs, y.coeffs], axis=1))


def vconcat(x: MatrixElement, y: MatrixElement) -> MatrixElement:
    return MatrixElement(x.space, np.concatenate([x.coeffs, y.coeffs], axis=0))


def random_element(space, n, k, rng, scale_=1.0) -> MatrixElement:
    c = rng.standard_normal((n, k, space.dim)) + 1j * rng.standard_normal((n, k, space.dim))
    return MatrixElement(space, scale_ * c)


# ---------------------------------------------------------------------------
# axiom and unitality checkers


@dataclass
class AxiomReport:
    max_scale_violation: float
    max_dirsum_violation: float
    samples: int
    degenerate: bool = False

    @property
    def max_violation(self) -> float:
        return max(self.max_scale_violation, self.max_dirsum_violation)


def check_linf_axioms(space, sample_count, rng_seed=0, norm=None, max_size=4) -> AxiomReport:
    """Sample the two matrix-norm axioms and report the worst violation.

    `norm` defaults to the exact realized norm, for which both axioms hold up
    to rounding; a different callback can be audited against the same axioms.
    """
    if sample_count < 1:
        raise InputError("sample_count must be >= 1")
    if norm is None:
        norm = matrix_norm
    rng = np.random.default_rng(rng_seed)
    if space.dim == 0:
        return AxiomReport(0.0, 0.0, 0, degenerate=True)
    worst_scale = 0.0
    worst_dirsum = 0.0
    for _ in range(sample_count):
        n, k = rng.integers(1, max_size + 1, size=2)
        x = random_element(space, n, k, rng)
        p, q = rng.integers(1, max_size + 1, size=2)
        alpha = rng.standard_normal((p, n)) + 1j * rng.standard_normal((p, n))
        beta = rng.standard_normal((k, q)) + 1j * rng.standard_normal((k, q))
        lhs = norm(scale(alpha, x, beta))
        rhs = spectral_norm(alpha) * norm(x) * spectral_norm(beta)
        worst_scale = max(worst_scale, lhs - rhs)

        m, l = rng.integers(1, max_size + 1, size=2)
        y = random_element(space, m, l, rng)
        worst_dirsum = max(
            worst_dirsum, abs(norm(direct_sum(x, y)) - max(norm(x), norm(y)))
        )
    return AxiomReport(worst_scale, worst_dirsum, sample_count)


@dataclass
class UnitalityReport:
    max_row_deviation: float
    max_col_deviation: float
    max_product_violation: float
    passed: bool
    witness: MatrixElement | None = None


def check_unitality(space, trials, rng_seed=0, tol=1e-8, max_size=4) -> UnitalityReport:
    """Check the square-root-2 row/column equalities and the product criterion.

    For a genuinely unital concrete space both hold exactly: for ||x|| = 1,
    ||[I(x)e, x]|| = ||[I(x)e; x]|| = sqrt(2), and ||x + y|| is bounded by
    ||[x, I(x)e]|| ||[I(x)e; y]||.
    """
    if space.unit_index is None:
        raise InputError("check_unitality needs a designated unit")
    rng = np.random.default_rng(rng_seed)
    root2 = np.sqrt(2.0)
    worst_row = worst_col = worst_prod = 0.0
    witness = None
    for _ in range(trials):
        n = int(rng.integers(1, max_size + 1))
        x = random_element(space, n, n, rng)
        nx = matrix_norm(x)
        if nx > 1e-12:
            x = MatrixElement(space, x.coeffs / nx)
        e = unit_element(space, n)
        row_dev = abs(matrix_norm(hconcat(e, x)) - root2)
        col_dev = abs(matrix_norm(vconcat(e, x)) - root2)
        worst_row = max(worst_row, row_dev)
        worst_col = max(worst_col, col_dev)

        y = random_element(space, n, n, rng)
        lhs = matrix_norm(MatrixElement(space, x.coeffs + y.coeffs))
        rhs = matrix_norm(hconcat(x, e)) * matrix_norm(vconcat(e, y))
        if lhs - rhs > worst_prod:
            worst_prod = lhs - rhs
            witness = x
    passed = max(worst_row, worst_col, worst_prod) <= tol
    return UnitalityReport(worst_row, worst_col, worst_prod, passed, witness)


# ---------------------------------------------------------------------------
# minimal tensor product


def tensor_space(X: ConcreteOperatorSpace, Y: ConcreteOperatorSpace) -> ConcreteOperatorSpace:
    """Concrete realization of X (x) Y with basis B_g (x) B'_h, g-major order."""
    gx, gy = X.dim, Y.dim
    basis = np.einsum("gab,hcd->ghacbd", X.basis, Y.basis)
    basis = basis.reshape(gx * gy, X.d * Y.d, X.d * Y.d)
    unit = None
    if X.unit_index is not None and Y.unit_index is not None:
        unit = X.unit_index * gy + Y.unit_index
    return ConcreteOperatorSpace(basis, unit_index=unit,
                                 is_system=X.is_system and Y.is_system)


def tensor_element(z, X, Y, space=None) -> MatrixElement:
    """Coefficient tensor (n, k, dim X, dim Y) as an element of tensor_space(X, Y)."""
    z = _as_complex(z)
    if z.ndim == 2:
        z = z[None, None]
    if z.ndim != 4 or z.shape[2] != X.dim or z.shape[3] != Y.dim:
        raise InputError("tensor coefficients must have shape (n, k, dim X, dim Y)")
    if space is None:
        space = tensor_space(X, Y)
    n, k = z.shape[:2]
    return MatrixElement(space, z.reshape(n, k, X.dim * Y.dim))


def min_tensor_norm(z, X, Y) -> float:
    """Exact minimal tensor norm via the Kronecker realization."""
    return matrix_norm(tensor_element(z, X, Y))


# ---------------------------------------------------------------------------
# stock spaces used across the package and its tests


def full_matrix_space(d: int) -> ConcreteOperatorSpace:
    """All of M_d, with the identity as the first basis element."""
    mats = [np.eye(d)]
    for i in range(d):
        for j in range(d):
            if i == 0 and j == 0:
                continue
            m = np.zeros((d, d))
            m[i, j] = 1.0
            mats.append(m)
    return ConcreteOperatorSpace(np.array(mats, dtype=complex), unit_index=0, is_system=True)


def diagonal_space(d: int, with_unit: bool = True) -> ConcreteOperatorSpace:
    """Span of the diagonal matrix units in M_d."""
    mats = []
    if with_unit:
        mats.append(np.eye(d))
        idx = range(1, d)
    else:
        idx = range(d)
    for i in idx:
        m = np.zeros((d, d))
        m[i, i] = 1.0
        mats.append(m)
    return ConcreteOperatorSpace(
        np.array(mats, dtype=complex),
        unit_index=0 if with_unit else None,
        is_system=True,
    )


# ---------------------------------------------------------------------------
# JSON conventions: every complex scalar is a [re, im] pair


def complex_to_json(arr):
    arr = np.asarray(arr, dtype=complex)
    stacked = np.stack([arr.real, arr.imag], axis=-1)
    return stacked.tolist()


def complex_from_json(obj) -> np.ndarray:
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1] != 2:
        raise InputError("expected [re, im] pairs at the innermost level")
    return arr[..., 0] + 1j * arr[..., 1]


def space_to_json(space: ConcreteOperatorSpace) -> dict:
    return {
        "d": space.d,
        "basis": complex_to_json(space.basis),
        "unit_index": space.unit_index,
        "is_system": space.is_system,
    }


def space_from_json(obj: dict) -> ConcreteOperatorSpace:
    basis = complex_from_json(obj["basis"])
    if basis.ndim != 3:
        raise InputError("space JSON basis must be a list of matrices")
    if basis.shape[1] != obj.get("d", basis.shape[1]):
        raise InputError("space JSON d does not match basis shape")
    return ConcreteOperatorSpace(
        basis,
        unit_index=obj.get("unit_index"),
        is_system=bool(obj.get("is_system", False)),
    )
