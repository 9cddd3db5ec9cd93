"""Dense complex linear algebra primitives.

Every bipartite vector in the toolkit uses the left-major index convention:
the amplitude of ``alpha_i (x) beta_j`` sits at position ``i * n + j``.  With
that convention ``np.kron`` realises the tensor product and a state's
coefficient matrix is a plain reshape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EigenFailure,
    NotNormalized,
    NotSquare,
    NotUnitary,
)

UNITARY_TOL = 1e-10
NORM_TOL = 1e-12
TWO_PI = 2.0 * np.pi


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array (unwrapping toolkit types)."""
    if isinstance(a, UnitaryOperator):
        return a.matrix
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def unitarity_residual(m: np.ndarray) -> float:
    """Max-abs entry of ``M^dagger M - I``."""
    m = np.asarray(m, dtype=complex)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    """A validated unitary matrix.  Build it with :func:`validate_unitary`."""

    matrix: np.ndarray
    unitarity_residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    def adjoint(self) -> "UnitaryOperator":
        return UnitaryOperator(self.matrix.conj().T, self.unitarity_residual)

    def __matmul__(self, other):
        if isinstance(other, UnitaryOperator):
            m = self.matrix @ other.matrix
            return UnitaryOperator(m, unitarity_residual(m))
        return self.matrix @ np.asarray(other)

    def __repr__(self):
        return f"UnitaryOperator(dim={self.dim}, residual={self.unitarity_residual:.1e})"


def validate_unitary(m, tol: float = UNITARY_TOL) -> UnitaryOperator:
    """Check that ``m`` is unitary to within ``tol`` and wrap it.

    Raises :class:`NotSquare` for non-square input and :class:`NotUnitary`
    (carrying the residual) when ``max|M^dagger M - I| > tol``.
    """
    if isinstance(m, UnitaryOperator):
        if m.unitarity_residual <= tol:
            return m
        m = m.matrix
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NotSquare(f"matrix of shape {m.shape} is not square")
    res = unitarity_residual(m)
    if res > tol:
        raise NotUnitary(res, tol)
    return UnitaryOperator(m, res)


def eigenphases(u) -> np.ndarray:
    """Phases in ``[0, 2pi)`` of the eigenvalues of ``u``, ascending."""
    m = as_matrix(u)
    try:
        z = np.linalg.eigvals(m)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(z)):
        raise EigenFailure("non-finite eigenvalues")
    th = np.mod(np.angle(z), TWO_PI)
    th[th >= TWO_PI] = 0.0
    return np.sort(th)


@dataclass(frozen=True, eq=False)
class BipartiteState:
    """Unit vector on an ``m x n`` bipartite space."""

    amplitudes: np.ndarray
    m: int
    n: int

    def __post_init__(self):
        a = _frozen(np.ravel(self.amplitudes))
        if a.shape[0] != self.m * self.n:
            raise DimensionMismatch(
                f"{a.shape[0]} amplitudes do not fit dims ({self.m}, {self.n})"
            )
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > NORM_TOL:
            raise NotNormalized(f"state norm {nrm!r} differs from 1")
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def from_vector(cls, v, m: int, n: int, normalize: bool = False) -> "BipartiteState":
        v = np.asarray(v, dtype=complex).ravel()
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(v, m, n)

    @classmethod
    def product(cls, alpha, beta, normalize: bool = True) -> "BipartiteState":
        alpha = np.asarray(alpha, dtype=complex).ravel()
        beta = np.asarray(beta, dtype=complex).ravel()
        if normalize:
            alpha = alpha / np.linalg.norm(alpha)
            beta = beta / np.linalg.norm(beta)
        return cls(np.kron(alpha, beta), alpha.size, beta.size)

    @property
    def dims(self) -> tuple[int, int]:
        return self.m, self.n

    @property
    def coefficient_matrix(self) -> np.ndarray:
        return self.amplitudes.reshape(self.m, self.n)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.amplitudes
        return self.amplitudes.astype(dtype)

    def __len__(self):
        return self.amplitudes.shape[0]


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    rank: int
    dims: tuple[int, int] = field(default=(0, 0))

    @property
    def largest(self) -> float:
        return float(self.coefficients[0])

    def reconstruct(self) -> np.ndarray:
        """Amplitude vector ``sum_i s_i left_i (x) right_i``."""
        k = self.coefficients.size
        c = (self.left_basis[:, :k] * self.coefficients) @ self.right_basis[:, :k].T
        return c.ravel()


def schmidt_decompose(psi, rank_tol: float | None = None,
                      dims: tuple[int, int] | None = None) -> SchmidtDecomposition:
    """Schmidt decomposition via the SVD of the coefficient matrix.

    ``rank_tol`` defaults to ``1e-8 * s_1``.  Plain vectors are accepted when
    ``dims`` is given.
    """
    if isinstance(psi, BipartiteState):
        m, n = psi.dims
        c = psi.coefficient_matrix
    else:
        if dims is None:
            raise DimensionMismatch("dims are required for a bare amplitude vector")
        m, n = dims
        v = np.asarray(psi, dtype=complex).ravel()
        if v.size != m * n:
            raise DimensionMismatch(f"{v.size} amplitudes do not fit dims ({m}, {n})")
        c = v.reshape(m, n)
    u, s, vh = np.linalg.svd(c)
    if rank_tol is None:
        rank_tol = 1e-8 * s[0]
    rank = int(np.count_nonzero(s > rank_tol))
    return SchmidtDecomposition(
        coefficients=s, left_basis=u, right_basis=vh.T, rank=rank, dims=(m, n)
    )


def schmidt_deficit(coefficients) -> float:
    """``sqrt(1 - s_1^2)`` for normalised Schmidt coefficients, computed as
    ``sqrt(sum_{i>1} s_i^2 / sum_i s_i^2)`` so that it stays accurate near 0."""
    s = np.sort(np.abs(np.asarray(coefficients, float)))[::-1]
    total = float(np.sum(s ** 2))
    return float(np.sqrt(min(1.0, np.sum(s[1:] ** 2) / total)))


def largest_schmidt_coefficients(vectors: np.ndarray, m: int, n: int) -> np.ndarray:
    """``s_1`` for a stack of amplitude vectors of shape ``(..., m*n)``."""
    c = np.asarray(vectors).reshape(*np.shape(vectors)[:-1], m, n)
    return np.linalg.svd(c, compute_uv=False)[..., 0]


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a), as_matrix(b))


def swap_operator(n: int) -> np.ndarray:
    """The swap ``beta (x) alpha <- alpha (x) beta`` on ``C^n (x) C^n``."""
    s = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            s[j * n + i, i * n + j] = 1.0
    return s


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def haar_unitary_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_unitary(dim: int, seed=None) -> UnitaryOperator:
    """Haar-distributed unitary (QR of a complex Ginibre matrix, phase-fixed)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    q = haar_unitary_matrix(dim, _rng(seed))
    return UnitaryOperator(q, unitarity_residual(q))


def random_unit_vectors(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random unit vectors in ``C^dim`` as rows."""
    z = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_state(dim: int, seed=None) -> np.ndarray:
    return random_unit_vectors(dim, 1, _rng(seed))[0]


def random_product_state(m: int, n: int, seed=None) -> BipartiteState:
    if m < 1 or n < 1:
        raise ValueError("factor dimensions must be >= 1")
    rng = _rng(seed)
    alpha = random_unit_vectors(m, 1, rng)[0]
    beta = random_unit_vectors(n, 1, rng)[0]
    return BipartiteState.product(alpha, beta, normalize=True)
