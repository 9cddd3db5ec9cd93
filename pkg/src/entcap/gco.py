"""Generalised control operators.

A family ``U_1 .. U_m`` of unitaries on ``C^n`` together with an orthonormal
control basis ``alpha_1 .. alpha_m`` of ``C^m`` defines

    U (alpha_i (x) beta) = alpha_i (x) U_i beta,

i.e. ``U = sum_i |alpha_i><alpha_i| (x) U_i``.  For a commuting family with
common eigenbasis ``beta_j`` and ``U_i beta_j = exp(i pi theta_ij) beta_j``
the output of a product input ``sum a_i alpha_i (x) sum b_j beta_j`` has
coefficient matrix ``D_a Theta D_b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.optimize import least_squares

from .capacity import BoundStatus, CapacityKind, CapacityResult, capacity_dual
from .errors import InvalidFamily, NotUnitary
from .linalg import (
    UNITARY_TOL,
    BipartiteState,
    as_matrix,
    schmidt_deficit,
    unitarity_residual,
)
from .optimize import (
    BoxChart,
    Chart,
    OptimizerOptions,
    ProductStateChart,
    nested_minimax,
    _project_sphere,
    coords_from_vector,
    multistart,
    vector_from_coords,
)

COMMUTE_TOL = 1e-10
RANK_TOL = 1e-8
WITNESS_TOL = 1e-8


class FamilyDimensionError(InvalidFamily):
    """Raised when the control dimension exceeds the target dimension."""


def _unitary(m, what: str) -> np.ndarray:
    try:
        mat = as_matrix(m)
    except ValueError as exc:
        raise InvalidFamily(f"{what}: {exc}") from exc
    if mat.shape[0] != mat.shape[1]:
        raise InvalidFamily(f"{what} of shape {mat.shape} is not square")
    res = unitarity_residual(mat)
    if res > UNITARY_TOL:
        raise InvalidFamily(f"{what} is not unitary") from NotUnitary(res, UNITARY_TOL)
    return mat


@dataclass(frozen=True, eq=False)
class UnitaryFamily:
    """Members ``U_1 .. U_m`` on ``C^n`` and a control basis (columns)."""

    members: tuple
    control_basis: np.ndarray | None = None
    name: str = ""

    def __init__(self, members, control_basis=None, name: str = ""):
        mats = tuple(_unitary(u, f"member {i}") for i, u in enumerate(members))
        if not mats:
            raise InvalidFamily("a unitary family needs at least one member")
        n = mats[0].shape[0]
        if any(u.shape[0] != n for u in mats):
            raise InvalidFamily("family members act on spaces of different dimension")
        m = len(mats)
        if m > n:
            raise FamilyDimensionError(
                f"control dimension {m} exceeds target dimension {n}")
        if control_basis is None:
            basis = np.eye(m, dtype=complex)
        else:
            basis = _unitary(control_basis, "control basis")
            if basis.shape[0] != m:
                raise InvalidFamily(f"control basis is {basis.shape[0]}-dimensional, "
                                    f"family has {m} members")
        for u in mats:
            u.setflags(write=False)
        basis.setflags(write=False)
        object.__setattr__(self, "members", mats)
        object.__setattr__(self, "control_basis", basis)
        object.__setattr__(self, "name", name)

    @property
    def m(self) -> int:
        return len(self.members)

    @property
    def n(self) -> int:
        return self.members[0].shape[0]

    @property
    def dims(self) -> tuple[int, int]:
        return self.m, self.n

    def stack(self) -> np.ndarray:
        return np.array(self.members)

    def is_abelian(self, tol: float = COMMUTE_TOL) -> bool:
        us = self.members
        return all(np.linalg.norm(us[i] @ us[j] - us[j] @ us[i], 2) < tol
                   for i in range(len(us)) for j in range(i + 1, len(us)))

    def relative(self) -> "UnitaryFamily":
        """The family ``{U_1^dagger U_i}``; its operator differs by a local factor."""
        u0 = self.members[0].conj().T
        return UnitaryFamily([u0 @ u for u in self.members], self.control_basis,
                             f"{self.name}-relative" if self.name else "")


@dataclass(frozen=True, eq=False)
class ThetaMatrix:
    """Eigenphases ``theta_ij`` in ``[0, 2)`` of a commuting family: member
    ``i`` acts on common eigenvector ``j`` as ``exp(i pi theta_ij)``."""

    phases: np.ndarray
    common_eigenbasis: np.ndarray

    @property
    def entries(self) -> np.ndarray:
        return np.exp(1j * np.pi * self.phases)

    @property
    def shape(self) -> tuple[int, int]:
        return self.phases.shape

    @property
    def rank(self) -> int:
        s = np.linalg.svd(self.entries, compute_uv=False)
        return int(np.count_nonzero(s > RANK_TOL * s[0]))

    @classmethod
    def from_entries(cls, entries, eigenbasis=None) -> "ThetaMatrix":
        e = np.asarray(entries, dtype=complex)
        if not np.allclose(np.abs(e), 1.0, atol=1e-12):
            raise InvalidFamily("Theta entries must have modulus 1")
        phases = np.mod(np.angle(e) / np.pi, 2.0)
        phases[phases >= 2.0] = 0.0
        basis = np.eye(e.shape[1], dtype=complex) if eigenbasis is None else eigenbasis
        return cls(phases, np.asarray(basis, dtype=complex))


@dataclass(frozen=True, eq=False)
class GcoOperator:
    unitary: np.ndarray
    family: UnitaryFamily
    abelian: bool
    theta: ThetaMatrix | None = None

    @property
    def dims(self) -> tuple[int, int]:
        return self.family.dims


def common_eigenbasis(mats) -> np.ndarray:
    """Unitary whose columns diagonalise every matrix of a commuting normal
    family."""
    mats = [as_matrix(u) for u in mats]
    n = mats[0].shape[0]
    q = np.eye(n, dtype=complex)
    # refine cluster by cluster: diagonalise each member inside the
    # eigenspaces left degenerate by the previous ones
    blocks = [np.arange(n)]
    for u in mats:
        new_q = q.copy()
        new_blocks = []
        for blk in blocks:
            sub = q[:, blk].conj().T @ u @ q[:, blk]
            t, z = scipy.linalg.schur(sub, output="complex")
            new_q[:, blk] = q[:, blk] @ z
            ev = np.diag(t)
            labels = np.full(len(blk), -1)
            for k in range(len(blk)):
                if labels[k] < 0:
                    labels[(labels < 0) & (np.abs(ev - ev[k]) < 1e-8)] = k
            for lab in np.unique(labels):
                new_blocks.append(blk[labels == lab])
        q, blocks = new_q, new_blocks
    return q


def _theta(family: UnitaryFamily) -> ThetaMatrix:
    q = common_eigenbasis(family.members)
    diag = np.array([np.diag(q.conj().T @ u @ q) for u in family.members])
    off = max(np.max(np.abs(q.conj().T @ u @ q - np.diag(d)))
              for u, d in zip(family.members, diag))
    if off > 1e-8:
        raise InvalidFamily(f"commuting family could not be diagonalised (residual {off:.1e})")
    return ThetaMatrix.from_entries(diag / np.abs(diag), q)


def gco_operator_matrix(family: UnitaryFamily) -> np.ndarray:
    m, n = family.dims
    block = scipy.linalg.block_diag(*family.members)
    a = np.kron(family.control_basis, np.eye(n))
    return a @ block @ a.conj().T


def gco_build(family: UnitaryFamily) -> GcoOperator:
    """Assemble ``sum_i |alpha_i><alpha_i| (x) U_i`` and, for commuting
    families, its Theta matrix."""
    u = gco_operator_matrix(family)
    res = unitarity_residual(u)
    if res > UNITARY_TOL:
        raise InvalidFamily("assembled operator is not unitary") from NotUnitary(res, UNITARY_TOL)
    u.setflags(write=False)
    abelian = family.is_abelian()
    return GcoOperator(u, family, abelian, _theta(family) if abelian else None)


def _probe_vectors(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    structured = np.vstack([np.eye(n), np.ones((1, n)) / np.sqrt(n)])
    z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return np.vstack([structured, z / np.linalg.norm(z, axis=1, keepdims=True)])


def family_rank(family: UnitaryFamily, probes: int = 64, seed: int = 0) -> int:
    """``max_beta rank [U_1 beta .. U_m beta]``.

    Commuting families use ``rank(Theta)``; otherwise the rank is maximised
    over basis vectors, the uniform superposition and ``probes`` random
    vectors, stopping once it reaches ``m``.
    """
    if family.is_abelian():
        return _theta(family).rank
    us = family.stack()
    best = 0
    for beta in _probe_vectors(family.n, probes, seed):
        cols = (us @ beta).T
        s = np.linalg.svd(cols, compute_uv=False)
        best = max(best, int(np.count_nonzero(s > RANK_TOL * s[0])))
        if best == family.m:
            break
    return best


def _nonneg_sphere_chart(m: int, n: int) -> Chart:
    def sample(rng, count):
        return np.abs(rng.standard_normal((count, m + n)))

    def project(x):
        x = np.abs(x)
        a = x[..., :m] / np.linalg.norm(x[..., :m], axis=-1, keepdims=True)
        b = x[..., m:] / np.linalg.norm(x[..., m:], axis=-1, keepdims=True)
        return np.concatenate([a, b], axis=-1)

    uni = np.concatenate([np.ones(m) / np.sqrt(m), np.ones(n) / np.sqrt(n)])
    return Chart(m + n, sample, project, uni[None], f"nonnegative_spheres({m},{n})")


def capacity_dual_abelian(theta: ThetaMatrix, opts: OptimizerOptions | None = None,
                          control_basis=None) -> CapacityResult:
    """``sqrt(1 - min_{a,b} s_1(D_a Theta D_b)^2)`` over nonnegative unit
    ``a`` and ``b``.

    The witness product state is ``(A a) (x) (Q b)`` with ``A`` the control
    basis (identity unless given) and ``Q`` the common eigenbasis.
    """
    opts = opts or OptimizerOptions()
    ent = theta.entries
    m, n = ent.shape
    chart = _nonneg_sphere_chart(m, n)

    def s1(x):
        a, b = x[..., :m], x[..., m:]
        mat = a[..., :, None] * ent * b[..., None, :]
        return np.linalg.svd(mat, compute_uv=False)[..., 0]

    res = multistart(s1, chart, opts, sense=-1)
    x = res.best_point
    a, b = x[:m], x[m:]
    sv = np.linalg.svd(a[:, None] * ent * b[None, :], compute_uv=False)
    s_mu = float(min(1.0, sv[0]))
    basis = np.eye(m) if control_basis is None else as_matrix(control_basis)
    witness = BipartiteState.product(basis @ a, theta.common_eigenbasis @ b)
    return CapacityResult(
        value=schmidt_deficit(sv),
        kind=CapacityKind.DUAL_CE,
        dims=(m, n),
        bound_status=BoundStatus.NUMERIC_ESTIMATE,
        witness_state=witness,
        s_mu=s_mu,
        diagnostics={
            "restarts": opts.restarts,
            "spread": res.spread,
            "iterations": res.iterations,
            "evaluations": res.evaluations,
            "converged": res.converged,
            "seed": opts.seed,
            "a": a.tolist(),
            "b": b.tolist(),
            "path": "abelian",
        },
    )


def gram_matrix(family: UnitaryFamily, beta) -> np.ndarray:
    """``G_ij = <U_i beta | U_j beta>``."""
    beta = np.asarray(beta, dtype=complex).ravel()
    beta = beta / np.linalg.norm(beta)
    cols = family.stack() @ beta
    return np.conj(cols) @ cols.T


def gram_residual(family: UnitaryFamily, beta) -> float:
    """Frobenius norm of the off-diagonal part of the Gram matrix."""
    g = gram_matrix(family, beta)
    return float(np.linalg.norm(g - np.diag(np.diag(g))))


def _sphere_chart(n: int) -> Chart:
    def sample(rng, count):
        z = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
        return coords_from_vector(z)

    uni = coords_from_vector(np.ones(n) / np.sqrt(n))
    return Chart(2 * n - 1, sample, _project_sphere, uni[None], f"sphere({n})")


def max_entanglement_witness(family: UnitaryFamily,
                             opts: OptimizerOptions | None = None,
                             tol: float = WITNESS_TOL) -> np.ndarray | None:
    """A unit ``beta`` making ``U_1 beta .. U_m beta`` orthonormal, or ``None``.

    Minimises ``sum_{i<j} |G_ij|^2`` by multi-start pattern search (the first
    start is the uniform superposition) and polishes candidates with a
    least-squares solve.  The first restart, in index order, whose
    off-diagonal Gram norm falls below ``tol`` is returned.  Then
    ``U((sum_i alpha_i)/sqrt(m) (x) beta)`` is maximally entangled.
    """
    opts = opts or OptimizerOptions(restarts=64)
    m, n = family.dims
    if m > n:
        raise FamilyDimensionError(f"control dimension {m} exceeds target dimension {n}")
    us = family.stack()
    iu = np.triu_indices(m, 1)
    chart = _sphere_chart(n)

    def objective(x):
        beta = vector_from_coords(x, n)
        cols = np.einsum("kij,...j->...ki", us, beta)
        g = np.einsum("...ki,...li->...kl", np.conj(cols), cols)
        return np.sum(np.abs(g[..., iu[0], iu[1]]) ** 2, axis=-1)

    if m == 1:
        return np.ones(n, dtype=complex) / np.sqrt(n)

    res = multistart(objective, chart, opts, sense=-1)

    def residuals(z):
        beta = (z[:n] + 1j * z[n:]) / np.linalg.norm(z)
        g = np.conj(us @ beta) @ (us @ beta).T
        off = g[iu]
        return np.concatenate([off.real, off.imag])

    order = np.arange(len(res.per_restart_values))
    for k in order:
        if res.per_restart_values[k] > 1e-2:
            continue
        beta = vector_from_coords(res.per_restart_points[k], n)
        if gram_residual(family, beta) >= tol:
            z0 = np.concatenate([beta.real, beta.imag])
            sol = least_squares(residuals, z0, xtol=1e-15, ftol=1e-15, gtol=1e-15)
            beta = (sol.x[:n] + 1j * sol.x[n:]) / np.linalg.norm(sol.x)
        if gram_residual(family, beta) < tol:
            return beta
    return None


def dual_capacity_of_family(family: UnitaryFamily,
                            opts: OptimizerOptions | None = None) -> CapacityResult:
    """Generic dual capacity of the assembled operator."""
    g = gco_build(family)
    return capacity_dual(g.unitary, family.m, family.n, opts)


class _DiagonalObjective:
    """``1 - |<psi|U^dagger (D_1 (x) D_2)|psi>|^2`` for diagonal phases."""

    def __init__(self, u: np.ndarray, m: int, n: int):
        self.ud = u.conj().T
        self.m, self.n = m, n
        self.inner = ProductStateChart(m, n)

    def prepare(self, x):
        d1 = np.exp(1j * x[:, : self.m])
        d2 = np.exp(1j * x[:, self.m:])
        diag = (d1[:, :, None] * d2[:, None, :]).reshape(len(x), -1)
        return self.ud[None] * diag[:, None, :]

    def inner_states(self, y):
        return self.inner.states(y)

    def evaluate_states(self, w, psi):
        z = np.einsum("pki,pki->pk", np.conj(psi), psi @ np.swapaxes(w, -1, -2))
        return 1.0 - np.abs(z) ** 2

    def evaluate(self, w, y):
        return self.evaluate_states(w, self.inner.states(y))


def diagonal_product_distance(u, m: int, n: int,
                              opts: OptimizerOptions | None = None,
                              inner_opts: OptimizerOptions | None = None):
    """``min d_pi(U, D_1 (x) D_2)`` over diagonal unitaries ``D_1, D_2``.

    Returns ``(distance, (d1, d2))`` with the phases of the best pair found;
    ``opts.restarts`` sets the number of outer starts.
    """
    mat = as_matrix(u)
    opts = opts or OptimizerOptions(restarts=64)
    inner_opts = inner_opts or OptimizerOptions(restarts=24, seed=opts.seed)
    obj = _DiagonalObjective(mat, m, n)
    outer = BoxChart(np.zeros(m + n), np.full(m + n, 2 * np.pi), np.zeros((1, m + n)))
    res = nested_minimax(obj, outer, obj.inner, opts, inner_opts)
    x = res.best_point
    return float(np.sqrt(max(0.0, res.certificate))), (x[:m].copy(), x[m:].copy())


# --------------------------------------------------------------------------
# catalogue


def clock(n: int, power: int = 1) -> np.ndarray:
    """``Z^power`` with ``Z alpha_j = omega^j alpha_j``, ``omega = exp(2 pi i/n)``."""
    return np.diag(np.exp(2j * np.pi * power * np.arange(n) / n))


def shift(n: int) -> np.ndarray:
    """Cyclic shift ``alpha_j -> alpha_{j+1}``."""
    return np.roll(np.eye(n, dtype=complex), 1, axis=0)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)


def controlled_W(w) -> UnitaryFamily:
    w = _unitary(w, "W")
    return UnitaryFamily([np.eye(w.shape[0]), w], name="controlled_W")


def controlled_phase(theta: float) -> UnitaryFamily:
    """``{I, diag(1, exp(i pi theta))}``."""
    return UnitaryFamily([np.eye(2), np.diag([1.0, np.exp(1j * np.pi * theta)])],
                         name=f"controlled_phase({theta:g})")


def cnot() -> UnitaryFamily:
    return UnitaryFamily([np.eye(2), PAULI_X], name="cnot")


def cz() -> UnitaryFamily:
    return UnitaryFamily([np.eye(2), PAULI_Z], name="cz")


def qft_powers(n: int) -> UnitaryFamily:
    """``{Z^0, .., Z^(n-1)}`` with ``Z`` the clock operator of dimension ``n``."""
    return UnitaryFamily([clock(n, k) for k in range(n)], name=f"qft_powers({n})")


def shift_phase_3() -> UnitaryFamily:
    """``{I, Z, X}`` in dimension 3 with ``X`` the cyclic shift."""
    return UnitaryFamily([np.eye(3), clock(3), shift(3)], name="shift_phase_3")


def trivial(m: int = 2, n: int | None = None) -> UnitaryFamily:
    n = m if n is None else n
    return UnitaryFamily([np.eye(n)] * m, name="trivial")


@dataclass(frozen=True)
class Catalog:
    constructors: dict[str, Callable[..., UnitaryFamily]] = field(default_factory=dict)

    def __getitem__(self, name):
        return self.constructors[name]

    def __contains__(self, name):
        return name in self.constructors

    def __iter__(self):
        return iter(self.constructors)

    def names(self) -> list[str]:
        return list(self.constructors)


def builtin_families() -> Catalog:
    return Catalog({
        "controlled_W": controlled_W,
        "controlled_phase": controlled_phase,
        "cnot": cnot,
        "cz": cz,
        "qft_powers": qft_powers,
        "shift_phase_3": shift_phase_3,
        "trivial": trivial,
    })


def named_member(spec: str, n: int) -> np.ndarray:
    """Member matrix from a name: ``I``, ``X`` or ``SHIFT`` (cyclic shift),
    ``Z`` (clock) or ``QFT_POWER k`` (clock to the ``k``)."""
    parts = spec.split()
    key = parts[0].upper() if parts else ""
    if key == "I" and len(parts) == 1:
        return np.eye(n, dtype=complex)
    if key in ("X", "SHIFT") and len(parts) == 1:
        return shift(n)
    if key == "Z" and len(parts) == 1:
        return clock(n)
    if key == "QFT_POWER" and len(parts) == 2:
        try:
            k = int(parts[1])
        except ValueError:
            raise InvalidFamily(f"bad power in member {spec!r}") from None
        return clock(n, k)
    raise InvalidFamily(f"unknown member name {spec!r}")
