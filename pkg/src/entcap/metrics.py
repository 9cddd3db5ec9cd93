"""Trace-distance metrics on unitary operators.

For a pure state ``psi`` the state-induced pseudometric is
``d_psi(U, V) = sqrt(1 - |<psi|U^dagger V|psi>|^2)``; maximising it over a set
``K`` of states gives ``d_K``.  Over all pure states the maximum has the closed
form ``sin(alpha / 2)`` (or 1 once ``alpha >= pi``) where ``alpha`` is the
length of the smallest arc of the unit circle holding every eigenvalue of
``U^dagger V``.  Over pure product states it is the product-state metric
``d_pi`` and has to be found numerically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import nnls

from .errors import DimensionMismatch, EigenFailure, OutOfRange
from .linalg import (
    TWO_PI,
    BipartiteState,
    as_matrix,
    eigenphases,
    random_unit_vectors,
)
from .optimize import OptimizerOptions, maximize_over_product_states


class Method(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    OPTIMIZED = "optimized"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class MetricValue:
    value: float
    witness: BipartiteState | np.ndarray | None
    method: Method
    evaluations: int = 0

    def __float__(self):
        return self.value


# --------------------------------------------------------------------------
# state sets


@dataclass(frozen=True)
class AllPureStates:
    kind = "all_pure_states"


@dataclass(frozen=True)
class PureProductStates:
    m: int
    n: int
    kind = "pure_product_states"


@dataclass(frozen=True, eq=False)
class ExplicitList:
    states: tuple

    kind = "explicit_list"

    def __init__(self, states):
        states = tuple(states)
        if not states:
            raise ValueError("an explicit state set needs at least one state")
        sizes = {len(np.ravel(s)) for s in states}
        dims = {s.dims for s in states if isinstance(s, BipartiteState)}
        if len(sizes) > 1 or len(dims) > 1:
            raise DimensionMismatch("explicit state set mixes dimensions")
        object.__setattr__(self, "states", states)

    def vectors(self) -> np.ndarray:
        return np.array([np.asarray(s, dtype=complex).ravel() for s in self.states])


@dataclass(frozen=True)
class Sampler:
    """``count`` seeded random pure states, product states when ``dims`` is
    given and ``product`` is set."""

    count: int
    seed: int = 0
    dims: tuple[int, int] | None = None
    product: bool = False

    kind = "sampler"

    def vectors(self, dim: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        if self.product:
            if self.dims is None:
                raise ValueError("a product-state sampler needs dims")
            m, n = self.dims
            a = random_unit_vectors(m, self.count, rng)
            b = random_unit_vectors(n, self.count, rng)
            return (a[:, :, None] * b[:, None, :]).reshape(self.count, m * n)
        return random_unit_vectors(dim, self.count, rng)


StateSet = AllPureStates | PureProductStates | ExplicitList | Sampler


# --------------------------------------------------------------------------


def _pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    u, v = as_matrix(u), as_matrix(v)
    if u.shape != v.shape or u.shape[0] != u.shape[1]:
        raise DimensionMismatch(f"operator shapes {u.shape} and {v.shape} differ")
    return u, v


def _residual_distance(upsi, vpsi):
    """``sqrt(1 - |<U psi|V psi>|^2)`` evaluated as ``|V psi - z U psi|``,
    which keeps full relative accuracy for nearly equal images."""
    z = np.sum(np.conj(upsi) * vpsi, axis=-1)
    r = np.linalg.norm(vpsi - z[..., None] * upsi, axis=-1)
    return np.clip(r, 0.0, 1.0)


def d_state(u, v, psi) -> float:
    """``sqrt(1 - |<psi|U^dagger V|psi>|^2)`` for a pure state ``psi``."""
    u, v = _pair(u, v)
    vec = np.asarray(psi, dtype=complex).ravel()
    if vec.size != u.shape[0]:
        raise DimensionMismatch(f"state of size {vec.size} vs operator dim {u.shape[0]}")
    vec = vec / np.linalg.norm(vec)
    return float(_residual_distance(u @ vec, v @ vec))


def d_state_batch(u, v, states: np.ndarray) -> np.ndarray:
    """:func:`d_state` for every row of ``states``."""
    u, v = _pair(u, v)
    states = np.asarray(states, dtype=complex)
    states = states / np.linalg.norm(states, axis=-1, keepdims=True)
    return _residual_distance(states @ u.T, states @ v.T)


def covering_arc(phases) -> tuple[float, int]:
    """Length of the smallest closed arc holding all the given phases, and the
    index (in sorted order) where that arc starts."""
    th = np.sort(np.mod(np.asarray(phases, float), TWO_PI))
    if th.size == 0:
        raise ValueError("no phases")
    gaps = np.diff(np.append(th, th[0] + TWO_PI))
    k = int(np.argmax(gaps))
    # the arc runs from th[k + 1] counterclockwise to th[k]
    return float(TWO_PI - gaps[k]), (k + 1) % th.size


def distance_from_arc(alpha: float) -> float:
    if alpha >= np.pi:
        return 1.0
    return float(np.clip(np.sin(alpha / 2.0), 0.0, 1.0))


def d_eigenphase(u, v) -> float:
    """Global metric ``max_psi d_psi(U, V)`` from the eigenphases of
    ``U^dagger V``."""
    u, v = _pair(u, v)
    alpha, _ = covering_arc(eigenphases(u.conj().T @ v))
    return distance_from_arc(alpha)


def eigenphase_witness(u, v) -> np.ndarray:
    """A pure state attaining :func:`d_eigenphase`.

    Below a half-turn it is the balanced superposition of the eigenvectors
    at the two ends of the covering arc; otherwise a superposition whose
    eigenvalue weights put the origin at the barycentre.
    """
    u, v = _pair(u, v)
    w = u.conj().T @ v
    try:
        t, z = scipy.linalg.schur(w, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenFailure(str(exc)) from exc
    ev = np.diag(t)
    th = np.mod(np.angle(ev), TWO_PI)
    order = np.argsort(th)
    alpha, start = covering_arc(th)
    if alpha < np.pi:
        i, j = order[start], order[(start - 1) % th.size]
        psi = (z[:, i] + z[:, j]) / np.sqrt(2.0) if i != j else z[:, i]
        return psi / np.linalg.norm(psi)
    big = 1e3
    a = np.vstack([ev.real, ev.imag, big * np.ones(ev.size)])
    p, _ = nnls(a, np.array([0.0, 0.0, big]))
    p = p / p.sum()
    psi = z @ np.sqrt(p)
    return psi / np.linalg.norm(psi)


def d_restricted(u, v, K, opts: OptimizerOptions | None = None) -> MetricValue:
    """``d_K(U, V) = max_{psi in K} d_psi(U, V)`` with a witness state."""
    u, v = _pair(u, v)
    dim = u.shape[0]
    if isinstance(K, AllPureStates):
        psi = eigenphase_witness(u, v)
        return MetricValue(d_eigenphase(u, v), psi, Method.CLOSED_FORM)
    if isinstance(K, PureProductStates):
        return product_state_distance(u, v, K.m, K.n, opts)
    if isinstance(K, ExplicitList):
        vecs = K.vectors()
        if vecs.shape[1] != dim:
            raise DimensionMismatch(f"states of size {vecs.shape[1]} vs operator dim {dim}")
        d = d_state_batch(u, v, vecs)
        k = int(np.argmax(d))
        return MetricValue(float(d[k]), K.states[k], Method.SAMPLED, len(d))
    if isinstance(K, Sampler):
        vecs = K.vectors(dim)
        if vecs.shape[1] != dim:
            raise DimensionMismatch(f"sampled states of size {vecs.shape[1]} vs operator dim {dim}")
        d = d_state_batch(u, v, vecs)
        k = int(np.argmax(d))
        w = vecs[k]
        if K.dims is not None:
            w = BipartiteState(w / np.linalg.norm(w), *K.dims)
        return MetricValue(float(d[k]), w, Method.SAMPLED, len(d))
    raise TypeError(f"unsupported state set {K!r}")


def product_state_distance(u, v, m: int, n: int,
                           opts: OptimizerOptions | None = None,
                           extra_starts=None) -> MetricValue:
    """``d_pi(U, V)``: the maximum of ``d_psi`` over pure product states."""
    u, v = _pair(u, v)
    if m * n != u.shape[0]:
        raise DimensionMismatch(f"dims ({m}, {n}) do not factor operator dim {u.shape[0]}")
    w = u.conj().T @ v

    def objective(a, b):
        psi = (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (m * n,))
        z = np.einsum("...i,...i->...", np.conj(psi), psi @ w.T)
        return 1.0 - np.abs(z) ** 2

    res = maximize_over_product_states(objective, m, n, opts, extra_starts=extra_starts)
    a, b = res.decoded
    witness = BipartiteState.product(a, b)
    value = d_state(u, v, witness)
    return MetricValue(value, witness, Method.OPTIMIZED, res.evaluations)


def compose_tensor_distance(d1: float, d2: float) -> float:
    """Distance of ``U (x) W`` from ``V (x) X`` given ``d(U, V) = d1`` and
    ``d(W, X) = d2``."""
    for d in (d1, d2):
        if not (-1e-12 <= d <= 1 + 1e-12):
            raise OutOfRange(f"distance {d!r} outside [0, 1]")
    d1 = min(max(d1, 0.0), 1.0)
    d2 = min(max(d2, 0.0), 1.0)
    if d1 * d1 + d2 * d2 < 1.0:
        return float(min(1.0, d1 * np.sqrt(1 - d2 * d2) + d2 * np.sqrt(1 - d1 * d1)))
    return 1.0
