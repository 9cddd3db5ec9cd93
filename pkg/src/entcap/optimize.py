"""Multi-start derivative-free search on the compact manifolds the capacities
live on: pairs of unit vectors (pure product states) and pairs of unitaries
(local operators), plus a nested min-max driver.

All restarts of one search run as lanes of a single vectorised pattern
search, so there is no thread scheduling to make results order dependent.
Restart ``k`` draws its start point and its polling directions from streams
keyed by ``(seed, k)`` only; adding restarts never changes the trajectory of
an existing one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import ObjectiveFailure

# number of pre-drawn orthonormal polling frames per search
_N_FRAMES = 16
# moves improving by less than this count as failed polls (halve the step)
_MIN_GAIN = 1e-15
# step growth after a successful poll
_EXPAND = 2.0
# sufficient-increase constant: a poll counts only if it gains c * step**2
_FORCING = 1e-4


@dataclass(frozen=True)
class OptimizerOptions:
    seed: int = 0
    restarts: int = 32
    max_iters: int = 2000
    f_tol: float = 1e-10
    patience: int = 50
    step_init: float = 0.3
    step_min: float = 1e-7

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.patience < 1:
            raise ValueError("restarts, max_iters and patience must be positive")
        if not self.f_tol > 0:
            raise ValueError("f_tol must be positive")
        if not self.step_min < self.step_init:
            raise ValueError("step_min must be smaller than step_init")

    def with_(self, **kw) -> "OptimizerOptions":
        return replace(self, **kw)


@dataclass
class OptRunResult:
    best_value: float
    best_point: np.ndarray
    per_restart_values: np.ndarray
    converged: bool
    evaluations: int
    per_restart_points: np.ndarray | None = field(default=None, repr=False)
    iterations: int = 0
    decoded: object = field(default=None, repr=False)
    certificate: float | None = None
    extra: dict = field(default_factory=dict, repr=False)

    @property
    def best_restart(self) -> int:
        return int(self.extra.get("best_restart", 0))

    @property
    def spread(self) -> float:
        """Gap between the best and second-best restart values."""
        v = np.sort(np.asarray(self.per_restart_values))
        if v.size < 2:
            return 0.0
        if self.extra.get("sense", 1) > 0:
            return float(v[-1] - v[-2])
        return float(v[1] - v[0])


# --------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class Chart:
    """Real coordinates on a compact domain.

    ``sample(rng, count)`` draws start points, ``project`` maps any coordinate
    array ``(..., dim)`` back onto the chart's canonical representatives and
    ``structured`` lists deterministic start points used by the first
    restarts.
    """

    dim: int
    sample: Callable[[np.random.Generator, int], np.ndarray]
    project: Callable[[np.ndarray], np.ndarray]
    structured: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    name: str = ""

    def starts(self, seed: int, restarts: int, offset: int = 0) -> np.ndarray:
        out = np.empty((restarts, self.dim))
        ns = self.structured.shape[0] if self.structured.size else 0
        for k in range(restarts):
            idx = k + offset
            if idx < ns:
                out[k] = self.structured[idx]
            else:
                out[k] = self.sample(np.random.default_rng([seed, idx]), 1)[0]
        return self.project(out)


def _sphere_dim(d: int) -> int:
    return 2 * d - 1


def vector_from_coords(x: np.ndarray, d: int) -> np.ndarray:
    """Decode ``2d-1`` gauge-fixed coordinates into unit vectors of ``C^d``."""
    v = np.empty(x.shape[:-1] + (d,), dtype=complex)
    v[..., 0] = x[..., 0]
    if d > 1:
        v[..., 1:] = x[..., 1::2] + 1j * x[..., 2::2]
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def coords_from_vector(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vector_from_coords` with the first nonzero entry made
    real and nonnegative."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    d = v.shape[-1]
    first = np.argmax(np.abs(v) > 1e-14, axis=-1)
    lead = np.take_along_axis(v, first[..., None], axis=-1)
    v = v * (np.conj(lead) / np.abs(lead))
    x = np.empty(v.shape[:-1] + (2 * d - 1,))
    x[..., 0] = v[..., 0].real
    if d > 1:
        x[..., 1::2] = v[..., 1:].real
        x[..., 2::2] = v[..., 1:].imag
    return x


def _project_sphere(x: np.ndarray) -> np.ndarray:
    nrm = np.linalg.norm(x, axis=-1, keepdims=True)
    nrm = np.where(nrm > 0, nrm, 1.0)
    x = x / nrm
    # global phase -1 keeps the leading coordinate nonnegative
    return np.where(x[..., :1] < 0, -x, x)


class ProductStateChart(Chart):
    """Pairs ``(alpha, beta)`` of unit vectors in ``C^m x C^n``."""

    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        da, db = _sphere_dim(m), _sphere_dim(n)
        self.split = da

        def sample(rng, count):
            a = rng.standard_normal((count, m)) + 1j * rng.standard_normal((count, m))
            b = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
            return np.concatenate([coords_from_vector(a), coords_from_vector(b)], axis=-1)

        def project(x):
            return np.concatenate(
                [_project_sphere(x[..., :da]), _project_sphere(x[..., da:])], axis=-1
            )

        uni = np.concatenate([
            coords_from_vector(np.ones(m) / np.sqrt(m)),
            coords_from_vector(np.ones(n) / np.sqrt(n)),
        ])
        e00 = np.zeros(da + db)
        e00[0] = e00[da] = 1.0
        super().__init__(da + db, sample, project, np.stack([uni, e00]),
                         f"product_states({m},{n})")

    def decode(self, x):
        x = np.asarray(x)
        return (vector_from_coords(x[..., : self.split], self.m),
                vector_from_coords(x[..., self.split:], self.n))

    def encode(self, alpha, beta):
        return np.concatenate([coords_from_vector(alpha), coords_from_vector(beta)], axis=-1)

    def states(self, x) -> np.ndarray:
        a, b = self.decode(x)
        return (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (self.m * self.n,))


def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal (Hilbert-Schmidt) basis of traceless Hermitian ``d x d``
    matrices, shape ``(d*d - 1, d, d)``."""
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[j, k] = s[k, j] = 1 / np.sqrt(2)
            mats.append(s)
            a = np.zeros((d, d), dtype=complex)
            a[j, k], a[k, j] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            mats.append(a)
    for l in range(1, d):
        h = np.zeros((d, d), dtype=complex)
        h[np.arange(l), np.arange(l)] = 1.0
        h[l, l] = -l
        mats.append(h / np.sqrt(l * (l + 1)))
    return np.array(mats).reshape(-1, d, d)


def unitary_from_coords(x: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """``exp(iH)`` for ``H = sum_k x_k basis_k`` (batched over leading axes)."""
    d = basis.shape[-1]
    if basis.shape[0] == 0:
        return np.ones(x.shape[:-1] + (1, 1), dtype=complex)
    h = np.tensordot(x, basis, axes=([-1], [0]))
    w, q = np.linalg.eigh(h)
    return (q * np.exp(1j * w)[..., None, :]) @ np.conj(np.swapaxes(q, -1, -2))


def coords_from_unitary(u: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """A traceless generator ``H`` with ``exp(iH) = c u``; returns its coordinates."""
    u = np.asarray(u, dtype=complex)
    d = u.shape[-1]
    if basis.shape[0] == 0:
        return np.zeros(u.shape[:-2] + (0,))
    z, q = np.linalg.eig(u)
    # re-orthonormalise eigenvectors; degenerate clusters come back from eig
    # non-orthogonal
    q, _ = np.linalg.qr(q)
    th = np.angle(np.einsum("...ji,...jk,...ki->...i", np.conj(q), u, q))
    h = (q * th[..., None, :]) @ np.conj(np.swapaxes(q, -1, -2))
    h = h - np.trace(h, axis1=-2, axis2=-1)[..., None, None] / d * np.eye(d)
    return np.real(np.einsum("kij,...ji->...k", basis, h))


def _identity_project(x):
    return x


class LocalUnitaryChart(Chart):
    """Pairs ``(V1, V2) = (exp(iH1), exp(iH2))`` with traceless generators."""

    def __init__(self, m: int, n: int):
        self.m, self.n = m, n
        self.basis_m = hermitian_basis(m)
        self.basis_n = hermitian_basis(n)
        self.split = m * m - 1
        dim = m * m - 1 + n * n - 1

        def sample(rng, count):
            from .linalg import haar_unitary_matrix

            out = np.empty((count, dim))
            for c in range(count):
                v1 = haar_unitary_matrix(m, rng)
                v2 = haar_unitary_matrix(n, rng)
                out[c] = np.concatenate([
                    coords_from_unitary(v1, self.basis_m),
                    coords_from_unitary(v2, self.basis_n),
                ])
            return out

        super().__init__(dim, sample, _identity_project, np.zeros((1, dim)),
                         f"local_unitaries({m},{n})")

    def decode(self, x):
        x = np.asarray(x)
        return (unitary_from_coords(x[..., : self.split], self.basis_m),
                unitary_from_coords(x[..., self.split:], self.basis_n))

    def encode(self, v1, v2):
        return np.concatenate([coords_from_unitary(v1, self.basis_m),
                               coords_from_unitary(v2, self.basis_n)], axis=-1)


class BoxChart(Chart):
    """Axis-aligned box ``[lower, upper]``; points are clipped into it."""

    def __init__(self, lower, upper, structured=None):
        lower = np.atleast_1d(np.asarray(lower, float))
        upper = np.atleast_1d(np.asarray(upper, float))
        self.lower, self.upper = lower, upper

        def sample(rng, count):
            return rng.uniform(lower, upper, size=(count, lower.size))

        def project(x):
            return np.clip(x, lower, upper)

        st = np.zeros((0, lower.size)) if structured is None else np.atleast_2d(structured)
        super().__init__(lower.size, sample, project, st, "box")


# --------------------------------------------------------------------------
# batched pattern search


def _frames(seed: int, dim: int) -> np.ndarray:
    """Pre-drawn random orthonormal polling frames, shape ``(F, dim, dim)``."""
    rng = np.random.default_rng([seed, 0x5EED, dim])
    g = rng.standard_normal((_N_FRAMES, dim, dim))
    q, r = np.linalg.qr(g)
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
    q[0] = np.eye(dim)
    return np.swapaxes(q, -1, -2)


@dataclass
class _SearchState:
    x: np.ndarray
    f: np.ndarray
    step: np.ndarray
    active: np.ndarray
    evaluations: np.ndarray
    iterations: int
    hit_cap: np.ndarray


def pattern_search(fun, x0: np.ndarray, *, sense: int, project=None,
                   step_init=0.3, step_min=1e-7, max_iters=2000, f_tol=1e-10,
                   patience=50, seed: int = 0, lane_ids=None,
                   eval_cap: int | None = None, cap_groups=None,
                   merge_tol: float = 0.0, callback=None) -> _SearchState:
    """Vectorised compass search over independent lanes.

    ``fun(points, lanes)`` receives ``points`` of shape ``(A, K, d)`` and the
    lane indices ``(A,)`` they belong to and returns values ``(A, K)``.
    ``sense=+1`` maximises, ``-1`` minimises.  ``step_init`` may be a scalar
    or a per-lane array.  Each iteration polls ``x +- step * q`` along the
    rows of a rotating orthonormal frame and moves to the best improving poll
    point; a failed poll halves the step.  A lane stops when its step falls
    below ``step_min``, when ``patience`` consecutive iterations improve by
    less than ``f_tol``, or when it has used ``eval_cap`` evaluations.  With
    ``cap_groups`` (one integer label per lane) the cap applies to the total
    spent by each group of lanes instead.  A positive ``merge_tol`` retires
    a lane once it comes within that distance of a lane of the same group
    holding an equal or better value (lanes of one group then share a basin).
    ``callback(idx, moved, best)`` runs after every iteration with the polled
    lanes, a mask of those that moved and the index of their best poll.
    """
    project = project or _identity_project
    x = project(np.array(x0, dtype=float, copy=True))
    n_lanes, dim = x.shape
    lane_ids = np.arange(n_lanes) if lane_ids is None else np.asarray(lane_ids)
    all_lanes = np.arange(n_lanes)
    f = np.asarray(fun(x[:, None, :], all_lanes), dtype=float)[:, 0]
    if not np.all(np.isfinite(f)):
        raise ObjectiveFailure("objective returned non-finite values at start points")
    step = np.broadcast_to(np.asarray(step_init, float), (n_lanes,)).copy()
    step_cap = np.maximum(step, 0.3)
    vel = np.zeros_like(x)
    evals = np.ones(n_lanes, dtype=np.int64)
    stall = np.zeros(n_lanes, dtype=np.int64)
    active = step >= step_min
    hit_cap = np.zeros(n_lanes, bool)
    if dim == 0:
        return _SearchState(x, f, step, np.zeros(n_lanes, bool), evals, 0, hit_cap)
    frames = _frames(seed, dim)
    it = 0
    for it in range(1, max_iters + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            it -= 1
            break
        q = frames[(it + lane_ids[idx]) % _N_FRAMES]
        dirs = np.concatenate([q, -q], axis=1)
        polls = project(x[idx, None, :] + step[idx, None, None] * dirs)
        # pattern move along the last successful displacement
        polls = np.concatenate([polls, project(x[idx] + vel[idx])[:, None]], axis=1)
        vals = np.asarray(fun(polls, idx), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ObjectiveFailure("objective returned non-finite values")
        evals[idx] += 2 * dim + 1
        score = sense * vals
        best = np.argmax(score, axis=1)
        best_score = score[np.arange(idx.size), best]
        gain = best_score - sense * f[idx]
        up = gain > np.maximum(_MIN_GAIN, _FORCING * step[idx] ** 2)
        moved = idx[up]
        pattern = up & (best == 2 * dim)
        new = polls[up, best[up]]
        vel[idx[~up]] = 0.0
        vel[moved] = np.where(pattern[up, None], 2.0, 1.0) * (new - x[moved])
        x[moved] = new
        f[moved] = vals[up, best[up]]
        step[idx[~up]] *= 0.5
        if _EXPAND != 1.0:
            step[moved] = np.minimum(step[moved] * _EXPAND, step_cap[moved])
        if callback is not None:
            callback(idx, up, best)
        stall[idx] = np.where(gain > f_tol, 0, stall[idx] + 1)
        still = (step[idx] >= step_min) & (stall[idx] < patience)
        if eval_cap is not None:
            if cap_groups is None:
                capped = evals[idx] >= eval_cap
            else:
                spent = np.bincount(cap_groups, weights=evals)
                capped = spent[cap_groups[idx]] >= eval_cap
            hit_cap[idx] |= capped & still
            still &= ~capped
        active[idx] = still
        if merge_tol > 0 and it % 10 == 0:
            active &= ~_merged(x, sense * f, active, cap_groups, merge_tol)
    else:
        hit_cap |= active
    return _SearchState(x, f, step, active, evals, it, hit_cap)


def _merged(x, score, active, groups, tol) -> np.ndarray:
    """Active lanes lying within ``tol`` of a better lane of their group."""
    groups = np.zeros(len(x), int) if groups is None else np.asarray(groups)
    out = np.zeros(len(x), bool)
    for g in np.unique(groups[active]):
        mem = np.flatnonzero(groups == g)
        dist = np.linalg.norm(x[mem, None] - x[None, mem], axis=-1)
        better = (score[mem][None, :] > score[mem][:, None]) | (
            (score[mem][None, :] == score[mem][:, None]) & (mem[None, :] < mem[:, None]))
        out[mem] = np.any((dist < tol) & better, axis=1)
    return out & active


def _options_kw(opts: OptimizerOptions) -> dict:
    return dict(step_init=opts.step_init, step_min=opts.step_min,
                max_iters=opts.max_iters, f_tol=opts.f_tol, patience=opts.patience)


def multistart(fun, chart: Chart, opts: OptimizerOptions, *, sense: int,
               extra_starts: np.ndarray | None = None) -> OptRunResult:
    """Multi-start pattern search of a vectorised objective ``fun(points)``
    with ``points`` of shape ``(..., chart.dim)``."""
    starts = chart.starts(opts.seed, opts.restarts)
    if extra_starts is not None and len(extra_starts):
        starts = np.concatenate([starts, chart.project(np.atleast_2d(extra_starts))])
    st = pattern_search(lambda p, lanes: fun(p), starts, sense=sense,
                        project=chart.project, seed=opts.seed, **_options_kw(opts))
    return _result_from_state(st, sense)


def _result_from_state(st: _SearchState, sense: int) -> OptRunResult:
    score = sense * st.f
    # ties resolved toward the lowest restart index
    k = int(np.argmax(score))
    return OptRunResult(
        best_value=float(st.f[k]),
        best_point=st.x[k].copy(),
        per_restart_values=st.f.copy(),
        converged=not bool(np.any(st.hit_cap)),
        evaluations=int(st.evaluations.sum()),
        per_restart_points=st.x.copy(),
        iterations=st.iterations,
        extra={"best_restart": k, "sense": sense},
    )


def _product_state_objective(objective, chart: ProductStateChart):
    def fun(points):
        a, b = chart.decode(points)
        return np.asarray(objective(a, b), dtype=float)
    return fun


def maximize_over_product_states(objective, m: int, n: int,
                                 opts: OptimizerOptions | None = None,
                                 extra_starts=None) -> OptRunResult:
    """Maximise ``objective(alpha, beta)`` over pairs of unit vectors.

    ``objective`` is vectorised: ``alpha`` has shape ``(..., m)``, ``beta``
    ``(..., n)`` and it returns real values of shape ``(...)``.  The returned
    ``decoded`` attribute holds the best ``(alpha, beta)``.
    """
    return _over_product_states(objective, m, n, opts, +1, extra_starts)


def minimize_over_product_states(objective, m: int, n: int,
                                 opts: OptimizerOptions | None = None,
                                 extra_starts=None) -> OptRunResult:
    """Minimising counterpart of :func:`maximize_over_product_states`."""
    return _over_product_states(objective, m, n, opts, -1, extra_starts)


def _over_product_states(objective, m, n, opts, sense, extra_starts):
    opts = opts or OptimizerOptions()
    chart = ProductStateChart(m, n)
    res = multistart(_product_state_objective(objective, chart), chart, opts,
                     sense=sense, extra_starts=extra_starts)
    res.decoded = chart.decode(res.best_point)
    return res


def minimize_over_local_unitaries(objective, m: int, n: int, include_swap: bool = False,
                                  opts: OptimizerOptions | None = None) -> OptRunResult:
    """Minimise ``objective(V1, V2, swap)`` over local unitaries.

    ``V1``/``V2`` arrive batched with shapes ``(..., m, m)``/``(..., n, n)``;
    ``swap`` is a bool.  With ``include_swap`` (requires ``m == n``) both
    branches are searched and the smaller value wins; ``decoded`` holds
    ``(V1, V2, swap)``.
    """
    opts = opts or OptimizerOptions()
    if include_swap and m != n:
        raise ValueError("the swap extension needs equal factor dimensions")
    chart = LocalUnitaryChart(m, n)
    best = None
    branches = (False, True) if include_swap else (False,)
    for swap in branches:
        def fun(points, swap=swap):
            v1, v2 = chart.decode(points)
            return np.asarray(objective(v1, v2, swap), dtype=float)
        res = multistart(fun, chart, opts, sense=-1)
        res.decoded = chart.decode(res.best_point) + (swap,)
        res.extra["swap"] = swap
        if best is None or res.best_value < best.best_value:
            if best is not None:
                res.evaluations += best.evaluations
            best = res
        else:
            best.evaluations += res.evaluations
    return best


# --------------------------------------------------------------------------
# nested min-max


def _distinct_top(values: np.ndarray, points: np.ndarray, k: int, sense: int,
                  sep: float = 1e-3) -> np.ndarray:
    """Indices of up to ``k`` best, mutually separated points (per row)."""
    order = np.argsort(-sense * values, axis=-1, kind="stable")
    out = np.empty(values.shape[:-1] + (k,), dtype=np.int64)
    for r in range(values.shape[0]):
        chosen = []
        for j in order[r]:
            if all(np.max(np.abs(points[r, j] - points[r, c])) > sep for c in chosen):
                chosen.append(j)
                if len(chosen) == k:
                    break
        while len(chosen) < k:
            chosen.append(chosen[0])
        out[r] = chosen
    return out


@dataclass
class _InnerSolve:
    values: np.ndarray       # (P,) best inner value per outer point
    points: np.ndarray       # (P, di) best inner point
    pool: np.ndarray         # (P, k, di) distinct good inner points
    evaluations: int
    capped: bool
    point_capped: np.ndarray


class NestedMinimax:
    """``min_x max_y F(x, y)`` with a trusted inner solve.

    Every outer query solves the inner maximisation by multi-start pattern
    search started from a fixed set of fresh points plus a warm-start pool
    holding the best distinct inner witnesses found at the querying lane's
    current outer point.  The pool is refreshed only after an outer
    iteration completes.
    """

    def __init__(self, F, outer: Chart, inner: Chart,
                 outer_opts: OptimizerOptions, inner_opts: OptimizerOptions,
                 pool_size: int = 4, warm_step: float = 0.05,
                 eval_cap: int = 100_000, certify_factor: int = 4,
                 merge_tol: float = 0.05,
                 outer_starts: np.ndarray | None = None):
        if hasattr(F, "prepare"):
            self._prepare, self._evaluate = F.prepare, F.evaluate
        else:
            self._prepare, self._evaluate = _identity_project, F
        # optional split of evaluate into inner decoding and evaluation
        self._inner_states = getattr(F, "inner_states", None)
        self._evaluate_states = getattr(F, "evaluate_states", None)
        self.F = lambda X, Y: self._evaluate(self._prepare(X), Y)
        self.outer, self.inner = outer, inner
        self.outer_opts, self.inner_opts = outer_opts, inner_opts
        self.pool_size = pool_size
        self.warm_step = min(warm_step, inner_opts.step_init)
        self.eval_cap = eval_cap
        self.merge_tol = merge_tol
        self.certify_factor = certify_factor
        self.fresh = inner.starts(inner_opts.seed, inner_opts.restarts)
        self.outer_starts = outer_starts

    def _outer_starts(self) -> np.ndarray:
        oo = self.outer_opts
        xs = self.outer.starts(oo.seed, oo.restarts)
        if self.outer_starts is not None and len(self.outer_starts):
            xs = np.concatenate([self.outer.project(np.atleast_2d(self.outer_starts)), xs])
        return xs

    def solve_inner(self, xs: np.ndarray, pool: np.ndarray | None,
                    fresh: np.ndarray | None = None,
                    step_min: float | None = None) -> _InnerSolve:
        fresh = self.fresh if fresh is None else fresh
        n_pts = xs.shape[0]
        di = self.inner.dim
        starts = np.broadcast_to(fresh, (n_pts,) + fresh.shape)
        steps = np.full(starts.shape[:2], self.inner_opts.step_init)
        if pool is not None and pool.shape[1]:
            starts = np.concatenate([pool, starts], axis=1)
            steps = np.concatenate(
                [np.full(pool.shape[:2], self.warm_step), steps], axis=1)
        n_starts = starts.shape[1]
        owner = np.repeat(np.arange(n_pts), n_starts)
        lane_restart = np.tile(np.arange(n_starts), n_pts)
        ctx = self._prepare(xs)

        def fun(points, lanes):
            return self._evaluate(ctx[owner[lanes]], points)

        o = self.inner_opts
        st = pattern_search(
            fun, starts.reshape(-1, di), sense=+1, project=self.inner.project,
            step_init=steps.ravel(), step_min=step_min or o.step_min, max_iters=o.max_iters,
            f_tol=o.f_tol, patience=o.patience, seed=o.seed, lane_ids=lane_restart,
            eval_cap=self.eval_cap, cap_groups=owner, merge_tol=self.merge_tol,
        )
        vals = st.f.reshape(n_pts, n_starts)
        pts = st.x.reshape(n_pts, n_starts, di)
        top = _distinct_top(vals, pts, self.pool_size, +1)
        best = top[:, 0]
        r = np.arange(n_pts)
        return _InnerSolve(
            values=vals[r, best], points=pts[r, best],
            pool=np.take_along_axis(pts, top[..., None], axis=1),
            evaluations=int(st.evaluations.sum()), capped=bool(st.hit_cap.any()),
            point_capped=st.hit_cap.reshape(n_pts, n_starts).any(axis=1),
        )

    def run(self) -> OptRunResult:
        oo = self.outer_opts
        x0 = self._outer_starts()
        first = self.solve_inner(x0, None)
        pool = first.pool.copy()          # per outer lane, at its current point
        witness = first.points.copy()
        stats = {"evaluations": first.evaluations, "capped": first.capped,
                 "outer_evaluations": x0.shape[0]}
        last = {}

        def fun(points, lanes):
            a, k, d = points.shape
            if k == 1 and "init" not in last:
                # start values were computed above
                last["init"] = True
                return first.values[lanes][:, None]
            lane_pool = np.repeat(pool[lanes], k, axis=0)
            sol = self.solve_inner(points.reshape(-1, d), lane_pool)
            stats["evaluations"] += sol.evaluations
            stats["capped"] |= sol.capped
            stats["outer_evaluations"] += a * k
            last["pool"] = sol.pool.reshape(a, k, *sol.pool.shape[1:])
            last["witness"] = sol.points.reshape(a, k, -1)
            return sol.values.reshape(a, k)

        def callback(idx, moved, best):
            if moved.any():
                j = np.flatnonzero(moved)
                pool[idx[j]] = last["pool"][j, best[j]]
                witness[idx[j]] = last["witness"][j, best[j]]

        st = pattern_search(fun, x0, sense=-1, project=self.outer.project,
                            seed=oo.seed, callback=callback, **_options_kw(oo))
        res = _result_from_state(st, -1)
        k = res.best_restart
        # certificate: re-solve the inner problem at the chosen outer point
        cert_fresh = self.inner.starts(self.inner_opts.seed + 1,
                                       self.certify_factor * self.inner_opts.restarts)
        cert = self.solve_inner(st.x[k:k + 1], pool[k:k + 1], fresh=cert_fresh)
        stats["evaluations"] += cert.evaluations
        res.evaluations = stats["evaluations"]
        res.converged = res.converged and not stats["capped"] and not cert.capped
        res.certificate = float(max(cert.values[0], res.best_value))
        res.extra.update(
            inner_point=(cert.points[0] if cert.values[0] >= res.best_value else witness[k]),
            search_inner_point=witness[k],
            outer_evaluations=stats["outer_evaluations"],
        )
        return res


def nested_minimax(F, outer: Chart, inner: Chart,
                   outer_opts: OptimizerOptions | None = None,
                   inner_opts: OptimizerOptions | None = None,
                   method: str = "exchange", **kw) -> OptRunResult:
    """Solve ``min_{x in outer} max_{y in inner} F(x, y)``.

    ``F(X, Y)`` is vectorised: ``X`` has shape ``(P, dx)`` and ``Y``
    ``(P, K, dy)``; it returns ``(P, K)``.  ``F`` may instead expose
    ``prepare(X)`` (returning an array indexed by outer point) and
    ``evaluate(ctx, Y)``, which lets per-outer-point work run once.  The result carries the search
    value in ``best_value`` and a re-solved inner maximum at the final outer
    point (``certify_factor`` times more fresh restarts, warm pool included)
    in ``certificate``; ``extra['inner_point']`` is the matching inner
    witness.
    """
    outer_opts = outer_opts or OptimizerOptions(restarts=16)
    inner_opts = inner_opts or OptimizerOptions(restarts=24)
    cls = {"exchange": ExchangeMinimax, "pattern": NestedMinimax}[method]
    return cls(F, outer, inner, outer_opts, inner_opts, **kw).run()


def nested_maximin(F, outer: Chart, inner: Chart,
                   outer_opts: OptimizerOptions | None = None,
                   inner_opts: OptimizerOptions | None = None, **kw) -> OptRunResult:
    """``max_{y in inner} min_{x in outer} F(x, y)``, solved as the negated
    min-max ``-min_y max_x (-F)``."""
    def G(Y, X):
        p, k, dx = X.shape
        vals = F(X.reshape(p * k, dx), np.repeat(Y, k, axis=0)[:, None, :])
        return -np.asarray(vals).reshape(p, k)

    res = nested_minimax(G, inner, outer, outer_opts, inner_opts, **kw)
    res.best_value = -res.best_value
    res.per_restart_values = -res.per_restart_values
    res.certificate = -res.certificate
    res.extra["sense"] = +1
    return res


# --------------------------------------------------------------------------
# exchange (cutting-plane) min-max


def _fd_jacobian(fun_batch, x: np.ndarray, h: float = 1e-6):
    """Value and central-difference Jacobian of a vector function evaluated in
    one batched call; ``fun_batch(X)`` maps ``(B, d)`` to ``(B, k)``."""
    d = x.size
    pts = np.concatenate([x[None], x + h * np.eye(d), x - h * np.eye(d)])
    vals = fun_batch(pts)
    jac = (vals[1:d + 1] - vals[d + 1:]) / (2 * h)
    return vals[0], jac.T


class ExchangeMinimax(NestedMinimax):
    """``min_x max_y F(x, y)`` by trust-region witness exchange.

    Each outer restart keeps a finite witness set ``Y`` of inner maximisers.
    A round solves the smooth model ``min t s.t. F(x, y) <= t (y in Y),
    |x - x_cur| <= radius`` with SLSQP, then runs the trusted multi-start
    inner maximisation at the proposed point and adds its best distinct
    witnesses to ``Y``.  The proposal is accepted only if the true inner
    maximum decreased; otherwise the radius halves.  A restart stops when the
    model predicts less than ``gap_tol`` decrease or the radius falls below
    ``radius_min``.  Every recorded value is a genuine inner maximum.
    """

    def __init__(self, *args, max_exchanges: int = 60, gap_tol: float = 1e-10,
                 radius: float = 0.2, radius_min: float = 1e-6,
                 max_witnesses: int = 96, search_step_min: float = 1e-7, **kw):
        super().__init__(*args, **kw)
        # inner solves during the exchange rounds stop at this step; the
        # certificate runs at the full inner precision
        self.search_step_min = max(search_step_min, self.inner_opts.step_min)
        self.max_exchanges = max_exchanges
        self.gap_tol = gap_tol
        self.radius0 = radius
        self.radius_min = radius_min
        self.max_witnesses = max_witnesses

    def _epigraph(self, x0: np.ndarray, ys: np.ndarray, t0: float,
                  radius: float) -> np.ndarray:
        from scipy.optimize import minimize

        d = x0.size
        if self._inner_states is not None:
            # witnesses are fixed for the whole subproblem: decode them once
            cached = self._inner_states(ys)

            def cons_vals(X):
                shape = (X.shape[0],) + cached.shape
                return self._evaluate_states(self._prepare(X), np.broadcast_to(cached, shape))
        else:
            def cons_vals(X):
                return self.F(X, np.broadcast_to(ys, (X.shape[0],) + ys.shape))

        memo = {}

        def value_and_jac(z):
            key = z.tobytes()
            if key not in memo:
                memo.clear()
                memo[key] = _fd_jacobian(cons_vals, z[:d])
            return memo[key]

        def cons(z):
            v, _ = value_and_jac(z)
            return np.append(z[-1] - v, radius ** 2 - np.sum((z[:d] - x0) ** 2))

        def cons_jac(z):
            _, j = value_and_jac(z)
            top = np.hstack([-j, np.ones((j.shape[0], 1))])
            return np.vstack([top, np.append(-2 * (z[:d] - x0), 0.0)])

        bounds = None
        if isinstance(self.outer, BoxChart):
            bounds = list(zip(self.outer.lower, self.outer.upper)) + [(None, None)]
        res = minimize(
            lambda z: z[-1], np.append(x0, t0), jac=lambda z: np.eye(d + 1)[-1],
            constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
            method="SLSQP", bounds=bounds,
            options={"maxiter": 100, "ftol": 1e-15},
        )
        x = res.x[:d]
        step = np.linalg.norm(x - x0)
        if not np.all(np.isfinite(x)):
            return x0.copy()
        if step > radius:
            x = x0 + (x - x0) * (radius / step)
        return self.outer.project(x)

    def run(self) -> OptRunResult:
        xs = self._outer_starts()
        n_out = xs.shape[0]
        sol = self.solve_inner(xs, None, step_min=self.search_step_min)
        evals = sol.evaluations
        capped = sol.capped
        cur = xs.copy()
        cur_v = sol.values.copy()
        cur_pool = sol.pool.copy()
        cur_w = sol.points.copy()
        cur_capped = sol.point_capped.copy()
        witnesses = [list(sol.pool[r]) for r in range(n_out)]
        radius = np.full(n_out, self.radius0)
        active = np.ones(n_out, bool)
        rounds = 0
        for rounds in range(1, self.max_exchanges + 1):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                rounds -= 1
                break
            t_model = np.empty(idx.size)
            prop = np.empty((idx.size, self.outer.dim))
            for j, r in enumerate(idx):
                ys = np.array(witnesses[r][-self.max_witnesses:])
                prop[j] = self._epigraph(cur[r], ys, cur_v[r], radius[r])
                t_model[j] = np.max(self.F(prop[j][None], ys[None])[0])
            sol = self.solve_inner(prop, cur_pool[idx], step_min=self.search_step_min)
            evals += sol.evaluations
            capped |= sol.capped
            for j, r in enumerate(idx):
                witnesses[r].extend(sol.pool[j])
                predicted = cur_v[r] - t_model[j]
                if sol.values[j] < cur_v[r]:
                    cur[r], cur_v[r] = prop[j], sol.values[j]
                    cur_pool[r], cur_w[r] = sol.pool[j], sol.points[j]
                    cur_capped[r] = sol.point_capped[j]
                    radius[r] = min(2 * radius[r], 4 * self.radius0)
                else:
                    radius[r] *= 0.5
                if predicted < self.gap_tol or radius[r] < self.radius_min:
                    active[r] = False
        k = int(np.argmin(cur_v))
        cert_fresh = self.inner.starts(self.inner_opts.seed + 1,
                                       self.certify_factor * self.inner_opts.restarts)
        cert = self.solve_inner(cur[k:k + 1], cur_pool[k:k + 1], fresh=cert_fresh)
        evals += cert.evaluations
        return OptRunResult(
            best_value=float(cur_v[k]), best_point=cur[k].copy(),
            per_restart_values=cur_v.copy(),
            converged=not cur_capped[k] and not cert.capped and not active[k],
            evaluations=int(evals), per_restart_points=cur.copy(), iterations=rounds,
            certificate=float(max(cert.values[0], cur_v[k])),
            extra={"best_restart": k, "sense": -1,
                   "inner_point": cert.points[0] if cert.values[0] >= cur_v[k] else cur_w[k],
                   "search_inner_point": cur_w[k],
                   "unconverged_restarts": int(active.sum()),
                   "capped_restarts": int(cur_capped.sum()), "any_capped": bool(capped)},
        )
