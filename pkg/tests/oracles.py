"""Brute-force reference computations, independent of the package's
optimisers and closed forms."""

import itertools

import numpy as np


def product_states_2x2(a, phi, b, chi):
    """``(cos a, e^{i phi} sin a) (x) (cos b, e^{i chi} sin b)`` for
    broadcastable angle arrays; returns shape ``(..., 4)``."""
    alpha = np.stack(np.broadcast_arrays(np.cos(a) + 0j, np.exp(1j * phi) * np.sin(a)), -1)
    beta = np.stack(np.broadcast_arrays(np.cos(b) + 0j, np.exp(1j * chi) * np.sin(b)), -1)
    alpha, beta = np.broadcast_arrays(alpha, beta)
    return (alpha[..., :, None] * beta[..., None, :]).reshape(alpha.shape[:-1] + (4,))


_SPANS = np.array([np.pi / 2, 2 * np.pi, np.pi / 2, 2 * np.pi])


def grid_optimum(fun, sense=+1, n0=24, keep=6, levels=5, zoom=9):
    """Optimise ``fun(states) -> values`` over 2x2 product states on an
    adaptive 4-angle grid.

    The first level is an ``n0**4`` grid; each further level lays a
    ``zoom**4`` grid over +-2 cells around the ``keep`` best points, whose
    spacing becomes the next cell.  Five levels reach a resolution finer
    than a uniform ``200**4`` grid.
    """
    def evaluate(points):
        out = np.empty(len(points))
        for s in range(0, len(points), 200_000):
            p = points[s:s + 200_000]
            out[s:s + 200_000] = fun(product_states_2x2(p[:, 0], p[:, 1], p[:, 2], p[:, 3]))
        return out

    axes = [np.linspace(0, span, n0, endpoint=False) + span / (2 * n0) for span in _SPANS]
    pts = np.array(list(itertools.product(*axes)))
    vals = sense * evaluate(pts)
    cell = _SPANS / n0
    best = pts[np.argsort(vals)[::-1][:keep]]
    best_val = vals.max()
    best_pt = pts[np.argmax(vals)]
    offs = np.linspace(-2, 2, zoom)
    for _ in range(levels - 1):
        grid = np.array(list(itertools.product(offs, repeat=4))) * cell
        cand = (best[:, None, :] + grid[None]).reshape(-1, 4)
        vals = sense * evaluate(cand)
        order = np.argsort(vals)[::-1]
        if vals[order[0]] > best_val:
            best_val, best_pt = vals[order[0]], cand[order[0]]
        best = cand[order[:keep]]
        cell = cell * 4 / (zoom - 1)
    return sense * best_val, best_pt


def product_distance_oracle(u, v):
    """``max_{product psi} sqrt(1 - |<psi|U^dagger V|psi>|^2)`` on 2 x 2."""
    w = np.asarray(u).conj().T @ np.asarray(v)

    def f(psi):
        z = np.einsum("ki,ki->k", psi.conj(), psi @ w.T)
        return 1 - np.abs(z) ** 2

    val, _ = grid_optimum(f, +1)
    return float(np.sqrt(max(val, 0.0)))


def _s1_2x2(c):
    """Largest singular value of a stack of 2 x 2 matrices in closed form."""
    fro = np.sum(np.abs(c) ** 2, axis=(-2, -1))
    det = np.abs(c[..., 0, 0] * c[..., 1, 1] - c[..., 0, 1] * c[..., 1, 0])
    return np.sqrt((fro + np.sqrt(np.maximum(fro ** 2 - 4 * det ** 2, 0))) / 2)


def dual_capacity_oracle(u):
    """``sqrt(1 - min s_1^2)`` over product inputs on 2 x 2."""
    ut = np.asarray(u).T

    def f(psi):
        return _s1_2x2((psi @ ut).reshape(-1, 2, 2))

    s_mu, _ = grid_optimum(f, -1)
    return float(np.sqrt(max(0.0, 1 - s_mu ** 2)))


def hull_distance_oracle(u, v):
    """``max_psi d_psi(U, V)`` from the distance between the origin and the
    convex hull of the eigenvalues of ``U^dagger V`` (the overlap
    ``<psi|W|psi>`` ranges over that hull)."""
    lam = np.linalg.eigvals(np.asarray(u).conj().T @ np.asarray(v))
    pts = np.stack([lam.real, lam.imag], axis=1)
    # the origin lies in the hull iff no gap between eigenphases exceeds pi
    ang = np.sort(np.angle(lam))
    gaps = np.diff(np.append(ang, ang[0] + 2 * np.pi))
    if np.max(gaps) <= np.pi + 1e-15:
        return 1.0
    best = np.min(np.linalg.norm(pts, axis=1))
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            p, q = pts[i], pts[j]
            d = q - p
            t = np.clip(-p @ d / max(d @ d, 1e-300), 0, 1)
            best = min(best, np.linalg.norm(p + t * d))
    return float(np.sqrt(max(0.0, 1 - best ** 2)))


def sampled_global_distance(u, v, count, rng):
    """Best ``d_psi(U, V)`` over ``count`` Haar-random pure states."""
    w = np.asarray(u).conj().T @ np.asarray(v)
    d = w.shape[0]
    z = rng.standard_normal((count, d)) + 1j * rng.standard_normal((count, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    ov = np.einsum("ki,ki->k", z.conj(), z @ w.T)
    return float(np.sqrt(max(0.0, 1 - np.min(np.abs(ov) ** 2))))


def sampled_geometric_entanglement(psi, m, n, count, rng, chunk=200_000):
    """``min sqrt(1 - |<alpha beta|psi>|^2)`` over ``count`` random ``alpha``.

    For fixed ``alpha`` the best ``beta`` follows from Cauchy-Schwarz:
    ``max_beta |<alpha beta|psi>| = |C^T conj(alpha)|``, so only the left
    factor is sampled.
    """
    c = np.asarray(psi).reshape(m, n)
    best = 0.0
    for s in range(0, count, chunk):
        k = min(chunk, count - s)
        a = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        ov = np.linalg.norm(a.conj() @ c, axis=1)
        best = max(best, float(np.max(ov)))
    return float(np.sqrt(max(0.0, 1 - best ** 2)))


def haar(d, rng):
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
