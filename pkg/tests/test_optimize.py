import numpy as np
import pytest
from oracles import product_distance_oracle

from entcap.linalg import largest_schmidt_coefficients, random_unitary
from entcap.optimize import (
    BoxChart,
    LocalUnitaryChart,
    OptimizerOptions,
    ProductStateChart,
    coords_from_unitary,
    coords_from_vector,
    hermitian_basis,
    maximize_over_product_states,
    minimize_over_local_unitaries,
    minimize_over_product_states,
    nested_maximin,
    nested_minimax,
    unitary_from_coords,
    vector_from_coords,
)


def _d_pi_objective(u, v):
    w = np.asarray(u).conj().T @ np.asarray(v)

    def f(a, b):
        psi = (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (-1,))
        z = np.einsum("...i,...i->...", psi.conj(), psi @ w.T)
        return np.sqrt(np.clip(1 - np.abs(z) ** 2, 0, None))
    return f


def _s1_objective(u, m, n):
    def f(a, b):
        psi = (a[..., :, None] * b[..., None, :]).reshape(a.shape[:-1] + (-1,))
        return largest_schmidt_coefficients(psi @ np.asarray(u).T, m, n)
    return f


def test_options_validation():
    with pytest.raises(ValueError):
        OptimizerOptions(restarts=0)
    with pytest.raises(ValueError):
        OptimizerOptions(f_tol=0)
    with pytest.raises(ValueError):
        OptimizerOptions(step_init=1e-8, step_min=1e-7)


def test_constant_objective():
    for fn in (maximize_over_product_states, minimize_over_product_states):
        res = fn(lambda a, b: np.full(a.shape[:-1], 0.25), 2, 3, OptimizerOptions(restarts=4))
        assert res.best_value == 0.25
        assert res.converged


def test_maximize_d_state_identity_vs_cz(cz_matrix):
    res = maximize_over_product_states(_d_pi_objective(np.eye(4), cz_matrix), 2, 2)
    assert res.best_value == pytest.approx(product_distance_oracle(np.eye(4), cz_matrix), abs=1e-4)
    assert res.best_value == pytest.approx(1.0, abs=1e-4)


def test_minimize_s1_cz(cz_matrix):
    s1 = _s1_objective(cz_matrix, 2, 2)
    res = minimize_over_product_states(s1, 2, 2)
    assert res.best_value == pytest.approx(1 / np.sqrt(2), abs=1e-4)
    neg = maximize_over_product_states(lambda a, b: -s1(a, b), 2, 2)
    assert neg.best_value == pytest.approx(-1 / np.sqrt(2), abs=1e-4)


def test_s1_of_local_unitary_is_one():
    rng = np.random.default_rng(2)
    local = np.kron(random_unitary(2, rng).matrix, random_unitary(3, rng).matrix)
    res = minimize_over_product_states(_s1_objective(local, 2, 3), 2, 3,
                                       OptimizerOptions(restarts=8))
    assert res.best_value == pytest.approx(1.0, abs=1e-12)


def test_minimize_over_local_unitaries_finds_target():
    rng = np.random.default_rng(4)
    v1, v2 = random_unitary(2, rng).matrix, random_unitary(2, rng).matrix
    target = np.kron(v1, v2)

    def infidelity(a, b, swap):
        v = np.einsum("...ab,...cd->...acbd", a, b).reshape(a.shape[:-2] + (4, 4))
        return 1 - np.abs(np.einsum("ij,...ij->...", target.conj(), v)) / 4

    res = minimize_over_local_unitaries(infidelity, 2, 2, include_swap=True,
                                        opts=OptimizerOptions(restarts=8))
    assert res.best_value < 1e-10
    w1, w2, swap = res.decoded
    assert swap is False
    overlap = abs(np.trace(target.conj().T @ np.kron(w1, w2))) / 4
    assert overlap == pytest.approx(1.0, abs=1e-9)


def test_local_unitaries_swap_needs_square():
    with pytest.raises(ValueError):
        minimize_over_local_unitaries(lambda a, b, s: 0, 2, 3, include_swap=True)


def test_determinism(cz_matrix):
    f = _s1_objective(cz_matrix, 2, 2)
    r1 = minimize_over_product_states(f, 2, 2, OptimizerOptions(seed=3, restarts=6))
    r2 = minimize_over_product_states(f, 2, 2, OptimizerOptions(seed=3, restarts=6))
    assert r1.best_value == r2.best_value
    assert np.array_equal(r1.per_restart_values, r2.per_restart_values)
    assert np.array_equal(r1.best_point, r2.best_point)


def test_more_restarts_never_worse():
    rng = np.random.default_rng(8)
    for _ in range(3):
        u, v = random_unitary(6, rng).matrix, random_unitary(6, rng).matrix
        f = _d_pi_objective(u, v)
        vals = [maximize_over_product_states(f, 2, 3, OptimizerOptions(seed=1, restarts=r))
                .best_value for r in (2, 4, 8)]
        assert vals[0] <= vals[1] <= vals[2]


def test_charts_respect_manifolds():
    rng = np.random.default_rng(0)
    ps = ProductStateChart(3, 2)
    x = ps.project(rng.standard_normal((50, ps.dim)) * 3)
    a, b = ps.decode(x)
    assert np.max(np.abs(np.linalg.norm(a, axis=-1) - 1)) < 1e-12
    assert np.max(np.abs(np.linalg.norm(b, axis=-1) - 1)) < 1e-12
    lu = LocalUnitaryChart(3, 2)
    v1, v2 = lu.decode(rng.standard_normal((50, lu.dim)) * 3)
    for v in (v1, v2):
        eye = np.eye(v.shape[-1])
        assert np.max(np.abs(np.conj(np.swapaxes(v, -1, -2)) @ v - eye)) < 1e-10


def test_coordinate_round_trips():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((20, 4)) + 1j * rng.standard_normal((20, 4))
    v = vector_from_coords(coords_from_vector(z), 4)
    z = z / np.linalg.norm(z, axis=-1, keepdims=True)
    # equal up to a global phase
    assert np.allclose(np.abs(np.einsum("ki,ki->k", v.conj(), z)), 1, atol=1e-12)
    basis = hermitian_basis(3)
    assert np.allclose(np.einsum("kij,lji->kl", basis, basis), np.eye(8), atol=1e-14)
    u = random_unitary(3, 5).matrix
    w = unitary_from_coords(coords_from_unitary(u, basis), basis)
    assert abs(abs(np.trace(u.conj().T @ w)) - 3) < 1e-10


def test_nested_minimax_quadratic_saddle():
    box = BoxChart([-1.0], [1.0])

    def F(X, Y):
        return (X[:, None, 0] - Y[..., 0]) ** 2

    res = nested_minimax(F, box, box, OptimizerOptions(restarts=4), OptimizerOptions(restarts=4))
    assert res.certificate == pytest.approx(1.0, abs=1e-6)
    assert abs(res.best_point[0]) < 1e-3
    assert res.certificate >= res.best_value


@pytest.mark.parametrize("seed", range(4))
def test_maximin_below_minimax(seed):
    rng = np.random.default_rng([seed, 77])
    a = rng.standard_normal((2, 2))
    box = BoxChart([-1.0, -1.0], [1.0, 1.0])

    def F(X, Y):
        return np.einsum("pi,ij,pkj->pk", X, a, Y)

    o = OptimizerOptions(restarts=6)
    hi = nested_minimax(F, box, box, o, o).certificate
    lo = nested_maximin(F, box, box, o, o).certificate
    assert lo <= hi + 1e-6


def test_nested_minimax_deterministic():
    box = BoxChart([-1.0], [1.0])

    def F(X, Y):
        return np.sin(3 * X[:, None, 0] * Y[..., 0]) + Y[..., 0] ** 2

    o = OptimizerOptions(restarts=3, seed=5)
    r1 = nested_minimax(F, box, box, o, o)
    r2 = nested_minimax(F, box, box, o, o)
    assert r1.certificate == r2.certificate
    assert np.array_equal(r1.best_point, r2.best_point)
