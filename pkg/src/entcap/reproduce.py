"""Reproduction suite: the worked examples and fuzz checks, as a table."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .capacity import capacity_dual, capacity_primal
from .gco import (
    capacity_dual_abelian,
    clock,
    controlled_phase,
    cz,
    gco_build,
    gram_residual,
    max_entanglement_witness,
    qft_powers,
    shift_phase_3,
)
from .linalg import random_unitary
from .metrics import d_eigenphase
from .optimize import OptimizerOptions


@dataclass(frozen=True)
class Row:
    name: str
    measured: float
    expected: float | str
    tolerance: float | str
    passed: bool
    seconds: float = 0.0

    def as_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured, "expected": self.expected,
                "tolerance": self.tolerance, "passed": self.passed,
                "seconds": round(self.seconds, 3)}


def _close(name, measured, expected, tol, t0) -> Row:
    return Row(name, float(measured), float(expected), tol,
               bool(abs(measured - expected) <= tol), time.perf_counter() - t0)


def controlled_phase_rows(seed: int) -> list[Row]:
    rows = []
    for th in (0.0, 0.25, 0.5, 0.75, 1.0):
        t0 = time.perf_counter()
        fam = controlled_phase(th)
        g = gco_build(fam)
        gen = capacity_dual(g.unitary, 2, 2, OptimizerOptions(seed=seed))
        want = np.sqrt((1 - np.cos(np.pi * th / 2)) / 2)
        rows.append(_close(f"controlled_phase({th:g}) C_E", gen.value, want, 1e-4, t0))
        t0 = time.perf_counter()
        ab = capacity_dual_abelian(g.theta, OptimizerOptions(seed=seed))
        rows.append(_close(f"controlled_phase({th:g}) abelian path", ab.value, gen.value, 2e-3, t0))
    return rows


def cz_rows(seed: int) -> list[Row]:
    u = gco_build(cz()).unitary
    t0 = time.perf_counter()
    dual = capacity_dual(u, 2, 2, OptimizerOptions(seed=seed))
    rows = [_close("CZ C_E", dual.value, 1 / np.sqrt(2), 1e-4, t0)]
    for swap in (False, True):
        t0 = time.perf_counter()
        c = capacity_primal(u, 2, 2, OptimizerOptions(seed=seed, restarts=16),
                            include_swap=swap, dual=dual)
        tag = "with swap" if swap else "no swap"
        rows.append(_close(f"CZ C ({tag})", c.value, 1 / np.sqrt(2), 2e-3, t0))
        rows.append(Row(f"CZ |C - C_E| ({tag})", abs(c.value - dual.value), 0.0, 2e-3,
                        abs(c.value - dual.value) < 2e-3, 0.0))
    return rows


def qft_rows(seed: int, sizes=(2, 3, 4, 5)) -> list[Row]:
    rows = []
    for n in sizes:
        t0 = time.perf_counter()
        fam = qft_powers(n)
        g = gco_build(fam)
        ce = capacity_dual(g.unitary, n, n, OptimizerOptions(seed=seed))
        rows.append(_close(f"qft_powers({n}) C_E", ce.value, np.sqrt(1 - 1 / n), 2e-3, t0))
        t0 = time.perf_counter()
        beta = max_entanglement_witness(fam, OptimizerOptions(seed=seed, restarts=64))
        uniform = np.ones(n) / np.sqrt(n)
        ok = beta is not None and abs(abs(np.vdot(uniform, beta)) - 1) < 1e-10
        res = gram_residual(fam, beta) if beta is not None else float("inf")
        rows.append(Row(f"qft_powers({n}) uniform witness residual", res, 0.0, 1e-10,
                        bool(ok and res < 1e-10), time.perf_counter() - t0))
    return rows


def shift_phase_rows(seed: int) -> list[Row]:
    fam = shift_phase_3()
    t0 = time.perf_counter()
    ce = capacity_dual(gco_build(fam).unitary, 3, 3, OptimizerOptions(seed=seed))
    rows = [_close("shift_phase_3 C_E", ce.value, np.sqrt(2 / 3), 2e-3, t0)]
    t0 = time.perf_counter()
    beta = max_entanglement_witness(fam, OptimizerOptions(seed=seed, restarts=64))
    res = gram_residual(fam, beta) if beta is not None else float("inf")
    rows.append(Row("shift_phase_3 witness residual", res, 0.0, 1e-8, res < 1e-8,
                    time.perf_counter() - t0))
    w = np.exp(2j * np.pi / 3)
    paper_beta = np.array([1, w ** 2, w ** 2]) / np.sqrt(3)
    cols = np.array([paper_beta, clock(3) @ paper_beta, np.roll(paper_beta, 1)])
    dev = float(np.max(np.abs(np.conj(cols) @ cols.T - np.eye(3))))
    rows.append(Row("shift_phase_3 explicit beta Gram", dev, 0.0, 1e-12, dev < 1e-12, 0.0))
    return rows


def metric_axiom_slack(count: int, seed: int) -> float:
    """Smallest slack over the metric axioms on ``count`` random triples."""
    rng = np.random.default_rng([seed, 8])
    worst = np.inf
    for k in range(count):
        d = (2, 3, 4)[k % 3]
        u, v, w, x = (random_unitary(d, rng).matrix for _ in range(4))
        c = np.exp(2j * np.pi * rng.random())
        duv, dvw, duw = d_eigenphase(u, v), d_eigenphase(v, w), d_eigenphase(u, w)
        # equalities contribute minus their deviation, inequalities their margin
        slacks = [
            -abs(duv - d_eigenphase(v, u)),
            duv + dvw - duw,
            -abs(d_eigenphase(u, c * v) - duv),
            -abs(d_eigenphase(x @ u, x @ v) - duv),
            -abs(d_eigenphase(u @ x, v @ x) - duv),
            d_eigenphase(u, w) + d_eigenphase(v, x) - d_eigenphase(u @ v, w @ x),
        ]
        worst = min(worst, min(slacks))
    return float(worst)


def minimax_rows(count: int, seed: int, restarts: int = 16) -> list[Row]:
    rows = []
    for k in range(count):
        t0 = time.perf_counter()
        u = random_unitary(4, [seed, 9, k]).matrix
        dual = capacity_dual(u, 2, 2, OptimizerOptions(seed=seed))
        c = capacity_primal(u, 2, 2, OptimizerOptions(seed=seed, restarts=restarts), dual=dual)
        slack = c.value + 5e-3 - dual.value
        rows.append(Row(f"minimax C_E <= C (random #{k})", slack, ">= 0", "5e-3 in C",
                        bool(slack >= 0), time.perf_counter() - t0))
    return rows


def run_suite(seed: int = 0, quick: bool = False) -> list[Row]:
    rows = []
    rows += controlled_phase_rows(seed)
    rows += cz_rows(seed)
    rows += qft_rows(seed)
    rows += shift_phase_rows(seed)
    t0 = time.perf_counter()
    slack = metric_axiom_slack(60 if quick else 500, seed)
    rows.append(Row("metric axioms worst slack", slack, ">= -1e-8", 1e-8, slack >= -1e-8,
                    time.perf_counter() - t0))
    # quick: fewer outer random starts; the Hilbert-Schmidt starts remain
    rows += minimax_rows(5 if quick else 30, seed, restarts=8 if quick else 16)
    return rows


def format_table(rows: list[Row]) -> str:
    def fmt(v):
        return f"{v:.5g}" if isinstance(v, float) else str(v)

    head = ("check", "measured", "expected", "tol", "result")
    body = [(r.name, fmt(r.measured), fmt(r.expected), fmt(r.tolerance),
             "PASS" if r.passed else "FAIL") for r in rows]
    widths = [max(len(x[i]) for x in [head] + body) for i in range(5)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(line, widths)) for line in [head] + body]
    return "\n".join(lines)
