# %% [markdown]
# # Entangling capacities
#
# The dual capacity `C_E(U) = sqrt(1 - s_mu^2)` is the largest geometric
# entanglement `U` makes from a product input (`s_mu` is the smallest
# leading Schmidt coefficient reachable).  The primal capacity `C(U)` is the
# product-state distance from `U` to the nearest local unitary.  Always
# `C_E <= C`.

# %%
import time

import numpy as np

from entcap import (
    OptimizerOptions,
    capacity_dual,
    capacity_primal,
    ce_upper_bound,
    largest_schmidt_after,
    random_unitary,
)

cz = np.diag([1, 1, 1, -1]).astype(complex)
plus = np.array([1, 1]) / np.sqrt(2)
print("s_1 of CZ|++>", largest_schmidt_after(cz, plus, plus))

# %%
dual = capacity_dual(cz, 2, 2)
print("C_E", dual.value, "ceiling", ce_upper_bound(2))
print("witness", np.round(dual.witness_state.amplitudes, 3))

# %% [markdown]
# The primal capacity is a min over local unitaries of a max over product
# states.  The reported value is the inner maximum re-solved at the best
# local unitary, so it is an upper end of the printed certified interval.

# %%
t0 = time.perf_counter()
c = capacity_primal(cz, 2, 2, dual=dual)
lu = c.witness_local_unitary
print(f"C = {c.value:.6f} in {time.perf_counter() - t0:.1f} s")
print("interval", c.diagnostics["certified_interval"], "swap", lu.swap)
print(np.round(lu.v1 / lu.v1[0, 0], 3))
print(np.round(lu.v2 / lu.v2[0, 0], 3))

# %% [markdown]
# Controlled phases `diag(1, 1, 1, exp(i pi theta))` follow
# `sqrt((1 - cos(pi theta / 2)) / 2)`.

# %%
for th in np.linspace(0, 1, 5):
    u = np.diag([1, 1, 1, np.exp(1j * np.pi * th)])
    ce = capacity_dual(u, 2, 2).value
    print(f"{th:4.2f}  {ce:.6f}  {np.sqrt((1 - np.cos(np.pi * th / 2)) / 2):.6f}")

# %% [markdown]
# For generic two-qubit gates the primal value can sit strictly above the
# dual one.

# %%
for seed in range(3):
    u = random_unitary(4, seed).matrix
    d = capacity_dual(u, 2, 2)
    p = capacity_primal(u, 2, 2, OptimizerOptions(restarts=8), dual=d)
    print(seed, round(d.value, 5), round(p.value, 5), p.diagnostics["branch_values"])
