# %% [markdown]
# # Generalised control operators
#
# A family `U_1 .. U_m` on `C^n` and a control basis `alpha_i` define
# `U(alpha_i (x) beta) = alpha_i (x) U_i beta`.  The family rank bounds the
# dual capacity by `sqrt(1 - 1/r)`, and the capacity reaches `sqrt(1 - 1/m)`
# exactly when some `beta` makes `U_1 beta .. U_m beta` orthonormal.

# %%
import numpy as np

from entcap import (
    OptimizerOptions,
    capacity_dual,
    capacity_dual_abelian,
    diagonal_product_distance,
    family_rank,
    gco_build,
    gram_residual,
    max_entanglement_witness,
)
from entcap.gco import builtin_families, clock, shift

cat = builtin_families()
print(cat.names())

# %%
for fam in (cat["cz"](), cat["cnot"](), cat["qft_powers"](3), cat["shift_phase_3"](),
            cat["trivial"](2)):
    g = gco_build(fam)
    ce = capacity_dual(g.unitary, *fam.dims).value
    print(f"{fam.name:16s} abelian={g.abelian!s:5s} rank={family_rank(fam)} C_E={ce:.5f}")

# %% [markdown]
# Commuting families reduce to the phase matrix `Theta`: minimise the top
# singular value of `D_a Theta D_b` over nonnegative unit `a`, `b`.

# %%
g = gco_build(cat["qft_powers"](4))
print(np.round(g.theta.phases, 3))
print(capacity_dual_abelian(g.theta).value, np.sqrt(3 / 4))

# %% [markdown]
# Witnesses.  For `{I, Z, X}` in dimension 3 the vector
# `(1, w^2, w^2)/sqrt(3)` works, with `w` a cube root of unity.

# %%
fam = cat["shift_phase_3"]()
w = np.exp(2j * np.pi / 3)
beta = np.array([1, w ** 2, w ** 2]) / np.sqrt(3)
print(gram_residual(fam, beta))
found = max_entanglement_witness(fam)
print(np.round(found, 4), gram_residual(fam, found))
print(np.linalg.norm(clock(3) @ shift(3) - shift(3) @ clock(3), 2))

# %% [markdown]
# Three-level controlled clock: the closest commuting diagonal product
# `D_1 (x) D_2` stays well above `1/sqrt(3)` in product-state distance.

# %%
u = gco_build(cat["qft_powers"](3)).unitary
dist, (p1, p2) = diagonal_product_distance(u, 3, 3, OptimizerOptions(restarts=64))
print(dist, 1 / np.sqrt(3), np.sqrt(2 / 3))
