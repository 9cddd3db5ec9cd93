# %% [markdown]
# # Distances between unitaries
#
# `d_psi(U, V)` measures how far apart the images `U psi` and `V psi` are.
# Maximising over all pure states gives a closed form in the eigenphases of
# `U^dagger V`; maximising over product states only gives `d_pi`, which
# needs a numerical search.

# %%
import numpy as np

from entcap import (
    AllPureStates,
    PureProductStates,
    compose_tensor_distance,
    d_eigenphase,
    d_restricted,
    d_state,
    random_unitary,
)

plus = np.array([1, 1]) / np.sqrt(2)
print(d_state(np.eye(2), np.diag([1, 1j]), plus))  # 1/sqrt(2)

# %% [markdown]
# The global metric is `sin(alpha/2)` with `alpha` the smallest arc holding
# every eigenvalue of `U^dagger V`, or 1 once that arc reaches a half-turn.

# %%
for w in ([1, 1j], [1, np.exp(0.3j), np.exp(1j)], [1, 1j, -1, -1j]):
    print(np.round(w, 3), d_eigenphase(np.eye(len(w)), np.diag(w)))

# %%
u, v = random_unitary(4, 1).matrix, random_unitary(4, 2).matrix
full = d_restricted(u, v, AllPureStates())
print("closed form", full.value)
print("at its witness", d_state(u, v, full.witness))

# %% [markdown]
# Restricting to product states can only lower the distance.  For the
# identity and CZ it does not: `|1>|+>` is mapped to an orthogonal state.

# %%
cz = np.diag([1, 1, 1, -1]).astype(complex)
r = d_restricted(np.eye(4), cz, PureProductStates(2, 2))
print(r.value, np.round(r.witness.amplitudes, 3))

# %%
v = u @ np.diag(np.exp(1j * np.array([0.0, 0.2, 0.4, 0.5])))
print("d_pi", d_restricted(u, v, PureProductStates(2, 2)).value,
      "<= d", d_eigenphase(u, v))

# %% [markdown]
# Tensor products compose distances like sines of added angles.

# %%
a, c = random_unitary(2, 3).matrix, random_unitary(2, 4).matrix
b = a @ np.diag([1, np.exp(0.7j)])
d = c @ np.diag([1, np.exp(-0.4j)])
print(d_eigenphase(np.kron(a, c), np.kron(b, d)),
      compose_tensor_distance(d_eigenphase(a, b), d_eigenphase(c, d)))
