# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Woodbury updates with inexact inverses
#
# For `B = A + U V^T` the Woodbury formula rebuilds `B^{-1}` from `A^{-1}` and
# the inverse of the small `k x k` capacitance matrix `C = I + V^T A^{-1} U`.
# In practice both inverses carry error. This notebook builds one instance,
# perturbs both inverses by a known spectral norm, and compares the measured
# forward and backward errors with the bounds.

# %%
import numpy as np

from smw import (
    PerturbationSpec,
    capacitance,
    forward_bound,
    backward_bound,
    invert,
    measure_inputs,
    perturb_instance,
    smw_inverse_approx,
    smw_inverse_exact,
    two_norm,
)
from smw.bounds import backward_error, forward_error, invertibility_margins
from smw.linalg import Stream, rng
from smw.perturbation import make_update_pair

n, k, seed = 60, 4, 7
a = rng(seed, Stream.MATRIX).standard_normal((n, n))
u, v = make_update_pair(n, k, lam=0.05, seed=seed)
b = a + u @ v.T

# %% [markdown]
# With exact inverses the formula agrees with a direct inverse to rounding.

# %%
b_inv = invert(b)
diff = two_norm(smw_inverse_exact(invert(a), u, v) - b_inv)
print(f"||SMW - inv(B)|| / ||inv(B)|| = {diff / two_norm(b_inv):.2e}")

# %% [markdown]
# Now perturb: `E1` has norm `eps1` on `A^{-1}`, and `E2` has norm `eps2` on
# the inverse of the capacitance formed with the perturbed `A^{-1}`.

# %%
eps = 1e-6
inst = perturb_instance(a, u, v, PerturbationSpec(eps, eps, seed=seed))
inp = measure_inputs(a, u, v, PerturbationSpec(eps, eps))
print(f"lam={inp.lam:.3g}  alpha=||C^-1||={inp.alpha:.4g}  beta=||C||={inp.beta:.4g}  ||A^-1||={inp.norm_a_inv:.4g}")

fwd = forward_bound(inp)
bwd = backward_bound(inp, invertibility_margins(inst))
print(f"forward : actual {forward_error(inst, b_inv):.3e}  bound {fwd.value:.3e}  assumptions ok: {fwd.all_ok}")
print(f"backward: actual {backward_error(inst, b):.3e}  bound {bwd.value:.3e}  assumptions ok: {bwd.all_ok}")

# %% [markdown]
# Each bound is a sum of named terms. For a small update the first-order
# `eps1` term carries almost all of the forward bound.

# %%
for name, val in fwd.terms.items():
    print(f"  forward  {name:<24} {val:.3e}")
for name, val in bwd.terms.items():
    print(f"  backward {name:<24} {val:.3e}")

# %% [markdown]
# The assumption margins say how far each validity condition is from failing.
# The forward bound needs `eps1 < 1/(2 lam alpha)`; push `eps` past that and
# the report flags it.

# %%
limit = 1 / (2 * inp.lam * inp.alpha)
for e in (limit / 10, limit * 10):
    rep = forward_bound(inp.with_eps(e))
    print(f"eps={e:.3g}: ok={rep.all_ok}  margins={ {k: round(m, 3) for k, m in rep.assumption_margins.items()} }")

# %% [markdown]
# The capacitance matrix itself is cheap to inspect.

# %%
c = capacitance(invert(a), u, v)
print(np.round(c, 4))
