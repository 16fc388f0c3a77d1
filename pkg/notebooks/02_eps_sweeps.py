# ---
# jupyter:
#   jupytext:
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Error against perturbation size
#
# A sweep fixes one Gaussian instance, sets `eps1 = eps2 = eps` across a
# log grid, averages the error over seeded trials and evaluates the bounds
# at each point. The update scale `lam = ||U|| ||V||` is tied to the
# singular values of `A`: half the smallest gives a small update, half the
# largest gives a large one.

# %%
import numpy as np

from smw import ExperimentConfig, run_sweep
from smw.experiments import loglog_slope

grid = tuple(np.logspace(-8, 2, 21))


def show(res, every=4):
    print(f"{res.config.family} / {res.config.update_scale}: lam={res.meta['lam']:.3g} alpha={res.meta['alpha']:.3g} beta={res.meta['beta']:.3g}")
    print(f"{'eps':>10} {'actual':>10} {'bound':>10} {'simpl.':>10} {'valid':>6}")
    for r in res.rows[::every]:
        print(f"{r.sweep_value:10.2e} {r.mean_actual_error:10.2e} {r.bound_full:10.2e} {r.bound_simplified:10.2e} {r.assumptions_ok_fraction:6.2f}")
    for name, val in res.thresholds.items():
        print(f"  threshold {name} = {val:.3g}")


# %% [markdown]
# ## Forward error
#
# In the small-update panel the error grows linearly in `eps`, and the bound
# tracks it at the same slope.

# %%
small = run_sweep(ExperimentConfig("forward-eps", n=100, k=5, trials=5, sweep_grid=grid))
show(small)
x = small.column("sweep_value")
print("slope of actual error over [1e-8, 1e-2]:", round(loglog_slope(x, small.column("mean_actual_error"), 1e-8, 1e-2), 4))

# %%
large = run_sweep(ExperimentConfig("forward-eps", n=100, k=5, trials=5, sweep_grid=grid, update_scale="half-sigma-max"))
show(large)

# %% [markdown]
# ## Backward error and the direct-inversion baseline
#
# The backward sweep also reports the error of perturbing `B^{-1}` directly
# by the same `eps`, as a reference point.

# %%
bwd = run_sweep(ExperimentConfig("backward-eps", n=100, k=5, trials=5, sweep_grid=grid))
show(bwd)
rows = [r for r in bwd.rows if r.assumptions_ok_fraction == 1.0]
print(f"bound holds at all {len(rows)} valid points:", all(r.mean_actual_error <= r.bound_full for r in rows))
print("actual / baseline at eps=1e-4:", round(bwd.rows[8].mean_actual_error / bwd.rows[8].baseline_direct, 3))
