"""
How many blocks are enough?
===========================

Stream blocks into a covariance accumulator and stop once the covariance
moves less than epsilon between checkpoints.
"""

from saabkit import convergence_monitor, synth_ar1

blocks = synth_ar1(rho=0.95, sigma=10.0, n=8, count=200_000, seed=3)

# %%
# Samples are divided by 255 so epsilon applies to unit-range data.
acc, trace = convergence_monitor(blocks, delta_m=5000, epsilon=1.5e-4, max_samples=200_000, scale=255.0)
for m, d in trace.checkpoints:
    print(f"M={m:7d}  ||C_M - C_(M-dM)||_F = {d:.3e}")
print("converged at", trace.converged_at)

# %%
# A looser threshold stops earlier; the shared prefix of the trace is identical.
_, loose = convergence_monitor(blocks, delta_m=5000, epsilon=5e-4, max_samples=200_000, scale=255.0)
print("epsilon 5e-4 converged at", loose.converged_at)
