"""How well do random cosine features approximate the exact kernel?

Draws a projection bank for the Gaussian RBF and Laplacian kernels,
compares phi(x).phi(z) against the closed-form kernel values, and plots
how the error shrinks as the number of features D grows (the Monte-Carlo
1/sqrt(D) rate). Also shows a two-kernel combination approximating the
average of its members.

Run:  python demos/01_kernel_approximation.py
Writes kernel_approximation.png into the working directory.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import rks

rng = np.random.default_rng(0)

# a cloud of 20-dimensional points, bandwidth from the median heuristic
points = rks.FrameDataset(
    features=rng.standard_normal((1500, 20)).astype(np.float32),
    labels=np.zeros(1500, dtype=np.int32),
    num_classes=1,
)
sigma = rks.median_pairwise_distance(points, seed=1)
print(f"median pairwise distance -> sigma = {sigma:.3f}")

# error vs number of features, for both kernel families
feature_counts = [500, 2000, 8000, 32000]
fig, axes = plt.subplots(1, 2, figsize=(11, 4))

for family in rks.KernelFamily:
    spec = rks.KernelSpec(family, sigma)
    rows = rks.approximation_report(
        spec, points.features.astype(np.float64), feature_counts, num_pairs=500, seed=2
    )
    rms = [r[1] for r in rows]
    print(f"{family.value}: rms error by D = {{{', '.join(f'{d}: {e:.5f}' for d, e in zip(feature_counts, rms))}}}")
    axes[0].loglog(feature_counts, rms, marker="o", label=family.value)

axes[0].loglog(
    feature_counts,
    [rms[0] * np.sqrt(feature_counts[0] / d) for d in feature_counts],
    "k--", alpha=0.5, label=r"$1/\sqrt{D}$ reference",
)
axes[0].set_xlabel("number of random features D")
axes[0].set_ylabel("rms approximation error")
axes[0].set_title("Monte-Carlo rate")
axes[0].legend()

# one fixed pair as D grows: the estimate converges on the exact value
x, z = rng.standard_normal(20), rng.standard_normal(20)
spec = rks.KernelSpec(rks.KernelFamily.GAUSSIAN_RBF, sigma)
exact = rks.kernel_exact(spec, x, z)
ds = np.unique(np.logspace(1, 4.5, 30).astype(int))
estimates = []
for i, d in enumerate(ds):
    bank = rks.sample_projection_bank(spec, 20, int(d), seed=100 + i)
    estimates.append(float(rks.feature_map(bank, x).astype(np.float64) @ rks.feature_map(bank, z).astype(np.float64)))
axes[1].semilogx(ds, estimates, marker=".", label="feature estimate")
axes[1].axhline(exact, color="k", linestyle="--", label=f"exact kernel = {exact:.4f}")
axes[1].set_xlabel("number of random features D")
axes[1].set_ylabel(r"$\hat\phi(x)^\top \hat\phi(z)$")
axes[1].set_title("one pair, growing banks")
axes[1].legend()

fig.tight_layout()
fig.savefig("kernel_approximation.png", dpi=120)
print("wrote kernel_approximation.png")

# combining banks: the concatenated map approximates the average kernel
rbf = rks.KernelSpec(rks.KernelFamily.GAUSSIAN_RBF, sigma)
lap = rks.KernelSpec(rks.KernelFamily.LAPLACIAN, sigma)
combined = rks.combine_banks(
    [rks.sample_projection_bank(rbf, 20, 20000, seed=7), rks.sample_projection_bank(lap, 20, 20000, seed=8)]
)
fx = rks.feature_map(combined, x).astype(np.float64)
fz = rks.feature_map(combined, z).astype(np.float64)
target = 0.5 * (rks.kernel_exact(rbf, x, z) + rks.kernel_exact(lap, x, z))
print(f"combined-bank estimate {fx @ fz:.4f} vs averaged exact kernels {target:.4f}")
