"""A problem linear models cannot solve, solved by random features.

Two classes on concentric circles are hopeless for logistic regression on
the raw coordinates (~50% accuracy) but easy for the same softmax layer on
top of a few thousand random cosine features of an RBF kernel. Plots the
learned decision regions of both models.

Run:  python demos/02_circles_classifier.py
Writes circles_decision.png into the working directory.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import rks

dataset = rks.make_concentric_circles(5000, inner_radius=1.0, outer_radius=2.0, noise=0.1, seed=0)
train_set, heldout = rks.split_heldout(dataset, 0.2, seed=1)

# bandwidth from the data, bank and model, a dozen epochs of SGD
sigma = rks.median_pairwise_distance(train_set, seed=2)
spec = rks.KernelSpec(rks.KernelFamily.GAUSSIAN_RBF, sigma)
bank = rks.sample_projection_bank(spec, input_dim=2, num_features=2000, seed=3)
model = rks.init_model(bank.num_features, 2, seed=4, bank=bank)
config = rks.TrainConfig(learning_rate=2.0, max_epochs=12, seed=5)
trace = rks.train(bank, model, train_set, heldout, config, cache_features=True)
rff_acc = trace.entries[-1].metrics.accuracy
print(f"sigma={sigma:.3f}  random-feature held-out accuracy: {rff_acc:.3f}")

# plain logistic regression on the raw 2-D features, for contrast
linear = rks.init_model(2, 2)
velocity = rks.zero_velocity(linear)
for _ in range(300):
    _, grads = rks.loss_and_grad(linear, train_set.features.astype(np.float64), train_set.labels)
    rks.momentum_update(linear.parameters(), velocity, grads, lr=0.5, momentum=0.9)
probs = rks.posterior_batch(linear, heldout.features.astype(np.float64))
linear_acc = float(np.mean(np.argmax(probs, axis=1) == heldout.labels))
print(f"raw-feature logistic regression accuracy: {linear_acc:.3f}")

# decision surfaces on a grid
grid_1d = np.linspace(-2.8, 2.8, 200)
gx, gy = np.meshgrid(grid_1d, grid_1d)
grid = np.stack([gx.ravel(), gy.ravel()], axis=1)

rff_posterior = rks.posterior_batch(model, rks.feature_map_batch(bank, grid))[:, 1].reshape(gx.shape)
lin_posterior = rks.posterior_batch(linear, grid)[:, 1].reshape(gx.shape)

fig, axes = plt.subplots(1, 2, figsize=(11, 5), sharey=True)
for ax, surface, title, acc in [
    (axes[0], rff_posterior, "random features", rff_acc),
    (axes[1], lin_posterior, "raw coordinates", linear_acc),
]:
    ax.contourf(gx, gy, surface, levels=20, cmap="RdBu", vmin=0, vmax=1)
    ax.contour(gx, gy, surface, levels=[0.5], colors="k")
    shown = heldout.features[:600]
    ax.scatter(shown[:, 0], shown[:, 1], c=heldout.labels[:600], cmap="RdBu", s=6, edgecolors="none")
    ax.set_title(f"{title} (accuracy {acc:.2f})")
    ax.set_aspect("equal")

fig.tight_layout()
fig.savefig("circles_decision.png", dpi=120)
print("wrote circles_decision.png")
