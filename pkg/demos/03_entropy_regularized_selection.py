"""Why stopping at the best held-out perplexity can be the wrong call.

Trains a classifier on a Gaussian mixture whose labels are 30% noise.
Held-out perplexity reaches its minimum partway through training and then
degrades, but the posterior entropy keeps falling: the model keeps getting
more decisive. Selecting the checkpoint by entropy-regularized perplexity
(log perplexity plus mean entropy) deliberately trades a little perplexity
for lower entropy and lands on a later, more confident model.

Run:  python demos/03_entropy_regularized_selection.py
Writes selection_tradeoff.png into the working directory.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import rks

# mixture with irreducible label noise, like noisy forced alignments
full = rks.make_noisy_labels(20000, num_classes=20, dim=10, flip=0.3, seed=0)
train_set, heldout = rks.split_heldout(full, 0.1, seed=100)

sigma = rks.median_pairwise_distance(train_set, seed=200)
spec = rks.KernelSpec(rks.KernelFamily.GAUSSIAN_RBF, sigma)
bank = rks.sample_projection_bank(spec, input_dim=10, num_features=2000, seed=300)
model = rks.init_model(bank.num_features, 20, seed=400, bank=bank)

# constant learning rate, no annealing, deliberately trained far past the
# perplexity minimum so the trace covers the interesting region
config = rks.TrainConfig(
    learning_rate=4.0, max_epochs=60, minibatch_size=250, momentum=0.9,
    anneal_factor=1.0, seed=500,
)
trace = rks.train(bank, model, train_set, heldout, config, cache_features=True)

by_ppx = rks.select_checkpoint(trace, rks.SelectionCriterion.PERPLEXITY)
by_erp = rks.select_checkpoint(trace, rks.SelectionCriterion.ERP)
print(f"perplexity criterion:   epoch {by_ppx.epoch}  "
      f"(ppx {by_ppx.metrics.perplexity:.3f}, entropy {by_ppx.metrics.mean_entropy:.3f})")
print(f"erp criterion:          epoch {by_erp.epoch}  "
      f"(ppx {by_erp.metrics.perplexity:.3f}, entropy {by_erp.metrics.mean_entropy:.3f})")

epochs = [e.epoch for e in trace.entries]
ppx = [e.metrics.perplexity for e in trace.entries]
entropy = [e.metrics.mean_entropy for e in trace.entries]
erp = [e.metrics.erp for e in trace.entries]

fig, axes = plt.subplots(1, 3, figsize=(14, 4))

axes[0].plot(epochs, ppx, color="tab:blue")
axes[0].axvline(by_ppx.epoch, color="tab:blue", linestyle="--", label="ppx pick")
axes[0].axvline(by_erp.epoch, color="tab:red", linestyle="--", label="erp pick")
axes[0].set_xlabel("epoch"); axes[0].set_ylabel("held-out perplexity"); axes[0].legend()

axes[1].plot(epochs, entropy, color="tab:orange")
axes[1].axvline(by_ppx.epoch, color="tab:blue", linestyle="--")
axes[1].axvline(by_erp.epoch, color="tab:red", linestyle="--")
axes[1].set_xlabel("epoch"); axes[1].set_ylabel("mean posterior entropy (nats)")

# the training course through the perplexity/entropy plane
axes[2].plot(ppx, entropy, color="c", marker=".", markersize=3, linewidth=1)
axes[2].plot(by_ppx.metrics.perplexity, by_ppx.metrics.mean_entropy, "o", color="tab:blue",
             label=f"ppx pick (epoch {by_ppx.epoch})")
axes[2].plot(by_erp.metrics.perplexity, by_erp.metrics.mean_entropy, "o", color="tab:red",
             label=f"erp pick (epoch {by_erp.epoch})")
axes[2].set_xlabel("held-out perplexity"); axes[2].set_ylabel("mean entropy")
axes[2].legend()

fig.tight_layout()
fig.savefig("selection_tradeoff.png", dpi=120)
print("wrote selection_tradeoff.png")
print(f"erp identity check: erp - (ln ppx + H) = "
      f"{max(abs(e - (np.log(p) + h)) for e, p, h in zip(erp, ppx, entropy)):.2e}")
