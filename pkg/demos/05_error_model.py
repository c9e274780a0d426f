# coding: utf-8

# # How often does matching go wrong?
#
# Both similarity populations are modelled by a lognormal distance
# 1 - similarity. The false positive rate is the chance a different
# device clears alpha; the false negative rate is the chance the same
# device falls short.

# %%

import numpy as np

from speakerprint.stats import (
    ErrorModel, entropy_bits, error_curve, multi_sample_error, neglected_fp_term,
    optimal_threshold, snr_requirement, total_error,
)
from _plotting import plt, save

model = ErrorModel.published()
print("at alpha 0.69: total error %.3e" % total_error(model, 0.69))

for k in (1, 2, 3):
    a, e = optimal_threshold(model, k)
    print("k=%d samples: best alpha %.4f, error %.3e, %.1f bits" % (k, a, e, entropy_bits(e)))

print("k=2 at alpha 0.68: %.3e" % multi_sample_error(model, 0.68, 2))

# %% [markdown]
# The false positive formula ignores the case where a stranger beats a
# genuine match that already cleared alpha. That term is tiny.

# %%

print("neglected term at 0.69: %.2e" % neglected_fp_term(model, 0.69))

# %% Noise budget: how much in-band SNR keeps a clean feature above alpha.

for a in (0.5, 0.6, 0.7, 0.8, 0.9):
    r = snr_requirement(a)
    print("alpha %.1f needs SNR >= %6.2f dB" % (a, r.db))

# %%

if plt is not None:
    curve = error_curve(model, np.linspace(0.5, 0.9, 401))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.semilogy(curve[:, 0], curve[:, 1], label="false positive")
    ax.semilogy(curve[:, 0], curve[:, 2], label="false negative")
    ax.semilogy(curve[:, 0], curve[:, 3], "k", label="total")
    ax.set_xlabel("alpha")
    ax.set_ylim(1e-8, 1)
    ax.legend()
    save(fig, "error_curve.png")
