# coding: utf-8

# # A simulated fleet of 50 speakers
#
# Each device has a fixed frequency response around a shared model
# baseline. Every measurement adds a little per-tone jitter. Sixty
# measurements per device give the within-device and between-device
# similarity populations.

# %%

import time

import numpy as np

from speakerprint.simbench import (
    NoiseProfile, generate_fleet, run_experiment, stability_matrix, stability_series,
    within_block_trend,
)
from speakerprint.stats import ErrorModel, total_error
from _plotting import plt, save

fleet = generate_fleet(50, seed=7)
t0 = time.perf_counter()
report = run_experiment(fleet, 60, alpha=0.7, seed=7)
print("%d queries in %.1f s: %d FP, %d FN" % (report.query_count, time.perf_counter() - t0,
                                             report.fp_count, report.fn_count))
print("self pairs %d, cross pairs %d" % (report.self_similarities.size, report.cross_similarities.size))
print("lowest self similarity %.3f, highest cross similarity %.3f"
      % (report.self_similarities.min(), report.cross_similarities.max()))

# %% Lognormal fits of 1 - similarity

fs, fc = report.fits()
print("self:  mu %.3f sigma %.3f" % (fs.mu, fs.sigma))
print("cross: mu %.3f sigma %.3f" % (fc.mu, fc.sigma))

# %% [markdown]
# Sweeping alpha compares simulated query errors with the fitted curve.
# At low alpha the analytic false positive term counts any stranger pair
# above alpha, while a query only fails if the stranger also beats the
# genuine match, so the simulated counts stay at zero there. At high alpha
# false negatives dominate and the two agree.

# %%

model = ErrorModel(fs, fc)
for a, fp, fn in report.error_table[::5]:
    print("alpha %.2f  fp %4d  fn %4d  analytic %.2e x %d = %.1f"
          % (a, fp, fn, total_error(model, a), report.query_count, total_error(model, a) * report.query_count))

# %% Noise: office noise lives below 10 kHz and does nothing to the
# features. Metro noise fills the band and breaks identification.

for noise in ["office", "white:20", "metro:10", "metro"]:
    r = run_experiment(fleet[:10], 20, NoiseProfile.parse(noise), 0.7, seed=1)
    print("%-9s mean self similarity %.3f, FN %d/%d" % (noise, r.self_similarities.mean(), r.fn_count, r.query_count))

# %% Stability: two devices measured 60 times each. The matrix is two
# bright blocks with no drift inside them.

m = stability_matrix(stability_series(fleet[:2], 60, seed=3))
print("within-block trend: %.1e, %.1e" % (within_block_trend(m, 0, 60), within_block_trend(m, 60, 120)))

if plt is not None:
    fig, ax = plt.subplots(1, 2, figsize=(10, 4))
    bins = np.linspace(-0.2, 1, 121)
    ax[0].hist(report.self_similarities, bins, density=True, alpha=0.6, label="same device")
    ax[0].hist(report.cross_similarities[::10], bins, density=True, alpha=0.6, label="different devices")
    ax[0].axvline(0.7, color="k", lw=0.8)
    ax[0].legend()
    im = ax[1].imshow(m, vmin=0, vmax=1)
    fig.colorbar(im, ax=ax[1])
    save(fig, "simulation.png")
