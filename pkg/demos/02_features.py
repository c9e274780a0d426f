# coding: utf-8

# # From recording to fingerprint
#
# The feature is the vector of tone magnitudes, scaled to unit length.
# Because the window is coherent each tone sits exactly on one DFT bin.

# %%

import numpy as np

from speakerprint import StimulusSpec, extract, similarity, distance, tone_magnitudes
from speakerprint.simbench import generate_fleet, render_recording, SILENT
from _plotting import plt, save

spec = StimulusSpec()
fleet = generate_fleet(3, seed=4)
rng = np.random.default_rng(0)

# Two recordings of the same speaker and one of another.

a1 = extract(render_recording(fleet[0].gains, spec, SILENT, rng), spec)
a2 = extract(render_recording(fleet[0].gains * np.exp(0.03 * rng.standard_normal(71)), spec, SILENT, rng), spec)
b = extract(render_recording(fleet[1].gains, spec, SILENT, rng), spec)

print("same speaker:      similarity %.3f" % similarity(a1, a2))
print("different speaker: similarity %.3f" % similarity(a1, b))

# %% [markdown]
# Similarity is 1 minus the Euclidean distance between unit vectors, so it
# runs from -1 (opposite) to 1 (identical). Overall volume does not
# matter: doubling the gain leaves the feature unchanged.

# %%

loud = render_recording(fleet[0].gains, spec, SILENT, rng)
quiet = loud.samples * 0.1
from speakerprint import AudioBuffer
print("gain change distance: %.2e" % distance(extract(loud, spec), extract(AudioBuffer(quiet), spec)))

# %% Splitting a long recording into coherent segments and averaging
# reduces the effect of noise on the magnitudes.

mags1 = tone_magnitudes(loud, spec, segments=1)
mags10 = tone_magnitudes(loud, spec, segments=10)
print("segmenting a clean recording changes magnitudes by %.1e" % np.max(np.abs(mags1 - mags10)))

# %%

if plt is not None:
    fig, ax = plt.subplots(figsize=(8, 3))
    f = spec.frequencies / 1e3
    ax.plot(f, a1.values, label="speaker A")
    ax.plot(f, a2.values, "--", label="speaker A again")
    ax.plot(f, b.values, label="speaker B")
    ax.set_xlabel("kHz")
    ax.set_ylabel("normalized magnitude")
    ax.legend()
    save(fig, "features.png")
