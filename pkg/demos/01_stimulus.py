# coding: utf-8

# # The probe signal
#
# A speaker is probed with a comb of 71 cosines, 14 kHz to 21 kHz in
# 100 Hz steps. The tones share a 100 Hz fundamental so 441 samples at
# 44.1 kHz hold a whole number of cycles of every tone.

# %%

import numpy as np

from speakerprint import StimulusSpec, synthesize, papr, write_wav, read_wav
import os

from _plotting import OUT, plt, save

spec = StimulusSpec()
print(spec.spec_id, spec.tone_count, "tones,", spec.n_samples, "samples")
print("coherent period:", spec.coherent_period, "samples")

# %% [markdown]
# With every tone starting at phase zero the peaks line up once per
# period and the crest is 2K = 142. Quadratic (Newman) phases spread the
# energy in time.

# %%

zero = synthesize(StimulusSpec(phase_scheme="zero"))
newman = synthesize(spec)
print("PAPR zero phase: %.1f" % papr(zero.samples))
print("PAPR newman:     %.2f" % papr(newman.samples))

# %% [markdown]
# The spectrum has energy only on the comb bins.

# %%

mag = np.abs(np.fft.rfft(newman.samples)) / len(newman) * 2
freqs = np.fft.rfftfreq(len(newman), 1 / spec.sample_rate)
on = mag > 1e-6
print("bins with energy:", on.sum(), "from %.0f to %.0f Hz" % (freqs[on].min(), freqs[on].max()))

# %% 16-bit WAV round trip costs at most half an LSB per sample.

os.makedirs(OUT, exist_ok=True)
wav = os.path.join(OUT, "stimulus.wav")
write_wav(newman, wav)
back = read_wav(wav)
print("max WAV error: %.2e (LSB %.2e)" % (np.max(np.abs(back.samples - newman.samples)), 1 / 32767))

# %%

if plt is not None:
    fig, ax = plt.subplots(2, 1, figsize=(8, 5))
    t = np.arange(882) / spec.sample_rate * 1e3
    ax[0].plot(t, zero.samples[:882], lw=0.6, label="zero phase")
    ax[0].plot(t, newman.samples[:882], lw=0.6, label="newman")
    ax[0].set_xlabel("ms")
    ax[0].legend()
    ax[1].semilogy(freqs / 1e3, mag + 1e-12, lw=0.6)
    ax[1].set_xlabel("kHz")
    ax[1].set_ylim(1e-6, 1)
    save(fig, "stimulus.png")
