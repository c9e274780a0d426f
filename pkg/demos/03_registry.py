# coding: utf-8

# # Enrolling and identifying devices
#
# A registry keeps the enrolled features of each device. A query matches
# the closest device if its similarity clears the threshold alpha;
# otherwise it is a new device.

# %%

import numpy as np

from speakerprint import FeatureVector, Registry, lsh_build
from speakerprint.simbench import generate_fleet, simulate_features

fleet = generate_fleet(50, seed=7)
sid = "comb:14000:21000:100@44100"

reg = Registry()
probes = []
for i, m in enumerate(fleet):
    rows = simulate_features(m, 3, seed=i)
    reg.enroll(FeatureVector(rows[0], sid), m.device_label)
    probes.append((m.device_label, [FeatureVector(r, sid) for r in rows[1:]]))
print(len(reg), "devices enrolled")

# %%

label, qs = probes[12]
d = reg.identify(qs[0], alpha=0.7)
print(label, "->", d.outcome, d.device_id, "similarity %.3f, runner up %.3f" % (d.best_similarity, d.runner_up_similarity))

# An unseen speaker is reported as new.

stranger = generate_fleet(1, seed=99)[0]
q = FeatureVector(simulate_features(stranger, 1, seed=5)[0], sid)
print("stranger ->", reg.identify(q, 0.7).outcome)

# %% [markdown]
# With several samples the decision is unanimous or inconclusive: a match
# needs every sample to match the same device.

# %%

print("two samples ->", reg.identify_multisample(qs, 0.7).outcome)
mixed = [qs[0], probes[3][1][0]]
print("samples from two devices ->", reg.identify_multisample(mixed, 0.7).outcome)

# %% An LSH index narrows the search to a few buckets and re-ranks them
# exactly. Brute force stays the reference.

index = lsh_build(reg, planes=12, tables=8, seed=0)
agree = 0
total = 0
for label, qs in probes:
    for q in qs:
        a, b = index.query(q, 0.7), reg.identify(q, 0.7)
        agree += (a.outcome, a.device_id) == (b.outcome, b.device_id)
        total += 1
print("LSH agrees with brute force on %d/%d queries" % (agree, total))
print("mean candidates per query: %.1f of %d" % (np.mean([len(index.candidates(q)) for _, qs in probes for q in qs]), reg.feature_count()))
