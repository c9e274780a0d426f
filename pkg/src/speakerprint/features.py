"""Frequency-response features: per-tone magnitudes, normalization and metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .stimulus import AudioBuffer, StimulusSpec

NORM_TOL = 1e-9
MIN_ENERGY = 1e-12


@dataclass
class FeatureVector:
    """Unit-norm vector of non-negative tone magnitudes."""

    values: np.ndarray
    spec_id: str
    device_label: str | None = None
    captured_at: str | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("feature values must be a non-empty 1-D sequence")
        if np.any(self.values < 0):
            raise ValueError("feature values must be non-negative")
        norm = np.linalg.norm(self.values)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"feature must have unit L2 norm, got {norm}")

    def __len__(self):
        return self.values.size

    @classmethod
    def from_magnitudes(cls, magnitudes, spec_id: str, **kw) -> "FeatureVector":
        m = np.abs(np.asarray(magnitudes, dtype=float))
        norm = np.linalg.norm(m)
        if not np.isfinite(norm) or norm <= MIN_ENERGY:
            raise ValueError("tone energy too low to normalize")
        return cls(m / norm, spec_id, **kw)

    def to_dict(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "device_label": self.device_label,
            "captured_at": self.captured_at,
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureVector":
        return cls(
            np.asarray(data["values"], dtype=float),
            data["spec_id"],
            device_label=data.get("device_label"),
            captured_at=data.get("captured_at"),
        )


def tone_magnitudes(recording: AudioBuffer, spec: StimulusSpec, segments: int = 1) -> np.ndarray:
    """Amplitude of each comb tone over a rectangular integer-cycle window.

    The usable window is the largest whole number of comb periods in the
    recording, split into ``segments`` equal coherent windows whose
    magnitudes are averaged. Each tone falls exactly on a DFT bin, so there
    is no leakage between tones.
    """
    if recording.sample_rate != spec.sample_rate:
        raise ValueError(
            f"sample rate mismatch: recording {recording.sample_rate}, spec {spec.sample_rate}"
        )
    if segments < 1:
        raise ValueError("segments must be >= 1")
    period = spec.coherent_period
    periods = len(recording) // period
    if periods < segments:
        raise ValueError(
            f"recording of {len(recording)} samples is shorter than {segments} coherent "
            f"window(s) of {period} samples"
        )
    seg_len = (periods // segments) * period
    x = recording.samples[: seg_len * segments].reshape(segments, seg_len)
    bins = np.rint(spec.frequencies * seg_len / spec.sample_rate).astype(int)
    coeffs = np.fft.rfft(x, axis=1)[:, bins] * (2.0 / seg_len)
    return np.abs(coeffs).mean(axis=0)


def extract(recording: AudioBuffer, spec: StimulusSpec, segments: int = 1, **kw) -> FeatureVector:
    """Normalized frequency-response feature of a recording of ``spec``.

    Dividing by the input spectrum is skipped: the stimulus tones have equal
    magnitude, so the division is a constant that normalization removes.
    """
    mags = tone_magnitudes(recording, spec, segments)
    if np.linalg.norm(mags) <= MIN_ENERGY:
        raise ValueError("recording carries no energy at the stimulus tones")
    return FeatureVector.from_magnitudes(mags, spec.spec_id, **kw)


def _check_pair(p: FeatureVector, q: FeatureVector):
    if len(p) != len(q):
        raise ValueError(f"dimension mismatch: {len(p)} vs {len(q)}")
    if p.spec_id != q.spec_id:
        raise ValueError(f"spec mismatch: {p.spec_id!r} vs {q.spec_id!r}")


def distance(p: FeatureVector, q: FeatureVector) -> float:
    """Euclidean distance; lies in [0, 2] for unit vectors."""
    _check_pair(p, q)
    return float(np.linalg.norm(q.values - p.values))


def similarity(p: FeatureVector, q: FeatureVector) -> float:
    return 1.0 - distance(p, q)


def pairwise_similarity(a, b=None) -> np.ndarray:
    """Similarity matrix between rows of unit-norm arrays ``a`` and ``b``.

    Uses ``|p - q|^2 = 2 - 2 p.q`` which holds for unit vectors.
    """
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    gram = a @ b.T
    return 1.0 - np.sqrt(np.clip(2.0 - 2.0 * gram, 0.0, 4.0))


def write_jsonl(features, path, append: bool = False) -> None:
    with open(path, "a" if append else "w") as fh:
        for f in features:
            fh.write(json.dumps(f.to_dict()) + "\n")


def read_jsonl(path) -> list[FeatureVector]:
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(FeatureVector.from_dict(json.loads(line)))
        except (KeyError, json.JSONDecodeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad feature record ({exc})") from exc
    return out
