"""Simulated speaker fleet, environmental noise and the identification experiment.

The fleet model is statistical, not physical. Each device multiplies a
shared model-level response by log-normal deviations, and each measurement
adds log-normal jitter. The default calibration reproduces the lognormal
similarity populations measured on a real 50-speaker batch.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps
from scipy.stats import qmc

from .features import FeatureVector, extract, pairwise_similarity
from .registry import Registry
from .stats import fit_similarities
from .stimulus import AudioBuffer, StimulusSpec, render_tones

DEFAULT_SPEC = StimulusSpec()

# caps on the per-device spread draws; keep the populations' tails bounded
DEVIATION_SPREAD_CAP = 3.0
JITTER_SPREAD_CLIP = 2.0


def default_baseline(spec: StimulusSpec = DEFAULT_SPEC) -> np.ndarray:
    """Model-level response: gentle high-frequency roll-off with a mild resonance."""
    f_khz = spec.frequencies / 1000.0
    db = -0.8 * (f_khz - f_khz[0]) + 3.0 * np.exp(-(((f_khz - 17.5) / 1.2) ** 2))
    return 10 ** (db / 20)


@dataclass
class FleetCalibration:
    """Fleet parameters.

    ``deviation_sigma`` and ``noise_sigma`` are the log-gain spreads across
    devices and across repeated measurements. The two ``*_spread`` terms let
    those sigmas vary from device to device. The deviation scale is
    ``exp(deviation_spread * e)`` with ``e`` exponential and capped. The
    jitter scale is ``exp(noise_spread * h)`` with ``h`` a standard normal
    truncated to +/-2. With both spreads at zero every device is statistically
    alike.
    """

    baseline: np.ndarray = field(default_factory=default_baseline)
    deviation_sigma: float = 0.36
    noise_sigma: float = 0.031
    deviation_spread: float = 0.33
    noise_spread: float = 0.60

    def __post_init__(self):
        self.baseline = np.asarray(self.baseline, dtype=float)
        if np.any(self.baseline <= 0):
            raise ValueError("baseline gains must be positive")
        for name in ("deviation_sigma", "noise_sigma", "deviation_spread", "noise_spread"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.tolist(),
            "deviation_sigma": self.deviation_sigma,
            "noise_sigma": self.noise_sigma,
            "deviation_spread": self.deviation_spread,
            "noise_spread": self.noise_spread,
        }


@dataclass
class SpeakerModel:
    device_label: str
    gains: np.ndarray
    seed: int
    jitter_sigma: float = 0.0

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=float)
        if np.any(self.gains <= 0):
            raise ValueError("gains must be positive")


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def generate_fleet(n: int, cal: FleetCalibration | None = None, seed=0) -> list[SpeakerModel]:
    """n devices with gains baseline * exp(sigma_k * z), z standard normal.

    The per-device scale factors are Latin-hypercube stratified across the
    fleet, so a 50-device fleet already spans their distributions evenly;
    the per-bin deviations ``z`` come from a stream spawned per device.
    """
    if n < 1:
        raise ValueError("need at least one device")
    cal = cal or FleetCalibration()
    ss = np.random.SeedSequence(seed)
    strata_seed, *children = ss.spawn(n + 1)
    u = qmc.LatinHypercube(d=2, seed=np.random.default_rng(strata_seed)).random(n)
    # exponential capped at DEVIATION_SPREAD_CAP; normal truncated to +/-JITTER_SPREAD_CLIP
    e = -np.log1p(-u[:, 0] * (1 - np.exp(-DEVIATION_SPREAD_CAP)))
    h = sps.truncnorm.ppf(u[:, 1], -JITTER_SPREAD_CLIP, JITTER_SPREAD_CLIP)
    fleet = []
    for k, child in enumerate(children):
        rng = np.random.default_rng(child)
        z = rng.standard_normal(cal.baseline.size)
        sigma_k = cal.deviation_sigma * np.exp(cal.deviation_spread * e[k])
        gains = cal.baseline * np.exp(sigma_k * z)
        jitter = cal.noise_sigma * np.exp(cal.noise_spread * h[k])
        fleet.append(SpeakerModel(f"dev{k:03d}", gains, int(child.generate_state(1)[0]), float(jitter)))
    return fleet


NOISE_KINDS = ("silent", "white", "office", "street", "metro")


@dataclass(frozen=True)
class NoiseProfile:
    """Environmental noise during capture.

    ``white`` is confined to the stimulus band and ``metro`` covers the
    whole audio band; both are set by ``in_band_snr_db``, the ratio of
    signal to noise power summed over the tone bins. ``office`` and
    ``street`` put all their power below 10 kHz at ``level_db`` relative
    to the total stimulus power.
    """

    kind: str = "silent"
    in_band_snr_db: float | None = None
    level_db: float | None = None

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind in ("white", "metro"):
            if self.in_band_snr_db is None:
                object.__setattr__(self, "in_band_snr_db", 0.0 if self.kind == "metro" else 20.0)
            if not np.isfinite(self.in_band_snr_db):
                raise ValueError("in-band SNR must be finite")
        if self.kind in ("office", "street") and self.level_db is None:
            object.__setattr__(self, "level_db", 10.0 if self.kind == "office" else 15.0)

    @property
    def in_band(self) -> bool:
        return self.kind in ("white", "metro")

    @classmethod
    def parse(cls, text: str) -> "NoiseProfile":
        """``"office"``, ``"metro"``, ``"metro:-3"``, ``"white:20"`` etc."""
        kind, _, arg = text.partition(":")
        if not arg:
            return cls(kind)
        if kind in ("white", "metro"):
            return cls(kind, in_band_snr_db=float(arg))
        return cls(kind, level_db=float(arg))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "in_band_snr_db": self.in_band_snr_db, "level_db": self.level_db}


SILENT = NoiseProfile()


def band_snr(clean, noise) -> float:
    """10 log10(|X|^2 / |N|^2) over the effective bins; +inf when N is zero."""
    x = np.asarray(getattr(clean, "values", clean), dtype=float)
    n = np.asarray(getattr(noise, "values", noise), dtype=float)
    if x.shape != n.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {n.shape}")
    pn = float(np.sum(np.abs(n) ** 2))
    if pn == 0.0:
        return float("inf")
    return float(10 * np.log10(np.sum(np.abs(x) ** 2) / pn))


def _spectral_magnitudes(observed, noise: NoiseProfile, rng, segments: int):
    """Tone magnitudes with circular complex Gaussian noise added per bin."""
    if not noise.in_band:
        return observed
    count, k = observed.shape
    snr = 10 ** (noise.in_band_snr_db / 10)
    # per-bin noise power for the full window; a window 1/S as long sees S times more
    var = np.sum(observed**2, axis=1) / (k * snr) * segments
    scale = np.sqrt(var / 2)[:, None, None]
    re = observed[:, None, :] + scale * rng.standard_normal((count, segments, k))
    im = scale * rng.standard_normal((count, segments, k))
    return np.hypot(re, im).mean(axis=1)


def _observed_gains(model: SpeakerModel, count: int, rng) -> np.ndarray:
    z = rng.standard_normal((count, model.gains.size))
    return model.gains * np.exp(model.jitter_sigma * z)


def simulate_features(model: SpeakerModel, count: int, noise: NoiseProfile = SILENT,
                      seed=None, segments: int = 1) -> np.ndarray:
    """``count`` normalized features (rows) via the spectral shortcut."""
    rng = _rng(seed)
    mags = _spectral_magnitudes(_observed_gains(model, count, rng), noise, rng, segments)
    return mags / np.linalg.norm(mags, axis=1, keepdims=True)


def _shaped_noise(n: int, fs: float, weight, rng) -> np.ndarray:
    """Gaussian noise whose per-bin power follows ``weight(freqs)``, built in the FFT domain.

    The result is periodic over the buffer, so a full-buffer coherent window
    sees no leakage from out-of-band power.
    """
    freqs = np.fft.rfftfreq(n, 1 / fs)
    w = np.sqrt(np.asarray(weight(freqs), dtype=float))
    spec = (rng.standard_normal(freqs.size) + 1j * rng.standard_normal(freqs.size)) * w / np.sqrt(2)
    spec[0] = 0.0
    if n % 2 == 0:
        spec[-1] = 0.0
    return np.fft.irfft(spec * n / 2, n)


def _office_weight(f):
    # speech-like: most power 100 Hz - 4 kHz, nothing above 10 kHz
    return np.where((f >= 80) & (f < 10000), 1.0 / (1.0 + (f / 1500.0) ** 2), 0.0)


def _street_weight(f):
    # traffic rumble: low-frequency heavy, nothing above 10 kHz
    return np.where((f >= 20) & (f < 10000), 1.0 / (1.0 + (f / 400.0) ** 2), 0.0)


def noise_waveform(noise: NoiseProfile, signal: np.ndarray, spec: StimulusSpec, rng) -> np.ndarray:
    """Noise to add to a rendered ``signal`` of the stimulus."""
    n = signal.size
    if noise.kind == "silent" or n == 0:
        return np.zeros(n)
    fs = spec.sample_rate
    if noise.in_band:
        if noise.kind == "metro":
            weight = lambda f: np.ones_like(f)
        else:
            lo, hi = spec.f_start - spec.spacing / 2, spec.f_end + spec.spacing / 2
            weight = lambda f: ((f >= lo) & (f <= hi)).astype(float)
        # unit per-bin amplitude variance, then scale to the requested in-band SNR
        base = _shaped_noise(n, fs, weight, rng)
        bins = np.rint(spec.frequencies * n / fs).astype(int)
        sig_pow = np.sum(np.abs(np.fft.rfft(signal)[bins] * 2 / n) ** 2)
        target = sig_pow / (10 ** (noise.in_band_snr_db / 10))
        return base * np.sqrt(target / spec.tone_count)
    weight = _office_weight if noise.kind == "office" else _street_weight
    base = _shaped_noise(n, fs, weight, rng)
    target = np.mean(signal**2) * 10 ** (noise.level_db / 10)
    return base * np.sqrt(target / np.mean(base**2))


def render_recording(model_gains, spec: StimulusSpec, noise: NoiseProfile, rng) -> AudioBuffer:
    """Stimulus shaped by per-tone gains plus a noise waveform, rescaled into [-1, 1]."""
    x = render_tones(spec, model_gains)
    x = x * (spec.amplitude / np.max(np.abs(x)))
    y = x + noise_waveform(noise, x, spec, rng)
    peak = np.max(np.abs(y))
    if peak > 1.0:
        y = y / peak
    return AudioBuffer(y, spec.sample_rate)


def simulate_measurement(model: SpeakerModel, noise: NoiseProfile = SILENT, seed=None, *,
                         mode: str = "spectral", spec: StimulusSpec = DEFAULT_SPEC,
                         segments: int = 1) -> FeatureVector:
    """One feature of ``model`` captured in ``noise``.

    ``mode="spectral"`` works on tone magnitudes directly. ``mode="waveform"``
    renders audio and runs :func:`extract`. Both draw the same jitter from the
    same seed, so they coincide exactly in silence.
    """
    rng = _rng(seed)
    if mode == "spectral":
        values = simulate_features(model, 1, noise, rng, segments)[0]
        return FeatureVector(values, spec.spec_id, device_label=model.device_label)
    if mode != "waveform":
        raise ValueError(f"unknown mode {mode!r}")
    gains = _observed_gains(model, 1, rng)[0]
    rec = render_recording(gains, spec, noise, rng)
    return extract(rec, spec, segments, device_label=model.device_label)


@dataclass
class ExperimentReport:
    fp_count: int
    fn_count: int
    query_count: int
    alpha: float
    self_similarities: np.ndarray
    cross_similarities: np.ndarray
    error_table: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    config: dict = field(default_factory=dict)

    def fits(self):
        """(self, cross) lognormal fits; a population with no pairs gives None."""
        def fit(s):
            return fit_similarities(s) if s.size else None
        return fit(self.self_similarities), fit(self.cross_similarities)

    def to_dict(self) -> dict:
        fs, fc = self.fits()
        return {
            "config": self.config,
            "alpha": self.alpha,
            "query_count": self.query_count,
            "fp_count": self.fp_count,
            "fn_count": self.fn_count,
            "self_pairs": int(self.self_similarities.size),
            "cross_pairs": int(self.cross_similarities.size),
            "max_cross_similarity": float(self.cross_similarities.max()) if self.cross_similarities.size else None,
            "min_self_similarity": float(self.self_similarities.min()),
            "fit_self": fs.to_dict(),
            "fit_corr": fc.to_dict() if fc else None,
            "error_table": [
                {"alpha": round(float(a), 6), "fp": int(fp), "fn": int(fn)}
                for a, fp, fn in self.error_table
            ],
        }


def _self_similarities(block: np.ndarray) -> np.ndarray:
    # exact differences: the Gram shortcut loses precision for near-identical vectors
    iu = np.triu_indices(len(block), 1)
    return 1.0 - np.linalg.norm(block[iu[0]] - block[iu[1]], axis=1)


def run_experiment(fleet, samples_per_device: int = 60, noise: NoiseProfile = SILENT,
                   alpha: float = 0.7, seed=0, *, enrolled_per_device: int = 1,
                   enroll_noise: NoiseProfile | None = None, mode: str = "spectral",
                   spec: StimulusSpec = DEFAULT_SPEC, alpha_grid=None) -> ExperimentReport:
    """Capture, enroll, query and count errors over a simulated fleet.

    The first ``enrolled_per_device`` captures of every device are enrolled
    (taken in ``enroll_noise``, default ``noise``); the rest are queried.
    A query matched to another device is a false positive, an unmatched
    query a false negative.
    """
    fleet = list(fleet)
    if not fleet:
        raise ValueError("fleet is empty")
    s = samples_per_device
    if s < 2:
        raise ValueError("need at least two samples per device to form pairs")
    if not 1 <= enrolled_per_device < s:
        raise ValueError("enrolled_per_device must lie in [1, samples_per_device)")
    enroll_noise = noise if enroll_noise is None else enroll_noise
    e = enrolled_per_device
    children = np.random.SeedSequence(seed).spawn(len(fleet))

    blocks = []
    for model, child in zip(fleet, children):
        rng = np.random.default_rng(child)
        if mode == "spectral":
            rows = np.vstack([simulate_features(model, e, enroll_noise, rng),
                              simulate_features(model, s - e, noise, rng)])
        else:
            rows = np.array([
                simulate_measurement(model, enroll_noise if i < e else noise, rng,
                                     mode=mode, spec=spec).values
                for i in range(s)
            ])
        blocks.append(rows)

    registry = Registry()
    for model, rows in zip(fleet, blocks):
        for row in rows[:e]:
            registry.enroll(FeatureVector(row, spec.spec_id), model.device_label)

    truth, best_ids, best_sims = [], [], []
    fp = fn = 0
    for model, rows in zip(fleet, blocks):
        for row in rows[e:]:
            q = FeatureVector(row, spec.spec_id)
            pid, sim = registry.nearest_bruteforce(q)
            d = registry.identify(q, alpha)
            if d.matched and d.device_id != model.device_label:
                fp += 1
            elif not d.matched:
                fn += 1
            truth.append(model.device_label)
            best_ids.append(pid)
            best_sims.append(sim)

    truth, best_ids, best_sims = np.array(truth), np.array(best_ids), np.array(best_sims)
    grid = np.round(np.arange(0.5, 0.951, 0.01), 6) if alpha_grid is None else np.asarray(alpha_grid)
    wrong = best_ids != truth
    table = np.array([[a, np.sum(wrong & (best_sims >= a)), np.sum(best_sims < a)] for a in grid])

    features = np.vstack(blocks)
    labels = np.repeat([m.device_label for m in fleet], s)
    self_sims = np.concatenate([_self_similarities(b) for b in blocks])
    cross = _cross_block_similarities(features, len(fleet), s)

    config = {
        "devices": len(fleet),
        "samples_per_device": s,
        "enrolled_per_device": e,
        "noise": noise.to_dict(),
        "enroll_noise": enroll_noise.to_dict(),
        "mode": mode,
        "seed": seed if not isinstance(seed, np.random.Generator) else None,
    }
    return ExperimentReport(fp, fn, len(truth), alpha, self_sims, cross, table,
                            features, labels, config)


def _cross_block_similarities(features, n_devices, s) -> np.ndarray:
    if n_devices < 2:
        return np.zeros(0)
    sims = pairwise_similarity(features)
    dev = np.arange(n_devices * s) // s
    iu = np.triu_indices(len(features), 1)
    keep = dev[iu[0]] != dev[iu[1]]
    return sims[iu[0][keep], iu[1][keep]]


def stability_series(fleet, count: int = 60, noise: NoiseProfile = SILENT, seed=0,
                     spec: StimulusSpec = DEFAULT_SPEC) -> list[FeatureVector]:
    """``count`` consecutive captures per device, device by device."""
    out = []
    for model, child in zip(fleet, np.random.SeedSequence(seed).spawn(len(fleet))):
        rows = simulate_features(model, count, noise, np.random.default_rng(child))
        out.extend(FeatureVector(r, spec.spec_id, device_label=model.device_label) for r in rows)
    return out


def stability_matrix(features) -> np.ndarray:
    """Symmetric matrix of pairwise similarities between ordered features."""
    features = list(features)
    if len({f.spec_id for f in features}) > 1:
        raise ValueError("features come from different stimulus specs")
    v = np.array([f.values for f in features])
    m = 1.0 - np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
    return (m + m.T) / 2


def within_block_trend(matrix: np.ndarray, start: int, stop: int) -> float:
    """Slope of similarity-to-first-capture against capture index inside a block."""
    idx = np.arange(start + 1, stop)
    return float(np.polyfit(idx - start, matrix[start, idx], 1)[0])


def write_matrix_csv(matrix: np.ndarray, path) -> None:
    n = matrix.shape[0]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"v{i + 1}" for i in range(n)])
        for row in matrix:
            w.writerow([repr(float(x)) for x in row])


def write_similarity_csv(report: ExperimentReport, path, max_cross: int | None = None) -> None:
    """Two columns, ``self`` and ``cross``; the shorter column is padded with blanks."""
    cross = report.cross_similarities
    if max_cross is not None and cross.size > max_cross:
        cross = cross[:: int(np.ceil(cross.size / max_cross))]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["self", "cross"])
        for a, b in itertools.zip_longest(report.self_similarities.tolist(), cross.tolist(), fillvalue=""):
            w.writerow([a, b])


def read_similarity_csv(path, column: str) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if column not in (reader.fieldnames or []):
            raise ValueError(f"{path}: no column {column!r}")
        return np.array([float(r[column]) for r in reader if r[column] not in ("", None)])
