"""Inaudible multi-tone stimulus synthesis and mono PCM16 WAV I/O."""

from __future__ import annotations

import wave
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

PHASE_SCHEMES = ("zero", "newman", "random")


@dataclass(frozen=True)
class StimulusSpec:
    """Definition of an equally spaced cosine comb.

    The defaults describe the 71-tone comb from 14 kHz to 21 kHz in 100 Hz
    steps at 44.1 kHz.
    """

    f_start: float = 14000.0
    f_end: float = 21000.0
    spacing: float = 100.0
    duration: float = 1.0
    sample_rate: int = 44100
    amplitude: float = 0.9
    phase_scheme: str = "newman"
    phase_seed: int | None = None

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.f_start <= 0 or self.f_start > self.f_end:
            raise ValueError(f"need 0 < f_start <= f_end, got {self.f_start}, {self.f_end}")
        if self.f_end >= self.sample_rate / 2:
            raise ValueError(f"f_end={self.f_end} is not below Nyquist ({self.sample_rate / 2})")
        span = _ratio(self.f_end - self.f_start, self.spacing)
        start = _ratio(self.f_start, self.spacing)
        if span.denominator != 1 or start.denominator != 1:
            raise ValueError("f_start and f_end - f_start must be integer multiples of spacing")
        if not 0 < self.amplitude <= 1:
            raise ValueError(f"amplitude must lie in (0, 1], got {self.amplitude}")
        if self.duration < 0:
            raise ValueError(f"duration must be non-negative, got {self.duration}")
        if self.phase_scheme not in PHASE_SCHEMES:
            raise ValueError(f"unknown phase scheme {self.phase_scheme!r}")

    @property
    def tone_count(self) -> int:
        return int(_ratio(self.f_end - self.f_start, self.spacing)) + 1

    @property
    def frequencies(self) -> np.ndarray:
        return self.f_start + self.spacing * np.arange(self.tone_count)

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    @property
    def coherent_period(self) -> int:
        """Samples in the shortest window holding a whole number of cycles of every tone."""
        # tones are multiples of `spacing`, so one comb period suffices
        return _ratio(self.sample_rate, self.spacing).numerator

    @property
    def spec_id(self) -> str:
        # phases, duration and level do not change which bins a feature describes
        return f"comb:{self.f_start:g}:{self.f_end:g}:{self.spacing:g}@{self.sample_rate}"

    def phases(self) -> np.ndarray:
        k = self.tone_count
        if self.phase_scheme == "zero":
            return np.zeros(k)
        if self.phase_scheme == "newman":
            return newman_phases(k)
        rng = np.random.default_rng(self.phase_seed)
        return rng.uniform(0.0, 2 * np.pi, size=k)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "StimulusSpec":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class AudioBuffer:
    samples: np.ndarray
    sample_rate: int = 44100
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1:
            raise ValueError("AudioBuffer holds mono audio only")
        if self.samples.size and np.max(np.abs(self.samples)) > 1.0:
            raise ValueError("samples must lie in [-1, 1]")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _ratio(a, b) -> Fraction:
    return Fraction(a).limit_denominator(10**9) / Fraction(b).limit_denominator(10**9)


def newman_phases(k: int) -> np.ndarray:
    """Newman's low-crest-factor phases pi*(i-1)^2/K for i = 1..K."""
    i = np.arange(k)
    return np.pi * i**2 / k


def papr(samples) -> float:
    """Peak-to-average power ratio (linear)."""
    x = np.asarray(samples, dtype=float)
    return float(np.max(x**2) / np.mean(x**2))


def render_tones(spec: StimulusSpec, amplitudes=None, phases=None) -> np.ndarray:
    """Sum of cosines at the comb frequencies, not yet peak-normalized.

    When the buffer spans whole comb periods the waveform is built with an
    inverse real FFT, otherwise by direct summation. Both are exact.
    """
    k = spec.tone_count
    amps = np.ones(k) if amplitudes is None else np.asarray(amplitudes, dtype=float)
    phi = spec.phases() if phases is None else np.asarray(phases, dtype=float)
    if amps.shape != (k,) or phi.shape != (k,):
        raise ValueError(f"expected {k} amplitudes and phases")
    n = spec.n_samples
    if n == 0:
        return np.zeros(0)
    if n % spec.coherent_period == 0:
        bins = np.rint(spec.frequencies * n / spec.sample_rate).astype(int)
        spectrum = np.zeros(n // 2 + 1, dtype=complex)
        spectrum[bins] = amps * np.exp(1j * phi) * n / 2
        return np.fft.irfft(spectrum, n)
    t = np.arange(n) / spec.sample_rate
    return direct_sum(spec.frequencies, amps, phi, t)


def direct_sum(freqs, amps, phases, t) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    for f, a, p in zip(freqs, amps, phases):
        out += a * np.cos(2 * np.pi * f * t + p)
    return out


def synthesize(spec: StimulusSpec, amplitudes=None) -> AudioBuffer:
    """Render the stimulus scaled so its peak sample equals ``spec.amplitude``.

    ``amplitudes`` gives per-tone weights; by default all tones are equal.
    """
    x = render_tones(spec, amplitudes)
    peak = np.max(np.abs(x)) if x.size else 0.0
    if peak > 0:
        x = x * (spec.amplitude / peak)
    return AudioBuffer(x, spec.sample_rate)


def write_wav(buffer: AudioBuffer, path) -> None:
    """Write mono 16-bit little-endian PCM."""
    pcm = np.clip(np.rint(buffer.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(buffer.sample_rate))
        w.writeframes(pcm.tobytes())


def read_wav(path) -> AudioBuffer:
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as w:
            channels, width, rate = w.getnchannels(), w.getsampwidth(), w.getframerate()
            if channels != 1:
                raise ValueError(f"{path}: expected mono audio, got {channels} channels")
            if width != 2:
                raise ValueError(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
            raw = w.readframes(w.getnframes())
    except (wave.Error, EOFError) as exc:
        raise ValueError(f"{path}: malformed WAV file ({exc})") from exc
    pcm = np.frombuffer(raw, dtype="<i2").astype(float)
    return AudioBuffer(np.clip(pcm / 32767.0, -1.0, 1.0), rate)
