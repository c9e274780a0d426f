"""Loudspeaker fingerprinting from the frequency response to an inaudible multi-tone stimulus."""

from .features import FeatureVector, distance, extract, similarity, tone_magnitudes
from .registry import LshIndex, MatchDecision, Registry, lsh_build, lsh_query
from .simbench import FleetCalibration, NoiseProfile, generate_fleet, run_experiment
from .stats import ErrorModel, LognormalFit, fit_lognormal
from .stimulus import AudioBuffer, StimulusSpec, papr, read_wav, synthesize, write_wav

__version__ = "0.1.0"
