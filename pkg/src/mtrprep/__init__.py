"""Corpus preparation for multi-style ASR training.

WAV/WAV49 input and output, a fixed-point GSM 06.10 codec, resampling,
SNR-targeted noise mixing, speed and volume perturbation, dataset
composition and WER scoring.
"""

from .audio import AudioClip, apply_gain, downmix_to_mono, parse_wav, write_wav

__version__ = "0.1.0"

__all__ = ["AudioClip", "apply_gain", "downmix_to_mono", "parse_wav", "write_wav"]
