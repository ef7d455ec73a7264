"""Synthetic rolling-noise corpus generation and additive-noise augmentation.

The recordings the classifier was designed around are not public, so this
module fabricates a stand-in corpus: band-limited Gaussian noise shaped by a
one-pole low-pass, amplitude-modulated at the wheel rotation rate, with a
small stack of rotation harmonics underneath. Wet contact gets a lower
cutoff and less level than dry; higher speed raises both. The point is a
corpus whose four classes are cleanly separable in feature space, not an
acoustic model of the contact patch.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .audio_io import AudioBuffer, write_wav

FRICTIONS = ("dry", "wet")
DEFAULT_CUTOFF_HZ = {"dry": 4000.0, "wet": 1200.0}
DRY_LEVEL_BOOST = 1.25

# Speed scaling, relative to 40 rpm: louder and slightly brighter when faster.
# Tuned so same-friction classes separate by well over 3x the within-class
# spread that the +/-10% parameter jitter induces.
_REFERENCE_RPM = 40.0
_SPEED_LEVEL_EXP = 0.75
_SPEED_CUTOFF_EXP = 0.25

_MOD_DEPTH = 0.3
_N_HARMONICS = 5
_HARMONIC_LEVEL = 0.15

DEFAULT_COUNTS = {"dry_40": 52, "dry_60": 61, "wet_40": 51, "wet_60": 64}
CATEGORIES = tuple(sorted(DEFAULT_COUNTS))


@dataclass(frozen=True)
class ConditionSpec:
    friction: str                       # "dry" | "wet"
    speed_rpm: float                    # nominally 40 or 60
    duration_s: float = 30.0
    base_level: float = 0.3
    noise_cutoff_hz: float | None = None  # None -> friction default
    jitter_pct: float = 0.1

    def __post_init__(self):
        if self.friction not in FRICTIONS:
            raise ValueError(f"friction must be one of {FRICTIONS}, got {self.friction!r}")
        if self.speed_rpm <= 0:
            raise ValueError(f"speed_rpm must be positive, got {self.speed_rpm}")
        if self.duration_s <= 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.base_level <= 0:
            raise ValueError(f"base_level must be positive, got {self.base_level}")
        if not 0 <= self.jitter_pct < 0.5:
            raise ValueError(f"jitter_pct must be in [0, 0.5), got {self.jitter_pct}")

    @property
    def cutoff_hz(self) -> float:
        return DEFAULT_CUTOFF_HZ[self.friction] if self.noise_cutoff_hz is None \
            else self.noise_cutoff_hz


def spec_for_category(category: str, **overrides) -> ConditionSpec:
    """Build the ConditionSpec for a `<friction>_<rpm>` category name."""
    friction, _, rpm = category.partition("_")
    try:
        return ConditionSpec(friction=friction, speed_rpm=float(rpm), **overrides)
    except ValueError as exc:
        raise ValueError(f"bad category name {category!r}: {exc}") from exc


def add_noise(buf: AudioBuffer, scale: float, seed) -> AudioBuffer:
    """Add scale * standard-normal noise per sample; no clipping.

    `seed` may be an int or a numpy SeedSequence; the same seed reproduces the
    same realization.
    """
    if scale < 0:
        raise ValueError(f"noise scale must be >= 0, got {scale}")
    if scale == 0:
        return buf
    rng = np.random.default_rng(seed)
    return AudioBuffer(buf.samples + scale * rng.standard_normal(len(buf)),
                       buf.sample_rate)


def _one_pole_lowpass(x: np.ndarray, cutoff_hz: float, sample_rate: int) -> np.ndarray:
    alpha = 1.0 - np.exp(-2.0 * np.pi * cutoff_hz / sample_rate)
    return lfilter([alpha], [1.0, alpha - 1.0], x)


def synth_sample(spec: ConditionSpec, sample_rate: int, seed) -> AudioBuffer:
    """One synthetic recording; deterministic per seed.

    All shaping parameters are jittered uniformly within +/-jitter_pct so
    samples of one condition form a cloud rather than a point.
    """
    cutoff = spec.cutoff_hz
    if not 0 < cutoff < sample_rate / 2:
        raise ValueError(f"noise cutoff {cutoff} Hz outside (0, {sample_rate / 2}) Hz")
    rng = np.random.default_rng(seed)
    n = int(round(spec.duration_s * sample_rate))

    def jittered(value: float) -> float:
        return value * rng.uniform(1.0 - spec.jitter_pct, 1.0 + spec.jitter_pct)

    speed_ratio = spec.speed_rpm / _REFERENCE_RPM
    level = jittered(spec.base_level
                     * (DRY_LEVEL_BOOST if spec.friction == "dry" else 1.0)
                     * speed_ratio**_SPEED_LEVEL_EXP)
    cutoff = min(jittered(cutoff * speed_ratio**_SPEED_CUTOFF_EXP), 0.49 * sample_rate)
    rotation_hz = jittered(spec.speed_rpm / 60.0)
    depth = jittered(_MOD_DEPTH)

    shaped = _one_pole_lowpass(rng.standard_normal(n), cutoff, sample_rate)
    shaped /= np.sqrt(np.mean(shaped**2))
    t = np.arange(n) / sample_rate
    modulation = 1.0 + depth * np.sin(2.0 * np.pi * rotation_hz * t + rng.uniform(0, 2 * np.pi))
    samples = level * shaped * modulation
    for harmonic in range(1, _N_HARMONICS + 1):
        amp = jittered(level * _HARMONIC_LEVEL / harmonic)
        phase = rng.uniform(0, 2 * np.pi)
        samples += amp * np.sin(2.0 * np.pi * harmonic * rotation_hz * t + phase)
    return AudioBuffer(samples, sample_rate)


def synth_corpus(root, counts: dict[str, int] | None = None,
                 sample_rate: int = 22050, seed: int = 0,
                 **spec_overrides) -> list[tuple[str, str]]:
    """Write a labeled corpus of 16-bit WAVs under `root/<category>/`.

    Default per-category counts are 52/61/51/64. Every file gets its own seed
    derived from (seed, category index, file index), so the corpus is
    reproducible while samples stay independent. Returns the (path, category)
    manifest, which is also written to `root/manifest.csv`.
    """
    counts = DEFAULT_COUNTS if counts is None else counts
    manifest: list[tuple[str, str]] = []
    root = Path(root)
    for cat_idx, category in enumerate(sorted(counts)):
        if counts[category] < 0:
            raise ValueError(f"negative count for category {category!r}")
        if counts[category] == 0:
            continue
        spec = spec_for_category(category, **spec_overrides)
        cat_dir = root / category
        cat_dir.mkdir(parents=True, exist_ok=True)
        for file_idx in range(counts[category]):
            file_seed = np.random.SeedSequence([seed, cat_idx, file_idx])
            buf = synth_sample(spec, sample_rate, file_seed)
            path = cat_dir / f"{category}_{file_idx:03d}.wav"
            write_wav(path, buf, bits_per_sample=16)
            manifest.append((str(path), category))
    manifest.sort()
    if manifest:
        with open(root / "manifest.csv", "w", newline="") as fh:
            fh.write(f"# wrice-manifest seed={seed} sample_rate={sample_rate}\n")
            writer = csv.writer(fh)
            writer.writerow(["path", "category"])
            writer.writerows(manifest)
    return manifest
