"""Accuracy/confusion reporting and the additive-noise validation protocol."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import (DEFAULT_SEGMENT_SECONDS, LabeledDataset, corpus_files,
                      file_segments, load_audio, map_per_file, scale_rows)
from .errors import SchemaMismatchError, WriceError
from .features import extract_features
from .mlp import MlpModel, forward
from .synth import add_noise

DEFAULT_NOISE_SCALES = (0.5, 0.05, 0.005)

REPORT_FORMAT = "wrice-eval"
REPORT_VERSION = 1


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray       # (n_labels, n_labels); rows true, cols predicted
    n: int
    label_map: list[str]
    noise_scale: float | None = None
    seed: int | None = None

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        if self.confusion.sum() != self.n:
            raise ValueError("confusion matrix entries must sum to the sample count")

    def to_dict(self) -> dict:
        entry = {"accuracy": self.accuracy, "n": self.n,
                 "label_map": list(self.label_map),
                 "confusion": self.confusion.tolist()}
        if self.noise_scale is not None:
            entry["noise_scale"] = self.noise_scale
        if self.seed is not None:
            entry["seed"] = self.seed
        return entry


def _report(true_labels: np.ndarray, predicted: np.ndarray, label_map,
            noise_scale=None, seed=None) -> EvalReport:
    n_labels = len(label_map)
    confusion = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(confusion, (true_labels, predicted), 1)
    accuracy = float(np.trace(confusion)) / len(true_labels)
    return EvalReport(accuracy=accuracy, confusion=confusion, n=len(true_labels),
                      label_map=list(label_map), noise_scale=noise_scale, seed=seed)


def evaluate(model: MlpModel, test: LabeledDataset) -> EvalReport:
    """Classify every raw feature row with the model's bundled scaler."""
    if test.n == 0:
        raise ValueError("evaluation set is empty")
    if model.scaler is None or model.label_map is None:
        raise ValueError("model has no bundled scaler/label map")
    if list(test.label_map) != list(model.label_map):
        raise SchemaMismatchError(
            f"dataset labels {test.label_map} do not match model labels {model.label_map}")
    scaled = scale_rows(model.scaler, test.features)
    predicted = forward(model, scaled).argmax(axis=1)
    return _report(test.labels, predicted, model.label_map)


def _noisy_file_rows(job) -> list[list[np.ndarray]]:
    """Per-scale feature rows of one file under its derived noise realizations."""
    (path, scales, seed, file_idx, sample_rate, segment_seconds,
     stft_cfg, feat_cfg) = job
    try:
        clean = load_audio(path, sample_rate)
        per_scale = []
        for scale_idx, scale in enumerate(scales):
            noise_seed = np.random.SeedSequence([seed, scale_idx, file_idx])
            noisy = add_noise(clean, scale, noise_seed)
            per_scale.append([extract_features(piece, stft_cfg, feat_cfg).values
                              for piece in file_segments(noisy, segment_seconds)])
        return per_scale
    except (WriceError, ValueError) as exc:
        raise type(exc)(f"{path}: {exc}") from exc


def noise_validation(model: MlpModel, root, scales=DEFAULT_NOISE_SCALES,
                     seed: int = 0, workers: int | None = None) -> list[EvalReport]:
    """Re-extract the corpus under additive standard-normal noise per scale.

    Each file gets one independent noise realization per scale, derived from
    (seed, scale index, file index in path order), so results do not depend on
    processing order or worker count. The model's bundled scaler is reused
    without refitting.
    """
    scales = list(scales)
    if not scales:
        raise ValueError("no noise scales given")
    if model.scaler is None or model.label_map is None:
        raise ValueError("model has no bundled scaler/label map")
    if model.stft_config is None or model.feature_config is None or model.sample_rate is None:
        raise ValueError("model has no bundled extraction settings")
    label_map, pairs = corpus_files(root)
    unknown = set(label_map) - set(model.label_map)
    if unknown:
        raise SchemaMismatchError(f"corpus categories {sorted(unknown)} not in model labels")
    ids = {name: i for i, name in enumerate(model.label_map)}
    segment_seconds = model.segment_seconds or DEFAULT_SEGMENT_SECONDS

    jobs = [(str(path), scales, seed, file_idx, model.sample_rate, segment_seconds,
             model.stft_config, model.feature_config)
            for file_idx, (path, _) in enumerate(pairs)]
    per_file = map_per_file(_noisy_file_rows, jobs, workers)

    per_scale_rows: list[list[np.ndarray]] = [[] for _ in scales]
    true_labels: list[int] = []
    for (path, category), file_rows in zip(pairs, per_file):
        for scale_idx, vectors in enumerate(file_rows):
            per_scale_rows[scale_idx].extend(vectors)
            if scale_idx == 0:
                true_labels.extend([ids[category]] * len(vectors))

    labels = np.array(true_labels, dtype=np.intp)
    reports = []
    for scale, rows in zip(scales, per_scale_rows):
        scaled = scale_rows(model.scaler, np.vstack(rows))
        predicted = forward(model, scaled).argmax(axis=1)
        reports.append(_report(labels, predicted, model.label_map,
                               noise_scale=scale, seed=seed))
    return reports


def report_document(clean: EvalReport | None, noisy: list[EvalReport],
                    seed: int | None = None, configs: dict | None = None) -> dict:
    """Machine-readable evaluation document combining clean and noisy runs."""
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "seed": seed,
        "clean": None if clean is None else clean.to_dict(),
        "noise": [r.to_dict() for r in noisy],
        "configs": configs or {},
    }


def write_report(document: dict, path) -> None:
    Path(path).write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")


def format_report(report: EvalReport) -> str:
    """Human-readable accuracy plus confusion matrix (rows true, cols predicted)."""
    tag = "clean" if report.noise_scale is None else f"noise {report.noise_scale:g}"
    width = max(len(name) for name in report.label_map)
    lines = [f"{tag}: accuracy {report.accuracy:.4f} ({np.trace(report.confusion)}/{report.n})"]
    header = " " * (width + 2) + " ".join(f"{name:>{width}}" for name in report.label_map)
    lines.append(header)
    for i, name in enumerate(report.label_map):
        cells = " ".join(f"{v:>{width}}" for v in report.confusion[i])
        lines.append(f"  {name:>{width}} {cells}")
    return "\n".join(lines)
