"""Command-line entry point: synth, extract, train, eval, predict, augment,
spectrogram.

Exit codes: 0 success, 1 domain error (bad data, schema mismatch, I/O),
2 usage error. All randomness is controlled by --seed; identical command
lines produce identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import evaluation, mlp, synth
from .audio_io import read_wav, resample_linear, to_mono, write_wav
from .dsp import StftConfig, stft
from .errors import WriceError
from .features import FeatureConfig, extract_features

_LOG_FLOOR_DB = -80.0  # PGM dynamic range floor below the spectrogram peak


def _add_stft_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sr", type=int, default=ds_mod.DEFAULT_SAMPLE_RATE,
                        help="analysis sample rate in Hz (default %(default)s)")
    parser.add_argument("--frame", type=int, default=2048,
                        help="frame length in samples, power of two (default %(default)s)")
    parser.add_argument("--hop", type=int, default=512,
                        help="hop between frames in samples (default %(default)s)")


def _add_extract_flags(parser: argparse.ArgumentParser) -> None:
    _add_stft_flags(parser)
    parser.add_argument("--segment-seconds", type=float,
                        default=ds_mod.DEFAULT_SEGMENT_SECONDS,
                        help="analysis segment length (default %(default)s)")
    parser.add_argument("--workers", type=int, default=None,
                        help="parallel extraction processes (default: CPU count)")


def _stft_config(args) -> StftConfig:
    return StftConfig(frame_len=args.frame, hop=args.hop)


def _extraction_meta(sr: int, stft_cfg: StftConfig, feat_cfg: FeatureConfig,
                     segment_seconds: float) -> dict:
    return {"sr": sr, "frame": stft_cfg.frame_len, "hop": stft_cfg.hop,
            "window": stft_cfg.window, "segment_seconds": segment_seconds,
            "n_mfcc": feat_cfg.n_mfcc, "n_mels": feat_cfg.n_mels}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wrice",
        description="Rolling-noise feature extraction and adhesion-condition classification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    p.add_argument("--out", required=True, help="corpus root directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sr", type=int, default=ds_mod.DEFAULT_SAMPLE_RATE)
    p.add_argument("--duration", type=float, default=30.0,
                   help="seconds per file (default %(default)s)")
    p.add_argument("--counts", default=None,
                   help="per-category file counts, comma-separated in sorted "
                        "category order (default 52,61,51,64)")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("extract", help="extract feature rows from a corpus into CSV")
    p.add_argument("--in", dest="in_path", required=True, help="corpus root directory")
    p.add_argument("--out", required=True, help="output feature CSV")
    _add_extract_flags(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("train", help="train the classifier and save a model file")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--features", help="feature CSV from `extract`")
    source.add_argument("--in", dest="in_path", help="corpus root (extracts on the fly)")
    p.add_argument("--out", required=True, help="output model file")
    p.add_argument("--epochs", type=int, default=60)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--arch", choices=sorted(mlp.ARCHITECTURES), default="paper4")
    _add_extract_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a model on a corpus, optionally under noise")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="in_path", required=True, help="corpus root directory")
    p.add_argument("--noise", default=None,
                   help="comma-separated noise scales, e.g. 0.5,0.05,0.005")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", dest="json_path", default=None,
                   help="also write a machine-readable report here")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel extraction processes (default: CPU count)")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("predict", help="classify one WAV file")
    p.add_argument("--model", required=True)
    p.add_argument("wav", help="input WAV file")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("augment", help="write noisy copies of a WAV or corpus")
    p.add_argument("--in", dest="in_path", required=True, help="WAV file or corpus root")
    p.add_argument("--out", required=True, help="output file or directory")
    p.add_argument("--scale", type=float, required=True, help="noise scale")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("spectrogram", help="dump a magnitude spectrogram as CSV or PGM")
    p.add_argument("--in", dest="in_path", required=True, help="input WAV file")
    p.add_argument("--out", required=True, help="output .csv or .pgm path")
    p.add_argument("--format", choices=("csv", "pgm"), default=None,
                   help="inferred from the output suffix when omitted")
    _add_stft_flags(p)
    p.set_defaults(func=_cmd_spectrogram)

    return parser


def _cmd_synth(args) -> int:
    counts = None
    if args.counts is not None:
        values = [int(v) for v in args.counts.split(",")]
        if len(values) != len(synth.CATEGORIES):
            raise ValueError(f"--counts needs {len(synth.CATEGORIES)} values "
                             f"for {synth.CATEGORIES}")
        counts = dict(zip(synth.CATEGORIES, values))
    manifest = synth.synth_corpus(args.out, counts=counts, sample_rate=args.sr,
                                  seed=args.seed, duration_s=args.duration)
    print(f"wrote {len(manifest)} files under {args.out}")
    return 0


def _cmd_extract(args) -> int:
    stft_cfg = _stft_config(args)
    feat_cfg = FeatureConfig()
    ds = ds_mod.ingest_corpus(args.in_path, stft_cfg, feat_cfg,
                              sample_rate=args.sr,
                              segment_seconds=args.segment_seconds,
                              workers=args.workers)
    meta = _extraction_meta(args.sr, stft_cfg, feat_cfg, args.segment_seconds)
    ds_mod.write_features_csv(ds, args.out, metadata=meta)
    print(f"wrote {ds.n} rows x {ds.features.shape[1]} features to {args.out}")
    return 0


def _cmd_train(args) -> int:
    stft_cfg = _stft_config(args)
    feat_cfg = FeatureConfig()
    sr = args.sr
    segment_seconds = args.segment_seconds
    if args.features:
        data = ds_mod.read_features_csv(args.features)
        meta = ds_mod.read_features_meta(args.features)
        sr = int(meta.get("sr", sr))
        segment_seconds = float(meta.get("segment_seconds", segment_seconds))
        if "frame" in meta and "hop" in meta:
            stft_cfg = StftConfig(frame_len=int(meta["frame"]), hop=int(meta["hop"]),
                                  window=meta.get("window", "hann"))
    else:
        data = ds_mod.ingest_corpus(args.in_path, stft_cfg, feat_cfg,
                                    sample_rate=sr, segment_seconds=segment_seconds,
                                    workers=args.workers)

    train_set, test_set = ds_mod.stratified_split(data, args.test_fraction, args.seed)
    scaler = ds_mod.fit_scaler(train_set)
    scaled_train = ds_mod.LabeledDataset(
        features=ds_mod.scale_rows(scaler, train_set.features),
        labels=train_set.labels, label_map=train_set.label_map,
        source_paths=train_set.source_paths)

    dims = mlp.layer_dims_for(args.arch, data.features.shape[1], len(data.label_map))
    model = mlp.init_model(dims, seed=args.seed, scaler=scaler,
                           label_map=list(data.label_map), stft_config=stft_cfg,
                           feature_config=feat_cfg, sample_rate=sr,
                           segment_seconds=segment_seconds)
    cfg = mlp.TrainConfig(epochs=args.epochs, batch_size=args.batch,
                          learning_rate=args.lr, seed=args.seed)
    model, history = mlp.train(model, scaled_train, cfg)
    if history.loss:
        print(f"trained {args.epochs} epochs: loss {history.loss[-1]:.4f} "
              f"accuracy {history.accuracy[-1]:.4f} ({train_set.n} rows)")
    report = evaluation.evaluate(model, test_set)
    print(evaluation.format_report(report).replace("clean", "test", 1))
    mlp.save_model(model, args.out)
    print(f"saved model to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    model = mlp.load_model(args.model)
    data = ds_mod.ingest_corpus(args.in_path, model.stft_config, model.feature_config,
                                sample_rate=model.sample_rate or ds_mod.DEFAULT_SAMPLE_RATE,
                                segment_seconds=model.segment_seconds
                                or ds_mod.DEFAULT_SEGMENT_SECONDS,
                                workers=args.workers)
    clean = evaluation.evaluate(model, data)
    print(evaluation.format_report(clean))
    noisy: list[evaluation.EvalReport] = []
    if args.noise:
        scales = [float(v) for v in args.noise.split(",")]
        noisy = evaluation.noise_validation(model, args.in_path, scales,
                                            seed=args.seed, workers=args.workers)
        for report in noisy:
            print(evaluation.format_report(report))
    if args.json_path:
        configs = {"model": str(args.model), "corpus": str(args.in_path),
                   "sample_rate": model.sample_rate, "layer_dims": model.layer_dims}
        doc = evaluation.report_document(clean, noisy, seed=args.seed, configs=configs)
        evaluation.write_report(doc, args.json_path)
        print(f"wrote report to {args.json_path}")
    return 0


def _cmd_predict(args) -> int:
    model = mlp.load_model(args.model)
    if model.stft_config is None or model.feature_config is None:
        raise ValueError(f"{args.model}: model has no bundled extraction settings")
    _, channels = read_wav(args.wav)
    buf = resample_linear(to_mono(channels),
                          model.sample_rate or ds_mod.DEFAULT_SAMPLE_RATE)
    fv = extract_features(buf, model.stft_config, model.feature_config)
    label, probs = mlp.predict(model, fv)
    print(label)
    for name, p in zip(model.label_map, probs):
        print(f"  {name}: {p:.6f}")
    return 0


def _cmd_augment(args) -> int:
    src = Path(args.in_path)
    out = Path(args.out)
    if src.is_dir():
        _, pairs = ds_mod.corpus_files(src)
        rows = []
        for file_idx, (path, category) in enumerate(pairs):
            _, channels = read_wav(path)
            noisy = synth.add_noise(to_mono(channels), args.scale,
                                    np.random.SeedSequence([args.seed, 0, file_idx]))
            target = out / category / path.name
            target.parent.mkdir(parents=True, exist_ok=True)
            write_wav(target, noisy)
            rows.append((str(target), category))
        with open(out / "manifest.csv", "w", newline="") as fh:
            fh.write(f"# wrice-augment scale={args.scale} seed={args.seed} source={src}\n")
            writer = csv.writer(fh)
            writer.writerow(["path", "category"])
            writer.writerows(rows)
        print(f"wrote {len(rows)} noisy files under {out}")
    else:
        _, channels = read_wav(src)
        noisy = synth.add_noise(to_mono(channels), args.scale, args.seed)
        write_wav(out, noisy)
        print(f"wrote {out}")
    return 0


def _cmd_spectrogram(args) -> int:
    fmt = args.format or ("pgm" if str(args.out).lower().endswith(".pgm") else "csv")
    _, channels = read_wav(args.in_path)
    buf = resample_linear(to_mono(channels), args.sr)
    spec = stft(buf, _stft_config(args))
    meta = (f"sr={args.sr} frame={args.frame} hop={args.hop} "
            f"window={spec.config.window} source={args.in_path}")
    if fmt == "csv":
        with open(args.out, "w", newline="") as fh:
            fh.write(f"# wrice-spectrogram {meta}\n")
            writer = csv.writer(fh)
            writer.writerow([format(f, ".17g") for f in spec.bin_freqs])
            for row in spec.magnitudes:
                writer.writerow([format(v, ".17g") for v in row])
    else:
        _write_pgm(spec.magnitudes, args.out, meta)
    print(f"wrote {spec.n_frames}x{spec.n_bins} spectrogram to {args.out}")
    return 0


def _write_pgm(magnitudes: np.ndarray, path, meta: str) -> None:
    """8-bit binary PGM, log-scaled with a -80 dB floor, low bins at the bottom."""
    peak = magnitudes.max()
    floor = _LOG_FLOOR_DB
    if peak <= 0:
        levels = np.zeros_like(magnitudes)
    else:
        db = 20.0 * np.log10(np.maximum(magnitudes / peak, 10.0 ** (floor / 20.0)))
        levels = (db - floor) / -floor
    pixels = np.rint(levels * 255).astype(np.uint8)
    image = pixels.T[::-1]  # rows = bins (high frequency on top), cols = frames
    header = f"P5\n# wrice-spectrogram {meta}\n{image.shape[1]} {image.shape[0]}\n255\n"
    Path(path).write_bytes(header.encode() + image.tobytes())


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (WriceError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
