"""Command-line front end: train, enhance, eval, bench, serve."""

import argparse
import csv
import glob
import os
import sys

import numpy as np

from .audio_io import (
    AudioBuffer,
    DictionaryError,
    WavError,
    load_dictionary,
    read_wav,
    save_dictionary,
    write_wav,
)
from .evaluate import (
    SweepSetup,
    benchmark_frame_time,
    run_sweep,
    snr_db,
    standard_scenario,
)
from .localize import make_tdoa_grid
from .masking import MaskParams
from .nmf import (
    Dictionary,
    copy_to_train,
    pretrain_dictionary,
    sample_training_frames,
)
from .pipeline import EnhancerConfig, enhance_file
from .stft import algorithmic_latency, asymmetric_windows, magnitude_frames, \
    symmetric_windows


def parse_fraction(text):
    """Accept plain floats, "inf", and ratios like 3/64."""
    text = text.strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a number or fraction"
        ) from exc


def parse_snr_range(text):
    """lo:hi:step, endpoints inclusive when step divides the span."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(
            f"{text!r} must look like lo:hi:step"
        )
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {text!r}") from exc
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(
            f"range {text!r} needs hi >= lo and step > 0"
        )
    return [float(v) for v in np.arange(lo, hi + step / 2, step)]


def parse_float_list(text):
    return [parse_fraction(p) for p in text.split(",") if p.strip()]


def parse_int_list(text):
    try:
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"{text!r} is not a comma-separated integer list"
        ) from exc


def build_window(frame_size, hop, kind, product_half):
    if kind == "asymmetric":
        return asymmetric_windows(frame_size, product_half, hop=hop)
    return symmetric_windows(frame_size, hop=hop)


def add_window_args(p):
    p.add_argument("--window", choices=["symmetric", "asymmetric"],
                   default="symmetric")
    p.add_argument("--hop", type=int, default=None,
                   help="hop in samples (default: preset for the window kind)")
    p.add_argument("--product-half", type=int, default=16,
                   help="asymmetric windows: synthesis half-length M")


def add_mask_args(p):
    p.add_argument("--epsilon", type=parse_fraction, default=3 / 64,
                   help="binary window width as a fraction (e.g. 3/64)")
    p.add_argument("--alpha", type=parse_fraction, default=3 / 16)
    p.add_argument("--beta", type=parse_fraction, default=float("inf"))
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--mask-mode", choices=["binary", "soft"], default="binary")
    p.add_argument("--coefficients", choices=["all-ones", "inferred"],
                   default="all-ones")
    p.add_argument("--iterations", type=int, default=25,
                   help="coefficient inference iterations (inferred mode)")
    p.add_argument("--localizer",
                   choices=["accumulated", "sliding", "offline"],
                   default="accumulated")
    p.add_argument("--sliding-frames", type=int, default=16)
    p.add_argument("--tdoa-override", type=int, default=None)


def mask_from_args(args):
    return MaskParams(
        epsilon=args.epsilon,
        alpha=args.alpha,
        beta=args.beta,
        eta=args.eta,
        mode=args.mask_mode,
        coefficient_mode=args.coefficients.replace("-", "_"),
    )


def config_from_args(args, dictionary):
    window = build_window(
        dictionary.frame_size, args.hop, args.window, args.product_half
    )
    return EnhancerConfig(
        dictionary=dictionary,
        window=window,
        grid=make_tdoa_grid(),
        fs=dictionary.fs,
        mask=mask_from_args(args),
        localizer_mode=args.localizer,
        sliding_frames=args.sliding_frames,
        inference_iterations=(
            args.iterations if args.coefficients == "inferred" else -1
        ),
        tdoa_override=args.tdoa_override,
    )


def pooled_magnitudes(directory, window):
    paths = sorted(glob.glob(os.path.join(directory, "*.wav")))
    if not paths:
        raise RuntimeError(f"no WAV files in {directory}")
    blocks, fs = [], None
    for path in paths:
        buf = read_wav(path)
        if fs is None:
            fs = buf.fs
        elif buf.fs != fs:
            raise RuntimeError(
                f"mixed sample rates: {path} is {buf.fs} Hz, expected {fs}"
            )
        blocks.append(magnitude_frames(buf.samples, window))
    return np.concatenate(blocks, axis=1), fs


def cmd_train(args):
    window = build_window(args.frame_size, args.hop, args.window,
                          args.product_half)
    speech, fs = pooled_magnitudes(args.speech_dir, window)
    noise, noise_fs = pooled_magnitudes(args.noise_dir, window)
    if noise_fs != fs:
        raise RuntimeError(
            f"mixed sample rates: speech at {fs} Hz, noise at {noise_fs} Hz"
        )
    pooled = np.concatenate([speech, noise], axis=1)
    print(f"pooled {pooled.shape[1]} frames x {pooled.shape[0]} bins at {fs} Hz")
    if args.frames and pooled.shape[1] > args.frames:
        pooled = sample_training_frames(pooled, args.frames, seed=args.seed)
        print(f"subsampled to {pooled.shape[1]} frames")
    if args.method == "copy":
        dictionary = copy_to_train(
            pooled, args.dict_size, fs=fs, frame_size=args.frame_size,
            seed=args.seed,
        )
        print(f"copied {dictionary.n_atoms} frames to atoms")
    else:
        dictionary, trace = pretrain_dictionary(
            pooled, args.dict_size, fs=fs, frame_size=args.frame_size,
            iterations=args.train_iterations, seed=args.seed,
            return_divergence=True,
        )
        stride = max(1, args.train_iterations // 10)
        for k in range(0, len(trace), stride):
            print(f"iter {k + 1:4d}  KL {trace[k]:.6e}")
        if (len(trace) - 1) % stride:
            print(f"iter {len(trace):4d}  KL {trace[-1]:.6e}")
    save_dictionary(args.out, dictionary)
    print(f"saved {dictionary.n_atoms} atoms x {dictionary.bins} bins "
          f"to {args.out}")
    return 0


def cmd_enhance(args):
    dictionary = load_dictionary(args.dictionary)
    config = config_from_args(args, dictionary)
    buf = read_wav(args.infile)
    out, engine = enhance_file(config, buf)
    write_wav(args.outfile, out, fmt=args.format)
    low, high = algorithmic_latency(config.window, fs=config.fs)
    print(f"algorithmic latency: {low:.3f} ms buffered, "
          f"{high:.3f} ms including the hop")
    print(f"mean frame time: {engine.mean_frame_ms:.3f} ms "
          f"(budget {1000.0 * config.window.hop / config.fs:.3f} ms)")
    if args.reference:
        ref = read_wav(args.reference)
        before = snr_db(ref.samples, buf.samples)
        after = snr_db(ref.samples, out.samples)
        print(f"snr: {before:+.2f} dB in, {after:+.2f} dB out "
              f"({after - before:+.2f} dB)")
    print(f"wrote {args.outfile}")
    return 0


def cmd_eval(args):
    grid = make_tdoa_grid()
    scenario = standard_scenario(
        grid,
        duration=args.duration,
        train_duration=args.train_duration,
        seed=args.seed,
    )
    window = build_window(args.frame_size, args.hop, args.window,
                          args.product_half)
    setup = SweepSetup(
        scenario=scenario,
        window=window,
        n_atoms=args.dict_size,
        train_iterations=args.train_iterations,
        mask=mask_from_args(args),
        localizer_mode=args.localizer,
        seed=args.seed,
    )
    axes = {}
    if args.snr:
        axes["snr_db"] = args.snr
    if args.epsilon_list:
        axes["epsilon"] = args.epsilon_list
    if args.dict_sizes:
        axes["dictionary_size"] = args.dict_sizes
    if args.infer_iterations:
        axes["iterations"] = args.infer_iterations
    if not axes:
        axes["epsilon"] = [args.epsilon]
    rows = run_sweep(setup, axes, out_csv=args.out)
    for row in rows:
        print(f"{row['cell']}: in {row['input_snr_db']:+.2f} dB, "
              f"out {row['output_snr_db']:+.2f} dB "
              f"({row['improvement_db']:+.2f} dB)")
    if args.out:
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_bench(args):
    window = build_window(args.frame_size, args.hop, args.window,
                          args.product_half)
    bins = args.frame_size // 2 + 1
    rng = np.random.default_rng(args.seed)
    rows = []
    for d in args.dict_sizes:
        atoms = (rng.random((bins, d)) + 1e-3).astype(np.float32)
        atoms /= atoms.sum(axis=0)
        config = EnhancerConfig(
            dictionary=Dictionary(atoms=atoms, fs=args.fs,
                                  frame_size=args.frame_size),
            window=window,
            grid=make_tdoa_grid(),
            fs=args.fs,
            mask=mask_from_args(args),
            localizer_mode=args.localizer,
            inference_iterations=(
                args.iterations if args.coefficients == "inferred" else -1
            ),
        )
        stats = benchmark_frame_time(config, trials=args.trials,
                                     warmup=args.warmup, seed=args.seed)
        row = {"dictionary_size": d, **{k: stats[k] for k in
               ("mean_ms", "p95_ms", "realtime_ok")}}
        rows.append(row)
        print(f"D={d:5d}  mean {stats['mean_ms']:.3f} ms  "
              f"p95 {stats['p95_ms']:.3f} ms  "
              f"realtime={'yes' if stats['realtime_ok'] else 'no'}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            writer = csv.DictWriter(
                f, fieldnames=["dictionary_size", "mean_ms", "p95_ms",
                               "realtime_ok"]
            )
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def cmd_serve(args):
    import uvicorn

    from .service import PipelineRunner, create_app

    dictionary = load_dictionary(args.dictionary)
    config = config_from_args(args, dictionary)
    buf = read_wav(args.source)
    if buf.fs != config.fs:
        raise RuntimeError(
            f"source is {buf.fs} Hz but the dictionary expects {config.fs}"
        )
    samples = buf.samples
    if samples.shape[0] == 1:
        samples = np.vstack([samples, samples])
    runner = PipelineRunner(config, samples, pace=not args.no_pace)
    app = create_app(runner)
    runner.start()
    print(f"serving ws://{args.host}:{args.port}/ws "
          f"({dictionary.n_atoms} atoms, looping {args.source})")
    try:
        uvicorn.run(app, host=args.host, port=args.port,
                    log_level=args.log_level)
    finally:
        runner.stop()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stereonmf",
        description="Two-channel speech enhancement by NMF atom delay masking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="learn a dictionary from WAV folders")
    p.add_argument("speech_dir")
    p.add_argument("noise_dir")
    p.add_argument("--out", required=True)
    p.add_argument("--dict-size", type=int, default=1024)
    p.add_argument("--train-iterations", type=int, default=100)
    p.add_argument("--frames", type=int, default=2048,
                   help="training frame budget; 0 keeps everything")
    p.add_argument("--method", choices=["learn", "copy"], default="learn")
    p.add_argument("--frame-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    add_window_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="filter a stereo WAV file")
    p.add_argument("infile")
    p.add_argument("outfile")
    p.add_argument("--dictionary", required=True)
    p.add_argument("--reference", default=None,
                   help="clean target WAV for SNR reporting")
    p.add_argument("--format", choices=["float32", "pcm16"],
                   default="float32")
    add_window_args(p)
    add_mask_args(p)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="synthetic-scene parameter sweeps")
    p.add_argument("--snr", type=parse_snr_range, default=None,
                   help="input SNR axis as lo:hi:step, e.g. -40:40:10")
    p.add_argument("--epsilon-list", type=parse_float_list, default=None)
    p.add_argument("--dict-sizes", type=parse_int_list, default=None)
    p.add_argument("--infer-iterations", type=parse_int_list, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--train-duration", type=float, default=2.0)
    p.add_argument("--dict-size", type=int, default=128)
    p.add_argument("--train-iterations", type=int, default=100)
    p.add_argument("--frame-size", type=int, default=1024)
    p.add_argument("--seed", type=int, default=42)
    add_window_args(p)
    add_mask_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="frame-time benchmarks")
    p.add_argument("--dict-sizes", type=parse_int_list, default=[64, 256, 1024])
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--out", default=None)
    p.add_argument("--frame-size", type=int, default=1024)
    p.add_argument("--fs", type=int, default=16000)
    p.add_argument("--seed", type=int, default=0)
    add_window_args(p)
    add_mask_args(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="live control/telemetry service")
    p.add_argument("--dictionary", required=True)
    p.add_argument("--source", required=True,
                   help="WAV file to loop as the live input")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--no-pace", action="store_true",
                   help="run flat out instead of real-time pacing")
    p.add_argument("--log-level", default=os.environ.get(
        "STEREONMF_LOG_LEVEL", "info"))
    add_window_args(p)
    add_mask_args(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (RuntimeError, WavError, DictionaryError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
