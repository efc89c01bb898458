"""Command-line front end: ingest, synth, features, identify, detect, eclipse."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ExperimentConfig, relpath, synth_profiles, trace_filename
from .detect import (InsufficientNoiseError, build_detector, detection_table_csv,
                     evaluate_detection, split_for_detection)
from .eclipse import ReshapePolicy, default_delay_grid, delay_curve_csv, reshape, sweep_delay
from .features import Source, build_dataset, raw_baseline, sweep_window_sizes
from .forest import cross_validate
from .pcap import convert_pcap_with_summary
from .trace import (NOISE, ClassLabel, ConfigurationError, TraceError, balance_classes,
                    format_csv_trace, parse_csv_trace, synthesize_trace)

logger = logging.getLogger("iot_eclipse")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _comment_block(lines) -> str:
    return "".join(f"# {line}\n" for line in lines)


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    logger.info("wrote %s", path)
    return path


def _load_config(args, check_paths=True) -> ExperimentConfig:
    if not args.config:
        raise ConfigurationError(f"'{args.command}' needs --config")
    return ExperimentConfig.load(args.config, {"seed": args.seed}, check_paths)


def _out_dir(args, cfg: ExperimentConfig | None = None) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output is not None:
        return cfg.output
    raise ConfigurationError("no output directory: pass --out or set 'output' in the config")


# ---------------------------------------------------------------------------

def _parse_map(text: str | None) -> dict:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"bad --map entry {item!r}, expected key=column")
        key = {"time": "timestamp"}.get(key.strip(), key.strip())
        if key not in ("timestamp", "size"):
            raise ConfigurationError(f"--map key must be time/timestamp or size, got {key!r}")
        out[key] = value.strip()
    return out


def cmd_ingest(args) -> int:
    label = ClassLabel.parse(args.label) if args.label else None
    if args.pcap:
        path = Path(args.pcap)
        if not path.exists():
            raise FileNotFoundError(f"input file not found: {path}")
        if not args.mac:
            raise ConfigurationError("--pcap needs --mac")
        trace, summary = convert_pcap_with_summary(path, args.mac, label)
        print(f"{path}: {summary}", file=sys.stderr)
    else:
        path = Path(args.csv)
        if not path.exists():
            raise FileNotFoundError(f"input file not found: {path}")
        trace = parse_csv_trace(path, label, _parse_map(args.map) or None)
        print(f"{path}: {len(trace)} records kept, 0 skipped", file=sys.stderr)
    if not args.out:
        raise ConfigurationError("ingest needs --out")
    comments = [f"iot-eclipse {__version__}", f"source {path.name}"]
    if label is not None:
        comments.append(f"label {label}")
    _write(Path(args.out), format_csv_trace(trace, comments))
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.config:
        cfg = _load_config(args, check_paths=False)
        section, seed = cfg.synth, cfg.seed
        out = _out_dir(args, cfg)
    else:
        if args.seed is None:
            raise ConfigurationError("synth without --config needs --seed")
        if not args.benchmark:
            raise ConfigurationError("synth needs --config or --benchmark")
        section, seed = {}, args.seed
        out = _out_dir(args)
    section = dict(section)
    if args.benchmark:
        section["benchmark"] = args.benchmark
    if args.packets:
        section["n_packets"] = args.packets
    manifest = {"seed": seed, "traces": []}
    for i, (profile, n) in enumerate(synth_profiles(section, seed)):
        trace = synthesize_trace(profile, n)
        path = _write(out / trace_filename(trace.label, i),
                      format_csv_trace(trace, [f"iot-eclipse {__version__}",
                                               f"synthetic profile {json.dumps(profile.to_dict(), sort_keys=True)}"]))
        entry = {"path": relpath(path, out), "label": str(trace.label) if trace.label else None}
        if trace.label == NOISE:
            manifest["noise"] = entry
        else:
            manifest["traces"].append(entry)
    _write(out / "traces.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_features(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    ds = build_dataset(cfg.load_traces(), cfg.window)
    _write(out / "features.csv",
           ds.to_csv(cfg.header(f"window {json.dumps(cfg.window.to_dict(), sort_keys=True)}")))
    return EXIT_OK


def cmd_identify(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    traces = cfg.load_traces()
    if len({t.label for t in traces}) < 2:
        raise ConfigurationError("identify needs at least two labeled classes")

    if args.raw_baseline:
        report = raw_baseline(traces, cfg.forest, args.raw_baseline,
                              max_per_class=args.raw_cap, seed=cfg.seed)
        header = cfg.header(f"raw-baseline {args.raw_baseline}")
        _write(out / "raw_baseline_confusion.csv", report.confusion_csv(header))
        _write(out / "raw_baseline_summary.txt", _comment_block(header) + report.summary())
        print(f"raw {args.raw_baseline} baseline accuracy: {report.accuracy:.4f} "
              f"(baseline caveat: {report.notes[0]})")
        return EXIT_OK

    header = cfg.header(f"window {json.dumps(cfg.window.to_dict(), sort_keys=True)}")
    ds = balance_classes(build_dataset(traces, cfg.window), seed=cfg.seed)
    report = cross_validate(ds, cfg.forest)
    _write(out / "confusion.csv", report.confusion_csv(header))
    _write(out / "summary.txt", _comment_block(header) + report.summary())
    print(f"accuracy: {report.accuracy:.4f} over {report.total} windows")

    if cfg.window_sizes:
        curve = sweep_window_sizes(traces, cfg.window_sizes, cfg.window, cfg.forest, cfg.seed)
        lines = [_comment_block(header), "window_size,accuracy,n_samples,warning\n"]
        for p in curve:
            acc = "" if p.accuracy is None else f"{p.accuracy:.6f}"
            lines.append(f"{p.window_size},{acc},{p.n_samples},{p.warning or ''}\n")
        _write(out / "window_sweep.csv", "".join(lines))
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    if cfg.noise is None:
        raise ConfigurationError("detect needs a 'noise' trace in the config")
    targets = cfg.load_traces()
    noise = cfg.noise.load().with_label(NOISE)
    for t in targets:
        if len(noise) < len(t):
            raise InsufficientNoiseError(
                f"noise trace has {len(noise)} packets, target {t.label} needs {len(t)} "
                f"(short by {len(t) - len(noise)})")
    train_t, test_t = split_for_detection(targets, cfg.train_fraction)
    (train_n,), (test_n,) = split_for_detection([noise], cfg.train_fraction)
    detectors = []
    for t in train_t:
        det = build_detector(t, train_n, cfg.window, cfg.forest, validate=args.validate)
        _write(out / "detectors" / f"{str(t.label).replace('/', '_')}.json", det.dumps() + "\n")
        detectors.append(det)
    chunk = cfg.test_chunk_len or cfg.window.size + 1
    rows = evaluate_detection(detectors, [*test_t, test_n], chunk_len=chunk)
    header = cfg.header(f"test chunk length {chunk}",
                        f"window {json.dumps(cfg.window.to_dict(), sort_keys=True)}")
    _write(out / "detection.csv", detection_table_csv(rows, header))
    for r in rows:
        print(f"{r.device:>16} {r.service:<6} TPR {r.tpr} FPR {r.fpr} accuracy {r.accuracy}")
    return EXIT_OK


def cmd_eclipse(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    traces = cfg.load_traces()
    delays = sorted(args.delay) if args.delay else (cfg.delays or default_delay_grid())
    pad = cfg.pad and not args.no_pad
    jitter = cfg.jitter and not args.no_jitter
    curve = sweep_delay(traces, delays, cfg.window, cfg.forest, pad=pad, jitter=jitter,
                        seed=cfg.seed)
    header = cfg.header(f"pad {pad}", f"jitter {jitter}",
                        f"window {json.dumps(cfg.window.to_dict(), sort_keys=True)}")
    _write(out / "eclipse_curve.csv", delay_curve_csv(curve, header))

    pad_to = int(max(t.sizes.max() for t in traces))
    policy = ReshapePolicy(pad_to if pad else None, delays[-1] if jitter else None, cfg.seed)
    for i, t in enumerate(traces):
        shaped = reshape(t, policy, stream=i)
        _write(out / "reshaped" / trace_filename(t.label, i),
               format_csv_trace(shaped, cfg.header(f"label {t.label}",
                                                   f"pad_to {policy.pad_to}",
                                                   f"max_delay {policy.max_delay}")))
    for p in curve:
        print(f"max delay {p.max_delay:.3g} s: clean model {p.acc_clean_model:.4f}, "
              f"retrained {p.acc_retrained:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="global seed, overrides the config")
    common.add_argument("--out", help="output directory (output file for ingest)")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="iot-eclipse", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="convert a capture to canonical CSV")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--pcap", help="classic pcap file")
    src.add_argument("--csv", help="CSV with a header row")
    p.add_argument("--mac", help="receiver MAC address to keep (pcap only)")
    p.add_argument("--map", help="column mapping, e.g. time=col0,size=col2")
    p.add_argument("--label", help="class label, e.g. EchoDot/Music")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic labeled traces")
    p.add_argument("--benchmark", choices=["identification", "timing", "detection"])
    p.add_argument("--packets", type=int, help="packets per class trace")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", parents=[common], help="export window feature matrix")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("identify", parents=[common], help="cross-validated identification")
    p.add_argument("--raw-baseline", choices=[Source.INTERARRIVAL.value, Source.SIZE.value],
                   help="classify raw per-packet values instead of window statistics")
    p.add_argument("--raw-cap", type=int, default=500,
                   help="samples per class kept for the raw baseline (default 500)")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("detect", parents=[common], help="one-vs-noise detection table")
    p.add_argument("--validate", action="store_true",
                   help="cross-validate each detector and reject degenerate ones")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eclipse", parents=[common], help="reshape traffic and sweep delay")
    p.add_argument("--delay", type=float, action="append",
                   help="maximum delay in seconds (repeatable; replaces the grid)")
    p.add_argument("--no-pad", action="store_true", help="leave packet sizes untouched")
    p.add_argument("--no-jitter", action="store_true", help="leave timing untouched")
    p.set_defaults(func=cmd_eclipse)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
