"""Command-line interface.

Subcommands: synth, preprocess, fsr-percentiles, train-regressor,
train-classifier, evaluate, stream, inspect-model. Each accepts ``--config``;
on failure the process exits nonzero and prints ``error: <category>: <message>``
to stderr.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import pipeline
from .config import PipelineConfig, dump_config, load_config
from .errors import GaitPhaseError, InvalidConfigError, InvalidInputError
from .evaluation import ablation_compare
from .nn.modelfile import load_model, save_model, to_text
from .segmentation import fsr_sum_series
from .sessionio import SessionRecording, ingest, write_session
from .synth import SynthConfig, generate_corpus, split_by_subject

SPLITS = ("train", "validation", "test")
EXIT_ERROR = 1
EXIT_IO = 3


def _out(text: str) -> None:
    sys.stdout.write(text)
    if not text.endswith("\n"):
        sys.stdout.write("\n")


def _config(args) -> PipelineConfig:
    config = load_config(args.config)
    changes = {}
    if getattr(args, "n_window", None) is not None:
        changes["n_window"] = args.n_window
    for leg_thr in getattr(args, "threshold", None) or []:
        leg, _, value = leg_thr.partition("=")
        if not value:
            raise InvalidConfigError(f"--threshold expects LEG=VALUE, got {leg_thr!r}")
        thresholds = dict(changes.get("contact_thresholds", config.contact_thresholds))
        thresholds[leg] = float(value)
        changes["contact_thresholds"] = thresholds
    if getattr(args, "norm_range", None) is not None:
        start, end = args.norm_range
        changes["normalization"] = {"source": "range", "start_s": start, "end_s": end}
    if getattr(args, "split_seed", None) is not None:
        changes["split_seed"] = args.split_seed
    net_changes = {}
    for name in ("seed", "max_epochs", "batch_size", "patience", "train_stride", "learning_rate", "dropout_rate"):
        value = getattr(args, name, None)
        if value is not None:
            net_changes["init_seed" if name == "seed" else name] = value
    if net_changes:
        key = getattr(args, "network", None)
        if key is None:
            raise InvalidConfigError("network overrides need a training command")
        changes[key] = replace(getattr(config, key), **net_changes)
    if changes:
        config = replace(config, **changes)
    return config


def _session_paths(items) -> list[Path]:
    paths = []
    for item in items:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.csv")))
        elif p.is_file():
            paths.append(p)
        else:
            raise FileNotFoundError(f"no such file or directory: {item}")
    if not paths:
        raise InvalidInputError("no session files found")
    return paths


def _load(items) -> list[SessionRecording]:
    return [ingest(p) for p in _session_paths(items)]


def _preprocess_all(recordings, config):
    return [pipeline.run_preprocess(r, config) for r in recordings]


def _split(preps, config, which=None):
    parts = dict(zip(SPLITS, split_by_subject(preps, config.split_ratios, config.split_seed)))
    return parts if which is None else parts[which]


def _progress(quiet):
    if quiet:
        return None

    def report(epoch, train_loss, val_loss):
        print(f"epoch {epoch}: train_loss={train_loss:.6g} val_loss={val_loss:.6g}", file=sys.stderr, flush=True)
    return report


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    config = load_config(args.config)
    doc = dict(config.synth)
    for name in ("seed", "n_subjects", "noise"):
        value = getattr(args, name)
        if value is not None:
            doc[name] = value
    if "slopes" in doc:
        doc["slopes"] = tuple(float(s) for s in doc["slopes"])
    if "stride_duration" in doc:
        doc["stride_duration"] = tuple(doc["stride_duration"])
    try:
        synth = SynthConfig(**doc)
    except TypeError as exc:
        raise InvalidConfigError(f"bad synth section: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for s in generate_corpus(synth):
        path = out / f"{s.name}.csv"
        write_session(s.to_session_file(), path)
        _out(str(path))
    return 0


def cmd_preprocess(args) -> int:
    config = _config(args)
    reports = []
    for path in _session_paths(args.inputs):
        prep = pipeline.run_preprocess(ingest(path), config)
        reports.append(prep.report())
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            np.savez(
                out / (path.stem + ".npz"),
                channels=prep.channels,
                normalized=prep.normalized,
                phase=prep.phase,
                slope=prep.slope,
                mode=prep.mode,
                keep=prep.keep,
                norm_mean=prep.stats.mean,
                norm_std=prep.stats.std,
            )
    _out(json.dumps(reports, sort_keys=True, indent=2))
    return 0


def cmd_fsr_percentiles(args) -> int:
    qs = (1, 5, 10, 25, 50, 75, 90, 95, 99)
    for rec in _load(args.inputs):
        f = fsr_sum_series(rec.fsr_heel, rec.fsr_toe, rec.fsr_ball)
        values = np.percentile(f, qs)
        _out(f"{rec.source} leg={rec.leg} " + " ".join(f"p{q}={v:.4g}" for q, v in zip(qs, values)))
    return 0


def _train(args, which: str) -> int:
    config = _config(args)
    parts = _split(_preprocess_all(_load(args.data), config), config)
    if which == "regressor":
        model, history = pipeline.train_regressor(parts["train"], parts["validation"], config, _progress(args.quiet))
    else:
        model, history = pipeline.train_classifier(parts["train"], parts["validation"], config, progress=_progress(args.quiet))
    model.meta["subjects"] = {k: sorted({s.subject for s in v}) for k, v in parts.items()}
    model.meta["config"] = json.loads(json.dumps(config.to_dict(), default=list))
    save_model(model, args.out)
    _out(f"saved {which} to {args.out} (best epoch {history.best_epoch}, val_loss {history.val_loss[history.best_epoch - 1]:.6g})")
    return 0


def cmd_train_regressor(args) -> int:
    return _train(args, "regressor")


def cmd_train_classifier(args) -> int:
    return _train(args, "classifier")


def cmd_evaluate(args) -> int:
    config = _config(args)
    reg = load_model(args.regressor) if args.regressor else None
    clf = load_model(args.classifier) if args.classifier else None
    if reg is None and clf is None:
        raise InvalidInputError("evaluate needs --regressor and/or --classifier")
    for m in (reg, clf):
        if m is not None:
            pipeline.check_model_config(m, config)
    preps = _preprocess_all(_load(args.data), config)
    sessions = preps if args.split == "all" else _split(preps, config, args.split)
    report = pipeline.evaluate_sessions(sessions, args.split, reg, clf, circular=not args.linear_phase)
    report.extra["normalization"] = dict(config.normalization)
    if args.baseline_classifier:
        if clf is None:
            raise InvalidInputError("--baseline-classifier needs --classifier")
        base = pipeline.evaluate_sessions(sessions, args.split, classifier=load_model(args.baseline_classifier))
        row = ablation_compare(report, base)[0]
        report.extra["ablation"] = row.to_dict()
    text = report.to_json() if args.format == "json" else report.to_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    _out(text)
    return 0


def _socket_writer(target: str):
    host, _, port = target.rpartition(":")
    if not host or not port.isdigit():
        raise InvalidInputError(f"--socket expects HOST:PORT, got {target!r}")
    conn = socket.create_connection((host, int(port)))
    stream = conn.makefile("w", encoding="utf-8", newline="\n")

    def write(line: str) -> None:
        stream.write(line + "\n")

    def close() -> None:
        stream.close()
        conn.close()
    return write, close


def cmd_stream(args) -> int:
    config = _config(args)
    reg = load_model(args.regressor) if args.regressor else None
    clf = load_model(args.classifier) if args.classifier else None
    rec = ingest(args.input)
    close = None
    write = None
    if args.socket:
        write, close = _socket_writer(args.socket)
    elif args.out:
        handle = open(args.out, "w", encoding="utf-8")
        write = lambda line: handle.write(line + "\n")  # noqa: E731
        close = handle.close
    latencies, cpu = [], []
    try:
        pipeline.run_stream(rec, config, reg, clf, realtime=args.realtime, write=write,
                            latencies=latencies, cpu_latencies=cpu)
    finally:
        if close is not None:
            close()
    if latencies:
        lat = np.asarray(latencies) * 1e3
        cpu_ms = np.asarray(cpu) * 1e3
        print(f"latency_ms wall mean={lat.mean():.4f} max={lat.max():.4f} "
              f"cpu mean={cpu_ms.mean():.4f} max={cpu_ms.max():.4f}", file=sys.stderr)
    return 0


def cmd_inspect_model(args) -> int:
    model = load_model(args.model)
    if args.format == "json":
        _out(to_text(model))
        return 0
    _out(f"task: {model.task}")
    for i, layer in enumerate(model.layers):
        _out(f"layer {i}: {layer.input_size} -> {layer.output_size} {layer.activation}")
    _out(f"parameters: {model.n_params}")
    layout = model.meta.get("feature_layout", {})
    for key in sorted(layout):
        _out(f"{key}: {layout[key]}")
    return 0


def cmd_show_config(args) -> int:
    _out(dump_config(_config(args)))
    return 0


# ---------------------------------------------------------------- parser

def _add_config(p, window=True):
    p.add_argument("--config", help="YAML config (default: $GAITPHASE_CONFIG_DIR/config.yaml)")
    p.add_argument("--threshold", action="append", metavar="LEG=VALUE", help="contact threshold override")
    p.add_argument("--norm-range", nargs=2, type=float, metavar=("START_S", "END_S"),
                   help="normalize with a level-walking time range instead of the annotations")
    if window:
        p.add_argument("--n-window", type=int, help="window length in samples")


def _add_training(p, network):
    p.set_defaults(network=network)
    p.add_argument("--data", nargs="+", required=True, help="session files or directories")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, help="weight initialization seed")
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--dropout-rate", type=float)
    p.add_argument("--train-stride", type=int, help="use every k-th training window")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaitphase", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic session corpus")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-subjects", type=int)
    p.add_argument("--noise", type=float, help="noise STD as a fraction of channel amplitude")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preprocess", help="filter, segment, label and normalize sessions")
    _add_config(p)
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out", help="directory for per-session .npz feature files")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fsr-percentiles", help="print F_sum percentiles to help choose contact thresholds")
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_fsr_percentiles)

    p = sub.add_parser("train-regressor", help="train the gait phase / slope network")
    _add_config(p)
    _add_training(p, "regressor")
    p.set_defaults(func=cmd_train_regressor)

    p = sub.add_parser("train-classifier", help="train the locomotion mode network")
    _add_config(p)
    _add_training(p, "classifier")
    p.set_defaults(func=cmd_train_classifier)

    p = sub.add_parser("evaluate", help="compute metrics on a data split")
    _add_config(p, window=False)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--regressor")
    p.add_argument("--classifier")
    p.add_argument("--baseline-classifier", help="second classifier for a with/without history comparison")
    p.add_argument("--split", choices=SPLITS + ("all",), default="test")
    p.add_argument("--split-seed", type=int)
    p.add_argument("--linear-phase", action="store_true", help="non-circular phase error")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stream", help="replay a session sample by sample")
    _add_config(p, window=False)
    p.add_argument("input")
    p.add_argument("--regressor")
    p.add_argument("--classifier")
    p.add_argument("--realtime", action="store_true", help="pace output at the sample interval")
    p.add_argument("--socket", metavar="HOST:PORT", help="send lines to a listening TCP socket")
    p.add_argument("--out", help="write lines to a file instead of stdout")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("inspect-model", help="print a model file's architecture and metadata")
    p.add_argument("model")
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_inspect_model)

    p = sub.add_parser("show-config", help="print the effective configuration")
    _add_config(p)
    p.set_defaults(func=cmd_show_config)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GaitPhaseError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
