"""Command-line interface: pretrain component models, replay datasets from a
config file, and summarize run logs.

Exit codes: 0 clean run (alarms do not fail the process), 2 configuration or
usage problems, 3 training failure, 4 data/parse errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import component as comp
from . import config as cfgmod
from . import data as datamod
from . import engine as enginemod
from . import modelio, nn, report
from .errors import (ConfigurationError, DataError, HimonError,
                     ModelFormatError, SetupError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRAINING = 3
EXIT_DATA = 4

PRETRAIN_LENGTH = 4096


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="himon",
        description="Health-indicator monitoring over replayed sensor streams.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="train a reusable component model")
    p.add_argument("--kind", required=True, choices=("T", "C"))
    p.add_argument("--source", required=True,
                   help="'synth' or a CSV file with a numeric column")
    p.add_argument("--out", required=True, help="output model path (MHI1)")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--window", type=int, default=8, help="window size (default 8)")
    p.add_argument("--length", type=int, default=PRETRAIN_LENGTH,
                   help="synthetic series length (default %(default)s)")
    p.add_argument("--column", default="value", help="CSV column name (default value)")
    p.add_argument("--stride", type=int, default=1, help="window stride (default 1)")
    p.add_argument("--epochs", type=int, default=200,
                   help="max training epochs (default %(default)s)")

    p = sub.add_parser("run", help="replay a dataset per a run config")
    p.add_argument("--config", required=True,
                   help="config file path or bundled preset name")
    p.add_argument("--plots", action="store_true", help="also write SVG plots")
    p.add_argument("--data", default=None, help="override dataset.path")
    p.add_argument("--out-dir", default=None,
                   help="redirect all outputs into this directory")
    p.add_argument("--seed", type=int, default=None, help="override engine.seed")

    p = sub.add_parser("report", help="summarize a run-log CSV")
    p.add_argument("--log", required=True)
    p.add_argument("--plots", action="store_true")
    p.add_argument("--plot-dir", default=None)
    return parser


def cmd_pretrain(args) -> int:
    if args.window < 1:
        print("error: --window must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.source == "synth":
        series = datamod.synth_pretrain_series(args.kind, args.length, args.seed)
    else:
        try:
            with open(args.source, "r", encoding="utf-8") as fh:
                series = datamod.load_pretrain_series(fh, args.column)
        except (OSError, HimonError) as exc:
            print(f"error: cannot read pretraining source: {exc}", file=sys.stderr)
            return EXIT_CONFIG

    try:
        train_cfg = nn.TrainConfig(seed=args.seed, max_epochs=args.epochs)
        trained, normalizer, rep = comp.pretrain(series, args.window, train_cfg,
                                                 stride=args.stride)
    except HimonError as exc:
        print(f"error: pretraining failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING

    model = comp.ComponentModel(
        spec=comp.SensorSpec(sensor_id=f"pretrained-{args.kind}",
                             model_kind=args.kind),
        dae=trained, normalizer=normalizer, window_size=args.window,
        hi_upper_bound=comp.DEFAULT_EPS_MIN, train_seed=args.seed,
        calibrated=False)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    modelio.save_model(args.out, model)
    print(f"wrote {args.out}: kind={args.kind} window={args.window} "
          f"epochs={rep.epochs_run} best_epoch={rep.best_epoch} "
          f"best_val_loss={rep.best_validation_loss:.6g}")
    return EXIT_OK


def _load_dataset(run_cfg: cfgmod.RunConfig) -> dict[str, datamod.SegmentedSeries]:
    ds = run_cfg.dataset
    sensors = [s.sensor_id for s in run_cfg.engine.sensors]
    with open(ds.path, "r", encoding="utf-8") as fh:
        if ds.format == cfgmod.FORMAT_CMAPSS:
            records = datamod.parse_cmapss(fh)
            return {sid: datamod.select_series(records, ds.unit, sid)
                    for sid in sensors}
        records = datamod.parse_ncmapss_csv(fh, ds.columns)
        series = datamod.filter_cruise(records, ds.alt_min, ds.alt_max,
                                       ds.min_segment)
        missing = [sid for sid in sensors if sid not in series]
        if missing:
            raise DataError(f"cruise filtering produced no series for {missing}")
        return {sid: series[sid] for sid in sensors}


def cmd_run(args) -> int:
    try:
        path = cfgmod.resolve_config_path(args.config)
        run_cfg = cfgmod.load_run_config(path)
    except ConfigurationError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.data is not None:
        run_cfg.dataset.path = args.data
    if args.seed is not None:
        run_cfg.engine.train.seed = args.seed
    if args.out_dir is not None:
        base = Path(args.out_dir)
        run_cfg.output.log = str(base / Path(run_cfg.output.log).name)
        run_cfg.output.events = str(base / Path(run_cfg.output.events).name)
        run_cfg.output.calibration = str(base / Path(run_cfg.output.calibration).name)
        run_cfg.output.plot_dir = str(base / "plots")
    if args.plots:
        run_cfg.output.plots = True

    try:
        model_store = {}
        for kind, mpath in run_cfg.models.items():
            model_store[kind] = modelio.load_model(
                mpath, expected_window_size=run_cfg.engine.window_size).dae
    except (OSError, ModelFormatError) as exc:
        print(f"error: cannot load pretrained model: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        dataset = _load_dataset(run_cfg)
    except OSError as exc:
        print(f"error: cannot read dataset: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigurationError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    try:
        log = enginemod.run_replay(dataset, run_cfg.engine, model_store)
    except (ConfigurationError, SetupError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA

    for out_path in (run_cfg.output.log, run_cfg.output.events,
                     run_cfg.output.calibration):
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    log.write_csv(run_cfg.output.log)
    log.write_events_csv(run_cfg.output.events)
    with open(run_cfg.output.calibration, "w", encoding="utf-8") as fh:
        json.dump(log.calibration, fh, indent=2)
        fh.write("\n")

    for alarm in log.alarms():
        print(f"ALARM t={alarm.t} triggers={';'.join(alarm.triggers)}")
    first_by_trigger: dict[str, int] = {}
    for alarm in log.alarms():
        for trig in alarm.triggers:
            first_by_trigger.setdefault(trig, alarm.t)
    if first_by_trigger:
        parts = ", ".join(f"{k}@{v}" for k, v in first_by_trigger.items())
        print(f"first alarms: {parts}")
    else:
        print("no alarms")
    print(f"run log: {run_cfg.output.log}")

    if run_cfg.output.plots:
        table = report.load_runlog(run_cfg.output.log)
        for p in report.write_plots(table, run_cfg.output.plot_dir):
            print(f"plot: {p}")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        table = report.load_runlog(args.log)
    except OSError as exc:
        print(f"error: cannot read log: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    summary = report.summarize(table)
    print(report.format_summary(summary))
    if args.plots:
        plot_dir = args.plot_dir or (Path(args.log).parent / "plots")
        for p in report.write_plots(table, plot_dir):
            print(f"plot: {p}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "pretrain":
        return cmd_pretrain(args)
    if args.command == "run":
        return cmd_run(args)
    return cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
