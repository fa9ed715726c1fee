"""Command line entry point: ``rivertraj {synth,preprocess,train,predict,evaluate}``.

Every subcommand takes an optional JSON ``--config`` file whose keys match
the long flag names (underscored); explicit flags override it. The resolved
configuration is written next to the outputs.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .errors import ConfigError, RivertrajError

logger = logging.getLogger("rivertraj")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


DEFAULTS = {
    "synth": {
        "length_km": 80.0,
        "min_radius": 300.0,
        "bend_count": 40,
        "river_seed": 0,
        "vessels": 60,
        "fleet_seed": 1,
        "gap_probability": 0.0,
        "slowdown_min": 0.3,
        "slowdown_max": 0.6,
        "speed_min": 2.5,
        "speed_max": 4.5,
        "noise_min": 0.03,
        "noise_max": 0.08,
        "start_fraction": 0.5,
        "trip_minutes": None,
    },
    "preprocess": {
        "n": 10,
        "m": 15,
        "distance_resolution": None,
        "split_seed": 0,
        "fractions": [0.8, 0.1, 0.1],
        "by_trajectory": True,
    },
    "train": {
        "architecture": "transformer",
        "context_mode": "curvature",
        "head_mode": "classification",
        "desk": False,
        "model_id": None,
        "model": {},
    },
    "predict": {"batch_size": 512, "split": "test"},
    "evaluate": {"minute": None, "baselines": True, "models": [], "matrix": [], "bin_width": 25.0},
}

# flags that map straight onto ModelConfig fields
MODEL_FLAGS = (
    ("learning_rate", float),
    ("batch_size", int),
    ("max_epochs", int),
    ("patience", int),
    ("seed", int),
    ("hidden_size", int),
    ("dropout", float),
    ("alpha", float),
    ("max_train_seconds", float),
)


def _resolve(command: str, args: argparse.Namespace) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if getattr(args, "config", None):
        with open(args.config) as f:
            loaded = json.load(f)
        if not isinstance(loaded, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        cfg.update(loaded)
    model = dict(cfg.get("model", {}))
    for key, value in vars(args).items():
        if key in ("command", "config", "func", "verbose"):
            continue
        if command == "train" and key in dict(MODEL_FLAGS):
            model[key] = value
        else:
            cfg[key] = value
    if command == "train":
        cfg["model"] = model
    return cfg


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _require(cfg: dict, *keys):
    missing = [k for k in keys if not cfg.get(k)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


# subcommands


def cmd_synth(cfg: dict) -> None:
    from .synth import FleetSpec, SyntheticRiverSpec, generate_fleet, generate_river, spec_dict, write_ais_csv

    _require(cfg, "out")
    river_spec = SyntheticRiverSpec(
        length_km=float(cfg["length_km"]),
        min_radius=float(cfg["min_radius"]),
        bend_count=int(cfg["bend_count"]),
        seed=int(cfg["river_seed"]),
    )
    fleet = FleetSpec(
        vessels=int(cfg["vessels"]),
        seed=int(cfg["fleet_seed"]),
        gap_probability=float(cfg["gap_probability"]),
        curvature_slowdown=(float(cfg["slowdown_min"]), float(cfg["slowdown_max"])),
        base_speed=(float(cfg["speed_min"]), float(cfg["speed_max"])),
        noise_scale=(float(cfg["noise_min"]), float(cfg["noise_max"])),
        start_fraction=float(cfg["start_fraction"]),
        trip_minutes=None if cfg["trip_minutes"] is None else tuple(float(v) for v in cfg["trip_minutes"]),
    )
    # everything is generated before the first file is written
    river = generate_river(river_spec)
    records = generate_fleet(river, fleet)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    river.save(out)
    write_ais_csv(out / "ais.csv", records)
    _write_json(
        out / "synth_config.json",
        {**cfg, "river_spec": spec_dict(river_spec), "fleet_spec": spec_dict(fleet), "frame": river.frame.to_dict()},
    )
    logger.info("wrote %d records of %d vessels to %s", len(records), fleet.vessels, out)


def cmd_preprocess(cfg: dict) -> None:
    from .pipeline import DiscretizationSpec, build_samples, split, write_samples
    from .river import RiverModel
    from .synth import read_ais_csv

    _require(cfg, "river", "ais", "out")
    n, m = int(cfg["n"]), int(cfg["m"])
    if n < 1 or m < 1:
        raise ConfigError("n and m must be positive")
    fractions = [float(x) for x in cfg["fractions"]]
    if cfg["distance_resolution"] is None:
        spec = DiscretizationSpec.for_horizon(m)
    else:
        spec = DiscretizationSpec(distance_resolution=float(cfg["distance_resolution"]))
    river = RiverModel.load(cfg["river"], frame=_load_frame(cfg["river"]))
    records = read_ais_csv(cfg["ais"])
    samples, stats = build_samples(records, river, n, m, spec)
    parts = split(samples, fractions, seed=int(cfg["split_seed"]), by_trajectory=bool(cfg["by_trajectory"]))
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    counts = {}
    for name in ("train", "validation", "test"):
        items = getattr(parts, name)
        write_samples(out / f"{name}.jsonl", items)
        counts[name] = len(items)
    meta = {
        "n": n,
        "m": m,
        "spec": spec.to_dict(),
        "frame": river.frame.to_dict(),
        "river": str(cfg["river"]),
        "split_seed": int(cfg["split_seed"]),
        "fractions": fractions,
        "by_trajectory": bool(cfg["by_trajectory"]),
        "counts": counts,
        "stats": stats,
    }
    _write_json(out / "dataset.json", meta)
    _write_json(out / "preprocess_config.json", cfg)
    logger.info(
        "%d samples (%d windows rejected): train %d, validation %d, test %d",
        stats["samples"], stats["rejected"], counts["train"], counts["validation"], counts["test"],
    )


def _load_frame(river_dir):
    from .geometry import ProjectionFrame

    path = Path(river_dir) / "synth_config.json"
    if path.exists():
        with open(path) as f:
            return ProjectionFrame.from_dict(json.load(f)["frame"])
    return None


def _read_dataset(data_dir) -> tuple[dict, Path]:
    d = Path(data_dir)
    with open(d / "dataset.json") as f:
        return json.load(f), d


def cmd_train(cfg: dict) -> None:
    import torch

    from .models import ModelConfig, save_checkpoint, train, write_curves
    from .pipeline import DatasetSplit, DiscretizationSpec, read_samples

    _require(cfg, "data", "out")
    meta, d = _read_dataset(cfg["data"])
    spec = DiscretizationSpec.from_dict(meta["spec"])
    base = dict(
        architecture=cfg["architecture"],
        context_mode=cfg["context_mode"],
        head_mode=cfg["head_mode"],
        n=meta["n"],
        m=meta["m"],
        distance_vocab=spec.distance_vocab,
        cog_vocab=spec.cog_vocab,
        max_distance=spec.max_distance,
    )
    unknown = set(cfg["model"]) - {f.name for f in fields(ModelConfig)}
    if unknown:
        raise ConfigError(f"unknown model options: {sorted(unknown)}")
    base.update(cfg["model"])
    config = ModelConfig.desk(**base) if cfg["desk"] else ModelConfig(**base)
    torch.set_num_threads(1)
    parts = DatasetSplit(read_samples(d / "train.jsonl"), read_samples(d / "validation.jsonl"), [])
    result = train(parts, config)
    model_id = cfg["model_id"] or f"{config.architecture}-{config.context_mode}"
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(
        out / "model.pt",
        result.model,
        spec.spec_id,
        meta["frame"].get("frame_id", ""),
        extra={"model_id": model_id, "best_epoch": result.best_epoch},
    )
    write_curves(out / "curves.csv", result.curves)
    _write_json(
        out / "train_config.json",
        {
            **cfg,
            "model_id": model_id,
            "resolved_model": config.to_dict(),
            "best_epoch": result.best_epoch,
            "best_val_loss": result.best_val_loss,
            "initial_val_loss": result.initial_val_loss,
            "stopped_early": result.stopped_early,
            "epochs_run": len(result.curves),
        },
    )
    logger.info("best epoch %d, validation loss %.4f", result.best_epoch, result.best_val_loss)


def cmd_predict(cfg: dict) -> None:
    from .geometry import ProjectionFrame
    from .models import load_checkpoint, predict_greedy
    from .pipeline import read_samples

    _require(cfg, "model", "data", "out")
    meta, d = _read_dataset(cfg["data"])
    spec = _spec(meta)
    model, _ = load_checkpoint(cfg["model"])
    samples = read_samples(d / f"{cfg['split']}.jsonl")
    pr = predict_greedy(model, samples, spec, batch_size=int(cfg["batch_size"]), keep_probabilities=False)
    frame = ProjectionFrame.from_dict(meta["frame"])
    lat, lon = frame.inverse(pr.positions[..., 0], pr.positions[..., 1])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample", "step", "distance_class", "cog_class", "x", "y", "lat", "lon"])
        for i, s in enumerate(samples):
            for k in range(pr.positions.shape[1]):
                w.writerow(
                    [
                        s.key,
                        k + 1,
                        int(pr.labels[i, k, 0]),
                        int(pr.labels[i, k, 1]),
                        f"{pr.positions[i, k, 0]:.3f}",
                        f"{pr.positions[i, k, 1]:.3f}",
                        f"{lat[i, k]:.8f}",
                        f"{lon[i, k]:.8f}",
                    ]
                )
    _write_json(out.with_suffix(".config.json"), cfg)
    logger.info("wrote %d predictions to %s", len(samples), out)


def _spec(meta):
    from .pipeline import DiscretizationSpec

    return DiscretizationSpec.from_dict(meta["spec"])


def _named_paths(items) -> list[tuple[str | None, str]]:
    out = []
    for item in items:
        name, sep, path = str(item).partition("=")
        out.append((name, path) if sep else (None, item))
    return out


def cmd_evaluate(cfg: dict) -> None:
    from .baselines import KINDS, build_speed_table, predict_baselines
    from .evaluation import (
        compare_models,
        make_report,
        sample_set_id,
        target_positions,
        write_histogram_csv,
        write_per_step_csv,
        write_stats_csv,
    )
    from .models import load_checkpoint, predict_greedy
    from .pipeline import read_samples
    from .river import RiverModel

    _require(cfg, "out")
    out = Path(cfg["out"])
    if cfg["matrix"]:
        rows = _horizon_matrix(cfg)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "horizon_matrix.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["model", "n", "m", "minute", "mean", "std", "median", "samples"])
            w.writerows(rows)
        _write_json(out / "evaluate_config.json", cfg)
        return
    _require(cfg, "data", "river")
    if not cfg["models"] and not cfg["baselines"]:
        raise ConfigError("nothing to evaluate: give --models and/or keep baselines enabled")
    meta, d = _read_dataset(cfg["data"])
    spec = _spec(meta)
    test = read_samples(d / "test.jsonl")
    if not test:
        raise ConfigError("empty test set")
    targets = target_positions(test, spec)
    set_id = sample_set_id(test)
    minute = cfg["minute"]
    model_reports = []
    for name, path in _named_paths(cfg["models"]):
        model, ckpt = load_checkpoint(path)
        if ckpt["spec_id"] != spec.spec_id:
            raise ConfigError(f"{path}: trained with {ckpt['spec_id']}, data uses {spec.spec_id}")
        name = name or ckpt["extra"].get("model_id") or Path(path).parent.name
        pr = predict_greedy(model, test, spec, keep_probabilities=False)
        model_reports.append(make_report(name, pr.positions, targets, set_id, minute))
    baseline_reports = []
    if cfg["baselines"]:
        from .geometry import ProjectionFrame

        river = RiverModel.load(cfg["river"], frame=ProjectionFrame.from_dict(meta["frame"]))
        table = build_speed_table(read_samples(d / "train.jsonl"), (river.axis.hm_min, river.axis.hm_max))
        out.mkdir(parents=True, exist_ok=True)
        table.write_csv(out / "speed_table.csv")
        for kind in KINDS:
            pos, truncated = predict_baselines(kind, test, table, river)
            if truncated:
                logger.info("%s: %d predictions truncated at the axis end", kind, truncated)
            baseline_reports.append(make_report(kind, pos, targets, set_id, minute))
    reports = model_reports + baseline_reports
    out.mkdir(parents=True, exist_ok=True)
    write_per_step_csv(out / "per_step_errors.csv", reports)
    write_stats_csv(out / "stats.csv", reports)
    write_histogram_csv(out / "histogram.csv", reports, float(cfg["bin_width"]))
    if model_reports and baseline_reports:
        cmp = compare_models(model_reports, baseline_reports)
        with open(out / "crossovers.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["model", "baseline", "first_worse_minute"])
            for (mname, bname), minute_ in cmp.crossovers.items():
                w.writerow([mname, bname, "" if minute_ is None else minute_])
    _write_json(out / "evaluate_config.json", {**cfg, "test_set": set_id, "samples": len(test)})
    for r in reports:
        logger.info("%s: mean error %.1f m at minute %d", r.model_id, r.final_stats[0], r.final_minute)


def _horizon_matrix(cfg) -> list[list]:
    """Each ``checkpoint=data_dir`` pair evaluated on its own test set at one minute."""
    from .evaluation import make_report, sample_set_id, target_positions
    from .models import load_checkpoint, predict_greedy
    from .pipeline import read_samples

    minute = cfg["minute"] or 15
    rows = []
    for path, data in _named_paths(cfg["matrix"]):
        if path is None:
            raise UsageError("--matrix entries must be CHECKPOINT=DATA_DIR")
        meta, d = _read_dataset(data)
        spec = _spec(meta)
        test = read_samples(d / "test.jsonl")
        model, ckpt = load_checkpoint(path)
        pr = predict_greedy(model, test, spec, keep_probabilities=False)
        name = ckpt["extra"].get("model_id") or Path(path).parent.name
        r = make_report(name, pr.positions, target_positions(test, spec), sample_set_id(test), minute)
        mean, std, med = r.final_stats
        rows.append([name, meta["n"], meta["m"], minute, f"{mean:.6f}", f"{std:.6f}", f"{med:.6f}", len(test)])
    return rows


# argument parsing


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = _Parser(prog="rivertraj", description="Inland vessel trajectory prediction pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, argument_default=S)
        sp.add_argument("--config", help="JSON file with option values")
        return sp

    s = add("synth", "generate a synthetic river and AIS records")
    s.add_argument("--out", help="output directory")
    s.add_argument("--length-km", type=float)
    s.add_argument("--min-radius", type=float)
    s.add_argument("--bend-count", type=int)
    s.add_argument("--river-seed", type=int)
    s.add_argument("--vessels", type=int)
    s.add_argument("--fleet-seed", type=int)
    s.add_argument("--gap-probability", type=float)
    s.add_argument("--slowdown-min", type=float)
    s.add_argument("--slowdown-max", type=float)
    s.add_argument("--speed-min", type=float, help="lowest base speed (m/s)")
    s.add_argument("--speed-max", type=float, help="highest base speed (m/s)")
    s.add_argument("--noise-min", type=float, help="lowest relative speed-noise scale")
    s.add_argument("--noise-max", type=float, help="highest relative speed-noise scale")
    s.add_argument("--start-fraction", type=float, help="share of the river (from its lower end) where passages start")
    s.add_argument("--trip-minutes", type=float, nargs=2, metavar=("MIN", "MAX"),
                   help="passage duration range; passages run to the river end if omitted")
    s.set_defaults(func=cmd_synth)

    s = add("preprocess", "interpolate, window, discretize and split AIS records")
    s.add_argument("--river", help="directory with river_axis.csv and river_radii.csv")
    s.add_argument("--ais", help="AIS CSV file")
    s.add_argument("--out", help="output directory")
    s.add_argument("--n", type=int, help="observed steps")
    s.add_argument("--m", type=int, help="predicted steps")
    s.add_argument("--distance-resolution", type=float)
    s.add_argument("--split-seed", type=int)
    s.add_argument("--fractions", type=float, nargs=3)
    s.add_argument("--by-trajectory", action=argparse.BooleanOptionalAction)
    s.set_defaults(func=cmd_preprocess)

    s = add("train", "train one model")
    s.add_argument("--data", help="preprocessed dataset directory")
    s.add_argument("--out", help="output directory")
    s.add_argument("--architecture", choices=("transformer", "lstm"))
    s.add_argument("--context-mode", choices=("curvature", "agnostic"))
    s.add_argument("--head-mode", choices=("classification", "hybrid"))
    s.add_argument("--desk", action=argparse.BooleanOptionalAction, help="width-64 two-layer configuration")
    s.add_argument("--model-id")
    for name, typ in MODEL_FLAGS:
        s.add_argument("--" + name.replace("_", "-"), type=typ)
    s.set_defaults(func=cmd_train)

    s = add("predict", "greedy predictions of one model as CSV")
    s.add_argument("--model", help="checkpoint file")
    s.add_argument("--data", help="preprocessed dataset directory")
    s.add_argument("--split", choices=("train", "validation", "test"))
    s.add_argument("--out", help="output CSV file")
    s.add_argument("--batch-size", type=int)
    s.set_defaults(func=cmd_predict)

    s = add("evaluate", "error reports of models and baselines")
    s.add_argument("--data", help="preprocessed dataset directory")
    s.add_argument("--river", help="river directory (for the baselines)")
    s.add_argument("--models", nargs="+", metavar="[NAME=]CHECKPOINT")
    s.add_argument("--baselines", action=argparse.BooleanOptionalAction)
    s.add_argument("--minute", type=int, help="minute for the summary statistics (default: m)")
    s.add_argument("--bin-width", type=float)
    s.add_argument(
        "--matrix", nargs="+", metavar="CHECKPOINT=DATA_DIR", help="horizon matrix mode, one entry per (n, m)"
    )
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _resolve(args.command, args)
        args.func(cfg)
    except UsageError as e:
        print(f"rivertraj {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (RivertrajError, OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        print(f"rivertraj {args.command}: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
