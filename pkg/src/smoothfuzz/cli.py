"""smoothfuzz command line: generate, train, adapt, predict, reproduce.

Exit codes: 0 success, 1 usage or invalid parameters, 2 runtime failure.
"""

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from smoothfuzz import __version__
from smoothfuzz._logging import configure_logging
from smoothfuzz._tracing import setup_tracing
from smoothfuzz.adapt import run_online
from smoothfuzz.config import AdaptConfig, GlobalConfig, TrainConfig, load_global_config, resolve_output_dir
from smoothfuzz.exceptions import ConfigError, PlantParameterError, SmoothFuzzError
from smoothfuzz.model import load_model, predict_batch, save_model
from smoothfuzz.norms import COMPOSITION_NAMES, CompositionKind
from smoothfuzz.plants.cstr import (
    NOMINAL_QC,
    CstrParams,
    cstr_simulate,
    training_qc_profile,
    validation_qc_profile,
)
from smoothfuzz.plants.datasets import (
    CSTR_LAGS,
    CSTR_OFFSET,
    MACKEY_GLASS_LAGS,
    MACKEY_GLASS_OFFSET,
    build_regression_dataset,
    read_dataset_csv,
    write_dataset_csv,
    write_frame_csv,
    write_series_csv,
)
from smoothfuzz.plants.mackey_glass import MackeyGlassParams, mackey_glass
from smoothfuzz.plants.scenarios import Noise, Nominal, ParamChange, QcStepProfile, Tc0Sinusoid
from smoothfuzz.train import identify

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

# Canned experiment per ``reproduce`` argument.
_EXAMPLES = {"mackey-glass": "mackey_glass", "cstr": "cstr"}


class UsageError(SmoothFuzzError):
    """Invalid flag values detected after argument parsing."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _composition(name: str) -> str:
    try:
        return CompositionKind.parse(name).name
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed '{text}'")
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be >= 0, got {value}")
    return value


def _overrides(args: argparse.Namespace, names: Sequence[str]) -> dict[str, Any]:
    return {name: getattr(args, name) for name in names if getattr(args, name, None) is not None}


def _validated(model_cls: type[BaseModel], data: dict[str, Any]) -> Any:
    try:
        return model_cls(**data)
    except ValidationError as e:
        raise UsageError(f"Invalid {model_cls.__name__}: {e}")


def _write_manifest(directory: Path, command: str, payload: dict[str, Any]) -> Path:
    path = directory / f"{command}_manifest.json"
    document = {"command": command, "smoothfuzz": __version__, **payload}
    path.write_text(json.dumps(document, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _train_config(args: argparse.Namespace, config: GlobalConfig) -> TrainConfig:
    data = config.train.model_dump() | _overrides(
        args,
        ["alpha_c", "alpha_delta", "alpha_d", "epsilon", "horizon", "max_epochs", "restarts", "seed"],
    )
    return _validated(TrainConfig, data)


def _adapt_config(args: argparse.Namespace, config: GlobalConfig) -> AdaptConfig:
    data = config.adapt.model_dump() | _overrides(
        args, ["alpha_c", "alpha_delta", "alpha_d", "epsilon", "horizon", "rms_window"]
    )
    return _validated(AdaptConfig, data)


def _add_step_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--alpha-c", type=float, help="Step length for centers")
    parser.add_argument("--alpha-delta", type=float, help="Step length for spreads")
    parser.add_argument("--alpha-d", type=float, help="Step length for consequents")
    parser.add_argument("--epsilon", type=float, help="Update threshold on |e| (normalized)")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_generate(args: argparse.Namespace, config: GlobalConfig) -> int:
    out = resolve_output_dir(args.output_dir, config)
    out.mkdir(parents=True, exist_ok=True)
    if args.plant == "mackey-glass":
        params = _validated(
            MackeyGlassParams,
            _overrides(args, ["a", "b", "C", "tau", "x0", "dt", "duration", "sample_interval"]),
        )
        if args.scenario == "param-change":
            scenario = ParamChange(switch_time=args.switch_time, overrides={"b": args.new_b})
        elif args.scenario == "noise":
            scenario = Noise(amplitude=args.noise_amplitude, seed=args.seed)
        else:
            scenario = Nominal()
        series = mackey_glass(params, scenario)
        frame = series.to_frame()
        metadata = {"plant": "mackey_glass", "params": params.model_dump(), "scenario": scenario.model_dump()}
        stem, lags, offset, target = "mackey_glass", MACKEY_GLASS_LAGS, MACKEY_GLASS_OFFSET, "x"
    else:
        params = _validated(CstrParams, {})
        if args.qc_profile in ("training", "paper"):
            profile = training_qc_profile(args.dwell_samples, args.sample_period)
        elif args.qc_profile == "validation":
            profile = validation_qc_profile(args.dwell_samples, args.sample_period)
        else:
            profile = QcStepProfile.constant(args.qc)
        disturbance = None
        if args.disturbance != "none":
            disturbance = Tc0Sinusoid(amplitude=args.disturbance_amplitude, target=args.disturbance)
        duration = args.duration
        if duration is None:
            duration = len(profile.levels) * args.dwell_samples * args.sample_period
        series = cstr_simulate(
            params, profile, disturbance, dt=args.dt, duration=duration, sample_period=args.sample_period
        )
        frame = series.to_frame()
        metadata = {
            "plant": "cstr",
            "params": params.model_dump(),
            "qc_profile": profile.model_dump(),
            "disturbance": disturbance.model_dump() if disturbance else None,
            "dt": args.dt,
            "duration": duration,
            "sample_period": args.sample_period,
        }
        stem, lags, offset, target = "cstr", CSTR_LAGS, CSTR_OFFSET, "ca"

    path = write_series_csv(frame, out / f"{stem}.csv", metadata)
    print(path)
    if args.dataset:
        dataset = build_regression_dataset(frame, lags, target=target, offset=offset, metadata=metadata)
        print(write_dataset_csv(dataset, out / f"{stem}_dataset.csv"))
    _write_manifest(out, "generate", {**metadata, "series": path.name, "dataset": args.dataset})
    return EXIT_OK


def cmd_train(args: argparse.Namespace, config: GlobalConfig) -> int:
    train_config = _train_config(args, config)
    dataset = read_dataset_csv(args.dataset, args.target)
    composition = CompositionKind.parse(args.composition, beta=args.beta)
    model, report = identify(dataset, dataset.arity, args.mfs_per_input, composition, train_config)

    out = resolve_output_dir(args.output_dir, config)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / args.model_name
    model_path.write_bytes(save_model(model))
    convergence = report.to_csv(out / "convergence.csv")
    _write_manifest(
        out,
        "train",
        {
            "dataset": str(args.dataset),
            "composition": str(composition),
            "mfs_per_input": args.mfs_per_input,
            "train": train_config.model_dump(),
            "report": report.model_dump(exclude={"restarts"}),
        },
    )
    print(model_path)
    print(convergence)
    print(f"final_rms={report.final_rms:.6g} epochs={report.epochs_used} termination={report.termination}")
    return EXIT_OK


def cmd_adapt(args: argparse.Namespace, config: GlobalConfig) -> int:
    adapt_config = _adapt_config(args, config)
    model = load_model(Path(args.model).read_bytes())
    stream = read_dataset_csv(args.stream, args.target)
    adapted, trace = run_online(model, stream.samples(), adapt_config)

    out = resolve_output_dir(args.output_dir, config)
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / args.model_name
    model_path.write_bytes(save_model(adapted))
    trace_path = trace.to_csv(out / "trace.csv")
    _write_manifest(
        out,
        "adapt",
        {"model": str(args.model), "stream": str(args.stream), "adapt": adapt_config.model_dump()},
    )
    print(model_path)
    print(trace_path)
    print(f"steps={len(trace)} updates={trace.update_count} trailing_rms={trace.final_rms():.6g}")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace, config: GlobalConfig) -> int:
    model = load_model(Path(args.model).read_bytes())
    dataset = read_dataset_csv(args.dataset, args.target)
    y_hat = predict_batch(model, dataset.inputs)
    frame = pd.DataFrame({"y_hat": y_hat, "y": dataset.targets, "e": y_hat - dataset.targets})
    out = resolve_output_dir(args.output_dir, config)
    path = write_frame_csv(frame, out / args.output_name)
    rms = float(np.sqrt(np.mean(frame["e"].to_numpy() ** 2)))
    _write_manifest(
        out,
        "predict",
        {"model": str(args.model), "dataset": str(args.dataset), "target": dataset.target_name, "rms": rms},
    )
    print(path)
    print(f"rms={rms:.6g}")
    return EXIT_OK


def cmd_reproduce(args: argparse.Namespace, config: GlobalConfig) -> int:
    from smoothfuzz.bench import build_experiment_spec, run_experiment
    from smoothfuzz.config import load_experiment_data

    data = load_experiment_data(_EXAMPLES[args.example])
    if args.seed is not None:
        data["seed"] = args.seed
    train = dict(data.get("train", {}))
    train.update(_overrides(args, ["max_epochs", "restarts"]))
    data["train"] = train
    try:
        spec = build_experiment_spec(data)
    except ConfigError as e:
        raise UsageError(str(e))

    out = resolve_output_dir(args.output_dir, config)
    result = run_experiment(spec, out)
    print(result.table.to_frame().to_string(index=False))
    print(f"artifacts: {out}")
    if result.table.total_failure:
        print("error: every composition failed", file=sys.stderr)
        return EXIT_RUNTIME
    for row in result.table.rows:
        for cell, message in row.failures.items():
            print(f"warning: {row.composition}/{cell}: {message}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="smoothfuzz", description="Smooth-composition fuzzy model identification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, help="TOML config merged over the packaged defaults")
    parser.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    generate = commands.add_parser("generate", help="Simulate a plant and write its series")
    plants = generate.add_subparsers(dest="plant", required=True, parser_class=_Parser)

    mg = plants.add_parser("mackey-glass", help="Mackey-Glass delay equation")
    mg.add_argument("--a", type=float)
    mg.add_argument("--b", type=float)
    mg.add_argument("--C", type=float)
    mg.add_argument("--tau", type=float)
    mg.add_argument("--x0", type=float)
    mg.add_argument("--dt", type=float)
    mg.add_argument("--duration", type=float)
    mg.add_argument("--sample-interval", type=float)
    mg.add_argument("--scenario", choices=["nominal", "param-change", "noise"], default="nominal")
    mg.add_argument("--switch-time", type=float, default=0.0, help="When b changes (param-change)")
    mg.add_argument("--new-b", type=float, default=0.15)
    mg.add_argument("--noise-amplitude", type=float, default=0.05)
    mg.add_argument("--seed", type=_seed, default=0)

    cstr = plants.add_parser("cstr", help="Continuous stirred tank reactor")
    cstr.add_argument(
        "--qc-profile",
        choices=["training", "paper", "validation", "constant"],
        default="training",
        help="Excitation profile; paper is an alias of training",
    )
    cstr.add_argument("--qc", type=float, default=NOMINAL_QC, help="Flow for --qc-profile constant")
    cstr.add_argument("--dwell-samples", type=int, default=100)
    cstr.add_argument("--dt", type=float, default=0.01)
    cstr.add_argument("--sample-period", type=float, default=0.1)
    cstr.add_argument("--duration", type=float, help="Minutes (default: whole profile)")
    cstr.add_argument("--disturbance", choices=["none", "tc0", "t0"], default="none")
    cstr.add_argument("--disturbance-amplitude", type=float, default=5.0)

    for plant in (mg, cstr):
        plant.add_argument("--dataset", action="store_true", help="Also write the lag-embedded dataset")
        plant.add_argument("-o", "--output-dir")
        plant.set_defaults(handler=cmd_generate)

    train = commands.add_parser("train", help="Identify a model from a dataset CSV")
    train.add_argument("dataset", type=Path)
    train.add_argument("--composition", type=_composition, default="prodsum", help=", ".join(COMPOSITION_NAMES))
    train.add_argument("--beta", type=float, default=2.0)
    train.add_argument("--mfs-per-input", type=int, default=2)
    train.add_argument("--target", help="Target column (default: last)")
    _add_step_flags(train)
    train.add_argument("--horizon", type=int)
    train.add_argument("--max-epochs", type=int)
    train.add_argument("--restarts", type=int)
    train.add_argument("--seed", type=_seed)
    train.add_argument("--model-name", default="model.json")
    train.add_argument("-o", "--output-dir")
    train.set_defaults(handler=cmd_train)

    adapt = commands.add_parser("adapt", help="Self-learn a model over a stream CSV")
    adapt.add_argument("model", type=Path)
    adapt.add_argument("stream", type=Path)
    adapt.add_argument("--target")
    _add_step_flags(adapt)
    adapt.add_argument("--horizon", type=int)
    adapt.add_argument("--rms-window", type=int)
    adapt.add_argument("--model-name", default="adapted_model.json")
    adapt.add_argument("-o", "--output-dir")
    adapt.set_defaults(handler=cmd_adapt)

    predict = commands.add_parser("predict", help="Predict a dataset CSV with a model file")
    predict.add_argument("model", type=Path)
    predict.add_argument("dataset", type=Path)
    predict.add_argument("--target")
    predict.add_argument("--output-name", default="predictions.csv")
    predict.add_argument("-o", "--output-dir")
    predict.set_defaults(handler=cmd_predict)

    reproduce = commands.add_parser("reproduce", help="Run a canned experiment end to end")
    reproduce.add_argument("example", choices=sorted(_EXAMPLES))
    reproduce.add_argument("--seed", type=_seed)
    reproduce.add_argument("--max-epochs", type=int)
    reproduce.add_argument("--restarts", type=int)
    reproduce.add_argument("-o", "--output-dir")
    reproduce.set_defaults(handler=cmd_reproduce)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_global_config(args.config)
        configure_logging(args.log_level or config.logging.level)
        setup_tracing(
            config.tracing.exporter,
            config.tracing.endpoint,
            config.tracing.service_name,
            config.tracing.sample_rate,
        )
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    try:
        return args.handler(args, config)
    except (UsageError, ConfigError, PlantParameterError, ValidationError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SmoothFuzzError, OSError) as e:
        logger.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
