"""Command-line interface.

Every subcommand reads optional defaults from an INI file (``--config``,
section ``[general]`` plus a section named after the subcommand), lets
flags override them, writes its outputs into the output directory and
finishes with a manifest describing the run.

Exit codes: 0 success, 1 unexpected failure, 2 usage or configuration
error, 3 strategy not applicable, 4 dataset error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import BenchmarkConfig, DatasetSpec, run_benchmark
from .data import (
    CATEGORICAL,
    ColumnMeta,
    Dataset,
    DatasetError,
    ScalingRecord,
    load_csv,
    minmax_scale,
    one_hot,
)
from .datasets import GENERATORS, generate_synthetic
from .ensemble import MODES, ensemble_predict
from .evaluation import bin_errors, compute_mir
from .learner import LOSS_IDS, MLPRegressor
from .relevance import RELEVANCE_FUNCTIONS, RelevanceNotApplicableError, make_relevance
from .resampling import RESAMPLERS, make_resampler
from .strategies import DEFAULT_RELEVANCE, ApplicabilityError

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_APPLICABILITY, EXIT_DATASET = 0, 1, 2, 3, 4
OUTPUT_ENV = "IMBREG_OUTPUT_DIR"
_LOSS_METHOD = {"dense": "dense_loss", "prob": "prob_loss", "bmc": "bmc"}


class ConfigError(ValueError):
    """Invalid configuration file or parameter."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _csv_list(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _bool(text):
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {text!r}")


def _literal(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _add_data_args(p, target_required=True):
    p.add_argument("--input", required=True, help="CSV file with a header row")
    p.add_argument("--target", required=target_required, help="target column")
    p.add_argument("--categorical", type=_csv_list, default=[], help="comma-separated column names")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="imbreg", description="Imbalanced regression toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="INI file with defaults")
        p.add_argument("--output-dir", help=f"defaults to ${OUTPUT_ENV} or the working directory")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = command("generate", "write a synthetic dataset")
    p.add_argument("--generator", required=True, choices=sorted(GENERATORS))
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.0, help="feature noise as a fraction of std")
    p.add_argument("--out", help="file name, default <generator>.csv")

    p = command("relevance", "per-row relevance values")
    _add_data_args(p)
    p.add_argument("--relevance", required=True, choices=sorted(RELEVANCE_FUNCTIONS))
    p.add_argument("--out", default="relevance.csv")

    p = command("resample", "resample a dataset")
    _add_data_args(p)
    p.add_argument("--method", required=True, choices=sorted(RESAMPLERS))
    p.add_argument("--relevance", choices=sorted(RELEVANCE_FUNCTIONS))
    p.add_argument("--undersample", type=_bool, default=False)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", default="resampled.csv")

    p = command("train", "train an MLP")
    _add_data_args(p)
    p.add_argument("--loss", choices=LOSS_IDS, default="mse")
    p.add_argument("--relevance", choices=sorted(RELEVANCE_FUNCTIONS))
    p.add_argument("--hidden-layers", type=int, default=2)
    p.add_argument("--hidden-units", type=int, default=128)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--bmc-sigma", type=float, default=0.1)
    p.add_argument("--out", default="model.json")

    p = command("evaluate", "per-bin errors of a trained model")
    _add_data_args(p, target_required=False)
    p.add_argument("--model", required=True)
    p.add_argument("--reference", help="training CSV; its targets rank the bins")
    p.add_argument("--out", default="evaluation.json")

    p = command("benchmark", "repeated comparison of strategies")
    p.add_argument("--generators", type=_csv_list, default=[])
    p.add_argument("--csv", type=_csv_list, default=[], help="CSV files, needs --target")
    p.add_argument("--target")
    p.add_argument("--categorical", type=_csv_list, default=[])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--strategies", type=_csv_list, default=[],
                   help="method[:relevance][+under], comma-separated")
    p.add_argument("--repetitions", type=int, default=50)
    p.add_argument("--model-type", choices=("mlp", "knn"), default="mlp")
    p.add_argument("--hidden-layers", type=int, default=2)
    p.add_argument("--hidden-units", type=int, default=128)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--split-candidates", type=int, default=100)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ensemble", type=_bool, default=True)

    p = command("ensemble", "combine two trained models")
    _add_data_args(p, target_required=False)
    p.add_argument("--imbalanced", required=True, help="model trained with mitigation")
    p.add_argument("--baseline", required=True, help="model trained without mitigation")
    p.add_argument("--mode", choices=MODES, default="mean")
    p.add_argument("--relevance", choices=sorted(RELEVANCE_FUNCTIONS))
    p.add_argument("--reference", help="training CSV the relevance function is fitted on")
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", default="predictions.csv")
    return parser


def _subparser(parser, command):
    """Parser of ``command``; the name-to-parser map when ``command`` is None."""
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices if command is None else action.choices[command]
    raise KeyError(command)


def _apply_config(parser, argv):
    """Parse ``argv`` with INI values (if any) installed as defaults."""
    argv = list(sys.argv[1:] if argv is None else argv)
    # required flags may come from the file, so locate it before the full parse
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv[1:])
    if not known.config or not argv or argv[0] not in _subparser(parser, None):
        return parser.parse_args(argv)
    command = argv[0]
    path = Path(known.config)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    ini = configparser.ConfigParser()
    try:
        ini.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"unreadable config file: {exc}") from None
    unknown = [s for s in ini.sections() if s not in ("general", command)]
    if unknown:
        raise ConfigError(f"unknown config sections {unknown}")
    sub = _subparser(parser, command)
    dests = {a.dest: a for a in sub._actions}
    defaults = {}
    for section in ("general", command):
        if not ini.has_section(section):
            continue
        for key, value in ini.items(section):
            dest = key.replace("-", "_")
            if dest not in dests or dest in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r} in [{section}]")
            action = dests[dest]
            if isinstance(action, argparse._AppendAction):
                defaults[dest] = [v for v in value.splitlines() if v.strip()]
            else:
                defaults[dest] = value
            action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def config_to_ini(args) -> str:
    """Effective settings of a run in the INI form ``--config`` accepts."""
    ini = configparser.ConfigParser()
    ini[args.command] = {}
    for key, value in sorted(vars(args).items()):
        if key in ("command", "config") or value is None:
            continue
        if isinstance(value, list):
            text = "\n".join(value) if key == "param" else ",".join(map(str, value))
        else:
            text = str(value)
        ini[args.command][key.replace("_", "-")] = text
    lines = []
    for section in ini.sections():
        lines.append(f"[{section}]")
        for k, v in ini[section].items():
            v = v.replace("\n", "\n\t")
            lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


# --- file helpers -------------------------------------------------------------

def _output_dir(args) -> Path:
    out = Path(args.output_dir or os.environ.get(OUTPUT_ENV) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1, allow_nan=False) + "\n",
                    encoding="utf-8")


def _load_dataset(args):
    d, dropped = load_csv(args.input, args.target, args.categorical)
    return d, dropped


def _read_features(path, columns) -> Dataset:
    """Rows of ``path`` restricted to the model's feature columns; target optional."""
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        rows = [r for r in reader if r]
    missing = [c.name for c in columns if c.name not in header]
    if missing:
        raise DatasetError(f"{path} lacks feature columns {missing}")
    idx = [header.index(c.name) for c in columns]
    cells = []
    for lineno, row in enumerate(rows, start=2):
        out = []
        for j, col in zip(idx, columns):
            text = row[j].strip()
            if col.kind == CATEGORICAL:
                out.append(text)
                continue
            try:
                out.append(float(text))
            except ValueError:
                raise DatasetError(
                    f"line {lineno}, column {col.name!r}: {text!r} is not a number"
                ) from None
        cells.append(out)
    if not cells:
        raise DatasetError(f"{path} has no rows")
    all_numeric = all(c.kind != CATEGORICAL for c in columns)
    X = np.array(cells, dtype=float if all_numeric else object)
    return Dataset(np.zeros(len(cells)), X, columns)


class ModelArtifact:
    """A trained network together with the preprocessing it was trained under."""

    def __init__(self, model: MLPRegressor, scaling: ScalingRecord, columns, target: str,
                 categories: dict, relevance=None, loss="mse"):
        self.model = model
        self.scaling = scaling
        self.columns = tuple(columns)
        self.target = target
        self.categories = categories
        self.relevance = relevance
        self.loss = loss

    def predict(self, features: Dataset) -> np.ndarray:
        scaled = self.scaling.transform(features)
        X, _ = one_hot(scaled, self.categories)
        return self.scaling.inverse_transform_target(self.model.predict(X))

    def to_dict(self) -> dict:
        return {
            "kind": "imbreg-model",
            "version": __version__,
            "model": self.model.to_dict(),
            "scaling": json.loads(self.scaling.to_json()),
            "columns": [[c.name, c.kind] for c in self.columns],
            "target": self.target,
            "categories": self.categories,
            "relevance": self.relevance,
            "loss": self.loss,
        }

    @classmethod
    def load(cls, path) -> "ModelArtifact":
        path = Path(path)
        if not path.is_file():
            raise DatasetError(f"no such model file: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
            if raw.get("kind") != "imbreg-model":
                raise ValueError("not a model artifact")
            return cls(
                MLPRegressor.from_dict(raw["model"]),
                ScalingRecord.from_json(json.dumps(raw["scaling"])),
                [ColumnMeta(n, k) for n, k in raw["columns"]],
                raw["target"],
                raw["categories"],
                raw.get("relevance"),
                raw.get("loss", "mse"),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"{path} is not a valid model file: {exc}") from None


# --- commands -----------------------------------------------------------------

def cmd_generate(args, out: Path) -> dict:
    d = generate_synthetic(args.generator, args.n, args.noise, args.seed)
    name = args.out or f"{args.generator}.csv"
    d.to_csv(out / name)
    return {"data": name}


def cmd_relevance(args, out: Path) -> dict:
    d, dropped = _load_dataset(args)
    fn = make_relevance(args.relevance).fit(d.y)
    vec = fn.relevance_
    with (out / args.out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", d.target_name, "relevance"])
        for i, (t, r) in enumerate(zip(d.y, vec.values)):
            w.writerow([i, repr(float(t)), repr(float(r))])
    info = {"scale": vec.scale, "function_id": vec.function_id, "rows_dropped": dropped}
    return {"relevance": args.out}, info


def _resample_params(args) -> dict:
    cls = RESAMPLERS[args.method]
    allowed = set(cls().get_params()) - {"relevance", "random_state", "undersample"}
    params = {}
    for item in args.param:
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in allowed:
            raise ConfigError(
                f"bad --param {item!r} for {args.method}; allowed keys: {sorted(allowed)}"
            )
        params[key] = _literal(value)
    if args.undersample:
        if "undersample" not in cls().get_params():
            raise ApplicabilityError(f"{args.method} has no under-sampling variant")
        params["undersample"] = True
    return params


def cmd_resample(args, out: Path):
    d, dropped = _load_dataset(args)
    params = _resample_params(args)
    relevance = args.relevance or DEFAULT_RELEVANCE[args.method]
    sampler = make_resampler(args.method, relevance=relevance, random_state=args.seed, **params)
    result = sampler.fit_resample(d)
    result.to_csv(out / args.out)
    outcome = sampler.outcome_
    sidecar = Path(args.out).with_suffix(".provenance.json").name
    _write_json(out / sidecar, {
        "method": args.method,
        "relevance": relevance,
        "seed": args.seed,
        "params": {k: v for k, v in sampler.get_params().items() if k != "relevance"},
        "counts": outcome.counts(),
        "rows_dropped_on_load": dropped,
        "mir_before": compute_mir(d.y),
        "mir_after": compute_mir(result.y),
    })
    return {"data": args.out, "provenance": sidecar}


def cmd_train(args, out: Path):
    d, dropped = _load_dataset(args)
    scaled, record = minmax_scale(d)
    X, categories = one_hot(scaled)
    relevance = args.relevance
    if args.loss in ("dense", "prob"):
        relevance = relevance or DEFAULT_RELEVANCE[_LOSS_METHOD[args.loss]]
    if args.loss in _LOSS_METHOD:
        from .strategies import check_applicable

        check_applicable(_LOSS_METHOD[args.loss], relevance)
    elif relevance is not None:
        raise ApplicabilityError("plain mse training takes no relevance function")
    weights = None
    if relevance is not None:
        weights = make_relevance(relevance).fit(scaled.y).relevance_.values
    model = MLPRegressor(
        hidden_layers=args.hidden_layers, hidden_units=args.hidden_units,
        learning_rate=args.learning_rate, batch_size=args.batch_size, max_epochs=args.max_epochs,
        patience=args.patience, loss=args.loss, bmc_sigma=args.bmc_sigma, random_state=args.seed,
    ).fit(X, scaled.y, sample_weight=weights)
    artifact = ModelArtifact(model, record, d.columns, d.target_name, categories, relevance, args.loss)
    _write_json(out / args.out, artifact.to_dict())
    return {"model": args.out}, {"epochs": len(model.training_log_), "best_epoch": model.best_epoch_,
                                 "rows_dropped": dropped}


def cmd_evaluate(args, out: Path):
    artifact = ModelArtifact.load(args.model)
    target = args.target or artifact.target
    d, _ = load_csv(args.input, target, args.categorical or
                    [c.name for c in artifact.columns if c.kind == CATEGORICAL])
    features = _read_features(args.input, artifact.columns)
    pred = artifact.predict(features)
    edges, reference = None, None
    if args.reference:
        ref, _ = load_csv(args.reference, target, [c.name for c in artifact.columns
                                                   if c.kind == CATEGORICAL])
        reference = ref.y
        lo, hi = min(ref.y.min(), d.y.min()), max(ref.y.max(), d.y.max())
        edges = np.linspace(lo, hi, 6)
    report = bin_errors(d.y, pred, edges, reference)
    _write_json(out / args.out, {"mse": float(np.mean((pred - d.y) ** 2)), "bins": report.to_dict()})
    return {"evaluation": args.out}


def cmd_benchmark(args, out: Path):
    datasets = [{"name": g, "generator": g, "n": args.n, "noise": args.noise}
                for g in args.generators]
    if args.csv and not args.target:
        raise ConfigError("--csv needs --target")
    for path in args.csv:
        datasets.append({"name": Path(path).stem, "csv": path, "target": args.target,
                         "categorical": tuple(args.categorical)})
    if not datasets:
        raise ConfigError("benchmark needs --generators or --csv")
    try:
        cfg = BenchmarkConfig(
            datasets=[DatasetSpec(**d) for d in datasets], strategies=args.strategies,
            repetitions=args.repetitions, seed=args.seed, model=args.model_type,
            mlp={"hidden_layers": args.hidden_layers, "hidden_units": args.hidden_units,
                 "max_epochs": args.max_epochs, "patience": args.patience},
            split_candidates=args.split_candidates, ensemble=args.ensemble, n_jobs=args.workers,
        )
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    report = run_benchmark(cfg)
    (out / "benchmark_report.json").write_text(report.to_json() + "\n", encoding="utf-8")
    report.write_bin_errors_csv(out / "bin_errors.csv")
    report.write_tally_csv(out / "bin_wins.csv")
    return {"report": "benchmark_report.json", "bin_errors": "bin_errors.csv",
            "bin_wins": "bin_wins.csv"}


def cmd_ensemble(args, out: Path):
    imb = ModelArtifact.load(args.imbalanced)
    norm = ModelArtifact.load(args.baseline)
    if [c.name for c in imb.columns] != [c.name for c in norm.columns]:
        raise DatasetError("the two models were trained on different feature columns")
    features = _read_features(args.input, imb.columns)
    rel_of = None
    if args.mode != "mean":
        if not (args.relevance and args.reference):
            raise ConfigError(f"mode {args.mode!r} needs --relevance and --reference")
        ref, _ = load_csv(args.reference, imb.target,
                          [c.name for c in imb.columns if c.kind == CATEGORICAL])
        rel_of = make_relevance(args.relevance).fit(ref.y)
    pred = ensemble_predict(imb.predict(features), norm.predict(features), None, args.mode,
                            rel_of, args.threshold)
    with (out / args.out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "prediction"])
        for i, p in enumerate(pred):
            w.writerow([i, repr(float(p))])
    return {"predictions": args.out}


COMMANDS = {
    "generate": cmd_generate,
    "relevance": cmd_relevance,
    "resample": cmd_resample,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
    "ensemble": cmd_ensemble,
}


def _exit_code(exc) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_USAGE
    if isinstance(exc, (ApplicabilityError, RelevanceNotApplicableError)):
        return EXIT_APPLICABILITY
    if isinstance(exc, DatasetError):
        return EXIT_DATASET
    return EXIT_FAILURE


def run(argv=None) -> int:
    """Run one command; returns the exit status."""
    started = time.perf_counter()
    args = None
    try:
        parser = build_parser()
        args = _apply_config(parser, argv)
        out = _output_dir(args)
        result = COMMANDS[args.command](args, out)
        files, info = result if isinstance(result, tuple) else (result, {})
        config_name = f"{args.command}_config.ini"
        (out / config_name).write_text(config_to_ini(args), encoding="utf-8")
        files = dict(files, config=config_name)
        _write_json(out / f"{args.command}_manifest.json", {
            "command": args.command,
            "config": {k: v for k, v in sorted(vars(args).items()) if k != "config"},
            "seed": args.seed,
            "version": __version__,
            "wall_time_seconds": time.perf_counter() - started,
            "outputs": files,
            "info": info,
        })
        return EXIT_OK
    except Exception as exc:  # noqa: BLE001 - every failure becomes an exit code
        code = _exit_code(exc)
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
                  "command": getattr(args, "command", None)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
