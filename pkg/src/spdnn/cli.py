"""Command-line pipeline: generate | preprocess | run | fit | report.

Exit codes: 0 success, 2 config error, 3 data/shape error, 4 insufficient
data, 5 correctness failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio, engine, perfmodel, radixnet
from .sparse_core import DenseBatch, ShapeError, SparseMatrix, densify

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INSUFFICIENT = 4
EXIT_INCORRECT = 5


class ConfigError(Exception):
    pass


@dataclasses.dataclass
class RunConfig:
    radices: tuple
    layers: int
    kron_width: int = 1
    weight_value: float = 0.0625
    bias_value: float = -0.30
    inputs: str = "synthetic:100:0.3"
    workers: int = 1
    representation: str = "dense"
    repetitions: int = 1
    output_dir: str = "."
    seed: int = 0
    neurons: int | None = None  # optional cross-check against radices * kron

    def network_spec(self):
        try:
            spec = radixnet.NetworkSpec(self.radices, self.layers, self.kron_width,
                                        self.weight_value, self.bias_value)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.neurons is not None and self.neurons != spec.width:
            raise ConfigError(f"neurons={self.neurons} but radices/kron_width "
                              f"give width {spec.width}")
        if self.representation not in ("dense", "sparse"):
            raise ConfigError(f"representation must be dense or sparse, "
                              f"got {self.representation!r}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        return spec


def _parse_radices(text):
    try:
        radices = tuple(int(t) for t in str(text).replace(" ", "").split(",") if t)
    except ValueError:
        raise ConfigError(f"bad radices list {text!r}") from None
    if not radices:
        raise ConfigError("radices list is empty")
    return radices


def _read_config_file(path):
    cfg = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _resolve(args, key, conv, default):
    """Flag value if given, else config-file value, else default."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    cfg = getattr(args, "_cfg", {})
    if key in cfg:
        try:
            return conv(cfg[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key}: {exc}") from None
    if default is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return default


def _run_config_from_args(args):
    return RunConfig(
        radices=_parse_radices(_resolve(args, "radices", str, None)),
        layers=_resolve(args, "layers", int, None),
        kron_width=_resolve(args, "kron_width", int, 1),
        weight_value=_resolve(args, "weight", float, 0.0625),
        bias_value=_resolve(args, "bias", float, -0.30),
        inputs=_resolve(args, "inputs", str, "synthetic:100:0.3"),
        workers=_resolve(args, "workers", int, 1),
        representation=_resolve(args, "representation", str, "dense"),
        repetitions=_resolve(args, "repetitions", int, 1),
        output_dir=_resolve(args, "out", str, None),
        seed=_resolve(args, "seed", int, 0),
        neurons=getattr(args, "neurons", None),
    )


def _synthetic_batch(text, width, seed):
    parts = text.split(":")
    if len(parts) != 3 or parts[0] != "synthetic":
        raise ConfigError(f"bad synthetic input spec {text!r} "
                          "(expected synthetic:<count>:<density>)")
    try:
        count, density = int(parts[1]), float(parts[2])
    except ValueError:
        raise ConfigError(f"bad synthetic input spec {text!r}") from None
    if count < 1 or not 0 < density <= 1:
        raise ConfigError(f"bad synthetic count/density in {text!r}")
    rng = np.random.default_rng(seed)
    data = (rng.random((count, width)) < density).astype(np.float64)
    return DenseBatch(data)


def _load_inputs(config, width):
    if config.inputs.startswith("synthetic:"):
        batch = _synthetic_batch(config.inputs, width, config.seed)
        source = config.inputs
    else:
        m = dataio.read_input_tsv(config.inputs, width)
        batch = densify(m)
        source = str(config.inputs)
    return batch, source


def cmd_generate(args):
    config = _run_config_from_args(args)
    spec = config.network_spec()
    net = radixnet.generate_network(spec)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for i, w in enumerate(net.layers, start=1):
        name = f"n{spec.width}-l{i}.tsv"
        dataio.write_layer_tsv(w, out_dir / name)
        files.append(name)
    manifest = {
        "neurons": spec.width,
        "layers": spec.n_layers,
        "n_connections": net.n_connections,
        "radices": list(spec.radices),
        "kron_width": spec.kron_width,
        "weight_value": spec.weight_value,
        "bias_value": spec.bias_value,
        "files": files,
    }
    with open(out_dir / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    print(f"generated N={spec.width} L={spec.n_layers} "
          f"connections={net.n_connections} -> {out_dir}")
    return EXIT_OK


def cmd_preprocess(args):
    images = dataio.read_idx_images(args.images)
    index_sets = [dataio.preprocess_image(img, args.side, args.threshold)
                  for img in images.pixels]
    dataio.write_input_tsv(index_sets, args.out)
    total = sum(len(s) for s in index_sets)
    print(f"preprocessed {images.n_images} images to {args.side}x{args.side}, "
          f"{total} on-pixels -> {args.out}")
    return EXIT_OK


def cmd_run(args):
    config = _run_config_from_args(args)
    spec = config.network_spec()
    net = radixnet.generate_network(spec)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    batch, source = _load_inputs(config, spec.width)
    y0 = SparseMatrix.from_dense(batch.data) if config.representation == "sparse" else batch

    truth = engine.extract_categories(engine.oracle_infer(y0, net))
    dataio.write_categories(truth, out_dir / "truth-categories.tsv")

    runs = []
    for _ in range(config.repetitions):
        runs.append(engine.infer(y0, net, workers=config.workers))
    dataio.write_categories(runs[0].categories, out_dir / "categories.tsv")

    label = f"N{spec.width}-L{spec.n_layers}"
    all_correct = True
    with open(out_dir / "results.jsonl", "a") as f:
        for run in runs:
            correct = engine.verify(run.categories, truth)
            all_correct = all_correct and correct
            result = engine.challenge_result(run.categories, run.t_seconds,
                                             batch.n_rows, net.n_connections, correct)
            record = engine.result_record(result, spec.width, spec.n_layers,
                                          config.workers, config.representation,
                                          label=label)
            record["input_source"] = source
            f.write(json.dumps(record) + "\n")

    best = min(run.t_seconds for run in runs)
    n_ops = batch.n_rows * net.n_connections
    print(f"{label}: inputs={batch.n_rows} connections={net.n_connections} "
          f"n_ops={n_ops} t_dnn={best:.6f}s rate={n_ops / best:.3e} ops/s "
          f"correct={all_correct} (min of {config.repetitions})")
    return EXIT_OK if all_correct else EXIT_INCORRECT


def cmd_fit(args):
    records = perfmodel.read_results_jsonl(args.results)
    try:
        fit = perfmodel.fit_power_law(records)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    print(f"n1={fit.n1:.6e} beta={fit.beta:.6f} r2={fit.r_squared:.6f} "
          f"points={fit.n_points}")
    if args.out:
        with open(args.out, "w") as f:
            json.dump(dataclasses.asdict(fit), f, indent=2)
            f.write("\n")
    return EXIT_OK


def cmd_report(args):
    records = perfmodel.read_results_jsonl(args.results)
    try:
        fit = perfmodel.fit_power_law(records)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    paths = perfmodel.emit_report(fit, records, perfmodel.reference_table(), args.out)
    print(f"report written: {', '.join(str(p) for p in paths.values())}")
    return EXIT_OK


def _add_network_options(p):
    p.add_argument("--radices", help="comma-separated radices, e.g. 2,2,2")
    p.add_argument("--layers", type=int, help="number of layers")
    p.add_argument("--kron-width", dest="kron_width", type=int)
    p.add_argument("--weight", type=float, help="uniform nonzero weight value")
    p.add_argument("--bias", type=float, help="uniform per-layer bias value")
    p.add_argument("--neurons", type=int,
                   help="expected width, cross-checked against radices * kron-width")
    p.add_argument("--config", help="key=value config file (flags take precedence)")


def build_parser():
    parser = argparse.ArgumentParser(prog="spdnn",
                                     description="Sparse DNN inference benchmark")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write layer TSVs and a manifest")
    _add_network_options(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("preprocess", help="MNIST IDX to challenge input TSV")
    p.add_argument("--images", required=True, help="IDX image file")
    p.add_argument("--side", type=int, default=32, help="target side length")
    p.add_argument("--threshold", type=int, default=dataio.DEFAULT_THRESHOLD)
    p.add_argument("--out", required=True, help="output TSV path")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("run", help="timed challenge run")
    _add_network_options(p)
    p.add_argument("--inputs", help="input TSV path or synthetic:<count>:<density>")
    p.add_argument("--workers", type=int)
    p.add_argument("--representation", choices=("dense", "sparse"))
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fit", help="fit the power-law time model")
    p.add_argument("--results", required=True, help="results.jsonl path")
    p.add_argument("--out", help="optional JSON output path for the fit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("report", help="fit plus CSV/plot-data/figure report")
    p.add_argument("--results", required=True, help="results.jsonl path")
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            args._cfg = _read_config_file(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (dataio.FormatError, ShapeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
