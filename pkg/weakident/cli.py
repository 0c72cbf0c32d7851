import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from tabulate import tabulate

from weakident.assembly import assemble, centers_from_counts
from weakident.config import RunConfig, apply_assignment
from weakident.constants import exit_codes, sweep_columns
from weakident.exceptions import (
    ConfigError,
    DatasetFormatError,
    InvalidGrid,
    UnknownSystem,
    UnsupportedDimension,
    WeakIdentError,
)
from weakident.metrics import (
    NoiseSpec,
    add_noise,
    error_report,
    forward_simulate,
)
from weakident.models import (
    Coefficients,
    ObservationSet,
    ResultEncoder,
    build_dictionary,
    stack_coefficients,
)
from weakident.regression import weak_ident
from weakident.suite.models import get_system
from weakident.suite.storage import load_dataset, save_dataset
from weakident.suite.utils import run_case, simulate
from weakident.test_functions import AxisTestFunction, TestFunction
from weakident.utils import format_json

logger = logging.getLogger(__name__)
logger.setLevel(logging.INFO)


def _write_json(path: Path, payload: dict) -> None:
    text = format_json(payload, default=ResultEncoder().default)
    path.write_text(text + "\n", encoding="utf-8")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError("sigma", f"invalid list {text!r}") from None


def _read_config(path: Optional[str]) -> RunConfig:
    return RunConfig.from_file(path) if path else RunConfig()


def cmd_generate(args) -> int:
    definition = get_system(args.system)
    if args.seed is not None:
        logger.info("Benchmark initial conditions are deterministic")
    data = simulate(definition)
    header = save_dataset(data, Path(args.out), name=definition.name)
    print(header)
    return exit_codes["ok"]


def cmd_identify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset(args.data)
    config = _read_config(args.config)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.sigma:
        data = add_noise(data, NoiseSpec(args.sigma, args.seed or 0))

    started = time.perf_counter()
    result = weak_ident(data, config, system_name=args.system)
    wall_time = time.perf_counter() - started

    _write_json(out / "result.json", result.to_dict())
    result.diagnostics_frame().to_csv(out / "diagnostics.csv", index=False)
    _write_json(out / "timing.json", {"wall_time": wall_time})

    rows = [
        [v.name, equation, v.cv_error, v.sparsity]
        for v, equation in zip(result.variables, result.equations())
    ]
    print(
        tabulate(
            rows,
            headers=["variable", "equation", "cv_error", "sparsity"],
            tablefmt="grid",
        )
    )
    logger.info(f"Identification finished in {wall_time:.2f} s")
    return exit_codes["ok"]


def _result_test_function(payload: dict, data: ObservationSet) -> TestFunction:
    grid = data.grid
    spec = payload["test_function"]
    time_axis = AxisTestFunction(spec["t"]["m"], spec["t"]["p"], grid.dt)
    space = tuple(
        AxisTestFunction(spec[name]["m"], spec[name]["p"], grid.dx[a])
        for a, name in enumerate(("x", "y")[: grid.spatial_dims])
    )
    return TestFunction(time_axis, space)


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = load_dataset(args.data)
    definition = get_system(args.system)
    payload = json.loads(Path(args.result).read_text(encoding="utf-8"))

    config = RunConfig.from_dict(payload["config"])
    dictionary = build_dictionary(
        data.num_vars,
        data.spatial_dims,
        config.alpha_cap,
        config.beta_cap,
        config.dictionary_rule,
    )
    found = []
    for name in data.names:
        terms = payload["variables"][name]["coefficients"]
        values = [0.0] * len(dictionary)
        for label, value in terms.items():
            values[dictionary.index_of_label(label, data.names)] = value
        found.append(Coefficients(values))

    tf = _result_test_function(payload, data)
    centers = centers_from_counts(data, tf, payload["subsample_counts"])
    system = assemble(data, dictionary, tf, centers)
    dynamics = None
    if definition.kind == "ode":
        clean = simulate(definition)
        forward = forward_simulate(dictionary, found, clean)
        dynamics = (forward, np.column_stack(clean.values))
    report = error_report(
        stack_coefficients(definition.true_coefficients(dictionary)),
        stack_coefficients(found),
        system.w,
        system.b,
        dynamics,
    )
    _write_json(out / "evaluation.json", report.to_dict())
    print(tabulate([report.to_dict()], headers="keys", tablefmt="grid"))
    return exit_codes["ok"]


def _sweep_row(task) -> dict:
    system, clean, sigma, seed, config, vary_key, vary_value = task
    row = {
        "system": system,
        "sigma": sigma,
        "seed": seed,
        "vary_key": vary_key or "",
        "vary_value": vary_value if vary_value is not None else "",
        "error": "",
    }
    try:
        report = run_case(get_system(system), clean, sigma, seed, config)
        row.update(report.to_dict())
    except (WeakIdentError, ArithmeticError, ValueError) as e:
        logger.warning(f"{system} sigma={sigma} seed={seed} failed: {e}")
        row["error"] = f"{type(e).__name__}: {e}"
    return row


def cmd_sweep(args) -> int:
    definition = get_system(args.system)
    config = _read_config(args.config)
    sigmas = _float_list(args.sigma)

    variants = [(None, None, config)]
    if args.vary:
        key, _, values = args.vary.partition("=")
        key = key.strip()
        variants = [
            (key, value.strip(), apply_assignment(config, key, value))
            for value in values.split(",")
            if value.strip()
        ]

    tasks = []
    if sigmas:
        clean = simulate(definition)
        tasks = [
            (definition.name, clean, sigma, seed, variant, key, value)
            for key, value, variant in variants
            for sigma in sigmas
            for seed in range(args.trials)
        ]
    if args.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as executor:
            rows = list(executor.map(_sweep_row, tasks))
    else:
        rows = [_sweep_row(task) for task in tasks]

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame.from_records(rows, columns=sweep_columns)
    frame.to_csv(out, index=False)
    logger.info(f"Wrote {len(frame)} sweep rows to {out}")
    return exit_codes["ok"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weakident",
        description="Identify differential equations from noisy data",
    )
    parser.add_argument("--verbose", action="store_true")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="simulate a benchmark")
    generate.add_argument("system")
    generate.add_argument("--out", required=True)
    generate.add_argument("--seed", type=int)
    generate.set_defaults(handler=cmd_generate)

    identify = commands.add_parser("identify", help="identify equations")
    identify.add_argument("--data", required=True)
    identify.add_argument("--config")
    identify.add_argument("--seed", type=int)
    identify.add_argument("--out", required=True)
    identify.add_argument("--sigma", type=float, default=0.0)
    identify.add_argument(
        "--system", help="benchmark name for default overrides"
    )
    identify.set_defaults(handler=cmd_identify)

    evaluate = commands.add_parser("evaluate", help="score a result")
    evaluate.add_argument("--data", required=True)
    evaluate.add_argument("--system", required=True)
    evaluate.add_argument("--result", required=True)
    evaluate.add_argument("--out", required=True)
    evaluate.set_defaults(handler=cmd_evaluate)

    sweep = commands.add_parser("sweep", help="run seeded noise sweeps")
    sweep.add_argument("system")
    sweep.add_argument("--sigma", required=True)
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--config")
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--vary", help="KEY=v1,v2,... config values to repeat")
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def _error_kind(error: BaseException) -> str:
    if isinstance(error, DatasetFormatError):
        return "format"
    if isinstance(error, ConfigError):
        return "config"
    if isinstance(error, UnknownSystem):
        return "unknown_system"
    if isinstance(error, (InvalidGrid, UnsupportedDimension)):
        return "grid"
    if isinstance(error, OSError):
        return "io"
    return "numerical"


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        return args.handler(args)
    except (WeakIdentError, ArithmeticError, ValueError, OSError) as e:
        kind = _error_kind(e)
        record = {"error": kind, "message": str(e)}
        logger.error(f"{args.command} failed: {e}")
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        out = Path(args.out)
        if args.command in ("identify", "evaluate") and out.is_dir():
            _write_json(out / "error.json", record)
        return exit_codes["numerical" if kind == "numerical" else "input"]


if __name__ == "__main__":
    sys.exit(main())
