"""Command-line interface: parameter sweeps, optimization, Monte Carlo
runs, feasibility arithmetic, and regeneration of the standard figure
datasets as CSV or JSON.

Output contract: CSV is UTF-8 with a header row and 17-significant-digit
floats; JSON mirrors the columns as arrays under ``columns`` plus a
``meta`` object carrying the resolved parameters, tool version, and seed
where one applies.  Quantities conditioned on an event of probability
zero are emitted as the literal cell ``undefined`` in CSV and ``null``
in JSON.  Exit codes: 0 success, 2 usage error, 3 non-finite result.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytic import (
    conditional_fidelity,
    detector_limited_fidelity,
    fidelity_report,
    herald_single_shot,
    herald_train,
    outcome_distribution,
    unconditional_fidelity,
)
from .models import (
    ConstantPump,
    DetectorKind,
    DetectorModel,
    LossModel,
    PerBinPump,
    ProtocolConfig,
    SourceModel,
    UndefinedConditionalError,
    transmission,
)
from .montecarlo import run_simulation, simulate_parallel_sources
from .multiplex import (
    Objective,
    m_source_distribution,
    optimize_constant,
    optimize_schedule,
    parallel_unconditional_fidelity,
)

SPEED_OF_LIGHT = 299792458.0
DEFAULT_GROUP_INDEX = 1.468
DEFAULT_DETECTOR_RATE = 1e8
DEFAULT_ATTENUATION_DB_PER_KM = 0.2

# Figure datasets reproduce the standard parameter points; everything in
# this table can be overridden per _FIGURE_OVERRIDES below.
FIGURE_DEFAULTS: dict[str, dict] = {
    "fig2": {"t": (1, 50), "nbar": 1.0, "eta_d": 1.0},
    "fig3": {
        "t": (1, 50),
        "etas": (1.0, 0.99, 0.95),
        "nbar_resolved": {1.0: 1.0, 0.99: 0.90, 0.95: 0.95},
        "nbar_bucket": {1.0: 0.05, 0.99: 0.14, 0.95: 0.34},
    },
    "fig4": "same dataset as fig3",
    "fig5": {"eta_d_points": 101, "nbars": (0.01, 0.1, 0.5, 1.0, 2.0)},
    "fig6": {
        "nbar_grid": (0.02, 3.0, 150),
        "ts": (1, 2, 4, 8, 16, 32, 64),
        "etas": (1.0, 0.99, 0.95),
    },
    "fig7": {"t": 100, "nbar_grid": (0.05, 2.0, 40), "eta_grid": (0.5, 1.0, 26)},
    "fig8": {"t": (1, 8), "etas": (0.99, 0.95)},
    "fig9": {"t": 10, "nbar": 0.1, "eta": 0.95, "sources": 4, "detector": "bucket"},
    "fig10": {
        "t": 5,
        "nbar_grid": (0.05, 2.0, 40),
        "eta_grid": (0.5, 1.0, 26),
        "source_counts": (1, 4),
    },
    "fig11": {"t": (1, 50), "nbar": 0.5, "eta_d": 0.8, "eta_s": 0.8, "eta_f": 1.0},
}

_FIGURE_OVERRIDES: dict[str, set[str]] = {
    "fig2": {"t", "nbar", "eta_d"},
    "fig3": {"t", "reoptimize"},
    "fig4": {"t", "reoptimize"},
    "fig5": {"nbar"},
    "fig6": {"nbar", "t"},
    "fig7": {"nbar", "t", "eta"},
    "fig8": {"t"},
    "fig9": {"t", "nbar", "eta", "sources", "detector"},
    "fig10": {"nbar", "t"},
    "fig11": {"t", "nbar", "eta_d", "eta_s", "eta_f"},
}


class UsageError(Exception):
    """Invalid flag values or combinations; maps to exit code 2."""


@dataclass(frozen=True)
class RunSpec:
    """One resolved CLI invocation."""

    command: str
    parameters: dict
    output_format: str
    output_path: str | None


@dataclass(frozen=True)
class FeasibilityReport:
    repetition_rate: float
    bin_separation: float
    fibre_length: float
    fibre_transmission: float
    loops_assessed: int
    net_transmission: float


def assess_feasibility(
    repetition_rate: float,
    attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_PER_KM,
    loops: int = 10,
    switch_efficiency: float = 0.8,
    group_index: float = DEFAULT_GROUP_INDEX,
    detector_rate: float = DEFAULT_DETECTOR_RATE,
) -> FeasibilityReport:
    """Loop-delay and loss arithmetic for a candidate repetition rate.

    The bin separation is the pulse period or the detector's resolvable
    period, whichever is longer: a source clocked faster than the herald
    detector still needs loop round trips the detector can keep up with.
    Fibre length follows from the in-fibre light speed (c over the group
    index) and fibre transmission from the attenuation per km.
    """
    if repetition_rate <= 0.0:
        raise ValueError(f"repetition rate must be > 0, got {repetition_rate}")
    if attenuation_db_per_km < 0.0:
        raise ValueError(f"attenuation must be >= 0, got {attenuation_db_per_km}")
    if loops < 0:
        raise ValueError(f"loop count must be >= 0, got {loops}")
    if not (0.0 <= switch_efficiency <= 1.0):
        raise ValueError(f"switch efficiency must lie in [0, 1], got {switch_efficiency}")
    if group_index < 1.0:
        raise ValueError(f"group index must be >= 1, got {group_index}")
    if detector_rate <= 0.0:
        raise ValueError(f"detector rate must be > 0, got {detector_rate}")
    bin_separation = max(1.0 / repetition_rate, 1.0 / detector_rate)
    fibre_length = SPEED_OF_LIGHT / group_index * bin_separation
    fibre_transmission = 10.0 ** (-attenuation_db_per_km * (fibre_length / 1000.0) / 10.0)
    loss = LossModel(switch_efficiency, fibre_transmission)
    return FeasibilityReport(
        repetition_rate=repetition_rate,
        bin_separation=bin_separation,
        fibre_length=fibre_length,
        fibre_transmission=fibre_transmission,
        loops_assessed=loops,
        net_transmission=transmission(loss, loops),
    )


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        # Out-of-range inputs surface as non-finite cells; the scan below
        # reports them, so the intermediate warnings carry no information.
        with np.errstate(all="ignore"):
            columns, rows, meta = _COMMANDS[args.command](args)
    except (UsageError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    bad_column = _find_non_finite(columns, rows)
    if bad_column is not None:
        print(f"error: non-finite value in column '{bad_column}'", file=sys.stderr)
        return 3
    if args.format == "csv":
        text = _render_csv(columns, rows)
    else:
        text = _render_json(columns, rows, meta)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loopsource",
        description="Heralded single-photon loop source: sweeps, optimization, "
        "Monte Carlo, figure datasets, feasibility arithmetic.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    output = argparse.ArgumentParser(add_help=False)
    output.add_argument("--format", choices=("csv", "json"), default="csv")
    output.add_argument("--out", default=None, help="output file (default: stdout)")

    physics = argparse.ArgumentParser(add_help=False)
    physics.add_argument("--detector", choices=("resolved", "bucket"), default="bucket")
    physics.add_argument(
        "--nbar",
        default="1",
        help="mean photon number; a comma list is a per-bin schedule "
        "(sweep: the list of values to sweep)",
    )
    physics.add_argument("--eta", type=float, default=None, help="sets eta-d, eta-s and eta-f")
    physics.add_argument("--eta-d", type=float, default=None, help="detector efficiency")
    physics.add_argument("--eta-s", type=float, default=None, help="switch efficiency")
    physics.add_argument("--eta-f", type=float, default=None, help="fibre-loop efficiency")
    physics.add_argument("--t", default="1", help="time-bins, single value or range a..b")
    physics.add_argument(
        "--chronological",
        action="store_true",
        help="read and report per-bin schedules in firing order "
        "(default: reverse-chronological, entry 0 = final bin)",
    )

    sub.add_parser("herald", parents=[physics, output],
                   help="heralding probabilities for one configuration")
    sub.add_parser("fidelity", parents=[physics, output],
                   help="per-loop and averaged fidelities for one configuration")
    sub.add_parser("sweep", parents=[physics, output],
                   help="sweep time-bins and pump level")

    optimize = sub.add_parser("optimize", parents=[physics, output],
                              help="optimize the pump level or per-bin schedule")
    optimize.add_argument("--objective", choices=("conditional", "unconditional"),
                          default="unconditional")
    optimize.add_argument("--biased", action="store_true",
                          help="optimize a per-bin schedule instead of a constant level")
    optimize.add_argument("--nbar-min", type=float, default=1e-3)
    optimize.add_argument("--nbar-max", type=float, default=10.0)

    simulate = sub.add_parser("simulate", parents=[physics, output],
                              help="Monte Carlo run of one source")
    simulate.add_argument("--trials", type=int, default=100_000)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--histogram", action="store_true",
                          help="emit the loop histogram instead of the summary row")

    parallel = sub.add_parser("parallel", parents=[physics, output],
                              help="Monte Carlo run of parallel identical sources")
    parallel.add_argument("--trials", type=int, default=100_000)
    parallel.add_argument("--seed", type=int, default=0)
    parallel.add_argument("--sources", type=int, default=2)
    parallel.add_argument("--histogram", action="store_true")

    figure = sub.add_parser("figure", parents=[output],
                            help="regenerate a standard figure dataset")
    figure.add_argument("figure_id", choices=sorted(FIGURE_DEFAULTS))
    figure.add_argument("--detector", choices=("resolved", "bucket"), default=None)
    figure.add_argument("--nbar", default=None)
    figure.add_argument("--eta", default=None)
    figure.add_argument("--eta-d", type=float, default=None)
    figure.add_argument("--eta-s", type=float, default=None)
    figure.add_argument("--eta-f", type=float, default=None)
    figure.add_argument("--t", default=None)
    figure.add_argument("--sources", type=int, default=None)
    figure.add_argument("--reoptimize", action="store_true",
                        help="fig3/fig4: recompute the per-curve pump optima")

    feasibility = sub.add_parser("feasibility", parents=[output],
                                 help="repetition rate to fibre length and loss")
    feasibility.add_argument("--rate", type=float, required=True, help="repetition rate in Hz")
    feasibility.add_argument("--attenuation", type=float,
                             default=DEFAULT_ATTENUATION_DB_PER_KM, help="fibre loss in dB/km")
    feasibility.add_argument("--loops", type=int, default=10)
    feasibility.add_argument("--eta-s", type=float, default=0.8)
    feasibility.add_argument("--group-index", type=float, default=DEFAULT_GROUP_INDEX)
    feasibility.add_argument("--detector-rate", type=float, default=DEFAULT_DETECTOR_RATE,
                             help="highest herald rate the detector resolves, in Hz")
    return parser


def run_spec_from_args(args: argparse.Namespace) -> RunSpec:
    parameters = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in ("command", "format", "out")
    }
    return RunSpec(
        command=args.command,
        parameters=parameters,
        output_format=args.format,
        output_path=args.out,
    )


# ---------------------------------------------------------------------------
# flag parsing helpers


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError as err:
        raise UsageError(f"{flag} expects a number or comma list, got {text!r}") from err
    if not values:
        raise UsageError(f"{flag} expects at least one value, got {text!r}")
    return values


def _parse_t_values(text: str) -> list[int]:
    try:
        if ".." in text:
            start_text, stop_text = text.split("..", 1)
            start, stop = int(start_text), int(stop_text)
            if start > stop:
                raise ValueError
            values = list(range(start, stop + 1))
        else:
            values = [int(text)]
    except ValueError as err:
        raise UsageError(f"--t expects an integer or range a..b, got {text!r}") from err
    if values[0] < 1:
        raise UsageError(f"--t values must be >= 1, got {text!r}")
    return values


def _single_t(args: argparse.Namespace) -> int:
    values = _parse_t_values(args.t)
    if len(values) != 1:
        raise UsageError(f"--t must be a single value for '{args.command}', got {args.t!r}")
    return values[0]


def _efficiency(value: float | None, fallback: float | None, flag: str) -> float:
    resolved = value if value is not None else (fallback if fallback is not None else 1.0)
    if not (0.0 <= resolved <= 1.0):
        raise UsageError(f"{flag} must lie in [0, 1], got {resolved}")
    return resolved


def _models_from_args(args: argparse.Namespace) -> tuple[DetectorModel, LossModel]:
    eta_d = _efficiency(args.eta_d, args.eta, "--eta-d")
    eta_s = _efficiency(args.eta_s, args.eta, "--eta-s")
    eta_f = _efficiency(args.eta_f, args.eta, "--eta-f")
    kind = DetectorKind.NUMBER_RESOLVED if args.detector == "resolved" else DetectorKind.BUCKET
    return DetectorModel(kind, eta_d), LossModel(eta_s, eta_f)


def _pump_from_args(args: argparse.Namespace, time_bins: int):
    values = _parse_float_list(args.nbar, "--nbar")
    if len(values) == 1:
        return ConstantPump(values[0])
    if len(values) != time_bins:
        raise UsageError(
            f"--nbar lists {len(values)} bins but --t is {time_bins}"
        )
    if args.chronological:
        values = values[::-1]
    return PerBinPump(tuple(values))


def _config_from_args(args: argparse.Namespace, time_bins: int) -> ProtocolConfig:
    detector, loss = _models_from_args(args)
    return ProtocolConfig(time_bins, _pump_from_args(args, time_bins), detector, loss)


def _base_meta(args: argparse.Namespace) -> dict:
    spec = run_spec_from_args(args)
    return {
        "command": spec.command,
        "version": __version__,
        "parameters": spec.parameters,
    }


# ---------------------------------------------------------------------------
# commands


def _cmd_herald(args: argparse.Namespace):
    t = _single_t(args)
    config = _config_from_args(args, t)
    nbars = config.bin_means()
    train = outcome_distribution(config).herald_probability
    source_rows = []
    for loop in range(t):
        source = SourceModel(float(nbars[loop]))
        source_rows.append(
            [loop, float(nbars[loop]), herald_single_shot(source, config.detector), train]
        )
    if args.chronological:
        source_rows.reverse()
    return ["loops_before_output", "nbar", "single_shot", "train"], source_rows, _base_meta(args)


def _cmd_fidelity(args: argparse.Namespace):
    t = _single_t(args)
    config = _config_from_args(args, t)
    nbars = config.bin_means()
    try:
        report = fidelity_report(config)
        conditional: float | None = report.conditional
        per_loop: tuple[float | None, ...] = report.per_loop
        unconditional = report.unconditional
    except UndefinedConditionalError:
        conditional = None
        per_loop = tuple(None for _ in range(t))
        unconditional = unconditional_fidelity(config)
    rows = []
    for loop in range(t):
        rows.append(
            [
                loop,
                float(nbars[loop]),
                transmission(config.loss, loop),
                per_loop[loop],
                conditional,
                unconditional,
            ]
        )
    columns = ["loops_before_output", "nbar", "transmission", "loop_fidelity",
               "conditional", "unconditional"]
    return columns, rows, _base_meta(args)


def _cmd_sweep(args: argparse.Namespace):
    t_values = _parse_t_values(args.t)
    nbar_values = _parse_float_list(args.nbar, "--nbar")
    detector, loss = _models_from_args(args)
    rows = []
    for t in t_values:
        for nbar in nbar_values:
            source = SourceModel(nbar)
            config = ProtocolConfig(t, ConstantPump(nbar), detector, loss)
            try:
                cond: float | None = conditional_fidelity(config)
            except UndefinedConditionalError:
                cond = None
            rows.append(
                [
                    t,
                    nbar,
                    herald_single_shot(source, detector),
                    herald_train(source, detector, t),
                    cond,
                    unconditional_fidelity(config),
                ]
            )
    columns = ["time_bins", "nbar", "single_shot", "train", "conditional", "unconditional"]
    return columns, rows, _base_meta(args)


def _cmd_optimize(args: argparse.Namespace):
    t = _single_t(args)
    detector, loss = _models_from_args(args)
    config = ProtocolConfig(t, ConstantPump(1.0), detector, loss)
    objective = Objective(args.objective)
    bounds = (args.nbar_min, args.nbar_max)
    columns = ["objective", "time_bins", "bin", "loops_before_output", "nbar",
               "value", "evaluations"]
    if not args.biased:
        result = optimize_constant(config, objective, bounds)
        rows = [[args.objective, t, "constant", "all",
                 result.schedule.mean_photon_number, result.objective_value,
                 result.evaluations]]
        return columns, rows, _base_meta(args)
    result = optimize_schedule(config, objective, bounds)
    schedule = result.schedule.mean_photon_numbers
    order = list(range(t))
    if args.chronological:
        order.reverse()
    rows = []
    for position, loop in enumerate(order):
        rows.append(
            [args.objective, t, position, loop, schedule[loop],
             result.objective_value, result.evaluations]
        )
    return columns, rows, _base_meta(args)


def _summary_dataset(summary, t: int, histogram: bool, extra_columns, extra_values):
    if histogram:
        columns = extra_columns + ["loop", "count", "frequency"]
        rows = []
        for loop in range(t + 1):
            # loop == t is the no-herald row
            rows.append(
                extra_values
                + [loop, summary.loop_counts[loop], summary.loop_histogram.probabilities[loop]]
            )
        return columns, rows
    columns = extra_columns + [
        "trials", "seed", "herald_rate", "herald_rate_se",
        "conditional_fidelity", "conditional_fidelity_se",
        "unconditional_fidelity", "unconditional_fidelity_se",
    ]
    conditional = summary.conditional_fidelity
    rows = [
        extra_values
        + [
            summary.trials,
            summary.seed,
            summary.herald_rate.value,
            summary.herald_rate.standard_error,
            conditional.value if conditional is not None else None,
            conditional.standard_error if conditional is not None else None,
            summary.unconditional_fidelity.value,
            summary.unconditional_fidelity.standard_error,
        ]
    ]
    return columns, rows


def _check_trials_seed(args: argparse.Namespace) -> None:
    if args.trials < 1:
        raise UsageError(f"--trials must be >= 1, got {args.trials}")
    if not (0 <= args.seed < 2**64):
        raise UsageError(f"--seed must fit in 64 unsigned bits, got {args.seed}")


def _cmd_simulate(args: argparse.Namespace):
    t = _single_t(args)
    _check_trials_seed(args)
    config = _config_from_args(args, t)
    summary = run_simulation(config, args.trials, args.seed)
    columns, rows = _summary_dataset(summary, t, args.histogram, [], [])
    meta = _base_meta(args)
    meta["seed"] = args.seed
    return columns, rows, meta


def _cmd_parallel(args: argparse.Namespace):
    t = _single_t(args)
    _check_trials_seed(args)
    if args.sources < 1:
        raise UsageError(f"--sources must be >= 1, got {args.sources}")
    config = _config_from_args(args, t)
    summary = simulate_parallel_sources([config] * args.sources, args.trials, args.seed)
    columns, rows = _summary_dataset(
        summary, t, args.histogram, ["sources"], [args.sources]
    )
    meta = _base_meta(args)
    meta["seed"] = args.seed
    return columns, rows, meta


def _cmd_feasibility(args: argparse.Namespace):
    report = assess_feasibility(
        repetition_rate=args.rate,
        attenuation_db_per_km=args.attenuation,
        loops=args.loops,
        switch_efficiency=args.eta_s,
        group_index=args.group_index,
        detector_rate=args.detector_rate,
    )
    columns = ["repetition_rate", "bin_separation", "fibre_length",
               "fibre_transmission", "loops", "net_transmission"]
    rows = [[report.repetition_rate, report.bin_separation, report.fibre_length,
             report.fibre_transmission, report.loops_assessed, report.net_transmission]]
    return columns, rows, _base_meta(args)


def _cmd_figure(args: argparse.Namespace):
    figure_id = args.figure_id
    allowed = _FIGURE_OVERRIDES[figure_id]
    provided = {
        flag
        for flag in ("detector", "nbar", "eta", "eta_d", "eta_s", "eta_f", "t", "sources")
        if getattr(args, flag) is not None
    }
    if args.reoptimize:
        provided.add("reoptimize")
    unknown = provided - allowed
    if unknown:
        flags = ", ".join("--" + flag.replace("_", "-") for flag in sorted(unknown))
        raise UsageError(f"{figure_id} does not accept override {flags}")
    columns, rows = _FIGURES[figure_id](args)
    meta = _base_meta(args)
    meta["figure"] = figure_id
    return columns, rows, meta


# ---------------------------------------------------------------------------
# figure dataset builders


def _config_for(kind: DetectorKind, nbar: float, eta_d: float, eta_s: float,
                eta_f: float, t: int) -> ProtocolConfig:
    return ProtocolConfig(
        t, ConstantPump(nbar), DetectorModel(kind, eta_d), LossModel(eta_s, eta_f)
    )


def _override_scalar(text: str | None, default: float, flag: str) -> float:
    if text is None:
        return default
    values = _parse_float_list(text, flag)
    if len(values) != 1:
        raise UsageError(f"{flag} must be a single value here, got {text!r}")
    return values[0]


def _override_list(text: str | None, default, flag: str) -> list[float]:
    if text is None:
        return list(default)
    return _parse_float_list(text, flag)


def _override_t_range(text: str | None, default: tuple[int, int]) -> list[int]:
    if text is None:
        return list(range(default[0], default[1] + 1))
    return _parse_t_values(text)


def _fig2(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig2"]
    ts = _override_t_range(args.t, defaults["t"])
    nbar = _override_scalar(args.nbar, defaults["nbar"], "--nbar")
    eta_d = defaults["eta_d"] if args.eta_d is None else args.eta_d
    source = SourceModel(nbar)
    rows = []
    for t in ts:
        rows.append([
            t,
            herald_train(source, DetectorModel(DetectorKind.NUMBER_RESOLVED, eta_d), t),
            herald_train(source, DetectorModel(DetectorKind.BUCKET, eta_d), t),
        ])
    return ["time_bins", "herald_resolved", "herald_bucket"], rows


def _fig3(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig3"]
    ts = _override_t_range(args.t, defaults["t"])
    etas = defaults["etas"]
    t_max = ts[-1]
    columns = ["time_bins"]
    series = []
    for kind, caption in (
        (DetectorKind.NUMBER_RESOLVED, defaults["nbar_resolved"]),
        (DetectorKind.BUCKET, defaults["nbar_bucket"]),
    ):
        for eta in etas:
            nbar = caption[eta]
            if args.reoptimize:
                template = _config_for(kind, 1.0, eta, eta, eta, t_max)
                nbar = optimize_constant(template, Objective.CONDITIONAL).schedule.mean_photon_number
            label = f"{kind.value}_eta{eta:g}"
            columns.extend([f"fidelity_{label}", f"herald_{label}"])
            series.append((kind, eta, nbar))
    rows = []
    for t in ts:
        row: list = [t]
        for kind, eta, nbar in series:
            config = _config_for(kind, nbar, eta, eta, eta, t)
            row.append(conditional_fidelity(config))
            row.append(herald_train(SourceModel(nbar), DetectorModel(kind, eta), t))
        rows.append(row)
    return columns, rows


def _fig5(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig5"]
    nbars = _override_list(args.nbar, defaults["nbars"], "--nbar")
    eta_grid = np.linspace(0.0, 1.0, defaults["eta_d_points"])
    rows = []
    for eta_d in eta_grid:
        for nbar in nbars:
            source = SourceModel(nbar)
            rows.append([
                float(eta_d),
                nbar,
                detector_limited_fidelity(
                    source, DetectorModel(DetectorKind.NUMBER_RESOLVED, float(eta_d))
                ),
                detector_limited_fidelity(
                    source, DetectorModel(DetectorKind.BUCKET, float(eta_d))
                ),
            ])
    return ["eta_d", "nbar", "fidelity_resolved", "fidelity_bucket"], rows


def _fig6(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig6"]
    lo, hi, points = defaults["nbar_grid"]
    nbars = _override_list(args.nbar, np.linspace(lo, hi, points), "--nbar")
    ts = _parse_t_values(args.t) if args.t is not None else list(defaults["ts"])
    etas = defaults["etas"]
    columns = ["nbar"]
    for kind in (DetectorKind.NUMBER_RESOLVED, DetectorKind.BUCKET):
        for eta in etas:
            for t in ts:
                columns.append(f"unconditional_{kind.value}_eta{eta:g}_t{t}")
    rows = []
    for nbar in nbars:
        row = [float(nbar)]
        for kind in (DetectorKind.NUMBER_RESOLVED, DetectorKind.BUCKET):
            for eta in etas:
                for t in ts:
                    config = _config_for(kind, float(nbar), eta, eta, eta, t)
                    row.append(unconditional_fidelity(config))
        rows.append(row)
    return columns, rows


def _fig7(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig7"]
    t = int(_override_scalar(args.t, defaults["t"], "--t"))
    lo, hi, points = defaults["nbar_grid"]
    nbars = _override_list(args.nbar, np.linspace(lo, hi, points), "--nbar")
    lo, hi, points = defaults["eta_grid"]
    etas = _override_list(args.eta, np.linspace(lo, hi, points), "--eta")
    rows = []
    for nbar in nbars:
        for eta in etas:
            resolved = _config_for(DetectorKind.NUMBER_RESOLVED, float(nbar), float(eta),
                                   float(eta), float(eta), t)
            bucket = _config_for(DetectorKind.BUCKET, float(nbar), float(eta),
                                 float(eta), float(eta), t)
            rows.append([
                float(nbar), float(eta),
                unconditional_fidelity(resolved),
                unconditional_fidelity(bucket),
            ])
    return ["nbar", "eta", "unconditional_resolved", "unconditional_bucket"], rows


def _fig8(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig8"]
    ts = _override_t_range(args.t, defaults["t"])
    etas = defaults["etas"]
    columns = ["time_bins"]
    for eta in etas:
        columns.extend([f"constant_eta{eta:g}", f"biased_eta{eta:g}"])
    rows = []
    for t in ts:
        row: list = [t]
        for eta in etas:
            template = _config_for(DetectorKind.BUCKET, 1.0, eta, eta, eta, t)
            row.append(optimize_constant(template, Objective.UNCONDITIONAL).objective_value)
            row.append(optimize_schedule(template, Objective.UNCONDITIONAL).objective_value)
        rows.append(row)
    return columns, rows


def _fig9(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig9"]
    t = int(_override_scalar(args.t, defaults["t"], "--t"))
    nbar = _override_scalar(args.nbar, defaults["nbar"], "--nbar")
    eta = _override_scalar(args.eta, defaults["eta"], "--eta")
    max_sources = defaults["sources"] if args.sources is None else args.sources
    if max_sources < 1:
        raise UsageError(f"--sources must be >= 1, got {max_sources}")
    detector_name = defaults["detector"] if args.detector is None else args.detector
    kind = DetectorKind.NUMBER_RESOLVED if detector_name == "resolved" else DetectorKind.BUCKET
    single = herald_single_shot(SourceModel(nbar), DetectorModel(kind, eta))
    dists = [m_source_distribution(single, t, m) for m in range(1, max_sources + 1)]
    columns = ["loop"] + [f"p_m{m}" for m in range(1, max_sources + 1)]
    rows = []
    for u in range(t + 1):
        # u == t is the no-herald row
        rows.append([u] + [dist.probabilities[u] for dist in dists])
    return columns, rows


def _fig10(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig10"]
    t = int(_override_scalar(args.t, defaults["t"], "--t"))
    lo, hi, points = defaults["nbar_grid"]
    nbars = _override_list(args.nbar, np.linspace(lo, hi, points), "--nbar")
    lo, hi, points = defaults["eta_grid"]
    etas = list(np.linspace(lo, hi, points))
    source_counts = defaults["source_counts"]
    columns = ["nbar", "eta"]
    for kind in (DetectorKind.NUMBER_RESOLVED, DetectorKind.BUCKET):
        for m in source_counts:
            columns.append(f"unconditional_{kind.value}_m{m}")
    rows = []
    for nbar in nbars:
        for eta in etas:
            row = [float(nbar), float(eta)]
            for kind in (DetectorKind.NUMBER_RESOLVED, DetectorKind.BUCKET):
                config = _config_for(kind, float(nbar), float(eta), float(eta), float(eta), t)
                per_loop = fidelity_report(config).per_loop
                single = herald_single_shot(SourceModel(float(nbar)),
                                            DetectorModel(kind, float(eta)))
                for m in source_counts:
                    dist = m_source_distribution(single, t, m)
                    row.append(parallel_unconditional_fidelity(dist, per_loop))
            rows.append(row)
    return columns, rows


def _fig11(args: argparse.Namespace):
    defaults = FIGURE_DEFAULTS["fig11"]
    ts = _override_t_range(args.t, defaults["t"])
    nbar = _override_scalar(args.nbar, defaults["nbar"], "--nbar")
    eta_d = defaults["eta_d"] if args.eta_d is None else args.eta_d
    eta_s = defaults["eta_s"] if args.eta_s is None else args.eta_s
    eta_f = defaults["eta_f"] if args.eta_f is None else args.eta_f
    source = SourceModel(nbar)
    rows = []
    for t in ts:
        row: list = [t]
        for kind in (DetectorKind.NUMBER_RESOLVED, DetectorKind.BUCKET):
            config = _config_for(kind, nbar, eta_d, eta_s, eta_f, t)
            row.append(herald_train(source, DetectorModel(kind, eta_d), t))
            row.append(conditional_fidelity(config))
        rows.append(row)
    columns = ["time_bins", "herald_resolved", "fidelity_resolved",
               "herald_bucket", "fidelity_bucket"]
    return columns, rows


_FIGURES = {
    "fig2": _fig2,
    "fig3": _fig3,
    "fig4": _fig3,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig8,
    "fig9": _fig9,
    "fig10": _fig10,
    "fig11": _fig11,
}

_COMMANDS = {
    "herald": _cmd_herald,
    "fidelity": _cmd_fidelity,
    "sweep": _cmd_sweep,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "parallel": _cmd_parallel,
    "figure": _cmd_figure,
    "feasibility": _cmd_feasibility,
}


# ---------------------------------------------------------------------------
# rendering


def _format_cell(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _render_csv(columns: list[str], rows: list[list]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format_cell(cell) for cell in row])
    return buffer.getvalue()


def _json_cell(value):
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(value)


def _render_json(columns: list[str], rows: list[list], meta: dict) -> str:
    data = {column: [] for column in columns}
    for row in rows:
        for column, cell in zip(columns, row):
            data[column].append(_json_cell(cell))
    return json.dumps({"meta": meta, "columns": data}, indent=2) + "\n"


def _find_non_finite(columns: list[str], rows: list[list]) -> str | None:
    for row in rows:
        for column, cell in zip(columns, row):
            if isinstance(cell, (float, np.floating)) and not math.isfinite(float(cell)):
                return column
    return None


if __name__ == "__main__":
    sys.exit(main())
