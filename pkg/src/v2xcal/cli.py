"""Command-line front end: simulate, calibrate, pdr, heatmap, synth.

Every command reads an optional key=value configuration file, layers preset
and flag overrides on top, writes its artifacts into --out, and echoes the
fully resolved configuration next to them so any run can be reproduced from
its own output directory. Identical inputs and flags produce identical
output bytes.

Exit codes: 0 success, 1 for errors in the content of an input file,
2 for usage and startup errors (bad flags, unreadable files, bad
configuration keys, incompatible bin geometry).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .calibration import GENE_NAMES, Genome, PRESET_GENOMES, evolve, history_to_csv, result_summary
from .config import (
    RunConfig,
    apply_preset,
    parse_config,
    parse_gene_value,
    planted_params_text,
    render_config,
)
from .dataio import (
    SyntheticSpec,
    TraceParseError,
    export_log_csv,
    export_pdr_csv,
    export_heatmap_csv,
    export_trace_csv,
    generate_synthetic,
    parse_log_csv,
    parse_pdr_csv,
    parse_trace_csv,
    project_enu,
)
from .simulator import Direction, heatmap, pdr_curve, run_scenario

log = logging.getLogger(__name__)

#: --direction choices mapped to the record filter they apply.
DIRECTION_CHOICES = {
    "both": None,
    "bsm": Direction.VEHICLE_TO_RSU,
    "spat": Direction.RSU_TO_VEHICLE,
}


class UsageError(Exception):
    """Bad flags, unreadable inputs, or inconsistent startup state: exit 2."""


class DataError(Exception):
    """Malformed content inside an otherwise readable input: exit 1."""


def _read_text(path: str) -> str:
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _load_config(args) -> RunConfig:
    config = RunConfig()
    if getattr(args, "config", None):
        try:
            config = parse_config(_read_text(args.config))
        except ValueError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    return config


def _apply_preset_flag(config: RunConfig, args) -> RunConfig:
    if getattr(args, "preset", None):
        try:
            config = apply_preset(config, args.preset)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return config


def _apply_grid_flags(config: RunConfig, args) -> RunConfig:
    scenario_kw = {}
    if getattr(args, "bin_width", None) is not None:
        if args.bin_width <= 0.0:
            raise UsageError("--bin-width must be positive")
        scenario_kw["bin_width_m"] = args.bin_width
    if getattr(args, "cell", None) is not None:
        if args.cell <= 0.0:
            raise UsageError("--cell must be positive")
        scenario_kw["heatmap_cell_m"] = args.cell
    if scenario_kw:
        config = replace(config, scenario=replace(config.scenario, **scenario_kw))
    return config


def _freeze_from_flags(config: RunConfig, tokens) -> tuple:
    base = Genome.from_params(config.radio, config.fading)
    entries = []
    for token in tokens:
        name, sep, raw = token.partition("=")
        name = name.strip()
        if name not in GENE_NAMES:
            raise UsageError(
                f"--freeze: unknown gene {name!r} (expected one of: {', '.join(GENE_NAMES)})"
            )
        if sep:
            try:
                value = parse_gene_value(name, raw.strip())
            except ValueError as exc:
                raise UsageError(f"--freeze {token}: {exc}") from None
        else:
            value = getattr(base, name)
        entries.append((name, value))
    return tuple(entries)


def _out_dir(args) -> str:
    out = args.out
    os.makedirs(out, exist_ok=True)
    return out


def _parse_enu_trace(args, config: RunConfig, path: str):
    try:
        trace = parse_trace_csv(_read_text(path), epoch_ms=getattr(args, "epoch_ms", False))
    except TraceParseError as exc:
        raise DataError(f"{path}: {exc}") from None
    log.info("parsed %d trace records from %s", len(trace), path)
    try:
        return project_enu(trace, config.rsu)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None


def cmd_simulate(args) -> int:
    config = _apply_grid_flags(_apply_preset_flag(_load_config(args), args), args)
    if args.seed is not None:
        config = replace(config, scenario=replace(config.scenario, master_seed=args.seed))

    enu = _parse_enu_trace(args, config, args.trace)
    delivery_log = run_scenario(enu, config.scenario, config.radio, config.fading)
    direction = DIRECTION_CHOICES[args.direction]
    curve = pdr_curve(delivery_log, config.scenario.bin_width_m, direction)
    grid = heatmap(delivery_log, config.scenario.heatmap_cell_m, direction)

    out = _out_dir(args)
    paths = {
        "log": os.path.join(out, "log.csv"),
        "pdr": os.path.join(out, "pdr.csv"),
        "heatmap": os.path.join(out, "heatmap.csv"),
        "config": os.path.join(out, "resolved_config.txt"),
    }
    _write_text(paths["log"], export_log_csv(delivery_log))
    _write_text(paths["pdr"], export_pdr_csv(curve))
    _write_text(paths["heatmap"], export_heatmap_csv(grid))
    _write_text(paths["config"], render_config(config))

    sent = len(delivery_log)
    delivered = delivery_log.delivered_count()
    overall = 100.0 * delivered / sent if sent else 0.0
    print(f"packets sent {sent}, delivered {delivered}, overall pdr {overall:.4f}%")
    for name in ("log", "pdr", "heatmap", "config"):
        print(f"wrote {paths[name]}")
    return 0


def cmd_calibrate(args) -> int:
    config = _apply_grid_flags(_apply_preset_flag(_load_config(args), args), args)
    ga_kw = {}
    if args.seed is not None:
        ga_kw["master_seed"] = args.seed
    if args.generations is not None:
        if args.generations < 1:
            raise UsageError("--generations must be >= 1")
        ga_kw["generations"] = args.generations
    if args.population is not None:
        if args.population < 2:
            raise UsageError("--population must be >= 2")
        ga_kw["population_size"] = args.population
    if args.jobs is not None:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        ga_kw["jobs"] = args.jobs
    if args.freeze:
        ga_kw["frozen_genes"] = _freeze_from_flags(config, args.freeze)
    if ga_kw:
        try:
            config = replace(config, ga=replace(config.ga, **ga_kw))
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    observed_text = _read_text(args.observed_pdr)
    enu = _parse_enu_trace(args, config, args.trace)
    try:
        observed = parse_pdr_csv(observed_text)
    except ValueError as exc:
        raise DataError(f"{args.observed_pdr}: {exc}") from None
    if abs(observed.bin_width_m - config.scenario.bin_width_m) > 1e-9:
        raise UsageError(
            f"observed curve uses {observed.bin_width_m} m bins but the scenario "
            f"is configured for {config.scenario.bin_width_m} m bins"
        )

    log.info(
        "calibrating: population %d, generations %d, seed %d",
        config.ga.population_size,
        config.ga.generations,
        config.ga.master_seed,
    )
    result = evolve(config.ga, observed, enu, config.scenario,
                    base_radio=config.radio, base_fading=config.fading)

    out = _out_dir(args)
    paths = {
        "history": os.path.join(out, "history.csv"),
        "result": os.path.join(out, "calibration_result.txt"),
        "config": os.path.join(out, "resolved_config.txt"),
    }
    _write_text(paths["history"], history_to_csv(result))
    _write_text(paths["result"], result_summary(result))
    _write_text(paths["config"], render_config(config))

    print(result_summary(result), end="")
    for name in ("history", "result", "config"):
        print(f"wrote {paths[name]}")
    return 0


def cmd_pdr(args) -> int:
    config = _apply_grid_flags(_load_config(args), args)
    try:
        delivery_log = parse_log_csv(_read_text(args.log))
    except ValueError as exc:
        raise DataError(f"{args.log}: {exc}") from None
    curve = pdr_curve(delivery_log, config.scenario.bin_width_m, DIRECTION_CHOICES[args.direction])

    out = _out_dir(args)
    path = os.path.join(out, "pdr.csv")
    _write_text(path, export_pdr_csv(curve))
    total = sum(b.sent for b in curve)
    print(f"{len(curve)} bins of {config.scenario.bin_width_m} m covering {total} packets")
    print(f"wrote {path}")
    return 0


def cmd_heatmap(args) -> int:
    config = _apply_grid_flags(_load_config(args), args)
    try:
        delivery_log = parse_log_csv(_read_text(args.log))
    except ValueError as exc:
        raise DataError(f"{args.log}: {exc}") from None
    grid = heatmap(delivery_log, config.scenario.heatmap_cell_m,
                   DIRECTION_CHOICES[args.direction])

    out = _out_dir(args)
    path = os.path.join(out, "heatmap.csv")
    _write_text(path, export_heatmap_csv(grid))
    total = sum(c.sent for c in grid)
    print(f"{len(grid)} cells of {config.scenario.heatmap_cell_m} m covering {total} packets")
    print(f"wrote {path}")
    return 0


def cmd_synth(args) -> int:
    config = _load_config(args)
    if args.spec:
        try:
            config = parse_config(_read_text(args.spec), base=config)
        except ValueError as exc:
            raise UsageError(f"{args.spec}: {exc}") from None
    config = _apply_grid_flags(_apply_preset_flag(config, args), args)
    if args.seed is not None:
        config = replace(config, synth=replace(config.synth, seed=args.seed))

    try:
        spec = SyntheticSpec(
            radio=config.radio,
            fading=config.fading,
            waypoints_enu_m=list(config.synth.waypoints_enu_m),
            leg_speeds_mps=list(config.synth.leg_speeds_mps),
            duration_s=config.synth.duration_s,
            seed=config.synth.seed,
            sample_rate_hz=config.synth.sample_rate_hz,
            rsu_geodetic=config.rsu,
        )
    except ValueError as exc:
        raise UsageError(f"synthetic route: {exc}") from None

    trace, delivery_log, curve = generate_synthetic(spec, config.scenario)

    out = _out_dir(args)
    paths = {
        "trace": os.path.join(out, "trace.csv"),
        "pdr": os.path.join(out, "observed_pdr.csv"),
        "planted": os.path.join(out, "planted_params.txt"),
        "config": os.path.join(out, "resolved_config.txt"),
    }
    _write_text(paths["trace"], export_trace_csv(trace))
    _write_text(paths["pdr"], export_pdr_csv(curve))
    _write_text(paths["planted"], planted_params_text(config))
    _write_text(paths["config"], render_config(config))

    sent = len(delivery_log)
    delivered = delivery_log.delivered_count()
    overall = 100.0 * delivered / sent if sent else 0.0
    print(f"trace records {len(trace)}, packets sent {sent}, "
          f"delivered {delivered}, overall pdr {overall:.4f}%")
    for name in ("trace", "pdr", "planted", "config"):
        print(f"wrote {paths[name]}")
    return 0


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", metavar="PATH", help="key=value configuration file")
    sub.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
    sub.add_argument("-v", "--verbose", action="count", default=0,
                     help="log progress to stderr (repeat for more detail)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="v2xcal",
        description="V2X channel simulation and calibration toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", help="replay a trace CSV through the channel")
    _add_common(p)
    p.add_argument("trace", help="vehicle trace CSV")
    p.add_argument("--preset", choices=sorted(PRESET_GENOMES), help="named channel preset")
    p.add_argument("--seed", type=int, metavar="N", help="scenario master seed")
    p.add_argument("--bin-width", type=float, metavar="M", help="PDR bin width, meters")
    p.add_argument("--cell", type=float, metavar="M", help="heatmap cell size, meters")
    p.add_argument("--direction", choices=sorted(DIRECTION_CHOICES), default="both",
                   help="restrict PDR/heatmap aggregation to one message direction")
    p.add_argument("--epoch-ms", action="store_true",
                   help="trace time column holds integer epoch milliseconds")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="fit the channel genome to an observed PDR curve")
    _add_common(p)
    p.add_argument("observed_pdr", help="observed PDR curve CSV")
    p.add_argument("trace", help="vehicle trace CSV the curve was measured on")
    p.add_argument("--preset", choices=sorted(PRESET_GENOMES),
                   help="channel preset supplying non-gene base parameters")
    p.add_argument("--seed", type=int, metavar="N", help="search master seed")
    p.add_argument("--generations", type=int, metavar="N", help="number of generations")
    p.add_argument("--population", type=int, metavar="N", help="population size")
    p.add_argument("--jobs", type=int, metavar="N",
                   help="parallel fitness workers (never changes results)")
    p.add_argument("--freeze", action="append", metavar="GENE[=VALUE]", default=[],
                   help="pin a gene for the whole search (repeatable)")
    p.add_argument("--bin-width", type=float, metavar="M", help="PDR bin width, meters")
    p.add_argument("--epoch-ms", action="store_true",
                   help="trace time column holds integer epoch milliseconds")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("pdr", help="re-aggregate a delivery log into a PDR curve")
    _add_common(p)
    p.add_argument("log", help="delivery log CSV")
    p.add_argument("--bin-width", type=float, metavar="M", help="PDR bin width, meters")
    p.add_argument("--direction", choices=sorted(DIRECTION_CHOICES), default="both")
    p.set_defaults(func=cmd_pdr)

    p = sub.add_parser("heatmap", help="re-aggregate a delivery log into a spatial grid")
    _add_common(p)
    p.add_argument("log", help="delivery log CSV")
    p.add_argument("--cell", type=float, metavar="M", help="heatmap cell size, meters")
    p.add_argument("--direction", choices=sorted(DIRECTION_CHOICES), default="both")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth dataset")
    _add_common(p)
    p.add_argument("spec", nargs="?",
                   help="route/channel spec file (key=value; default: bundled drive-by)")
    p.add_argument("--preset", choices=sorted(PRESET_GENOMES), help="planted channel preset")
    p.add_argument("--seed", type=int, metavar="N", help="dataset seed")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0

    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(stream=sys.stderr, level=level,
                        format="%(levelname)s %(name)s: %(message)s", force=True)

    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
